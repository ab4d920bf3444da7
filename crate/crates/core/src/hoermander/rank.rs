use serde::{Deserialize, Serialize};

use crate::field::Point;
use crate::linalg;
use crate::model::ModelSpec;

use super::cascade::cascade_word;
use super::star::star_word;
use super::{BracketEngine, BracketPath, BracketWord, HoermanderError};

/// Singular values count toward rank iff `s > RANK_TOL * s_max`.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanningVector {
    pub descriptor: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// Diffusion algebra plus `L_k` for every path of length `<= depth`.
    Star,
    /// Diffusion algebra plus `L_1..L_L` and `[V1,[V1,V0]]` (requires `M = N = 1`).
    Cascade,
    /// Diffusion algebra plus the given words.
    Custom(Vec<BracketWord>),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Star => "star",
            Strategy::Cascade => "cascade",
            Strategy::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSample {
    pub t: f64,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankCertificate {
    pub model: String,
    pub point: Vec<f64>,
    pub t_samples: Vec<f64>,
    pub strategy: String,
    pub depth: usize,
    /// Candidate vectors evaluated at the first time sample.
    pub vectors: Vec<SpanningVector>,
    /// Singular values at the sample with the smallest rank.
    pub singular_values: Vec<f64>,
    /// Minimum rank over the time samples.
    pub rank: usize,
    pub required_rank: usize,
    pub samples: Vec<RankSample>,
    pub tolerance: f64,
    /// Set when the diffusion algebra was still growing at the depth cap
    /// and does not yet span the noise directions.
    pub depth_cap_binding: bool,
    pub verdict: Verdict,
}

/// Right-normed brackets among `V1..VM` up to `depth` (level 1 first).
pub fn diffusion_words(m: usize, depth: usize) -> Vec<Vec<BracketWord>> {
    let mut levels: Vec<Vec<BracketWord>> = vec![(1..=m).map(BracketWord::Gen).collect()];
    for _ in 1..depth {
        let prev = levels.last().unwrap();
        let mut next = Vec::new();
        for k in 1..=m {
            for w in prev {
                if let BracketWord::Gen(j) = w {
                    if *j == k {
                        continue;
                    }
                }
                next.push(BracketWord::br(BracketWord::Gen(k), w.clone()));
            }
        }
        levels.push(next);
    }
    levels
}

fn strategy_words(m: &ModelSpec, strategy: &Strategy, depth: usize) -> Result<Vec<BracketWord>, HoermanderError> {
    Ok(match strategy {
        Strategy::Star => (1..=depth).flat_map(|l| BracketPath::all_of_len(m.m, l)).map(|p| star_word(&p)).collect(),
        Strategy::Cascade => {
            if m.n != 1 || m.m != 1 {
                return Err(HoermanderError::Shape(format!(
                    "cascade strategy needs M = N = 1, got N = {}, M = {}",
                    m.n, m.m
                )));
            }
            (1..=m.l + 1).map(|n| cascade_word(n, m.l)).collect::<Result<_, _>>()?
        }
        Strategy::Custom(ws) => {
            for w in ws {
                if !w.has_diffusion() {
                    return Err(HoermanderError::Path(format!("{w} has no diffusion generator")));
                }
                if w.max_gen() > m.m {
                    return Err(HoermanderError::Path(format!("{w} uses a generator beyond M")));
                }
            }
            ws.clone()
        }
    })
}

/// Rank certificate for the local Hörmander condition at `phi` (a state `(x, y, z)`).
pub fn hoermander_rank(
    m: &ModelSpec,
    phi: &[f64],
    strategy: &Strategy,
    depth: usize,
    t_samples: &[f64],
) -> Result<RankCertificate, HoermanderError> {
    let engine = BracketEngine::new(m)?;
    engine.rank_certificate(phi, strategy, depth, t_samples)
}

impl BracketEngine {
    pub fn rank_certificate(
        &self,
        phi: &[f64],
        strategy: &Strategy,
        depth: usize,
        t_samples: &[f64],
    ) -> Result<RankCertificate, HoermanderError> {
        let m = self.model();
        if depth == 0 {
            return Err(HoermanderError::Shape("depth must be at least 1".into()));
        }
        if phi.len() != m.state_dim() {
            return Err(HoermanderError::Shape(format!(
                "point has {} entries, state dimension is {}",
                phi.len(),
                m.state_dim()
            )));
        }
        let t_samples: Vec<f64> = if t_samples.is_empty() { vec![0.0] } else { t_samples.to_vec() };
        let levels = diffusion_words(m.m, depth);
        let mut words: Vec<BracketWord> = levels.iter().flatten().cloned().collect();
        words.extend(strategy_words(m, strategy, depth)?);

        let fields = words.iter().map(|w| self.bracket(w)).collect::<Result<Vec<_>, _>>()?;
        let dim = m.state_dim();
        let mut samples = Vec::new();
        let mut first_vectors = Vec::new();
        for (si, &t) in t_samples.iter().enumerate() {
            let p = Point::from_state(t, phi, m.n, m.l);
            p.check(m.n, m.l)?;
            let cols = fields.iter().map(|f| f.evaluate(&p)).collect::<Result<Vec<_>, _>>()?;
            let sv = linalg::singular_values(dim, &cols);
            let rank = linalg::numerical_rank(&sv, super::RANK_TOL);
            if si == 0 {
                first_vectors = words
                    .iter()
                    .zip(&cols)
                    .map(|(w, c)| SpanningVector { descriptor: w.to_string(), values: c.clone() })
                    .collect();
            }
            samples.push(RankSample { t, rank, singular_values: sv });
        }
        let worst = samples.iter().min_by_key(|s| s.rank).expect("nonempty samples");
        let rank = worst.rank;
        let singular_values = worst.singular_values.clone();
        let depth_cap_binding = rank < dim && self.diffusion_still_growing(phi, &levels)?;
        Ok(RankCertificate {
            model: m.name.clone(),
            point: phi.to_vec(),
            t_samples,
            strategy: strategy.name().to_string(),
            depth,
            vectors: first_vectors,
            singular_values,
            rank,
            required_rank: dim,
            samples,
            tolerance: super::RANK_TOL,
            depth_cap_binding,
            verdict: Verdict::from_bool(rank == dim),
        })
    }

    /// Whether the `z`-block rank of the diffusion algebra is below `N` and
    /// increased at the last level.
    fn diffusion_still_growing(&self, phi: &[f64], levels: &[Vec<BracketWord>]) -> Result<bool, HoermanderError> {
        let m = self.model();
        let p = Point::from_state(0.0, phi, m.n, m.l);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut ranks = Vec::new();
        for level in levels {
            for w in level {
                let v = self.bracket(w)?.evaluate(&p)?;
                cols.push(v[m.n + m.l..].to_vec());
            }
            ranks.push(linalg::numerical_rank(&linalg::singular_values(m.n, &cols), super::RANK_TOL));
        }
        let last = *ranks.last().unwrap_or(&0);
        let before = if ranks.len() >= 2 { ranks[ranks.len() - 2] } else { 0 };
        Ok(last < m.n && last > before)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Expr;
    use crate::model::{builtin, BuiltinParams};

    #[test]
    fn diffusion_word_levels() {
        let l = diffusion_words(2, 3);
        assert_eq!(l[0].len(), 2);
        assert_eq!(l[1].len(), 2);
        assert_eq!(l[2].len(), 4);
        assert_eq!(diffusion_words(1, 4)[1].len(), 0);
    }

    #[test]
    fn degenerate_sigma_fails_not_errors() {
        let m =
            builtin("spiral", &BuiltinParams { sigma: Some(vec![vec![Expr::zero()]]), ..Default::default() }).unwrap();
        let c = hoermander_rank(&m, &[1.0, 0.0, 0.0], &Strategy::Star, 4, &[0.0]).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        assert!(c.rank < 3);
    }

    #[test]
    fn toy_cascade_star_full_rank() {
        let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
        let c = hoermander_rank(&m, &[1.0, 1.0, 0.0], &Strategy::Star, 3, &[0.0, 0.5]).unwrap();
        assert_eq!(c.verdict, Verdict::Pass);
        assert_eq!(c.rank, 3);
        assert_eq!(c.samples.len(), 2);
        let sv = &c.singular_values;
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn hh_equilibrium_full_rank() {
        let m = builtin("hodgkin-huxley", &BuiltinParams::default()).unwrap();
        let phi = crate::model::hh_rest_state(&m).unwrap().state();
        let ts: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let c = hoermander_rank(&m, &phi, &Strategy::Star, 4, &ts).unwrap();
        assert_eq!(c.rank, 5);
        assert_eq!(c.verdict, Verdict::Pass);
    }
}
