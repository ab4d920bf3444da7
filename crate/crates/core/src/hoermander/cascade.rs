//! Drift-iterated brackets `L_1 = [V0, V1]`, `L_n = [V0, L_{n-1}]` for
//! scalar noise, and the cascade conditions (H1)/(H2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{Coord, Env, Expr, Point};
use crate::model::{Interval, ModelSpec};

use super::rank::Verdict;
use super::{BracketEngine, BracketWord, HoermanderError};

/// `L_n` for `1 <= n <= l`, and `[V1,[V1,V0]]` for `n = l + 1`.
pub fn cascade_word(n: usize, l: usize) -> Result<BracketWord, HoermanderError> {
    use BracketWord::Gen;
    if n == 0 || n > l + 1 {
        return Err(HoermanderError::Path(format!("cascade index {n} outside 1..={}", l + 1)));
    }
    if n == l + 1 {
        return Ok(BracketWord::br(Gen(1), BracketWord::br(Gen(1), Gen(0))));
    }
    let mut w = BracketWord::br(Gen(0), Gen(1));
    for _ in 1..n {
        w = BracketWord::br(Gen(0), w);
    }
    Ok(w)
}

fn require_scalar(m: &ModelSpec) -> Result<(), HoermanderError> {
    if m.n != 1 || m.m != 1 {
        return Err(HoermanderError::Shape(format!("cascade structure needs M = N = 1, got N = {}, M = {}", m.n, m.m)));
    }
    Ok(())
}

impl BracketEngine {
    pub fn cascade_bracket(&self, n: usize, p: &Point) -> Result<Vec<f64>, HoermanderError> {
        require_scalar(self.model())?;
        self.eval_word(&cascade_word(n, self.model().l)?, p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub verdict: Verdict,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub h1: ConditionVerdict,
    pub h2: ConditionVerdict,
    pub samples: usize,
    pub tolerance: f64,
}

/// Relative tolerance for the nonzero requirements.
pub const NONZERO_TOL: f64 = 1e-6;

fn xi(i: usize) -> Coord {
    if i == 0 {
        Coord::X(0)
    } else {
        Coord::Y(i - 1)
    }
}

fn xi_name(i: usize) -> String {
    if i == 0 {
        "x".into()
    } else {
        format!("y{i}")
    }
}

fn big_f_name(j: usize) -> String {
    if j == 0 {
        "f".into()
    } else {
        format!("g{j}")
    }
}

/// Samples the `(x, y)` box `region` (length `1 + L`, bounded) at its center
/// and `samples` seeded uniform points, checking (H1) and (H2).
pub fn check_cascade_conditions(
    m: &ModelSpec,
    region: &[Interval],
    samples: usize,
    seed: u64,
) -> Result<CascadeReport, HoermanderError> {
    require_scalar(m)?;
    let dim = 1 + m.l;
    if region.len() != dim {
        return Err(HoermanderError::Shape(format!("region needs {dim} intervals")));
    }
    if region.iter().any(|i| i.lo.is_none() || i.hi.is_none() || !i.has_interior()) {
        return Err(HoermanderError::Shape("region must be a bounded box".into()));
    }
    let big_f: Vec<Expr> = m.f.iter().chain(&m.g).cloned().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = vec![region.iter().map(|i| 0.5 * (i.lo.unwrap() + i.hi.unwrap())).collect()];
    for _ in 0..samples {
        pts.push(region.iter().map(|i| rng.random_range(i.lo.unwrap()..i.hi.unwrap())).collect());
    }
    let eval = |e: &Expr, p: &[f64]| e.eval(&Env::new(0.0, &p[..1], &p[1..], &[]));
    let scale = |p: &[f64]| 1.0 + big_f.iter().map(|e| eval(e, p).abs()).fold(0.0, f64::max);

    // (H1): structural zeros first, then the chain links.
    let mut h1 = ConditionVerdict { verdict: Verdict::Pass, witness: None };
    'outer: for i in 0..m.l {
        for j in i + 2..dim {
            let d = big_f[j].diff(xi(i));
            if !d.is_zero() {
                h1 = ConditionVerdict {
                    verdict: Verdict::Fail,
                    witness: Some(format!("d{}/d{} is not identically zero: {d}", big_f_name(j), xi_name(i))),
                };
                break 'outer;
            }
        }
        let link = big_f[i + 1].diff(xi(i));
        for p in &pts {
            let v = eval(&link, p);
            if !(v.abs() > NONZERO_TOL * scale(p)) {
                h1 = ConditionVerdict {
                    verdict: Verdict::Fail,
                    witness: Some(format!("d{}/d{} = {v:e} at {p:?}", big_f_name(i + 1), xi_name(i))),
                };
                break 'outer;
            }
        }
    }

    // (H2): f_x g1_xx - f_xx g1_x != 0.
    let x = Coord::X(0);
    let (fx, fxx) = (m.f[0].diff(x), m.f[0].diff(x).diff(x));
    let (gx, gxx) = (m.g[0].diff(x), m.g[0].diff(x).diff(x));
    let mut h2 = ConditionVerdict { verdict: Verdict::Pass, witness: None };
    for p in &pts {
        let v = eval(&fx, p) * eval(&gxx, p) - eval(&fxx, p) * eval(&gx, p);
        if !(v.abs() > NONZERO_TOL * scale(p)) {
            h2 = ConditionVerdict {
                verdict: Verdict::Fail,
                witness: Some(format!("f_x g1_xx - f_xx g1_x = {v:e} at {p:?}")),
            };
            break;
        }
    }
    Ok(CascadeReport { h1, h2, samples: pts.len(), tolerance: NONZERO_TOL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoermander::{star_word, BracketPath, StarMode};
    use crate::model::{builtin, BuiltinParams, Domain, SignalSpec};

    fn boxed(c: &[f64], r: f64) -> Vec<Interval> {
        c.iter().map(|&v| Interval::new(v - r, v + r)).collect()
    }

    #[test]
    fn cascade_first_bracket_is_negated_star() {
        let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
        let e = BracketEngine::new(&m).unwrap();
        let p = Point::new(0.0, vec![1.0], vec![1.0], vec![-0.4]);
        let l1 = e.cascade_bracket(1, &p).unwrap();
        for (a, b) in l1.iter().zip([5.0, -2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12, "{l1:?}");
        }
        let s = e.star_bracket(&BracketPath::new(vec![1], 1).unwrap(), &p, StarMode::Nested).unwrap();
        for (a, b) in l1.iter().zip(&s) {
            assert!((a + b).abs() < 1e-12);
        }
        let last = e.cascade_bracket(2, &p).unwrap();
        let w = e.eval_word(&BracketWord::parse("[V1,[V1,V0]]").unwrap(), &p).unwrap();
        assert_eq!(last, w);
        assert!(e.cascade_bracket(3, &p).is_err());
        let _ = star_word(&BracketPath::new(vec![1], 1).unwrap());
    }

    #[test]
    fn cascade_structural_zeros() {
        let m = builtin("toy-cascade", &BuiltinParams { cascade_len: Some(3), ..Default::default() }).unwrap();
        let e = BracketEngine::new(&m).unwrap();
        for n in 1..=3 {
            let f = e.bracket(&cascade_word(n, 3).unwrap()).unwrap();
            // Reduced part (x, y1..y3): components n+2..=L+1 (1-based) vanish symbolically.
            for c in n + 1..4 {
                assert!(f.component(c).is_zero(), "n={n} c={c}: {}", f.component(c));
            }
        }
    }

    #[test]
    fn toy_cascade_conditions_pass() {
        let m = builtin("toy-cascade", &BuiltinParams { cascade_len: Some(3), ..Default::default() }).unwrap();
        for c in [[1.0, 1.0, 1.0, 1.0], [-1.0, 1.0, 1.0, 1.0]] {
            let r = check_cascade_conditions(&m, &boxed(&c, 0.05), 64, 7).unwrap();
            assert_eq!(r.h1.verdict, Verdict::Pass, "{:?}", r.h1.witness);
            assert_eq!(r.h2.verdict, Verdict::Pass, "{:?}", r.h2.witness);
        }
    }

    #[test]
    fn rotor_chain_one_fails_h1() {
        let m = builtin("rotor-chain-1", &BuiltinParams::default()).unwrap();
        let r = check_cascade_conditions(&m, &boxed(&[0.3; 6], 0.5), 32, 1).unwrap();
        assert_eq!(r.h1.verdict, Verdict::Fail);
        let w = r.h1.witness.unwrap();
        assert!(w.contains("/dy1"), "{w}");
    }

    #[test]
    fn decoupled_g1_fails_first_link() {
        let m = ModelSpec {
            name: "decoupled".into(),
            n: 1,
            l: 1,
            m: 1,
            f: vec![Expr::neg(Expr::x(0))],
            g: vec![Expr::neg(Expr::y(0))],
            b: vec![Expr::neg(Expr::z(0))],
            sigma: vec![vec![Expr::one()]],
            signal: SignalSpec::zero(1, 1.0),
            period: 1.0,
            domain: Domain::unbounded(1, 1),
        };
        let r = check_cascade_conditions(&m, &boxed(&[0.0, 0.0], 1.0), 8, 0).unwrap();
        assert_eq!(r.h1.verdict, Verdict::Fail);
        assert!(r.h1.witness.unwrap().starts_with("dg1/dx = 0e0"));
        let two = builtin("toy-mexicanhat", &BuiltinParams::default()).unwrap();
        assert!(matches!(check_cascade_conditions(&two, &boxed(&[0.0; 3], 1.0), 8, 0), Err(HoermanderError::Shape(_))));
    }
}
