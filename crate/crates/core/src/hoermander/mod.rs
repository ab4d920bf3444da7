//! Iterated Lie brackets of the time-space fields `V0, V1, ..., VM` and
//! rank certificates for the local Hörmander condition.
//!
//! Brackets are formed over the time-space basis `(t, x, y, z)` with `V0`
//! carrying the unit time component; every bracket that involves at least one
//! diffusion field has a time component that simplifies to the literal zero,
//! which [`BracketEngine::bracket`] asserts before dropping the slot.

mod cascade;
mod rank;
mod star;

pub use cascade::{cascade_word, check_cascade_conditions, CascadeReport, ConditionVerdict};
pub use rank::{
    diffusion_words, hoermander_rank, RankCertificate, RankSample, SpanningVector, Strategy, Verdict, RANK_TOL,
};
pub use star::{
    check_star_conditions, multi_indices, star_word, CoeffTable, StarConditionMode, StarConditionReport, StarMode,
};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Coord, Expr, FieldError, Point, VectorFieldExpr};
use crate::model::{DerivedFields, ModelError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoermanderError {
    #[error("bracket path error: {0}")]
    Path(String),
    #[error("unsupported shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Column-index path `kappa = (k1, ..., kl)` with `1 <= k_i <= M`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BracketPath(Vec<usize>);

impl BracketPath {
    pub fn new(indices: Vec<usize>, m: usize) -> Result<Self, HoermanderError> {
        if indices.is_empty() {
            return Err(HoermanderError::Path("empty path".into()));
        }
        if let Some(k) = indices.iter().find(|&&k| k == 0 || k > m) {
            return Err(HoermanderError::Path(format!("index {k} outside 1..={m}")));
        }
        Ok(BracketPath(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, n: usize) -> BracketPath {
        BracketPath(self.0[..n].to_vec())
    }

    /// All paths of length `l` over `1..=m`, in lexicographic order.
    pub fn all_of_len(m: usize, l: usize) -> Vec<BracketPath> {
        let mut out = vec![vec![]];
        for _ in 0..l {
            out = out
                .into_iter()
                .flat_map(|p: Vec<usize>| {
                    (1..=m).map(move |k| {
                        let mut q = p.clone();
                        q.push(k);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(BracketPath).collect()
    }
}

impl fmt::Display for BracketPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// A formal bracket expression in the generators `V0..VM`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BracketWord {
    Gen(usize),
    Br(Box<BracketWord>, Box<BracketWord>),
}

impl BracketWord {
    pub fn br(a: BracketWord, b: BracketWord) -> BracketWord {
        BracketWord::Br(Box::new(a), Box::new(b))
    }

    /// True iff some diffusion generator `V_k`, `k >= 1`, occurs.
    pub fn has_diffusion(&self) -> bool {
        match self {
            BracketWord::Gen(k) => *k >= 1,
            BracketWord::Br(a, b) => a.has_diffusion() || b.has_diffusion(),
        }
    }

    pub fn max_gen(&self) -> usize {
        match self {
            BracketWord::Gen(k) => *k,
            BracketWord::Br(a, b) => a.max_gen().max(b.max_gen()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            BracketWord::Gen(_) => 1,
            BracketWord::Br(a, b) => a.depth() + b.depth(),
        }
    }

    /// Parses `V1`, `[V1,V0]`, `[V1,[V1,V0]]` and so on (whitespace ignored).
    pub fn parse(s: &str) -> Result<BracketWord, HoermanderError> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (w, rest) = parse_word(&s)?;
        if !rest.is_empty() {
            return Err(HoermanderError::Path(format!("trailing input '{rest}'")));
        }
        Ok(w)
    }
}

fn parse_word(s: &str) -> Result<(BracketWord, &str), HoermanderError> {
    if let Some(rest) = s.strip_prefix('[') {
        let (a, rest) = parse_word(rest)?;
        let rest = rest.strip_prefix(',').ok_or_else(|| HoermanderError::Path("expected ','".into()))?;
        let (b, rest) = parse_word(rest)?;
        let rest = rest.strip_prefix(']').ok_or_else(|| HoermanderError::Path("expected ']'".into()))?;
        return Ok((BracketWord::br(a, b), rest));
    }
    let rest = s.strip_prefix('V').ok_or_else(|| HoermanderError::Path(format!("expected 'V' or '[' at '{s}'")))?;
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let k = rest[..end].parse::<usize>().map_err(|_| HoermanderError::Path(format!("bad generator index in '{s}'")))?;
    Ok((BracketWord::Gen(k), &rest[end..]))
}

impl fmt::Display for BracketWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketWord::Gen(k) => write!(f, "V{k}"),
            BracketWord::Br(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Builds and caches bracket fields for one model.
pub struct BracketEngine {
    model: ModelSpec,
    fields: DerivedFields,
    cache: Mutex<HashMap<BracketWord, Arc<VectorFieldExpr>>>,
    dalpha: Mutex<HashMap<Vec<u32>, Arc<Vec<Expr>>>>,
}

impl BracketEngine {
    pub fn new(model: &ModelSpec) -> Result<Self, HoermanderError> {
        model.validate()?;
        Ok(BracketEngine {
            fields: model.derived(),
            model: model.clone(),
            cache: Mutex::new(HashMap::new()),
            dalpha: Mutex::new(HashMap::new()),
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn fields(&self) -> &DerivedFields {
        &self.fields
    }

    pub fn dim(&self) -> usize {
        self.model.state_dim()
    }

    /// The word as a field over the time-space basis (time slot explicit).
    pub fn bracket_lifted(&self, w: &BracketWord) -> Result<Arc<VectorFieldExpr>, HoermanderError> {
        if let Some(v) = self.cache.lock().unwrap().get(w) {
            return Ok(v.clone());
        }
        let v = match w {
            BracketWord::Gen(0) => self.fields.v0_lifted(),
            BracketWord::Gen(k) => {
                if *k > self.model.m {
                    return Err(HoermanderError::Path(format!("generator V{k} but M = {}", self.model.m)));
                }
                self.fields.v_lifted(*k)
            }
            BracketWord::Br(a, b) => {
                let fa = self.bracket_lifted(a)?;
                let fb = self.bracket_lifted(b)?;
                let r = fa.lie_bracket(&fb)?;
                if !r.component(0).is_zero() {
                    return Err(FieldError::TimeSlot(r.component(0).to_string()).into());
                }
                r
            }
        };
        let v = Arc::new(v);
        self.cache.lock().unwrap().insert(w.clone(), v.clone());
        Ok(v)
    }

    /// The word as a field over the state basis; the zero time slot is dropped.
    pub fn bracket(&self, w: &BracketWord) -> Result<VectorFieldExpr, HoermanderError> {
        if !w.has_diffusion() {
            return Err(HoermanderError::Path(format!(
                "{w} contains no diffusion generator; only V0 itself carries a time component"
            )));
        }
        Ok(self.bracket_lifted(w)?.drop_time_slot()?)
    }

    pub fn eval_word(&self, w: &BracketWord, p: &Point) -> Result<Vec<f64>, HoermanderError> {
        p.check(self.model.n, self.model.l)?;
        Ok(self.bracket(w)?.evaluate(p)?)
    }

    /// `d^alpha_x F` as expressions over `(x, y)`.
    pub fn d_alpha_f(&self, alpha: &[u32]) -> Arc<Vec<Expr>> {
        if let Some(v) = self.dalpha.lock().unwrap().get(alpha) {
            return v.clone();
        }
        let coords: Vec<Coord> =
            alpha.iter().enumerate().flat_map(|(i, &a)| std::iter::repeat_n(Coord::X(i), a as usize)).collect();
        let v: Arc<Vec<Expr>> = Arc::new(self.fields.big_f.components().iter().map(|e| e.diff_many(&coords)).collect());
        self.dalpha.lock().unwrap().insert(alpha.to_vec(), v.clone());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, BuiltinParams};

    #[test]
    fn words_parse_and_print() {
        let w = BracketWord::parse("[V1, [V1,V0]]").unwrap();
        assert_eq!(w.to_string(), "[V1,[V1,V0]]");
        assert_eq!(w.depth(), 3);
        assert!(BracketWord::parse("[V1,V0").is_err());
        assert!(BracketWord::parse("W1").is_err());
    }

    #[test]
    fn paths_validate() {
        assert!(BracketPath::new(vec![], 1).is_err());
        assert!(BracketPath::new(vec![0], 1).is_err());
        assert!(BracketPath::new(vec![3], 2).is_err());
        assert_eq!(BracketPath::all_of_len(2, 3).len(), 8);
    }

    #[test]
    fn v0_alone_is_rejected_and_generators_checked() {
        let m = builtin("spiral", &BuiltinParams::default()).unwrap();
        let e = BracketEngine::new(&m).unwrap();
        assert!(e.bracket(&BracketWord::Gen(0)).is_err());
        assert!(e.bracket(&BracketWord::Gen(2)).is_err());
        let v1 = e.bracket(&BracketWord::Gen(1)).unwrap();
        assert_eq!(v1.components()[1], Expr::zero());
    }

    #[test]
    fn hh_v1_block_structure() {
        let m = builtin("hodgkin-huxley", &BuiltinParams::default()).unwrap();
        let e = BracketEngine::new(&m).unwrap();
        let v1 = e.bracket(&BracketWord::Gen(1)).unwrap();
        let p = Point::new(0.0, vec![3.0], vec![0.2, 0.4, 0.6], vec![1.0]);
        assert_eq!(v1.evaluate(&p).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
