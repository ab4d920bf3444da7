//! Model specifications: the tuple `(N, L, M, f, g, b, sigma, S0, T, domain)`
//! for the system
//!
//! ```text
//! dX = f(X, Y) dt + dZ
//! dY = g(X, Y) dt
//! dZ = [S0(t) + b(Z)] dt + sigma(Z) dW
//! ```
//!
//! together with the derived drift, the Stratonovich-corrected input drift
//! and the time-space vector fields used for bracket computations.

mod builtin;
mod compiled;
mod config;
mod signal;

pub use builtin::{builtin, builtin_names, hh_rest_state, BuiltinParams, BUILTIN_NAMES};
pub use compiled::CompiledModel;
pub use config::ModelConfig;
pub use signal::{SignalKind, SignalSpec, SineTerm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{self, state_basis, xy_basis, z_basis, Coord, Expr, FieldError, Point, VectorFieldExpr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Closed or half-open interval; `None` bounds are infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(Option<f64>, Option<f64>)", into = "(Option<f64>, Option<f64>)")]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl From<(Option<f64>, Option<f64>)> for Interval {
    fn from((lo, hi): (Option<f64>, Option<f64>)) -> Self {
        Interval { lo, hi }
    }
}

impl From<Interval> for (Option<f64>, Option<f64>) {
    fn from(i: Interval) -> Self {
        (i.lo, i.hi)
    }
}

impl Interval {
    pub const REAL: Interval = Interval { lo: None, hi: None };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo: Some(lo), hi: Some(hi) }
    }

    pub fn lo_or(&self, v: f64) -> f64 {
        self.lo.unwrap_or(v)
    }

    pub fn hi_or(&self, v: f64) -> f64 {
        self.hi.unwrap_or(v)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo.is_none_or(|l| v >= l) && self.hi.is_none_or(|h| v <= h)
    }

    pub fn interior_contains(&self, v: f64) -> bool {
        self.lo.is_none_or(|l| v > l) && self.hi.is_none_or(|h| v < h)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        let v = self.lo.map_or(v, |l| v.max(l));
        self.hi.map_or(v, |h| v.min(h))
    }

    pub fn has_interior(&self) -> bool {
        match (self.lo, self.hi) {
            (Some(l), Some(h)) => l < h,
            _ => true,
        }
    }
}

/// Per-coordinate boxes for the `x`, `y` and `z` blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x: Vec<Interval>,
    pub y: Vec<Interval>,
    pub z: Vec<Interval>,
}

impl Domain {
    pub fn unbounded(n: usize, l: usize) -> Self {
        Domain { x: vec![Interval::REAL; n], y: vec![Interval::REAL; l], z: vec![Interval::REAL; n] }
    }

    /// Intervals in state order `(x, y, z)`.
    pub fn flat(&self) -> Vec<Interval> {
        self.x.iter().chain(&self.y).chain(&self.z).copied().collect()
    }

    pub fn contains_state(&self, s: &[f64]) -> bool {
        self.flat().iter().zip(s).all(|(i, v)| i.contains(*v))
    }

    pub fn interior_contains_state(&self, s: &[f64]) -> bool {
        self.flat().iter().zip(s).all(|(i, v)| i.interior_contains(*v))
    }
}

/// A fully specified model. `sigma` is stored row-major, `N` rows by `M` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub f: Vec<Expr>,
    pub g: Vec<Expr>,
    pub b: Vec<Expr>,
    pub sigma: Vec<Vec<Expr>>,
    pub signal: SignalSpec,
    pub period: f64,
    pub domain: Domain,
}

fn only_xy(e: &Expr) -> bool {
    let c = e.coords();
    !c.t && c.z == 0
}

fn only_z(e: &Expr) -> bool {
    let c = e.coords();
    !c.t && c.x == 0 && c.y == 0
}

impl ModelSpec {
    pub fn state_dim(&self) -> usize {
        2 * self.n + self.l
    }

    /// Checks shapes, coordinate usage, signal periodicity and domain boxes.
    pub fn validate(&self) -> Result<(), ModelError> {
        let (n, l, m) = (self.n, self.l, self.m);
        let bad = |msg: String| Err(ModelError::Invalid(msg));
        if n == 0 || l == 0 || m == 0 {
            return bad(format!("dimensions must be positive, got N={n}, L={l}, M={m}"));
        }
        if self.f.len() != n || self.g.len() != l || self.b.len() != n {
            return bad(format!(
                "f/g/b have lengths {}/{}/{}, expected {n}/{l}/{n}",
                self.f.len(),
                self.g.len(),
                self.b.len()
            ));
        }
        if self.sigma.len() != n || self.sigma.iter().any(|r| r.len() != m) {
            return bad(format!("sigma must be {n}x{m}"));
        }
        for e in self.f.iter().chain(&self.g) {
            if !only_xy(e) {
                return bad(format!("f and g may reference only x, y: {e}"));
            }
            field::check_dims(e, n, l)?;
        }
        for e in self.b.iter().chain(self.sigma.iter().flatten()) {
            if !only_z(e) {
                return bad(format!("b and sigma may reference only z: {e}"));
            }
            field::check_dims(e, n, l)?;
        }
        if self.signal.dim() != n {
            return bad(format!("signal has {} components, expected {n}", self.signal.dim()));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad(format!("period {} not positive", self.period));
        }
        self.signal.check_period()?;
        let ratio = self.period / self.signal.period;
        if self.signal.depends_on_t() && (ratio - ratio.round()).abs() > 1e-9 {
            return bad(format!(
                "model period {} is not a multiple of the signal period {}",
                self.period, self.signal.period
            ));
        }
        let d = &self.domain;
        if d.x.len() != n || d.y.len() != l || d.z.len() != n {
            return bad("domain boxes do not match dimensions".into());
        }
        if d.flat().iter().any(|i| !i.has_interior()) {
            return bad("domain box with empty interior".into());
        }
        Ok(())
    }

    /// `F = (f, g)` over the `(x, y)` basis.
    pub fn big_f(&self) -> VectorFieldExpr {
        let comps = self.f.iter().chain(&self.g).cloned().collect();
        VectorFieldExpr::new(xy_basis(self.n, self.l), comps).expect("validated shape")
    }

    pub fn sigma_col(&self, k: usize) -> VectorFieldExpr {
        let comps = self.sigma.iter().map(|row| row[k].clone()).collect();
        VectorFieldExpr::new(z_basis(self.n), comps).expect("validated shape")
    }

    /// True iff no sigma entry references any coordinate.
    pub fn sigma_is_constant(&self) -> bool {
        self.sigma.iter().flatten().all(|e| e.coords().is_empty())
    }

    pub fn sigma_at(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let env = field::Env::new(0.0, &[], &[], z);
        self.sigma.iter().map(|r| r.iter().map(|e| e.eval(&env)).collect()).collect()
    }

    /// `F(x, y)` evaluated numerically.
    pub fn eval_big_f(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let env = field::Env::new(0.0, x, y, &[]);
        self.f.iter().chain(&self.g).map(|e| e.eval(&env)).collect()
    }

    pub fn derived(&self) -> DerivedFields {
        assemble_time_space_fields(self)
    }
}

/// `b~_r = b_r - 1/2 sum_i sum_j sigma_ij d_{z_i} sigma_rj`.
pub fn stratonovich_drift(m: &ModelSpec) -> VectorFieldExpr {
    let comps = (0..m.n)
        .map(|r| {
            let mut corr = Vec::new();
            for i in 0..m.n {
                for j in 0..m.m {
                    let d = m.sigma[r][j].diff(Coord::Z(i));
                    if d.is_zero() || m.sigma[i][j].is_zero() {
                        continue;
                    }
                    corr.push(Expr::mul([Expr::constant(-0.5), m.sigma[i][j].clone(), d]));
                }
            }
            if corr.is_empty() {
                m.b[r].clone()
            } else {
                let mut terms = vec![m.b[r].clone()];
                terms.extend(corr);
                Expr::add(terms)
            }
        })
        .collect();
    VectorFieldExpr::new(z_basis(m.n), comps).expect("validated shape")
}

/// Composite fields derived from a model.
#[derive(Clone, Debug)]
pub struct DerivedFields {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    /// `F = (f, g)` over `(x, y)`.
    pub big_f: VectorFieldExpr,
    /// Stratonovich input drift over `z`.
    pub b_tilde: VectorFieldExpr,
    /// `S0(t) + b~(z)` over `z` (time-dependent).
    pub b_hat: VectorFieldExpr,
    /// Ito drift `B = (f + S0 + b, g, S0 + b)` over the state basis.
    pub drift: VectorFieldExpr,
    pub sigma_cols: Vec<VectorFieldExpr>,
    /// `V0 = (f + b^, g, b^)` over the state basis; the unit time component is implicit.
    pub v0: VectorFieldExpr,
    /// `V_k = (sigma_k, 0, sigma_k)` over the state basis, `k = 1..M` stored at `k - 1`.
    pub v: Vec<VectorFieldExpr>,
}

impl DerivedFields {
    /// `V0` with its unit time component made explicit.
    pub fn v0_lifted(&self) -> VectorFieldExpr {
        self.v0.lift(Expr::one())
    }

    /// `V_k` (1-based `k`) with its zero time component made explicit.
    pub fn v_lifted(&self, k: usize) -> VectorFieldExpr {
        self.v[k - 1].lift(Expr::zero())
    }

    pub fn state_basis(&self) -> Vec<Coord> {
        state_basis(self.n, self.l)
    }
}

pub fn assemble_time_space_fields(m: &ModelSpec) -> DerivedFields {
    let (n, l) = (m.n, m.l);
    let s0 = m.signal.to_exprs();
    let b_tilde = stratonovich_drift(m);
    let b_hat_c: Vec<Expr> = (0..n).map(|i| Expr::add([s0[i].clone(), b_tilde.component(i).clone()])).collect();
    let b_hat = VectorFieldExpr::new(z_basis(n), b_hat_c.clone()).expect("shape");
    let ito: Vec<Expr> = (0..n).map(|i| Expr::add([s0[i].clone(), m.b[i].clone()])).collect();

    let assemble = |inp: &[Expr]| {
        let mut c: Vec<Expr> = (0..n).map(|i| Expr::add([m.f[i].clone(), inp[i].clone()])).collect();
        c.extend(m.g.iter().cloned());
        c.extend(inp.iter().cloned());
        VectorFieldExpr::new(state_basis(n, l), c).expect("shape")
    };
    let drift = assemble(&ito);
    let v0 = assemble(&b_hat_c);

    let sigma_cols: Vec<VectorFieldExpr> = (0..m.m).map(|k| m.sigma_col(k)).collect();
    let v = sigma_cols
        .iter()
        .map(|col| {
            let mut c: Vec<Expr> = col.components().to_vec();
            c.extend(std::iter::repeat_n(Expr::zero(), l));
            c.extend(col.components().iter().cloned());
            VectorFieldExpr::new(state_basis(n, l), c).expect("shape")
        })
        .collect();
    DerivedFields { n, l, m: m.m, big_f: m.big_f(), b_tilde, b_hat, drift, sigma_cols, v0, v }
}

/// Convenience: a time-space point for a model from flat state.
pub fn point_from_state(m: &ModelSpec, t: f64, state: &[f64]) -> Point {
    Point::from_state(t, state, m.n, m.l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_like(sigma: Vec<Vec<Expr>>, b: Vec<Expr>) -> ModelSpec {
        let n = b.len();
        let m = sigma[0].len();
        ModelSpec {
            name: "test".into(),
            n,
            l: 1,
            m,
            f: vec![Expr::zero(); n],
            g: vec![Expr::x(0)],
            b,
            sigma,
            signal: SignalSpec::zero(n, 1.0),
            period: 1.0,
            domain: Domain::unbounded(n, 1),
        }
    }

    #[test]
    fn stratonovich_linear_sigma() {
        let m = ou_like(vec![vec![Expr::z(0)]], vec![Expr::neg(Expr::z(0))]);
        let bt = stratonovich_drift(&m);
        for z in [-2.0, 0.5, 3.0] {
            let zs = [z];
            let env = field::Env::new(0.0, &[], &[], &zs);
            assert!((bt.component(0).eval(&env) + 1.5 * z).abs() < 1e-15);
        }
    }

    #[test]
    fn stratonovich_diag_square_sigma() {
        let sq = |i| Expr::pow(Expr::z(i), 2.0);
        let m = ou_like(vec![vec![sq(0), Expr::zero()], vec![Expr::zero(), sq(1)]], vec![Expr::zero(), Expr::zero()]);
        let bt = stratonovich_drift(&m);
        // Oracle: -1/2 sum_ij sigma_ij d_i sigma_rj by central differences.
        let sig = |z: [f64; 2]| [[z[0] * z[0], 0.0], [0.0, z[1] * z[1]]];
        let z = [0.7, -1.3];
        let h = 1e-6;
        for r in 0..2 {
            let mut corr = 0.0;
            for i in 0..2 {
                let (mut zp, mut zm) = (z, z);
                zp[i] += h;
                zm[i] -= h;
                for j in 0..2 {
                    let d = (sig(zp)[r][j] - sig(zm)[r][j]) / (2.0 * h);
                    corr += sig(z)[i][j] * d;
                }
            }
            let env = field::Env::new(0.0, &[], &[], &z);
            let got = bt.component(r).eval(&env);
            assert!((got + 0.5 * corr).abs() < 1e-8);
            assert!((got + z[r].powi(3)).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_sigma_keeps_b() {
        let m = ou_like(vec![vec![Expr::constant(2.0)]], vec![Expr::neg(Expr::z(0))]);
        assert_eq!(stratonovich_drift(&m).components(), m.b.as_slice());
    }

    #[test]
    fn validate_catches_bad_coords() {
        let mut m = ou_like(vec![vec![Expr::one()]], vec![Expr::neg(Expr::z(0))]);
        m.validate().unwrap();
        m.g = vec![Expr::z(0)];
        assert!(m.validate().is_err());
        let mut m = ou_like(vec![vec![Expr::x(0)]], vec![Expr::neg(Expr::z(0))]);
        assert!(m.validate().is_err());
        m.sigma = vec![vec![Expr::one()]];
        m.domain.y = vec![Interval::new(1.0, 1.0)];
        assert!(m.validate().is_err());
    }
}
