//! Fixed-step classical Runge–Kutta with cubic Hermite dense output.

use serde::{Deserialize, Serialize};

use crate::field::{CompiledExprs, Coord, Env, VectorFieldExpr};

use super::ControlError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    /// Nominal step; spans are split into an integer number of equal steps no longer than this.
    pub step: f64,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig { step: 1e-3 }
    }
}

/// Number of equal steps covering `span` with step at most `h`, and that step.
pub fn step_count(span: f64, h: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, h);
    }
    let k = ((span / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (k, span / k as f64)
}

/// Reusable RK4 stage buffers.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    /// Advances `y` from `t` by `h`. `k1` must already hold `rhs(t, y)`.
    fn advance<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], h: f64) {
        let n = y.len();
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        rhs(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        rhs(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    /// One step from `(t, y)`; returns `rhs(t, y)` evaluated at the start.
    pub fn step<F: FnMut(f64, &[f64], &mut [f64])>(&mut self, rhs: &mut F, t: f64, y: &mut [f64], h: f64) -> &[f64] {
        rhs(t, y, &mut self.k1);
        self.advance(rhs, t, y, h);
        &self.k1
    }
}

/// Nodes `(t_i, y_i, y'_i)` of a fixed-step solution.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("nonempty trajectory")
    }

    fn locate(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s <= t);
        i.clamp(1, self.times.len() - 1) - 1
    }

    /// Cubic Hermite interpolant of the state at `t` (clamped to the span).
    pub fn at(&self, t: f64) -> Vec<f64> {
        self.at_with_derivative(t).0
    }

    /// Interpolated state and its derivative at `t`.
    pub fn at_with_derivative(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        if self.times.len() == 1 {
            return (self.states[0].clone(), self.derivs[0].clone());
        }
        let t = t.clamp(self.t_start(), self.t_end());
        let i = self.locate(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        let (d00, d10, d01, d11) =
            (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        let (y0, y1, f0, f1) = (&self.states[i], &self.states[i + 1], &self.derivs[i], &self.derivs[i + 1]);
        let val = (0..y0.len()).map(|k| h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k]).collect();
        let der = (0..y0.len()).map(|k| (d00 * y0[k] + d01 * y1[k]) / h + d10 * f0[k] + d11 * f1[k]).collect();
        (val, der)
    }
}

fn all_finite(y: &[f64]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Integrates `y' = rhs(t, y)` over `[t0, t1]`, storing every node.
pub fn integrate<F: FnMut(f64, &[f64], &mut [f64])>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &OdeConfig,
) -> Result<Trajectory, ControlError> {
    integrate_until(&mut rhs, y0, t0, t1, cfg, |_, _| false)
}

/// As [`integrate`], stopping after the first node at which `stop(t, y)` holds.
pub fn integrate_until<F, S>(
    rhs: &mut F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &OdeConfig,
    mut stop: S,
) -> Result<Trajectory, ControlError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    if !(cfg.step > 0.0) {
        return Err(ControlError::Invalid(format!("step {} must be positive", cfg.step)));
    }
    if !all_finite(y0) {
        return Err(ControlError::Divergence { t: t0, message: "non-finite initial state".into() });
    }
    let (k, h) = step_count(t1 - t0, cfg.step);
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    let mut tr = Trajectory::default();
    let mut t = t0;
    if !stop(t, &y) {
        for i in 0..k {
            let pre = y.clone();
            let d = rk.step(rhs, t, &mut y, h).to_vec();
            tr.times.push(t);
            tr.states.push(pre);
            tr.derivs.push(d);
            t = t0 + (i + 1) as f64 * h;
            if !all_finite(&y) {
                return Err(ControlError::Divergence { t: tr.t_end(), message: "non-finite state".into() });
            }
            if stop(t, &y) {
                break;
            }
        }
    }
    let mut d = vec![0.0; y.len()];
    rhs(t, &y, &mut d);
    tr.times.push(t);
    tr.states.push(y);
    tr.derivs.push(d);
    Ok(tr)
}

/// Integrates an autonomous-or-not vector field over its own basis
/// (time enters through `t`; the basis must not contain `t`).
pub fn integrate_ode(
    field: &VectorFieldExpr,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &OdeConfig,
) -> Result<Trajectory, ControlError> {
    let basis = field.basis().to_vec();
    if y0.len() != basis.len() {
        return Err(ControlError::Invalid(format!(
            "initial state has {} entries, field has dimension {}",
            y0.len(),
            basis.len()
        )));
    }
    if basis.contains(&Coord::T) {
        return Err(ControlError::Invalid("field basis must not contain t".into()));
    }
    let ext = |f: fn(&Coord) -> Option<usize>| basis.iter().filter_map(f).map(|i| i + 1).max().unwrap_or(0);
    let (nx, ny, nz) = (
        ext(|c| if let Coord::X(i) = c { Some(*i) } else { None }),
        ext(|c| if let Coord::Y(i) = c { Some(*i) } else { None }),
        ext(|c| if let Coord::Z(i) = c { Some(*i) } else { None }),
    );
    let tapes = CompiledExprs::new(field.components());
    let (mut x, mut yv, mut z) = (vec![0.0; nx], vec![0.0; ny], vec![0.0; nz]);
    let mut stack = Vec::new();
    let rhs = |t: f64, s: &[f64], out: &mut [f64]| {
        for (c, &v) in basis.iter().zip(s) {
            match *c {
                Coord::X(i) => x[i] = v,
                Coord::Y(i) => yv[i] = v,
                Coord::Z(i) => z[i] = v,
                Coord::T => unreachable!(),
            }
        }
        tapes.eval_into(&Env::new(t, &x, &yv, &z), &mut stack, out);
    };
    integrate(rhs, y0, t_span.0, t_span.1, cfg)
}
