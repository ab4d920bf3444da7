//! Numerical certification of T-attainability by integrating the closed-loop system.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::hoermander::Verdict;
use crate::model::{CompiledModel, ModelSpec};

use super::ode::{step_count, OdeConfig, Rk4};
use super::path::norm;
use super::plan::{h_dot_into, ControlPlan, HDotScratch};
use super::ControlError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub n: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttainabilityCertificate {
    pub model: String,
    pub period: f64,
    pub target: Vec<f64>,
    pub epsilon: f64,
    pub n_max: usize,
    pub step: f64,
    /// `Psi(nT)` for `n = 0..=n_max` (fewer on divergence).
    pub samples: Vec<GridSample>,
    /// Minimiser over `n >= 1`.
    pub best_n: usize,
    pub best_distance: f64,
    /// `max |w(t) - w_ref(t)|` over all integration nodes.
    pub w_tracking_error: f64,
    /// `max |u(t) - gamma(t)|` over the relocation phase of local plans.
    pub u_tracking_error: Option<f64>,
    pub divergence: Option<String>,
    pub verdict: Verdict,
}

/// Integrates `Psi' = B~(t, Psi) + Sigma(Psi) h'(t)` from the plan's start
/// over `n_max` grid periods and reports the closest grid visit to the target.
pub fn certify_attainability(
    plan: &ControlPlan,
    m: &ModelSpec,
    eps: f64,
    n_max: usize,
    cfg: &OdeConfig,
) -> Result<AttainabilityCertificate, ControlError> {
    let (n, l, mm) = (m.n, m.l, m.m);
    let dim = m.state_dim();
    if plan.start.len() != dim || plan.target.state().len() != dim || plan.rho.dim() != n {
        return Err(ControlError::Invalid("plan does not match the model dimensions".into()));
    }
    if (plan.period - m.period).abs() > 1e-12 * m.period {
        return Err(ControlError::Invalid(format!(
            "plan period {} differs from model period {}",
            plan.period, m.period
        )));
    }
    if plan.mode == super::plan::PlanMode::Local && plan.sharp.is_none() {
        return Err(ControlError::Invalid("local plan lacks its relocation data; plan again".into()));
    }
    if !(cfg.step > 0.0) || !(eps > 0.0) {
        return Err(ControlError::Invalid("step and eps must be positive".into()));
    }
    let cm = CompiledModel::new(m);
    let target = plan.target.state();
    let period = m.period;

    let mut sc = HDotScratch::new(&cm);
    let mut stack = Vec::new();
    let (mut wr, mut wd) = (vec![0.0; n], vec![0.0; n]);
    let mut hd = vec![0.0; mm];
    let (mut fg, mut s0, mut bt, mut sig) = (vec![0.0; n + l], vec![0.0; n], vec![0.0; n], vec![0.0; n * mm]);
    let failure: RefCell<Option<ControlError>> = RefCell::new(None);
    let mut rhs = |t: f64, s: &[f64], out: &mut [f64]| {
        plan.reference_into(&cm, t, &mut stack, &mut wr, &mut wd);
        if let Err(e) = h_dot_into(&cm, t, &wr, &wd, &mut sc, &mut hd) {
            failure.borrow_mut().get_or_insert(e);
            out.fill(f64::NAN);
            return;
        }
        let (x, y, z) = (&s[..n], &s[n..n + l], &s[n + l..]);
        cm.fg(x, y, &mut stack, &mut fg);
        cm.signal(t, &mut s0);
        cm.b_tilde(z, &mut stack, &mut bt);
        cm.sigma(z, &mut stack, &mut sig);
        for i in 0..n {
            let forced: f64 = (0..mm).map(|j| sig[i * mm + j] * hd[j]).sum();
            let dz = s0[i] + bt[i] + forced;
            out[i] = fg[i] + dz;
            out[n + l + i] = dz;
        }
        out[n..n + l].copy_from_slice(&fg[n..]);
    };

    let breaks = plan.breakpoints();
    let mut rk = Rk4::new(dim);
    let mut y = plan.start.clone();
    let mut samples = vec![GridSample { n: 0, t: 0.0, state: y.clone() }];
    let (mut best_n, mut best) = (0usize, f64::INFINITY);
    let mut w_err = 0.0f64;
    let mut u_err = plan.relocation().map(|_| 0.0f64);
    let mut divergence = None;
    let mut stack2 = Vec::new();
    let (mut wr2, mut wd2) = (vec![0.0; n], vec![0.0; n]);
    let (mut gv, mut gdv) = (vec![0.0; n], vec![0.0; n]);
    let mut track = |t: f64, y: &[f64], w_err: &mut f64, u_err: &mut Option<f64>| {
        plan.reference_into(&cm, t, &mut stack2, &mut wr2, &mut wd2);
        let e = y[n + l..].iter().zip(&wr2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        *w_err = w_err.max(e);
        if let (Some(r), Some(ue)) = (plan.relocation(), u_err.as_mut()) {
            if t <= r.t1 {
                r.eval_into(t, &mut gv, &mut gdv);
                let e = y[..n].iter().zip(&gv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                *ue = ue.max(e);
            }
        }
    };
    track(0.0, &y, &mut w_err, &mut u_err);

    'periods: for k in 0..n_max {
        let (a, b) = (k as f64 * period, (k + 1) as f64 * period);
        let mut knots = vec![a];
        knots.extend(breaks.iter().copied().filter(|&t| t > a + 1e-12 && t < b - 1e-12));
        knots.push(b);
        for w in knots.windows(2) {
            let (steps, h) = step_count(w[1] - w[0], cfg.step);
            for i in 0..steps {
                let t = w[0] + i as f64 * h;
                rk.step(&mut rhs, t, &mut y, h);
                if let Some(e) = failure.borrow_mut().take() {
                    return Err(e);
                }
                if y.iter().any(|v| !v.is_finite()) {
                    divergence = Some(format!("non-finite state after t = {t}"));
                    break 'periods;
                }
                track(t + h, &y, &mut w_err, &mut u_err);
            }
        }
        let d = norm(&y.iter().zip(&target).map(|(p, q)| p - q).collect::<Vec<_>>());
        if d < best {
            best = d;
            best_n = k + 1;
        }
        samples.push(GridSample { n: k + 1, t: b, state: y.clone() });
    }
    Ok(AttainabilityCertificate {
        model: m.name.clone(),
        period,
        target,
        epsilon: eps,
        n_max,
        step: cfg.step,
        samples,
        best_n,
        best_distance: best,
        w_tracking_error: w_err,
        u_tracking_error: u_err,
        verdict: Verdict::from_bool(divergence.is_none() && best < eps),
        divergence,
    })
}
