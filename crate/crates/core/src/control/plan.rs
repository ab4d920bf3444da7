//! Control inputs and multi-phase plans steering `Psi = (u, v, w)` towards a target.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::field::special::smooth_step;
use crate::linalg;
use crate::model::{CompiledModel, ModelSpec, SignalSpec};

use super::kronecker::near_rational;
use super::ode::{integrate_until, OdeConfig, Trajectory};
use super::path::{norm, PathPiece, Segment, SmoothPath};
use super::ControlError;

/// Right-inverts `sigma` (row-major `n x m`) applied to `rhs`, writing `out` (length `m`).
pub fn solve_right_inverse(sigma: &[f64], n: usize, m: usize, rhs: &[f64], out: &mut [f64]) -> Option<()> {
    if n == 1 {
        let s2: f64 = sigma.iter().map(|s| s * s).sum();
        let smax = sigma.iter().fold(0.0f64, |a, s| a.max(s.abs()));
        if !(smax > 0.0) || !(s2 > 0.0) {
            return None;
        }
        for j in 0..m {
            out[j] = sigma[j] * rhs[0] / s2;
        }
        return Some(());
    }
    let a = DMatrix::from_row_slice(n, m, sigma);
    let r = linalg::right_inverse(&a)?;
    let h = r * DMatrix::from_column_slice(n, 1, rhs);
    out.copy_from_slice(h.as_slice());
    Some(())
}

/// Scratch space for evaluating `h'`.
#[derive(Clone, Debug)]
pub struct HDotScratch {
    stack: Vec<f64>,
    s0: Vec<f64>,
    bt: Vec<f64>,
    sig: Vec<f64>,
    rhs: Vec<f64>,
}

impl HDotScratch {
    pub fn new(cm: &CompiledModel) -> Self {
        HDotScratch {
            stack: Vec::new(),
            s0: vec![0.0; cm.n],
            bt: vec![0.0; cm.n],
            sig: vec![0.0; cm.n * cm.m],
            rhs: vec![0.0; cm.n],
        }
    }
}

/// `h' = sigma^{-1}(w) (w' - S0(t) - b~(w))` with the minimum-norm right inverse.
pub fn h_dot_into(
    cm: &CompiledModel,
    t: f64,
    w: &[f64],
    w_dot: &[f64],
    sc: &mut HDotScratch,
    out: &mut [f64],
) -> Result<(), ControlError> {
    cm.signal(t, &mut sc.s0);
    cm.b_tilde(w, &mut sc.stack, &mut sc.bt);
    cm.sigma(w, &mut sc.stack, &mut sc.sig);
    for i in 0..cm.n {
        sc.rhs[i] = w_dot[i] - sc.s0[i] - sc.bt[i];
    }
    solve_right_inverse(&sc.sig, cm.n, cm.m, &sc.rhs, out)
        .ok_or_else(|| ControlError::SingularSigma { t, z: w.to_vec() })
}

/// The open-loop input forcing `w` onto a path `rho`.
#[derive(Clone, Debug)]
pub struct ControlInput {
    cm: CompiledModel,
    rho: SmoothPath,
}

impl ControlInput {
    pub fn new(rho: SmoothPath, m: &ModelSpec) -> Result<Self, ControlError> {
        if rho.dim() != m.n {
            return Err(ControlError::Invalid(format!("path has dimension {}, N = {}", rho.dim(), m.n)));
        }
        Ok(ControlInput { cm: CompiledModel::new(m), rho })
    }

    pub fn rho(&self) -> &SmoothPath {
        &self.rho
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, ControlError> {
        let n = self.cm.n;
        let (mut w, mut wd) = (vec![0.0; n], vec![0.0; n]);
        self.rho.eval_into(t, &mut w, &mut wd);
        let mut out = vec![0.0; self.cm.m];
        h_dot_into(&self.cm, t, &w, &wd, &mut HDotScratch::new(&self.cm), &mut out)?;
        Ok(out)
    }

    /// Evaluates at `samples + 1` equispaced times, failing at the first singular `sigma`.
    pub fn check(&self, t0: f64, t1: f64, samples: usize) -> Result<(), ControlError> {
        for i in 0..=samples {
            self.eval(t0 + (t1 - t0) * i as f64 / samples.max(1) as f64)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum RhoMode {
    RestAtTarget,
    /// `rho' = S* + kappa` with `S*` zero-mean and periodic.
    ZeroMeanPeriodic {
        s_star: SignalSpec,
    },
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Transition from `z0` at `start` to `zstar` at the first grid time `kT` leaving
/// enough room for `|rho'| <= delta` (or `< delta` when `strict`).
fn settle(
    z0: &[f64],
    zstar: &[f64],
    start: f64,
    delta: f64,
    period: f64,
    strict: bool,
    horizon: f64,
) -> Result<(SmoothPath, usize), ControlError> {
    if !(delta > 0.0) || !(period > 0.0) {
        return Err(ControlError::Invalid("delta and T must be positive".into()));
    }
    let dist = norm(&sub(zstar, z0));
    let x = (start + super::path::STEP_SLOPE_MAX * dist / delta) / period;
    let mut k = if strict { x.floor() + 1.0 } else { x.ceil().max(1.0) };
    if k * period <= start {
        k = (start / period).floor() + 1.0;
    }
    if !(k * period <= horizon) {
        return Err(ControlError::Horizon(format!(
            "moving {dist:.3e} with derivative budget {delta:.3e} needs k = {k}, beyond horizon {horizon}"
        )));
    }
    let k = k as usize;
    let end = k as f64 * period;
    if dist == 0.0 {
        return Ok((SmoothPath::constant(zstar.to_vec(), start), k));
    }
    Ok((SmoothPath::transition(z0.to_vec(), zstar.to_vec(), start, end)?, k))
}

/// Steering path from `z0` to `zstar` with derivative budget `delta`; returns
/// the path and `k` (grid periods of `T`, or periods of `T*` in periodic mode).
pub fn synthesize_rho(
    z0: &[f64],
    zstar: &[f64],
    delta: f64,
    period: f64,
    mode: &RhoMode,
    horizon: f64,
) -> Result<(SmoothPath, usize), ControlError> {
    if z0.len() != zstar.len() {
        return Err(ControlError::Invalid("z0 and z* differ in dimension".into()));
    }
    match mode {
        RhoMode::RestAtTarget => settle(z0, zstar, 0.0, delta, period, false, horizon),
        RhoMode::ZeroMeanPeriodic { s_star } => {
            check_zero_mean(s_star)?;
            if s_star.dim() != z0.len() {
                return Err(ControlError::Invalid("S* dimension does not match z".into()));
            }
            let (base, k0) = settle(z0, zstar, 0.0, delta, s_star.period, false, horizon)?;
            let path = SmoothPath::new(base.pieces().to_vec(), Some(s_star.clone()))?;
            Ok((path, k0))
        }
    }
}

/// Mean over one period must vanish to `1e-10`; antiderivatives must be closed-form.
pub fn check_zero_mean(s: &SignalSpec) -> Result<(), ControlError> {
    if s.components.iter().any(|c| c.integral(0.0).is_none()) {
        return Err(ControlError::Invalid("S* components need closed-form antiderivatives".into()));
    }
    let mean = s.mean(1);
    if let Some(v) = mean.iter().find(|v| v.abs() >= 1e-10) {
        return Err(ControlError::Invalid(format!("S* has nonzero mean {v:e}")));
    }
    Ok(())
}

/// Distance from `p` to the polyline through `samples` (closed when it has three or more points).
pub fn orbit_distance(samples: &[Vec<f64>], p: &[f64]) -> f64 {
    match samples.len() {
        0 => f64::INFINITY,
        1 => norm(&sub(p, &samples[0])),
        len => {
            let segs = if len >= 3 { len } else { 1 };
            (0..segs)
                .map(|i| {
                    let (a, b) = (&samples[i], &samples[(i + 1) % len]);
                    let ab = sub(b, a);
                    let ap = sub(p, a);
                    let l2: f64 = ab.iter().map(|v| v * v).sum();
                    let s = if l2 > 0.0 {
                        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / l2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    norm(&ap.iter().zip(&ab).map(|(x, y)| x - s * y).collect::<Vec<_>>())
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// `gamma(t) = (1 - chi(t/t1)) x0 + chi(t/t1) x*(t)`, equal to `x*` from `t1` on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    pub x0: Vec<f64>,
    pub x_star: SignalSpec,
    pub t1: f64,
}

impl Relocation {
    pub fn eval_into(&self, t: f64, val: &mut [f64], der: &mut [f64]) {
        let u = t / self.t1;
        let (c, dc) = (smooth_step(0, u), smooth_step(1, u) / self.t1);
        for (i, k) in self.x_star.components.iter().enumerate() {
            let (xs, dxs) = (k.eval(t), k.derivative(t));
            val[i] = (1.0 - c) * self.x0[i] + c * xs;
            der[i] = dc * (xs - self.x0[i]) + c * dxs;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Simple,
    Local,
    Periodic,
}

/// Opt-in zero-mean excitation appended after the steering phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stagnation {
    pub amplitude: Vec<f64>,
    pub periods: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMetadata {
    /// Derivative budget for simple and periodic modes.
    pub delta0: Option<f64>,
    /// Samples of the attracting orbit in `(x, y)`.
    pub orbit: Option<Vec<Vec<f64>>>,
    pub eps_star: Option<f64>,
    /// `delta(eps*)`, at most `eps*`.
    pub delta_eps: Option<f64>,
    /// `x*(t)` for the relocation phase.
    pub x_star: Option<SignalSpec>,
    pub t1: Option<f64>,
    /// Zero-mean periodic signal for periodic mode; its period is `T*`.
    pub s_star: Option<SignalSpec>,
    /// Orbit period, informational.
    pub t_star: Option<f64>,
    pub stagnation: Option<Stagnation>,
    /// Latest time any phase may end.
    pub horizon: Option<f64>,
}

pub const DEFAULT_HORIZON: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// `phi* = (x*, y*)`.
    pub phi: Vec<f64>,
    pub z: Vec<f64>,
}

impl Target {
    pub fn state(&self) -> Vec<f64> {
        let mut s = self.phi.clone();
        s.extend_from_slice(&self.z);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub start: f64,
    pub end: Option<f64>,
    pub rule: String,
}

/// Relocation data of a local plan: `gamma` and the integrated `(v#, w#)`.
#[derive(Clone, Debug)]
pub struct SharpPhase {
    pub relocation: Relocation,
    pub trajectory: Trajectory,
    pub t2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlPlan {
    pub mode: PlanMode,
    pub model: String,
    pub period: f64,
    pub start: Vec<f64>,
    pub target: Target,
    pub phases: Vec<Phase>,
    /// Reference for `w`; in local mode it starts at `t2`.
    pub rho: SmoothPath,
    pub k: usize,
    /// Time from which `w'` follows the terminal rule.
    pub rest_time: f64,
    pub metadata: PlanMetadata,
    #[serde(skip)]
    pub sharp: Option<SharpPhase>,
}

fn need<T: Clone>(v: &Option<T>, name: &str) -> Result<T, ControlError> {
    v.clone().ok_or_else(|| ControlError::Metadata(format!("missing {name}")))
}

impl ControlPlan {
    /// Times at which the reference or its derivative may have a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.rho.breakpoints();
        if let Some(s) = &self.sharp {
            b.push(s.relocation.t1);
            b.push(s.t2);
        }
        b.push(self.rest_time);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Reference `w_ref(t)` and its derivative.
    pub fn reference_into(&self, cm: &CompiledModel, t: f64, stack: &mut Vec<f64>, val: &mut [f64], der: &mut [f64]) {
        if let Some(s) = &self.sharp {
            if t < s.t2 {
                let n = cm.n;
                let (mut g, mut gd) = (vec![0.0; n], vec![0.0; n]);
                s.relocation.eval_into(t, &mut g, &mut gd);
                let vw = s.trajectory.at(t);
                let mut fg = vec![0.0; n + cm.l];
                cm.fg(&g, &vw[..cm.l], stack, &mut fg);
                val.copy_from_slice(&vw[cm.l..]);
                for i in 0..n {
                    der[i] = gd[i] - fg[i];
                }
                return;
            }
        }
        self.rho.eval_into(t, val, der);
    }

    /// `gamma(t)` during relocation (local plans only).
    pub fn relocation(&self) -> Option<&Relocation> {
        self.sharp.as_ref().map(|s| &s.relocation)
    }
}

/// Builds a plan from `phi0 = (x0, y0, z0)` towards `target`.
pub fn plan_attain(
    m: &ModelSpec,
    phi0: &[f64],
    target: &Target,
    mode: PlanMode,
    meta: &PlanMetadata,
    cfg: &OdeConfig,
) -> Result<ControlPlan, ControlError> {
    m.validate()?;
    let (n, l) = (m.n, m.l);
    if phi0.len() != m.state_dim() {
        return Err(ControlError::Invalid(format!("start has {} entries, expected {}", phi0.len(), m.state_dim())));
    }
    if target.phi.len() != n + l || target.z.len() != n {
        return Err(ControlError::Invalid("target dimensions do not match the model".into()));
    }
    let horizon = meta.horizon.unwrap_or(DEFAULT_HORIZON);
    let period = m.period;
    let z0 = &phi0[n + l..];
    let base = |phases, rho, k, rest_time| ControlPlan {
        mode,
        model: m.name.clone(),
        period,
        start: phi0.to_vec(),
        target: target.clone(),
        phases,
        rho,
        k,
        rest_time,
        metadata: meta.clone(),
        sharp: None,
    };
    let phase = |name: &str, start: f64, end: Option<f64>, rule: &str| Phase {
        name: name.into(),
        start,
        end,
        rule: rule.into(),
    };
    match mode {
        PlanMode::Simple => {
            let delta0 = need(&meta.delta0, "delta0")?;
            let (rho, k) = synthesize_rho(z0, &target.z, delta0, period, &RhoMode::RestAtTarget, horizon)?;
            let steer_end = k as f64 * period;
            let mut phases = vec![phase("steer", 0.0, Some(steer_end), "w = rho, |rho'| <= delta0")];
            let (rho, rest) = match &meta.stagnation {
                None => (rho, steer_end),
                Some(st) => {
                    if st.amplitude.len() != n || st.periods == 0 {
                        return Err(ControlError::Metadata("stagnation needs N amplitudes and periods >= 1".into()));
                    }
                    let end = steer_end + st.periods as f64 * period;
                    let mut pieces: Vec<PathPiece> = rho.pieces().to_vec();
                    let last = pieces.pop().expect("nonempty");
                    if last.start < steer_end {
                        pieces.push(PathPiece { end: Some(steer_end), ..last });
                    }
                    pieces.push(PathPiece {
                        start: steer_end,
                        end: Some(end),
                        segment: Segment::Excitation { center: target.z.clone(), amplitude: st.amplitude.clone() },
                    });
                    pieces.push(PathPiece {
                        start: end,
                        end: None,
                        segment: Segment::Constant { value: target.z.clone() },
                    });
                    phases.push(phase("excite", steer_end, Some(end), "zero-mean excitation of w around z*"));
                    (SmoothPath::new(pieces, None)?, end)
                }
            };
            phases.push(phase("rest", rest, None, "w = z*, w' = 0"));
            Ok(base(phases, rho, k, rest))
        }
        PlanMode::Periodic => {
            let s_star = need(&meta.s_star, "s_star")?;
            let delta0 = need(&meta.delta0, "delta0")?;
            let ratio = s_star.period / period;
            if let Some((p, q)) = near_rational(ratio) {
                return Err(ControlError::Incommensurability { ratio, p, q });
            }
            let (rho, k0) = synthesize_rho(
                z0,
                &target.z,
                delta0,
                period,
                &RhoMode::ZeroMeanPeriodic { s_star: s_star.clone() },
                horizon,
            )?;
            let rest = k0 as f64 * s_star.period;
            let phases = vec![
                phase("steer", 0.0, Some(rest), "w' = S* + kappa, |kappa| <= delta0"),
                phase("periodic", rest, None, "w' = S*"),
            ];
            Ok(base(phases, rho, k0, rest))
        }
        PlanMode::Local => plan_local(m, phi0, target, meta, cfg, horizon).map(|(phases, rho, k, rest, sharp)| {
            let mut p = base(phases, rho, k, rest);
            p.sharp = Some(sharp);
            p
        }),
    }
}

type LocalParts = (Vec<Phase>, SmoothPath, usize, f64, SharpPhase);

fn plan_local(
    m: &ModelSpec,
    phi0: &[f64],
    target: &Target,
    meta: &PlanMetadata,
    cfg: &OdeConfig,
    horizon: f64,
) -> Result<LocalParts, ControlError> {
    let (n, l) = (m.n, m.l);
    let orbit = need(&meta.orbit, "orbit")?;
    let eps_star = need(&meta.eps_star, "eps_star")?;
    let delta = need(&meta.delta_eps, "delta_eps")?;
    let x_star = need(&meta.x_star, "x_star")?;
    let t1 = need(&meta.t1, "t1")?;
    if !(delta > 0.0 && delta <= eps_star) {
        return Err(ControlError::Metadata(format!("need 0 < delta(eps*) = {delta} <= eps* = {eps_star}")));
    }
    if !(t1 > 0.0) || x_star.dim() != n || orbit.iter().any(|p| p.len() != n + l) {
        return Err(ControlError::Metadata("t1, x_star or orbit samples have the wrong shape".into()));
    }
    let relocation = Relocation { x0: phi0[..n].to_vec(), x_star, t1 };
    let cm = CompiledModel::new(m);

    // Phases 1 and 2: u# = gamma, v#' = g(gamma, v#), w#' = gamma' - f(gamma, v#).
    let mut stack = Vec::new();
    let (mut g, mut gd, mut fg) = (vec![0.0; n], vec![0.0; n], vec![0.0; n + l]);
    let reloc = relocation.clone();
    let mut rhs = |t: f64, s: &[f64], out: &mut [f64]| {
        reloc.eval_into(t, &mut g, &mut gd);
        cm.fg(&g, &s[..l], &mut stack, &mut fg);
        out[..l].copy_from_slice(&fg[n..]);
        for i in 0..n {
            out[l + i] = gd[i] - fg[i];
        }
    };
    let mut y0 = phi0[n..n + l].to_vec();
    y0.extend_from_slice(&phi0[n + l..]);
    let mut best = f64::INFINITY;
    let (mut gv, mut gdv) = (vec![0.0; n], vec![0.0; n]);
    let traj = integrate_until(&mut rhs, &y0, 0.0, horizon, cfg, |t, s| {
        if t < t1 {
            return false;
        }
        relocation.eval_into(t, &mut gv, &mut gdv);
        let mut p = gv.clone();
        p.extend_from_slice(&s[..l]);
        let d = orbit_distance(&orbit, &p);
        best = best.min(d);
        d < 0.5 * delta
    })?;
    let t2 = traj.t_end();
    if best >= 0.5 * delta {
        return Err(ControlError::Planning(format!(
            "(u, v) did not enter B(delta/2) of the orbit by t = {t2}; closest distance {best:.3e}"
        )));
    }
    // Phase 3: move w from w#(t2) to z* with |rho'| < delta(eps*).
    let w2 = traj.last()[l..].to_vec();
    let (rho, k) = settle(&w2, &target.z, t2, delta, m.period, true, horizon)?;
    let rest = k as f64 * m.period;
    let phases = vec![
        Phase { name: "relocate".into(), start: 0.0, end: Some(t1), rule: "u = gamma".into() },
        Phase {
            name: "wait".into(),
            start: t1,
            end: Some(t2),
            rule: "u = x*, until (u, v) is within delta/2 of the orbit".into(),
        },
        Phase { name: "settle".into(), start: t2, end: Some(rest), rule: "w = rho, |rho'| < delta(eps*)".into() },
        Phase { name: "rest".into(), start: rest, end: None, rule: "w = z*, w' = 0".into() },
    ];
    Ok((phases, rho, k, rest, SharpPhase { relocation, trajectory: traj, t2 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, BuiltinParams, SignalKind, SineTerm};

    #[test]
    fn rest_mode_budget_and_count() {
        let (p, k) = synthesize_rho(&[0.0], &[1.0], 0.2, 1.0, &RhoMode::RestAtTarget, 1e4).unwrap();
        assert!(k >= 6);
        assert!(p.sampled_sup_derivative(0.0, k as f64 + 1.0, 100_000) <= 0.2);
        assert!(p.sup_derivative_bound() <= 0.2 + 1e-15);
        assert_eq!(p.value(k as f64), vec![1.0]);
        assert_eq!(p.value(0.0), vec![0.0]);
        let (c, k) = synthesize_rho(&[0.3], &[0.3], 0.2, 1.0, &RhoMode::RestAtTarget, 1e4).unwrap();
        assert_eq!(k, 1);
        assert_eq!(c.derivative(0.5), vec![0.0]);
        assert!(matches!(
            synthesize_rho(&[0.0], &[1.0], 1e-9, 1.0, &RhoMode::RestAtTarget, 1e4),
            Err(ControlError::Horizon(_))
        ));
    }

    fn circle_signal() -> SignalSpec {
        let s = |phase| SignalKind::Sinusoids {
            offset: 0.0,
            terms: vec![SineTerm { amplitude: 1.0, frequency: 1.0, phase }],
        };
        SignalSpec { period: 2.0 * std::f64::consts::PI, components: vec![s(std::f64::consts::FRAC_PI_2), s(0.0)] }
    }

    #[test]
    fn periodic_mode_returns_to_target() {
        let mode = RhoMode::ZeroMeanPeriodic { s_star: circle_signal() };
        let (p, k0) = synthesize_rho(&[0.0, 0.0], &[1.0, -2.0], 0.5, 1.0, &mode, 1e4).unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        for j in 0..5 {
            let v = p.value((k0 + j) as f64 * tp);
            assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12, "{v:?}");
        }
        assert_eq!(p.value(0.0), vec![0.0, 0.0]);
        assert!(p.sup_piece_derivative() <= 0.5);
        let biased = SignalSpec::constant(&[1.0, 0.0], 1.0);
        assert!(
            synthesize_rho(&[0.0; 2], &[1.0; 2], 0.5, 1.0, &RhoMode::ZeroMeanPeriodic { s_star: biased }, 1e4).is_err()
        );
    }

    #[test]
    fn constant_path_input_and_projection() {
        let m = builtin("toy-cascade", &BuiltinParams { amplitude: Some(0.0), ..Default::default() }).unwrap();
        let ci = ControlInput::new(SmoothPath::constant(vec![0.7], 0.0), &m).unwrap();
        // sigma = 1, b~(z) = -z, S0 = 0: h' = 0 - 0 + z*.
        assert!((ci.eval(3.0).unwrap()[0] - 0.7).abs() < 1e-15);
        let mut out = [0.0; 3];
        solve_right_inverse(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2, 3, &[2.0, -1.0], &mut out).unwrap();
        assert_eq!(out, [2.0, -1.0, 0.0]);
        assert!(solve_right_inverse(&[0.0], 1, 1, &[1.0], &mut out[..1]).is_none());
    }

    #[test]
    fn polyline_distance() {
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!((orbit_distance(&sq, &[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((orbit_distance(&sq, &[-1.0, 0.5]) - 1.0).abs() < 1e-15);
        assert_eq!(orbit_distance(&[vec![1.0, 1.0]], &[1.0, 4.0]), 3.0);
    }
}
