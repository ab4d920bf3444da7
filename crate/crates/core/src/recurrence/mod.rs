//! Monte Carlo diagnostics on grid chains: Lyapunov drift, hitting frequencies,
//! occupation histograms, return times, interspike intervals and ergodic averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{self, Env, Expr, FieldError, Tape};
use crate::model::{CompiledModel, Interval, ModelError, ModelSpec};
use crate::sim::{
    derive_seed, grid_nodes, simulate_grid_chain, simulate_with, GridChain, PathRecord, SimConfig, SimError,
};

pub const DEFAULT_DRIFT_REPLICATES: usize = 200;
pub const DEFAULT_HITTING_REPLICATES: usize = 100;
pub const DEFAULT_SPIKE_THRESHOLD: f64 = 50.0;
pub const DEFAULT_REFRACTORY: f64 = 2.0;
/// One-sided 95% normal quantile.
pub const Z95: f64 = 1.6448536269514722;

pub const HISTOGRAM_PROXY_NOTE: &str = "empirical proxy for a local density; positive mass is consistent with, \
     not proof of, a lower semi-continuous density; see the bracket-rank certificate";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecurrenceError {
    #[error("invalid Lyapunov function: {0}")]
    InvalidLyapunov(String),
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Scalar functional of the state, evaluated at `t = 0`.
struct StateFn {
    tape: Tape,
    n: usize,
    l: usize,
}

impl StateFn {
    fn new(e: &Expr, n: usize, l: usize) -> Result<Self, RecurrenceError> {
        field::check_dims(e, n, l)?;
        if e.coords().t {
            return Err(RecurrenceError::Invalid("functional must not depend on t".into()));
        }
        Ok(StateFn { tape: Tape::compile(e), n, l })
    }

    fn eval(&self, s: &[f64], stack: &mut Vec<f64>) -> f64 {
        let (n, l) = (self.n, self.l);
        self.tape.eval(&Env { t: 0.0, x: &s[..n], y: &s[n..n + l], z: &s[n + l..] }, stack)
    }
}

fn in_box(b: &[Interval], s: &[f64]) -> bool {
    b.len() == s.len() && b.iter().zip(s).all(|(i, &v)| i.contains(v))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Box of half-width `h` around `c`.
pub fn window_around(c: &[f64], h: f64) -> Vec<Interval> {
    c.iter().map(|&v| Interval::new(v - h, v + h)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovSpec {
    #[serde(with = "field::serde_expr")]
    pub v: Expr,
    /// Compact box over the state `(x, y, z)`.
    pub k: Vec<Interval>,
}

impl LyapunovSpec {
    /// Checks `V >= 1` at the given and randomly sampled points, and that `V` grows
    /// along every unbounded coordinate axis.
    pub fn validate(&self, m: &ModelSpec, points: &[Vec<f64>], seed: u64) -> Result<(), RecurrenceError> {
        let dim = m.state_dim();
        if self.k.len() != dim {
            return Err(RecurrenceError::Invalid(format!("K has {} intervals, state has {dim}", self.k.len())));
        }
        if self.k.iter().any(|i| !(i.lo.is_some() && i.hi.is_some() && i.lo <= i.hi)) {
            return Err(RecurrenceError::Invalid("K must be a nonempty bounded box".into()));
        }
        let vf = StateFn::new(&self.v, m.n, m.l)?;
        let mut stack = Vec::new();
        let dom = m.domain.flat();
        // Sampling region: bounding box of K and the points, doubled, cut to the domain.
        let mut region: Vec<(f64, f64)> = self.k.iter().map(|i| (i.lo_or(0.0), i.hi_or(0.0))).collect();
        for p in points {
            for (r, &v) in region.iter_mut().zip(p) {
                *r = (r.0.min(v), r.1.max(v));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples: Vec<Vec<f64>> = points.to_vec();
        for _ in 0..256 {
            samples.push(
                region
                    .iter()
                    .zip(&dom)
                    .map(|(&(lo, hi), d)| {
                        let (c, h) = ((lo + hi) / 2.0, (hi - lo).max(1.0));
                        d.clamp(c + h * (rng.random::<f64>() * 2.0 - 1.0))
                    })
                    .collect(),
            );
        }
        for s in &samples {
            let v = vf.eval(s, &mut stack);
            if !(v >= 1.0) {
                return Err(RecurrenceError::InvalidLyapunov(format!("V = {v} < 1 at {s:?}")));
            }
        }
        let center: Vec<f64> = self.k.iter().map(|i| (i.lo_or(0.0) + i.hi_or(0.0)) / 2.0).collect();
        for i in 0..dim {
            for sign in [-1.0, 1.0] {
                let unbounded = if sign > 0.0 { dom[i].hi.is_none() } else { dom[i].lo.is_none() };
                if !unbounded {
                    continue;
                }
                let at = |r: f64, stack: &mut Vec<f64>| {
                    let mut p = center.clone();
                    p[i] += sign * r;
                    vf.eval(&p, stack)
                };
                let vals: Vec<f64> = [10.0, 100.0, 1000.0].iter().map(|&r| at(r, &mut stack)).collect();
                if !(vals[1] > vals[0] && vals[2] > vals[1]) {
                    return Err(RecurrenceError::InvalidLyapunov(format!(
                        "V does not grow along coordinate {} ({}): {vals:?}",
                        i + 1,
                        if sign > 0.0 { "+" } else { "-" }
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub point: Vec<f64>,
    pub in_k: bool,
    pub v: f64,
    /// Monte Carlo estimate of `E V(Phi_T)`.
    pub pv: f64,
    pub se: f64,
    pub replicates: usize,
    pub diverged: usize,
    /// `V - PV`.
    pub drift: f64,
    /// One-sided 95% lower bound on `V - PV`.
    pub drift_lower95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub period: f64,
    pub replicates: usize,
    pub points: Vec<DriftPoint>,
    /// Largest `PV` over points in `K`.
    pub sup_k: Option<Estimate>,
    /// Smallest `V - PV` over points outside `K`.
    pub inf_outside: Estimate,
    /// Every outside point has `V - PV > 0` at one-sided 95% confidence.
    pub outside_positive_95: bool,
    pub confidence: String,
}

/// Estimates `P_{0,T} V` at each point by averaging `V(Phi_T)` over seeded replicates.
pub fn estimate_lyapunov_drift(
    m: &ModelSpec,
    spec: &LyapunovSpec,
    points: &[Vec<f64>],
    replicates: usize,
    cfg: &SimConfig,
) -> Result<DriftReport, RecurrenceError> {
    m.validate()?;
    if replicates < 2 {
        return Err(RecurrenceError::Invalid("at least two replicates are needed".into()));
    }
    spec.validate(m, points, cfg.seed)?;
    let inside: Vec<bool> = points.iter().map(|p| in_box(&spec.k, p)).collect();
    if inside.iter().all(|&b| b) {
        return Err(RecurrenceError::DegeneratePartition("no test point lies outside K".into()));
    }
    let cm = CompiledModel::new(m);
    let vf = StateFn::new(&spec.v, m.n, m.l)?;
    let run = SimConfig { horizon: m.period, ..cfg.clone() };
    let mut out = Vec::with_capacity(points.len());
    for (pi, p) in points.iter().enumerate() {
        let finals: Vec<Option<f64>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let c = SimConfig { seed: derive_seed(cfg.seed, pi as u64, r as u64), ..run.clone() };
                let mut last = p.clone();
                match simulate_with(m, &cm, p, &c, |_, _, s| {
                    last.copy_from_slice(s);
                    true
                }) {
                    Ok(_) => Ok(Some(vf.eval(&last, &mut Vec::new()))),
                    Err(SimError::Divergence { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_, SimError>>()?;
        let vals: Vec<f64> = finals.iter().flatten().copied().collect();
        let diverged = replicates - vals.len();
        let (pv, se) = if diverged > 0 { (f64::INFINITY, f64::NAN) } else { mean_se(&vals) };
        let v = vf.eval(p, &mut Vec::new());
        out.push(DriftPoint {
            point: p.clone(),
            in_k: inside[pi],
            v,
            pv,
            se,
            replicates,
            diverged,
            drift: v - pv,
            drift_lower95: v - pv - Z95 * se,
        });
    }
    let sup_k =
        out.iter().filter(|d| d.in_k).max_by(|a, b| a.pv.total_cmp(&b.pv)).map(|d| Estimate { value: d.pv, se: d.se });
    let worst =
        out.iter().filter(|d| !d.in_k).min_by(|a, b| a.drift.total_cmp(&b.drift)).expect("at least one outside point");
    let outside_positive_95 = out.iter().filter(|d| !d.in_k).all(|d| d.drift_lower95 > 0.0);
    Ok(DriftReport {
        period: m.period,
        replicates,
        inf_outside: Estimate { value: worst.drift, se: worst.se },
        sup_k,
        outside_positive_95,
        confidence: format!(
            "per-point one-sided 95% normal bounds from {replicates} replicates; a Monte Carlo estimate, not a proof"
        ),
        points: out,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartHits {
    pub start: Vec<f64>,
    /// First `n >= 1` with `Phi_{nT}` in the ball, per replicate.
    pub first_hits: Vec<Option<usize>>,
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub se: f64,
    pub first_hit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub target: Vec<f64>,
    pub eps: f64,
    pub n_max: usize,
    pub replicates: usize,
    pub per_start: Vec<StartHits>,
}

/// Fraction of replicate grid chains entering `B_eps(target)` at some `1 <= n <= n_max`.
pub fn hitting_frequency(
    m: &ModelSpec,
    starts: &[Vec<f64>],
    target: &[f64],
    eps: f64,
    n_max: usize,
    replicates: usize,
    cfg: &SimConfig,
) -> Result<HittingReport, RecurrenceError> {
    m.validate()?;
    if target.len() != m.state_dim() || !m.domain.interior_contains_state(target) {
        return Err(RecurrenceError::Invalid(format!("target {target:?} is not interior to the domain boxes")));
    }
    if !(eps > 0.0) || n_max == 0 || replicates == 0 || starts.is_empty() {
        return Err(RecurrenceError::Invalid("need eps > 0, n_max >= 1, replicates >= 1 and a start".into()));
    }
    let cm = CompiledModel::new(m);
    let run = SimConfig { horizon: n_max as f64 * m.period, ..cfg.clone() };
    let nodes = grid_nodes(m.period, run.dt, run.steps());
    let mut per_start = Vec::new();
    for (si, start) in starts.iter().enumerate() {
        let first_hits: Vec<Option<usize>> = (0..replicates)
            .into_par_iter()
            .map(|r| {
                let c = SimConfig { seed: derive_seed(cfg.seed, si as u64, r as u64), ..run.clone() };
                let (mut next, mut hit) = (1, None);
                let res = simulate_with(m, &cm, start, &c, |k, _, s| {
                    while next < nodes.len() && nodes[next].0 == k {
                        if dist(s, target) < eps {
                            hit = Some(next);
                            return false;
                        }
                        next += 1;
                    }
                    true
                });
                match res {
                    Ok(_) | Err(SimError::Divergence { .. }) => Ok(hit),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_, SimError>>()?;
        let hits = first_hits.iter().filter(|h| h.is_some()).count() as f64;
        let p = hits / replicates as f64;
        per_start.push(StartHits {
            start: start.clone(),
            frequency: p,
            se: (p * (1.0 - p) / replicates as f64).sqrt(),
            first_hit: first_hits.iter().flatten().min().copied(),
            first_hits,
        });
    }
    Ok(HittingReport { target: target.to_vec(), eps, n_max, replicates, per_start })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationHistogram {
    pub window: Vec<Interval>,
    pub bins: usize,
    /// Row-major over coordinates, first coordinate slowest.
    pub counts: Vec<u64>,
    /// `counts / window_samples`; sums to 1 when any sample lies in the window.
    pub mass: Vec<f64>,
    /// `mass / bin volume`.
    pub density: Vec<f64>,
    pub window_samples: u64,
    pub total_samples: u64,
    /// Fraction of all samples inside the window.
    pub window_mass: f64,
    pub note: String,
}

impl OccupationHistogram {
    /// Flat index of the bin holding `s`, if inside the window.
    pub fn bin_of(&self, s: &[f64]) -> Option<usize> {
        bin_index(&self.window, self.bins, s)
    }
}

fn bin_index(window: &[Interval], bins: usize, s: &[f64]) -> Option<usize> {
    let mut idx = 0;
    for (w, &v) in window.iter().zip(s) {
        if !w.contains(v) {
            return None;
        }
        let (lo, hi) = (w.lo_or(0.0), w.hi_or(0.0));
        let b = (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1);
        idx = idx * bins + b;
    }
    Some(idx)
}

/// Histogram of grid-chain samples over `bins` equal cells per coordinate of `window`.
pub fn occupation_histogram(
    chains: &[GridChain],
    window: &[Interval],
    bins: usize,
) -> Result<OccupationHistogram, RecurrenceError> {
    let total: usize = chains.iter().map(GridChain::len).sum();
    if total == 0 {
        return Err(RecurrenceError::EmptyInput("no grid-chain samples".into()));
    }
    let dim = chains.iter().find(|c| !c.is_empty()).map(|c| c.samples[0].len()).unwrap_or(0);
    if window.len() != dim {
        return Err(RecurrenceError::Invalid(format!("window has {} intervals, state has {dim}", window.len())));
    }
    if window.iter().any(|i| !(i.lo.is_some() && i.hi.is_some() && i.lo < i.hi)) {
        return Err(RecurrenceError::Invalid("window must be a bounded box with nonempty interior".into()));
    }
    if bins == 0 {
        return Err(RecurrenceError::Invalid("bins must be at least 1".into()));
    }
    let cells = bins
        .checked_pow(dim as u32)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| RecurrenceError::Invalid(format!("{bins}^{dim} bins is too many")))?;
    let mut counts = vec![0u64; cells];
    let mut inside = 0u64;
    for s in chains.iter().flat_map(|c| &c.samples) {
        if let Some(i) = bin_index(window, bins, s) {
            counts[i] += 1;
            inside += 1;
        }
    }
    let vol: f64 = window.iter().map(|i| (i.hi_or(0.0) - i.lo_or(0.0)) / bins as f64).product();
    let mass: Vec<f64> = counts.iter().map(|&c| if inside > 0 { c as f64 / inside as f64 } else { 0.0 }).collect();
    Ok(OccupationHistogram {
        window: window.to_vec(),
        bins,
        density: mass.iter().map(|m| m / vol).collect(),
        counts,
        mass,
        window_samples: inside,
        total_samples: total as u64,
        window_mass: inside as f64 / total as f64,
        note: HISTOGRAM_PROXY_NOTE.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeStats {
    pub chain_len: usize,
    pub visits: usize,
    pub first_visit: Option<usize>,
    pub last_visit: Option<usize>,
    /// Gaps between consecutive visit indices.
    pub gaps: Vec<usize>,
    /// `None` when there are no completed returns.
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub median: Option<f64>,
    /// 1 if the chain ends outside `A` after its last visit (an open final gap).
    pub censored: usize,
    /// Length of the open final gap.
    pub censored_tail: usize,
    /// `censored_tail` over the span from the first visit to the chain end.
    pub censored_fraction: f64,
}

/// Return times to the box `a`; a return time is the gap between successive visit indices.
pub fn return_time_stats(chain: &GridChain, a: &[Interval]) -> ReturnTimeStats {
    let visits: Vec<usize> = chain.samples.iter().enumerate().filter(|(_, s)| in_box(a, s)).map(|(i, _)| i).collect();
    let gaps: Vec<usize> = visits.windows(2).map(|w| w[1] - w[0]).collect();
    let n = chain.len();
    let (mean, se) = if gaps.is_empty() {
        (None, None)
    } else {
        let g: Vec<f64> = gaps.iter().map(|&g| g as f64).collect();
        let (m, s) = mean_se(&g);
        (Some(m), s.is_finite().then_some(s))
    };
    let median = (!gaps.is_empty()).then(|| {
        let mut g = gaps.clone();
        g.sort_unstable();
        let k = g.len();
        if k % 2 == 1 {
            g[k / 2] as f64
        } else {
            (g[k / 2 - 1] + g[k / 2]) as f64 / 2.0
        }
    });
    let (tail, span) = match (visits.first(), visits.last()) {
        (Some(&f), Some(&l)) => (n - 1 - l, n - 1 - f),
        _ => (0, 0),
    };
    ReturnTimeStats {
        chain_len: n,
        visits: visits.len(),
        first_visit: visits.first().copied(),
        last_visit: visits.last().copied(),
        gaps,
        mean,
        se,
        median,
        censored: usize::from(tail > 0),
        censored_tail: tail,
        censored_fraction: if span > 0 { tail as f64 / span as f64 } else { 0.0 },
    }
}

/// Upcrossing times of `values` through `threshold` (linearly interpolated),
/// keeping only crossings at least `refractory` after the previous kept one.
pub fn upcrossings(times: &[f64], values: &[f64], threshold: f64, refractory: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for i in 1..times.len().min(values.len()) {
        let (a, b) = (values[i - 1], values[i]);
        if a < threshold && b >= threshold {
            let t = times[i - 1] + (threshold - a) / (b - a) * (times[i] - times[i - 1]);
            if out.last().is_none_or(|&p| t - p >= refractory) {
                out.push(t);
            }
        }
    }
    out
}

/// Interspike intervals of `X_1` along a stored path.
pub fn interspike_intervals(p: &PathRecord, threshold: f64, refractory: f64) -> Result<Vec<f64>, RecurrenceError> {
    if !(refractory >= 0.0) {
        return Err(RecurrenceError::Invalid(format!("refractory = {refractory} must be nonnegative")));
    }
    let x1: Vec<f64> = p.states.iter().map(|s| s[0]).collect();
    let up = upcrossings(&p.times, &x1, threshold, refractory);
    Ok(up.windows(2).map(|w| w[1] - w[0]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicOptions {
    /// Leading fraction of each chain discarded before averaging.
    pub burn_in: f64,
    /// Number of batches for batch-means standard errors.
    pub batches: usize,
}

impl Default for ErgodicOptions {
    fn default() -> Self {
        ErgodicOptions { burn_in: 0.1, batches: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainAverage {
    pub start: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub mean: f64,
    /// Batch-means standard error.
    pub se: f64,
    /// Geweke z-score: first 10% against last 50% of the averaged samples.
    pub geweke_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub a: ChainAverage,
    pub b: ChainAverage,
    pub difference: f64,
    pub combined_se: f64,
    /// `|difference| <= 3 combined_se`.
    pub consistent: bool,
    pub warnings: Vec<String>,
}

fn batch_means_se(v: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(v.len());
    let size = v.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b).map(|i| v[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64).collect();
    mean_se(&means).1
}

fn chain_average(vals: &[f64], opts: &ErgodicOptions) -> (f64, f64, f64) {
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let se = batch_means_se(vals, opts.batches);
    let n = vals.len();
    let (head, tail) = (&vals[..(n / 10).max(1)], &vals[n - (n / 2).max(1)..]);
    let (ha, hb) = (head.iter().sum::<f64>() / head.len() as f64, tail.iter().sum::<f64>() / tail.len() as f64);
    let (sa, sb) = (batch_means_se(head, opts.batches / 2), batch_means_se(tail, opts.batches / 2));
    (mean, se, (ha - hb) / (sa * sa + sb * sb).sqrt())
}

/// Heuristic: `|f|` grows by more than `1e3` between radius 1 and `1e6` along some axis.
fn looks_unbounded(f: &StateFn, dim: usize, dom: &[Interval]) -> bool {
    let mut stack = Vec::new();
    let base = f.eval(&vec![0.0; dim], &mut stack).abs();
    (0..dim).any(|i| {
        [-1.0, 1.0].iter().any(|&sg| {
            let mut p = vec![0.0; dim];
            p[i] = dom[i].clamp(sg * 1e6);
            let v = f.eval(&p, &mut stack).abs();
            !v.is_finite() || v > 1e3 * (1.0 + base)
        })
    })
}

/// Compares grid-chain time averages of `functional` from two starts.
pub fn ergodic_consistency(
    m: &ModelSpec,
    start_a: &[f64],
    start_b: &[f64],
    functional: &Expr,
    cfg_a: &SimConfig,
    cfg_b: &SimConfig,
    opts: &ErgodicOptions,
) -> Result<ErgodicReport, RecurrenceError> {
    m.validate()?;
    if !(0.0..1.0).contains(&opts.burn_in) || opts.batches < 2 {
        return Err(RecurrenceError::Invalid("need 0 <= burn_in < 1 and at least two batches".into()));
    }
    let f = StateFn::new(functional, m.n, m.l)?;
    let mut warnings = Vec::new();
    if looks_unbounded(&f, m.state_dim(), &m.domain.flat()) {
        warnings.push("functional appears unbounded; averages may not converge".to_string());
    }
    let cm = CompiledModel::new(m);
    let run = |start: &[f64], cfg: &SimConfig| -> Result<ChainAverage, RecurrenceError> {
        let chain = simulate_grid_chain(m, &cm, start, cfg)?;
        let skip = (chain.len() as f64 * opts.burn_in).floor() as usize;
        let mut stack = Vec::new();
        let vals: Vec<f64> = chain.samples[skip.max(1)..].iter().map(|s| f.eval(s, &mut stack)).collect();
        if vals.len() < 2 * opts.batches {
            return Err(RecurrenceError::Invalid(format!(
                "only {} grid samples after burn-in; lengthen the horizon",
                vals.len()
            )));
        }
        let (mean, se, geweke_z) = chain_average(&vals, opts);
        Ok(ChainAverage { start: start.to_vec(), seed: cfg.seed, samples: vals.len(), mean, se, geweke_z })
    };
    let (a, b) = rayon::join(|| run(start_a, cfg_a), || run(start_b, cfg_b));
    let (a, b) = (a?, b?);
    for c in [&a, &b] {
        if c.geweke_z.abs() > 3.0 {
            warnings.push(format!("chain from {:?} fails the Geweke check (z = {:.2})", c.start, c.geweke_z));
        }
    }
    let difference = a.mean - b.mean;
    let combined_se = (a.se * a.se + b.se * b.se).sqrt();
    Ok(ErgodicReport { consistent: difference.abs() <= 3.0 * combined_se, difference, combined_se, a, b, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(points: &[f64]) -> GridChain {
        GridChain {
            period: 1.0,
            times: (0..points.len()).map(|i| i as f64).collect(),
            samples: points.iter().map(|&p| vec![p]).collect(),
            offsets: vec![0.0; points.len()],
        }
    }

    #[test]
    fn return_times_of_patterns() {
        let a = [Interval::new(-0.5, 0.5)];
        let alt = return_time_stats(&chain(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]), &a);
        assert_eq!(alt.gaps, vec![2, 2]);
        assert_eq!((alt.censored, alt.censored_tail), (1, 1));
        let always = return_time_stats(&chain(&[0.0; 5]), &a);
        assert_eq!(always.gaps, vec![1; 4]);
        assert_eq!(always.median, Some(1.0));
        let never = return_time_stats(&chain(&[2.0; 5]), &a);
        assert_eq!((never.visits, never.mean, never.median), (0, None, None));
    }

    #[test]
    fn histogram_bins() {
        let c = chain(&[0.0, 0.0, 0.9, 5.0]);
        let h = occupation_histogram(&[c], &[Interval::new(-1.0, 1.0)], 3).unwrap();
        assert_eq!(h.counts, vec![0, 2, 1]);
        assert_eq!((h.window_samples, h.total_samples), (3, 4));
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((h.density[1] - (2.0 / 3.0) / (2.0 / 3.0)).abs() < 1e-12);
        assert!(occupation_histogram(&[], &[Interval::new(-1.0, 1.0)], 3).is_err());
    }

    #[test]
    fn upcrossings_of_sine() {
        let t: Vec<f64> = (0..20_000).map(|i| i as f64 * 1e-3).collect();
        let v: Vec<f64> = t.iter().map(|t| t.sin()).collect();
        let up = upcrossings(&t, &v, 0.5, 1.0);
        let isi: Vec<f64> = up.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(isi.len(), 3);
        for d in isi {
            assert!((d - std::f64::consts::TAU).abs() < 1e-6, "{d}");
        }
        assert!(upcrossings(&t, &vec![0.0; t.len()], 0.5, 1.0).is_empty());
    }
}
