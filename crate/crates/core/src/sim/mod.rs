//! Euler–Maruyama simulation of the Itô system with the `X`–`Z` noise coupling,
//! grid-chain extraction and seeded parallel ensembles.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CompiledModel, ModelError, ModelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clamp {
    #[default]
    None,
    ClampToBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Every `stride`-th step is stored; grid nodes are always kept at full precision.
    pub stride: usize,
    /// Per-coordinate policy over `(x, y, z)`; empty means no clamping anywhere.
    #[serde(default)]
    pub clamp: Vec<Clamp>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-3, horizon: 10.0, seed: 0, stride: 1, clamp: Vec::new() }
    }
}

impl SimConfig {
    pub fn validate(&self, dim: usize) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Invalid(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= self.dt) {
            return Err(SimError::Invalid(format!("horizon {} shorter than dt {}", self.horizon, self.dt)));
        }
        if self.stride == 0 {
            return Err(SimError::Invalid("stride must be at least 1".into()));
        }
        if !self.clamp.is_empty() && self.clamp.len() != dim {
            return Err(SimError::Invalid(format!("clamp policy has {} entries, state has {dim}", self.clamp.len())));
        }
        Ok(())
    }

    /// Number of steps `round(horizon / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Clamp every `y` coordinate to its box (the gating variables of conductance models).
    pub fn clamp_y(mut self, n: usize, l: usize) -> Self {
        self.clamp =
            (0..2 * n + l).map(|i| if (n..n + l).contains(&i) { Clamp::ClampToBox } else { Clamp::None }).collect();
        self
    }
}

/// SplitMix64 finaliser, used to derive independent stream seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `(a, b)` under `base`.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ a.wrapping_mul(0x9E37_79B9)) ^ b)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub steps: usize,
    pub t_end: f64,
    pub clamp_events: Vec<u64>,
}

/// Runs the scheme from `phi0`, calling `observe(step, t, state)` at step 0
/// and after every step; returning `false` stops the run.
///
/// Per step: `dZ = (S0(t) + b(Z)) dt + sigma(Z) dW`, `dX = f(X, Y) dt + dZ`,
/// `dY = g(X, Y) dt`.
pub fn simulate_with<F>(
    m: &ModelSpec,
    cm: &CompiledModel,
    phi0: &[f64],
    cfg: &SimConfig,
    mut observe: F,
) -> Result<SimSummary, SimError>
where
    F: FnMut(usize, f64, &[f64]) -> bool,
{
    let (n, l, mm) = (cm.n, cm.l, cm.m);
    let dim = cm.state_dim();
    cfg.validate(dim)?;
    if phi0.len() != dim {
        return Err(SimError::Invalid(format!("start has {} entries, state has {dim}", phi0.len())));
    }
    if !m.domain.contains_state(phi0) {
        return Err(SimError::Invalid(format!("start {phi0:?} lies outside the domain boxes")));
    }
    let bounds = m.domain.flat();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = cfg.steps();
    let (dt, sq) = (cfg.dt, cfg.dt.sqrt());
    let mut s = phi0.to_vec();
    let mut stack = Vec::new();
    let (mut fg, mut s0, mut b) = (vec![0.0; n + l], vec![0.0; n], vec![0.0; n]);
    let (mut sig, mut dw, mut dz) = (vec![0.0; n * mm], vec![0.0; mm], vec![0.0; n]);
    let mut clamp_events = vec![0u64; dim];
    let mut done = 0;
    if observe(0, 0.0, &s) {
        for k in 0..steps {
            let t = k as f64 * dt;
            let (x, rest) = s.split_at(n);
            let (y, z) = rest.split_at(l);
            cm.fg(x, y, &mut stack, &mut fg);
            cm.signal(t, &mut s0);
            cm.b(z, &mut stack, &mut b);
            cm.sigma(z, &mut stack, &mut sig);
            for w in dw.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *w = sq * g;
            }
            for i in 0..n {
                let noise: f64 = (0..mm).map(|j| sig[i * mm + j] * dw[j]).sum();
                dz[i] = (s0[i] + b[i]) * dt + noise;
            }
            for i in 0..n {
                s[i] += fg[i] * dt + dz[i];
                s[n + l + i] += dz[i];
            }
            for j in 0..l {
                s[n + j] += fg[n + j] * dt;
            }
            if !cfg.clamp.is_empty() {
                for (i, v) in s.iter_mut().enumerate() {
                    if cfg.clamp[i] == Clamp::ClampToBox {
                        let c = bounds[i].clamp(*v);
                        if c != *v {
                            *v = c;
                            clamp_events[i] += 1;
                        }
                    }
                }
            }
            let t1 = (k + 1) as f64 * dt;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Divergence { t: t1 });
            }
            done = k + 1;
            if !observe(k + 1, t1, &s) {
                break;
            }
        }
    }
    Ok(SimSummary { steps: done, t_end: done as f64 * dt, clamp_events })
}

/// Samples `Phi_{nT}`; `offsets[n]` is the distance from `nT` to the node actually used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridChain {
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl GridChain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_offset(&self) -> f64 {
        self.offsets.iter().copied().fold(0.0, f64::max)
    }
}

/// Step indices nearest to `nT` for `n = 0..=floor(horizon / T)`.
pub fn grid_nodes(period: f64, dt: f64, steps: usize) -> Vec<(usize, f64)> {
    let horizon = steps as f64 * dt;
    let count = (horizon / period * (1.0 + 1e-12)).floor() as usize;
    (0..=count)
        .map(|n| {
            let t = n as f64 * period;
            let k = ((t / dt).round() as usize).min(steps);
            (k, t)
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub n: usize,
    pub l: usize,
    pub dt: f64,
    pub stride: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub clamp_events: Vec<u64>,
    /// Full-precision states at the model's grid times.
    pub grid: GridChain,
}

impl PathRecord {
    /// CSV with header `t,x1..,y1..,z1..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_state_csv(&mut w, self.n, self.l, self.times.iter().copied().zip(self.states.iter()))
    }
}

pub fn state_header(n: usize, l: usize) -> String {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=l).map(|i| format!("y{i}")));
    h.extend((1..=n).map(|i| format!("z{i}")));
    h.join(",")
}

pub fn write_state_csv<'a, W: Write>(
    w: &mut W,
    n: usize,
    l: usize,
    rows: impl Iterator<Item = (f64, &'a Vec<f64>)>,
) -> io::Result<()> {
    writeln!(w, "{}", state_header(n, l))?;
    for (t, s) in rows {
        write!(w, "{t}")?;
        for v in s {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn simulate_path(m: &ModelSpec, phi0: &[f64], cfg: &SimConfig) -> Result<PathRecord, SimError> {
    let cm = CompiledModel::new(m);
    simulate_path_compiled(m, &cm, phi0, cfg)
}

fn simulate_path_compiled(
    m: &ModelSpec,
    cm: &CompiledModel,
    phi0: &[f64],
    cfg: &SimConfig,
) -> Result<PathRecord, SimError> {
    let nodes = grid_nodes(m.period, cfg.dt, cfg.steps());
    let mut next = 0;
    let mut rec = PathRecord {
        n: m.n,
        l: m.l,
        dt: cfg.dt,
        stride: cfg.stride,
        seed: cfg.seed,
        grid: GridChain { period: m.period, ..Default::default() },
        ..Default::default()
    };
    let summary = simulate_with(m, cm, phi0, cfg, |k, t, s| {
        if k % cfg.stride == 0 {
            rec.times.push(t);
            rec.states.push(s.to_vec());
        }
        while next < nodes.len() && nodes[next].0 == k {
            rec.grid.times.push(t);
            rec.grid.samples.push(s.to_vec());
            rec.grid.offsets.push((t - nodes[next].1).abs());
            next += 1;
        }
        true
    })?;
    rec.clamp_events = summary.clamp_events;
    Ok(rec)
}

/// Grid chain at multiples of `period`: the stored grid when `period` matches it,
/// exact stored nodes when `period` is a multiple of `dt * stride`, else nearest stored nodes.
pub fn extract_grid_chain(p: &PathRecord, period: f64) -> Result<GridChain, SimError> {
    let horizon = *p.times.last().ok_or_else(|| SimError::Invalid("empty path".into()))?;
    if !(period > 0.0) || period > horizon * (1.0 + 1e-12) {
        return Err(SimError::Invalid(format!("period {period} exceeds the horizon {horizon}")));
    }
    if (period - p.grid.period).abs() <= 1e-12 * period && !p.grid.is_empty() {
        return Ok(p.grid.clone());
    }
    let spacing = p.dt * p.stride as f64;
    let count = (horizon / period * (1.0 + 1e-12)).floor() as usize;
    let mut chain = GridChain { period, ..Default::default() };
    for n in 0..=count {
        let t = n as f64 * period;
        let i = ((t / spacing).round() as usize).min(p.times.len() - 1);
        chain.times.push(p.times[i]);
        chain.samples.push(p.states[i].clone());
        chain.offsets.push((p.times[i] - t).abs());
    }
    Ok(chain)
}

/// Only the grid chain, without storing the path.
pub fn simulate_grid_chain(
    m: &ModelSpec,
    cm: &CompiledModel,
    phi0: &[f64],
    cfg: &SimConfig,
) -> Result<GridChain, SimError> {
    let nodes = grid_nodes(m.period, cfg.dt, cfg.steps());
    let mut next = 0;
    let mut chain = GridChain { period: m.period, ..Default::default() };
    simulate_with(m, cm, phi0, cfg, |k, t, s| {
        while next < nodes.len() && nodes[next].0 == k {
            chain.times.push(t);
            chain.samples.push(s.to_vec());
            chain.offsets.push((t - nodes[next].1).abs());
            next += 1;
        }
        true
    })?;
    Ok(chain)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub start_index: usize,
    pub seed: u64,
    pub result: Result<PathRecord, String>,
}

/// One path per `(start, seed)` pair, in row-major order of the pairs; runs in parallel.
pub fn simulate_batch(
    m: &ModelSpec,
    starts: &[Vec<f64>],
    template: &SimConfig,
    seeds: &[u64],
) -> Result<Vec<BatchItem>, SimError> {
    if starts.is_empty() || seeds.is_empty() {
        return Err(SimError::Invalid("batch needs at least one start and one seed".into()));
    }
    m.validate()?;
    let cm = CompiledModel::new(m);
    let pairs: Vec<(usize, u64)> = (0..starts.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    Ok(pairs
        .into_par_iter()
        .map(|(i, seed)| {
            let cfg = SimConfig { seed, ..template.clone() };
            let result = simulate_path_compiled(m, &cm, &starts[i], &cfg).map_err(|e| e.to_string());
            BatchItem { start_index: i, seed, result }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, BuiltinParams};

    #[test]
    fn same_seed_same_path() {
        let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
        let cfg = SimConfig { dt: 1e-3, horizon: 2.0, seed: 42, ..Default::default() };
        let a = simulate_path(&m, &[0.5, 0.5, 0.0], &cfg).unwrap();
        let b = simulate_path(&m, &[0.5, 0.5, 0.0], &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&m, &[0.5, 0.5, 0.0], &SimConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.states.last(), c.states.last());
    }

    #[test]
    fn grid_chain_counts_and_offsets() {
        let m = builtin("toy-cascade", &BuiltinParams::default()).unwrap();
        let cfg = SimConfig { dt: 1e-2, horizon: 10.0, seed: 1, stride: 7, ..Default::default() };
        let p = simulate_path(&m, &[0.0; 3], &cfg).unwrap();
        let g = extract_grid_chain(&p, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert!(g.max_offset() < 1e-9);
        let off = extract_grid_chain(&p, 0.33).unwrap();
        assert_eq!(off.len(), 31);
        assert!(off.max_offset() <= 0.07 / 2.0 + 1e-12);
        assert!(extract_grid_chain(&p, 11.0).is_err());
    }

    #[test]
    fn config_validation() {
        let m = builtin("spiral", &BuiltinParams::default()).unwrap();
        for cfg in [
            SimConfig { dt: 0.0, ..Default::default() },
            SimConfig { horizon: 1e-4, ..Default::default() },
            SimConfig { stride: 0, ..Default::default() },
            SimConfig { clamp: vec![Clamp::None], ..Default::default() },
        ] {
            assert!(simulate_path(&m, &[0.0; 3], &cfg).is_err());
        }
    }

    #[test]
    fn seeds_are_distinct() {
        let s: std::collections::HashSet<u64> =
            (0..100).flat_map(|a| (0..100).map(move |b| derive_seed(7, a, b))).collect();
        assert_eq!(s.len(), 10_000);
    }
}
