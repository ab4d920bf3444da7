use anyhow::{bail, Context, Result};
use clap::Args;
use hypolab_core::field::Expr;
use hypolab_core::model::{CompiledModel, Interval, ModelSpec};
use hypolab_core::recurrence::{
    ergodic_consistency, estimate_lyapunov_drift, hitting_frequency, interspike_intervals, occupation_histogram,
    return_time_stats, upcrossings, window_around, ErgodicOptions, LyapunovSpec, DEFAULT_DRIFT_REPLICATES,
    DEFAULT_HITTING_REPLICATES, DEFAULT_REFRACTORY, DEFAULT_SPIKE_THRESHOLD,
};
use hypolab_core::sim::{derive_seed, simulate_grid_chain, simulate_path, GridChain};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{BoxArg, Inline, StateArg, Vector};
use crate::commands::{need, or, sim_config, starts, ModelArgs};
use crate::output::csv_rows;
use crate::{Report, Run};

fn grid_chains(m: &ModelSpec, starts: &[Vec<f64>], dt: f64, periods: usize, seed: u64) -> Result<Vec<GridChain>> {
    let cm = CompiledModel::new(m);
    starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let cfg = sim_config(dt, periods as f64 * m.period, derive_seed(seed, i as u64, 0), 1);
            simulate_grid_chain(m, &cm, s, &cfg).with_context(|| format!("start {i}"))
        })
        .collect()
}

fn check_box(b: &BoxArg, m: &ModelSpec, flag: &str) -> Result<Vec<Interval>> {
    if b.0.len() != m.state_dim() {
        bail!("--{flag} has {} intervals, state dimension is {}", b.0.len(), m.state_dim());
    }
    Ok(b.0.clone())
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct HittingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state or `rest`; repeat for several starts.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<Vec<StateArg>>,
    /// Centre of the target ball.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<StateArg>,
    /// Ball radius (default 0.3).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Grid periods searched (default 200).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Replicates per start (default 100).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Step size (default 1e-2).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Base seed; each chain or replicate derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn hitting(a: &mut HittingArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let starts = starts(&a.start, &m)?;
    let target = need(&a.target, "target")?.resolve(&m)?;
    let seed = run.seed(&mut a.seed);
    let cfg = sim_config(or(&mut a.dt, 1e-2), m.period, seed, 1);
    let r = hitting_frequency(
        &m,
        &starts,
        &target,
        or(&mut a.eps, 0.3),
        or(&mut a.n_max, 200),
        or(&mut a.replicates, DEFAULT_HITTING_REPLICATES),
        &cfg,
    )?;
    run.out.write_with("first_hits.csv", |w| {
        let rows = r.per_start.iter().enumerate().flat_map(|(i, s)| {
            s.first_hits
                .iter()
                .enumerate()
                .map(move |(k, h)| vec![i.to_string(), k.to_string(), h.map_or(String::new(), |n| n.to_string())])
        });
        csv_rows(w, &["start", "replicate", "first_hit"], rows)
    })?;
    let freqs: Vec<String> = r.per_start.iter().map(|s| format!("{:.3}", s.frequency)).collect();
    Ok(Report {
        verdict: Some(r.per_start.iter().all(|s| s.frequency > 0.0)),
        summary: format!("{}: hitting frequencies [{}]", m.name, freqs.join(", ")),
        result: serde_json::to_value(&r)?,
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct DriftArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Lyapunov function and compact set as JSON `{"v": sexpr, "k": [[lo, hi], ...]}`;
    /// defaults to V = 1 + |state|^2.
    #[arg(long)]
    pub lyapunov: Option<Inline<LyapunovSpec>>,
    /// Compact set K, `lo:hi,...`; overrides the one in --lyapunov.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<BoxArg>,
    /// Evaluation point; repeat for several.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<Vec<StateArg>>,
    /// Replicates per point (default 200).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Step size (default 1e-3).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Base seed; each chain or replicate derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn norm_sq_plus_one(m: &ModelSpec) -> Expr {
    let mut terms = vec![Expr::one()];
    terms.extend((0..m.n).map(|i| Expr::pow(Expr::x(i), 2.0)));
    terms.extend((0..m.l).map(|i| Expr::pow(Expr::y(i), 2.0)));
    terms.extend((0..m.n).map(|i| Expr::pow(Expr::z(i), 2.0)));
    Expr::add(terms)
}

pub fn drift(a: &mut DriftArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let points = starts(&a.point, &m).context("drift needs at least one --point")?;
    let mut spec = match &a.lyapunov {
        Some(l) => l.0.clone(),
        None => LyapunovSpec { v: norm_sq_plus_one(&m), k: Vec::new() },
    };
    if let Some(k) = &a.k {
        spec.k = check_box(k, &m, "k")?;
    }
    if spec.k.is_empty() {
        bail!("missing --k");
    }
    let seed = run.seed(&mut a.seed);
    let cfg = sim_config(or(&mut a.dt, 1e-3), m.period, seed, 1);
    let r = estimate_lyapunov_drift(&m, &spec, &points, or(&mut a.replicates, DEFAULT_DRIFT_REPLICATES), &cfg)?;
    run.out.write_with("drift.csv", |w| {
        let rows = r.points.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                p.in_k.to_string(),
                p.v.to_string(),
                p.pv.to_string(),
                p.se.to_string(),
                p.drift.to_string(),
                p.drift_lower95.to_string(),
                p.diverged.to_string(),
            ]
        });
        csv_rows(w, &["point", "in_k", "v", "pv", "se", "drift", "drift_lower95", "diverged"], rows)
    })?;
    Ok(Report {
        verdict: Some(r.outside_positive_95),
        summary: format!("{}: inf drift outside K {:.4} (se {:.2e})", m.name, r.inf_outside.value, r.inf_outside.se),
        result: json!({ "v": spec.v.to_string(), "k": spec.k, "report": r }),
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct HistogramArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state or `rest`; repeat to pool several chains.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<Vec<StateArg>>,
    /// Window `lo:hi,...`; alternatively --center and --half-width.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<BoxArg>,
    /// Window centre, used with --half-width.
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<Vector>,
    /// Half-width of a cube window around --center.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Bins per coordinate (default 10).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Grid periods per chain (default 1000).
    #[arg(long)]
    pub periods: Option<usize>,
    /// Step size (default 1e-2).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Base seed; each chain or replicate derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn histogram(a: &mut HistogramArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let starts = starts(&a.start, &m)?;
    let window = match (&a.window, &a.center) {
        (Some(w), _) => check_box(w, &m, "window")?,
        (None, Some(c)) => check_box(&BoxArg(window_around(&c.0, need(&a.half_width, "half-width")?)), &m, "center")?,
        (None, None) => bail!("missing --window or --center"),
    };
    let seed = run.seed(&mut a.seed);
    let bins = or(&mut a.bins, 10);
    let chains = grid_chains(&m, &starts, or(&mut a.dt, 1e-2), or(&mut a.periods, 1000), seed)?;
    let h = occupation_histogram(&chains, &window, bins)?;
    run.out.write_with("histogram.csv", |w| {
        let d = window.len();
        let mut header = vec!["bin".to_string()];
        header.extend((1..=d).map(|i| format!("c{i}")));
        header.extend(["count", "mass", "density"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = (0..h.counts.len()).map(|b| {
            let mut r = vec![b.to_string()];
            let mut rem = b;
            let mut centre = vec![0.0; d];
            for j in (0..d).rev() {
                let (lo, hi) = (window[j].lo.unwrap(), window[j].hi.unwrap());
                let k = rem % bins;
                rem /= bins;
                centre[j] = lo + (k as f64 + 0.5) * (hi - lo) / bins as f64;
            }
            r.extend(centre.iter().map(f64::to_string));
            r.extend([h.counts[b].to_string(), h.mass[b].to_string(), h.density[b].to_string()]);
            r
        });
        csv_rows(w, &header, rows)
    })?;
    Ok(Report {
        verdict: None,
        summary: format!("{}: {} of {} grid samples in the window", m.name, h.window_samples, h.total_samples),
        result: serde_json::to_value(&h)?,
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct ReturnsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state, or `rest`.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<StateArg>,
    /// Target box `lo:hi,...` over the state.
    #[arg(long = "set", allow_hyphen_values = true)]
    pub set: Option<BoxArg>,
    /// Grid periods (default 10000).
    #[arg(long)]
    pub periods: Option<usize>,
    /// Step size (default 1e-2).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Base seed; each chain or replicate derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn returns(a: &mut ReturnsArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let start = need(&a.start, "start")?.resolve(&m)?;
    let set = check_box(&need(&a.set, "set")?, &m, "set")?;
    let seed = run.seed(&mut a.seed);
    let chain = grid_chains(&m, &[start], or(&mut a.dt, 1e-2), or(&mut a.periods, 10_000), seed)?.remove(0);
    let r = return_time_stats(&chain, &set);
    run.out.write_with("return_times.csv", |w| {
        csv_rows(w, &["return", "gap"], r.gaps.iter().enumerate().map(|(i, g)| vec![i.to_string(), g.to_string()]))
    })?;
    Ok(Report {
        verdict: None,
        summary: format!(
            "{}: {} visits, mean return {}, censored fraction {:.4}",
            m.name,
            r.visits,
            r.mean.map_or("n/a".into(), |v| format!("{v:.3}")),
            r.censored_fraction
        ),
        result: serde_json::to_value(&r)?,
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct IsiArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state, or `rest`.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<StateArg>,
    /// Horizon (default 2000).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step size (default 1e-3).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Keep every stride-th step when detecting spikes (default 5).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Upcrossing level of x1 (default 50).
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Minimum time between spikes (default 2).
    #[arg(long)]
    pub refractory: Option<f64>,
    /// Base seed; each chain or replicate derives its own seed from it.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn isi(a: &mut IsiArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let start = need(&a.start, "start")?.resolve(&m)?;
    let seed = run.seed(&mut a.seed);
    let cfg = sim_config(or(&mut a.dt, 1e-3), or(&mut a.horizon, 2000.0), seed, or(&mut a.stride, 5));
    let p = simulate_path(&m, &start, &cfg)?;
    let (th, rf) = (or(&mut a.threshold, DEFAULT_SPIKE_THRESHOLD), or(&mut a.refractory, DEFAULT_REFRACTORY));
    let isi = interspike_intervals(&p, th, rf)?;
    let x1: Vec<f64> = p.states.iter().map(|s| s[0]).collect();
    let spikes = upcrossings(&p.times, &x1, th, rf);
    run.out.write_with("isi.csv", |w| {
        let rows = spikes.iter().enumerate().map(|(i, t)| {
            let gap = if i == 0 { String::new() } else { isi[i - 1].to_string() };
            vec![i.to_string(), t.to_string(), gap]
        });
        csv_rows(w, &["spike", "t", "interval"], rows)
    })?;
    let mean = if isi.is_empty() { f64::NAN } else { isi.iter().sum::<f64>() / isi.len() as f64 };
    Ok(Report {
        verdict: None,
        summary: format!("{}: {} spikes, {} intervals, mean {mean:.3}", m.name, spikes.len(), isi.len()),
        result: json!({ "spike_times": spikes, "intervals": isi, "threshold": th, "refractory": rf }),
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct ErgodicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start of chain a.
    #[arg(long, allow_hyphen_values = true)]
    pub start_a: Option<StateArg>,
    /// Start of chain b.
    #[arg(long, allow_hyphen_values = true)]
    pub start_b: Option<StateArg>,
    /// Functional of the state as an s-expression, e.g. `(tanh (x 1))`.
    #[arg(long)]
    pub functional: Option<String>,
    /// Grid periods per chain (default 10000).
    #[arg(long)]
    pub periods: Option<usize>,
    /// Step size (default 1e-2).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Leading fraction discarded (default 0.1).
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Batches for batch-means errors (default 20).
    #[arg(long)]
    pub batches: Option<usize>,
    /// Seed of chain a; chain b uses an independent derived seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn ergodic(a: &mut ErgodicArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let (sa, sb) = (need(&a.start_a, "start-a")?.resolve(&m)?, need(&a.start_b, "start-b")?.resolve(&m)?);
    let text = need(&a.functional, "functional")?;
    let f = Expr::parse(&text).with_context(|| format!("parsing functional `{text}`"))?;
    let seed = run.seed(&mut a.seed);
    let seed_b = derive_seed(seed, 1, 0);
    run.seeds.push(seed_b);
    let horizon = or(&mut a.periods, 10_000) as f64 * m.period;
    let dt = or(&mut a.dt, 1e-2);
    let d = ErgodicOptions::default();
    let opts = ErgodicOptions { burn_in: or(&mut a.burn_in, d.burn_in), batches: or(&mut a.batches, d.batches) };
    let r = ergodic_consistency(
        &m,
        &sa,
        &sb,
        &f,
        &sim_config(dt, horizon, seed, 1),
        &sim_config(dt, horizon, seed_b, 1),
        &opts,
    )?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Report {
        verdict: Some(r.consistent),
        summary: format!(
            "{}: averages {:.5} and {:.5}, difference {:.3e}, combined se {:.3e}",
            m.name, r.a.mean, r.b.mean, r.difference, r.combined_se
        ),
        result: serde_json::to_value(&r)?,
    })
}
