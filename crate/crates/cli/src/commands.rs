use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use hypolab_core::control::{
    certify_attainability, kronecker_search, plan_attain, ControlError, ControlPlan, OdeConfig, PlanMetadata, PlanMode,
    Target,
};
use hypolab_core::field::Expr;
use hypolab_core::hoermander::{
    check_cascade_conditions, check_star_conditions, hoermander_rank, BracketPath, BracketWord, StarConditionMode,
    Strategy,
};
use hypolab_core::model::{builtin, builtin_names, BuiltinParams, CompiledModel, ModelConfig, ModelSpec, SignalSpec};
use hypolab_core::sim::{simulate_batch, state_header, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{parse_paths, BoxArg, Inline, SigmaArg, StateArg, Vector};
use crate::output::csv_rows;
use crate::{Report, Run};

pub fn or<T: Clone>(o: &mut Option<T>, d: T) -> T {
    o.get_or_insert(d).clone()
}

pub fn need<T: Clone>(o: &Option<T>, flag: &str) -> Result<T> {
    o.clone().with_context(|| format!("missing --{flag}"))
}

fn cells<T: ToString>(v: &[T]) -> Vec<String> {
    v.iter().map(T::to_string).collect()
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct Empty {}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct ModelArgs {
    /// Built-in model name (see `models list`).
    #[arg(long)]
    pub model: Option<String>,
    /// Model JSON file, instead of a built-in.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Diffusion override: const:v, diag:v1,..,vN or matrix:row;row;...
    #[arg(long)]
    pub sigma: Option<SigmaArg>,
    /// Amplitude a of the default input a (1 + sin(2 pi t / T)).
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    /// Period T of a built-in.
    #[arg(long)]
    pub period: Option<f64>,
    /// Chain length L of toy-cascade.
    #[arg(long)]
    pub cascade_len: Option<usize>,
    /// Input signal S0 as JSON.
    #[arg(long)]
    pub signal: Option<Inline<SignalSpec>>,
    /// Input drift b, one s-expression per z component (repeat the flag).
    #[arg(long = "b")]
    pub b: Option<Vec<String>>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<ModelSpec> {
        let b = self
            .b
            .as_ref()
            .map(|v| v.iter().map(|s| Expr::parse(s).with_context(|| format!("parsing b component `{s}`"))).collect())
            .transpose()?;
        let signal = self.signal.as_ref().map(|s| s.0.clone());
        match (&self.model, &self.model_file) {
            (Some(_), Some(_)) => bail!("give either --model or --model-file"),
            (None, None) => bail!("missing --model or --model-file"),
            (Some(name), None) => {
                let n = builtin(name, &BuiltinParams { cascade_len: self.cascade_len, ..Default::default() })?.n;
                let params = BuiltinParams {
                    amplitude: self.amplitude,
                    period: self.period,
                    signal,
                    sigma: self.sigma.as_ref().map(|s| s.matrix(n)).transpose()?,
                    b,
                    cascade_len: self.cascade_len,
                };
                Ok(builtin(name, &params)?)
            }
            (None, Some(path)) => {
                if self.amplitude.is_some() || self.period.is_some() || self.cascade_len.is_some() {
                    bail!("--amplitude, --period and --cascade-len apply to built-in models only");
                }
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut m = ModelSpec::from_json(&text)?;
                if let Some(s) = &self.sigma {
                    m.sigma = s.matrix(m.n)?;
                    m.m = m.sigma[0].len();
                }
                if let Some(b) = b {
                    m.b = b;
                }
                if let Some(s) = signal {
                    m.signal = s;
                }
                m.validate()?;
                Ok(m)
            }
        }
    }
}

pub fn models_list() -> Result<Report> {
    let mut rows = Vec::new();
    for name in builtin_names() {
        let m = builtin(name, &BuiltinParams::default())?;
        rows.push(json!({ "name": name, "N": m.n, "L": m.l, "M": m.m, "T": m.period }));
    }
    Ok(Report { verdict: None, result: json!({ "models": rows }), summary: builtin_names().join("\n") })
}

pub fn models_show(a: &mut ModelArgs, run: &mut Run) -> Result<Report> {
    let m = a.build()?;
    let cfg = ModelConfig::from_spec(&m);
    run.out.json("model.json", &cfg)?;
    Ok(Report {
        verdict: None,
        result: serde_json::to_value(&cfg)?,
        summary: format!("{}: N = {}, L = {}, M = {}, T = {}", m.name, m.n, m.l, m.m, m.period),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Star,
    Cascade,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarCheckArg {
    Diagonal,
    ConstantSurjective,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct HoermanderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// State (x, y, z) as comma-separated numbers, or `rest`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<StateArg>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Bracket depth (default 4).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Words for the custom strategy separated by `;`, e.g. `[V1,[V1,V0]]`.
    #[arg(long)]
    pub words: Option<String>,
    /// Equispaced times in [0, T) at which the rank is evaluated (default 10).
    #[arg(long)]
    pub t_samples: Option<usize>,
    /// Also check the cascade conditions on this (x, y) box, `lo:hi,...`.
    #[arg(long, allow_hyphen_values = true)]
    pub cascade_region: Option<BoxArg>,
    /// Random points sampled in the cascade region (default 64).
    #[arg(long)]
    pub cascade_samples: Option<usize>,
    /// Also check the sufficient star conditions.
    #[arg(long, value_enum)]
    pub star_check: Option<StarCheckArg>,
    /// Paths for --star-check: `k1,...,kN+L` (diagonal) or `path;path;...`.
    #[arg(long)]
    pub paths: Option<String>,
    /// Seed for cascade-region sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn hoermander(a: &mut HoermanderArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let point = need(&a.point, "point")?.resolve(&m)?;
    let depth = or(&mut a.depth, 4);
    let strategy = match or(&mut a.strategy, StrategyArg::Star) {
        StrategyArg::Star => Strategy::Star,
        StrategyArg::Cascade => Strategy::Cascade,
        StrategyArg::Custom => Strategy::Custom(
            need(&a.words, "words")?.split(';').map(|w| BracketWord::parse(w.trim())).collect::<Result<_, _>>()?,
        ),
    };
    let k = or(&mut a.t_samples, 10).max(1);
    let ts: Vec<f64> = (0..k).map(|i| i as f64 * m.period / k as f64).collect();
    let cert = hoermander_rank(&m, &point, &strategy, depth, &ts)?;
    let mut ok = cert.verdict.passed();
    let mut summary = format!("{}: rank {} of {} ({})", m.name, cert.rank, cert.required_rank, strategy.name());

    let cascade = match a.cascade_region.clone() {
        Some(region) => {
            let seed = run.seed(&mut a.seed);
            let r = check_cascade_conditions(&m, &region.0, or(&mut a.cascade_samples, 64), seed)?;
            ok &= r.h1.verdict.passed() && r.h2.verdict.passed();
            summary += &format!("; H1 {:?}, H2 {:?}", r.h1.verdict, r.h2.verdict);
            Some(r)
        }
        None => None,
    };
    let star = match a.star_check {
        Some(mode) => {
            let mode = match mode {
                StarCheckArg::Diagonal => StarConditionMode::Diagonal,
                StarCheckArg::ConstantSurjective => StarConditionMode::ConstantSurjective,
            };
            let paths = parse_paths(&need(&a.paths, "paths")?)?
                .into_iter()
                .map(|p| BracketPath::new(p, m.m))
                .collect::<Result<Vec<_>, _>>()?;
            let p = hypolab_core::model::point_from_state(&m, 0.0, &point);
            let r = check_star_conditions(&m, &p, mode, &paths)?;
            ok &= r.verdict.passed();
            summary += &format!("; star conditions {:?}", r.verdict);
            Some(r)
        }
        None => None,
    };
    run.out.write_with("singular_values.csv", |w| {
        let width = cert.samples.first().map_or(0, |s| s.singular_values.len());
        let mut header = vec!["t".to_string(), "rank".to_string()];
        header.extend((1..=width).map(|i| format!("s{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        csv_rows(
            w,
            &header,
            cert.samples.iter().map(|s| {
                let mut r = vec![s.t.to_string(), s.rank.to_string()];
                r.extend(cells(&s.singular_values));
                r
            }),
        )
    })?;
    Ok(Report {
        verdict: Some(ok),
        result: json!({ "rank": cert, "cascade": cascade, "star_conditions": star }),
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanModeArg {
    Simple,
    Local,
    Periodic,
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state (x, y, z), or `rest`.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<StateArg>,
    /// Target (x*, y*).
    #[arg(long, allow_hyphen_values = true)]
    pub target_phi: Option<Vector>,
    /// Target z*.
    #[arg(long, allow_hyphen_values = true)]
    pub target_z: Option<Vector>,
    #[arg(long, value_enum)]
    pub mode: Option<PlanModeArg>,
    /// Derivative budget for simple and periodic plans.
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Latest time any phase may end.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Full plan metadata as JSON; --delta0 and --horizon override its fields.
    #[arg(long)]
    pub metadata: Option<Inline<PlanMetadata>>,
    /// RK4 step (default 1e-3).
    #[arg(long)]
    pub step: Option<f64>,
    /// Samples of the reference written to reference.csv (default 2001).
    #[arg(long)]
    pub samples: Option<usize>,
}

fn build_plan(a: &mut PlanArgs, m: &ModelSpec) -> Result<(ControlPlan, OdeConfig)> {
    let start = need(&a.start, "start")?.resolve(m)?;
    let target = Target { phi: need(&a.target_phi, "target-phi")?.0, z: need(&a.target_z, "target-z")?.0 };
    let mut meta = a.metadata.clone().map(|m| m.0).unwrap_or_default();
    if a.delta0.is_some() {
        meta.delta0 = a.delta0;
    }
    if a.horizon.is_some() {
        meta.horizon = a.horizon;
    }
    let mode = match or(&mut a.mode, PlanModeArg::Simple) {
        PlanModeArg::Simple => PlanMode::Simple,
        PlanModeArg::Local => PlanMode::Local,
        PlanModeArg::Periodic => PlanMode::Periodic,
    };
    let cfg = OdeConfig { step: or(&mut a.step, OdeConfig::default().step) };
    Ok((plan_attain(m, &start, &target, mode, &meta, &cfg)?, cfg))
}

pub fn control(a: &mut PlanArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let (plan, _) = build_plan(a, &m)?;
    let samples = or(&mut a.samples, 2001).max(2);
    let cm = CompiledModel::new(&m);
    let t_end = plan.rest_time + m.period;
    let mut stack = Vec::new();
    let (mut val, mut der) = (vec![0.0; m.n], vec![0.0; m.n]);
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_end * i as f64 / (samples - 1) as f64;
        plan.reference_into(&cm, t, &mut stack, &mut val, &mut der);
        let mut r = vec![t.to_string()];
        r.extend(cells(&val));
        r.extend(cells(&der));
        rows.push(r);
    }
    let mut header = vec!["t".to_string()];
    header.extend((1..=m.n).map(|i| format!("w{i}")));
    header.extend((1..=m.n).map(|i| format!("dw{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.out.write_with("reference.csv", |w| csv_rows(w, &header, rows))?;
    let phases: Vec<String> = plan.phases.iter().map(|p| p.name.clone()).collect();
    Ok(Report {
        verdict: None,
        summary: format!("{} plan, phases {}, rest from t = {}", m.name, phases.join(" > "), plan.rest_time),
        result: serde_json::to_value(&plan)?,
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct CertifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub plan: PlanArgs,
    /// Acceptance radius around the target (default 1e-2).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Grid periods integrated (default 2000).
    #[arg(long)]
    pub n_max: Option<usize>,
}

pub fn certify(a: &mut CertifyArgs, run: &mut Run) -> Result<Report> {
    let m = a.plan.model.build()?;
    let (plan, cfg) = build_plan(&mut a.plan, &m)?;
    let eps = or(&mut a.eps, 1e-2);
    let c = certify_attainability(&plan, &m, eps, or(&mut a.n_max, 2000), &cfg)?;
    run.out.write_with("grid.csv", |w| {
        let header = format!("n,{}", state_header(m.n, m.l));
        let header: Vec<&str> = header.split(',').collect();
        csv_rows(
            w,
            &header,
            c.samples.iter().map(|s| {
                let mut r = vec![s.n.to_string(), s.t.to_string()];
                r.extend(cells(&s.state));
                r
            }),
        )
    })?;
    let mut summary = format!("{}: best distance {:e} at n = {}", m.name, c.best_distance, c.best_n);
    if let Some(d) = &c.divergence {
        summary += &format!("; diverged: {d}");
    }
    Ok(Report { verdict: Some(c.verdict.passed()), summary, result: json!({ "plan": plan, "certificate": c }) })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(rename_all = "kebab-case", default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Start state (x, y, z) or `rest`; repeat for several starts.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<Vec<StateArg>>,
    /// Explicit seeds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Base seed when --seeds is absent; replicate r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicates per start when --seeds is absent (default 1).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Step size (default 1e-3).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon (default 10).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Keep every stride-th step in the path CSV (default 1).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Clamp y to its domain after every step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub clamp_y: Option<bool>,
}

pub fn sim_config(dt: f64, horizon: f64, seed: u64, stride: usize) -> SimConfig {
    SimConfig { dt, horizon, seed, stride, clamp: Vec::new() }
}

pub fn starts(v: &Option<Vec<StateArg>>, m: &ModelSpec) -> Result<Vec<Vec<f64>>> {
    let v = need(v, "start")?;
    if v.is_empty() {
        bail!("missing --start");
    }
    v.iter().map(|s| s.resolve(m)).collect()
}

pub fn simulate(a: &mut SimulateArgs, run: &mut Run) -> Result<Report> {
    let m = a.model.build()?;
    let starts = starts(&a.start, &m)?;
    let seeds = match &a.seeds {
        Some(s) if !s.is_empty() => {
            run.seeds.extend(s);
            s.clone()
        }
        _ => {
            let base = run.seed(&mut a.seed);
            let r = or(&mut a.replicates, 1);
            (0..r as u64).map(|i| base.wrapping_add(i)).collect()
        }
    };
    let mut cfg = sim_config(or(&mut a.dt, 1e-3), or(&mut a.horizon, 10.0), 0, or(&mut a.stride, 1));
    if or(&mut a.clamp_y, false) {
        cfg = cfg.clamp_y(m.n, m.l);
    }
    let batch = simulate_batch(&m, &starts, &cfg, &seeds)?;
    let mut items = Vec::new();
    let mut failed = 0;
    for it in &batch {
        let stem = format!("{}_{}", it.start_index, it.seed);
        match &it.result {
            Ok(p) => {
                run.out.write_with(&format!("path_{stem}.csv"), |w| p.write_csv(w))?;
                run.out.write_with(&format!("grid_{stem}.csv"), |w| {
                    let header = format!("n,offset,{}", state_header(m.n, m.l));
                    let header: Vec<&str> = header.split(',').collect();
                    let g = &p.grid;
                    csv_rows(
                        w,
                        &header,
                        g.samples.iter().enumerate().map(|(k, s)| {
                            let mut r = vec![k.to_string(), g.offsets[k].to_string(), g.times[k].to_string()];
                            r.extend(cells(s));
                            r
                        }),
                    )
                })?;
                items.push(json!({
                    "start_index": it.start_index,
                    "seed": it.seed,
                    "rows": p.times.len(),
                    "t_end": p.times.last(),
                    "clamp_events": p.clamp_events,
                    "grid_points": p.grid.len(),
                    "path_csv": format!("path_{stem}.csv"),
                    "grid_csv": format!("grid_{stem}.csv"),
                }));
            }
            Err(e) => {
                failed += 1;
                eprintln!("warning: start {} seed {}: {e}", it.start_index, it.seed);
                items.push(json!({ "start_index": it.start_index, "seed": it.seed, "error": e }));
            }
        }
    }
    if failed == batch.len() {
        bail!("every path failed; see the warnings above");
    }
    Ok(Report {
        verdict: None,
        summary: format!("{}: {} paths, {failed} failed", m.name, batch.len()),
        result: json!({ "model": m.name, "config": cfg, "starts": starts, "paths": items }),
    })
}

#[derive(Args, Serialize, Deserialize, Default, Clone, Debug)]
#[serde(default)]
pub struct KroneckerArgs {
    /// Grid period T.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Orbit period T*.
    #[arg(long = "Tstar")]
    #[serde(rename = "Tstar")]
    pub tstar: Option<f64>,
    /// Tolerance on |n T* - m T|.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Largest n searched (default 1000).
    #[arg(long)]
    pub bound: Option<u64>,
}

pub fn kronecker(a: &mut KroneckerArgs, _run: &mut Run) -> Result<Report> {
    let (t, tstar, eps) = (need(&a.t, "T")?, need(&a.tstar, "Tstar")?, need(&a.eps, "eps")?);
    let bound = or(&mut a.bound, 1000);
    match kronecker_search(t, tstar, eps, bound) {
        Ok(h) => Ok(Report {
            verdict: Some(true),
            summary: format!("n = {}, m = {}, |n T* - m T| = {}", h.n, h.m, h.error),
            result: json!({ "n": h.n, "m": h.m, "error": h.error }),
        }),
        Err(e @ ControlError::NotFound { .. }) => Ok(Report {
            verdict: Some(false),
            summary: e.to_string(),
            result: json!({ "n": null, "m": null, "error": null, "message": e.to_string() }),
        }),
        Err(e) => Err(e.into()),
    }
}
