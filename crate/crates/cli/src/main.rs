mod args;
mod commands;
mod output;
mod recurrence;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use commands::{CertifyArgs, HoermanderArgs, KroneckerArgs, ModelArgs, PlanArgs, SimulateArgs};
use output::{fresh_seed, merge, read_config, Output};
use recurrence::{DriftArgs, ErgodicArgs, HistogramArgs, HittingArgs, IsiArgs, ReturnsArgs};

#[derive(Parser)]
#[command(
    name = "hypolab",
    version,
    about = "Bracket-rank certificates, control plans and recurrence diagnostics for degenerate diffusions"
)]
struct Cli {
    /// Output directory for report.json, CSV data and manifest.json.
    #[arg(long, global = true, default_value = "hypolab-out")]
    out: PathBuf,
    /// JSON object of parameters for the subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Built-in model registry.
    #[command(subcommand)]
    Models(ModelsCmd),
    /// Local Hörmander rank certificate at a point.
    Hoermander(HoermanderArgs),
    /// Synthesize a control plan.
    Control(PlanArgs),
    /// Plan and certify attainability by closed-loop integration.
    Certify(CertifyArgs),
    /// Euler–Maruyama paths for starts x seeds.
    Simulate(SimulateArgs),
    /// Recurrence diagnostics.
    #[command(subcommand)]
    Recurrence(RecurrenceCmd),
    /// Smallest n with |n T* - m T| < eps.
    Kronecker(KroneckerArgs),
}

#[derive(Subcommand)]
enum ModelsCmd {
    /// List the built-in models.
    List,
    /// Write a model, with overrides applied, as model.json.
    Show(ModelArgs),
}

#[derive(Subcommand)]
enum RecurrenceCmd {
    /// Grid-time hitting frequency of a ball.
    Hitting(HittingArgs),
    /// Monte Carlo Lyapunov drift `V - P_T V`.
    Drift(DriftArgs),
    /// Occupation histogram of grid chains over a window.
    Histogram(HistogramArgs),
    /// Return times of one grid chain to a box.
    Returns(ReturnsArgs),
    /// Interspike intervals of the first x coordinate.
    Isi(IsiArgs),
    /// Time averages of a functional from two starts.
    Ergodic(ErgodicArgs),
}

/// State shared by a subcommand run.
pub struct Run {
    pub out: Output,
    pub seeds: Vec<u64>,
    pub seed_generated: bool,
}

impl Run {
    /// The given seed, or a generated one written back into the parameters.
    pub fn seed(&mut self, s: &mut Option<u64>) -> u64 {
        let v = match *s {
            Some(v) => v,
            None => {
                self.seed_generated = true;
                *s.insert(fresh_seed())
            }
        };
        self.seeds.push(v);
        v
    }
}

pub struct Report {
    /// `None` when the subcommand is not a check.
    pub verdict: Option<bool>,
    pub result: Value,
    pub summary: String,
}

fn exec<A, F>(name: &str, flags: &A, out: &Path, config: Option<&Path>, f: F) -> Result<Option<bool>>
where
    A: Serialize + DeserializeOwned + Default,
    F: FnOnce(&mut A, &mut Run) -> Result<Report>,
{
    let file: Option<Map<String, Value>> = config.map(read_config).transpose()?;
    let mut params = merge(flags, file.as_ref())?;
    let mut run = Run { out: Output::new(out)?, seeds: Vec::new(), seed_generated: false };
    let report = f(&mut params, &mut run)?;
    let verdict = report.verdict.map(|v| if v { "pass" } else { "fail" });
    run.out.json("report.json", &json!({ "subcommand": name, "verdict": verdict, "result": report.result }))?;
    let params = serde_json::to_value(&params)?;
    run.out.finish(name, config, &params, &run.seeds, run.seed_generated)?;
    println!("{}", report.summary);
    if let Some(v) = verdict {
        println!("verdict: {v}");
    }
    Ok(report.verdict)
}

fn set_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HYPOLAB_THREADS") {
        let n: usize =
            v.trim().parse().ok().filter(|&n| n > 0).context("HYPOLAB_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Option<bool>> {
    set_threads()?;
    let (out, cfg) = (cli.out.as_path(), cli.config.as_deref());
    match cli.command {
        Command::Models(ModelsCmd::List) => {
            exec("models list", &commands::Empty::default(), out, cfg, |_, _| commands::models_list())
        }
        Command::Models(ModelsCmd::Show(a)) => exec("models show", &a, out, cfg, commands::models_show),
        Command::Hoermander(a) => exec("hoermander", &a, out, cfg, commands::hoermander),
        Command::Control(a) => exec("control", &a, out, cfg, commands::control),
        Command::Certify(a) => exec("certify", &a, out, cfg, commands::certify),
        Command::Simulate(a) => exec("simulate", &a, out, cfg, commands::simulate),
        Command::Kronecker(a) => exec("kronecker", &a, out, cfg, commands::kronecker),
        Command::Recurrence(r) => match r {
            RecurrenceCmd::Hitting(a) => exec("recurrence hitting", &a, out, cfg, recurrence::hitting),
            RecurrenceCmd::Drift(a) => exec("recurrence drift", &a, out, cfg, recurrence::drift),
            RecurrenceCmd::Histogram(a) => exec("recurrence histogram", &a, out, cfg, recurrence::histogram),
            RecurrenceCmd::Returns(a) => exec("recurrence returns", &a, out, cfg, recurrence::returns),
            RecurrenceCmd::Isi(a) => exec("recurrence isi", &a, out, cfg, recurrence::isi),
            RecurrenceCmd::Ergodic(a) => exec("recurrence ergodic", &a, out, cfg, recurrence::ergodic),
        },
    }
}

fn main() -> ExitCode {
    // clap prints usage and exits with 2 on bad flags.
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Some(false)) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("run `hypolab --help` for usage");
            ExitCode::from(2)
        }
    }
}
