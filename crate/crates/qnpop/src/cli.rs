//! The `qnpop` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qnpop_core::diffusion;
use qnpop_core::fluid::{self, Direction};
use qnpop_core::manifold::{self, ManifoldOptions};
use qnpop_core::ode::OdeOptions;
use qnpop_core::process::{self, SsaOptions};
use qnpop_core::zoo;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, ModelRef};
use crate::{experiments, io, report, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "qnpop", version = env!("CARGO_PKG_VERSION"), about = "Quasi-neutral population processes: simulation, geometry and limit-theorem checks")]
pub struct Cli {
    /// Print nothing on success except requested JSON.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Zoo family, optionally with parameters: `family:key=v1;v2,key=v`.
    #[arg(long, default_value = "neutral_logistic")]
    pub model: ModelRef,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the exact jump chain; writes `path.jsonl` and `events.csv`.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Start density, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        point: Vec<f64>,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Snapshot spacing for `path.jsonl`.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value = "qnpop-out")]
        output_dir: PathBuf,
    },
    /// Integrate the fluid limit (or the backward slow field).
    Fluid {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        point: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        backward: bool,
        #[arg(long)]
        fundamental: bool,
        /// Also run the structural probes on the registration grid.
        #[arg(long)]
        structure: bool,
    },
    /// Projection, time change and their derivatives at a point.
    Manifold {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        point: Vec<f64>,
        /// Include second derivatives of the projection.
        #[arg(long)]
        second: bool,
    },
    /// Generator coefficients on `Ω`; optionally simulate the diffusion.
    Diffusion {
        #[command(flatten)]
        model: ModelArgs,
        /// A density on `Ω`, or frequencies with `--frequency`.
        #[arg(long, value_delimiter = ',', required = true)]
        point: Vec<f64>,
        /// Treat `--point` as frequencies and move it onto `Ω`.
        #[arg(long)]
        frequency: bool,
        /// Simulate on `[0, horizon]` and write `diffusion.jsonl`.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "qnpop-out")]
        output_dir: PathBuf,
    },
    /// Run an experiment and write its report; exit 1 if a verdict fails.
    Verify(VerifyArgs),
    /// List model families or check one family's known facts.
    Zoo {
        #[arg(long)]
        list: bool,
        /// Family (with optional parameters) whose facts to check.
        #[arg(long)]
        model: Option<ModelRef>,
    },
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// TOML config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub experiment: Option<ExperimentKind>,
    #[arg(long)]
    pub model: Option<ModelRef>,
    /// System sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl VerifyArgs {
    fn into_config(self) -> Result<(ExperimentConfig, Option<u64>), HarnessError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => {
                let need = |what: &str| HarnessError::Config(format!("--{what} is required without --config"));
                ExperimentConfig::new(
                    self.experiment.ok_or_else(|| need("experiment"))?,
                    self.model.clone().ok_or_else(|| need("model"))?,
                    self.n.clone().ok_or_else(|| need("n"))?,
                    self.replicas.ok_or_else(|| need("replicas"))?,
                )
            }
        };
        if let Some(e) = self.experiment {
            cfg.experiment = e;
        }
        if let Some(m) = self.model {
            cfg.model = m;
        }
        if let Some(n) = self.n {
            cfg.n_list = n;
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(d) = self.output_dir {
            cfg.output_dir = d;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        cfg.validate()?;
        Ok((cfg, self.seed))
    }
}

fn print_json(v: &serde_json::Value) -> Result<(), HarnessError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn seed_or_env(seed: Option<u64>) -> Result<u64, HarnessError> {
    let mut probe = ExperimentConfig::new(ExperimentKind::Lln, ModelRef::Name(String::new()), vec![1], 1);
    probe.resolve_seed(seed)
}

fn point_for(model: &qnpop_core::ModelSpec, point: &[f64]) -> Result<(), HarnessError> {
    if point.len() != model.k {
        return Err(HarnessError::Config(format!("--point: expected {} entries, got {}", model.k, point.len())));
    }
    Ok(())
}

/// Runs one command; returns the exit code.
pub fn execute(cli: Cli) -> Result<i32, HarnessError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Simulate { model, point, n, horizon, seed, dt, output_dir } => {
            let entry = model.model.build()?;
            point_for(&entry.spec, &point)?;
            let seed = seed_or_env(seed)?;
            let opts = SsaOptions { record_events: true, ..SsaOptions::default() };
            let path = process::simulate_path(&entry.spec, &point, n, horizon, seed, dt, opts)?;
            std::fs::create_dir_all(&output_dir)?;
            io::write_path_jsonl(std::io::BufWriter::new(std::fs::File::create(output_dir.join("path.jsonl"))?), &path)?;
            io::write_events_csv(std::io::BufWriter::new(std::fs::File::create(output_dir.join("events.csv"))?), &path)?;
            if !quiet {
                print_json(&json!({
                    "model": entry.label(),
                    "seed": seed,
                    "initial": path.initial,
                    "final": path.final_state,
                    "events": path.event_count,
                    "absorbed": path.absorbed,
                    "escaped": path.escaped,
                    "rounded_start": path.rounded,
                }))?;
            }
            Ok(0)
        }
        Command::Fluid { model, point, t, backward, fundamental, structure } => {
            let entry = model.model.build()?;
            point_for(&entry.spec, &point)?;
            let dir = if backward { Direction::Backward } else { Direction::Forward };
            let r = fluid::flow(&entry.spec, &point, t, fundamental, dir, OdeOptions::default())?;
            let drift = fluid::drift_f(&entry.spec, &point)?;
            let jac = fluid::jacobian_df(&entry.spec, &point)?;
            let report = structure.then(|| fluid::check_structure(&entry.spec, &entry.grid));
            print_json(&json!({ "model": entry.label(), "drift": drift, "jacobian": jac, "flow": r, "structure": report }))?;
            Ok(0)
        }
        Command::Manifold { model, point, second } => {
            let entry = model.model.build()?;
            point_for(&entry.spec, &point)?;
            let opts = ManifoldOptions::default();
            let v = if second {
                let (chart, defect) = manifold::full_chart(&entry.spec, &point, &opts)?;
                json!({ "model": entry.label(), "chart": chart, "d2pi_symmetry_defect": defect })
            } else {
                json!({ "model": entry.label(), "chart": manifold::dpi_dtau(&entry.spec, &point, &opts)? })
            };
            print_json(&v)?;
            Ok(0)
        }
        Command::Diffusion { model, point, frequency, horizon, dt, seed, output_dir } => {
            let entry = model.model.build()?;
            point_for(&entry.spec, &point)?;
            let pi = if frequency { experiments::on_omega(&entry.spec, &point)? } else { point };
            let g = diffusion::generator_coefficients(&entry.spec, &pi)?;
            let f = diffusion::pushforward_frequency(&entry.spec, &g)?;
            let mut v = json!({ "model": entry.label(), "generator": g, "frequency": f });
            if let Some(h) = horizon {
                let seed = seed_or_env(seed)?;
                let path = diffusion::simulate_diffusion(&entry.spec, &pi, h, dt, seed)?;
                std::fs::create_dir_all(&output_dir)?;
                let file = output_dir.join("diffusion.jsonl");
                io::write_diffusion_jsonl(std::io::BufWriter::new(std::fs::File::create(&file)?), &path)?;
                v["path"] = json!({ "file": file, "seed": seed, "absorptions": path.absorptions });
            }
            print_json(&v)?;
            Ok(0)
        }
        Command::Verify(args) => {
            let (mut cfg, seed) = args.into_config()?;
            cfg.resolve_seed(seed)?;
            let rep = experiments::run(cfg)?;
            if !quiet {
                for v in &rep.verdicts {
                    println!("{} {}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.name, v.observed, v.threshold);
                }
                println!("report: {}", rep.config.output_dir.join("report.json").display());
                println!("{}", report::version());
            }
            Ok(if rep.pass { 0 } else { 1 })
        }
        Command::Zoo { list, model } => {
            if list || model.is_none() {
                print_json(&json!({ "families": zoo::families() }))?;
            }
            if let Some(m) = model {
                let entry = m.build()?;
                let facts = entry.check_facts();
                let ok = facts.iter().all(|f| f.pass);
                print_json(&json!({ "model": entry.label(), "params": entry.params, "facts": facts }))?;
                return Ok(if ok { 0 } else { 1 });
            }
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command, mapping errors to exit codes.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qnpop: {e}");
            e.exit_code()
        }
    }
}
