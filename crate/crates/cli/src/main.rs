//! `bias-lab`: run experiments, generate datasets, solve reference problems
//! and check the Fourier identities from the command line.
//!
//! Exit status: 0 on success, 1 when an assertion fails, 2 on invalid input.
//! Failures are reported as one JSON object on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bias_lab_core::certify::{self, AdmmConfig, PenaltyDomain};
use bias_lab_core::experiment::{self, ExperimentConfig, Summary};
use bias_lab_core::{datagen, training, Dataset, Error, GenSpec};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bias-lab", version, about = "Implicit bias of gradient descent on linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override a config field, e.g. `--set train.seed=3`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Generate a dataset from a JSON GenSpec; the spec is copied next to it.
    Gen {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Solve a max-margin problem on a CSV dataset and print a JSON report.
    Solve {
        #[arg(value_enum)]
        problem: Problem,
        data: PathBuf,
        /// Solver tolerance [default: 1e-10 for l2, 1e-8 for l1f].
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Support-set tolerance for the certificate.
        #[arg(long, default_value_t = 1e-6)]
        margin_tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        zero_tol: f64,
    },
    /// Randomized checks of the Fourier factorization, correlation theorem,
    /// Euler identity, Fourier-domain gradient descent and gradients.
    CheckLemmas {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        #[arg(long, default_value = "lemma-checks")]
        output_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    /// Hard-margin SVM, `min ‖w‖²` subject to unit margins.
    L2,
    /// `min ‖ŵ‖₁` subject to unit margins.
    L1f,
}

enum Outcome {
    Ok,
    Failed(Value),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(report)) => {
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::from(1)
        }
        Err(e) => {
            let kind = match e.downcast_ref::<Error>() {
                Some(Error::InvalidConfig(_)) => "invalid-config",
                Some(Error::Json(_)) => "invalid-json",
                Some(Error::Io(_)) => "io",
                Some(_) => "error",
                None => "error",
            };
            let report = json!({ "status": "error", "kind": kind, "message": format!("{e:#}") });
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Run { config, overrides } => {
            let value = read_with_overrides(&config, &overrides)?;
            let config = ExperimentConfig::from_json(value)?;
            let summary = experiment::run(&config)?;
            print_summary(&summary);
            Ok(outcome(&summary, &config.output_dir))
        }
        Command::Gen { spec, output, overrides } => {
            let value = read_with_overrides(&spec, &overrides)?;
            let spec: GenSpec = serde_json::from_value(value).map_err(Error::from)?;
            spec.validate()?;
            let data = datagen::generate(&spec)?;
            experiment::write_dataset(&output, &data, &spec)?;
            println!("wrote {} samples in dimension {} to {}", data.len(), data.dim(), output.display());
            Ok(Outcome::Ok)
        }
        Command::Solve { problem, data, tol, rho, margin_tol, zero_tol } => {
            let file = fs::File::open(&data).with_context(|| format!("opening {}", data.display()))?;
            let data = Dataset::read_csv(file)?;
            solve(problem, &data, tol, rho, margin_tol, zero_tol)
        }
        Command::CheckLemmas { dims, depths, seeds, output_dir } => {
            let value = json!({
                "experiment": "lemma-checks",
                "depths": depths,
                "lemma": { "dims": dims, "seeds": seeds },
                "output_dir": output_dir,
            });
            let config = ExperimentConfig::from_json(value)?;
            let summary = experiment::run(&config)?;
            print_summary(&summary);
            Ok(outcome(&summary, &config.output_dir))
        }
    }
}

fn read_with_overrides(path: &Path, overrides: &[String]) -> anyhow::Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text).map_err(Error::from)?;
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            return Err(Error::InvalidConfig(format!("override '{o}' is not PATH=VALUE")).into());
        };
        experiment::apply_override(&mut value, key, raw)?;
    }
    Ok(value)
}

fn print_summary(summary: &Summary) {
    for c in &summary.checks {
        println!("{:<36} cases={:<6} worst={:.3e} tol={:.1e}", c.name, c.cases, c.worst, c.tolerance);
    }
    for cell in &summary.cells {
        println!(
            "{}-L{}: {} iterations ({:?}), |w|={:.3e}",
            cell.architecture.name(),
            cell.depth,
            cell.iterations,
            cell.stop,
            cell.final_w_norm
        );
    }
    for a in &summary.assertions {
        let mark = if a.passed { "ok  " } else { "FAIL" };
        println!("{mark} {} = {:.6e} ({} {:.3e})", a.name, a.value, a.relation, a.threshold);
    }
}

fn outcome(summary: &Summary, output_dir: &Path) -> Outcome {
    if summary.passed {
        return Outcome::Ok;
    }
    Outcome::Failed(json!({
        "status": "assertion-failed",
        "experiment": summary.experiment,
        "summary": output_dir.join("summary.json"),
        "failures": summary.failures(),
    }))
}

fn solve(
    problem: Problem,
    data: &Dataset,
    tol: Option<f64>,
    rho: f64,
    margin_tol: f64,
    zero_tol: f64,
) -> anyhow::Result<Outcome> {
    let tol = tol.unwrap_or(match problem {
        Problem::L2 => 1e-10,
        Problem::L1f => 1e-8,
    });
    if !(tol > 0.0 && rho > 0.0) {
        bail!(Error::InvalidConfig("tol and rho must be positive".into()));
    }
    let report = match problem {
        Problem::L2 => certify::l2_max_margin(data, tol),
        Problem::L1f => certify::l1_fourier_max_margin_with(data, &AdmmConfig { tol, rho, ..AdmmConfig::default() }),
    };
    if !report.is_optimal() {
        return Ok(Outcome::Failed(json!({ "status": "solver-failed", "report": report })));
    }
    let certificate = match problem {
        Problem::L2 => serde_json::to_value(certify::l2_kkt_check(&report.solution.w, &report.multipliers, data)?)?,
        Problem::L1f => {
            let unit = training::normalize_to_unit_margin(&report.solution, data)?;
            let c = certify::kkt_residual_bridge_in(PenaltyDomain::Fourier, &unit, data, 1.0, margin_tol, zero_tol)?;
            serde_json::to_value(c)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&json!({ "report": report, "certificate": certificate }))?);
    Ok(Outcome::Ok)
}
