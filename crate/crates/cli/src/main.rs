//! Command-line front end: run a scenario, sweep tuning parameters, or list
//! the available scenarios.

mod report;
mod svg;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hybrid_perturb::analysis::estimate_attractivity;
use hybrid_perturb::hybrid::{solve_partial, write_arc_csv, write_jumps_csv};
use hybrid_perturb::scenarios::config::split_overrides;
use hybrid_perturb::scenarios::{build_scenario, sweep_scenario, ScenarioConfig, ScenarioKind};
use hybrid_perturb::Error;

#[derive(Parser)]
#[command(name = "hybrid-perturb", version, about = "Simulate and analyse singularly perturbed hybrid systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory, jumps, report and figures.
    Run(RunArgs),
    /// Estimate attractivity over a parameter grid.
    Sweep(RunArgs),
    /// List the available scenarios.
    List {
        /// Print a JSON array instead of text.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (see `list`).
    #[arg(value_parser = parse_kind)]
    scenario: ScenarioKind,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated `key=value` overrides.
    #[arg(long)]
    overrides: Option<String>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    s.parse::<ScenarioKind>().map_err(|e| e.to_string())
}

/// Failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn io(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::Param(_)
            | Error::Index { .. }
            | Error::Dimension { .. }
            | Error::Structure(_)
            | Error::SingularSystem => 2,
            Error::NumericFailure { .. } | Error::ConcurrentSampling { .. } | Error::Domain(_) => 3,
            Error::Io(_) | Error::MissingTags => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let text = match &args.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let overrides = args.overrides.as_deref().map(split_overrides).unwrap_or_default();
    Ok(ScenarioConfig::load(args.scenario, text.as_deref(), &overrides, args.seed)?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, Failure> {
    let path = dir.join(name);
    let f = fs::File::create(&path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let kind = args.scenario;
    let cfg = load_config(args)?;
    let built = build_scenario::<f64>(kind, &cfg)?;
    let solver = cfg.solver_config::<f64>(kind)?;
    let (arc, failure) = solve_partial(&built.perturbed.system, &built.x0, &solver)?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(format!("{}: {e}", args.out.display())))?;
    write_arc_csv(&arc, create(&args.out, "trajectory.csv")?)?;
    write_jumps_csv(&arc, create(&args.out, "jumps.csv")?)?;
    let failure_text = failure.as_ref().map(|e| e.to_string());
    let rep = report::build_report(kind, &cfg, &built, &arc, &solver, failure_text.as_deref())?;
    let rep_text = serde_json::to_string_pretty(&rep).map_err(Failure::io)?;
    write_text(&args.out, "report.json", &rep_text)?;
    let (phase, ts) = report::figures(kind, &cfg, &built, &arc);
    write_text(&args.out, "phase.svg", &phase.to_svg())?;
    write_text(&args.out, "timeseries.svg", &ts.to_svg())?;

    let end = arc.final_time().expect("nonempty arc");
    println!(
        "{kind}: t = {}, j = {}, {:?}; outputs in {}",
        end.t,
        end.j,
        arc.termination(),
        args.out.display()
    );
    if let Some(d) = rep.get("final_distance_to_nash") {
        println!("final distance to the Nash equilibrium: {d} m");
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let kind = args.scenario;
    let cfg = load_config(args)?;
    let probe = cfg.probe(kind)?;
    let solver = cfg.solver_config::<f64>(kind)?;
    let rep = estimate_attractivity(|p| sweep_scenario::<f64>(kind, &cfg, p), &probe, &solver)?;

    fs::create_dir_all(&args.out).map_err(|e| Failure::io(format!("{}: {e}", args.out.display())))?;
    write_text(&args.out, "attractivity.json", &rep.to_json()?)?;
    rep.write_csv(create(&args.out, "attractivity.csv")?)?;

    let failures: usize = rep.rows.iter().map(|r| r.numeric_failures).sum();
    println!(
        "{kind}: {} grid points x {} initial conditions, {} numeric failures, {} monotonicity flags; outputs in {}",
        rep.rows.len(),
        probe.n_initial,
        failures,
        rep.flags.len(),
        args.out.display()
    );
    for f in &rep.flags {
        println!(
            "flag: tail radius grew from {:.4} (point {}) to {:.4} (point {})",
            f.tail_from, f.from, f.tail_to, f.to
        );
    }
    Ok(())
}

fn list(as_json: bool) {
    let text = if as_json {
        let items: Vec<_> = ScenarioKind::ALL
            .iter()
            .map(|k| json!({"name": k.name(), "description": k.description(), "keys": k.config_keys()}))
            .collect();
        serde_json::to_string_pretty(&items).expect("static JSON") + "\n"
    } else {
        ScenarioKind::ALL
            .iter()
            .map(|k| format!("{:<14} {}; keys: {}\n", k.name(), k.description(), k.config_keys().join(", ")))
            .collect()
    };
    // A closed pipe (`list | head`) is not an error.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::List { json } => {
            list(*json);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
