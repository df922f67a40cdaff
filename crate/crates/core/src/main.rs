use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capflow::cli::{
    cmd_derivative_check, cmd_fit_cap, cmd_minkowski, cmd_run, cmd_static_check, parse_config, ParsedConfig, Report,
};
use capflow::flow::HypothesisReport;
use capflow::CapflowError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "capflow",
    version,
    about = "Capillary curvature flow in hyperbolic half-space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output.directory` of the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized validation (overrides `seed` of the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial surface
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evolve the configured cap and report its drift
    StaticCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the Minkowski residuals of a snapshot
    Minkowski { snapshot: PathBuf },
    /// Fit an umbilical cap to a snapshot
    FitCap { snapshot: PathBuf },
    /// Check the linearization against finite differences
    DerivativeCheck {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

const DEFAULT_CONFIG: &str = r#"{
    "amb": {"c": 2.0, "theta_degrees": 90},
    "grid": {"n_beta": 32, "n_gamma": 64},
    "initial": {"kind": "cap", "R": 1.0}
}"#;

fn load(path: Option<&Path>) -> Result<ParsedConfig, CapflowError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CapflowError::InvalidParameter(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)
        }
        None => parse_config(DEFAULT_CONFIG),
    }
}

fn execute(cli: &Cli) -> Result<Report, (CapflowError, PathBuf)> {
    let fallback_out = || cli.out.clone().unwrap_or_else(|| PathBuf::from("capflow-out"));
    let with_config = |path: Option<&Path>| -> Result<(ParsedConfig, PathBuf), (CapflowError, PathBuf)> {
        let parsed = load(path).map_err(|e| (e, fallback_out()))?;
        for w in &parsed.warnings {
            eprintln!("warning: {w}");
        }
        let out = cli
            .out
            .clone()
            .unwrap_or_else(|| parsed.config.output.directory.clone());
        Ok((parsed, out))
    };
    match &cli.command {
        Command::Run { config } => {
            let (parsed, out) = with_config(Some(config))?;
            cmd_run(&parsed.config, parsed.warnings, &out).map_err(|e| (e, out))
        }
        Command::StaticCheck { config } => {
            let (parsed, out) = with_config(Some(config))?;
            cmd_static_check(&parsed.config, &out).map_err(|e| (e, out))
        }
        Command::Minkowski { snapshot } => {
            let out = fallback_out();
            cmd_minkowski(snapshot, &out).map_err(|e| (e, out))
        }
        Command::FitCap { snapshot } => {
            let out = fallback_out();
            cmd_fit_cap(snapshot, &out).map_err(|e| (e, out))
        }
        Command::DerivativeCheck { config } => {
            let (parsed, out) = with_config(config.as_deref())?;
            let seed = cli.seed.unwrap_or(parsed.config.seed);
            cmd_derivative_check(&parsed.config, seed, &out).map_err(|e| (e, out))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Run { .. } => "run",
        Command::StaticCheck { .. } => "static-check",
        Command::Minkowski { .. } => "minkowski",
        Command::FitCap { .. } => "fit-cap",
        Command::DerivativeCheck { .. } => "derivative-check",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CAPFLOW_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: CAPFLOW_THREADS ignored: {e}");
        }
    }
    let report = match execute(&cli) {
        Ok(report) => report,
        Err((error, out)) => {
            let mut report = Report::new(
                command_name(&cli.command),
                HypothesisReport {
                    warnings: vec!["hypotheses not evaluated".into()],
                    ..HypothesisReport::default()
                },
            );
            report.fail(error.to_string());
            if let Err(e) = report.write(&out) {
                eprintln!("error: could not write report: {e}");
            }
            report
        }
    };
    for f in &report.failures {
        eprintln!("FAIL: {f}");
    }
    println!("{}: {}", report.command, if report.passed { "pass" } else { "fail" });
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
