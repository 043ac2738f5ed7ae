#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nisakns_cli::output::{write_all, Artifact};
use nisakns_cli::plot::{emit_plot_script, PlotInputs};
use nisakns_cli::{parse_config, run_scenario, CliError, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "nisakns",
    version,
    about = "Non-isospectral AKNS hierarchies, Darboux dressing and MKdV solitons"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Multiplies every absolute verify tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,

    /// Number of nested grids for convergence-order studies.
    #[arg(long, global = true, default_value_t = 1)]
    grid_refine: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// V_i fields of the configured potential.
    Hierarchy,
    /// Dressing field, transformed potential and coefficients, beta table.
    Darboux,
    /// MKdV soliton u(x, t) and its closed-form comparison.
    Soliton,
    /// Residual and property checks; exit code 1 when any fails.
    Verify,
    /// matplotlib script for field CSVs and verify reports.
    Plot {
        /// Inputs; defaults to u.csv and report.json in the output directory.
        files: Vec<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NISAKNS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "NISAKNS_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn plot(out: &Path, files: &[PathBuf]) -> Result<Vec<Artifact>, CliError> {
    let files: Vec<PathBuf> = if files.is_empty() {
        ["u.csv", "report.json"]
            .iter()
            .map(|n| out.join(n))
            .filter(|p| p.exists())
            .collect()
    } else {
        files.to_vec()
    };
    if files.is_empty() {
        return Err(CliError::Usage(format!(
            "no inputs: pass field files or run `soliton`/`verify` into {} first",
            out.display()
        )));
    }
    let inputs = PlotInputs::load(&files)?;
    Ok(vec![Artifact {
        name: "plot.py".into(),
        contents: emit_plot_script(&inputs),
    }])
}

fn run(cli: Cli) -> Result<bool, CliError> {
    configure_threads()?;
    if let Cmd::Plot { files } = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let artifacts = plot(&out, files)?;
        for path in write_all(&out, &artifacts)? {
            println!("wrote {}", path.display());
        }
        return Ok(true);
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let cfg = parse_config(&text)?;
    let command = match cli.command {
        Cmd::Hierarchy => Command::Hierarchy,
        Cmd::Darboux => Command::Darboux,
        Cmd::Soliton => Command::Soliton,
        Cmd::Verify => Command::Verify,
        Cmd::Plot { .. } => unreachable!("handled above"),
    };
    let opts = RunOptions {
        tolerance_scale: cli.tolerance_scale,
        grid_refine: cli.grid_refine,
    };
    let outcome = run_scenario(&cfg, command, &opts)?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&cfg.directory));
    if let Some(report) = &outcome.report {
        for c in &report.checks {
            println!(
                "{} {:<28} {:.6e}  {:?}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            );
        }
        for s in &report.studies {
            println!("study {:<26} order {:.4}", s.name, s.order);
        }
    }
    for path in write_all(&out, &outcome.artifacts)? {
        println!("wrote {}", path.display());
    }
    if let Some(report) = &outcome.report {
        for c in report.checks.iter().filter(|c| !c.passed) {
            eprintln!(
                "check failed: {} = {:e} ({:?}): {}",
                c.name, c.value, c.limit, c.detail
            );
        }
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
