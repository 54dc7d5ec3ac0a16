use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use danse_cli::{cmd_analyze, cmd_compare, cmd_dns, cmd_mesh, cmd_nudge, parse_config, stats_table, CliError, SimConfig};

#[derive(Parser)]
#[command(name = "danse", version, about = "Nudged Navier-Stokes finite-element experiments")]
struct Cli {
    /// Pin sequential, reproducible linear algebra (overrides numerics.deterministic).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; without it, the preset comes from --set preset=...
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a value, e.g. --set nudging.mu=10
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the mesh hierarchy and its statistics table.
    Mesh(Common),
    /// Reference run without nudging.
    Dns(Common),
    /// Nudged run against the stored reference.
    Nudge {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written by the same configuration.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Two nudged runs against one reference, side by side.
    Compare {
        /// Configuration file of run a; the second --config-b defaults to the same file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        config_b: Option<PathBuf>,
        /// Override for both runs.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Override for run a only.
        #[arg(long = "set-a", value_name = "KEY=VALUE")]
        set_a: Vec<String>,
        /// Override for run b only.
        #[arg(long = "set-b", value_name = "KEY=VALUE")]
        set_b: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Eigenvalue, Grashof number, nudging-gain range and decay fits.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Series CSV to fit.
        #[arg(long)]
        series: Option<PathBuf>,
        /// Fit window as t0,t1.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected t0,t1")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((a, b))
}

fn load(path: Option<&Path>, sets: &[String], deterministic: bool) -> Result<SimConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.display().to_string(), source })?,
        None => String::new(),
    };
    let mut sets = sets.to_vec();
    if deterministic {
        sets.push("numerics.deterministic=true".into());
    }
    let cfg = parse_config(&text, &sets)?;
    if cfg.numerics.deterministic {
        danse_core::set_deterministic();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let det = cli.deterministic;
    match cli.command {
        Command::Mesh(c) => {
            let cfg = load(c.config.as_deref(), &c.set, det)?;
            let rows = cmd_mesh(&cfg, &c.out)?;
            print!("{}", stats_table(&rows));
        }
        Command::Dns(c) => {
            let cfg = load(c.config.as_deref(), &c.set, det)?;
            let r = cmd_dns(&cfg, &c.out)?;
            println!("steps: {}\nsnapshots: {}\nfinal_ke: {:e}", r.steps, r.snapshots, r.final_energy);
        }
        Command::Nudge { common: c, resume } => {
            let cfg = load(c.config.as_deref(), &c.set, det)?;
            if cfg.nudging.mu == 0.0 {
                eprintln!("warning: {}", danse_cli::MU_ZERO_WARNING);
            }
            let r = cmd_nudge(&cfg, &c.out, resume.as_deref())?;
            println!("series: {}", r.series.display());
            println!("sync_time: {}", r.record.sync_time.map_or("none".into(), |t| format!("{t:?}")));
            println!("final_l2_err: {:e}", r.record.final_l2().unwrap_or(f64::NAN));
        }
        Command::Compare { config, config_b, set, set_a, set_b, out } => {
            let b_path = config_b.or_else(|| config.clone());
            let a = load(config.as_deref(), &[set.clone(), set_a].concat(), det)?;
            let b = load(b_path.as_deref(), &[set, set_b].concat(), det)?;
            let cmp = cmd_compare(&a, &b, &out)?;
            print!("{}", cmp.to_text());
        }
        Command::Analyze { common: c, series, window } => {
            let cfg = load(c.config.as_deref(), &c.set, det)?;
            print!("{}", cmd_analyze(&cfg, &c.out, series.as_deref(), window)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
