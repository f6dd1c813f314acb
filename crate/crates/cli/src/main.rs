use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use hingeflight::harness::{resolve, run_scenario, Config, SCENARIO_GROUPS, SCENARIO_NAMES};

#[derive(Parser)]
#[command(
    name = "hingeflight",
    version,
    about = "Run flight-control scenarios for the hinged four-quadcopter platform"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario (or a scenario group) and write its trace CSV.
    Run {
        /// Built-in scenario or group name, or a path to a scenario TOML file.
        #[arg(long)]
        scenario: String,
        /// Output directory for traces.
        #[arg(long)]
        out: PathBuf,
        /// Noise seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Configuration file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a configuration value, e.g. `platform.t_max=0.2`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
    },
    /// List built-in scenarios and groups.
    List,
    /// Run the acceptance suite through cargo.
    Verify,
}

fn run(scenario: &str, out: &Path, seed: Option<u64>, config: Option<&Path>, params: &[String]) -> Result<()> {
    let base = match config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    let cfg = base.with_overrides(params)?;
    let scenarios = resolve(scenario)?;
    for s in &scenarios {
        s.validate()?;
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    for mut s in scenarios {
        if seed.is_some() {
            s.seed = seed;
        }
        let output = run_scenario(&s, &cfg)?;
        let path = out.join(format!("{}.csv", s.name));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        output.trace.write_csv(BufWriter::new(file))?;
        let m = output.metrics;
        let divergence = m.divergence_time.map_or("-".to_string(), |t| format!("{t:.2}"));
        println!(
            "{:<18} stable={:<5} divergence={:>6} rmse_pos={:.4} rmse_att={:.4} max_pos_err={:.4} sat={:.3}",
            s.name, m.stable, divergence, m.rmse_pos, m.rmse_att, m.max_pos_err, m.saturation_fraction
        );
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn verify() -> Result<()> {
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["test", "-p", "hingeflight", "--test", "acceptance", "--", "--nocapture"])
        .current_dir(&workspace)
        .status()
        .context("launching cargo")?;
    if !status.success() {
        bail!("acceptance suite failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { scenario, out, seed, config, params } => run(&scenario, &out, seed, config.as_deref(), &params),
        Cmd::List => {
            for name in SCENARIO_NAMES {
                println!("{name}");
            }
            for (group, members) in SCENARIO_GROUPS {
                println!("{group}: {}", members.join(" "));
            }
            Ok(())
        }
        Cmd::Verify => verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
