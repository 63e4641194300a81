use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use wavepacket_lab::report::{OnExists, write_bundle};
use wavepacket_lab::{ExperimentConfig, LabError, catalog};

#[derive(Parser)]
#[command(name = "wavepacket-lab", version, about = "Reproducible wave packet experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML manifest.
    Run {
        config: PathBuf,
        /// Override a manifest entry, e.g. `--set scale.delta=0.2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Cap the worker pool.
        #[arg(long)]
        threads: Option<usize>,
        /// Output root; defaults to $WPLAB_OUT, then the manifest's output.dir, then `wplab-out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OnExists::Overwrite)]
        on_exists: OnExists,
    },
    /// Print the experiment catalog.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn output_root(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("WPLAB_OUT").map(PathBuf::from))
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("wplab-out"))
}

fn run(
    config: PathBuf,
    set: Vec<String>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    on_exists: OnExists,
) -> Result<bool, LabError> {
    let text = std::fs::read_to_string(&config)
        .map_err(|e| LabError::Config(vec![format!("{}: {e}", config.display())]))?;
    let cfg = ExperimentConfig::from_toml(&text, &set)?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(LabError::field("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::field("--threads", e))?;
    }
    let started = Instant::now();
    let report = wavepacket_lab::run(&cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    let bundle = write_bundle(&output_root(out, &cfg), &cfg, report, elapsed, on_exists)?;
    for c in &bundle.report.checks {
        println!("{:<4} {:<36} {:>14.6e}  {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    println!("wrote {} ({elapsed:.1} s)", bundle.dir.display());
    Ok(bundle.passed())
}

fn list(json: bool) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        return writeln!(out, "{}", serde_json::to_string_pretty(&catalog::catalog_json()).unwrap_or_default());
    }
    for e in catalog::catalog() {
        writeln!(out, "{:<13} {}", e.name.as_str(), e.description)?;
        writeln!(out, "{:<13} topic: {}", "", e.topic)?;
        writeln!(out, "{:<13} required: [{}]  optional: [{}]", "", e.required.join(", "), e.optional.join(", "))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let _ = list(json);
            ExitCode::SUCCESS
        }
        Command::Run { config, set, threads, out, on_exists } => match run(config, set, threads, out, on_exists) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
