use clap::{Parser, Subcommand};
use ramsey_cli::oracle::{evaluate, OracleCommand};
use ramsey_cli::pipeline::resolve_workers;
use ramsey_cli::{run, Overrides, RunConfig, RunError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "ramsey",
    version,
    about = "Two-component BEC Ramsey interferometer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        dim: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact two-mode results.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

fn run_command(config: PathBuf, overrides: Overrides) -> Result<(), RunError> {
    let text = std::fs::read_to_string(&config).map_err(|e| RunError::Io(format!("{}: {e}", config.display())))?;
    let mut cfg = RunConfig::from_toml(&text)?;
    cfg.apply(&overrides)?;
    let workers = resolve_workers(&cfg)?;
    let out = run(&cfg, workers)?;
    for a in &out.analysis {
        match (&a.point, &a.report) {
            (Some(p), Some(r)) => println!(
                "t = {:8.3} ms  n1 = {:9.1}  n2 = {:9.1}  |<a+b>| = {:9.1} ± {:6.1}  visibility = {:.4}  depth >= {:.0}  {}",
                a.time * 1e3,
                a.n1,
                a.n2,
                p.cross_moment.norm(),
                p.cross_moment_stderr,
                p.visibility,
                r.depth_bound,
                r.verdict
            ),
            _ => println!("t = {:8.3} ms  {}", a.time * 1e3, a.note.as_deref().unwrap_or("no condensate mode")),
        }
    }
    println!("results written to {}", out.directory.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            trajectories,
            dim,
            out,
        } => {
            let overrides = Overrides {
                seed,
                trajectories,
                dim: dim.map(usize::from),
                out,
            };
            match run_command(config, overrides) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Oracle { which } => match evaluate(&which) {
            Ok((report, json)) => {
                if json {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                } else {
                    print!("{}", report.text());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
