use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ganlab::cli::{self, Experiment, Overrides};

#[derive(Parser)]
#[command(
    name = "lab",
    version,
    about = "Run numerical experiments and write CSV/SVG results"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: bool,
    },
    /// List the available experiments.
    List,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::List => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            seed,
            out,
            svg,
        } => {
            if let Err(e) = init_threads() {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
            let overrides = Overrides { seed, out, svg };
            let started = Instant::now();
            let result = cli::load_config(&config, &overrides).and_then(|cfg| cli::run(&cfg));
            match result {
                Ok(report) => {
                    println!("wrote {} ({} rows)", report.csv.display(), report.rows);
                    if let Some(s) = report.svg {
                        println!("wrote {}", s.display());
                    }
                    println!("wall time {:.3} s", started.elapsed().as_secs_f64());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
