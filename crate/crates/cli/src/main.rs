use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nvhp::{CliError, Experiment, Overrides};

#[derive(Parser)]
#[command(
    name = "nvhp",
    version,
    about = "Run an NV-center hyperpolarization experiment"
)]
struct Args {
    /// One of: levels, pmax-surface, prep, cycle, depolarize, multispin,
    /// ensemble, totals, validate-secular, rotation.
    experiment: String,
    /// TOML run file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the file's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the file's `output`.
    #[arg(long)]
    out: Option<String>,
}

fn fail(e: CliError) -> ExitCode {
    log::error!("{e}");
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    let experiment = match args.experiment.parse::<Experiment>() {
        Ok(e) => e,
        Err(m) => {
            return fail(CliError::Config(nvhp::config::ConfigErrors(vec![
                nvhp::config::ConfigError {
                    kind: nvhp::config::ErrorKind::OutOfRange,
                    field: "experiment".into(),
                    message: m,
                },
            ])))
        }
    };

    if let Ok(n) = std::env::var("NVHP_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => log::warn!("ignoring NVHP_THREADS={n}; expected a positive integer"),
        }
    }

    let ov = Overrides {
        seed: args.seed,
        output: args.out,
    };
    match nvhp::run_file(&args.config, Some(experiment), &ov) {
        Ok(r) => {
            println!(
                "{} ({} rows, {:.2} s); metadata in {}",
                r.csv.display(),
                r.rows,
                r.wall_clock_s,
                r.json.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
