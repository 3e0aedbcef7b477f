use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use nuh_core::par;
use nuh_lab::output::{create_run_dir, write_json, write_run};
use nuh_lab::{run_experiment, CliError, Experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "nuh-lab", version, about = "Numerical experiments on derived-from-Anosov torus maps")]
struct Args {
    /// One of: verify-map, pliss-demo, hyp-times, rnue, frequency, ulam,
    /// stability, basins, contraction, distortion.
    experiment: String,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `noise.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Root of the output directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn load(args: &Args) -> Result<(Experiment, ExperimentConfig), CliError> {
    let experiment: Experiment = args.experiment.parse()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.noise.seed = seed;
    }
    Ok((experiment, cfg))
}

fn run(args: &Args) -> Result<bool, CliError> {
    let (experiment, cfg) = load(args)?;
    let workers = match args.workers {
        Some(0) => return Err(CliError::Usage("--workers must be >= 1".into())),
        Some(k) => k,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let dir = create_run_dir(&args.out, experiment)?;
    let start = Instant::now();
    match par::with_workers(workers, || run_experiment(experiment, &cfg)) {
        Ok(out) => {
            write_run(&dir, &out, workers, start.elapsed().as_secs_f64())?;
            for inv in &out.invariants {
                println!("{} {}: {}", if inv.passed { "PASS" } else { "FAIL" }, inv.name, inv.detail);
            }
            println!("{}", dir.display());
            Ok(out.passed())
        }
        Err(e) => {
            let diag = serde_json::json!({
                "experiment": experiment.name(),
                "config": cfg.effective(experiment),
                "error": e.to_string(),
                "exit_code": e.exit_code(),
            });
            write_json(&dir.join("diagnostic.json"), &diag)?;
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nuh-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
