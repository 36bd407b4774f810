use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use affordance::cli::{self, resolve};
use affordance::config::RunConfig;
use affordance::Error;

#[derive(Parser, Debug)]
#[command(name = "affordance", about = "Compound-object affordance learning and planning")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// linear or nonlinear
    #[arg(long, global = true)]
    mode: Option<String>,
    /// tallest, shortest, occluded, occluding, bridge, height:<dm>, pair:<a>:<b>:<min|max>
    #[arg(long, global = true)]
    task: Option<String>,
    /// e.g. 2..5 or 2,3
    #[arg(long, global = true)]
    sizes: Option<String>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Any other config key, as key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    GenData,
    TrainEncoder,
    TrainMogan,
    TrainBaseline,
    Eval,
    Plan,
    Report,
}

fn overrides(args: &Args) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    let flags = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("mode", args.mode.clone()),
        ("task", args.task.clone()),
        ("sizes", args.sizes.clone()),
        ("samples", args.samples.map(|v| v.to_string())),
        ("out_dir", args.out_dir.as_ref().map(|p| p.display().to_string())),
    ];
    out.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    Ok(out)
}

fn print_metrics(name: &str, metrics: &[affordance::mogan::SizeMetrics]) {
    println!("{name}: tower_size records e1_dm e2_dm e3_err");
    for m in metrics {
        println!("  {:>2} {:>5} {:.3} {:.3} {:.3}", m.tower_size, m.records, m.e1_mae, m.e2_mae, m.e3_error);
    }
}

fn run(args: &Args) -> Result<(), Error> {
    let cfg: RunConfig = resolve(args.config.as_deref(), &overrides(args)?)?;
    match args.command {
        Command::GenData => {
            let s = cli::cmd_gen_data(&cfg)?;
            if s.records == 0 {
                eprintln!("warning: no episodes were run; the dataset is empty");
            }
            println!("wrote {} records to {}", s.records, s.path.display());
            for (size, n) in &s.histogram {
                println!("  tower size {size}: {n}");
            }
        }
        Command::TrainEncoder => {
            let r = cli::cmd_train_encoder(&cfg)?;
            println!("encoder trained for {} epochs, final reconstruction MSE {:.6}", r.epochs, r.final_val_mse);
        }
        Command::TrainMogan => print_metrics("mogan", &cli::cmd_train_mogan(&cfg)?),
        Command::TrainBaseline => print_metrics("baseline", &cli::cmd_train_baseline(&cfg)?),
        Command::Eval => {
            for r in cli::cmd_eval(&cfg)? {
                println!("{:<9} {:>2} {:>5} {:.3} {:.3} {:.3}", r.model, r.tower_size, r.records, r.e1_mae_dm, r.e2_mae_dm, r.e3_error);
            }
        }
        Command::Plan => {
            let trials = cli::cmd_plan(&cfg)?;
            for t in &trials {
                let verdict = if t.success { "ok" } else { t.failure.as_deref().unwrap_or("failed") };
                println!("size {} sample {} inventory {:?}: {verdict}", t.size, t.sample, t.inventory);
            }
            let ok = trials.iter().filter(|t| t.success).count();
            println!("{ok}/{} verified successes; outputs under {}", trials.len(), cfg.report_dir().display());
        }
        Command::Report => {
            for p in cli::cmd_report(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
