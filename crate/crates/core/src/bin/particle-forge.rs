use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use particle_forge::commands::{cmd_gen_graph, cmd_plot_data, cmd_simulate, cmd_trails, cmd_verify};
use particle_forge::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "particle-forge", version, about = "Batch runs of graphical-construction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured graph as JSON.
    GenGraph(Common),
    /// Tabulate simple and double jump rate trails.
    Trails(Common),
    /// Run the model and export the trajectory and clocks.
    Simulate(Common),
    /// Run the experiment suite and write a report.
    Verify(Common),
    /// Write plot-ready CSV series.
    PlotData(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Run only experiments with this name.
    #[arg(long)]
    experiment: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> particle_forge::Result<bool> {
    let (Command::GenGraph(c)
    | Command::Trails(c)
    | Command::Simulate(c)
    | Command::Verify(c)
    | Command::PlotData(c)) = &cli.command;
    if let Some(n) = c.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| particle_forge::Error::Config(e.to_string()))?;
    }
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let selection = c.experiment.as_deref();
    match &cli.command {
        Command::GenGraph(_) => println!("{}", cmd_gen_graph(&cfg, &out)?.display()),
        Command::Trails(_) => println!("{}", cmd_trails(&cfg, &out)?.display()),
        Command::Simulate(_) => {
            for p in cmd_simulate(&cfg, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Verify(_) => {
            let outcome = cmd_verify(&cfg, &out, selection)?;
            print!("{}", std::fs::read_to_string(&outcome.table)?);
            println!("{}", if outcome.passed { "all experiments passed" } else { "some experiments FAILED" });
            return Ok(outcome.passed);
        }
        Command::PlotData(_) => println!("{}", cmd_plot_data(&cfg, &out, selection)?.display()),
    }
    Ok(true)
}
