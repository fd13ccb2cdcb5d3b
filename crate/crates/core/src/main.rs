use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use negsig::io::config::RawConfig;
use negsig::io::output::{
    emit_plot_data, read_json, read_trajectory_csv, write_json, write_run, write_summary_json, RunManifest,
    SummaryRecord, MANIFEST_FILE, PLOT_FILE, SUMMARY_FILE,
};
use negsig::population::{run_experiment, Execution, RepetitionResult, Simulation};
use negsig::{neural::NeuralAgent, population::AgentKind, roth_erev::RothErevAgent, Result, SimError};

#[derive(Parser)]
#[command(name = "negsig", version, about = "Signalling games with negation for agent populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trajectories, summary, manifest and plot data.
    Run(RunArgs),
    /// Recompute the summary from one or more trajectory CSVs.
    Summarize(FilesArgs),
    /// Emit best/worst/mean series from one or more trajectory CSVs.
    PlotData(FilesArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// atomic, basic, learned or combined.
    #[arg(long)]
    game: Option<String>,
    /// roth-erev (default) or neural.
    #[arg(long)]
    agent: Option<String>,
    /// Positive states; the game has 2n states.
    #[arg(long)]
    n: Option<usize>,
    /// Population size.
    #[arg(long)]
    p: Option<usize>,
    /// Learning events [default: 10000].
    #[arg(long)]
    events: Option<usize>,
    /// Games per ordered pair per event [default: 10].
    #[arg(long)]
    trials: Option<usize>,
    /// Events between Roth-Erev reward resets [default: 1000].
    #[arg(long)]
    reset_interval: Option<usize>,
    /// Frozen games per ordered pair per evaluation [default: 50].
    #[arg(long)]
    eval_games: Option<usize>,
    /// Events between evaluations [default: 100].
    #[arg(long)]
    eval_interval: Option<usize>,
    /// Repetitions [default: 10].
    #[arg(long)]
    reps: Option<usize>,
    /// Seed of the first repetition; repetition i uses seed + i [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// involution (default) or random.
    #[arg(long)]
    derangement: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Run repetitions one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
    /// Also write the final agents of every repetition as JSON.
    #[arg(long)]
    save_agents: bool,
}

impl RunArgs {
    fn flags(&self) -> RawConfig {
        RawConfig {
            game: self.game.clone(),
            agent: self.agent.clone(),
            n: self.n,
            p: self.p,
            events: self.events,
            trials: self.trials,
            reset_interval: self.reset_interval,
            eval_games: self.eval_games,
            eval_interval: self.eval_interval,
            reps: self.reps,
            seed: self.seed,
            derangement: self.derangement.clone(),
            ..RawConfig::default()
        }
    }
}

#[derive(Args)]
struct FilesArgs {
    /// Trajectory CSV files; repetitions from later files are renumbered
    /// after earlier ones.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Output file; defaults to summary.json / plot.csv next to the first input.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Summarize(args) => {
            let results = load_results(&args.csv)?;
            let manifest = sibling_manifest(&args.csv[0])
                .unwrap_or_else(|| RunManifest::new(None, results.iter().map(|r| r.seed).collect()));
            let record = SummaryRecord::from_results(&results, manifest)?;
            let out = args.out.unwrap_or_else(|| sibling(&args.csv[0], SUMMARY_FILE));
            write_summary_json(&record, &out)?;
            print_summary(&record);
            Ok(())
        }
        Command::PlotData(args) => {
            let results = load_results(&args.csv)?;
            let out = args.out.unwrap_or_else(|| sibling(&args.csv[0], PLOT_FILE));
            emit_plot_data(&results, &out)?;
            log::info!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let cfg = file.overlay(args.flags()).resolve()?;
    let mut manifest = RunManifest::for_config(&cfg);
    log::info!(
        "{} agents, {} game n={}, p={}, {} events x {} repetitions",
        cfg.agent.name(),
        cfg.game.kind.name(),
        cfg.game.n,
        cfg.population,
        cfg.events,
        cfg.repetitions
    );
    let results = if args.save_agents {
        run_saving_agents(&cfg, &args.out_dir)?
    } else {
        let execution = if args.sequential { Execution::Sequential } else { Execution::Parallel };
        run_experiment(&cfg, execution)?
    };
    manifest.finish();
    let record = write_run(&results, manifest, &args.out_dir)?;
    print_summary(&record);
    if let Some(r) = results.iter().find(|r| !r.is_complete()) {
        return Err(SimError::Contract(format!(
            "repetition {} aborted: {}",
            r.repetition,
            r.aborted.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

fn run_saving_agents(cfg: &negsig::population::ExperimentConfig, dir: &Path) -> Result<Vec<RepetitionResult>> {
    (0..cfg.repetitions)
        .map(|rep| {
            let path = dir.join(format!("agents-{rep}.json"));
            match cfg.agent {
                AgentKind::RothErev => {
                    let mut sim = Simulation::<RothErevAgent>::new(cfg, rep)?;
                    let result = sim.run()?;
                    write_json(&sim.agents(), &path)?;
                    Ok(result)
                }
                AgentKind::Neural => {
                    let mut sim = Simulation::<NeuralAgent>::new(cfg, rep)?;
                    let result = sim.run()?;
                    let snapshots: Vec<_> = sim.agents().iter().map(NeuralAgent::snapshot).collect();
                    write_json(&snapshots, &path)?;
                    Ok(result)
                }
            }
        })
        .collect()
}

fn load_results(paths: &[PathBuf]) -> Result<Vec<RepetitionResult>> {
    let mut all: Vec<RepetitionResult> = Vec::new();
    for path in paths {
        let offset = all.len();
        let mut results = read_trajectory_csv(path)?;
        if offset > 0 {
            for r in &mut results {
                r.repetition += offset;
            }
        }
        all.extend(results);
    }
    Ok(all)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn sibling_manifest(csv: &Path) -> Option<RunManifest> {
    let path = sibling(csv, MANIFEST_FILE);
    path.exists().then(|| read_json(&path).ok()).flatten()
}

fn print_summary(record: &SummaryRecord) {
    for (label, block) in [("with self-play", &record.with_self), ("without self-play", &record.without_self)] {
        match (block.ci_low, block.ci_high) {
            (Some(lo), Some(hi)) => println!("peak fitness {label}: {:.3} ({lo:.3}, {hi:.3})", block.mean),
            _ => println!("peak fitness {label}: {:.3}", block.mean),
        }
    }
    if !record.aborted_repetitions.is_empty() {
        println!("aborted repetitions: {:?}", record.aborted_repetitions);
    }
}
