use std::path::PathBuf;
use std::process::ExitCode;

use adpqis::{commands, CliResult, ExperimentSpec, Overrides};
use adpqis_core::SamplerKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adpqis", version, about = "Q-learning with importance-sampled exploration on generation expansion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its trace, coefficients and archive summary.
    Train(Common),
    /// Solve the scenario-tree benchmark.
    Oracle(Common),
    /// Train replications of the base run and score them against the oracle.
    Evaluate(Common),
    /// Run every sweep cell and replication against the oracle.
    Sweep(Common),
    /// One-dimensional accept-reject demonstration.
    Example1 {
        #[command(flatten)]
        common: Common,
        /// Sample against a learned approximation instead of the objective.
        #[arg(long)]
        learn: bool,
    },
    /// Aggregate a summary file into per-cell statistics.
    Report {
        /// summary.csv written by `sweep` or `evaluate`.
        summary: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    sampler: Option<SamplerKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_initial: Option<f64>,
    #[arg(long)]
    epsilon_final: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    reeval_every: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads for replications.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "ADPQIS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

impl Common {
    fn spec(&self) -> CliResult<ExperimentSpec> {
        let overrides = Overrides {
            dataset: self.dataset.clone(),
            sampler: self.sampler,
            epsilon: self.epsilon,
            epsilon_initial: self.epsilon_initial,
            epsilon_final: self.epsilon_final,
            iterations: self.iterations,
            samples: self.samples,
            reeval_every: self.reeval_every,
            lambda: self.lambda,
            gamma: self.gamma,
            seed: self.seed,
            replications: self.replications,
        };
        ExperimentSpec::resolve(self.config.as_deref(), &overrides)
    }
}

fn dispatch(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Train(c) => commands::train(&c.spec()?, &c.out_dir),
        Command::Oracle(c) => commands::oracle(&c.spec()?, &c.out_dir),
        Command::Evaluate(c) => commands::evaluate(&c.spec()?, &c.out_dir, c.jobs),
        Command::Sweep(c) => commands::sweep(&c.spec()?, &c.out_dir, c.jobs),
        Command::Example1 { common, learn } => {
            let mut spec = common.spec()?;
            spec.example1.learn |= learn;
            commands::example1(&spec, &common.out_dir)
        }
        Command::Report { summary, common } => commands::report(&common.spec()?, &summary, &common.out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
