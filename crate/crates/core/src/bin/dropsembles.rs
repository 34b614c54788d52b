use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dropsembles::harness::{
    default_run_root, report, run_experiment, run_seed, sweep, Experiment, ExperimentConfig, Gate,
    HiddenActivation, Method, Phase, ResultsTable, SweepAxis, RUN_ROOT_ENV,
};
use dropsembles::Error;

#[derive(Parser)]
#[command(
    name = "dropsembles",
    version,
    about = "Dropout-sampled ensembles for fine-tuned implicit decoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the datasets (and latent encoder) of every seed.
    GenData(ConfigArgs),
    /// Train the Task-A network(s).
    TrainA(ConfigArgs),
    /// Estimate Task-A Fisher diagonals.
    Fisher(ConfigArgs),
    /// Fine-tune on Task B.
    TuneB(ConfigArgs),
    /// Evaluate and write per-seed metrics and figures.
    Eval(ConfigArgs),
    /// All phases for every seed, then a consolidated report.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        gates: GateArgs,
    },
    /// One run per value of λ or M.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_parser = parse::<SweepAxis>)]
        axis: SweepAxis,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Consolidate run directories into one CSV and comparison panels.
    Report {
        /// Seed, configuration or root directories.
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[command(flatten)]
        gates: GateArgs,
    },
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file; flags below override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Experiment when no config file is given.
    #[arg(long, value_parser = parse::<Experiment>)]
    experiment: Option<Experiment>,
    #[arg(long, value_parser = parse::<Method>)]
    method: Option<Method>,
    #[arg(long)]
    ewc_lambda: Option<f64>,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    dropout_p: Option<f64>,
    #[arg(long, value_parser = parse::<HiddenActivation>)]
    activation: Option<HiddenActivation>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs_a: Option<usize>,
    #[arg(long)]
    epochs_b: Option<usize>,
    #[arg(long)]
    lr_a: Option<f64>,
    #[arg(long)]
    lr_b: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = RUN_ROOT_ENV)]
    run_root: Option<PathBuf>,
}

#[derive(Args)]
struct GateArgs {
    /// Threshold on an aggregate column, e.g. `Acc-B>=85` or `dropsembles:DSC>60`.
    #[arg(long = "require", value_parser = parse::<Gate>)]
    gates: Vec<Gate>,
}

impl ConfigArgs {
    fn resolve(&self) -> dropsembles::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.experiment) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(exp)) => ExperimentConfig::defaults(exp),
            (None, None) => return Err(Error::Argument("give --config or --experiment".into())),
        };
        if let (Some(_), Some(exp)) = (&self.config, self.experiment) {
            if exp != cfg.experiment {
                return Err(Error::Argument(format!(
                    "--experiment {} contradicts the config file",
                    exp.name()
                )));
            }
        }
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value.clone() {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(method = self.method);
        set!(ewc_lambda = self.ewc_lambda);
        set!(members = self.members);
        set!(mc_samples = self.mc_samples);
        set!(dropout_p = self.dropout_p);
        set!(activation = self.activation);
        set!(seeds = self.seeds);
        set!(task_a.epochs = self.epochs_a);
        set!(task_b.epochs = self.epochs_b);
        set!(task_a.learning_rate = self.lr_a);
        set!(task_b.learning_rate = self.lr_b);
        set!(workers = self.workers);
        cfg.validate()?;
        Ok(cfg)
    }

    fn root(&self) -> PathBuf {
        self.run_root.clone().unwrap_or_else(default_run_root)
    }
}

enum Failure {
    Config(Error),
    Phase(Error),
    Gate(Vec<String>),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Phase(_) => 3,
            Failure::Gate(_) => 4,
        }
    }
}

fn check_gates(gates: &[Gate], table: &ResultsTable) -> Result<(), Failure> {
    let violations: Vec<String> = gates.iter().flat_map(|g| g.violations(table)).collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gate(violations))
    }
}

fn phases(args: &ConfigArgs, until: Phase) -> Result<(), Failure> {
    let cfg = args.resolve().map_err(Failure::Config)?;
    let root = args.root();
    for &seed in &cfg.seeds {
        let out = run_seed(&cfg, &root, seed, until).map_err(Failure::Phase)?;
        println!("{}", out.dir.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData(a) => phases(&a, Phase::Generate),
        Command::TrainA(a) => phases(&a, Phase::TrainA),
        Command::Fisher(a) => phases(&a, Phase::Fisher),
        Command::TuneB(a) => phases(&a, Phase::TuneB),
        Command::Eval(a) => phases(&a, Phase::Evaluate),
        Command::Run { config, gates } => {
            let cfg = config.resolve().map_err(Failure::Config)?;
            let outcome = run_experiment(&cfg, &config.root()).map_err(Failure::Phase)?;
            let out = report(
                std::slice::from_ref(&outcome.config_dir),
                &outcome.config_dir.join("report"),
            )
            .map_err(Failure::Phase)?;
            print!("{}", out.table.to_csv());
            eprintln!("wrote {}", out.csv.display());
            check_gates(&gates.gates, &out.table)
        }
        Command::Sweep {
            config,
            axis,
            values,
        } => {
            let cfg = config.resolve().map_err(Failure::Config)?;
            let out = sweep(&cfg, axis, &values, &config.root()).map_err(|e| match e {
                Error::Phase { ref source, .. } if matches!(**source, Error::Argument(_)) => {
                    Failure::Config(e)
                }
                e @ Error::Argument(_) => Failure::Config(e),
                e => Failure::Phase(e),
            })?;
            print!("{}", std::fs::read_to_string(&out.csv).unwrap_or_default());
            eprintln!("wrote {} and {}", out.csv.display(), out.svg.display());
            Ok(())
        }
        Command::Report { paths, out, gates } => {
            let result = report(&paths, &out).map_err(Failure::Phase)?;
            for path in &result.skipped {
                eprintln!("warning: skipped {}", path.display());
            }
            print!("{}", result.table.to_csv());
            check_gates(&gates.gates, &result.table)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Config(e) | Failure::Phase(e) => {
                    eprintln!("error: {e}");
                    let mut source = std::error::Error::source(e);
                    while let Some(s) = source {
                        eprintln!("  caused by: {s}");
                        source = s.source();
                    }
                }
                Failure::Gate(violations) => {
                    for v in violations {
                        eprintln!("requirement failed: {v}");
                    }
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
