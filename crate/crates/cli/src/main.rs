use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use demcorrect_cli::config::{CellSet, ModelKind, PipelineConfig};
use demcorrect_cli::{commands, init_threads, CliError};

#[derive(Parser)]
#[command(name = "demcorrect", version, about = "Predict and remove vertical error from DEMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the eleven predictor rasters
    Features,
    /// Pearson/VIF screen of the predictors
    Diagnose,
    /// Fit the selected models
    Train,
    /// Write corrected DEMs and absolute-error rasters
    Correct,
    /// Per-landscape RMSE report
    Evaluate,
    /// Synthetic end-to-end run
    Bench,
}

#[derive(Args)]
struct Overrides {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model name (mlr, gbdt-depthwise, gbdt-leafwise) or, for correct and
    /// evaluate, a model document path; repeatable
    #[arg(long = "model", global = true)]
    models: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    dem: Option<PathBuf>,
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    #[arg(long, global = true)]
    bare: Option<PathBuf>,
    #[arg(long, global = true)]
    urban: Option<PathBuf>,
    #[arg(long, global = true)]
    forest: Option<PathBuf>,
    #[arg(long, global = true)]
    strata: Option<PathBuf>,
    #[arg(long, global = true)]
    sample_rate: Option<f64>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    #[arg(long, global = true)]
    n_trees: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    #[arg(long, global = true)]
    max_leaves: Option<usize>,
    #[arg(long, global = true)]
    vif_threshold: Option<f64>,
    /// all or test
    #[arg(long, global = true)]
    cells: Option<CellSet>,
}

fn apply(o: &Overrides, cfg: &mut PipelineConfig, named_models: bool) -> Result<(), CliError> {
    macro_rules! set {
        ($src:expr => $dst:expr) => {
            if let Some(v) = $src.clone() {
                $dst = v;
            }
        };
    }
    if let Some(seed) = o.seed {
        cfg.sampling.seed = seed;
        cfg.gbdt.seed = seed;
    }
    set!(o.out => cfg.paths.out);
    for (src, dst) in [
        (&o.dem, &mut cfg.paths.dem),
        (&o.reference, &mut cfg.paths.reference),
        (&o.bare, &mut cfg.paths.bare),
        (&o.urban, &mut cfg.paths.urban),
        (&o.forest, &mut cfg.paths.forest),
        (&o.strata, &mut cfg.paths.strata),
    ] {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    set!(o.sample_rate => cfg.sampling.rate);
    set!(o.train_fraction => cfg.sampling.train_fraction);
    set!(o.n_trees => cfg.gbdt.n_trees);
    set!(o.learning_rate => cfg.gbdt.learning_rate);
    set!(o.max_depth => cfg.gbdt.max_depth);
    set!(o.max_leaves => cfg.gbdt.max_leaves);
    set!(o.vif_threshold => cfg.collinearity.vif);
    if let Some(c) = o.cells {
        cfg.evaluation.cells = c;
        cfg.bench.cells = c;
    }
    if named_models && !o.models.is_empty() {
        cfg.models = o
            .models
            .iter()
            .map(|m| m.parse::<ModelKind>().map_err(CliError::Input))
            .collect::<Result<_, _>>()?;
    }
    cfg.validate()
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    init_threads()?;
    let mut cfg = match &cli.opts.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let takes_paths = matches!(cli.command, Command::Correct | Command::Evaluate);
    apply(&cli.opts, &mut cfg, !takes_paths)?;
    match cli.command {
        Command::Features => commands::features(&cfg),
        Command::Diagnose => commands::diagnose(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Correct => commands::correct(&cfg, &cli.opts.models),
        Command::Evaluate => commands::evaluate(&cfg, &cli.opts.models),
        Command::Bench => commands::bench(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(files)) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("demcorrect: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(1),
    }
}
