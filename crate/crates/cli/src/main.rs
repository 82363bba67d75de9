mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use posprobe_core::masking::TagScheme;
use posprobe_core::model::HeadKind;
use posprobe_core::synthetic::SyntheticConfig;

use commands::{AnalyzeArgs, EvalSplit, OovAgainst, SystemSpec, Usage, UsageExt};
use config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "posprobe", version, about = "Tagger/parser training, encoder probing, tag masking and error analysis")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
struct Common {
    /// Structured TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Text-format word vectors.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Seed; repeat for several runs.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Treebank code used in file names and tables.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

impl Common {
    fn resolve(self, schemes: Vec<TagScheme>) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref()).usage()?;
        cfg.apply(Overrides {
            train: self.train,
            dev: self.dev,
            test: self.test,
            embeddings: self.embeddings,
            seeds: self.seed,
            out: self.out,
            jobs: self.jobs,
            schemes,
            name: self.name,
            max_epochs: self.max_epochs,
            patience: self.patience,
        });
        posprobe_core::parallel::configure_threads(cfg.jobs);
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a tagger or an untagged parser.
    Train {
        #[arg(long)]
        kind: HeadKind,
        #[command(flatten)]
        common: Common,
    },
    /// Retrain a fresh tagging head over a checkpoint's frozen encoder for
    /// one epoch and report its tagging errors.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare systems' tagging errors against gold.
    Analyze {
        /// NAME=PATH of predicted CoNLL-U or a tagger checkpoint; repeat.
        #[arg(long = "system", required = true)]
        systems: Vec<SystemSpec>,
        /// Split the systems were run on.
        #[arg(long, value_enum, default_value = "test")]
        split: EvalSplit,
        /// Vocabulary that decides out-of-vocabulary forms.
        #[arg(long, value_enum, default_value = "train")]
        oov_against: OovAgainst,
        /// Also write SVG bar charts.
        #[arg(long)]
        svg: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Train one parser per tag scheme and tabulate LAS.
    MaskExperiment {
        /// Scheme to run; repeat. Defaults to all six.
        #[arg(long)]
        scheme: Vec<TagScheme>,
        /// Use this trained tagger instead of training one.
        #[arg(long)]
        tagger: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on --test.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CoNLL-U whose UPOS column supplies tag inputs.
        #[arg(long)]
        tags: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a seeded toy treebank.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "toy")]
        name: String,
        #[arg(long, default_value_t = 500)]
        train_size: usize,
        #[arg(long, default_value_t = 100)]
        dev_size: usize,
        #[arg(long, default_value_t = 100)]
        test_size: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { kind, common } => commands::cmd_train(common.resolve(vec![])?, kind),
        Command::Probe { checkpoint, common } => commands::cmd_probe(common.resolve(vec![])?, &checkpoint),
        Command::Analyze {
            systems,
            split,
            oov_against,
            svg,
            common,
        } => commands::cmd_analyze(
            common.resolve(vec![])?,
            AnalyzeArgs {
                systems,
                split,
                oov_against,
                svg,
            },
        ),
        Command::MaskExperiment { scheme, tagger, common } => {
            commands::cmd_mask_experiment(common.resolve(scheme)?, tagger.as_deref())
        }
        Command::Eval {
            checkpoint,
            tags,
            common,
        } => commands::cmd_eval(common.resolve(vec![])?, &checkpoint, tags.as_deref()),
        Command::Synth {
            out,
            seed,
            name,
            train_size,
            dev_size,
            test_size,
        } => {
            let cfg = SyntheticConfig {
                name,
                train: train_size,
                dev: dev_size,
                test: test_size,
                ..SyntheticConfig::default()
            };
            commands::cmd_synth(&out, &cfg, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
