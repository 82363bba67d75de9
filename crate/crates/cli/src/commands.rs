use std::collections::HashSet;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use posprobe_core::analysis::{AnalysisInput, AnalysisReport, SystemOutput};
use posprobe_core::embeddings::{load_vectors, pca_compress, EmbeddingTable};
use posprobe_core::evaluation::attachment_scores;
use posprobe_core::masking::{las_table, run_masking_experiment, Auxiliary, MaskingConfig, ScoreSplit, Splits};
use posprobe_core::model::{
    parse_treebank, predict_tags, train, EncoderConfig, HeadKind, ModelConfig, ModelState, TrainConfig,
};
use posprobe_core::parallel::Exec;
use posprobe_core::probe::Probe;
use posprobe_core::synthetic::{generate, SyntheticConfig};
use posprobe_core::tags::{TagSymbol, Upos};
use posprobe_core::treebank::{self, read_conllu, read_tag_column, write_conllu, Treebank};
use posprobe_core::vocab::{oov_flags, Vocabulary};
use serde::Serialize;

use crate::config::{ExperimentConfig, Split};
use crate::manifest::RunRecord;

/// Marks errors caused by the invocation rather than by the run.
#[derive(Debug)]
pub struct Usage;

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid invocation")
    }
}

pub trait UsageExt<T> {
    fn usage(self) -> anyhow::Result<T>;
}

impl<T> UsageExt<T> for anyhow::Result<T> {
    fn usage(self) -> anyhow::Result<T> {
        self.map_err(|e| e.context(Usage))
    }
}

fn exec(cfg: &ExperimentConfig) -> Exec {
    if cfg.jobs > 1 {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

fn load_split(cfg: &ExperimentConfig, split: Split, record: &mut RunRecord) -> anyhow::Result<Option<Treebank>> {
    let Some(path) = cfg.path(split) else {
        return Ok(None);
    };
    let label = match split {
        Split::Train => treebank::Split::Train,
        Split::Dev => treebank::Split::Dev,
        Split::Test => treebank::Split::Test,
    };
    record.input(path)?;
    let tb = read_conllu(path, &cfg.name, label).with_context(|| format!("reading {}", path.display()))?;
    for w in &tb.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(Some(tb))
}

struct Data {
    train: Option<Treebank>,
    dev: Option<Treebank>,
    test: Option<Treebank>,
}

impl Data {
    fn load(cfg: &ExperimentConfig, record: &mut RunRecord) -> anyhow::Result<Data> {
        Ok(Data {
            train: load_split(cfg, Split::Train, record)?,
            dev: load_split(cfg, Split::Dev, record)?,
            test: load_split(cfg, Split::Test, record)?,
        })
    }

    fn all(&self) -> impl Iterator<Item = &Treebank> {
        [&self.train, &self.dev, &self.test].into_iter().flatten()
    }

    fn train(&self) -> &Treebank {
        self.train.as_ref().expect("validated")
    }

    fn dev(&self) -> &Treebank {
        self.dev.as_ref().expect("validated")
    }
}

/// Load pre-trained vectors restricted to the treebank forms, compressing
/// them to the encoder's word width when wider.
fn load_embeddings(cfg: &ExperimentConfig, data: &Data, record: &mut RunRecord) -> anyhow::Result<Option<EmbeddingTable>> {
    let Some(path) = &cfg.data.embeddings else {
        return Ok(None);
    };
    record.input(path)?;
    let forms: HashSet<String> = data.all().flat_map(|t| t.tokens().map(|tok| tok.form.clone())).collect();
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let table = load_vectors(BufReader::new(file), Some(&forms)).with_context(|| format!("reading {}", path.display()))?;
    let want = cfg.encoder.word_dim;
    let table = match table.dim() {
        d if d == want => table,
        d if d > want => {
            log::info!("compressing {d}-dimensional embeddings to {want} with PCA");
            pca_compress(&table, want)?
        }
        d => bail!("embeddings have {d} dimensions, fewer than word_dim {want}"),
    };
    Ok(Some(table))
}

fn model_config(cfg: &ExperimentConfig, kind: HeadKind) -> ModelConfig {
    let encoder = EncoderConfig {
        tag_dim: None,
        ..cfg.encoder.clone()
    };
    match kind {
        HeadKind::Tagger => ModelConfig::tagger(encoder, cfg.head.clone()),
        HeadKind::Parser => ModelConfig::parser(encoder, cfg.head.clone()),
    }
}

#[derive(Serialize)]
struct SplitScores {
    split: String,
    tokens: usize,
    accuracy: Option<f64>,
    uas: Option<f64>,
    las: Option<f64>,
}

fn score(state: &ModelState, tb: &Treebank, tags: Option<&[Vec<TagSymbol>]>, t: &TrainConfig) -> anyhow::Result<SplitScores> {
    let mut s = SplitScores {
        split: tb.split.to_string(),
        tokens: tb.token_count(),
        accuracy: None,
        uas: None,
        las: None,
    };
    match state.kind() {
        HeadKind::Tagger => s.accuracy = Some(predict_tags(state, tb, t.exec)?.accuracy),
        HeadKind::Parser => {
            let trees = parse_treebank(state, tb, tags, t.decoder, t.exec)?;
            let p = attachment_scores(&trees, tb)?;
            s.uas = Some(p.uas);
            s.las = Some(p.las);
        }
    }
    Ok(s)
}

fn json_line<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_train(mut cfg: ExperimentConfig, kind: HeadKind) -> anyhow::Result<()> {
    cfg.validate(&[Split::Train, Split::Dev]).usage()?;
    let mut record = RunRecord::new(&cfg.output, "train")?;
    let data = Data::load(&cfg, &mut record)?;
    let embeddings = load_embeddings(&cfg, &data, &mut record)?;
    cfg.train.exec = exec(&cfg);
    let vocab = Vocabulary::build(data.train())?;
    for &seed in &cfg.seeds {
        let t = cfg.train_config(seed);
        let state = ModelState::new(model_config(&cfg, kind), vocab.clone(), embeddings.as_ref(), seed)?;
        let (state, history) = train(state, data.train(), data.dev(), &t, None)?;
        let stem = format!("{}-{kind}-seed{seed}", cfg.name);
        let ckpt = record.path(&format!("checkpoints/{stem}.ckpt"));
        state.save_file(&ckpt)?;
        record.written(&ckpt);
        let mut csv = Vec::new();
        history.write_csv(&mut csv)?;
        record.write(&format!("reports/{stem}-history.csv"), csv)?;
        let scores = data
            .dev
            .iter()
            .chain(&data.test)
            .map(|tb| score(&state, tb, None, &t))
            .collect::<anyhow::Result<Vec<_>>>()?;
        record.write(&format!("reports/{stem}-scores.json"), json_line(&scores)?)?;
        log::info!("{stem}: best epoch {} of {}", history.best_epoch, history.epochs.len());
        println!("{}", ckpt.display());
    }
    record.finish(&cfg)?;
    Ok(())
}

fn load_checkpoint(path: &Path, record: &mut RunRecord) -> anyhow::Result<ModelState> {
    record.input(path)?;
    ModelState::load_file(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn cmd_probe(mut cfg: ExperimentConfig, checkpoint: &Path) -> anyhow::Result<()> {
    cfg.validate(&[Split::Train]).usage()?;
    if cfg.data.dev.is_none() && cfg.data.test.is_none() {
        return Err(anyhow::anyhow!("probing needs --dev or --test to evaluate on")).usage();
    }
    let mut record = RunRecord::new(&cfg.output, "probe")?;
    let source = load_checkpoint(checkpoint, &mut record)?;
    let data = Data::load(&cfg, &mut record)?;
    cfg.train.exec = exec(&cfg);
    let seed = cfg.seeds[0];
    let t = cfg.train_config(seed);
    let probe = Probe::train(&source, data.train(), &t)?;
    for tb in data.dev.iter().chain(&data.test) {
        let report = probe.report(tb, &t)?;
        let stem = format!("{}-probe-{}-{}", cfg.name, report.source, tb.split);
        record.write(&format!("reports/{stem}.json"), report.to_json()?)?;
        let pred = predict_tags(&probe.state, tb, t.exec)?;
        let symbols: Vec<Vec<TagSymbol>> = pred.tags.iter().map(|s| s.iter().map(|&u| u.into()).collect()).collect();
        record.write(&format!("reports/{stem}.conllu"), write_conllu(tb, Some(&symbols))?)?;
        println!("{} {}: accuracy {:.4}, {} steps", report.eval_split, report.source, report.accuracy, report.optimizer_steps);
    }
    record.finish(&cfg)?;
    Ok(())
}

pub fn cmd_eval(mut cfg: ExperimentConfig, checkpoint: &Path, tags: Option<&Path>) -> anyhow::Result<()> {
    cfg.validate(&[Split::Test]).usage()?;
    let mut record = RunRecord::new(&cfg.output, "eval")?;
    let state = load_checkpoint(checkpoint, &mut record)?;
    let data = Data::load(&cfg, &mut record)?;
    cfg.train.exec = exec(&cfg);
    let test = data.test.as_ref().expect("validated");
    let symbols = match (tags, state.uses_tags()) {
        (Some(p), true) => {
            record.input(p)?;
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(read_tag_column(&text)?)
        }
        (None, true) => return Err(anyhow::anyhow!("this parser takes tag inputs; pass --tags")).usage(),
        (Some(_), false) => return Err(anyhow::anyhow!("this model takes no tag inputs; drop --tags")).usage(),
        (None, false) => None,
    };
    let s = score(&state, test, symbols.as_deref(), &cfg.train)?;
    let json = json_line(&s)?;
    record.write(&format!("reports/{}-eval-{}.json", cfg.name, state.kind()), &json)?;
    print!("{json}");
    record.finish(&cfg)?;
    Ok(())
}

/// A system for analysis: predicted CoNLL-U or a tagger checkpoint.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub name: String,
    pub path: PathBuf,
}

impl std::str::FromStr for SystemSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, path) = s.split_once('=').ok_or("expected NAME=PATH")?;
        if name.is_empty() || path.is_empty() {
            return Err("expected NAME=PATH".into());
        }
        Ok(SystemSpec {
            name: name.into(),
            path: path.into(),
        })
    }
}

fn system_tags(spec: &SystemSpec, gold: &Treebank, record: &mut RunRecord, exec: Exec) -> anyhow::Result<Vec<Vec<Upos>>> {
    let is_conllu = spec.path.extension().is_some_and(|e| e == "conllu" || e == "conll");
    if is_conllu {
        record.input(&spec.path)?;
        let text = std::fs::read_to_string(&spec.path).with_context(|| format!("reading {}", spec.path.display()))?;
        let symbols = read_tag_column(&text)?;
        symbols
            .into_iter()
            .map(|s| {
                s.into_iter()
                    .map(|t| match t {
                        TagSymbol::Tag(u) => Ok(u),
                        TagSymbol::Mask => bail!("{} contains masked tags", spec.path.display()),
                    })
                    .collect()
            })
            .collect()
    } else {
        let state = load_checkpoint(&spec.path, record)?;
        Ok(predict_tags(&state, gold, exec)?.tags)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OovAgainst {
    Train,
    Embeddings,
}

pub struct AnalyzeArgs {
    pub systems: Vec<SystemSpec>,
    pub split: EvalSplit,
    pub oov_against: OovAgainst,
    pub svg: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    Dev,
    Test,
}

pub fn cmd_analyze(cfg: ExperimentConfig, args: AnalyzeArgs) -> anyhow::Result<()> {
    let target_split = match args.split {
        EvalSplit::Dev => Split::Dev,
        EvalSplit::Test => Split::Test,
    };
    cfg.validate(&[Split::Train, target_split]).usage()?;
    if args.systems.is_empty() {
        return Err(anyhow::anyhow!("pass at least one --system NAME=PATH")).usage();
    }
    if args.oov_against == OovAgainst::Embeddings && cfg.data.embeddings.is_none() {
        return Err(anyhow::anyhow!("--oov-against embeddings needs --embeddings")).usage();
    }
    let mut record = RunRecord::new(&cfg.output, "analyze")?;
    let data = Data::load(&cfg, &mut record)?;
    let target = match args.split {
        EvalSplit::Dev => data.dev(),
        EvalSplit::Test => data.test.as_ref().expect("validated"),
    };
    let exec = exec(&cfg);
    let systems = args
        .systems
        .iter()
        .map(|s| {
            Ok(SystemOutput {
                name: s.name.clone(),
                tags: system_tags(s, target, &mut record, exec)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let oov = match args.oov_against {
        OovAgainst::Train => oov_flags(&Vocabulary::build(data.train())?, target),
        OovAgainst::Embeddings => {
            let table = load_embeddings(&cfg, &data, &mut record)?.expect("checked above");
            oov_flags(&table, target)
        }
    };
    let input = AnalysisInput {
        train: data.train(),
        target,
        systems: &systems,
        oov: &oov,
    };
    let report = AnalysisReport::build(&[input], cfg.analysis)?;
    for path in report.write_all(&cfg.output, args.svg)? {
        record.written(&path);
    }
    println!("{}", cfg.output.join("reports/analysis.json").display());
    record.finish(&cfg)?;
    Ok(())
}

pub fn cmd_mask_experiment(mut cfg: ExperimentConfig, tagger: Option<&Path>) -> anyhow::Result<()> {
    cfg.validate(&[Split::Train, Split::Dev, Split::Test]).usage()?;
    if cfg.schemes.is_empty() {
        return Err(anyhow::anyhow!("no schemes selected")).usage();
    }
    let mut record = RunRecord::new(&cfg.output, "mask-experiment")?;
    let data = Data::load(&cfg, &mut record)?;
    let embeddings = load_embeddings(&cfg, &data, &mut record)?;
    let tagger = tagger.map(|p| load_checkpoint(p, &mut record)).transpose()?;
    let exec = exec(&cfg);
    cfg.train.exec = exec;
    let splits = Splits {
        name: &cfg.name,
        train: data.train(),
        dev: data.dev(),
        test: data.test.as_ref().expect("validated"),
    };
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let mc = MaskingConfig {
            encoder: cfg.encoder.clone(),
            head: cfg.head.clone(),
            tag_dim: cfg.tag_dim,
            train: cfg.train_config(seed),
            schemes: cfg.schemes.clone(),
        };
        let aux = Auxiliary {
            tagger: tagger.as_ref(),
            untagged_parser: None,
        };
        let run = run_masking_experiment(&splits, embeddings.as_ref(), &mc, seed, aux, exec)?;
        for r in &run.results {
            log::info!("seed {seed} {}: test LAS {:.4}", r.scheme, r.test.las);
        }
        runs.push(run);
    }
    let test_table = las_table(&runs, &cfg.schemes, ScoreSplit::Test);
    record.write(&format!("tables/{}-las-test.csv", cfg.name), &test_table)?;
    record.write(&format!("tables/{}-las-dev.csv", cfg.name), las_table(&runs, &cfg.schemes, ScoreSplit::Dev))?;
    let mut long = String::from("treebank,seed,scheme,dev_uas,dev_las,test_uas,test_las\n");
    for run in &runs {
        for r in &run.results {
            long.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                run.treebank, run.seed, r.scheme, r.dev.uas, r.dev.las, r.test.uas, r.test.las
            ));
        }
    }
    record.write(&format!("tables/{}-las-runs.csv", cfg.name), long)?;
    record.write(&format!("reports/{}-masking.json", cfg.name), json_line(&runs)?)?;
    print!("{test_table}");
    record.finish(&cfg)?;
    Ok(())
}

pub fn cmd_synth(out: &Path, synth: &SyntheticConfig, seed: u64) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let tb = generate(synth, seed)?;
    for t in [&tb.train, &tb.dev, &tb.test] {
        let path = out.join(format!("{}-{}.conllu", synth.name, t.split));
        std::fs::write(&path, write_conllu(t, None)?).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}
