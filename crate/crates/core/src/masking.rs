//! Tag-conditioning regimes for parser inputs and the experiment that
//! trains one parser per regime.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::ErrorSet;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::evaluation::{attachment_scores, ParseScore};
use crate::model::{
    parse_treebank, predict_tags, train, EncoderConfig, HeadConfig, ModelConfig, ModelState, TagInputs, TrainConfig,
    TrainHistory,
};
use crate::parallel::{map_collect, Exec};
use crate::probe::Probe;
use crate::tags::{TagSymbol, Upos};
use crate::treebank::{check_alignment, Treebank};
use crate::vocab::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TagScheme {
    /// No tag inputs at all.
    None,
    /// Tagger predictions everywhere.
    Pred,
    /// Gold tags where the tagger erred, MASK elsewhere.
    MaskAllButTaggerErrors,
    /// Gold tags where the parser probe erred, MASK elsewhere.
    MaskAllButProbeErrors,
    /// Tagger predictions where correct, MASK where it erred.
    MaskTaggerErrors,
    Gold,
}

impl TagScheme {
    pub const ALL: [TagScheme; 6] = [
        TagScheme::None,
        TagScheme::Pred,
        TagScheme::MaskAllButTaggerErrors,
        TagScheme::MaskAllButProbeErrors,
        TagScheme::MaskTaggerErrors,
        TagScheme::Gold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TagScheme::None => "NONE",
            TagScheme::Pred => "PRED",
            TagScheme::MaskAllButTaggerErrors => "MASK_ALL_BUT_TAGGER_ERRORS",
            TagScheme::MaskAllButProbeErrors => "MASK_ALL_BUT_PROBE_ERRORS",
            TagScheme::MaskTaggerErrors => "MASK_TAGGER_ERRORS",
            TagScheme::Gold => "GOLD",
        }
    }

    /// Compact label used in table headers.
    pub fn short_label(self) -> &'static str {
        match self {
            TagScheme::None => "None",
            TagScheme::Pred => "Pred",
            TagScheme::MaskAllButTaggerErrors => "M¬E_T",
            TagScheme::MaskAllButProbeErrors => "M¬E_P",
            TagScheme::MaskTaggerErrors => "M∀E_T",
            TagScheme::Gold => "Gold",
        }
    }

    pub fn uses_tags(self) -> bool {
        self != TagScheme::None
    }

    pub fn needs_tagger(self) -> bool {
        matches!(
            self,
            TagScheme::Pred | TagScheme::MaskAllButTaggerErrors | TagScheme::MaskTaggerErrors
        )
    }

    pub fn needs_probe(self) -> bool {
        self == TagScheme::MaskAllButProbeErrors
    }
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        TagScheme::ALL
            .into_iter()
            .find(|k| k.as_str() == norm || k.short_label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown tag scheme `{s}`")))
    }
}

/// Conditioning symbol for one token. `predicted` is required by the
/// schemes that show predictions; `is_error` is membership in the error
/// set the scheme refers to.
pub fn condition_token(scheme: TagScheme, gold: Upos, predicted: Option<Upos>, is_error: bool) -> Option<TagSymbol> {
    match scheme {
        TagScheme::None => None,
        TagScheme::Gold => Some(TagSymbol::Tag(gold)),
        TagScheme::Pred => predicted.map(TagSymbol::Tag),
        TagScheme::MaskAllButTaggerErrors | TagScheme::MaskAllButProbeErrors => Some(if is_error {
            TagSymbol::Tag(gold)
        } else {
            TagSymbol::Mask
        }),
        TagScheme::MaskTaggerErrors => {
            predicted.map(|p| if is_error { TagSymbol::Mask } else { TagSymbol::Tag(p) })
        }
    }
}

/// Inputs available for building conditioning on one split.
#[derive(Clone, Copy, Debug)]
pub struct ConditioningInputs<'a> {
    pub gold: &'a Treebank,
    pub predicted: Option<&'a [Vec<Upos>]>,
    pub tagger_errors: Option<&'a ErrorSet>,
    pub probe_errors: Option<&'a ErrorSet>,
}

impl<'a> ConditioningInputs<'a> {
    pub fn gold_only(gold: &'a Treebank) -> Self {
        ConditioningInputs {
            gold,
            predicted: None,
            tagger_errors: None,
            probe_errors: None,
        }
    }
}

/// Tag inputs of one split under one scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagConditioning {
    pub scheme: TagScheme,
    pub split: String,
    /// Which inputs produced the symbols.
    pub provenance: String,
    /// `None` under [`TagScheme::None`].
    pub tags: Option<Vec<Vec<TagSymbol>>>,
}

pub fn build_conditioning(scheme: TagScheme, inputs: &ConditioningInputs<'_>) -> Result<TagConditioning> {
    let gold = inputs.gold;
    let missing = |what: &str| Error::Conditioning(format!("{scheme} needs {what} for the {} split", gold.split));
    if let Some(p) = inputs.predicted {
        check_alignment(gold, p)?;
    }
    let (errors, provenance) = match scheme {
        TagScheme::None => (None, "no tag inputs"),
        TagScheme::Gold => (None, "gold tags"),
        TagScheme::Pred => {
            inputs.predicted.ok_or_else(|| missing("predicted tags"))?;
            (None, "tagger predictions")
        }
        TagScheme::MaskTaggerErrors => {
            inputs.predicted.ok_or_else(|| missing("predicted tags"))?;
            (None, "tagger predictions, tagger errors masked")
        }
        TagScheme::MaskAllButTaggerErrors => (
            Some(inputs.tagger_errors.ok_or_else(|| missing("tagger errors"))?),
            "gold tags at tagger errors",
        ),
        TagScheme::MaskAllButProbeErrors => (
            Some(inputs.probe_errors.ok_or_else(|| missing("probe errors"))?),
            "gold tags at probe errors",
        ),
    };
    if let Some(e) = errors {
        e.check_positions(gold)?;
    }
    let tags = scheme.uses_tags().then(|| {
        gold.sentences
            .iter()
            .enumerate()
            .map(|(si, s)| {
                s.tokens
                    .iter()
                    .enumerate()
                    .map(|(ti, tok)| {
                        let predicted = inputs.predicted.map(|p| p[si][ti]);
                        let is_error = match scheme {
                            TagScheme::MaskTaggerErrors => predicted != Some(tok.upos),
                            _ => errors.is_some_and(|e| e.contains(si, tok.index)),
                        };
                        condition_token(scheme, tok.upos, predicted, is_error).expect("inputs checked above")
                    })
                    .collect()
            })
            .collect()
    });
    Ok(TagConditioning {
        scheme,
        split: gold.split.to_string(),
        provenance: provenance.to_string(),
        tags,
    })
}

/// Gold splits of one treebank.
#[derive(Clone, Copy, Debug)]
pub struct Splits<'a> {
    pub name: &'a str,
    pub train: &'a Treebank,
    pub dev: &'a Treebank,
    pub test: &'a Treebank,
}

/// Predicted tags of an auxiliary system on every split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitTags {
    pub train: Vec<Vec<Upos>>,
    pub dev: Vec<Vec<Upos>>,
    pub test: Vec<Vec<Upos>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitErrors {
    pub train: ErrorSet,
    pub dev: ErrorSet,
    pub test: ErrorSet,
}

impl SplitTags {
    pub fn errors(&self, splits: &Splits<'_>) -> Result<SplitErrors> {
        Ok(SplitErrors {
            train: ErrorSet::from_predictions(splits.train, &self.train)?,
            dev: ErrorSet::from_predictions(splits.dev, &self.dev)?,
            test: ErrorSet::from_predictions(splits.test, &self.test)?,
        })
    }
}

fn tag_all_splits(state: &ModelState, splits: &Splits<'_>, exec: Exec) -> Result<SplitTags> {
    Ok(SplitTags {
        train: predict_tags(state, splits.train, exec)?.tags,
        dev: predict_tags(state, splits.dev, exec)?.tags,
        test: predict_tags(state, splits.test, exec)?.tags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingConfig {
    /// Encoder of every model; `tag_dim` is overridden per scheme.
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    /// Tag embedding width for the schemes with tag inputs.
    pub tag_dim: usize,
    pub train: TrainConfig,
    pub schemes: Vec<TagScheme>,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            encoder: EncoderConfig::default(),
            head: HeadConfig::default(),
            tag_dim: 100,
            train: TrainConfig::default(),
            schemes: TagScheme::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: TagScheme,
    pub dev: ParseScore,
    pub test: ParseScore,
    pub history: TrainHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskingRun {
    pub treebank: String,
    pub seed: u64,
    /// Tagger accuracy on (dev, test) when a tagger was used.
    pub tagger_accuracy: Option<(f64, f64)>,
    /// Probe accuracy on (dev, test) when a probe was used.
    pub probe_accuracy: Option<(f64, f64)>,
    pub results: Vec<SchemeResult>,
}

impl MaskingRun {
    pub fn get(&self, scheme: TagScheme) -> Option<&SchemeResult> {
        self.results.iter().find(|r| r.scheme == scheme)
    }
}

/// Pre-trained auxiliary models; missing ones are trained as needed.
#[derive(Clone, Copy, Debug, Default)]
pub struct Auxiliary<'a> {
    pub tagger: Option<&'a ModelState>,
    /// A parser trained without tag inputs, for probe errors.
    pub untagged_parser: Option<&'a ModelState>,
}

fn accuracy_pair(tags: &SplitTags, splits: &Splits<'_>) -> Result<(f64, f64)> {
    Ok((
        crate::evaluation::tagging_accuracy(&tags.dev, splits.dev)?,
        crate::evaluation::tagging_accuracy(&tags.test, splits.test)?,
    ))
}

/// Train one parser per scheme with the same seed and configuration apart
/// from tag conditioning, and score each on dev and test. Schemes run
/// concurrently under [`Exec::Parallel`].
pub fn run_masking_experiment(
    splits: &Splits<'_>,
    embeddings: Option<&EmbeddingTable>,
    config: &MaskingConfig,
    seed: u64,
    aux: Auxiliary<'_>,
    exec: Exec,
) -> Result<MaskingRun> {
    if config.schemes.is_empty() {
        return Err(Error::Config("no schemes selected".into()));
    }
    let vocab = Vocabulary::build(splits.train)?;
    let train_cfg = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let encoder = |tag_dim: Option<usize>| EncoderConfig {
        tag_dim,
        ..config.encoder.clone()
    };
    let train_parser = |tags: Option<[&TagConditioning; 2]>| -> Result<(ModelState, TrainHistory)> {
        let model = ModelConfig::parser(encoder(tags.map(|_| config.tag_dim)), config.head.clone());
        let state = ModelState::new(model, vocab.clone(), embeddings, seed)?;
        let inputs = tags.map(|[t, d]| TagInputs {
            train: t.tags.as_deref().expect("tagged scheme"),
            dev: d.tags.as_deref().expect("tagged scheme"),
        });
        train(state, splits.train, splits.dev, &train_cfg, inputs)
    };

    let need_tagger = config.schemes.iter().any(|s| s.needs_tagger());
    let need_probe = config.schemes.iter().any(|s| s.needs_probe());

    let tagger_tags = if need_tagger {
        let tagger = match aux.tagger {
            Some(t) => t.clone(),
            None => {
                let model = ModelConfig::tagger(encoder(None), config.head.clone());
                let state = ModelState::new(model, vocab.clone(), embeddings, seed)?;
                train(state, splits.train, splits.dev, &train_cfg, None)?.0
            }
        };
        Some(tag_all_splits(&tagger, splits, exec)?)
    } else {
        None
    };

    let mut untagged: Option<(ModelState, TrainHistory)> = None;
    let probe_tags = if need_probe {
        let parser = match aux.untagged_parser {
            Some(p) => p.clone(),
            None => {
                let trained = train_parser(None)?;
                let p = trained.0.clone();
                untagged = Some(trained);
                p
            }
        };
        let probe = Probe::train(&parser, splits.train, &train_cfg)?;
        Some(tag_all_splits(&probe.state, splits, exec)?)
    } else {
        None
    };

    let tagger_errors = tagger_tags.as_ref().map(|t| t.errors(splits)).transpose()?;
    let probe_errors = probe_tags.as_ref().map(|t| t.errors(splits)).transpose()?;

    let conditioning = |scheme: TagScheme| -> Result<[TagConditioning; 3]> {
        let make = |gold: &Treebank, pick: &dyn Fn(&SplitTags) -> &[Vec<Upos>], pick_err: &dyn Fn(&SplitErrors) -> &ErrorSet| {
            build_conditioning(
                scheme,
                &ConditioningInputs {
                    gold,
                    predicted: tagger_tags.as_ref().map(pick),
                    tagger_errors: tagger_errors.as_ref().map(pick_err),
                    probe_errors: probe_errors.as_ref().map(pick_err),
                },
            )
        };
        Ok([
            make(splits.train, &|t| &t.train, &|e| &e.train)?,
            make(splits.dev, &|t| &t.dev, &|e| &e.dev)?,
            make(splits.test, &|t| &t.test, &|e| &e.test)?,
        ])
    };

    let results = map_collect(exec, &config.schemes, |_, &scheme| -> Result<SchemeResult> {
        let [tr, dv, te] = conditioning(scheme)?;
        let (state, history) = match (&untagged, scheme) {
            (Some(done), TagScheme::None) => done.clone(),
            _ => train_parser(scheme.uses_tags().then_some([&tr, &dv]))?,
        };
        let score = |gold: &Treebank, c: &TagConditioning| -> Result<ParseScore> {
            let trees = parse_treebank(&state, gold, c.tags.as_deref(), train_cfg.decoder, exec)?;
            attachment_scores(&trees, gold)
        };
        log::info!("{}: scheme {scheme} trained for {} epochs", splits.name, history.epochs.len());
        Ok(SchemeResult {
            scheme,
            dev: score(splits.dev, &dv)?,
            test: score(splits.test, &te)?,
            history,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(MaskingRun {
        treebank: splits.name.to_string(),
        seed,
        tagger_accuracy: tagger_tags.as_ref().map(|t| accuracy_pair(t, splits)).transpose()?,
        probe_accuracy: probe_tags.as_ref().map(|t| accuracy_pair(t, splits)).transpose()?,
        results,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSplit {
    Dev,
    Test,
}

/// LAS table with one row per treebank (averaged over seeds) and a final
/// average row; one column per scheme, in percent.
pub fn las_table(runs: &[MaskingRun], schemes: &[TagScheme], split: ScoreSplit) -> String {
    let mut names: Vec<&str> = Vec::new();
    for r in runs {
        if !names.contains(&r.treebank.as_str()) {
            names.push(&r.treebank);
        }
    }
    let mut out = String::from("treebank");
    for s in schemes {
        out.push(',');
        out.push_str(s.as_str());
    }
    out.push('\n');
    let mut totals = vec![0.0; schemes.len()];
    for name in &names {
        out.push_str(name);
        for (k, &scheme) in schemes.iter().enumerate() {
            let vals: Vec<f64> = runs
                .iter()
                .filter(|r| r.treebank == *name)
                .filter_map(|r| r.get(scheme))
                .map(|res| match split {
                    ScoreSplit::Dev => res.dev.las,
                    ScoreSplit::Test => res.test.las,
                })
                .collect();
            out.push(',');
            if !vals.is_empty() {
                let mean = 100.0 * vals.iter().sum::<f64>() / vals.len() as f64;
                totals[k] += mean;
                out.push_str(&format!("{mean:.2}"));
            }
        }
        out.push('\n');
    }
    out.push_str("avg");
    for t in totals {
        out.push_str(&format!(",{:.2}", t / names.len().max(1) as f64));
    }
    out.push('\n');
    out
}
