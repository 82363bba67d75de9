//! Assemble every statistic into one report and write it as JSON, CSV
//! tables and figure series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::tagging_accuracy;
use crate::tags::{Upos, WordClass};
use crate::treebank::Treebank;

use super::errors::ErrorSet;
use super::stats::{
    class_breakdown, class_ratios, confusion_counts, crossover, oov_error_stats, rank_confusions, ClassBreakdown,
    ClassRatios, Confusion, Crossover, OovStats, TagCounts, TagScore,
};
use super::surprisal::{ContextKind, Smoothing, SurprisalModel, SurprisalStats};

/// Predicted tags of one system over the target treebank.
#[derive(Clone, Debug)]
pub struct SystemOutput {
    pub name: String,
    pub tags: Vec<Vec<Upos>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub smoothing: Smoothing,
    pub top_k: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            smoothing: Smoothing::AddOne,
            top_k: 5,
        }
    }
}

/// Everything needed to analyse one treebank.
#[derive(Clone, Copy, Debug)]
pub struct AnalysisInput<'a> {
    /// Gold training split; estimates surprisal.
    pub train: &'a Treebank,
    /// Gold split the systems were run on.
    pub target: &'a Treebank,
    pub systems: &'a [SystemOutput],
    /// Per-token OOV flags over `target`.
    pub oov: &'a [Vec<bool>],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemAnalysis {
    pub name: String,
    pub accuracy: f64,
    pub errors: usize,
    pub classes: ClassBreakdown,
    pub tag_scores: BTreeMap<Upos, TagScore>,
    pub top_confusions: Vec<Confusion>,
    pub oov: OovStats,
    pub surprisal_bigram: SurprisalStats,
    pub surprisal_head_relation: SurprisalStats,
}

/// Crossover and class ratios of the first system against the second.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub crossover: Crossover,
    pub class_ratios: ClassRatios,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreebankAnalysis {
    pub treebank: String,
    pub split: String,
    pub tokens: usize,
    pub systems: Vec<SystemAnalysis>,
    pub comparison: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledSystem {
    pub name: String,
    pub accuracy: f64,
    pub errors: usize,
    pub classes: ClassBreakdown,
    pub tag_scores: BTreeMap<Upos, TagScore>,
    pub micro_f1: Option<f64>,
    pub top_confusions: Vec<Confusion>,
    pub oov_among_errors: Option<f64>,
    pub surprisal_bigram_errors: Option<f64>,
    pub surprisal_head_relation_errors: Option<f64>,
}

/// Statistics pooled over all tokens of all treebanks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledAnalysis {
    pub tokens: usize,
    pub oov_all: Option<f64>,
    pub surprisal_bigram_all: f64,
    pub surprisal_head_relation_all: f64,
    pub systems: Vec<PooledSystem>,
    pub comparison: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub options: AnalysisOptions,
    pub treebanks: Vec<TreebankAnalysis>,
    pub pooled: PooledAnalysis,
}

struct Accumulator {
    counts: TagCounts,
    confusions: BTreeMap<(Upos, Upos), usize>,
    classes: ClassBreakdown,
    oov_errors: usize,
    bigram_bits: f64,
    head_bits: f64,
    errors: usize,
}

fn weighted(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

fn analyse_treebank(input: &AnalysisInput<'_>, options: &AnalysisOptions) -> Result<(TreebankAnalysis, Vec<ErrorSet>)> {
    let bigram = SurprisalModel::fit(ContextKind::Bigram, options.smoothing, input.train);
    let head = SurprisalModel::fit(ContextKind::HeadRelation, options.smoothing, input.train);
    let mut systems = Vec::new();
    let mut sets = Vec::new();
    for sys in input.systems {
        let errors = ErrorSet::from_predictions(input.target, &sys.tags)?;
        systems.push(SystemAnalysis {
            name: sys.name.clone(),
            accuracy: tagging_accuracy(&sys.tags, input.target)?,
            errors: errors.len(),
            classes: class_breakdown(&errors, input.target)?,
            tag_scores: TagCounts::from_predictions(&sys.tags, input.target)?.scores(),
            top_confusions: rank_confusions(&confusion_counts(&errors), options.top_k),
            oov: oov_error_stats(input.oov, &errors)?,
            surprisal_bigram: bigram.stats(input.target, &errors)?,
            surprisal_head_relation: head.stats(input.target, &errors)?,
        });
        sets.push(errors);
    }
    let comparison = compare(&systems.iter().map(|s| (s.name.as_str(), s.classes)).collect::<Vec<_>>(), &sets);
    Ok((
        TreebankAnalysis {
            treebank: input.target.name.clone(),
            split: input.target.split.to_string(),
            tokens: input.target.token_count(),
            systems,
            comparison,
        },
        sets,
    ))
}

fn compare(systems: &[(&str, ClassBreakdown)], sets: &[ErrorSet]) -> Option<Comparison> {
    match (systems, sets) {
        ([(a, ca), (b, cb), ..], [sa, sb, ..]) => Some(Comparison {
            a: a.to_string(),
            b: b.to_string(),
            crossover: crossover(sa, sb),
            class_ratios: class_ratios(ca, cb),
        }),
        _ => None,
    }
}

impl AnalysisReport {
    /// Analyse each treebank and pool the results. Every input must list
    /// the same systems in the same order.
    pub fn build(inputs: &[AnalysisInput<'_>], options: AnalysisOptions) -> Result<Self> {
        let first = inputs.first().ok_or(Error::EmptyTreebank)?;
        let names: Vec<&str> = first.systems.iter().map(|s| s.name.as_str()).collect();
        for inp in inputs {
            let these: Vec<&str> = inp.systems.iter().map(|s| s.name.as_str()).collect();
            if these != names {
                return Err(Error::Config(format!(
                    "treebank {} lists systems {these:?}, expected {names:?}",
                    inp.target.name
                )));
            }
        }

        let mut acc: Vec<Accumulator> = names
            .iter()
            .map(|_| Accumulator {
                counts: TagCounts::default(),
                confusions: BTreeMap::new(),
                classes: ClassBreakdown::default(),
                oov_errors: 0,
                bigram_bits: 0.0,
                head_bits: 0.0,
                errors: 0,
            })
            .collect();
        let mut pooled_cross: Option<Crossover> = None;
        let mut tokens = 0;
        let mut oov_tokens = 0;
        let mut bigram_all = 0.0;
        let mut head_all = 0.0;
        let mut treebanks = Vec::new();

        for inp in inputs {
            let (analysis, sets) = analyse_treebank(inp, &options)?;
            tokens += analysis.tokens;
            for (k, (sys, set)) in analysis.systems.iter().zip(&sets).enumerate() {
                let a = &mut acc[k];
                a.counts.add(&inp.systems[k].tags, inp.target)?;
                for (pair, n) in confusion_counts(set) {
                    *a.confusions.entry(pair).or_insert(0) += n;
                }
                a.classes.add(&sys.classes);
                a.oov_errors += sys.oov.oov_errors;
                a.errors += sys.errors;
                a.bigram_bits += sys.surprisal_bigram.mean_errors.unwrap_or(0.0) * sys.errors as f64;
                a.head_bits += sys.surprisal_head_relation.mean_errors.unwrap_or(0.0) * sys.errors as f64;
                if k == 0 {
                    oov_tokens += sys.oov.oov_tokens;
                    bigram_all += sys.surprisal_bigram.mean_all * analysis.tokens as f64;
                    head_all += sys.surprisal_head_relation.mean_all * analysis.tokens as f64;
                }
            }
            if let Some(c) = &analysis.comparison {
                pooled_cross.get_or_insert_with(Crossover::default).add(&c.crossover);
            }
            treebanks.push(analysis);
        }

        let systems: Vec<PooledSystem> = names
            .iter()
            .zip(&acc)
            .map(|(name, a)| PooledSystem {
                name: name.to_string(),
                accuracy: (tokens - a.errors) as f64 / tokens.max(1) as f64,
                errors: a.errors,
                classes: a.classes,
                tag_scores: a.counts.scores(),
                micro_f1: a.counts.micro_f1(),
                top_confusions: rank_confusions(&a.confusions, options.top_k),
                oov_among_errors: weighted(a.oov_errors as f64, a.errors),
                surprisal_bigram_errors: weighted(a.bigram_bits, a.errors),
                surprisal_head_relation_errors: weighted(a.head_bits, a.errors),
            })
            .collect();
        let comparison = match (&systems[..], pooled_cross) {
            ([a, b, ..], Some(cross)) => Some(Comparison {
                a: a.name.clone(),
                b: b.name.clone(),
                crossover: cross,
                class_ratios: class_ratios(&a.classes, &b.classes),
            }),
            _ => None,
        };
        Ok(AnalysisReport {
            options,
            treebanks,
            pooled: PooledAnalysis {
                tokens,
                oov_all: weighted(oov_tokens as f64, tokens),
                surprisal_bigram_all: bigram_all / tokens.max(1) as f64,
                surprisal_head_relation_all: head_all / tokens.max(1) as f64,
                systems,
                comparison,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    fn system_names(&self) -> Vec<&str> {
        self.pooled.systems.iter().map(|s| s.name.as_str()).collect()
    }

    /// Tagging accuracy per treebank and system, in percent, plus the mean.
    pub fn accuracy_table(&self) -> String {
        let names = self.system_names();
        let mut out = format!("treebank,{}\n", names.join(","));
        let mut sums = vec![0.0; names.len()];
        for tb in &self.treebanks {
            out.push_str(&tb.treebank);
            for (k, s) in tb.systems.iter().enumerate() {
                sums[k] += s.accuracy;
                let _ = write!(out, ",{:.2}", 100.0 * s.accuracy);
            }
            out.push('\n');
        }
        out.push_str("avg");
        for s in sums {
            let _ = write!(out, ",{:.2}", 100.0 * s / self.treebanks.len() as f64);
        }
        out.push('\n');
        out
    }

    /// Pooled error counts per word class with the first-over-second ratio.
    pub fn class_table(&self) -> String {
        let names = self.system_names();
        let mut out = String::from("class");
        for n in &names {
            let _ = write!(out, ",{n}_errors");
        }
        out.push_str(",tokens");
        if names.len() >= 2 {
            let _ = write!(out, ",ratio_{}_{}", names[0], names[1]);
        }
        out.push('\n');
        let classes = WordClass::ALL.iter().map(|&c| (c.as_str(), Some(c))).chain([("total", None)]);
        for (label, class) in classes {
            out.push_str(label);
            let counts: Vec<_> = self
                .pooled
                .systems
                .iter()
                .map(|s| class.map_or(s.classes.total, |c| s.classes.get(c)))
                .collect();
            for c in &counts {
                let _ = write!(out, ",{}", c.errors);
            }
            let _ = write!(out, ",{}", counts.first().map_or(0, |c| c.tokens));
            if let [a, b, ..] = &counts[..] {
                out.push(',');
                if let Some(r) = super::stats::error_ratio(a.errors, b.errors) {
                    let _ = write!(out, "{r:.2}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Top confusions per treebank and system.
    pub fn confusion_table(&self) -> String {
        let mut out = String::from("treebank,system,rank,gold,predicted,count,total_errors\n");
        for tb in &self.treebanks {
            for s in &tb.systems {
                for (i, c) in s.top_confusions.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        tb.treebank,
                        s.name,
                        i + 1,
                        c.gold,
                        c.predicted,
                        c.count,
                        s.errors
                    );
                }
            }
        }
        out
    }

    /// Pooled F1 per tag in percent, grouped by word class; empty cells
    /// mark tags absent for that system.
    pub fn f1_table(&self) -> String {
        let names = self.system_names();
        let mut out = format!("class,tag,{}\n", names.join(","));
        for class in WordClass::ALL {
            for tag in class.members() {
                let cells: Vec<String> = self
                    .pooled
                    .systems
                    .iter()
                    .map(|s| s.tag_scores.get(&tag).map_or(String::new(), |t| format!("{:.2}", 100.0 * t.f1)))
                    .collect();
                if cells.iter().all(String::is_empty) {
                    continue;
                }
                let _ = writeln!(out, "{},{},{}", class.as_str(), tag, cells.join(","));
            }
        }
        out
    }

    /// Two-column (label, value) series, keyed by file stem.
    pub fn figure_series(&self) -> Vec<(String, Vec<(String, f64)>)> {
        let mut series = Vec::new();
        if let Some(c) = &self.pooled.comparison {
            if let Some((a, both, b)) = c.crossover.shares() {
                series.push((
                    "crossover".to_string(),
                    vec![
                        (format!("only_{}", c.a), 100.0 * a),
                        ("both".to_string(), 100.0 * both),
                        (format!("only_{}", c.b), 100.0 * b),
                    ],
                ));
            }
        }
        let mut oov = vec![("all".to_string(), self.pooled.oov_all.unwrap_or(0.0))];
        let mut bigram = vec![("all".to_string(), self.pooled.surprisal_bigram_all)];
        let mut head = vec![("all".to_string(), self.pooled.surprisal_head_relation_all)];
        for s in &self.pooled.systems {
            let label = format!("errors_{}", s.name);
            if let Some(v) = s.oov_among_errors {
                oov.push((label.clone(), v));
            }
            if let Some(v) = s.surprisal_bigram_errors {
                bigram.push((label.clone(), v));
            }
            if let Some(v) = s.surprisal_head_relation_errors {
                head.push((label, v));
            }
        }
        series.push(("oov_proportion".to_string(), oov));
        series.push(("surprisal_bigram".to_string(), bigram));
        series.push(("surprisal_head_relation".to_string(), head));
        series
    }

    /// Write `reports/analysis.json`, `tables/*.csv` and `figures/*.csv`
    /// (plus SVG bar charts when `svg`) under `out`. Returns written paths.
    pub fn write_all(&self, out: &Path, svg: bool) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut put = |rel: String, body: String| -> Result<()> {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        put("reports/analysis.json".into(), self.to_json()?)?;
        put("tables/tagging_accuracy.csv".into(), self.accuracy_table())?;
        put("tables/class_errors.csv".into(), self.class_table())?;
        put("tables/top_confusions.csv".into(), self.confusion_table())?;
        put("tables/tag_f1.csv".into(), self.f1_table())?;
        for (name, points) in self.figure_series() {
            let mut csv = String::from("label,value\n");
            for (l, v) in &points {
                let _ = writeln!(csv, "{l},{v}");
            }
            put(format!("figures/{name}.csv"), csv)?;
            if svg {
                put(format!("figures/{name}.svg"), bar_chart_svg(&name, &points))?;
            }
        }
        Ok(written)
    }
}

/// Minimal vertical bar chart.
pub fn bar_chart_svg(title: &str, points: &[(String, f64)]) -> String {
    let (width, height, margin) = (120 * points.len().max(1) + 60, 300, 40);
    let max = points.iter().map(|p| p.1).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let plot = (height - 2 * margin) as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        width / 2,
        escape(title)
    );
    for (i, (label, value)) in points.iter().enumerate() {
        let h = plot * value.max(0.0) / max;
        let x = margin + 120 * i;
        let y = (height - margin) as f64 - h;
        let _ = writeln!(
            svg,
            "<rect x=\"{x}\" y=\"{y:.2}\" width=\"80\" height=\"{h:.2}\" fill=\"#4c72b0\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n\
             <text x=\"{}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{value:.2}</text>",
            x + 40,
            height - margin + 15,
            escape(label),
            x + 40,
            y - 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
