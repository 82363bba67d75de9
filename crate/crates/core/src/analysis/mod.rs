//! Tagging error analysis: crossover, word-class breakdowns, per-tag F1,
//! confusions, OOV proportions and surprisal.

pub mod errors;
pub mod report;
pub mod stats;
pub mod surprisal;

pub use errors::{ErrorRecord, ErrorSet};
pub use report::{AnalysisInput, AnalysisOptions, AnalysisReport, SystemOutput};
pub use stats::{
    class_breakdown, class_ratios, crossover, error_ratio, oov_error_stats, per_tag_f1, top_confusions, ClassBreakdown,
    ClassCounts, ClassRatios, Confusion, Crossover, OovStats, TagCounts, TagScore,
};
pub use surprisal::{
    bigram_surprisal, head_rel_surprisal, ContextKind, Smoothing, SurprisalModel, SurprisalStats,
};
