//! Attractor cloze probes: a templated item bank, a deterministic probe
//! generator, a scorer contract with mock scorers, metrics and reporting.

pub mod condition;
pub mod frame;
pub mod generator;
pub mod itembank;
pub mod metrics;
pub mod render;
pub mod report;
pub mod scoring;

pub use condition::{AttractorKind, Condition, EntitySetting, PositionVariant, MAX_ATTRACTORS};
pub use generator::{
    cell_count, check_conditions, check_item, generate, regenerate, GenerateError, ItemsPerCell, ProbeItem,
};
pub use itembank::{load_itembank, BaseItem, ItemBank, ItemBankError, Pair, SemanticSet, BLANK};
pub use metrics::{
    accuracy, aggregate, base_competence, evaluate_item, relative_probability, AggregateRow,
    BaseCompetenceRow, GroupKey, Measure, MetricError, MetricRecord, Statistic,
};
pub use report::{ReportError, RunManifest};
pub use scoring::{
    CandidateScore, LengthNormalization, LogProb, MockKind, MockScorer, ScoreRequest, ScoredItem,
    Scorer, ScorerFamily, ScorerOptions, ScorerSpec, ScoringError,
};
