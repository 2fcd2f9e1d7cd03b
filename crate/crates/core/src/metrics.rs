//! Within-set accuracy, relative probability, and grouped aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{AttractorKind, EntitySetting, PositionVariant};
use crate::generator::{base_key, ProbeItem};
use crate::itembank::ItemBank;
use crate::scoring::{ScoredItem, ScorerSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("target {target:?} is not among the scored candidates of {item_id}")]
    MissingTarget { item_id: String, target: String },
    #[error("unknown grouping key {0:?}")]
    UnknownKey(String),
    #[error("unknown statistic {0:?}")]
    UnknownStatistic(String),
    #[error("item {0} has no scored base context")]
    MissingBase(String),
}

/// 1 iff the target's log-probability strictly exceeds every other
/// candidate's. Exact ties count as failures.
pub fn accuracy(scored: &ScoredItem, target: &str) -> Result<u8, MetricError> {
    let target_score = scored.score_of(target).ok_or_else(|| MetricError::MissingTarget {
        item_id: scored.item_id.clone(),
        target: target.to_string(),
    })?;
    let wins = target_score.error.is_none()
        && scored
            .scores
            .iter()
            .filter(|s| s.candidate != target)
            .all(|s| target_score.log_prob > s.log_prob);
    Ok(u8::from(wins))
}

/// `p_attr / p_base`, or `None` when the base probability is zero.
pub fn relative_probability(p_attr: f64, p_base: f64) -> Option<f64> {
    (p_base > 0.0).then(|| p_attr / p_base)
}

/// Per-item, per-scorer metric values with grouping keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub item_id: String,
    pub scorer: String,
    pub accuracy: u8,
    pub target_prob_attr: f64,
    pub target_prob_base: f64,
    /// Absent when the base probability is zero (excluded from ratio
    /// aggregates).
    pub relative_prob: Option<f64>,
    pub set_id: String,
    pub attractor_kind: AttractorKind,
    pub n_attractors: usize,
    pub entity_setting: EntitySetting,
    pub position_variant: PositionVariant,
    pub n_fillers: usize,
}

/// Builds the metric record for one item from its own scores and the
/// scores of its plain base context.
pub fn evaluate_item(item: &ProbeItem, scored: &ScoredItem, base: &ScoredItem) -> Result<MetricRecord, MetricError> {
    let missing = |s: &ScoredItem| MetricError::MissingTarget {
        item_id: s.item_id.clone(),
        target: item.target_word.clone(),
    };
    let p_attr = scored.score_of(&item.target_word).ok_or_else(|| missing(scored))?.log_prob.prob();
    let p_base = base.score_of(&item.target_word).ok_or_else(|| missing(base))?.log_prob.prob();
    let c = item.condition;
    Ok(MetricRecord {
        item_id: item.item_id.clone(),
        scorer: scored.scorer.id(),
        accuracy: accuracy(scored, &item.target_word)?,
        target_prob_attr: p_attr,
        target_prob_base: p_base,
        relative_prob: relative_probability(p_attr, p_base),
        set_id: item.set_id.clone(),
        attractor_kind: c.attractor_kind,
        n_attractors: c.n_attractors,
        entity_setting: c.entity_setting,
        position_variant: c.position_variant,
        n_fillers: c.n_fillers,
    })
}

/// Outcome of one published base item under one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseCompetenceRow {
    pub scorer: String,
    pub set_id: String,
    pub pair_index: usize,
    pub context: String,
    pub target_word: String,
    pub predicted: String,
    pub correct: u8,
}

/// Checks every published base item (each pair with its own entity) against
/// the scored base contexts. Scored items that are not published base
/// contexts are ignored; a published item without scores is an error.
pub fn base_competence(bank: &ItemBank, scored: &[ScoredItem]) -> Result<Vec<BaseCompetenceRow>, MetricError> {
    let mut scorers: Vec<ScorerSpec> = Vec::new();
    for s in scored {
        if !scorers.contains(&s.scorer) {
            scorers.push(s.scorer.clone());
        }
    }
    let mut rows = Vec::new();
    for spec in &scorers {
        for base in bank.base_items() {
            let key = base_key(&base.set_id, &base.background_word, &base.entity);
            let item = scored
                .iter()
                .find(|s| &s.scorer == spec && s.item_id == key)
                .ok_or_else(|| MetricError::MissingBase(key.clone()))?;
            let correct = accuracy(item, &base.target_word)?;
            let predicted = item.argmax().map(|c| c.candidate.clone()).unwrap_or_default();
            rows.push(BaseCompetenceRow {
                scorer: spec.id(),
                set_id: base.set_id,
                pair_index: base.pair_index,
                context: base.context,
                target_word: base.target_word,
                predicted,
                correct,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Scorer,
    SetId,
    AttractorKind,
    /// "related" (B-type and T-type merged) or "unrelated".
    KindGroup,
    NAttractors,
    EntitySetting,
    PositionVariant,
    NFillers,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Scorer => "scorer",
            GroupKey::SetId => "set_id",
            GroupKey::AttractorKind => "attractor_kind",
            GroupKey::KindGroup => "kind_group",
            GroupKey::NAttractors => "n_attractors",
            GroupKey::EntitySetting => "entity_setting",
            GroupKey::PositionVariant => "position_variant",
            GroupKey::NFillers => "n_fillers",
        }
    }

    pub fn value_of(self, r: &MetricRecord) -> String {
        match self {
            GroupKey::Scorer => r.scorer.clone(),
            GroupKey::SetId => r.set_id.clone(),
            GroupKey::AttractorKind => r.attractor_kind.to_string(),
            GroupKey::KindGroup => kind_group(r.attractor_kind).to_string(),
            GroupKey::NAttractors => r.n_attractors.to_string(),
            GroupKey::EntitySetting => r.entity_setting.to_string(),
            GroupKey::PositionVariant => r.position_variant.to_string(),
            GroupKey::NFillers => r.n_fillers.to_string(),
        }
    }
}

pub fn kind_group(kind: AttractorKind) -> &'static str {
    if kind.is_related() {
        "related"
    } else {
        "unrelated"
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKey {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, MetricError> {
        Ok(match s {
            "scorer" | "model" => GroupKey::Scorer,
            "set_id" => GroupKey::SetId,
            "attractor_kind" => GroupKey::AttractorKind,
            "kind_group" => GroupKey::KindGroup,
            "n_attractors" => GroupKey::NAttractors,
            "entity_setting" => GroupKey::EntitySetting,
            "position_variant" => GroupKey::PositionVariant,
            "n_fillers" => GroupKey::NFillers,
            other => return Err(MetricError::UnknownKey(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Median,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
        }
    }

    /// `None` for an empty sample.
    pub fn apply(self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        match self {
            Statistic::Mean => Some(values.iter().sum::<f64>() / values.len() as f64),
            Statistic::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let mid = v.len() / 2;
                Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
            }
        }
    }
}

impl FromStr for Statistic {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            other => Err(MetricError::UnknownStatistic(other.to_string())),
        }
    }
}

/// Which per-record quantity to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Accuracy,
    RelativeProb,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Accuracy => "accuracy",
            Measure::RelativeProb => "relative_prob",
        }
    }

    fn value(self, r: &MetricRecord) -> Option<f64> {
        match self {
            Measure::Accuracy => Some(f64::from(r.accuracy)),
            Measure::RelativeProb => r.relative_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Group key values, parallel to the requested keys.
    pub keys: Vec<String>,
    /// `None` when every record in the group was excluded.
    pub value: Option<f64>,
    /// Records contributing to `value`.
    pub count: usize,
    /// Records in the group excluded for an undefined ratio.
    pub excluded: usize,
}

impl AggregateRow {
    pub fn is_empty(&self) -> bool {
        self.value.is_none()
    }
}

/// Groups records by `group_by` and applies `statistic` to `measure`.
/// Rows come out sorted by key values (numerically for numeric keys).
pub fn aggregate(
    records: &[MetricRecord],
    group_by: &[GroupKey],
    measure: Measure,
    statistic: Statistic,
) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<Vec<SortKey>, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|k| SortKey::new(k.value_of(r))).collect();
        let entry = groups.entry(key).or_default();
        match measure.value(r) {
            Some(v) => entry.0.push(v),
            None => entry.1 += 1,
        }
    }
    groups
        .into_iter()
        .map(|(key, (values, excluded))| AggregateRow {
            keys: key.into_iter().map(|k| k.0).collect(),
            value: statistic.apply(&values),
            count: values.len(),
            excluded,
        })
        .collect()
}

/// Parses grouping keys, failing on the first unknown name.
pub fn parse_keys<S: AsRef<str>>(names: &[S]) -> Result<Vec<GroupKey>, MetricError> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// String key ordering numbers by value.
#[derive(Debug, Clone, PartialEq, Eq)]
struct SortKey(String);

impl SortKey {
    fn new(s: String) -> Self {
        SortKey(s)
    }
}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b),
            _ => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
