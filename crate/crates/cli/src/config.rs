//! Run configuration: a TOML document, overridden by command-line flags.
//!
//! Precedence, highest first: flags, the config file, built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use clozeprobe_core::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use clozeprobe_core::metrics::{parse_keys, GroupKey};
use clozeprobe_core::report::DEFAULT_AGGREGATE_KEYS;
use clozeprobe_core::scoring::{MockKind, ScorerSpec};
use clozeprobe_core::{check_conditions, ItemBank, ItemsPerCell};

pub const DEFAULT_ITEMS_PER_CELL: usize = 20;

/// Every problem found in a configuration, reported together.
#[derive(Debug, Error)]
#[error("invalid configuration:\n{}", .0.iter().map(|p| format!("  - {p}")).collect::<Vec<_>>().join("\n"))]
pub struct ValidationError(pub Vec<String>);

/// A rectangular block of the condition space; every combination of the
/// listed values is one condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionGrid {
    pub kinds: Vec<AttractorKind>,
    pub n_attractors: Vec<usize>,
    pub entity_settings: Vec<EntitySetting>,
    #[serde(default = "default_variants")]
    pub position_variants: Vec<PositionVariant>,
    #[serde(default = "default_fillers")]
    pub n_fillers: Vec<usize>,
}

fn default_variants() -> Vec<PositionVariant> {
    vec![PositionVariant::AfterFact]
}

fn default_fillers() -> Vec<usize> {
    vec![0]
}

impl ConditionGrid {
    pub fn expand(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        for &position_variant in &self.position_variants {
            for &entity_setting in &self.entity_settings {
                for &attractor_kind in &self.kinds {
                    for &n_fillers in &self.n_fillers {
                        for &n_attractors in &self.n_attractors {
                            out.push(Condition {
                                attractor_kind,
                                n_attractors,
                                entity_setting,
                                position_variant,
                                n_fillers,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricOptions {
    /// Grouping keys for `tables/aggregates.csv`.
    #[serde(default = "default_group_by")]
    pub group_by: Vec<String>,
}

fn default_group_by() -> Vec<String> {
    DEFAULT_AGGREGATE_KEYS.iter().map(|k| k.as_str().to_string()).collect()
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            group_by: default_group_by(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Item bank document; the bundled bank when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub itembank: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_items_per_cell")]
    pub items_per_cell: ItemsPerCell,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<ConditionGrid>,
    #[serde(default = "default_scorers")]
    pub scorers: Vec<ScorerSpec>,
    /// Run directory. Not part of the reproducibility snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads. Not part of the reproducibility snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub metrics: MetricOptions,
}

fn default_items_per_cell() -> ItemsPerCell {
    ItemsPerCell::Count(DEFAULT_ITEMS_PER_CELL)
}

/// Related and unrelated attractors after the fact in both entity
/// settings, related attractors between entity and fact, and related
/// attractors with a later-mentioned key entity.
pub fn default_conditions() -> Vec<ConditionGrid> {
    use AttractorKind::*;
    vec![
        ConditionGrid {
            kinds: vec![BType, TType, Unrelated],
            n_attractors: vec![0, 1, 2, 3],
            entity_settings: vec![EntitySetting::Multi, EntitySetting::Single],
            position_variants: vec![PositionVariant::AfterFact],
            n_fillers: vec![0],
        },
        ConditionGrid {
            kinds: vec![BType, TType],
            n_attractors: vec![0, 1, 2, 3],
            entity_settings: vec![EntitySetting::Multi, EntitySetting::Single],
            position_variants: vec![PositionVariant::Between],
            n_fillers: vec![0],
        },
        ConditionGrid {
            kinds: vec![BType, TType],
            n_attractors: vec![1, 2, 3],
            entity_settings: vec![EntitySetting::Multi],
            position_variants: vec![PositionVariant::LateEntity],
            n_fillers: vec![0],
        },
    ]
}

fn default_scorers() -> Vec<ScorerSpec> {
    vec![
        ScorerSpec::mock(MockKind::Oracle),
        ScorerSpec::mock(MockKind::Recency),
        ScorerSpec::mock(MockKind::Uniform),
    ]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            itembank: None,
            seed: 0,
            items_per_cell: default_items_per_cell(),
            conditions: default_conditions(),
            scorers: default_scorers(),
            out: None,
            workers: None,
            metrics: MetricOptions::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scorers: Vec<ScorerSpec>,
    pub workers: Option<usize>,
    pub items_per_cell: Option<ItemsPerCell>,
}

pub const DEFAULT_OUT: &str = "runs/default";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ValidationError> {
        toml::from_str(text).map_err(|e| ValidationError(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationError(vec![format!("cannot read config {}: {e}", path.display())]))?;
        Self::from_toml(&text).map_err(|e| ValidationError(e.0.into_iter().map(|m| format!("{}: {m}", path.display())).collect()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if !o.scorers.is_empty() {
            self.scorers = o.scorers.clone();
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if let Some(ipc) = o.items_per_cell {
            self.items_per_cell = ipc;
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.conditions.iter().flat_map(ConditionGrid::expand).collect()
    }

    pub fn group_by(&self) -> Result<Vec<GroupKey>, ValidationError> {
        parse_keys(&self.metrics.group_by).map_err(|e| ValidationError(vec![format!("metrics.group_by: {e}")]))
    }

    pub fn load_bank(&self) -> Result<ItemBank, ValidationError> {
        match &self.itembank {
            None => Ok(ItemBank::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ValidationError(vec![format!("itembank {}: {e}", path.display())]))?;
                clozeprobe_core::load_itembank(&text)
                    .map_err(|e| ValidationError(vec![format!("itembank {}: {e}", path.display())]))
            }
        }
    }

    /// Checks everything checkable before any work starts and reports all
    /// problems at once.
    pub fn validate(&self) -> Result<ItemBank, ValidationError> {
        let mut problems = Vec::new();
        let bank = match self.load_bank() {
            Ok(b) => Some(b),
            Err(e) => {
                problems.extend(e.0);
                None
            }
        };
        if self.conditions.is_empty() {
            problems.push("conditions: at least one condition grid is required".into());
        }
        for (i, g) in self.conditions.iter().enumerate() {
            for (field, empty) in [
                ("kinds", g.kinds.is_empty()),
                ("n_attractors", g.n_attractors.is_empty()),
                ("entity_settings", g.entity_settings.is_empty()),
                ("position_variants", g.position_variants.is_empty()),
                ("n_fillers", g.n_fillers.is_empty()),
            ] {
                if empty {
                    problems.push(format!("conditions[{i}].{field} is empty"));
                }
            }
        }
        if let Some(bank) = &bank {
            problems.extend(check_conditions(bank, &self.conditions()).into_iter().map(|e| format!("conditions: {e}")));
        }
        if self.scorers.is_empty() {
            problems.push("scorers: at least one scorer is required".into());
        }
        for (i, s) in self.scorers.iter().enumerate() {
            if let Err(e) = s.validate() {
                problems.push(format!("scorers[{i}]: {e}"));
            }
            if self.scorers[..i].iter().any(|o| o.id() == s.id()) {
                problems.push(format!("scorers[{i}]: duplicate scorer {}", s.id()));
            }
        }
        if self.workers == Some(0) {
            problems.push("workers must be at least 1".into());
        }
        if let Err(e) = self.group_by() {
            problems.extend(e.0);
        }
        match (bank, problems.is_empty()) {
            (Some(bank), true) => Ok(bank),
            _ => Err(ValidationError(problems)),
        }
    }

    /// The configuration as recorded in the run manifest: everything that
    /// determines the run's outputs, and nothing else.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        c.workers = None;
        serde_json::to_value(&c).expect("config serializes")
    }

    pub fn from_snapshot(value: &serde_json::Value) -> Result<Self, ValidationError> {
        serde_json::from_value(value.clone()).map_err(|e| ValidationError(vec![format!("manifest config: {e}")]))
    }
}
