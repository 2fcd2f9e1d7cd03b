//! Expands a condition space into concrete probe items.
//!
//! Items are produced cell by cell, where a cell is one (condition, base
//! pair). Within a cell the valid attractor combinations are enumerated in
//! lexicographic order over the attractor pool; `items_per_cell` either keeps
//! all of them or draws a uniform subset without replacement. Each selected
//! combination gets its own RNG stream, derived from the run seed and the
//! item's coordinates, which picks the key entity, attractor order, attractor
//! entities and filler phrases. The coordinates are recorded as the item's
//! `seed_trace`, so any single item can be regenerated in isolation.

use std::fmt;

use itertools::Itertools;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use crate::itembank::{ItemBank, SemanticSet, BLANK};
use crate::render::{render_context, RenderParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ItemsPerCell {
    #[default]
    Exhaustive,
    Count(usize),
}

impl fmt::Display for ItemsPerCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemsPerCell::Exhaustive => f.write_str("exhaustive"),
            ItemsPerCell::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for ItemsPerCell {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("exhaustive") {
            return Ok(ItemsPerCell::Exhaustive);
        }
        s.parse::<usize>()
            .map(ItemsPerCell::Count)
            .map_err(|_| format!("items_per_cell must be a count or \"exhaustive\", got {s:?}"))
    }
}

impl Serialize for ItemsPerCell {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ItemsPerCell::Exhaustive => serializer.serialize_str("exhaustive"),
            ItemsPerCell::Count(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ItemsPerCell {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Count(n) => Ok(ItemsPerCell::Count(n as usize)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One rendered cloze context with full condition metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeItem {
    pub item_id: String,
    pub set_id: String,
    pub condition: Condition,
    pub key_entity: String,
    pub background_word: String,
    pub target_word: String,
    pub attractor_words: Vec<String>,
    pub attractor_entities: Vec<String>,
    pub filler_phrases: Vec<String>,
    pub context: String,
    pub candidate_targets: Vec<String>,
    /// `[seed, kind, n_attractors, setting, variant, n_fillers, base_index, combination]`
    pub seed_trace: Vec<u64>,
}

impl ProbeItem {
    /// Identifier of the plain base context (no attractors, no fillers) for
    /// this item's pair and key entity.
    pub fn base_key(&self) -> String {
        base_key(&self.set_id, &self.background_word, &self.key_entity)
    }

    /// The zero-attractor item sharing this item's entity, fillers and
    /// phrasing.
    pub fn counterpart(&self, bank: &ItemBank) -> ProbeItem {
        let condition = Condition {
            n_attractors: 0,
            ..self.condition
        };
        let template = bank.template(&self.set_id).expect("item set has a template");
        let context = render_context(&RenderParts {
            template,
            articles: &bank.articles,
            condition,
            key_entity: &self.key_entity,
            background: &self.background_word,
            attractor_words: &[],
            attractor_entities: &[],
            fillers: &self.filler_phrases,
        });
        ProbeItem {
            item_id: format!("{}/counterpart", self.item_id),
            condition,
            attractor_words: Vec::new(),
            attractor_entities: Vec::new(),
            context,
            ..self.clone()
        }
    }
}

pub fn base_key(set_id: &str, background: &str, entity: &str) -> String {
    format!("base/{set_id}/{background}/{entity}")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("duplicate condition {0}")]
    DuplicateCondition(Condition),
    #[error("set {set:?}: condition {condition} needs {needed} attractors but only {available} are available")]
    InsufficientAttractors {
        set: String,
        condition: Condition,
        needed: usize,
        available: usize,
    },
    #[error("set {set:?}: condition {condition} needs {needed} distinct names but the pool has {available}")]
    InsufficientNames {
        set: String,
        condition: Condition,
        needed: usize,
        available: usize,
    },
    #[error("set {set:?}: condition {condition} needs {needed} filler phrases but the pool has {available}")]
    InsufficientFillers {
        set: String,
        condition: Condition,
        needed: usize,
        available: usize,
    },
    #[error("malformed seed trace {0:?}")]
    BadSeedTrace(Vec<u64>),
}

/// Attractor candidates for one pair under one kind, in bank order.
pub fn attractor_pool(bank: &ItemBank, set: &SemanticSet, pair_index: usize, kind: AttractorKind) -> Vec<String> {
    let pair = &set.pairs[pair_index];
    let excluded = |w: &str| w == pair.background || w == pair.target;
    match kind {
        AttractorKind::BType => set.backgrounds().filter(|w| !excluded(w)).map(String::from).collect(),
        AttractorKind::TType => set.targets().filter(|w| !excluded(w)).map(String::from).collect(),
        AttractorKind::Unrelated => bank.fillers.iter().filter(|w| !excluded(w)).cloned().collect(),
    }
}

fn check_feasible(
    bank: &ItemBank,
    set: &SemanticSet,
    pool_len: usize,
    condition: Condition,
) -> Result<(), GenerateError> {
    let n = condition.n_attractors;
    if n > pool_len {
        return Err(GenerateError::InsufficientAttractors {
            set: set.id.clone(),
            condition,
            needed: n,
            available: pool_len,
        });
    }
    let names_needed = match condition.entity_setting {
        EntitySetting::Multi => n + 1,
        EntitySetting::Single => 1,
    };
    if names_needed > bank.names.len() {
        return Err(GenerateError::InsufficientNames {
            set: set.id.clone(),
            condition,
            needed: names_needed,
            available: bank.names.len(),
        });
    }
    let fillers_needed = condition.n_fillers
        + if condition.attractor_kind == AttractorKind::Unrelated { n } else { 0 };
    if fillers_needed > bank.fillers.len() {
        return Err(GenerateError::InsufficientFillers {
            set: set.id.clone(),
            condition,
            needed: fillers_needed,
            available: bank.fillers.len(),
        });
    }
    Ok(())
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of items `generate` emits for `condition`, computed without
/// generating. Cells that cannot be generated count as zero.
pub fn cell_count(bank: &ItemBank, condition: &Condition, items_per_cell: ItemsPerCell) -> usize {
    if condition.validate().is_err() {
        return 0;
    }
    bank.pair_refs()
        .into_iter()
        .map(|(set, i)| {
            let pool = attractor_pool(bank, set, i, condition.attractor_kind).len();
            if check_feasible(bank, set, pool, *condition).is_err() {
                return 0;
            }
            let combos = binomial(pool, condition.n_attractors);
            match items_per_cell {
                ItemsPerCell::Exhaustive => combos,
                ItemsPerCell::Count(m) => combos.min(m),
            }
        })
        .sum()
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn cell_trace(seed: u64, c: &Condition, base_index: usize) -> Vec<u64> {
    vec![
        seed,
        c.attractor_kind.code(),
        c.n_attractors as u64,
        c.entity_setting.code(),
        c.position_variant.code(),
        c.n_fillers as u64,
        base_index as u64,
    ]
}

fn condition_from_trace(trace: &[u64]) -> Option<(u64, Condition, usize, usize)> {
    let [seed, kind, n, setting, variant, fillers, base, combo] = *trace else {
        return None;
    };
    let attractor_kind = *AttractorKind::ALL.get(kind as usize)?;
    let entity_setting = [EntitySetting::Single, EntitySetting::Multi].get(setting as usize).copied()?;
    let position_variant = [PositionVariant::AfterFact, PositionVariant::Between, PositionVariant::LateEntity]
        .get(variant as usize)
        .copied()?;
    Some((
        seed,
        Condition {
            attractor_kind,
            n_attractors: n as usize,
            entity_setting,
            position_variant,
            n_fillers: fillers as usize,
        },
        base as usize,
        combo as usize,
    ))
}

struct Cell<'a> {
    set: &'a SemanticSet,
    pair_index: usize,
    base_index: usize,
    condition: Condition,
    pool: Vec<String>,
    combos: Vec<Vec<usize>>,
}

impl<'a> Cell<'a> {
    fn new(
        bank: &'a ItemBank,
        set: &'a SemanticSet,
        pair_index: usize,
        base_index: usize,
        condition: Condition,
    ) -> Result<Self, GenerateError> {
        let pool = attractor_pool(bank, set, pair_index, condition.attractor_kind);
        check_feasible(bank, set, pool.len(), condition)?;
        let combos = (0..pool.len()).combinations(condition.n_attractors).collect();
        Ok(Cell {
            set,
            pair_index,
            base_index,
            condition,
            pool,
            combos,
        })
    }

    fn selected(&self, seed: u64, items_per_cell: ItemsPerCell) -> Vec<usize> {
        let total = self.combos.len();
        match items_per_cell {
            ItemsPerCell::Count(m) if m < total => {
                let mut trace = cell_trace(seed, &self.condition, self.base_index);
                trace.push(u64::MAX);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&trace));
                let mut picked = index::sample(&mut rng, total, m).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..total).collect(),
        }
    }

    fn build(&self, bank: &ItemBank, seed: u64, combo_index: usize) -> ProbeItem {
        let c = self.condition;
        let mut seed_trace = cell_trace(seed, &c, self.base_index);
        seed_trace.push(combo_index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&seed_trace));

        let key_entity = bank.names[rng.random_range(0..bank.names.len())].clone();

        let mut attractor_words: Vec<String> =
            self.combos[combo_index].iter().map(|&i| self.pool[i].clone()).collect();
        attractor_words.shuffle(&mut rng);

        let attractor_entities: Vec<String> = if c.entity_setting == EntitySetting::Multi && c.n_attractors > 0 {
            let others: Vec<&String> = bank.names.iter().filter(|n| **n != key_entity).collect();
            index::sample(&mut rng, others.len(), c.n_attractors)
                .into_iter()
                .map(|i| others[i].clone())
                .collect()
        } else {
            Vec::new()
        };

        let spare: Vec<&String> = bank.fillers.iter().filter(|f| !attractor_words.contains(f)).collect();
        let filler_phrases: Vec<String> = index::sample(&mut rng, spare.len(), c.n_fillers)
            .into_iter()
            .map(|i| spare[i].clone())
            .collect();

        let pair = &self.set.pairs[self.pair_index];
        let template = bank.template(&self.set.id).expect("validated bank");
        let context = render_context(&RenderParts {
            template,
            articles: &bank.articles,
            condition: c,
            key_entity: &key_entity,
            background: &pair.background,
            attractor_words: &attractor_words,
            attractor_entities: &attractor_entities,
            fillers: &filler_phrases,
        });

        ProbeItem {
            item_id: format!(
                "{}-{:02}-{}-{}-{}-n{}-f{}-{:04}",
                self.set.id,
                self.pair_index,
                c.attractor_kind,
                c.entity_setting,
                c.position_variant,
                c.n_attractors,
                c.n_fillers,
                combo_index
            ),
            set_id: self.set.id.clone(),
            condition: c,
            key_entity,
            background_word: pair.background.clone(),
            target_word: pair.target.clone(),
            attractor_words,
            attractor_entities,
            filler_phrases,
            context,
            candidate_targets: self.set.targets().map(String::from).collect(),
            seed_trace,
        }
    }
}

/// Every reason `generate` would reject `conditions`, without generating.
pub fn check_conditions(bank: &ItemBank, conditions: &[Condition]) -> Vec<GenerateError> {
    let mut problems = Vec::new();
    for (i, c) in conditions.iter().enumerate() {
        if let Err(e) = c.validate() {
            problems.push(GenerateError::InvalidCondition(e));
            continue;
        }
        if conditions[..i].contains(c) {
            problems.push(GenerateError::DuplicateCondition(*c));
            continue;
        }
        for (set, pair_index) in bank.pair_refs() {
            let pool = attractor_pool(bank, set, pair_index, c.attractor_kind).len();
            if let Err(e) = check_feasible(bank, set, pool, *c) {
                problems.push(e);
                break;
            }
        }
    }
    problems
}

/// Generates items for every condition over every base pair.
///
/// Output order is condition order, then bank pair order, then combination
/// index; it does not depend on the size of the rayon pool the call runs in.
pub fn generate(
    bank: &ItemBank,
    conditions: &[Condition],
    seed: u64,
    items_per_cell: ItemsPerCell,
) -> Result<Vec<ProbeItem>, GenerateError> {
    for (i, c) in conditions.iter().enumerate() {
        c.validate().map_err(GenerateError::InvalidCondition)?;
        if conditions[..i].contains(c) {
            return Err(GenerateError::DuplicateCondition(*c));
        }
    }
    let pairs = bank.pair_refs();
    let mut cells = Vec::with_capacity(conditions.len() * pairs.len());
    for c in conditions {
        for (base_index, (set, pair_index)) in pairs.iter().enumerate() {
            cells.push(Cell::new(bank, set, *pair_index, base_index, *c)?);
        }
    }
    let items = cells
        .par_iter()
        .map(|cell| {
            cell.selected(seed, items_per_cell)
                .into_iter()
                .map(|combo| cell.build(bank, seed, combo))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    Ok(items.into_iter().flatten().collect())
}

/// Rebuilds a single item from its seed trace.
pub fn regenerate(bank: &ItemBank, seed_trace: &[u64]) -> Result<ProbeItem, GenerateError> {
    let bad = || GenerateError::BadSeedTrace(seed_trace.to_vec());
    let (seed, condition, base_index, combo) = condition_from_trace(seed_trace).ok_or_else(bad)?;
    condition.validate().map_err(GenerateError::InvalidCondition)?;
    let pairs = bank.pair_refs();
    let (set, pair_index) = *pairs.get(base_index).ok_or_else(bad)?;
    let cell = Cell::new(bank, set, pair_index, base_index, condition)?;
    if combo >= cell.combos.len() {
        return Err(bad());
    }
    Ok(cell.build(bank, seed, combo))
}

fn whole_word_count(text: &str, phrase: &str) -> usize {
    let words: Vec<&str> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric() && c != '_'))
        .map(|w| w.strip_suffix("'s").unwrap_or(w))
        .collect();
    let needle: Vec<&str> = phrase.split_whitespace().collect();
    if needle.is_empty() || needle.len() > words.len() {
        return 0;
    }
    words.windows(needle.len()).filter(|w| *w == needle.as_slice()).count()
}

/// Checks the structural invariants every generated item must satisfy.
pub fn check_item(bank: &ItemBank, item: &ProbeItem) -> Result<(), String> {
    let c = item.condition;
    c.validate()?;
    let set = bank.set(&item.set_id).ok_or("unknown set")?;
    if !item.candidate_targets.contains(&item.target_word) {
        return Err("target not among candidates".into());
    }
    if item.candidate_targets.iter().unique().count() != item.candidate_targets.len() {
        return Err("duplicate candidates".into());
    }
    if item.attractor_words.len() != c.n_attractors {
        return Err("attractor count mismatch".into());
    }
    if item.filler_phrases.len() != c.n_fillers {
        return Err("filler count mismatch".into());
    }
    if item.attractor_words.iter().unique().count() != item.attractor_words.len() {
        return Err("duplicate attractor".into());
    }
    if item
        .attractor_words
        .iter()
        .any(|w| *w == item.background_word || *w == item.target_word)
    {
        return Err("attractor equals critical word".into());
    }
    let ok_source = |w: &String| match c.attractor_kind {
        AttractorKind::BType => set.backgrounds().any(|b| b == w),
        AttractorKind::TType => set.targets().any(|t| t == w),
        AttractorKind::Unrelated => bank.fillers.contains(w),
    };
    if !item.attractor_words.iter().all(ok_source) {
        return Err("attractor drawn from the wrong pool".into());
    }
    if item.filler_phrases.iter().any(|f| item.attractor_words.contains(f)) {
        return Err("filler reused as attractor".into());
    }
    match c.entity_setting {
        EntitySetting::Multi => {
            if item.attractor_entities.len() != c.n_attractors
                || item.attractor_entities.iter().unique().count() != c.n_attractors
                || item.attractor_entities.contains(&item.key_entity)
            {
                return Err("attractor entities must be distinct and exclude the key entity".into());
            }
        }
        EntitySetting::Single => {
            if !item.attractor_entities.is_empty() {
                return Err("single setting carries attractor entities".into());
            }
        }
    }
    if item.context.matches(BLANK).count() != 1 || !item.context.ends_with(BLANK) {
        return Err("context must end in exactly one blank marker".into());
    }
    let query = item.context.rsplit_once(". ").map(|(_, q)| q).unwrap_or("");
    if !query.contains(&item.key_entity) {
        return Err("query does not mention the key entity".into());
    }
    if whole_word_count(&item.context, &item.target_word) != 0 {
        return Err("target word appears in context".into());
    }
    if whole_word_count(&item.context, &item.background_word) != 1 {
        return Err("critical background word must appear exactly once".into());
    }
    Ok(())
}
