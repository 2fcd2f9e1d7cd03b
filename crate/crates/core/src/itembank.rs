//! Fixed linguistic inventory: semantic sets, templates, names and filler
//! phrases.
//!
//! The bank is loaded from a JSON document with the top-level keys `sets`,
//! `templates`, `names`, `aliases`, `fillers` and `articles`. Every load is
//! validated in full; a [`ItemBankError::Validation`] lists every violation
//! found, not just the first.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::condition::{AttractorKind, Condition};
use crate::frame::{Articles, Frame};
use crate::render::{render_context, RenderParts};

/// Blank marker used in every rendered context.
pub const BLANK: &str = "___";

/// Number of entity names the sampler draws from.
pub const NAME_POOL_SIZE: usize = 6;

const DEFAULT_BANK: &str = include_str!("../data/itembank.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub background: String,
    pub target: String,
    /// Entity used for the published base context of this pair.
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSet {
    pub id: String,
    pub relation: String,
    pub pairs: Vec<Pair>,
}

impl SemanticSet {
    pub fn backgrounds(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.background.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.target.as_str())
    }
}

/// Frames keyed by related attractor kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindFrames {
    pub b_type: Frame,
    pub t_type: Frame,
}

impl KindFrames {
    pub fn get(&self, kind: AttractorKind) -> Option<&Frame> {
        match kind {
            AttractorKind::BType => Some(&self.b_type),
            AttractorKind::TType => Some(&self.t_type),
            AttractorKind::Unrelated => None,
        }
    }
}

/// Phrasing for one semantic set.
///
/// `fact` is the verb phrase stating the critical fact (`{background}`),
/// `query` the cloze sentence (`{entity}` plus one blank marker). `single`
/// frames attach a list of attractor words (`{words}`) to the key entity;
/// `multi` frames bind one word to another entity (`{entity}`, `{word}`).
/// The `between_*` frames wrap attractors placed before the critical fact
/// (`{entity}`, `{attractors}`, `{fact}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseTemplate {
    pub set: String,
    pub fact: Frame,
    pub query: Frame,
    pub single: KindFrames,
    pub multi: KindFrames,
    pub between_single: Frame,
    pub between_multi: Frame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemBank {
    pub sets: Vec<SemanticSet>,
    pub templates: Vec<BaseTemplate>,
    pub names: Vec<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub fillers: Vec<String>,
    #[serde(default)]
    pub articles: Articles,
}

/// One validation failure, located by set/field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ItemBankError {
    #[error("malformed item bank document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("item bank failed validation:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Violation>),
}

/// A pair rendered in its published base context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseItem {
    pub set_id: String,
    pub pair_index: usize,
    pub entity: String,
    pub background_word: String,
    pub target_word: String,
    pub context: String,
}

/// Parses and validates an item bank document.
pub fn load_itembank(source: &str) -> Result<ItemBank, ItemBankError> {
    let bank: ItemBank = serde_json::from_str(source)?;
    bank.validate()?;
    Ok(bank)
}

impl ItemBank {
    /// The bundled default bank.
    pub fn bundled() -> ItemBank {
        load_itembank(DEFAULT_BANK).expect("bundled item bank is valid")
    }

    pub fn bundled_source() -> &'static str {
        DEFAULT_BANK
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("item bank serializes")
    }

    /// SHA-256 over the canonical (compact) serialization.
    pub fn checksum(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("item bank serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn set(&self, id: &str) -> Option<&SemanticSet> {
        self.sets.iter().find(|s| s.id == id)
    }

    pub fn template(&self, set_id: &str) -> Option<&BaseTemplate> {
        self.templates.iter().find(|t| t.set == set_id)
    }

    /// Every name usable as a key entity in rendering (pool plus aliases).
    pub fn known_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().chain(self.aliases.iter()).map(String::as_str)
    }

    /// (set, pair index) for every pair, in bank order.
    pub fn pair_refs(&self) -> Vec<(&SemanticSet, usize)> {
        self.sets
            .iter()
            .flat_map(|s| (0..s.pairs.len()).map(move |i| (s, i)))
            .collect()
    }

    /// Renders the zero-attractor, zero-filler context for a pair with the
    /// given key entity.
    pub fn render_base(&self, set_id: &str, pair_index: usize, entity: &str) -> Option<String> {
        let set = self.set(set_id)?;
        let template = self.template(set_id)?;
        let pair = set.pairs.get(pair_index)?;
        Some(render_context(&RenderParts {
            template,
            articles: &self.articles,
            condition: Condition::base(),
            key_entity: entity,
            background: &pair.background,
            attractor_words: &[],
            attractor_entities: &[],
            fillers: &[],
        }))
    }

    /// One base item per pair, using each pair's published entity.
    pub fn base_items(&self) -> Vec<BaseItem> {
        self.pair_refs()
            .into_iter()
            .map(|(set, i)| {
                let pair = &set.pairs[i];
                BaseItem {
                    set_id: set.id.clone(),
                    pair_index: i,
                    entity: pair.entity.clone(),
                    background_word: pair.background.clone(),
                    target_word: pair.target.clone(),
                    context: self
                        .render_base(&set.id, i, &pair.entity)
                        .expect("pair reference is valid"),
                }
            })
            .collect()
    }

    /// Lower-cased words appearing in any background or target entry.
    fn set_vocabulary(&self) -> BTreeSet<String> {
        self.sets
            .iter()
            .flat_map(|s| s.pairs.iter())
            .flat_map(|p| [p.background.as_str(), p.target.as_str()])
            .flat_map(str::split_whitespace)
            .map(str::to_lowercase)
            .collect()
    }

    pub fn validate(&self) -> Result<(), ItemBankError> {
        let mut v = Vec::new();
        let mut push = |location: String, message: String| v.push(Violation { location, message });

        if self.sets.is_empty() {
            push("sets".into(), "at least one semantic set is required".into());
        }
        let mut set_ids = BTreeSet::new();
        for set in &self.sets {
            let loc = format!("sets[{}]", set.id);
            if set.id.trim().is_empty() {
                push("sets".into(), "set id must be nonempty".into());
            }
            if !set_ids.insert(set.id.as_str()) {
                push(loc.clone(), "duplicate set id".into());
            }
            if set.pairs.len() < 2 {
                push(
                    format!("{loc}.pairs"),
                    format!("needs at least 2 pairs for within-set competition, found {}", set.pairs.len()),
                );
            }
            let mut backgrounds = BTreeSet::new();
            let mut targets = BTreeSet::new();
            for (i, pair) in set.pairs.iter().enumerate() {
                let ploc = format!("{loc}.pairs[{i}]");
                if pair.background.trim().is_empty() {
                    push(ploc.clone(), "empty background word".into());
                }
                if pair.target.trim().is_empty() {
                    push(ploc.clone(), "empty target word".into());
                }
                if !backgrounds.insert(pair.background.as_str()) {
                    push(ploc.clone(), format!("duplicate background word {:?}", pair.background));
                }
                if !targets.insert(pair.target.as_str()) {
                    push(ploc.clone(), format!("duplicate target word {:?}", pair.target));
                }
                if pair.background.contains(BLANK) || pair.target.contains(BLANK) {
                    push(ploc.clone(), "words must not contain the blank marker".into());
                }
                if !self.known_names().any(|n| n == pair.entity) {
                    push(ploc.clone(), format!("entity {:?} is not in names or aliases", pair.entity));
                }
            }
        }

        let mut templated = BTreeSet::new();
        for (i, t) in self.templates.iter().enumerate() {
            let loc = format!("templates[{i}]({})", t.set);
            if self.set(&t.set).is_none() {
                push(loc.clone(), format!("references unknown set {:?}", t.set));
            }
            if !templated.insert(t.set.as_str()) {
                push(loc.clone(), "duplicate template for set".into());
            }
            let checks: [(&str, &Frame, &[&str]); 8] = [
                ("fact", &t.fact, &["background"]),
                ("query", &t.query, &["entity"]),
                ("single.b_type", &t.single.b_type, &["words"]),
                ("single.t_type", &t.single.t_type, &["words"]),
                ("multi.b_type", &t.multi.b_type, &["entity", "word"]),
                ("multi.t_type", &t.multi.t_type, &["entity", "word"]),
                ("between_single", &t.between_single, &["entity", "attractors", "fact"]),
                ("between_multi", &t.between_multi, &["entity", "attractors", "fact"]),
            ];
            for (field, frame, slots) in checks {
                if let Err(e) = frame.check_slots(slots) {
                    push(format!("{loc}.{field}"), e.0);
                }
                let blanks = frame.count_literal(BLANK);
                let want = usize::from(field == "query");
                if blanks != want {
                    push(
                        format!("{loc}.{field}"),
                        format!("expected {want} blank marker(s), found {blanks}"),
                    );
                }
            }
        }
        for set in &self.sets {
            if !templated.contains(set.id.as_str()) {
                push(format!("sets[{}]", set.id), "no template for set".into());
            }
        }

        let distinct: BTreeSet<&str> = self.names.iter().map(String::as_str).collect();
        if self.names.len() != NAME_POOL_SIZE || distinct.len() != NAME_POOL_SIZE {
            push(
                "names".into(),
                format!("expected exactly {NAME_POOL_SIZE} distinct names, found {:?}", self.names),
            );
        }
        for alias in &self.aliases {
            if distinct.contains(alias.as_str()) {
                push("aliases".into(), format!("alias {alias:?} duplicates a pool name"));
            }
        }
        for name in self.known_names() {
            if name.trim().is_empty() || name.contains(char::is_whitespace) {
                push("names".into(), format!("name {name:?} must be a single nonempty word"));
            }
        }

        let vocab = self.set_vocabulary();
        let mut seen = BTreeSet::new();
        for filler in &self.fillers {
            if filler.trim().is_empty() {
                push("fillers".into(), "empty filler phrase".into());
            }
            if !seen.insert(filler.as_str()) {
                push("fillers".into(), format!("duplicate filler {filler:?}"));
            }
            let clash: Vec<&str> = filler
                .split_whitespace()
                .filter(|w| vocab.contains(&w.to_lowercase()))
                .collect();
            if !clash.is_empty() {
                push(
                    "fillers".into(),
                    format!("filler {filler:?} contains set vocabulary {clash:?}"),
                );
            }
        }

        for (word, article) in &self.articles.0 {
            if article != "a" && article != "an" {
                push("articles".into(), format!("override for {word:?} must be \"a\" or \"an\""));
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ItemBankError::Validation(v))
        }
    }
}
