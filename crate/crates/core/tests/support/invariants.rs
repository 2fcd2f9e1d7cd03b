//! Random generator configurations and the invariants every generated
//! stream must satisfy.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use clozeprobe_core::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use clozeprobe_core::scoring::context_words;
use clozeprobe_core::{cell_count, check_item, generate, regenerate, ItemBank, ItemsPerCell};

pub type GenConfig = (Vec<Condition>, u64, ItemsPerCell);

pub fn condition_strategy() -> impl Strategy<Value = Condition> {
    (0usize..3, 0usize..=3, any::<bool>(), 0usize..3, 0usize..=2).prop_map(|(k, n, multi, v, f)| {
        let entity_setting = if multi { EntitySetting::Multi } else { EntitySetting::Single };
        let mut position_variant = [PositionVariant::AfterFact, PositionVariant::Between, PositionVariant::LateEntity][v];
        if position_variant == PositionVariant::LateEntity && (entity_setting == EntitySetting::Single || n == 0) {
            position_variant = PositionVariant::AfterFact;
        }
        Condition {
            attractor_kind: AttractorKind::ALL[k],
            n_attractors: n,
            entity_setting,
            position_variant,
            n_fillers: f,
        }
    })
}

pub fn config_strategy() -> impl Strategy<Value = GenConfig> {
    (
        prop::collection::btree_set(condition_strategy(), 1..5),
        any::<u64>(),
        prop_oneof![Just(ItemsPerCell::Exhaustive), (0usize..6).prop_map(ItemsPerCell::Count)],
    )
        .prop_map(|(conds, seed, ipc)| (conds.into_iter().collect(), seed, ipc))
}

fn choose(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as usize
}

/// Items per condition, counted straight from the bank's set sizes.
pub fn expected_count(bank: &ItemBank, c: &Condition, ipc: ItemsPerCell) -> usize {
    bank.sets
        .iter()
        .map(|set| {
            let pool = match c.attractor_kind {
                AttractorKind::BType | AttractorKind::TType => set.pairs.len() - 1,
                AttractorKind::Unrelated => bank.fillers.len(),
            };
            let per_pair = choose(pool, c.n_attractors);
            let per_pair = match ipc {
                ItemsPerCell::Exhaustive => per_pair,
                ItemsPerCell::Count(m) => per_pair.min(m),
            };
            per_pair * set.pairs.len()
        })
        .sum()
}

fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|w| it.any(|h| h == w))
}

/// Count agreement, unique ids, exclusion, pairing, trace round-trip and
/// same-seed determinism for one configuration.
pub fn check_config((conditions, seed, ipc): &GenConfig) -> Result<(), TestCaseError> {
    let bank = ItemBank::bundled();
    let items = generate(&bank, conditions, *seed, *ipc).map_err(|e| TestCaseError::fail(e.to_string()))?;

    let mut per_condition: BTreeMap<String, usize> = BTreeMap::new();
    for item in &items {
        *per_condition.entry(item.condition.to_string()).or_default() += 1;
    }
    let mut total = 0;
    for c in conditions {
        let want = expected_count(&bank, c, *ipc);
        prop_assert_eq!(cell_count(&bank, c, *ipc), want, "cell_count {}", c);
        prop_assert_eq!(per_condition.get(&c.to_string()).copied().unwrap_or(0), want, "generated {}", c);
        total += want;
    }
    prop_assert_eq!(items.len(), total);

    let ids: BTreeSet<_> = items.iter().map(|i| i.item_id.as_str()).collect();
    prop_assert_eq!(ids.len(), items.len());

    for item in &items {
        if let Err(e) = check_item(&bank, item) {
            return Err(TestCaseError::fail(format!("{}: {e}: {}", item.item_id, item.context)));
        }
        let words = context_words(&item.context);
        prop_assert!(!words.contains(&item.target_word.as_str()));

        // The zero-attractor counterpart is what remains once the attractor
        // material is removed.
        let counterpart = item.counterpart(&bank);
        prop_assert_eq!(&counterpart.target_word, &item.target_word);
        prop_assert_eq!(&counterpart.filler_phrases, &item.filler_phrases);
        let cw = context_words(&counterpart.context);
        prop_assert!(is_subsequence(&cw, &words), "{:?} not within {:?}", counterpart.context, item.context);
        if item.condition.n_attractors == 0 {
            prop_assert_eq!(&counterpart.context, &item.context);
        }

        prop_assert_eq!(&regenerate(&bank, &item.seed_trace).map_err(|e| TestCaseError::fail(e.to_string()))?, item);
    }

    let again = generate(&bank, conditions, *seed, *ipc).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(again, items);
    Ok(())
}
