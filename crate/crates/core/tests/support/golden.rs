//! Published example items, shared by the golden tests and the acceptance
//! gate.

use clozeprobe_core::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use clozeprobe_core::render::{render_context, RenderParts};
use clozeprobe_core::{check_item, ItemBank, ProbeItem};

use AttractorKind::{BType, TType, Unrelated};
use EntitySetting::{Multi, Single};
use PositionVariant::{AfterFact, Between, LateEntity};

#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub set: &'static str,
    pub background: &'static str,
    pub entity: &'static str,
    pub kind: AttractorKind,
    pub setting: EntitySetting,
    pub variant: PositionVariant,
    pub words: &'static [&'static str],
    pub entities: &'static [&'static str],
    pub fillers: &'static [&'static str],
    pub expected: &'static str,
    pub target: &'static str,
}

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Renders the row and checks it byte-for-byte, then checks the item
/// invariants on the result.
pub fn check_row(bank: &ItemBank, row: &Row) -> Result<(), String> {
    let set = bank.set(row.set).ok_or_else(|| format!("no set {}", row.set))?;
    let pair = set
        .pairs
        .iter()
        .find(|p| p.background == row.background)
        .ok_or_else(|| format!("no pair {}", row.background))?;
    if pair.target != row.target {
        return Err(format!("{}: target {} != {}", row.background, pair.target, row.target));
    }
    let condition = Condition {
        attractor_kind: row.kind,
        n_attractors: row.words.len(),
        entity_setting: row.setting,
        position_variant: row.variant,
        n_fillers: row.fillers.len(),
    };
    let words = owned(row.words);
    let entities = owned(row.entities);
    let fillers = owned(row.fillers);
    let context = render_context(&RenderParts {
        template: bank.template(row.set).ok_or("no template")?,
        articles: &bank.articles,
        condition,
        key_entity: row.entity,
        background: row.background,
        attractor_words: &words,
        attractor_entities: &entities,
        fillers: &fillers,
    });
    if context != row.expected {
        return Err(format!("rendered {context:?}\n expected {:?}", row.expected));
    }
    let item = ProbeItem {
        item_id: "golden".into(),
        set_id: row.set.into(),
        condition,
        key_entity: row.entity.into(),
        background_word: row.background.into(),
        target_word: row.target.into(),
        attractor_words: words,
        attractor_entities: entities,
        filler_phrases: fillers,
        context,
        candidate_targets: set.targets().map(String::from).collect(),
        seed_trace: vec![],
    };
    check_item(bank, &item).map_err(|e| format!("{}: {e}", row.expected))
}

/// Base contexts and targets in bank order.
pub fn check_base_contexts(bank: &ItemBank) -> Result<(), String> {
    let got: Vec<(String, String)> = bank.base_items().into_iter().map(|b| (b.context, b.target_word)).collect();
    if got.len() != BASE_CONTEXTS.len() {
        return Err(format!("{} base items, expected {}", got.len(), BASE_CONTEXTS.len()));
    }
    for ((c, t), (wc, wt)) in got.iter().zip(BASE_CONTEXTS) {
        if c != wc || t != wt {
            return Err(format!("base item {c:?} -> {t:?}, expected {wc:?} -> {wt:?}"));
        }
    }
    Ok(())
}

const NONE: &[&str] = &[];

pub const BASE_CONTEXTS: [(&str, &str); 22] = [
    ("Sebastian lives in France. The capital of Sebastian's country is ___", "Paris"),
    ("Rowan lives in Chile. The capital of Rowan's country is ___", "Santiago"),
    ("Rowan lives in China. The capital of Rowan's country is ___", "Beijing"),
    ("Rowan lives in Finland. The capital of Rowan's country is ___", "Helsinki"),
    ("Rowan lives in Indonesia. The capital of Rowan's country is ___", "Jakarta"),
    ("Jake lives in Poland. The capital of Jake's country is ___", "Warsaw"),
    ("Jake works as a florist. For his job, Jake sells ___", "flowers"),
    ("Jake works as an optician. For his job, Jake sells ___", "glasses"),
    ("Jake works as a baker. For his job, Jake sells ___", "bread"),
    ("Daniel works as a butcher. For his job, Daniel sells ___", "meat"),
    ("Daniel works as a fisherman. For his job, Daniel sells ___", "fish"),
    ("Daniel works as a painter. For his job, Daniel sells ___", "paintings"),
    ("Daniel visited the Taj Mahal. The country Daniel traveled to was ___", "India"),
    ("Daniel visited the Pyramid of Giza. The country Daniel traveled to was ___", "Egypt"),
    ("Jack visited the Eiffel Tower. The country Jack traveled to was ___", "France"),
    ("Jack visited the Tower of Pisa. The country Jack traveled to was ___", "Italy"),
    ("Jack visited the Machu Picchu. The country Jack traveled to was ___", "Peru"),
    ("Jack visited the Kremlin. The country Jack traveled to was ___", "Russia"),
    ("Jack played football. In his game, Jack scored a ___", "touchdown"),
    ("Jack played baseball. In his game, Jack scored a ___", "run"),
    ("Daniel played soccer. In his game, Daniel scored a ___", "goal"),
    ("Sebastian played cricket. In his game, Sebastian scored a ___", "century"),
];

pub fn example_items() -> Vec<Row> {
    let mut rows = Vec::new();
    let base = Row {
        set: "countries",
        background: "France",
        entity: "Sebastian",
        kind: BType,
        setting: Multi,
        variant: AfterFact,
        words: NONE,
        entities: NONE,
        fillers: NONE,
        expected: "Sebastian lives in France. The capital of Sebastian's country is ___",
        target: "Paris",
    };
    rows.push(base);
    let variants = [
        (BType, Multi, &["Indonesia", "Chile"][..], &["Rowan", "Daniel"][..],
         "Sebastian lives in France, Rowan lives in Indonesia, and Daniel lives in Chile. The capital of Sebastian's country is ___"),
        (TType, Multi, &["Jakarta", "Santiago"], &["Rowan", "Daniel"],
         "Sebastian lives in France, Rowan lives in Jakarta, and Daniel lives in Santiago. The capital of Sebastian's country is ___"),
        (Unrelated, Multi, &["drives a car", "writes poetry"], &["Rowan", "Daniel"],
         "Sebastian lives in France, Rowan drives a car, and Daniel writes poetry. The capital of Sebastian's country is ___"),
        (BType, Single, &["Indonesia", "Chile"], NONE,
         "Sebastian lives in France, and has visited Indonesia and Chile. The capital of Sebastian's country is ___"),
        (TType, Single, &["Jakarta", "Santiago"], NONE,
         "Sebastian lives in France, and has visited Jakarta and Santiago. The capital of Sebastian's country is ___"),
        (Unrelated, Single, &["drives a car", "writes poetry"], NONE,
         "Sebastian lives in France, drives a car, and writes poetry. The capital of Sebastian's country is ___"),
    ];
    for (kind, setting, words, entities, expected) in variants {
        rows.push(Row { kind, setting, words, entities, expected, ..base });
    }
    rows
}

pub fn unrelated_attractors() -> Vec<Row> {
    let mut rows = Vec::new();
    let chile = Row {
        set: "countries",
        background: "Chile",
        entity: "John",
        kind: Unrelated,
        setting: Single,
        variant: AfterFact,
        words: NONE,
        entities: NONE,
        fillers: NONE,
        expected: "",
        target: "Santiago",
    };
    rows.push(Row {
        words: &["writes poetry"],
        expected: "John lives in Chile and writes poetry. The capital of John's country is ___",
        ..chile
    });
    rows.push(Row {
        words: &["writes poetry", "drives a car"],
        expected: "John lives in Chile, writes poetry, and drives a car. The capital of John's country is ___",
        ..chile
    });
    rows.push(Row {
        words: &["writes poetry", "drives a car", "slept late last week"],
        expected: "John lives in Chile, writes poetry, drives a car, and slept late last week. The capital of John's country is ___",
        ..chile
    });
    rows.push(Row {
        set: "professions",
        background: "florist",
        target: "flowers",
        setting: Multi,
        words: &["writes poetry"],
        entities: &["Jack"],
        expected: "John works as a florist and Jack writes poetry. For his job, John sells ___",
        ..chile
    });
    rows.push(Row {
        set: "monuments",
        background: "Eiffel Tower",
        target: "France",
        entity: "Jake",
        setting: Multi,
        words: &["drives a car", "sits by the lake"],
        entities: &["Rowan", "Jack"],
        expected: "Jake visited the Eiffel Tower, Rowan drives a car, and Jack sits by the lake. The country Jake traveled to was ___",
        ..chile
    });
    rows.push(Row {
        set: "sports",
        background: "football",
        target: "touchdown",
        entity: "Sebastian",
        words: &["writes poetry", "slept late last week", "sits by the lake"],
        expected: "Sebastian played football, writes poetry, slept late last week, and sits by the lake. In his game, Sebastian scored a ___",
        ..chile
    });
    rows
}

pub fn between_attractors() -> Vec<Row> {
    let mut rows = Vec::new();
    let row = Row {
        set: "countries",
        background: "Chile",
        entity: "Daniel",
        kind: TType,
        setting: Multi,
        variant: Between,
        words: &["Beijing"],
        entities: &["Jack"],
        fillers: NONE,
        expected: "Daniel knows that Jack lives in Beijing and he himself lives in Chile. The capital of Daniel's country is ___",
        target: "Santiago",
    };
    rows.push(row);
    rows.push(Row {
        set: "professions",
        background: "florist",
        target: "flowers",
        words: &["glasses", "meat"],
        entities: &["Jake", "Rowan"],
        expected: "Daniel knows that Jake likes to buy glasses and Rowan likes to buy meat and he himself works as a florist. For his job, Daniel sells ___",
        ..row
    });
    rows.push(Row {
        set: "monuments",
        background: "Taj Mahal",
        target: "India",
        entity: "Joe",
        kind: BType,
        setting: Single,
        words: &["Eiffel Tower", "Pyramid of Giza", "Machu Picchu"],
        entities: NONE,
        expected: "Joe wants to visit the Eiffel Tower, the Pyramid of Giza, and the Machu Picchu and has only visited the Taj Mahal. The country Joe traveled to was ___",
        ..row
    });
    rows.push(Row {
        set: "sports",
        background: "football",
        target: "touchdown",
        entity: "Rowan",
        setting: Single,
        words: &["goal", "century"],
        entities: NONE,
        expected: "Rowan knows that his friends scored a goal and a century and he himself played football. In his game, Rowan scored a ___",
        ..row
    });
    rows
}

pub fn late_entity() -> Vec<Row> {
    let mut rows = Vec::new();
    rows.push(Row {
        set: "countries",
        background: "Indonesia",
        entity: "Rowan",
        kind: BType,
        setting: Multi,
        variant: LateEntity,
        words: &["France"],
        entities: &["Sebastian"],
        fillers: NONE,
        expected: "Sebastian lives in France, and Rowan lives in Indonesia. The capital of Rowan's country is ___",
        target: "Jakarta",
    });
    rows
}
