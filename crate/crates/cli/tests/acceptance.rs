//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Real-model criteria read checkpoints named by `CLOZEPROBE_MASKED_MODEL`
//! (default `bert-base-uncased`) and `CLOZEPROBE_CAUSAL_MODEL` (default
//! `gpt2`), either local directories or Hugging Face cache entries.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use clozeprobe_cli::pipeline::{self, RunDir};
use clozeprobe_cli::{ConditionGrid, RunConfig};
use clozeprobe_core::condition::{AttractorKind, Condition, EntitySetting, PositionVariant};
use clozeprobe_core::report::read_jsonl;
use clozeprobe_core::{
    accuracy, relative_probability, CandidateScore, ItemBank, ItemsPerCell, LogProb, MetricRecord, MockKind,
    ProbeItem, ScoredItem, ScorerFamily, ScorerOptions, ScorerSpec, Statistic,
};

/// Cases for the generator invariant sweep.
const GENERATOR_CASES: u32 = 100;
/// Cases for the accuracy invariance sweep.
const INVARIANCE_CASES: u32 = 1000;
/// Relative tolerance between the stored ratio and one recomputed from raw
/// log-probabilities.
const RELPROB_TOL: f64 = 1e-12;
const BASE_COMPETENCE_MIN: usize = 20;
const BASE_COMPETENCE_BUDGET: Duration = Duration::from_secs(10 * 60);
const QUALITATIVE_BUDGET: Duration = Duration::from_secs(2 * 60 * 60);
/// Minimum accuracy drop from zero to one related attractor.
const FIRST_ATTRACTOR_DROP: f64 = 0.15;
const QUALITATIVE_ITEMS_MIN: usize = 1500;
const QUALITATIVE_ITEMS_MAX: usize = 2500;

type Outcome = Result<String, String>;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    workspace().join("crates/lm/tests/fixtures").join(name).display().to_string()
}

fn env_model(var: &str, default: &str) -> String {
    std::env::var(var).unwrap_or_else(|_| default.to_string())
}

fn masked(model_id: &str) -> ScorerSpec {
    ScorerSpec {
        family: ScorerFamily::Masked,
        model_id: model_id.to_string(),
        options: ScorerOptions::default(),
    }
}

fn causal(model_id: &str) -> ScorerSpec {
    ScorerSpec {
        family: ScorerFamily::Causal,
        model_id: model_id.to_string(),
        options: ScorerOptions::default(),
    }
}

fn config(out: &Path, scorers: Vec<ScorerSpec>, conditions: Vec<ConditionGrid>, ipc: ItemsPerCell) -> RunConfig {
    RunConfig {
        out: Some(out.to_path_buf()),
        scorers,
        conditions,
        items_per_cell: ipc,
        ..RunConfig::default()
    }
}

fn run_pipeline(cfg: &RunConfig) -> Result<(Vec<ProbeItem>, Vec<MetricRecord>), String> {
    let bank = cfg.validate().map_err(|e| e.to_string())?;
    pipeline::cmd_run(cfg, &bank, None).map_err(|e| format!("{e:#}"))?;
    let dir = RunDir(cfg.out_dir());
    let items = read_jsonl(&dir.items()).map_err(|e| e.to_string())?;
    let records = read_jsonl(&dir.metrics()).map_err(|e| e.to_string())?;
    Ok((items, records))
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

// ---------------------------------------------------------------------------
// Mock suite

/// End offset of the last whole-word occurrence of `needle` in `hay`.
fn last_whole_word_end(hay: &str, needle: &str) -> Option<usize> {
    hay.match_indices(needle)
        .filter(|(i, _)| {
            let before = hay[..*i].chars().next_back();
            let after = hay[i + needle.len()..].chars().next();
            before.is_none_or(|c| !c.is_alphanumeric()) && after.is_none_or(|c| !c.is_alphanumeric())
        })
        .map(|(i, _)| i + needle.len())
        .max()
}

/// Brute-force recency prediction: 1 iff the target's cue (its paired
/// background word or the target itself) ends strictly closer to the blank
/// than every other candidate's.
fn distance_oracle(bank: &ItemBank, item: &ProbeItem) -> (u8, bool) {
    let blank = item.context.find("___").expect("item has a blank");
    let prefix = &item.context[..blank];
    let set = bank.set(&item.set_id).expect("known set");
    let distance = |target: &str| -> Option<usize> {
        let pair = set.pairs.iter().find(|p| p.target == target)?;
        [pair.background.as_str(), pair.target.as_str()]
            .into_iter()
            .filter_map(|cue| last_whole_word_end(prefix, cue))
            .map(|end| blank - end)
            .min()
    };
    let mine = distance(&item.target_word);
    let wins = mine.is_some_and(|d| {
        item.candidate_targets
            .iter()
            .filter(|c| **c != item.target_word)
            .all(|c| distance(c).is_none_or(|o| d < o))
    });
    // Whether the key fact itself is the nearest cue of any kind.
    let key_end = last_whole_word_end(prefix, &item.background_word);
    let nearest_overall = set
        .pairs
        .iter()
        .flat_map(|p| [p.background.as_str(), p.target.as_str()])
        .filter_map(|cue| last_whole_word_end(prefix, cue))
        .max();
    (u8::from(wins), key_end.is_some() && key_end == nearest_overall)
}

type CellKey = (AttractorKind, usize, EntitySetting, PositionVariant, usize);

fn cell(c: &Condition) -> CellKey {
    (c.attractor_kind, c.n_attractors, c.entity_setting, c.position_variant, c.n_fillers)
}

fn mock_suite() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.out = Some(tmp.path().join("mock"));
    cfg.conditions.push(ConditionGrid {
        kinds: AttractorKind::ALL.to_vec(),
        n_attractors: vec![0, 1, 2],
        entity_settings: vec![EntitySetting::Multi],
        position_variants: vec![PositionVariant::AfterFact],
        n_fillers: vec![1, 2],
    });
    let (items, records) = run_pipeline(&cfg)?;
    let bank = ItemBank::bundled();
    let by_id: HashMap<&str, &ProbeItem> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();

    let mut cells: BTreeMap<(String, CellKey), Vec<f64>> = BTreeMap::new();
    let mut problems = Vec::new();
    let mut late_nearest = 0usize;
    for r in &records {
        let item = by_id[r.item_id.as_str()];
        cells.entry((r.scorer.clone(), cell(&item.condition))).or_default().push(r.accuracy as f64);
        if r.scorer == "mock:recency" {
            let (predicted, key_nearest) = distance_oracle(&bank, item);
            if predicted != r.accuracy {
                problems.push(format!("{}: recency {} but distance oracle {}", r.item_id, r.accuracy, predicted));
            }
            let c = item.condition;
            if c.position_variant == PositionVariant::LateEntity && key_nearest {
                late_nearest += 1;
                if r.accuracy != 1 {
                    problems.push(format!("{}: key fact nearest but recency failed", r.item_id));
                }
            }
        }
    }
    let mut checked = 0;
    for ((scorer, key), accs) in &cells {
        let (kind, n, _, variant, _) = *key;
        let value = mean(accs.iter().copied()).unwrap_or(f64::NAN);
        let want = match scorer.as_str() {
            "mock:oracle" => Some(1.0),
            "mock:uniform" => Some(0.0),
            "mock:recency" if n == 0 => Some(1.0),
            "mock:recency" if variant == PositionVariant::AfterFact && kind.is_related() => Some(0.0),
            _ => None,
        };
        if let Some(want) = want {
            checked += 1;
            if value != want {
                problems.push(format!("{scorer} {key:?}: accuracy {value}, expected {want}"));
            }
        }
    }
    let late_items = items.iter().filter(|i| i.condition.position_variant == PositionVariant::LateEntity).count();
    if late_nearest != late_items {
        problems.push(format!("key fact nearest in only {late_nearest} of {late_items} late-entity items"));
    }
    if problems.is_empty() {
        Ok(format!(
            "{} items, {checked} cells with exact expectations, {} recency items match the distance oracle, {late_nearest} late-entity items at 1.0",
            items.len(),
            items.len()
        ))
    } else {
        Err(summarize(problems))
    }
}

fn summarize(problems: Vec<String>) -> String {
    let n = problems.len();
    let mut s = problems.into_iter().take(5).collect::<Vec<_>>().join("; ");
    if n > 5 {
        s.push_str(&format!(" (+{} more)", n - 5));
    }
    s
}

// ---------------------------------------------------------------------------
// Generator suite

fn binary() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_clozeprobe"));
    c.env("SOURCE_DATE_EPOCH", "1700000000");
    c
}

fn run_binary(args: &[&str]) -> Result<(), String> {
    let out = binary().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("clozeprobe {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn generator_suite() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let items_per_cell = "exhaustive";
    run_binary(&["generate", "--seed", "11", "--items-per-cell", items_per_cell, "--out", a.to_str().unwrap()])?;
    run_binary(&[
        "generate", "--seed", "11", "--items-per-cell", items_per_cell, "--workers", "1", "--out", b.to_str().unwrap(),
    ])?;
    let first = std::fs::read(a.join("items.jsonl")).map_err(|e| e.to_string())?;
    let second = std::fs::read(b.join("items.jsonl")).map_err(|e| e.to_string())?;
    if first != second || first.is_empty() {
        return Err("two processes with the same seed produced different item streams".into());
    }
    let streamed = first.iter().filter(|&&c| c == b'\n').count();

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: GENERATOR_CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&support::invariants::config_strategy(), |config| support::invariants::check_config(&config))
        .map_err(|e| format!("generator invariants: {e}"))?;

    let bank = ItemBank::bundled();
    let mut rows = Vec::new();
    rows.extend(support::golden::example_items());
    rows.extend(support::golden::unrelated_attractors());
    rows.extend(support::golden::between_attractors());
    rows.extend(support::golden::late_entity());
    for row in &rows {
        support::golden::check_row(&bank, row)?;
    }
    support::golden::check_base_contexts(&bank)?;
    Ok(format!(
        "{streamed} items identical across two processes, {GENERATOR_CASES} random configs hold every invariant, {} golden rows byte-equal",
        rows.len() + support::golden::BASE_CONTEXTS.len()
    ))
}

// ---------------------------------------------------------------------------
// Metric suite

fn score_index(path: &Path) -> Result<HashMap<(String, String), ScoredItem>, String> {
    let scores: Vec<ScoredItem> = read_jsonl(path).map_err(|e| e.to_string())?;
    Ok(scores.into_iter().map(|s| ((s.scorer.id(), s.item_id.clone()), s)).collect())
}

fn relprob_checks(records: &[MetricRecord], items: &[ProbeItem], scores: &Path) -> Result<(usize, usize), String> {
    let index = score_index(scores)?;
    let by_id: HashMap<&str, &ProbeItem> = items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let (mut zero_plain, mut zero_filler_off) = (0, 0);
    for r in records {
        if r.relative_prob != relative_probability(r.target_prob_attr, r.target_prob_base) {
            return Err(format!("{}: stored ratio disagrees with p_attr / p_base", r.item_id));
        }
        let item = by_id[r.item_id.as_str()];
        let lp = |id: &str| -> Result<f64, String> {
            let s = index.get(&(r.scorer.clone(), id.to_string())).ok_or(format!("no score for {id}"))?;
            Ok(s.score_of(&item.target_word).ok_or("target unscored")?.log_prob.value())
        };
        let independent = (lp(&r.item_id)? - lp(&item.base_key())?).exp();
        if let Some(ratio) = r.relative_prob {
            if ((ratio - independent) / independent).abs() > RELPROB_TOL {
                return Err(format!("{}: ratio {ratio} vs exp(difference) {independent}", r.item_id));
            }
        }
        if r.n_attractors == 0 {
            match (r.n_fillers, r.relative_prob) {
                (0, Some(v)) if v != 1.0 => return Err(format!("{}: plain zero-attractor ratio {v}", r.item_id)),
                (0, _) => zero_plain += 1,
                (_, Some(v)) if v != 1.0 => zero_filler_off += 1,
                _ => {}
            }
        }
    }
    Ok((zero_plain, zero_filler_off))
}

fn invariance_case() -> impl Strategy<Value = (Vec<f64>, usize, usize, f64, f64)> {
    (2usize..8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![9 => (-160i32..=0).prop_map(|q| q as f64 * 0.25), 1 => Just(f64::NEG_INFINITY)], n),
                0..n,
                0usize..4,
                0.05f64..20.0,
                0.0f64..10.0,
            )
        })
}

fn transform(kind: usize, a: f64, b: f64, x: f64) -> f64 {
    match kind {
        0 => a * x - b,
        1 => -(-x).powf(a.min(4.0)),
        2 => x - b,
        _ => -(1.0 - x).ln(),
    }
}

fn scored(values: &[f64]) -> ScoredItem {
    ScoredItem {
        item_id: "case".into(),
        context: "x ___".into(),
        scores: values
            .iter()
            .enumerate()
            .map(|(i, v)| CandidateScore::new(format!("c{i}"), LogProb::new(*v), 1))
            .collect(),
        scorer: ScorerSpec::mock(MockKind::Uniform),
    }
}

fn metric_suite() -> Outcome {
    for (a, b) in [(0.5, 0.25), (1e-9, 3e-7), (0.0, 0.4), (0.2, 0.2)] {
        if relative_probability(a, b) != Some(a / b) {
            return Err(format!("relative_probability({a}, {b}) is not the plain ratio"));
        }
    }
    if relative_probability(0.3, 0.0).is_some() {
        return Err("zero base probability must leave the ratio undefined".into());
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = config(
        &tmp.path().join("fillers"),
        vec![causal(&fixture("tiny-gpt2")), masked(&fixture("tiny-bert"))],
        vec![ConditionGrid {
            kinds: vec![AttractorKind::BType, AttractorKind::Unrelated],
            n_attractors: vec![0, 1],
            entity_settings: vec![EntitySetting::Multi, EntitySetting::Single],
            position_variants: vec![PositionVariant::AfterFact, PositionVariant::Between],
            n_fillers: vec![0, 1, 2],
        }],
        ItemsPerCell::Count(2),
    );
    let (items, records) = run_pipeline(&cfg)?;
    let (zero_plain, zero_filler_off) = relprob_checks(&records, &items, &RunDir(cfg.out_dir()).scores())?;
    if zero_filler_off == 0 {
        return Err("every zero-attractor ratio with filler material is exactly 1".into());
    }

    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: INVARIANCE_CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    runner
        .run(&invariance_case(), |(values, target, kind, a, b)| {
            let moved: Vec<f64> = values.iter().map(|&x| transform(kind, a, b, x)).collect();
            let target_name = format!("c{target}");
            let direct = u8::from(
                values[target] > f64::NEG_INFINITY
                    && values.iter().enumerate().all(|(i, v)| i == target || values[target] > *v),
            );
            let before = accuracy(&scored(&values), &target_name).unwrap();
            let after = accuracy(&scored(&moved), &target_name).unwrap();
            prop_assert_eq!(before, direct);
            prop_assert_eq!(after, direct);
            Ok(())
        })
        .map_err(|e| format!("accuracy invariance: {e}"))?;

    Ok(format!(
        "ratio identity on {} model records, {zero_plain} plain zero-attractor ratios are exactly 1, {zero_filler_off} with fillers are not, {INVARIANCE_CASES} invariance cases",
        records.len()
    ))
}

// ---------------------------------------------------------------------------
// Real checkpoints

fn model_specs() -> Vec<ScorerSpec> {
    vec![
        masked(&env_model("CLOZEPROBE_MASKED_MODEL", "bert-base-uncased")),
        causal(&env_model("CLOZEPROBE_CAUSAL_MODEL", "gpt2")),
    ]
}

fn base_competence() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = config(
        &tmp.path().join("base"),
        model_specs(),
        vec![ConditionGrid {
            kinds: vec![AttractorKind::BType],
            n_attractors: vec![0],
            entity_settings: vec![EntitySetting::Single],
            position_variants: vec![PositionVariant::AfterFact],
            n_fillers: vec![0],
        }],
        ItemsPerCell::Count(1),
    );
    let started = Instant::now();
    run_pipeline(&cfg)?;
    let elapsed = started.elapsed();
    let rows: Vec<clozeprobe_core::BaseCompetenceRow> =
        read_jsonl(&RunDir(cfg.out_dir()).base_competence()).map_err(|e| e.to_string())?;
    let totals = pipeline::competence_totals(&rows);
    let mut ok = elapsed <= BASE_COMPETENCE_BUDGET && totals.len() == cfg.scorers.len();
    let mut parts = Vec::new();
    for (scorer, correct, total) in &totals {
        ok &= *correct >= BASE_COMPETENCE_MIN;
        let misses: Vec<String> = rows
            .iter()
            .filter(|r| &r.scorer == scorer && r.correct == 0)
            .map(|r| format!("{}->{}", r.target_word, r.predicted))
            .collect();
        parts.push(format!("{scorer} {correct}/{total} [{}]", misses.join(", ")));
    }
    parts.push(format!("{:.0?}", elapsed));
    let detail = parts.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Cells<'a>(&'a [MetricRecord]);

impl Cells<'_> {
    fn select(&self, scorer: &str, f: impl Fn(&MetricRecord) -> bool) -> Vec<&MetricRecord> {
        self.0.iter().filter(|r| r.scorer == scorer && f(r)).collect()
    }

    fn accuracy(&self, scorer: &str, f: impl Fn(&MetricRecord) -> bool) -> f64 {
        mean(self.select(scorer, f).iter().map(|r| r.accuracy as f64)).unwrap_or(f64::NAN)
    }

    fn median_relprob(&self, scorer: &str, f: impl Fn(&MetricRecord) -> bool) -> f64 {
        let v: Vec<f64> = self.select(scorer, f).iter().filter_map(|r| r.relative_prob).collect();
        Statistic::Median.apply(&v).unwrap_or(f64::NAN)
    }
}

fn qualitative() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&workspace().join("configs/desk.toml")).map_err(|e| e.to_string())?;
    cfg.scorers = model_specs();
    cfg.out = Some(tmp.path().join("desk"));
    let started = Instant::now();
    let (items, records) = run_pipeline(&cfg)?;
    let elapsed = started.elapsed();
    let mut failures = Vec::new();
    if !(QUALITATIVE_ITEMS_MIN..=QUALITATIVE_ITEMS_MAX).contains(&items.len()) {
        failures.push(format!("{} items per model", items.len()));
    }
    if elapsed > QUALITATIVE_BUDGET {
        failures.push(format!("took {elapsed:?}"));
    }
    let cells = Cells(&records);
    let af = |r: &MetricRecord| r.position_variant == PositionVariant::AfterFact && r.n_fillers == 0;
    let related = |r: &MetricRecord| r.attractor_kind.is_related();
    let mut notes = Vec::new();
    for spec in &cfg.scorers {
        let s = spec.id();
        let acc0 = cells.accuracy(&s, |r| af(r) && related(r) && r.n_attractors == 0);
        let acc1 = cells.accuracy(&s, |r| af(r) && related(r) && r.n_attractors == 1);
        if !(acc0 - acc1 >= FIRST_ATTRACTOR_DROP) {
            failures.push(format!("(a) {s}: zero-attractor {acc0:.3}, one related {acc1:.3}"));
        }
        for n in 1..=3 {
            let rel = cells.accuracy(&s, |r| af(r) && related(r) && r.n_attractors == n);
            let unrel = cells.accuracy(&s, |r| af(r) && !related(r) && r.n_attractors == n);
            if !(unrel > rel) {
                failures.push(format!("(b) {s} n={n}: unrelated {unrel:.3} vs related {rel:.3}"));
            }
        }
        let m_rel = cells.median_relprob(&s, |r| af(r) && related(r) && r.n_attractors == 1);
        let m_unrel = cells.median_relprob(&s, |r| af(r) && !related(r) && r.n_attractors == 1);
        if !(m_rel < m_unrel) {
            failures.push(format!("(c) {s}: median ratio related {m_rel:.3e} vs unrelated {m_unrel:.3e}"));
        }
        notes.push(format!("{s} drop {:.3}", acc0 - acc1));
        if spec.family == ScorerFamily::Masked {
            let multi = |r: &MetricRecord| r.entity_setting == EntitySetting::Multi && related(r) && r.n_fillers == 0;
            let base = cells.accuracy(&s, |r| multi(r) && af(r) && r.n_attractors == 0);
            let default_drop = base - cells.accuracy(&s, |r| multi(r) && af(r) && r.n_attractors == 1);
            let late_drop = base
                - cells.accuracy(&s, |r| {
                    multi(r) && r.position_variant == PositionVariant::LateEntity && r.n_attractors == 1
                });
            if !(late_drop < default_drop) {
                failures.push(format!("(d) {s}: late drop {late_drop:.3} vs default drop {default_drop:.3}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{} items per model, {}; {elapsed:.0?}", items.len(), notes.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

// ---------------------------------------------------------------------------
// Reproducibility

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| format!("{}: {e}", dir.display()))? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn compare_trees(a: &Path, b: &Path) -> Result<usize, String> {
    let (ta, tb) = (tree(a)?, tree(b)?);
    if ta.keys().ne(tb.keys()) {
        return Err(format!("{} and {} hold different files", a.display(), b.display()));
    }
    for (path, bytes) in &ta {
        if &tb[path] != bytes {
            return Err(format!("{} differs", path.display()));
        }
    }
    Ok(ta.len())
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let default_toml = workspace().join("configs/default.toml");
    let runs: [(&str, Vec<String>); 2] = [
        ("default", vec!["--config".into(), default_toml.display().to_string()]),
        (
            "flags",
            ["--seed", "5", "--items-per-cell", "3", "--scorer", "mock:recency", "--scorer", "mock:oracle"]
                .map(String::from)
                .to_vec(),
        ),
    ];
    let mut files = 0;
    for (name, args) in runs {
        let original = tmp.path().join(name);
        let replay = tmp.path().join(format!("{name}-replay"));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_clozeprobe"));
        cmd.env_remove("SOURCE_DATE_EPOCH").arg("run").args(&args).arg("--out").arg(&original);
        let out = cmd.output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("run {name}: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
        let manifest = original.join("manifest.json");
        let out = Command::new(env!("CARGO_BIN_EXE_clozeprobe"))
            .env_remove("SOURCE_DATE_EPOCH")
            .args(["run", "--workers", "1", "--manifest"])
            .arg(&manifest)
            .arg("--out")
            .arg(&replay)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("replay {name}: {}", String::from_utf8_lossy(&out.stderr).trim()));
        }
        files += compare_trees(&original, &replay)?;
    }
    Ok(format!("two manifests replayed, {files} files byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("mock suite", mock_suite),
        ("generator suite", generator_suite),
        ("metric suite", metric_suite),
        ("base competence", base_competence),
        ("qualitative reproduction", qualitative),
        ("end-to-end reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {name}: {detail} ({:.1?})", started.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
