//! The four pipeline stages and their composition.
//!
//! Every stage reads its inputs from the run directory and writes its
//! outputs atomically, so a failed stage never clobbers earlier results.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use clozeprobe_core::generator::base_key;
use clozeprobe_core::metrics::GroupKey;
use clozeprobe_core::report::{
    self, aggregates_table, base_competence_table, build_tables, emit_plots, emit_tables, read_jsonl,
    write_atomic, write_jsonl, BASE_COMPETENCE_FILE, ITEMS_FILE, MANIFEST_FILE, METRICS_FILE, PLOTS_DIR,
    SCORES_FILE, TABLES_DIR,
};
use clozeprobe_core::scoring::{cue_map, score_context, CueMap};
use clozeprobe_core::{
    base_competence, evaluate_item, generate, BaseCompetenceRow, ItemBank, MetricError, MetricRecord, MockScorer,
    ProbeItem, RunManifest, ScoredItem, Scorer, ScorerFamily, ScorerSpec,
};

use crate::config::{RunConfig, ValidationError};

pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const BASE_COMPETENCE_CSV: &str = "base_competence.csv";

/// File locations inside a run directory.
#[derive(Debug, Clone)]
pub struct RunDir(pub PathBuf);

impl RunDir {
    pub fn manifest(&self) -> PathBuf {
        self.0.join(MANIFEST_FILE)
    }
    pub fn items(&self) -> PathBuf {
        self.0.join(ITEMS_FILE)
    }
    pub fn scores(&self) -> PathBuf {
        self.0.join(SCORES_FILE)
    }
    pub fn metrics(&self) -> PathBuf {
        self.0.join(METRICS_FILE)
    }
    pub fn base_competence(&self) -> PathBuf {
        self.0.join(BASE_COMPETENCE_FILE)
    }
    pub fn tables(&self) -> PathBuf {
        self.0.join(TABLES_DIR)
    }
    pub fn plots(&self) -> PathBuf {
        self.0.join(PLOTS_DIR)
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().context("building worker pool")
}

fn mkdir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Configuration for a stage that runs on an existing run directory.
///
/// Uses `config` when given, otherwise the configuration recorded in the
/// directory's manifest. If the resolved configuration would generate
/// different items the stage is refused; other changes (scorers, metric
/// options) are written back to the manifest.
pub fn resolve_for_stage(
    dir: &RunDir,
    config: Option<RunConfig>,
    apply: impl FnOnce(&mut RunConfig),
) -> Result<(RunConfig, ItemBank)> {
    let path = dir.manifest();
    if !path.exists() {
        return Err(ValidationError(vec![format!(
            "{} not found; run `generate` for this directory first",
            path.display()
        )])
        .into());
    }
    let manifest = RunManifest::read(&path)?;
    let recorded = RunConfig::from_snapshot(&manifest.config)?;
    let mut cfg = config.unwrap_or_else(|| recorded.clone());
    apply(&mut cfg);
    cfg.out = Some(dir.0.clone());
    let bank = cfg.validate()?;
    let mut problems = Vec::new();
    if bank.checksum() != manifest.bank_checksum {
        problems.push(format!(
            "item bank checksum {} differs from the manifest's {}",
            bank.checksum(),
            manifest.bank_checksum
        ));
    }
    if cfg.seed != recorded.seed {
        problems.push(format!("seed {} differs from the manifest's {}", cfg.seed, recorded.seed));
    }
    if cfg.items_per_cell != recorded.items_per_cell {
        problems.push(format!(
            "items_per_cell {} differs from the manifest's {}",
            cfg.items_per_cell, recorded.items_per_cell
        ));
    }
    if cfg.conditions() != recorded.conditions() {
        problems.push("condition space differs from the manifest's".into());
    }
    if !problems.is_empty() {
        problems.push(format!("regenerate items for {} first", dir.0.display()));
        return Err(ValidationError(problems).into());
    }
    if cfg.snapshot() != manifest.config {
        let mut updated = RunManifest::new(cfg.snapshot(), manifest.bank_checksum.clone(), cfg.seed, cfg.scorers.clone());
        updated.created_unix = manifest.created_unix;
        updated.write(&path)?;
    }
    Ok((cfg, bank))
}

pub struct GenerateSummary {
    pub run_id: String,
    pub items: usize,
    pub conditions: usize,
}

/// Writes the manifest and the items file. `created_unix` pins the
/// manifest timestamp (used when reproducing a recorded run).
pub fn cmd_generate(cfg: &RunConfig, bank: &ItemBank, created_unix: Option<u64>) -> Result<GenerateSummary> {
    let dir = RunDir(cfg.out_dir());
    let conditions = cfg.conditions();
    let items = pool(cfg.workers)?.install(|| generate(bank, &conditions, cfg.seed, cfg.items_per_cell))?;
    let mut manifest = RunManifest::new(cfg.snapshot(), bank.checksum(), cfg.seed, cfg.scorers.clone());
    if let Some(t) = created_unix {
        manifest.created_unix = t;
    }
    mkdir(&dir.0)?;
    write_jsonl(&dir.items(), &items)?;
    manifest.write(&dir.manifest())?;
    Ok(GenerateSummary {
        run_id: manifest.run_id,
        items: items.len(),
        conditions: conditions.len(),
    })
}

/// A context to score: either a probe item or a plain base context.
struct Job {
    id: String,
    set_id: String,
    context: String,
    answer: String,
}

fn base_jobs(bank: &ItemBank, items: &[ProbeItem]) -> Result<Vec<Job>> {
    let mut bases: BTreeMap<String, Job> = BTreeMap::new();
    for b in bank.base_items() {
        let id = base_key(&b.set_id, &b.background_word, &b.entity);
        bases.insert(id.clone(), Job { id, set_id: b.set_id, context: b.context, answer: b.target_word });
    }
    for item in items {
        let id = item.base_key();
        if bases.contains_key(&id) {
            continue;
        }
        let set = bank
            .set(&item.set_id)
            .ok_or_else(|| anyhow!("item {} refers to unknown set {:?}", item.item_id, item.set_id))?;
        let pair_index = set
            .pairs
            .iter()
            .position(|p| p.background == item.background_word)
            .ok_or_else(|| anyhow!("item {}: no pair with background {:?}", item.item_id, item.background_word))?;
        let context = bank
            .render_base(&item.set_id, pair_index, &item.key_entity)
            .ok_or_else(|| anyhow!("item {}: cannot render base context", item.item_id))?;
        bases.insert(
            id.clone(),
            Job { id, set_id: item.set_id.clone(), context, answer: item.target_word.clone() },
        );
    }
    Ok(bases.into_values().collect())
}

fn score_job(scorer: &mut dyn Scorer, job: &Job, candidates: &[String], cues: &CueMap) -> Result<ScoredItem> {
    score_context(scorer, &job.id, &job.context, candidates, &job.answer, cues)
        .with_context(|| format!("scoring {} with {}", job.id, scorer.spec().id()))
}

fn run_scorer(
    spec: &ScorerSpec,
    scorer: Option<Box<dyn Scorer + Send>>,
    jobs: &[Job],
    sets: &HashMap<String, (Vec<String>, CueMap)>,
) -> Result<Vec<ScoredItem>> {
    let inputs = |job: &Job| -> (&[String], &CueMap) {
        let (c, m) = &sets[&job.set_id];
        (c.as_slice(), m)
    };
    match scorer {
        None => jobs
            .par_iter()
            .map_init(
                || MockScorer::new(spec.clone()).expect("validated mock spec"),
                |s, job| {
                    let (c, m) = inputs(job);
                    score_job(s, job, c, m)
                },
            )
            .collect(),
        Some(mut s) => jobs
            .iter()
            .map(|job| {
                let (c, m) = inputs(job);
                score_job(s.as_mut(), job, c, m)
            })
            .collect(),
    }
}

pub struct ScoreSummary {
    pub scorers: usize,
    pub records: usize,
}

/// Scores every item and every base context under each configured scorer.
/// Backends are opened before any scoring so that a missing checkpoint
/// fails fast.
pub fn cmd_score(cfg: &RunConfig, bank: &ItemBank) -> Result<ScoreSummary> {
    let dir = RunDir(cfg.out_dir());
    let items: Vec<ProbeItem> = read_jsonl(&dir.items())?;
    let mut jobs = base_jobs(bank, &items)?;
    jobs.extend(items.iter().map(|i| Job {
        id: i.item_id.clone(),
        set_id: i.set_id.clone(),
        context: i.context.clone(),
        answer: i.target_word.clone(),
    }));
    let sets: HashMap<String, (Vec<String>, CueMap)> = bank
        .sets
        .iter()
        .map(|s| (s.id.clone(), (s.targets().map(String::from).collect(), cue_map(bank, &s.id))))
        .collect();

    let pool = pool(cfg.workers)?;
    let scored = pool.install(|| -> Result<Vec<Vec<ScoredItem>>> {
        let backends = cfg
            .scorers
            .par_iter()
            .map(|spec| match spec.family {
                ScorerFamily::Mock => Ok(None),
                _ => clozeprobe_lm::open_scorer(spec)
                    .map(Some)
                    .with_context(|| format!("opening scorer {}", spec.id())),
            })
            .collect::<Result<Vec<_>>>()?;
        cfg.scorers
            .par_iter()
            .zip(backends)
            .map(|(spec, backend)| run_scorer(spec, backend, &jobs, &sets))
            .collect()
    })?;
    let records: Vec<ScoredItem> = scored.into_iter().flatten().collect();
    write_jsonl(&dir.scores(), &records)?;
    Ok(ScoreSummary {
        scorers: cfg.scorers.len(),
        records: records.len(),
    })
}

pub struct EvaluateSummary {
    pub records: usize,
    /// `(scorer, correct, total)` over the published base items.
    pub base_competence: Vec<(String, usize, usize)>,
}

pub fn competence_totals(rows: &[BaseCompetenceRow]) -> Vec<(String, usize, usize)> {
    let mut out: Vec<(String, usize, usize)> = Vec::new();
    for r in rows {
        if out.last().map(|(s, _, _)| s != &r.scorer).unwrap_or(true) {
            out.push((r.scorer.clone(), 0, 0));
        }
        let last = out.last_mut().expect("pushed above");
        last.1 += usize::from(r.correct);
        last.2 += 1;
    }
    out
}

pub fn cmd_evaluate(cfg: &RunConfig, bank: &ItemBank) -> Result<EvaluateSummary> {
    let dir = RunDir(cfg.out_dir());
    let items: Vec<ProbeItem> = read_jsonl(&dir.items())?;
    let scores: Vec<ScoredItem> = read_jsonl(&dir.scores())?;
    let index: HashMap<(String, &str), &ScoredItem> =
        scores.iter().map(|s| ((s.scorer.id(), s.item_id.as_str()), s)).collect();
    let mut records: Vec<MetricRecord> = Vec::with_capacity(items.len() * cfg.scorers.len());
    for spec in &cfg.scorers {
        let id = spec.id();
        for item in &items {
            let scored = index
                .get(&(id.clone(), item.item_id.as_str()))
                .ok_or_else(|| anyhow!("{} has no score for {} under {id}", SCORES_FILE, item.item_id))?;
            let base_id = item.base_key();
            let base = index
                .get(&(id.clone(), base_id.as_str()))
                .ok_or_else(|| MetricError::MissingBase(item.item_id.clone()))?;
            records.push(evaluate_item(item, scored, base)?);
        }
    }
    let wanted: Vec<ScoredItem> = scores
        .iter()
        .filter(|s| cfg.scorers.contains(&s.scorer))
        .cloned()
        .collect();
    let rows = base_competence(bank, &wanted)?;
    write_jsonl(&dir.metrics(), &records)?;
    write_jsonl(&dir.base_competence(), &rows)?;
    Ok(EvaluateSummary {
        records: records.len(),
        base_competence: competence_totals(&rows),
    })
}

pub struct ReportSummary {
    pub tables: usize,
    pub plots: usize,
}

fn replace_dir(path: &Path) -> Result<()> {
    if path.exists() {
        std::fs::remove_dir_all(path).with_context(|| format!("removing {}", path.display()))?;
    }
    mkdir(path)
}

fn csv_file(path: PathBuf, text: Result<String, csv::Error>) -> Result<()> {
    let text = text.map_err(|source| report::ReportError::Csv { path: path.clone(), source })?;
    write_atomic(&path, text.as_bytes())?;
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig) -> Result<ReportSummary> {
    let dir = RunDir(cfg.out_dir());
    let records: Vec<MetricRecord> = read_jsonl(&dir.metrics())?;
    let rows: Vec<BaseCompetenceRow> = read_jsonl(&dir.base_competence())?;
    let keys: Vec<GroupKey> = cfg.group_by()?;
    let tables = build_tables(&records);

    let tables_dir = dir.tables();
    replace_dir(&tables_dir)?;
    let written = emit_tables(&tables_dir, &tables)?;
    csv_file(tables_dir.join(AGGREGATES_FILE), aggregates_table(&records, &keys))?;
    csv_file(tables_dir.join(BASE_COMPETENCE_CSV), base_competence_table(&rows))?;

    let plots_dir = dir.plots();
    replace_dir(&plots_dir)?;
    let plots = emit_plots(&plots_dir, &tables)?;
    Ok(ReportSummary {
        tables: written.len() + 2,
        plots: plots.len(),
    })
}

pub struct RunSummary {
    pub generate: GenerateSummary,
    pub score: ScoreSummary,
    pub evaluate: EvaluateSummary,
    pub report: ReportSummary,
}

pub fn cmd_run(cfg: &RunConfig, bank: &ItemBank, created_unix: Option<u64>) -> Result<RunSummary> {
    Ok(RunSummary {
        generate: cmd_generate(cfg, bank, created_unix)?,
        score: cmd_score(cfg, bank)?,
        evaluate: cmd_evaluate(cfg, bank)?,
        report: cmd_report(cfg)?,
    })
}

/// Configuration, bank and timestamp for reproducing a recorded run into
/// `out`.
pub fn from_manifest(path: &Path, out: PathBuf, workers: Option<usize>) -> Result<(RunConfig, ItemBank, u64)> {
    let manifest = RunManifest::read(path)?;
    let mut cfg = RunConfig::from_snapshot(&manifest.config)?;
    cfg.out = Some(out);
    cfg.workers = workers;
    let bank = cfg.validate()?;
    let mut problems = Vec::new();
    if bank.checksum() != manifest.bank_checksum {
        problems.push(format!(
            "item bank checksum {} differs from the manifest's {}",
            bank.checksum(),
            manifest.bank_checksum
        ));
    }
    if cfg.seed != manifest.seed || cfg.scorers != manifest.scorers {
        problems.push("manifest config disagrees with its seed or scorer fields".into());
    }
    if manifest.content_id() != manifest.run_id {
        problems.push(format!("manifest run_id {} does not match its contents", manifest.run_id));
    }
    if !problems.is_empty() {
        return Err(ValidationError(problems).into());
    }
    Ok((cfg, bank, manifest.created_unix))
}
