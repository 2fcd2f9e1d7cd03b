use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clozeprobe_cli::{EXIT_BACKEND_UNAVAILABLE, EXIT_RUNTIME, EXIT_VALIDATION};

/// Items in the default run, counted from the bank's set sizes outside
/// this code base.
const DEFAULT_ITEMS: usize = 7200;

fn clozeprobe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clozeprobe"))
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = clozeprobe(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn run_equals_stage_composition() {
    let tmp = tempfile::tempdir().unwrap();
    let (run, staged) = (tmp.path().join("run"), tmp.path().join("staged"));
    let flags = ["--seed", "4", "--items-per-cell", "3"];
    ok(&[&["run"][..], &flags].concat(), &run);
    ok(&[&["generate"][..], &flags].concat(), &staged);
    for stage in ["score", "evaluate", "report"] {
        ok(&[stage], &staged);
    }
    let (a, b) = (tree(&run), tree(&staged));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (path, bytes) in &a {
        assert!(&b[path] == bytes, "{} differs", path.display());
    }
    for dir in ["tables", "plots"] {
        assert!(a.keys().any(|p| p.starts_with(dir)), "no {dir}");
    }
}

#[test]
fn default_run_layout_and_size() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let stdout = ok(&["run"], &out);
    assert_eq!(lines(&out.join("items.jsonl")), DEFAULT_ITEMS);
    assert_eq!(lines(&out.join("metrics.jsonl")), 3 * DEFAULT_ITEMS);
    assert!(stdout.contains("base competence mock:oracle: 22/22"), "{stdout}");
    assert!(stdout.contains("base competence mock:uniform: 0/22"), "{stdout}");

    let csv = std::fs::read_to_string(out.join("tables/accuracy_related_multi_after_fact.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("model,n_attractors,value,count"));
    let oracle: Vec<&str> = rows.filter(|r| r.starts_with("mock:oracle,")).collect();
    let ns: Vec<&str> = oracle.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, ["0", "1", "2", "3"]);
    assert!(oracle.iter().all(|r| r.split(',').nth(2) == Some("1")));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nitems_per_cel = 3\n").unwrap();
    let o = clozeprobe(&["run", "--config", cfg.to_str().unwrap()], &tmp.path().join("x"));
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(String::from_utf8_lossy(&o.stderr).contains("items_per_cel"));
    assert!(!tmp.path().join("x").exists(), "no work before validation");
}

#[test]
fn validation_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(
        &cfg,
        "itembank = \"missing.json\"\n[[conditions]]\nkinds = [\"b_type\"]\nn_attractors = [5]\nentity_settings = [\"multi\"]\n[metrics]\ngroup_by = [\"colour\"]\n",
    )
    .unwrap();
    let o = clozeprobe(&["generate", "--config", cfg.to_str().unwrap(), "--workers", "0"], &tmp.path().join("x"));
    assert_eq!(code(&o), EXIT_VALIDATION);
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["missing.json", "workers", "colour"] {
        assert!(err.contains(needle), "{needle} not reported in {err}");
    }
}

#[test]
fn usage_errors_are_validation_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let o = clozeprobe(&["run", "--scorer", "mock:nonsense"], tmp.path());
    assert_eq!(code(&o), EXIT_VALIDATION);
    let o = clozeprobe(&["run", "--manifest", "m.json", "--seed", "3"], tmp.path());
    assert_eq!(code(&o), EXIT_VALIDATION);
}

#[test]
fn missing_checkpoint_is_backend_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = Command::new(env!("CARGO_BIN_EXE_clozeprobe"))
        .env("HF_HUB_CACHE", tmp.path().join("empty-cache"))
        .args(["run", "--items-per-cell", "1", "--scorer", "causal:no-such-org/no-such-model", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), EXIT_BACKEND_UNAVAILABLE, "{}", String::from_utf8_lossy(&o.stderr));
    // The generate stage's outputs survive the failed score stage.
    assert!(out.join("items.jsonl").exists());
    assert!(!out.join("scores.jsonl").exists());
}

#[test]
fn later_stages_need_their_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    assert_eq!(code(&clozeprobe(&["score"], &out)), EXIT_VALIDATION);
    ok(&["generate", "--items-per-cell", "1"], &out);
    assert_eq!(code(&clozeprobe(&["evaluate"], &out)), EXIT_RUNTIME);
}

#[test]
fn stage_refuses_a_different_generation_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    ok(&["generate", "--seed", "1", "--items-per-cell", "1"], &out);
    let o = clozeprobe(&["score", "--seed", "2"], &out);
    assert_eq!(code(&o), EXIT_VALIDATION);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed 2"));
}

#[test]
fn scorer_flag_at_score_time_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    ok(&["generate", "--items-per-cell", "1"], &out);
    ok(&["score", "--scorer", "mock:recency"], &out);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"recency\""));
    assert!(!manifest.contains("\"oracle\""));
    ok(&["evaluate"], &out);
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert!(metrics.lines().all(|l| l.contains("\"scorer\":\"mock:recency\"")));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 9\nitems_per_cell = 1\n").unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["generate", "--config", cfg.to_str().unwrap(), "--seed", "3"], &a);
    ok(&["generate", "--seed", "3", "--items-per-cell", "1"], &b);
    let ma = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(ma.contains("\"seed\": 3"), "{ma}");
    assert_eq!(std::fs::read(a.join("items.jsonl")).unwrap(), std::fs::read(b.join("items.jsonl")).unwrap());
}
