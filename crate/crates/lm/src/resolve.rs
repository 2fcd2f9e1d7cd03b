//! Locates checkpoints on disk: either a directory path or an entry in the
//! local Hugging Face hub cache. Nothing is downloaded.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use crate::LmError;

pub const CONFIG_FILE: &str = "config.json";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
const WEIGHTS_FILE: &str = "model.safetensors";
const WEIGHTS_INDEX: &str = "model.safetensors.index.json";

/// Files making up one checkpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub tokenizer: PathBuf,
    pub weights: Vec<PathBuf>,
}

/// Candidate hub cache roots, in lookup order.
pub fn cache_roots() -> Vec<PathBuf> {
    let mut roots = Vec::new();
    if let Some(p) = env::var_os("HF_HUB_CACHE") {
        roots.push(PathBuf::from(p));
    }
    if let Some(p) = env::var_os("HF_HOME") {
        roots.push(PathBuf::from(p).join("hub"));
    }
    if let Some(home) = env::var_os("HOME") {
        roots.push(PathBuf::from(home).join(".cache/huggingface/hub"));
    }
    roots
}

/// Resolves `model_id` to a local checkpoint, trying it as a directory
/// first and then each cache root.
pub fn resolve(model_id: &str) -> Result<Checkpoint, LmError> {
    let direct = Path::new(model_id);
    if direct.is_dir() {
        return checkpoint_in(direct);
    }
    let roots = cache_roots();
    for root in &roots {
        if let Some(dir) = cached_snapshot(root, model_id) {
            return checkpoint_in(&dir);
        }
    }
    Err(LmError::Unavailable(format!(
        "model {model_id:?} is neither a local directory nor present in the hub cache (searched {})",
        roots.iter().map(|r| r.display().to_string()).collect::<Vec<_>>().join(", ")
    )))
}

/// `<root>/models--org--name/snapshots/<rev>`, preferring `refs/main`.
pub fn cached_snapshot(root: &Path, model_id: &str) -> Option<PathBuf> {
    let repo = root.join(format!("models--{}", model_id.replace('/', "--")));
    let snapshots = repo.join("snapshots");
    if let Ok(rev) = fs::read_to_string(repo.join("refs/main")) {
        let dir = snapshots.join(rev.trim());
        if dir.is_dir() {
            return Some(dir);
        }
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&snapshots)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    match dirs.as_slice() {
        [only] => Some(only.clone()),
        _ => None,
    }
}

fn checkpoint_in(dir: &Path) -> Result<Checkpoint, LmError> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(LmError::Unavailable(format!("{} is missing {name}", dir.display())))
        }
    };
    let config = need(CONFIG_FILE)?;
    let tokenizer = need(TOKENIZER_FILE)?;
    let weights = if dir.join(WEIGHTS_FILE).is_file() {
        vec![dir.join(WEIGHTS_FILE)]
    } else if dir.join(WEIGHTS_INDEX).is_file() {
        shards(dir)?
    } else {
        return Err(LmError::Unavailable(format!(
            "{} has no {WEIGHTS_FILE} (other weight formats are not supported)",
            dir.display()
        )));
    };
    Ok(Checkpoint {
        dir: dir.to_path_buf(),
        config,
        tokenizer,
        weights,
    })
}

fn shards(dir: &Path) -> Result<Vec<PathBuf>, LmError> {
    #[derive(serde::Deserialize)]
    struct Index {
        weight_map: std::collections::BTreeMap<String, String>,
    }
    let path = dir.join(WEIGHTS_INDEX);
    let text = fs::read_to_string(&path).map_err(|e| LmError::Load(format!("{}: {e}", path.display())))?;
    let index: Index = serde_json::from_str(&text).map_err(|e| LmError::Load(format!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = index.weight_map.values().map(|f| dir.join(f)).collect();
    files.sort();
    files.dedup();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(p: &Path) {
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, "{}").unwrap();
    }

    #[test]
    fn resolves_cache_layout() {
        let root = tempfile::tempdir().unwrap();
        let repo = root.path().join("models--org--tiny");
        let snap = repo.join("snapshots/abc123");
        for f in [CONFIG_FILE, TOKENIZER_FILE, WEIGHTS_FILE] {
            touch(&snap.join(f));
        }
        touch(&repo.join("snapshots/zzz/config.json"));
        fs::create_dir_all(repo.join("refs")).unwrap();
        fs::write(repo.join("refs/main"), "abc123\n").unwrap();
        assert_eq!(cached_snapshot(root.path(), "org/tiny"), Some(snap.clone()));
        assert_eq!(checkpoint_in(&snap).unwrap().weights, vec![snap.join(WEIGHTS_FILE)]);
        assert_eq!(cached_snapshot(root.path(), "org/other"), None);
    }

    #[test]
    fn missing_model_is_unavailable() {
        let err = resolve("surely/not-a-cached-model-xyz").unwrap_err();
        assert!(matches!(err, LmError::Unavailable(_)), "{err}");
    }

    #[test]
    fn directory_without_weights_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join(CONFIG_FILE));
        touch(&dir.path().join(TOKENIZER_FILE));
        let err = resolve(dir.path().to_str().unwrap()).unwrap_err();
        assert!(err.to_string().contains("model.safetensors"), "{err}");
    }
}
