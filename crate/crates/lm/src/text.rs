use std::path::Path;

use tokenizers::Tokenizer;

use clozeprobe_core::itembank::BLANK;

use crate::LmError;

/// Tokenizer wrapper producing raw ids with no special tokens added.
pub struct TextEncoder {
    tokenizer: Tokenizer,
    unk: Option<u32>,
    lowercase: bool,
}

impl TextEncoder {
    pub fn load(path: &Path, lowercase: bool) -> Result<Self, LmError> {
        let tokenizer = Tokenizer::from_file(path).map_err(|e| LmError::Tokenizer(format!("{}: {e}", path.display())))?;
        let unk = ["[UNK]", "<unk>"].iter().find_map(|t| tokenizer.token_to_id(t));
        Ok(TextEncoder {
            tokenizer,
            unk,
            lowercase,
        })
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.tokenizer.token_to_id(token)
    }

    pub fn require_token(&self, candidates: &[&str]) -> Result<u32, LmError> {
        candidates
            .iter()
            .find_map(|t| self.token_id(t))
            .ok_or_else(|| LmError::Tokenizer(format!("vocabulary has none of {candidates:?}")))
    }

    pub fn normalize(&self, text: &str) -> String {
        if self.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        }
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>, LmError> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        let enc = self
            .tokenizer
            .encode(self.normalize(text), false)
            .map_err(|e| LmError::Tokenizer(e.to_string()))?;
        Ok(enc.get_ids().to_vec())
    }

    /// Subtoken sequences to try for a candidate: with and without a
    /// leading space, deduplicated. Sequences containing the unknown token
    /// are dropped; an empty result carries the reason.
    pub fn candidate_variants(&self, candidate: &str) -> Result<Vec<Vec<u32>>, String> {
        let trimmed = candidate.trim();
        if trimmed.is_empty() {
            return Err("candidate is empty after normalization".into());
        }
        let mut out: Vec<Vec<u32>> = Vec::new();
        for text in [format!(" {trimmed}"), trimmed.to_string()] {
            let ids = self.encode(&text).map_err(|e| e.to_string())?;
            if ids.is_empty() || self.unk.is_some_and(|u| ids.contains(&u)) || out.contains(&ids) {
                continue;
            }
            out.push(ids);
        }
        if out.is_empty() {
            return Err(format!("candidate {candidate:?} is not representable in the vocabulary"));
        }
        Ok(out)
    }
}

/// Splits a masked-scoring context into the preceding sentence(s), the
/// sentence holding the blank up to the blank, and any trailing text.
pub fn split_masked_context(context: &str) -> (&str, &str, &str) {
    let (left, tail) = context.split_once(BLANK).unwrap_or((context, ""));
    let left = left.trim_end();
    match left.rfind(". ") {
        Some(cut) => (&left[..cut + 1], &left[cut + 2..], tail),
        None => ("", left, tail),
    }
}
