use std::collections::BTreeMap;

use candle_core::Device;

use clozeprobe_core::scoring::{
    CandidateScore, LengthNormalization, LogProb, ScoreRequest, Scorer, ScorerSpec, ScoringError,
};

use crate::bert::{EncoderConfig, EncoderKind, MaskedLm};
use crate::resolve::resolve;
use crate::text::{split_masked_context, TextEncoder};
use crate::weights::Weights;
use crate::{check_device, read_config, LmError};

/// Masked-LM scorer. The blank becomes `k` mask tokens, where `k` is the
/// candidate's subtoken count, and the candidate scores the sum of its
/// subtoken log-probabilities read at those positions in one pass.
pub struct MaskedScorer {
    spec: ScorerSpec,
    model: MaskedLm,
    text: TextEncoder,
    cls: u32,
    sep: u32,
    mask: u32,
}

/// Token ids and segment ids for one masked input.
struct Layout {
    ids: Vec<u32>,
    types: Vec<u32>,
    mask_start: usize,
}

impl MaskedScorer {
    pub fn load(spec: ScorerSpec) -> Result<Self, ScoringError> {
        let device = check_device(&spec)?;
        let lowercase = spec.options.lowercase.unwrap_or_else(|| spec.model_id.contains("uncased"));
        Ok(Self::load_inner(spec, lowercase, &device)?)
    }

    fn load_inner(spec: ScorerSpec, lowercase: bool, device: &Device) -> Result<Self, LmError> {
        let ckpt = resolve(&spec.model_id)?;
        let config: EncoderConfig = read_config(&ckpt.config, &["bert", "roberta", "xlm-roberta", "camembert"])?;
        let model = MaskedLm::load(config, Weights::load(&ckpt.weights, device)?, device)?;
        let text = TextEncoder::load(&ckpt.tokenizer, lowercase)?;
        let (cls, sep, mask) = match model.kind {
            EncoderKind::Bert => (
                text.require_token(&["[CLS]"])?,
                text.require_token(&["[SEP]"])?,
                text.require_token(&["[MASK]"])?,
            ),
            EncoderKind::Roberta => (
                text.require_token(&["<s>"])?,
                text.require_token(&["</s>"])?,
                text.require_token(&["<mask>"])?,
            ),
        };
        Ok(MaskedScorer {
            spec,
            model,
            text,
            cls,
            sep,
            mask,
        })
    }

    fn layout(&self, a: &[u32], b: &[u32], tail: &[u32], k: usize) -> Layout {
        let mut ids = vec![self.cls];
        let mut types = vec![0];
        let second_type = match (self.model.kind, a.is_empty()) {
            (EncoderKind::Bert, false) => 1,
            _ => 0,
        };
        if !a.is_empty() {
            ids.extend_from_slice(a);
            ids.push(self.sep);
            if self.model.kind == EncoderKind::Roberta {
                ids.push(self.sep);
            }
            types.resize(ids.len(), 0);
        }
        ids.extend_from_slice(b);
        let mask_start = ids.len();
        ids.extend(std::iter::repeat(self.mask).take(k));
        ids.extend_from_slice(tail);
        ids.push(self.sep);
        types.resize(ids.len(), second_type);
        Layout { ids, types, mask_start }
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, LmError> {
        let (a, b, tail) = split_masked_context(request.context);
        let (a, b, tail) = (self.text.encode(a)?, self.text.encode(b)?, self.text.encode(tail)?);
        let variants: Vec<Result<Vec<Vec<u32>>, String>> =
            request.candidates.iter().map(|c| self.text.candidate_variants(c)).collect();

        // One forward pass per distinct mask count, shared by all candidates.
        let mut by_k: BTreeMap<usize, Result<Vec<Vec<f64>>, String>> = BTreeMap::new();
        for ids in variants.iter().flatten().flatten() {
            let k = ids.len();
            if by_k.contains_key(&k) {
                continue;
            }
            let layout = self.layout(&a, &b, &tail, k);
            let positions: Vec<usize> = (layout.mask_start..layout.mask_start + k).collect();
            let rows = match self.model.log_probs_at(&layout.ids, &layout.types, &positions) {
                Ok(rows) => Ok(rows),
                Err(e @ LmError::TooLong { .. }) => Err(e.to_string()),
                Err(e) => return Err(e),
            };
            by_k.insert(k, rows);
        }

        let norm = self.spec.options.length_normalization;
        Ok(request
            .candidates
            .iter()
            .zip(variants)
            .map(|(cand, vs)| {
                let vs = match vs {
                    Ok(vs) => vs,
                    Err(reason) => return CandidateScore::failed(cand.clone(), reason),
                };
                let mut best: Option<(f64, usize)> = None;
                let mut last_err = None;
                for ids in vs {
                    match &by_k[&ids.len()] {
                        Ok(rows) => {
                            let sum: f64 = ids.iter().enumerate().map(|(j, &t)| rows[j][t as usize]).sum();
                            let v = normalize(sum, ids.len(), norm);
                            if best.is_none_or(|(bv, _)| v > bv) {
                                best = Some((v, ids.len()));
                            }
                        }
                        Err(e) => last_err = Some(e.clone()),
                    }
                }
                finish(cand, best, last_err)
            })
            .collect())
    }
}

pub(crate) fn normalize(sum: f64, n: usize, norm: LengthNormalization) -> f64 {
    match norm {
        LengthNormalization::Sum => sum,
        LengthNormalization::Mean => sum / n as f64,
    }
}

pub(crate) fn finish(candidate: &str, best: Option<(f64, usize)>, err: Option<String>) -> CandidateScore {
    match best {
        Some((v, n)) if v.is_nan() => CandidateScore::failed(candidate, format!("non-finite score over {n} subtokens")),
        Some((v, n)) => CandidateScore::new(candidate, LogProb::new(v.min(0.0)), n),
        None => CandidateScore::failed(candidate, err.unwrap_or_else(|| "no scorable variant".into())),
    }
}

impl Scorer for MaskedScorer {
    fn spec(&self) -> &ScorerSpec {
        &self.spec
    }

    fn score_candidates(&mut self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, ScoringError> {
        request.validate()?;
        Ok(self.score(request)?)
    }
}
