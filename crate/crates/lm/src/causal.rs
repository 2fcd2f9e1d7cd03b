
use candle_core::Device;

use clozeprobe_core::itembank::BLANK;
use clozeprobe_core::scoring::{CandidateScore, ScoreRequest, Scorer, ScorerSpec, ScoringError};

use crate::gpt2::{Gpt2, Gpt2Config};
use crate::masked::{finish, normalize};
use crate::resolve::resolve;
use crate::text::TextEncoder;
use crate::weights::Weights;
use crate::{check_device, read_config, LmError};

/// Causal-LM scorer: a start token, the context up to the blank, then the
/// candidate scored by the chain rule. Text after the blank is ignored.
pub struct CausalScorer {
    spec: ScorerSpec,
    model: Gpt2,
    text: TextEncoder,
    bos: u32,
    max_batch: usize,
}

const DEFAULT_BATCH: usize = 16;

impl CausalScorer {
    pub fn load(spec: ScorerSpec) -> Result<Self, ScoringError> {
        let device = check_device(&spec)?;
        let lowercase = spec.options.lowercase.unwrap_or(false);
        Ok(Self::load_inner(spec, lowercase, &device)?)
    }

    fn load_inner(spec: ScorerSpec, lowercase: bool, device: &Device) -> Result<Self, LmError> {
        let ckpt = resolve(&spec.model_id)?;
        let config: Gpt2Config = read_config(&ckpt.config, &["gpt2"])?;
        let model = Gpt2::load(config, Weights::load(&ckpt.weights, device)?, device)?;
        let text = TextEncoder::load(&ckpt.tokenizer, lowercase)?;
        let bos = match model.config.bos_token_id {
            Some(id) => id,
            None => text.require_token(&["<|endoftext|>"])?,
        };
        Ok(CausalScorer {
            spec,
            model,
            text,
            bos,
            max_batch: DEFAULT_BATCH,
        })
    }

    /// Caps how many candidate sequences share one forward pass.
    pub fn with_max_batch(mut self, n: usize) -> Self {
        self.max_batch = n.max(1);
        self
    }

    fn score(&self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, LmError> {
        let prefix_text = request.context.split(BLANK).next().unwrap_or("").trim_end();
        let mut prefix = vec![self.bos];
        prefix.extend(self.text.encode(prefix_text)?);

        let variants: Vec<Result<Vec<Vec<u32>>, String>> =
            request.candidates.iter().map(|c| self.text.candidate_variants(c)).collect();
        // (candidate index, continuation ids)
        let jobs: Vec<(usize, &Vec<u32>)> = variants
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.as_ref().ok().map(|vs| (i, vs)))
            .flat_map(|(i, vs)| vs.iter().map(move |ids| (i, ids)))
            .collect();

        let norm = self.spec.options.length_normalization;
        let mut best: Vec<Option<(f64, usize)>> = vec![None; request.candidates.len()];
        let mut errors: Vec<Option<String>> = vec![None; request.candidates.len()];
        for chunk in jobs.chunks(self.max_batch) {
            let seqs: Vec<Vec<u32>> = chunk
                .iter()
                .map(|(_, ids)| prefix.iter().chain(ids.iter()).copied().collect())
                .collect();
            let positions: Vec<Vec<usize>> = chunk
                .iter()
                .map(|(_, ids)| (0..ids.len()).map(|j| prefix.len() - 1 + j).collect())
                .collect();
            let rows = match self.model.log_probs_at(&seqs, &positions) {
                Ok(rows) => rows,
                Err(e @ LmError::TooLong { .. }) => {
                    for (i, _) in chunk {
                        errors[*i] = Some(e.to_string());
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            for ((i, ids), rows) in chunk.iter().zip(rows) {
                let sum: f64 = ids.iter().enumerate().map(|(j, &t)| rows[j][t as usize]).sum();
                let v = normalize(sum, ids.len(), norm);
                if best[*i].is_none_or(|(bv, _)| v > bv) {
                    best[*i] = Some((v, ids.len()));
                }
            }
        }

        Ok(request
            .candidates
            .iter()
            .enumerate()
            .map(|(i, cand)| match &variants[i] {
                Err(reason) => CandidateScore::failed(cand.clone(), reason.clone()),
                Ok(_) => finish(cand, best[i], errors[i].take()),
            })
            .collect())
    }
}

impl Scorer for CausalScorer {
    fn spec(&self) -> &ScorerSpec {
        &self.spec
    }

    fn score_candidates(&mut self, request: &ScoreRequest<'_>) -> Result<Vec<CandidateScore>, ScoringError> {
        request.validate()?;
        Ok(self.score(request)?)
    }
}
