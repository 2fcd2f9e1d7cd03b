//! GPT-2 decoder.

use candle_core::{DType, Device, Module, Tensor, D};
use candle_nn::{Embedding, LayerNorm, Linear};
use serde::Deserialize;

use crate::weights::Weights;
use crate::{Activation, LmError};

#[derive(Debug, Clone, Deserialize)]
pub struct Gpt2Config {
    pub model_type: String,
    pub vocab_size: usize,
    pub n_embd: usize,
    pub n_layer: usize,
    pub n_head: usize,
    #[serde(alias = "n_ctx")]
    pub n_positions: usize,
    #[serde(default)]
    pub n_inner: Option<usize>,
    #[serde(default = "default_act")]
    pub activation_function: String,
    #[serde(default = "default_eps")]
    pub layer_norm_epsilon: f64,
    #[serde(default)]
    pub bos_token_id: Option<u32>,
}

fn default_act() -> String {
    "gelu_new".into()
}
fn default_eps() -> f64 {
    1e-5
}

struct Block {
    ln_1: LayerNorm,
    c_attn: Linear,
    c_proj: Linear,
    ln_2: LayerNorm,
    c_fc: Linear,
    mlp_proj: Linear,
    heads: usize,
    act: Activation,
}

impl Block {
    fn forward(&self, x: &Tensor, mask: &Tensor) -> Result<Tensor, LmError> {
        let (b, n, h) = x.dims3()?;
        let d = h / self.heads;
        let qkv = self.c_attn.forward(&self.ln_1.forward(x)?)?;
        let split = |i: usize| -> candle_core::Result<Tensor> {
            qkv.narrow(D::Minus1, i * h, h)?
                .reshape((b, n, self.heads, d))?
                .transpose(1, 2)?
                .contiguous()
        };
        let (q, k, v) = (split(0)?, split(1)?, split(2)?);
        let scores = (q.matmul(&k.t()?)? * (1.0 / (d as f64).sqrt()))?.broadcast_add(mask)?;
        let probs = candle_nn::ops::softmax_last_dim(&scores)?;
        let ctx = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, n, h))?;
        let x = (x + self.c_proj.forward(&ctx)?)?;
        let hidden = self.act.apply(&self.c_fc.forward(&self.ln_2.forward(&x)?)?)?;
        Ok((&x + self.mlp_proj.forward(&hidden)?)?)
    }
}

pub struct Gpt2 {
    pub config: Gpt2Config,
    wte: Embedding,
    wpe: Embedding,
    blocks: Vec<Block>,
    ln_f: LayerNorm,
    lm_head: Linear,
    device: Device,
}

impl Gpt2 {
    pub fn load(config: Gpt2Config, weights: Weights, device: &Device) -> Result<Self, LmError> {
        if config.model_type != "gpt2" {
            return Err(LmError::Unavailable(format!(
                "unsupported causal architecture {:?}",
                config.model_type
            )));
        }
        if config.n_embd % config.n_head != 0 {
            return Err(LmError::Load("embedding size is not divisible by the head count".into()));
        }
        let w = weights.with_prefix(&["transformer."], "wte.weight")?;
        let (h, eps) = (config.n_embd, config.layer_norm_epsilon);
        let inner = config.n_inner.unwrap_or(4 * h);
        let act = Activation::parse(&config.activation_function)?;
        let wte = w.embedding("wte", config.vocab_size, h)?;
        let blocks = (0..config.n_layer)
            .map(|i| {
                let p = format!("h.{i}");
                Ok(Block {
                    ln_1: w.layer_norm(&format!("{p}.ln_1"), h, eps)?,
                    c_attn: w.conv1d(&format!("{p}.attn.c_attn"), h, 3 * h)?,
                    c_proj: w.conv1d(&format!("{p}.attn.c_proj"), h, h)?,
                    ln_2: w.layer_norm(&format!("{p}.ln_2"), h, eps)?,
                    c_fc: w.conv1d(&format!("{p}.mlp.c_fc"), h, inner)?,
                    mlp_proj: w.conv1d(&format!("{p}.mlp.c_proj"), inner, h)?,
                    heads: config.n_head,
                    act,
                })
            })
            .collect::<Result<Vec<_>, LmError>>()?;
        let head_w = match w.opt("lm_head.weight") {
            Some(t) => t,
            None => wte.embeddings().clone(),
        };
        Ok(Gpt2 {
            wpe: w.embedding("wpe", config.n_positions, h)?,
            ln_f: w.layer_norm("ln_f", h, eps)?,
            lm_head: Linear::new(head_w, None),
            wte,
            blocks,
            device: device.clone(),
            config,
        })
    }

    pub fn max_len(&self) -> usize {
        self.config.n_positions
    }

    /// Logits `[batch, n, vocab]` for right-padded sequences of equal
    /// length. Padding after a sequence's end cannot affect its positions.
    pub fn logits(&self, batch: &[Vec<u32>]) -> Result<Tensor, LmError> {
        let n = batch.iter().map(Vec::len).max().unwrap_or(0);
        if n > self.max_len() {
            return Err(LmError::TooLong { len: n, max: self.max_len() });
        }
        let flat: Vec<u32> = batch
            .iter()
            .flat_map(|s| s.iter().copied().chain(std::iter::repeat(0).take(n - s.len())))
            .collect();
        let input = Tensor::from_vec(flat, (batch.len(), n), &self.device)?;
        let pos = Tensor::arange(0u32, n as u32, &self.device)?.unsqueeze(0)?;
        let mut x = self.wte.forward(&input)?.broadcast_add(&self.wpe.forward(&pos)?)?;
        let mask: Vec<f32> = (0..n)
            .flat_map(|i| (0..n).map(move |j| if j > i { f32::NEG_INFINITY } else { 0.0 }))
            .collect();
        let mask = Tensor::from_vec(mask, (n, n), &self.device)?;
        for block in &self.blocks {
            x = block.forward(&x, &mask)?;
        }
        Ok(self.lm_head.forward(&self.ln_f.forward(&x)?)?)
    }

    /// Per-sequence log-probabilities (f64) over the vocabulary at the
    /// requested positions.
    pub fn log_probs_at(&self, batch: &[Vec<u32>], positions: &[Vec<usize>]) -> Result<Vec<Vec<Vec<f64>>>, LmError> {
        let logits = self.logits(batch)?;
        positions
            .iter()
            .enumerate()
            .map(|(b, ps)| {
                let seq = logits.get(b)?;
                ps.iter()
                    .map(|&p| {
                        let row = seq.get(p)?.to_dtype(DType::F64)?;
                        Ok(candle_nn::ops::log_softmax(&row, D::Minus1)?.to_vec1::<f64>()?)
                    })
                    .collect()
            })
            .collect()
    }
}
