//! BERT-family encoder with its masked-LM head (BERT and RoBERTa layouts).

use candle_core::{Device, Module, Tensor, D};
use candle_nn::{Embedding, LayerNorm, Linear};
use serde::Deserialize;

use crate::weights::Weights;
use crate::{Activation, LmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Bert,
    /// RoBERTa and XLM-R: positions offset past the padding index, no
    /// segment embeddings in use.
    Roberta,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EncoderConfig {
    pub model_type: String,
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    #[serde(default = "default_act")]
    pub hidden_act: String,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default)]
    pub pad_token_id: Option<u32>,
    #[serde(default)]
    pub position_embedding_type: Option<String>,
}

fn default_act() -> String {
    "gelu".into()
}
fn default_type_vocab() -> usize {
    2
}
fn default_eps() -> f64 {
    1e-12
}

impl EncoderConfig {
    pub fn kind(&self) -> Result<EncoderKind, LmError> {
        match self.model_type.as_str() {
            "bert" => Ok(EncoderKind::Bert),
            "roberta" | "xlm-roberta" | "camembert" => Ok(EncoderKind::Roberta),
            other => Err(LmError::Unavailable(format!("unsupported masked architecture {other:?}"))),
        }
    }

    /// First position id used for real tokens.
    fn position_offset(&self, kind: EncoderKind) -> usize {
        match kind {
            EncoderKind::Bert => 0,
            EncoderKind::Roberta => self.pad_token_id.unwrap_or(1) as usize + 1,
        }
    }

    /// Longest input the position table supports.
    pub fn max_len(&self, kind: EncoderKind) -> usize {
        self.max_position_embeddings.saturating_sub(self.position_offset(kind))
    }
}

struct SelfAttention {
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
    norm: LayerNorm,
    heads: usize,
    head_dim: usize,
}

impl SelfAttention {
    fn forward(&self, x: &Tensor) -> Result<Tensor, LmError> {
        let (b, n, h) = x.dims3()?;
        let split = |t: Tensor| -> candle_core::Result<Tensor> {
            t.reshape((b, n, self.heads, self.head_dim))?.transpose(1, 2)?.contiguous()
        };
        let q = split(self.query.forward(x)?)?;
        let k = split(self.key.forward(x)?)?;
        let v = split(self.value.forward(x)?)?;
        let scale = 1.0 / (self.head_dim as f64).sqrt();
        let scores = (q.matmul(&k.t()?)? * scale)?;
        let probs = candle_nn::ops::softmax_last_dim(&scores)?;
        let ctx = probs.matmul(&v)?.transpose(1, 2)?.reshape((b, n, h))?;
        Ok(self.norm.forward(&(self.output.forward(&ctx)? + x)?)?)
    }
}

struct Layer {
    attention: SelfAttention,
    intermediate: Linear,
    output: Linear,
    norm: LayerNorm,
    act: Activation,
}

impl Layer {
    fn forward(&self, x: &Tensor) -> Result<Tensor, LmError> {
        let x = self.attention.forward(x)?;
        let hidden = self.act.apply(&self.intermediate.forward(&x)?)?;
        Ok(self.norm.forward(&(self.output.forward(&hidden)? + x)?)?)
    }
}

/// Encoder plus masked-LM prediction head.
pub struct MaskedLm {
    pub kind: EncoderKind,
    pub config: EncoderConfig,
    words: Embedding,
    positions: Embedding,
    types: Option<Embedding>,
    embed_norm: LayerNorm,
    layers: Vec<Layer>,
    head_dense: Linear,
    head_act: Activation,
    head_norm: LayerNorm,
    decoder: Linear,
    device: Device,
}

impl MaskedLm {
    pub fn load(config: EncoderConfig, weights: Weights, device: &Device) -> Result<Self, LmError> {
        let kind = config.kind()?;
        if let Some(p) = config.position_embedding_type.as_deref().filter(|p| *p != "absolute") {
            return Err(LmError::Unavailable(format!("unsupported position embedding type {p:?}")));
        }
        if config.hidden_size % config.num_attention_heads != 0 {
            return Err(LmError::Load("hidden size is not divisible by the head count".into()));
        }
        let w = weights.with_prefix(&["bert.", "roberta."], "embeddings.word_embeddings.weight")?;
        let (h, v, eps) = (config.hidden_size, config.vocab_size, config.layer_norm_eps);
        let act = Activation::parse(&config.hidden_act)?;
        let words = w.embedding("embeddings.word_embeddings", v, h)?;
        let positions = w.embedding("embeddings.position_embeddings", config.max_position_embeddings, h)?;
        let types = match w.opt("embeddings.token_type_embeddings.weight") {
            Some(_) => Some(w.embedding("embeddings.token_type_embeddings", config.type_vocab_size, h)?),
            None => None,
        };
        let embed_norm = w.layer_norm("embeddings.LayerNorm", h, eps)?;
        let heads = config.num_attention_heads;
        let layers = (0..config.num_hidden_layers)
            .map(|i| {
                let p = format!("encoder.layer.{i}");
                Ok(Layer {
                    attention: SelfAttention {
                        query: w.linear(&format!("{p}.attention.self.query"), h, h)?,
                        key: w.linear(&format!("{p}.attention.self.key"), h, h)?,
                        value: w.linear(&format!("{p}.attention.self.value"), h, h)?,
                        output: w.linear(&format!("{p}.attention.output.dense"), h, h)?,
                        norm: w.layer_norm(&format!("{p}.attention.output.LayerNorm"), h, eps)?,
                        heads,
                        head_dim: h / heads,
                    },
                    intermediate: w.linear(&format!("{p}.intermediate.dense"), h, config.intermediate_size)?,
                    output: w.linear(&format!("{p}.output.dense"), config.intermediate_size, h)?,
                    norm: w.layer_norm(&format!("{p}.output.LayerNorm"), h, eps)?,
                    act,
                })
            })
            .collect::<Result<Vec<_>, LmError>>()?;

        let (head, dense, norm, head_act) = match kind {
            EncoderKind::Bert => ("cls.predictions", "cls.predictions.transform.dense", "cls.predictions.transform.LayerNorm", act),
            EncoderKind::Roberta => ("lm_head", "lm_head.dense", "lm_head.layer_norm", Activation::GeluErf),
        };
        let decoder_w = match w.opt(&format!("{head}.decoder.weight")) {
            Some(t) => t,
            None => words.embeddings().clone(),
        };
        let decoder_b = w
            .opt(&format!("{head}.bias"))
            .or_else(|| w.opt(&format!("{head}.decoder.bias")))
            .ok_or_else(|| LmError::Load(format!("missing {head}.bias")))?;
        Ok(MaskedLm {
            kind,
            words,
            positions,
            types,
            embed_norm,
            layers,
            head_dense: w.linear(dense, h, h)?,
            head_act,
            head_norm: w.layer_norm(norm, h, eps)?,
            decoder: Linear::new(decoder_w, Some(decoder_b)),
            device: device.clone(),
            config,
        })
    }

    pub fn max_len(&self) -> usize {
        self.config.max_len(self.kind)
    }

    /// Vocabulary logits for every position of a single sequence, `[n, vocab]`.
    pub fn logits(&self, ids: &[u32], token_types: &[u32]) -> Result<Tensor, LmError> {
        let n = ids.len();
        if n > self.max_len() {
            return Err(LmError::TooLong { len: n, max: self.max_len() });
        }
        let input = Tensor::new(ids, &self.device)?.unsqueeze(0)?;
        let offset = self.config.position_offset(self.kind) as u32;
        let pos: Vec<u32> = (0..n as u32).map(|i| i + offset).collect();
        let pos = Tensor::new(pos.as_slice(), &self.device)?.unsqueeze(0)?;
        let mut x = (self.words.forward(&input)? + self.positions.forward(&pos)?)?;
        if let Some(types) = &self.types {
            let tt = Tensor::new(token_types, &self.device)?.unsqueeze(0)?;
            x = (x + types.forward(&tt)?)?;
        }
        let mut x = self.embed_norm.forward(&x)?;
        for layer in &self.layers {
            x = layer.forward(&x)?;
        }
        let x = self.head_act.apply(&self.head_dense.forward(&x)?)?;
        let x = self.head_norm.forward(&x)?;
        Ok(self.decoder.forward(&x)?.squeeze(0)?)
    }

    /// Log-probabilities (f64) over the vocabulary at `positions`.
    pub fn log_probs_at(&self, ids: &[u32], token_types: &[u32], positions: &[usize]) -> Result<Vec<Vec<f64>>, LmError> {
        let logits = self.logits(ids, token_types)?;
        positions
            .iter()
            .map(|&p| {
                let row = logits.get(p)?.to_dtype(candle_core::DType::F64)?;
                Ok(candle_nn::ops::log_softmax(&row, D::Minus1)?.to_vec1::<f64>()?)
            })
            .collect()
    }
}
