//! Real-model scorers: masked (BERT, RoBERTa) and causal (GPT-2) language
//! models running on candle, loaded from local checkpoints.

pub mod bert;
mod causal;
pub mod gpt2;
mod masked;
pub mod resolve;
mod text;
pub mod weights;

use candle_core::Tensor;
use thiserror::Error;

use clozeprobe_core::scoring::{MockScorer, Scorer, ScorerFamily, ScorerSpec, ScoringError};

pub use causal::CausalScorer;
pub use masked::MaskedScorer;
pub use resolve::{resolve, Checkpoint};
pub use text::{split_masked_context, TextEncoder};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("{0}")]
    Unavailable(String),
    #[error("cannot load checkpoint: {0}")]
    Load(String),
    #[error("tokenizer: {0}")]
    Tokenizer(String),
    #[error("input of {len} tokens exceeds the model limit of {max}")]
    TooLong { len: usize, max: usize },
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),
}

impl From<LmError> for ScoringError {
    fn from(e: LmError) -> Self {
        match e {
            LmError::Unavailable(m) => ScoringError::BackendUnavailable(m),
            other => ScoringError::Backend(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    GeluErf,
    GeluTanh,
    Relu,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Self, LmError> {
        match name {
            "gelu" => Ok(Activation::GeluErf),
            "gelu_new" | "gelu_pytorch_tanh" | "gelu_fast" => Ok(Activation::GeluTanh),
            "relu" => Ok(Activation::Relu),
            other => Err(LmError::Unavailable(format!("unsupported activation {other:?}"))),
        }
    }

    pub fn apply(self, x: &Tensor) -> candle_core::Result<Tensor> {
        match self {
            Activation::GeluErf => x.gelu_erf(),
            Activation::GeluTanh => x.gelu(),
            Activation::Relu => x.relu(),
        }
    }
}

/// Reads a checkpoint config, rejecting architectures outside `accepted`
/// before parsing the family-specific fields.
fn read_config<T: serde::de::DeserializeOwned>(path: &std::path::Path, accepted: &[&str]) -> Result<T, LmError> {
    #[derive(serde::Deserialize)]
    struct Probe {
        model_type: Option<String>,
    }
    let load = |e: String| LmError::Load(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| load(e.to_string()))?;
    let probe: Probe = serde_json::from_str(&text).map_err(|e| load(e.to_string()))?;
    let model_type = probe.model_type.unwrap_or_default();
    if !accepted.contains(&model_type.as_str()) {
        return Err(LmError::Unavailable(format!(
            "architecture {model_type:?} is not supported here (expected one of {accepted:?})"
        )));
    }
    serde_json::from_str(&text).map_err(|e| load(e.to_string()))
}

fn check_device(spec: &ScorerSpec) -> Result<candle_core::Device, ScoringError> {
    match spec.options.device.as_deref() {
        None | Some("cpu") => Ok(candle_core::Device::Cpu),
        Some(other) => Err(ScoringError::BackendUnavailable(format!(
            "device {other:?} is not available in this build (cpu only)"
        ))),
    }
}

/// Builds the scorer a spec describes. Real-model checkpoints are
/// resolved locally; a missing checkpoint is `BackendUnavailable`.
pub fn open_scorer(spec: &ScorerSpec) -> Result<Box<dyn Scorer + Send>, ScoringError> {
    spec.validate().map_err(ScoringError::InvalidRequest)?;
    Ok(match spec.family {
        ScorerFamily::Mock => Box::new(MockScorer::new(spec.clone())?),
        ScorerFamily::Masked => Box::new(MaskedScorer::load(spec.clone())?),
        ScorerFamily::Causal => Box::new(CausalScorer::load(spec.clone())?),
    })
}
