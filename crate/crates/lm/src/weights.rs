//! Name-tolerant access to checkpoint tensors.

use std::collections::HashMap;
use std::path::PathBuf;

use candle_core::{DType, Device, Tensor};
use candle_nn::{Embedding, LayerNorm, Linear};

use crate::LmError;

/// Tensors from one checkpoint, looked up under an optional architecture
/// prefix and with legacy LayerNorm names (`gamma`/`beta`) as fallbacks.
pub struct Weights {
    tensors: HashMap<String, Tensor>,
    prefix: String,
}

impl Weights {
    pub fn load(files: &[PathBuf], device: &Device) -> Result<Self, LmError> {
        let mut tensors = HashMap::new();
        for f in files {
            let loaded = candle_core::safetensors::load(f, device)
                .map_err(|e| LmError::Load(format!("{}: {e}", f.display())))?;
            for (name, t) in loaded {
                let t = if t.dtype() == DType::F32 { t } else { t.to_dtype(DType::F32)? };
                tensors.insert(name, t);
            }
        }
        Ok(Weights {
            tensors,
            prefix: String::new(),
        })
    }

    pub fn from_tensors(tensors: HashMap<String, Tensor>) -> Self {
        Weights {
            tensors,
            prefix: String::new(),
        }
    }

    /// Picks the first of `prefixes` under which `probe` exists ("" if
    /// the probe is unprefixed).
    pub fn with_prefix(mut self, prefixes: &[&str], probe: &str) -> Result<Self, LmError> {
        for p in prefixes.iter().copied().chain([""]) {
            if self.raw(&format!("{p}{probe}")).is_some() {
                self.prefix = p.to_string();
                return Ok(self);
            }
        }
        Err(LmError::Load(format!("checkpoint has no tensor {probe:?} under any of {prefixes:?}")))
    }

    fn raw(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name).or_else(|| {
            let legacy = if let Some(stem) = name.strip_suffix(".weight") {
                format!("{stem}.gamma")
            } else if let Some(stem) = name.strip_suffix(".bias") {
                format!("{stem}.beta")
            } else {
                return None;
            };
            self.tensors.get(&legacy)
        })
    }

    /// Looks up `name` under the selected prefix, then unprefixed.
    pub fn opt(&self, name: &str) -> Option<Tensor> {
        self.raw(&format!("{}{name}", self.prefix))
            .or_else(|| self.raw(name))
            .cloned()
    }

    pub fn get(&self, name: &str) -> Result<Tensor, LmError> {
        self.opt(name)
            .ok_or_else(|| LmError::Load(format!("missing tensor {}{name}", self.prefix)))
    }

    pub fn get_shaped(&self, name: &str, dims: &[usize]) -> Result<Tensor, LmError> {
        let t = self.get(name)?;
        if t.dims() != dims {
            return Err(LmError::Load(format!("tensor {name} has shape {:?}, expected {dims:?}", t.dims())));
        }
        Ok(t)
    }

    /// Row-major `[out, in]` weight plus bias.
    pub fn linear(&self, name: &str, in_dim: usize, out_dim: usize) -> Result<Linear, LmError> {
        let w = self.get_shaped(&format!("{name}.weight"), &[out_dim, in_dim])?;
        let b = self.get_shaped(&format!("{name}.bias"), &[out_dim])?;
        Ok(Linear::new(w, Some(b)))
    }

    /// GPT-2 style `[in, out]` weight plus bias.
    pub fn conv1d(&self, name: &str, in_dim: usize, out_dim: usize) -> Result<Linear, LmError> {
        let w = self.get_shaped(&format!("{name}.weight"), &[in_dim, out_dim])?;
        let b = self.get_shaped(&format!("{name}.bias"), &[out_dim])?;
        Ok(Linear::new(w.t()?.contiguous()?, Some(b)))
    }

    pub fn layer_norm(&self, name: &str, dim: usize, eps: f64) -> Result<LayerNorm, LmError> {
        let w = self.get_shaped(&format!("{name}.weight"), &[dim])?;
        let b = self.get_shaped(&format!("{name}.bias"), &[dim])?;
        Ok(LayerNorm::new(w, b, eps))
    }

    pub fn embedding(&self, name: &str, rows: usize, dim: usize) -> Result<Embedding, LmError> {
        Ok(Embedding::new(self.get_shaped(&format!("{name}.weight"), &[rows, dim])?, dim))
    }
}
