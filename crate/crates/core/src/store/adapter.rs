//! Affine adapter checkpoints (`y = W·x + b`) and their JSON form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterCheckpoint {
    dim: usize,
    /// Row-major `dim × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    /// Config that produced the weights; `None` for hand-built adapters.
    pub metadata: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct RawCheckpoint {
    dim: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    #[serde(default)]
    metadata: Option<TrainConfig>,
}

impl AdapterCheckpoint {
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        AdapterCheckpoint {
            dim,
            weights,
            bias: vec![0.0; dim],
            metadata: None,
        }
    }

    /// Builds a checkpoint from row-major weights, validating shape and finiteness.
    pub fn new(dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let ckpt = AdapterCheckpoint {
            dim,
            weights,
            bias,
            metadata: None,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            let cols = rows.first().map_or(0, Vec::len);
            return Err(Error::Validation(format!(
                "weights are {}×{cols} but dim is {dim}",
                rows.len()
            )));
        }
        Self::new(dim, rows.concat(), bias)
    }

    pub fn with_metadata(mut self, cfg: TrainConfig) -> Self {
        self.metadata = Some(cfg);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("adapter dim must be at least 1".into()));
        }
        if self.weights.len() != self.dim * self.dim {
            return Err(Error::Validation(format!(
                "adapter has {} weights, dim {} needs {}",
                self.weights.len(),
                self.dim,
                self.dim * self.dim
            )));
        }
        if self.bias.len() != self.dim {
            return Err(Error::Validation(format!(
                "adapter bias has length {}, expected {}",
                self.bias.len(),
                self.dim
            )));
        }
        if let Some(pos) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Validation(format!(
                "adapter weight ({}, {}) is not finite",
                pos / self.dim,
                pos % self.dim
            )));
        }
        if let Some(pos) = self.bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::Validation(format!("adapter bias {pos} is not finite")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.dim + col]
    }

    /// `W·x + b` in `f64`.
    pub fn transform(&self, x: &[f32], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.dim..(r + 1) * self.dim];
            // Starting from -0.0 and skipping exact zeros keeps signed zeros
            // intact, so the identity map reproduces its input bit for bit.
            let mut acc = -0.0f64;
            for (w, v) in row.iter().zip(x) {
                if *w != 0.0 {
                    acc += w * f64::from(*v);
                }
            }
            if self.bias[r] != 0.0 {
                acc += self.bias[r];
            }
            *o = acc;
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let raw = RawCheckpoint {
            dim: self.dim,
            weights: self.weights.chunks(self.dim).map(<[f64]>::to_vec).collect(),
            bias: self.bias.clone(),
            metadata: self.metadata,
        };
        serde_json::to_string_pretty(&raw).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawCheckpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        let mut ckpt = Self::from_rows(raw.dim, raw.weights, raw.bias)?;
        ckpt.metadata = raw.metadata;
        Ok(ckpt)
    }
}

pub fn save_adapter(ckpt: &AdapterCheckpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ckpt.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_adapter(path: impl AsRef<Path>) -> Result<AdapterCheckpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    AdapterCheckpoint::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let id = AdapterCheckpoint::identity(4);
        let back = AdapterCheckpoint::from_json(&id.to_json().unwrap()).unwrap();
        assert_eq!(id, back);
    }

    #[test]
    fn exact_decimal_round_trip() {
        let w: Vec<f64> = (0..9).map(|i| (i as f64 + 0.1).sqrt() / 7.0 - 1e-17 * i as f64).collect();
        let ckpt = AdapterCheckpoint::new(3, w, vec![1.0 / 3.0, -2.5e-300, 0.0])
            .unwrap()
            .with_metadata(TrainConfig::default());
        let back = AdapterCheckpoint::from_json(&ckpt.to_json().unwrap()).unwrap();
        for (a, b) in ckpt.weights().iter().zip(back.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(ckpt, back);
    }

    #[test]
    fn non_square_weights_rejected() {
        let json = r#"{"dim":4,"weights":[[1,0,0,0],[0,1,0,0],[0,0,1,0]],"bias":[0,0,0,0],"metadata":null}"#;
        assert!(matches!(
            AdapterCheckpoint::from_json(json),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn nan_weight_rejected() {
        let mut w = AdapterCheckpoint::identity(2).weights().to_vec();
        w[1] = f64::NAN;
        assert!(matches!(
            AdapterCheckpoint::new(2, w, vec![0.0; 2]),
            Err(Error::Validation(_))
        ));
        // JSON cannot carry NaN; serde_json writes it as null.
        let json = r#"{"dim":1,"weights":[[null]],"bias":[0]}"#;
        assert!(AdapterCheckpoint::from_json(json).is_err());
    }

    #[test]
    fn bias_length_checked() {
        assert!(AdapterCheckpoint::new(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapter.json");
        let ckpt = AdapterCheckpoint::identity(3);
        save_adapter(&ckpt, &path).unwrap();
        assert_eq!(load_adapter(&path).unwrap(), ckpt);
    }
}
