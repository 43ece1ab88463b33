//! JSON checkpoints: model configuration, seed, block shapes and every
//! parameter at full precision.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{IPinnModel, ModelConfig};
use crate::error::{Error, Result};

const FORMAT: &str = "peripinn-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub config: ModelConfig,
    pub blocks: Vec<BlockShape>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_model(model: &IPinnModel) -> Self {
        let blocks = model
            .layout()
            .blocks()
            .iter()
            .map(|b| BlockShape { name: b.name.clone(), shape: b.shape.clone(), trainable: b.trainable, nonneg: b.nonneg })
            .collect();
        Self {
            format: FORMAT.into(),
            seed: model.seed(),
            config: model.config().clone(),
            blocks,
            params: model.params().to_vec(),
        }
    }

    /// Rebuilds the model, checking that the stored shapes match the layout
    /// implied by the configuration.
    pub fn to_model(&self) -> Result<IPinnModel> {
        if self.format != FORMAT {
            return Err(Error::parse("checkpoint", format!("unsupported format {:?}", self.format)));
        }
        let mut model = IPinnModel::new(self.config.clone(), self.seed)?;
        let expected: Vec<(&str, &[usize])> =
            model.layout().blocks().iter().map(|b| (b.name.as_str(), b.shape.as_slice())).collect();
        let stored: Vec<(&str, &[usize])> = self.blocks.iter().map(|b| (b.name.as_str(), b.shape.as_slice())).collect();
        if expected != stored {
            return Err(Error::parse("checkpoint", "parameter blocks do not match the configuration"));
        }
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse("checkpoint", "non-finite parameter"));
        }
        model.set_params(self.params.clone()).map_err(|e| Error::parse("checkpoint", e.to_string()))?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let m = IPinnModel::new(ModelConfig::default(), 3).unwrap();
        let ck = Checkpoint::from_model(&m);
        let text = ck.to_json();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        let m2 = back.to_model().unwrap();
        assert_eq!(m2.params(), m.params());
        assert_eq!(Checkpoint::from_model(&m2).to_json(), text);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let m = IPinnModel::new(ModelConfig::default(), 3).unwrap();
        let mut ck = Checkpoint::from_model(&m);
        ck.config.c_width = 10;
        assert!(ck.to_model().is_err());
        assert!(Checkpoint::from_json("{}").is_err());
    }
}
