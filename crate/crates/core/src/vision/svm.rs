//! Linear SVM inference and its text model format.

use serde::{Deserialize, Serialize};

use super::VisionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Hash of the descriptor configuration the model was trained on.
    pub config_hash: String,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmDecision {
    pub is_cone: bool,
    /// `w·x + b`.
    pub margin: f64,
}

const MAGIC: &str = "conetrack-svm 1";

impl SvmModel {
    pub fn new(config_hash: impl Into<String>, weights: Vec<f64>, bias: f64) -> Result<Self, VisionError> {
        if !weights.iter().all(|w| w.is_finite()) || !bias.is_finite() {
            return Err(VisionError::InvalidModel("non-finite weight"));
        }
        Ok(Self { config_hash: config_hash.into(), weights, bias })
    }

    pub fn check_hash(&self, expected: &str) -> Result<(), VisionError> {
        if self.config_hash == expected {
            Ok(())
        } else {
            Err(VisionError::ConfigMismatch { model: self.config_hash.clone(), descriptor: expected.to_owned() })
        }
    }

    /// Line-oriented text: header, hash, length, bias, then one weight per
    /// line. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC}\nhash {}\nlength {}\nbias {:?}\n", self.config_hash, self.weights.len(), self.bias);
        for w in &self.weights {
            s.push_str(&format!("{w:?}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, VisionError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(MAGIC) {
            return Err(VisionError::InvalidModel("missing header"));
        }
        let mut field = |name: &str| -> Result<String, VisionError> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(name))
                .map(|v| v.trim().to_owned())
                .ok_or(VisionError::InvalidModel("missing field"))
        };
        let hash = field("hash")?;
        let length: usize = field("length")?.parse().map_err(|_| VisionError::InvalidModel("bad length"))?;
        let bias: f64 = field("bias")?.parse().map_err(|_| VisionError::InvalidModel("bad bias"))?;
        let weights = lines
            .map(|l| l.parse::<f64>().map_err(|_| VisionError::InvalidModel("bad weight")))
            .collect::<Result<Vec<_>, _>>()?;
        if weights.len() != length {
            return Err(VisionError::InvalidModel("weight count differs from length"));
        }
        Self::new(hash, weights, bias)
    }
}

pub fn svm_classify(features: &[f64], model: &SvmModel) -> Result<SvmDecision, VisionError> {
    if features.len() != model.weights.len() {
        return Err(VisionError::DimensionMismatch { expected: model.weights.len(), found: features.len() });
    }
    let margin = features.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>() + model.bias;
    Ok(SvmDecision { is_cone: margin > 0.0, margin })
}
