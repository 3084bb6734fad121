use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};
use crate::transforms::AffineTransform;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// JSON form of a network. `weights[l]` is layer `l`'s matrix flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    pub seed: Option<u64>,
    /// Coordinate transform the network's inputs live in, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<AffineTransform>,
}

impl NetworkDoc {
    pub fn from_mlp(mlp: &Mlp, transform: Option<AffineTransform>) -> Self {
        NetworkDoc {
            version: NETWORK_FORMAT_VERSION,
            layer_dims: mlp.layer_dims().to_vec(),
            weights: (0..mlp.n_layers()).map(|l| mlp.weights(l).to_vec()).collect(),
            biases: (0..mlp.n_layers()).map(|l| mlp.biases(l).to_vec()).collect(),
            activation: "tanh".to_string(),
            seed: mlp.seed(),
            transform,
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported network format version {} (expected {NETWORK_FORMAT_VERSION})",
                self.version
            )));
        }
        if self.activation != "tanh" {
            return Err(Error::Document(format!(
                "unsupported activation {:?}",
                self.activation
            )));
        }
        let mut mlp = Mlp::from_parts(&self.layer_dims, self.weights.clone(), self.biases.clone())?;
        mlp.set_seed(self.seed);
        Ok(mlp)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkDoc::from_mlp(self, None).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        NetworkDoc::deserialize(deserializer)?
            .to_mlp()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let net = Mlp::new_seeded(&[2, 6, 1], 21).unwrap();
        let doc = NetworkDoc::from_mlp(&net, None);
        let back = NetworkDoc::from_json(&doc.to_json().unwrap()).unwrap().to_mlp().unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn version_is_mandatory() {
        let text = r#"{"layer_dims":[1,1],"weights":[[1.0]],"biases":[[0.0]],"activation":"tanh","seed":null}"#;
        assert!(NetworkDoc::from_json(text).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let text = r#"{"version":9,"layer_dims":[1,1],"weights":[[1.0]],"biases":[[0.0]],"activation":"tanh","seed":null}"#;
        assert!(NetworkDoc::from_json(text).unwrap().to_mlp().is_err());
    }
}
