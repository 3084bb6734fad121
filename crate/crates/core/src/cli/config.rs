use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discover::{OperatorFitConfig, ResidualConfig};
use crate::error::{Error, Result};
use crate::ingest::GridSpec;
use crate::select::FeatureReportConfig;
use crate::simulate::{BurgersConfig, Rk45Config};
use crate::surrogate::SurrogateFitConfig;

/// Library used by `discover` and `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryConfig {
    pub m: u32,
    pub k: u32,
    pub include_coords: bool,
    pub include_bias: bool,
    /// Restrict the linear model to these named columns; `null` keeps the
    /// whole library.
    pub terms: Option<Vec<String>>,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig {
            m: 2,
            k: 2,
            include_coords: false,
            include_bias: false,
            terms: Some(vec!["u*u_x".into(), "u_xx".into()]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Linear,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DiscoverConfig {
    pub kind: ModelKind,
    pub library: LibraryConfig,
    pub residual: ResidualConfig,
    pub operator: OperatorFitConfig,
    /// Evaluate derivatives on at most this many dataset rows (seeded subset).
    pub max_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSearchConfig {
    pub m: Vec<u32>,
    pub k: Vec<u32>,
    /// Operator-net hidden widths for the architecture grid; empty skips it.
    pub architectures: Vec<Vec<usize>>,
    pub architecture_m: Vec<u32>,
    pub include_coords: bool,
    pub operator: OperatorFitConfig,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            m: (0..=4).collect(),
            k: (1..=4).collect(),
            architectures: Vec::new(),
            architecture_m: (0..=2).collect(),
            include_coords: false,
            operator: OperatorFitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeaturesConfig {
    pub library: LibraryConfig,
    pub report: FeatureReportConfig,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            library: LibraryConfig {
                terms: None,
                ..LibraryConfig::default()
            },
            report: FeatureReportConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub t_end: f64,
    /// Output stamps, including the initial one.
    pub n_times: usize,
    /// Time steps of the reference solve over `[0, t_end]`.
    pub reference_nt: usize,
    pub integrator: Rk45Config,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            t_end: 2.0,
            n_times: 41,
            reference_nt: 2000,
            integrator: Rk45Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchConfig {
    pub base_url: String,
    pub ids: Vec<String>,
    pub period: String,
    /// Defaults to `$PDEDISC_CACHE_DIR` or a temp directory.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    /// Fixture-schema station document.
    pub stations: Option<PathBuf>,
    /// SMHI-style station documents fetched over HTTP.
    pub fetch: Option<FetchConfig>,
    pub grid: GridSpec,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            stations: None,
            fetch: None,
            grid: GridSpec {
                nt: 168,
                n1: 32,
                n2: 128,
                bbox: None,
                time_window: None,
            },
        }
    }
}

/// Declarative configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Overrides the seed of every stochastic component.
    pub seed: u64,
    /// External dataset CSV; when unset the stages use the `data.csv` written
    /// by `simulate` or `ingest`.
    pub dataset: Option<PathBuf>,
    pub simulate: BurgersConfig,
    pub drop_boundaries: bool,
    pub surrogate: SurrogateFitConfig,
    /// Shift/scale the coordinates to zero mean and unit variance before fitting.
    pub transform: bool,
    pub discover: DiscoverConfig,
    pub gridsearch: GridSearchConfig,
    pub features: FeaturesConfig,
    pub rollout: RolloutConfig,
    pub ingest: IngestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: None,
            simulate: BurgersConfig::default(),
            drop_boundaries: true,
            surrogate: SurrogateFitConfig::default(),
            transform: false,
            discover: DiscoverConfig::default(),
            gridsearch: GridSearchConfig::default(),
            features: FeaturesConfig::default(),
            rollout: RolloutConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
    }

    /// Copies the global seed into every component that draws random numbers.
    pub fn propagate_seed(&mut self) {
        self.surrogate.seed = self.seed;
        self.discover.operator.seed = self.seed;
        self.gridsearch.operator.seed = self.seed;
        self.features.report.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.dataset {
            if !p.exists() {
                return Err(Error::Usage(format!("dataset {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.ingest.stations {
            if !p.exists() {
                return Err(Error::Usage(format!("station file {} does not exist", p.display())));
            }
        }
        self.simulate.validate()?;
        self.surrogate.validate()?;
        self.ingest.grid.validate()?;
        if self.gridsearch.m.is_empty() || self.gridsearch.k.is_empty() {
            return Err(Error::Config("grid-search ranges must be non-empty".into()));
        }
        if self.rollout.n_times < 2 || !(self.rollout.t_end > 0.0) {
            return Err(Error::Config("rollout needs t_end > 0 and at least 2 output stamps".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"seed": 4, "surrogate": {"hidden": [3]}}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.surrogate.hidden, vec![3]);
        assert_eq!(cfg.surrogate.validation_fraction, 0.1);
        assert_eq!(cfg.discover, DiscoverConfig::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let back: RunConfig = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn seed_reaches_components() {
        let mut cfg = RunConfig { seed: 9, ..RunConfig::default() };
        cfg.propagate_seed();
        assert_eq!(
            [cfg.surrogate.seed, cfg.discover.operator.seed, cfg.gridsearch.operator.seed, cfg.features.report.seed],
            [9; 4]
        );
    }
}
