//! Run configuration: JSON config files plus command-line overrides
//! (flags win). Every config struct rejects unknown keys so that typos
//! fail fast instead of silently running with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simplexcode::{Error, Result, TrainConfig};

/// Which exact solver a certification campaign exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyMetric {
    L1,
    L0,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    /// Landmarks per instance.
    pub m: usize,
    /// Ambient dimension (2 or 3).
    pub d: usize,
    /// Number of random landmark sets.
    pub instances: usize,
    /// Cell-interior query points per instance.
    pub points_per_instance: usize,
    /// Minimum barycentric coordinate of sampled interior points.
    pub min_barycentric: f64,
    pub metric: CertifyMetric,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            m: 12,
            d: 2,
            instances: 100,
            points_per_instance: 20,
            min_barycentric: 1e-3,
            metric: CertifyMetric::L1,
            seed: 0,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.d) {
            return Err(Error::Parse(format!("d must be 2 or 3, got {}", self.d)));
        }
        if self.m < self.d + 2 {
            return Err(Error::Parse(format!(
                "need m >= d+2 landmarks, got m={}, d={}",
                self.m, self.d
            )));
        }
        if self.instances == 0 || self.points_per_instance == 0 {
            return Err(Error::Parse("instances and points_per_instance must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.min_barycentric) {
            return Err(Error::Parse(format!(
                "min_barycentric must be in [0, 1), got {}",
                self.min_barycentric
            )));
        }
        Ok(())
    }
}

/// Dataset source: a named generator or files on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// circle | two-moons | delaunay-model | csv | idx
    pub generator: String,
    pub n: usize,
    pub sigma: f64,
    /// Landmark count for the delaunay-model generator.
    pub landmarks: usize,
    /// Ambient dimension for the delaunay-model generator.
    pub d: usize,
    /// Digits to keep from an IDX source.
    pub digits: Vec<u8>,
    /// Images per digit from an IDX source.
    pub per_digit: usize,
    pub images_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    /// Point matrix for the csv source (one point per row).
    pub points_path: Option<PathBuf>,
    /// Optional integer labels for the csv source (one per line).
    pub labels_csv: Option<PathBuf>,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            generator: "two-moons".into(),
            n: 1000,
            sigma: 0.05,
            landmarks: 10,
            d: 2,
            digits: vec![0, 3, 4, 6, 7],
            per_digit: 200,
            images_path: None,
            labels_path: None,
            points_path: None,
            labels_csv: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterCmdConfig {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    /// Number of clusters.
    pub k: usize,
    /// Seed for k-means (spectral and baseline).
    pub kmeans_seed: u64,
    /// Treat a disconnected similarity graph as fatal.
    pub fatal_degenerate: bool,
}

impl Default for ClusterCmdConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            k: 2,
            kmeans_seed: 0,
            fatal_degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenCmdConfig {
    pub dataset: DatasetConfig,
}

pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

/// Parse a comma-separated digit list ("0,3,4").
pub fn parse_digits(s: &str) -> Result<Vec<u8>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u8>()
                .map_err(|e| Error::Parse(format!("bad digit {t:?}: {e}")))
        })
        .collect()
}
