//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ClassicalAnalytic,
    ClassicalMc,
    Quantum,
    Oracle,
    Bounds,
    Optimize,
    Witness,
    Divisibility,
    Ingest,
}

/// Engine used by the divisibility mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantumEngine {
    Quantum,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InterferometerSpec {
    Ftm { size: usize },
    /// Matrix in the `rows cols` text format; relative paths resolve against
    /// the config file's directory.
    File { path: PathBuf },
    DirectSum { blocks: Vec<InterferometerSpec> },
    /// Haar-random unitary.
    Random { size: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllKeyword {
    All,
}

/// `"all"` or a list of 0-based output indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detectors {
    All(AllKeyword),
    List(Vec<usize>),
}

impl Default for Detectors {
    fn default() -> Self {
        Detectors::All(AllKeyword::All)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default = "default_m_min")]
    pub m_min: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Source count for the classical bound; `M` itself when absent.
    #[serde(default)]
    pub sources: Option<usize>,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self { m_min: default_m_min(), m_max: default_m_max(), eta: default_eta(), sources: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    pub sources: usize,
    pub detectors: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessTest {
    Nonclassicality,
    Divisibility,
}

/// A Ḡ value obtained elsewhere, to be judged against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSpec {
    pub gbar: f64,
    #[serde(default)]
    pub stderr: Option<f64>,
    #[serde(default = "default_test")]
    pub test: WitnessTest,
    /// Nonclassicality: sources and detectors.
    #[serde(default)]
    pub sources: Option<usize>,
    #[serde(default)]
    pub detectors: Option<usize>,
    /// Divisibility: mode count and η.
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSpec {
    pub records: PathBuf,
    /// Number of sources for the classical bound; the most conservative
    /// bound `1 − 1/M` is used when absent.
    #[serde(default)]
    pub sources: Option<usize>,
}

/// One run, as read from the config file. Fields a mode does not use are
/// ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub interferometer: Option<InterferometerSpec>,
    /// Per-port source specs; each entry may carry `repeat = k`.
    #[serde(default)]
    pub sources: Vec<toml::Table>,
    #[serde(default)]
    pub detectors: Detectors,
    #[serde(default)]
    pub overlap: Option<PathBuf>,
    #[serde(default = "default_energy_scale")]
    pub energy_scale: f64,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
    #[serde(default = "default_engine")]
    pub engine: QuantumEngine,
    #[serde(default = "default_oracle_limit")]
    pub oracle_limit: usize,
    /// Tab-separated plot data.
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub optimize: Option<OptimizeSpec>,
    #[serde(default)]
    pub witness: Option<WitnessSpec>,
    #[serde(default)]
    pub ingest: Option<IngestSpec>,
}

fn default_m_min() -> usize {
    2
}
fn default_m_max() -> usize {
    10
}
fn default_eta() -> f64 {
    1.0
}
fn default_max_iterations() -> usize {
    200_000
}
fn default_test() -> WitnessTest {
    WitnessTest::Nonclassicality
}
fn default_energy_scale() -> f64 {
    1.0
}
fn default_shots() -> usize {
    100_000
}
fn default_restarts() -> usize {
    20
}
fn default_sigmas() -> f64 {
    multiport::bounds::DEFAULT_SIGMAS
}
fn default_engine() -> QuantumEngine {
    QuantumEngine::Quantum
}
fn default_oracle_limit() -> usize {
    multiport::quantum::DEFAULT_ORACLE_LIMIT
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Per-port entries with `repeat` expanded, parsed as `T`.
    pub fn expand_sources<T: serde::de::DeserializeOwned + Clone>(&self) -> Result<Vec<T>, CliError> {
        let mut out = Vec::new();
        for (k, entry) in self.sources.iter().enumerate() {
            let mut entry = entry.clone();
            let repeat = match entry.remove("repeat") {
                None => 1,
                Some(toml::Value::Integer(r)) if r >= 1 => r as usize,
                Some(other) => {
                    return Err(CliError::Config(format!("sources[{k}]: repeat must be a positive integer, got {other}")))
                }
            };
            let spec: T = toml::Value::Table(entry)
                .try_into()
                .map_err(|e| CliError::Config(format!("sources[{k}]: {e}")))?;
            out.extend(std::iter::repeat_n(spec, repeat));
        }
        Ok(out)
    }
}
