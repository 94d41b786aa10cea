//! Run configuration: one TOML document covering every stage.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set
//! key=value` overrides in the order given, then dedicated flags.

use std::path::{Path, PathBuf};

use mars_model::checkpoint::config_hash;
use mars_model::{BeamConfig, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Mapped reaction file read by `ingest`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Directory holding every artifact of the run.
    pub out_dir: PathBuf,
    pub split_seed: u64,
    /// Use the split column of the input when there is one.
    pub shipped_split: bool,
    /// Train on the first n buildable training records only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_train_records: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { input: None, out_dir: PathBuf::from("run"), split_seed: 0, shipped_split: true, max_train_records: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub split: SplitName,
    /// Threads decoding products in parallel.
    pub workers: usize,
    /// Evaluate the first n records of the split only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { split: SplitName::Test, workers: 1, limit: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub beam: BeamConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    /// Applies one `dotted.key=value` override; the value is parsed as a
    /// TOML value and falls back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override {assignment:?} is not key=value")))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut doc = toml::Value::try_from(&*self).expect("run config converts to TOML");
        let parts: Vec<&str> = key.trim().split('.').collect();
        let (last, parents) = parts.split_last().expect("split yields one part");
        let mut node = &mut doc;
        for p in parents {
            let table = node.as_table_mut().ok_or_else(|| CliError::Usage(format!("{key}: {p} is not a table")))?;
            node = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("{key}: parent is not a table")))?
            .insert(last.to_string(), value);
        *self = doc.try_into().map_err(|e| CliError::Usage(format!("override {key}: {e}")))?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form; stamped on every output.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.data.out_dir.join(name)
    }
}
