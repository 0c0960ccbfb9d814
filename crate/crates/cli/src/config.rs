use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gprn_core::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Run configuration file. Every block is optional; command-line flags
/// take precedence over values found here.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: OutputBlock,
    /// Passed through to the filter config parser (`rules`, `stopword_files`, ...).
    pub filter: Option<toml::Table>,
    pub gate: GateBlock,
    pub dedup: DedupBlock,
    pub mix: MixBlock,
    pub pack: PackBlock,
    pub index: IndexBlock,
    pub contam: ContamBlock,
    pub poison: PoisonBlock,
    pub game: GameBlock,
    pub pipeline: PipelineBlock,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub shard_limit: Option<usize>,
    pub gzip: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateBlock {
    pub scorer: Option<String>,
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupBlock {
    pub splits: Option<usize>,
    pub shingle_size: Option<usize>,
    pub verify_threshold: Option<f64>,
    pub single_stage: Option<bool>,
    pub carry_member_bands: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixBlock {
    pub schedule: Option<PathBuf>,
    pub scale: Option<f64>,
    pub sources: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackBlock {
    pub seq_len: Option<usize>,
    pub group_size: Option<usize>,
    pub buffer_size: Option<usize>,
    pub tokenizer: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexBlock {
    pub byte_mode: Option<bool>,
    pub lowercase: Option<bool>,
    pub strip_punctuation: Option<bool>,
    pub min_query_tokens: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContamBlock {
    pub question_answer: Option<bool>,
    pub generic_doc_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoisonBlock {
    pub total_tokens: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameBlock {
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub p: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineBlock {
    pub input: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolves a path from the config file relative to its directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn filter_config(&self) -> Result<gprn_core::filtering::FilterConfig> {
        match &self.filter {
            None => Ok(Default::default()),
            Some(table) => {
                let text = toml::to_string(table).map_err(|e| Error::config(e.to_string()))?;
                gprn_core::filtering::FilterConfig::from_toml(&text, &self.base_dir)
            }
        }
    }
}
