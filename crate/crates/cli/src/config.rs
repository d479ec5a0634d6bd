use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Pipeline settings shared by all subcommands. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub base_iri: Option<String>,
    pub mapping: Option<PathBuf>,
    pub shapes: Option<PathBuf>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub drop_patterns: Vec<String>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for file in [&mut config.mapping, &mut config.shapes].into_iter().flatten() {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
            if !file.exists() {
                bail!("config references missing file {}", file.display());
            }
        }
        if config.k == Some(0) {
            bail!("config: k must be at least 1");
        }
        Ok(config)
    }
}
