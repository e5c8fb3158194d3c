//! Run configuration: operator constants, seed and optional graph path.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//! graph = "neck.toml"
//!
//! [deie]
//! alpha = 0.1
//! beta = 1.5
//! gamma = 1.2
//!
//! [mddc]
//! scales = [3, 6, 9, 12]
//!
//! [wpm]
//! kernel = 31
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sffnet_core::deie::DeieParams;
use sffnet_core::ldconv::LdconvConfig;
use sffnet_core::mddc::MddcConfig;
use sffnet_core::rng::DEFAULT_SEED;
use sffnet_core::wpm::WpmConfig;

pub const RUN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub deie: DeieParams,
    #[serde(default)]
    pub mddc: MddcConfig,
    #[serde(default)]
    pub wpm: WpmConfig,
    #[serde(default)]
    pub ldconv: LdconvConfig,
    /// Graph file, resolved relative to the run config's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_SCHEMA_VERSION,
            seed: DEFAULT_SEED,
            deie: DeieParams::default(),
            mddc: MddcConfig::default(),
            wpm: WpmConfig::default(),
            ldconv: LdconvConfig::default(),
            graph: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        if cfg.schema_version != RUN_SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {RUN_SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        cfg.deie.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let (Some(g), Some(dir)) = (&cfg.graph, path.parent()) {
            if g.is_relative() {
                cfg.graph = Some(dir.join(g));
            }
        }
        Ok(cfg)
    }

    /// Loads `path` if given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
