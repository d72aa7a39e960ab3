//! Run configuration file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use generals_core::arena::AgentKind;
use generals_core::env::{EnvConfig, MapSource};
use generals_core::mapgen::MapSpec;
use serde::{Deserialize, Serialize};

/// Everything a run needs, read from TOML (or JSON by extension).
///
/// ```toml
/// seed = 7
/// agents = ["expander", "random"]
/// games = 100
///
/// [env]
/// truncation_ticks = 2000
/// [env.map.procedural]
/// height = 24
/// width = 24
/// [env.reward.shaped]
/// gamma = 0.99
///
/// [elo]
/// anchor = "random"
/// rating = 1500.0
///
/// [output]
/// dir = "runs/demo"
/// replays = true
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub agents: Vec<AgentKind>,
    pub games: usize,
    pub elo: Option<EloAnchor>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EloAnchor {
    pub anchor: AgentKind,
    #[serde(default = "default_rating")]
    pub rating: f64,
}

fn default_rating() -> f64 {
    1500.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub replays: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            env: EnvConfig::default(),
            agents: vec![AgentKind::Expander, AgentKind::Random],
            games: 100,
            elo: None,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.env.validate()?;
        if self.games == 0 {
            bail!("games must be at least 1");
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].contains(a) {
                bail!("agent {a} listed twice");
            }
        }
        if let Some(elo) = &self.elo {
            if !self.agents.contains(&elo.anchor) {
                bail!("elo anchor {} is not among the agents", elo.anchor);
            }
            if !elo.rating.is_finite() {
                bail!("elo anchor rating must be finite");
            }
        }
        Ok(())
    }

    pub fn map_spec(&self) -> MapSpec {
        match &self.env.map {
            MapSource::Procedural(spec) => spec.clone(),
            _ => MapSpec::default(),
        }
    }
}
