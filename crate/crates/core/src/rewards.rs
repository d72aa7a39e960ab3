//! Sparse win/lose rewards and potential-based shaping.
//!
//! The potential of a state is a weighted sum of clamped log-ratios of land,
//! army and castle counts, normalised to `[-1, 1]`. Shaping adds
//! `gamma * phi(next) - phi(prev)` to the sparse reward, with the potential of
//! a terminal state fixed at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GridState, Player};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingWeights {
    pub land: f64,
    pub army: f64,
    pub castle: f64,
}

impl Default for ShapingWeights {
    fn default() -> Self {
        ShapingWeights { land: 0.3, army: 0.3, castle: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    pub gamma: f64,
    pub max_ratio: f64,
    pub weights: ShapingWeights,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig { gamma: 0.99, max_ratio: 10.0, weights: ShapingWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapingConfigError {
    #[error("gamma must lie in (0, 1], got {0}")]
    Gamma(f64),
    #[error("max_ratio must exceed 1, got {0}")]
    MaxRatio(f64),
    #[error("weights must sum to 1, got {0}")]
    Weights(f64),
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<(), ShapingConfigError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ShapingConfigError::Gamma(self.gamma));
        }
        if !(self.max_ratio > 1.0) {
            return Err(ShapingConfigError::MaxRatio(self.max_ratio));
        }
        let w = self.weights;
        let sum = w.land + w.army + w.castle;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ShapingConfigError::Weights(sum));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum RewardMode {
    #[default]
    Sparse,
    Shaped(ShapingConfig),
}


/// Material counts of one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Material {
    pub land: u64,
    pub army: u64,
    /// Castles only; the general is not counted.
    pub castles: u64,
}

/// Inputs to the potential, seen from `agent`'s side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PotentialInputs {
    pub agent: Material,
    pub enemy: Material,
}

impl PotentialInputs {
    /// Privileged extraction from the full state.
    pub fn from_state(state: &GridState, player: Player) -> Self {
        let counters = state.counters();
        let side = |p: Player| Material {
            land: u64::from(counters.land[p.index()]),
            army: counters.army[p.index()],
            castles: u64::from(counters.castles[p.index()]),
        };
        PotentialInputs { agent: side(player), enemy: side(player.opponent()) }
    }

    pub fn swapped(self) -> Self {
        PotentialInputs { agent: self.enemy, enemy: self.agent }
    }
}

// ln a - ln e rather than ln(a / e): swapping the sides then negates the
// result exactly
fn log_ratio_term(agent: f64, enemy: f64, log_max: f64) -> f64 {
    (agent.ln() - enemy.ln()).clamp(-log_max, log_max) / log_max
}

/// Potential of a non-terminal state.
///
/// Castle counts are add-one smoothed; land and army are floored at 1 so a
/// general knocked down to zero in a tie still gives a finite ratio.
pub fn potential(inputs: &PotentialInputs, cfg: &ShapingConfig) -> f64 {
    let log_max = cfg.max_ratio.ln();
    let PotentialInputs { agent, enemy } = inputs;
    let floor1 = |x: u64| x.max(1) as f64;
    let land = log_ratio_term(floor1(agent.land), floor1(enemy.land), log_max);
    let army = log_ratio_term(floor1(agent.army), floor1(enemy.army), log_max);
    let castle = log_ratio_term(agent.castles as f64 + 1.0, enemy.castles as f64 + 1.0, log_max);
    cfg.weights.land * land + cfg.weights.army * army + cfg.weights.castle * castle
}

/// `r_original + gamma * phi(next) - phi(prev)`; a `None` successor is terminal
/// and has potential zero.
pub fn shaped_reward(
    prev: &PotentialInputs,
    next: Option<&PotentialInputs>,
    r_original: f64,
    cfg: &ShapingConfig,
) -> f64 {
    let next_phi = next.map_or(0.0, |n| potential(n, cfg));
    shaping_term(potential(prev, cfg), next_phi, r_original, cfg.gamma)
}

pub fn shaping_term(prev_phi: f64, next_phi: f64, r_original: f64, gamma: f64) -> f64 {
    r_original + gamma * next_phi - prev_phi
}

/// +1 to the winner, -1 to the loser, 0 otherwise.
pub fn sparse_reward(winner: Option<Player>, player: Player) -> f64 {
    match winner {
        Some(w) if w == player => 1.0,
        Some(_) => -1.0,
        None => 0.0,
    }
}
