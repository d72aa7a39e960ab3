//! Two-seat environment over the rules engine: reset/step lifecycle, action
//! vectors, the 9-way policy-head layout, tensor observations and batched
//! stepping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Direction, GridState, HalfTurnEvents, Move, Observation, Player, Pos, RulesConfig, Split};
use crate::mapgen::{generate, parse_map_text, GridLayout, MapError, MapSpec, ParseError};
use crate::memory::{MemoryState, MEMORY_PLANES};
use crate::rewards::{potential, shaping_term, sparse_reward, PotentialInputs, RewardMode};

/// Default episode length in half-turns.
pub const DEFAULT_TRUNCATION_TICKS: u32 = 2000;

/// Observation planes before any memory planes are appended.
pub const BASE_PLANES: usize = 15;

/// Divisor for the tick plane.
pub const TICK_NORMALIZER: f32 = 2000.0;

/// Actions per cell in the policy head: pass, then (direction, split) pairs.
pub const HEAD_ACTIONS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    /// Generated from the spec with the reset seed.
    Procedural(MapSpec),
    Layout(GridLayout),
    Text(String),
}

impl Default for MapSource {
    fn default() -> Self {
        MapSource::Procedural(MapSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub map: MapSource,
    pub rules: RulesConfig,
    pub truncation_ticks: u32,
    pub reward: RewardMode,
    pub include_memory_planes: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            map: MapSource::default(),
            rules: RulesConfig::default(),
            truncation_ticks: DEFAULT_TRUNCATION_TICKS,
            reward: RewardMode::Sparse,
            include_memory_planes: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.truncation_ticks == 0 {
            return Err(EnvError::Config("truncation_ticks must be at least 1".into()));
        }
        self.rules.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        if let RewardMode::Shaped(cfg) = &self.reward {
            cfg.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        }
        if let MapSource::Procedural(spec) = &self.map {
            spec.check()?;
        }
        Ok(())
    }

    /// Resolve the map source for `seed`.
    pub fn layout(&self, seed: u64) -> Result<GridLayout, EnvError> {
        Ok(match &self.map {
            MapSource::Procedural(spec) => generate(spec, seed)?,
            MapSource::Layout(layout) => layout.clone(),
            MapSource::Text(text) => parse_map_text(text)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("map text: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid env config: {0}")]
    Config(String),
    #[error("step called before reset")]
    NotReset,
    #[error("step called on a finished episode")]
    StepAfterDone,
}

/// `[pass, i, j, direction, split]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ActionVector(pub [i64; 5]);

impl ActionVector {
    pub const PASS: ActionVector = ActionVector([1, 0, 0, 0, 0]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("pass flag {0} is not 0 or 1")]
    PassFlag(i64),
    #[error("negative coordinate")]
    Coordinate,
    #[error("direction {0} is not in 0..4")]
    Direction(i64),
    #[error("split flag {0} is not 0 or 1")]
    SplitFlag(i64),
}

pub fn try_decode_action(v: ActionVector) -> Result<Move, ActionError> {
    let [pass, i, j, dir, split] = v.0;
    match pass {
        1 => return Ok(Move::Pass),
        0 => {}
        other => return Err(ActionError::PassFlag(other)),
    }
    let (Ok(row), Ok(col)) = (usize::try_from(i), usize::try_from(j)) else {
        return Err(ActionError::Coordinate);
    };
    let direction = usize::try_from(dir)
        .ok()
        .and_then(Direction::from_index)
        .ok_or(ActionError::Direction(dir))?;
    let split = match split {
        0 => Split::All,
        1 => Split::Half,
        other => return Err(ActionError::SplitFlag(other)),
    };
    Ok(Move::Step { source: Pos::new(row, col), direction, split })
}

/// Out-of-range components decode to a pass.
pub fn decode_action(v: ActionVector) -> Move {
    try_decode_action(v).unwrap_or_else(|e| {
        log::debug!("malformed action {:?}: {e}; treating as pass", v.0);
        Move::Pass
    })
}

pub fn encode_action(mv: &Move) -> ActionVector {
    match *mv {
        Move::Pass => ActionVector::PASS,
        Move::Step { source, direction, split } => ActionVector([
            0,
            source.row as i64,
            source.col as i64,
            direction.index() as i64,
            match split {
                Split::All => 0,
                Split::Half => 1,
            },
        ]),
    }
}

/// Flat index of `(i, j, k)` in an `H x W x 9` head.
pub fn head_index(i: usize, j: usize, k: usize, _height: usize, width: usize) -> usize {
    (i * width + j) * HEAD_ACTIONS + k
}

pub fn head_coords(flat: usize, _height: usize, width: usize) -> (usize, usize, usize) {
    let cell = flat / HEAD_ACTIONS;
    (cell / width, cell % width, flat % HEAD_ACTIONS)
}

/// `k = 0` is a pass (cell kept in the vector); `k = 1..=8` selects direction
/// `(k - 1) / 2` and split `(k - 1) % 2`.
pub fn index_to_action(flat: usize, height: usize, width: usize) -> ActionVector {
    let (i, j, k) = head_coords(flat, height, width);
    if k == 0 {
        return ActionVector([1, i as i64, j as i64, 0, 0]);
    }
    let direction = ((k - 1) / 2) as i64;
    let split = ((k - 1) % 2) as i64;
    ActionVector([0, i as i64, j as i64, direction, split])
}

/// Canonical head index of an action: every pass maps to index 0.
pub fn action_to_index(v: ActionVector, height: usize, width: usize) -> Option<usize> {
    match try_decode_action(v).ok()? {
        Move::Pass => Some(0),
        Move::Step { source, direction, split } => {
            if source.row >= height || source.col >= width {
                return None;
            }
            let k = 1 + 2 * direction.index() + usize::from(split == Split::Half);
            Some(head_index(source.row, source.col, k, height, width))
        }
    }
}

/// `channels x height x width`, row-major per plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ObservationTensor {
    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn at(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.height + row) * self.width + col]
    }
}

/// Channel order of the base planes.
pub mod channel {
    pub const ARMY: usize = 0;
    pub const OWNED_SELF: usize = 1;
    pub const OWNED_OPPONENT: usize = 2;
    pub const NEUTRAL: usize = 3;
    pub const MOUNTAIN: usize = 4;
    pub const CASTLE: usize = 5;
    pub const GENERAL: usize = 6;
    pub const FOG: usize = 7;
    pub const OWN_LAND: usize = 8;
    pub const OPP_LAND: usize = 9;
    pub const OWN_ARMY: usize = 10;
    pub const OPP_ARMY: usize = 11;
    pub const TICKS_TO_LAND_BONUS: usize = 12;
    pub const PRIORITY: usize = 13;
    pub const TICK: usize = 14;
}

/// Lift an observation (and optionally memory) into feature planes.
///
/// Army values are `ln(1 + army)`, both on the grid and for the scoreboard
/// totals; land counts are divided by `H * W`; the land-bonus countdown by
/// its period; the tick by [`TICK_NORMALIZER`].
pub fn to_tensor(obs: &Observation, memory: Option<&MemoryState>) -> ObservationTensor {
    let n = obs.height * obs.width;
    let channels = BASE_PLANES + if memory.is_some() { MEMORY_PLANES } else { 0 };
    let mut data = vec![0f32; channels * n];
    let flag = |b: bool| f32::from(u8::from(b));
    {
        let (grid, scalars) = data.split_at_mut(8 * n);
        for i in 0..n {
            grid[channel::ARMY * n + i] = (obs.visible_army[i] as f32).ln_1p();
            grid[channel::OWNED_SELF * n + i] = flag(obs.owned_by_self[i]);
            grid[channel::OWNED_OPPONENT * n + i] = flag(obs.owned_by_opponent[i]);
            grid[channel::NEUTRAL * n + i] = flag(obs.neutral_visible[i]);
            grid[channel::MOUNTAIN * n + i] = flag(obs.visible_mountain[i]);
            grid[channel::CASTLE * n + i] = flag(obs.visible_castle[i]);
            grid[channel::GENERAL * n + i] = flag(obs.visible_general[i]);
            grid[channel::FOG * n + i] = flag(obs.fog[i]);
        }
        let area = n as f32;
        let values = [
            obs.own_land() as f32 / area,
            obs.opponent_land() as f32 / area,
            (obs.own_army() as f32).ln_1p(),
            (obs.opponent_army() as f32).ln_1p(),
            obs.ticks_to_land_bonus as f32 / obs.land_bonus_period.max(1) as f32,
            flag(obs.has_priority),
            obs.tick as f32 / TICK_NORMALIZER,
        ];
        for (k, value) in values.into_iter().enumerate() {
            scalars[k * n..(k + 1) * n].fill(value);
        }
    }
    if let Some(mem) = memory {
        data[BASE_PLANES * n..].copy_from_slice(&mem.planes());
    }
    ObservationTensor { channels, height: obs.height, width: obs.width, data }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub events: HalfTurnEvents,
    /// Actions that failed to decode and were replaced by a pass.
    pub malformed: [Option<ActionError>; 2],
    pub state_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: [Observation; 2],
    pub rewards: [f64; 2],
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct GeneralsEnv {
    config: EnvConfig,
    layout: Option<GridLayout>,
    state: Option<GridState>,
    memories: Option<[MemoryState; 2]>,
    done: bool,
}

impl GeneralsEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(GeneralsEnv { config, layout: None, state: None, memories: None, done: false })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Start a new episode. Deterministic in `(config, seed)`.
    pub fn reset(&mut self, seed: u64) -> Result<[Observation; 2], EnvError> {
        let layout = self.config.layout(seed)?;
        let state = GridState::from_layout(&layout, self.config.rules);
        let observations = Player::ALL.map(|p| state.observe(p));
        self.memories = Some([MemoryState::new(&observations[0]), MemoryState::new(&observations[1])]);
        self.layout = Some(layout);
        self.state = Some(state);
        self.done = false;
        Ok(observations)
    }

    pub fn state(&self) -> Option<&GridState> {
        self.state.as_ref()
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    pub fn memory(&self, player: Player) -> Option<&MemoryState> {
        self.memories.as_ref().map(|m| &m[player.index()])
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn observation(&self, player: Player) -> Option<Observation> {
        self.state.as_ref().map(|s| s.observe(player))
    }

    /// Tensor for `player`, with memory planes when the config asks for them.
    pub fn tensor(&self, player: Player) -> Option<ObservationTensor> {
        let obs = self.observation(player)?;
        let memory = if self.config.include_memory_planes { self.memory(player) } else { None };
        Some(to_tensor(&obs, memory))
    }

    pub fn step(&mut self, actions: [ActionVector; 2]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let (Some(state), Some(memories)) = (self.state.as_mut(), self.memories.as_mut()) else {
            return Err(EnvError::NotReset);
        };

        let decoded = actions.map(try_decode_action);
        let malformed = [decoded[0].err(), decoded[1].err()];
        let moves = decoded.map(|d| d.unwrap_or(Move::Pass));

        let prev_inputs = match self.config.reward {
            RewardMode::Shaped(_) => Some(Player::ALL.map(|p| PotentialInputs::from_state(state, p))),
            RewardMode::Sparse => None,
        };

        let events = state.apply_half_turn(moves);
        let terminated = state.is_terminal();
        let truncated = !terminated && state.tick() >= self.config.truncation_ticks;

        let mut rewards = Player::ALL.map(|p| sparse_reward(state.winner(), p));
        if let (RewardMode::Shaped(cfg), Some(prev)) = (&self.config.reward, prev_inputs) {
            for p in Player::ALL {
                let prev_phi = potential(&prev[p.index()], cfg);
                let next_phi = if terminated {
                    0.0
                } else {
                    potential(&PotentialInputs::from_state(state, p), cfg)
                };
                rewards[p.index()] = shaping_term(prev_phi, next_phi, rewards[p.index()], cfg.gamma);
            }
        }

        let observations = Player::ALL.map(|p| state.observe(p));
        for p in Player::ALL {
            memories[p.index()].update(&observations[p.index()], moves[p.index()]);
        }
        self.done = terminated || truncated;

        Ok(StepResult {
            observations,
            rewards,
            terminated,
            truncated,
            info: StepInfo { events, malformed, state_hash: state.state_hash() },
        })
    }
}

/// Step every env with its own action pair across the rayon pool.
///
/// Each env is stepped exactly as [`GeneralsEnv::step`] would; an error in
/// one env is reported in its slot and does not affect the others.
pub fn step_batch(envs: &mut [GeneralsEnv], actions: &[[ActionVector; 2]]) -> Vec<Result<StepResult, EnvError>> {
    assert_eq!(envs.len(), actions.len(), "one action pair per env");
    envs.par_iter_mut().zip(actions.par_iter()).map(|(env, a)| env.step(*a)).collect()
}
