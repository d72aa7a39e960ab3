//! Agents, match execution and evaluation statistics.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{encode_action, ActionVector, EnvConfig, EnvError, GeneralsEnv};
use crate::game::{Direction, Move, Observation, Player, Scoreboard, Split};
use crate::mapgen::bfs_field;
use crate::memory::{MemoryState, Structure};
use crate::replay::{ReplayHeader, ReplayLog, ReplayResult};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("win-rate {0} has no finite Elo difference")]
    DegenerateRate(f64),
    #[error("comparison graph does not connect {0} to the anchor")]
    DisconnectedGraph(String),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// A policy over fogged observations.
pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Whether the agent ignores its RNG (acts by arg max).
    fn deterministic(&self) -> bool;

    fn act(&mut self, obs: &Observation, memory: Option<&MemoryState>, rng: &mut ChaCha8Rng) -> ActionVector;
}

/// Builds fresh agent instances, one per match.
pub trait AgentFactory: Sync {
    fn id(&self) -> String;
    fn build(&self) -> Box<dyn Agent>;
}

/// Built-in baseline agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    Expander,
    Pass,
}

impl AgentKind {
    pub fn parse(name: &str) -> Result<AgentKind, ArenaError> {
        match name {
            "random" => Ok(AgentKind::Random),
            "expander" => Ok(AgentKind::Expander),
            "pass" => Ok(AgentKind::Pass),
            other => Err(ArenaError::UnknownAgent(other.to_string())),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Random => "random",
            AgentKind::Expander => "expander",
            AgentKind::Pass => "pass",
        })
    }
}

impl AgentFactory for AgentKind {
    fn id(&self) -> String {
        self.to_string()
    }

    fn build(&self) -> Box<dyn Agent> {
        match self {
            AgentKind::Random => Box::new(RandomLegalAgent),
            AgentKind::Expander => Box::new(ExpanderAgent),
            AgentKind::Pass => Box::new(PassAgent),
        }
    }
}

/// Moves that pass validation given what the observation shows.
pub fn legal_moves(obs: &Observation) -> Vec<Move> {
    let mut out = Vec::new();
    for i in 0..obs.height * obs.width {
        if !obs.owned_by_self[i] || obs.visible_army[i] < 2 {
            continue;
        }
        let source = obs.pos(i);
        for direction in Direction::ALL {
            let Some(dest) = source.step(direction, obs.height, obs.width) else { continue };
            if obs.visible_mountain[obs.index(dest)] {
                continue;
            }
            for split in [Split::All, Split::Half] {
                out.push(Move::Step { source, direction, split });
            }
        }
    }
    out
}

/// Uniform over legal moves, passing one time in ten.
#[derive(Debug, Default)]
pub struct RandomLegalAgent;

impl Agent for RandomLegalAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn act(&mut self, obs: &Observation, _memory: Option<&MemoryState>, rng: &mut ChaCha8Rng) -> ActionVector {
        let moves = legal_moves(obs);
        if moves.is_empty() || rng.random_bool(0.1) {
            return ActionVector::PASS;
        }
        encode_action(moves.choose(rng).expect("non-empty"))
    }
}

/// Never moves.
#[derive(Debug, Default)]
pub struct PassAgent;

impl Agent for PassAgent {
    fn name(&self) -> &str {
        "pass"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn act(&mut self, _obs: &Observation, _memory: Option<&MemoryState>, _rng: &mut ChaCha8Rng) -> ActionVector {
        ActionVector::PASS
    }
}

/// Greedy frontier expansion plus a main army that hunts the enemy general.
///
/// Captures cheap neutral land (more eagerly just before a land bonus),
/// otherwise marches its largest stack toward the enemy general if it has
/// been seen, else toward visible enemy land, else toward unexplored ground.
#[derive(Debug, Default)]
pub struct ExpanderAgent;

impl ExpanderAgent {
    fn plan(&self, obs: &Observation, memory: Option<&MemoryState>) -> Move {
        let (h, w) = (obs.height, obs.width);
        let n = h * w;
        let known_mountain = |i: usize| {
            obs.visible_mountain[i] || memory.is_some_and(|m| m.revealed()[i] == Structure::Mountain)
        };
        let hostile_castle = |i: usize| {
            !obs.owned_by_self[i]
                && (obs.visible_castle[i] || memory.is_some_and(|m| m.revealed()[i] == Structure::Castle))
        };

        let enemy_general = (0..n)
            .find(|&i| obs.visible_general[i] && !obs.owned_by_self[i])
            .or_else(|| memory.and_then(|m| m.enemy_general()).map(|p| obs.index(p)));

        // finish the game whenever possible
        if let Some(g) = enemy_general {
            if !obs.fog[g] {
                let target = obs.pos(g);
                for direction in Direction::ALL {
                    let Some(src) = target.step(direction, h, w) else { continue };
                    let si = obs.index(src);
                    if obs.owned_by_self[si] && obs.visible_army[si] >= 2 && obs.visible_army[si] - 1 > obs.visible_army[g] {
                        return Move::Step { source: src, direction: opposite(direction), split: Split::All };
                    }
                }
            }
        }

        let main = (0..n)
            .filter(|&i| obs.owned_by_self[i])
            .max_by_key(|&i| (obs.visible_army[i], std::cmp::Reverse(i)));
        let Some(main) = main else { return Move::Pass };

        let expansion = self.best_expansion(obs, main, &hostile_castle);
        let bonus_soon = obs.ticks_to_land_bonus <= 6;
        if let Some(mv) = expansion {
            if bonus_soon || obs.tick.is_multiple_of(2) {
                return mv;
            }
        }

        if obs.visible_army[main] >= 2 {
            let targets: Vec<usize> = match enemy_general {
                Some(g) => vec![g],
                None => {
                    let enemy: Vec<usize> = (0..n).filter(|&i| obs.owned_by_opponent[i]).collect();
                    if enemy.is_empty() {
                        let unexplored = |i: usize| match memory {
                            Some(m) => !m.explored()[i],
                            None => obs.fog[i],
                        };
                        (0..n).filter(|&i| unexplored(i) && !known_mountain(i)).collect()
                    } else {
                        enemy
                    }
                }
            };
            let passable = |i: usize| !known_mountain(i) && (!hostile_castle(i) || targets.contains(&i));
            if let Some(mv) = step_toward(obs, main, &targets, passable) {
                return mv;
            }
        }

        expansion.unwrap_or(Move::Pass)
    }

    fn best_expansion(&self, obs: &Observation, main: usize, hostile_castle: &impl Fn(usize) -> bool) -> Option<Move> {
        let (h, w) = (obs.height, obs.width);
        let mut best: Option<((u8, u32, usize), Move)> = None;
        for i in 0..h * w {
            if !obs.owned_by_self[i] || obs.visible_army[i] < 2 || i == main {
                continue;
            }
            let source = obs.pos(i);
            let moved = obs.visible_army[i] - 1;
            for direction in Direction::ALL {
                let Some(dest) = source.step(direction, h, w) else { continue };
                let j = obs.index(dest);
                if obs.owned_by_self[j] || obs.visible_mountain[j] || hostile_castle(j) {
                    continue;
                }
                if moved <= obs.visible_army[j] {
                    continue;
                }
                // enemy land first, then the smallest stack that still wins
                let rank = (u8::from(!obs.owned_by_opponent[j]), obs.visible_army[i], i);
                if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                    best = Some((rank, Move::Step { source, direction, split: Split::All }));
                }
            }
        }
        best.map(|(_, mv)| mv)
    }
}

fn opposite(d: Direction) -> Direction {
    match d {
        Direction::Up => Direction::Down,
        Direction::Down => Direction::Up,
        Direction::Left => Direction::Right,
        Direction::Right => Direction::Left,
    }
}

/// One step for the stack at `from` along a shortest path to the nearest target.
fn step_toward(obs: &Observation, from: usize, targets: &[usize], passable: impl Fn(usize) -> bool) -> Option<Move> {
    let (h, w) = (obs.height, obs.width);
    let mut best: Option<(u32, usize)> = None;
    // distances from each target would be cheaper in bulk; one BFS from the
    // source is enough here
    let dist = bfs_field(h, w, obs.pos(from), |i| i == from || passable(i));
    for &t in targets {
        if let Some(d) = dist[t] {
            if d > 0 && best.is_none_or(|(bd, bt)| (d, t) < (bd, bt)) {
                best = Some((d, t));
            }
        }
    }
    let (_, target) = best?;
    let back = bfs_field(h, w, obs.pos(target), |i| i == from || passable(i));
    let source = obs.pos(from);
    let here = back[from]?;
    Direction::ALL.into_iter().find_map(|direction| {
        let next = source.step(direction, h, w)?;
        let d = back[obs.index(next)]?;
        (d + 1 == here).then_some(Move::Step { source, direction, split: Split::All })
    })
}

impl Agent for ExpanderAgent {
    fn name(&self) -> &str {
        "expander"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn act(&mut self, obs: &Observation, memory: Option<&MemoryState>, _rng: &mut ChaCha8Rng) -> ActionVector {
        encode_action(&self.plan(obs, memory))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win(Player),
    /// Truncated without a general capture.
    Draw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub players: [String; 2],
    pub outcome: Outcome,
    pub ticks: u32,
    pub scoreboard: Scoreboard,
    pub final_hash: u64,
    pub replay: Option<ReplayLog>,
}

impl MatchResult {
    pub fn winner_id(&self) -> Option<&str> {
        match self.outcome {
            Outcome::Win(p) => Some(&self.players[p.index()]),
            Outcome::Draw => None,
        }
    }
}

/// RNG stream for one seat of one match.
pub fn seat_rng(seed: u64, seat: Player) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + seat.index() as u64);
    rng
}

/// Play one match to termination or truncation. `seed` drives both the map
/// (when procedural) and the agents' RNG streams.
pub fn run_match(
    agents: [&mut dyn Agent; 2],
    config: &EnvConfig,
    seed: u64,
    record: bool,
) -> Result<MatchResult, ArenaError> {
    let [a, b] = agents;
    let players = [a.name().to_string(), b.name().to_string()];
    let mut env = GeneralsEnv::new(config.clone())?;
    let mut obs = env.reset(seed)?;
    let mut log = if record {
        let layout = env.layout().expect("reset populates layout");
        let mut header = ReplayHeader::new(layout, config.rules, players.clone(), seed, true);
        if let crate::rewards::RewardMode::Shaped(cfg) = config.reward {
            header.shaping = Some(cfg);
        }
        Some(ReplayLog::new(header))
    } else {
        None
    };
    let mut rngs = [seat_rng(seed, Player::P0), seat_rng(seed, Player::P1)];

    loop {
        let actions = [
            a.act(&obs[0], env.memory(Player::P0), &mut rngs[0]),
            b.act(&obs[1], env.memory(Player::P1), &mut rngs[1]),
        ];
        let result = env.step(actions)?;
        if let Some(log) = log.as_mut() {
            let tick = env.state().expect("reset").tick();
            log.record_step(tick, actions, Some(result.info.state_hash))
                .expect("ticks advance by one");
        }
        let done = result.done();
        obs = result.observations;
        if done {
            break;
        }
    }

    let state = env.state().expect("reset");
    let outcome = state.winner().map_or(Outcome::Draw, Outcome::Win);
    if let Some(log) = log.as_mut() {
        log.finish(ReplayResult { winner: state.winner(), ticks: state.tick(), final_hash: state.state_hash() });
    }
    Ok(MatchResult {
        players,
        outcome,
        ticks: state.tick(),
        scoreboard: state.scoreboard(),
        final_hash: state.state_hash(),
        replay: log,
    })
}

/// Result of one game of a series, from agent `a`'s point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameOutcome {
    Win,
    Loss,
    Draw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesGame {
    pub index: usize,
    pub seed: u64,
    /// Seat agent `a` played.
    pub a_seat: Player,
    pub outcome: GameOutcome,
    pub ticks: u32,
    pub final_hash: u64,
    pub replay: Option<ReplayLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub a: String,
    pub b: String,
    pub wins: u64,
    pub losses: u64,
    pub draws: u64,
    /// Draws count as half a win.
    pub rate: f64,
    pub interval: (f64, f64),
    pub games: Vec<SeriesGame>,
}

/// Map seed for the `pair`-th pair of games in a series.
pub fn pair_seed(master_seed: u64, pair: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(pair);
    rng.next_u64()
}

/// Play `n_games` between `a` and `b`. Games come in pairs on the same seed
/// with seats swapped; games run in parallel and are reduced in index order.
pub fn run_series(
    a: &dyn AgentFactory,
    b: &dyn AgentFactory,
    n_games: usize,
    config: &EnvConfig,
    master_seed: u64,
    record: bool,
) -> Result<SeriesResult, ArenaError> {
    if n_games == 0 {
        return Err(ArenaError::Invalid("a series needs at least one game".into()));
    }
    let games: Vec<SeriesGame> = (0..n_games)
        .into_par_iter()
        .map(|index| {
            let seed = pair_seed(master_seed, (index / 2) as u64);
            let a_seat = if index % 2 == 0 { Player::P0 } else { Player::P1 };
            let mut agent_a = a.build();
            let mut agent_b = b.build();
            let seats: [&mut dyn Agent; 2] = match a_seat {
                Player::P0 => [agent_a.as_mut(), agent_b.as_mut()],
                Player::P1 => [agent_b.as_mut(), agent_a.as_mut()],
            };
            let result = run_match(seats, config, seed, record)?;
            let outcome = match result.outcome {
                Outcome::Draw => GameOutcome::Draw,
                Outcome::Win(p) if p == a_seat => GameOutcome::Win,
                Outcome::Win(_) => GameOutcome::Loss,
            };
            Ok(SeriesGame {
                index,
                seed,
                a_seat,
                outcome,
                ticks: result.ticks,
                final_hash: result.final_hash,
                replay: result.replay,
            })
        })
        .collect::<Result<_, ArenaError>>()?;

    let count = |o: GameOutcome| games.iter().filter(|g| g.outcome == o).count() as u64;
    let (wins, losses, draws) = (count(GameOutcome::Win), count(GameOutcome::Loss), count(GameOutcome::Draw));
    let n = games.len() as u64;
    let rate = (wins as f64 + 0.5 * draws as f64) / n as f64;
    Ok(SeriesResult {
        a: a.id(),
        b: b.id(),
        wins,
        losses,
        draws,
        rate,
        interval: wilson_from_rate(rate, n, 1.96),
        games,
    })
}

/// Wilson score interval for `wins` successes out of `n`.
pub fn wilson_interval(wins: u64, n: u64, z: f64) -> Result<(f64, f64), ArenaError> {
    if n == 0 || wins > n {
        return Err(ArenaError::Invalid(format!("need 0 <= wins <= n and n >= 1, got {wins}/{n}")));
    }
    Ok(wilson_from_rate(wins as f64 / n as f64, n, z))
}

/// Wilson score interval around an observed rate `p` over `n` trials.
pub fn wilson_from_rate(p: f64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Expected score of a player rated `delta` points above its opponent.
pub fn expected_score(delta: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-delta / 400.0))
}

/// Rating difference implied by win-rate `p`.
pub fn elo_from_winrate(p: f64) -> Result<f64, ArenaError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ArenaError::DegenerateRate(p));
    }
    Ok(400.0 * (p / (1.0 - p)).log10())
}

/// Pairwise results between a fixed set of agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinRateMatrix {
    pub agents: Vec<String>,
    /// `wins[i][j]`: games `i` won against `j`.
    pub wins: Vec<Vec<u64>>,
    pub games: Vec<Vec<u64>>,
}

impl WinRateMatrix {
    pub fn new(agents: Vec<String>) -> Self {
        let k = agents.len();
        WinRateMatrix { agents, wins: vec![vec![0; k]; k], games: vec![vec![0; k]; k] }
    }

    pub fn index_of(&self, agent: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == agent)
    }

    /// Add `games` between `i` and `j` of which `i` won `wins_i` and `j` won `wins_j`.
    pub fn add(&mut self, i: usize, j: usize, wins_i: u64, wins_j: u64, games: u64) {
        assert!(i != j && wins_i + wins_j <= games);
        self.wins[i][j] += wins_i;
        self.wins[j][i] += wins_j;
        self.games[i][j] += games;
        self.games[j][i] += games;
    }

    pub fn draws(&self, i: usize, j: usize) -> u64 {
        self.games[i][j] - self.wins[i][j] - self.wins[j][i]
    }

    /// `i`'s score rate against `j`, draws counting half; `None` without games.
    pub fn rate(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.games[i][j];
        (n > 0).then(|| (self.wins[i][j] as f64 + 0.5 * self.draws(i, j) as f64) / n as f64)
    }

    pub fn is_consistent(&self) -> bool {
        let k = self.agents.len();
        (0..k).all(|i| {
            self.games[i][i] == 0
                && (0..k).all(|j| self.games[i][j] == self.games[j][i] && self.wins[i][j] + self.wins[j][i] <= self.games[i][j])
        })
    }
}

/// Anchored least-squares Elo fit.
///
/// Minimises the squared difference between each observed pairwise rate and
/// the logistic expected score, with `anchor` pinned at `anchor_rating`.
/// Rates of exactly 0 or 1 are pulled inward by add-half smoothing.
pub fn fit_elo(matrix: &WinRateMatrix, anchor: &str, anchor_rating: f64) -> Result<BTreeMap<String, f64>, ArenaError> {
    let k = matrix.agents.len();
    let anchor_idx = matrix.index_of(anchor).ok_or_else(|| ArenaError::UnknownAgent(anchor.to_string()))?;

    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let n = matrix.games[i][j];
            if n == 0 {
                continue;
            }
            let score = matrix.wins[i][j] as f64 + 0.5 * matrix.draws(i, j) as f64;
            let mut p = score / n as f64;
            if p <= 0.0 || p >= 1.0 {
                p = (score + 0.5) / (n as f64 + 1.0);
            }
            pairs.push((i, j, p));
        }
    }

    // connectivity from the anchor
    let mut reached = vec![false; k];
    reached[anchor_idx] = true;
    let mut stack = vec![anchor_idx];
    while let Some(u) = stack.pop() {
        for &(i, j, _) in &pairs {
            for (x, y) in [(i, j), (j, i)] {
                if x == u && !reached[y] {
                    reached[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    if let Some(lost) = (0..k).find(|&i| !reached[i]) {
        return Err(ArenaError::DisconnectedGraph(matrix.agents[lost].clone()));
    }

    // free variables are every agent but the anchor
    let var: Vec<Option<usize>> = {
        let mut next = 0;
        (0..k)
            .map(|i| {
                (i != anchor_idx).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let m = k - 1;
    let mut ratings = vec![anchor_rating; k];
    if m == 0 {
        return Ok(matrix.agents.iter().cloned().zip(ratings).collect());
    }

    // linear start: least squares on logit differences
    let rows = pairs.len();
    let mut design = DMatrix::<f64>::zeros(rows, m);
    let mut target = DVector::<f64>::zeros(rows);
    for (r, &(i, j, p)) in pairs.iter().enumerate() {
        let mut rhs = elo_from_winrate(p)?;
        for (idx, sign) in [(i, 1.0), (j, -1.0)] {
            match var[idx] {
                Some(v) => design[(r, v)] += sign,
                None => rhs -= sign * anchor_rating,
            }
        }
        target[r] = rhs;
    }
    let start = solve_normal(&design, &target, 0.0)
        .ok_or_else(|| ArenaError::Invalid("rating system is singular".into()))?;
    for i in 0..k {
        if let Some(v) = var[i] {
            ratings[i] = start[v];
        }
    }

    // Gauss-Newton on the rate residuals
    let slope = 10f64.ln() / 400.0;
    for _ in 0..100 {
        let mut jac = DMatrix::<f64>::zeros(rows, m);
        let mut resid = DVector::<f64>::zeros(rows);
        for (r, &(i, j, p)) in pairs.iter().enumerate() {
            let e = expected_score(ratings[i] - ratings[j]);
            resid[r] = p - e;
            let g = e * (1.0 - e) * slope;
            if let Some(v) = var[i] {
                jac[(r, v)] += g;
            }
            if let Some(v) = var[j] {
                jac[(r, v)] -= g;
            }
        }
        let Some(delta) = solve_normal(&jac, &resid, 1e-12) else { break };
        for i in 0..k {
            if let Some(v) = var[i] {
                ratings[i] += delta[v];
            }
        }
        if delta.amax() < 1e-9 {
            break;
        }
    }

    Ok(matrix.agents.iter().cloned().zip(ratings).collect())
}

fn solve_normal(a: &DMatrix<f64>, b: &DVector<f64>, damping: f64) -> Option<DVector<f64>> {
    let mut ata = a.transpose() * a;
    for d in 0..ata.nrows() {
        ata[(d, d)] += damping;
    }
    let atb = a.transpose() * b;
    ata.lu().solve(&atb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub size: usize,
    /// Minimum win-rate against the pool for a candidate to be admitted.
    pub gate: f64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { size: 3, gate: 0.45 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoolDecision<T> {
    Accepted { evicted: T },
    Rejected,
}

/// FIFO opponent pool gated on win-rate; oldest member first.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentPool<T> {
    config: PoolConfig,
    members: VecDeque<T>,
}

impl<T> OpponentPool<T> {
    pub fn new(config: PoolConfig, members: impl IntoIterator<Item = T>) -> Result<Self, ArenaError> {
        if config.size == 0 || !(config.gate > 0.0 && config.gate < 1.0) {
            return Err(ArenaError::Invalid("pool size must be >= 1 and gate in (0, 1)".into()));
        }
        let members: VecDeque<T> = members.into_iter().collect();
        if members.len() != config.size {
            return Err(ArenaError::Invalid(format!("pool needs {} members, got {}", config.size, members.len())));
        }
        Ok(OpponentPool { config, members })
    }

    pub fn members(&self) -> impl Iterator<Item = &T> {
        self.members.iter()
    }

    /// Admit `candidate` in place of the oldest member if `rate` clears the gate.
    pub fn update(&mut self, candidate: T, rate: f64) -> PoolDecision<T> {
        if rate < self.config.gate {
            return PoolDecision::Rejected;
        }
        let evicted = self.members.pop_front().expect("pool is never empty");
        self.members.push_back(candidate);
        PoolDecision::Accepted { evicted }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    pub games: u64,
    pub wins_a: u64,
    pub wins_b: u64,
    pub draws: u64,
    pub rate_a: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl From<&SeriesResult> for PairReport {
    fn from(s: &SeriesResult) -> Self {
        PairReport {
            a: s.a.clone(),
            b: s.b.clone(),
            games: s.games.len() as u64,
            wins_a: s.wins,
            wins_b: s.losses,
            draws: s.draws,
            rate_a: s.rate,
            ci_low: s.interval.0,
            ci_high: s.interval.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloReport {
    pub anchor: String,
    pub anchor_rating: f64,
    pub ratings: BTreeMap<String, f64>,
}

/// Versioned tournament report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentReport {
    pub format_version: u32,
    pub master_seed: u64,
    pub games_per_pair: u64,
    pub agents: Vec<String>,
    pub pairs: Vec<PairReport>,
    pub matrix: WinRateMatrix,
    pub elo: Option<EloReport>,
}

impl TournamentReport {
    /// Sorted keys, no whitespace, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut text = serde_json::to_string(&value).expect("json value serializes");
        text.push('\n');
        text
    }
}

/// Round-robin over `agents`, `games_per_pair` games per pairing.
pub fn run_tournament(
    agents: &[&dyn AgentFactory],
    games_per_pair: usize,
    config: &EnvConfig,
    master_seed: u64,
    elo_anchor: Option<(&str, f64)>,
    record: bool,
) -> Result<(TournamentReport, Vec<SeriesResult>), ArenaError> {
    let ids: Vec<String> = agents.iter().map(|a| a.id()).collect();
    let mut matrix = WinRateMatrix::new(ids.clone());
    let mut pairs = Vec::new();
    let mut series_out = Vec::new();
    let mut pair_no = 0u64;
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            let seed = pair_seed(master_seed ^ 0x7f4a_7c15_9e37_79b9, pair_no);
            pair_no += 1;
            let series = run_series(agents[i], agents[j], games_per_pair, config, seed, record)?;
            matrix.add(i, j, series.wins, series.losses, series.games.len() as u64);
            pairs.push(PairReport::from(&series));
            series_out.push(series);
        }
    }
    let elo = match elo_anchor {
        Some((anchor, rating)) => Some(EloReport {
            anchor: anchor.to_string(),
            anchor_rating: rating,
            ratings: fit_elo(&matrix, anchor, rating)?,
        }),
        None => None,
    };
    let report = TournamentReport {
        format_version: REPORT_FORMAT_VERSION,
        master_seed,
        games_per_pair: games_per_pair as u64,
        agents: ids,
        pairs,
        matrix,
        elo,
    };
    Ok((report, series_out))
}
