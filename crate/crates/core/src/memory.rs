//! Per-player memory folded over the observation stream.
//!
//! Everything here is derived from the owner's own observations, so a memory
//! never knows more about a cell than the owner has been shown.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::game::{Direction, Move, Observation, Player, Pos, Split};

/// Moves remembered per side.
pub const MOVE_HISTORY: usize = 7;

/// revealed castle, revealed general, revealed mountain, explored, opponent seen,
/// then own and opponent move histories.
pub const MEMORY_PLANES: usize = 5 + 2 * MOVE_HISTORY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Structure {
    #[default]
    None,
    Castle,
    General,
    Mountain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    height: usize,
    width: usize,
    player: Player,
    revealed: Vec<Structure>,
    explored: Vec<bool>,
    opponent_seen: Vec<bool>,
    own_moves: VecDeque<Move>,
    opponent_moves: VecDeque<Move>,
    last: Option<Observation>,
}

impl MemoryState {
    /// Empty memory; fold the first observation in with [`MemoryState::observe`].
    pub fn empty(height: usize, width: usize, player: Player) -> Self {
        let n = height * width;
        MemoryState {
            height,
            width,
            player,
            revealed: vec![Structure::None; n],
            explored: vec![false; n],
            opponent_seen: vec![false; n],
            own_moves: VecDeque::with_capacity(MOVE_HISTORY),
            opponent_moves: VecDeque::with_capacity(MOVE_HISTORY),
            last: None,
        }
    }

    /// Memory seeded with the initial observation of an episode.
    pub fn new(initial: &Observation) -> Self {
        let mut mem = MemoryState::empty(initial.height, initial.width, initial.player);
        mem.observe(initial);
        mem
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn revealed(&self) -> &[Structure] {
        &self.revealed
    }

    pub fn explored(&self) -> &[bool] {
        &self.explored
    }

    pub fn opponent_seen(&self) -> &[bool] {
        &self.opponent_seen
    }

    /// Most recent first.
    pub fn own_moves(&self) -> impl Iterator<Item = &Move> {
        self.own_moves.iter().rev()
    }

    /// Most recent first.
    pub fn opponent_moves(&self) -> impl Iterator<Item = &Move> {
        self.opponent_moves.iter().rev()
    }

    /// Position of the enemy general if it has ever been seen.
    pub fn enemy_general(&self) -> Option<Pos> {
        self.revealed
            .iter()
            .position(|s| *s == Structure::General)
            .map(|i| Pos::new(i / self.width, i % self.width))
    }

    /// Record `own_move` (the move this player issued for the half-turn that
    /// produced `obs`) and fold `obs` in.
    pub fn update(&mut self, obs: &Observation, own_move: Move) {
        push_bounded(&mut self.own_moves, own_move);
        if let Some(prev) = self.last.take() {
            if obs.tick == prev.tick + 1 {
                let exclude = match own_move {
                    Move::Step { source, direction, .. } => source.step(direction, self.height, self.width),
                    Move::Pass => None,
                };
                if let Some(mv) = infer_opponent_move(&prev, obs, exclude) {
                    push_bounded(&mut self.opponent_moves, mv);
                }
            }
        }
        self.observe(obs);
    }

    /// Fold an observation in without recording any move.
    pub fn observe(&mut self, obs: &Observation) {
        debug_assert_eq!(obs.player, self.player);
        let (h, w) = (self.height, self.width);
        for i in 0..h * w {
            if obs.fog[i] {
                continue;
            }
            self.explored[i] = true;
            // own territory is always in the live observation
            if self.revealed[i] == Structure::None && !obs.owned_by_self[i] {
                self.revealed[i] = if obs.visible_mountain[i] {
                    Structure::Mountain
                } else if obs.visible_general[i] {
                    Structure::General
                } else if obs.visible_castle[i] {
                    Structure::Castle
                } else {
                    Structure::None
                };
            }
            if obs.owned_by_opponent[i] {
                let (row, col) = (i / w, i % w);
                for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                    for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                        self.opponent_seen[r * w + c] = true;
                    }
                }
            }
        }
        self.last = Some(obs.clone());
    }

    /// `MEMORY_PLANES` row-major planes of `height * width` values each.
    pub fn planes(&self) -> Vec<f32> {
        let n = self.height * self.width;
        let mut out = vec![0f32; MEMORY_PLANES * n];
        for i in 0..n {
            match self.revealed[i] {
                Structure::Castle => out[i] = 1.0,
                Structure::General => out[n + i] = 1.0,
                Structure::Mountain => out[2 * n + i] = 1.0,
                Structure::None => {}
            }
            out[3 * n + i] = f32::from(u8::from(self.explored[i]));
            out[4 * n + i] = f32::from(u8::from(self.opponent_seen[i]));
        }
        let histories = [&self.own_moves, &self.opponent_moves];
        for (side, history) in histories.into_iter().enumerate() {
            for (slot, mv) in history.iter().rev().enumerate() {
                if let Move::Step { source, direction, .. } = mv {
                    if source.row < self.height && source.col < self.width {
                        let plane = 5 + side * MOVE_HISTORY + slot;
                        out[plane * n + source.row * self.width + source.col] = direction.index() as f32 + 1.0;
                    }
                }
            }
        }
        out
    }
}

fn push_bounded(buf: &mut VecDeque<Move>, mv: Move) {
    if buf.len() == MOVE_HISTORY {
        buf.pop_front();
    }
    buf.push_back(mv);
}

/// Guess the opponent's move from two consecutive observations: the visible
/// opponent cell with the largest army drop that borders a visible opponent
/// gain (new capture or larger stack).
fn infer_opponent_move(prev: &Observation, cur: &Observation, exclude: Option<Pos>) -> Option<Move> {
    let (h, w) = (cur.height, cur.width);
    let mut best: Option<(u32, Move)> = None;
    for i in 0..h * w {
        let seen = !prev.fog[i] && !cur.fog[i];
        if !seen || !prev.owned_by_opponent[i] || !cur.owned_by_opponent[i] {
            continue;
        }
        let (before, after) = (prev.visible_army[i], cur.visible_army[i]);
        if after >= before {
            continue;
        }
        let source = Pos::new(i / w, i % w);
        if Some(source) == exclude {
            continue;
        }
        for direction in Direction::ALL {
            let Some(dest) = source.step(direction, h, w) else { continue };
            let j = dest.row * w + dest.col;
            if prev.fog[j] || cur.fog[j] || !cur.owned_by_opponent[j] {
                continue;
            }
            let gained = !prev.owned_by_opponent[j] || cur.visible_army[j] > prev.visible_army[j];
            if !gained {
                continue;
            }
            let drop = before - after;
            let split = if after <= 1 { Split::All } else { Split::Half };
            if best.is_none_or(|(d, _)| drop > d) {
                best = Some((drop, Move::Step { source, direction, split }));
            }
            break;
        }
    }
    best.map(|(_, mv)| mv)
}
