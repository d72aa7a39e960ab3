//! Authoritative game rules.
//!
//! [`GridState`] holds the full-information state of a 1v1 match. Moves are
//! resolved one half-turn at a time by [`GridState::apply_half_turn`]; the
//! player holding priority on a half-turn moves first and the second move is
//! validated against the state the first one left behind.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::Xxh3;

use crate::mapgen::GridLayout;

/// Half-turns that make up one full turn.
pub const HALF_TURNS_PER_TURN: u32 = 2;

/// Army every general starts the match with.
pub const INITIAL_GENERAL_ARMY: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    P0,
    P1,
}

impl Player {
    pub const ALL: [Player; 2] = [Player::P0, Player::P1];

    pub fn index(self) -> usize {
        match self {
            Player::P0 => 0,
            Player::P1 => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Player> {
        match index {
            0 => Some(Player::P0),
            1 => Some(Player::P1),
            _ => None,
        }
    }

    pub fn opponent(self) -> Player {
        match self {
            Player::P0 => Player::P1,
            Player::P1 => Player::P0,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "player{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Plain,
    Mountain,
    Castle,
    General,
}

impl CellKind {
    /// Generals and castles produce one unit per turn while owned.
    pub fn is_production(self) -> bool {
        matches!(self, CellKind::Castle | CellKind::General)
    }

    fn tag(self) -> u8 {
        match self {
            CellKind::Plain => 0,
            CellKind::Mountain => 1,
            CellKind::Castle => 2,
            CellKind::General => 3,
        }
    }
}

/// Grid coordinate, `row` is `i` and `col` is `j` in the action vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    /// Neighbour in `direction`, or `None` when it falls off a `height x width` grid.
    pub fn step(self, direction: Direction, height: usize, width: usize) -> Option<Pos> {
        let (dr, dc) = direction.delta();
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        (row < height && col < width).then_some(Pos { row, col })
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
            Direction::Left => 2,
            Direction::Right => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Direction> {
        Direction::ALL.get(index).copied()
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    /// Move all but one unit.
    All,
    /// Move `floor(army / 2)` units.
    Half,
}

impl Split {
    pub fn moved(self, army: u32) -> u32 {
        match self {
            Split::All => army.saturating_sub(1),
            Split::Half => army / 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    pub owner: Option<Player>,
    pub army: u32,
}

impl Cell {
    pub const fn plain() -> Self {
        Cell { kind: CellKind::Plain, owner: None, army: 0 }
    }

    pub const fn mountain() -> Self {
        Cell { kind: CellKind::Mountain, owner: None, army: 0 }
    }

    pub const fn castle(garrison: u32) -> Self {
        Cell { kind: CellKind::Castle, owner: None, army: garrison }
    }

    pub const fn general(owner: Player, army: u32) -> Self {
        Cell { kind: CellKind::General, owner: Some(owner), army }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesConfig {
    /// Turns between land bonuses (+1 on every owned cell).
    pub growth_interval_turns: u32,
    /// Inclusive range for neutral castle garrisons.
    pub castle_garrison_range: (u32, u32),
}

impl Default for RulesConfig {
    fn default() -> Self {
        RulesConfig { growth_interval_turns: 25, castle_garrison_range: (40, 50) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulesConfigError {
    #[error("growth_interval_turns must be at least 1")]
    ZeroGrowthInterval,
    #[error("castle garrison range is empty: {0} > {1}")]
    EmptyGarrisonRange(u32, u32),
}

impl RulesConfig {
    pub fn validate(&self) -> Result<(), RulesConfigError> {
        if self.growth_interval_turns == 0 {
            return Err(RulesConfigError::ZeroGrowthInterval);
        }
        let (lo, hi) = self.castle_garrison_range;
        if lo > hi {
            return Err(RulesConfigError::EmptyGarrisonRange(lo, hi));
        }
        Ok(())
    }

    /// Half-turns between two land bonuses.
    pub fn land_bonus_period(&self) -> u32 {
        self.growth_interval_turns * HALF_TURNS_PER_TURN
    }
}

/// A player's command for one half-turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Pass,
    Step { source: Pos, direction: Direction, split: Split },
}

impl Move {
    pub fn step(row: usize, col: usize, direction: Direction, split: Split) -> Move {
        Move::Step { source: Pos::new(row, col), direction, split }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Move::Pass)
    }
}

/// Why a move was turned into a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Error)]
pub enum Rejection {
    #[error("the game is already over")]
    GameOver,
    #[error("player has been eliminated")]
    Eliminated,
    #[error("source cell is out of bounds")]
    SourceOutOfBounds,
    #[error("source cell is not owned by the mover")]
    NotOwned,
    #[error("source cell needs at least two units")]
    InsufficientArmy,
    #[error("destination is out of bounds")]
    DestinationOutOfBounds,
    #[error("destination is a mountain")]
    Impassable,
}

/// Globally visible per-player statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Scoreboard {
    pub land: [u32; 2],
    pub army: [u64; 2],
}

/// What happened when an executed move reached its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Engagement {
    /// Destination already belonged to the mover.
    Reinforce,
    /// Destination was neutral or enemy-held; `captured` iff the attacker was strictly larger.
    Attack { defender: Option<Player>, defender_army: u32, captured: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedMove {
    pub source: Pos,
    pub destination: Pos,
    pub moved: u32,
    pub engagement: Engagement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveOutcome {
    Passed,
    Executed(ExecutedMove),
    Rejected(Rejection),
    /// The game ended earlier in the same half-turn.
    Skipped,
}

/// Change of ownership of a castle or general.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capture {
    pub pos: Pos,
    pub kind: CellKind,
    pub previous_owner: Option<Player>,
    pub by: Player,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Growth {
    /// +1 on owned generals and castles.
    pub production: bool,
    /// +1 on every owned cell.
    pub land_bonus: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfTurnEvents {
    /// Tick after the half-turn was resolved.
    pub tick: u32,
    pub priority: Player,
    pub moves: [MoveOutcome; 2],
    pub captures: Vec<Capture>,
    pub growth: Growth,
    pub winner: Option<Player>,
}

/// Result of moving units from `source` onto `dest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub source: Cell,
    pub dest: Cell,
    pub moved: u32,
    pub engagement: Engagement,
}

/// Resolve a validated move between two cells.
///
/// Friendly destinations merge. Otherwise the two forces are subtracted and
/// the attacker takes the cell only with a strictly larger force; on equal
/// forces the previous occupant (or neutral garrison) keeps the cell with 0.
pub fn resolve_movement(source: Cell, dest: Cell, split: Split) -> Resolution {
    let mover = source.owner.expect("moving from an unowned cell");
    let moved = split.moved(source.army);
    let new_source = Cell { army: source.army - moved, ..source };

    if dest.owner == Some(mover) {
        return Resolution {
            source: new_source,
            dest: Cell { army: dest.army + moved, ..dest },
            moved,
            engagement: Engagement::Reinforce,
        };
    }

    let captured = moved > dest.army;
    let new_dest = if captured {
        Cell { kind: dest.kind, owner: Some(mover), army: moved - dest.army }
    } else {
        Cell { army: dest.army - moved, ..dest }
    };
    Resolution {
        source: new_source,
        dest: new_dest,
        moved,
        engagement: Engagement::Attack { defender: dest.owner, defender_army: dest.army, captured },
    }
}

/// Full-information game state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridState {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    tick: u32,
    alive: [bool; 2],
    winner: Option<Player>,
    generals: [Pos; 2],
    config: RulesConfig,
    // incremental counters, checked against `recount`
    land: [u32; 2],
    army: [u64; 2],
    castles: [u32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub land: [u32; 2],
    pub army: [u64; 2],
    pub castles: [u32; 2],
}

impl GridState {
    /// Build the tick-0 state for a layout. Generals start owned with
    /// [`INITIAL_GENERAL_ARMY`]; castles start neutral with their garrison.
    pub fn from_layout(layout: &GridLayout, config: RulesConfig) -> GridState {
        let default_garrison = (config.castle_garrison_range.0 + config.castle_garrison_range.1) / 2;
        let mut cells: Vec<Cell> = Vec::with_capacity(layout.height * layout.width);
        for row in 0..layout.height {
            for col in 0..layout.width {
                let pos = Pos::new(row, col);
                let cell = match layout.kind(pos) {
                    CellKind::Plain => Cell::plain(),
                    CellKind::Mountain => Cell::mountain(),
                    CellKind::Castle => Cell::castle(
                        layout.castle_garrisons.get(&pos).copied().unwrap_or(default_garrison),
                    ),
                    // a general cell not listed in `generals` is treated as plain
                    CellKind::General => Cell::plain(),
                };
                cells.push(cell);
            }
        }
        for player in Player::ALL {
            let pos = layout.general_positions[player.index()];
            cells[pos.row * layout.width + pos.col] = Cell::general(player, INITIAL_GENERAL_ARMY);
        }
        let mut state = GridState {
            height: layout.height,
            width: layout.width,
            cells,
            tick: 0,
            alive: [true, true],
            winner: None,
            generals: layout.general_positions,
            config,
            land: [0; 2],
            army: [0; 2],
            castles: [0; 2],
        };
        let counters = state.recount();
        state.land = counters.land;
        state.army = counters.army;
        state.castles = counters.castles;
        state
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn tick(&self) -> u32 {
        self.tick
    }

    pub fn config(&self) -> &RulesConfig {
        &self.config
    }

    pub fn is_alive(&self, player: Player) -> bool {
        self.alive[player.index()]
    }

    pub fn winner(&self) -> Option<Player> {
        self.winner
    }

    pub fn is_terminal(&self) -> bool {
        self.winner.is_some()
    }

    pub fn general(&self, player: Player) -> Pos {
        self.generals[player.index()]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn in_bounds(&self, pos: Pos) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    #[inline]
    pub fn index(&self, pos: Pos) -> usize {
        pos.row * self.width + pos.col
    }

    #[inline]
    pub fn cell(&self, pos: Pos) -> Cell {
        self.cells[self.index(pos)]
    }

    /// Overwrite a cell, keeping the scoreboard counters in sync.
    pub fn set_cell(&mut self, pos: Pos, cell: Cell) {
        let idx = self.index(pos);
        let old = self.cells[idx];
        self.uncount(old);
        self.count(cell);
        self.cells[idx] = cell;
    }

    pub fn set_tick(&mut self, tick: u32) {
        self.tick = tick;
    }

    /// Player that resolves first on the next half-turn.
    pub fn priority(&self) -> Player {
        if self.tick.is_multiple_of(2) {
            Player::P0
        } else {
            Player::P1
        }
    }

    pub fn scoreboard(&self) -> Scoreboard {
        Scoreboard { land: self.land, army: self.army }
    }

    /// Castles owned by `player`, not counting its general.
    pub fn castles_owned(&self, player: Player) -> u32 {
        self.castles[player.index()]
    }

    pub fn counters(&self) -> Counters {
        Counters { land: self.land, army: self.army, castles: self.castles }
    }

    /// Counters recomputed from scratch.
    pub fn recount(&self) -> Counters {
        let mut c = Counters::default();
        for cell in &self.cells {
            if let Some(owner) = cell.owner {
                let p = owner.index();
                c.land[p] += 1;
                c.army[p] += u64::from(cell.army);
                if cell.kind == CellKind::Castle {
                    c.castles[p] += 1;
                }
            }
        }
        c
    }

    /// Total army over every cell, neutral garrisons included.
    pub fn total_army(&self) -> u64 {
        self.cells.iter().map(|c| u64::from(c.army)).sum()
    }

    fn count(&mut self, cell: Cell) {
        if let Some(owner) = cell.owner {
            let p = owner.index();
            self.land[p] += 1;
            self.army[p] += u64::from(cell.army);
            if cell.kind == CellKind::Castle {
                self.castles[p] += 1;
            }
        }
    }

    fn uncount(&mut self, cell: Cell) {
        if let Some(owner) = cell.owner {
            let p = owner.index();
            self.land[p] -= 1;
            self.army[p] -= u64::from(cell.army);
            if cell.kind == CellKind::Castle {
                self.castles[p] -= 1;
            }
        }
    }

    pub fn validate_move(&self, player: Player, mv: &Move) -> Result<(), Rejection> {
        if self.winner.is_some() {
            return Err(Rejection::GameOver);
        }
        if !self.is_alive(player) {
            return Err(Rejection::Eliminated);
        }
        let (source, direction) = match *mv {
            Move::Pass => return Ok(()),
            Move::Step { source, direction, .. } => (source, direction),
        };
        if !self.in_bounds(source) {
            return Err(Rejection::SourceOutOfBounds);
        }
        let cell = self.cell(source);
        if cell.owner != Some(player) {
            return Err(Rejection::NotOwned);
        }
        if cell.army < 2 {
            return Err(Rejection::InsufficientArmy);
        }
        let dest = source
            .step(direction, self.height, self.width)
            .ok_or(Rejection::DestinationOutOfBounds)?;
        if self.cell(dest).kind == CellKind::Mountain {
            return Err(Rejection::Impassable);
        }
        Ok(())
    }

    /// Resolve one half-turn in place.
    ///
    /// Moves execute in priority order, each validated against the state left
    /// by the previous one; invalid moves become passes. A general capture
    /// ends the game immediately: later moves are skipped and no growth runs.
    pub fn apply_half_turn(&mut self, moves: [Move; 2]) -> HalfTurnEvents {
        let priority = self.priority();
        let mut outcomes = [MoveOutcome::Passed; 2];
        let mut captures = Vec::new();

        if self.winner.is_some() {
            return HalfTurnEvents {
                tick: self.tick,
                priority,
                moves: [MoveOutcome::Rejected(Rejection::GameOver); 2],
                captures,
                growth: Growth::default(),
                winner: self.winner,
            };
        }

        for player in [priority, priority.opponent()] {
            let p = player.index();
            if self.winner.is_some() {
                outcomes[p] = MoveOutcome::Skipped;
                continue;
            }
            let mv = moves[p];
            outcomes[p] = match self.validate_move(player, &mv) {
                Err(reason) => MoveOutcome::Rejected(reason),
                Ok(()) => match mv {
                    Move::Pass => MoveOutcome::Passed,
                    Move::Step { source, direction, split } => {
                        MoveOutcome::Executed(self.execute(player, source, direction, split, &mut captures))
                    }
                },
            };
        }

        self.tick += 1;
        let growth = if self.winner.is_none() { self.apply_growth() } else { Growth::default() };

        HalfTurnEvents { tick: self.tick, priority, moves: outcomes, captures, growth, winner: self.winner }
    }

    /// Clone-and-step form of [`GridState::apply_half_turn`].
    pub fn stepped(&self, moves: [Move; 2]) -> (GridState, HalfTurnEvents) {
        let mut next = self.clone();
        let events = next.apply_half_turn(moves);
        (next, events)
    }

    fn execute(
        &mut self,
        player: Player,
        source: Pos,
        direction: Direction,
        split: Split,
        captures: &mut Vec<Capture>,
    ) -> ExecutedMove {
        let destination = source
            .step(direction, self.height, self.width)
            .expect("validated destination");
        let src_cell = self.cell(source);
        let dst_cell = self.cell(destination);
        let res = resolve_movement(src_cell, dst_cell, split);
        self.set_cell(source, res.source);
        self.set_cell(destination, res.dest);

        if let Engagement::Attack { defender, captured: true, .. } = res.engagement {
            if dst_cell.kind.is_production() {
                captures.push(Capture { pos: destination, kind: dst_cell.kind, previous_owner: defender, by: player });
            }
            if dst_cell.kind == CellKind::General {
                if let Some(loser) = defender {
                    self.alive[loser.index()] = false;
                    self.winner = self.check_terminal();
                }
            }
        }

        ExecutedMove { source, destination, moved: res.moved, engagement: res.engagement }
    }

    /// Growth for the current tick. Production runs at every full-turn
    /// boundary (even tick > 0), the land bonus every `land_bonus_period` ticks.
    pub fn apply_growth(&mut self) -> Growth {
        let production = self.tick > 0 && self.tick.is_multiple_of(HALF_TURNS_PER_TURN);
        let land_bonus = self.tick > 0 && self.tick.is_multiple_of(self.config.land_bonus_period());
        if !production {
            return Growth::default();
        }
        for cell in self.cells.iter_mut() {
            let Some(owner) = cell.owner else { continue };
            let mut gain = 0;
            if cell.kind.is_production() {
                gain += 1;
            }
            if land_bonus {
                gain += 1;
            }
            cell.army += gain;
            self.army[owner.index()] += u64::from(gain);
        }
        Growth { production, land_bonus }
    }

    /// The player holding the opponent's general, if any.
    pub fn check_terminal(&self) -> Option<Player> {
        Player::ALL.into_iter().find_map(|player| {
            let owner = self.cell(self.general(player)).owner;
            match owner {
                Some(o) if o != player => Some(o),
                _ => None,
            }
        })
    }

    /// Cells visible to `player`: owned cells and their Moore neighbourhoods.
    pub fn visibility(&self, player: Player) -> Vec<bool> {
        let (h, w) = (self.height, self.width);
        let mut visible = vec![false; h * w];
        for row in 0..h {
            for col in 0..w {
                if self.cells[row * w + col].owner != Some(player) {
                    continue;
                }
                for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                    for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                        visible[r * w + c] = true;
                    }
                }
            }
        }
        visible
    }

    pub fn observe(&self, player: Player) -> Observation {
        let n = self.height * self.width;
        let visible = self.visibility(player);
        let mut obs = Observation {
            height: self.height,
            width: self.width,
            player,
            tick: self.tick,
            has_priority: self.priority() == player,
            ticks_to_land_bonus: self.ticks_to_land_bonus(),
            land_bonus_period: self.config.land_bonus_period(),
            visible_army: vec![0; n],
            owned_by_self: vec![false; n],
            owned_by_opponent: vec![false; n],
            neutral_visible: vec![false; n],
            visible_mountain: vec![false; n],
            visible_castle: vec![false; n],
            visible_general: vec![false; n],
            fog: vec![true; n],
            scoreboard: self.scoreboard(),
        };
        for (i, cell) in self.cells.iter().enumerate() {
            if !visible[i] {
                continue;
            }
            obs.fog[i] = false;
            obs.visible_army[i] = cell.army;
            match cell.owner {
                Some(o) if o == player => obs.owned_by_self[i] = true,
                Some(_) => obs.owned_by_opponent[i] = true,
                None => obs.neutral_visible[i] = cell.kind != CellKind::Mountain,
            }
            match cell.kind {
                CellKind::Mountain => obs.visible_mountain[i] = true,
                CellKind::Castle => obs.visible_castle[i] = true,
                CellKind::General => obs.visible_general[i] = true,
                CellKind::Plain => {}
            }
        }
        obs
    }

    pub fn ticks_to_land_bonus(&self) -> u32 {
        let period = self.config.land_bonus_period();
        period - self.tick % period
    }

    /// Stable 64-bit digest of the complete state.
    pub fn state_hash(&self) -> u64 {
        let mut hasher = Xxh3::new();
        let mut put = |bytes: &[u8]| hasher.update(bytes);
        put(&(self.height as u64).to_le_bytes());
        put(&(self.width as u64).to_le_bytes());
        put(&self.tick.to_le_bytes());
        put(&[u8::from(self.alive[0]), u8::from(self.alive[1])]);
        put(&[match self.winner {
            None => 0,
            Some(p) => 1 + p.index() as u8,
        }]);
        put(&self.config.growth_interval_turns.to_le_bytes());
        put(&self.config.castle_garrison_range.0.to_le_bytes());
        put(&self.config.castle_garrison_range.1.to_le_bytes());
        for g in &self.generals {
            put(&(g.row as u64).to_le_bytes());
            put(&(g.col as u64).to_le_bytes());
        }
        for cell in &self.cells {
            let owner = match cell.owner {
                None => 0u8,
                Some(p) => 1 + p.index() as u8,
            };
            put(&[cell.kind.tag(), owner]);
            put(&cell.army.to_le_bytes());
        }
        hasher.digest()
    }
}

/// A player's fogged view of the grid. Planes are row-major `height * width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub height: usize,
    pub width: usize,
    pub player: Player,
    pub tick: u32,
    /// Whether the observer resolves first on the next half-turn.
    pub has_priority: bool,
    pub ticks_to_land_bonus: u32,
    pub land_bonus_period: u32,
    pub visible_army: Vec<u32>,
    pub owned_by_self: Vec<bool>,
    pub owned_by_opponent: Vec<bool>,
    pub neutral_visible: Vec<bool>,
    pub visible_mountain: Vec<bool>,
    pub visible_castle: Vec<bool>,
    pub visible_general: Vec<bool>,
    /// `true` where the cell is hidden.
    pub fog: Vec<bool>,
    pub scoreboard: Scoreboard,
}

impl Observation {
    #[inline]
    pub fn index(&self, pos: Pos) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn pos(&self, index: usize) -> Pos {
        Pos::new(index / self.width, index % self.width)
    }

    pub fn own_land(&self) -> u32 {
        self.scoreboard.land[self.player.index()]
    }

    pub fn opponent_land(&self) -> u32 {
        self.scoreboard.land[self.player.opponent().index()]
    }

    pub fn own_army(&self) -> u64 {
        self.scoreboard.army[self.player.index()]
    }

    pub fn opponent_army(&self) -> u64 {
        self.scoreboard.army[self.player.opponent().index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapgen::parse_map_text;

    fn state(text: &str) -> GridState {
        GridState::from_layout(&parse_map_text(text).unwrap(), RulesConfig::default())
    }

    fn put(state: &mut GridState, row: usize, col: usize, owner: Option<Player>, army: u32) {
        let kind = state.cell(Pos::new(row, col)).kind;
        state.set_cell(Pos::new(row, col), Cell { kind, owner, army });
    }

    #[test]
    fn pass_is_always_valid() {
        let s = state("A....\n.....\n....B\n");
        assert_eq!(s.validate_move(Player::P0, &Move::Pass), Ok(()));
    }

    #[test]
    fn single_unit_cannot_move() {
        let mut s = state("A....\n.....\n....B\n");
        put(&mut s, 1, 1, Some(Player::P0), 1);
        let mv = Move::step(1, 1, Direction::Right, Split::All);
        assert_eq!(s.validate_move(Player::P0, &mv), Err(Rejection::InsufficientArmy));
    }

    #[test]
    fn mountain_is_impassable() {
        let mut s = state("A....\n..#..\n....B\n");
        put(&mut s, 1, 1, Some(Player::P0), 5);
        let mv = Move::step(1, 1, Direction::Right, Split::All);
        assert_eq!(s.validate_move(Player::P0, &mv), Err(Rejection::Impassable));
    }

    #[test]
    fn other_rejections() {
        let mut s = state("A....\n.....\n....B\n");
        put(&mut s, 0, 1, Some(Player::P0), 5);
        let up = Move::step(0, 1, Direction::Up, Split::All);
        assert_eq!(s.validate_move(Player::P0, &up), Err(Rejection::DestinationOutOfBounds));
        let far = Move::step(7, 1, Direction::Up, Split::All);
        assert_eq!(s.validate_move(Player::P0, &far), Err(Rejection::SourceOutOfBounds));
        let theirs = Move::step(0, 1, Direction::Down, Split::All);
        assert_eq!(s.validate_move(Player::P1, &theirs), Err(Rejection::NotOwned));
    }

    #[test]
    fn half_split_rounds_down() {
        let src = Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 9 };
        let dst = Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 2 };
        let res = resolve_movement(src, dst, Split::Half);
        assert_eq!((res.source.army, res.dest.army), (5, 6));
        assert_eq!(res.engagement, Engagement::Reinforce);
    }

    #[test]
    fn castle_tie_stays_neutral() {
        let src = Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 41 };
        let res = resolve_movement(src, Cell::castle(40), Split::All);
        assert_eq!(res.dest, Cell { kind: CellKind::Castle, owner: None, army: 0 });
        assert_eq!(res.source.army, 1);
    }

    #[test]
    fn castle_captured_with_surplus() {
        let src = Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 52 };
        let res = resolve_movement(src, Cell::castle(50), Split::All);
        assert_eq!(res.dest, Cell { kind: CellKind::Castle, owner: Some(Player::P0), army: 1 });
    }

    #[test]
    fn attack_and_tie_on_enemy_cell() {
        let mut s = state("A....\n.....\n....B\n");
        put(&mut s, 1, 1, Some(Player::P0), 5);
        put(&mut s, 1, 2, Some(Player::P1), 3);
        s.apply_half_turn([Move::step(1, 1, Direction::Right, Split::All), Move::Pass]);
        assert_eq!(s.cell(Pos::new(1, 2)), Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 1 });
        assert_eq!(s.cell(Pos::new(1, 1)).army, 1);

        let mut s = state("A....\n.....\n....B\n");
        put(&mut s, 1, 1, Some(Player::P0), 5);
        put(&mut s, 1, 2, Some(Player::P1), 4);
        s.apply_half_turn([Move::step(1, 1, Direction::Right, Split::All), Move::Pass]);
        assert_eq!(s.cell(Pos::new(1, 2)), Cell { kind: CellKind::Plain, owner: Some(Player::P1), army: 0 });
    }

    #[test]
    fn both_pass_only_advances_tick() {
        let mut s = state("A....\n.....\n....B\n");
        let before = s.cells().to_vec();
        let ev = s.apply_half_turn([Move::Pass, Move::Pass]);
        assert_eq!(s.tick(), 1);
        assert_eq!(ev.growth, Growth::default());
        assert_eq!(s.cells(), &before[..]);
    }

    #[test]
    fn growth_schedule() {
        let mut s = state("AC...\n.....\n....B\n");
        put(&mut s, 0, 1, Some(Player::P0), 3);
        for (r, c) in [(1, 0), (1, 1), (1, 2)] {
            put(&mut s, r, c, Some(Player::P0), 2);
        }
        s.set_tick(2);
        s.apply_growth();
        assert_eq!(s.cell(Pos::new(0, 0)).army, 2);
        assert_eq!(s.cell(Pos::new(0, 1)).army, 4);
        assert_eq!(s.cell(Pos::new(1, 0)).army, 2);

        s.set_tick(3);
        assert_eq!(s.apply_growth(), Growth::default());
        assert_eq!(s.cell(Pos::new(0, 0)).army, 2);

        s.set_tick(50);
        let g = s.apply_growth();
        assert!(g.production && g.land_bonus);
        assert_eq!(s.cell(Pos::new(0, 0)).army, 4);
        assert_eq!(s.cell(Pos::new(0, 1)).army, 6);
        assert_eq!(s.cell(Pos::new(1, 0)).army, 3);
        assert_eq!(s.counters(), s.recount());
    }

    #[test]
    fn general_capture_ends_game() {
        let mut s = state("A....\n.....\n...B.\n");
        assert_eq!(s.check_terminal(), None);
        put(&mut s, 2, 2, Some(Player::P0), 10);
        // player 1 holds priority on odd ticks; its move is skipped once the game ends
        let ev = s.apply_half_turn([
            Move::step(2, 2, Direction::Right, Split::All),
            Move::step(2, 3, Direction::Left, Split::All),
        ]);
        assert_eq!(ev.winner, Some(Player::P0));
        assert_eq!(s.check_terminal(), Some(Player::P0));
        assert!(!s.is_alive(Player::P1));
        assert_eq!(ev.moves[1], MoveOutcome::Skipped);
        assert_eq!(ev.captures.len(), 1);
        assert_eq!(ev.growth, Growth::default());
        assert_eq!(s.validate_move(Player::P0, &Move::Pass), Err(Rejection::GameOver));
    }

    #[test]
    fn priority_alternates() {
        // both players move onto the same empty cell; the priority holder lands first
        let mut s = state("A....\n.....\n....B\n");
        put(&mut s, 1, 1, Some(Player::P0), 5);
        put(&mut s, 1, 3, Some(Player::P1), 5);
        let moves = [
            Move::step(1, 1, Direction::Right, Split::All),
            Move::step(1, 3, Direction::Left, Split::All),
        ];
        // P0 occupies first with 4, P1's 4 ties and P0 keeps the cell
        let (even, _) = s.stepped(moves);
        assert_eq!(even.cell(Pos::new(1, 2)).owner, Some(Player::P0));
        assert_eq!(even.cell(Pos::new(1, 2)).army, 0);

        let mut odd = s.clone();
        odd.set_tick(1);
        let ev = odd.apply_half_turn(moves);
        assert_eq!(ev.priority, Player::P1);
        assert_eq!(odd.cell(Pos::new(1, 2)).owner, Some(Player::P1));
        assert_eq!(odd.cell(Pos::new(1, 2)).army, 0);
    }

    #[test]
    fn observe_moore_block() {
        let mut s = state(".....\n.....\n.....\n.....\nA...B\n");
        // strip everything owned and give P0 only the centre
        for row in 0..5 {
            for col in 0..5 {
                put(&mut s, row, col, None, 0);
            }
        }
        put(&mut s, 2, 2, Some(Player::P0), 3);
        let obs = s.observe(Player::P0);
        for row in 0..5 {
            for col in 0..5 {
                let inside = (1..=3).contains(&row) && (1..=3).contains(&col);
                assert_eq!(!obs.fog[row * 5 + col], inside, "({row},{col})");
            }
        }
    }

    #[test]
    fn observe_hides_enemy_army_but_not_scoreboard() {
        let s = state("A.......B\n");
        let obs = s.observe(Player::P0);
        assert_eq!(obs.visible_army[8], 0);
        assert!(obs.fog[8]);
        assert_eq!(obs.opponent_army(), 1);
        assert_eq!(obs.opponent_land(), 1);
    }

    #[test]
    fn mountain_next_to_owned_cell_is_visible() {
        let s = state("A#......B\n");
        let obs = s.observe(Player::P0);
        assert!(obs.visible_mountain[1]);
        assert!(!obs.neutral_visible[1]);
    }

    #[test]
    fn hash_tracks_state() {
        let s = state("A....\n.#.C.\n....B\n");
        assert_eq!(s.state_hash(), s.clone().state_hash());
        let mut t = s.clone();
        t.set_tick(1);
        assert_ne!(s.state_hash(), t.state_hash());
    }
}
