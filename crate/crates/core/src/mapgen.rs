//! Procedural and hand-written grid layouts.
//!
//! Generation is plain rejection sampling: mountains are drawn i.i.d., castles
//! and generals are dropped uniformly on free cells, and the candidate is kept
//! only if [`validate`] reports no violation.
//!
//! Text format, one row per line:
//!
//! ```text
//! .#..C
//! A...B
//! ---
//! C 0 4 48
//! ```
//!
//! `.` plain, `#` mountain, `A`/`B` generals of player 0/1, `C` castle with a
//! garrison of 45 unless overridden by a `C row col garrison` line after `---`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CellKind, Direction, Player, Pos};

/// Garrison given to `C` cells without an override line.
pub const DEFAULT_TEXT_GARRISON: u32 = 45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSpec {
    pub height: usize,
    pub width: usize,
    pub mountain_density: f64,
    /// Accepted deviation of the realised mountain fraction from `mountain_density`.
    pub mountain_tolerance: f64,
    pub castle_count_range: (usize, usize),
    pub castle_garrison_range: (u32, u32),
    pub min_general_bfs_distance: u32,
    /// Every general needs a castle at most this many BFS steps away.
    pub castle_within_radius: u32,
    pub max_attempts: u32,
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec {
            height: 24,
            width: 24,
            mountain_density: 0.20,
            mountain_tolerance: 0.03,
            castle_count_range: (9, 11),
            castle_garrison_range: (40, 50),
            min_general_bfs_distance: 15,
            castle_within_radius: 6,
            max_attempts: 10_000,
        }
    }
}

impl MapSpec {
    pub fn with_size(height: usize, width: usize) -> Self {
        MapSpec { height, width, ..MapSpec::default() }
    }

    pub fn check(&self) -> Result<(), MapError> {
        let bad = |msg: &str| Err(MapError::InvalidSpec(msg.to_string()));
        if self.height == 0 || self.width == 0 {
            return bad("grid dimensions must be positive");
        }
        if !(0.0..1.0).contains(&self.mountain_density) {
            return bad("mountain_density must lie in [0, 1)");
        }
        if !(self.mountain_tolerance >= 0.0) {
            return bad("mountain_tolerance must be non-negative");
        }
        if self.castle_count_range.0 > self.castle_count_range.1 {
            return bad("castle_count_range is empty");
        }
        if self.castle_garrison_range.0 > self.castle_garrison_range.1 {
            return bad("castle_garrison_range is empty");
        }
        if self.min_general_bfs_distance == 0 {
            return bad("min_general_bfs_distance must be at least 1");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("invalid map spec: {0}")]
    InvalidSpec(String),
    #[error("no valid layout after {attempts} attempts; last candidate violated: {}", last_violations.join("; "))]
    GenerationExhausted { attempts: u32, last_violations: Vec<String> },
}

/// Terrain and placements for a match, without any army or ownership state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub height: usize,
    pub width: usize,
    /// Row-major cell kinds.
    pub cells: Vec<CellKind>,
    pub general_positions: [Pos; 2],
    pub castle_garrisons: BTreeMap<Pos, u32>,
}

impl GridLayout {
    pub fn kind(&self, pos: Pos) -> CellKind {
        self.cells[pos.row * self.width + pos.col]
    }

    pub fn general(&self, player: Player) -> Pos {
        self.general_positions[player.index()]
    }

    pub fn mountain_fraction(&self) -> f64 {
        let mountains = self.cells.iter().filter(|k| **k == CellKind::Mountain).count();
        mountains as f64 / self.cells.len() as f64
    }

    pub fn castles(&self) -> impl Iterator<Item = Pos> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Castle)
            .map(|(i, _)| Pos::new(i / self.width, i % self.width))
    }

    /// BFS step counts from `start` through non-mountain cells; `None` if unreachable.
    pub fn distances_from(&self, start: Pos) -> Vec<Option<u32>> {
        bfs_field(self.height, self.width, start, |i| self.cells[i] != CellKind::Mountain)
    }
}

/// 4-connected BFS over a `height x width` grid.
pub fn bfs_field(
    height: usize,
    width: usize,
    start: Pos,
    passable: impl Fn(usize) -> bool,
) -> Vec<Option<u32>> {
    let mut dist = vec![None; height * width];
    let start_idx = start.row * width + start.col;
    if !passable(start_idx) {
        return dist;
    }
    dist[start_idx] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(pos) = queue.pop_front() {
        let d = dist[pos.row * width + pos.col].unwrap_or(0);
        for dir in Direction::ALL {
            let Some(next) = pos.step(dir, height, width) else { continue };
            let idx = next.row * width + next.col;
            if dist[idx].is_none() && passable(idx) {
                dist[idx] = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Shortest 4-connected path length between `a` and `b`, mountains blocking.
pub fn bfs_distance(layout: &GridLayout, a: Pos, b: Pos) -> Option<u32> {
    layout.distances_from(a)[b.row * layout.width + b.col]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Malformed(String),
    MountainFraction { fraction: f64 },
    CastleCount { count: usize },
    GarrisonOutOfRange { pos: Pos, garrison: u32 },
    GeneralsUnreachable,
    GeneralsTooClose { distance: u32 },
    NoCastleNearGeneral { player: Player },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Malformed(msg) => write!(f, "malformed layout: {msg}"),
            Violation::MountainFraction { fraction } => write!(f, "mountain fraction {fraction:.3} out of tolerance"),
            Violation::CastleCount { count } => write!(f, "castle count {count} out of range"),
            Violation::GarrisonOutOfRange { pos, garrison } => write!(f, "castle at {pos} has garrison {garrison}"),
            Violation::GeneralsUnreachable => write!(f, "generals are not mutually reachable"),
            Violation::GeneralsTooClose { distance } => write!(f, "generals only {distance} BFS steps apart"),
            Violation::NoCastleNearGeneral { player } => write!(f, "no castle within reach of {player}'s general"),
        }
    }
}

/// Check `layout` against every constraint of `spec`. An empty list means valid.
pub fn validate(layout: &GridLayout, spec: &MapSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if layout.height == 0 || layout.width == 0 || layout.cells.len() != layout.height * layout.width {
        out.push(Violation::Malformed("cell count does not match dimensions".into()));
        return out;
    }
    if layout.height != spec.height || layout.width != spec.width {
        out.push(Violation::Malformed(format!(
            "layout is {}x{}, spec asks for {}x{}",
            layout.height, layout.width, spec.height, spec.width
        )));
    }
    let [ga, gb] = layout.general_positions;
    let in_bounds = |p: Pos| p.row < layout.height && p.col < layout.width;
    if !in_bounds(ga) || !in_bounds(gb) {
        out.push(Violation::Malformed("general out of bounds".into()));
        return out;
    }
    let generals = layout.cells.iter().filter(|k| **k == CellKind::General).count();
    if ga == gb || generals != 2 || layout.kind(ga) != CellKind::General || layout.kind(gb) != CellKind::General {
        out.push(Violation::Malformed("expected exactly one general per player".into()));
        return out;
    }

    let fraction = layout.mountain_fraction();
    if (fraction - spec.mountain_density).abs() > spec.mountain_tolerance + 1e-12 {
        out.push(Violation::MountainFraction { fraction });
    }

    let castles: Vec<Pos> = layout.castles().collect();
    let (cmin, cmax) = spec.castle_count_range;
    if castles.len() < cmin || castles.len() > cmax {
        out.push(Violation::CastleCount { count: castles.len() });
    }
    let (gmin, gmax) = spec.castle_garrison_range;
    for &pos in &castles {
        match layout.castle_garrisons.get(&pos) {
            Some(&g) if (gmin..=gmax).contains(&g) => {}
            Some(&g) => out.push(Violation::GarrisonOutOfRange { pos, garrison: g }),
            None => out.push(Violation::Malformed(format!("castle at {pos} has no garrison"))),
        }
    }
    if layout.castle_garrisons.keys().any(|p| !in_bounds(*p) || layout.kind(*p) != CellKind::Castle) {
        out.push(Violation::Malformed("garrison listed for a non-castle cell".into()));
    }

    let from_a = layout.distances_from(ga);
    match from_a[gb.row * layout.width + gb.col] {
        None => out.push(Violation::GeneralsUnreachable),
        Some(d) if d < spec.min_general_bfs_distance => out.push(Violation::GeneralsTooClose { distance: d }),
        Some(_) => {}
    }

    let from_b = layout.distances_from(gb);
    for (player, dist) in [(Player::P0, &from_a), (Player::P1, &from_b)] {
        let near = castles
            .iter()
            .any(|c| matches!(dist[c.row * layout.width + c.col], Some(d) if d <= spec.castle_within_radius));
        if !near {
            out.push(Violation::NoCastleNearGeneral { player });
        }
    }
    out
}

/// Generate a layout satisfying `spec`, deterministic in `(spec, seed)`.
pub fn generate(spec: &MapSpec, seed: u64) -> Result<GridLayout, MapError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = Vec::new();
    for _ in 0..spec.max_attempts {
        match candidate(spec, &mut rng) {
            Some(layout) => {
                let violations = validate(&layout, spec);
                if violations.is_empty() {
                    return Ok(layout);
                }
                last = violations;
            }
            None => last.clear(),
        }
    }
    let mut last_violations: Vec<String> = last.iter().map(|v| v.to_string()).collect();
    if last_violations.is_empty() {
        last_violations.push("not enough free cells to place generals and castles".into());
    }
    Err(MapError::GenerationExhausted { attempts: spec.max_attempts, last_violations })
}

fn candidate(spec: &MapSpec, rng: &mut ChaCha8Rng) -> Option<GridLayout> {
    let (h, w) = (spec.height, spec.width);
    let mut cells: Vec<CellKind> = (0..h * w)
        .map(|_| if rng.random_bool(spec.mountain_density) { CellKind::Mountain } else { CellKind::Plain })
        .collect();
    let castle_count = rng.random_range(spec.castle_count_range.0..=spec.castle_count_range.1);
    let free: Vec<usize> = (0..h * w).filter(|&i| cells[i] == CellKind::Plain).collect();
    if free.len() < castle_count + 2 {
        return None;
    }
    let picks = sample(rng, free.len(), castle_count + 2);
    let at = |k: usize| {
        let i = free[picks.index(k)];
        Pos::new(i / w, i % w)
    };
    let general_positions = [at(0), at(1)];
    for p in general_positions {
        cells[p.row * w + p.col] = CellKind::General;
    }
    let mut castle_garrisons = BTreeMap::new();
    for k in 2..castle_count + 2 {
        let p = at(k);
        cells[p.row * w + p.col] = CellKind::Castle;
        let garrison = rng.random_range(spec.castle_garrison_range.0..=spec.castle_garrison_range.1);
        castle_garrisons.insert(p, garrison);
    }
    Some(GridLayout { height: h, width: w, cells, general_positions, castle_garrisons })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("map is empty")]
    Empty,
    #[error("unknown glyph {0:?}")]
    UnknownGlyph(char),
    #[error("row length differs from the first row")]
    RaggedRow,
    #[error("general appears more than once")]
    DuplicateGeneral,
    #[error("general {0} is missing")]
    MissingGeneral(char),
    #[error("malformed garrison annotation")]
    BadAnnotation,
    #[error("annotation does not point at a castle")]
    NotACastle,
}

pub fn parse_map_text(text: &str) -> Result<GridLayout, ParseError> {
    let err = |line: usize, column: usize, kind| Err(ParseError { line, column, kind });
    let mut lines = text.lines().enumerate();
    let mut cells = Vec::new();
    let mut width = 0;
    let mut height = 0;
    let mut generals: [Option<Pos>; 2] = [None, None];
    let mut castle_garrisons = BTreeMap::new();
    let mut annotations = false;

    for (ln, line) in lines.by_ref() {
        let line = line.trim_end_matches('\r');
        if line == "---" {
            annotations = true;
            break;
        }
        if line.is_empty() {
            // only trailing blank lines are tolerated
            break;
        }
        let row_len = line.chars().count();
        if height == 0 {
            width = row_len;
        } else if row_len != width {
            return err(ln + 1, row_len.min(width) + 1, ParseErrorKind::RaggedRow);
        }
        for (col, ch) in line.chars().enumerate() {
            let pos = Pos::new(height, col);
            let kind = match ch {
                '.' => CellKind::Plain,
                '#' => CellKind::Mountain,
                'C' => {
                    castle_garrisons.insert(pos, DEFAULT_TEXT_GARRISON);
                    CellKind::Castle
                }
                'A' | 'B' => {
                    let slot = &mut generals[usize::from(ch == 'B')];
                    if slot.is_some() {
                        return err(ln + 1, col + 1, ParseErrorKind::DuplicateGeneral);
                    }
                    *slot = Some(pos);
                    CellKind::General
                }
                other => return err(ln + 1, col + 1, ParseErrorKind::UnknownGlyph(other)),
            };
            cells.push(kind);
        }
        height += 1;
    }

    if height == 0 {
        return err(1, 1, ParseErrorKind::Empty);
    }

    for (ln, line) in lines {
        let line = line.trim_end_matches('\r');
        if !annotations {
            if line.is_empty() {
                continue;
            }
            return err(ln + 1, 1, ParseErrorKind::RaggedRow);
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let nums: Option<Vec<usize>> = fields.iter().skip(1).map(|f| f.parse().ok()).collect();
        let (row, col, garrison) = match (fields.first(), nums.as_deref()) {
            (Some(&"C"), Some(&[r, c, g])) => (r, c, g),
            _ => return err(ln + 1, 1, ParseErrorKind::BadAnnotation),
        };
        let pos = Pos::new(row, col);
        if row >= height || col >= width || cells[row * width + col] != CellKind::Castle {
            return err(ln + 1, 1, ParseErrorKind::NotACastle);
        }
        let Ok(garrison) = u32::try_from(garrison) else {
            return err(ln + 1, 1, ParseErrorKind::BadAnnotation);
        };
        castle_garrisons.insert(pos, garrison);
    }

    let general_positions = match generals {
        [Some(a), Some(b)] => [a, b],
        [None, _] => return err(height, 1, ParseErrorKind::MissingGeneral('A')),
        [_, None] => return err(height, 1, ParseErrorKind::MissingGeneral('B')),
    };
    Ok(GridLayout { height, width, cells, general_positions, castle_garrisons })
}

/// Canonical text form: rows, then `---` and garrison overrides (only those
/// differing from the default, in row-major order). Always newline-terminated.
pub fn serialize_map_text(layout: &GridLayout) -> String {
    let mut out = String::with_capacity((layout.width + 1) * layout.height);
    for row in 0..layout.height {
        for col in 0..layout.width {
            let pos = Pos::new(row, col);
            out.push(match layout.kind(pos) {
                CellKind::Plain => '.',
                CellKind::Mountain => '#',
                CellKind::Castle => 'C',
                CellKind::General if pos == layout.general_positions[1] => 'B',
                CellKind::General => 'A',
            });
        }
        out.push('\n');
    }
    let overrides: Vec<_> = layout
        .castle_garrisons
        .iter()
        .filter(|(_, g)| **g != DEFAULT_TEXT_GARRISON)
        .collect();
    if !overrides.is_empty() {
        out.push_str("---\n");
        for (pos, g) in overrides {
            out.push_str(&format!("C {} {} {}\n", pos.row, pos.col, g));
        }
    }
    out
}
