//! Fixtures and brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use generals_core::game::{Cell, CellKind, Direction, GridState, Move, Player, Pos, RulesConfig, Split};
use generals_core::mapgen::{parse_map_text, GridLayout};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random board: mountains, castles and both generals, with random
/// ownership and armies on every passable cell and a random tick.
pub fn random_state(seed: u64) -> GridState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rng.random_range(3..=8);
    let w = rng.random_range(3..=8);
    let n = h * w;
    let a = rng.random_range(0..n);
    let b = loop {
        let b = rng.random_range(0..n);
        if b != a {
            break b;
        }
    };
    let mut text = String::new();
    for i in 0..n {
        let glyph = if i == a {
            'A'
        } else if i == b {
            'B'
        } else {
            match rng.random_range(0..10) {
                0 | 1 => '#',
                2 => 'C',
                _ => '.',
            }
        };
        text.push(glyph);
        if i % w == w - 1 {
            text.push('\n');
        }
    }
    let layout = parse_map_text(&text).expect("generated text is well-formed");
    let mut state = GridState::from_layout(&layout, RulesConfig::default());
    for i in 0..n {
        let pos = Pos::new(i / w, i % w);
        let cell = state.cell(pos);
        let owner = match cell.kind {
            CellKind::Mountain => continue,
            CellKind::General => cell.owner,
            _ => match rng.random_range(0..3) {
                0 => Some(Player::P0),
                1 => Some(Player::P1),
                _ => None,
            },
        };
        let army = if owner.is_none() && cell.kind == CellKind::Plain { 0 } else { rng.random_range(0..60) };
        state.set_cell(pos, Cell { kind: cell.kind, owner, army });
    }
    state.set_tick(rng.random_range(0..400));
    state
}

/// Moves biased toward legality: usually an owned source, sometimes junk.
pub fn random_moves(state: &GridState, rng: &mut impl Rng) -> [Move; 2] {
    Player::ALL.map(|p| random_move(state, p, rng))
}

pub fn random_move(state: &GridState, player: Player, rng: &mut impl Rng) -> Move {
    if rng.random_range(0..10) == 0 {
        return Move::Pass;
    }
    let owned: Vec<usize> = (0..state.cells().len()).filter(|&i| state.cells()[i].owner == Some(player)).collect();
    let direction = Direction::ALL[rng.random_range(0..4)];
    let split = if rng.random_bool(0.5) { Split::All } else { Split::Half };
    if owned.is_empty() || rng.random_range(0..10) == 0 {
        let row = rng.random_range(0..state.height() + 1);
        let col = rng.random_range(0..state.width() + 1);
        return Move::step(row, col, direction, split);
    }
    let i = owned[rng.random_range(0..owned.len())];
    Move::step(i / state.width(), i % state.width(), direction, split)
}

/// Unit-by-unit combat: one attacker and one defender cancel per round.
/// Returns the destination's owner and army afterwards.
pub fn brute_force_combat(
    attacker: Player,
    moved: u32,
    defender: Option<Player>,
    defender_army: u32,
) -> (Option<Player>, u32) {
    if defender == Some(attacker) {
        return (defender, defender_army + moved);
    }
    let (mut a, mut d) = (moved, defender_army);
    while a > 0 && d > 0 {
        a -= 1;
        d -= 1;
    }
    if a > 0 {
        (Some(attacker), a)
    } else {
        (defender, d)
    }
}

/// Visibility by scanning every owned cell for every target cell.
pub fn brute_force_visibility(state: &GridState, player: Player) -> Vec<bool> {
    let (h, w) = (state.height() as i64, state.width() as i64);
    let cells = state.cells();
    (0..h * w)
        .map(|t| {
            let (tr, tc) = (t / w, t % w);
            (0..h * w).any(|s| {
                let (sr, sc) = (s / w, s % w);
                cells[s as usize].owner == Some(player) && (sr - tr).abs() <= 1 && (sc - tc).abs() <= 1
            })
        })
        .collect()
}

/// All-pairs shortest paths over passable cells by Floyd-Warshall.
pub fn floyd_warshall(layout: &GridLayout) -> Vec<Vec<Option<u32>>> {
    let (h, w) = (layout.height, layout.width);
    let n = h * w;
    let passable = |i: usize| layout.cells[i] != CellKind::Mountain;
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        if !passable(i) {
            continue;
        }
        d[i][i] = Some(0);
        let (r, c) = (i / w, i % w);
        let mut link = |j: usize| {
            if passable(j) {
                d[i][j] = Some(1);
            }
        };
        if r > 0 {
            link(i - w);
        }
        if r + 1 < h {
            link(i + w);
        }
        if c > 0 {
            link(i - 1);
        }
        if c + 1 < w {
            link(i + 1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k][j] {
                    if d[i][j].is_none_or(|ij| ik + kj < ij) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

/// Army each player gains from growth at `tick`, from the rules as stated:
/// +1 per owned general or castle on even ticks, +1 per owned cell on
/// multiples of twice the growth interval.
pub fn expected_growth(state: &GridState, tick: u32) -> [u64; 2] {
    let mut out = [0u64; 2];
    if tick == 0 || !tick.is_multiple_of(2) {
        return out;
    }
    let bonus = tick.is_multiple_of(2 * state.config().growth_interval_turns);
    for cell in state.cells() {
        if let Some(p) = cell.owner {
            if matches!(cell.kind, CellKind::General | CellKind::Castle) {
                out[p.index()] += 1;
            }
            if bonus {
                out[p.index()] += 1;
            }
        }
    }
    out
}
