//! Text board frames.
//!
//! Each cell is a five-character token: owner (`A`, `B` or `.`), structure
//! (`g` general, `c` castle, space otherwise) and army right-aligned in three
//! columns (capped at 999). Mountains print as [`MOUNTAIN`], hidden cells as
//! [`FOG`] and empty neutral land as a lone `.`.

use generals_core::game::{CellKind, GridState, Player};
use serde::Serialize;

pub const FOG: &str = "~~~~~";
pub const MOUNTAIN: &str = "#####";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Perspective {
    Full,
    Player0,
    Player1,
}

impl Perspective {
    pub fn player(self) -> Option<Player> {
        match self {
            Perspective::Full => None,
            Perspective::Player0 => Some(Player::P0),
            Perspective::Player1 => Some(Player::P1),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Perspective::Full => "full",
            Perspective::Player0 => "player0",
            Perspective::Player1 => "player1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Frame {
    pub tick: u32,
    pub perspective: &'static str,
    pub land: [u32; 2],
    pub army: [u64; 2],
    pub rows: Vec<String>,
}

impl Frame {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "tick {} [{}] A land {} army {} | B land {} army {}\n",
            self.tick, self.perspective, self.land[0], self.army[0], self.land[1], self.army[1]
        );
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }
}

fn owner_glyph(owner: Option<Player>) -> char {
    match owner {
        Some(Player::P0) => 'A',
        Some(Player::P1) => 'B',
        None => '.',
    }
}

pub fn render(state: &GridState, perspective: Perspective) -> Frame {
    let (h, w) = (state.height(), state.width());
    let visible = perspective.player().map(|p| state.visibility(p));
    let score = state.scoreboard();
    let rows = (0..h)
        .map(|r| {
            (0..w)
                .map(|c| {
                    let i = r * w + c;
                    if visible.as_ref().is_some_and(|v| !v[i]) {
                        return FOG.to_string();
                    }
                    let cell = state.cells()[i];
                    let mark = match cell.kind {
                        CellKind::Mountain => return MOUNTAIN.to_string(),
                        CellKind::General => 'g',
                        CellKind::Castle => 'c',
                        CellKind::Plain => ' ',
                    };
                    if cell.owner.is_none() && cell.kind == CellKind::Plain && cell.army == 0 {
                        return "    .".to_string();
                    }
                    format!("{}{}{:>3}", owner_glyph(cell.owner), mark, cell.army.min(999))
                })
                .collect::<Vec<_>>()
                .join(" ")
                .trim_end()
                .to_string()
        })
        .collect();
    Frame { tick: state.tick(), perspective: perspective.label(), land: score.land, army: score.army, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use generals_core::game::RulesConfig;
    use generals_core::mapgen::parse_map_text;

    #[test]
    fn fog_hides_far_cells() {
        let layout = parse_map_text("A...#\n.....\n....B\n").unwrap();
        let state = GridState::from_layout(&layout, RulesConfig::default());
        let full = render(&state, Perspective::Full);
        assert!(!full.to_text().contains(FOG));
        assert!(full.rows[0].starts_with("Ag  1"));
        let p0 = render(&state, Perspective::Player0);
        assert!(p0.rows[2].contains(FOG));
        assert!(!p0.rows[2].contains('B'));
        // the scoreboard stays visible
        assert_eq!(p0.land, [1, 1]);
    }
}
