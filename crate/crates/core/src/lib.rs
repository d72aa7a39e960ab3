//! Deterministic engine, environment and evaluation arena for a two-player Generals-style grid game.

pub mod arena;
pub mod bench;
pub mod env;
pub mod game;
pub mod mapgen;
pub mod memory;
pub mod replay;
pub mod rewards;
