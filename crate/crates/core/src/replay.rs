//! Match recording, canonical serialization and re-simulation checks.
//!
//! A replay file is newline-delimited JSON: a header object, one record per
//! half-turn, then a `{"result": ...}` object. Every line is written with
//! sorted keys and no insignificant whitespace, so two recordings of the same
//! match are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::env::{decode_action, ActionVector};
use crate::game::{GridState, Player, RulesConfig};
use crate::mapgen::{parse_map_text, serialize_map_text, GridLayout};
use crate::rewards::ShapingConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("corrupt replay at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("record for tick {got} does not follow tick {last}")]
    NonMonotone { last: u32, got: u32 },
    #[error("replay already finished")]
    Finished,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(line: usize, reason: impl Into<String>) -> ReplayError {
    ReplayError::Corrupt { line, reason: reason.into() }
}

mod hex64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() != 16 {
            return Err(serde::de::Error::custom("digest must be 16 hex digits"));
        }
        u64::from_str_radix(&text, 16).map_err(serde::de::Error::custom)
    }
}

mod opt_hex64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => hex64::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "hex64")] u64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayHeader {
    pub format_version: u32,
    pub height: usize,
    pub width: usize,
    /// Map in canonical text form.
    pub map: String,
    pub rules: RulesConfig,
    pub shaping: Option<ShapingConfig>,
    pub players: [String; 2],
    pub seed: u64,
    /// Whether records carry per-tick state digests.
    pub digests: bool,
}

impl ReplayHeader {
    pub fn new(layout: &GridLayout, rules: RulesConfig, players: [String; 2], seed: u64, digests: bool) -> Self {
        ReplayHeader {
            format_version: FORMAT_VERSION,
            height: layout.height,
            width: layout.width,
            map: serialize_map_text(layout),
            rules,
            shaping: None,
            players,
            seed,
            digests,
        }
    }

    /// Tick-0 state described by the header.
    pub fn initial_state(&self) -> Result<GridState, ReplayError> {
        let layout = parse_map_text(&self.map).map_err(|e| corrupt(1, format!("map: {e}")))?;
        if (layout.height, layout.width) != (self.height, self.width) {
            return Err(corrupt(1, "map dimensions disagree with header"));
        }
        Ok(GridState::from_layout(&layout, self.rules))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRecord {
    /// Tick reached after applying `actions`; the first record is tick 1.
    pub tick: u32,
    pub actions: [ActionVector; 2],
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex64")]
    pub digest: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayResult {
    pub winner: Option<Player>,
    pub ticks: u32,
    #[serde(with = "hex64")]
    pub final_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultLine {
    result: ReplayResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayLog {
    pub header: ReplayHeader,
    pub records: Vec<ReplayRecord>,
    pub result: Option<ReplayResult>,
}

fn canonical_line<T: Serialize>(value: &T) -> String {
    // round-tripping through Value sorts object keys
    let value = serde_json::to_value(value).expect("replay types serialize");
    serde_json::to_string(&value).expect("json value serializes")
}

impl ReplayLog {
    pub fn new(header: ReplayHeader) -> Self {
        ReplayLog { header, records: Vec::new(), result: None }
    }

    pub fn last_tick(&self) -> u32 {
        self.records.last().map_or(0, |r| r.tick)
    }

    pub fn record_step(&mut self, tick: u32, actions: [ActionVector; 2], digest: Option<u64>) -> Result<(), ReplayError> {
        if self.result.is_some() {
            return Err(ReplayError::Finished);
        }
        let last = self.last_tick();
        if tick != last + 1 {
            return Err(ReplayError::NonMonotone { last, got: tick });
        }
        let digest = if self.header.digests { digest } else { None };
        self.records.push(ReplayRecord { tick, actions, digest });
        Ok(())
    }

    pub fn finish(&mut self, result: ReplayResult) {
        self.result = Some(result);
    }

    /// Canonical byte form.
    pub fn to_canonical_string(&self) -> String {
        let mut out = canonical_line(&self.header);
        out.push('\n');
        for record in &self.records {
            out.push_str(&canonical_line(record));
            out.push('\n');
        }
        if let Some(result) = self.result {
            let _ = writeln!(out, "{}", canonical_line(&ResultLine { result }));
        }
        out
    }

    pub fn save(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(self.to_canonical_string().as_bytes())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_canonical_string())
    }

    /// Load a finished replay, rejecting anything that is not a complete,
    /// well-formed log.
    pub fn load(input: impl BufRead) -> Result<ReplayLog, ReplayError> {
        let mut lines = input.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(corrupt(1, "empty file")),
        };
        let header: ReplayHeader = parse_line(&header_line, 1)?;
        if header.format_version != FORMAT_VERSION {
            return Err(corrupt(1, format!("unsupported format_version {}", header.format_version)));
        }

        let mut log = ReplayLog::new(header);
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if log.result.is_some() {
                return Err(corrupt(lineno, "content after result line"));
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| corrupt(lineno, e.to_string()))?;
            if value.get("result").is_some() {
                let parsed: ResultLine = from_value(value, lineno)?;
                log.result = Some(parsed.result);
                continue;
            }
            let record: ReplayRecord = from_value(value, lineno)?;
            if record.tick != log.last_tick() + 1 {
                return Err(corrupt(lineno, format!("tick {} does not follow {}", record.tick, log.last_tick())));
            }
            if record.digest.is_some() != log.header.digests {
                return Err(corrupt(lineno, "digest presence disagrees with header"));
            }
            log.records.push(record);
        }
        if log.result.is_none() {
            return Err(corrupt(log.records.len() + 2, "missing result line (truncated file?)"));
        }
        Ok(log)
    }

    pub fn load_from_str(text: &str) -> Result<ReplayLog, ReplayError> {
        ReplayLog::load(text.as_bytes())
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<ReplayLog, ReplayError> {
        let file = fs::File::open(path)?;
        ReplayLog::load(io::BufReader::new(file))
    }
}

fn parse_line<T: DeserializeOwned>(line: &str, lineno: usize) -> Result<T, ReplayError> {
    serde_json::from_str(line).map_err(|e| corrupt(lineno, e.to_string()))
}

fn from_value<T: DeserializeOwned>(value: serde_json::Value, lineno: usize) -> Result<T, ReplayError> {
    serde_json::from_value(value).map_err(|e| corrupt(lineno, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Verified { final_hash: u64 },
    Divergence { tick: u32 },
}

/// Re-simulate a replay from its header and compare against what it recorded.
///
/// Per-tick digests are compared when present; the final hash, tick count and
/// winner are always checked against the result line.
pub fn replay_verify(log: &ReplayLog) -> Result<Verification, ReplayError> {
    let mut state = log.header.initial_state()?;
    for record in &log.records {
        if state.is_terminal() {
            return Ok(Verification::Divergence { tick: record.tick });
        }
        state.apply_half_turn(record.actions.map(decode_action));
        if let Some(expected) = record.digest {
            if state.state_hash() != expected {
                return Ok(Verification::Divergence { tick: record.tick });
            }
        }
    }
    let final_hash = state.state_hash();
    let Some(result) = log.result else {
        return Err(corrupt(log.records.len() + 2, "missing result line"));
    };
    if result.final_hash != final_hash || result.ticks != state.tick() || result.winner != state.winner() {
        return Ok(Verification::Divergence { tick: state.tick() });
    }
    Ok(Verification::Verified { final_hash })
}
