//! `generals`: map generation, matches, tournaments, benchmarks and replays.

mod config;
mod render;

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use generals_core::arena::{self, AgentFactory, Outcome, SeriesResult, TournamentReport};
use generals_core::bench::{run_bench, BenchConfig};
use generals_core::env::{decode_action, ActionVector, EnvError, GeneralsEnv, MapSource};
use generals_core::mapgen::{generate, parse_map_text, serialize_map_text, validate, MapError};
use generals_core::replay::{replay_verify, ReplayLog, Verification};
use serde::Serialize;

use config::RunConfig;
use render::{render, Perspective};

const OUTPUT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "generals", version, about = "Deterministic Generals engine harness")]
struct Cli {
    /// Output format for reports printed to stdout.
    #[arg(long, value_enum, global = true, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed map text file; overrides the config's map.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a validated map and write it as map text.
    GenerateMap {
        /// Run configuration whose procedural map spec is the starting point.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        /// Target fraction of mountain cells.
        #[arg(long)]
        mountain_density: Option<f64>,
        /// Minimum BFS distance between the two generals.
        #[arg(long)]
        min_general_distance: Option<u32>,
        /// Each general needs a castle within this many BFS steps.
        #[arg(long)]
        castle_radius: Option<u32>,
        /// Rejection-sampling budget before giving up.
        #[arg(long)]
        max_attempts: Option<u32>,
    },
    /// Check a map text file against the generation constraints.
    CheckMap {
        map: PathBuf,
        /// Run configuration whose procedural map spec supplies the constraints.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Play one match between the first two configured agents.
    Match {
        #[command(flatten)]
        run: RunArgs,
        /// Record a replay even if the config does not ask for one.
        #[arg(long)]
        replay: bool,
    },
    /// Play a seat-alternating series between the first two configured agents.
    Series {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        games: Option<usize>,
    },
    /// Round-robin series between all configured agents.
    Tournament {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        games: Option<usize>,
    },
    /// Measure batched self-play throughput with random agents.
    Bench {
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 24)]
        height: usize,
        #[arg(long, default_value_t = 24)]
        width: usize,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Drive an environment with a scripted action file, one step per line.
    ///
    /// Each input line is a JSON pair of action vectors; each output line
    /// carries the tick, state hash, rewards and done flags.
    Script {
        #[command(flatten)]
        run: RunArgs,
        /// JSON lines of `[[a0..a4], [b0..b4]]`.
        #[arg(long)]
        actions: PathBuf,
        /// Include both players' observations in every output line.
        #[arg(long)]
        dump_obs: bool,
    },
    /// Verify or render a recorded replay file
    #[command(subcommand)]
    Replay(ReplayCommand),
}

#[derive(Debug, Subcommand)]
enum ReplayCommand {
    /// Re-simulate and check digests and the final hash.
    Verify { path: PathBuf },
    /// Emit one board frame per tick.
    Render {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        perspective: Perspective,
        /// Directory for `frame_NNNNN.txt` files; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code: 1 for domain failures, 2 for usage or config.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn domain(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn env_failure(e: EnvError) -> Failure {
    match e {
        EnvError::Config(_) | EnvError::Map(MapError::InvalidSpec(_)) => usage(e),
        _ => domain(e),
    }
}

fn arena_failure(e: arena::ArenaError) -> Failure {
    match e {
        arena::ArenaError::Env(e) => env_failure(e),
        arena::ArenaError::Invalid(_) | arena::ArenaError::UnknownAgent(_) => usage(e),
        other => domain(other),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let format = cli.format;
    match cli.command {
        Command::GenerateMap { spec, seed, out, height, width, mountain_density, min_general_distance, castle_radius, max_attempts } => {
            let mut map_spec = match spec {
                Some(path) => RunConfig::load(&path).map_err(usage)?.map_spec(),
                None => Default::default(),
            };
            if let Some(v) = height {
                map_spec.height = v;
            }
            if let Some(v) = width {
                map_spec.width = v;
            }
            if let Some(v) = mountain_density {
                map_spec.mountain_density = v;
            }
            if let Some(v) = min_general_distance {
                map_spec.min_general_bfs_distance = v;
            }
            if let Some(v) = castle_radius {
                map_spec.castle_within_radius = v;
            }
            if let Some(v) = max_attempts {
                map_spec.max_attempts = v;
            }
            let layout = generate(&map_spec, seed).map_err(|e| match e {
                MapError::InvalidSpec(_) => usage(e),
                _ => domain(e),
            })?;
            let text = serialize_map_text(&layout);
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::CheckMap { map, spec } => {
            let map_spec = match spec {
                Some(path) => RunConfig::load(&path).map_err(usage)?.map_spec(),
                None => Default::default(),
            };
            let text = fs::read_to_string(&map).with_context(|| format!("reading {}", map.display())).map_err(usage)?;
            let layout = parse_map_text(&text).map_err(domain)?;
            let violations = validate(&layout, &map_spec);
            for v in &violations {
                println!("violation: {v}");
            }
            if violations.is_empty() {
                println!("valid");
                Ok(())
            } else {
                Err(domain(anyhow!("{} constraint(s) violated", violations.len())))
            }
        }
        Command::Match { run, replay } => cmd_match(load_run(&run)?, replay, format),
        Command::Series { run, games } => {
            let mut cfg = load_run(&run)?;
            if let Some(n) = games {
                cfg.games = n;
            }
            if cfg.agents.len() < 2 {
                return Err(usage(anyhow!("a series needs two agents")));
            }
            cfg.agents.truncate(2);
            cmd_tournament(cfg, format)
        }
        Command::Tournament { run, games } => {
            let mut cfg = load_run(&run)?;
            if let Some(n) = games {
                cfg.games = n;
            }
            if cfg.agents.len() < 2 {
                return Err(usage(anyhow!("a tournament needs at least two agents")));
            }
            cmd_tournament(cfg, format)
        }
        Command::Bench { batch, height, width, seconds, seed } => {
            if !(seconds >= 0.0) {
                return Err(usage(anyhow!("seconds must be non-negative")));
            }
            let report = run_bench(&BenchConfig { height, width, batch, seconds, seed }).map_err(env_failure)?;
            match format {
                Format::Json => println!("{}", canonical_json(&Versioned::new(&report))),
                Format::Text => {
                    println!(
                        "{}x{} batch {}: {} half-turn steps in {:.3} s = {:.1} steps/s ({} episodes)",
                        report.height, report.width, report.batch, report.steps, report.elapsed_secs, report.steps_per_sec, report.episodes
                    );
                    for (k, e) in report.per_env.iter().enumerate() {
                        println!("  env {k}: {} steps, {:.1} steps/s, {} episodes", e.steps, e.steps_per_sec, e.episodes);
                    }
                }
            }
            Ok(())
        }
        Command::Script { run, actions, dump_obs } => cmd_script(load_run(&run)?, &actions, dump_obs),
        Command::Replay(ReplayCommand::Verify { path }) => {
            let log = ReplayLog::load_from_path(&path).map_err(domain)?;
            match replay_verify(&log).map_err(domain)? {
                Verification::Verified { final_hash } => {
                    println!("Verified {final_hash:016x}");
                    Ok(())
                }
                Verification::Divergence { tick } => {
                    println!("Divergence at tick {tick}");
                    Err(domain(anyhow!("replay diverged at tick {tick}")))
                }
            }
        }
        Command::Replay(ReplayCommand::Render { path, perspective, out }) => cmd_render(&path, perspective, out.as_deref(), format),
    }
}

fn load_run(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.spec {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(path) = &args.map {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
        parse_map_text(&text).map_err(|e| domain(anyhow!("{}: {e}", path.display())))?;
        cfg.env.map = MapSource::Text(text);
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = Some(dir.clone());
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

impl<'a, T: Serialize> Versioned<'a, T> {
    fn new(body: &'a T) -> Self {
        Versioned { format_version: OUTPUT_FORMAT_VERSION, body }
    }
}

/// Sorted keys, compact, no trailing newline.
fn canonical_json<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("serializable");
    serde_json::to_string(&value).expect("json value serializes")
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).map_err(domain)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(domain)
}

#[derive(Serialize)]
struct MatchReport {
    players: [String; 2],
    seed: u64,
    winner: Option<String>,
    outcome: Outcome,
    ticks: u32,
    land: [u32; 2],
    army: [u64; 2],
    final_hash: String,
}

fn cmd_match(cfg: RunConfig, force_replay: bool, format: Format) -> CmdResult {
    if cfg.agents.len() < 2 {
        return Err(usage(anyhow!("a match needs two agents")));
    }
    let record = force_replay || cfg.output.replays;
    let mut a = cfg.agents[0].build();
    let mut b = cfg.agents[1].build();
    let result = arena::run_match([a.as_mut(), b.as_mut()], &cfg.env, cfg.seed, record).map_err(arena_failure)?;
    let report = MatchReport {
        players: result.players.clone(),
        seed: cfg.seed,
        winner: result.winner_id().map(str::to_string),
        outcome: result.outcome,
        ticks: result.ticks,
        land: result.scoreboard.land,
        army: result.scoreboard.army,
        final_hash: format!("{:016x}", result.final_hash),
    };
    let json = canonical_json(&Versioned::new(&report));
    if let Some(dir) = &cfg.output.dir {
        write_file(&dir.join("match.json"), &format!("{json}\n"))?;
        if let Some(log) = &result.replay {
            write_file(&dir.join("replay.jsonl"), &log.to_canonical_string())?;
        }
    } else if result.replay.is_some() {
        log::warn!("no output directory configured; replay not written");
    }
    match format {
        Format::Json => println!("{json}"),
        Format::Text => {
            let verdict = match result.outcome {
                Outcome::Win(p) => format!("{} ({p}) wins", result.players[p.index()]),
                Outcome::Draw => "draw by truncation".to_string(),
            };
            println!(
                "{} vs {}, seed {}: {verdict} after {} ticks; land {}:{} army {}:{}",
                report.players[0], report.players[1], cfg.seed, report.ticks, report.land[0], report.land[1], report.army[0], report.army[1]
            );
        }
    }
    Ok(())
}

fn cmd_tournament(cfg: RunConfig, format: Format) -> CmdResult {
    let factories: Vec<&dyn AgentFactory> = cfg.agents.iter().map(|a| a as &dyn AgentFactory).collect();
    let anchor_id = cfg.elo.as_ref().map(|e| (e.anchor.to_string(), e.rating));
    let anchor = anchor_id.as_ref().map(|(id, r)| (id.as_str(), *r));
    let (report, series) = arena::run_tournament(&factories, cfg.games, &cfg.env, cfg.seed, anchor, cfg.output.replays)
        .map_err(arena_failure)?;
    let json = report.to_canonical_json();
    if let Some(dir) = &cfg.output.dir {
        write_file(&dir.join("report.json"), &json)?;
        if cfg.output.replays {
            write_replays(dir, &series)?;
        }
    }
    match format {
        Format::Json => print!("{json}"),
        Format::Text => print_report(&report),
    }
    Ok(())
}

fn write_replays(dir: &Path, series: &[SeriesResult]) -> CmdResult {
    for s in series {
        for game in &s.games {
            if let Some(log) = &game.replay {
                let path = dir.join("replays").join(format!("{}_vs_{}", s.a, s.b)).join(format!("game_{:04}.jsonl", game.index));
                write_file(&path, &log.to_canonical_string())?;
            }
        }
    }
    Ok(())
}

fn print_report(report: &TournamentReport) {
    println!("{} games per pair, master seed {}", report.games_per_pair, report.master_seed);
    for p in &report.pairs {
        println!(
            "{:>10} vs {:<10} {:>4}-{:<4} draws {:<4} rate {:.4}  95% CI [{:.4}, {:.4}]",
            p.a, p.b, p.wins_a, p.wins_b, p.draws, p.rate_a, p.ci_low, p.ci_high
        );
    }
    if let Some(elo) = &report.elo {
        println!("Elo ({} fixed at {}):", elo.anchor, elo.anchor_rating);
        let mut ratings: Vec<_> = elo.ratings.iter().collect();
        ratings.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));
        for (agent, r) in ratings {
            println!("  {agent:<10} {r:.1}");
        }
    }
}

#[derive(Serialize)]
struct ScriptLine {
    tick: u32,
    state_hash: String,
    rewards: [f64; 2],
    terminated: bool,
    truncated: bool,
    malformed: [bool; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    observations: Option<[generals_core::game::Observation; 2]>,
}

fn cmd_script(cfg: RunConfig, actions: &Path, dump_obs: bool) -> CmdResult {
    let file = fs::File::open(actions).with_context(|| format!("opening {}", actions.display())).map_err(usage)?;
    let mut env = GeneralsEnv::new(cfg.env.clone()).map_err(env_failure)?;
    let initial = env.reset(cfg.seed).map_err(env_failure)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let emit = |out: &mut io::StdoutLock, line: &ScriptLine| -> CmdResult {
        writeln!(out, "{}", canonical_json(line)).map_err(domain)
    };
    let state = env.state().expect("reset");
    emit(
        &mut out,
        &ScriptLine {
            tick: state.tick(),
            state_hash: format!("{:016x}", state.state_hash()),
            rewards: [0.0, 0.0],
            terminated: false,
            truncated: false,
            malformed: [false, false],
            observations: dump_obs.then_some(initial),
        },
    )?;
    for (n, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(domain)?;
        if line.trim().is_empty() {
            continue;
        }
        let pair: [ActionVector; 2] =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", actions.display(), n + 1)).map_err(usage)?;
        log::debug!("tick {} moves {:?}", env.state().map_or(0, |s| s.tick()), pair.map(decode_action));
        let result = env.step(pair).map_err(env_failure)?;
        emit(
            &mut out,
            &ScriptLine {
                tick: env.state().expect("reset").tick(),
                state_hash: format!("{:016x}", result.info.state_hash),
                rewards: result.rewards,
                terminated: result.terminated,
                truncated: result.truncated,
                malformed: result.info.malformed.map(|m| m.is_some()),
                observations: dump_obs.then(|| result.observations.clone()),
            },
        )?;
        if result.done() {
            break;
        }
    }
    Ok(())
}

fn cmd_render(path: &Path, perspective: Perspective, out: Option<&Path>, format: Format) -> CmdResult {
    let log = ReplayLog::load_from_path(path).map_err(domain)?;
    let mut state = log.header.initial_state().map_err(domain)?;
    let mut frames = vec![render(&state, perspective)];
    for record in &log.records {
        state.apply_half_turn(record.actions.map(decode_action));
        frames.push(render(&state, perspective));
    }
    let encode = |f: &render::Frame| match format {
        Format::Text => f.to_text(),
        Format::Json => format!("{}\n", canonical_json(&Versioned::new(f))),
    };
    match out {
        Some(dir) => {
            let ext = if format == Format::Json { "json" } else { "txt" };
            for f in &frames {
                write_file(&dir.join(format!("frame_{:05}.{ext}", f.tick)), &encode(f))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            for f in &frames {
                let mut chunk = encode(f);
                if format == Format::Text {
                    chunk.push('\n');
                }
                match lock.write_all(chunk.as_bytes()) {
                    Ok(()) => {}
                    Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
                    Err(e) => return Err(domain(e)),
                }
            }
        }
    }
    Ok(())
}
