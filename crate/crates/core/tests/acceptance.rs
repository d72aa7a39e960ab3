//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::time::{Duration, Instant};

use common::{brute_force_combat, expected_growth, random_state};
use generals_core::arena::{
    elo_from_winrate, fit_elo, run_match, wilson_interval, AgentFactory, AgentKind, OpponentPool, PoolConfig,
    PoolDecision, WinRateMatrix,
};
use generals_core::bench::{run_bench, BenchConfig};
use generals_core::env::{EnvConfig, GeneralsEnv, MapSource};
use generals_core::game::{resolve_movement, Cell, CellKind, GridState, Move, Player, Pos, RulesConfig, Split};
use generals_core::mapgen::{bfs_distance, generate, parse_map_text, validate, MapSpec};
use generals_core::replay::{replay_verify, ReplayLog, Verification};
use generals_core::rewards::{potential, sparse_reward, PotentialInputs, RewardMode, ShapingConfig};

const GOLDEN_MAP: &str = include_str!("fixtures/golden_map.txt");
const GOLDEN_REPLAY: &str = include_str!("fixtures/golden_replay.jsonl");

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= budget, || format!("took {took:.1?}, budget {budget:?}"))
}

fn wilson() -> Check {
    let (lo, hi) = wilson_interval(290, 529, 1.96).map_err(|e| e.to_string())?;
    ensure((lo - 0.5056).abs() <= 1e-4 && (hi - 0.5901).abs() <= 1e-4, || format!("got ({lo:.6}, {hi:.6})"))?;
    Ok(format!("(290, 529) -> ({lo:.4}, {hi:.4})"))
}

fn elo() -> Check {
    let mut m = WinRateMatrix::new(vec!["zero".into(), "flobot".into()]);
    m.add(0, 1, 96, 4, 100);
    let ratings = fit_elo(&m, "flobot", 1500.0).map_err(|e| e.to_string())?;
    let zero = ratings["zero"];
    ensure((zero - 2052.0).abs() <= 1.0, || format!("fit gives {zero:.2}"))?;
    let gap = elo_from_winrate(0.5482).map_err(|e| e.to_string())?;
    ensure((gap - 33.6).abs() <= 0.5, || format!("0.5482 gives {gap:.2}"))?;
    Ok(format!("96% vs anchor 1500 -> {zero:.2}; 0.5482 -> +{gap:.2}"))
}

fn map_statistics() -> Check {
    let start = Instant::now();
    let spec = MapSpec::default();
    let mut mountain_sum = 0.0;
    for seed in 0..1000u64 {
        let layout = generate(&spec, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let violations = validate(&layout, &spec);
        ensure(violations.is_empty(), || format!("seed {seed}: {violations:?}"))?;
        // restate the constraints directly rather than trusting the validator alone
        let castles: Vec<Pos> = layout.castles().collect();
        ensure((9..=11).contains(&castles.len()), || format!("seed {seed}: {} castles", castles.len()))?;
        ensure(layout.castle_garrisons.values().all(|g| (40..=50).contains(g)), || format!("seed {seed}: garrison"))?;
        let [a, b] = layout.general_positions;
        let d = bfs_distance(&layout, a, b);
        ensure(d.is_some_and(|d| d >= 15), || format!("seed {seed}: generals at distance {d:?}"))?;
        for g in [a, b] {
            let near = castles.iter().any(|&c| bfs_distance(&layout, g, c).is_some_and(|d| d <= 6));
            ensure(near, || format!("seed {seed}: no castle within 6 of {g:?}"))?;
        }
        let frac = layout.mountain_fraction();
        ensure((frac - spec.mountain_density).abs() <= spec.mountain_tolerance, || format!("seed {seed}: mountains {frac}"))?;
        mountain_sum += frac;
    }
    let mean = mountain_sum / 1000.0;
    ensure((mean - 0.20).abs() <= 0.03, || format!("mean mountain fraction {mean}"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("1000/1000 maps valid, mean mountain fraction {mean:.4}, {:.1?}", start.elapsed()))
}

fn determinism() -> Check {
    let start = Instant::now();
    let cfg = EnvConfig::default();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut decisive = 0;
    for seed in 0..100u64 {
        let kinds = match seed % 3 {
            0 => [AgentKind::Random, AgentKind::Random],
            1 => [AgentKind::Expander, AgentKind::Random],
            _ => [AgentKind::Random, AgentKind::Expander],
        };
        let (mut a, mut b) = (kinds[0].build(), kinds[1].build());
        let live = run_match([a.as_mut(), b.as_mut()], &cfg, 1000 + seed, true).map_err(|e| e.to_string())?;
        decisive += usize::from(live.winner_id().is_some());
        let path = dir.path().join(format!("{seed}.jsonl"));
        live.replay.as_ref().unwrap().save_to_path(&path).map_err(|e| e.to_string())?;
        let loaded = ReplayLog::load_from_path(&path).map_err(|e| format!("seed {seed}: {e}"))?;
        let verdict = replay_verify(&loaded).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(verdict == Verification::Verified { final_hash: live.final_hash }, || format!("seed {seed}: {verdict:?}"))?;
    }
    let golden_cfg = EnvConfig { map: MapSource::Text(GOLDEN_MAP.into()), truncation_ticks: 150, ..EnvConfig::default() };
    let (mut a, mut b) = (AgentKind::Expander.build(), AgentKind::Random.build());
    let golden = run_match([a.as_mut(), b.as_mut()], &golden_cfg, 5, true).map_err(|e| e.to_string())?;
    ensure(golden.replay.unwrap().to_canonical_string() == GOLDEN_REPLAY, || "golden replay bytes differ".into())?;
    let loaded = ReplayLog::load_from_str(GOLDEN_REPLAY).map_err(|e| e.to_string())?;
    ensure(matches!(replay_verify(&loaded), Ok(Verification::Verified { .. })), || "golden replay does not verify".into())?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!("100/100 replays verified ({decisive} decisive), golden replay byte-identical, {:.1?}", start.elapsed()))
}

fn shaping() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let (mut terminal, mut truncated) = (0, 0);
    for gamma in [1.0, 0.99] {
        let shaping = ShapingConfig { gamma, ..ShapingConfig::default() };
        let cfg = EnvConfig { reward: RewardMode::Shaped(shaping), truncation_ticks: 400, ..EnvConfig::default() };
        for k in 0..100u64 {
            let seed = 7000 + k;
            let kinds = if k % 2 == 0 { [AgentKind::Expander, AgentKind::Random] } else { [AgentKind::Random, AgentKind::Random] };
            let mut agents = [kinds[0].build(), kinds[1].build()];
            let mut env = GeneralsEnv::new(cfg.clone()).map_err(|e| e.to_string())?;
            let mut obs = env.reset(seed).map_err(|e| e.to_string())?;
            let phi0 = Player::ALL.map(|p| potential(&PotentialInputs::from_state(env.state().unwrap(), p), &shaping));
            let mut rngs = Player::ALL.map(|p| generals_core::arena::seat_rng(seed, p));
            let mut sums = [0.0f64; 2];
            let mut t = 0i32;
            loop {
                let actions = [0, 1].map(|i| agents[i].act(&obs[i], env.memory(Player::ALL[i]), &mut rngs[i]));
                let r = env.step(actions).map_err(|e| e.to_string())?;
                for i in 0..2 {
                    sums[i] += gamma.powi(t) * r.rewards[i];
                }
                t += 1;
                if r.done() {
                    break;
                }
                obs = r.observations;
            }
            let state = env.state().unwrap();
            if state.is_terminal() { terminal += 1 } else { truncated += 1 }
            for p in Player::ALL {
                let phi_t = if state.is_terminal() { 0.0 } else { potential(&PotentialInputs::from_state(state, p), &shaping) };
                let original = gamma.powi(t - 1) * sparse_reward(state.winner(), p);
                let expect = original + gamma.powi(t) * phi_t - phi0[p.index()];
                worst = worst.max((sums[p.index()] - expect).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("telescoping error {worst:e}"))?;
    ensure(terminal > 0 && truncated > 0, || format!("{terminal} terminal / {truncated} truncated episodes"))?;

    let cfg = ShapingConfig::default();
    for seed in 0..10_000u64 {
        let s = random_state(seed);
        let a = potential(&PotentialInputs::from_state(&s, Player::P0), &cfg);
        let b = potential(&PotentialInputs::from_state(&s, Player::P1), &cfg);
        ensure(a.abs() <= 1.0 && a == -b, || format!("state {seed}: phi {a} vs {b}"))?;
    }
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "200 rollouts ({terminal} terminal, {truncated} truncated), max error {worst:.1e}; 10000 states bounded and antisymmetric, {:.1?}",
        start.elapsed()
    ))
}

fn rules() -> Check {
    let start = Instant::now();
    let mut cases = 0;
    for source_army in 2..=51u32 {
        for split in [Split::All, Split::Half] {
            for defender_army in 1..=50u32 {
                for (kind, owner) in [
                    (CellKind::Plain, None),
                    (CellKind::Castle, None),
                    (CellKind::Plain, Some(Player::P1)),
                    (CellKind::Castle, Some(Player::P1)),
                    (CellKind::General, Some(Player::P1)),
                    (CellKind::Plain, Some(Player::P0)),
                ] {
                    let source = Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: source_army };
                    let dest = Cell { kind, owner, army: defender_army };
                    let res = resolve_movement(source, dest, split);
                    let expect = brute_force_combat(Player::P0, res.moved, owner, defender_army);
                    ensure((res.dest.owner, res.dest.army) == expect, || {
                        format!("{source_army} {split:?} onto {dest:?}: {:?} vs {expect:?}", res.dest)
                    })?;
                    cases += 1;
                }
            }
        }
    }

    let layout = parse_map_text("A.....\n......\n......\n.....B\n").map_err(|e| e.to_string())?;
    let mut base = GridState::from_layout(&layout, RulesConfig::default());
    base.set_cell(Pos::new(0, 1), Cell { kind: CellKind::Plain, owner: Some(Player::P0), army: 4 });
    base.set_cell(Pos::new(1, 1), Cell { kind: CellKind::Castle, owner: Some(Player::P0), army: 9 });
    base.set_cell(Pos::new(2, 5), Cell { kind: CellKind::Plain, owner: Some(Player::P1), army: 2 });
    let interval = base.config().growth_interval_turns;
    let mut windows = 0;
    for start_tick in (0..200).step_by(7) {
        let mut s = base.clone();
        s.set_tick(start_tick);
        let before = s.scoreboard();
        let mut per_tick = [0u64; 2];
        for _ in 0..2 * interval {
            s.apply_half_turn([Move::Pass, Move::Pass]);
            let g = expected_growth(&s, s.tick());
            per_tick[0] += g[0];
            per_tick[1] += g[1];
        }
        let after = s.scoreboard();
        for (p, production, land) in [(0usize, 2u64, 3u64), (1, 1, 2)] {
            let grown = after.army[p] - before.army[p];
            let identity = u64::from(interval) * production + land;
            ensure(grown == identity && per_tick[p] == identity, || {
                format!("window from {start_tick}, player {p}: grew {grown}, expected {identity}")
            })?;
        }
        windows += 1;
    }
    Ok(format!("{cases} combat cases match the oracle; {windows} static windows satisfy growth identity, {:.1?}", start.elapsed()))
}

fn throughput() -> Check {
    let report = run_bench(&BenchConfig { height: 24, width: 24, batch: 8, seconds: 10.0, seed: 0 }).map_err(|e| e.to_string())?;
    let rate = report.steps_per_sec;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    ensure(rate >= 3500.0, || format!("{rate:.0} steps/s on {cores} core(s)"))?;
    Ok(format!("batch 8 on 24x24: {rate:.0} half-turn steps/s over {:.1} s on {cores} core(s)", report.elapsed_secs))
}

fn pool() -> Check {
    let mut pool = OpponentPool::new(PoolConfig::default(), [0u32, 1, 2]).map_err(|e| e.to_string())?;
    let mut trace = Vec::new();
    for (candidate, rate) in [(3u32, 0.45), (4, 0.449), (5, 0.9), (6, 0.10), (7, 0.5), (8, 0.46)] {
        let decision = pool.update(candidate, rate);
        let members: Vec<u32> = pool.members().copied().collect();
        ensure(members.len() == 3, || "pool size changed".into())?;
        trace.push((candidate, decision, members));
    }
    let expect = [
        (3, PoolDecision::Accepted { evicted: 0 }, vec![1, 2, 3]),
        (4, PoolDecision::Rejected, vec![1, 2, 3]),
        (5, PoolDecision::Accepted { evicted: 1 }, vec![2, 3, 5]),
        (6, PoolDecision::Rejected, vec![2, 3, 5]),
        (7, PoolDecision::Accepted { evicted: 2 }, vec![3, 5, 7]),
        (8, PoolDecision::Accepted { evicted: 3 }, vec![5, 7, 8]),
    ];
    ensure(trace == expect, || format!("trace {trace:?}"))?;

    let mut fifo = OpponentPool::new(PoolConfig::default(), [0u32, 0, 0]).map_err(|e| e.to_string())?;
    for c in 1..=5 {
        fifo.update(c, 0.45);
    }
    let kept: Vec<u32> = fifo.members().copied().collect();
    ensure(kept == [3, 4, 5], || format!("after five admissions pool holds {kept:?}"))?;
    Ok("gate at 0.45 inclusive, FIFO eviction trace matches, five admissions leave 3,4,5".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("wilson reproduction", wilson),
        ("elo reproduction", elo),
        ("map statistics", map_statistics),
        ("determinism", determinism),
        ("shaping invariance", shaping),
        ("rules conformance", rules),
        ("throughput", throughput),
        ("opponent pool traces", pool),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
