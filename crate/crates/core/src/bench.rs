//! Batched self-play throughput measurement.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::{seat_rng, Agent, RandomLegalAgent};
use crate::env::{step_batch, ActionVector, EnvConfig, EnvError, GeneralsEnv, MapSource};
use crate::game::{Observation, Player};
use crate::mapgen::MapSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub height: usize,
    pub width: usize,
    pub batch: usize,
    pub seconds: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { height: 24, width: 24, batch: 8, seconds: 5.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    /// Half-turn steps summed over the batch.
    pub steps: u64,
    pub episodes: u64,
    pub elapsed_secs: f64,
    pub steps_per_sec: f64,
    pub per_env: Vec<EnvThroughput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvThroughput {
    pub steps: u64,
    pub episodes: u64,
    pub steps_per_sec: f64,
}

struct Seats {
    agents: [RandomLegalAgent; 2],
    rngs: [ChaCha8Rng; 2],
    obs: [Observation; 2],
    next_seed: u64,
    steps: u64,
    episodes: u64,
}

impl Seats {
    fn actions(&mut self, env: &GeneralsEnv) -> [ActionVector; 2] {
        let [a, b] = &mut self.agents;
        let [ra, rb] = &mut self.rngs;
        [a.act(&self.obs[0], env.memory(Player::P0), ra), b.act(&self.obs[1], env.memory(Player::P1), rb)]
    }
}

/// Step `batch` environments with random legal play for `seconds` of wall
/// time, resetting each as it finishes. A zero duration yields an empty report.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, EnvError> {
    let spec = MapSpec::with_size(cfg.height, cfg.width);
    let env_cfg = EnvConfig { map: MapSource::Procedural(spec), ..EnvConfig::default() };
    let empty = BenchReport {
        batch: cfg.batch,
        height: cfg.height,
        width: cfg.width,
        steps: 0,
        episodes: 0,
        elapsed_secs: 0.0,
        steps_per_sec: 0.0,
        per_env: Vec::new(),
    };
    if !(cfg.seconds > 0.0) || cfg.batch == 0 {
        return Ok(empty);
    }

    let mut envs = Vec::with_capacity(cfg.batch);
    let mut seats = Vec::with_capacity(cfg.batch);
    for k in 0..cfg.batch as u64 {
        let seed = cfg.seed.wrapping_add(k.wrapping_mul(1_000_003));
        let mut env = GeneralsEnv::new(env_cfg.clone())?;
        let obs = env.reset(seed)?;
        envs.push(env);
        seats.push(Seats {
            agents: [RandomLegalAgent, RandomLegalAgent],
            rngs: [seat_rng(seed, Player::P0), seat_rng(seed, Player::P1)],
            obs,
            next_seed: seed.wrapping_add(1),
            steps: 0,
            episodes: 0,
        });
    }

    let budget = Duration::from_secs_f64(cfg.seconds);
    let start = Instant::now();
    while start.elapsed() < budget {
        let actions: Vec<[ActionVector; 2]> =
            seats.par_iter_mut().zip(envs.par_iter()).map(|(s, env)| s.actions(env)).collect();
        let results = step_batch(&mut envs, &actions);
        for ((seat, env), result) in seats.iter_mut().zip(envs.iter_mut()).zip(results) {
            let result = result?;
            seat.steps += 1;
            if result.done() {
                seat.episodes += 1;
                seat.obs = env.reset(seat.next_seed)?;
                seat.next_seed = seat.next_seed.wrapping_add(1);
            } else {
                seat.obs = result.observations;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let per_env: Vec<EnvThroughput> = seats
        .iter()
        .map(|s| EnvThroughput { steps: s.steps, episodes: s.episodes, steps_per_sec: s.steps as f64 / elapsed })
        .collect();
    let steps = per_env.iter().map(|e| e.steps).sum::<u64>();
    Ok(BenchReport {
        steps,
        episodes: per_env.iter().map(|e| e.episodes).sum(),
        elapsed_secs: elapsed,
        steps_per_sec: steps as f64 / elapsed,
        per_env,
        ..empty
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_is_empty() {
        let r = run_bench(&BenchConfig { seconds: 0.0, ..BenchConfig::default() }).unwrap();
        assert_eq!(r.steps, 0);
        assert!(r.per_env.is_empty());
    }

    #[test]
    fn short_run_counts_every_env() {
        let r = run_bench(&BenchConfig { height: 12, width: 12, batch: 3, seconds: 0.05, seed: 1 }).unwrap();
        assert_eq!(r.per_env.len(), 3);
        assert!(r.steps > 0);
        assert_eq!(r.steps, r.per_env.iter().map(|e| e.steps).sum::<u64>());
    }
}
