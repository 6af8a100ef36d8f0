use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{BonusSpec, ExperimentConfig};
use crate::bonus::{IntrinsicReward, RewardModule};
use crate::diffkit::SeededRng;
use crate::gridworld::{VecEnv, ACTION_COUNT};
use crate::mixer::FabricState;
use crate::ppo::{train_loop, PolicyParams, RolloutRecord, RunLog, TrainOptions};
use crate::{Error, Result};

/// Bumped whenever a CSV column or JSONL field changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Exact CSV header, in order.
pub const CSV_COLUMNS: [&str; 11] = [
    "global_step",
    "seed",
    "episode_return_mean",
    "episode_len_mean",
    "success_rate",
    "intrinsic_mean",
    "beta",
    "policy_loss",
    "value_loss",
    "entropy",
    "wall_time_s",
];

#[derive(Serialize)]
struct CsvRow {
    global_step: u64,
    seed: u64,
    episode_return_mean: f64,
    episode_len_mean: f64,
    success_rate: f64,
    intrinsic_mean: f64,
    beta: f64,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    wall_time_s: f64,
}

impl CsvRow {
    fn new(r: &RolloutRecord, seed: u64, wall_time_s: f64) -> Self {
        CsvRow {
            global_step: r.global_step,
            seed,
            episode_return_mean: r.episode_return_mean,
            episode_len_mean: r.episode_len_mean,
            success_rate: r.success_rate,
            intrinsic_mean: r.intrinsic_mean,
            beta: r.beta,
            policy_loss: r.policy_loss,
            value_loss: r.value_loss,
            entropy: r.entropy,
            wall_time_s,
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    run_id: &'a str,
    schema_version: u32,
    #[serde(flatten)]
    row: CsvRow,
}

/// Training output of one seed.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub log: RunLog,
    pub csv_path: PathBuf,
    pub jsonl_path: PathBuf,
}

/// Builds the intrinsic reward for one seed: nothing, a bare module or a
/// weighted mixture.
pub fn build_bonus(spec: &BonusSpec, obs_dim: usize, n_envs: usize, seed: u64) -> Result<Option<Box<dyn IntrinsicReward>>> {
    let mut modules = Vec::with_capacity(spec.members.len());
    for (i, m) in spec.members.iter().enumerate() {
        // Members get disjoint seeds so two copies of one algorithm differ.
        let member_seed = seed.wrapping_add((i as u64) << 32);
        modules.push(RewardModule::new(m.algorithm, m.config.clone(), obs_dim, ACTION_COUNT, n_envs, member_seed)?);
    }
    Ok(match modules.len() {
        0 => None,
        1 if spec.members[0].weight == 1.0 => modules.pop().map(|m| Box::new(m) as Box<dyn IntrinsicReward>),
        _ => {
            let weights = spec.members.iter().map(|m| m.weight).collect();
            Some(Box::new(FabricState::with_weights(modules, weights)?))
        }
    })
}

/// Trains one seed without touching the file system.
pub fn train_seed(config: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    config.validate()?;
    let mut env = VecEnv::new(config.env.clone(), config.ppo.n_envs, seed)?;
    let mut params = PolicyParams::new(
        env.obs_dim(),
        ACTION_COUNT,
        config.ppo.hidden,
        config.head_mode,
        config.ppo.lr,
        &mut SeededRng::with_stream(seed, 3),
    )?;
    let mut bonus = build_bonus(&config.bonus, env.obs_dim(), config.ppo.n_envs, seed)?;
    let options = TrainOptions {
        total_steps: config.total_steps,
        seed,
        beta_unit: config.bonus.beta_unit,
        warmup_rollouts: config.warmup_rollouts,
    };
    let bonus_ref = bonus.as_mut().map(|b| b.as_mut() as &mut dyn IntrinsicReward);
    let log = train_loop(&mut env, bonus_ref, &mut params, &config.ppo, &options)?;
    Ok(log)
}

/// Worker pool sized by `RLX_THREADS`, falling back to the core count.
pub(crate) fn pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("RLX_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidArgument(format!("RLX_THREADS=`{v}` is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_logs(config: &ExperimentConfig, dir: &Path, seed: u64, log: &RunLog) -> Result<(PathBuf, PathBuf)> {
    let csv_path = dir.join(format!("seed_{seed}.csv"));
    let jsonl_path = dir.join(format!("seed_{seed}.jsonl"));

    let mut w = csv::Writer::from_path(&csv_path)?;
    if log.records.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in &log.records {
        let wall = if config.log_wall_time { r.wall_time_s } else { 0.0 };
        w.serialize(CsvRow::new(r, seed, wall))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let mut out = String::new();
    for r in &log.records {
        let row = JsonRow {
            run_id: &config.run_id,
            schema_version: SCHEMA_VERSION,
            row: CsvRow::new(r, seed, r.wall_time_s),
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    fs::File::create(&jsonl_path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(&jsonl_path, e))?;
    Ok((csv_path, jsonl_path))
}

/// Directory receiving the logs of `config`.
pub fn run_dir(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join(&config.run_id)
}

/// Trains every seed (in parallel, up to `RLX_THREADS` at once) and writes
/// `seed_<n>.csv`, `seed_<n>.jsonl` and the canonical `config.toml` under
/// `out_dir/run_id`. Output files do not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    config.validate()?;
    let dir = run_dir(config);
    create_dir(&dir)?;
    let canonical = config.to_toml()?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, canonical).map_err(|e| Error::io(&cfg_path, e))?;

    let logs: Vec<Result<RunLog>> = pool()?.install(|| config.seeds.par_iter().map(|&s| train_seed(config, s)).collect());
    let mut runs = Vec::with_capacity(logs.len());
    for (&seed, log) in config.seeds.iter().zip(logs) {
        let log = log?;
        let (csv_path, jsonl_path) = write_logs(config, &dir, seed, &log)?;
        runs.push(SeedRun {
            seed,
            log,
            csv_path,
            jsonl_path,
        });
    }
    Ok(runs)
}
