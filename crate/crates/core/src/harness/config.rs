use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bonus::{Algorithm, BonusConfig};
use crate::diffkit::WeightInit;
use crate::gridworld::EnvConfig;
use crate::normstats::{ObsNorm, RewardNorm};
use crate::ppo::{BetaUnit, HeadMode, PpoConfig};
use crate::{Error, Result};

/// Which per-algorithm defaults a bonus starts from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// RMS observations, RMS rewards, full update proportion, orthogonal.
    #[default]
    Baseline,
    /// Best per-algorithm settings on DoorKey.
    Best,
}

impl Preset {
    pub fn config(self, algorithm: Algorithm) -> BonusConfig {
        match self {
            Preset::Baseline => BonusConfig::baseline(algorithm),
            Preset::Best => BonusConfig::best(algorithm),
        }
    }
}

/// One bonus of the (possibly mixed) intrinsic reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub algorithm: Algorithm,
    pub weight: f64,
    pub config: BonusConfig,
}

/// Resolved bonus setup: no members means plain PPO, one member a bare
/// module, several a weighted mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BonusSpec {
    pub members: Vec<MemberSpec>,
    pub beta_unit: BetaUnit,
}

/// Full description of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub seeds: Vec<u64>,
    pub total_steps: u64,
    pub out_dir: PathBuf,
    pub head_mode: HeadMode,
    /// Write real elapsed seconds to the CSV. Off by default so the CSV of a
    /// run is reproducible byte for byte; JSONL always carries the time.
    pub log_wall_time: bool,
    pub warmup_rollouts: usize,
    pub env: EnvConfig,
    pub bonus: BonusSpec,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

macro_rules! bonus_overrides {
    ($(#[$meta:meta])* $name:ident { $($extra:ident : $ety:ty),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Debug, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $($extra: $ety,)*
            obs_norm: Option<ObsNorm>,
            rew_norm: Option<RewardNorm>,
            update_proportion: Option<f64>,
            weight_init: Option<WeightInit>,
            k: Option<usize>,
            c: Option<f64>,
            c_max: Option<f64>,
            lambda: Option<f64>,
            embed_dim: Option<usize>,
            hidden: Option<usize>,
            ensemble_size: Option<usize>,
            lr: Option<f64>,
            aux_batch_size: Option<usize>,
            beta0: Option<f64>,
            kappa: Option<f64>,
        }

        impl $name {
            fn apply(&self, c: &mut BonusConfig) {
                if let Some(v) = self.obs_norm {
                    c.obs_norm = v;
                }
                if let Some(v) = self.rew_norm {
                    c.rew_norm = v;
                }
                if let Some(v) = self.update_proportion {
                    c.update_proportion = v;
                }
                if let Some(v) = self.weight_init {
                    c.weight_init = v;
                }
                if let Some(v) = self.k {
                    c.k = v;
                }
                if let Some(v) = self.c {
                    c.c = v;
                }
                if let Some(v) = self.c_max {
                    c.c_max = v;
                }
                if let Some(v) = self.lambda {
                    c.lambda = v;
                }
                if let Some(v) = self.embed_dim {
                    c.embed_dim = v;
                }
                if let Some(v) = self.hidden {
                    c.hidden = v;
                }
                if let Some(v) = self.ensemble_size {
                    c.ensemble_size = v;
                }
                if let Some(v) = self.lr {
                    c.lr = v;
                }
                if let Some(v) = self.aux_batch_size {
                    c.aux_batch_size = v;
                }
                if let Some(v) = self.beta0 {
                    c.beta0 = v;
                }
                if let Some(v) = self.kappa {
                    c.kappa = v;
                }
            }
        }
    };
}

bonus_overrides!(
    /// `[[bonus.members]]` entry as written.
    RawMember {
        algorithm: Algorithm,
        weight: Option<f64>,
        preset: Option<Preset>,
    }
);

bonus_overrides!(
    /// `[bonus]` table as written. Settings here apply to every member and
    /// are themselves overridden by per-member settings.
    #[derive(Default)]
    RawBonus {
        algorithm: Option<String>,
        algorithms: Option<Vec<Algorithm>>,
        weights: Option<Vec<f64>>,
        preset: Option<Preset>,
        beta_unit: Option<BetaUnit>,
        members: Option<Vec<RawMember>>,
    }
);

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run_id: Option<String>,
    seeds: Option<Vec<u64>>,
    total_steps: Option<u64>,
    out_dir: Option<PathBuf>,
    head_mode: Option<HeadMode>,
    log_wall_time: Option<bool>,
    warmup_rollouts: Option<usize>,
    env: Option<EnvConfig>,
    bonus: Option<RawBonus>,
    ppo: Option<PpoConfig>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn resolve_bonus(raw: RawBonus) -> Result<BonusSpec> {
    let preset = raw.preset.unwrap_or_default();
    let shapes = [raw.algorithm.is_some(), raw.algorithms.is_some(), raw.members.is_some()];
    if shapes.iter().filter(|&&b| b).count() > 1 {
        return Err(config_err("bonus", "use only one of `algorithm`, `algorithms` or `members`"));
    }
    let member = |algorithm: Algorithm, weight: f64| {
        let mut config = preset.config(algorithm);
        raw.apply(&mut config);
        MemberSpec {
            algorithm,
            weight,
            config,
        }
    };
    let mut members = Vec::new();
    if let Some(list) = &raw.algorithms {
        let weights = raw.weights.clone().unwrap_or_else(|| vec![1.0; list.len()]);
        if weights.len() != list.len() {
            return Err(config_err("bonus.weights", format!("{} weights for {} algorithms", weights.len(), list.len())));
        }
        members = list.iter().zip(weights).map(|(&a, w)| member(a, w)).collect();
    } else if let Some(raws) = &raw.members {
        if raw.weights.is_some() {
            return Err(config_err("bonus.weights", "set `weight` on each member instead"));
        }
        for m in raws {
            let mut config = m.preset.unwrap_or(preset).config(m.algorithm);
            raw.apply(&mut config);
            m.apply(&mut config);
            members.push(MemberSpec {
                algorithm: m.algorithm,
                weight: m.weight.unwrap_or(1.0),
                config,
            });
        }
    } else {
        if raw.weights.is_some() {
            return Err(config_err("bonus.weights", "weights need `algorithms`"));
        }
        match raw.algorithm.as_deref().unwrap_or("rnd") {
            "none" => {}
            name => {
                let a = name.parse::<Algorithm>().map_err(|e| config_err("bonus.algorithm", e.to_string()))?;
                members.push(member(a, 1.0));
            }
        }
    }
    Ok(BonusSpec {
        members,
        beta_unit: raw.beta_unit.unwrap_or_default(),
    })
}

/// Parses TOML text. Missing values take the baseline defaults; unknown
/// keys, bad enum values and type errors are reported with their path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(&path, e.into_inner().to_string())
    })?;
    let defaults_ppo = PpoConfig::default();
    let cfg = ExperimentConfig {
        run_id: raw.run_id.unwrap_or_else(|| "run".into()),
        seeds: raw.seeds.unwrap_or_else(|| vec![0]),
        total_steps: raw.total_steps.unwrap_or(100_000),
        out_dir: raw.out_dir.unwrap_or_else(|| "runs".into()),
        head_mode: raw.head_mode.unwrap_or_default(),
        log_wall_time: raw.log_wall_time.unwrap_or(false),
        warmup_rollouts: raw.warmup_rollouts.unwrap_or(1),
        env: raw.env.unwrap_or_default(),
        bonus: resolve_bonus(raw.bonus.unwrap_or_default())?,
        ppo: raw.ppo.unwrap_or(defaults_ppo),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        if self.total_steps == 0 {
            return Err(config_err("total_steps", "must be > 0"));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(config_err("run_id", format!("`{}` is not a valid directory name", self.run_id)));
        }
        if self.env.size < 5 {
            return Err(config_err("env.size", format!("{} is below the minimum of 5", self.env.size)));
        }
        if self.env.max_steps == Some(0) {
            return Err(config_err("env.max_steps", "must be > 0"));
        }
        self.ppo.validate()?;
        for (i, m) in self.bonus.members.iter().enumerate() {
            m.config.validate().map_err(|e| match e {
                Error::Config { path, message } => {
                    config_err(&path.replacen("bonus.", &format!("bonus.members[{i}]."), 1), message)
                }
                other => other,
            })?;
            if !m.weight.is_finite() {
                return Err(config_err(&format!("bonus.members[{i}].weight"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Canonical TOML with every value spelled out. Parsing it yields an
    /// identical config.
    pub fn to_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Member<'a> {
            algorithm: Algorithm,
            weight: f64,
            #[serde(flatten)]
            config: &'a BonusConfig,
        }
        #[derive(Serialize)]
        struct Bonus<'a> {
            beta_unit: BetaUnit,
            members: Vec<Member<'a>>,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            run_id: &'a str,
            seeds: &'a [u64],
            total_steps: u64,
            out_dir: &'a PathBuf,
            head_mode: HeadMode,
            log_wall_time: bool,
            warmup_rollouts: usize,
            env: &'a EnvConfig,
            ppo: &'a PpoConfig,
            bonus: Bonus<'a>,
        }
        let out = Out {
            run_id: &self.run_id,
            seeds: &self.seeds,
            total_steps: self.total_steps,
            out_dir: &self.out_dir,
            head_mode: self.head_mode,
            log_wall_time: self.log_wall_time,
            warmup_rollouts: self.warmup_rollouts,
            env: &self.env,
            ppo: &self.ppo,
            bonus: Bonus {
                beta_unit: self.bonus.beta_unit,
                members: self
                    .bonus
                    .members
                    .iter()
                    .map(|m| Member {
                        algorithm: m.algorithm,
                        weight: m.weight,
                        config: &m.config,
                    })
                    .collect(),
            },
        };
        toml::to_string(&out).map_err(|e| config_err("", e.to_string()))
    }
}
