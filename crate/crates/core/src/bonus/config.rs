use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffkit::WeightInit;
use crate::normstats::{ObsNorm, RewardNorm};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Icm,
    Rnd,
    Disagreement,
    Ngu,
    #[serde(rename = "pseudocounts")]
    PseudoCounts,
    Ride,
    Re3,
    E3b,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Icm,
        Algorithm::Rnd,
        Algorithm::Disagreement,
        Algorithm::Ngu,
        Algorithm::PseudoCounts,
        Algorithm::Ride,
        Algorithm::Re3,
        Algorithm::E3b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Icm => "icm",
            Algorithm::Rnd => "rnd",
            Algorithm::Disagreement => "disagreement",
            Algorithm::Ngu => "ngu",
            Algorithm::PseudoCounts => "pseudocounts",
            Algorithm::Ride => "ride",
            Algorithm::Re3 => "re3",
            Algorithm::E3b => "e3b",
        }
    }

    /// Bonuses that keep per-episode state and must see every step through
    /// `watch` before `compute`.
    pub fn is_episodic(self) -> bool {
        matches!(self, Algorithm::Ngu | Algorithm::PseudoCounts | Algorithm::Ride | Algorithm::E3b)
    }

    /// Whether any auxiliary network is trained by `update`.
    pub fn is_trainable(self) -> bool {
        self != Algorithm::Re3
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownVariant {
                kind: "algorithm",
                value: s.to_string(),
            })
    }
}

/// Hyperparameters of one bonus module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BonusConfig {
    pub obs_norm: ObsNorm,
    pub rew_norm: RewardNorm,
    /// Fraction of rollout samples used to train the auxiliary networks.
    pub update_proportion: f64,
    pub weight_init: WeightInit,
    /// Neighbour count for the k-NN estimators.
    pub k: usize,
    /// Pseudo-count floor `c`.
    pub c: f64,
    /// NGU cap `C` on the lifelong factor.
    pub c_max: f64,
    /// E3B ridge `lambda`.
    pub lambda: f64,
    pub embed_dim: usize,
    pub hidden: usize,
    pub ensemble_size: usize,
    /// Adam learning rate of the auxiliary networks.
    pub lr: f64,
    pub aux_batch_size: usize,
    /// Initial exploration coefficient; presets derive it from `rew_norm`
    /// (see [`default_beta0`]).
    pub beta0: f64,
    /// Per-step decay of the exploration coefficient.
    pub kappa: f64,
}

impl Default for BonusConfig {
    fn default() -> Self {
        Self {
            obs_norm: ObsNorm::Rms,
            rew_norm: RewardNorm::RmsStd,
            update_proportion: 1.0,
            weight_init: WeightInit::Orthogonal,
            k: 10,
            c: 0.001,
            c_max: 5.0,
            lambda: 0.1,
            embed_dim: 32,
            hidden: 64,
            ensemble_size: 5,
            lr: 1e-3,
            aux_batch_size: 256,
            beta0: default_beta0(RewardNorm::RmsStd),
            kappa: 0.0,
        }
    }
}

impl BonusConfig {
    /// Baseline ablation settings: RMS observations, RMS rewards, full
    /// update proportion, orthogonal init.
    pub fn baseline(algorithm: Algorithm) -> Self {
        let mut c = Self::default();
        if algorithm == Algorithm::Re3 {
            c.k = 3;
        }
        c
    }

    /// Best per-algorithm settings found on DoorKey.
    pub fn best(algorithm: Algorithm) -> Self {
        use ObsNorm as O;
        use RewardNorm as R;
        use WeightInit as W;
        let (obs, rew, prop, init) = match algorithm {
            Algorithm::Icm => (O::Rms, R::RmsStd, 1.0, W::Orthogonal),
            Algorithm::Rnd => (O::Rms, R::Vanilla, 0.5, W::Orthogonal),
            Algorithm::Disagreement => (O::Vanilla, R::MinMax, 0.5, W::Uniform),
            Algorithm::Ngu => (O::Rms, R::RmsStd, 0.01, W::Orthogonal),
            Algorithm::PseudoCounts => (O::Rms, R::MinMax, 1.0, W::Orthogonal),
            Algorithm::Ride => (O::Rms, R::MinMax, 1.0, W::Orthogonal),
            Algorithm::Re3 => (O::Rms, R::MinMax, 1.0, W::Orthogonal),
            Algorithm::E3b => (O::Rms, R::RmsStd, 1.0, W::Orthogonal),
        };
        Self {
            obs_norm: obs,
            rew_norm: rew,
            update_proportion: prop,
            weight_init: init,
            beta0: default_beta0(rew),
            ..Self::baseline(algorithm)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| {
            Err(Error::Config {
                path: format!("bonus.{field}"),
                message: msg,
            })
        };
        if !(0.0..=1.0).contains(&self.update_proportion) {
            return bad("update_proportion", format!("{} is outside [0, 1]", self.update_proportion));
        }
        if self.k == 0 {
            return bad("k", "must be at least 1".into());
        }
        if !(self.c > 0.0) {
            return bad("c", format!("{} must be > 0", self.c));
        }
        if !(self.c_max >= 1.0) {
            return bad("c_max", format!("{} must be >= 1", self.c_max));
        }
        if !(self.lambda > 0.0) {
            return bad("lambda", format!("{} must be > 0", self.lambda));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return bad("kappa", format!("{} is outside [0, 1)", self.kappa));
        }
        if !(self.beta0 >= 0.0) {
            return bad("beta0", format!("{} must be >= 0", self.beta0));
        }
        if !(self.lr >= 0.0) {
            return bad("lr", format!("{} must be >= 0", self.lr));
        }
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("ensemble_size", self.ensemble_size),
            ("aux_batch_size", self.aux_batch_size),
        ] {
            if v == 0 {
                return bad(name, "must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// Preset exploration coefficient for a reward normalisation.
///
/// Normalised bonuses stay O(1) per step for the whole run, so `beta0` must
/// keep `beta0 / (1 - gamma)` well below a unit goal reward, otherwise
/// wandering until the time limit pays more than finishing. Raw bonuses
/// shrink as the auxiliary networks learn and need a larger coefficient to
/// matter at all.
pub fn default_beta0(rew_norm: RewardNorm) -> f64 {
    match rew_norm {
        RewardNorm::Vanilla => 0.05,
        RewardNorm::RmsStd | RewardNorm::MinMax => 0.002,
    }
}

/// Exploration coefficient `beta0 * (1 - kappa)^t`.
pub fn beta(t: u64, beta0: f64, kappa: f64) -> f64 {
    if beta0 == 0.0 {
        return 0.0;
    }
    beta0 * (1.0 - kappa).powf(t as f64)
}
