use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use super::config::{ExperimentConfig, MemberSpec};
use super::run::run_experiment;
use crate::bonus::{Algorithm, BonusConfig};
use crate::diffkit::WeightInit;
use crate::normstats::{ObsNorm, RewardNorm};
use crate::ppo::HeadMode;
use crate::{Error, Result};

/// Ablation questions with a desk-scale analog. Recurrent policies are not
/// covered, so there is no `q5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Question {
    /// Observation normalisation.
    Q1,
    /// Intrinsic reward normalisation.
    Q2,
    /// Update proportion.
    Q3,
    /// Weight initialisation.
    Q4,
    /// One or two value heads.
    Q6,
    /// Two-bonus mixtures.
    Q7,
}

impl Question {
    pub const ALL: [Question; 6] = [Question::Q1, Question::Q2, Question::Q3, Question::Q4, Question::Q6, Question::Q7];

    pub fn name(self) -> &'static str {
        match self {
            Question::Q1 => "q1",
            Question::Q2 => "q2",
            Question::Q3 => "q3",
            Question::Q4 => "q4",
            Question::Q6 => "q6",
            Question::Q7 => "q7",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Question {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Question::ALL
            .into_iter()
            .find(|q| q.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownVariant {
                kind: "question",
                value: s.to_string(),
            })
    }
}

/// Global bonuses paired with episodic ones, then global with global.
pub const MIXTURES: [(Algorithm, Algorithm); 9] = [
    (Algorithm::E3b, Algorithm::Rnd),
    (Algorithm::E3b, Algorithm::Icm),
    (Algorithm::E3b, Algorithm::Ride),
    (Algorithm::Re3, Algorithm::Rnd),
    (Algorithm::Re3, Algorithm::Icm),
    (Algorithm::Re3, Algorithm::Ride),
    (Algorithm::Rnd, Algorithm::Icm),
    (Algorithm::Rnd, Algorithm::Ride),
    (Algorithm::Icm, Algorithm::Ride),
];

/// One cell of the matrix: a name such as `rnd_min_max` and the config it
/// runs. `candidate` is the ablated value alone.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub name: String,
    pub bonus: String,
    pub candidate: String,
    pub config: ExperimentConfig,
}

fn snake<T: Serialize>(v: T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Bonuses the matrix sweeps over: those named in the base config, or all
/// eight when the base config trains plain PPO.
fn swept_members(base: &ExperimentConfig) -> Vec<MemberSpec> {
    if base.bonus.members.is_empty() {
        Algorithm::ALL
            .into_iter()
            .map(|a| MemberSpec {
                algorithm: a,
                weight: 1.0,
                config: BonusConfig::baseline(a),
            })
            .collect()
    } else {
        base.bonus.members.clone()
    }
}

/// Enumerates the sub-runs of `question` relative to `base`, changing one
/// setting at a time. Sub-runs are written below `out_dir/run_id/<question>`.
pub fn matrix_candidates(base: &ExperimentConfig, question: Question) -> Result<Vec<Candidate>> {
    let root = base.out_dir.join(&base.run_id).join(question.name());
    let make = |bonus: String, candidate: String, members: Vec<MemberSpec>, head: HeadMode| {
        let name = format!("{bonus}_{candidate}");
        let mut config = base.clone();
        config.out_dir = root.clone();
        config.run_id = name.clone();
        config.bonus.members = members;
        config.head_mode = head;
        Candidate {
            name,
            bonus,
            candidate,
            config,
        }
    };
    let mut out = Vec::new();
    if question == Question::Q7 {
        for (a, b) in MIXTURES {
            let members = [a, b]
                .into_iter()
                .map(|alg| MemberSpec {
                    algorithm: alg,
                    weight: 1.0,
                    config: BonusConfig::best(alg),
                })
                .collect();
            out.push(make(format!("{a}+{b}"), "mix".into(), members, base.head_mode));
        }
        return Ok(out);
    }
    for member in swept_members(base) {
        let bonus = member.algorithm.to_string();
        let with = |edit: &dyn Fn(&mut BonusConfig)| {
            let mut m = member.clone();
            edit(&mut m.config);
            vec![m]
        };
        match question {
            Question::Q1 => {
                for v in [ObsNorm::Vanilla, ObsNorm::Rms] {
                    out.push(make(bonus.clone(), snake(v), with(&|c| c.obs_norm = v), base.head_mode));
                }
            }
            Question::Q2 => {
                for v in [RewardNorm::Vanilla, RewardNorm::RmsStd, RewardNorm::MinMax] {
                    out.push(make(bonus.clone(), snake(v), with(&|c| c.rew_norm = v), base.head_mode));
                }
            }
            Question::Q3 => {
                // A bonus without trainable parts has nothing to subsample.
                if !member.algorithm.is_trainable() {
                    continue;
                }
                for v in [0.01, 0.1, 0.5, 1.0] {
                    out.push(make(bonus.clone(), format!("{v:?}"), with(&|c| c.update_proportion = v), base.head_mode));
                }
            }
            Question::Q4 => {
                for v in [WeightInit::Uniform, WeightInit::Orthogonal] {
                    out.push(make(bonus.clone(), snake(v), with(&|c| c.weight_init = v), base.head_mode));
                }
            }
            Question::Q6 => {
                for v in [HeadMode::Sum, HeadMode::TwoHead] {
                    out.push(make(bonus.clone(), snake(v), vec![member.clone()], v));
                }
            }
            Question::Q7 => unreachable!(),
        }
    }
    Ok(out)
}

/// Mean and population std of the final trailing metrics across seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub question: String,
    pub bonus: String,
    pub candidate: String,
    pub seeds: usize,
    pub success_mean: f64,
    pub success_std: f64,
    pub return_mean: f64,
    pub return_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every candidate of `question` and writes `summary.csv` next to the
/// candidate directories. Returns the summary path and rows.
pub fn run_matrix(base: &ExperimentConfig, question: Question) -> Result<(PathBuf, Vec<SummaryRow>)> {
    let candidates = matrix_candidates(base, question)?;
    let root = base.out_dir.join(&base.run_id).join(question.name());
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let mut rows = Vec::with_capacity(candidates.len());
    for c in &candidates {
        let runs = run_experiment(&c.config)?;
        let last = |f: fn(&crate::ppo::RolloutRecord) -> f64| -> Vec<f64> {
            runs.iter().filter_map(|r| r.log.last().map(f)).collect()
        };
        let (success_mean, success_std) = mean_std(&last(|r| r.success_rate));
        let (return_mean, return_std) = mean_std(&last(|r| r.episode_return_mean));
        rows.push(SummaryRow {
            question: question.name().into(),
            bonus: c.bonus.clone(),
            candidate: c.candidate.clone(),
            seeds: runs.len(),
            success_mean,
            success_std,
            return_mean,
            return_std,
        });
    }
    let path = root.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok((path, rows))
}
