use std::borrow::Cow;

use super::formulas::{
    dirac_kernel_sum, ensemble_variance, ngu_alpha, ngu_bonus, pseudo_count_bonus, re3_bonus, ride_bonus, squared_error,
};
use super::knn::knn_distances;
use super::losses::{distillation_loss, forward_model_loss, inverse_dynamics_loss, one_hot};
use super::{Algorithm, BonusConfig, EllipsoidInverse, EpisodicMemory, IntrinsicReward, RolloutBatch, StepSlice, UpdateStats};
use crate::diffkit::{Activation, AdamState, Matrix, MlpNet, SeededRng};
use crate::normstats::{normalize_obs, normalize_rewards, ClipRange, ObsNorm, RunningMoments};
use crate::{Error, Result};

/// Auxiliary networks of a bonus. Which slots are filled depends on the
/// algorithm; optimiser states exist only for trained networks.
#[derive(Clone, Debug, PartialEq)]
pub struct BonusNets {
    /// Embedding `psi` (trained by inverse dynamics, or fixed for RE3 and
    /// Disagreement).
    pub encoder: Option<MlpNet>,
    pub encoder_opt: Option<AdamState>,
    pub forward: Option<MlpNet>,
    pub forward_opt: Option<AdamState>,
    pub inverse: Option<MlpNet>,
    pub inverse_opt: Option<AdamState>,
    pub predictor: Option<MlpNet>,
    pub predictor_opt: Option<AdamState>,
    /// Fixed random target of the distillation bonuses.
    pub target: Option<MlpNet>,
    pub ensemble: Vec<MlpNet>,
    pub ensemble_opt: Vec<AdamState>,
}

impl BonusNets {
    fn build(algorithm: Algorithm, cfg: &BonusConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        let (h, d) = (cfg.hidden, cfg.embed_dim);
        let make = |sizes: &[usize], stream: u64| -> Result<MlpNet> {
            let mut rng = SeededRng::with_stream(seed, stream);
            MlpNet::new(sizes, Activation::Relu, cfg.weight_init, &mut rng)
        };
        let opt = |net: &MlpNet| Some(AdamState::new(net, cfg.lr));
        let mut nets = BonusNets {
            encoder: None,
            encoder_opt: None,
            forward: None,
            forward_opt: None,
            inverse: None,
            inverse_opt: None,
            predictor: None,
            predictor_opt: None,
            target: None,
            ensemble: Vec::new(),
            ensemble_opt: Vec::new(),
        };
        let trained_encoder = matches!(
            algorithm,
            Algorithm::Icm | Algorithm::Ride | Algorithm::PseudoCounts | Algorithm::E3b | Algorithm::Ngu
        );
        if algorithm != Algorithm::Rnd {
            let enc = make(&[obs_dim, h, d], 1)?;
            if trained_encoder {
                nets.encoder_opt = opt(&enc);
                let inv = make(&[2 * d, h, n_actions], 3)?;
                nets.inverse_opt = opt(&inv);
                nets.inverse = Some(inv);
            }
            nets.encoder = Some(enc);
        }
        if matches!(algorithm, Algorithm::Icm | Algorithm::Ride) {
            let f = make(&[d + n_actions, h, d], 2)?;
            nets.forward_opt = opt(&f);
            nets.forward = Some(f);
        }
        if matches!(algorithm, Algorithm::Rnd | Algorithm::Ngu) {
            let p = make(&[obs_dim, h, h, d], 4)?;
            nets.predictor_opt = opt(&p);
            nets.predictor = Some(p);
            nets.target = Some(make(&[obs_dim, h, h, d], 5)?);
        }
        if algorithm == Algorithm::Disagreement {
            for i in 0..cfg.ensemble_size {
                let m = make(&[d + n_actions, h, d], 16 + i as u64)?;
                nets.ensemble_opt.push(AdamState::new(&m, cfg.lr));
                nets.ensemble.push(m);
            }
        }
        Ok(nets)
    }

    /// Every network in declaration order, with a stable name.
    pub fn named(&self) -> Vec<(String, &MlpNet)> {
        let mut out = Vec::new();
        for (name, net) in [
            ("encoder", &self.encoder),
            ("forward", &self.forward),
            ("inverse", &self.inverse),
            ("predictor", &self.predictor),
            ("target", &self.target),
        ] {
            if let Some(n) = net {
                out.push((name.to_string(), n));
            }
        }
        for (i, n) in self.ensemble.iter().enumerate() {
            out.push((format!("ensemble{i}"), n));
        }
        out
    }

    pub(crate) fn ordered_mut(&mut self) -> Vec<&mut MlpNet> {
        let mut out: Vec<&mut MlpNet> = [
            &mut self.encoder,
            &mut self.forward,
            &mut self.inverse,
            &mut self.predictor,
            &mut self.target,
        ]
        .into_iter()
        .filter_map(Option::as_mut)
        .collect();
        out.extend(self.ensemble.iter_mut());
        out
    }

    pub(crate) fn optimisers(&self) -> Vec<&AdamState> {
        let mut out: Vec<&AdamState> = [&self.encoder_opt, &self.forward_opt, &self.inverse_opt, &self.predictor_opt]
            .into_iter()
            .filter_map(Option::as_ref)
            .collect();
        out.extend(self.ensemble_opt.iter());
        out
    }

    pub(crate) fn optimisers_mut(&mut self) -> Vec<&mut AdamState> {
        let mut out: Vec<&mut AdamState> = [
            &mut self.encoder_opt,
            &mut self.forward_opt,
            &mut self.inverse_opt,
            &mut self.predictor_opt,
        ]
        .into_iter()
        .filter_map(Option::as_mut)
        .collect();
        out.extend(self.ensemble_opt.iter_mut());
        out
    }
}

/// Mutable state of one intrinsic-reward algorithm.
///
/// Observation statistics come in two copies: `obs_moments` accumulates
/// every watched observation, while `obs_snapshot` is the frozen copy used
/// to normalise network inputs. The snapshot only moves in `update`, so all
/// embeddings produced during a rollout (by `watch`) and for it (by
/// `compute`) share one normalisation.
#[derive(Clone, Debug)]
pub struct RewardModule {
    pub(crate) algorithm: Algorithm,
    pub(crate) config: BonusConfig,
    pub(crate) obs_dim: usize,
    pub(crate) n_actions: usize,
    pub(crate) n_envs: usize,
    pub(crate) nets: BonusNets,
    pub(crate) obs_moments: RunningMoments,
    pub(crate) obs_snapshot: RunningMoments,
    pub(crate) reward_moments: RunningMoments,
    /// Moments of the raw distillation error (NGU lifelong factor).
    pub(crate) error_moments: RunningMoments,
    pub(crate) memory: Option<EpisodicMemory>,
    pub(crate) ellipsoid: Option<EllipsoidInverse>,
    /// One entry per watched step: the episodic quantity of each env.
    pub(crate) log: Vec<Vec<f64>>,
    pub(crate) watched: usize,
    pub(crate) rng: SeededRng,
    pub(crate) seed: u64,
}

impl RewardModule {
    pub fn new(
        algorithm: Algorithm,
        config: BonusConfig,
        obs_dim: usize,
        n_actions: usize,
        n_envs: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || n_actions == 0 || n_envs == 0 {
            return Err(Error::InvalidArgument(format!(
                "bonus needs non-zero dims, got obs_dim {obs_dim}, n_actions {n_actions}, n_envs {n_envs}"
            )));
        }
        let nets = BonusNets::build(algorithm, &config, obs_dim, n_actions, seed)?;
        let memory = matches!(algorithm, Algorithm::Ngu | Algorithm::PseudoCounts | Algorithm::Ride | Algorithm::E3b)
            .then(|| EpisodicMemory::new(n_envs));
        let ellipsoid = if algorithm == Algorithm::E3b {
            Some(EllipsoidInverse::new(n_envs, config.embed_dim, config.lambda)?)
        } else {
            None
        };
        Ok(Self {
            algorithm,
            obs_dim,
            n_actions,
            n_envs,
            nets,
            obs_moments: RunningMoments::new(obs_dim),
            obs_snapshot: RunningMoments::new(obs_dim),
            reward_moments: RunningMoments::new(1),
            error_moments: RunningMoments::new(1),
            memory,
            ellipsoid,
            log: Vec::new(),
            watched: 0,
            rng: SeededRng::with_stream(seed, 99),
            seed,
            config,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn config(&self) -> &BonusConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    pub fn nets(&self) -> &BonusNets {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut BonusNets {
        &mut self.nets
    }

    pub fn memory(&self) -> Option<&EpisodicMemory> {
        self.memory.as_ref()
    }

    pub fn ellipsoid(&self) -> Option<&EllipsoidInverse> {
        self.ellipsoid.as_ref()
    }

    pub fn reward_moments(&self) -> &RunningMoments {
        &self.reward_moments
    }

    pub fn obs_moments(&self) -> &RunningMoments {
        &self.obs_moments
    }

    /// Number of steps recorded by `watch` since the last `update`.
    pub fn watched_steps(&self) -> usize {
        self.log.len().max(self.watched)
    }

    /// Observation statistics in force for `batch`: the frozen snapshot, or,
    /// before anything was ever observed, the batch's own statistics.
    fn obs_stats<'a>(&'a self, batch: Option<&RolloutBatch>) -> Result<Cow<'a, RunningMoments>> {
        if self.obs_snapshot.is_initialized() || self.config.obs_norm == ObsNorm::Vanilla {
            return Ok(Cow::Borrowed(&self.obs_snapshot));
        }
        match batch {
            Some(b) => {
                let mut m = self.obs_moments.clone();
                m.update(&b.next_obs)?;
                Ok(Cow::Owned(m))
            }
            None => Err(Error::MomentsNotInitialized),
        }
    }

    fn normalize(&self, obs: &Matrix, stats: &RunningMoments) -> Result<Matrix> {
        match self.config.obs_norm {
            ObsNorm::Vanilla => Ok(obs.clone()),
            ObsNorm::Rms => normalize_obs(stats, obs, ClipRange::default()),
        }
    }

    fn encoder(&self) -> &MlpNet {
        self.nets.encoder.as_ref().expect("algorithm has an encoder")
    }

    /// Embeds raw observations with the current encoder and normalisation.
    pub fn embed(&self, obs: &Matrix) -> Result<Matrix> {
        let stats = self.obs_stats(None)?;
        self.encoder().predict(&self.normalize(obs, &stats)?)
    }

    /// Folds observations into the statistics and freezes them, e.g. from a
    /// short random-policy warm-up before training.
    pub fn seed_obs_moments(&mut self, obs: &Matrix) -> Result<()> {
        self.obs_moments.update(obs)?;
        self.obs_snapshot = self.obs_moments.clone();
        self.refresh_episodic()
    }

    fn episodic_value(&mut self, env: usize, raw: &[f64], emb: Vec<f64>) -> f64 {
        let k = self.config.k;
        let memory = self.memory.as_mut().expect("episodic memory");
        match self.algorithm {
            Algorithm::E3b => {
                let b = self.ellipsoid.as_mut().expect("ellipsoid").update(env, &emb);
                memory.push(env, raw.to_vec(), emb);
                b
            }
            Algorithm::Ride => {
                memory.push(env, raw.to_vec(), emb);
                let q = memory.embeddings(env).last().expect("just pushed");
                dirac_kernel_sum(knn_distances(q, memory.embeddings(env), k).iter().map(|n| n.distance))
            }
            _ => {
                let s = dirac_kernel_sum(knn_distances(&emb, memory.embeddings(env), k).iter().map(|n| n.distance));
                memory.push(env, raw.to_vec(), emb);
                s
            }
        }
    }

    fn reset_env(&mut self, env: usize) {
        if let Some(m) = self.memory.as_mut() {
            m.on_done(env);
        }
        if let Some(e) = self.ellipsoid.as_mut() {
            e.reset(env);
        }
    }

    /// Recomputes stored embeddings (and the ellipsoids built from them)
    /// after the encoder or the observation snapshot changed.
    fn refresh_episodic(&mut self) -> Result<()> {
        let Some(memory) = self.memory.as_ref() else {
            return Ok(());
        };
        if memory.total_len() == 0 {
            return Ok(());
        }
        let raws: Vec<Vec<Vec<f64>>> = memory.raw.clone();
        let mut embeddings = Vec::with_capacity(raws.len());
        for env_raw in &raws {
            if env_raw.is_empty() {
                embeddings.push(Vec::new());
                continue;
            }
            let e = self.embed(&Matrix::from_rows(env_raw)?)?;
            embeddings.push((0..e.rows()).map(|i| e.row(i).to_vec()).collect::<Vec<_>>());
        }
        if let Some(ell) = self.ellipsoid.as_mut() {
            for (env, embs) in embeddings.iter().enumerate() {
                ell.reset(env);
                for f in embs {
                    ell.update(env, f);
                }
            }
        }
        self.memory.as_mut().expect("memory").embeddings = embeddings;
        Ok(())
    }

    fn episodic_log(&self, steps: usize) -> Result<&[Vec<f64>]> {
        if self.log.len() < steps {
            return Err(Error::NotWatched {
                algorithm: self.algorithm.name(),
                needed: steps,
                have: self.log.len(),
            });
        }
        Ok(&self.log[self.log.len() - steps..])
    }

    /// Raw (unnormalised) bonuses of `batch`, plus the raw distillation
    /// errors for NGU.
    pub fn raw_bonuses(&self, batch: &RolloutBatch) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        self.check_batch(batch)?;
        let stats = self.obs_stats(Some(batch))?;
        self.raw_with_stats(batch, &stats)
    }

    fn check_batch(&self, batch: &RolloutBatch) -> Result<()> {
        if batch.obs_dim() != self.obs_dim {
            return Err(Error::shape("bonus rollout", format!("obs_dim {}", self.obs_dim), batch.obs_dim()));
        }
        if batch.envs() != self.n_envs {
            return Err(Error::shape("bonus rollout", format!("{} envs", self.n_envs), batch.envs()));
        }
        if let Some(&a) = batch.actions.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::InvalidArgument(format!("action {a} out of range")));
        }
        Ok(())
    }

    fn raw_with_stats(&self, batch: &RolloutBatch, stats: &RunningMoments) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n = batch.len();
        let (steps, envs) = (batch.steps(), batch.envs());
        let rows = |m: &Matrix, other: &Matrix| (0..n).map(|i| squared_error(m.row(i), other.row(i))).collect::<Vec<_>>();
        let out = match self.algorithm {
            Algorithm::Icm => {
                let enc = self.encoder();
                let e = enc.predict(&self.normalize(&batch.obs, stats)?)?;
                let en = enc.predict(&self.normalize(&batch.next_obs, stats)?)?;
                let f = self.nets.forward.as_ref().expect("forward model");
                let pred = f.predict(&e.hcat(&one_hot(&batch.actions, self.n_actions))?)?;
                (rows(&pred, &en), None)
            }
            Algorithm::Rnd => (self.distill_errors(&self.normalize(&batch.next_obs, stats)?)?, None),
            Algorithm::Disagreement => {
                let e = self.encoder().predict(&self.normalize(&batch.obs, stats)?)?;
                let input = e.hcat(&one_hot(&batch.actions, self.n_actions))?;
                let preds = self.nets.ensemble.iter().map(|m| m.predict(&input)).collect::<Result<Vec<_>>>()?;
                let raw = (0..n)
                    .map(|i| ensemble_variance(&preds.iter().map(|p| p.row(i)).collect::<Vec<_>>()))
                    .collect();
                (raw, None)
            }
            Algorithm::Ngu => {
                let errs = self.distill_errors(&self.normalize(&batch.next_obs, stats)?)?;
                let mut em = self.error_moments.clone();
                em.update_scalars(&errs)?;
                let (mean, std) = (em.mean[0], em.std()[0]);
                let log = self.episodic_log(steps)?;
                let raw = (0..n)
                    .map(|i| {
                        let sum_k = log[i / envs][i % envs];
                        let alpha = ngu_alpha(errs[i], mean, std);
                        ngu_bonus(alpha, self.config.c_max, sum_k.sqrt() + self.config.c)
                    })
                    .collect();
                (raw, Some(errs))
            }
            Algorithm::PseudoCounts => {
                let log = self.episodic_log(steps)?;
                ((0..n).map(|i| pseudo_count_bonus(log[i / envs][i % envs], self.config.c)).collect(), None)
            }
            Algorithm::Ride => {
                let log = self.episodic_log(steps)?;
                let enc = self.encoder();
                let e = enc.predict(&self.normalize(&batch.obs, stats)?)?;
                let en = enc.predict(&self.normalize(&batch.next_obs, stats)?)?;
                let raw = (0..n)
                    .map(|i| ride_bonus(e.row(i), en.row(i), log[i / envs][i % envs].max(1.0)))
                    .collect();
                (raw, None)
            }
            Algorithm::Re3 => {
                let en = self.encoder().predict(&self.normalize(&batch.next_obs, stats)?)?;
                let mut raw = vec![0.0; n];
                for env in 0..envs {
                    let idx: Vec<usize> = (0..steps).map(|t| batch.index(t, env)).collect();
                    for (t, &i) in idx.iter().enumerate() {
                        let others: Vec<&[f64]> = idx
                            .iter()
                            .enumerate()
                            .filter(|&(s, _)| s != t)
                            .map(|(_, &j)| en.row(j))
                            .collect();
                        let d: Vec<f64> = knn_distances(en.row(i), &others, self.config.k)
                            .iter()
                            .map(|nb| nb.distance)
                            .collect();
                        raw[i] = re3_bonus(&d);
                    }
                }
                (raw, None)
            }
            Algorithm::E3b => {
                let log = self.episodic_log(steps)?;
                ((0..n).map(|i| log[i / envs][i % envs]).collect(), None)
            }
        };
        if let Some(i) = out.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} raw bonus at row {i}", self.algorithm)));
        }
        Ok(out)
    }

    fn distill_errors(&self, x: &Matrix) -> Result<Vec<f64>> {
        let p = self.nets.predictor.as_ref().expect("predictor").predict(x)?;
        let t = self.nets.target.as_ref().expect("target").predict(x)?;
        Ok((0..x.rows()).map(|i| squared_error(p.row(i), t.row(i))).collect())
    }

    fn train(&mut self, batch: &RolloutBatch, stats: &RunningMoments) -> Result<(f64, usize)> {
        let n = batch.len();
        let p = self.config.update_proportion;
        let mut idx: Vec<usize> = (0..n).filter(|_| self.rng.bernoulli(p)).collect();
        if idx.is_empty() || !self.algorithm.is_trainable() {
            return Ok((0.0, idx.len()));
        }
        self.rng.shuffle(&mut idx);
        let x_all = self.normalize(&batch.obs, stats)?;
        let xn_all = self.normalize(&batch.next_obs, stats)?;
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in idx.chunks(self.config.aux_batch_size) {
            let x = x_all.select_rows(chunk);
            let xn = xn_all.select_rows(chunk);
            let actions: Vec<usize> = chunk.iter().map(|&i| batch.actions[i]).collect();
            loss_sum += self.train_minibatch(&x, &xn, &actions)?;
            batches += 1;
        }
        Ok((loss_sum / batches as f64, idx.len()))
    }

    fn train_minibatch(&mut self, x: &Matrix, xn: &Matrix, actions: &[usize]) -> Result<f64> {
        let nets = &mut self.nets;
        let mut loss = 0.0;
        if let (Some(p), Some(t)) = (nets.predictor.as_mut(), nets.target.as_ref()) {
            let target_out = t.predict(xn)?;
            let (l, g) = distillation_loss(p, xn, &target_out)?;
            nets.predictor_opt.as_mut().expect("optimiser").step(p, &g)?;
            loss += l;
        }
        if self.algorithm == Algorithm::Disagreement {
            let enc = nets.encoder.as_ref().expect("encoder");
            let e = enc.predict(x)?;
            let en = enc.predict(xn)?;
            for (m, opt) in nets.ensemble.iter_mut().zip(nets.ensemble_opt.iter_mut()) {
                let (l, g) = forward_model_loss(m, &e, &en, actions, self.n_actions)?;
                opt.step(m, &g)?;
                loss += l / self.config.ensemble_size as f64;
            }
        }
        if let (Some(enc), Some(inv)) = (nets.encoder.as_mut(), nets.inverse.as_mut()) {
            // the forward model sees embeddings from before this step, as
            // constants: its loss never reaches the encoder
            if let Some(f) = nets.forward.as_mut() {
                let e = enc.predict(x)?;
                let en = enc.predict(xn)?;
                let (l, g) = forward_model_loss(f, &e, &en, actions, self.n_actions)?;
                nets.forward_opt.as_mut().expect("optimiser").step(f, &g)?;
                loss += l;
            }
            let (l, ge, gi) = inverse_dynamics_loss(enc, inv, x, xn, actions)?;
            nets.encoder_opt.as_mut().expect("optimiser").step(enc, &ge)?;
            nets.inverse_opt.as_mut().expect("optimiser").step(inv, &gi)?;
            loss += l;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("{} auxiliary loss", self.algorithm)));
        }
        Ok(loss)
    }
}

impl IntrinsicReward for RewardModule {
    fn watch(&mut self, slice: &StepSlice) -> Result<()> {
        slice.validate(self.obs_dim)?;
        if slice.envs() != self.n_envs {
            return Err(Error::shape("RewardModule::watch", format!("{} envs", self.n_envs), slice.envs()));
        }
        self.obs_moments.update(&slice.next_obs)?;
        self.watched += 1;
        if !self.obs_snapshot.is_initialized() {
            self.obs_snapshot = self.obs_moments.clone();
        }
        if !self.algorithm.is_episodic() {
            return Ok(());
        }
        let emb = self.embed(&slice.next_obs)?;
        let mut values = Vec::with_capacity(self.n_envs);
        for env in 0..self.n_envs {
            let v = self.episodic_value(env, slice.next_obs.row(env), emb.row(env).to_vec());
            values.push(v);
            if slice.dones[env] {
                self.reset_env(env);
            }
        }
        self.log.push(values);
        Ok(())
    }

    fn compute(&self, batch: &RolloutBatch) -> Result<Vec<f64>> {
        let (raw, _) = self.raw_bonuses(batch)?;
        let mut moments = self.reward_moments.clone();
        moments.update_scalars(&raw)?;
        normalize_rewards(self.config.rew_norm, &moments, &raw)
    }

    fn update(&mut self, batch: &RolloutBatch) -> Result<UpdateStats> {
        self.check_batch(batch)?;
        let stats = self.obs_stats(Some(batch))?.into_owned();
        let mut raw_mean = f64::NAN;
        match self.raw_with_stats(batch, &stats) {
            Ok((raw, errs)) => {
                raw_mean = raw.iter().sum::<f64>() / raw.len() as f64;
                self.reward_moments.update_scalars(&raw)?;
                if let Some(errs) = errs {
                    self.error_moments.update_scalars(&errs)?;
                }
            }
            // an unwatched episodic rollout still trains the networks
            Err(Error::NotWatched { .. }) => {}
            Err(e) => return Err(e),
        }
        let (loss, samples) = self.train(batch, &stats)?;
        if self.watched == 0 {
            self.obs_moments.update(&batch.next_obs)?;
        }
        self.obs_snapshot = self.obs_moments.clone();
        self.watched = 0;
        self.log.clear();
        self.refresh_episodic()?;
        Ok(UpdateStats {
            loss,
            samples,
            raw_mean,
        })
    }

    fn beta(&self, t: u64) -> f64 {
        super::beta(t, self.config.beta0, self.config.kappa)
    }

    fn seed_obs_moments(&mut self, obs: &Matrix) -> Result<()> {
        RewardModule::seed_obs_moments(self, obs)
    }
}
