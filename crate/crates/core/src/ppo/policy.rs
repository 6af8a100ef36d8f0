use super::HeadMode;
use crate::diffkit::{Activation, AdamState, GradTape, Matrix, MlpNet, NetGrads, SeededRng, WeightInit};
use crate::Result;

/// Actor and one or two critics on top of a shared two-layer encoder.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub encoder: MlpNet,
    pub actor: MlpNet,
    pub critic_ext: MlpNet,
    /// Present exactly in two-head mode.
    pub critic_int: Option<MlpNet>,
    pub head_mode: HeadMode,
    pub(crate) opt: Vec<AdamState>,
}

/// Outputs of one forward pass, kept for the backward pass.
pub(crate) struct PolicyForward {
    pub logits: Matrix,
    pub v_ext: Vec<f64>,
    pub v_int: Option<Vec<f64>>,
    pub tapes: [Option<GradTape>; 4],
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

impl PolicyParams {
    /// Orthogonal init: gain sqrt(2) in the encoder, 0.01 on the actor
    /// and 1 on the critics; zero biases.
    pub fn new(obs_dim: usize, n_actions: usize, hidden: usize, head_mode: HeadMode, lr: f64, rng: &mut SeededRng) -> Result<Self> {
        let mut encoder =
            MlpNet::new(&[obs_dim, hidden, hidden], Activation::Relu, WeightInit::Orthogonal, rng)?.with_output_activation(Activation::Relu);
        encoder.scale_last_layer(Activation::Relu.gain());
        let mut actor = MlpNet::new(&[hidden, n_actions], Activation::Relu, WeightInit::Orthogonal, rng)?;
        actor.scale_last_layer(0.01);
        let critic_ext = MlpNet::new(&[hidden, 1], Activation::Relu, WeightInit::Orthogonal, rng)?;
        let critic_int = match head_mode {
            HeadMode::TwoHead => Some(MlpNet::new(&[hidden, 1], Activation::Relu, WeightInit::Orthogonal, rng)?),
            HeadMode::Sum => None,
        };
        let mut p = Self {
            encoder,
            actor,
            critic_ext,
            critic_int,
            head_mode,
            opt: Vec::new(),
        };
        p.opt = p.nets().iter().map(|n| AdamState::new(n, lr)).collect();
        Ok(p)
    }

    pub fn nets(&self) -> Vec<&MlpNet> {
        let mut v = vec![&self.encoder, &self.actor, &self.critic_ext];
        v.extend(self.critic_int.as_ref());
        v
    }

    pub(crate) fn nets_mut(&mut self) -> Vec<&mut MlpNet> {
        let mut v = vec![&mut self.encoder, &mut self.actor, &mut self.critic_ext];
        v.extend(self.critic_int.as_mut());
        v
    }

    pub fn n_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.opt.iter_mut().for_each(|o| o.learning_rate = lr);
    }

    pub(crate) fn forward(&self, obs: &Matrix, record: bool) -> Result<PolicyForward> {
        if !record {
            let h = self.encoder.predict(obs)?;
            let v_int = match &self.critic_int {
                Some(c) => Some(c.predict(&h)?.into_vec()),
                None => None,
            };
            return Ok(PolicyForward {
                logits: self.actor.predict(&h)?,
                v_ext: self.critic_ext.predict(&h)?.into_vec(),
                v_int,
                tapes: [None, None, None, None],
            });
        }
        let (h, th) = self.encoder.forward(obs)?;
        let (logits, ta) = self.actor.forward(&h)?;
        let (ve, te) = self.critic_ext.forward(&h)?;
        let (v_int, ti) = match &self.critic_int {
            Some(c) => {
                let (v, t) = c.forward(&h)?;
                (Some(v.into_vec()), Some(t))
            }
            None => (None, None),
        };
        Ok(PolicyForward {
            logits,
            v_ext: ve.into_vec(),
            v_int,
            tapes: [Some(th), Some(ta), Some(te), ti],
        })
    }

    /// Gradients of all networks given loss gradients on the heads.
    pub(crate) fn backward(
        &self,
        fwd: PolicyForward,
        d_logits: &Matrix,
        d_ext: &[f64],
        d_int: Option<&[f64]>,
    ) -> Result<Vec<NetGrads>> {
        let [th, ta, te, ti] = fwd.tapes;
        let col = |d: &[f64]| Matrix::from_vec(d.len(), 1, d.to_vec());
        let (ga, mut dh) = self.actor.backward(ta.expect("recorded"), d_logits)?;
        let (ge, dh_e) = self.critic_ext.backward(te.expect("recorded"), &col(d_ext)?)?;
        add_into(&mut dh, &dh_e);
        let mut grads = vec![ga, ge];
        if let (Some(c), Some(t), Some(d)) = (&self.critic_int, ti, d_int) {
            let (gi, dh_i) = c.backward(t, &col(d)?)?;
            add_into(&mut dh, &dh_i);
            grads.push(gi);
        }
        let genc = self.encoder.backward_params(th.expect("recorded"), &dh)?;
        grads.insert(0, genc);
        Ok(grads)
    }

    /// Samples one action per row. Returns actions, their log-probabilities
    /// and the value estimates.
    pub fn act(&self, obs: &Matrix, rng: &mut SeededRng) -> Result<ActOutput> {
        let fwd = self.forward(obs, false)?;
        let logp = log_softmax(&fwd.logits);
        let mut actions = Vec::with_capacity(obs.rows());
        let mut log_probs = Vec::with_capacity(obs.rows());
        for i in 0..obs.rows() {
            let probs: Vec<f64> = logp.row(i).iter().map(|l| l.exp()).collect();
            let a = rng.categorical(&probs);
            actions.push(a);
            log_probs.push(logp.get(i, a));
        }
        Ok(ActOutput {
            actions,
            log_probs,
            v_ext: fwd.v_ext,
            v_int: fwd.v_int,
        })
    }

    /// Value estimates only.
    pub fn values(&self, obs: &Matrix) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let fwd = self.forward(obs, false)?;
        Ok((fwd.v_ext, fwd.v_int))
    }

    /// Action probabilities per row.
    pub fn probabilities(&self, obs: &Matrix) -> Result<Matrix> {
        Ok(log_softmax(&self.forward(obs, false)?.logits).map(f64::exp))
    }
}

fn add_into(dst: &mut Matrix, src: &Matrix) {
    dst.as_mut_slice().iter_mut().zip(src.as_slice()).for_each(|(a, b)| *a += b);
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActOutput {
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub v_ext: Vec<f64>,
    pub v_int: Option<Vec<f64>>,
}
