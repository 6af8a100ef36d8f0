//! Training losses of the auxiliary networks with their analytic gradients.

use crate::diffkit::{Matrix, MlpNet, NetGrads};
use crate::{Error, Result};

/// Row-wise one-hot encoding of `actions` over `n` classes.
pub fn one_hot(actions: &[usize], n: usize) -> Matrix {
    let mut m = Matrix::zeros(actions.len(), n);
    for (i, &a) in actions.iter().enumerate() {
        m.set(i, a, 1.0);
    }
    m
}

/// Mean squared error over every element and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse_loss", format!("{:?}", pred.shape()), format!("{:?}", target.shape())));
    }
    let n = pred.as_slice().len().max(1) as f64;
    let mut grad = pred.clone();
    let mut loss = 0.0;
    for (g, &t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
        let d = *g - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// Mean softmax cross-entropy of `logits` against integer labels.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if logits.rows() != labels.len() {
        return Err(Error::shape("cross_entropy_loss", logits.rows(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&a| a >= logits.cols()) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {} classes", logits.cols())));
    }
    let n = logits.rows().max(1) as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = z.ln() + max;
        loss += log_z - row[label];
        let g = grad.row_mut(i);
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = (v - log_z).exp() / n;
        }
        g[label] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}

/// Inverse-dynamics objective: `g([psi(x), psi(x_next)])` classifies the
/// action taken. Returns the loss with gradients for the encoder `psi` and
/// the inverse model `g`.
pub fn inverse_dynamics_loss(
    encoder: &MlpNet,
    inverse: &MlpNet,
    obs: &Matrix,
    next_obs: &Matrix,
    actions: &[usize],
) -> Result<(f64, NetGrads, NetGrads)> {
    let (e, tape_e) = encoder.forward(obs)?;
    let (en, tape_en) = encoder.forward(next_obs)?;
    let d = e.cols();
    let (logits, tape_g) = inverse.forward(&e.hcat(&en)?)?;
    let (loss, grad) = cross_entropy_loss(&logits, actions)?;
    let (inv_grads, input_grad) = inverse.backward(tape_g, &grad)?;
    let (ge, gen) = input_grad.hsplit(d);
    let mut enc_grads = encoder.backward_params(tape_e, &ge)?;
    enc_grads.add_assign(&encoder.backward_params(tape_en, &gen)?);
    Ok((loss, enc_grads, inv_grads))
}

/// Forward-dynamics objective: `f([e, onehot(a)])` regresses onto the
/// (fixed) next embedding.
pub fn forward_model_loss(
    forward: &MlpNet,
    embed: &Matrix,
    next_embed: &Matrix,
    actions: &[usize],
    n_actions: usize,
) -> Result<(f64, NetGrads)> {
    let input = embed.hcat(&one_hot(actions, n_actions))?;
    let (pred, tape) = forward.forward(&input)?;
    let (loss, grad) = mse_loss(&pred, next_embed)?;
    Ok((loss, forward.backward_params(tape, &grad)?))
}

/// Distillation objective of a predictor onto fixed target outputs.
pub fn distillation_loss(predictor: &MlpNet, input: &Matrix, target_out: &Matrix) -> Result<(f64, NetGrads)> {
    let (pred, tape) = predictor.forward(input)?;
    let (loss, grad) = mse_loss(&pred, target_out)?;
    Ok((loss, predictor.backward_params(tape, &grad)?))
}
