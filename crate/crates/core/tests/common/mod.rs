#![allow(dead_code)]

use rlx::diffkit::{Activation, Matrix, MlpNet, NetGrads, SeededRng, WeightInit};

pub fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

pub fn random_net(sizes: &[usize], act: Activation, rng: &mut SeededRng) -> MlpNet {
    let init = if rng.bernoulli(0.5) { WeightInit::Orthogonal } else { WeightInit::Uniform };
    let mut net = MlpNet::new(sizes, act, init, rng).unwrap();
    // Non-zero biases so every code path is exercised.
    for l in net.layers_mut() {
        for b in &mut l.bias {
            *b = 0.1 * rng.normal();
        }
    }
    net
}

/// Largest relative error between `analytic` and central differences of
/// `loss` with respect to every parameter of `net`.
pub fn fd_max_rel_error(net: &MlpNet, analytic: &NetGrads, loss: impl Fn(&MlpNet) -> f64) -> f64 {
    let h = 1e-5;
    let mut probe = net.clone();
    let grads = analytic.tensors();
    let mut worst: f64 = 0.0;
    for (ti, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let orig = probe.tensors()[ti][j];
            probe.tensors_mut()[ti][j] = orig + h;
            let up = loss(&probe);
            probe.tensors_mut()[ti][j] = orig - h;
            let down = loss(&probe);
            probe.tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = (numeric - g[j]).abs() / numeric.abs().max(g[j].abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-pass population mean and variance.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}
pub mod oracle;
