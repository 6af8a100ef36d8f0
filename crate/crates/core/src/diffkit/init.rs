use serde::{Deserialize, Serialize};

use super::{Matrix, SeededRng};

/// Weight initialisation scheme for auxiliary networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    Orthogonal,
    /// PyTorch's default `Linear` initialisation: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    Uniform,
}

/// (Semi-)orthogonal `rows x cols` matrix scaled by `gain`.
///
/// A Gaussian matrix is drawn row-major from `rng`, the taller orientation is
/// orthonormalised with two passes of modified Gram-Schmidt (the Q factor of
/// a QR decomposition whose R has a positive diagonal) and transposed back
/// when `rows < cols`. For `rows <= cols` the rows are orthonormal, otherwise
/// the columns are.
pub fn init_orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut SeededRng) -> Matrix {
    assert!(rows >= 1 && cols >= 1, "orthogonal init needs a non-empty shape");
    let mut g = Matrix::zeros(rows, cols);
    for v in g.as_mut_slice() {
        *v = rng.normal();
    }
    let transposed = rows < cols;
    let tall = if transposed { g.transpose() } else { g };
    let (n, k) = tall.shape();

    // columns of `tall` as contiguous vectors
    let mut q: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| tall.get(i, j)).collect()).collect();
    for j in 0..k {
        for _pass in 0..2 {
            for p in 0..j {
                let proj: f64 = q[p].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = q.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(&head[p]) {
                    *x -= proj * y;
                }
            }
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        q[j].iter_mut().for_each(|v| *v /= norm);
    }

    let mut out = Matrix::zeros(n, k);
    for (j, col) in q.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            out.set(i, j, v * gain);
        }
    }
    if transposed {
        out.transpose()
    } else {
        out
    }
}

/// `rows x cols` matrix with entries uniform in `[-1/sqrt(cols), 1/sqrt(cols)]`,
/// treating `cols` as the fan-in.
pub fn init_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    assert!(rows >= 1 && cols >= 1, "uniform init needs a non-empty shape");
    let bound = 1.0 / (cols as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = (2.0 * rng.uniform() - 1.0) * bound;
    }
    m
}
