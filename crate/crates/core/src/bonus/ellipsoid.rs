use serde::{Deserialize, Serialize};

use crate::diffkit::Matrix;
use crate::{Error, Result};

/// Per-env inverse of the episodic ellipsoid `C = sum f f^T + lambda I`,
/// maintained with Sherman-Morrison rank-1 updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidInverse {
    pub inv_c: Vec<Matrix>,
    pub lambda: f64,
    pub dim: usize,
}

impl EllipsoidInverse {
    pub fn new(envs: usize, dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || dim == 0 {
            return Err(Error::InvalidArgument(format!("ellipsoid needs lambda > 0 and dim > 0, got {lambda}, {dim}")));
        }
        let fresh = Self::fresh(dim, lambda);
        Ok(Self {
            inv_c: vec![fresh; envs],
            lambda,
            dim,
        })
    }

    fn fresh(dim: usize, lambda: f64) -> Matrix {
        let mut m = Matrix::identity(dim);
        m.scale(1.0 / lambda);
        m
    }

    pub fn reset(&mut self, env: usize) {
        self.inv_c[env] = Self::fresh(self.dim, self.lambda);
    }

    /// `f^T C^-1 f` against the current (pre-update) inverse.
    pub fn bonus(&self, env: usize, f: &[f64]) -> f64 {
        elliptical_bonus(&self.inv_c[env], f)
    }

    /// Folds `f f^T` into `C` and returns the bonus `f` had before the update.
    pub fn update(&mut self, env: usize, f: &[f64]) -> f64 {
        let inv = &mut self.inv_c[env];
        let u = mat_vec(inv, f);
        let b: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum();
        let denom = 1.0 + b;
        let d = self.dim;
        let data = inv.as_mut_slice();
        for i in 0..d {
            let ui = u[i] / denom;
            for j in 0..d {
                data[i * d + j] -= ui * u[j];
            }
        }
        b
    }
}

/// `f^T A f`.
pub fn elliptical_bonus(inv: &Matrix, f: &[f64]) -> f64 {
    mat_vec(inv, f).iter().zip(f).map(|(a, b)| a * b).sum()
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}
