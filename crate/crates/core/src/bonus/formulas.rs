//! Raw bonus formulas on already-embedded inputs. The module code and the
//! oracle tests both go through these.

/// Threshold on the squared distance below which the Dirac kernel fires.
pub const DIRAC_TOLERANCE: f64 = 1e-8;

/// `||a - b||^2`.
pub fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Population variance across ensemble members, averaged over dimensions.
pub fn ensemble_variance<P: AsRef<[f64]>>(predictions: &[P]) -> f64 {
    let n = predictions.len();
    if n == 0 {
        return 0.0;
    }
    let dim = predictions[0].as_ref().len();
    if dim == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for d in 0..dim {
        let mean = predictions.iter().map(|p| p.as_ref()[d]).sum::<f64>() / n as f64;
        let var = predictions.iter().map(|p| (p.as_ref()[d] - mean).powi(2)).sum::<f64>() / n as f64;
        total += var;
    }
    total / dim as f64
}

/// Dirac kernel summed over neighbour distances.
pub fn dirac_kernel_sum(distances: impl IntoIterator<Item = f64>) -> f64 {
    distances.into_iter().filter(|d| d * d < DIRAC_TOLERANCE).count() as f64
}

/// `1 / (sqrt(sum K) + c)`.
pub fn pseudo_count_bonus(kernel_sum: f64, c: f64) -> f64 {
    1.0 / (kernel_sum.sqrt() + c)
}

/// Lifelong curiosity factor `1 + (err - mean) / std`.
pub fn ngu_alpha(error: f64, mean: f64, std: f64) -> f64 {
    1.0 + (error - mean) / std
}

/// `clamp(alpha, 1, c_max) / sqrt_n_ep`.
pub fn ngu_bonus(alpha: f64, c_max: f64, sqrt_n_ep: f64) -> f64 {
    alpha.clamp(1.0, c_max) / sqrt_n_ep
}

/// `||e_next - e|| / sqrt(n_ep)`.
pub fn ride_bonus(e: &[f64], e_next: &[f64], n_ep: f64) -> f64 {
    squared_error(e, e_next).sqrt() / n_ep.sqrt()
}

/// `(1/k) sum log(d_i + 1)` over the neighbour distances; zero when there
/// are no neighbours.
pub fn re3_bonus(distances: &[f64]) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    distances.iter().map(|d| (d + 1.0).ln()).sum::<f64>() / distances.len() as f64
}
