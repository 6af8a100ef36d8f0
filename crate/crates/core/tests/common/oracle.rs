//! Straight-line re-evaluation of every bonus from raw network outputs.
//! Neighbours come from a full sort and inverses from Gauss-Jordan.

use rlx::bonus::{Algorithm, BonusConfig, IntrinsicReward, RewardModule, RolloutBatch};
use rlx::diffkit::{Matrix, MlpNet, SeededRng};
use rlx::normstats::ObsNorm;

const TAU: f64 = 1e-8;

fn predict(net: &MlpNet, x: &Matrix) -> Matrix {
    net.predict(x).unwrap()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// k smallest L2 distances by sorting the full distance list.
fn k_smallest(q: &[f64], memory: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut d: Vec<f64> = memory.iter().map(|m| sq_dist(q, m).sqrt()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.truncate(k);
    d
}

fn dirac_count(q: &[f64], memory: &[Vec<f64>], k: usize) -> f64 {
    k_smallest(q, memory, k).iter().filter(|d| *d * *d < TAU).count() as f64
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        inv.swap(c, p);
        let d = m[c][c];
        for j in 0..n {
            m[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                for j in 0..n {
                    m[r][j] -= f * m[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    inv
}

pub fn quad(a: &[Vec<f64>], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..f.len() {
        for j in 0..f.len() {
            s += f[i] * a[i][j] * f[j];
        }
    }
    s
}

/// Explicit `C = lambda I + sum f f^T`.
pub fn design_matrix(history: &[Vec<f64>], dim: usize, lambda: f64) -> Vec<Vec<f64>> {
    let mut c: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| if i == j { lambda } else { 0.0 }).collect()).collect();
    for f in history {
        for i in 0..dim {
            for j in 0..dim {
                c[i][j] += f[i] * f[j];
            }
        }
    }
    c
}

/// Per-env episodic walk over `emb` rows in time order; `score` sees the
/// embeddings recorded earlier in the same episode.
fn episodic(batch: &RolloutBatch, emb: &[Vec<f64>], mut score: impl FnMut(usize, &[Vec<f64>], &[f64]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; batch.len()];
    for env in 0..batch.envs() {
        let mut memory: Vec<Vec<f64>> = Vec::new();
        for t in 0..batch.steps() {
            let i = batch.index(t, env);
            out[i] = score(i, &memory, &emb[i]);
            memory.push(emb[i].clone());
            if batch.dones[i] {
                memory.clear();
            }
        }
    }
    out
}

/// Raw bonus of every row of `batch` for a module with vanilla observation
/// normalisation whose episodic state was built by watching `batch` from a
/// fresh state.
pub fn raw_oracle(m: &RewardModule, batch: &RolloutBatch) -> Vec<f64> {
    assert_eq!(m.config().obs_norm, ObsNorm::Vanilla);
    let nets = m.nets();
    let cfg = m.config();
    let n = batch.len();
    let n_actions = 7;
    let with_action = |e: &Matrix| {
        let mut data = Vec::new();
        for i in 0..n {
            data.extend_from_slice(e.row(i));
            for a in 0..n_actions {
                data.push(if batch.actions[i] == a { 1.0 } else { 0.0 });
            }
        }
        Matrix::from_vec(n, e.cols() + n_actions, data).unwrap()
    };
    let distill = || {
        let p = rows(&predict(nets.predictor.as_ref().unwrap(), &batch.next_obs));
        let t = rows(&predict(nets.target.as_ref().unwrap(), &batch.next_obs));
        (0..n).map(|i| sq_dist(&p[i], &t[i])).collect::<Vec<f64>>()
    };
    let enc = nets.encoder.as_ref();
    match m.algorithm() {
        Algorithm::Icm => {
            let e = predict(enc.unwrap(), &batch.obs);
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            let pred = rows(&predict(nets.forward.as_ref().unwrap(), &with_action(&e)));
            (0..n).map(|i| sq_dist(&pred[i], &en[i])).collect()
        }
        Algorithm::Rnd => distill(),
        Algorithm::Disagreement => {
            let input = with_action(&predict(enc.unwrap(), &batch.obs));
            let preds: Vec<Vec<Vec<f64>>> = nets.ensemble.iter().map(|f| rows(&predict(f, &input))).collect();
            (0..n)
                .map(|i| {
                    let dim = preds[0][i].len();
                    let mut total = 0.0;
                    for d in 0..dim {
                        let xs: Vec<f64> = preds.iter().map(|p| p[i][d]).collect();
                        total += super::two_pass(&xs).1;
                    }
                    total / dim as f64
                })
                .collect()
        }
        Algorithm::Re3 => {
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            let mut out = vec![0.0; n];
            for env in 0..batch.envs() {
                for t in 0..batch.steps() {
                    let i = batch.index(t, env);
                    let others: Vec<Vec<f64>> =
                        (0..batch.steps()).filter(|&s| s != t).map(|s| en[batch.index(s, env)].clone()).collect();
                    let d = k_smallest(&en[i], &others, cfg.k);
                    out[i] = if d.is_empty() { 0.0 } else { d.iter().map(|x| (x + 1.0).ln()).sum::<f64>() / d.len() as f64 };
                }
            }
            out
        }
        Algorithm::PseudoCounts => {
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            episodic(batch, &en, |_, mem, q| 1.0 / (dirac_count(q, mem, cfg.k).sqrt() + cfg.c))
        }
        Algorithm::Ngu => {
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            let errs = distill();
            let (mean, var) = super::two_pass(&errs);
            let std = var.sqrt().max(1e-8);
            episodic(batch, &en, |i, mem, q| {
                let alpha = 1.0 + (errs[i] - mean) / std;
                alpha.max(1.0).min(cfg.c_max) / (dirac_count(q, mem, cfg.k).sqrt() + cfg.c)
            })
        }
        Algorithm::Ride => {
            let e = rows(&predict(enc.unwrap(), &batch.obs));
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            episodic(batch, &en, |i, mem, q| {
                let mut with_self = mem.to_vec();
                with_self.push(q.to_vec());
                let count = dirac_count(q, &with_self, cfg.k).max(1.0);
                sq_dist(&e[i], &en[i]).sqrt() / count.sqrt()
            })
        }
        Algorithm::E3b => {
            let en = rows(&predict(enc.unwrap(), &batch.next_obs));
            episodic(batch, &en, |_, mem, f| quad(&invert(&design_matrix(mem, f.len(), cfg.lambda)), f))
        }
    }
}

/// Random rollout over a small pool of binary observations, so episodic
/// bonuses see exact repeats.
pub fn random_batch(obs_dim: usize, steps: usize, envs: usize, rng: &mut SeededRng) -> RolloutBatch {
    let pool: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..obs_dim).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut cur: Vec<usize> = (0..envs).map(|_| rng.below(pool.len())).collect();
    let (mut obs, mut next, mut actions, mut dones) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..steps {
        for c in cur.iter_mut() {
            let nx = rng.below(pool.len());
            let done = rng.bernoulli(0.2);
            obs.extend_from_slice(&pool[*c]);
            next.extend_from_slice(&pool[nx]);
            actions.push(rng.below(7));
            dones.push(done);
            *c = if done { rng.below(pool.len()) } else { nx };
        }
    }
    let n = steps * envs;
    RolloutBatch::new(
        steps,
        envs,
        Matrix::from_vec(n, obs_dim, obs).unwrap(),
        Matrix::from_vec(n, obs_dim, next).unwrap(),
        actions,
        vec![0.0; n],
        dones,
    )
    .unwrap()
}

/// Builds a randomly sized module, watches a random rollout from a fresh
/// state and returns the module's raw bonuses next to the oracle's.
pub fn oracle_instance(alg: Algorithm, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SeededRng::with_stream(seed, 7);
    let obs_dim = 2 + rng.below(6);
    let (steps, envs) = (1 + rng.below(6), 1 + rng.below(3));
    let mut cfg = BonusConfig::baseline(alg);
    cfg.obs_norm = ObsNorm::Vanilla;
    cfg.embed_dim = 1 + rng.below(4);
    cfg.hidden = 2 + rng.below(6);
    cfg.k = 1 + rng.below(4);
    cfg.ensemble_size = 2 + rng.below(3);
    cfg.lambda = 0.05 + rng.uniform();
    let mut m = RewardModule::new(alg, cfg, obs_dim, 7, envs, seed).unwrap();
    let batch = random_batch(obs_dim, steps, envs, &mut rng);
    for t in 0..steps {
        m.watch(&batch.slice(t)).unwrap();
    }
    let (raw, _) = m.raw_bonuses(&batch).unwrap();
    (raw, raw_oracle(&m, &batch))
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
