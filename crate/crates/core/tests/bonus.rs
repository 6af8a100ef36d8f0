mod common;

use common::oracle::{close, design_matrix, invert, oracle_instance, quad, random_batch};
use rlx::bonus::formulas::*;
use rlx::bonus::{
    beta, default_beta0, knn_distances, Algorithm, BonusConfig, EllipsoidInverse, IntrinsicReward, RewardModule, RolloutBatch,
};
use rlx::diffkit::SeededRng;
use rlx::normstats::ObsNorm;
use rlx::Error;

#[test]
fn every_bonus_matches_its_oracle() {
    for alg in Algorithm::ALL {
        for seed in 0..200 {
            let (got, want) = oracle_instance(alg, seed);
            assert_eq!(got.len(), want.len());
            for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                assert!(*g >= 0.0, "{alg} seed {seed}: negative bonus {g}");
                assert!(close(*g, *w, 1e-9), "{alg} seed {seed} row {i}: {g} vs oracle {w}");
            }
        }
    }
}

#[test]
fn hand_evaluated_formulas() {
    assert_eq!(squared_error(&[1.0, 2.0], &[0.0, 0.0]), 5.0);
    assert_eq!(ensemble_variance(&[[0.0], [2.0]]), 1.0);
    assert!((re3_bonus(&[1.0, 1.0, 1.0]) - 2f64.ln()).abs() < 1e-12);
    assert_eq!(ride_bonus(&[0.0, 0.0], &[3.0, 4.0], 4.0), 2.5);
    let k = dirac_kernel_sum([0.0, 0.0, 0.0, 0.0, 1.0, 2.0]);
    assert_eq!(k, 4.0);
    assert!((pseudo_count_bonus(k, 0.001) - 1.0 / 2.001).abs() < 1e-12);
    assert_eq!(ngu_bonus(7.0, 5.0, 2.0), 2.5);
    assert_eq!(ngu_bonus(0.5, 5.0, 1.0), 1.0);
}

#[test]
fn knn_examples() {
    let mem = [[0.0], [1.0], [3.0]];
    let d: Vec<f64> = knn_distances(&[0.0], &mem, 2).iter().map(|n| n.distance).collect();
    assert_eq!(d, vec![0.0, 1.0]);
    assert!(knn_distances::<[f64; 1]>(&[0.0], &[], 3).is_empty());
    let d: Vec<f64> = knn_distances(&[2.5], &mem, 10).iter().map(|n| n.distance).collect();
    assert_eq!(d, vec![0.5, 1.5, 2.5]);
}

#[test]
fn beta_schedule_examples() {
    assert_eq!(beta(1000, 1.0, 0.0), 1.0);
    assert!((beta(2, 1.0, 0.1) - 0.81).abs() < 1e-12);
    assert_eq!(beta(5, 0.0, 0.1), 0.0);
}

#[test]
fn presets_scale_beta_with_reward_normalisation() {
    for alg in Algorithm::ALL {
        for c in [BonusConfig::baseline(alg), BonusConfig::best(alg)] {
            assert_eq!(c.beta0, default_beta0(c.rew_norm), "{alg}");
            assert_eq!(c.kappa, 0.0);
        }
    }
    assert_eq!(BonusConfig::best(Algorithm::Rnd).beta0, 0.05);
    assert_eq!(BonusConfig::best(Algorithm::Re3).beta0, 0.002);
}

fn one_hot(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
}

#[test]
fn ellipsoid_tabular_counts() {
    let d = 6;
    let mut ell = EllipsoidInverse::new(1, d, 1.0).unwrap();
    assert_eq!(ell.update(0, &one_hot(d, 0)), 1.0);
    assert!((ell.inv_c[0].get(0, 0) - 0.5).abs() < 1e-15);
    let mut rng = SeededRng::new(3);
    let mut counts = vec![0usize; d];
    counts[0] = 1;
    for _ in 0..200 {
        let s = rng.below(d);
        counts[s] += 1;
        let b = ell.update(0, &one_hot(d, s));
        assert!((b - 1.0 / counts[s] as f64).abs() < 1e-9);
    }
}

#[test]
fn sherman_morrison_matches_reinversion() {
    let mut rng = SeededRng::new(21);
    for _ in 0..1000 {
        let dim = 1 + rng.below(16);
        let lambda = 0.1 + rng.uniform();
        let mut ell = EllipsoidInverse::new(1, dim, lambda).unwrap();
        let mut hist = Vec::new();
        for _ in 0..1 + rng.below(12) {
            let f: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let pre = ell.update(0, &f);
            assert!(close(pre, quad(&invert(&design_matrix(&hist, dim, lambda)), &f), 1e-8));
            hist.push(f);
        }
        let exact = invert(&design_matrix(&hist, dim, lambda));
        for i in 0..dim {
            for j in 0..dim {
                assert!((ell.inv_c[0].get(i, j) - exact[i][j]).abs() < 1e-8);
            }
        }
    }
}

fn vanilla(alg: Algorithm) -> BonusConfig {
    let mut c = BonusConfig::baseline(alg);
    c.obs_norm = ObsNorm::Vanilla;
    c.hidden = 8;
    c.embed_dim = 4;
    c
}

fn watched(alg: Algorithm, batch: &RolloutBatch, cfg: BonusConfig) -> RewardModule {
    let mut m = RewardModule::new(alg, cfg, batch.obs_dim(), 7, batch.envs(), 1).unwrap();
    for t in 0..batch.steps() {
        m.watch(&batch.slice(t)).unwrap();
    }
    m
}

#[test]
fn done_resets_episodic_state() {
    let mut rng = SeededRng::new(2);
    let mut batch = random_batch(5, 3, 2, &mut rng);
    batch.dones = vec![false, false, true, false, false, false];
    let m = watched(Algorithm::E3b, &batch, vanilla(Algorithm::E3b));
    let mem = m.memory().unwrap();
    assert_eq!(mem.len(0), 1);
    assert_eq!(mem.len(1), 3);
    let fresh = EllipsoidInverse::new(1, 4, m.config().lambda).unwrap();
    let m2 = watched(Algorithm::E3b, &{
        let mut b = batch.clone();
        b.dones = vec![false, false, true, false, false, true];
        b
    }, vanilla(Algorithm::E3b));
    assert_eq!(m2.ellipsoid().unwrap().inv_c[1], fresh.inv_c[0]);
}

#[test]
fn first_bonus_after_reset_matches_first_episode() {
    let mut rng = SeededRng::new(4);
    let mut batch = random_batch(6, 4, 1, &mut rng);
    // same observation at step 0 and step 2, episode ends after step 1
    let row0 = batch.next_obs.row(0).to_vec();
    batch.next_obs.row_mut(2).copy_from_slice(&row0);
    batch.dones = vec![false, true, false, false];
    let m = watched(Algorithm::E3b, &batch, vanilla(Algorithm::E3b));
    let (raw, _) = m.raw_bonuses(&batch).unwrap();
    assert_eq!(raw[0], raw[2]);
}

#[test]
fn pseudocounts_memory_grows_per_watch() {
    let mut rng = SeededRng::new(5);
    let mut batch = random_batch(4, 3, 1, &mut rng);
    let row = batch.next_obs.row(0).to_vec();
    for t in 1..3 {
        batch.next_obs.row_mut(t).copy_from_slice(&row);
    }
    batch.dones = vec![false; 3];
    let m = watched(Algorithm::PseudoCounts, &batch, vanilla(Algorithm::PseudoCounts));
    assert_eq!(m.memory().unwrap().len(0), 3);
    let (raw, _) = m.raw_bonuses(&batch).unwrap();
    let c = m.config().c;
    for (t, r) in raw.iter().enumerate() {
        assert!((r - pseudo_count_bonus(t as f64, c)).abs() < 1e-12);
    }
}

#[test]
fn episodic_compute_needs_watch() {
    let batch = random_batch(4, 3, 2, &mut SeededRng::new(6));
    for alg in Algorithm::ALL.into_iter().filter(|a| a.is_episodic()) {
        let m = RewardModule::new(alg, vanilla(alg), 4, 7, 2, 0).unwrap();
        assert!(matches!(m.compute(&batch), Err(Error::NotWatched { .. })), "{alg}");
    }
}

#[test]
fn compute_is_pure() {
    let batch = random_batch(5, 4, 2, &mut SeededRng::new(7));
    for alg in Algorithm::ALL {
        let m = watched(alg, &batch, BonusConfig::baseline(alg));
        let before = m.dump().unwrap();
        let a = m.compute(&batch).unwrap();
        let b = m.compute(&batch).unwrap();
        assert_eq!(a, b, "{alg}");
        assert_eq!(m.dump().unwrap(), before, "{alg}");
    }
}

#[test]
fn rnd_with_copied_target_is_zero() {
    let batch = random_batch(5, 3, 2, &mut SeededRng::new(8));
    let mut m = RewardModule::new(Algorithm::Rnd, vanilla(Algorithm::Rnd), 5, 7, 2, 0).unwrap();
    let t = m.nets().target.clone();
    m.nets_mut().predictor = t;
    assert!(m.raw_bonuses(&batch).unwrap().0.iter().all(|&r| r == 0.0));
}

fn params(m: &RewardModule) -> Vec<Vec<f64>> {
    m.nets().named().iter().flat_map(|(_, n)| n.tensors().into_iter().map(<[f64]>::to_vec)).collect()
}

#[test]
fn zero_proportion_freezes_networks() {
    let batch = random_batch(5, 4, 2, &mut SeededRng::new(9));
    for alg in Algorithm::ALL {
        let mut cfg = BonusConfig::baseline(alg);
        cfg.update_proportion = 0.0;
        let mut m = watched(alg, &batch, cfg);
        let before = params(&m);
        let stats = m.update(&batch).unwrap();
        assert_eq!(stats.samples, 0);
        assert_eq!(params(&m), before, "{alg}");
    }
}

#[test]
fn full_proportion_trains_and_fixed_nets_stay_fixed() {
    let batch = random_batch(5, 4, 2, &mut SeededRng::new(10));
    for alg in Algorithm::ALL {
        let mut m = watched(alg, &batch, BonusConfig::baseline(alg));
        let before = m.nets().clone();
        let stats = m.update(&batch).unwrap();
        assert_eq!(stats.samples, batch.len(), "{alg}");
        if alg == Algorithm::Re3 {
            assert_eq!(m.nets(), &before);
        } else {
            assert_ne!(params(&m), before.named().iter().flat_map(|(_, n)| n.tensors().into_iter().map(<[f64]>::to_vec)).collect::<Vec<_>>());
        }
        assert_eq!(m.nets().target, before.target, "{alg}: target moved");
        if alg == Algorithm::Disagreement {
            assert_eq!(m.nets().encoder, before.encoder);
        }
    }
}

#[test]
fn update_commits_reward_moments() {
    let batch = random_batch(5, 4, 2, &mut SeededRng::new(11));
    let mut m = watched(Algorithm::Icm, &batch, BonusConfig::baseline(Algorithm::Icm));
    let (raw, _) = m.raw_bonuses(&batch).unwrap();
    m.update(&batch).unwrap();
    assert_eq!(m.reward_moments().count, raw.len() as f64);
    assert_eq!(m.watched_steps(), 0);
}

#[test]
fn rnd_converges_on_fixed_batch() {
    let mut rng = SeededRng::new(12);
    let batch = random_batch(24, 64, 16, &mut rng);
    let mut cfg = BonusConfig::baseline(Algorithm::Rnd);
    cfg.aux_batch_size = 1024;
    let mut m = RewardModule::new(Algorithm::Rnd, cfg, 24, 7, 16, 3).unwrap();
    m.seed_obs_moments(&batch.next_obs).unwrap();
    let mean = |m: &RewardModule| common::mean(&m.raw_bonuses(&batch).unwrap().0);
    let initial = mean(&m);
    for _ in 0..1000 {
        m.update(&batch).unwrap();
    }
    let last = mean(&m);
    assert!(last < 0.05 * initial, "{last} vs initial {initial}");
}

#[test]
fn checkpoint_round_trip() {
    let batch = random_batch(5, 4, 2, &mut SeededRng::new(13));
    for alg in Algorithm::ALL {
        let mut m = watched(alg, &batch, BonusConfig::baseline(alg));
        m.update(&batch).unwrap();
        for t in 0..batch.steps() {
            m.watch(&batch.slice(t)).unwrap();
        }
        let bytes = m.dump().unwrap();
        let mut back = RewardModule::load(&bytes).unwrap();
        assert_eq!(back.dump().unwrap(), bytes, "{alg}");
        assert_eq!(back.compute(&batch).unwrap(), m.compute(&batch).unwrap());
        back.update(&batch).unwrap();
        m.update(&batch).unwrap();
        assert_eq!(back.dump().unwrap(), m.dump().unwrap(), "{alg}: diverged after resume");
    }
    assert!(RewardModule::load(b"nope").is_err());
    let dir = tempfile::tempdir().unwrap();
    let m = RewardModule::new(Algorithm::E3b, BonusConfig::default(), 5, 7, 2, 0).unwrap();
    m.save(dir.path().join("m.bin")).unwrap();
    assert_eq!(RewardModule::load_file(dir.path().join("m.bin")).unwrap().dump().unwrap(), m.dump().unwrap());
}

#[test]
fn config_rejects_bad_values() {
    let mut c = BonusConfig::default();
    c.update_proportion = 1.5;
    assert!(c.validate().is_err());
    let mut c = BonusConfig::default();
    c.k = 0;
    assert!(c.validate().is_err());
    let mut c = BonusConfig::default();
    c.kappa = 1.0;
    assert!(c.validate().is_err());
    assert!("icmm".parse::<Algorithm>().is_err());
}
