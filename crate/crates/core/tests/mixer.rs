mod common;

use common::oracle::random_batch;
use proptest::prelude::*;
use rlx::bonus::{Algorithm, BonusConfig, IntrinsicReward, RewardModule, RolloutBatch};
use rlx::diffkit::SeededRng;
use rlx::mixer::FabricState;

fn member(alg: Algorithm, batch: &RolloutBatch, seed: u64) -> RewardModule {
    RewardModule::new(alg, BonusConfig::baseline(alg), batch.obs_dim(), 7, batch.envs(), seed).unwrap()
}

fn watch_all(r: &mut dyn IntrinsicReward, batch: &RolloutBatch) {
    for t in 0..batch.steps() {
        r.watch(&batch.slice(t)).unwrap();
    }
}

/// Drives a reward through `rounds` watch/compute/update cycles and returns
/// every computed vector.
fn drive(r: &mut dyn IntrinsicReward, batches: &[RolloutBatch]) -> Vec<Vec<f64>> {
    r.seed_obs_moments(&batches[0].obs).unwrap();
    batches
        .iter()
        .map(|b| {
            watch_all(r, b);
            let out = r.compute(b).unwrap();
            r.update(b).unwrap();
            out
        })
        .collect()
}

fn batches(seed: u64) -> Vec<RolloutBatch> {
    let mut rng = SeededRng::new(seed);
    (0..3).map(|_| random_batch(6, 4, 2, &mut rng)).collect()
}

#[test]
fn single_member_equals_bare_module() {
    let bs = batches(1);
    for alg in Algorithm::ALL {
        let mut bare = member(alg, &bs[0], 5);
        let mut fabric = FabricState::new(vec![member(alg, &bs[0], 5)]).unwrap();
        assert_eq!(drive(&mut bare, &bs), drive(&mut fabric, &bs), "{alg}");
        assert_eq!(fabric.members()[0].dump().unwrap(), bare.dump().unwrap());
        assert_eq!(fabric.beta(123), bare.beta(123));
    }
}

#[test]
fn members_do_not_share_state() {
    let bs = batches(2);
    let mut alone = member(Algorithm::Rnd, &bs[0], 3);
    let mut fabric =
        FabricState::new(vec![member(Algorithm::Rnd, &bs[0], 3), member(Algorithm::E3b, &bs[0], 4)]).unwrap();
    drive(&mut alone, &bs);
    drive(&mut fabric, &bs);
    assert_eq!(fabric.members()[0].dump().unwrap(), alone.dump().unwrap());
}

#[test]
fn zero_weight_member_is_ignored() {
    let bs = batches(3);
    let mut a = member(Algorithm::Icm, &bs[0], 1);
    let mut fabric =
        FabricState::with_weights(vec![member(Algorithm::Icm, &bs[0], 1), member(Algorithm::Ride, &bs[0], 2)], vec![1.0, 0.0])
            .unwrap();
    assert_eq!(drive(&mut a, &bs), drive(&mut fabric, &bs));
}

#[test]
fn output_is_weighted_sum_of_members() {
    let bs = batches(4);
    let make = || vec![member(Algorithm::Rnd, &bs[0], 1), member(Algorithm::Ngu, &bs[0], 2)];
    let mut fabric = FabricState::with_weights(make(), vec![0.25, 2.0]).unwrap();
    for b in &bs {
        watch_all(&mut fabric, b);
        let got = fabric.compute(b).unwrap();
        let parts: Vec<Vec<f64>> = fabric.members().iter().map(|m| m.compute(b).unwrap()).collect();
        for i in 0..got.len() {
            let want = 0.25 * parts[0][i] + 2.0 * parts[1][i];
            assert!((got[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        fabric.update(b).unwrap();
    }
}

#[test]
fn member_order_does_not_matter() {
    let bs = batches(5);
    let mut ab = FabricState::new(vec![member(Algorithm::E3b, &bs[0], 1), member(Algorithm::Icm, &bs[0], 2)]).unwrap();
    let mut ba = FabricState::new(vec![member(Algorithm::Icm, &bs[0], 2), member(Algorithm::E3b, &bs[0], 1)]).unwrap();
    assert_eq!(drive(&mut ab, &bs), drive(&mut ba, &bs));
}

#[test]
fn fabric_is_deterministic() {
    let bs = batches(6);
    let make = || FabricState::new(vec![member(Algorithm::Re3, &bs[0], 1), member(Algorithm::Disagreement, &bs[0], 2)]).unwrap();
    assert_eq!(drive(&mut make(), &bs), drive(&mut make(), &bs));
}

#[test]
fn construction_errors() {
    let b = &batches(7)[0];
    assert!(FabricState::new(vec![]).is_err());
    assert!(FabricState::with_weights(vec![member(Algorithm::Rnd, b, 0)], vec![1.0, 2.0]).is_err());
    assert!(FabricState::with_weights(vec![member(Algorithm::Rnd, b, 0)], vec![f64::NAN]).is_err());
}

proptest! {
    #[test]
    fn combine_is_linear(
        a in prop::collection::vec(-1e3..1e3f64, 5),
        b in prop::collection::vec(-1e3..1e3f64, 5),
        wa in -3.0..3.0f64,
        wb in -3.0..3.0f64,
    ) {
        let got = FabricState::combine(&[a.clone(), b.clone()], &[wa, wb]).unwrap();
        let swapped = FabricState::combine(&[b.clone(), a.clone()], &[wb, wa]).unwrap();
        prop_assert_eq!(&got, &swapped);
        for i in 0..5 {
            let want = wa * a[i] + wb * b[i];
            prop_assert!((got[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }
}
