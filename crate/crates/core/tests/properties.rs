use proptest::prelude::*;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pqr_core::ftrl::{self, FtrlParams, FtrlState, Task};
use pqr_core::{
    assemble_matrix, decompose_projection, predict_quadratic_form, FeatureSeparation, LabeledInstance,
    PqrIndexMap, RunOptions,
};

fn random_map(rng: &mut ChaCha8Rng, max_d: u32, max_k: usize) -> PqrIndexMap {
    let d = rng.random_range(1..=max_d);
    let k = rng.random_range(0..=max_k.min(d as usize));
    let high: Vec<u32> = index::sample(rng, d as usize, k)
        .into_iter()
        .map(|i| i as u32 + 1)
        .collect();
    PqrIndexMap::new(FeatureSeparation::new(d, high).unwrap())
}

fn random_features(rng: &mut ChaCha8Rng, d: u32) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    for i in 1..=d {
        if rng.random_bool(0.3) {
            out.push((i, rng.random_range(-2.0..2.0)));
        }
    }
    out
}

fn random_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.5..1.5)).collect()
}

/// State whose materialized weights are arbitrary: l1 = 0 so no coordinate is
/// thresholded.
fn random_state(rng: &mut ChaCha8Rng, map: &PqrIndexMap, task: Task) -> FtrlState {
    let params = FtrlParams::new(0.5, 1.0, 0.0, 0.1, task).unwrap();
    let mut state = FtrlState::new(params, map.expanded_dim());
    for slot in 0..map.expanded_dim() {
        state
            .set_accumulators(slot, rng.random_range(-3.0..3.0), rng.random_range(0.0..4.0))
            .unwrap();
    }
    state
}

fn margin(weights: &[f64], x: &pqr_core::ExpandedVector) -> f64 {
    x.dot(weights)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quadratic_form_matches_expanded_dot(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 50, 8);
        let w = random_weights(&mut rng, map.expanded_dim());
        let c = assemble_matrix(&w, &map).unwrap();
        let x = random_features(&mut rng, map.dim() as u32);
        let dense = predict_quadratic_form(&c, &x).unwrap();
        let sparse = map.expand(&x).unwrap().dot(&w);
        prop_assert!((dense - sparse).abs() < 1e-9, "{dense} vs {sparse}");
    }

    #[test]
    fn convex_combinations_keep_structure(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 30, 6);
        let w1 = random_weights(&mut rng, map.expanded_dim());
        let w2 = random_weights(&mut rng, map.expanded_dim());
        let mixed: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let direct = assemble_matrix(&mixed, &map).unwrap();
        let combined = assemble_matrix(&w1, &map)
            .unwrap()
            .convex_combination(&assemble_matrix(&w2, &map).unwrap(), lambda)
            .unwrap();
        prop_assert!(direct.check_structure(&map).is_ok());
        prop_assert!(combined.check_structure(&map).is_ok());
        let n = map.dim() + 1;
        for r in 0..n {
            for s in 0..n {
                let a = direct.augmented().get(r, s);
                let b = combined.augmented().get(r, s);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "({r},{s}) {a} vs {b}");
            }
        }
    }

    #[test]
    fn losses_are_convex_in_the_weights(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 20, 5);
        let w1 = random_weights(&mut rng, map.expanded_dim());
        let w2 = random_weights(&mut rng, map.expanded_dim());
        let mixed: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let x = map.expand(&random_features(&mut rng, map.dim() as u32)).unwrap();
        let y_reg = rng.random_range(-3.0..3.0);
        let y_cls = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for (task, y) in [(Task::Regression, y_reg), (Task::Classification, y_cls)] {
            let f = |w: &[f64]| ftrl::loss(margin(w, &x), y, task);
            prop_assert!(f(&mixed) <= lambda * f(&w1) + (1.0 - lambda) * f(&w2) + 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 12, 4);
        let features = random_features(&mut rng, map.dim() as u32);
        let x = map.expand(&features).unwrap();
        for task in [Task::Regression, Task::Classification] {
            let state = random_state(&mut rng, &map, task);
            let label = match task {
                Task::Regression => rng.random_range(-3.0..3.0),
                Task::Classification => if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            };
            let grad = state.gradient(&x, task.target(label).unwrap());
            let w = state.weights();
            let h = 1e-6;
            for (slot, g) in grad {
                let mut up = w.clone();
                let mut down = w.clone();
                up[slot] += h;
                down[slot] -= h;
                let fd = (ftrl::loss(x.dot(&up), label, task) - ftrl::loss(x.dot(&down), label, task)) / (2.0 * h);
                let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
                prop_assert!(err < 1e-4, "{task} slot {slot}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn decomposition_reconstructs_interactions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 30, 6);
        let w = random_weights(&mut rng, map.expanded_dim());
        let parts = decompose_projection(&w, &map).unwrap();
        let a = assemble_matrix(&w, &map).unwrap().interaction_block();
        prop_assert_eq!(parts.reconstruct().unwrap(), a);
    }
}

fn stream(seed: u64, map: &PqrIndexMap, task: Task, len: usize) -> Vec<LabeledInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let features = random_features(&mut rng, map.dim() as u32);
            let label = match task {
                Task::Regression => rng.random_range(-2.0..4.0),
                Task::Classification => {
                    if rng.random_bool(0.4) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            LabeledInstance::new(label, features).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn updates_are_local_and_n_never_decreases(seed in any::<u64>(), classify in any::<bool>()) {
        let task = if classify { Task::Classification } else { Task::Regression };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 15, 4);
        let params = FtrlParams::new(0.3, 1.0, 0.05, 0.1, task).unwrap();
        let mut state = FtrlState::new(params, map.expanded_dim());
        for inst in stream(seed, &map, task, 40) {
            let x = map.expand(&inst.features).unwrap();
            let before: Vec<(f64, f64)> = (0..map.expanded_dim()).map(|s| state.accumulators(s)).collect();
            state.update(&x, task.target(inst.label).unwrap()).unwrap();
            for (slot, &(z0, n0)) in before.iter().enumerate() {
                let (z1, n1) = state.accumulators(slot);
                prop_assert!(n1 >= n0);
                if x.get(slot).is_none() {
                    prop_assert!(z1 == z0 && n1 == n0, "slot {slot} moved outside the support");
                }
            }
        }
    }

    #[test]
    fn huge_l1_keeps_every_weight_zero(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 15, 4);
        let params = FtrlParams::new(0.3, 1.0, 1e9, 1.0, Task::Classification).unwrap();
        let mut state = FtrlState::new(params, map.expanded_dim());
        for inst in stream(seed, &map, Task::Classification, 60) {
            let x = map.expand(&inst.features).unwrap();
            prop_assert_eq!(state.predict(&x), 0.5);
            state.update(&x, Task::Classification.target(inst.label).unwrap()).unwrap();
            prop_assert_eq!(state.nonzero_weights(), 0);
        }
    }

    #[test]
    fn training_is_bit_reproducible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = random_map(&mut rng, 20, 5);
        let params = FtrlParams::new(0.2, 1.0, 0.01, 0.01, Task::Regression).unwrap();
        let data = stream(seed, &map, Task::Regression, 80);
        let run = || {
            let mut state = FtrlState::new(params, map.expanded_dim());
            let report = ftrl::train_stream(&mut state, data.iter().cloned().map(Ok), &map, &RunOptions::default()).unwrap();
            let bits: Vec<(usize, u64, u64)> = state.touched().map(|(s, z, n)| (s, z.to_bits(), n.to_bits())).collect();
            (bits, report.cumulative_loss.to_bits())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn three_round_trace_matches_hand_computation() {
    // alpha=0.5, beta=1, l1=0.2, l2=0.1; rounds feed expanded vectors directly.
    let params = FtrlParams::new(0.5, 1.0, 0.2, 0.1, Task::Regression).unwrap();
    let mut state = FtrlState::new(params, 4);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let x1 = pqr_core::ExpandedVector::from_entries(vec![(0, 1.0), (3, 2.0)]).unwrap();
    let x2 = pqr_core::ExpandedVector::from_entries(vec![(0, 1.0), (1, -1.0)]).unwrap();
    let x3 = pqr_core::ExpandedVector::from_entries(vec![(0, 1.0), (3, 0.5)]).unwrap();

    assert_eq!(state.update(&x1, 1.5).unwrap(), 0.0);
    assert_eq!(state.accumulators(0), (-1.5, 2.25));
    assert_eq!(state.accumulators(3), (-3.0, 9.0));

    let p2 = state.update(&x2, -0.5).unwrap();
    assert!(close(p2, 0.25490196078431376), "{p2}");
    let (z0, n0) = state.accumulators(0);
    let (z1, n1) = state.accumulators(1);
    assert!(close(z0, -0.8364798468928198) && close(n0, 2.8198769703960016));
    assert!(close(z1, -0.7549019607843137) && close(n1, 0.5698769703960015));

    let p3 = state.update(&x3, 2.0).unwrap();
    assert!(close(p3, 0.2894429863085572), "{p3}");
    let expect = [
        (0, -2.714434698847162, 5.745882267484989),
        (1, -0.7549019607843137, 0.5698769703960015),
        (3, -3.9379202884087956, 9.731501324272246),
    ];
    for (slot, z, n) in expect {
        let (gz, gn) = state.accumulators(slot);
        assert!(close(gz, z) && close(gn, n), "slot {slot}: ({gz}, {gn})");
    }
    let w = state.weights();
    assert!(close(w[0], 0.3647219494627346));
    assert!(close(w[1], 0.153720803910918));
    assert!(close(w[3], 0.4482418182474941));
}
