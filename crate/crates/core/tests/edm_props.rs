use std::collections::BTreeSet;
use std::f64::consts::PI;

use neurodyn_core::edm::*;
use neurodyn_core::{ChannelSpec, TrialSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single(series: Vec<f64>) -> TrialSet {
    TrialSet::from_series(vec![ChannelSpec::other("x")], 1.0, &[vec![series]]).unwrap()
}

fn sine(n: usize, period: f64) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * i as f64 / period).sin()).collect()
}

fn self_forecast(x: Vec<f64>, e: usize, tp: usize, theiler: usize) -> ForecastResult {
    let mut cfg = EmbeddingConfig::univariate("x", "x", e, -1, tp);
    cfg.theiler = theiler;
    let lib = delay_embed(&single(x), &cfg).unwrap();
    simplex_forecast(&lib, &lib).unwrap()
}

#[test]
fn sine_is_predictable_at_every_short_horizon() {
    for tp in 1..=10 {
        let r = self_forecast(sine(500, 25.0), 2, tp, 10);
        assert!(r.rho > 0.99, "Tp={tp} rho={}", r.rho);
    }
}

#[test]
fn sine_embeds_from_two_dimensions() {
    let set = TrialSet::from_series(
        vec![ChannelSpec::other("x")],
        1.0,
        &(0..10).map(|k| vec![sine(60, 17.0 + k as f64)]).collect::<Vec<_>>(),
    )
    .unwrap();
    let base = EmbeddingConfig::univariate("x", "x", 1, -1, 1);
    let table = param_search(&set, &base, &[1, 2, 3, 4, 5], &[-1], &[1], Split::LeaveOneTrialOut).unwrap();
    assert_eq!(table.rows.len(), 5);
    for row in table.rows.iter().filter(|r| r.e >= 2) {
        assert!(row.rho >= 0.99, "{row:?}");
    }
}

#[test]
fn logistic_skill_decays_with_horizon() {
    let mut x = vec![0.4];
    for _ in 1..500 {
        let v = x[x.len() - 1];
        x.push(3.9 * v * (1.0 - v));
    }
    let rhos: Vec<f64> = [1, 2, 5, 10].iter().map(|&tp| self_forecast(x.clone(), 2, tp, 0).rho).collect();
    assert!(rhos[0] > 0.9, "{rhos:?}");
    assert!(rhos.windows(2).all(|w| w[0] > w[1]), "{rhos:?}");
}

#[test]
fn white_noise_has_no_skill() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
    let r = self_forecast(x, 2, 1, 0);
    assert!(r.rho.abs() < 0.2, "rho={}", r.rho);
}

#[test]
fn independent_target_is_not_predicted() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials: Vec<Vec<Vec<f64>>> = (0..40)
        .map(|t| {
            let src = sine(60, 13.0 + (t % 7) as f64);
            let tgt = (0..60).map(|_| rng.gen::<f64>()).collect();
            vec![src, tgt]
        })
        .collect();
    let set = TrialSet::from_series(vec![ChannelSpec::other("s"), ChannelSpec::other("n")], 1.0, &trials).unwrap();
    let r = cross_predict(&set, &EmbeddingConfig::univariate("s", "n", 2, -1, 1), Split::LeaveOneTrialOut).unwrap();
    assert!(r.rho.abs() < 0.2, "rho={}", r.rho);
}

#[test]
fn periodic_cross_prediction_of_itself() {
    let trials: Vec<Vec<Vec<f64>>> = (0..6).map(|k| vec![sine(120, 20.0 + k as f64 * 0.5)]).collect();
    let set = TrialSet::from_series(vec![ChannelSpec::other("x")], 1.0, &trials).unwrap();
    for split in [Split::LeaveOneTrialOut, Split::HalfSplit] {
        let r = cross_predict(&set, &EmbeddingConfig::univariate("x", "x", 2, -1, 1), split).unwrap();
        assert!(r.rho > 0.99, "{split:?} rho={}", r.rho);
    }
}

#[test]
fn single_point_search_matches_cross_predict() {
    let trials: Vec<Vec<Vec<f64>>> = (0..4).map(|k| vec![sine(60, 9.0 + k as f64)]).collect();
    let set = TrialSet::from_series(vec![ChannelSpec::other("x")], 1.0, &trials).unwrap();
    let cfg = EmbeddingConfig::univariate("x", "x", 3, -2, 2);
    let table = param_search(&set, &cfg, &[3], &[-2], &[2], Split::HalfSplit).unwrap();
    let direct = cross_predict(&set, &cfg, Split::HalfSplit).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].rho, direct.rho);
    assert_eq!(table.rows[0].n_pred, direct.predictions.len());
}

fn ragged_trials(lens: &[usize], seed: u64) -> Vec<TrialSet> {
    // one single-trial set per length; origins are then checked against each trial's values
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lens.iter()
        .map(|&n| single((0..n).map(|_| rng.gen::<f64>()).collect()))
        .collect()
}

fn noisy_set(trials: usize, steps: usize, seed: u64) -> TrialSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series: Vec<Vec<Vec<f64>>> = (0..trials)
        .map(|_| {
            let phase: f64 = rng.gen::<f64>() * 6.0;
            let x: Vec<f64> = (0..steps).map(|i| (0.4 * i as f64 + phase).sin() + 0.1 * rng.gen::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| v * v + 0.05 * rng.gen::<f64>()).collect();
            vec![x, y]
        })
        .collect();
    TrialSet::from_series(vec![ChannelSpec::other("x"), ChannelSpec::other("y")], 1.0, &series).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embeddings_never_cross_trials(lens in prop::collection::vec(1usize..30, 1..6), e in 1usize..5,
                                     tau in prop::sample::select(vec![-3i64, -2, -1, 1, 2]), tp in 1usize..4, seed in any::<u64>()) {
        let cfg = EmbeddingConfig::univariate("x", "x", e, tau, tp);
        let sets = ragged_trials(&lens, seed);
        // concatenating trials of unequal length is impossible in a TrialSet, so each trial is
        // checked against its own series: every coordinate must equal x[t + j·tau]
        for set in &sets {
            let x = set.series(0, 0);
            match delay_embed(set, &cfg) {
                Ok(lib) => {
                    for i in 0..lib.len() {
                        let o = lib.origin(i);
                        for (j, v) in lib.point(i).iter().enumerate() {
                            let idx = o.timestep as i64 + j as i64 * tau;
                            prop_assert!(idx >= 0 && (idx as usize) < x.len());
                            prop_assert_eq!(*v, x[idx as usize]);
                        }
                        prop_assert_eq!(lib.future(i), x[o.timestep + tp]);
                    }
                }
                Err(EdmError::TrialTooShort { .. }) => prop_assert!(x.len() < cfg.min_trial_len()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn multi_trial_points_stay_in_trial(trials in 2usize..6, steps in 8usize..40, e in 1usize..4, tp in 1usize..4, seed in any::<u64>()) {
        let set = noisy_set(trials, steps, seed);
        let cfg = EmbeddingConfig::univariate("x", "y", e, -1, tp);
        let lib = delay_embed(&set, &cfg).unwrap();
        let per_trial = steps - (e - 1) - tp;
        prop_assert_eq!(lib.len(), trials * per_trial);
        for i in 0..lib.len() {
            let o = lib.origin(i);
            let x = set.series(o.trial, 0);
            prop_assert_eq!(lib.point(i)[e - 1], x[o.timestep + 1 - e]);
            prop_assert_eq!(lib.future(i), set.get(o.trial, o.timestep + tp, 1));
        }
    }

    #[test]
    fn weights_are_convex(mut d in prop::collection::vec(0.0f64..10.0, 1..8)) {
        d.sort_by(f64::total_cmp);
        let w = simplex_weights(&d);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theiler_only_removes_predictions(seed in any::<u64>(), a in 0usize..20, b in 0usize..20) {
        let (lo, hi) = (a.min(b), a.max(b));
        let x = noisy_set(1, 80, seed).series(0, 0);
        let mut cfg = EmbeddingConfig::univariate("x", "x", 3, -1, 1);
        let lib_lo = { cfg.theiler = lo; delay_embed(&single(x.clone()), &cfg).unwrap() };
        let lib_hi = { cfg.theiler = hi; delay_embed(&single(x), &cfg).unwrap() };
        let count = |lib: &EmbeddedLibrary| simplex_forecast(lib, lib).map(|r| r.predictions.len()).unwrap_or(0);
        prop_assert!(count(&lib_hi) <= count(&lib_lo));
    }

    #[test]
    fn rho_matches_stored_pairs(seed in any::<u64>()) {
        let set = noisy_set(6, 30, seed);
        let r = cross_predict(&set, &EmbeddingConfig::univariate("x", "y", 2, -1, 2), Split::LeaveOneTrialOut).unwrap();
        let again = neurodyn_core::stats::spearman_rho(&r.observed(), &r.predicted()).unwrap();
        prop_assert_eq!(r.rho, again);
    }
}

#[test]
fn leave_one_out_never_uses_query_trial() {
    // trials sit far apart in state space and the target is the trial id, so a
    // same-trial neighbor would reproduce the id exactly
    let trials: Vec<Vec<Vec<f64>>> = (0..5)
        .map(|t| {
            let x = sine(40, 11.0).iter().map(|v| v + 10.0 * t as f64).collect();
            vec![x, vec![t as f64; 40]]
        })
        .collect();
    let set = TrialSet::from_series(vec![ChannelSpec::other("x"), ChannelSpec::other("id")], 1.0, &trials).unwrap();
    let cfg = EmbeddingConfig::univariate("x", "id", 2, -1, 1);
    let r = cross_predict(&set, &cfg, Split::LeaveOneTrialOut).unwrap();
    assert_eq!(r.predictions.len(), delay_embed(&set, &cfg).unwrap().len());
    for p in &r.predictions {
        assert!((p.predicted - p.origin.trial as f64).abs() > 0.5, "{p:?}");
    }
}

#[test]
fn results_are_identical_across_thread_counts() {
    let set = noisy_set(12, 60, 9);
    let cfg = EmbeddingConfig::univariate("x", "y", 3, -1, 2);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    cross_predict(&set, &cfg, Split::LeaveOneTrialOut).unwrap(),
                    param_search(&set, &cfg, &[1, 2, 3], &[-1, -2], &[1, 3], Split::HalfSplit).unwrap(),
                )
            })
    };
    let (a1, t1) = run(1);
    let (a4, t4) = run(4);
    assert_eq!(a1, a4);
    assert_eq!(t1, t4);
    let origins: BTreeSet<_> = a1.predictions.iter().map(|p| p.origin).collect();
    assert_eq!(origins.len(), a1.predictions.len());
}
