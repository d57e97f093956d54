mod common;

use braincast::data::WindowedDataset;
use braincast::eval::{baseline_persistence, compute_metrics, variate_scores};
use braincast::model::{energy_equalize, model_forward, sia_forward, ModelParams};
use braincast::numerics::{dft_rows, flip_spectrum, idft_rows, softmax_rows};
use braincast::train::{
    compute_gradients, rmsprop_step, train_with, EarlyStopping, OptState, RmsPropConfig, StopReason, TrainConfig,
    TrainOptions,
};
use braincast::{ComplexMatrix, RealMatrix, SeedRng};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn row_stochastic(m: &RealMatrix, tol: f64) -> bool {
    (0..m.rows()).all(|r| {
        let row = m.row(r);
        row.iter().all(|v| *v >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < tol
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_round_trip_and_parseval(values in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..96)) {
        let k = values.len();
        let x = ComplexMatrix::from_fn(1, k, |_, c| Complex64::new(values[c].0, values[c].1));
        let spec = dft_rows(&x).unwrap();
        let back = idft_rows(&spec).unwrap();
        prop_assert!(back.max_abs_diff(&x) / x.max_norm().max(1.0) < 1e-10);
        let e_time: f64 = x.row(0).iter().map(|c| c.norm_sqr()).sum();
        let e_freq: f64 = spec.row(0).iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((e_freq - k as f64 * e_time).abs() <= 1e-8 * e_freq.max(1e-300));
        prop_assert_eq!(flip_spectrum(&flip_spectrum(&spec)), spec);
    }

    #[test]
    fn equalization_adds_the_time_reversal(values in prop::collection::vec(-5.0f64..5.0, 1..80)) {
        let l = values.len();
        let x = RealMatrix::row_vector(values);
        let eq = energy_equalize(&x).unwrap();
        let want = RealMatrix::from_fn(1, l, |_, m| x.get(0, m) + x.get(0, (l - m) % l));
        prop_assert!(eq.max_abs_diff(&want) < 1e-10 * x.max_abs().max(1.0));
    }

    #[test]
    fn metric_bounds_and_mse_decomposition(
        pairs in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 2..60),
        a in 0.01f64..50.0,
        b in -30.0f64..30.0,
    ) {
        let preds = vec![RealMatrix::row_vector(pairs.iter().map(|p| p.0).collect())];
        let targets = vec![RealMatrix::row_vector(pairs.iter().map(|p| p.1).collect())];
        let m = compute_metrics(&preds, &targets).unwrap();
        prop_assert!(m.mse >= 0.0 && m.mae >= 0.0);
        prop_assert!(m.mae <= m.mse.sqrt() + 1e-12);
        let mean_err = pairs.iter().map(|p| p.0 - p.1).sum::<f64>() / pairs.len() as f64;
        prop_assert!(m.mse >= mean_err * mean_err - 1e-12);
        if let Some(r) = m.r {
            prop_assert!((-1.0..=1.0).contains(&r));
            let moved = vec![preds[0].map(|v| a * v + b)];
            let r2 = compute_metrics(&moved, &targets).unwrap().r.unwrap();
            prop_assert!((r2 - r).abs() < 1e-9);
        }
        if let Some(r2) = m.r2 {
            prop_assert!(r2 <= 1.0);
        }
    }

    #[test]
    fn persistence_is_exact_on_constant_continuation(
        last in prop::collection::vec(-100.0f64..100.0, 1..6),
        l in 1usize..20,
        t in 1usize..10,
    ) {
        let n = last.len();
        let lookback = RealMatrix::from_fn(n, l, |r, c| if c + 1 == l { last[r] } else { c as f64 - 3.0 });
        let truth = RealMatrix::from_fn(n, t, |r, _| last[r]);
        let pred = baseline_persistence(&lookback, t).unwrap();
        prop_assert_eq!(compute_metrics(&[pred], &[truth]).unwrap().mse, 0.0);
    }

    #[test]
    fn variate_scores_form_a_probability_vector(logits in prop::collection::vec(-30.0f64..30.0, 1..8usize * 8)) {
        let n = (logits.len() as f64).sqrt() as usize;
        let m = softmax_rows(&RealMatrix::from_fn(n, n, |r, c| logits[r * n + c]));
        let s = variate_scores(&m);
        prop_assert_eq!(s.len(), n);
        prop_assert!(s.iter().all(|v| *v >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stopping_rule_matches_a_direct_scan(vals in prop::collection::vec(0.0f64..4.0, 1..40), patience in 1usize..6) {
        let vals: Vec<f64> = vals.into_iter().map(|v| (v * 4.0).round() / 4.0).collect();
        let mut rule = EarlyStopping::new(patience);
        let mut stopped_at = None;
        for (i, v) in vals.iter().enumerate() {
            if rule.observe(i + 1, *v).1 {
                stopped_at = Some(i + 1);
                break;
            }
        }
        // Direct scan: the first epoch preceded by `patience` epochs since the
        // last strict improvement of the running minimum.
        let mut best = f64::INFINITY;
        let mut since = 0;
        let mut expected = None;
        for (i, v) in vals.iter().enumerate() {
            if *v < best { best = *v; since = 0; } else { since += 1; }
            if since >= patience { expected = Some(i + 1); break; }
        }
        prop_assert_eq!(stopped_at, expected);
        let seen = &vals[..stopped_at.unwrap_or(vals.len())];
        let min = seen.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(rule.best, min);
        prop_assert_eq!(vals[rule.best_epoch - 1], min);
        prop_assert!(seen[..rule.best_epoch - 1].iter().all(|v| *v > min));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sia_is_permutation_equivariant(seed in 0u64..10_000) {
        let mut cfg = tiny_config();
        cfg.layers = 2;
        let params = perturbed_params(&cfg, seed);
        let mut rng = SeedRng::new(seed).stream("perm");
        let x_e = random_matrix(&mut rng, cfg.variates, cfg.d_model, 2.0);
        let mut perm: Vec<usize> = (0..cfg.variates).collect();
        perm.shuffle(&mut rng);
        let permuted = RealMatrix::from_fn(cfg.variates, cfg.d_model, |r, c| x_e.get(perm[r], c));

        let (h, maps) = sia_forward(&x_e, &params.sia, cfg.heads, cfg.ln_eps);
        let (hp, maps_p) = sia_forward(&permuted, &params.sia, cfg.heads, cfg.ln_eps);
        let h_moved = RealMatrix::from_fn(cfg.variates, cfg.d_model, |r, c| h.get(perm[r], c));
        prop_assert!(hp.max_abs_diff(&h_moved) < 1e-12);
        for (layer, layer_p) in maps.iter().zip(&maps_p) {
            for (a, ap) in layer.iter().zip(layer_p) {
                let conj = RealMatrix::from_fn(cfg.variates, cfg.variates, |i, j| a.get(perm[i], perm[j]));
                prop_assert!(ap.max_abs_diff(&conj) < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_pure_shape_stable_and_stochastic(seed in 0u64..10_000, mask in 0u8..8) {
        let mut cfg = tiny_config();
        cfg.enable_sia = mask & 1 == 0;
        cfg.enable_tfr = mask & 2 == 0;
        cfg.enable_spa = mask & 4 == 0;
        let params = perturbed_params(&cfg, seed);
        let mut rng = SeedRng::new(seed).stream("x");
        let x = random_matrix(&mut rng, cfg.variates, cfg.lookback, 3.0);
        let a = model_forward(&x, &params, &cfg).unwrap();
        let b = model_forward(&x, &params, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.prediction.shape(), (cfg.variates, cfg.horizon));
        for m in [&a.h_spat, &a.h_temp, &a.h_global] {
            prop_assert_eq!(m.shape(), (cfg.variates, cfg.d_model));
        }
        prop_assert_eq!(a.attention.len(), if cfg.enable_sia { cfg.layers } else { 0 });
        for layer in &a.attention {
            prop_assert_eq!(layer.len(), cfg.heads);
            prop_assert!(layer.iter().all(|m| row_stochastic(m, 1e-6)));
        }
        prop_assert!(row_stochastic(&a.spa_scores, 1e-6));
    }

    #[test]
    fn rmsprop_is_elementwise_and_shape_preserving(seed in 0u64..10_000, lr in 1e-5f64..1e-1) {
        let cfg = tiny_config();
        let mut params = perturbed_params(&cfg, seed);
        let before = params.clone();
        let grads = compute_gradients(&params, &random_batch(&cfg, 2, seed), &cfg).unwrap().grads;
        let mut state = OptState::new(&cfg);
        let rms = RmsPropConfig { learning_rate: lr, decay: 0.9, eps: 1e-8 };
        rmsprop_step(&mut params, &grads, &mut state, &rms);

        let layout = |p: &ModelParams| p.tensors().iter().map(|t| (t.name.clone(), t.dtype, t.shape)).collect::<Vec<_>>();
        prop_assert_eq!(layout(&params), layout(&before));
        prop_assert_eq!(layout(&state.sq_avg), layout(&before));
        prop_assert!(state.sq_avg.flatten().iter().all(|v| *v >= 0.0));
        // Each scalar moves by its own gradient only: w − lr·g/(√((1−ρ)g²) + ε).
        for ((w, w0), g) in params.flatten().iter().zip(before.flatten()).zip(grads.flatten()) {
            let want = w0 - lr * g / ((0.1 * g * g).sqrt() + 1e-8);
            prop_assert!((w - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

fn tiny_dataset() -> WindowedDataset {
    let cfg = tiny_config();
    let batch = |seed| random_batch(&cfg, 10, seed);
    WindowedDataset {
        train: batch(1),
        val: batch(2),
        test: batch(3),
        variates: cfg.variates,
        window: braincast::data::WindowConfig {
            lookback: cfg.lookback,
            horizon: cfg.horizon,
            stride: 1,
        },
    }
}

#[test]
fn one_epoch_budget_runs_exactly_one_epoch() {
    let cfg = tiny_config();
    let tc = TrainConfig {
        max_epochs: 1,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let out = train_with(&tiny_dataset(), &cfg, &tc, TrainOptions::default(), None).unwrap();
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.state.epochs_completed, 1);
    assert_eq!(out.stop_reason, StopReason::MaxEpochs);
    assert!(!out.log[0].stopped);
    assert_eq!(out.best_epoch, 1);
    // 10 windows in batches of 4: three updates.
    assert_eq!(out.state.opt.step, 3);
}

#[test]
fn worker_count_does_not_change_training() {
    let cfg = tiny_config();
    let tc = TrainConfig {
        max_epochs: 2,
        batch_size: 10,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let data = tiny_dataset();
    let run = |threads| {
        let opts = TrainOptions { threads, record_elapsed: false };
        train_with(&data, &cfg, &tc, opts, None).unwrap()
    };
    let (a, b) = (run(0), run(3));
    assert_eq!(a.log, b.log);
    let bits = |p: &ModelParams| p.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.best_params), bits(&b.best_params));
}
