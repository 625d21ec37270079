//! Property tests over the spec'd invariants of the kernels, the data
//! pipeline, and the metrics.

use proptest::prelude::*;

use sfcast_core::data::{make_windows, NormStats, Provenance};
use sfcast_core::metrics::{explained_variance, mae, r2_score};
use sfcast_core::tensor::{activation, conv1d_valid, Activation, Tensor};
use sfcast_core::train::mae_loss;

fn finite_vec(len: usize, bound: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-bound..bound, len)
}

proptest! {
    /// conv1d_valid output time length is exactly T - K + 1.
    #[test]
    fn conv_output_length(t_len in 1usize..40, k_extra in 0usize..8, c_in in 1usize..3, c_out in 1usize..3) {
        let k_len = (t_len.saturating_sub(k_extra)).max(1);
        let input = Tensor::zeros(&[t_len, c_in]);
        let kernels = Tensor::zeros(&[k_len, c_in, c_out]);
        let bias = Tensor::zeros(&[c_out]);
        let out = conv1d_valid(&input, &kernels, &bias).unwrap();
        prop_assert_eq!(out.shape(), &[t_len - k_len + 1, c_out]);
    }

    /// (A B) C == A (B C) within 1e-12 on random 3-chains.
    #[test]
    fn matmul_is_associative(
        m in 1usize..4, k in 1usize..4, n in 1usize..4, p in 1usize..4,
        seed in 0u64..1000,
    ) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let fill = |r: usize, c: usize, next: &mut dyn FnMut() -> f64| {
            Tensor::new(vec![r, c], (0..r * c).map(|_| next()).collect()).unwrap()
        };
        let a = fill(m, k, &mut next);
        let b = fill(k, n, &mut next);
        let c = fill(n, p, &mut next);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (l, r) in left.data().iter().zip(right.data()) {
            prop_assert!((l - r).abs() < 1e-12);
        }
    }

    /// relu is exactly idempotent.
    #[test]
    fn relu_idempotent(values in finite_vec(16, 1e6)) {
        let x = Tensor::new(vec![16], values).unwrap();
        let once = activation(&x, Activation::Relu);
        let twice = activation(&once, Activation::Relu);
        prop_assert_eq!(once.data(), twice.data());
    }

    /// Window count is L - window for horizon 1, for all L > window.
    #[test]
    fn window_count(extra in 1usize..60, window in 1usize..20) {
        let len = window + extra;
        let values: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let ds = make_windows(
            &values, window, 1,
            NormStats { mean: 0.0, std: 1.0 },
            Provenance::synthetic(),
        ).unwrap();
        prop_assert_eq!(ds.len(), len - window);
    }

    /// r2 <= explained_variance on every input pair.
    #[test]
    fn r2_never_exceeds_explained_variance(
        pred in finite_vec(12, 50.0),
        target in finite_vec(12, 50.0),
    ) {
        prop_assume!({
            let mean = target.iter().sum::<f64>() / target.len() as f64;
            target.iter().any(|t| (t - mean).abs() > 1e-9)
        });
        let r2 = r2_score(&pred, &target).unwrap();
        let ev = explained_variance(&pred, &target).unwrap();
        prop_assert!(r2 <= ev + 1e-12, "r2 {} > ev {}", r2, ev);
    }

    /// All three metrics are invariant under joint permutation.
    #[test]
    fn metrics_are_permutation_invariant(
        pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..12),
        rotation in 1usize..5,
    ) {
        let pred: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
        let target: Vec<f64> = pairs.iter().map(|(_, t)| *t).collect();
        prop_assume!({
            let mean = target.iter().sum::<f64>() / target.len() as f64;
            target.iter().any(|t| (t - mean).abs() > 1e-9)
        });
        let rot = rotation % pred.len();
        let mut pred_rot = pred.clone();
        let mut target_rot = target.clone();
        pred_rot.rotate_left(rot);
        target_rot.rotate_left(rot);

        let close = |a: f64, b: f64| (a - b).abs() < 1e-9 * a.abs().max(b.abs()).max(1.0);
        prop_assert!(close(mae(&pred, &target).unwrap(), mae(&pred_rot, &target_rot).unwrap()));
        prop_assert!(close(r2_score(&pred, &target).unwrap(), r2_score(&pred_rot, &target_rot).unwrap()));
        prop_assert!(close(
            explained_variance(&pred, &target).unwrap(),
            explained_variance(&pred_rot, &target_rot).unwrap()
        ));
    }

    /// The metric mae and the training loss scalar agree exactly.
    #[test]
    fn mae_metric_equals_loss_scalar(pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..16)) {
        let pred: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
        let target: Vec<f64> = pairs.iter().map(|(_, t)| *t).collect();
        let n = pred.len();
        let (loss, _) = mae_loss(
            &Tensor::new(vec![n, 1], pred.clone()).unwrap(),
            &Tensor::new(vec![n, 1], target.clone()).unwrap(),
        ).unwrap();
        prop_assert_eq!(loss.to_bits(), mae(&pred, &target).unwrap().to_bits());
    }

    /// Normalization round trip reproduces the input within 1e-12.
    #[test]
    fn normalize_round_trip(values in finite_vec(24, 100.0)) {
        prop_assume!({
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.iter().any(|v| (v - mean).abs() > 1e-6)
        });
        let (normalized, stats) = sfcast_core::normalize(&values).unwrap();
        for (orig, z) in values.iter().zip(&normalized) {
            let back = stats.invert(*z);
            prop_assert!((back - orig).abs() < 1e-12 * orig.abs().max(1.0));
        }
    }
}
