//! Randomized invariants.

mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tic_snn::data::{synth_blobs, SynthSpec};
use tic_snn::fisher::{fisher_analysis, information_centroid, Estimator, FisherProfile};
use tic_snn::lif::{surrogate_derivative, NetworkConfig};
use tic_snn::network::{Drive, SpikingNetwork};
use tic_snn::pruning::{compute_efficiency, magnitude_prune, tic_select_timestep, PruneMask};
use tic_snn::robustness::{attack, blur_corrupt, gaussian_corrupt, AttackParams};
use tic_snn::stbp::{LossConfig, OptimizerConfig, Trainer};
use tic_snn::tensor::{affine_forward, conv2d_forward, softmax_cross_entropy, Conv2dGeometry, Tensor};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() }
}

fn combo(a: f64, x: &Tensor, b: f64, y: &Tensor) -> Tensor {
    x.zip_map(y, |u, v| a * u + b * v).unwrap()
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn affine_is_affine_in_input(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let mut r = rng(seed);
        let (x, y) = (uniform(&[2, 5], -1.0, 1.0, &mut r), uniform(&[2, 5], -1.0, 1.0, &mut r));
        let (w, bias) = (uniform(&[3, 5], -1.0, 1.0, &mut r), uniform(&[3], -1.0, 1.0, &mut r));
        let f = |t: &Tensor| affine_forward(t, &w, &bias).unwrap();
        let lhs = f(&combo(a, &x, b, &y));
        let zero = f(&Tensor::zeros(&[2, 5]));
        let rhs = combo(1.0, &combo(a, &f(&x), b, &f(&y)), -(a + b - 1.0), &zero);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn conv_is_affine_in_input(seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64, pad in 0usize..2) {
        let mut r = rng(seed);
        let shape = [1, 2, 5, 5];
        let (x, y) = (uniform(&shape, -1.0, 1.0, &mut r), uniform(&shape, -1.0, 1.0, &mut r));
        let (k, bias) = (uniform(&[2, 2, 3, 3], -1.0, 1.0, &mut r), uniform(&[2], -1.0, 1.0, &mut r));
        let geom = Conv2dGeometry { stride: 1, padding: pad };
        let f = |t: &Tensor| conv2d_forward(t, &k, &bias, geom).unwrap();
        let lhs = f(&combo(a, &x, b, &y));
        let zero = f(&Tensor::zeros(&shape));
        let rhs = combo(1.0, &combo(a, &f(&x), b, &f(&y)), -(a + b - 1.0), &zero);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_rows_sum_to_zero(seed in any::<u64>(), classes in 2usize..6) {
        let mut r = rng(seed);
        let logits = uniform(&[4, classes], -20.0, 20.0, &mut r);
        let labels: Vec<usize> = (0..4).map(|i| (i + seed as usize) % classes).collect();
        let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
        for b in 0..4 {
            prop_assert!(g.row(b).iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn flatten_unflatten_is_identity(seed in any::<u64>()) {
        let net = SpikingNetwork::mlp(5, &[4, 3], 2, NetworkConfig::default(), 1.0, &mut rng(seed)).unwrap();
        let flat = net.params.flatten();
        prop_assert_eq!(net.params.unflatten(&flat).unwrap(), net.params.clone());
    }

    #[test]
    fn surrogate_is_even_positive_and_peaked(x in -50.0..50.0f64, s in 0.1..5.0f64) {
        let d = surrogate_derivative(x, s);
        prop_assert!(d > 0.0);
        prop_assert_eq!(d, surrogate_derivative(-x, s));
        prop_assert!(d <= surrogate_derivative(0.0, s));
    }

    #[test]
    fn forward_is_deterministic_and_resets_exactly(seed in any::<u64>(), tau in 0.6..6.0f64) {
        let cfg = NetworkConfig { timesteps: 6, tau, ..Default::default() };
        let net = SpikingNetwork::mlp(4, &[6, 5], 3, cfg, 3.0, &mut rng(seed)).unwrap();
        let x = uniform(&[3, 4], 0.0, 2.0, &mut rng(seed ^ 1));
        let a = net.forward(&x, 6).unwrap();
        prop_assert_eq!(&a, &net.forward(&x, 6).unwrap());
        for layer in a.layers.iter().filter(|l| l.lif) {
            for (o, u) in layer.output.iter().zip(&layer.reset_membrane) {
                for (&s, &v) in o.data().iter().zip(u.data()) {
                    if s == 1.0 {
                        prop_assert_eq!(v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn readout_is_causal(seed in any::<u64>(), t in 1usize..5) {
        let net = SpikingNetwork::mlp(4, &[6], 3, NetworkConfig { timesteps: 5, ..Default::default() }, 3.0, &mut rng(seed)).unwrap();
        let mut r = rng(seed ^ 2);
        let steps: Vec<Tensor> = (0..5).map(|_| uniform(&[2, 4], 0.0, 2.0, &mut r)).collect();
        let mut changed = steps.clone();
        changed[t] = uniform(&[2, 4], 0.0, 2.0, &mut r);
        let a = net.forward_drive(Drive::PerStep(&steps), 5).unwrap();
        let b = net.forward_drive(Drive::PerStep(&changed), 5).unwrap();
        for s in 0..t {
            prop_assert_eq!(&a.readout[s], &b.readout[s]);
        }
    }

    #[test]
    fn centroid_bounds_and_scale_invariance(v in prop::collection::vec(0.0..10.0f64, 1..12), c in 0.01..100.0f64) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let ic = information_centroid(&v).unwrap();
        prop_assert!((1.0..=v.len() as f64).contains(&ic));
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        prop_assert!((information_centroid(&scaled).unwrap() - ic).abs() < 1e-12 * v.len() as f64);
    }

    #[test]
    fn fisher_is_nonnegative_and_repeatable(seed in any::<u64>()) {
        let net = SpikingNetwork::mlp(4, &[5], 3, NetworkConfig { timesteps: 4, ..Default::default() }, 2.0, &mut rng(seed)).unwrap();
        let x = uniform(&[3, 4], 0.0, 1.0, &mut rng(seed ^ 3));
        let (p, layers) = fisher_analysis(&net, &x, Estimator::Exact, 0).unwrap();
        prop_assert!(p.traces.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(&p.traces, &fisher_analysis(&net, &x, Estimator::Exact, 99).unwrap().0.traces);
        for t in 0..4 {
            let sum: f64 = layers.values.iter().map(|row| row[t]).sum();
            prop_assert!((sum - p.traces[t]).abs() <= 1e-10 * p.traces[t].max(1.0));
        }
    }

    #[test]
    fn attacks_stay_in_ball_and_range(seed in any::<u64>(), eps in 0.001..0.3f64, pgd in any::<bool>()) {
        let net = SpikingNetwork::mlp(6, &[5], 3, NetworkConfig { timesteps: 4, ..Default::default() }, 3.0, &mut rng(seed)).unwrap();
        let x = uniform(&[4, 6], 0.0, 1.0, &mut rng(seed ^ 4));
        let labels = [0, 1, 2, 1];
        let params = if pgd { AttackParams::pgd(eps, eps / 2.0, 4, (0.0, 1.0)) } else { AttackParams::fgsm(eps, (0.0, 1.0)) };
        let adv = attack(&net, &x, &labels, &params).unwrap();
        for (a, o) in adv.data().iter().zip(x.data()) {
            prop_assert!((a - o).abs() <= eps);
            prop_assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn gaussian_ratio_is_exact(seed in any::<u64>(), ratio in 0.01..2.0f64) {
        let x = uniform(&[3, 10], 0.1, 1.0, &mut rng(seed));
        let y = gaussian_corrupt(&x, ratio, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for b in 0..3 {
            let dn: f64 = y.row(b).iter().zip(x.row(b)).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let xn: f64 = x.row(b).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((dn / xn - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn blur_fixes_constant_images(level in -3.0..3.0f64, k in prop::sample::select(vec![1usize, 2, 4])) {
        let x = Tensor::filled(&[2, 1, 8, 8], level);
        prop_assert!(max_abs_diff(&blur_corrupt(&x, k).unwrap(), &x) < 1e-12);
    }

    #[test]
    fn efficiency_bounded_and_decreasing(n in 1usize..500, nr in 1usize..100, r in 1usize..8, t in 2usize..12) {
        let mut prev = f64::INFINITY;
        for tr in 1..=t {
            let e = compute_efficiency(n, nr, r, t, tr).unwrap();
            prop_assert!((0.0..100.0).contains(&e));
            prop_assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn tic_selection_bounded_and_monotone(v in prop::collection::vec(0.0..10.0f64, 1..10), k1 in 0.01..0.99f64, k2 in 0.01..0.99f64) {
        prop_assume!(v.iter().any(|&x| x > 0.0));
        let p = FisherProfile::from_traces(v.clone(), 1, Estimator::Exact, 0);
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let a = tic_select_timestep(&p, lo).unwrap();
        let b = tic_select_timestep(&p, hi).unwrap();
        prop_assert!(a <= v.len() && b <= v.len() && b <= a);
    }

    #[test]
    fn masks_grow_monotonically(seed in any::<u64>(), p in 0.1..0.7f64) {
        let net = SpikingNetwork::mlp(6, &[5], 3, NetworkConfig::default(), 1.0, &mut rng(seed)).unwrap();
        let mut mask = PruneMask::full(&net);
        for _ in 0..3 {
            let next = magnitude_prune(&net, p, Some(&mask)).unwrap();
            prop_assert!(next.contains(&mask));
            prop_assert!(next.kept() < mask.kept());
            mask = next;
        }
    }
}

#[test]
fn masked_weights_stay_zero_through_training() {
    let data = synth_blobs(&SynthSpec { train: 64, test: 16, ..Default::default() }, 5).unwrap();
    let mut net = SpikingNetwork::mlp(256, &[16], 2, NetworkConfig { timesteps: 4, ..Default::default() }, 1.0, &mut rng(6)).unwrap();
    let mask = magnitude_prune(&net, 0.7, None).unwrap();
    let opt = OptimizerConfig { epochs: 3, batch_size: 16, weight_decay: 1e-3, momentum: 0.5, ..Default::default() };
    let trainer = Trainer { mask: Some(&mask), ..Trainer::new(&net, opt, LossConfig::standard(), 7) };
    let mut checked = 0;
    trainer
        .run_with_hook(&mut net, &data, &mut |_, n| {
            for (l, keep) in mask.keep.iter().enumerate() {
                for (w, k) in n.weight(l).data().iter().zip(keep) {
                    assert!(*k || *w == 0.0);
                }
            }
            checked += 1;
            Ok(())
        })
        .unwrap();
    assert_eq!(checked, 4);
}
