//! Acceptance suite. Every criterion writes one `criterion N ...: PASS|FAIL`
//! line straight to stdout (bypassing the test harness capture) and then
//! asserts its own verdict.
//!
//! The trained toy models are shared between criteria through `OnceLock`s:
//! criteria 4 and 7 use the same networks, and so do criteria 5 and 6.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tic_snn::data::{decode_idx_images, decode_idx_labels, encode_idx_images, encode_idx_labels, synth_blobs};
use tic_snn::data::{Dataset, Geometry, SynthSpec};
use tic_snn::fisher::{fisher_analysis, fisher_profile, information_centroid, Estimator, FisherProfile, IcTracker};
use tic_snn::harness::config::ExperimentConfig;
use tic_snn::harness::experiments::run_train;
use tic_snn::lif::{NetworkConfig, ReadoutMode};
use tic_snn::network::SpikingNetwork;
use tic_snn::pruning::{compute_efficiency, iterative_prune, tic_select_timestep, PruneMask, PruningSchedule};
use tic_snn::robustness::{attack, deficit_sweep, kl_quadratic_check, windowed_deficit_accuracy, AttackParams};
use tic_snn::robustness::DeficitWindow;
use tic_snn::stbp::{batch_gradient, LossConfig, OptimizerConfig, Trainer};
use tic_snn::tensor::{
    affine_backward, affine_forward, conv2d_backward, conv2d_forward, softmax_cross_entropy, Conv2dGeometry, Tensor,
};

const SEEDS: [u64; 3] = [0, 1, 2];
const RANGE: (f64, f64) = (0.0, 1.0);

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stdout().lock(), "criterion {n:>2} {name}: {verdict} ({detail})");
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

fn majority(flags: &[bool]) -> bool {
    flags.iter().filter(|&&f| f).count() >= 2
}

fn toy_net(classes: usize, seed: u64) -> SpikingNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpikingNetwork::mlp(256, &[64], classes, NetworkConfig::default(), 1.0, &mut rng).unwrap()
}

/// Low-contrast blobs on a mid-grey background. Bright backgrounds drive
/// every hidden unit, so these runs clip gradients at norm 1.
fn faint_blobs(classes: usize, noise: f64) -> SynthSpec {
    SynthSpec {
        classes,
        geometry: Geometry::Blobs { sigma: 2.5, radius: 0.5, jitter: 1.0, amplitude: 0.2, noise, background: 0.5 },
        ..Default::default()
    }
}

fn clipped(epochs: usize) -> OptimizerConfig {
    OptimizerConfig { epochs, clip_norm: Some(1.0), ..Default::default() }
}

// ---------------------------------------------------------------------------
// Shared trained models
// ---------------------------------------------------------------------------

struct ToyRun {
    data: Dataset,
    net: SpikingNetwork,
    early: FisherProfile,
    last: FisherProfile,
}

/// Default blobs, T = 8, 60 epochs, Fisher tracked on the test split every
/// 5 epochs.
fn toy_runs() -> &'static [ToyRun] {
    static RUNS: OnceLock<Vec<ToyRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let data = synth_blobs(&SynthSpec::default(), 1000 + seed).unwrap();
                let mut net = toy_net(2, seed);
                let opt = OptimizerConfig { epochs: 60, ..Default::default() };
                let mut tracker = IcTracker::new(data.test.images.clone(), Estimator::Exact, 0, 5);
                Trainer::new(&net, opt, LossConfig::standard(), seed)
                    .run_with_hook(&mut net, &data, &mut |e, n| tracker.observe(e, n))
                    .unwrap();
                let early = tracker.at(5).unwrap().profile.clone();
                let last = tracker.series.last().unwrap().profile.clone();
                ToyRun { data, net, early, last }
            })
            .collect()
    })
}

const ALPHAS: [f64; 3] = [0.001, 0.02, 0.05];

struct AlphaRun {
    data: Dataset,
    nets: Vec<SpikingNetwork>,
    accuracy: Vec<f64>,
    mean_fisher: Vec<f64>,
}

fn alpha_runs() -> &'static [AlphaRun] {
    static RUNS: OnceLock<Vec<AlphaRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let data = synth_blobs(&faint_blobs(2, 0.05), 1000 + seed).unwrap();
                let mut run = AlphaRun { data, nets: vec![], accuracy: vec![], mean_fisher: vec![] };
                for &a in &ALPHAS {
                    let mut net = toy_net(2, seed);
                    let rep = Trainer::new(&net, clipped(60), LossConfig::alpha(a), seed).run(&mut net, &run.data).unwrap();
                    let profile = fisher_profile(&net, &run.data.test.images, Estimator::Exact, 0).unwrap();
                    run.accuracy.push(rep.final_test_accuracy());
                    run.mean_fisher.push(profile.mean_trace());
                    run.nets.push(net);
                }
                run
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn reshape(t: &Tensor, flat: &[f64]) -> Tensor {
    Tensor::new(t.shape().to_vec(), flat.to_vec()).unwrap()
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let mut r = rng(100);
    let x = uniform(&[4, 5], 0.0, 1.5, &mut r);
    let labels = [0, 1, 2, 1];
    let net = smooth_mlp(5, 6, 3, smooth_config(3, 2.0, ReadoutMode::AccumulateCurrent), 101);
    let loss = LossConfig::standard();
    let analytic = batch_gradient(&net, &x, &labels, 3, &loss).unwrap().grads.flatten();
    let theta = net.params.flatten();
    let mut probe = net.clone();
    let numeric = central_diff(&theta, 1e-6, |v| {
        probe.params = net.params.unflatten(v).unwrap();
        batch_gradient(&probe, &x, &labels, 3, &loss).unwrap().objective
    });
    let stbp_err = rel_error(&analytic, &numeric);

    let h = 1e-5;
    let mut op_err: f64 = 0.0;
    let xa = uniform(&[3, 4], -1.0, 1.0, &mut r);
    let w = uniform(&[5, 4], -1.0, 1.0, &mut r);
    let b = uniform(&[5], -1.0, 1.0, &mut r);
    let up = uniform(&[3, 5], -1.0, 1.0, &mut r);
    let g = affine_backward(&up, &xa, &w).unwrap();
    let f = |x: &Tensor, w: &Tensor, b: &Tensor| dot(affine_forward(x, w, b).unwrap().data(), up.data());
    op_err = op_err.max(rel_error(g.input.data(), &central_diff(xa.data(), h, |v| f(&reshape(&xa, v), &w, &b))));
    op_err = op_err.max(rel_error(g.weight.data(), &central_diff(w.data(), h, |v| f(&xa, &reshape(&w, v), &b))));
    op_err = op_err.max(rel_error(g.bias.data(), &central_diff(b.data(), h, |v| f(&xa, &w, &reshape(&b, v)))));

    let geom = Conv2dGeometry { stride: 2, padding: 1 };
    let xc = uniform(&[2, 2, 5, 5], -1.0, 1.0, &mut r);
    let k = uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut r);
    let kb = uniform(&[3], -1.0, 1.0, &mut r);
    let upc = uniform(conv2d_forward(&xc, &k, &kb, geom).unwrap().shape(), -1.0, 1.0, &mut r);
    let gc = conv2d_backward(&upc, &xc, &k, geom).unwrap();
    let fc = |x: &Tensor, k: &Tensor, b: &Tensor| dot(conv2d_forward(x, k, b, geom).unwrap().data(), upc.data());
    op_err = op_err.max(rel_error(gc.input.data(), &central_diff(xc.data(), h, |v| fc(&reshape(&xc, v), &k, &kb))));
    op_err = op_err.max(rel_error(gc.weight.data(), &central_diff(k.data(), h, |v| fc(&xc, &reshape(&k, v), &kb))));
    op_err = op_err.max(rel_error(gc.bias.data(), &central_diff(kb.data(), h, |v| fc(&xc, &k, &reshape(&kb, v)))));

    let logits = uniform(&[4, 3], -3.0, 3.0, &mut r);
    let (_, gl) = softmax_cross_entropy(&logits, &labels).unwrap();
    let nl = central_diff(logits.data(), h, |v| softmax_cross_entropy(&reshape(&logits, v), &labels).unwrap().0);
    op_err = op_err.max(rel_error(gl.data(), &nl));

    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "gradient correctness",
        stbp_err < 1e-4 && op_err < 1e-5 && secs < 10.0,
        format!("STBP rel err {stbp_err:.2e}, worst op rel err {op_err:.2e}, {secs:.2}s"),
    );
}

#[test]
fn criterion_02_fisher_oracle() {
    let start = Instant::now();
    let net = SpikingNetwork::mlp(6, &[8], 2, NetworkConfig { timesteps: 4, ..Default::default() }, 2.5, &mut rng(200))
        .unwrap();
    let x = uniform(&[20, 6], 0.0, 1.0, &mut rng(201));
    let exact = fisher_profile(&net, &x, Estimator::Exact, 0).unwrap();
    let again = fisher_profile(&net, &x, Estimator::Exact, 0).unwrap();
    let mc = fisher_profile(&net, &x, Estimator::MonteCarlo { draws: 2000 }, 202).unwrap();
    let se = mc.std_errors.clone().unwrap();
    let z: Vec<f64> = (0..4).map(|t| (mc.traces[t] - exact.traces[t]).abs() / se[t]).collect();
    let worst = z.iter().copied().fold(0.0, f64::max);
    let deterministic = exact.traces == again.traces;
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "Fisher oracle",
        worst <= 3.0 && deterministic && secs < 60.0,
        format!("max |MC − exact|/SE = {worst:.2}, exact deterministic = {deterministic}, {secs:.2}s"),
    );
}

#[test]
fn criterion_03_closed_form_metrics() {
    let mut one_hot = vec![0.0; 10];
    one_hot[0] = 1.0;
    let first = information_centroid(&one_hot).unwrap();
    let uniform_ic = information_centroid(&[1.0; 10]).unwrap();
    let mut last_hot = vec![0.0; 10];
    last_hot[9] = 1.0;
    let last = information_centroid(&last_hot).unwrap();

    let net = SpikingNetwork::mlp(5, &[6, 4], 3, NetworkConfig { timesteps: 5, ..Default::default() }, 2.5, &mut rng(300))
        .unwrap();
    let x = uniform(&[12, 5], 0.0, 1.0, &mut rng(301));
    let (profile, map) = fisher_analysis(&net, &x, Estimator::Exact, 0).unwrap();
    let gap = (0..5)
        .map(|t| (map.values.iter().map(|row| row[t]).sum::<f64>() - profile.traces[t]).abs())
        .fold(0.0, f64::max);
    report(
        3,
        "closed-form metrics",
        first == 1.0 && uniform_ic == 5.5 && last == 10.0 && gap <= 1e-10,
        format!("IC = {first}, {uniform_ic}, {last}; layer-sum gap {gap:.1e}"),
    );
}

#[test]
fn criterion_04_tic_trend() {
    let start = Instant::now();
    let runs = toy_runs();
    let mut ok = Vec::new();
    let mut detail = Vec::new();
    for (seed, r) in SEEDS.iter().zip(runs) {
        let (ic5, icn) = (r.early.centroid.unwrap(), r.last.centroid.unwrap());
        let (p5, pn) = (r.early.peak_timestep(), r.last.peak_timestep());
        ok.push(icn < ic5 && pn <= p5);
        detail.push(format!("seed {seed}: IC {ic5:.3}→{icn:.3}, peak {p5}→{pn}"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, "TIC trend", majority(&ok) && secs < 900.0, format!("{}; {secs:.0}s", detail.join("; ")));
}

#[test]
fn criterion_05_alpha_control() {
    let start = Instant::now();
    let runs = alpha_runs();
    let mut ok = Vec::new();
    let mut detail = Vec::new();
    for (seed, r) in SEEDS.iter().zip(runs) {
        let lo = r.mean_fisher[0];
        let hi = r.mean_fisher[ALPHAS.len() - 1];
        let spread = r.accuracy.iter().copied().fold(0.0, f64::max) - r.accuracy.iter().copied().fold(1.0, f64::min);
        ok.push(lo < hi && spread <= 0.03);
        detail.push(format!(
            "seed {seed}: mean I {:?}, acc {:?}",
            r.mean_fisher.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            r.accuracy.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        "alpha control",
        majority(&ok) && secs < 1800.0,
        format!("alphas {ALPHAS:?}; {}; {secs:.0}s", detail.join("; ")),
    );
}

#[test]
fn criterion_06_robustness_ordering() {
    let start = Instant::now();
    let runs = alpha_runs();
    let pgd = AttackParams::pgd_default(RANGE);
    let fgsm = AttackParams::fgsm_default(RANGE);
    let mut inside = true;
    let mut ok = Vec::new();
    let mut detail = Vec::new();
    for (seed, r) in SEEDS.iter().zip(runs) {
        let test = &r.data.test;
        let mut drops = Vec::new();
        for net in [&r.nets[0], &r.nets[ALPHAS.len() - 1]] {
            for params in [&fgsm, &pgd] {
                let adv = attack(net, &test.images, &test.labels, params).unwrap();
                inside &= adv
                    .data()
                    .iter()
                    .zip(test.images.data())
                    .all(|(a, x)| (a - x).abs() <= params.epsilon);
            }
            let clean = net.accuracy(&test.images, &test.labels, 8).unwrap();
            let adv = attack(net, &test.images, &test.labels, &pgd).unwrap();
            drops.push(clean - net.accuracy(&adv, &test.labels, 8).unwrap());
        }
        ok.push(drops[0] <= drops[1]);
        detail.push(format!("seed {seed}: PGD drop {:.3} (α low) vs {:.3} (α high)", drops[0], drops[1]));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "robustness ordering",
        majority(&ok) && inside && secs < 900.0,
        format!("{}; ε-ball respected = {inside}; {secs:.0}s", detail.join("; ")),
    );
}

#[test]
fn criterion_07_deficit_windows() {
    let runs = toy_runs();
    let mut ok = Vec::new();
    let mut exact_in_limit = true;
    let mut all_tied = true;
    let mut detail = Vec::new();
    for (seed, r) in SEEDS.iter().zip(runs) {
        let test = &r.data.test;
        let clean = r.net.accuracy(&test.images, &test.labels, 8).unwrap();
        let rows = deficit_sweep(&r.net, test, 3, 0.5, *seed).unwrap();
        let first = clean - rows[0].accuracy;
        let last = clean - rows.last().unwrap().accuracy;
        ok.push(first >= last);
        all_tied &= first == last;
        let faint =
            windowed_deficit_accuracy(&r.net, test, &DeficitWindow { start: 1, length: 3, noise_ratio: 1e-12 }, *seed)
                .unwrap();
        exact_in_limit &= faint == clean;
        detail.push(format!("seed {seed}: drop first {first:.4} last {last:.4}"));
    }
    let note = if all_tied { "; every seed ties, so the ordering holds only non-strictly" } else { "" };
    report(
        7,
        "deficit windows",
        majority(&ok) && exact_in_limit,
        format!("{}; vanishing noise equals clean = {exact_in_limit}{note}", detail.join("; ")),
    );
}

#[test]
fn criterion_08_pruning_arithmetic() {
    let efficiency = compute_efficiency(300, 60, 5, 5, 3).unwrap();
    let data = synth_blobs(&SynthSpec { train: 64, test: 32, ..Default::default() }, 800).unwrap();
    let mut net = toy_net(2, 800);
    let schedule = PruningSchedule {
        fraction: 0.5,
        cycles: 5,
        retrain_epochs: 1,
        first_stage_epochs: 1,
        timesteps: 8,
        retrain_timesteps: 8,
    };
    let mut previous = PruneMask::full(&net);
    let mut monotone = true;
    let mut zeros_held = true;
    let (cycles, mask) = iterative_prune(
        &mut net,
        &data,
        &schedule,
        &OptimizerConfig { epochs: 1, ..Default::default() },
        &LossConfig::standard(),
        800,
        &mut |n, m| {
            monotone &= m.contains(&previous);
            for (l, keep) in m.keep.iter().enumerate() {
                zeros_held &= n.weight(l).data().iter().zip(keep).all(|(w, &k)| k || *w == 0.0);
            }
            previous = m.clone();
            Ok(())
        },
    )
    .unwrap();
    let sparsity = mask.sparsity();
    let pass = sparsity == 0.96875 && efficiency == 20.0 && monotone && zeros_held && cycles.len() == 5;
    report(
        8,
        "pruning arithmetic",
        pass,
        format!(
            "sparsity {:.3}%, efficiency {efficiency}%, masks nested = {monotone}, pruned weights zero = {zeros_held}",
            sparsity * 100.0
        ),
    );
}

#[test]
fn criterion_09_tic_pruning_equivalence() {
    let start = Instant::now();
    let mut ok = Vec::new();
    let mut detail = Vec::new();
    let mut tic_is_full = true;
    for &seed in &SEEDS {
        let data = synth_blobs(&faint_blobs(4, 0.1), 1000 + seed).unwrap();
        let mut base = toy_net(4, seed);
        let opt = clipped(60);
        Trainer::new(&base, opt, LossConfig::standard(), seed).run(&mut base, &data).unwrap();
        let profile = fisher_profile(&base, &data.test.images, Estimator::Exact, 0).unwrap();
        let tic = tic_select_timestep(&profile, 0.05).unwrap();
        tic_is_full &= tic == 8;
        let curve = |retrain_timesteps: usize| -> Vec<f64> {
            let mut net = base.clone();
            let schedule = PruningSchedule {
                fraction: 0.5,
                cycles: 5,
                retrain_epochs: 10,
                first_stage_epochs: 60,
                timesteps: 8,
                retrain_timesteps,
            };
            let (cycles, _) =
                iterative_prune(&mut net, &data, &schedule, &opt, &LossConfig::standard(), seed, &mut |_, _| Ok(()))
                    .unwrap();
            cycles.iter().map(|c| c.accuracy).collect()
        };
        let full = curve(8);
        let at_tic = if tic == 8 { full.clone() } else { curve(tic) };
        let single = curve(1);
        let agree = full.iter().zip(&at_tic).all(|(a, b)| (a - b).abs() <= 0.02);
        let behind = full[4] - single[4] > 0.02;
        ok.push(agree && behind);
        detail.push(format!(
            "seed {seed}: tic {tic}, final acc T8 {:.3} Ttic {:.3} T1 {:.3}",
            full[4], at_tic[4], single[4]
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let note = if tic_is_full { "; tic = T in every seed, so the T and tic curves coincide trivially" } else { "" };
    report(
        9,
        "TIC pruning equivalence",
        majority(&ok) && secs < 1800.0,
        format!("{}{note}; {secs:.0}s", detail.join("; ")),
    );
}

#[test]
fn criterion_10_kl_quadratic() {
    let net = smooth_mlp(6, 8, 3, smooth_config(4, 2.0, ReadoutMode::AccumulateCurrent), 1000);
    let x = uniform(&[1, 6], 0.0, 1.0, &mut rng(1001));
    let dir = uniform(&[1, 6], -1.0, 1.0, &mut rng(1002));
    let norm = dir.sq_norm().sqrt();
    let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&s| {
            let delta = dir.map(|v| v * s / norm);
            let (kl, quad) = kl_quadratic_check(&net, &x, &delta, 4).unwrap();
            (kl / quad - 1.0).abs()
        })
        .collect();
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    report(
        10,
        "KL quadratic check",
        decreasing,
        format!("|KL / quadratic − 1| = {:?}", errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_11_format_fidelity() {
    // Two 2×2 images and their labels, written byte by byte.
    let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
    images.extend([0u8, 51, 204, 255, 17, 34, 68, 136]);
    let labels = vec![0u8, 0, 8, 1, 0, 0, 0, 2, 1, 0];
    let decoded = decode_idx_images(&images, RANGE).unwrap();
    let want: Vec<f64> = images[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let idx_ok = decoded.shape() == [2, 1, 2, 2]
        && decoded.data() == want.as_slice()
        && encode_idx_images(&decoded, RANGE).unwrap() == images
        && decode_idx_labels(&labels).unwrap() == [1, 0]
        && encode_idx_labels(&[1, 0]).unwrap() == labels;

    let dir = tempfile::tempdir().unwrap();
    let net = toy_net(3, 1100);
    let path = dir.path().join("checkpoint.json");
    net.save(&path).unwrap();
    let loaded = SpikingNetwork::load(&path).unwrap();
    let bits = |n: &SpikingNetwork| n.params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let checkpoint_ok = bits(&loaded) == bits(&net) && loaded.config == net.config;

    let cfg = ExperimentConfig::default()
        .with_overrides(&["dataset.spec.train=64", "dataset.spec.test=32", "optimizer.epochs=2", "seeds=[3]"])
        .unwrap();
    let strip = |files: Vec<(String, String)>| -> Vec<(String, String)> {
        files
            .into_iter()
            .map(|(name, body)| {
                let body = if name.starts_with("train_seed") {
                    // The last column is wall-clock seconds.
                    body.lines().map(|l| l.rsplit_once(',').unwrap().0).collect::<Vec<_>>().join("\n")
                } else {
                    body
                };
                (name, body)
            })
            .collect()
    };
    let a = strip(run_train(&cfg).unwrap().1.files);
    let b = strip(run_train(&cfg).unwrap().1.files);
    let csv_ok = a == b && !a.is_empty();
    report(
        11,
        "format fidelity",
        idx_ok && checkpoint_ok && csv_ok,
        format!("IDX byte-exact = {idx_ok}, checkpoint bitwise = {checkpoint_ok}, reruns identical = {csv_ok}"),
    );
}
