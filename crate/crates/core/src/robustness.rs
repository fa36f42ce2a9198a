//! Input corruptions, gradient-sign attacks, time-windowed deficits and the
//! KL/Fisher quadratic-form check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{ensure, Result};
use crate::network::{Drive, SpikingNetwork, EVAL_CHUNK};
use crate::parallel;
use crate::seeds;
use crate::stbp::backward_impl;
use crate::tensor::{log_softmax_row, softmax_cross_entropy, softmax_row, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    pub kind: AttackKind,
    pub epsilon: f64,
    /// PGD step size; FGSM always steps by `epsilon`.
    pub step_size: f64,
    /// PGD iteration count; FGSM always runs one step.
    pub iterations: usize,
    /// Valid pixel range.
    pub clamp: (f64, f64),
}

impl AttackParams {
    pub fn fgsm(epsilon: f64, clamp: (f64, f64)) -> Self {
        Self { kind: AttackKind::Fgsm, epsilon, step_size: epsilon, iterations: 1, clamp }
    }

    pub fn pgd(epsilon: f64, step_size: f64, iterations: usize, clamp: (f64, f64)) -> Self {
        Self { kind: AttackKind::Pgd, epsilon, step_size, iterations, clamp }
    }

    /// `ε = 8/255`, single step.
    pub fn fgsm_default(clamp: (f64, f64)) -> Self {
        Self::fgsm(8.0 / 255.0, clamp)
    }

    /// `ε = 8/255`, step `4/255`, 10 iterations.
    pub fn pgd_default(clamp: (f64, f64)) -> Self {
        Self::pgd(8.0 / 255.0, 4.0 / 255.0, 10, clamp)
    }

    /// `(step, iterations)` actually used.
    fn schedule(&self) -> (f64, usize) {
        match self.kind {
            AttackKind::Fgsm => (self.epsilon, 1),
            AttackKind::Pgd => (self.step_size, self.iterations),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.epsilon > 0.0 && self.epsilon.is_finite(), Domain, "epsilon must be positive");
        ensure!(self.clamp.0 < self.clamp.1, Domain, "clamp range {:?} is empty", self.clamp);
        if self.kind == AttackKind::Pgd {
            ensure!(self.step_size > 0.0 && self.step_size.is_finite(), Domain, "step size must be positive");
            ensure!(self.iterations >= 1, Domain, "PGD needs at least one iteration");
        }
        Ok(())
    }

    /// Non-fatal configuration warnings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.kind == AttackKind::Pgd && self.step_size > self.epsilon {
            w.push(format!("PGD step size {} exceeds epsilon {}", self.step_size, self.epsilon));
        }
        w
    }
}

/// Noise injected during timesteps `[start, start + length − 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeficitWindow {
    pub start: usize,
    pub length: usize,
    pub noise_ratio: f64,
}

impl DeficitWindow {
    pub fn validate(&self, timesteps: usize) -> Result<()> {
        ensure!(self.length >= 1, Domain, "deficit window length must be at least 1");
        ensure!(
            self.start >= 1 && self.start + self.length - 1 <= timesteps,
            Domain,
            "window [{}, {}] outside [1, {timesteps}]",
            self.start,
            self.start + self.length - 1
        );
        ensure!(
            self.noise_ratio > 0.0 && self.noise_ratio <= 1.0,
            Domain,
            "noise ratio {} outside (0, 1]",
            self.noise_ratio
        );
        Ok(())
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.start + self.length
    }
}

/// Add Gaussian noise with `‖δ‖₂ = ratio·‖x‖₂` to each sample.
pub fn gaussian_corrupt<R: Rng>(x: &Tensor, ratio: f64, rng: &mut R) -> Result<Tensor> {
    ensure!(ratio > 0.0 && ratio.is_finite(), Domain, "noise ratio must be positive, got {ratio}");
    let mut out = x.clone();
    for b in 0..x.batch() {
        gaussian_corrupt_row(out.row_mut(b), ratio, rng)?;
    }
    Ok(out)
}

fn gaussian_corrupt_row<R: Rng>(row: &mut [f64], ratio: f64, rng: &mut R) -> Result<()> {
    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    ensure!(norm > 0.0, Domain, "cannot scale noise to a zero-norm input");
    let noise: Vec<f64> = (0..row.len()).map(|_| rng.sample(StandardNormal)).collect();
    let nn = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s = ratio * norm / nn;
    for (v, n) in row.iter_mut().zip(noise) {
        *v += s * n;
    }
    Ok(())
}

/// Average-pool by `k`, then bilinearly upsample back to full size.
///
/// Upsampling uses half-pixel centres: output pixel `i` samples source
/// coordinate `(i + ½)/k − ½`, clamped to `[0, n/k − 1]`. Constant images
/// are fixed points.
pub fn blur_corrupt(x: &Tensor, k: usize) -> Result<Tensor> {
    ensure!(x.shape().len() == 4, Dimension, "blur expects [batch, c, h, w], got {:?}", x.shape());
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    ensure!(k >= 1 && h % k == 0 && w % k == 0, Dimension, "{h}x{w} is not divisible by {k}");
    if k == 1 {
        return Ok(x.clone());
    }
    let (sh, sw) = (h / k, w / k);
    let mut out = Tensor::zeros(x.shape());
    let src = x.data();
    let dst = out.data_mut();
    let mut small = vec![0.0; sh * sw];
    let area = (k * k) as f64;
    let taps = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) / k as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ty = taps(h, sh);
    let tx = taps(w, sw);
    for plane in 0..b * c {
        let base = plane * h * w;
        for (sy, row) in small.chunks_mut(sw).enumerate() {
            for (sx, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for dy in 0..k {
                    for dx in 0..k {
                        s += src[base + (sy * k + dy) * w + sx * k + dx];
                    }
                }
                *v = s / area;
            }
        }
        for (y, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (xx, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = (1.0 - fx) * small[y0 * sw + x0] + fx * small[y0 * sw + x1];
                let bot = (1.0 - fx) * small[y1 * sw + x0] + fx * small[y1 * sw + x1];
                dst[base + y * w + xx] = (1.0 - fy) * top + fy * bot;
            }
        }
    }
    Ok(out)
}

/// Gradient of the summed cross-entropy at the final timestep with respect
/// to the directly coded input, through the surrogate backward.
pub fn input_gradient(net: &SpikingNetwork, x: &Tensor, labels: &[usize]) -> Result<Tensor> {
    ensure!(
        x.batch() == labels.len(),
        Consistency,
        "{} inputs and {} labels",
        x.batch(),
        labels.len()
    );
    let t = net.config.timesteps;
    let ranges = parallel::chunk_ranges(x.batch(), EVAL_CHUNK);
    let parts = parallel::map_indexed(ranges.len(), |c| -> Result<Tensor> {
        let r = ranges[c].clone();
        let xc = x.slice_batch(r.clone());
        let trace = net.forward(&xc, t)?;
        let (_, mut g) = softmax_cross_entropy(trace.logits(t)?, &labels[r.clone()])?;
        g.scale(r.len() as f64);
        let mut rg = vec![None; t];
        rg[t - 1] = Some(g);
        let grads = backward_impl(net, &trace, &rg, true)?;
        let gi = grads.static_input().expect("at least one timestep");
        gi.reshape(xc.shape().to_vec())
    });
    let parts: Vec<Tensor> = parts.into_iter().collect::<Result<_>>()?;
    if parts.is_empty() {
        return Ok(x.clone());
    }
    Tensor::concat_batch(&parts)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Project `v` onto `[x − ε, x + ε]` so that `|result − x| ≤ ε` holds in
/// floating point, then clamp to `range`.
fn project(x: f64, v: f64, eps: f64, range: (f64, f64)) -> f64 {
    let mut hi = x + eps;
    while hi - x > eps {
        hi = hi.next_down();
    }
    let mut lo = x - eps;
    while x - lo > eps {
        lo = lo.next_up();
    }
    v.clamp(lo, hi).clamp(range.0, range.1)
}

/// Signed-gradient attack. FGSM is the one-step case with step `ε`; PGD
/// starts at `x` and projects after every step. The network is not modified.
pub fn attack(net: &SpikingNetwork, x: &Tensor, labels: &[usize], params: &AttackParams) -> Result<Tensor> {
    params.validate()?;
    let (step, iterations) = params.schedule();
    let mut adv = x.clone();
    for _ in 0..iterations {
        let g = input_gradient(net, &adv, labels)?;
        let next: Vec<f64> = adv
            .data()
            .iter()
            .zip(g.data())
            .zip(x.data())
            .map(|((&a, &gi), &x0)| project(x0, a + step * sign(gi), params.epsilon, params.clamp))
            .collect();
        adv = Tensor::new(x.shape().to_vec(), next)?;
    }
    Ok(adv)
}

pub fn fgsm(net: &SpikingNetwork, x: &Tensor, labels: &[usize], epsilon: f64, clamp: (f64, f64)) -> Result<Tensor> {
    attack(net, x, labels, &AttackParams::fgsm(epsilon, clamp))
}

pub fn pgd(net: &SpikingNetwork, x: &Tensor, labels: &[usize], params: &AttackParams) -> Result<Tensor> {
    attack(net, x, labels, params)
}

/// Accuracy with the window's timesteps driven by a Gaussian-corrupted copy
/// of each image. Sample `i` draws its noise from `stream(seed, i)`, so every
/// window position sees the same corrupted image.
pub fn windowed_deficit_accuracy(
    net: &SpikingNetwork,
    split: &Split,
    window: &DeficitWindow,
    seed: u64,
) -> Result<f64> {
    let t_total = net.config.timesteps;
    window.validate(t_total)?;
    ensure!(!split.is_empty(), Domain, "deficit evaluation needs at least one sample");
    let ranges = parallel::chunk_ranges(split.len(), EVAL_CHUNK);
    let parts = parallel::map_indexed(ranges.len(), |c| -> Result<usize> {
        let r = ranges[c].clone();
        let clean = split.images.slice_batch(r.clone());
        let mut noisy = clean.clone();
        for (j, i) in r.clone().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::stream(seed, i as u64));
            gaussian_corrupt_row(noisy.row_mut(j), window.noise_ratio, &mut rng)?;
        }
        let steps: Vec<Tensor> = (1..=t_total)
            .map(|t| if window.contains(t) { noisy.clone() } else { clean.clone() })
            .collect();
        let trace = net.forward_drive(Drive::PerStep(&steps), t_total)?;
        Ok(trace.predictions().iter().zip(&split.labels[r]).filter(|(p, y)| p == y).count())
    });
    let mut correct = 0;
    for p in parts {
        correct += p?;
    }
    Ok(correct as f64 / split.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitRow {
    pub window_start: usize,
    pub accuracy: f64,
    /// `accuracy − accuracy of the last window position`.
    pub relative_accuracy: f64,
}

/// Evaluate a single window and report it against the last window position.
pub fn windowed_deficit_eval(
    net: &SpikingNetwork,
    split: &Split,
    window: &DeficitWindow,
    seed: u64,
) -> Result<DeficitRow> {
    let acc = windowed_deficit_accuracy(net, split, window, seed)?;
    let reference = DeficitWindow { start: net.config.timesteps + 1 - window.length, ..*window };
    let ref_acc = if reference.start == window.start {
        acc
    } else {
        windowed_deficit_accuracy(net, split, &reference, seed)?
    };
    Ok(DeficitRow { window_start: window.start, accuracy: acc, relative_accuracy: acc - ref_acc })
}

/// Every window position `1..=T − length + 1`.
pub fn deficit_sweep(
    net: &SpikingNetwork,
    split: &Split,
    length: usize,
    noise_ratio: f64,
    seed: u64,
) -> Result<Vec<DeficitRow>> {
    let t_total = net.config.timesteps;
    ensure!(length >= 1 && length <= t_total, Domain, "window length {length} outside [1, {t_total}]");
    let accs = (1..=t_total + 1 - length)
        .map(|start| windowed_deficit_accuracy(net, split, &DeficitWindow { start, length, noise_ratio }, seed))
        .collect::<Result<Vec<f64>>>()?;
    let last = *accs.last().expect("at least one window");
    Ok(accs
        .iter()
        .enumerate()
        .map(|(i, &a)| DeficitRow { window_start: i + 1, accuracy: a, relative_accuracy: a - last })
        .collect())
}

/// CSV `window_start,acc,rel_acc`.
pub fn deficit_to_csv(rows: &[DeficitRow]) -> String {
    let mut s = String::from("window_start,acc,rel_acc\n");
    for r in rows {
        s += &format!("{},{},{}\n", r.window_start, r.accuracy, r.relative_accuracy);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Corruption {
    Identity,
    Gaussian { ratio: f64, clamp: bool },
    Blur { factor: usize },
    Attack(AttackParams),
}

impl Corruption {
    pub fn name(&self) -> &'static str {
        match self {
            Corruption::Identity => "identity",
            Corruption::Gaussian { .. } => "gaussian",
            Corruption::Blur { .. } => "blur",
            Corruption::Attack(p) => match p.kind {
                AttackKind::Fgsm => "fgsm",
                AttackKind::Pgd => "pgd",
            },
        }
    }

    /// Parameters as `key=value` pairs separated by `;`.
    pub fn params(&self) -> String {
        match self {
            Corruption::Identity => String::new(),
            Corruption::Gaussian { ratio, clamp } => format!("ratio={ratio};clamp={clamp}"),
            Corruption::Blur { factor } => format!("factor={factor}"),
            Corruption::Attack(p) => match p.kind {
                AttackKind::Fgsm => format!("eps={}", p.epsilon),
                AttackKind::Pgd => format!("eps={};step={};n={}", p.epsilon, p.step_size, p.iterations),
            },
        }
    }

    /// Corrupted copy of `split.images`; `range` is the valid pixel range.
    pub fn apply(&self, net: &SpikingNetwork, split: &Split, range: (f64, f64), seed: u64) -> Result<Tensor> {
        match *self {
            Corruption::Identity => Ok(split.images.clone()),
            Corruption::Gaussian { ratio, clamp } => {
                let mut out = split.images.clone();
                for i in 0..out.batch() {
                    let mut rng = ChaCha8Rng::seed_from_u64(seeds::stream(seed, i as u64));
                    gaussian_corrupt_row(out.row_mut(i), ratio, &mut rng)?;
                }
                Ok(if clamp { out.map(|v| v.clamp(range.0, range.1)) } else { out })
            }
            Corruption::Blur { factor } => blur_corrupt(&split.images, factor),
            Corruption::Attack(p) => attack(net, &split.images, &split.labels, &p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustRow {
    pub model_id: String,
    pub dataset: String,
    pub corruption: String,
    pub params: String,
    pub clean_accuracy: f64,
    pub corrupted_accuracy: f64,
    /// `clean − corrupted`.
    pub drop: f64,
}

pub fn robust_accuracy(
    net: &SpikingNetwork,
    split: &Split,
    range: (f64, f64),
    corruption: &Corruption,
    model_id: &str,
    dataset: &str,
    seed: u64,
) -> Result<RobustRow> {
    let t = net.config.timesteps;
    let clean = net.accuracy(&split.images, &split.labels, t)?;
    let corrupted_images = corruption.apply(net, split, range, seed)?;
    let corrupted = net.accuracy(&corrupted_images, &split.labels, t)?;
    Ok(RobustRow {
        model_id: model_id.into(),
        dataset: dataset.into(),
        corruption: corruption.name().into(),
        params: corruption.params(),
        clean_accuracy: clean,
        corrupted_accuracy: corrupted,
        drop: clean - corrupted,
    })
}

/// CSV `model id,dataset,corruption,params,clean_acc,corrupted_acc,drop`.
pub fn robust_to_csv(rows: &[RobustRow]) -> String {
    let mut s = String::from("model id,dataset,corruption,params,clean_acc,corrupted_acc,drop\n");
    for r in rows {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            r.model_id, r.dataset, r.corruption, r.params, r.clean_accuracy, r.corrupted_accuracy, r.drop
        );
    }
    s
}

/// Exact `KL(f(·|x) ‖ f(·|x + δ))` at timestep `t` and its quadratic
/// approximation `½ Σ_y f(y|x) (∇_x log f(y|x) · δ)²`.
///
/// `x` and `delta` hold a single sample. The approximation matches the true
/// divergence to second order only when the forward pass is differentiable
/// (smooth spike mode).
pub fn kl_quadratic_check(net: &SpikingNetwork, x: &Tensor, delta: &Tensor, t: usize) -> Result<(f64, f64)> {
    ensure!(x.batch() == 1, Dimension, "expected a single sample, got batch {}", x.batch());
    ensure!(
        x.shape() == delta.shape(),
        Dimension,
        "perturbation {:?} does not match input {:?}",
        delta.shape(),
        x.shape()
    );
    let trace = net.forward(x, t)?;
    let shifted = x.zip_map(delta, |a, d| a + d)?;
    let trace_d = net.forward(&shifted, t)?;
    let lp = log_softmax_row(trace.logits(t)?.row(0));
    let lq = log_softmax_row(trace_d.logits(t)?.row(0));
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum::<f64>().max(0.0);

    let p = softmax_row(trace.logits(t)?.row(0));
    let classes = p.len();
    let mut quad = 0.0;
    for y in 0..classes {
        // ∂ log f(y) / ∂A_t = e_y − p
        let g: Vec<f64> = (0..classes).map(|c| if c == y { 1.0 } else { 0.0 } - p[c]).collect();
        let mut rg = vec![None; t];
        rg[t - 1] = Some(Tensor::new(vec![1, classes], g)?);
        let gi = backward_impl(net, &trace, &rg, true)?.static_input().expect("t ≥ 1");
        let dir: f64 = gi.data().iter().zip(delta.data()).map(|(a, b)| a * b).sum();
        quad += p[y] * dir * dir;
    }
    Ok((kl, 0.5 * quad))
}
