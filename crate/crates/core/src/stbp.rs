//! Spatio-temporal backpropagation, the standard and α-target losses, and
//! the minibatch training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ensure, Error, Result};
use crate::lif::{surrogate_derivative, SpikeMode};
use crate::network::{ForwardTrace, SpikingNetwork};
use crate::parallel;
use crate::pruning::PruneMask;
use crate::tensor::{softmax_cross_entropy, ParameterVector, Tensor};

/// Gradients produced by [`stbp_backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ParameterVector,
    /// Gradient with respect to the input current of each timestep
    /// (index `t − 1`), up to the last timestep carrying a loss gradient.
    pub inputs: Vec<Tensor>,
}

impl Gradients {
    /// Input gradient summed over timesteps; the derivative with respect to
    /// a directly coded image.
    pub fn static_input(&self) -> Option<Tensor> {
        let mut it = self.inputs.iter();
        let mut acc = it.next()?.clone();
        for g in it {
            acc.add_scaled(g, 1.0).ok()?;
        }
        Some(acc)
    }
}

/// Backpropagate `∂L/∂A_t` (index `t − 1`, `None` meaning zero) through the
/// trace. Spatial and temporal paths are both summed over timesteps; the
/// temporal Jacobian of a hard-reset neuron is `(1 − 1/τ)(1 − O^t)`.
pub fn stbp_backward(
    net: &SpikingNetwork,
    trace: &ForwardTrace,
    readout_grads: &[Option<Tensor>],
) -> Result<Gradients> {
    backward_impl(net, trace, readout_grads, true)
}

pub(crate) fn backward_impl(
    net: &SpikingNetwork,
    trace: &ForwardTrace,
    readout_grads: &[Option<Tensor>],
    want_inputs: bool,
) -> Result<Gradients> {
    check_trace(net, trace)?;
    ensure!(
        readout_grads.len() <= trace.timesteps,
        State,
        "{} readout gradients for a {}-step trace",
        readout_grads.len(),
        trace.timesteps
    );
    let batch = trace.batch();
    let classes = net.classes();
    let mut grads = net.params.zeros_like();
    let Some(t_max) = readout_grads.iter().rposition(Option::is_some).map(|i| i + 1) else {
        return Ok(Gradients { params: grads, inputs: Vec::new() });
    };
    for g in readout_grads.iter().flatten() {
        ensure!(
            g.shape() == [batch, classes],
            Dimension,
            "readout gradient {:?} does not match [{batch}, {classes}]",
            g.shape()
        );
    }

    // A_t = Σ_{i≤t} r_i, so ∂L/∂r_i is the suffix sum of ∂L/∂A_t.
    let mut d_out: Vec<Tensor> = vec![Tensor::zeros(&[batch, classes]); t_max];
    let mut running = Tensor::zeros(&[batch, classes]);
    for t in (1..=t_max).rev() {
        if let Some(g) = &readout_grads[t - 1] {
            running.add_scaled(g, 1.0)?;
        }
        d_out[t - 1] = running.clone();
    }

    let cfg = &net.config;
    let decay = cfg.decay();
    let gain = 1.0 / cfg.tau;
    for l in (0..net.layers.len()).rev() {
        let lt = &trace.layers[l];
        let out_shape = lt.output[0].shape().to_vec();
        let d_current: Vec<Tensor> = if lt.lif {
            let mut d_cur = vec![Tensor::zeros(&out_shape); t_max];
            let mut d_u_next: Option<Tensor> = None;
            for t in (1..=t_max).rev() {
                let u = &lt.membrane[t - 1];
                let o = &lt.output[t - 1];
                let d_o = d_out[t - 1].clone().reshape(out_shape.clone())?;
                let mut d_u = Vec::with_capacity(u.len());
                for i in 0..u.len() {
                    let mut g = d_o.data()[i] * surrogate_derivative(u.data()[i] - cfg.threshold, cfg.surrogate_scale);
                    if let Some(next) = &d_u_next {
                        let keep = match cfg.spike_mode {
                            SpikeMode::Hard => 1.0 - o.data()[i],
                            SpikeMode::Smooth => 1.0,
                        };
                        g += next.data()[i] * decay * keep;
                    }
                    d_u.push(g);
                }
                let d_u = Tensor::from_parts(out_shape.clone(), d_u);
                d_cur[t - 1] = d_u.map(|g| g * gain);
                d_u_next = Some(d_u);
            }
            d_cur
        } else {
            d_out
                .iter()
                .map(|g| g.clone().reshape(out_shape.clone()))
                .collect::<Result<_>>()?
        };

        let mut d_in = Vec::with_capacity(if l > 0 || want_inputs { t_max } else { 0 });
        for t in 1..=t_max {
            let g = net.synapse_backward(l, &d_current[t - 1], &lt.input[t - 1])?;
            grads.segments[2 * l].tensor.add_scaled(&g.weight, 1.0)?;
            grads.segments[2 * l + 1].tensor.add_scaled(&g.bias, 1.0)?;
            if l > 0 || want_inputs {
                d_in.push(g.input);
            }
        }
        d_out = d_in;
    }
    Ok(Gradients { params: grads, inputs: d_out })
}

fn check_trace(net: &SpikingNetwork, trace: &ForwardTrace) -> Result<()> {
    ensure!(
        trace.layers.len() == net.layers.len(),
        State,
        "trace has {} layers, network has {}",
        trace.layers.len(),
        net.layers.len()
    );
    for (l, lt) in trace.layers.iter().enumerate() {
        ensure!(
            lt.lif == net.layer_spikes(l)
                && lt.output.len() == trace.timesteps
                && lt.input.len() == trace.timesteps
                && (!lt.lif || lt.membrane.len() == trace.timesteps),
            State,
            "trace layer {l} is incomplete or does not belong to this network"
        );
        ensure!(
            lt.input[0].row_len() == net.layers[l].op.input_shape().iter().product::<usize>(),
            State,
            "trace layer {l} input width does not match the network"
        );
    }
    ensure!(trace.readout.len() == trace.timesteps, State, "trace readout is incomplete");
    Ok(())
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Cross-entropy on the final accumulated readout.
    #[default]
    Standard,
    /// `(1/T)·Σ_t |L_t − α|`.
    AlphaTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default)]
    pub mode: LossMode,
    #[serde(default)]
    pub alpha: f64,
    /// Record the per-timestep cross-entropy of every epoch in the report.
    #[serde(default)]
    pub per_timestep_losses: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { mode: LossMode::Standard, alpha: 0.0, per_timestep_losses: false }
    }
}

impl LossConfig {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn alpha(alpha: f64) -> Self {
        Self { mode: LossMode::AlphaTarget, alpha, per_timestep_losses: false }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.alpha >= 0.0 && self.alpha.is_finite(),
            Domain,
            "alpha must be a non-negative number, got {}",
            self.alpha
        );
        Ok(())
    }
}

/// α presets for the full-scale image datasets, `[low, intermediate, high]`.
pub const ALPHA_PRESET_CIFAR10: [f64; 3] = [1e-3, 1e-2, 7e-2];
pub const ALPHA_PRESET_SVHN: [f64; 3] = [1e-4, 1e-2, 7e-2];

/// Scalar loss and the readout gradients it induces.
#[derive(Debug, Clone)]
pub struct LossOutput {
    /// The optimized objective.
    pub objective: f64,
    /// Cross-entropy at each timestep `t = 1..=T` (batch mean).
    pub per_timestep: Vec<f64>,
    /// `∂objective/∂A_t`, index `t − 1`.
    pub grads: Vec<Option<Tensor>>,
}

impl LossOutput {
    /// The raw training loss reported per epoch: `L_T` in standard mode,
    /// the time-averaged `L_t` in α mode.
    pub fn raw(&self, mode: LossMode) -> f64 {
        raw_loss(&self.per_timestep, mode)
    }
}

/// Cross-entropy of `softmax(A_T)`; gradient only at `t = T`.
pub fn loss_standard(trace: &ForwardTrace, labels: &[usize]) -> Result<LossOutput> {
    let mut per_timestep = Vec::with_capacity(trace.timesteps);
    let mut grads = vec![None; trace.timesteps];
    for t in 1..=trace.timesteps {
        let (l, g) = softmax_cross_entropy(trace.logits(t)?, labels)?;
        per_timestep.push(l);
        if t == trace.timesteps {
            grads[t - 1] = Some(g);
        }
    }
    Ok(LossOutput { objective: per_timestep[trace.timesteps - 1], per_timestep, grads })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(1/T)·Σ_t |L_t − α|` with per-timestep gradients `sign(L_t − α)·∇L_t / T`.
/// Below α the sign flips, turning descent into ascent.
pub fn loss_alpha(trace: &ForwardTrace, labels: &[usize], alpha: f64) -> Result<LossOutput> {
    ensure!(alpha >= 0.0, Domain, "alpha must be non-negative, got {alpha}");
    let steps = trace.timesteps;
    let inv_t = 1.0 / steps as f64;
    let mut objective = 0.0;
    let mut per_timestep = Vec::with_capacity(steps);
    let mut grads = Vec::with_capacity(steps);
    for t in 1..=steps {
        let (l, mut g) = softmax_cross_entropy(trace.logits(t)?, labels)?;
        objective += (l - alpha).abs();
        g.scale(sign(l - alpha) * inv_t);
        per_timestep.push(l);
        grads.push(Some(g));
    }
    Ok(LossOutput { objective: objective * inv_t, per_timestep, grads })
}

pub fn compute_loss(trace: &ForwardTrace, labels: &[usize], cfg: &LossConfig) -> Result<LossOutput> {
    match cfg.mode {
        LossMode::Standard => loss_standard(trace, labels),
        LossMode::AlphaTarget => loss_alpha(trace, labels, cfg.alpha),
    }
}

/// Loss and mean parameter gradient over a minibatch. The batch is split
/// into fixed-size chunks evaluated in parallel; the α objective is formed
/// from batch-level `L_t` before any sign is taken.
pub fn batch_gradient(
    net: &SpikingNetwork,
    images: &Tensor,
    labels: &[usize],
    timesteps: usize,
    loss: &LossConfig,
) -> Result<BatchStep> {
    let batch = images.batch();
    ensure!(batch == labels.len(), Dimension, "{batch} images, {} labels", labels.len());
    let ranges = parallel::chunk_ranges(batch, GRAD_CHUNK);

    // Phase 1: forward and per-timestep cross-entropy per chunk.
    let fwd = parallel::map_indexed(ranges.len(), |c| -> Result<_> {
        let r = ranges[c].clone();
        let tr = net.forward(&images.slice_batch(r.clone()), timesteps)?;
        let out = loss_standard_all(&tr, &labels[r])?;
        Ok((tr, out))
    });
    let fwd: Vec<_> = fwd.into_iter().collect::<Result<_>>()?;

    let mut per_timestep = vec![0.0; timesteps];
    let mut correct = 0;
    for (c, (tr, (losses, _))) in fwd.iter().enumerate() {
        let n = ranges[c].len() as f64;
        for (acc, l) in per_timestep.iter_mut().zip(losses) {
            *acc += l * n;
        }
        correct += tr.predictions().iter().zip(&labels[ranges[c].clone()]).filter(|(p, y)| p == y).count();
    }
    per_timestep.iter_mut().for_each(|l| *l /= batch as f64);

    // Weight applied to the batch-mean cross-entropy gradient at each t.
    let weights: Vec<f64> = match loss.mode {
        LossMode::Standard => (1..=timesteps).map(|t| if t == timesteps { 1.0 } else { 0.0 }).collect(),
        LossMode::AlphaTarget => per_timestep.iter().map(|&l| sign(l - loss.alpha) / timesteps as f64).collect(),
    };
    let objective = match loss.mode {
        LossMode::Standard => per_timestep[timesteps - 1],
        LossMode::AlphaTarget => {
            per_timestep.iter().map(|l| (l - loss.alpha).abs()).sum::<f64>() / timesteps as f64
        }
    };

    // Phase 2: backward per chunk with chunk-mean gradients rescaled to the batch.
    let parts = parallel::map_indexed(ranges.len(), |c| -> Result<ParameterVector> {
        let (tr, (_, ce_grads)) = &fwd[c];
        let frac = ranges[c].len() as f64 / batch as f64;
        let rg: Vec<Option<Tensor>> = ce_grads
            .iter()
            .zip(&weights)
            .map(|(g, &w)| {
                (w != 0.0).then(|| {
                    let mut g = g.clone();
                    g.scale(w * frac);
                    g
                })
            })
            .collect();
        Ok(backward_impl(net, tr, &rg, false)?.params)
    });
    let mut total = net.params.zeros_like();
    for p in parts {
        total.add_scaled(&p?, 1.0)?;
    }
    Ok(BatchStep { objective, per_timestep, grads: total, correct })
}

/// Result of [`batch_gradient`].
#[derive(Debug, Clone)]
pub struct BatchStep {
    pub objective: f64,
    pub per_timestep: Vec<f64>,
    /// Mean parameter gradient of the objective.
    pub grads: ParameterVector,
    /// Correct final-timestep predictions in the batch.
    pub correct: usize,
}

impl BatchStep {
    pub fn raw(&self, mode: LossMode) -> f64 {
        raw_loss(&self.per_timestep, mode)
    }
}

fn raw_loss(per_timestep: &[f64], mode: LossMode) -> f64 {
    match mode {
        LossMode::Standard => *per_timestep.last().unwrap_or(&0.0),
        LossMode::AlphaTarget => per_timestep.iter().sum::<f64>() / per_timestep.len() as f64,
    }
}

/// Chunk size for batched gradient evaluation.
pub(crate) const GRAD_CHUNK: usize = 16;

fn loss_standard_all(trace: &ForwardTrace, labels: &[usize]) -> Result<(Vec<f64>, Vec<Tensor>)> {
    let mut ls = Vec::with_capacity(trace.timesteps);
    let mut gs = Vec::with_capacity(trace.timesteps);
    for t in 1..=trace.timesteps {
        let (l, g) = softmax_cross_entropy(trace.logits(t)?, labels)?;
        ls.push(l);
        gs.push(g);
    }
    Ok((ls, gs))
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Multiply the learning rate by `factor` every `every` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDecay {
    pub every: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default)]
    pub step_decay: Option<StepDecay>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            weight_decay: 0.0,
            batch_size: 64,
            epochs: 60,
            momentum: 0.0,
            clip_norm: None,
            step_decay: None,
        }
    }
}

impl OptimizerConfig {
    /// Full-scale preset: batch 128, lr 1e-3, weight decay 5e-4.
    pub fn reference_preset(epochs: usize) -> Self {
        Self { lr: 1e-3, weight_decay: 5e-4, batch_size: 128, epochs, ..Default::default() }
    }

    /// Ablation-study preset: lr 3e-1, weight decay 5e-4, batch 128.
    pub fn ablation_preset(epochs: usize) -> Self {
        Self { lr: 3e-1, ..Self::reference_preset(epochs) }
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.step_decay {
            Some(d) if d.every > 0 => self.lr * d.factor.powi(((epoch.max(1) - 1) / d.every) as i32),
            _ => self.lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.epochs >= 1, Domain, "epochs must be at least 1");
        ensure!(self.batch_size >= 1, Domain, "batch size must be at least 1");
        ensure!(self.lr > 0.0 && self.lr.is_finite(), Domain, "learning rate must be positive");
        ensure!(self.weight_decay >= 0.0, Domain, "weight decay must be non-negative");
        ensure!((0.0..1.0).contains(&self.momentum), Domain, "momentum must lie in [0, 1)");
        if let Some(c) = self.clip_norm {
            ensure!(c > 0.0, Domain, "clip norm must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Raw cross-entropy (not the α objective), averaged over batches.
    pub train_loss: f64,
    pub train_objective: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_timestep_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// Equality of everything except wall-clock time.
    pub fn same_results(&self, other: &Self) -> bool {
        let strip = |r: &Self| {
            r.epochs
                .iter()
                .map(|e| EpochRecord { seconds: 0.0, ..e.clone() })
                .collect::<Vec<_>>()
        };
        self.seed == other.seed && strip(self) == strip(other)
    }

    pub fn final_test_accuracy(&self) -> f64 {
        self.epochs.last().map(|e| e.test_accuracy).unwrap_or(0.0)
    }

    /// CSV with columns `epoch,split,loss,accuracy,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,split,loss,accuracy,seconds\n");
        for e in &self.epochs {
            s += &format!("{},train,{},{},{}\n", e.epoch, e.train_loss, e.train_accuracy, e.seconds);
            s += &format!("{},test,{},{},{}\n", e.epoch, e.test_loss, e.test_accuracy, e.seconds);
        }
        s
    }
}

/// Callback invoked with `(epoch, network)` before training (epoch 0) and
/// after every epoch.
pub type EpochHook<'h> = dyn FnMut(usize, &SpikingNetwork) -> Result<()> + 'h;

/// Minibatch SGD over STBP gradients.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    pub optimizer: OptimizerConfig,
    pub loss: LossConfig,
    /// Timesteps simulated during training; evaluation always uses the
    /// network's configured timesteps.
    pub timesteps: usize,
    pub mask: Option<&'a PruneMask>,
    pub seed: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(net: &SpikingNetwork, optimizer: OptimizerConfig, loss: LossConfig, seed: u64) -> Self {
        Self { optimizer, loss, timesteps: net.config.timesteps, mask: None, seed }
    }

    pub fn run(&self, net: &mut SpikingNetwork, data: &Dataset) -> Result<TrainReport> {
        self.run_with_hook(net, data, &mut |_, _| Ok(()))
    }

    pub fn run_with_hook(
        &self,
        net: &mut SpikingNetwork,
        data: &Dataset,
        hook: &mut EpochHook<'_>,
    ) -> Result<TrainReport> {
        self.optimizer.validate()?;
        self.loss.validate()?;
        ensure!(self.timesteps >= 1, Domain, "training timesteps must be at least 1");
        ensure!(!data.train.labels.is_empty(), Domain, "training split is empty");
        let n = data.train.labels.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut velocity = (self.optimizer.momentum > 0.0).then(|| net.params.zeros_like());
        if let Some(mask) = self.mask {
            mask.apply(net)?;
        }
        hook(0, net)?;
        let mut epochs = Vec::with_capacity(self.optimizer.epochs);
        for epoch in 1..=self.optimizer.epochs {
            let start = Instant::now();
            order.shuffle(&mut rng);
            let lr = self.optimizer.lr_at(epoch);
            let (mut loss_sum, mut obj_sum, mut correct) = (0.0, 0.0, 0usize);
            let mut per_t = vec![0.0; self.timesteps];
            let batches = parallel::chunk_ranges(n, self.optimizer.batch_size);
            for (bi, r) in batches.iter().enumerate() {
                let idx = &order[r.clone()];
                let x = data.train.images.select_rows(idx);
                let y: Vec<usize> = idx.iter().map(|&i| data.train.labels[i]).collect();
                let out = batch_gradient(net, &x, &y, self.timesteps, &self.loss)?;
                let raw = out.raw(self.loss.mode);
                let c = out.correct;
                let mut grads = out.grads;
                if !raw.is_finite() || !out.objective.is_finite() || !grads.all_finite() {
                    return Err(Error::Diverged { epoch, batch: bi, loss: raw });
                }
                let w = r.len() as f64;
                loss_sum += raw * w;
                obj_sum += out.objective * w;
                correct += c;
                for (a, l) in per_t.iter_mut().zip(&out.per_timestep) {
                    *a += l * w;
                }
                if let Some(mask) = self.mask {
                    mask.mask_grads(&mut grads)?;
                }
                if let Some(c) = self.optimizer.clip_norm {
                    let norm = grads.sq_norm().sqrt();
                    if norm > c {
                        grads.scale(c / norm);
                    }
                }
                let step = match velocity.as_mut() {
                    Some(v) => {
                        v.scale(self.optimizer.momentum);
                        v.add_scaled(&grads, 1.0)?;
                        v.clone()
                    }
                    None => grads,
                };
                crate::tensor::sgd_step_in_place(&mut net.params, &step, lr, self.optimizer.weight_decay)?;
                if let Some(mask) = self.mask {
                    mask.apply(net)?;
                }
            }
            let (test_loss, test_accuracy) = evaluate(net, &data.test.images, &data.test.labels, net.config.timesteps)?;
            hook(epoch, net)?;
            let nf = n as f64;
            epochs.push(EpochRecord {
                epoch,
                train_loss: loss_sum / nf,
                train_objective: obj_sum / nf,
                train_accuracy: correct as f64 / nf,
                test_loss,
                test_accuracy,
                seconds: start.elapsed().as_secs_f64(),
                per_timestep_loss: if self.loss.per_timestep_losses {
                    per_t.iter().map(|l| l / nf).collect()
                } else {
                    Vec::new()
                },
            });
        }
        Ok(TrainReport { seed: self.seed, epochs })
    }
}

/// Mean cross-entropy at `timesteps` and accuracy on a split.
pub fn evaluate(net: &SpikingNetwork, images: &Tensor, labels: &[usize], timesteps: usize) -> Result<(f64, f64)> {
    if labels.is_empty() {
        return Ok((0.0, 0.0));
    }
    let ranges = parallel::chunk_ranges(labels.len(), crate::network::EVAL_CHUNK);
    let parts = parallel::map_indexed(ranges.len(), |c| -> Result<(f64, usize)> {
        let r = ranges[c].clone();
        let tr = net.forward(&images.slice_batch(r.clone()), timesteps)?;
        let (l, _) = softmax_cross_entropy(tr.logits(timesteps)?, &labels[r.clone()])?;
        let ok = tr.predictions().iter().zip(&labels[r.clone()]).filter(|(p, y)| p == y).count();
        Ok((l * r.len() as f64, ok))
    });
    let (mut loss, mut ok) = (0.0, 0);
    for p in parts {
        let (l, c) = p?;
        loss += l;
        ok += c;
    }
    let n = labels.len() as f64;
    Ok((loss / n, ok as f64 / n))
}

/// Train `net` in place for `optimizer.epochs` epochs.
pub fn train(
    net: &mut SpikingNetwork,
    data: &Dataset,
    optimizer: OptimizerConfig,
    loss: LossConfig,
    seed: u64,
) -> Result<TrainReport> {
    Trainer::new(net, optimizer, loss, seed).run(net, data)
}
