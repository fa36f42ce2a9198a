//! Layered spiking network, multi-timestep forward evaluation and
//! checkpoint files.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::lif::{smooth_spike, NetworkConfig, ReadoutMode, SpikeMode};
use crate::tensor::{
    affine_backward, affine_forward, conv2d_backward, conv2d_forward, softmax, Conv2dGeometry,
    LayerGrads, ParamKind, ParameterVector, Segment, Tensor,
};

/// Synaptic operation of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynapseOp {
    Affine {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        geometry: Conv2dGeometry,
        height: usize,
        width: usize,
    },
}

impl SynapseOp {
    /// Per-sample input shape.
    pub fn input_shape(&self) -> Vec<usize> {
        match *self {
            SynapseOp::Affine { inputs, .. } => vec![inputs],
            SynapseOp::Conv2d { in_channels, height, width, .. } => vec![in_channels, height, width],
        }
    }

    /// Per-sample output shape.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        match *self {
            SynapseOp::Affine { outputs, .. } => Ok(vec![outputs]),
            SynapseOp::Conv2d { out_channels, kernel, geometry, height, width, .. } => {
                let oh = geometry.output_size(height, kernel);
                let ow = geometry.output_size(width, kernel);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![out_channels, oh, ow]),
                    _ => Err(Error::Dimension(format!(
                        "kernel {kernel} does not fit a {height}x{width} input"
                    ))),
                }
            }
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        match *self {
            SynapseOp::Affine { inputs, outputs } => vec![outputs, inputs],
            SynapseOp::Conv2d { in_channels, out_channels, kernel, .. } => {
                vec![out_channels, in_channels, kernel, kernel]
            }
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            SynapseOp::Affine { outputs, .. } => outputs,
            SynapseOp::Conv2d { out_channels, .. } => out_channels,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            SynapseOp::Affine { inputs, .. } => inputs,
            SynapseOp::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
        }
    }
}

/// One layer: synaptic op followed (optionally) by LIF neurons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub op: SynapseOp,
    pub lif: bool,
}

/// Input current schedule.
#[derive(Debug, Clone, Copy)]
pub enum Drive<'a> {
    /// Direct coding: the same image at every timestep.
    Static(&'a Tensor),
    /// Explicit per-timestep currents, indexed from timestep 1.
    PerStep(&'a [Tensor]),
}

impl<'a> Drive<'a> {
    fn at(&self, t: usize) -> &'a Tensor {
        match *self {
            Drive::Static(x) => x,
            Drive::PerStep(xs) => &xs[t - 1],
        }
    }
}

/// Per-layer forward caches.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Whether the layer ran LIF dynamics.
    pub lif: bool,
    /// Synaptic input of each timestep (the previous layer's output).
    pub input: Vec<Tensor>,
    /// Post-update, pre-reset membrane; empty for non-LIF layers.
    pub membrane: Vec<Tensor>,
    /// Membrane after reset; empty for non-LIF layers.
    pub reset_membrane: Vec<Tensor>,
    /// Spikes (or smooth spikes) for LIF layers, synaptic current otherwise.
    pub output: Vec<Tensor>,
}

/// Everything a backward pass needs from a forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub timesteps: usize,
    pub layers: Vec<LayerTrace>,
    /// Accumulated readout `A_t`, at index `t − 1`.
    pub readout: Vec<Tensor>,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.readout[0].batch()
    }

    /// Accumulated readout logits after `t` timesteps.
    pub fn logits(&self, t: usize) -> Result<&Tensor> {
        ensure!(
            t >= 1 && t <= self.timesteps,
            Domain,
            "timestep {t} outside [1, {}]",
            self.timesteps
        );
        Ok(&self.readout[t - 1])
    }

    /// `softmax(A_t)` per sample.
    pub fn posterior(&self, t: usize) -> Result<Tensor> {
        Ok(softmax(self.logits(t)?))
    }

    /// Predicted class per sample from the final readout.
    pub fn predictions(&self) -> Vec<usize> {
        let a = &self.readout[self.timesteps - 1];
        (0..a.batch()).map(|b| argmax(a.row(b))).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A feed-forward spiking network. Layer `l` owns parameter segments
/// `2l` (weight) and `2l + 1` (bias).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub config: NetworkConfig,
    pub params: ParameterVector,
}

impl SpikingNetwork {
    /// Assemble a network from explicit parameters, checking all shapes.
    pub fn new(
        input_shape: Vec<usize>,
        layers: Vec<Layer>,
        config: NetworkConfig,
        params: ParameterVector,
    ) -> Result<Self> {
        config.validate()?;
        ensure!(!layers.is_empty(), Dimension, "network needs at least one layer");
        let mut shape = input_shape.clone();
        for (l, layer) in layers.iter().enumerate() {
            let want = layer.op.input_shape();
            ensure!(
                want.iter().product::<usize>() == shape.iter().product::<usize>()
                    && (matches!(layer.op, SynapseOp::Affine { .. }) || want == shape),
                Dimension,
                "layer {l} expects input {want:?}, previous output is {shape:?}"
            );
            shape = layer.op.output_shape()?;
        }
        ensure!(
            params.segments.len() == 2 * layers.len(),
            State,
            "expected {} parameter segments, got {}",
            2 * layers.len(),
            params.segments.len()
        );
        for (l, layer) in layers.iter().enumerate() {
            let (w, b) = (&params.segments[2 * l], &params.segments[2 * l + 1]);
            ensure!(
                w.layer == l && w.kind == ParamKind::Weight && w.tensor.shape() == layer.op.weight_shape(),
                State,
                "segment {} is not the weight of layer {l}",
                2 * l
            );
            ensure!(
                b.layer == l && b.kind == ParamKind::Bias && b.tensor.shape() == [layer.op.bias_len()],
                State,
                "segment {} is not the bias of layer {l}",
                2 * l + 1
            );
        }
        Ok(Self { input_shape, layers, config, params })
    }

    /// Zero-initialized parameters.
    pub fn zeroed(input_shape: Vec<usize>, layers: Vec<Layer>, config: NetworkConfig) -> Result<Self> {
        let mut segs = Vec::with_capacity(2 * layers.len());
        for (l, layer) in layers.iter().enumerate() {
            segs.push(Segment { layer: l, kind: ParamKind::Weight, tensor: Tensor::zeros(&layer.op.weight_shape()) });
            segs.push(Segment { layer: l, kind: ParamKind::Bias, tensor: Tensor::zeros(&[layer.op.bias_len()]) });
        }
        Self::new(input_shape, layers, config, ParameterVector::new(segs))
    }

    /// He-normal weights scaled by `gain`, zero biases.
    pub fn initialized<R: Rng>(
        input_shape: Vec<usize>,
        layers: Vec<Layer>,
        config: NetworkConfig,
        gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeroed(input_shape, layers, config)?;
        for l in 0..net.layers.len() {
            let std = gain * (2.0 / net.layers[l].op.fan_in() as f64).sqrt();
            let dist = Normal::new(0.0, std).map_err(|e| Error::Domain(e.to_string()))?;
            for w in net.params.segments[2 * l].tensor.data_mut() {
                *w = dist.sample(rng);
            }
        }
        Ok(net)
    }

    /// Fully connected network: LIF hidden layers and an affine readout.
    pub fn mlp<R: Rng>(
        inputs: usize,
        hidden: &[usize],
        classes: usize,
        config: NetworkConfig,
        gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        let mut prev = inputs;
        for &h in hidden {
            layers.push(Layer { op: SynapseOp::Affine { inputs: prev, outputs: h }, lif: true });
            prev = h;
        }
        layers.push(Layer {
            op: SynapseOp::Affine { inputs: prev, outputs: classes },
            lif: config.readout == ReadoutMode::SpikeCount,
        });
        Self::initialized(vec![inputs], layers, config, gain, rng)
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map(|l| l.op.bias_len()).unwrap_or(0)
    }

    pub fn weight(&self, l: usize) -> &Tensor {
        &self.params.segments[2 * l].tensor
    }

    pub fn bias(&self, l: usize) -> &Tensor {
        &self.params.segments[2 * l + 1].tensor
    }

    /// Number of weight entries (biases excluded).
    pub fn weight_count(&self) -> usize {
        (0..self.layers.len()).map(|l| self.weight(l).len()).sum()
    }

    fn is_readout(&self, l: usize) -> bool {
        l + 1 == self.layers.len()
    }

    /// Whether layer `l` runs LIF dynamics under the current readout mode.
    pub fn layer_spikes(&self, l: usize) -> bool {
        if self.is_readout(l) {
            self.config.readout == ReadoutMode::SpikeCount
        } else {
            self.layers[l].lif
        }
    }

    fn shaped_input(&self, l: usize, x: &Tensor) -> Result<Tensor> {
        let mut shape = vec![x.batch()];
        shape.extend(self.layers[l].op.input_shape());
        x.clone().reshape(shape)
    }

    pub(crate) fn synapse_forward(&self, l: usize, x: &Tensor) -> Result<Tensor> {
        match self.layers[l].op {
            SynapseOp::Affine { .. } => affine_forward(x, self.weight(l), self.bias(l)),
            SynapseOp::Conv2d { geometry, .. } => {
                conv2d_forward(&self.shaped_input(l, x)?, self.weight(l), self.bias(l), geometry)
            }
        }
    }

    pub(crate) fn synapse_backward(&self, l: usize, upstream: &Tensor, x: &Tensor) -> Result<LayerGrads> {
        match self.layers[l].op {
            SynapseOp::Affine { .. } => affine_backward(upstream, x, self.weight(l)),
            SynapseOp::Conv2d { geometry, .. } => {
                let mut g = conv2d_backward(upstream, &self.shaped_input(l, x)?, self.weight(l), geometry)?;
                g.input = g.input.reshape(x.shape().to_vec())?;
                Ok(g)
            }
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        ensure!(
            x.shape().len() >= 2 && x.row_len() == self.input_shape.iter().product::<usize>(),
            Dimension,
            "input {:?} does not match network input {:?}",
            x.shape(),
            self.input_shape
        );
        Ok(())
    }

    /// Run `timesteps` steps of direct coding on `input`.
    pub fn forward(&self, input: &Tensor, timesteps: usize) -> Result<ForwardTrace> {
        self.forward_drive(Drive::Static(input), timesteps)
    }

    /// Run the network under an arbitrary input-current schedule.
    pub fn forward_drive(&self, drive: Drive<'_>, timesteps: usize) -> Result<ForwardTrace> {
        ensure!(timesteps >= 1, Domain, "timesteps must be at least 1");
        if let Drive::PerStep(xs) = drive {
            ensure!(
                xs.len() >= timesteps,
                Dimension,
                "{} per-step inputs for {timesteps} timesteps",
                xs.len()
            );
        }
        let first = drive.at(1);
        self.check_input(first)?;
        let batch = first.batch();
        for t in 2..=timesteps {
            ensure!(
                drive.at(t).shape() == first.shape(),
                Dimension,
                "per-step input {t} has shape {:?}, expected {:?}",
                drive.at(t).shape(),
                first.shape()
            );
        }

        let cfg = &self.config;
        let decay = cfg.decay();
        let gain = 1.0 / cfg.tau;
        let n_layers = self.layers.len();
        let mut layers: Vec<LayerTrace> = (0..n_layers)
            .map(|l| LayerTrace {
                lif: self.layer_spikes(l),
                input: Vec::with_capacity(timesteps),
                membrane: Vec::new(),
                reset_membrane: Vec::new(),
                output: Vec::with_capacity(timesteps),
            })
            .collect();
        let mut state: Vec<Option<Tensor>> = vec![None; n_layers];
        let mut readout = Vec::with_capacity(timesteps);
        let mut acc = Tensor::zeros(&[batch, self.classes()]);

        for t in 1..=timesteps {
            let mut x = drive.at(t).clone();
            for l in 0..n_layers {
                let current = self.synapse_forward(l, &x)?;
                let out = if layers[l].lif {
                    let prev = state[l].get_or_insert_with(|| Tensor::zeros(current.shape()));
                    let membrane = prev.zip_map(&current, |u, i| decay * u + gain * i)?;
                    let (spikes, reset) = match cfg.spike_mode {
                        SpikeMode::Hard => {
                            let o = membrane.map(|u| if u >= cfg.threshold { 1.0 } else { 0.0 });
                            let r = membrane.zip_map(&o, |u, o| u * (1.0 - o))?;
                            (o, r)
                        }
                        SpikeMode::Smooth => (
                            membrane.map(|u| smooth_spike(u - cfg.threshold, cfg.surrogate_scale)),
                            membrane.clone(),
                        ),
                    };
                    *prev = reset.clone();
                    layers[l].membrane.push(membrane);
                    layers[l].reset_membrane.push(reset);
                    spikes
                } else {
                    current
                };
                let out = if self.is_readout(l) {
                    out.reshape(vec![batch, self.classes()])?
                } else {
                    out
                };
                layers[l].input.push(std::mem::replace(&mut x, out.clone()));
                layers[l].output.push(out);
            }
            acc.add_scaled(&x, 1.0)?;
            readout.push(acc.clone());
        }
        Ok(ForwardTrace { timesteps, layers, readout })
    }

    /// Classification accuracy at `timesteps`, evaluated in fixed chunks.
    pub fn accuracy(&self, images: &Tensor, labels: &[usize], timesteps: usize) -> Result<f64> {
        let preds = self.predict(images, timesteps)?;
        let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(correct as f64 / labels.len().max(1) as f64)
    }

    pub fn predict(&self, images: &Tensor, timesteps: usize) -> Result<Vec<usize>> {
        let ranges = crate::parallel::chunk_ranges(images.batch(), EVAL_CHUNK);
        let parts = crate::parallel::map_indexed(ranges.len(), |c| {
            self.forward(&images.slice_batch(ranges[c].clone()), timesteps)
                .map(|tr| tr.predictions())
        });
        let mut out = Vec::with_capacity(images.batch());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Checkpoint as JSON; see [`Checkpoint`].
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    /// The checkpoint document written by [`save`](Self::save).
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint { format: CHECKPOINT_FORMAT.into(), version: CHECKPOINT_VERSION, network: self.clone() };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| Error::Read { path: path.into(), source })?;
        let ck: Checkpoint = serde_json::from_slice(&bytes)?;
        ensure!(ck.format == CHECKPOINT_FORMAT, Config, "{} is not a network checkpoint", path.display());
        ensure!(
            ck.version == CHECKPOINT_VERSION,
            Config,
            "unsupported checkpoint version {}",
            ck.version
        );
        let n = ck.network;
        Self::new(n.input_shape, n.layers, n.config, n.params)
    }
}

pub(crate) const EVAL_CHUNK: usize = 32;
const CHECKPOINT_FORMAT: &str = "tic-snn-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// On-disk checkpoint container.
///
/// ```json
/// { "format": "tic-snn-checkpoint", "version": 1,
///   "network": { "input_shape": [...], "layers": [...], "config": {...},
///                "params": { "segments": [ { "layer": 0, "kind": "weight",
///                                            "tensor": { "shape": [...], "data": [...] } }, ... ] } } }
/// ```
/// Floats are written in shortest round-trip form, so `load(save(net))`
/// reproduces every parameter bit for bit.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub network: SpikingNetwork,
}
