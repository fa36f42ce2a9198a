//! Temporal Fisher information.
//!
//! `I_t` is the mean over samples of `E_{y ~ f(y | x, ≤t)} ‖∇_θ log f(y | x, ≤t)‖²`,
//! where the posterior is the softmax of the readout accumulated over the
//! first `t` timesteps. The backward pass is linear in the readout gradient,
//! so for every sample and `t` we backpropagate the `C` class basis vectors
//! once, form per-layer Gram matrices `G_l[c][c'] = ⟨g_c, g_c'⟩`, and read
//! the squared norm for label `y` as `vᵀ G v` with `v = p − e_y`. Exact
//! enumeration and Monte-Carlo draws share those passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::network::SpikingNetwork;
use crate::parallel;
use crate::seeds;
use crate::stbp::backward_impl;
use crate::tensor::{softmax_row, Tensor};

/// Largest class count for which the default estimator enumerates classes.
pub const EXACT_CLASS_LIMIT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    /// Enumerate every class weighted by the posterior.
    Exact,
    /// Average over `draws` labels sampled from the posterior.
    MonteCarlo { draws: usize },
}

impl Estimator {
    pub fn default_for(classes: usize) -> Self {
        if classes <= EXACT_CLASS_LIMIT {
            Estimator::Exact
        } else {
            Estimator::MonteCarlo { draws: 1 }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Estimator::Exact => "exact".into(),
            Estimator::MonteCarlo { draws } => format!("monte-carlo({draws})"),
        }
    }
}

/// Per-timestep Fisher traces of one network on one sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherProfile {
    /// `I_1..I_T`.
    pub traces: Vec<f64>,
    /// `None` when every trace is zero.
    pub centroid: Option<f64>,
    pub num_samples: usize,
    pub estimator: Estimator,
    pub seed: u64,
    /// Standard error of each trace (Monte-Carlo with at least 2 draws).
    pub std_errors: Option<Vec<f64>>,
}

impl FisherProfile {
    pub fn from_traces(traces: Vec<f64>, num_samples: usize, estimator: Estimator, seed: u64) -> Self {
        let centroid = information_centroid(&traces).ok();
        Self { traces, centroid, num_samples, estimator, seed, std_errors: None }
    }

    pub fn timesteps(&self) -> usize {
        self.traces.len()
    }

    /// 1-based timestep of the largest trace (earliest on ties).
    pub fn peak_timestep(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.traces.iter().enumerate() {
            if v > self.traces[best] {
                best = i;
            }
        }
        best + 1
    }

    pub fn mean_trace(&self) -> f64 {
        self.traces.iter().sum::<f64>() / self.traces.len() as f64
    }
}

/// Layer-by-timestep decomposition of the traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFisherMap {
    /// `values[layer][t − 1]`.
    pub values: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl LayerFisherMap {
    /// Divide each layer's curve by its own maximum over `t`.
    pub fn normalize(&self) -> Self {
        let values = self
            .values
            .iter()
            .map(|row| {
                let m = row.iter().copied().fold(0.0, f64::max);
                if m > 0.0 {
                    row.iter().map(|v| v / m).collect()
                } else {
                    row.clone()
                }
            })
            .collect();
        Self { values, normalized: true }
    }
}

/// `Σ t·I_t / Σ I_t`.
pub fn information_centroid(traces: &[f64]) -> Result<f64> {
    if let Some(bad) = traces.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("traces must be non-negative, got {bad}")));
    }
    let total: f64 = traces.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedCentroid);
    }
    let weighted: f64 = traces.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    Ok(weighted / total)
}

/// Per-sample contributions: `[t][layer]` expected squared norms and, for
/// Monte-Carlo, the within-sample variance of each draw.
struct SampleFisher {
    per_layer: Vec<Vec<f64>>,
    variance: Vec<f64>,
}

fn sample_fisher(
    net: &SpikingNetwork,
    x: &Tensor,
    ts: &[usize],
    estimator: Estimator,
    rng_seed: u64,
) -> Result<SampleFisher> {
    let t_max = *ts.iter().max().expect("non-empty timesteps");
    let trace = net.forward(x, t_max)?;
    let classes = net.classes();
    let n_layers = net.layers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut per_layer = Vec::with_capacity(ts.len());
    let mut variance = Vec::with_capacity(ts.len());

    for &t in ts {
        let p = softmax_row(trace.logits(t)?.row(0));
        // basis[c] = per-segment gradients for readout gradient e_c at t.
        let mut basis = Vec::with_capacity(classes);
        for c in 0..classes {
            let mut e = Tensor::zeros(&[1, classes]);
            e.data_mut()[c] = 1.0;
            let mut rg = vec![None; t];
            rg[t - 1] = Some(e);
            basis.push(backward_impl(net, &trace, &rg, false)?.params);
        }
        let mut gram = vec![vec![0.0; classes * classes]; n_layers];
        for a in 0..classes {
            for b in a..classes {
                for (sa, sb) in basis[a].segments.iter().zip(&basis[b].segments) {
                    let d: f64 = sa.tensor.data().iter().zip(sb.tensor.data()).map(|(u, v)| u * v).sum();
                    gram[sa.layer][a * classes + b] += d;
                    if a != b {
                        gram[sa.layer][b * classes + a] += d;
                    }
                }
            }
        }
        let sq_norm = |y: usize, layer: usize| -> f64 {
            let g = &gram[layer];
            let v = |c: usize| p[c] - if c == y { 1.0 } else { 0.0 };
            let mut s = 0.0;
            for a in 0..classes {
                let va = v(a);
                for b in 0..classes {
                    s += va * g[a * classes + b] * v(b);
                }
            }
            s.max(0.0)
        };
        match estimator {
            Estimator::Exact => {
                let row = (0..n_layers)
                    .map(|l| (0..classes).map(|y| p[y] * sq_norm(y, l)).sum())
                    .collect();
                per_layer.push(row);
                variance.push(0.0);
            }
            Estimator::MonteCarlo { draws } => {
                let mut row = vec![0.0; n_layers];
                let mut totals = Vec::with_capacity(draws);
                for _ in 0..draws {
                    let y = sample_class(&p, rng.random::<f64>());
                    let mut tot = 0.0;
                    for (l, r) in row.iter_mut().enumerate() {
                        let q = sq_norm(y, l);
                        *r += q;
                        tot += q;
                    }
                    totals.push(tot);
                }
                let m = draws as f64;
                row.iter_mut().for_each(|r| *r /= m);
                let mean = totals.iter().sum::<f64>() / m;
                let var = if draws > 1 {
                    totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
                } else {
                    0.0
                };
                per_layer.push(row);
                variance.push(var);
            }
        }
    }
    Ok(SampleFisher { per_layer, variance })
}

fn sample_class(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, &pc) in p.iter().enumerate() {
        acc += pc;
        if u < acc {
            return c;
        }
    }
    p.len() - 1
}

/// Mean per-layer contributions over all samples, `[t][layer]`, and the
/// Monte-Carlo standard error per `t`.
fn fisher_components(
    net: &SpikingNetwork,
    images: &Tensor,
    ts: &[usize],
    estimator: Estimator,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = images.batch();
    ensure!(n >= 1, Domain, "Fisher estimation needs at least one sample");
    if let Estimator::MonteCarlo { draws } = estimator {
        ensure!(draws >= 1, Domain, "Monte-Carlo estimator needs at least one draw");
    }
    for &t in ts {
        ensure!(
            t >= 1 && t <= net.config.timesteps,
            Domain,
            "timestep {t} outside [1, {}]",
            net.config.timesteps
        );
    }
    let parts = parallel::map_indexed(n, |i| {
        sample_fisher(net, &images.slice_batch(i..i + 1), ts, estimator, seeds::stream(seed, i as u64))
    });
    let n_layers = net.layers.len();
    let mut sum = vec![vec![0.0; n_layers]; ts.len()];
    let mut var = vec![0.0; ts.len()];
    for p in parts {
        let p = p?;
        for (k, row) in p.per_layer.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                sum[k][l] += v;
            }
            var[k] += p.variance[k];
        }
    }
    let nf = n as f64;
    for row in &mut sum {
        row.iter_mut().for_each(|v| *v /= nf);
    }
    let se = match estimator {
        Estimator::MonteCarlo { draws } => var.iter().map(|v| (v / draws as f64).sqrt() / nf).collect(),
        Estimator::Exact => vec![0.0; ts.len()],
    };
    Ok((sum, se))
}

/// `I_t` for a single timestep.
pub fn fisher_trace(net: &SpikingNetwork, images: &Tensor, t: usize, estimator: Estimator, seed: u64) -> Result<f64> {
    let (c, _) = fisher_components(net, images, &[t], estimator, seed)?;
    Ok(c[0].iter().sum())
}

/// Profile and layer decomposition for every `t = 1..=T`.
pub fn fisher_analysis(
    net: &SpikingNetwork,
    images: &Tensor,
    estimator: Estimator,
    seed: u64,
) -> Result<(FisherProfile, LayerFisherMap)> {
    let ts: Vec<usize> = (1..=net.config.timesteps).collect();
    let (comp, se) = fisher_components(net, images, &ts, estimator, seed)?;
    let traces: Vec<f64> = comp.iter().map(|row| row.iter().sum()).collect();
    let mut profile = FisherProfile::from_traces(traces, images.batch(), estimator, seed);
    if matches!(estimator, Estimator::MonteCarlo { draws } if draws > 1) {
        profile.std_errors = Some(se);
    }
    let values = (0..net.layers.len()).map(|l| comp.iter().map(|row| row[l]).collect()).collect();
    Ok((profile, LayerFisherMap { values, normalized: false }))
}

pub fn fisher_profile(net: &SpikingNetwork, images: &Tensor, estimator: Estimator, seed: u64) -> Result<FisherProfile> {
    Ok(fisher_analysis(net, images, estimator, seed)?.0)
}

pub fn layerwise_fisher(
    net: &SpikingNetwork,
    images: &Tensor,
    estimator: Estimator,
    seed: u64,
    normalize: bool,
) -> Result<LayerFisherMap> {
    let map = fisher_analysis(net, images, estimator, seed)?.1;
    Ok(if normalize { map.normalize() } else { map })
}

/// One `(epoch, profile)` observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPoint {
    pub epoch: usize,
    pub profile: FisherProfile,
    pub layers: LayerFisherMap,
}

/// Records Fisher profiles on a fixed subset every `stride` epochs
/// (including epoch 0) during training.
#[derive(Debug, Clone)]
pub struct IcTracker {
    pub images: Tensor,
    pub estimator: Estimator,
    pub seed: u64,
    pub stride: usize,
    pub series: Vec<IcPoint>,
}

impl IcTracker {
    pub fn new(images: Tensor, estimator: Estimator, seed: u64, stride: usize) -> Self {
        Self { images, estimator, seed, stride: stride.max(1), series: Vec::new() }
    }

    pub fn observe(&mut self, epoch: usize, net: &SpikingNetwork) -> Result<()> {
        if epoch.is_multiple_of(self.stride) {
            let (profile, layers) = fisher_analysis(net, &self.images, self.estimator, self.seed)?;
            self.series.push(IcPoint { epoch, profile, layers });
        }
        Ok(())
    }

    /// `(epoch, IC)` pairs; `NaN` where the centroid is undefined.
    pub fn ic_series(&self) -> Vec<(usize, f64)> {
        self.series.iter().map(|p| (p.epoch, p.profile.centroid.unwrap_or(f64::NAN))).collect()
    }

    pub fn at(&self, epoch: usize) -> Option<&IcPoint> {
        self.series.iter().find(|p| p.epoch == epoch)
    }
}

/// CSV `epoch,t,I_t,IC,estimator,seed,N`.
pub fn profiles_to_csv(points: &[IcPoint]) -> String {
    let mut s = String::from("epoch,t,I_t,IC,estimator,seed,N\n");
    for p in points {
        let ic = p.profile.centroid.map(|c| c.to_string()).unwrap_or_else(|| "NaN".into());
        for (i, v) in p.profile.traces.iter().enumerate() {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                p.epoch,
                i + 1,
                v,
                ic,
                p.profile.estimator.label(),
                p.profile.seed,
                p.profile.num_samples
            );
        }
    }
    s
}

/// CSV `epoch,layer,t,value,normalized`.
pub fn layer_maps_to_csv(points: &[IcPoint], normalize: bool) -> String {
    let mut s = String::from("epoch,layer,t,value,normalized\n");
    for p in points {
        let map = if normalize { p.layers.normalize() } else { p.layers.clone() };
        for (l, row) in map.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                s += &format!("{},{},{},{},{}\n", p.epoch, l, i + 1, v, map.normalized);
            }
        }
    }
    s
}
