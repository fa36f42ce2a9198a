#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tic_snn::harness::config::Architecture;
use tic_snn::harness::experiments::build_layers;
use tic_snn::lif::{NetworkConfig, ReadoutMode, SpikeMode};
use tic_snn::network::SpikingNetwork;
use tic_snn::tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn smooth_config(timesteps: usize, tau: f64, readout: ReadoutMode) -> NetworkConfig {
    NetworkConfig { timesteps, tau, readout, spike_mode: SpikeMode::Smooth, ..Default::default() }
}

/// 2-layer MLP in smooth mode.
pub fn smooth_mlp(inputs: usize, hidden: usize, classes: usize, cfg: NetworkConfig, seed: u64) -> SpikingNetwork {
    SpikingNetwork::mlp(inputs, &[hidden], classes, cfg, 1.5, &mut rng(seed)).unwrap()
}

/// Conv → dense → readout network on `[c, h, w]` images.
pub fn conv_net(shape: [usize; 3], classes: usize, cfg: NetworkConfig, seed: u64) -> SpikingNetwork {
    let arch = Architecture::Conv { channels: vec![2], kernel: 3, stride: 1, padding: 1, hidden: vec![4] };
    let layers = build_layers(&arch, 1.0, &shape, classes, cfg.readout).unwrap();
    SpikingNetwork::initialized(shape.to_vec(), layers, cfg, 1.5, &mut rng(seed)).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of a scalar function of a flat vector.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
