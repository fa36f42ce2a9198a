//! Discrete-time leaky integrate-and-fire dynamics (dt = 1).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::tensor::Tensor;

/// How class scores accumulate at the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutMode {
    /// Sum the synaptic current of the last layer; the readout never spikes.
    #[default]
    AccumulateCurrent,
    /// The last layer is a LIF layer and its spikes are counted.
    SpikeCount,
}

/// Forward spike nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SpikeMode {
    /// Heaviside spike at `U ≥ v_th` with hard reset to zero.
    #[default]
    Hard,
    /// The spike is replaced by `(1/π)·atan(π·s·(U − v_th)) + ½` and the
    /// reset is disabled, making the network exactly differentiable with
    /// the surrogate as its true derivative. Used for gradient checks.
    Smooth,
}

/// Global neuron and simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub timesteps: usize,
    pub tau: f64,
    pub threshold: f64,
    #[serde(default)]
    pub readout: ReadoutMode,
    #[serde(default = "default_scale")]
    pub surrogate_scale: f64,
    #[serde(default)]
    pub spike_mode: SpikeMode,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            timesteps: 8,
            tau: 2.0,
            threshold: 1.0,
            readout: ReadoutMode::AccumulateCurrent,
            surrogate_scale: 1.0,
            spike_mode: SpikeMode::Hard,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.timesteps >= 1, Domain, "timesteps must be at least 1");
        ensure!(self.tau > 0.0 && self.tau.is_finite(), Domain, "tau must be positive, got {}", self.tau);
        ensure!(
            self.threshold > 0.0 && self.threshold.is_finite(),
            Domain,
            "threshold must be positive, got {}",
            self.threshold
        );
        ensure!(
            self.surrogate_scale > 0.0 && self.surrogate_scale.is_finite(),
            Domain,
            "surrogate scale must be positive, got {}",
            self.surrogate_scale
        );
        Ok(())
    }

    /// Membrane retention factor `1 − 1/τ`.
    pub fn decay(&self) -> f64 {
        1.0 - 1.0 / self.tau
    }
}

/// Result of one membrane update.
#[derive(Debug, Clone, PartialEq)]
pub struct LifStep {
    /// Post-update, pre-reset membrane.
    pub membrane: Tensor,
    pub spikes: Tensor,
    pub reset_membrane: Tensor,
}

/// `U = (1 − 1/τ)·U_prev + (1/τ)·I`, spike where `U ≥ v_th`, reset to zero.
pub fn lif_step(prev: &Tensor, current: &Tensor, tau: f64, threshold: f64) -> Result<LifStep> {
    ensure!(
        prev.shape() == current.shape(),
        Dimension,
        "membrane {:?} and current {:?} differ in shape",
        prev.shape(),
        current.shape()
    );
    let decay = 1.0 - 1.0 / tau;
    let gain = 1.0 / tau;
    let membrane = prev.zip_map(current, |u, i| decay * u + gain * i)?;
    let spikes = membrane.map(|u| if u >= threshold { 1.0 } else { 0.0 });
    let reset_membrane = membrane.zip_map(&spikes, |u, o| u * (1.0 - o))?;
    Ok(LifStep { membrane, spikes, reset_membrane })
}

/// Derivative of `(1/π)·atan(π·s·x) + ½`, i.e. `s / (1 + (π·s·x)²)`.
pub fn surrogate_derivative(x: f64, scale: f64) -> f64 {
    let z = PI * scale * x;
    scale / (1.0 + z * z)
}

/// The smooth spike function whose derivative is [`surrogate_derivative`].
pub fn smooth_spike(x: f64, scale: f64) -> f64 {
    (PI * scale * x).atan() / PI + 0.5
}

pub fn surrogate_derivative_tensor(u_minus_vth: &Tensor, scale: f64) -> Tensor {
    u_minus_vth.map(|x| surrogate_derivative(x, scale))
}
