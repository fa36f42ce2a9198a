//! Iterative magnitude pruning with retraining, TIC-based selection of the
//! retraining timestep count, and the compute-saving estimate.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ensure, Error, Result};
use crate::fisher::FisherProfile;
use crate::network::SpikingNetwork;
use crate::stbp::{LossConfig, OptimizerConfig, Trainer};
use crate::tensor::{ParamKind, ParameterVector};

/// Per-layer keep flags for every weight (biases are never pruned).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneMask {
    pub keep: Vec<Vec<bool>>,
}

impl PruneMask {
    /// Keep everything.
    pub fn full(net: &SpikingNetwork) -> Self {
        Self { keep: (0..net.layers.len()).map(|l| vec![true; net.weight(l).len()]).collect() }
    }

    pub fn total(&self) -> usize {
        self.keep.iter().map(Vec::len).sum()
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().map(|k| k.iter().filter(|&&b| b).count()).sum()
    }

    /// `1 − kept / total`.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.kept() as f64 / self.total() as f64
    }

    /// True when every position pruned in `earlier` is pruned here too.
    pub fn contains(&self, earlier: &PruneMask) -> bool {
        self.keep.len() == earlier.keep.len()
            && self.keep.iter().zip(&earlier.keep).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(&now, &before)| before || !now)
            })
    }

    fn check(&self, params: &ParameterVector) -> Result<()> {
        let weights: Vec<usize> = params
            .segments
            .iter()
            .filter(|s| s.kind == ParamKind::Weight)
            .map(|s| s.tensor.len())
            .collect();
        ensure!(
            weights == self.keep.iter().map(Vec::len).collect::<Vec<_>>(),
            State,
            "mask does not match the network's weight layout"
        );
        Ok(())
    }

    fn zero(&self, params: &mut ParameterVector) -> Result<()> {
        self.check(params)?;
        let weights = params.segments.iter_mut().filter(|s| s.kind == ParamKind::Weight);
        for (seg, keep) in weights.zip(&self.keep) {
            for (w, &k) in seg.tensor.data_mut().iter_mut().zip(keep) {
                if !k {
                    *w = 0.0;
                }
            }
        }
        Ok(())
    }

    /// Zero pruned weights in place.
    pub fn apply(&self, net: &mut SpikingNetwork) -> Result<()> {
        self.zero(&mut net.params)
    }

    /// Zero the gradient of pruned weights.
    pub fn mask_grads(&self, grads: &mut ParameterVector) -> Result<()> {
        self.zero(grads)
    }
}

/// Newly prune the fraction `p` of currently kept weights with the smallest
/// magnitude, ranked globally across layers. Ties go to the lower
/// `(layer, index)`.
pub fn magnitude_prune(net: &SpikingNetwork, p: f64, existing: Option<&PruneMask>) -> Result<PruneMask> {
    ensure!(p > 0.0 && p < 1.0, Domain, "prune fraction must lie in (0, 1), got {p}");
    let mut mask = existing.cloned().unwrap_or_else(|| PruneMask::full(net));
    mask.check(&net.params)?;
    let mut pool: Vec<(f64, usize, usize)> = Vec::with_capacity(mask.kept());
    for (l, keep) in mask.keep.iter().enumerate() {
        let w = net.weight(l).data();
        pool.extend(keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| (w[i].abs(), l, i)));
    }
    if pool.is_empty() {
        return Err(Error::State("nothing left to prune".into()));
    }
    let count = (p * pool.len() as f64).round() as usize;
    pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, l, i) in &pool[..count] {
        mask.keep[l][i] = false;
    }
    Ok(mask)
}

/// Pruning-retraining cycle plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningSchedule {
    pub fraction: f64,
    pub cycles: usize,
    pub retrain_epochs: usize,
    /// First-stage epochs, used for the compute estimate.
    pub first_stage_epochs: usize,
    pub timesteps: usize,
    pub retrain_timesteps: usize,
}

impl PruningSchedule {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.fraction > 0.0 && self.fraction < 1.0, Domain, "prune fraction must lie in (0, 1)");
        ensure!(self.cycles >= 1, Domain, "at least one pruning cycle is required");
        ensure!(self.retrain_epochs >= 1, Domain, "retraining needs at least one epoch");
        ensure!(
            self.retrain_timesteps >= 1 && self.retrain_timesteps <= self.timesteps,
            Domain,
            "retrain timesteps {} must lie in [1, {}]",
            self.retrain_timesteps,
            self.timesteps
        );
        Ok(())
    }

    /// Percentage of training compute saved by retraining with fewer
    /// timesteps.
    pub fn efficiency(&self) -> Result<f64> {
        compute_efficiency(
            self.first_stage_epochs,
            self.retrain_epochs,
            self.cycles,
            self.timesteps,
            self.retrain_timesteps,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneCycle {
    pub cycle: usize,
    pub sparsity: f64,
    pub retrain_timesteps: usize,
    pub accuracy: f64,
    pub epochs_spent: usize,
}

/// CSV with columns `cycle,sparsity,T_retrain,accuracy,epochs_spent`.
pub fn cycles_to_csv(cycles: &[PruneCycle]) -> String {
    let mut s = String::from("cycle,sparsity,T_retrain,accuracy,epochs_spent\n");
    for c in cycles {
        s += &format!("{},{},{},{},{}\n", c.cycle, c.sparsity, c.retrain_timesteps, c.accuracy, c.epochs_spent);
    }
    s
}

/// Run `schedule.cycles` rounds of prune → retrain (at the reduced
/// timestep count, mask enforced) → evaluate at the full timestep count.
/// `on_cycle` sees the network and mask after each round.
pub fn iterative_prune(
    net: &mut SpikingNetwork,
    data: &Dataset,
    schedule: &PruningSchedule,
    optimizer: &OptimizerConfig,
    loss: &LossConfig,
    seed: u64,
    on_cycle: &mut dyn FnMut(&SpikingNetwork, &PruneMask) -> Result<()>,
) -> Result<(Vec<PruneCycle>, PruneMask)> {
    schedule.validate()?;
    ensure!(
        schedule.timesteps == net.config.timesteps,
        Domain,
        "schedule timesteps {} differ from the network's {}",
        schedule.timesteps,
        net.config.timesteps
    );
    // Retraining continues at the last learning rate of the first stage.
    let retrain_opt = OptimizerConfig {
        lr: optimizer.lr_at(optimizer.epochs),
        step_decay: None,
        epochs: schedule.retrain_epochs,
        ..*optimizer
    };
    let mut mask = PruneMask::full(net);
    let mut out = Vec::with_capacity(schedule.cycles);
    for cycle in 1..=schedule.cycles {
        mask = magnitude_prune(net, schedule.fraction, Some(&mask))?;
        mask.apply(net)?;
        let trainer = Trainer {
            optimizer: retrain_opt,
            loss: *loss,
            timesteps: schedule.retrain_timesteps,
            mask: Some(&mask),
            seed: seed.wrapping_add(cycle as u64),
        };
        trainer.run(net, data)?;
        on_cycle(net, &mask)?;
        let accuracy = net.accuracy(&data.test.images, &data.test.labels, net.config.timesteps)?;
        out.push(PruneCycle {
            cycle,
            sparsity: mask.sparsity(),
            retrain_timesteps: schedule.retrain_timesteps,
            accuracy,
            epochs_spent: schedule.retrain_epochs,
        });
    }
    Ok((out, mask))
}

/// Largest `t` whose trace still carries at least `kappa` of the peak.
pub fn tic_select_timestep(profile: &FisherProfile, kappa: f64) -> Result<usize> {
    ensure!(kappa > 0.0 && kappa < 1.0, Domain, "kappa must lie in (0, 1), got {kappa}");
    let peak = profile.traces.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::UndefinedCentroid);
    }
    let threshold = kappa * peak;
    Ok(profile.traces.iter().rposition(|&v| v >= threshold).map(|i| i + 1).unwrap_or(1))
}

/// `N_retrain·R·(T − T_retrain) / (N·T + N_retrain·R·T) × 100`.
pub fn compute_efficiency(
    first_epochs: usize,
    retrain_epochs: usize,
    cycles: usize,
    timesteps: usize,
    retrain_timesteps: usize,
) -> Result<f64> {
    ensure!(
        first_epochs > 0 && retrain_epochs > 0 && cycles > 0 && timesteps > 0 && retrain_timesteps > 0,
        Domain,
        "all arguments must be positive"
    );
    ensure!(
        retrain_timesteps <= timesteps,
        Domain,
        "retrain timesteps {retrain_timesteps} exceed {timesteps}"
    );
    let saved = (retrain_epochs * cycles * (timesteps - retrain_timesteps)) as f64;
    let baseline = (first_epochs * timesteps + retrain_epochs * cycles * timesteps) as f64;
    Ok(saved * 100.0 / baseline)
}
