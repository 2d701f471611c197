//! Expected-value test data generated directly from the rate model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::conditioning::{lag_steps, ConditionedTrajectory, SelectionPattern};
use crate::error::{Error, Result};
use crate::solomon::{model_trajectory, RateSet};

/// Model trajectory on lags `0, dt, …, horizon` with binomial errors for
/// `count` matches per lag.
pub fn expected_trajectory(
    rates: &RateSet,
    pattern: &SelectionPattern,
    dt: f64,
    horizon: f64,
    count: u64,
) -> Result<ConditionedTrajectory> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let n = lag_steps(horizon, dt) + 1;
    let mean = model_trajectory(rates, pattern, dt, n)?;
    Ok(ConditionedTrajectory {
        lags: (0..n).map(|k| k as f64 * dt).collect(),
        stderr: mean.iter().map(|m| (m * (1.0 - m) / count as f64).sqrt()).collect(),
        counts: vec![count; n],
        mean_excited: mean,
    })
}

fn perturb(traj: &ConditionedTrajectory, seed: u64) -> ConditionedTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    for (m, s) in out.mean_excited.iter_mut().zip(&out.stderr) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *m = (*m + s * z).clamp(0.0, 1.0);
    }
    out
}

/// Adds Gaussian noise of the reported standard error to every lag.
pub fn with_count_noise(traj: &ConditionedTrajectory, seed: u64) -> ConditionedTrajectory {
    perturb(traj, seed)
}

/// Sets the standard error to `rel` times the mean and adds noise of that size.
pub fn with_relative_noise(traj: &ConditionedTrajectory, rel: f64, seed: u64) -> ConditionedTrajectory {
    let mut t = traj.clone();
    t.stderr = t.mean_excited.iter().map(|m| rel * m).collect();
    perturb(&t, seed)
}

/// A TLS whose qubit coupling is Lorentzian in qubit frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianTls {
    pub f0_hz: f64,
    pub fwhm_hz: f64,
    pub gamma_qt_peak: f64,
}

impl LorentzianTls {
    pub fn coupling(&self, f_hz: f64) -> f64 {
        let x = 2.0 * (f_hz - self.f0_hz) / self.fwhm_hz;
        self.gamma_qt_peak / (1.0 + x * x)
    }
}

/// Rate sets along a frequency axis: a flat bath rate plus Lorentzian TLSs.
pub fn sweep_rates(freqs: &[f64], gamma_q: f64, gamma_t: f64, p_th: f64, tls: &[LorentzianTls]) -> Result<Vec<RateSet>> {
    freqs
        .iter()
        .map(|&f| RateSet::new(gamma_q, tls.iter().map(|t| t.coupling(f)).collect(), gamma_t, p_th))
        .collect()
}
