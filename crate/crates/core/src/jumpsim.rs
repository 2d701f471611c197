//! Stochastic simulation of the joint qubit + TLS + bath system.
//!
//! The qubit and every TLS are classical two-state variables. The joint chain
//! has the following transitions:
//!
//! | transition                     | rate              |
//! |--------------------------------|-------------------|
//! | qubit 0 → 1 (bath)             | `Γq · p_th`       |
//! | qubit 1 → 0 (bath)             | `Γq · (1 - p_th)` |
//! | TLS i 0 → 1 (bath)             | `Γt · p_th`       |
//! | TLS i 1 → 0 (bath)             | `Γt · (1 - p_th)` |
//! | qubit ↔ TLS i flip-flop        | `Γqt[i]` when the two differ |
//!
//! Taking expectations reproduces the Solomon equations exactly, while the
//! joint chain also keeps the qubit–TLS correlations that conditioned
//! averages depend on. The product of Bernoulli(`p_th`) marginals is the
//! stationary (and reversible) distribution.
//!
//! Events are sampled exactly with the direct Gillespie method; strobes are
//! pure reads of the chain state.
//!
//! Trace `i` of an ensemble with base seed `s` uses the seed
//! [`derive_seed`]`(s, i)`, output `i` of a SplitMix64 stream started from the hashed `s`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::{lag_steps, ConditionAccumulator, ConditionedTrajectory, ErrorModel, SelectionPattern};
use crate::error::{Error, Result};
use crate::solomon::RateSet;

/// Stroboscopic readout interval used by default, s.
pub const DEFAULT_STROBE: f64 = 6e-6;

/// Simulation aborts when more events than this occur between two strobes.
pub const EVENT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Simulated,
    #[default]
    Measured,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub f_q_hz: Option<f64>,
    pub field_v_per_m: Option<f64>,
    pub source: Source,
    pub seed: Option<u64>,
}

/// Binary qubit states sampled at every strobe.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrace {
    pub states: Vec<u8>,
    /// Hidden TLS states, `hidden_tls[i][k]` for TLS `i` at strobe `k`.
    pub hidden_tls: Option<Vec<Vec<u8>>>,
    pub dt_strobe: f64,
    pub meta: TraceMeta,
}

impl JumpTrace {
    pub fn measured(states: Vec<u8>, dt_strobe: f64) -> Self {
        JumpTrace { states, hidden_tls: None, dt_strobe, meta: TraceMeta::default() }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time between the first and the last strobe.
    pub fn duration(&self) -> f64 {
        self.states.len().saturating_sub(1) as f64 * self.dt_strobe
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidArgument("empty trace".into()));
        }
        if !(self.dt_strobe > 0.0 && self.dt_strobe.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_strobe = {} must be > 0", self.dt_strobe)));
        }
        if self.states.iter().any(|&s| s > 1) {
            return Err(Error::InvalidArgument("trace states must be 0 or 1".into()));
        }
        if let Some(h) = &self.hidden_tls {
            if h.iter().any(|c| c.len() != self.states.len() || c.iter().any(|&s| s > 1)) {
                return Err(Error::InvalidArgument("hidden TLS channels must match the trace".into()));
            }
        }
        Ok(())
    }
}

/// Gaussian IQ clusters with an optional symmetric state flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub center_g: Complex64,
    pub center_e: Complex64,
    /// Standard deviation per quadrature.
    pub sigma: f64,
    #[serde(default)]
    pub assignment_error: f64,
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("readout sigma {} must be > 0", self.sigma)));
        }
        if self.center_g == self.center_e {
            return Err(Error::InvalidArgument("readout centers coincide".into()));
        }
        if !(0.0..0.5).contains(&self.assignment_error) {
            return Err(Error::InvalidArgument(format!(
                "assignment_error {} outside [0, 0.5)",
                self.assignment_error
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Independent Bernoulli(p_th) qubit and TLSs: the stationary distribution.
    #[default]
    Stationary,
    /// Everything in the ground state.
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rates: RateSet,
    #[serde(default = "default_strobe")]
    pub dt_strobe: f64,
    pub n_strobes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub readout: Option<ReadoutModel>,
    #[serde(default)]
    pub initial: InitialState,
    /// Unrecorded evolution before the first strobe, s.
    #[serde(default)]
    pub burn_in: f64,
}

fn default_strobe() -> f64 {
    DEFAULT_STROBE
}

impl SimConfig {
    pub fn new(rates: RateSet, n_strobes: usize, seed: u64) -> Self {
        SimConfig {
            rates,
            dt_strobe: DEFAULT_STROBE,
            n_strobes,
            seed,
            readout: None,
            initial: InitialState::Stationary,
            burn_in: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if !(self.dt_strobe > 0.0 && self.dt_strobe.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_strobe = {} must be > 0", self.dt_strobe)));
        }
        if self.n_strobes == 0 {
            return Err(Error::InvalidArgument("n_strobes must be >= 1".into()));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidArgument(format!("burn_in = {} must be >= 0", self.burn_in)));
        }
        if let Some(r) = &self.readout {
            r.validate()?;
        }
        Ok(())
    }

    /// Copy of this configuration for ensemble member `index`.
    pub fn for_trace(&self, index: u64) -> SimConfig {
        SimConfig { seed: derive_seed(self.seed, index), ..self.clone() }
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Output `index` of a SplitMix64 stream whose state starts at `mix64(base)`.
///
/// Hashing the base first keeps the streams of nearby base seeds apart
/// (XOR-ing `base` into the index would only permute the trace seeds).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

struct Chain<'a> {
    rates: &'a RateSet,
    up_q: f64,
    down_q: f64,
    up_t: f64,
    down_t: f64,
    qubit: u8,
    tls: Vec<u8>,
}

impl<'a> Chain<'a> {
    fn new(rates: &'a RateSet) -> Self {
        let p = rates.p_th;
        Chain {
            rates,
            up_q: rates.gamma_q * p,
            down_q: rates.gamma_q * (1.0 - p),
            up_t: rates.gamma_t * p,
            down_t: rates.gamma_t * (1.0 - p),
            qubit: 0,
            tls: vec![0; rates.n_tls()],
        }
    }

    fn flip_rate(up: f64, down: f64, s: u8) -> f64 {
        if s == 0 {
            up
        } else {
            down
        }
    }

    fn total_rate(&self) -> f64 {
        let mut r = Self::flip_rate(self.up_q, self.down_q, self.qubit);
        for (&t, &g) in self.tls.iter().zip(&self.rates.gamma_qt) {
            r += Self::flip_rate(self.up_t, self.down_t, t);
            if t != self.qubit {
                r += g;
            }
        }
        r
    }

    /// Fires the event selected by `u ∈ [0, total_rate)`.
    fn fire(&mut self, mut u: f64) {
        let r = Self::flip_rate(self.up_q, self.down_q, self.qubit);
        if u < r {
            self.qubit ^= 1;
            return;
        }
        u -= r;
        let n = self.tls.len();
        for i in 0..n {
            let r = Self::flip_rate(self.up_t, self.down_t, self.tls[i]);
            if u < r {
                self.tls[i] ^= 1;
                return;
            }
            u -= r;
            if self.tls[i] != self.qubit {
                let g = self.rates.gamma_qt[i];
                if u < g {
                    std::mem::swap(&mut self.tls[i], &mut self.qubit);
                    return;
                }
                u -= g;
            }
        }
        // Round-off left `u` just past the last rate: fire the last enabled event.
        for i in (0..n).rev() {
            if self.tls[i] != self.qubit && self.rates.gamma_qt[i] > 0.0 {
                std::mem::swap(&mut self.tls[i], &mut self.qubit);
                return;
            }
            if Self::flip_rate(self.up_t, self.down_t, self.tls[i]) > 0.0 {
                self.tls[i] ^= 1;
                return;
            }
        }
        self.qubit ^= 1;
    }

    fn waiting_time(&self, rng: &mut ChaCha8Rng) -> f64 {
        let r = self.total_rate();
        if r > 0.0 {
            rng.sample::<f64, _>(Exp1) / r
        } else {
            f64::INFINITY
        }
    }

    /// Runs all events up to and including `target`; `next` is the pending event time.
    fn advance(&mut self, next: &mut f64, target: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut events = 0u64;
        while *next <= target {
            let u = rng.random::<f64>() * self.total_rate();
            self.fire(u);
            events += 1;
            if events > EVENT_CAP {
                return Err(Error::EventCapExceeded { cap: EVENT_CAP });
            }
            *next += self.waiting_time(rng);
        }
        Ok(())
    }
}

/// Simulates one stroboscopic trace, hidden TLS states included.
pub fn simulate_trace(config: &SimConfig) -> Result<JumpTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rates = &config.rates;
    let mut chain = Chain::new(rates);
    if config.initial == InitialState::Stationary {
        chain.qubit = u8::from(rng.random::<f64>() < rates.p_th);
        for t in chain.tls.iter_mut() {
            *t = u8::from(rng.random::<f64>() < rates.p_th);
        }
    }
    let mut next = chain.waiting_time(&mut rng);
    let t0 = config.burn_in;
    chain.advance(&mut next, t0, &mut rng)?;

    let n = config.n_strobes;
    let mut states = Vec::with_capacity(n);
    let mut hidden: Vec<Vec<u8>> = (0..rates.n_tls()).map(|_| Vec::with_capacity(n)).collect();
    for k in 0..n {
        chain.advance(&mut next, t0 + k as f64 * config.dt_strobe, &mut rng)?;
        states.push(chain.qubit);
        for (h, &t) in hidden.iter_mut().zip(&chain.tls) {
            h.push(t);
        }
    }
    Ok(JumpTrace {
        states,
        hidden_tls: Some(hidden),
        dt_strobe: config.dt_strobe,
        meta: TraceMeta { source: Source::Simulated, seed: Some(config.seed), ..TraceMeta::default() },
    })
}

/// Simulates `n_traces` independent traces with derived seeds, in index order.
pub fn simulate_traces(config: &SimConfig, n_traces: usize) -> Result<Vec<JumpTrace>> {
    (0..n_traces as u64).into_par_iter().map(|i| simulate_trace(&config.for_trace(i))).collect()
}

/// Streams an ensemble through `fold` without keeping the traces.
///
/// Traces are folded in parallel, so `fold`/`reduce` must not depend on the
/// order in which traces arrive (integer counts are the intended use).
pub fn fold_traces<A, I, F, R>(config: &SimConfig, n_traces: usize, init: I, fold: F, reduce: R) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, JumpTrace) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
{
    config.validate()?;
    (0..n_traces as u64)
        .into_par_iter()
        .map(|i| simulate_trace(&config.for_trace(i)))
        .try_fold(&init, |acc, tr| Ok(fold(acc, tr?)))
        .try_reduce(&init, |a, b| Ok(reduce(a, b)))
}

/// Conditioned averages of the measured qubit and of every hidden TLS.
///
/// With two or more traces the standard errors are the between-trace
/// (clustered) errors, otherwise binomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Unraveled {
    /// Measured qubit, lags `0 ..= horizon`.
    pub qubit: ConditionedTrajectory,
    /// Hidden TLS populations, lags `-horizon ..= horizon`.
    pub hidden: Vec<ConditionedTrajectory>,
    pub matches: u64,
}

pub fn unravel_conditioned(
    config: &SimConfig,
    pattern: &SelectionPattern,
    horizon: f64,
    n_traces: usize,
) -> Result<Unraveled> {
    config.validate()?;
    let dt = config.dt_strobe;
    if horizon > config.n_strobes as f64 * dt {
        return Err(Error::InvalidArgument(format!("horizon {horizon} s longer than a trace")));
    }
    let steps = lag_steps(horizon, dt);
    let n_tls = config.rates.n_tls();
    let init = || ConditionAccumulator::new(pattern.clone(), steps, steps, 1 + n_tls);
    let acc = fold_traces(
        config,
        n_traces,
        init,
        |mut acc, tr| {
            let hidden = tr.hidden_tls.as_ref().expect("simulated traces carry hidden states");
            let mut channels: Vec<&[u8]> = vec![&tr.states];
            channels.extend(hidden.iter().map(Vec::as_slice));
            acc.add(&tr.states, &channels);
            acc
        },
        ConditionAccumulator::merge,
    )?;
    let matches = acc.matches();
    let errors = if n_traces >= 2 { ErrorModel::Clustered } else { ErrorModel::Binomial };
    let mut trajs = acc.finish_with(dt, errors)?.into_iter();
    let full = trajs.next().expect("qubit channel");
    let start = full.lags.iter().position(|&l| l >= 0.0).unwrap_or(full.len());
    let qubit = ConditionedTrajectory {
        lags: full.lags[start..].to_vec(),
        mean_excited: full.mean_excited[start..].to_vec(),
        counts: full.counts[start..].to_vec(),
        stderr: full.stderr[start..].to_vec(),
    };
    Ok(Unraveled { qubit, hidden: trajs.collect(), matches })
}

/// One IQ point per strobe: the state's cluster center plus Gaussian noise.
pub fn synthesize_iq(trace: &JumpTrace, model: &ReadoutModel, seed: u64) -> Result<Vec<Complex64>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(trace
        .states
        .iter()
        .map(|&s| {
            let flipped = rng.random::<f64>() < model.assignment_error;
            let excited = (s == 1) != flipped;
            let center = if excited { model.center_e } else { model.center_g };
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            center + Complex64::new(re, im) * model.sigma
        })
        .collect())
}
