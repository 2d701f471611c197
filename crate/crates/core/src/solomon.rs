//! Exact solutions of the Solomon rate equations.
//!
//! A qubit with excitation probability `p_q` exchanges energy with `N`
//! two-level systems (`p_t[i]`) and with a thermal bath. The mean populations
//! obey the linear system
//!
//! ```text
//! dp/dt = -M p + b p_th
//! M = | Γq + Σ Γqt[i]   -Γqt[0]      -Γqt[1]    ... |
//!     | -Γqt[0]         Γqt[0] + Γt   0          ... |
//!     | -Γqt[1]         0             Γqt[1] + Γt ... |
//! b = (Γq, Γt, ..., Γt)
//! ```
//!
//! `M` is symmetric and weakly diagonally dominant, so it is positive
//! semidefinite and the flow is solved exactly through one symmetric
//! eigendecomposition per rate set ([`SolomonSystem`]). The uniform vector
//! `p_th · 1` always satisfies `M p = b p_th`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::conditioning::SelectionPattern;
use crate::error::{Error, Result};

/// Populations may leave [0, 1] by at most this much before it is an error.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Coupling rates of one qubit–environment model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    /// Qubit → bath rate, 1/s.
    pub gamma_q: f64,
    /// Qubit ↔ TLS exchange rate, one per TLS, 1/s.
    pub gamma_qt: Vec<f64>,
    /// TLS → bath rate shared by all TLSs, 1/s.
    pub gamma_t: f64,
    /// Thermal excitation probability of qubit and TLSs.
    pub p_th: f64,
}

impl RateSet {
    pub fn new(gamma_q: f64, gamma_qt: Vec<f64>, gamma_t: f64, p_th: f64) -> Result<Self> {
        let rates = RateSet { gamma_q, gamma_qt, gamma_t, p_th };
        rates.validate()?;
        Ok(rates)
    }

    /// Qubit coupled to the bath only.
    pub fn markovian(gamma_q: f64, p_th: f64) -> Result<Self> {
        Self::new(gamma_q, Vec::new(), 0.0, p_th)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if !v.is_finite() || v < 0.0 {
                Err(Error::InvalidRates(format!("{name} = {v} must be finite and >= 0")))
            } else {
                Ok(())
            }
        };
        check("gamma_q", self.gamma_q)?;
        check("gamma_t", self.gamma_t)?;
        for (i, &g) in self.gamma_qt.iter().enumerate() {
            check(&format!("gamma_qt[{i}]"), g)?;
        }
        if !(0.0..=0.5).contains(&self.p_th) {
            return Err(Error::InvalidRates(format!("p_th = {} outside [0, 0.5]", self.p_th)));
        }
        Ok(())
    }

    pub fn n_tls(&self) -> usize {
        self.gamma_qt.len()
    }

    /// Γq + Σ Γqt: the total decay rate of an excited qubit into empty TLSs and bath.
    pub fn total_qubit_decay(&self) -> f64 {
        self.gamma_q + self.gamma_qt.iter().sum::<f64>()
    }

    /// 1/Γq, the lifetime set by the Markovian bath alone.
    pub fn bath_lifetime(&self) -> f64 {
        1.0 / self.gamma_q
    }

    /// 1/(Γq + Σ Γqt), the lifetime including decay into thermal TLSs.
    pub fn total_lifetime(&self) -> f64 {
        1.0 / self.total_qubit_decay()
    }
}

/// Excitation probabilities of the qubit and of each TLS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector {
    pub p_q: f64,
    pub p_t: Vec<f64>,
}

impl PopulationVector {
    pub fn new(p_q: f64, p_t: Vec<f64>) -> Result<Self> {
        let p = PopulationVector { p_q, p_t };
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument(format!("population {bad} outside [0, 1]")));
        }
        Ok(p)
    }

    pub fn uniform(value: f64, n_tls: usize) -> Self {
        PopulationVector { p_q: value, p_t: vec![value; n_tls] }
    }

    pub fn len(&self) -> usize {
        1 + self.p_t.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.p_q).chain(self.p_t.iter().copied())
    }

    fn to_dvector(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.iter())
    }

    fn from_dvector(v: &DVector<f64>) -> Result<Self> {
        let mut out = Vec::with_capacity(v.len());
        for &x in v.iter() {
            out.push(clamp_population(x)?);
        }
        Ok(PopulationVector { p_q: out[0], p_t: out[1..].to_vec() })
    }
}

fn clamp_population(x: f64) -> Result<f64> {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&x) {
        return Err(Error::PopulationOutOfRange { value: x });
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Interaction matrix `M` and bath drive vector `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
}

pub fn build_matrix(rates: &RateSet) -> Result<InteractionMatrix> {
    rates.validate()?;
    let n = rates.n_tls() + 1;
    let mut m = DMatrix::zeros(n, n);
    let mut b = DVector::from_element(n, rates.gamma_t);
    m[(0, 0)] = rates.total_qubit_decay();
    b[0] = rates.gamma_q;
    for (i, &g) in rates.gamma_qt.iter().enumerate() {
        m[(0, i + 1)] = -g;
        m[(i + 1, 0)] = -g;
        m[(i + 1, i + 1)] = g + rates.gamma_t;
    }
    Ok(InteractionMatrix { m, b })
}

/// Solution of `M p = b p_th`.
///
/// The uniform thermal vector always solves the system; it is the unique
/// solution unless no bath coupling exists at all.
pub fn steady_state(rates: &RateSet) -> Result<PopulationVector> {
    rates.validate()?;
    let bath_coupled = rates.gamma_q > 0.0 || (rates.gamma_t > 0.0 && rates.n_tls() > 0);
    if !bath_coupled {
        return Err(Error::NoUniqueSteadyState);
    }
    Ok(PopulationVector::uniform(rates.p_th, rates.n_tls()))
}

/// TLS population right after the qubit was seen decaying.
///
/// `p_th + (1 - p_th) Γqt[i] / (Γq + Σ Γqt)`: with probability `1 - p_th` the
/// TLS was empty, and the photon then went into TLS `i` with the branching
/// ratio of the qubit's total decay.
pub fn post_jump_tls_population(rates: &RateSet, tls_index: usize) -> Result<f64> {
    rates.validate()?;
    let g = *rates.gamma_qt.get(tls_index).ok_or_else(|| {
        Error::InvalidArgument(format!("tls_index {tls_index} out of range for {} TLSs", rates.n_tls()))
    })?;
    let total = rates.total_qubit_decay();
    if total <= 0.0 {
        return Err(Error::QubitCannotDecay);
    }
    Ok(rates.p_th + (1.0 - rates.p_th) * g / total)
}

/// The two selection scenarios with closed-form initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// `{|0⟩}`: qubit measured in the ground state, TLSs thermal.
    Ground,
    /// `{|1⟩,|0⟩}`: qubit just decayed, TLS populations from the branching formula.
    PostJump,
}

impl Scenario {
    pub fn from_pattern(pattern: &SelectionPattern) -> Result<Self> {
        match pattern.states() {
            [0] => Ok(Scenario::Ground),
            [1, 0] => Ok(Scenario::PostJump),
            _ => Err(Error::UnsupportedScenario(pattern.to_string())),
        }
    }

    pub fn pattern(self) -> SelectionPattern {
        match self {
            Scenario::Ground => SelectionPattern::ground(),
            Scenario::PostJump => SelectionPattern::post_jump(),
        }
    }

    pub fn initial_populations(self, rates: &RateSet) -> Result<PopulationVector> {
        match self {
            Scenario::Ground => Ok(PopulationVector { p_q: 0.0, p_t: vec![rates.p_th; rates.n_tls()] }),
            Scenario::PostJump => {
                let p_t = (0..rates.n_tls())
                    .map(|i| post_jump_tls_population(rates, i))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PopulationVector { p_q: 0.0, p_t })
            }
        }
    }
}

/// A rate set with its interaction matrix diagonalized once.
#[derive(Debug, Clone)]
pub struct SolomonSystem {
    rates: RateSet,
    matrix: InteractionMatrix,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SolomonSystem {
    pub fn new(rates: &RateSet) -> Result<Self> {
        let matrix = build_matrix(rates)?;
        let eig = SymmetricEigen::new(matrix.m.clone());
        // M is PSD; round-off can push a zero mode slightly negative.
        let eigenvalues = eig.eigenvalues.map(|l| l.max(0.0));
        Ok(SolomonSystem { rates: rates.clone(), matrix, eigenvalues, eigenvectors: eig.eigenvectors })
    }

    pub fn rates(&self) -> &RateSet {
        &self.rates
    }

    pub fn matrix(&self) -> &InteractionMatrix {
        &self.matrix
    }

    /// Eigenvalues of `M` (relaxation rates of the normal modes), 1/s.
    pub fn relaxation_rates(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Mode amplitudes of `p0 - p_th·1`.
    fn modes(&self, p0: &PopulationVector) -> Result<DVector<f64>> {
        if p0.len() != self.eigenvalues.len() {
            return Err(Error::InvalidArgument(format!(
                "population vector has {} entries, rate set expects {}",
                p0.len(),
                self.eigenvalues.len()
            )));
        }
        let excess = p0.to_dvector().add_scalar(-self.rates.p_th);
        Ok(self.eigenvectors.tr_mul(&excess))
    }

    pub fn propagate(&self, p0: &PopulationVector, t: f64) -> Result<PopulationVector> {
        check_time(t)?;
        let mut c = self.modes(p0)?;
        for (ck, &l) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ck *= (-l * t).exp();
        }
        let p = (&self.eigenvectors * c).add_scalar(self.rates.p_th);
        PopulationVector::from_dvector(&p)
    }

    /// Qubit population `p_q(t)` at each requested time.
    pub fn qubit_trajectory(&self, p0: &PopulationVector, times: &[f64]) -> Result<Vec<f64>> {
        let c = self.modes(p0)?;
        let weights: Vec<f64> = (0..c.len()).map(|k| self.eigenvectors[(0, k)] * c[k]).collect();
        times
            .iter()
            .map(|&t| {
                check_time(t)?;
                let excess: f64 = weights
                    .iter()
                    .zip(self.eigenvalues.iter())
                    .map(|(w, &l)| w * (-l * t).exp())
                    .sum();
                clamp_population(self.rates.p_th + excess)
            })
            .collect()
    }

    /// Model qubit trajectory of a canonical scenario at the given lags.
    pub fn scenario_trajectory(&self, scenario: Scenario, times: &[f64]) -> Result<Vec<f64>> {
        let p0 = scenario.initial_populations(&self.rates)?;
        self.qubit_trajectory(&p0, times)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and >= 0")));
    }
    Ok(())
}

pub fn propagate(rates: &RateSet, p0: &PopulationVector, t: f64) -> Result<PopulationVector> {
    SolomonSystem::new(rates)?.propagate(p0, t)
}

/// `p_q(k·dt)` for `k = 0..n_points` under one of the canonical scenarios.
pub fn model_trajectory(
    rates: &RateSet,
    scenario: &SelectionPattern,
    dt: f64,
    n_points: usize,
) -> Result<Vec<f64>> {
    let scenario = Scenario::from_pattern(scenario)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be > 0")));
    }
    let times: Vec<f64> = (0..n_points).map(|k| k as f64 * dt).collect();
    SolomonSystem::new(rates)?.scenario_trajectory(scenario, &times)
}
