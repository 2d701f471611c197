//! Joint least-squares estimation of the coupling rates from the `(0)` and
//! `(1,0)` conditioned trajectories.
//!
//! Rates are fitted as logarithms (box-bounded in log space) and `p_th`
//! through a logistic map onto its bounds, so every trial point is a valid
//! rate set. Residuals are weighted by the per-lag standard errors; only
//! positive lags enter the fit.

pub mod lm;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::ConditionedTrajectory;
use crate::error::{Error, Result};
use crate::solomon::{RateSet, Scenario, SolomonSystem};
use lm::{LmOptions, LmReport};

/// Practical cap on the number of fitted TLSs.
pub const MAX_TLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub gamma_q: [f64; 2],
    pub gamma_qt: [f64; 2],
    pub gamma_t: [f64; 2],
    pub p_th: [f64; 2],
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { gamma_q: [1e-3, 1e9], gamma_qt: [1e-3, 1e9], gamma_t: [1e-3, 1e9], p_th: [1e-4, 0.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub n_tls: usize,
    #[serde(default)]
    pub fit_gamma_t: bool,
    #[serde(default = "yes")]
    pub fit_p_th: bool,
    /// Γt used when it is not fitted, 1/s.
    #[serde(default)]
    pub gamma_t: f64,
    /// p_th used when it is not fitted.
    #[serde(default)]
    pub p_th: Option<f64>,
    #[serde(default)]
    pub bounds: Bounds,
    /// Number of starting points; defaults to 8 for two or more TLSs, else 1.
    #[serde(default)]
    pub multistart: Option<usize>,
}

fn yes() -> bool {
    true
}

impl FitSpec {
    pub fn new(n_tls: usize) -> Self {
        FitSpec {
            n_tls,
            fit_gamma_t: false,
            fit_p_th: true,
            gamma_t: 0.0,
            p_th: None,
            bounds: Bounds::default(),
            multistart: None,
        }
    }

    pub fn with_gamma_t_free(mut self) -> Self {
        self.fit_gamma_t = true;
        self
    }

    pub fn starts(&self) -> usize {
        self.multistart.unwrap_or(if self.n_tls >= 2 { 8 } else { 1 }).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tls > MAX_TLS {
            return Err(Error::InvalidArgument(format!("n_tls = {} exceeds the cap of {MAX_TLS}", self.n_tls)));
        }
        let b = &self.bounds;
        for (name, [lo, hi]) in [("gamma_q", b.gamma_q), ("gamma_qt", b.gamma_qt), ("gamma_t", b.gamma_t)] {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad {name} bounds [{lo}, {hi}]")));
            }
        }
        let [plo, phi] = b.p_th;
        if !(plo >= 0.0 && phi > plo && phi <= 0.5) {
            return Err(Error::InvalidArgument(format!("bad p_th bounds [{plo}, {phi}]")));
        }
        if !(self.gamma_t >= 0.0 && self.gamma_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("fixed gamma_t = {} must be >= 0", self.gamma_t)));
        }
        if !self.fit_p_th {
            match self.p_th {
                Some(p) if (0.0..=0.5).contains(&p) => {}
                _ => return Err(Error::InvalidArgument("fixed p_th requires a value in [0, 0.5]".into())),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedFlags {
    pub gamma_q: bool,
    pub gamma_qt: bool,
    pub gamma_t: bool,
    pub p_th: bool,
}

/// One-sigma uncertainties; `None` for parameters that were held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamErrors {
    pub gamma_q: f64,
    pub gamma_qt: Vec<f64>,
    pub gamma_t: Option<f64>,
    pub p_th: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub rates: RateSet,
    pub fixed: FixedFlags,
    pub chi2: f64,
    pub dof: usize,
    pub stderr: ParamErrors,
    pub converged: bool,
    pub n_iter: usize,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        1 + self.rates.n_tls() + usize::from(!self.fixed.gamma_t) + usize::from(!self.fixed.p_th)
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof.max(1) as f64
    }
}

/// Weighted positive-lag samples of one trajectory.
#[derive(Debug, Clone)]
struct Samples {
    times: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

/// Standard error with a Jeffreys-style fallback for lags whose binomial
/// estimate is zero (all matches agree).
fn effective_sigma(mean: f64, stderr: f64, count: u64) -> f64 {
    if stderr > 0.0 {
        return stderr;
    }
    let n = count.max(1) as f64;
    let k = (mean * n).round();
    let p = (k + 0.5) / (n + 1.0);
    (p * (1.0 - p) / n).sqrt()
}

impl Samples {
    fn new(traj: &ConditionedTrajectory) -> Result<Self> {
        traj.validate()?;
        let mut s = Samples { times: vec![], y: vec![], w: vec![] };
        for i in 0..traj.len() {
            if traj.lags[i] > 0.0 {
                s.times.push(traj.lags[i]);
                s.y.push(traj.mean_excited[i]);
                s.w.push(1.0 / effective_sigma(traj.mean_excited[i], traj.stderr[i], traj.counts[i]));
            }
        }
        if s.times.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, found: 0 });
        }
        Ok(s)
    }

    fn is_flat(&self) -> bool {
        self.y.iter().all(|&v| v == self.y[0])
    }

    fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().position(|&x| (x - t).abs() <= 1e-9 * t)?;
        Some(self.y[i])
    }
}

fn check_shared_grid(a: &Samples, b: &Samples) -> Result<()> {
    let dt = a.times.iter().chain(&b.times).copied().fold(f64::INFINITY, f64::min);
    for &t in a.times.iter().chain(&b.times) {
        let k = t / dt;
        if (k - k.round()).abs() > 1e-6 * k.max(1.0) {
            return Err(Error::InvalidArgument(format!("lag {t} s is not on the {dt} s grid shared by both trajectories")));
        }
    }
    Ok(())
}

/// Mapping between the optimizer's unconstrained vector and a rate set.
#[derive(Debug, Clone)]
struct Layout {
    n_tls: usize,
    fit_gt: bool,
    fit_p: bool,
    gamma_t: f64,
    p_th: f64,
    bounds: Bounds,
}

const LOGIT_LIMIT: f64 = 40.0;

fn log_bounds([lo, hi]: [f64; 2]) -> [f64; 2] {
    [lo.max(1e-12).ln(), hi.ln()]
}

impl Layout {
    fn new(spec: &FitSpec) -> Self {
        Layout {
            n_tls: spec.n_tls,
            fit_gt: spec.fit_gamma_t && spec.n_tls > 0,
            fit_p: spec.fit_p_th,
            gamma_t: spec.gamma_t,
            p_th: spec.p_th.unwrap_or(0.0),
            bounds: spec.bounds,
        }
    }

    fn n_params(&self) -> usize {
        1 + self.n_tls + usize::from(self.fit_gt) + usize::from(self.fit_p)
    }

    fn box_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut b = vec![log_bounds(self.bounds.gamma_q)];
        b.extend(std::iter::repeat_n(log_bounds(self.bounds.gamma_qt), self.n_tls));
        if self.fit_gt {
            b.push(log_bounds(self.bounds.gamma_t));
        }
        if self.fit_p {
            b.push([-LOGIT_LIMIT, LOGIT_LIMIT]);
        }
        (b.iter().map(|v| v[0]).collect(), b.iter().map(|v| v[1]).collect())
    }

    fn p_from_logit(&self, u: f64) -> f64 {
        let [lo, hi] = self.bounds.p_th;
        lo + (hi - lo) / (1.0 + (-u).exp())
    }

    fn logit_from_p(&self, p: f64) -> f64 {
        let [lo, hi] = self.bounds.p_th;
        let f = ((p - lo) / (hi - lo)).clamp(1e-15, 1.0 - 1e-15);
        (f / (1.0 - f)).ln().clamp(-LOGIT_LIMIT, LOGIT_LIMIT)
    }

    fn rates(&self, x: &[f64]) -> Option<RateSet> {
        let gamma_q = x[0].exp();
        let gamma_qt: Vec<f64> = x[1..=self.n_tls].iter().map(|v| v.exp()).collect();
        let mut k = 1 + self.n_tls;
        let gamma_t = if self.fit_gt {
            k += 1;
            x[k - 1].exp()
        } else {
            self.gamma_t
        };
        let p_th = if self.fit_p { self.p_from_logit(x[k]) } else { self.p_th };
        RateSet::new(gamma_q, gamma_qt, gamma_t, p_th).ok()
    }

    fn params(&self, rates: &RateSet) -> Vec<f64> {
        let (lo, hi) = self.box_bounds();
        let mut x = vec![rates.gamma_q.max(1e-300).ln()];
        x.extend(rates.gamma_qt.iter().map(|g| g.max(1e-300).ln()));
        if self.fit_gt {
            x.push(rates.gamma_t.max(1e-300).ln());
        }
        if self.fit_p {
            x.push(self.logit_from_p(rates.p_th));
        }
        for ((v, l), h) in x.iter_mut().zip(&lo).zip(&hi) {
            *v = v.clamp(*l, *h);
        }
        x
    }

    fn fixed(&self) -> FixedFlags {
        FixedFlags { gamma_q: false, gamma_qt: false, gamma_t: !self.fit_gt, p_th: !self.fit_p }
    }
}

/// The weighted residual map of one joint fit, exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct FitProblem {
    ground: Samples,
    post: Samples,
    layout: Layout,
}

fn model_residuals(ground: &Samples, post: &Samples, rates: &RateSet) -> Option<Vec<f64>> {
    let sys = SolomonSystem::new(rates).ok()?;
    let mg = sys.scenario_trajectory(Scenario::Ground, &ground.times).ok()?;
    let mp = sys.scenario_trajectory(Scenario::PostJump, &post.times).ok()?;
    let mut r = Vec::with_capacity(mg.len() + mp.len());
    for (s, m) in [(ground, mg), (post, mp)] {
        r.extend(s.y.iter().zip(&m).zip(&s.w).map(|((y, m), w)| (y - m) * w));
    }
    Some(r)
}

impl FitProblem {
    pub fn new(ground: &ConditionedTrajectory, post_jump: &ConditionedTrajectory, spec: &FitSpec) -> Result<Self> {
        spec.validate()?;
        let g = Samples::new(ground)?;
        let p = Samples::new(post_jump)?;
        check_shared_grid(&g, &p)?;
        Ok(FitProblem { ground: g, post: p, layout: Layout::new(spec) })
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    pub fn n_residuals(&self) -> usize {
        self.ground.times.len() + self.post.times.len()
    }

    /// Optimizer coordinates of a rate set (log rates, logit p_th), clamped to the bounds.
    pub fn params_from_rates(&self, rates: &RateSet) -> Vec<f64> {
        self.layout.params(rates)
    }

    pub fn rates_from_params(&self, x: &[f64]) -> Option<RateSet> {
        self.layout.rates(x)
    }

    pub fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        model_residuals(&self.ground, &self.post, &self.layout.rates(x)?)
    }

    /// The forward-difference Jacobian used by the optimizer.
    pub fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let r0 = self.residuals(x)?;
        let (_, hi) = self.layout.box_bounds();
        lm::forward_jacobian(&|v: &[f64]| self.residuals(v), x, &r0, &hi)
    }

    pub fn chi2(&self, rates: &RateSet) -> Option<f64> {
        Some(model_residuals(&self.ground, &self.post, rates)?.iter().map(|r| r * r).sum())
    }

    fn run(&self, start: &RateSet) -> Option<LmReport> {
        let (lo, hi) = self.layout.box_bounds();
        let x0 = self.layout.params(start);
        lm::minimize(&|v: &[f64]| self.residuals(v), &x0, &lo, &hi, &LmOptions::default())
    }

    /// Natural-parameter standard errors from the Jacobian at the optimum.
    fn stderr(&self, rates: &RateSet) -> ParamErrors {
        let n = self.layout.n_tls;
        let mut theta = vec![rates.gamma_q];
        theta.extend(&rates.gamma_qt);
        if self.layout.fit_gt {
            theta.push(rates.gamma_t);
        }
        if self.layout.fit_p {
            theta.push(rates.p_th);
        }
        let build = |th: &[f64]| -> Option<RateSet> {
            let mut k = 1 + n;
            let gt = if self.layout.fit_gt {
                k += 1;
                th[k - 1]
            } else {
                rates.gamma_t
            };
            let p = if self.layout.fit_p { th[k] } else { rates.p_th };
            RateSet::new(th[0], th[1..=n].to_vec(), gt, p).ok()
        };
        let eval = |th: &[f64]| build(th).and_then(|r| model_residuals(&self.ground, &self.post, &r));
        let nan = ParamErrors {
            gamma_q: f64::NAN,
            gamma_qt: vec![f64::NAN; n],
            gamma_t: self.layout.fit_gt.then_some(f64::NAN),
            p_th: self.layout.fit_p.then_some(f64::NAN),
        };
        let Some(r0) = eval(&theta) else { return nan };
        let m = r0.len();
        let mut jac = DMatrix::zeros(m, theta.len());
        for j in 0..theta.len() {
            let h = 1e-6 * theta[j].abs().max(1e-9);
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let col: Vec<f64> = match (eval(&tp), eval(&tm)) {
                (Some(a), Some(b)) => a.iter().zip(&b).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Some(a), None) => a.iter().zip(&r0).map(|(a, b)| (a - b) / h).collect(),
                (None, Some(b)) => r0.iter().zip(&b).map(|(a, b)| (a - b) / h).collect(),
                (None, None) => return nan,
            };
            for (i, v) in col.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        let scale: Vec<f64> = (0..theta.len())
            .map(|j| {
                let c = jac.column(j).norm();
                if c > 0.0 {
                    1.0 / c
                } else {
                    1.0
                }
            })
            .collect();
        for (j, s) in scale.iter().enumerate() {
            jac.column_mut(j).scale_mut(*s);
        }
        let info = jac.tr_mul(&jac);
        let Ok(cov) = info.svd(true, true).pseudo_inverse(1e-12) else { return nan };
        let sd: Vec<f64> = (0..theta.len()).map(|j| cov[(j, j)].max(0.0).sqrt() * scale[j]).collect();
        let mut k = 1 + n;
        let gamma_t = self.layout.fit_gt.then(|| {
            k += 1;
            sd[k - 1]
        });
        ParamErrors { gamma_q: sd[0], gamma_qt: sd[1..=n].to_vec(), gamma_t, p_th: self.layout.fit_p.then(|| sd[k]) }
    }
}

/// Single-exponential rise `p(t) = p_th (1 - e^{-Γ t})` fitted to the `(0)` trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovianFit {
    pub gamma: f64,
    pub p_th: f64,
    pub chi2: f64,
    pub dof: usize,
    pub converged: bool,
}

pub fn fit_markovian_baseline(ground: &ConditionedTrajectory) -> Result<MarkovianFit> {
    fit_baseline_with(ground, &Bounds::default())
}

fn fit_baseline_with(ground: &ConditionedTrajectory, bounds: &Bounds) -> Result<MarkovianFit> {
    let s = Samples::new(ground)?;
    if s.times.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: s.times.len() });
    }
    if s.is_flat() {
        return Err(Error::DegenerateData("conditioned trajectory is flat".into()));
    }
    let layout = Layout { n_tls: 0, fit_gt: false, fit_p: true, gamma_t: 0.0, p_th: 0.0, bounds: *bounds };
    let resid = |x: &[f64]| -> Option<Vec<f64>> {
        let g = x[0].exp();
        let p = layout.p_from_logit(x[1]);
        Some(s.times.iter().zip(&s.y).zip(&s.w).map(|((t, y), w)| (y - p * (1.0 - (-g * t).exp())) * w).collect())
    };
    let tail = &s.y[s.y.len() - (s.y.len() / 4).max(1)..];
    let [plo, phi] = bounds.p_th;
    let p0 = (tail.iter().sum::<f64>() / tail.len() as f64).clamp(plo + 1e-3 * (phi - plo), phi - 1e-3 * (phi - plo));
    let t_e = s
        .times
        .iter()
        .zip(&s.y)
        .find(|(_, &y)| y >= (1.0 - (-1.0f64).exp()) * p0)
        .map_or(*s.times.last().unwrap(), |(t, _)| *t);
    let g0 = 1.0 / t_e;
    let lo = [log_bounds(bounds.gamma_q)[0], -LOGIT_LIMIT];
    let hi = [log_bounds(bounds.gamma_q)[1], LOGIT_LIMIT];
    let best = [1.0, 0.2, 5.0]
        .iter()
        .filter_map(|f| {
            let x0 = [(g0 * f).ln(), layout.logit_from_p(p0)];
            lm::minimize(&resid, &x0, &lo, &hi, &LmOptions::default())
        })
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::DegenerateData("baseline model cannot be evaluated".into()))?;
    Ok(MarkovianFit {
        gamma: best.x[0].exp(),
        p_th: layout.p_from_logit(best.x[1]),
        chi2: best.cost,
        dof: s.times.len() - 2,
        converged: best.converged,
    })
}

/// Rate sets to start the optimizer from.
fn seed_starts(problem: &FitProblem, spec: &FitSpec, base: &MarkovianFit) -> Vec<RateSet> {
    let n = spec.n_tls;
    let total = base.gamma;
    let p = spec.p_th.filter(|_| !spec.fit_p_th).unwrap_or(base.p_th);
    let gamma_t = if spec.fit_gamma_t && n > 0 { (1e-2 * total).max(spec.bounds.gamma_t[0]) } else { spec.gamma_t };
    if n == 0 {
        return vec![RateSet { gamma_q: total, gamma_qt: vec![], gamma_t, p_th: p }];
    }
    // Post-jump minus ground initial slope is Γtot (1 - p_th) s², s = ΣΓqt / Γtot.
    let t1 = problem.ground.times[0];
    let s = match (problem.ground.value_at(t1), problem.post.value_at(t1)) {
        (Some(g), Some(q)) => ((q - g) / t1 / (total * (1.0 - p))).max(0.0).sqrt(),
        _ => 0.5,
    }
    .clamp(0.05, 0.95);
    let m = spec.starts();
    let ratios: Vec<f64> = if m == 1 {
        vec![3.0]
    } else {
        (0..m).map(|j| (1.5f64.ln() + j as f64 * (30f64.ln() - 1.5f64.ln()) / (m - 1) as f64).exp()).collect()
    };
    ratios
        .iter()
        .map(|&r| {
            let w: Vec<f64> = (0..n).map(|i| r.powi(-(i as i32))).collect();
            let wsum: f64 = w.iter().sum();
            RateSet {
                gamma_q: total * (1.0 - s),
                gamma_qt: w.iter().map(|wi| total * s * wi / wsum).collect(),
                gamma_t,
                p_th: p,
            }
        })
        .collect()
}

pub fn fit_solomon(ground: &ConditionedTrajectory, post_jump: &ConditionedTrajectory, spec: &FitSpec) -> Result<FitResult> {
    let problem = FitProblem::new(ground, post_jump, spec)?;
    let base = fit_baseline_with(ground, &spec.bounds)?;
    fit_nested(ground, post_jump, spec, &problem, &base)
}

fn fit_nested(
    ground: &ConditionedTrajectory,
    post_jump: &ConditionedTrajectory,
    spec: &FitSpec,
    problem: &FitProblem,
    base: &MarkovianFit,
) -> Result<FitResult> {
    let mut starts = Vec::new();
    if spec.n_tls >= 2 {
        // Warm start from the best fit with one TLS fewer, so adding a TLS never
        // makes the optimum worse.
        let smaller = FitSpec { n_tls: spec.n_tls - 1, multistart: None, ..spec.clone() };
        let sub_problem = FitProblem::new(ground, post_jump, &smaller)?;
        let prev = fit_nested(ground, post_jump, &smaller, &sub_problem, base)?;
        let mut warm = prev.rates.clone();
        warm.gamma_qt.push(spec.bounds.gamma_qt[0]);
        starts.push(warm);
    }
    if spec.fit_gamma_t && spec.n_tls >= 1 {
        // Likewise from the fit with Γt held at its lower bound.
        let held = spec.bounds.gamma_t[0].max(1e-12);
        let fixed = FitSpec { fit_gamma_t: false, gamma_t: held, multistart: None, ..spec.clone() };
        let sub_problem = FitProblem::new(ground, post_jump, &fixed)?;
        starts.push(fit_nested(ground, post_jump, &fixed, &sub_problem, base)?.rates);
    }
    starts.extend(seed_starts(problem, spec, base));

    let reports: Vec<Option<LmReport>> = starts.par_iter().map(|s| problem.run(s)).collect();
    let best = reports
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.cost < a.cost { b } else { a })
        .ok_or_else(|| Error::DegenerateData("model cannot be evaluated at any starting point".into()))?;
    let rates = problem.rates_from_params(&best.x).expect("optimizer stays in the valid domain");
    let mut stderr = problem.stderr(&rates);
    let (rates, order) = sort_couplings(rates);
    stderr.gamma_qt = order.iter().map(|&i| stderr.gamma_qt[i]).collect();
    let k = problem.n_params();
    Ok(FitResult {
        chi2: best.cost,
        dof: problem.n_residuals().saturating_sub(k),
        fixed: problem.layout.fixed(),
        stderr,
        converged: best.converged,
        n_iter: best.n_iter,
        rates,
    })
}

/// Orders the couplings by decreasing Γqt; returns the permutation applied.
fn sort_couplings(mut rates: RateSet) -> (RateSet, Vec<usize>) {
    let mut order: Vec<usize> = (0..rates.n_tls()).collect();
    order.sort_by(|&a, &b| rates.gamma_qt[b].total_cmp(&rates.gamma_qt[a]));
    rates.gamma_qt = order.iter().map(|&i| rates.gamma_qt[i]).collect();
    (rates, order)
}

/// Small-sample corrected Akaike criterion.
pub fn aicc(chi2: f64, n_params: usize, n_points: usize) -> f64 {
    let k = n_params as f64;
    let n = n_points as f64;
    if n - k - 1.0 <= 0.0 {
        return f64::INFINITY;
    }
    chi2 + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFit {
    pub spec: FitSpec,
    pub result: FitResult,
    pub n_params: usize,
    pub n_points: usize,
    pub aicc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    /// Preferred model first.
    pub ranked: Vec<RankedFit>,
    /// The preferred model has more TLSs than the smallest candidate.
    pub extra_tls_justified: bool,
}

impl ModelComparison {
    pub fn best(&self) -> &RankedFit {
        &self.ranked[0]
    }
}

/// Fits every spec and ranks by AICc. Within two units the model with fewer
/// parameters is preferred.
pub fn compare_models(
    ground: &ConditionedTrajectory,
    post_jump: &ConditionedTrajectory,
    specs: &[FitSpec],
) -> Result<ModelComparison> {
    if specs.len() < 2 {
        return Err(Error::InvalidArgument("compare_models needs at least two specs".into()));
    }
    let mut fits = specs
        .par_iter()
        .map(|spec| {
            let problem = FitProblem::new(ground, post_jump, spec)?;
            let result = fit_solomon(ground, post_jump, spec)?;
            let n_params = problem.n_params();
            let n_points = problem.n_residuals();
            Ok(RankedFit { spec: spec.clone(), aicc: aicc(result.chi2, n_params, n_points), result, n_params, n_points })
        })
        .collect::<Result<Vec<_>>>()?;
    let min = fits.iter().map(|f| f.aicc).fold(f64::INFINITY, f64::min);
    let winner = (0..fits.len())
        .filter(|&i| fits[i].aicc <= min + 2.0)
        .min_by(|&a, &b| fits[a].n_params.cmp(&fits[b].n_params).then(fits[a].aicc.total_cmp(&fits[b].aicc)))
        .unwrap_or(0);
    let first = fits.remove(winner);
    fits.sort_by(|a, b| a.aicc.total_cmp(&b.aicc));
    fits.insert(0, first);
    let smallest = specs.iter().map(|s| s.n_tls).min().unwrap_or(0);
    Ok(ModelComparison { extra_tls_justified: fits[0].spec.n_tls > smallest, ranked: fits })
}
