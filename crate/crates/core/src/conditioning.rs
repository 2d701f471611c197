//! Jump detection, g₂ estimation and selection-pattern conditioned averages.
//!
//! All estimators accumulate integer counts, so pooling over traces is exact,
//! associative and independent of the order in which traces are processed.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jumpsim::JumpTrace;

/// Ordered list of measured qubit states that must precede (and include) the
/// selection instant. `(0)` is `{|0⟩}`, `(1,0)` is `{|1⟩,|0⟩}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct SelectionPattern(Vec<u8>);

impl SelectionPattern {
    pub fn new(states: Vec<u8>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("selection pattern is empty".into()));
        }
        if let Some(s) = states.iter().find(|&&s| s > 1) {
            return Err(Error::InvalidArgument(format!("selection pattern entry {s} is not 0 or 1")));
        }
        Ok(SelectionPattern(states))
    }

    /// `{|0⟩}`
    pub fn ground() -> Self {
        SelectionPattern(vec![0])
    }

    /// `{|1⟩,|0⟩}`
    pub fn post_jump() -> Self {
        SelectionPattern(vec![1, 0])
    }

    /// `{|1⟩ x n, |0⟩}`
    pub fn excited_then_ground(n: usize) -> Self {
        let mut v = vec![1; n];
        v.push(0);
        SelectionPattern(v)
    }

    /// `{|0⟩ x n}`
    pub fn repeated_ground(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn states(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Last selected state, i.e. the state at lag zero.
    pub fn selected_state(&self) -> u8 {
        *self.0.last().expect("non-empty")
    }

    /// File-name friendly form, e.g. `1-0`.
    pub fn label(&self) -> String {
        self.0.iter().map(u8::to_string).collect::<Vec<_>>().join("-")
    }

    fn matches_at(&self, states: &[u8], end: usize) -> bool {
        let n = self.0.len();
        end + 1 >= n && states[end + 1 - n..=end] == self.0[..]
    }
}

impl TryFrom<Vec<u8>> for SelectionPattern {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SelectionPattern> for Vec<u8> {
    fn from(p: SelectionPattern) -> Self {
        p.0
    }
}

impl fmt::Display for SelectionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().map(u8::to_string).collect::<Vec<_>>().join(","))
    }
}

/// Accepts `1,0`, `(1,0)`, `1-0` and `10`.
impl FromStr for SelectionPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let states = body
            .chars()
            .filter(|c| !matches!(c, ',' | '-' | ' '))
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidArgument(format!("bad selection pattern {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(states)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpEvent {
    pub index: usize,
    pub direction: Direction,
}

pub fn detect_jumps(trace: &JumpTrace) -> Vec<JumpEvent> {
    trace
        .states
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| match (w[0], w[1]) {
            (0, 1) => Some(JumpEvent { index: i + 1, direction: Direction::Up }),
            (1, 0) => Some(JumpEvent { index: i + 1, direction: Direction::Down }),
            _ => None,
        })
        .collect()
}

/// `d[k] = 1` iff a down jump happened at strobe `k` (`d[0] = 0`).
pub fn down_jump_indicator(states: &[u8]) -> Vec<u8> {
    let mut d = vec![0; states.len()];
    for k in 1..states.len() {
        d[k] = u8::from(states[k - 1] == 1 && states[k] == 0);
    }
    d
}

/// Number of whole strobe steps in a time span.
pub fn lag_steps(span: f64, dt: f64) -> usize {
    (span / dt + 1e-9).floor().max(0.0) as usize
}

/// Excited-state probability averaged over pattern occurrences, vs lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedTrajectory {
    /// Lag after the selection instant, s (negative before it).
    pub lags: Vec<f64>,
    pub mean_excited: Vec<f64>,
    pub counts: Vec<u64>,
    pub stderr: Vec<f64>,
}

impl ConditionedTrajectory {
    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lags.len();
        if self.mean_excited.len() != n || self.counts.len() != n || self.stderr.len() != n {
            return Err(Error::InvalidArgument("conditioned trajectory columns differ in length".into()));
        }
        for i in 0..n {
            if self.counts[i] == 0 {
                return Err(Error::InvalidArgument(format!("zero count at lag {}", self.lags[i])));
            }
            if !(0.0..=1.0).contains(&self.mean_excited[i]) {
                return Err(Error::InvalidArgument(format!("mean {} outside [0, 1]", self.mean_excited[i])));
            }
        }
        Ok(())
    }

    /// Largest excess of the mean over `p_th` at positive lags.
    pub fn overshoot(&self, p_th: f64) -> f64 {
        self.lags
            .iter()
            .zip(&self.mean_excited)
            .filter(|(l, _)| **l > 0.0)
            .map(|(_, m)| m - p_th)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entry at lag zero, if present.
    pub fn at_zero(&self) -> Option<f64> {
        let i = self.lags.iter().position(|&l| l == 0.0)?;
        Some(self.mean_excited[i])
    }
}

/// Pooled pattern statistics for any number of 0/1 channels.
///
/// Channel 0 is conventionally the measured qubit state; further channels
/// (hidden TLS states, jump indicators) are averaged over the same matches.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionAccumulator {
    pattern: SelectionPattern,
    pre: usize,
    post: usize,
    matches: u64,
    counts: Vec<u64>,
    ones: Vec<Vec<u64>>,
    /// Number of `add` calls (one per trace).
    clusters: u64,
    /// Per-trace second moments: Σ n², and per channel Σ k·n and Σ k².
    sum_nn: Vec<u128>,
    sum_kn: Vec<Vec<u128>>,
    sum_kk: Vec<Vec<u128>>,
}

/// How per-lag standard errors are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// `sqrt(m (1 - m) / n)`, treating every match as independent.
    #[default]
    Binomial,
    /// Between-trace scatter of the pooled ratio. Overlapping matches within
    /// a trace are correlated, so this is the honest error for ensembles of
    /// independent traces; needs at least two traces.
    Clustered,
}

impl ConditionAccumulator {
    pub fn new(pattern: SelectionPattern, pre: usize, post: usize, n_channels: usize) -> Self {
        let width = pre + post + 1;
        ConditionAccumulator {
            pattern,
            pre,
            post,
            matches: 0,
            counts: vec![0; width],
            ones: vec![vec![0; width]; n_channels],
            clusters: 0,
            sum_nn: vec![0; width],
            sum_kn: vec![vec![0; width]; n_channels],
            sum_kk: vec![vec![0; width]; n_channels],
        }
    }

    pub fn matches(&self) -> u64 {
        self.matches
    }

    pub fn pattern(&self) -> &SelectionPattern {
        &self.pattern
    }

    /// Matches `pattern` on `states`; averages each of `channels`.
    pub fn add(&mut self, states: &[u8], channels: &[&[u8]]) {
        assert_eq!(channels.len(), self.ones.len(), "channel count");
        let len = states.len();
        let width = self.counts.len();
        let mut counts = vec![0u64; width];
        let mut ones = vec![vec![0u64; width]; channels.len()];
        for k in 0..len {
            if !self.pattern.matches_at(states, k) {
                continue;
            }
            self.matches += 1;
            let lo = k.saturating_sub(self.pre);
            let hi = (k + self.post).min(len - 1);
            for j in lo..=hi {
                let idx = j + self.pre - k;
                counts[idx] += 1;
                for (acc, ch) in ones.iter_mut().zip(channels) {
                    acc[idx] += u64::from(ch[j]);
                }
            }
        }
        self.clusters += 1;
        for i in 0..width {
            let n = counts[i];
            self.counts[i] += n;
            self.sum_nn[i] += u128::from(n) * u128::from(n);
            for c in 0..ones.len() {
                let k = ones[c][i];
                self.ones[c][i] += k;
                self.sum_kn[c][i] += u128::from(k) * u128::from(n);
                self.sum_kk[c][i] += u128::from(k) * u128::from(k);
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        assert_eq!(self.pattern, other.pattern);
        self.matches += other.matches;
        self.clusters += other.clusters;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.sum_nn.iter_mut().zip(&other.sum_nn) {
            *a += b;
        }
        for (mine, theirs) in [(&mut self.sum_kn, &other.sum_kn), (&mut self.sum_kk, &other.sum_kk)] {
            for (ca, cb) in mine.iter_mut().zip(theirs) {
                for (a, b) in ca.iter_mut().zip(cb) {
                    *a += b;
                }
            }
        }
        for (ca, cb) in self.ones.iter_mut().zip(&other.ones) {
            for (a, b) in ca.iter_mut().zip(cb) {
                *a += b;
            }
        }
        self
    }

    pub fn clusters(&self) -> u64 {
        self.clusters
    }

    /// One trajectory per channel; lags without data are omitted.
    pub fn finish(&self, dt: f64) -> Result<Vec<ConditionedTrajectory>> {
        self.finish_with(dt, ErrorModel::Binomial)
    }

    pub fn finish_with(&self, dt: f64, errors: ErrorModel) -> Result<Vec<ConditionedTrajectory>> {
        if self.matches == 0 {
            return Err(Error::NoMatches { pattern: self.pattern.to_string(), matches: 0 });
        }
        if errors == ErrorModel::Clustered && self.clusters < 2 {
            return Err(Error::InvalidArgument("clustered errors need at least two traces".into()));
        }
        let g = self.clusters as f64;
        Ok(self
            .ones
            .iter()
            .enumerate()
            .map(|(c, ones)| {
                let mut t = ConditionedTrajectory { lags: vec![], mean_excited: vec![], counts: vec![], stderr: vec![] };
                for (idx, (&n, &k)) in self.counts.iter().zip(ones).enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let mean = k as f64 / n as f64;
                    t.lags.push((idx as f64 - self.pre as f64) * dt);
                    t.mean_excited.push(mean);
                    t.counts.push(n);
                    let se = match errors {
                        ErrorModel::Binomial => (mean * (1.0 - mean) / n as f64).sqrt(),
                        ErrorModel::Clustered => {
                            let (kk, kn, nn) =
                                (self.sum_kk[c][idx] as f64, self.sum_kn[c][idx] as f64, self.sum_nn[idx] as f64);
                            let ss = (kk - 2.0 * mean * kn + mean * mean * nn).max(0.0);
                            (ss * g / (g - 1.0)).sqrt() / n as f64
                        }
                    };
                    t.stderr.push(se);
                }
                t
            })
            .collect())
    }
}

fn check_horizon(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon >= dt) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} s shorter than strobe interval {dt} s")));
    }
    Ok(())
}

/// Average of `states[k + m]` over every `k` at which `pattern` ends.
///
/// Matches may overlap. `include_pre` adds negative lags `states[k - m]`.
pub fn condition_average(
    trace: &JumpTrace,
    pattern: &SelectionPattern,
    horizon: f64,
    include_pre: f64,
) -> Result<ConditionedTrajectory> {
    condition_channel(trace, pattern, &trace.states, horizon, include_pre)
}

/// Like [`condition_average`] but averages an arbitrary 0/1 `channel`
/// (same length as the trace) over the matches of `pattern` on the measured states.
pub fn condition_channel(
    trace: &JumpTrace,
    pattern: &SelectionPattern,
    channel: &[u8],
    horizon: f64,
    include_pre: f64,
) -> Result<ConditionedTrajectory> {
    check_horizon(horizon, trace.dt_strobe)?;
    if channel.len() != trace.states.len() {
        return Err(Error::InvalidArgument("channel length differs from trace length".into()));
    }
    let mut acc = ConditionAccumulator::new(
        pattern.clone(),
        lag_steps(include_pre.max(0.0), trace.dt_strobe),
        lag_steps(horizon, trace.dt_strobe),
        1,
    );
    acc.add(&trace.states, &[channel]);
    Ok(acc.finish(trace.dt_strobe)?.remove(0))
}

pub(crate) fn common_dt(traces: &[JumpTrace]) -> Result<f64> {
    let dt = traces.first().map(|t| t.dt_strobe).unwrap_or(1.0);
    if traces.iter().any(|t| t.dt_strobe != dt) {
        return Err(Error::InvalidArgument("traces have different strobe intervals".into()));
    }
    Ok(dt)
}

/// Pools pattern matches over `traces` for each pattern.
pub fn batch_condition(
    traces: &[JumpTrace],
    patterns: &[SelectionPattern],
    horizon: f64,
) -> Result<BTreeMap<SelectionPattern, ConditionedTrajectory>> {
    let mut out = BTreeMap::new();
    if patterns.is_empty() {
        return Ok(out);
    }
    let dt = common_dt(traces)?;
    check_horizon(horizon, dt)?;
    let post = lag_steps(horizon, dt);
    let fresh = || -> Vec<ConditionAccumulator> {
        patterns.iter().map(|p| ConditionAccumulator::new(p.clone(), 0, post, 1)).collect()
    };
    let pooled = traces
        .par_iter()
        .fold(fresh, |mut accs, tr| {
            for acc in &mut accs {
                acc.add(&tr.states, &[&tr.states]);
            }
            accs
        })
        .reduce(fresh, |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect());
    for acc in pooled {
        let traj = acc.finish(dt)?.remove(0);
        out.insert(acc.pattern.clone(), traj);
    }
    Ok(out)
}

/// Down-jump correlation function vs lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub lags: Vec<f64>,
    pub g2: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Number of (down jump, lag) pairs contributing to each lag.
    pub pairs: Vec<u64>,
    /// Unconditional per-strobe down-jump probability.
    pub p_down: f64,
}

/// Pooled down-jump pair counts.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Accumulator {
    max_steps: usize,
    hits: Vec<u64>,
    pairs: Vec<u64>,
    downs: u64,
    transitions: u64,
}

impl G2Accumulator {
    pub fn new(max_steps: usize) -> Self {
        G2Accumulator { max_steps, hits: vec![0; max_steps + 1], pairs: vec![0; max_steps + 1], downs: 0, transitions: 0 }
    }

    pub fn add(&mut self, states: &[u8]) {
        if states.len() < 2 {
            return;
        }
        let d = down_jump_indicator(states);
        let last = states.len() - 1;
        self.transitions += last as u64;
        for j in (1..=last).filter(|&j| d[j] == 1) {
            self.downs += 1;
            for m in 1..=self.max_steps.min(last - j) {
                self.pairs[m] += 1;
                self.hits[m] += u64::from(d[j + m]);
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.downs += other.downs;
        self.transitions += other.transitions;
        for m in 0..=self.max_steps {
            self.hits[m] += other.hits[m];
            self.pairs[m] += other.pairs[m];
        }
        self
    }

    pub fn down_jumps(&self) -> u64 {
        self.downs
    }

    pub fn finish(&self, dt: f64) -> Result<G2Curve> {
        if self.downs == 0 {
            return Err(Error::NoDecayEvents);
        }
        if self.downs < 2 {
            return Err(Error::TooFewJumps { needed: 2, found: self.downs as usize });
        }
        let p_down = self.downs as f64 / self.transitions as f64;
        let mut c = G2Curve { lags: vec![], g2: vec![], stderr: vec![], pairs: vec![], p_down };
        for m in 1..=self.max_steps {
            let n = self.pairs[m];
            if n == 0 {
                continue;
            }
            let f = self.hits[m] as f64 / n as f64;
            c.lags.push(m as f64 * dt);
            c.g2.push(f / p_down);
            c.stderr.push((f * (1.0 - f) / n as f64).sqrt() / p_down);
            c.pairs.push(n);
        }
        Ok(c)
    }
}

/// Edge-truncated g₂ estimator on the strobe grid, lags `dt ..= max_lag`.
pub fn g2_estimate(trace: &JumpTrace, max_lag: f64) -> Result<G2Curve> {
    let duration = trace.duration();
    if max_lag > duration + 1e-9 * trace.dt_strobe {
        return Err(Error::InvalidArgument(format!("max_lag {max_lag} s exceeds trace duration {duration} s")));
    }
    let mut acc = G2Accumulator::new(lag_steps(max_lag, trace.dt_strobe));
    acc.add(&trace.states);
    acc.finish(trace.dt_strobe)
}

/// g₂ pooled over several traces sharing a strobe interval.
pub fn g2_estimate_pooled(traces: &[JumpTrace], max_lag: f64) -> Result<G2Curve> {
    let dt = common_dt(traces)?;
    let steps = lag_steps(max_lag, dt);
    traces
        .par_iter()
        .fold(|| G2Accumulator::new(steps), |mut a, t| {
            a.add(&t.states);
            a
        })
        .reduce(|| G2Accumulator::new(steps), G2Accumulator::merge)
        .finish(dt)
}
