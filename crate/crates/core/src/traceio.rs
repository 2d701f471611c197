//! File formats and IQ-to-state discrimination.
//!
//! | file            | layout                                                   |
//! |-----------------|----------------------------------------------------------|
//! | trace           | CSV `index,state[,tls_0,…]` + sidecar JSON               |
//! | IQ points       | CSV `index,i,q` + sidecar JSON                           |
//! | sidecar         | `{dt_strobe_s, f_q_hz, field_v_per_m, source, seed}`     |
//! | curve           | CSV `lag_s,mean,stderr,count` (conditioned averages, g₂) |
//!
//! The sidecar of `foo.csv` is `foo.json`. Reals are written in their
//! shortest round-trip decimal form, so every write→read cycle is lossless.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::conditioning::{ConditionedTrajectory, G2Curve};
use crate::error::{Error, Result};
use crate::jumpsim::{JumpTrace, Source, TraceMeta};

/// Raw single-shot readout points, one per strobe.
#[derive(Debug, Clone, PartialEq)]
pub struct IqDataset {
    pub points: Vec<Complex64>,
    pub dt_strobe: f64,
    pub meta: TraceMeta,
}

impl IqDataset {
    pub fn new(points: Vec<Complex64>, dt_strobe: f64, meta: TraceMeta) -> Result<Self> {
        let d = IqDataset { points, dt_strobe, meta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("empty IQ dataset".into()));
        }
        if !(self.dt_strobe > 0.0 && self.dt_strobe.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_strobe = {} must be > 0", self.dt_strobe)));
        }
        if self.points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite IQ point".into()));
        }
        Ok(())
    }
}

/// Which mixture component is taken to be the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundChoice {
    /// The more populated cluster (thermal populations below one half).
    #[default]
    MorePopulated,
    LessPopulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscriminatorOptions {
    #[serde(default)]
    pub ground: GroundChoice,
}

/// Two isotropic Gaussian clusters and a threshold on the axis joining them.
///
/// Points are projected onto the unit vector from `center_g` to `center_e`,
/// measured from `center_g`; the projection of `center_e` is the center
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationModel {
    pub center_g: Complex64,
    pub center_e: Complex64,
    pub threshold: f64,
    pub sigma_g: f64,
    pub sigma_e: f64,
    pub fidelity_estimate: f64,
}

impl DiscriminationModel {
    pub fn separation(&self) -> f64 {
        (self.center_e - self.center_g).norm()
    }

    pub fn project(&self, z: Complex64) -> f64 {
        let axis = self.center_e - self.center_g;
        ((z - self.center_g) * axis.conj()).re / axis.norm()
    }

    /// 1 when the projection lies strictly beyond the threshold; ties go to ground.
    pub fn classify(&self, z: Complex64) -> u8 {
        u8::from(self.project(z) > self.threshold)
    }

    /// Probabilities of calling a ground point excited and an excited point ground.
    pub fn error_rates(&self) -> (f64, f64) {
        let d = self.separation();
        let miss = |x: f64, s: f64| if s > 0.0 { phi(-x / s) } else { 0.0 };
        (miss(self.threshold, self.sigma_g), miss(d - self.threshold, self.sigma_e))
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.separation();
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument("discriminator centers coincide".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < d) {
            return Err(Error::InvalidArgument(format!(
                "threshold {} outside (0, {d}) between the centers",
                self.threshold
            )));
        }
        Ok(())
    }
}

const EM_MAX_ITER: usize = 100;
const EM_TOL: f64 = 1e-8;

fn dist2(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm_sqr()
}

fn farthest_from(points: &[Complex64], from: Complex64) -> Complex64 {
    let mut best = points[0];
    let mut best_d = -1.0;
    for &p in points {
        let d = dist2(p, from);
        if d > best_d {
            best_d = d;
            best = p;
        }
    }
    best
}

struct Mixture {
    weight: [f64; 2],
    mean: [Complex64; 2],
    /// Variance per quadrature.
    var: [f64; 2],
}

fn two_means(points: &[Complex64]) -> Mixture {
    // Farthest pair, approximated by two farthest-point sweeps.
    let a = farthest_from(points, points[0]);
    let b = farthest_from(points, a);
    let mut mean = [a, b];
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..EM_MAX_ITER {
        let mut changed = false;
        for (l, &p) in labels.iter_mut().zip(points) {
            let k = usize::from(dist2(p, mean[1]) < dist2(p, mean[0]));
            if *l != k {
                *l = k;
                changed = true;
            }
        }
        let mut sum = [Complex64::new(0.0, 0.0); 2];
        let mut n = [0usize; 2];
        for (&l, &p) in labels.iter().zip(points) {
            sum[l] += p;
            n[l] += 1;
        }
        for k in 0..2 {
            if n[k] > 0 {
                mean[k] = sum[k] / n[k] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut ss = [0.0; 2];
    let mut n = [0usize; 2];
    for (&l, &p) in labels.iter().zip(points) {
        ss[l] += dist2(p, mean[l]);
        n[l] += 1;
    }
    let total = points.len() as f64;
    Mixture {
        weight: [n[0] as f64 / total, n[1] as f64 / total],
        mean,
        var: [ss[0] / (2.0 * n[0].max(1) as f64), ss[1] / (2.0 * n[1].max(1) as f64)],
    }
}

fn log_density(z: Complex64, mean: Complex64, var: f64) -> f64 {
    -dist2(z, mean) / (2.0 * var) - (2.0 * std::f64::consts::PI * var).ln()
}

fn em_refine(points: &[Complex64], mut mix: Mixture) -> Mixture {
    let n = points.len() as f64;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut resp = vec![0.0; points.len()];
    for _ in 0..EM_MAX_ITER {
        let mut ll = 0.0;
        for (r, &p) in resp.iter_mut().zip(points) {
            let l0 = mix.weight[0].ln() + log_density(p, mix.mean[0], mix.var[0]);
            let l1 = mix.weight[1].ln() + log_density(p, mix.mean[1], mix.var[1]);
            let m = l0.max(l1);
            let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
            *r = (l1 - lse).exp();
            ll += lse;
        }
        let w1: f64 = resp.iter().sum();
        let w0 = n - w1;
        if w0 <= 1.0 || w1 <= 1.0 || !ll.is_finite() {
            break;
        }
        let mut s = [Complex64::new(0.0, 0.0); 2];
        for (&r, &p) in resp.iter().zip(points) {
            s[0] += p * (1.0 - r);
            s[1] += p * r;
        }
        let mean = [s[0] / w0, s[1] / w1];
        let mut ss = [0.0; 2];
        for (&r, &p) in resp.iter().zip(points) {
            ss[0] += (1.0 - r) * dist2(p, mean[0]);
            ss[1] += r * dist2(p, mean[1]);
        }
        let var = [ss[0] / (2.0 * w0), ss[1] / (2.0 * w1)];
        if !(var[0] > 0.0 && var[1] > 0.0) {
            break;
        }
        mix = Mixture { weight: [w0 / n, w1 / n], mean, var };
        if (ll - prev_ll).abs() <= EM_TOL * ll.abs().max(1.0) {
            break;
        }
        prev_ll = ll;
    }
    mix
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Equal-posterior point of the projected 1-D mixture, by bisection on (0, d).
fn equal_posterior(d: f64, w: [f64; 2], s: [f64; 2]) -> f64 {
    let mid = 0.5 * d;
    if !(s[0] > 0.0 && s[1] > 0.0) {
        return mid;
    }
    let f = |x: f64| {
        (w[0].ln() - s[0].ln() - x * x / (2.0 * s[0] * s[0]))
            - (w[1].ln() - s[1].ln() - (x - d) * (x - d) / (2.0 * s[1] * s[1]))
    };
    let (mut lo, mut hi) = (0.0, d);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return mid;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            break;
        }
        if f(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    let t = 0.5 * (lo + hi);
    if t > 0.0 && t < d {
        t
    } else {
        mid
    }
}

pub fn fit_discriminator(data: &IqDataset) -> Result<DiscriminationModel> {
    fit_discriminator_with(data, DiscriminatorOptions::default())
}

/// Two-means seeding followed by EM on an isotropic two-component mixture.
pub fn fit_discriminator_with(data: &IqDataset, opts: DiscriminatorOptions) -> Result<DiscriminationModel> {
    data.validate()?;
    if data.points.len() < 100 {
        return Err(Error::TooFewPoints { needed: 100, found: data.points.len() });
    }
    let points = &data.points;
    let mut mix = two_means(points);
    let d0 = (mix.mean[0] - mix.mean[1]).norm();
    if d0 == 0.0 {
        return Err(Error::InsufficientSeparation { distance: 0.0, sigma: 0.0 });
    }
    // Exactly separated clusters (zero spread) are already final.
    if mix.var[0] > 0.0 || mix.var[1] > 0.0 {
        let floor = (1e-12 * d0).powi(2);
        mix.var = [mix.var[0].max(floor), mix.var[1].max(floor)];
        mix = em_refine(points, mix);
    }
    let (g, e) = match (opts.ground, mix.weight[0] >= mix.weight[1]) {
        (GroundChoice::MorePopulated, true) | (GroundChoice::LessPopulated, false) => (0, 1),
        _ => (1, 0),
    };
    let distance = (mix.mean[e] - mix.mean[g]).norm();
    let pooled = (mix.weight[0] * mix.var[0] + mix.weight[1] * mix.var[1]).sqrt();
    if !(distance >= pooled) || distance == 0.0 {
        return Err(Error::InsufficientSeparation { distance, sigma: pooled });
    }
    let s = [mix.var[g].sqrt(), mix.var[e].sqrt()];
    let threshold = equal_posterior(distance, [mix.weight[g], mix.weight[e]], s);
    let miss_g = if s[0] > 0.0 { phi(-threshold / s[0]) } else { 0.0 };
    let miss_e = if s[1] > 0.0 { phi(-(distance - threshold) / s[1]) } else { 0.0 };
    Ok(DiscriminationModel {
        center_g: mix.mean[g],
        center_e: mix.mean[e],
        threshold,
        sigma_g: s[0],
        sigma_e: s[1],
        fidelity_estimate: 1.0 - 0.5 * (miss_g + miss_e),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscriminateOptions {
    /// Replace every interior state by the majority of itself and its two
    /// neighbours. Removes isolated misassignments but biases g₂ at the
    /// shortest lags.
    #[serde(default)]
    pub majority_filter: bool,
}

pub fn discriminate(data: &IqDataset, model: &DiscriminationModel) -> JumpTrace {
    discriminate_with(data, model, DiscriminateOptions::default())
}

pub fn discriminate_with(data: &IqDataset, model: &DiscriminationModel, opts: DiscriminateOptions) -> JumpTrace {
    let mut states: Vec<u8> = data.points.iter().map(|&z| model.classify(z)).collect();
    if opts.majority_filter {
        states = majority_filter(&states);
    }
    JumpTrace { states, hidden_tls: None, dt_strobe: data.dt_strobe, meta: data.meta.clone() }
}

pub fn majority_filter(states: &[u8]) -> Vec<u8> {
    let mut out = states.to_vec();
    for k in 1..states.len().saturating_sub(1) {
        out[k] = u8::from(states[k - 1] + states[k] + states[k + 1] >= 2);
    }
    out
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Sidecar metadata stored next to trace and IQ files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dt_strobe_s: f64,
    #[serde(default)]
    pub f_q_hz: Option<f64>,
    #[serde(default)]
    pub field_v_per_m: Option<f64>,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Sidecar {
    pub fn new(dt_strobe: f64, meta: &TraceMeta) -> Self {
        Sidecar {
            dt_strobe_s: dt_strobe,
            f_q_hz: meta.f_q_hz,
            field_v_per_m: meta.field_v_per_m,
            source: meta.source,
            seed: meta.seed,
        }
    }

    pub fn meta(&self) -> TraceMeta {
        TraceMeta { f_q_hz: self.f_q_hz, field_v_per_m: self.field_v_per_m, source: self.source, seed: self.seed }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.into(), source: e })?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn finish_writer(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a CSV file after checking the header; yields `(line, record)`.
fn csv_rows(
    path: &Path,
    expect: &dyn Fn(&csv::StringRecord) -> bool,
    want: &str,
) -> Result<(csv::StringRecord, Vec<(u64, csv::StringRecord)>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(f);
    let mut rows = Vec::new();
    let mut header = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if header.is_none() {
            if !expect(&rec) {
                return Err(Error::parse(path, line, format!("expected header `{want}`")));
            }
            header = Some(rec);
            continue;
        }
        rows.push((line, rec));
    }
    let header = header.ok_or_else(|| Error::parse(path, 1, format!("missing header `{want}`")))?;
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let s = rec.get(i).ok_or_else(|| Error::parse(path, line, format!("missing column `{name}`")))?;
    s.parse().map_err(|_| Error::parse(path, line, format!("bad {name} value `{s}`")))
}

fn check_width(path: &Path, line: u64, rec: &csv::StringRecord, n: usize) -> Result<()> {
    if rec.len() != n {
        return Err(Error::parse(path, line, format!("expected {n} columns, found {}", rec.len())));
    }
    Ok(())
}

fn check_index(path: &Path, line: u64, rec: &csv::StringRecord, expected: usize) -> Result<()> {
    let idx: usize = field(path, line, rec, 0, "index")?;
    if idx != expected {
        return Err(Error::parse(path, line, format!("index {idx} out of sequence, expected {expected}")));
    }
    Ok(())
}

fn bit(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<u8> {
    let v: u8 = field(path, line, rec, i, name)?;
    if v > 1 {
        return Err(Error::parse(path, line, format!("{name} must be 0 or 1, got {v}")));
    }
    Ok(v)
}

/// Writes the trace CSV and its sidecar.
pub fn write_trace(path: &Path, trace: &JumpTrace) -> Result<()> {
    trace.validate()?;
    let hidden = trace.hidden_tls.as_deref().unwrap_or(&[]);
    let mut w = csv_writer(path)?;
    let mut header = vec!["index".to_string(), "state".to_string()];
    header.extend((0..hidden.len()).map(|i| format!("tls_{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for (k, &s) in trace.states.iter().enumerate() {
        row.clear();
        row.push(k.to_string());
        row.push(s.to_string());
        row.extend(hidden.iter().map(|h| h[k].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish_writer(path, w)?;
    write_json(&sidecar_path(path), &Sidecar::new(trace.dt_strobe, &trace.meta))
}

pub fn read_trace(path: &Path) -> Result<JumpTrace> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let header_ok = |h: &csv::StringRecord| {
        h.len() >= 2
            && &h[0] == "index"
            && &h[1] == "state"
            && (2..h.len()).all(|i| h[i] == format!("tls_{}", i - 2))
    };
    let (header, rows) = csv_rows(path, &header_ok, "index,state[,tls_0,...]")?;
    let width = header.len();
    let n_tls = width - 2;
    let mut states = Vec::with_capacity(rows.len());
    let mut hidden = vec![Vec::with_capacity(rows.len()); n_tls];
    for (k, (line, rec)) in rows.iter().enumerate() {
        check_width(path, *line, rec, width)?;
        check_index(path, *line, rec, k)?;
        states.push(bit(path, *line, rec, 1, "state")?);
        for (i, h) in hidden.iter_mut().enumerate() {
            h.push(bit(path, *line, rec, 2 + i, "tls state")?);
        }
    }
    if states.is_empty() {
        return Err(Error::parse(path, 2, "trace has no rows"));
    }
    let trace = JumpTrace {
        states,
        hidden_tls: (n_tls > 0).then_some(hidden),
        dt_strobe: side.dt_strobe_s,
        meta: side.meta(),
    };
    trace.validate()?;
    Ok(trace)
}

pub fn write_iq(path: &Path, data: &IqDataset) -> Result<()> {
    data.validate()?;
    let mut w = csv_writer(path)?;
    w.write_record(["index", "i", "q"]).map_err(|e| csv_err(path, e))?;
    for (k, p) in data.points.iter().enumerate() {
        w.write_record([k.to_string(), fmt_real(p.re), fmt_real(p.im)]).map_err(|e| csv_err(path, e))?;
    }
    finish_writer(path, w)?;
    write_json(&sidecar_path(path), &Sidecar::new(data.dt_strobe, &data.meta))
}

pub fn read_iq(path: &Path) -> Result<IqDataset> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let (_, rows) = csv_rows(path, &|h| h.iter().eq(["index", "i", "q"]), "index,i,q")?;
    let mut points = Vec::with_capacity(rows.len());
    for (k, (line, rec)) in rows.iter().enumerate() {
        check_width(path, *line, rec, 3)?;
        check_index(path, *line, rec, k)?;
        let i: f64 = field(path, *line, rec, 1, "i")?;
        let q: f64 = field(path, *line, rec, 2, "q")?;
        if !i.is_finite() || !q.is_finite() {
            return Err(Error::parse(path, *line, "non-finite IQ value"));
        }
        points.push(Complex64::new(i, q));
    }
    if points.is_empty() {
        return Err(Error::parse(path, 2, "IQ file has no rows"));
    }
    IqDataset::new(points, side.dt_strobe_s, side.meta())
}

/// True when `path` holds IQ points rather than states.
pub fn is_iq_file(path: &Path) -> Result<bool> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(f);
    match rdr.records().next() {
        Some(r) => {
            let r = r.map_err(|e| csv_err(path, e))?;
            Ok(r.len() == 3 && &r[1] == "i" && &r[2] == "q")
        }
        None => Err(Error::parse(path, 1, "empty file")),
    }
}

const CURVE_HEADER: [&str; 4] = ["lag_s", "mean", "stderr", "count"];

fn write_curve_rows(path: &Path, rows: impl Iterator<Item = (f64, f64, f64, u64)>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CURVE_HEADER).map_err(|e| csv_err(path, e))?;
    for (lag, m, s, c) in rows {
        w.write_record([fmt_real(lag), fmt_real(m), fmt_real(s), c.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    finish_writer(path, w)
}

fn read_curve_rows(path: &Path) -> Result<Vec<(f64, f64, f64, u64)>> {
    let (_, rows) = csv_rows(path, &|h| h.iter().eq(CURVE_HEADER), "lag_s,mean,stderr,count")?;
    let mut out = Vec::with_capacity(rows.len());
    let mut prev = f64::NEG_INFINITY;
    for (line, rec) in &rows {
        check_width(path, *line, rec, 4)?;
        let lag: f64 = field(path, *line, rec, 0, "lag_s")?;
        let m: f64 = field(path, *line, rec, 1, "mean")?;
        let s: f64 = field(path, *line, rec, 2, "stderr")?;
        let c: u64 = field(path, *line, rec, 3, "count")?;
        if !(lag.is_finite() && m.is_finite() && s.is_finite() && s >= 0.0) {
            return Err(Error::parse(path, *line, "non-finite or negative value"));
        }
        if lag <= prev {
            return Err(Error::parse(path, *line, "lags must be strictly increasing"));
        }
        prev = lag;
        out.push((lag, m, s, c));
    }
    if out.is_empty() {
        return Err(Error::parse(path, 2, "curve has no rows"));
    }
    Ok(out)
}

pub fn write_trajectory(path: &Path, traj: &ConditionedTrajectory) -> Result<()> {
    traj.validate()?;
    write_curve_rows(
        path,
        (0..traj.len()).map(|i| (traj.lags[i], traj.mean_excited[i], traj.stderr[i], traj.counts[i])),
    )
}

pub fn read_trajectory(path: &Path) -> Result<ConditionedTrajectory> {
    let rows = read_curve_rows(path)?;
    let traj = ConditionedTrajectory {
        lags: rows.iter().map(|r| r.0).collect(),
        mean_excited: rows.iter().map(|r| r.1).collect(),
        stderr: rows.iter().map(|r| r.2).collect(),
        counts: rows.iter().map(|r| r.3).collect(),
    };
    traj.validate().map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(traj)
}

/// g₂ curve in the curve layout: `mean` holds g₂ and `count` the pair count.
/// The unconditional down-jump probability goes to the sidecar.
pub fn write_g2(path: &Path, curve: &G2Curve) -> Result<()> {
    write_curve_rows(path, (0..curve.lags.len()).map(|i| (curve.lags[i], curve.g2[i], curve.stderr[i], curve.pairs[i])))?;
    write_json(&sidecar_path(path), &serde_json::json!({ "p_down": curve.p_down }))
}

pub fn read_g2(path: &Path) -> Result<G2Curve> {
    let rows = read_curve_rows(path)?;
    let side: serde_json::Value = read_json(&sidecar_path(path))?;
    let p_down = side
        .get("p_down")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::parse(sidecar_path(path), 1, "missing p_down"))?;
    Ok(G2Curve {
        lags: rows.iter().map(|r| r.0).collect(),
        g2: rows.iter().map(|r| r.1).collect(),
        stderr: rows.iter().map(|r| r.2).collect(),
        pairs: rows.iter().map(|r| r.3).collect(),
        p_down,
    })
}
