//! Frequency/field sweeps: per-point fits, peak detection and track linking.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::ConditionedTrajectory;
use crate::error::{Error, Result};
use crate::fitting::{fit_solomon, FitResult, FitSpec};
use crate::traceio::fmt_real;

/// Conditioned data for one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepInput {
    pub f_q_hz: f64,
    pub field_v_per_m: f64,
    pub ground: ConditionedTrajectory,
    pub post_jump: ConditionedTrajectory,
    pub n_strobes: u64,
    pub n_down_jumps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub f_q_hz: f64,
    pub field_v_per_m: f64,
    pub fit: Option<FitResult>,
    /// Why the fit failed, when it did.
    pub error: Option<String>,
    pub n_strobes: u64,
    pub n_down_jumps: u64,
}

impl SweepPoint {
    pub fn failed(&self) -> bool {
        !self.fit.as_ref().is_some_and(|f| f.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyMap {
    /// Sorted by field, then frequency.
    pub points: Vec<SweepPoint>,
    pub f_axis: Vec<f64>,
    pub field_axis: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Sum of the fitted qubit–TLS couplings.
    GammaQt,
    GammaQ,
}

impl Channel {
    pub fn value(self, fit: &FitResult) -> f64 {
        match self {
            Channel::GammaQt => fit.rates.gamma_qt.iter().sum(),
            Channel::GammaQ => fit.rates.gamma_q,
        }
    }

    pub fn stderr(self, fit: &FitResult) -> f64 {
        match self {
            Channel::GammaQt => fit.stderr.gamma_qt.iter().map(|s| s * s).sum::<f64>().sqrt(),
            Channel::GammaQ => fit.stderr.gamma_q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsPeak {
    pub field: f64,
    pub channel: Channel,
    pub f_center: f64,
    pub fwhm: f64,
    /// Channel value at the peak, 1/s.
    pub height: f64,
    /// Summed fitted Γqt at the peak, 1/s.
    pub gamma_qt_max: f64,
    pub prominence: f64,
    pub track_id: Option<String>,
}

fn cmp_cells(a: (f64, f64), b: (f64, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0))
}

/// Fits every point independently. Failed fits stay in the map, flagged.
pub fn run_sweep(inputs: &[SweepInput], spec: &FitSpec) -> Result<SpectroscopyMap> {
    spec.validate()?;
    let mut seen = BTreeSet::new();
    for p in inputs {
        if !seen.insert((p.f_q_hz.to_bits(), p.field_v_per_m.to_bits())) {
            return Err(Error::DuplicateCell { f_q: p.f_q_hz, field: p.field_v_per_m });
        }
    }
    let mut points: Vec<SweepPoint> = inputs
        .par_iter()
        .map(|p| {
            let (fit, error) = match fit_solomon(&p.ground, &p.post_jump, spec) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepPoint {
                f_q_hz: p.f_q_hz,
                field_v_per_m: p.field_v_per_m,
                fit,
                error,
                n_strobes: p.n_strobes,
                n_down_jumps: p.n_down_jumps,
            }
        })
        .collect();
    points.sort_by(|a, b| cmp_cells((a.f_q_hz, a.field_v_per_m), (b.f_q_hz, b.field_v_per_m)));
    Ok(SpectroscopyMap {
        f_axis: unique_sorted(points.iter().map(|p| p.f_q_hz)),
        field_axis: unique_sorted(points.iter().map(|p| p.field_v_per_m)),
        points,
    })
}

fn unique_sorted(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    median(&v.iter().map(|x| (x - m).abs()).collect::<Vec<_>>())
}

/// Median of a channel over the converged fits of the whole map.
pub fn channel_median(map: &SpectroscopyMap, channel: Channel) -> f64 {
    let v: Vec<f64> = map.points.iter().filter_map(|p| p.fit.as_ref()).map(|f| channel.value(f)).collect();
    median(&v)
}

/// Peak candidates of a sampled curve: `(index, prominence)`.
///
/// A plateau counts once, at its middle sample; the end samples are never peaks.
pub fn find_peaks(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let p = (i + j) / 2;
                out.push((p, prominence(y, p)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn prominence(y: &[f64], p: usize) -> f64 {
    let h = y[p];
    let mut left = h;
    for k in (0..p).rev() {
        if y[k] > h {
            break;
        }
        left = left.min(y[k]);
    }
    let mut right = h;
    for &v in &y[p + 1..] {
        if v > h {
            break;
        }
        right = right.min(v);
    }
    h - left.max(right)
}

/// Width at `y[p] - prom/2`, linearly interpolated on the abscissa `x`.
fn half_width(x: &[f64], y: &[f64], p: usize, prom: f64) -> f64 {
    let h = y[p] - 0.5 * prom;
    let cross = |a: usize, b: usize| x[a] + (h - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    let mut l = x[0];
    for k in (0..p).rev() {
        if y[k] < h {
            l = cross(k, k + 1);
            break;
        }
    }
    let mut r = x[x.len() - 1];
    for k in p + 1..y.len() {
        if y[k] < h {
            r = cross(k - 1, k);
            break;
        }
    }
    r - l
}

/// Prominence-based peaks of one channel along frequency at a fixed field.
///
/// A peak needs prominence of at least `max(3·MAD, 3·median stderr)` of the
/// channel. Points whose fit failed are skipped.
pub fn detect_peaks(map: &SpectroscopyMap, field: f64, channel: Channel) -> Result<Vec<TlsPeak>> {
    let pts: Vec<(&SweepPoint, &FitResult)> = map
        .points
        .iter()
        .filter(|p| p.field_v_per_m == field && !p.failed())
        .map(|p| (p, p.fit.as_ref().expect("not failed")))
        .collect();
    if pts.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, found: pts.len() });
    }
    let x: Vec<f64> = pts.iter().map(|(p, _)| p.f_q_hz).collect();
    let y: Vec<f64> = pts.iter().map(|(_, f)| channel.value(f)).collect();
    let se: Vec<f64> = pts.iter().map(|(_, f)| channel.stderr(f)).filter(|s| s.is_finite()).collect();
    let threshold = (3.0 * mad(&y)).max(if se.is_empty() { 0.0 } else { 3.0 * median(&se) });
    Ok(find_peaks(&y)
        .into_iter()
        .filter(|&(_, prom)| prom >= threshold && prom > 0.0)
        .map(|(i, prom)| TlsPeak {
            field,
            channel,
            f_center: x[i],
            fwhm: half_width(&x, &y, i, prom),
            height: y[i],
            gamma_qt_max: Channel::GammaQt.value(pts[i].1),
            prominence: prom,
            track_id: None,
        })
        .filter(|p| p.fwhm > 0.0)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkOptions {
    /// Gate as a multiple of the median peak FWHM.
    pub gate_fwhm: f64,
    /// Number of consecutive field values a track may skip.
    pub max_gap: usize,
}

impl Default for LinkOptions {
    fn default() -> Self {
        LinkOptions { gate_fwhm: 2.0, max_gap: 0 }
    }
}

/// Track label: A … Z, AA, AB, …
pub fn track_label(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Greedy nearest-neighbour linking of peaks across neighbouring field values.
///
/// Returns all peaks, sorted by field then frequency, with track labels.
pub fn link_tracks(peaks: &[TlsPeak], opts: LinkOptions) -> Vec<TlsPeak> {
    let mut all: Vec<TlsPeak> = peaks.to_vec();
    all.sort_by(|a, b| cmp_cells((a.f_center, a.field), (b.f_center, b.field)));
    let fields = unique_sorted(all.iter().map(|p| p.field));
    let gate = opts.gate_fwhm * median(&all.iter().map(|p| p.fwhm).collect::<Vec<_>>());

    // Per track: (label index, last field index, last frequency).
    let mut tracks: Vec<(usize, usize, f64)> = Vec::new();
    let mut next_label = 0;
    let mut start = 0;
    for (fi, &field) in fields.iter().enumerate() {
        let end = start + all[start..].iter().take_while(|p| p.field == field).count();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, &(_, last, f)) in tracks.iter().enumerate() {
            if fi - last > 1 + opts.max_gap || last == fi {
                continue;
            }
            for pi in start..end {
                let d = (all[pi].f_center - f).abs();
                if d <= gate {
                    pairs.push((d, ti, pi));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_t = vec![false; tracks.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; end - start];
        for (_, ti, pi) in pairs {
            if !used_t[ti] && assigned[pi - start].is_none() {
                used_t[ti] = true;
                assigned[pi - start] = Some(ti);
            }
        }
        for pi in start..end {
            let ti = match assigned[pi - start] {
                Some(ti) => ti,
                None => {
                    tracks.push((next_label, fi, all[pi].f_center));
                    next_label += 1;
                    tracks.len() - 1
                }
            };
            tracks[ti].1 = fi;
            tracks[ti].2 = all[pi].f_center;
            all[pi].track_id = Some(track_label(tracks[ti].0));
        }
        start = end;
    }
    all
}

/// Map CSV: `f_q_hz,field_v_per_m,gamma_q,gamma_qt_1,…,gamma_t,p_th,chi2,converged`.
/// Failed points keep their coordinates with empty fit columns.
pub fn write_map_csv(path: &Path, map: &SpectroscopyMap) -> Result<()> {
    let n_tls = map.points.iter().filter_map(|p| p.fit.as_ref()).map(|f| f.rates.n_tls()).max().unwrap_or(0);
    let mut out = String::from("f_q_hz,field_v_per_m,gamma_q,");
    for i in 1..=n_tls {
        out.push_str(&format!("gamma_qt_{i},"));
    }
    out.push_str("gamma_t,p_th,chi2,converged\n");
    for p in &map.points {
        let mut row = vec![fmt_real(p.f_q_hz), fmt_real(p.field_v_per_m)];
        match &p.fit {
            Some(f) => {
                row.push(fmt_real(f.rates.gamma_q));
                for i in 0..n_tls {
                    row.push(f.rates.gamma_qt.get(i).map_or(String::new(), |v| fmt_real(*v)));
                }
                row.extend([fmt_real(f.rates.gamma_t), fmt_real(f.rates.p_th), fmt_real(f.chi2)]);
                row.push(f.converged.to_string());
            }
            None => {
                row.extend(std::iter::repeat_n(String::new(), n_tls + 4));
                row.push("false".into());
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::Io { path: path.into(), source: e })
}
