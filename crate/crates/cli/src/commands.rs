use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tlsjump::conditioning::{
    detect_jumps, g2_estimate_pooled, lag_steps, ConditionAccumulator, ConditionedTrajectory, Direction,
    SelectionPattern,
};
use tlsjump::fitting::{compare_models, fit_solomon};
use tlsjump::jumpsim::{derive_seed, simulate_trace, synthesize_iq, JumpTrace};
use tlsjump::spectroscopy::{detect_peaks, link_tracks, run_sweep, write_map_csv, Channel, SweepInput, TlsPeak};
use tlsjump::traceio::{
    self, discriminate_with, fit_discriminator_with, is_iq_file, read_iq, read_trace, read_trajectory, write_g2,
    write_iq, write_json, write_trace, write_trajectory, DiscriminateOptions, DiscriminationModel, IqDataset,
};
use tlsjump::Error;

use crate::config::{AnalyzeConfig, Discrimination, FitConfig, Format, ManifestEntry, SimulateConfig, SweepConfig};

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn index_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(4)
}

pub fn simulate(cfg: &SimulateConfig, out: &Path) -> Result<()> {
    cfg.sim.validate()?;
    if cfg.n_traces == 0 {
        bail!(Error::InvalidArgument("n_traces must be >= 1".into()));
    }
    create_dir(&out.join("traces"))?;
    if cfg.sim.readout.is_some() {
        create_dir(&out.join("iq"))?;
    }
    let width = index_width(cfg.n_traces);
    (0..cfg.n_traces).into_par_iter().try_for_each(|i| -> Result<()> {
        let sim = cfg.sim.for_trace(i as u64);
        let mut trace = simulate_trace(&sim)?;
        trace.meta.f_q_hz = cfg.f_q_hz;
        trace.meta.field_v_per_m = cfg.field_v_per_m;
        write_trace(&out.join("traces").join(format!("trace_{i:0width$}.csv")), &trace)?;
        if let Some(model) = &cfg.sim.readout {
            let points = synthesize_iq(&trace, model, derive_seed(sim.seed, 1))?;
            let iq = IqDataset::new(points, trace.dt_strobe, trace.meta.clone())?;
            write_iq(&out.join("iq").join(format!("iq_{i:0width$}.csv")), &iq)?;
        }
        Ok(())
    })?;
    crate::config::write_resolved(out, cfg)
}

enum Input {
    Trace(JumpTrace),
    Iq(IqDataset),
}

fn read_input(path: &Path) -> Result<Input> {
    Ok(if is_iq_file(path)? { Input::Iq(read_iq(path)?) } else { Input::Trace(read_trace(path)?) })
}

/// Data files of an input path: the file itself, or the sorted CSV files of a directory.
fn expand(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading {}", path.display()))?;
    files.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    files.sort();
    if files.is_empty() {
        bail!(Error::InvalidArgument(format!("no CSV files in {}", path.display())));
    }
    Ok(files)
}

/// Reads traces, discriminating IQ inputs with one discriminator fitted on
/// the pooled IQ points.
fn load_traces(paths: &[PathBuf], disc: &Discrimination) -> Result<(Vec<JumpTrace>, Option<DiscriminationModel>)> {
    let files: Vec<PathBuf> = paths.iter().map(|p| expand(p)).collect::<Result<Vec<_>>>()?.concat();
    if files.is_empty() {
        bail!(Error::InvalidArgument("no input files".into()));
    }
    let inputs: Vec<Input> = files.par_iter().map(|p| read_input(p)).collect::<Result<_>>()?;
    let iq: Vec<&IqDataset> = inputs.iter().filter_map(|i| if let Input::Iq(d) = i { Some(d) } else { None }).collect();
    let model = match iq.first() {
        None => None,
        Some(first) => {
            let points: Vec<_> = iq.iter().flat_map(|d| d.points.iter().copied()).take(disc.max_fit_points).collect();
            let pooled = IqDataset::new(points, first.dt_strobe, first.meta.clone())?;
            Some(fit_discriminator_with(&pooled, disc.options)?)
        }
    };
    let opts = DiscriminateOptions { majority_filter: disc.majority_filter };
    let traces = inputs
        .into_iter()
        .map(|i| match i {
            Input::Trace(t) => t,
            Input::Iq(d) => discriminate_with(&d, model.as_ref().expect("fitted when IQ inputs exist"), opts),
        })
        .collect();
    Ok((traces, model))
}

fn common_dt(traces: &[JumpTrace]) -> Result<f64> {
    let dt = traces[0].dt_strobe;
    if traces.iter().any(|t| t.dt_strobe != dt) {
        bail!(Error::InvalidArgument("input traces have different strobe intervals".into()));
    }
    Ok(dt)
}

/// Hidden TLS count shared by every trace, 0 if any trace lacks them.
fn common_hidden(traces: &[JumpTrace]) -> usize {
    let n: Vec<usize> = traces.iter().map(|t| t.hidden_tls.as_ref().map_or(0, Vec::len)).collect();
    if n.iter().all(|&k| k == n[0]) {
        n[0]
    } else {
        0
    }
}

fn curve_name(stem: &str, format: Format) -> String {
    match format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    }
}

fn write_traj(out: &Path, stem: &str, traj: &ConditionedTrajectory, format: Format) -> Result<()> {
    let path = out.join(curve_name(stem, format));
    match format {
        Format::Csv => write_trajectory(&path, traj)?,
        Format::Json => write_json(&path, traj)?,
    }
    Ok(())
}

pub fn condition_traces(
    traces: &[JumpTrace],
    pattern: &SelectionPattern,
    horizon: f64,
    include_pre: f64,
    n_hidden: usize,
    cfg_errors: tlsjump::conditioning::ErrorModel,
) -> Result<(Vec<ConditionedTrajectory>, u64)> {
    let dt = common_dt(traces)?;
    let (pre, post) = (lag_steps(include_pre, dt), lag_steps(horizon, dt));
    let acc = traces
        .par_iter()
        .fold(
            || ConditionAccumulator::new(pattern.clone(), pre, post, 1 + n_hidden),
            |mut acc, t| {
                let mut ch: Vec<&[u8]> = vec![&t.states];
                if let Some(h) = &t.hidden_tls {
                    ch.extend(h.iter().take(n_hidden).map(Vec::as_slice));
                }
                acc.add(&t.states, &ch);
                acc
            },
        )
        .reduce(|| ConditionAccumulator::new(pattern.clone(), pre, post, 1 + n_hidden), ConditionAccumulator::merge);
    let matches = acc.matches();
    Ok((acc.finish_with(dt, cfg_errors)?, matches))
}

pub fn analyze(cfg: &AnalyzeConfig, out: &Path) -> Result<()> {
    if cfg.inputs.is_empty() {
        bail!(Error::InvalidArgument("analyze needs at least one input".into()));
    }
    if cfg.patterns.is_empty() {
        bail!(Error::InvalidArgument("analyze needs at least one pattern".into()));
    }
    let (traces, model) = load_traces(&cfg.inputs, &cfg.discrimination)?;
    let dt = common_dt(&traces)?;
    create_dir(out)?;
    if let Some(m) = &model {
        write_json(&out.join("discriminator.json"), m)?;
    }

    let n_hidden = common_hidden(&traces);
    let mut pattern_summary = BTreeMap::new();
    for pattern in &cfg.patterns {
        let (trajs, matches) =
            condition_traces(&traces, pattern, cfg.horizon_s, cfg.include_pre_s, n_hidden, cfg.error_model)?;
        let label = pattern.label();
        write_traj(out, &format!("cond_{label}"), &trajs[0], cfg.format)?;
        let mut hidden_at_zero = Vec::new();
        for (i, h) in trajs[1..].iter().enumerate() {
            write_traj(out, &format!("cond_{label}_tls{i}"), h, cfg.format)?;
            if let Some(z) = h.lags.iter().position(|&l| l == 0.0) {
                hidden_at_zero.push(json!({
                    "tls": i, "mean": h.mean_excited[z], "stderr": h.stderr[z], "count": h.counts[z],
                }));
            }
        }
        pattern_summary.insert(label, json!({ "matches": matches, "hidden_tls_at_selection": hidden_at_zero }));
    }

    let max_lag = cfg.max_lag_s.unwrap_or(cfg.horizon_s);
    let g2 = match g2_estimate_pooled(&traces, max_lag) {
        Ok(curve) => {
            let path = out.join(curve_name("g2", cfg.format));
            match cfg.format {
                Format::Csv => write_g2(&path, &curve)?,
                Format::Json => write_json(&path, &curve)?,
            }
            json!({ "p_down": curve.p_down, "lags": curve.lags.len() })
        }
        Err(e @ (Error::NoDecayEvents | Error::TooFewJumps { .. })) => json!({ "error": e.to_string() }),
        Err(e) => return Err(e.into()),
    };

    let (mut ups, mut downs, mut strobes) = (0u64, 0u64, 0u64);
    for t in &traces {
        strobes += t.len() as u64;
        for ev in detect_jumps(t) {
            match ev.direction {
                Direction::Up => ups += 1,
                Direction::Down => downs += 1,
            }
        }
    }
    let summary = json!({
        "n_traces": traces.len(),
        "n_strobes": strobes,
        "dt_strobe_s": dt,
        "n_up_jumps": ups,
        "n_down_jumps": downs,
        "patterns": pattern_summary,
        "g2": g2,
    });
    write_json(&out.join("summary.json"), &summary)?;
    crate::config::write_resolved(out, cfg)
}

fn read_curve(path: &Path) -> Result<ConditionedTrajectory> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(traceio::read_json(path)?)
    } else {
        Ok(read_trajectory(path)?)
    }
}

pub fn fit(cfg: &FitConfig, out: &Path) -> Result<()> {
    let ground = read_curve(&cfg.ground)?;
    let post = read_curve(&cfg.post_jump)?;
    create_dir(out)?;
    let result = fit_solomon(&ground, &post, &cfg.spec)?;
    write_json(&out.join("fit.json"), &result)?;
    if !cfg.compare.is_empty() {
        let mut specs = vec![cfg.spec.clone()];
        specs.extend(cfg.compare.iter().cloned());
        write_json(&out.join("comparison.json"), &compare_models(&ground, &post, &specs)?)?;
    }
    crate::config::write_resolved(out, cfg)
}

#[derive(Serialize)]
struct PeakReport {
    gamma_qt: Vec<TlsPeak>,
    gamma_q: Vec<TlsPeak>,
    /// Fields with too few converged points for peak detection.
    skipped_fields: Vec<f64>,
}

pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<()> {
    let mut manifest: Vec<ManifestEntry> = crate::config::load(&cfg.manifest)?;
    for e in &mut manifest {
        e.path = crate::config::resolve(Some(&cfg.manifest), &e.path);
    }
    let (ground, post) = (SelectionPattern::ground(), SelectionPattern::post_jump());
    let inputs = manifest
        .iter()
        .map(|e| -> Result<SweepInput> {
            let (traces, _) = load_traces(std::slice::from_ref(&e.path), &cfg.discrimination)
                .with_context(|| format!("sweep point {}", e.path.display()))?;
            let errors = tlsjump::conditioning::ErrorModel::Binomial;
            let (g, _) = condition_traces(&traces, &ground, cfg.horizon_s, 0.0, 0, errors)?;
            let (p, _) = condition_traces(&traces, &post, cfg.horizon_s, 0.0, 0, errors)?;
            let n_strobes = traces.iter().map(|t| t.len() as u64).sum();
            let n_down_jumps = traces
                .iter()
                .map(|t| detect_jumps(t).iter().filter(|j| j.direction == Direction::Down).count() as u64)
                .sum();
            Ok(SweepInput {
                f_q_hz: e.f_q_hz,
                field_v_per_m: e.field_v_per_m,
                ground: g.into_iter().next().expect("qubit channel"),
                post_jump: p.into_iter().next().expect("qubit channel"),
                n_strobes,
                n_down_jumps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let map = run_sweep(&inputs, &cfg.spec)?;
    create_dir(out)?;
    match cfg.format {
        Format::Csv => write_map_csv(&out.join("map.csv"), &map)?,
        Format::Json => write_json(&out.join("map.json"), &map)?,
    }
    let mut report = PeakReport { gamma_qt: vec![], gamma_q: vec![], skipped_fields: vec![] };
    for &field in &map.field_axis {
        match (detect_peaks(&map, field, Channel::GammaQt), detect_peaks(&map, field, Channel::GammaQ)) {
            (Ok(a), Ok(b)) => {
                report.gamma_qt.extend(a);
                report.gamma_q.extend(b);
            }
            (Err(Error::TooFewPoints { .. }), _) | (_, Err(Error::TooFewPoints { .. })) => {
                report.skipped_fields.push(field)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    let tracks = link_tracks(&report.gamma_qt, cfg.link);
    write_json(&out.join("peaks.json"), &report)?;
    write_json(&out.join("tracks.json"), &tracks)?;
    crate::config::write_resolved(out, cfg)
}
