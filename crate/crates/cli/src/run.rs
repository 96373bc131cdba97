//! Dispatch from a validated config to the matching pipeline, and the
//! record written afterwards.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eqlab::convdim::{growth_csv, growth_table, GrowthRow};
use eqlab::density::{
    a_k_density_ensemble, boundary_proximity_density, decreasing_fraction, total_hits, DensityReport,
};
use eqlab::equidist::{convergence_report, median, ConvergenceReport, EquidistSetup};
use eqlab::exact::GUARD_DIGITS;
use eqlab::measures::{digit_dimension, entropy};
use eqlab::par::Execution;
use eqlab::scenery::{scenery_ensemble, stationarity_gap, ScaleStep, ScenerySample};
use eqlab::seeds::{member_rng, sample_ensemble};
use eqlab::{MeasureExpr, PartitionCell};
use num_bigint::BigUint;
use serde::Serialize;

use crate::config::{ExperimentConfig, Kind, DEFAULT_DENSITY_HORIZON, DEFAULT_DIMENSION_LEVEL};
use crate::error::{ConfigError, RunError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierRow {
    pub k: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<i64>,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierTable {
    pub measure: String,
    pub tol: f64,
    pub rows: Vec<FourierRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionPayload {
    pub measure: String,
    pub base: u32,
    pub entropy_nats: f64,
    /// `H(p)/ln m`.
    pub formula: f64,
    pub level: u64,
    /// `ln μ(cell of x at level K) / ln m^{−K}` per ensemble point.
    pub estimates: Vec<f64>,
    pub median_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CenterSeries {
    pub point_id: usize,
    pub skipped: Vec<u64>,
    pub nonuniform_fraction: f64,
    /// `None` when fewer than `2W` samples were produced.
    pub gap: Option<f64>,
    pub samples: Vec<ScenerySample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SceneryPayload {
    pub measure: String,
    /// Flow times are `k·ln(base)`.
    pub base: u32,
    pub k_max: u64,
    pub depth: u32,
    pub window: usize,
    pub centers: Vec<CenterSeries>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityPayload {
    pub reports: Vec<DensityReport>,
    pub decreasing_fraction: f64,
    pub total_hits: usize,
    pub boundary: Vec<DensityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvdimPayload {
    pub measure: String,
    pub q_max: u32,
    pub rows: Vec<GrowthRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Payload {
    Equidist(Box<ConvergenceReport>),
    Fourier(FourierTable),
    Dimension(DimensionPayload),
    Scenery(SceneryPayload),
    Density(DensityPayload),
    Convdim(ConvdimPayload),
}

impl Payload {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("payloads serialize")
    }

    /// Plot-ready CSV for the payload.
    pub fn to_csv(&self) -> Result<String, RunError> {
        let mut out = String::new();
        match self {
            Payload::Equidist(r) => return r.to_csv().map_err(RunError::runtime),
            Payload::Convdim(p) => return growth_csv(&p.rows).map_err(RunError::runtime),
            Payload::Fourier(t) => {
                out.push_str("k,j,re,im,abs\n");
                for r in &t.rows {
                    let j = r.j.map(|j| j.to_string()).unwrap_or_default();
                    let _ = writeln!(out, "{},{},{},{},{}", r.k, j, r.re, r.im, r.abs);
                }
            }
            Payload::Dimension(d) => {
                out.push_str("point_id,estimate\n");
                for (i, e) in d.estimates.iter().enumerate() {
                    let _ = writeln!(out, "{i},{e}");
                }
            }
            Payload::Scenery(s) => {
                let width = 1usize << s.depth;
                out.push_str("point_id,k,t");
                for i in 0..width {
                    let _ = write!(out, ",d{i}");
                }
                out.push('\n');
                for c in &s.centers {
                    for sample in &c.samples {
                        let _ = write!(out, "{},{},{}", c.point_id, sample.index, sample.t);
                        for v in sample.descriptor_f64() {
                            let _ = write!(out, ",{v}");
                        }
                        out.push('\n');
                    }
                }
            }
            Payload::Density(d) => {
                out.push_str("point_id,k,in_A_k\n");
                for (i, r) in d.reports.iter().enumerate() {
                    for k in 1..=r.max_index {
                        let _ = writeln!(out, "{i},{k},{}", u8::from(r.hits.binary_search(&k).is_ok()));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Second CSV, where a payload has one (density windows).
    pub fn to_window_csv(&self) -> Option<String> {
        let Payload::Density(d) = self else { return None };
        let mut out = String::from("point_id,window_start,density\n");
        for (i, r) in d.reports.iter().enumerate() {
            for w in &r.windows {
                let _ = writeln!(out, "{i},{},{}", w.start, w.fraction);
            }
        }
        Some(out)
    }

    pub fn summary(&self) -> String {
        match self {
            Payload::Equidist(r) => format!(
                "equidist: median distance {:?}, median max-mode error {:.4}, trend ratio {:.3}",
                r.median_distance, r.median_max_mode_error, r.trend_ratio
            ),
            Payload::Fourier(t) => format!("fourier: {} coefficients of {}", t.rows.len(), t.measure),
            Payload::Dimension(d) => {
                format!("dimension: formula {:.5}, median local estimate {:.5}", d.formula, d.median_estimate)
            }
            Payload::Scenery(s) => {
                let gaps: Vec<String> =
                    s.centers.iter().map(|c| c.gap.map_or("-".into(), |g| format!("{g:.3}"))).collect();
                format!("scenery: {} centers, stationarity gaps [{}]", s.centers.len(), gaps.join(", "))
            }
            Payload::Density(d) => format!(
                "density: {} reports, {} hits, final window below first for {:.0}%",
                d.reports.len(),
                d.total_hits,
                100.0 * d.decreasing_fraction
            ),
            Payload::Convdim(c) => {
                let dims: Vec<String> =
                    c.rows.iter().map(|r| format!("q={} k={}: {:.5}", r.q, r.k, r.coarse_dimension)).collect();
                format!("convdim: {}", dims.join("; "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub version: String,
    /// The config file exactly as read.
    pub config: String,
    pub payload: Payload,
    pub wall_time_seconds: f64,
}

/// Natural log of a big integer without overflowing `f64`.
fn big_ln(v: &BigUint) -> f64 {
    let bits = v.bits();
    let shift = bits.saturating_sub(64);
    let top: BigUint = v >> shift;
    let top = top.iter_u64_digits().next().unwrap_or(0) as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn runtime<E: std::fmt::Display>(e: E) -> RunError {
    RunError::runtime(e)
}

fn equidist(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let (m, n) = (config.factor("m")?, config.factor("n")?);
    let last = *config.schedule.last().ok_or(ConfigError::missing("schedule"))?;
    let digits = mu.digits_for(last, m.max(n));
    let ensemble = sample_ensemble(mu, config.ensemble, config.seed, digits, exec).map_err(runtime)?;
    let setup = EquidistSetup {
        m,
        n,
        f: config.f.clone(),
        g: config.g.clone(),
        case: config.case.ok_or(ConfigError::missing("case"))?,
        schedule: config.schedule.clone(),
        cutoff: config.cutoff,
        grid_size: config.grid,
        tol: config.tol,
    };
    Ok(Payload::Equidist(Box::new(convergence_report(&ensemble, mu, &setup, exec).map_err(runtime)?)))
}

fn fourier(config: &ExperimentConfig) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let f = config.modes;
    let row =
        |k: i64, j: Option<i64>, c: num_complex::Complex64| FourierRow { k, j, re: c.re, im: c.im, abs: c.norm() };
    let rows = if mu.dim() == 1 {
        (-f..=f).map(|k| mu.fourier_1d(k, config.tol).map(|c| row(k, None, c))).collect::<Result<_, _>>()
    } else {
        (-f..=f)
            .flat_map(|k| (-f..=f).map(move |j| (k, j)))
            .map(|(k, j)| mu.fourier_2d(k, j, config.tol).map(|c| row(k, Some(j), c)))
            .collect::<Result<_, _>>()
    }
    .map_err(runtime)?;
    Ok(Payload::Fourier(FourierTable { measure: mu.describe(), tol: config.tol, rows }))
}

fn dimension(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let MeasureExpr::Digit { base, probs } = mu else {
        return Err(ConfigError::new("measure", "expected a digit measure").into());
    };
    let level = config.horizon(DEFAULT_DIMENSION_LEVEL);
    let digits = (level + GUARD_DIGITS) as usize;
    let estimates = exec
        .try_map(config.ensemble, |i| {
            let x = mu.sample(&mut member_rng(config.seed, i as u64), digits)?;
            let cell: PartitionCell = x.cell(*base, level as u32);
            let mass = mu.cell_mass(&cell)?;
            let ln_mass = big_ln(mass.numer().magnitude()) - big_ln(mass.denom().magnitude());
            Ok::<f64, eqlab::MeasureError>(ln_mass / (-(level as f64) * (*base as f64).ln()))
        })
        .map_err(runtime)?;
    Ok(Payload::Dimension(DimensionPayload {
        measure: mu.describe(),
        base: *base,
        entropy_nats: entropy(probs),
        formula: digit_dimension(*base, probs),
        level,
        median_estimate: median(&estimates),
        estimates,
    }))
}

fn scenery(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let base = config.m.unwrap_or_else(|| mu.sample_base());
    let k_max = config.horizon(2 * config.w as u64 + GUARD_DIGITS);
    let digits = mu.digits_for(k_max, base);
    let centers = sample_ensemble(mu, config.ensemble, config.seed, digits, exec).map_err(runtime)?;
    let series = scenery_ensemble(mu, &centers, ScaleStep::LogBase(base), k_max, config.r, exec).map_err(runtime)?;
    let centers = series
        .into_iter()
        .enumerate()
        .map(|(point_id, s)| CenterSeries {
            point_id,
            nonuniform_fraction: s.nonuniform_fraction(),
            gap: stationarity_gap(&s.samples, config.w).ok(),
            skipped: s.skipped,
            samples: s.samples,
        })
        .collect();
    Ok(Payload::Scenery(SceneryPayload {
        measure: mu.describe(),
        base,
        k_max,
        depth: config.r,
        window: config.w,
        centers,
    }))
}

fn density(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let (m, n) = (config.factor("m")?, config.factor("n")?);
    let horizon = config.horizon(DEFAULT_DENSITY_HORIZON);
    let reports =
        a_k_density_ensemble(mu, m, n, horizon, config.seed, config.ensemble, config.window, exec).map_err(runtime)?;
    let boundary = match &config.interval {
        Some(interval) => {
            let digits = mu.digits_for(horizon, n);
            let points = sample_ensemble(mu, config.ensemble, config.seed, digits, exec).map_err(runtime)?;
            exec.try_map(points.len(), |i| {
                boundary_proximity_density(&points[i], n, m, interval, horizon, config.window)
            })
            .map_err(runtime)?
        }
        None => Vec::new(),
    };
    Ok(Payload::Density(DensityPayload {
        decreasing_fraction: decreasing_fraction(&reports),
        total_hits: total_hits(&reports),
        reports,
        boundary,
    }))
}

fn convdim(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    let mu = config.measure()?;
    let rows = growth_table(mu, config.q_max, &config.levels, exec).map_err(runtime)?;
    Ok(Payload::Convdim(ConvdimPayload { measure: mu.describe(), q_max: config.q_max, rows }))
}

/// Runs a validated config.
pub fn execute(config: &ExperimentConfig, exec: Execution) -> Result<Payload, RunError> {
    config.validate()?;
    match config.kind {
        Kind::Equidist => equidist(config, exec),
        Kind::Fourier => fourier(config),
        Kind::Dimension => dimension(config, exec),
        Kind::Scenery => scenery(config, exec),
        Kind::Density => density(config, exec),
        Kind::Convdim => convdim(config, exec),
    }
}

/// Parses `text`, runs it, and wraps the payload with the verbatim config.
pub fn run_text(text: &str, exec: Execution) -> Result<(ExperimentConfig, RunRecord), RunError> {
    let config = ExperimentConfig::parse(text)?;
    let start = Instant::now();
    let payload = execute(&config, exec)?;
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: text.to_string(),
        payload,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((config, record))
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    std::fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Files produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub record: PathBuf,
    pub csv: Vec<PathBuf>,
}

/// Writes the record as JSON to `path` and the CSV series beside it.
pub fn write_outputs(record: &RunRecord, path: &Path) -> Result<Outputs, RunError> {
    let json = serde_json::to_string_pretty(record).map_err(runtime)?;
    write(path, &json)?;
    let mut csv = vec![path.with_extension("csv")];
    write(&csv[0], &record.payload.to_csv()?)?;
    if let Some(windows) = record.payload.to_window_csv() {
        let p = path.with_extension("windows.csv");
        write(&p, &windows)?;
        csv.push(p);
    }
    Ok(Outputs { record: path.to_path_buf(), csv })
}

/// `run <config.json>`: read, execute, write. `output` overrides the
/// config's own output path.
pub fn run_file(
    config_path: &Path,
    output: Option<&Path>,
    exec: Execution,
) -> Result<(RunRecord, Option<Outputs>), RunError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|source| RunError::Io { path: config_path.to_path_buf(), source })?;
    let (config, record) = run_text(&text, exec)?;
    let target = output.map(Path::to_path_buf).or(config.output);
    let outputs = target.map(|p| write_outputs(&record, &p)).transpose()?;
    Ok((record, outputs))
}
