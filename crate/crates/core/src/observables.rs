//! Imbalance, time averages and run summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagate::TimeSeries;

/// Length of the transient window used for the eruption measure.
pub const TRANSIENT_WINDOW: f64 = 100.0;
/// Denominators below this make a normalized imbalance sample undefined.
pub const MIN_POPULATION: f64 = 1e-9;

/// `z(t) = N_L(t) − N_R(t)`.
pub fn imbalance(n_left: &TimeSeries, n_right: &TimeSeries) -> Result<TimeSeries> {
    n_left.zip_with(n_right, "z", |l, r| l - r)
}

/// `(N_L − N_R)/(N_L + N_R)` with undefined samples set to NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImbalance {
    pub series: TimeSeries,
    /// Indices of samples whose denominator was below [`MIN_POPULATION`].
    pub flagged: Vec<usize>,
}

pub fn normalized_imbalance(n_left: &TimeSeries, n_right: &TimeSeries) -> Result<NormalizedImbalance> {
    let series = n_left.zip_with(n_right, "z_norm", |l, r| {
        let total = l + r;
        if total > MIN_POPULATION {
            (l - r) / total
        } else {
            f64::NAN
        }
    })?;
    let flagged = series
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_nan())
        .map(|(i, _)| i)
        .collect();
    Ok(NormalizedImbalance { series, flagged })
}

/// Trapezoidal mean of `series` over `[t_start, t_final]`.
///
/// `t_start` is snapped to the first sample at or after it.
pub fn time_average(series: &TimeSeries, t_start: f64) -> Result<f64> {
    window_average(series, t_start, series.t_final())
}

/// Trapezoidal mean over the samples with `t_start ≤ t ≤ t_end`.
pub fn window_average(series: &TimeSeries, t_start: f64, t_end: f64) -> Result<f64> {
    let (t, v) = window(series, t_start, t_end)?;
    if t.len() == 1 {
        return Ok(v[0]);
    }
    let integral: f64 = t
        .windows(2)
        .zip(v.windows(2))
        .map(|(tw, vw)| 0.5 * (tw[1] - tw[0]) * (vw[0] + vw[1]))
        .sum();
    Ok(integral / (t[t.len() - 1] - t[0]))
}

/// Root-mean-square deviation from the trapezoidal mean over a window.
pub fn window_rms(series: &TimeSeries, t_start: f64, t_end: f64) -> Result<f64> {
    let mean = window_average(series, t_start, t_end)?;
    let sq = series.map("sq", |v| (v - mean) * (v - mean));
    Ok(window_average(&sq, t_start, t_end)?.max(0.0).sqrt())
}

fn window(series: &TimeSeries, t_start: f64, t_end: f64) -> Result<(&[f64], &[f64])> {
    let eps = 1e-9 * series.dt().unwrap_or(1.0);
    let times = series.times();
    let lo = times.partition_point(|&t| t < t_start - eps);
    let hi = times.partition_point(|&t| t <= t_end + eps);
    if lo >= hi {
        return Err(Error::InvalidParameter(format!(
            "averaging window [{t_start}, {t_end}] holds no samples of '{}'",
            series.label
        )));
    }
    Ok((&times[lo..hi], &series.values()[lo..hi]))
}

/// Per-run digest of the imbalance dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSummary {
    pub z_avg: f64,
    pub z_fluct: f64,
    pub n_tot_mean: f64,
    /// Mean photon excess per cavity over the transient window.
    pub delta_n: f64,
    /// Largest total photon excess over the transient window.
    pub delta_n_peak: f64,
    pub sigma_z_mean: Vec<f64>,
    pub n_i: usize,
    pub t_final: f64,
}

/// Traces consumed by [`summarize`]; `n_right` and `sigma_z[1]` are absent for one site.
#[derive(Debug, Clone, Copy)]
pub struct Traces<'a> {
    pub n_left: &'a TimeSeries,
    pub n_right: Option<&'a TimeSeries>,
    pub sigma_z: &'a [TimeSeries],
}

pub fn summarize(traces: Traces<'_>, n_i: usize) -> Result<ImbalanceSummary> {
    let n_left = traces.n_left;
    let zero = n_left.map("zero", |_| 0.0);
    let n_right = traces.n_right.unwrap_or(&zero);
    let z = imbalance(n_left, n_right)?;
    let n_tot = n_left.zip_with(n_right, "N_tot", |l, r| l + r)?;
    for s in traces.sigma_z {
        if !s.same_grid(n_left) {
            return Err(Error::GridMismatch {
                left: n_left.label.clone(),
                right: s.label.clone(),
            });
        }
    }
    let cavities = if traces.n_right.is_some() { 2.0 } else { 1.0 };
    let z_avg = time_average(&z, 0.0)?;
    let z_fluct = window_rms(&z, 0.0, z.t_final())?;
    let transient_end = TRANSIENT_WINDOW.min(n_tot.t_final());
    let excess = n_tot.map("excess", |v| v - n_i as f64);
    let delta_n = window_average(&excess, 0.0, transient_end)? / cavities;
    let (_, v) = window(&excess, 0.0, transient_end)?;
    let delta_n_peak = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ImbalanceSummary {
        z_avg,
        z_fluct,
        n_tot_mean: time_average(&n_tot, 0.0)?,
        delta_n,
        delta_n_peak,
        sigma_z_mean: traces
            .sigma_z
            .iter()
            .map(|s| time_average(s, 0.0))
            .collect::<Result<_>>()?,
        n_i,
        t_final: z.t_final(),
    })
}
