//! Unitary time evolution with a full-diagonalization or Lanczos engine.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{number, state_norm, FockSpace, OperatorMatrix, Site, StateVector};
use crate::linalg::{Eigensystem, Lanczos};

/// Largest dimension for which `Engine::Auto` diagonalizes.
pub const FULL_DIAG_LIMIT: usize = 4000;
/// Norm drift that aborts an evolution.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Auto,
    FullDiag,
    Krylov,
}

impl Engine {
    /// Concrete engine for a space of dimension `dim`.
    pub fn resolve(self, dim: usize) -> Engine {
        match self {
            Engine::Auto if dim <= FULL_DIAG_LIMIT => Engine::FullDiag,
            Engine::Auto => Engine::Krylov,
            e => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionPlan {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt_sample: f64,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
}

fn default_dt() -> f64 {
    1.0
}

fn default_krylov_dim() -> usize {
    30
}

fn default_step_tol() -> f64 {
    1e-9
}

impl EvolutionPlan {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            dt_sample: default_dt(),
            engine: Engine::Auto,
            krylov_dim: default_krylov_dim(),
            step_tol: default_step_tol(),
        }
    }

    pub fn with_dt(mut self, dt_sample: f64) -> Self {
        self.dt_sample = dt_sample;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_sample > 0.0 && self.dt_sample <= self.t_final && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_sample ({}) <= t_final ({})",
                self.dt_sample, self.t_final
            )));
        }
        if self.krylov_dim < 4 {
            return Err(Error::InvalidParameter(format!("krylov_dim {} < 4", self.krylov_dim)));
        }
        if !(self.step_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("step_tol {} must be positive", self.step_tol)));
        }
        Ok(())
    }

    /// Number of sampling intervals; `t_final` is rounded to the nearest multiple of `dt_sample`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt_sample).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|k| k as f64 * self.dt_sample).collect()
    }
}

/// Real samples on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub label: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("time grid is not strictly increasing".into()));
        }
        if times.len() > 2 {
            let dt = times[1] - times[0];
            if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
                return Err(Error::Parse("time grid is not uniform".into()));
            }
        }
        Ok(Self {
            label: label.into(),
            times,
            values,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> Option<f64> {
        (self.times.len() > 1).then(|| self.times[1] - self.times[0])
    }

    pub fn t_final(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        self.times == other.times
    }

    /// New series on the same grid.
    pub fn with_values(&self, label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(label, self.times.clone(), values)
    }

    pub fn map(&self, label: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            label: label.into(),
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two series on the same grid.
    pub fn zip_with(&self, other: &TimeSeries, label: impl Into<String>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch {
                left: self.label.clone(),
                right: other.label.clone(),
            });
        }
        Ok(Self {
            label: label.into(),
            times: self.times.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Renders series sharing one grid as CSV: `# t, <labels>` then one row per sample.
pub fn to_csv(series: &[&TimeSeries]) -> Result<String> {
    let first = series.first().ok_or_else(|| Error::InvalidParameter("no series to write".into()))?;
    for s in &series[1..] {
        if !first.same_grid(s) {
            return Err(Error::GridMismatch {
                left: first.label.clone(),
                right: s.label.clone(),
            });
        }
    }
    let mut out = String::from("# t");
    for s in series {
        out.push_str(", ");
        out.push_str(&s.label);
    }
    out.push('\n');
    for (k, t) in first.times.iter().enumerate() {
        write!(out, "{t:.16e}").unwrap();
        for s in series {
            write!(out, ", {:.16e}", s.values[k]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn from_csv(text: &str) -> Result<Vec<TimeSeries>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("CSV header must start with '#'".into()))?;
    let labels: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut columns = vec![Vec::new(); labels.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != labels.len() + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, found {}",
                row + 1,
                labels.len() + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {s:?}: {e}", row + 1)))
        };
        times.push(parse(fields[0])?);
        for (col, f) in columns.iter_mut().zip(&fields[1..]) {
            col.push(parse(f)?);
        }
    }
    labels
        .into_iter()
        .zip(columns)
        .map(|(label, values)| TimeSeries::new(label, times.clone(), values))
        .collect()
}

pub fn write_csv(path: &Path, series: &[&TimeSeries]) -> Result<()> {
    std::fs::write(path, to_csv(series)?)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TimeSeries>> {
    from_csv(&std::fs::read_to_string(path)?)
}

/// A labelled observable to sample during evolution.
#[derive(Debug, Clone, Copy)]
pub struct Observable<'a> {
    pub label: &'a str,
    pub op: &'a OperatorMatrix,
}

impl<'a> Observable<'a> {
    pub fn new(label: &'a str, op: &'a OperatorMatrix) -> Self {
        Self { label, op }
    }
}

/// Propagates a state under a fixed hermitian `H`.
#[derive(Debug)]
pub enum Propagator<'a> {
    FullDiag {
        eig: Eigensystem,
        coeffs: Vec<C64>,
        elapsed: f64,
    },
    Krylov(Lanczos<'a>),
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a OperatorMatrix, plan: &EvolutionPlan) -> Result<Self> {
        plan.validate()?;
        match plan.engine.resolve(h.dim()) {
            Engine::FullDiag => Ok(Propagator::FullDiag {
                eig: Eigensystem::full(h)?,
                coeffs: Vec::new(),
                elapsed: 0.0,
            }),
            _ => Ok(Propagator::Krylov(Lanczos::new(h, plan.krylov_dim, plan.step_tol)?)),
        }
    }

    /// Reuses an existing decomposition of `H`.
    pub fn from_eigensystem(eig: Eigensystem) -> Self {
        Propagator::FullDiag {
            eig,
            coeffs: Vec::new(),
            elapsed: 0.0,
        }
    }

    /// Sets the state at the current time origin.
    pub fn reset(&mut self, psi: &[C64]) {
        if let Propagator::FullDiag { eig, coeffs, elapsed } = self {
            *coeffs = eig.project(psi);
            *elapsed = 0.0;
        }
    }

    /// Overwrites `psi` with `e^{-iHt} psi`. For the full-diag engine `psi` must
    /// be the state last passed to [`reset`](Self::reset) evolved by all
    /// previous calls; phases are accumulated from the stored coefficients.
    pub fn advance(&mut self, psi: &mut [C64], t: f64) -> Result<()> {
        match self {
            Propagator::Krylov(lz) => lz.advance(psi, t),
            Propagator::FullDiag { eig, coeffs, elapsed } => {
                if coeffs.is_empty() {
                    *coeffs = eig.project(psi);
                    *elapsed = 0.0;
                }
                *elapsed += t;
                let tau = *elapsed;
                let evolved: Vec<C64> = coeffs
                    .iter()
                    .zip(eig.values())
                    .map(|(c, e)| c * C64::from_polar(1.0, -e * tau))
                    .collect();
                psi.copy_from_slice(&eig.expand(&evolved));
                Ok(())
            }
        }
    }
}

/// Evolves `psi0`, sampling every observable at each plan time.
pub fn evolve(
    h: &OperatorMatrix,
    psi0: &StateVector,
    plan: &EvolutionPlan,
    observables: &[Observable<'_>],
) -> Result<Vec<TimeSeries>> {
    evolve_inspect(h, psi0, plan, observables, |_, _| {})
}

/// As [`evolve`], additionally handing every sampled state to `inspect`.
pub fn evolve_inspect(
    h: &OperatorMatrix,
    psi0: &StateVector,
    plan: &EvolutionPlan,
    observables: &[Observable<'_>],
    inspect: impl FnMut(f64, &[C64]),
) -> Result<Vec<TimeSeries>> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(h.hermitian_defect()));
    }
    let space = psi0.space();
    if h.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: h.dim(),
        });
    }
    for o in observables {
        if o.op.space() != space {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: o.op.dim(),
            });
        }
    }
    plan.validate()?;
    let psi = psi0.amplitudes().to_vec();
    if plan.engine.resolve(h.dim()) == Engine::Krylov {
        if let Some(indices) = parity_support(h, &psi) {
            let block = h.sparse_block(&indices);
            let mut lz = Lanczos::on_block(&block, plan.krylov_dim, plan.step_tol)?;
            let step = |psi: &mut Vec<C64>, dt: f64| -> Result<()> {
                let mut local = block.gather(psi);
                lz.advance(&mut local, dt)?;
                block.scatter(&local, psi);
                Ok(())
            };
            return sample_run(psi, plan, observables, step, inspect);
        }
    }
    let mut prop = Propagator::new(h, plan)?;
    prop.reset(&psi);
    sample_run(psi, plan, observables, |psi, dt| prop.advance(psi, dt), inspect)
}

/// Indices of the parity sector holding `psi`, when `H` conserves parity and
/// the sector is a proper subspace.
pub(crate) fn parity_support(h: &OperatorMatrix, psi: &[C64]) -> Option<Vec<usize>> {
    let parities = h.space().parities();
    let diagonal: Vec<f64> = parities.iter().map(|&e| if e { 1.0 } else { -1.0 }).collect();
    if h.commutes_with_diagonal(&diagonal) != 0.0 {
        return None;
    }
    let mut sector = None;
    for (a, &even) in psi.iter().zip(&parities) {
        if *a != C64::new(0.0, 0.0) {
            match sector {
                None => sector = Some(even),
                Some(s) if s != even => return None,
                _ => {}
            }
        }
    }
    let even = sector?;
    Some((0..psi.len()).filter(|&i| parities[i] == even).collect())
}

fn sample_run(
    mut psi: Vec<C64>,
    plan: &EvolutionPlan,
    observables: &[Observable<'_>],
    mut step: impl FnMut(&mut Vec<C64>, f64) -> Result<()>,
    mut inspect: impl FnMut(f64, &[C64]),
) -> Result<Vec<TimeSeries>> {
    let times = plan.times();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            step(&mut psi, plan.dt_sample)?;
            let drift = (state_norm(&psi) - 1.0).abs();
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::NormDrift { drift, time: t });
            }
        }
        for (o, out) in observables.iter().zip(samples.iter_mut()) {
            out.push(o.op.expectation_raw(&psi).re);
        }
        inspect(t, &psi);
    }
    observables
        .iter()
        .zip(samples)
        .map(|(o, v)| TimeSeries::new(o.label, times.clone(), v))
        .collect()
}

/// Outcome of a truncation convergence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_max: usize,
    pub n_max_reference: usize,
    /// `max_t |z(t) − z'(t)|`; for one site the photon number takes the role of `z`.
    pub max_deviation: f64,
    /// `max_t` probability on basis states with any site at `n_max`.
    pub top_level_mass: f64,
    pub passed: bool,
}

pub const TRUNCATION_DEVIATION_LIMIT: f64 = 1e-1;
pub const TRUNCATION_MASS_LIMIT: f64 = 1e-6;

/// Population observable compared between truncations.
fn population(space: &FockSpace) -> Result<OperatorMatrix> {
    let left = number(space, Site::Left)?;
    if space.n_sites() == 2 {
        Ok(&left - &number(space, Site::Right)?)
    } else {
        Ok(left)
    }
}

/// Reruns the evolution at `n_max` and `n_max + delta_n` and compares.
pub fn check_truncation<H, P>(
    build_h: H,
    build_psi: P,
    plan: &EvolutionPlan,
    n_sites: usize,
    n_max: usize,
    delta_n: usize,
) -> Result<ConvergenceReport>
where
    H: Fn(&FockSpace) -> Result<OperatorMatrix>,
    P: Fn(&FockSpace) -> Result<StateVector>,
{
    checked_imbalance(build_h, build_psi, plan, n_sites, n_max, delta_n).map(|(r, _)| r)
}

/// As [`check_truncation`], also returning the imbalance trace of the `n_max` run.
pub fn checked_imbalance<H, P>(
    build_h: H,
    build_psi: P,
    plan: &EvolutionPlan,
    n_sites: usize,
    n_max: usize,
    delta_n: usize,
) -> Result<(ConvergenceReport, TimeSeries)>
where
    H: Fn(&FockSpace) -> Result<OperatorMatrix>,
    P: Fn(&FockSpace) -> Result<StateVector>,
{
    if delta_n < 4 {
        return Err(Error::InvalidParameter(format!("delta_n {delta_n} < 4")));
    }
    let run = |n: usize, track_top: bool| -> Result<(TimeSeries, f64)> {
        let space = FockSpace::new(n, n_sites)?;
        let h = build_h(&space)?;
        let psi = build_psi(&space)?;
        let z = population(&space)?;
        let top: Vec<bool> = (0..space.dim())
            .map(|i| space.decode(i).iter().any(|l| l.n == n))
            .collect();
        let mut mass = 0.0f64;
        let series = evolve_inspect(&h, &psi, plan, &[Observable::new("z", &z)], |_, amp| {
            if track_top {
                let m: f64 = amp
                    .iter()
                    .zip(&top)
                    .filter(|(_, &t)| t)
                    .map(|(a, _)| a.norm_sqr())
                    .sum();
                mass = mass.max(m);
            }
        })?;
        Ok((series.into_iter().next().expect("one series"), mass))
    };
    let (coarse, top_level_mass) = run(n_max, true)?;
    let n_ref = n_max + delta_n;
    let (fine, _) = run(n_ref, false)?;
    let max_deviation = coarse
        .values()
        .iter()
        .zip(fine.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let report = ConvergenceReport {
        n_max,
        n_max_reference: n_ref,
        max_deviation,
        top_level_mass,
        passed: max_deviation < TRUNCATION_DEVIATION_LIMIT && top_level_mass < TRUNCATION_MASS_LIMIT,
    };
    Ok((report, coarse))
}
