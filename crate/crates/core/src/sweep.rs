//! Phase-diagram sweeps over the (g, J) plane.
//!
//! Each cell evolves `|n_i,↓⟩|0,↓⟩` under the dimer Hamiltonian and records the
//! time-averaged imbalance. Completed cells are appended to a JSON-lines
//! checkpoint so an interrupted sweep resumes where it stopped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{number, product_state, FockSpace, Qubit, Site, SiteState, StateVector};
use crate::model::ModelConfig;
use crate::observables::time_average;
use crate::propagate::{checked_imbalance, evolve, ConvergenceReport, EvolutionPlan, Observable, TimeSeries};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    #[default]
    Log,
    Linear,
}

/// Evenly spaced axis, in linear or logarithmic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

impl Axis {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            scale: AxisScale::Log,
        }
    }

    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Self {
            min,
            max,
            points,
            scale: AxisScale::Linear,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("axis {name}: {why}")));
        if self.points == 0 {
            return bad("needs at least one point");
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return bad("requires finite min ≤ max");
        }
        if self.points == 1 && self.min != self.max {
            return bad("a single point requires min = max");
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return bad("log spacing requires min > 0");
        }
        if self.min < 0.0 {
            return bad("values must be non-negative");
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k == 0 {
                    return self.min;
                }
                if k + 1 == self.points {
                    return self.max;
                }
                let s = k as f64 / last;
                match self.scale {
                    AxisScale::Linear => self.min + s * (self.max - self.min),
                    AxisScale::Log => (self.min.ln() + s * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }

    /// Cell-edge midpoint between two neighbouring axis values.
    pub fn midpoint(&self, a: f64, b: f64) -> f64 {
        match self.scale {
            AxisScale::Linear => 0.5 * (a + b),
            AxisScale::Log => (a * b).sqrt(),
        }
    }
}

/// Axes and run length of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub g: Axis,
    #[serde(rename = "J")]
    pub j: Axis,
    #[serde(default = "default_n_i")]
    pub n_i: usize,
    #[serde(rename = "T", default = "default_t")]
    pub t_final: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_n_i() -> usize {
    20
}

fn default_t() -> f64 {
    2e4
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            g: Axis::log(0.01, 3.0, 40),
            j: Axis::log(0.003, 0.1, 20),
            n_i: default_n_i(),
            t_final: default_t(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl GridSpec {
    /// Coarse 8 × 5 grid at `T = 2000`.
    pub fn ci() -> Self {
        Self {
            g: Axis::log(0.01, 3.0, 8),
            j: Axis::log(0.003, 0.1, 5),
            t_final: 2e3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.g.validate("g")?;
        self.j.validate("J")?;
        if self.n_i == 0 {
            return Err(Error::InvalidParameter("n_i must be positive".into()));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("T = {} must be positive", self.t_final)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Cell-independent model settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTemplate {
    #[serde(default = "unit")]
    pub omega0: f64,
    #[serde(rename = "Omega", default = "unit")]
    pub omega_q: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(default)]
    pub jc_only: bool,
    /// Fixed truncation; `None` uses the per-cell default.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Extra levels of the truncation check; `None` skips it.
    #[serde(default = "default_delta")]
    pub truncation_delta: Option<usize>,
    /// Cavity holding the photons at `t = 0`.
    #[serde(default = "left")]
    pub start: Site,
}

fn unit() -> f64 {
    1.0
}

fn default_delta() -> Option<usize> {
    Some(10)
}

fn left() -> Site {
    Site::Left
}

impl Default for SweepTemplate {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            omega_q: 1.0,
            d: 0.0,
            jc_only: false,
            n_max: None,
            truncation_delta: default_delta(),
            start: Site::Left,
        }
    }
}

impl SweepTemplate {
    fn model(&self, g: f64, j: f64) -> ModelConfig {
        ModelConfig {
            sites: 2,
            omega0: self.omega0,
            omega_q: self.omega_q,
            g,
            j,
            d: self.d,
            n_max: self.n_max,
            jc_only: self.jc_only,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pending,
    Done,
    Failed,
}

/// Outcome of one grid cell, as stored in the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub j_index: usize,
    pub g_index: usize,
    pub g: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub status: CellStatus,
    pub z_avg: Option<f64>,
    pub n_max: usize,
    #[serde(default)]
    pub truncation: Option<ConvergenceReport>,
    #[serde(default)]
    pub error: Option<String>,
}

/// `z_avg` over the grid; rows follow `J`, columns follow `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub g_values: Vec<f64>,
    #[serde(rename = "J_values")]
    pub j_values: Vec<f64>,
    pub z_avg: Vec<Vec<Option<f64>>>,
    pub n_max_used: Vec<Vec<usize>>,
    pub status: Vec<Vec<CellStatus>>,
    pub n_i: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub spec: GridSpec,
    pub template: SweepTemplate,
    /// Failure messages keyed by `"row,col"`.
    pub failures: BTreeMap<String, String>,
}

impl PhaseGrid {
    fn empty(spec: &GridSpec, template: &SweepTemplate) -> Self {
        let g_values = spec.g.values();
        let j_values = spec.j.values();
        let (rows, cols) = (j_values.len(), g_values.len());
        Self {
            g_values,
            j_values,
            z_avg: vec![vec![None; cols]; rows],
            n_max_used: vec![vec![0; cols]; rows],
            status: vec![vec![CellStatus::Pending; cols]; rows],
            n_i: spec.n_i,
            t_final: spec.t_final,
            spec: *spec,
            template: *template,
            failures: BTreeMap::new(),
        }
    }

    fn apply(&mut self, rec: &CellRecord) {
        let (r, c) = (rec.j_index, rec.g_index);
        self.z_avg[r][c] = rec.z_avg;
        self.n_max_used[r][c] = rec.n_max;
        self.status[r][c] = rec.status;
        let key = format!("{r},{c}");
        match &rec.error {
            Some(e) => {
                self.failures.insert(key, e.clone());
            }
            None => {
                self.failures.remove(&key);
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.j_values.len(), self.g_values.len())
    }

    pub fn is_complete(&self) -> bool {
        self.status.iter().flatten().all(|&s| s != CellStatus::Pending)
    }

    /// `z_avg / n_i` of one cell if it finished.
    pub fn normalized(&self, row: usize, col: usize) -> Option<f64> {
        match self.status[row][col] {
            CellStatus::Done => self.z_avg[row][col].map(|z| z / self.n_i as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LogLine {
    Header {
        version: u32,
        grid: GridSpec,
        template: SweepTemplate,
        plan: EvolutionPlan,
    },
    Cell(CellRecord),
}

/// Initial state with `n_i` photons in `start` and both qubits down.
pub fn localized_state(space: &FockSpace, n_i: usize, start: Site) -> Result<StateVector> {
    let full = SiteState::fock(n_i, Qubit::Down);
    let empty = SiteState::fock(0, Qubit::Down);
    match start {
        Site::Left => product_state(space, &[full, empty]),
        Site::Right => product_state(space, &[empty, full]),
    }
}

/// Evolves one cell and averages its imbalance.
pub fn evaluate_cell(
    spec: &GridSpec,
    template: &SweepTemplate,
    plan: &EvolutionPlan,
    j_index: usize,
    g_index: usize,
) -> CellRecord {
    let g = spec.g.values()[g_index];
    let j = spec.j.values()[j_index];
    let model = template.model(g, j);
    let n_max = model.resolve_n_max(spec.n_i);
    let mut record = CellRecord {
        j_index,
        g_index,
        g,
        j,
        status: CellStatus::Failed,
        z_avg: None,
        n_max,
        truncation: None,
        error: None,
    };
    let outcome = run_cell(spec, template, plan, &model, n_max);
    match outcome {
        Ok((z, report)) => {
            record.z_avg = Some(z);
            record.truncation = report;
            match report {
                Some(r) if !r.passed => {
                    record.error = Some(format!(
                        "truncation check failed: deviation {:.3e}, top-level mass {:.3e}",
                        r.max_deviation, r.top_level_mass
                    ));
                }
                _ => record.status = CellStatus::Done,
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn run_cell(
    spec: &GridSpec,
    template: &SweepTemplate,
    plan: &EvolutionPlan,
    model: &ModelConfig,
    n_max: usize,
) -> Result<(f64, Option<ConvergenceReport>)> {
    model.validate()?;
    let build_h = |s: &FockSpace| model.hamiltonian(s);
    let build_psi = |s: &FockSpace| localized_state(s, spec.n_i, template.start);
    let (z, report) = match template.truncation_delta {
        Some(dn) => {
            let (report, z) = checked_imbalance(build_h, build_psi, plan, 2, n_max, dn)?;
            (z, Some(report))
        }
        None => {
            let space = FockSpace::new(n_max, 2)?;
            let h = build_h(&space)?;
            let psi = build_psi(&space)?;
            let z_op = &number(&space, Site::Left)? - &number(&space, Site::Right)?;
            let series = evolve(&h, &psi, plan, &[Observable::new("z", &z_op)])?;
            (series.into_iter().next().expect("one series"), None)
        }
    };
    Ok((time_average(&z, 0.0)?, report))
}

/// Runs (or resumes) a sweep. `plan.t_final` is replaced by the grid's `T`.
pub fn run_sweep(
    spec: &GridSpec,
    template: &SweepTemplate,
    plan: &EvolutionPlan,
    workers: usize,
    checkpoint: Option<&Path>,
) -> Result<PhaseGrid> {
    run_sweep_with(spec, template, plan, workers, checkpoint, |_| {})
}

/// As [`run_sweep`], calling `progress` after every newly finished cell.
pub fn run_sweep_with(
    spec: &GridSpec,
    template: &SweepTemplate,
    plan: &EvolutionPlan,
    workers: usize,
    checkpoint: Option<&Path>,
    progress: impl Fn(&CellRecord) + Sync,
) -> Result<PhaseGrid> {
    spec.validate()?;
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be positive".into()));
    }
    let plan = EvolutionPlan {
        t_final: spec.t_final,
        ..*plan
    };
    plan.validate()?;
    if let Some(dn) = template.truncation_delta {
        if dn < 4 {
            return Err(Error::InvalidParameter(format!("truncation_delta {dn} < 4")));
        }
    }

    let mut grid = PhaseGrid::empty(spec, template);
    let header = LogLine::Header {
        version: CHECKPOINT_VERSION,
        grid: *spec,
        template: *template,
        plan,
    };
    let writer = match checkpoint {
        Some(path) => Some(Mutex::new(open_checkpoint(path, &header, &mut grid)?)),
        None => None,
    };

    let (rows, cols) = grid.shape();
    let mut pending: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|&(r, c)| grid.status[r][c] == CellStatus::Pending)
        .collect();
    // Expensive strong-coupling cells first for better load balance.
    pending.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let results: Mutex<Vec<CellRecord>> = Mutex::new(Vec::with_capacity(pending.len()));
    let io_error: Mutex<Option<Error>> = Mutex::new(None);
    pool.install(|| {
        pending.par_iter().for_each(|&(r, c)| {
            if io_error.lock().expect("lock").is_some() {
                return;
            }
            let rec = evaluate_cell(spec, template, &plan, r, c);
            if let Some(w) = &writer {
                let mut w = w.lock().expect("lock");
                if let Err(e) = append(&mut w, &LogLine::Cell(rec.clone())) {
                    io_error.lock().expect("lock").get_or_insert(e);
                    return;
                }
            }
            progress(&rec);
            results.lock().expect("lock").push(rec);
        });
    });
    if let Some(e) = io_error.into_inner().expect("lock") {
        return Err(e);
    }
    for rec in results.into_inner().expect("lock") {
        grid.apply(&rec);
    }
    Ok(grid)
}

fn append(file: &mut File, line: &LogLine) -> Result<()> {
    let mut text = serde_json::to_string(line)?;
    text.push('\n');
    file.write_all(text.as_bytes())?;
    file.flush()?;
    file.sync_data()?;
    Ok(())
}

/// Opens the checkpoint for appending, replaying any completed cells into `grid`.
fn open_checkpoint(path: &Path, header: &LogLine, grid: &mut PhaseGrid) -> Result<File> {
    let mismatch = |reason: String| Error::CheckpointMismatch {
        path: PathBuf::from(path),
        reason,
    };
    let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
    if file.metadata()?.len() == 0 {
        append(&mut file, header)?;
        return Ok(file);
    }

    let mut text = String::new();
    file.read_to_string(&mut text)?;
    let mut lines: Vec<(usize, &str)> = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        lines.push((offset, line.trim_end_matches('\n')));
        offset += line.len();
    }
    let expected = serde_json::to_value(header)?;
    let first: serde_json::Value =
        serde_json::from_str(lines[0].1).map_err(|e| mismatch(format!("unreadable header: {e}")))?;
    if first != expected {
        return Err(mismatch("header differs from the requested sweep".into()));
    }
    let (rows, cols) = grid.shape();
    let last = lines.len() - 1;
    let mut keep = text.len();
    for (k, &(start, line)) in lines.iter().enumerate().skip(1) {
        match serde_json::from_str::<LogLine>(line) {
            Ok(LogLine::Cell(rec)) if rec.j_index < rows && rec.g_index < cols => grid.apply(&rec),
            Ok(_) => return Err(mismatch(format!("unexpected record on line {}", k + 1))),
            // A torn final line is the remnant of an interrupted write.
            Err(_) if k == last => keep = start,
            Err(e) => return Err(mismatch(format!("line {}: {e}", k + 1))),
        }
    }
    if keep < text.len() {
        file.set_len(keep as u64)?;
    } else if !text.ends_with('\n') {
        file.write_all(b"\n")?;
    }
    file.seek(SeekFrom::End(0))?;
    Ok(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Localized,
    Delocalized,
    Unknown,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Localized => "localized",
            Phase::Delocalized => "delocalized",
            Phase::Unknown => "unknown",
        }
    }
}

/// Labels every cell by `|z_avg| / n_i ≥ threshold`.
pub fn classify(grid: &PhaseGrid, threshold: f64) -> Vec<Vec<Phase>> {
    let (rows, cols) = grid.shape();
    (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| match grid.normalized(r, c) {
                    Some(z) if z.abs() >= threshold => Phase::Localized,
                    Some(_) => Phase::Delocalized,
                    None => Phase::Unknown,
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryAxis {
    G,
    J,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub g: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// Axis along which the label changes.
    pub along: BoundaryAxis,
}

/// Transitions found while scanning one row upward in `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowTransitions {
    #[serde(rename = "J")]
    pub j: f64,
    /// Delocalized → localized.
    pub g_c1: Option<f64>,
    /// Localized → delocalized after `g_c1`.
    pub g_c2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub points: Vec<BoundaryPoint>,
    #[serde(rename = "J_c")]
    pub j_c: Option<f64>,
    pub rows: Vec<RowTransitions>,
}

/// Cell-edge midpoints where the label changes between known neighbours.
pub fn boundary_extract(grid: &PhaseGrid, labels: &[Vec<Phase>]) -> Boundary {
    let (g_axis, j_axis) = (grid.spec.g, grid.spec.j);
    let (gv, jv) = (&grid.g_values, &grid.j_values);
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (r, row) in labels.iter().enumerate() {
        let known: Vec<(usize, Phase)> = row
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p != Phase::Unknown)
            .collect();
        let mut t = RowTransitions {
            j: jv[r],
            g_c1: None,
            g_c2: None,
        };
        for w in known.windows(2) {
            let ((c0, p0), (c1, p1)) = (w[0], w[1]);
            if p0 == p1 {
                continue;
            }
            let g = g_axis.midpoint(gv[c0], gv[c1]);
            points.push(BoundaryPoint {
                g,
                j: jv[r],
                along: BoundaryAxis::G,
            });
            if p1 == Phase::Localized && t.g_c1.is_none() {
                t.g_c1 = Some(g);
            } else if p1 == Phase::Delocalized && t.g_c1.is_some() && t.g_c2.is_none() {
                t.g_c2 = Some(g);
            }
        }
        rows.push(t);
    }
    for c in 0..gv.len() {
        let known: Vec<(usize, Phase)> = labels
            .iter()
            .enumerate()
            .map(|(r, row)| (r, row[c]))
            .filter(|(_, p)| *p != Phase::Unknown)
            .collect();
        for w in known.windows(2) {
            if w[0].1 != w[1].1 {
                points.push(BoundaryPoint {
                    g: gv[c],
                    j: j_axis.midpoint(jv[w[0].0], jv[w[1].0]),
                    along: BoundaryAxis::J,
                });
            }
        }
    }
    let j_c = labels
        .iter()
        .enumerate()
        .filter(|(_, row)| row.contains(&Phase::Localized))
        .map(|(r, _)| jv[r])
        .fold(None, |acc: Option<f64>, j| Some(acc.map_or(j, |a| a.max(j))));
    if j_c.is_none() {
        points.clear();
    }
    Boundary { points, j_c, rows }
}

/// Rows `J`, columns `g`; unfinished cells are written as `nan`.
pub fn phase_grid_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from("# J \\ g");
    for g in &grid.g_values {
        let _ = write!(out, ", {g:.16e}");
    }
    out.push('\n');
    for (r, j) in grid.j_values.iter().enumerate() {
        let _ = write!(out, "{j:.16e}");
        for c in 0..grid.g_values.len() {
            match grid.z_avg[r][c] {
                Some(z) if grid.status[r][c] == CellStatus::Done => {
                    let _ = write!(out, ", {z:.16e}");
                }
                _ => out.push_str(", nan"),
            }
        }
        out.push('\n');
    }
    out
}

/// Long format `g J z_avg label`, one block per `J` row.
pub fn phase_points_dat(grid: &PhaseGrid, labels: &[Vec<Phase>]) -> String {
    let mut out = String::from("# g J z_avg label\n");
    for (r, j) in grid.j_values.iter().enumerate() {
        for (c, g) in grid.g_values.iter().enumerate() {
            let z = grid.z_avg[r][c].filter(|_| grid.status[r][c] == CellStatus::Done);
            let z = z.map_or_else(|| "nan".to_string(), |z| format!("{z:.16e}"));
            let _ = writeln!(out, "{g:.16e} {j:.16e} {z} {}", labels[r][c].as_str());
        }
        out.push('\n');
    }
    out
}

/// JSON summary: axes, metadata, labels, boundary and failures.
pub fn phase_grid_json(grid: &PhaseGrid, threshold: f64, labels: &[Vec<Phase>], boundary: &Boundary) -> Result<String> {
    let doc = serde_json::json!({
        "grid": grid,
        "threshold": threshold,
        "labels": labels,
        "boundary": boundary,
    });
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Writes `phase_grid.csv`, `phase_grid.json` and `phase_points.dat` into `dir`.
pub fn write_outputs(grid: &PhaseGrid, threshold: f64, dir: &Path) -> Result<Boundary> {
    let labels = classify(grid, threshold);
    let boundary = boundary_extract(grid, &labels);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("phase_grid.csv"), phase_grid_csv(grid))?;
    std::fs::write(dir.join("phase_grid.json"), phase_grid_json(grid, threshold, &labels, &boundary)?)?;
    std::fs::write(dir.join("phase_points.dat"), phase_points_dat(grid, &labels))?;
    Ok(boundary)
}

/// Reads the imbalance trace of one cell, for plotting single cells.
pub fn cell_trace(spec: &GridSpec, template: &SweepTemplate, plan: &EvolutionPlan, g: f64, j: f64) -> Result<TimeSeries> {
    let model = template.model(g, j);
    model.validate()?;
    let space = FockSpace::new(model.resolve_n_max(spec.n_i), 2)?;
    let h = model.hamiltonian(&space)?;
    let psi = localized_state(&space, spec.n_i, template.start)?;
    let z_op = &number(&space, Site::Left)? - &number(&space, Site::Right)?;
    let plan = EvolutionPlan {
        t_final: spec.t_final,
        ..*plan
    };
    Ok(evolve(&h, &psi, &plan, &[Observable::new("z", &z_op)])?.remove(0))
}
