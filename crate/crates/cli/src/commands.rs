use std::fmt::Write as _;
use std::path::Path;

use rabi_dimer::fockspace::{number, pauli, product_state, PauliAxis, SiteState};
use rabi_dimer::model::a2_renormalize;
use rabi_dimer::observables::{imbalance, summarize, time_average, Traces};
use rabi_dimer::propagate::{check_truncation, evolve, to_csv, ConvergenceReport, Observable, TimeSeries};
use rabi_dimer::spectral::{fit_quadratic, scan_point, ScanPoint};
use rabi_dimer::sweep::{run_sweep_with, write_outputs, CellStatus};
use rabi_dimer::trajectories::{run_ensemble, JumpChannels, TrajectorySetup};
use rabi_dimer::{FockSpace, OperatorMatrix};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Format, Overrides, RunConfig};
use crate::error::CliError;

/// Shared state of one invocation.
pub struct Context {
    pub config: RunConfig,
    pub overrides: Overrides,
    pub workers: usize,
    pub command: &'static str,
}

impl Context {
    fn out_dir(&self) -> Result<std::path::PathBuf, CliError> {
        let dir = self.config.out_dir(&self.overrides);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn wants(&self, f: Format) -> bool {
        self.config.output().wants(f)
    }

    fn write_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let resolved = self.config.resolved(self.command, &self.overrides);
        write(dir, "resolved_config.json", &serde_json::to_string_pretty(&resolved)?)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Space-separated columns with a commented header.
fn dat(series: &[&TimeSeries]) -> String {
    let mut out = String::from("# t");
    for s in series {
        let _ = write!(out, " {}", s.label);
    }
    out.push('\n');
    if let Some(first) = series.first() {
        for (k, t) in first.times().iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for s in series {
                let _ = write!(out, " {:.16e}", s.values()[k]);
            }
            out.push('\n');
        }
    }
    out
}

struct SiteOperators {
    labels: Vec<String>,
    ops: Vec<OperatorMatrix>,
}

fn site_operators(space: &FockSpace) -> Result<SiteOperators, CliError> {
    let mut labels = Vec::new();
    let mut ops = Vec::new();
    let names = ["L", "R"];
    for &site in space.sites() {
        labels.push(format!("N_{}", names[site.index()]));
        ops.push(number(space, site)?);
    }
    for &site in space.sites() {
        labels.push(format!("sigma_z_{}", names[site.index()]));
        ops.push(pauli(space, site, PauliAxis::Z)?);
    }
    Ok(SiteOperators { labels, ops })
}

impl SiteOperators {
    fn observables(&self) -> Vec<Observable<'_>> {
        self.labels.iter().zip(&self.ops).map(|(l, o)| Observable::new(l, o)).collect()
    }
}

/// Adds `z` and `N_tot` columns for two-site runs.
fn with_derived(series: Vec<TimeSeries>, sites: usize) -> Result<Vec<TimeSeries>, CliError> {
    if sites == 1 {
        return Ok(series);
    }
    let z = imbalance(&series[0], &series[1])?;
    let n_tot = series[0].zip_with(&series[1], "N_tot", |l, r| l + r)?;
    let mut out = series;
    out.insert(2, z);
    out.insert(3, n_tot);
    Ok(out)
}

fn summary_json(series: &[TimeSeries], sites: usize, n_i: usize) -> Result<serde_json::Value, CliError> {
    let sigma: Vec<TimeSeries> = series
        .iter()
        .filter(|s| s.label.starts_with("sigma_z"))
        .cloned()
        .collect();
    let traces = Traces {
        n_left: &series[0],
        n_right: if sites == 2 { Some(&series[1]) } else { None },
        sigma_z: &sigma,
    };
    let summary = summarize(traces, n_i)?;
    Ok(serde_json::to_value(summary)?)
}

pub fn cmd_evolve(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = cfg.resolved_model();
    let n_max = model.n_max.expect("resolved");
    let space = FockSpace::new(n_max, model.sites)?;
    let h = model.hamiltonian(&space)?;
    let init = cfg.initial_state();
    let psi = init.build(&space)?;
    let plan = cfg.plan();
    let ops = site_operators(&space)?;
    let dir = ctx.out_dir()?;
    ctx.write_resolved(&dir)?;

    let report = match cfg.truncation_check {
        Some(check) => {
            let states: Vec<SiteState> = init.build_states()?;
            Some(check_truncation(
                |s| model.hamiltonian(s),
                |s| product_state(s, &states),
                &plan,
                model.sites,
                n_max,
                check.delta_n,
            )?)
        }
        None => None,
    };
    let series = with_derived(evolve(&h, &psi, &plan, &ops.observables())?, model.sites)?;
    let refs: Vec<&TimeSeries> = series.iter().collect();
    if ctx.wants(Format::Csv) {
        write(&dir, "traces.csv", &to_csv(&refs)?)?;
    }
    if ctx.wants(Format::Dat) {
        write(&dir, "traces.dat", &dat(&refs))?;
    }
    if ctx.wants(Format::Json) {
        let doc = json!({
            "summary": summary_json(&series, model.sites, init.total_fock())?,
            "n_max": n_max,
            "dim": space.dim(),
            "truncation": report,
        });
        write(&dir, "summary.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    check_report(report)
}

fn check_report(report: Option<ConvergenceReport>) -> Result<(), CliError> {
    match report {
        Some(r) if !r.passed => Err(CliError::Truncation(format!(
            "n_max {} vs {}: deviation {:.3e}, top-level mass {:.3e}",
            r.n_max, r.n_max_reference, r.max_deviation, r.top_level_mass
        ))),
        _ => Ok(()),
    }
}

pub fn cmd_trajectories(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let damping = cfg
        .damping(ctx.overrides.seed)
        .ok_or_else(|| CliError::Config("trajectories requires a `damping` block".into()))?;
    let model = cfg.resolved_model();
    let space = FockSpace::new(model.n_max.expect("resolved"), model.sites)?;
    let h = model.hamiltonian(&space)?;
    let init = cfg.initial_state();
    let psi = init.build(&space)?;
    let plan = cfg.plan();
    let ops = site_operators(&space)?;
    let observables = ops.observables();
    let channels = JumpChannels::new(&h, damping.basis(model.g / model.omega0))?;
    let dir = ctx.out_dir()?;
    ctx.write_resolved(&dir)?;

    let setup = TrajectorySetup {
        h: &h,
        psi0: &psi,
        plan: &plan,
        cfg: &damping,
        channels: &channels,
        observables: &observables,
    };
    let (ens, _) = run_ensemble(&setup, ctx.workers)?;
    let mean = with_derived(ens.mean.clone(), model.sites)?;
    let mut columns: Vec<&TimeSeries> = mean.iter().collect();
    columns.extend(ens.std_err.iter());
    if ctx.wants(Format::Csv) {
        write(&dir, "ensemble.csv", &to_csv(&columns)?)?;
    }
    if ctx.wants(Format::Dat) {
        write(&dir, "ensemble.dat", &dat(&columns))?;
    }
    if ctx.wants(Format::Json) {
        let z_avg = if model.sites == 2 {
            Some(time_average(&mean[2], 0.0)?)
        } else {
            None
        };
        let doc = json!({
            "z_avg": z_avg,
            "n_i": init.total_fock(),
            "n_traj": ens.n_traj,
            "master_seed": ens.master_seed,
            "jump_basis": ens.jump_basis,
            "total_jumps": ens.total_jumps,
            "kappa": damping.kappa(),
            "n_max": space.n_max(),
        });
        write(&dir, "summary.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(())
}

pub fn cmd_spectrum(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let block = cfg.spectrum.unwrap_or_default();
    let settings = cfg.scan_settings();
    let dir = ctx.out_dir()?;
    ctx.write_resolved(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let gs = block.g.values();
    let points: Vec<ScanPoint> = pool.install(|| {
        gs.par_iter()
            .map(|&g| scan_point(g, &settings))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let [lo, hi] = block.fit_range;
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.g >= lo && p.g <= hi)
        .map(|p| (p.g / settings.omega0, p.chi_mean))
        .collect();
    let fit = (!fit_points.is_empty()).then(|| fit_quadratic(&fit_points));

    let mut table = String::from("# g zeta chi_mean n_max max_residual\n");
    for p in &points {
        let _ = writeln!(
            table,
            "{:.16e} {:.16e} {:.16e} {} {:.3e}",
            p.g, p.zeta, p.chi_mean, p.n_max, p.max_residual
        );
    }
    if ctx.wants(Format::Dat) {
        write(&dir, "spectrum.dat", &table)?;
    }
    if ctx.wants(Format::Csv) {
        let mut csv = String::from("# g, zeta, chi_mean, n_max, max_residual\n");
        for p in &points {
            let _ = writeln!(
                csv,
                "{:.16e}, {:.16e}, {:.16e}, {}, {:.16e}",
                p.g, p.zeta, p.chi_mean, p.n_max, p.max_residual
            );
        }
        write(&dir, "spectrum.csv", &csv)?;
    }
    if ctx.wants(Format::Json) {
        let doc = json!({
            "settings": settings,
            "points": points,
            "chi_fit": fit.map(|(c, r)| json!({"c": c, "max_relative_residual": r, "range": [lo, hi]})),
        });
        write(&dir, "spectrum.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(())
}

pub fn cmd_renorm(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let map = cfg.renorm.unwrap_or_default().map;
    let mapped = a2_renormalize(&cfg.model.dimer(), map)?;
    let site = mapped.params.left;
    let doc = json!({
        "omega0": site.omega0,
        "Omega": site.omega_q,
        "g": site.g,
        "J": mapped.params.j,
        "r": mapped.r,
        "map": mapped.map,
        "D": cfg.model.d,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    println!("{text}");
    let dir = ctx.out_dir()?;
    ctx.write_resolved(&dir)?;
    if ctx.wants(Format::Json) {
        write(&dir, "renorm.json", &text)?;
    }
    if ctx.wants(Format::Dat) {
        let line = format!(
            "# D omega0 g J r\n{:.16e} {:.16e} {:.16e} {:.16e} {:.16e}\n",
            cfg.model.d, site.omega0, site.g, mapped.params.j, mapped.r
        );
        write(&dir, "renorm.dat", &line)?;
    }
    Ok(())
}

pub fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let grid = cfg.grid();
    let template = cfg.sweep_template();
    let plan = cfg.plan();
    let block = cfg.sweep_block();
    let dir = ctx.out_dir()?;
    ctx.write_resolved(&dir)?;
    let checkpoint = dir.join(block.checkpoint.unwrap_or_else(|| "sweep_checkpoint.jsonl".into()));
    let result = run_sweep_with(&grid, &template, &plan, ctx.workers, Some(&checkpoint), |rec| {
        let z = rec.z_avg.map_or_else(|| "n/a".to_string(), |z| format!("{z:.4}"));
        eprintln!(
            "cell J={:.4e} g={:.4e}: {:?}, z_avg {z}, n_max {}",
            rec.j, rec.g, rec.status, rec.n_max
        );
    })?;
    let boundary = write_outputs(&result, grid.threshold, &dir)?;
    if !ctx.wants(Format::Csv) {
        std::fs::remove_file(dir.join("phase_grid.csv"))?;
    }
    if !ctx.wants(Format::Json) {
        std::fs::remove_file(dir.join("phase_grid.json"))?;
    }
    if !ctx.wants(Format::Dat) {
        std::fs::remove_file(dir.join("phase_points.dat"))?;
    }
    match boundary.j_c {
        Some(j) => eprintln!("J_c = {j:.4e}"),
        None => eprintln!("no localized cells"),
    }
    let failed: Vec<&String> = result.failures.values().collect();
    let any_failed = result.status.iter().flatten().any(|&s| s == CellStatus::Failed);
    if any_failed {
        let truncation = failed.iter().any(|m| m.starts_with("truncation"));
        let msg = format!("{} cell(s) failed; see phase_grid.json", failed.len());
        return Err(if truncation {
            CliError::Truncation(msg)
        } else {
            CliError::Numerical(msg)
        });
    }
    Ok(())
}
