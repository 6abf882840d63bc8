//! Numbered reproduction checks. Prints one PASS/FAIL line per check and a
//! summary. Set `ACCEPTANCE_ONLY=1,7,11` to run a subset and
//! `ACCEPTANCE_STRICT=1` to exit non-zero when any check fails.

use std::cell::OnceCell;
use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rabi_dimer::fockspace::{displaced_fock, identity, number, pauli, product_state, PauliAxis, SiteState};
use rabi_dimer::model::{
    a2_renormalize, build_dimer, build_rabi, default_n_max, parity_diagonal, swap_operator, A2Map,
    DimerParams, RabiParams,
};
use rabi_dimer::observables::{summarize, time_average, window_average, window_rms, Traces};
use rabi_dimer::propagate::{evolve, Engine, EvolutionPlan, Observable, TimeSeries};
use rabi_dimer::spectral::{
    diagonal_ensemble, eigensolve_sectors, fit_quadratic, franck_condon, occupied_sectors, scan_point,
    ScanSettings,
};
use rabi_dimer::sweep::{boundary_extract, classify, localized_state, run_sweep, Axis, GridSpec, Phase, SweepTemplate};
use rabi_dimer::trajectories::{
    lindblad_reference, run_ensemble, run_trajectory, DampingConfig, JumpBasis, JumpChannels, TrajectorySetup,
};
use rabi_dimer::{FockSpace, Qubit, Result, Site};

const N_I: usize = 20;
const J_REF: f64 = 0.01;
const T_CI: f64 = 2000.0;
/// Converged truncation for the g = 2 dimer runs.
const N_MAX_DEEP: usize = 90;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Dimer run from `|n_i,↓⟩|0,↓⟩` with the traces several checks share.
struct DimerRun {
    n_left: TimeSeries,
    n_right: TimeSeries,
    sigma_z: Vec<TimeSeries>,
    z: TimeSeries,
    n_max: usize,
    seconds: f64,
}

fn dimer_run(g: f64, j: f64, n_max: usize, t_final: f64) -> Result<DimerRun> {
    let start = Instant::now();
    let space = FockSpace::new(n_max, 2)?;
    let h = build_dimer(&space, &DimerParams::identical(RabiParams::resonant(g), j))?;
    let psi = localized_state(&space, N_I, Site::Left)?;
    let nl = number(&space, Site::Left)?;
    let nr = number(&space, Site::Right)?;
    let szl = pauli(&space, Site::Left, PauliAxis::Z)?;
    let szr = pauli(&space, Site::Right, PauliAxis::Z)?;
    let plan = EvolutionPlan::new(t_final).with_engine(Engine::Krylov);
    let mut out = evolve(
        &h,
        &psi,
        &plan,
        &[
            Observable::new("N_L", &nl),
            Observable::new("N_R", &nr),
            Observable::new("sigma_z_L", &szl),
            Observable::new("sigma_z_R", &szr),
        ],
    )?
    .into_iter();
    let n_left = out.next().expect("N_L");
    let n_right = out.next().expect("N_R");
    let sigma_z: Vec<TimeSeries> = out.collect();
    let z = n_left.zip_with(&n_right, "z", |l, r| l - r)?;
    Ok(DimerRun {
        n_left,
        n_right,
        sigma_z,
        z,
        n_max,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Default)]
struct Shared {
    weak: OnceCell<std::result::Result<DimerRun, String>>,
    blockade: OnceCell<std::result::Result<DimerRun, String>>,
    eruption: OnceCell<std::result::Result<DimerRun, String>>,
}

impl Shared {
    fn get<'a>(
        cell: &'a OnceCell<std::result::Result<DimerRun, String>>,
        g: f64,
        n_max: usize,
    ) -> std::result::Result<&'a DimerRun, String> {
        cell.get_or_init(|| dimer_run(g, J_REF, n_max, T_CI).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn weak(&self) -> std::result::Result<&DimerRun, String> {
        Self::get(&self.weak, 0.01, default_n_max(N_I, 0.01))
    }

    fn blockade(&self) -> std::result::Result<&DimerRun, String> {
        Self::get(&self.blockade, 0.2, default_n_max(N_I, 0.2))
    }

    fn eruption(&self) -> std::result::Result<&DimerRun, String> {
        Self::get(&self.eruption, 2.0, N_MAX_DEEP)
    }
}

fn linear_limit() -> Result<Outcome> {
    let start = Instant::now();
    let n_max = default_n_max(N_I, 0.0);
    let run = dimer_run(0.0, J_REF, n_max, T_CI)?;
    let dev = run
        .z
        .times()
        .iter()
        .zip(run.z.values())
        .map(|(t, z)| (z - 20.0 * (2.0 * J_REF * t).cos()).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        dev < 1e-5 && secs < 60.0,
        format!("max|z - 20cos(2Jt)| = {dev:.2e} (< 1e-5), runtime {secs:.1} s (< 60 s), n_max {n_max}"),
    ))
}

fn double_transition(shared: &Shared) -> std::result::Result<Outcome, String> {
    let mut parts = Vec::new();
    let mut pass = true;
    for (label, run, bound, below) in [
        ("g=0.01", shared.weak()?, 0.15, true),
        ("g=0.2", shared.blockade()?, 0.8, false),
        ("g=2", shared.eruption()?, 0.1, true),
    ] {
        let r = time_average(&run.z, 0.0).map_err(|e| e.to_string())? / N_I as f64;
        let ok = if below { r < bound } else { r > bound };
        pass &= ok;
        parts.push(format!(
            "{label}: z_avg/n_i = {r:.4} ({} {bound}) [n_max {}, {:.0} s]",
            if below { "<" } else { ">" },
            run.n_max,
            run.seconds
        ));
    }
    Ok(Outcome::new(pass, format!("T = {T_CI}; {}", parts.join("; "))))
}

fn photon_eruption(shared: &Shared) -> std::result::Result<Outcome, String> {
    let single = (|| -> Result<f64> {
        let n_max = default_n_max(0, 2.0);
        let space = FockSpace::new(n_max, 1)?;
        let h = build_rabi(&space, &RabiParams::resonant(2.0))?;
        let psi = product_state(&space, &[SiteState::fock(0, Qubit::Down)])?;
        let n = number(&space, Site::Left)?;
        let sz = pauli(&space, Site::Left, PauliAxis::Z)?;
        let out = evolve(
            &h,
            &psi,
            &EvolutionPlan::new(100.0).with_dt(0.1),
            &[Observable::new("N", &n), Observable::new("sigma_z", &sz)],
        )?;
        let s = summarize(
            Traces {
                n_left: &out[0],
                n_right: None,
                sigma_z: &out[1..],
            },
            0,
        )?;
        Ok(s.delta_n)
    })()
    .map_err(|e| e.to_string())?;
    let run = shared.eruption()?;
    let dimer = summarize(
        Traces {
            n_left: &run.n_left,
            n_right: Some(&run.n_right),
            sigma_z: &run.sigma_z,
        },
        N_I,
    )
    .map_err(|e| e.to_string())?
    .delta_n;
    let inside = |x: f64| (x - 7.5).abs() <= 1.5;
    Ok(Outcome::new(
        inside(single) && inside(dimer),
        format!("single Rabi ΔN = {single:.3}, dimer ΔN per cavity = {dimer:.3} (target 7.5 ± 1.5)"),
    ))
}

fn quasi_equilibration(shared: &Shared) -> std::result::Result<Outcome, String> {
    let run = shared.eruption()?;
    let t = run.z.t_final();
    let e = |r: Result<f64>| r.map_err(|e| e.to_string());
    let sz_r = e(window_average(&run.sigma_z[1], t / 2.0, t))?.abs();
    let z_late = e(window_average(&run.z, t / 2.0, t))?;
    let z_rms = e(window_rms(&run.z, t / 2.0, t))?;
    let start = Instant::now();
    let de = (|| -> Result<f64> {
        let space = FockSpace::new(run.n_max, 2)?;
        let h = build_dimer(&space, &DimerParams::identical(RabiParams::resonant(2.0), J_REF))?;
        let psi = localized_state(&space, N_I, Site::Left)?;
        let wanted = occupied_sectors(&psi, true, 1e-14);
        let spec = eigensolve_sectors(&h, h.dim(), true, Some(&wanted))?;
        let z = &number(&space, Site::Left)? - &number(&space, Site::Right)?;
        diagonal_ensemble(&psi, &spec, &z)
    })()
    .map_err(|e| e.to_string())?;
    let de_secs = start.elapsed().as_secs_f64();
    let pass = sz_r < 0.1 && z_late.abs() < 0.5 && (de - z_late).abs() <= 3.0 * z_rms;
    Ok(Outcome::new(
        pass,
        format!(
            "over [T/2, T], T = {t}: |<σz_R>| = {sz_r:.4} (< 0.1), |<N_L - N_R>| = {:.4} (< 0.5), \
             diagonal ensemble {de:.3e} vs mean {z_late:.4}, |diff| {:.4} (<= 3 x rms {z_rms:.4}) \
             [n_max {}, eigensolve {de_secs:.0} s]",
            z_late.abs(),
            (de - z_late).abs(),
            run.n_max
        ),
    ))
}

fn spectral_diagnostics() -> Result<Outcome> {
    let settings = ScanSettings::default();
    let zeta_axis = Axis::log(0.01, 3.0, 16).values();
    let mut zeta = Vec::new();
    for &g in &zeta_axis {
        zeta.push((g, scan_point(g, &settings)?.zeta));
    }
    let (g_peak, z_peak) = zeta
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let increasing = zeta.windows(2).all(|w| w[1].1 >= w[0].1);
    let decreasing = zeta.windows(2).all(|w| w[1].1 <= w[0].1);
    let non_monotonic = !increasing && !decreasing;
    let peak_ok = (0.05..=1.0).contains(&g_peak);
    let mut chi = Vec::new();
    for g in [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0] {
        chi.push((g, scan_point(g, &settings)?.chi_mean));
    }
    let (c, resid) = fit_quadratic(&chi);
    let listing: Vec<String> = zeta.iter().map(|(g, z)| format!("{g:.3}:{z:.3e}")).collect();
    Ok(Outcome::new(
        non_monotonic && peak_ok && resid < 0.2,
        format!(
            "ζ(400 gaps) non-monotonic {non_monotonic}, peak {z_peak:.3e} at g = {g_peak:.3} (want [0.05, 1]); \
             mean χ(20) ≈ {c:.4} g² on [1, 3], max relative residual {:.1}% (< 20%); ζ by g [{}]",
            100.0 * resid,
            listing.join(", ")
        ),
    ))
}

fn phase_boundary() -> Result<Outcome> {
    let start = Instant::now();
    let spec = GridSpec {
        g: Axis::log(0.01, 2.0, 9),
        j: Axis::log(0.005, 0.08, 5),
        n_i: N_I,
        t_final: T_CI,
        threshold: 0.5,
    };
    let template = SweepTemplate {
        truncation_delta: None,
        ..Default::default()
    };
    let grid = run_sweep(&spec, &template, &EvolutionPlan::new(T_CI), 1, None)?;
    let labels = classify(&grid, spec.threshold);
    let boundary = boundary_extract(&grid, &labels);
    let mut pass = true;
    let mut notes = Vec::new();
    match boundary.j_c {
        Some(jc) => {
            let ok = (0.015..=0.06).contains(&jc);
            pass &= ok;
            notes.push(format!("J_c = {jc:.4} (want [0.015, 0.06])"));
        }
        None => {
            pass = false;
            notes.push("J_c absent".into());
        }
    }
    for (row, t) in boundary.rows.iter().enumerate() {
        let target = t.j * (N_I as f64).sqrt();
        let checked = [0.005, 0.01, 0.02].iter().any(|j| (t.j - j).abs() < 1e-12);
        let mut refined = None;
        if checked {
            refined = match t.g_c1 {
                Some(mid) => Some(refine_g_c1(&grid.g_values, mid, t.j, spec.threshold)?),
                None => None,
            };
            let ok = refined.is_some_and(|g| g / target <= 2.0 && target / g <= 2.0);
            pass &= ok;
        }
        let row_labels: String = labels[row]
            .iter()
            .map(|p| match p {
                Phase::Localized => 'L',
                Phase::Delocalized => 'D',
                Phase::Unknown => '?',
            })
            .collect();
        notes.push(format!(
            "J={:.4} [{row_labels}] g_c1 {}{} (J√n_i {target:.4}) g_c2 {}",
            t.j,
            t.g_c1.map_or("-".into(), |g| format!("{g:.4}")),
            refined.map_or(String::new(), |g| format!(", bisected {g:.4} = {:.2} J√n_i", g / target)),
            t.g_c2.map_or("-".into(), |g| format!("{g:.4}")),
        ));
    }
    // A row with localized cells but no upper transition stays localized to the
    // grid edge, so its g_c2 counts as beyond the grid.
    let g_c2: Vec<f64> = boundary
        .rows
        .iter()
        .zip(&labels)
        .filter(|(_, l)| l.contains(&Phase::Localized))
        .map(|(t, _)| t.g_c2.unwrap_or(f64::INFINITY))
        .collect();
    let finite = g_c2.iter().filter(|g| g.is_finite()).count();
    let monotone = g_c2.windows(2).all(|w| w[1] <= w[0]);
    pass &= monotone && finite >= 2;
    notes.push(format!("g_c2 non-increasing in J: {monotone} ({finite} finite)"));
    Ok(Outcome::new(
        pass,
        format!("{}; {:.0} s", notes.join("; "), start.elapsed().as_secs_f64()),
    ))
}

/// Narrows the lower transition between the grid cells around `mid` by
/// bisection in `log g`, with the grid's run length and threshold.
fn refine_g_c1(g_values: &[f64], mid: f64, j: f64, threshold: f64) -> Result<f64> {
    let Some(c) = g_values.windows(2).position(|w| w[0] < mid && mid < w[1]) else {
        return Ok(mid);
    };
    let (mut lo, mut hi) = (g_values[c], g_values[c + 1]);
    for _ in 0..5 {
        let g = (lo * hi).sqrt();
        let run = dimer_run(g, j, default_n_max(N_I, g), T_CI)?;
        if time_average(&run.z, 0.0)?.abs() / N_I as f64 >= threshold {
            hi = g;
        } else {
            lo = g;
        }
    }
    Ok((lo * hi).sqrt())
}

fn franck_condon_oracle() -> Result<Outcome> {
    let space = FockSpace::new(140, 1)?;
    let mut worst = 0.0f64;
    for n in 0..=20 {
        for k in 0..=12 {
            let alpha = 0.25 * k as f64;
            let plus = displaced_fock(&space, n, C64::new(alpha, 0.0), Qubit::Down)?;
            let minus = displaced_fock(&space, n, C64::new(-alpha, 0.0), Qubit::Down)?;
            let numeric = minus.inner(&plus);
            worst = worst.max((numeric - franck_condon(n, alpha)).norm());
        }
    }
    Ok(Outcome::new(
        worst < 1e-10,
        format!("max |<-α,n|α,n> - e^(-2α²)L_n(4α²)| = {worst:.2e} over n <= 20, α in 0..3 step 0.25"),
    ))
}

fn lowest_levels(p: &DimerParams, n_max: usize, k: usize) -> Result<Vec<f64>> {
    let space = FockSpace::new(n_max, 2)?;
    let h = build_dimer(&space, p)?;
    Ok(eigensolve_sectors(&h, k, true, None)?.energies().to_vec())
}

fn gap_error(p: &DimerParams, map: A2Map, n_max: usize) -> Result<(f64, f64)> {
    let k = 21;
    let with_a2 = lowest_levels(p, n_max, k)?;
    let coarse = lowest_levels(p, n_max - 10, k)?;
    let renorm = a2_renormalize(p, map)?.params;
    let mapped = lowest_levels(&renorm, n_max, k)?;
    let gaps = |e: &[f64]| e.iter().skip(1).map(|x| x - e[0]).collect::<Vec<f64>>();
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let err = max_diff(&gaps(&with_a2), &gaps(&mapped));
    let truncation = max_diff(&with_a2, &coarse);
    Ok((err, truncation))
}

fn a2_renormalization() -> Result<Outcome> {
    let n_max = 40;
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [0.1, 0.75] {
        let p = DimerParams::identical(RabiParams::resonant(0.5), J_REF).with_a2(d);
        let (err, trunc) = gap_error(&p, A2Map::Quadrature, n_max)?;
        pass &= err < 1e-6 && trunc < 1e-9;
        let (published, _) = gap_error(&p, A2Map::Published, n_max)?;
        let uncoupled = DimerParams::identical(RabiParams::resonant(0.5), 0.0).with_a2(d);
        let (j0, _) = gap_error(&uncoupled, A2Map::Quadrature, n_max)?;
        parts.push(format!(
            "D={d}: max gap error {err:.2e} (< 1e-6), truncation shift {trunc:.1e}; \
             alternative map {published:.2e}; same map at J=0 {j0:.2e}"
        ));
    }
    Ok(Outcome::new(pass, format!("g=0.5, J=0.01, n_max {n_max}, 20 gaps; {}", parts.join("; "))))
}

fn trajectory_lindblad() -> Result<Outcome> {
    let start = Instant::now();
    let space = FockSpace::new(24, 1)?;
    let h = build_rabi(&space, &RabiParams::resonant(0.2))?;
    let psi = product_state(&space, &[SiteState::fock(10, Qubit::Down)])?;
    let n = number(&space, Site::Left)?;
    let observables = [Observable::new("N", &n)];
    let plan = EvolutionPlan::new(100.0).with_dt(5.0);
    let cfg = DampingConfig::new(50.0, 300, 2024).with_basis(JumpBasis::Bare);
    let channels = JumpChannels::new(&h, cfg.basis(0.2))?;
    let setup = TrajectorySetup {
        h: &h,
        psi0: &psi,
        plan: &plan,
        cfg: &cfg,
        channels: &channels,
        observables: &observables,
    };
    let (ens, _) = run_ensemble(&setup, 1)?;
    let reference = lindblad_reference(&h, &psi, &plan, &cfg, &channels, &observables)?;
    let mut worst = 0.0f64;
    let mut outside = 0;
    for k in 1..=20 {
        let m = ens.mean[0].values()[k];
        let se = ens.std_err[0].values()[k];
        let r = reference[0].values()[k];
        let sigmas = (m - r).abs() / se.max(1e-300);
        worst = worst.max(sigmas);
        if sigmas > 3.0 {
            outside += 1;
        }
    }
    let (again, _) = run_ensemble(&setup, 3)?;
    let single_a = run_trajectory(&setup, 17)?;
    let single_b = run_trajectory(&setup, 17)?;
    let identical = again == ens && single_a == single_b;
    Ok(Outcome::new(
        outside == 0 && identical,
        format!(
            "dim {}, 300 trajectories, τ_γ = 50: worst deviation {worst:.2} σ at 20 checkpoints ({outside} beyond 3σ); \
             bit-identical on rerun with 3 workers: {identical}; {:.0} s",
            h.dim(),
            start.elapsed().as_secs_f64()
        ),
    ))
}

fn damped_dimer(shared: &Shared) -> std::result::Result<Outcome, String> {
    let undamped = time_average(&shared.blockade()?.z, 0.0).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let damped = (|| -> Result<(f64, usize)> {
        let space = FockSpace::new(default_n_max(N_I, 0.2), 2)?;
        let h = build_dimer(&space, &DimerParams::identical(RabiParams::resonant(0.2), J_REF))?;
        let psi = localized_state(&space, N_I, Site::Left)?;
        let z = &number(&space, Site::Left)? - &number(&space, Site::Right)?;
        let observables = [Observable::new("z", &z)];
        let plan = EvolutionPlan::new(T_CI);
        let cfg = DampingConfig::new(1e4, 300, 7);
        let channels = JumpChannels::new(&h, cfg.basis(0.2))?;
        let setup = TrajectorySetup {
            h: &h,
            psi0: &psi,
            plan: &plan,
            cfg: &cfg,
            channels: &channels,
            observables: &observables,
        };
        let (ens, _) = run_ensemble(&setup, 1)?;
        Ok((time_average(&ens.mean[0], 0.0)?, ens.total_jumps))
    })()
    .map_err(|e| e.to_string())?;
    let (z_damped, jumps) = damped;
    let floor = 0.3 * N_I as f64;
    Ok(Outcome::new(
        z_damped < undamped && z_damped > floor,
        format!(
            "g=0.2, J=0.01, τ_γ=1e4, 300 bare-jump trajectories, T = {T_CI}: z_avg {z_damped:.3} vs undamped {undamped:.3}, \
             floor {floor} ({jumps} jumps, {:.0} s)",
            start.elapsed().as_secs_f64()
        ),
    ))
}

fn structural() -> Result<Outcome> {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let space = FockSpace::new(8, 2)?;
    let p = DimerParams::identical(RabiParams::resonant(0.6), 0.05).with_a2(0.1);
    let h = build_dimer(&space, &p)?;
    check("hermiticity", h.is_hermitian() && h.hermitian_defect() == 0.0);
    check("parity", h.commutes_with_diagonal(&parity_diagonal(&space)) == 0.0);
    let s = swap_operator(&space);
    check("swap symmetry of H", (&(&s * &h) * &s).max_abs_diff(&h) < 1e-13);

    let psi = product_state(&space, &[SiteState::fock(4, Qubit::Down), SiteState::fock(1, Qubit::Up)])?;
    let id = identity(&space);
    let nl = number(&space, Site::Left)?;
    let obs = [Observable::new("norm", &id), Observable::new("E", &h), Observable::new("N_L", &nl)];
    let plan = EvolutionPlan::new(50.0).with_dt(0.5);
    let krylov = evolve(&h, &psi, &plan.with_engine(Engine::Krylov), &obs)?;
    let dense = evolve(&h, &psi, &plan.with_engine(Engine::FullDiag), &obs)?;
    let e0 = krylov[1].values()[0];
    check("norm conservation", krylov[0].values().iter().all(|v| (v - 1.0).abs() < 1e-8));
    check("energy conservation", krylov[1].values().iter().all(|v| (v - e0).abs() < 1e-7 * e0.abs().max(1.0)));
    let engine_dev = krylov[2]
        .values()
        .iter()
        .zip(dense[2].values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check("engine agreement", engine_dev < 1e-6);

    let grid_spec = GridSpec {
        g: Axis::log(0.05, 0.8, 3),
        j: Axis::log(0.01, 0.04, 2),
        n_i: 4,
        t_final: 100.0,
        threshold: 0.5,
    };
    let template = SweepTemplate {
        truncation_delta: None,
        n_max: Some(10),
        ..Default::default()
    };
    let sweep_plan = EvolutionPlan::new(100.0);
    let one = run_sweep(&grid_spec, &template, &sweep_plan, 1, None)?;
    let three = run_sweep(&grid_spec, &template, &sweep_plan, 3, None)?;
    check("worker-count determinism", one == three);
    let mirrored = SweepTemplate {
        start: Site::Right,
        ..template
    };
    let right = run_sweep(&grid_spec, &mirrored, &sweep_plan, 1, None)?;
    let swap_dev = one
        .z_avg
        .iter()
        .flatten()
        .zip(right.z_avg.iter().flatten())
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => (a + b).abs() / a.abs().max(1.0),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    check("swap antisymmetry", swap_dev < 1e-12);
    let secs = start.elapsed().as_secs_f64();
    check("runtime", secs < 300.0);
    Ok(Outcome::new(
        failures.is_empty(),
        format!(
            "engine deviation {engine_dev:.1e}, swap deviation {swap_dev:.1e}, {secs:.1} s; failing: [{}]",
            failures.join(", ")
        ),
    ))
}

fn selection() -> Option<BTreeSet<usize>> {
    let raw = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(raw.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() {
    let only = selection();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let shared = Shared::default();
    let lift = |r: Result<Outcome>| r.map_err(|e| e.to_string());
    let checks: Vec<(usize, &str, Box<dyn Fn() -> std::result::Result<Outcome, String> + '_>)> = vec![
        (1, "linear-limit oracle", Box::new(|| lift(linear_limit()))),
        (2, "double transition", Box::new(|| double_transition(&shared))),
        (3, "photon eruption", Box::new(|| photon_eruption(&shared))),
        (4, "quasi-equilibration", Box::new(|| quasi_equilibration(&shared))),
        (5, "spectral diagnostics", Box::new(|| lift(spectral_diagnostics()))),
        (6, "phase-boundary scalings", Box::new(|| lift(phase_boundary()))),
        (7, "Franck-Condon closed form", Box::new(|| lift(franck_condon_oracle()))),
        (8, "A² renormalization", Box::new(|| lift(a2_renormalization()))),
        (9, "trajectory/Lindblad equivalence", Box::new(|| lift(trajectory_lindblad()))),
        (10, "damped dimer", Box::new(|| damped_dimer(&shared))),
        (11, "structural properties", Box::new(|| lift(structural()))),
    ];
    let (mut passed, mut failed) = (0, 0);
    for (id, name, run) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        if outcome.pass {
            passed += 1;
        } else {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
