//! Cavity damping by quantum-jump unraveling, with a dense master-equation
//! integrator for small systems.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{annihilator, state_norm, OperatorMatrix, SparseBlock, StateVector};
use crate::linalg::{Eigensystem, Lanczos};
use crate::propagate::{parity_support, EvolutionPlan, Observable, TimeSeries};

/// Largest dimension handled by dense eigenbasis methods.
pub const DENSE_LIMIT: usize = 4000;
/// Largest dimension of the density-matrix integrator.
pub const LINDBLAD_LIMIT: usize = 300;
/// Relative precision of the jump-time search.
pub const JUMP_TIME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpBasis {
    /// `C_j = √κ a_j`.
    Bare,
    /// Energy-lowering parts of `a_j` in the eigenbasis of `H`.
    Dressed,
}

impl JumpBasis {
    /// Dressed jumps from `g/ω₀ ≥ 0.5` on.
    pub fn default_for(g: f64) -> Self {
        if g >= 0.5 {
            JumpBasis::Dressed
        } else {
            JumpBasis::Bare
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub tau_gamma: f64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Chosen from the coupling when absent.
    #[serde(default)]
    pub jump_basis: Option<JumpBasis>,
    /// Longest operator-splitting step of the bare unraveling.
    #[serde(default = "default_split_dt")]
    pub split_dt: f64,
}

fn default_n_traj() -> usize {
    300
}

fn default_split_dt() -> f64 {
    1.0
}

impl DampingConfig {
    pub fn new(tau_gamma: f64, n_traj: usize, master_seed: u64) -> Self {
        Self {
            tau_gamma,
            n_traj,
            master_seed,
            jump_basis: None,
            split_dt: default_split_dt(),
        }
    }

    pub fn with_basis(mut self, basis: JumpBasis) -> Self {
        self.jump_basis = Some(basis);
        self
    }

    /// Jump rate `κ = 1/τ_γ`; infinite `τ_γ` means no damping.
    pub fn kappa(&self) -> f64 {
        1.0 / self.tau_gamma
    }

    pub fn basis(&self, g: f64) -> JumpBasis {
        self.jump_basis.unwrap_or_else(|| JumpBasis::default_for(g))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("tau_gamma {} must be positive", self.tau_gamma)));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
        }
        if !(self.split_dt > 0.0) {
            return Err(Error::InvalidParameter(format!("split_dt {} must be positive", self.split_dt)));
        }
        Ok(())
    }
}

/// Per-trajectory generator for `(master_seed, traj_index)`.
pub fn trajectory_rng(master_seed: u64, traj_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(traj_index);
    rng
}

fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Jump channels `C_j` without the `√κ` factor.
#[derive(Debug, Clone)]
pub struct JumpChannels {
    basis: JumpBasis,
    bare: Vec<OperatorMatrix>,
    dressed: Option<DressedChannels>,
}

#[derive(Debug, Clone)]
struct DressedChannels {
    eig: Eigensystem,
    /// Lowering parts of each `a_j` in the eigenbasis.
    lowering: Vec<Mat<c64>>,
}

impl JumpChannels {
    pub fn new(h: &OperatorMatrix, basis: JumpBasis) -> Result<Self> {
        let space = h.space();
        let bare = space
            .sites()
            .iter()
            .map(|&s| annihilator(space, s))
            .collect::<Result<Vec<_>>>()?;
        let dressed = match basis {
            JumpBasis::Bare => None,
            JumpBasis::Dressed => {
                if h.dim() > DENSE_LIMIT {
                    return Err(Error::DenseLimit {
                        dim: h.dim(),
                        limit: DENSE_LIMIT,
                    });
                }
                let eig = Eigensystem::full(h)?;
                let e = eig.values().to_vec();
                let lowering = bare
                    .iter()
                    .map(|a| {
                        let full = eig.transform(a);
                        Mat::from_fn(full.nrows(), full.ncols(), |k, l| {
                            if e[k] < e[l] - crate::spectral::DEGENERACY_GAP {
                                full[(k, l)]
                            } else {
                                c64::new(0.0, 0.0)
                            }
                        })
                    })
                    .collect();
                Some(DressedChannels { eig, lowering })
            }
        };
        Ok(Self { basis, bare, dressed })
    }

    pub fn basis(&self) -> JumpBasis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.bare.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bare.is_empty()
    }

    /// Dense product-basis matrices of the channels.
    pub fn dense(&self) -> Vec<Mat<c64>> {
        match &self.dressed {
            None => self.bare.iter().map(|a| a.to_dense()).collect(),
            Some(d) => {
                let n = d.eig.full_dim();
                let v = Mat::<c64>::from_fn(n, n, |i, k| d.eig.vector(k)[i]);
                d.lowering.iter().map(|a| &v * a * v.adjoint()).collect()
            }
        }
    }
}

/// No-jump evolution engine of one trajectory.
trait Unraveling {
    type State: Clone;
    fn prepare(&self, psi: &[C64]) -> Result<Self::State>;
    fn advance(&mut self, state: &mut Self::State, tau: f64) -> Result<()>;
    fn norm_sq(&self, state: &Self::State) -> f64;
    /// Unnormalized product-basis amplitudes.
    fn amplitudes(&self, state: &Self::State) -> Vec<C64>;
    /// Applies one jump chosen with `u ∈ (0, 1]` and renormalizes.
    fn jump(&self, state: &mut Self::State, u: f64) -> Result<()>;
    /// Longest step between norm checks.
    fn check_interval(&self) -> f64;
}

fn pick_channel(weights: &[f64], u: f64) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if target <= acc {
            return Ok(j);
        }
    }
    Ok(weights.len() - 1)
}

/// Unitary part of the bare no-jump evolution.
enum BareStepper<'a> {
    Full(Lanczos<'a>),
    /// Parity-conserving `H`: every jump flips the sector, so only the sector
    /// holding the state is propagated.
    Sectors {
        parities: Vec<bool>,
        even: (&'a SparseBlock, Lanczos<'a>),
        odd: (&'a SparseBlock, Lanczos<'a>),
    },
}

impl BareStepper<'_> {
    fn advance(&mut self, psi: &mut [C64], tau: f64) -> Result<()> {
        match self {
            BareStepper::Full(lanczos) => lanczos.advance(psi, tau),
            BareStepper::Sectors { parities, even, odd } => {
                let zero = C64::new(0.0, 0.0);
                let Some(first) = psi.iter().position(|a| *a != zero) else {
                    return Err(Error::ZeroNorm);
                };
                let (block, lanczos) = if parities[first] { even } else { odd };
                let mut local = block.gather(psi);
                lanczos.advance(&mut local, tau)?;
                block.scatter(&local, psi);
                Ok(())
            }
        }
    }
}

/// Lanczos propagation with Strang-split decay `e^{-κ N_tot τ/4}`.
struct BareUnraveling<'a> {
    stepper: BareStepper<'a>,
    channels: &'a [OperatorMatrix],
    photons: Vec<f64>,
    kappa: f64,
    split_dt: f64,
}

impl BareUnraveling<'_> {
    fn decay(&self, psi: &mut [C64], tau: f64) {
        if self.kappa == 0.0 {
            return;
        }
        for (a, &n) in psi.iter_mut().zip(&self.photons) {
            *a *= (-0.5 * self.kappa * n * tau).exp();
        }
    }
}

impl Unraveling for BareUnraveling<'_> {
    type State = Vec<C64>;

    fn prepare(&self, psi: &[C64]) -> Result<Self::State> {
        Ok(psi.to_vec())
    }

    fn advance(&mut self, state: &mut Self::State, tau: f64) -> Result<()> {
        self.decay(state, tau / 2.0);
        self.stepper.advance(state, tau)?;
        self.decay(state, tau / 2.0);
        Ok(())
    }

    fn norm_sq(&self, state: &Self::State) -> f64 {
        state.iter().map(|a| a.norm_sqr()).sum()
    }

    fn amplitudes(&self, state: &Self::State) -> Vec<C64> {
        state.clone()
    }

    fn jump(&self, state: &mut Self::State, u: f64) -> Result<()> {
        let weights: Vec<f64> = self.channels.iter().map(|c| state_norm(&c.apply_vec(state)).powi(2)).collect();
        let j = pick_channel(&weights, u)?;
        let mut next = self.channels[j].apply_vec(state);
        let n = state_norm(&next);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        next.iter_mut().for_each(|a| *a /= n);
        *state = next;
        Ok(())
    }

    fn check_interval(&self) -> f64 {
        self.split_dt
    }
}

/// Exact no-jump propagation in the eigenbasis of `H_eff = E − iκ/2 Σ_j A_j†A_j`.
struct DressedUnraveling<'a> {
    channels: &'a DressedChannels,
    /// Right eigenvectors of `H_eff` and their LU factors.
    right: Mat<c64>,
    right_lu: PartialPivLu<c64>,
    lambda: Vec<C64>,
}

impl<'a> DressedUnraveling<'a> {
    fn new(channels: &'a DressedChannels, kappa: f64) -> Result<Self> {
        let e = channels.eig.values();
        let n = e.len();
        let mut heff = Mat::<c64>::from_fn(n, n, |i, j| if i == j { c64::new(e[i], 0.0) } else { c64::new(0.0, 0.0) });
        for a in &channels.lowering {
            axpy(&mut heff, c64::new(0.0, -0.5 * kappa), &(a.adjoint() * a));
        }
        let evd = heff.eigen().map_err(|err| Error::Eigensolver(format!("{err:?}")))?;
        let right = evd.U().to_owned();
        let lambda = evd.S().column_vector().iter().copied().collect();
        let right_lu = right.partial_piv_lu();
        Ok(Self {
            channels,
            right,
            right_lu,
            lambda,
        })
    }

    fn to_eigen_coeffs(&self, d: &[C64]) -> Vec<C64> {
        let x = Mat::<c64>::from_fn(d.len(), 1, |i, _| d[i]);
        let y = &self.right * &x;
        (0..d.len()).map(|i| y[(i, 0)]).collect()
    }

    fn from_eigen_coeffs(&self, c: &[C64]) -> Vec<C64> {
        let x = Mat::<c64>::from_fn(c.len(), 1, |i, _| c[i]);
        let y = self.right_lu.solve(&x);
        (0..c.len()).map(|i| y[(i, 0)]).collect()
    }
}

impl Unraveling for DressedUnraveling<'_> {
    /// Coordinates in the right eigenbasis of `H_eff`.
    type State = Vec<C64>;

    fn prepare(&self, psi: &[C64]) -> Result<Self::State> {
        Ok(self.from_eigen_coeffs(&self.channels.eig.project(psi)))
    }

    fn advance(&mut self, state: &mut Self::State, tau: f64) -> Result<()> {
        for (d, l) in state.iter_mut().zip(&self.lambda) {
            *d *= (C64::new(0.0, -tau) * l).exp();
        }
        Ok(())
    }

    fn norm_sq(&self, state: &Self::State) -> f64 {
        self.to_eigen_coeffs(state).iter().map(|c| c.norm_sqr()).sum()
    }

    fn amplitudes(&self, state: &Self::State) -> Vec<C64> {
        self.channels.eig.expand(&self.to_eigen_coeffs(state))
    }

    fn jump(&self, state: &mut Self::State, u: f64) -> Result<()> {
        let c = self.to_eigen_coeffs(state);
        let x = Mat::<c64>::from_fn(c.len(), 1, |i, _| c[i]);
        let images: Vec<Mat<c64>> = self.channels.lowering.iter().map(|a| a * &x).collect();
        let weights: Vec<f64> = images
            .iter()
            .map(|m| (0..m.nrows()).map(|i| m[(i, 0)].norm_sqr()).sum())
            .collect();
        let j = pick_channel(&weights, u)?;
        let n = weights[j].sqrt();
        let next: Vec<C64> = (0..c.len()).map(|i| images[j][(i, 0)] / n).collect();
        *state = self.from_eigen_coeffs(&next);
        Ok(())
    }

    fn check_interval(&self) -> f64 {
        f64::INFINITY
    }
}

/// Trajectory traces plus jump bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub traj_index: u64,
    pub series: Vec<TimeSeries>,
    pub jump_times: Vec<f64>,
}

fn run_unraveling<U: Unraveling>(
    engine: &mut U,
    psi0: &StateVector,
    plan: &EvolutionPlan,
    observables: &[Observable<'_>],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<TimeSeries>, Vec<f64>)> {
    let times = plan.times();
    let mut state = engine.prepare(psi0.amplitudes())?;
    let mut threshold = uniform_open(rng);
    let mut jumps = Vec::new();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    let record = |engine: &U, state: &U::State, samples: &mut Vec<Vec<f64>>| -> Result<()> {
        let psi = engine.amplitudes(state);
        let n2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if !(n2 > 0.0) {
            return Err(Error::ZeroNorm);
        }
        for (o, out) in observables.iter().zip(samples.iter_mut()) {
            out.push(o.op.expectation_raw(&psi).re / n2);
        }
        Ok(())
    };
    record(engine, &state, &mut samples)?;
    let mut t = 0.0;
    for &t_next in &times[1..] {
        while t < t_next {
            let tau = (t_next - t).min(engine.check_interval());
            let saved = state.clone();
            engine.advance(&mut state, tau)?;
            if engine.norm_sq(&state) > threshold {
                t = if tau == t_next - t { t_next } else { t + tau };
                continue;
            }
            // The jump happened inside (t, t + tau]: bisect on the norm.
            let (mut lo, mut hi) = (0.0, tau);
            while hi - lo > JUMP_TIME_TOL * (t + tau).max(1.0) {
                let mid = 0.5 * (lo + hi);
                let mut probe = saved.clone();
                engine.advance(&mut probe, mid)?;
                if engine.norm_sq(&probe) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            state = saved;
            engine.advance(&mut state, hi)?;
            engine.jump(&mut state, uniform_open(rng))?;
            jumps.push(t + hi);
            threshold = uniform_open(rng);
            t += hi;
        }
        t = t_next;
        record(engine, &state, &mut samples)?;
    }
    let series = observables
        .iter()
        .zip(samples)
        .map(|(o, v)| TimeSeries::new(o.label, times.clone(), v))
        .collect::<Result<_>>()?;
    Ok((series, jumps))
}

/// Shared, read-only inputs of an ensemble.
pub struct TrajectorySetup<'a> {
    pub h: &'a OperatorMatrix,
    pub psi0: &'a StateVector,
    pub plan: &'a EvolutionPlan,
    pub cfg: &'a DampingConfig,
    pub channels: &'a JumpChannels,
    pub observables: &'a [Observable<'a>],
}

/// One quantum-jump trajectory; reproducible from `(master_seed, traj_index)`.
pub fn run_trajectory(setup: &TrajectorySetup<'_>, traj_index: u64) -> Result<TrajectoryRecord> {
    setup.plan.validate()?;
    setup.cfg.validate()?;
    let mut rng = trajectory_rng(setup.cfg.master_seed, traj_index);
    let kappa = setup.cfg.kappa();
    let (series, jump_times) = match &setup.channels.dressed {
        None => {
            let photons: Vec<f64> = (0..setup.h.dim())
                .map(|i| setup.h.space().decode(i).iter().map(|l| l.n as f64).sum())
                .collect();
            let (dim, tol) = (setup.plan.krylov_dim, setup.plan.step_tol);
            let parities = setup.h.space().parities();
            let blocks = parity_support(setup.h, setup.psi0.amplitudes()).map(|_| {
                let pick = |want: bool| -> Vec<usize> { (0..parities.len()).filter(|&i| parities[i] == want).collect() };
                [setup.h.sparse_block(&pick(true)), setup.h.sparse_block(&pick(false))]
            });
            let stepper = match &blocks {
                Some([even, odd]) => BareStepper::Sectors {
                    parities,
                    even: (even, Lanczos::on_block(even, dim, tol)?),
                    odd: (odd, Lanczos::on_block(odd, dim, tol)?),
                },
                None => BareStepper::Full(Lanczos::new(setup.h, dim, tol)?),
            };
            let mut engine = BareUnraveling {
                stepper,
                channels: &setup.channels.bare,
                photons,
                kappa,
                split_dt: setup.cfg.split_dt,
            };
            run_unraveling(&mut engine, setup.psi0, setup.plan, setup.observables, &mut rng)?
        }
        Some(d) => {
            let mut engine = DressedUnraveling::new(d, kappa)?;
            run_unraveling(&mut engine, setup.psi0, setup.plan, setup.observables, &mut rng)?
        }
    };
    Ok(TrajectoryRecord {
        traj_index,
        series,
        jump_times,
    })
}

/// Trajectory-averaged traces with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub mean: Vec<TimeSeries>,
    pub std_err: Vec<TimeSeries>,
    pub n_traj: usize,
    pub master_seed: u64,
    pub jump_basis: JumpBasis,
    pub total_jumps: usize,
}

/// Runs `cfg.n_traj` trajectories on `workers` threads and reduces them in index order.
pub fn run_ensemble(setup: &TrajectorySetup<'_>, workers: usize) -> Result<(EnsembleResult, Vec<TrajectoryRecord>)> {
    setup.cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    let records: Vec<TrajectoryRecord> = pool.install(|| {
        (0..setup.cfg.n_traj as u64)
            .into_par_iter()
            .map(|i| run_trajectory(setup, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let result = reduce(&records, setup.cfg, setup.channels.basis())?;
    Ok((result, records))
}

fn reduce(records: &[TrajectoryRecord], cfg: &DampingConfig, basis: JumpBasis) -> Result<EnsembleResult> {
    let first = records.first().ok_or_else(|| Error::InvalidParameter("no trajectories".into()))?;
    let n = records.len() as f64;
    let mut mean = Vec::new();
    let mut std_err = Vec::new();
    for (k, proto) in first.series.iter().enumerate() {
        let len = proto.len();
        let mut sum = vec![0.0; len];
        for r in records {
            for (s, v) in sum.iter_mut().zip(r.series[k].values()) {
                *s += v;
            }
        }
        let m: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut var = vec![0.0; len];
        for r in records {
            for ((acc, v), mu) in var.iter_mut().zip(r.series[k].values()).zip(&m) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let se: Vec<f64> = var
            .iter()
            .map(|v| if n > 1.0 { (v / (n - 1.0) / n).sqrt() } else { 0.0 })
            .collect();
        mean.push(proto.with_values(proto.label.clone(), m)?);
        std_err.push(proto.with_values(format!("{}_se", proto.label), se)?);
    }
    Ok(EnsembleResult {
        mean,
        std_err,
        n_traj: records.len(),
        master_seed: cfg.master_seed,
        jump_basis: basis,
        total_jumps: records.iter().map(|r| r.jump_times.len()).sum(),
    })
}

/// Dense master-equation integration with adaptive Dormand–Prince steps.
pub fn lindblad_reference(
    h: &OperatorMatrix,
    psi0: &StateVector,
    plan: &EvolutionPlan,
    cfg: &DampingConfig,
    channels: &JumpChannels,
    observables: &[Observable<'_>],
) -> Result<Vec<TimeSeries>> {
    plan.validate()?;
    cfg.validate()?;
    let n = h.dim();
    if n > LINDBLAD_LIMIT {
        return Err(Error::DenseLimit {
            dim: n,
            limit: LINDBLAD_LIMIT,
        });
    }
    let kappa = cfg.kappa();
    let jumps = channels.dense();
    let mut heff = h.to_dense();
    for c in &jumps {
        axpy(&mut heff, c64::new(0.0, -0.5 * kappa), &(c.adjoint() * c));
    }
    let rhs = |rho: &Mat<c64>| -> Mat<c64> {
        let k = &heff * rho;
        let mut out = Mat::<c64>::from_fn(n, n, |i, j| c64::new(0.0, -1.0) * (k[(i, j)] - k[(j, i)].conj()));
        for c in &jumps {
            axpy(&mut out, c64::new(kappa, 0.0), &(c * rho * c.adjoint()));
        }
        out
    };
    let psi = psi0.amplitudes();
    let mut rho = Mat::<c64>::from_fn(n, n, |i, j| psi[i] * psi[j].conj());
    let measure = |rho: &Mat<c64>| -> Vec<f64> {
        observables
            .iter()
            .map(|o| o.op.entries().map(|(i, j, v)| (v * rho[(j, i)]).re).sum())
            .collect()
    };
    let times = plan.times();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(times.len()); observables.len()];
    for (out, v) in samples.iter_mut().zip(measure(&rho)) {
        out.push(v);
    }
    let tol = 1e-8;
    let mut h_step = plan.dt_sample.min(0.1);
    let mut t = 0.0;
    for &t_next in &times[1..] {
        while t < t_next - 1e-12 * t_next.max(1.0) {
            let step = h_step.min(t_next - t);
            let (candidate, err) = dopri_step(&rhs, &rho, step, tol);
            if err <= 1.0 {
                rho = candidate;
                t += step;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if step < h_step && err <= 1.0 {
                h_step = h_step.max(step * factor);
            } else {
                h_step = step * factor;
            }
            if h_step < 1e-12 {
                return Err(Error::KrylovStall { step: h_step, time: t });
            }
        }
        t = t_next;
        for (out, v) in samples.iter_mut().zip(measure(&rho)) {
            out.push(v);
        }
    }
    observables
        .iter()
        .zip(samples)
        .map(|(o, v)| TimeSeries::new(o.label, times.clone(), v))
        .collect()
}

/// `y += a x`.
fn axpy(y: &mut Mat<c64>, a: c64, x: &Mat<c64>) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] += a * x[(i, j)];
        }
    }
}

/// One Dormand–Prince 5(4) step; returns the fifth-order solution and the scaled error.
fn dopri_step(f: &impl Fn(&Mat<c64>) -> Mat<c64>, y: &Mat<c64>, h: f64, tol: f64) -> (Mat<c64>, f64) {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut k: Vec<Mat<c64>> = Vec::with_capacity(7);
    k.push(f(y));
    for row in A.iter() {
        let mut stage = y.clone();
        for (kj, &a) in k.iter().zip(row) {
            if a != 0.0 {
                axpy(&mut stage, c64::new(h * a, 0.0), kj);
            }
        }
        k.push(f(&stage));
    }
    // k[6] was evaluated at the fifth-order solution itself.
    let mut y_new = y.clone();
    for (kj, &b) in k.iter().zip(&A[5]) {
        if b != 0.0 {
            axpy(&mut y_new, c64::new(h * b, 0.0), kj);
        }
    }
    let mut err = 0.0f64;
    let (r, c) = (y.nrows(), y.ncols());
    for j in 0..c {
        for i in 0..r {
            let e: C64 = k.iter().zip(&E).map(|(kj, &w)| kj[(i, j)] * (h * w)).sum();
            let scale = tol + tol * y[(i, j)].norm().max(y_new[(i, j)].norm());
            err = err.max(e.norm() / scale);
        }
    }
    (y_new, err)
}
