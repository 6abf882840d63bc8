//! Eigenstructure diagnostics: level statistics, photon-number variance,
//! overlaps, the diagonal ensemble and the Franck–Condon factor.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{state_inner, FockSpace, OperatorMatrix, Site, StateVector};
use crate::linalg::Eigensystem;
use crate::model::{build_rabi, default_n_max, parity_diagonal, sector_embedding, sectors, swap_operator, RabiParams, Sector};

/// Largest tolerated eigenpair residual.
pub const RESIDUAL_LIMIT: f64 = 1e-8;
/// Levels closer than this are treated as one degenerate block.
pub const DEGENERACY_GAP: f64 = 1e-10;
/// Relative rounding allowed in the left-right symmetry of `H`.
pub const SYMMETRY_TOL: f64 = 1e-13;
/// Smallest acceptable total overlap weight of a decomposition.
pub const COMPLETENESS_LIMIT: f64 = 0.999;

/// Lowest eigenpairs of a hamiltonian, possibly assembled from symmetry sectors.
#[derive(Debug, Clone)]
pub struct SpectralData {
    energies: Vec<f64>,
    parts: Vec<(Option<Sector>, Eigensystem)>,
    /// `(part, index within part)` for each retained level, ascending in energy.
    order: Vec<(usize, usize)>,
    max_residual: f64,
}

impl SpectralData {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn k_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    pub fn full_dim(&self) -> usize {
        self.parts[0].1.full_dim()
    }

    /// Symmetry sector of level `l`, if sectors were used.
    pub fn sector(&self, l: usize) -> Option<Sector> {
        self.parts[self.order[l].0].0
    }

    /// Full-space eigenvector of level `l`.
    pub fn state(&self, l: usize) -> Vec<C64> {
        let (p, k) = self.order[l];
        self.parts[p].1.vector(k)
    }

    /// `⟨E_l|ψ⟩` for every retained level.
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let per_part: Vec<Vec<C64>> = self.parts.iter().map(|(_, e)| e.project(psi)).collect();
        self.order.iter().map(|&(p, k)| per_part[p][k]).collect()
    }

    /// `⟨E_l|O|E_l⟩` for every retained level.
    pub fn expectations(&self, op: &OperatorMatrix) -> Vec<f64> {
        (0..self.k_levels())
            .map(|l| op.expectation_raw(&self.state(l)).re)
            .collect()
    }

    /// Index ranges of degenerate blocks (consecutive gaps below [`DEGENERACY_GAP`]).
    pub fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        let mut blocks = Vec::new();
        let mut start = 0;
        for l in 1..=self.energies.len() {
            if l == self.energies.len() || self.energies[l] - self.energies[l - 1] >= DEGENERACY_GAP {
                blocks.push(start..l);
                start = l;
            }
        }
        blocks
    }
}

fn assemble(h: &OperatorMatrix, parts: Vec<(Option<Sector>, Eigensystem)>, k: usize) -> Result<SpectralData> {
    let mut order: Vec<(usize, usize)> = parts
        .iter()
        .enumerate()
        .flat_map(|(p, (_, e))| (0..e.len()).map(move |i| (p, i)))
        .collect();
    order.sort_by(|a, b| parts[a.0].1.values()[a.1].total_cmp(&parts[b.0].1.values()[b.1]));
    order.truncate(k);
    let energies: Vec<f64> = order.iter().map(|&(p, i)| parts[p].1.values()[i]).collect();
    let mut max_residual = 0.0f64;
    for (l, &(p, i)) in order.iter().enumerate() {
        let v = parts[p].1.vector(i);
        let hv = h.apply_vec(&v);
        let r = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * energies[l]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > RESIDUAL_LIMIT {
            return Err(Error::Residual {
                level: l,
                residual: r,
                limit: RESIDUAL_LIMIT,
            });
        }
        max_residual = max_residual.max(r);
    }
    Ok(SpectralData {
        energies,
        parts,
        order,
        max_residual,
    })
}

fn check_k(h: &OperatorMatrix, k: usize) -> Result<()> {
    if k == 0 || k > h.dim() {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={}", h.dim())));
    }
    Ok(())
}

/// Lowest `k` eigenpairs by dense diagonalization of the whole matrix.
pub fn eigensolve(h: &OperatorMatrix, k: usize) -> Result<SpectralData> {
    check_k(h, k)?;
    let mut eig = Eigensystem::full(h)?;
    eig.truncate(k);
    assemble(h, vec![(None, eig)], k)
}

/// Lowest `k` eigenpairs assembled from parity (and optionally swap) sectors.
///
/// Only sectors listed in `wanted` are diagonalized when it is given; levels of
/// the other sectors are then absent from the result.
pub fn eigensolve_sectors(
    h: &OperatorMatrix,
    k: usize,
    use_swap: bool,
    wanted: Option<&[Sector]>,
) -> Result<SpectralData> {
    check_k(h, k)?;
    let space = h.space();
    let parity = h.commutes_with_diagonal(&parity_diagonal(space));
    if parity != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hamiltonian breaks parity (defect {parity:e})"
        )));
    }
    if use_swap && space.n_sites() == 2 {
        let s = swap_operator(space);
        let defect = (&(&s * h) * &s).max_abs_diff(h);
        let scale = h.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max);
        if defect > SYMMETRY_TOL * scale.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "hamiltonian breaks left-right symmetry (defect {defect:e})"
            )));
        }
    }
    let mut parts = Vec::new();
    for sector in sectors(space, use_swap) {
        if wanted.is_some_and(|w| !w.contains(&sector)) {
            continue;
        }
        let embedding = sector_embedding(space, sector);
        if embedding.is_empty() {
            continue;
        }
        let mut eig = Eigensystem::sector(h, embedding)?;
        eig.truncate(k);
        parts.push((Some(sector), eig));
    }
    assemble(h, parts, k)
}

/// Sectors in which `psi` has weight above `threshold`.
pub fn occupied_sectors(psi: &StateVector, use_swap: bool, threshold: f64) -> Vec<Sector> {
    let space = psi.space();
    sectors(space, use_swap)
        .into_iter()
        .filter(|&s| {
            let w: f64 = sector_embedding(space, s)
                .restrict(psi.amplitudes())
                .iter()
                .map(|c| c.norm_sqr())
                .sum();
            w > threshold
        })
        .collect()
}

/// Variance of the lowest `k` consecutive level gaps.
pub fn level_spacing_variance(energies: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k + 1 > energies.len() {
        return Err(Error::InvalidParameter(format!(
            "need {} levels for {k} gaps, have {}",
            k + 1,
            energies.len()
        )));
    }
    let gaps: Vec<f64> = energies[..=k].windows(2).map(|w| w[1] - w[0]).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    Ok(gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n)
}

/// `⟨N²⟩ − ⟨N⟩²` of a single-site state.
pub fn photon_number_variance(state: &StateVector) -> Result<f64> {
    if state.space().n_sites() != 1 {
        return Err(Error::InvalidSites(state.space().n_sites()));
    }
    Ok(number_variance(state.space(), state.amplitudes(), Site::Left))
}

fn number_variance(space: &FockSpace, amplitudes: &[C64], site: Site) -> f64 {
    let n = space.photon_numbers(site).expect("valid site");
    let (mut m1, mut m2) = (0.0, 0.0);
    for (a, &k) in amplitudes.iter().zip(&n) {
        let p = a.norm_sqr();
        m1 += p * k as f64;
        m2 += p * (k * k) as f64;
    }
    m2 - m1 * m1
}

/// Photon-number variance of each retained level on `site`.
pub fn level_photon_variances(spec: &SpectralData, space: &FockSpace, site: Site) -> Vec<f64> {
    (0..spec.k_levels())
        .map(|l| number_variance(space, &spec.state(l), site))
        .collect()
}

/// `L_n(x)` by upward recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 - x) * cur / (k + 1) as f64 - k as f64 * prev / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// `⟨n, −α|n, α⟩ = e^{−2α²} L_n(4α²)` for real `α`.
pub fn franck_condon(n: usize, alpha: f64) -> f64 {
    (-2.0 * alpha * alpha).exp() * laguerre(n, 4.0 * alpha * alpha)
}

/// `|⟨ψ₀|E_l⟩|²` for every retained level.
pub fn overlaps(psi0: &StateVector, spec: &SpectralData) -> Result<Vec<f64>> {
    check_space(psi0, spec)?;
    let w: Vec<f64> = spec
        .coefficients(psi0.amplitudes())
        .iter()
        .map(|c| c.norm_sqr())
        .collect();
    let covered: f64 = w.iter().sum();
    if covered < COMPLETENESS_LIMIT {
        return Err(Error::IncompleteDecomposition {
            covered,
            required: COMPLETENESS_LIMIT,
        });
    }
    Ok(w)
}

fn check_space(psi0: &StateVector, spec: &SpectralData) -> Result<()> {
    if psi0.space().dim() != spec.full_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.full_dim(),
            found: psi0.space().dim(),
        });
    }
    Ok(())
}

/// Infinite-time average `Σ_blocks Tr[P_b ρ₀ P_b O]` of an observable.
pub fn diagonal_ensemble(psi0: &StateVector, spec: &SpectralData, op: &OperatorMatrix) -> Result<f64> {
    check_space(psi0, spec)?;
    let c = spec.coefficients(psi0.amplitudes());
    let covered: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if covered < COMPLETENESS_LIMIT {
        return Err(Error::IncompleteDecomposition {
            covered,
            required: COMPLETENESS_LIMIT,
        });
    }
    let negligible = 1e-14;
    let mut total = 0.0;
    for block in spec.degenerate_blocks() {
        let idx: Vec<usize> = block.filter(|&l| c[l].norm_sqr() > negligible).collect();
        if idx.is_empty() {
            continue;
        }
        let states: Vec<Vec<C64>> = idx.iter().map(|&l| spec.state(l)).collect();
        for (a, va) in idx.iter().zip(&states) {
            let ova = op.apply_vec(va);
            for (b, vb) in idx.iter().zip(&states) {
                let o_ba = state_inner(vb, &ova);
                total += (c[*b].conj() * o_ba * c[*a]).re;
            }
        }
    }
    Ok(total)
}

/// One point of a single-Rabi ζ/χ scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub g: f64,
    pub zeta: f64,
    pub chi_mean: f64,
    pub chi_levels: Vec<f64>,
    pub n_max: usize,
    pub max_residual: f64,
    /// Largest energy change of the used levels between two truncations.
    pub truncation_shift: f64,
}

/// Settings of a ζ/χ scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    #[serde(default = "default_zeta_levels")]
    pub zeta_levels: usize,
    #[serde(default = "default_chi_levels")]
    pub chi_levels: usize,
    #[serde(default = "default_omega")]
    pub omega0: f64,
    #[serde(rename = "Omega", default = "default_omega")]
    pub omega_q: f64,
    /// Required agreement of the used levels between `n_max` and `n_max + 40`.
    #[serde(default = "default_convergence")]
    pub convergence: f64,
}

fn default_zeta_levels() -> usize {
    400
}

fn default_chi_levels() -> usize {
    20
}

fn default_omega() -> f64 {
    1.0
}

fn default_convergence() -> f64 {
    1e-8
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            zeta_levels: default_zeta_levels(),
            chi_levels: default_chi_levels(),
            omega0: default_omega(),
            omega_q: default_omega(),
            convergence: default_convergence(),
        }
    }
}

const TRUNCATION_STEP: usize = 40;
const MAX_TRUNCATION_ROUNDS: usize = 8;

/// ζ over the lowest `zeta_levels` gaps and χ over the lowest `chi_levels`
/// states of a single Rabi system, with the truncation grown until the used
/// levels are stable.
pub fn scan_point(g: f64, settings: &ScanSettings) -> Result<ScanPoint> {
    let levels = settings.zeta_levels.max(settings.chi_levels) + 1;
    let params = RabiParams::new(settings.omega0, settings.omega_q, g);
    let reduced = g / settings.omega0;
    let solve = |n_max: usize| -> Result<(FockSpace, SpectralData)> {
        let space = FockSpace::new(n_max, 1)?;
        let h = build_rabi(&space, &params)?;
        Ok((space, eigensolve(&h, levels)?))
    };
    let mut n_max = default_n_max(levels / 2, reduced);
    let (_, mut spec) = solve(n_max)?;
    for _ in 0..MAX_TRUNCATION_ROUNDS {
        let (space, next) = solve(n_max + TRUNCATION_STEP)?;
        let shift = spec
            .energies()
            .iter()
            .zip(next.energies())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        n_max += TRUNCATION_STEP;
        spec = next;
        if shift < settings.convergence {
            let chi_levels: Vec<f64> = level_photon_variances(&spec, &space, Site::Left)
                .into_iter()
                .take(settings.chi_levels)
                .collect();
            let chi_mean = chi_levels.iter().sum::<f64>() / chi_levels.len().max(1) as f64;
            return Ok(ScanPoint {
                g,
                zeta: level_spacing_variance(spec.energies(), settings.zeta_levels)?,
                chi_mean,
                chi_levels,
                n_max,
                max_residual: spec.max_residual(),
                truncation_shift: shift,
            });
        }
    }
    Err(Error::Eigensolver(format!(
        "levels at g = {g} not converged up to n_max = {n_max}"
    )))
}

/// Least-squares fit `χ ≈ c g²`; returns `c` and the largest relative residual.
pub fn fit_quadratic(points: &[(f64, f64)]) -> (f64, f64) {
    let num: f64 = points.iter().map(|(g, chi)| g * g * chi).sum();
    let den: f64 = points.iter().map(|(g, _)| g.powi(4)).sum();
    let c = num / den;
    let resid = points
        .iter()
        .map(|(g, chi)| ((chi - c * g * g) / chi).abs())
        .fold(0.0, f64::max);
    (c, resid)
}
