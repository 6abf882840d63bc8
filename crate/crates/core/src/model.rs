//! Single-Rabi and Rabi-dimer Hamiltonians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{annihilator, number, pauli, FockSpace, OperatorMatrix, PauliAxis, Site};
use crate::linalg::Embedding;

/// Parameters of one Rabi system, in units of the cavity frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiParams {
    pub omega0: f64,
    #[serde(rename = "Omega")]
    pub omega_q: f64,
    pub g: f64,
}

impl RabiParams {
    pub fn new(omega0: f64, omega_q: f64, g: f64) -> Self {
        Self { omega0, omega_q, g }
    }

    /// Resonant system with `ω₀ = Ω = 1`.
    pub fn resonant(g: f64) -> Self {
        Self::new(1.0, 1.0, g)
    }

    pub fn is_resonant(&self) -> bool {
        self.omega0 == self.omega_q
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega0", self.omega0), ("Omega", self.omega_q), ("g", self.g)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub left: RabiParams,
    pub right: RabiParams,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
}

impl DimerParams {
    /// Two identical resonant sites.
    pub fn identical(site: RabiParams, j: f64) -> Self {
        Self {
            left: site,
            right: site,
            j,
            d: 0.0,
        }
    }

    pub fn with_a2(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn is_identical(&self) -> bool {
        self.left == self.right
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        for (name, v) in [("J", self.j), ("D", self.d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// Qubit-cavity coupling form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `−g(a + a†)σˣ`, counter-rotating terms kept.
    #[default]
    Rabi,
    /// `−g(aσ⁺ + a†σ⁻)`.
    JaynesCummings,
}

/// Flat model block of a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "two_sites")]
    pub sites: usize,
    #[serde(default = "unit_frequency")]
    pub omega0: f64,
    #[serde(rename = "Omega", default = "unit_frequency")]
    pub omega_q: f64,
    #[serde(default)]
    pub g: f64,
    #[serde(rename = "J", default)]
    pub j: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub jc_only: bool,
}

fn two_sites() -> usize {
    2
}

fn unit_frequency() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn site(&self) -> RabiParams {
        RabiParams::new(self.omega0, self.omega_q, self.g)
    }

    pub fn dimer(&self) -> DimerParams {
        DimerParams::identical(self.site(), self.j).with_a2(self.d)
    }

    pub fn coupling(&self) -> Coupling {
        if self.jc_only {
            Coupling::JaynesCummings
        } else {
            Coupling::Rabi
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.sites) {
            return Err(Error::InvalidSites(self.sites));
        }
        self.dimer().validate()
    }

    /// Truncation for an initial photon number `n_i`, honouring an explicit override.
    pub fn resolve_n_max(&self, n_i: usize) -> usize {
        self.n_max.unwrap_or_else(|| default_n_max(n_i, self.g / self.omega0.max(f64::MIN_POSITIVE)))
    }

    /// Hamiltonian on the given space (one or two sites).
    pub fn hamiltonian(&self, space: &FockSpace) -> Result<OperatorMatrix> {
        self.validate()?;
        match space.n_sites() {
            1 => {
                let mut h = build_rabi_with(space, &self.site(), self.coupling())?;
                if self.d > 0.0 {
                    h = &h + &a2_term(space, Site::Left, self.d)?;
                }
                Ok(h)
            }
            _ => build_dimer_with(space, &self.dimer(), self.coupling()),
        }
    }
}

/// Default truncation `n_i + ⌈8g² + 6g⌉ + 10` with `g` in units of `ω₀`.
pub fn default_n_max(n_i: usize, g: f64) -> usize {
    n_i + (8.0 * g * g + 6.0 * g).ceil() as usize + 10
}

fn require_sites(space: &FockSpace, n: usize) -> Result<()> {
    if space.n_sites() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: n,
            found: space.n_sites(),
        })
    }
}

fn site_hamiltonian(space: &FockSpace, site: Site, p: &RabiParams, coupling: Coupling) -> Result<OperatorMatrix> {
    let a = annihilator(space, site)?;
    let n = number(space, site)?;
    let sz = pauli(space, site, PauliAxis::Z)?;
    let interaction = match coupling {
        Coupling::Rabi => {
            let x = &a + &a.adjoint();
            &x * &pauli(space, site, PauliAxis::X)?
        }
        Coupling::JaynesCummings => {
            let a_sp = &a * &pauli(space, site, PauliAxis::Plus)?;
            &a_sp + &a_sp.adjoint()
        }
    };
    Ok(&(&n.scale_real(p.omega0) + &sz.scale_real(p.omega_q / 2.0)) - &interaction.scale_real(p.g))
}

/// `D (a + a†)²` on one site.
pub fn a2_term(space: &FockSpace, site: Site, d: f64) -> Result<OperatorMatrix> {
    let a = annihilator(space, site)?;
    let x = &a + &a.adjoint();
    Ok((&x * &x).scale_real(d))
}

/// `H = ω₀a†a + (Ω/2)σᶻ − g(a + a†)σˣ`.
pub fn build_rabi(space: &FockSpace, p: &RabiParams) -> Result<OperatorMatrix> {
    build_rabi_with(space, p, Coupling::Rabi)
}

pub fn build_rabi_with(space: &FockSpace, p: &RabiParams, coupling: Coupling) -> Result<OperatorMatrix> {
    require_sites(space, 1)?;
    p.validate()?;
    site_hamiltonian(space, Site::Left, p, coupling)
}

/// `H = H_L + H_R − J(a†_L a_R + h.c.) + D Σ_j (a_j + a†_j)²`.
pub fn build_dimer(space: &FockSpace, p: &DimerParams) -> Result<OperatorMatrix> {
    build_dimer_with(space, p, Coupling::Rabi)
}

pub fn build_dimer_with(space: &FockSpace, p: &DimerParams, coupling: Coupling) -> Result<OperatorMatrix> {
    require_sites(space, 2)?;
    p.validate()?;
    let mut h = &site_hamiltonian(space, Site::Left, &p.left, coupling)?
        + &site_hamiltonian(space, Site::Right, &p.right, coupling)?;
    if p.j > 0.0 {
        let hop = &annihilator(space, Site::Left)?.adjoint() * &annihilator(space, Site::Right)?;
        h = &h - &(&hop + &hop.adjoint()).scale_real(p.j);
    }
    if p.d > 0.0 {
        h = &h + &a2_term(space, Site::Left, p.d)?;
        h = &h + &a2_term(space, Site::Right, p.d)?;
    }
    Ok(h)
}

/// Diagonal of the total parity operator `(−1)^{Σ_j n_j + e_j}`.
pub fn parity_diagonal(space: &FockSpace) -> Vec<f64> {
    space.parities().into_iter().map(|even| if even { 1.0 } else { -1.0 }).collect()
}

pub fn parity_operator(space: &FockSpace) -> OperatorMatrix {
    OperatorMatrix::from_diagonal(*space, &parity_diagonal(space))
}

/// Permutation exchanging the left and right sites.
pub fn swap_operator(space: &FockSpace) -> OperatorMatrix {
    OperatorMatrix::from_triplets(
        *space,
        (0..space.dim()).map(|i| (space.swapped_index(i), i, num_complex::Complex64::new(1.0, 0.0))),
    )
}

/// Total excitation number `Σ_j n_j + e_j` per basis state.
pub fn excitation_diagonal(space: &FockSpace) -> Vec<f64> {
    (0..space.dim())
        .map(|i| {
            space
                .decode(i)
                .iter()
                .map(|l| (l.n + l.qubit.excitation()) as f64)
                .sum()
        })
        .collect()
}

/// Parity (and, for dimers, left-right swap) symmetry sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub even: bool,
    /// `None` for single-site spaces or when swap symmetry is not used.
    pub swap_even: Option<bool>,
}

/// Orthonormal basis of a symmetry sector as an [`Embedding`].
pub fn sector_embedding(space: &FockSpace, sector: Sector) -> Embedding {
    let parities = space.parities();
    let mut columns = Vec::new();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..space.dim() {
        if parities[i] != sector.even {
            continue;
        }
        match sector.swap_even {
            None => columns.push(vec![(i, 1.0)]),
            Some(sym) => {
                let s = space.swapped_index(i);
                if s == i {
                    if sym {
                        columns.push(vec![(i, 1.0)]);
                    }
                } else if i < s {
                    columns.push(vec![(i, r), (s, if sym { r } else { -r })]);
                }
            }
        }
    }
    Embedding::new(space.dim(), columns)
}

/// All symmetry sectors of `space`; swap sectors only when `use_swap` and two sites.
pub fn sectors(space: &FockSpace, use_swap: bool) -> Vec<Sector> {
    let swaps: Vec<Option<bool>> = if use_swap && space.n_sites() == 2 {
        vec![Some(true), Some(false)]
    } else {
        vec![None]
    };
    [true, false]
        .into_iter()
        .flat_map(|even| swaps.iter().map(move |&swap_even| Sector { even, swap_even }))
        .collect()
}

/// Variant of the A²-term parameter map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A2Map {
    /// Quadrature squeezing: `ω̃₀ = ω₀e^{2r}`, `g̃ = g e^{−r}`, `J̃ = J cosh 2r`.
    #[default]
    Quadrature,
    /// `ω̃₀ = ω₀e^{2r}`, `g̃ = g e^{r}`, `J̃ = J e^{2r}`.
    Published,
}

/// Result of removing the A² term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Renormalized {
    pub params: DimerParams,
    pub r: f64,
    pub map: A2Map,
}

/// Maps a dimer with `D > 0` onto an equivalent-form dimer with `D = 0`.
///
/// With `e^{4r} = 1 + 4D/ω₀` the cavity frequency becomes `ω₀e^{2r}` and the
/// qubit splitting is unchanged. The [`A2Map::Quadrature`] variant is exact
/// for `J = 0`; for `J > 0` the transformed hopping also acquires a two-mode
/// squeezing term `J sinh 2r (b_L b_R + h.c.)` that no model-form map keeps.
pub fn a2_renormalize(p: &DimerParams, map: A2Map) -> Result<Renormalized> {
    p.validate()?;
    if !p.is_identical() {
        return Err(Error::InvalidParameter("A² renormalization requires identical sites".into()));
    }
    let omega0 = p.left.omega0;
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParameter("omega0 must be positive".into()));
    }
    let r = 0.25 * (1.0 + 4.0 * p.d / omega0).ln();
    let (g, j) = match map {
        A2Map::Quadrature => (p.left.g * (-r).exp(), p.j * (2.0 * r).cosh()),
        A2Map::Published => (p.left.g * r.exp(), p.j * (2.0 * r).exp()),
    };
    let site = RabiParams::new(omega0 * (2.0 * r).exp(), p.left.omega_q, g);
    Ok(Renormalized {
        params: DimerParams::identical(site, j),
        r,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{Qubit, SiteLabel};
    use crate::linalg::Eigensystem;

    #[test]
    fn decoupled_rabi_spectrum() {
        let space = FockSpace::new(6, 1).unwrap();
        let h = build_rabi(&space, &RabiParams::resonant(0.0)).unwrap();
        let eig = Eigensystem::full(&h).unwrap();
        assert!((eig.values()[0] + 0.5).abs() < 1e-12);
        assert!((eig.values()[1] - 0.5).abs() < 1e-12);
        assert!((eig.values()[2] - 0.5).abs() < 1e-12);
        assert!((eig.values()[3] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn builders_are_hermitian_and_conserve_parity() {
        let s1 = FockSpace::new(10, 1).unwrap();
        let h1 = build_rabi(&s1, &RabiParams::resonant(0.7)).unwrap();
        assert!(h1.is_hermitian());
        assert_eq!(h1.commutes_with_diagonal(&parity_diagonal(&s1)), 0.0);
        let s2 = FockSpace::new(5, 2).unwrap();
        let p = DimerParams::identical(RabiParams::resonant(0.4), 0.05).with_a2(0.2);
        let h2 = build_dimer(&s2, &p).unwrap();
        assert!(h2.is_hermitian());
        assert_eq!(h2.commutes_with_diagonal(&parity_diagonal(&s2)), 0.0);
    }

    #[test]
    fn hopping_matrix_element() {
        let space = FockSpace::new(22, 2).unwrap();
        let p = DimerParams::identical(RabiParams::resonant(0.3), 0.01);
        let h = build_dimer(&space, &p).unwrap();
        let i = space
            .encode(&[SiteLabel::new(20, Qubit::Down), SiteLabel::new(0, Qubit::Down)])
            .unwrap();
        let j = space
            .encode(&[SiteLabel::new(19, Qubit::Down), SiteLabel::new(1, Qubit::Down)])
            .unwrap();
        assert!((h.get(i, j).re + 0.01 * 20f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_dimer_is_diagonal() {
        let space = FockSpace::new(4, 2).unwrap();
        let h = build_dimer(&space, &DimerParams::identical(RabiParams::resonant(0.0), 0.0)).unwrap();
        assert!(h.entries().all(|(i, j, _)| i == j));
    }

    #[test]
    fn swap_symmetry_of_identical_dimer() {
        let space = FockSpace::new(5, 2).unwrap();
        let h = build_dimer(&space, &DimerParams::identical(RabiParams::resonant(1.3), 0.2)).unwrap();
        let s = swap_operator(&space);
        let conj = &(&s.adjoint() * &h) * &s;
        assert_eq!(conj.max_abs_diff(&h), 0.0);
    }

    #[test]
    fn jc_conserves_excitations() {
        let space = FockSpace::new(6, 2).unwrap();
        let p = DimerParams::identical(RabiParams::resonant(0.3), 0.05);
        let h = build_dimer_with(&space, &p, Coupling::JaynesCummings).unwrap();
        assert_eq!(h.commutes_with_diagonal(&excitation_diagonal(&space)), 0.0);
        let rabi = build_dimer(&space, &p).unwrap();
        assert!(rabi.commutes_with_diagonal(&excitation_diagonal(&space)) > 0.1);
    }

    #[test]
    fn wrong_site_count_is_rejected() {
        let s2 = FockSpace::new(3, 2).unwrap();
        assert!(build_rabi(&s2, &RabiParams::resonant(0.1)).is_err());
        let s1 = FockSpace::new(3, 1).unwrap();
        assert!(build_dimer(&s1, &DimerParams::identical(RabiParams::resonant(0.1), 0.0)).is_err());
        assert!(build_rabi(&s1, &RabiParams::resonant(-0.1)).is_err());
    }

    #[test]
    fn sector_embeddings_partition_the_space() {
        let space = FockSpace::new(3, 2).unwrap();
        let total: usize = sectors(&space, true)
            .into_iter()
            .map(|s| sector_embedding(&space, s).len())
            .sum();
        assert_eq!(total, space.dim());
    }

    #[test]
    fn a2_map_values() {
        let p = DimerParams::identical(RabiParams::resonant(0.5), 0.02);
        let same = a2_renormalize(&p, A2Map::Quadrature).unwrap();
        assert_eq!(same.r, 0.0);
        assert_eq!(same.params, p);

        let q = p.with_a2(0.75);
        let published = a2_renormalize(&q, A2Map::Published).unwrap();
        assert!(((4.0 * published.r).exp() - 4.0).abs() < 1e-12);
        assert!((published.params.left.omega0 - 2.0).abs() < 1e-12);
        assert!((published.params.left.g - 0.5 * 2f64.sqrt()).abs() < 1e-12);
        assert!((published.params.j - 0.04).abs() < 1e-12);
        let ratio = published.params.left.g / published.params.left.omega0;
        assert!((ratio - 0.5 * (-published.r).exp()).abs() < 1e-12);

        let exact = a2_renormalize(&q, A2Map::Quadrature).unwrap();
        assert!((exact.params.left.g - 0.5 / 2f64.sqrt()).abs() < 1e-12);
        assert!((exact.params.j - 0.02 * 1.25).abs() < 1e-12);
    }

    #[test]
    fn model_config_keys() {
        let cfg: ModelConfig =
            serde_json::from_str(r#"{"omega0":1,"Omega":1,"g":2,"J":0.01,"D":0,"n_max":40,"jc_only":false}"#).unwrap();
        assert_eq!(cfg.sites, 2);
        assert_eq!(cfg.dimer().j, 0.01);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"g":1,"bogus":2}"#).is_err());
        assert_eq!(default_n_max(20, 2.0), 20 + 44 + 10);
    }
}
