//! Truncated oscillator ⊗ qubit Hilbert spaces for one or two cavity sites.
//!
//! Basis ordering is site-major (left site most significant), then Fock level,
//! then qubit, with the qubit index running fastest. Within a site the local
//! index is `2 n + e` where `e = 0` for ↓ and `e = 1` for ↑, so `|0,↓⟩` is
//! always basis index 0.

mod operator;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use operator::{annihilator, creator, identity, number, pauli, OperatorMatrix, PauliAxis, SparseBlock};
pub use state::{displaced_fock, product_state, ModeState, SiteState, StateVector, TAIL_LIMIT};
pub(crate) use state::{inner as state_inner, norm as state_norm};

/// Cavity site. Single-site spaces only contain [`Site::Left`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    Left,
    Right,
}

impl Site {
    pub fn index(self) -> usize {
        match self {
            Site::Left => 0,
            Site::Right => 1,
        }
    }

    pub fn other(self) -> Site {
        match self {
            Site::Left => Site::Right,
            Site::Right => Site::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    Down,
    Up,
}

impl Qubit {
    /// Qubit excitation number: 0 for ↓, 1 for ↑.
    pub fn excitation(self) -> usize {
        match self {
            Qubit::Down => 0,
            Qubit::Up => 1,
        }
    }

    fn from_excitation(e: usize) -> Qubit {
        if e == 0 {
            Qubit::Down
        } else {
            Qubit::Up
        }
    }
}

/// Label `|n, σ⟩` of one site's factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteLabel {
    pub n: usize,
    pub qubit: Qubit,
}

impl SiteLabel {
    pub fn new(n: usize, qubit: Qubit) -> Self {
        Self { n, qubit }
    }
}

/// A truncated `[oscillator ⊗ qubit]^n_sites` space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    n_max: usize,
    n_sites: usize,
    dim: usize,
}

impl FockSpace {
    pub fn new(n_max: usize, n_sites: usize) -> Result<Self> {
        if !(1..=2).contains(&n_sites) {
            return Err(Error::InvalidSites(n_sites));
        }
        let overflow = Error::DimensionOverflow { n_max, n_sites };
        let local = n_max
            .checked_add(1)
            .and_then(|levels| levels.checked_mul(2))
            .ok_or(Error::DimensionOverflow { n_max, n_sites })?;
        let dim = (1..n_sites).try_fold(local, |acc, _| acc.checked_mul(local));
        let dim = dim.ok_or(overflow)?;
        Ok(Self {
            n_max,
            n_sites,
            dim,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of one site's oscillator ⊗ qubit factor.
    pub fn local_dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn sites(&self) -> &'static [Site] {
        if self.n_sites == 1 {
            &[Site::Left]
        } else {
            &[Site::Left, Site::Right]
        }
    }

    pub fn check_site(&self, site: Site) -> Result<()> {
        if site.index() < self.n_sites {
            Ok(())
        } else {
            Err(Error::InvalidSite {
                site,
                n_sites: self.n_sites,
            })
        }
    }

    /// Same site count with a different truncation.
    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::new(n_max, self.n_sites)
    }

    pub fn encode(&self, labels: &[SiteLabel]) -> Result<usize> {
        if labels.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: labels.len(),
            });
        }
        let local = self.local_dim();
        labels.iter().try_fold(0usize, |acc, label| {
            if label.n > self.n_max {
                return Err(Error::FockOutOfRange {
                    n: label.n,
                    n_max: self.n_max,
                });
            }
            Ok(acc * local + 2 * label.n + label.qubit.excitation())
        })
    }

    pub fn decode(&self, index: usize) -> Vec<SiteLabel> {
        assert!(index < self.dim, "basis index {index} out of range");
        let local = self.local_dim();
        let mut labels = vec![SiteLabel::new(0, Qubit::Down); self.n_sites];
        let mut rest = index;
        for slot in labels.iter_mut().rev() {
            let l = rest % local;
            rest /= local;
            *slot = SiteLabel::new(l / 2, Qubit::from_excitation(l % 2));
        }
        labels
    }

    /// Local (oscillator ⊗ qubit) index of `site` inside global basis index `index`.
    #[inline]
    pub(crate) fn local_index(&self, index: usize, site: Site) -> usize {
        let local = self.local_dim();
        match (self.n_sites, site) {
            (1, _) => index,
            (_, Site::Left) => index / local,
            (_, Site::Right) => index % local,
        }
    }

    /// Photon number on `site` for every basis index.
    pub fn photon_numbers(&self, site: Site) -> Result<Vec<usize>> {
        self.check_site(site)?;
        Ok((0..self.dim)
            .map(|i| self.local_index(i, site) / 2)
            .collect())
    }

    /// Total parity `(-1)^{Σ_j n_j + e_j}` of every basis state (`true` = even).
    pub fn parities(&self) -> Vec<bool> {
        (0..self.dim)
            .map(|i| {
                let total: usize = self
                    .sites()
                    .iter()
                    .map(|&s| {
                        let l = self.local_index(i, s);
                        l / 2 + l % 2
                    })
                    .sum();
                total % 2 == 0
            })
            .collect()
    }

    /// Basis index obtained by exchanging the left and right labels.
    pub fn swapped_index(&self, index: usize) -> usize {
        if self.n_sites == 1 {
            return index;
        }
        let local = self.local_dim();
        (index % local) * local + index / local
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(FockSpace::new(2, 1).unwrap().dim(), 6);
        assert_eq!(FockSpace::new(0, 2).unwrap().dim(), 4);
        assert_eq!(FockSpace::new(60, 2).unwrap().dim(), 14884);
    }

    #[test]
    fn rejects_bad_sites_and_overflow() {
        assert!(matches!(
            FockSpace::new(3, 3),
            Err(Error::InvalidSites(3))
        ));
        assert!(matches!(
            FockSpace::new(3, 0),
            Err(Error::InvalidSites(0))
        ));
        assert!(matches!(
            FockSpace::new(usize::MAX / 2, 2),
            Err(Error::DimensionOverflow { .. })
        ));
        assert!(matches!(
            FockSpace::new(usize::MAX, 1),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn index_bijection() {
        for space in [FockSpace::new(4, 1).unwrap(), FockSpace::new(5, 2).unwrap()] {
            for i in 0..space.dim() {
                let labels = space.decode(i);
                assert_eq!(space.encode(&labels).unwrap(), i);
            }
        }
    }

    #[test]
    fn ordering_is_site_major_qubit_fastest() {
        let space = FockSpace::new(3, 2).unwrap();
        let idx = |nl, ql, nr, qr| {
            space
                .encode(&[SiteLabel::new(nl, ql), SiteLabel::new(nr, qr)])
                .unwrap()
        };
        assert_eq!(idx(0, Qubit::Down, 0, Qubit::Down), 0);
        assert_eq!(idx(0, Qubit::Down, 0, Qubit::Up), 1);
        assert_eq!(idx(0, Qubit::Down, 1, Qubit::Down), 2);
        assert_eq!(idx(0, Qubit::Up, 0, Qubit::Down), 8);
        assert_eq!(idx(1, Qubit::Down, 0, Qubit::Down), 16);
    }

    #[test]
    fn swapped_index_exchanges_labels() {
        let space = FockSpace::new(3, 2).unwrap();
        for i in 0..space.dim() {
            let mut labels = space.decode(i);
            labels.swap(0, 1);
            assert_eq!(space.swapped_index(i), space.encode(&labels).unwrap());
        }
    }

    #[test]
    fn encode_rejects_levels_above_truncation() {
        let space = FockSpace::new(2, 1).unwrap();
        assert!(space.encode(&[SiteLabel::new(3, Qubit::Down)]).is_err());
        assert!(space.check_site(Site::Right).is_err());
    }
}
