use faer::{c64, Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{FockSpace, OperatorMatrix, Qubit, SiteLabel};
use crate::error::{Error, Result};

/// Largest tolerated probability mass lost to the Fock truncation.
pub const TAIL_LIMIT: f64 = 1e-10;

/// Normalized state on a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps `amplitudes` and normalizes them.
    pub fn from_amplitudes(space: FockSpace, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        let mut state = Self { space, amplitudes };
        state.normalize()?;
        Ok(state)
    }

    pub fn basis(space: FockSpace, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); space.dim()];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { space, amplitudes }
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Real part of `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        op.expectation_raw(&self.amplitudes).re
    }

    /// `⟨O²⟩ - ⟨O⟩²` for a hermitian `O`.
    pub fn variance(&self, op: &OperatorMatrix) -> f64 {
        let o_psi = op.apply_vec(&self.amplitudes);
        let mean = inner(&self.amplitudes, &o_psi).re;
        let second: f64 = o_psi.iter().map(|z| z.norm_sqr()).sum();
        second - mean * mean
    }
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Oscillator part of a single-site product state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeState {
    Fock(usize),
    Coherent(C64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteState {
    pub mode: ModeState,
    pub qubit: Qubit,
}

impl SiteState {
    pub fn fock(n: usize, qubit: Qubit) -> Self {
        Self {
            mode: ModeState::Fock(n),
            qubit,
        }
    }

    pub fn coherent(alpha: C64, qubit: Qubit) -> Self {
        Self {
            mode: ModeState::Coherent(alpha),
            qubit,
        }
    }
}

/// Truncated coherent-state amplitudes `e^{-|α|²/2} α^n / √n!` for `n ≤ n_max`,
/// together with the discarded tail mass.
fn coherent_amplitudes(alpha: C64, n_max: usize) -> (Vec<C64>, f64) {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let mut tail = 0.0;
    let mut n = n_max;
    loop {
        n += 1;
        c = c * alpha / (n as f64).sqrt();
        let p = c.norm_sqr();
        tail += p;
        if (n as f64) > alpha.norm_sqr() && p < 1e-40 {
            break;
        }
        if p == 0.0 {
            break;
        }
    }
    (amps, tail)
}

fn mode_amplitudes(mode: ModeState, n_max: usize) -> Result<Vec<C64>> {
    match mode {
        ModeState::Fock(n) => {
            if n > n_max {
                return Err(Error::FockOutOfRange { n, n_max });
            }
            let mut v = vec![C64::new(0.0, 0.0); n_max + 1];
            v[n] = C64::new(1.0, 0.0);
            Ok(v)
        }
        ModeState::Coherent(alpha) => {
            let (mut v, tail) = coherent_amplitudes(alpha, n_max);
            if tail >= TAIL_LIMIT {
                return Err(Error::TruncationTail {
                    tail,
                    limit: TAIL_LIMIT,
                });
            }
            let n = norm(&v);
            v.iter_mut().for_each(|a| *a /= n);
            Ok(v)
        }
    }
}

/// Tensor together per-site oscillator amplitudes and qubit states.
fn tensor_sites(space: &FockSpace, factors: &[(Vec<C64>, Qubit)]) -> Result<StateVector> {
    let mut amplitudes = vec![C64::new(0.0, 0.0); space.dim()];
    match factors {
        [(left, ql)] => {
            for (n, &a) in left.iter().enumerate() {
                amplitudes[space.encode(&[SiteLabel::new(n, *ql)])?] = a;
            }
        }
        [(left, ql), (right, qr)] => {
            for (nl, &a) in left.iter().enumerate() {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for (nr, &b) in right.iter().enumerate() {
                    let idx = space.encode(&[SiteLabel::new(nl, *ql), SiteLabel::new(nr, *qr)])?;
                    amplitudes[idx] = a * b;
                }
            }
        }
        _ => {
            return Err(Error::DimensionMismatch {
                expected: space.n_sites(),
                found: factors.len(),
            })
        }
    }
    StateVector::from_amplitudes(*space, amplitudes)
}

/// Normalized product state with one [`SiteState`] per site.
///
/// Coherent amplitudes are renormalized after truncation; a discarded tail
/// mass of [`TAIL_LIMIT`] or more is an error.
pub fn product_state(space: &FockSpace, sites: &[SiteState]) -> Result<StateVector> {
    if sites.len() != space.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: space.n_sites(),
            found: sites.len(),
        });
    }
    let factors = sites
        .iter()
        .map(|s| Ok((mode_amplitudes(s.mode, space.n_max())?, s.qubit)))
        .collect::<Result<Vec<_>>>()?;
    tensor_sites(space, &factors)
}

/// Displaced Fock state `e^{α â† - α* â}|n⟩ ⊗ |qubit⟩` on a single-site space.
///
/// The displacement is exponentiated exactly (dense hermitian
/// eigendecomposition) on an enlarged oscillator ladder; the mass that lands
/// above `n_max` is reported as a truncation error when it reaches
/// [`TAIL_LIMIT`], otherwise the state is projected and renormalized.
pub fn displaced_fock(space: &FockSpace, n: usize, alpha: C64, qubit: Qubit) -> Result<StateVector> {
    if space.n_sites() != 1 {
        return Err(Error::InvalidParameter(
            "displaced_fock needs a single-site space".into(),
        ));
    }
    if n > space.n_max() {
        return Err(Error::FockOutOfRange {
            n,
            n_max: space.n_max(),
        });
    }
    let amps = displaced_ladder(n, alpha, space.n_max())?;
    tensor_sites(space, &[(amps, qubit)])
}

/// Oscillator amplitudes of `D(α)|n⟩` for levels `0..=n_max`.
pub(crate) fn displaced_ladder(n: usize, alpha: C64, n_max: usize) -> Result<Vec<C64>> {
    let a = alpha.norm();
    let reach = ((n as f64).sqrt() + a).powi(2) + 12.0 * ((n as f64).sqrt() + a) + 40.0;
    let big = n_max.max(reach.ceil() as usize) + 10;
    let dim = big + 1;
    // H' = i(α â† - α* â) is hermitian and e^{-iH'} = D(α).
    let i = c64::new(0.0, 1.0);
    let mut gen = Mat::<c64>::zeros(dim, dim);
    for m in 1..dim {
        let s = (m as f64).sqrt();
        gen[(m, m - 1)] = i * alpha * s;
        gen[(m - 1, m)] = -i * alpha.conj() * s;
    }
    let eig = gen
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let u = eig.U();
    let lambda = eig.S().column_vector();
    let mut full = vec![C64::new(0.0, 0.0); dim];
    for k in 0..dim {
        let w = u[(n, k)].conj() * C64::from_polar(1.0, -lambda[k].re);
        for (m, slot) in full.iter_mut().enumerate() {
            *slot += u[(m, k)] * w;
        }
    }
    let tail: f64 = full[n_max + 1..].iter().map(|z| z.norm_sqr()).sum();
    if tail >= TAIL_LIMIT {
        return Err(Error::TruncationTail {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    full.truncate(n_max + 1);
    let nrm = norm(&full);
    full.iter_mut().for_each(|z| *z /= nrm);
    Ok(full)
}
