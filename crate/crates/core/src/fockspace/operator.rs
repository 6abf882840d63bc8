use std::ops::{Add, Mul, Sub};

use faer::{c64, Mat};
use num_complex::Complex64 as C64;

use super::{FockSpace, Site};
use crate::error::Result;

/// Entries with modulus below this are not stored.
const DROP_TOL: f64 = 1e-15;

/// Sparse complex operator in CSR form on a [`FockSpace`].
///
/// The hermitian flag is computed from the stored entries at construction and
/// is set only when `M = M^†` holds exactly.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    space: FockSpace,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
    /// Real parts, kept when every stored entry is real (fast matvec path).
    real: Option<Vec<f64>>,
    hermitian: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl OperatorMatrix {
    pub fn from_triplets<I>(space: FockSpace, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let dim = space.dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (i, j, v) in triplets {
            assert!(i < dim && j < dim, "entry ({i},{j}) outside dimension {dim}");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut iter = row.into_iter().peekable();
            while let Some((j, mut v)) = iter.next() {
                while let Some(&(j2, v2)) = iter.peek() {
                    if j2 != j {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v.norm() >= DROP_TOL {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self::from_csr(space, row_ptr, cols, values)
    }

    fn from_csr(space: FockSpace, row_ptr: Vec<usize>, cols: Vec<usize>, values: Vec<C64>) -> Self {
        let real = values
            .iter()
            .all(|v| v.im == 0.0)
            .then(|| values.iter().map(|v| v.re).collect());
        let mut op = Self {
            space,
            row_ptr,
            cols,
            values,
            real,
            hermitian: false,
        };
        op.hermitian = op.hermitian_defect() == 0.0;
        op
    }

    pub fn from_diagonal(space: FockSpace, diagonal: &[f64]) -> Self {
        assert_eq!(diagonal.len(), space.dim());
        Self::from_triplets(
            space,
            diagonal
                .iter()
                .enumerate()
                .map(|(i, &d)| (i, i, C64::new(d, 0.0))),
        )
    }

    pub fn zeros(space: FockSpace) -> Self {
        Self::from_csr(space, vec![0; space.dim() + 1], Vec::new(), Vec::new())
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        self.real.is_some()
    }

    /// Iterator over stored `(row, col, value)` entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `max |M - M^†|` over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - B|` entrywise.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (self - other).entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self::from_triplets(self.space, self.entries().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, c: C64) -> OperatorMatrix {
        Self::from_triplets(self.space, self.entries().map(|(i, j, v)| (i, j, v * c)))
    }

    pub fn scale_real(&self, c: f64) -> OperatorMatrix {
        self.scale(C64::new(c, 0.0))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        &(self * other) - &(other * self)
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        csr_apply(&self.row_ptr, &self.cols, &self.values, self.real.as_deref(), x, y);
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// `⟨x|M|x⟩` for an arbitrary (not necessarily normalized) vector.
    pub fn expectation_raw(&self, x: &[C64]) -> C64 {
        assert_eq!(x.len(), self.dim());
        let mut total = C64::new(0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for (&c, &v) in self.cols[lo..hi].iter().zip(&self.values[lo..hi]) {
                acc += x[c] * v;
            }
            total += xi.conj() * acc;
        }
        total
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    /// Dense real copy, available when every entry is real.
    pub fn to_dense_real(&self) -> Option<Mat<f64>> {
        self.real.as_ref()?;
        let mut m = Mat::<f64>::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            m[(i, j)] = v.re;
        }
        Some(m)
    }

    /// Dense block `M[idx, idx]` restricted to the given basis indices.
    pub fn dense_block(&self, indices: &[usize]) -> Mat<c64> {
        let mut position = vec![usize::MAX; self.dim()];
        for (p, &i) in indices.iter().enumerate() {
            position[i] = p;
        }
        let mut m = Mat::<c64>::zeros(indices.len(), indices.len());
        for (p, &i) in indices.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let q = position[self.cols[k]];
                if q != usize::MAX {
                    m[(p, q)] = self.values[k];
                }
            }
        }
        m
    }

    /// Real variant of [`dense_block`](Self::dense_block).
    pub fn dense_block_real(&self, indices: &[usize]) -> Option<Mat<f64>> {
        self.real.as_ref()?;
        let block = self.dense_block(indices);
        Some(Mat::from_fn(block.nrows(), block.ncols(), |i, j| block[(i, j)].re))
    }

    /// Sparse principal submatrix on the given basis indices.
    pub fn sparse_block(&self, indices: &[usize]) -> SparseBlock {
        let mut position = vec![usize::MAX; self.dim()];
        for (p, &i) in indices.iter().enumerate() {
            position[i] = p;
        }
        let mut row_ptr = Vec::with_capacity(indices.len() + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in indices {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let q = position[self.cols[k]];
                if q != usize::MAX {
                    cols.push(q);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        let real = self.real.as_ref().map(|_| values.iter().map(|v| v.re).collect());
        SparseBlock {
            indices: indices.to_vec(),
            full_dim: self.dim(),
            row_ptr,
            cols,
            values,
            real,
            hermitian: self.hermitian,
        }
    }

    /// Largest entry modulus of `M P - P M` for a diagonal `P`.
    pub fn commutes_with_diagonal(&self, diagonal: &[f64]) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v * (diagonal[j] - diagonal[i])).norm())
            .fold(0.0, f64::max)
    }

    fn check_same_space(&self, other: &OperatorMatrix) {
        assert_eq!(self.space, other.space, "operators live on different spaces");
    }

    fn combine(&self, other: &OperatorMatrix, sign: f64) -> OperatorMatrix {
        self.check_same_space(other);
        let it = self
            .entries()
            .chain(other.entries().map(|(i, j, v)| (i, j, v * sign)));
        Self::from_triplets(self.space, it)
    }
}

/// Principal submatrix of an [`OperatorMatrix`] in CSR form.
#[derive(Debug, Clone)]
pub struct SparseBlock {
    indices: Vec<usize>,
    full_dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
    real: Option<Vec<f64>>,
    hermitian: bool,
}

impl SparseBlock {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `y = B x` on block coordinates.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        csr_apply(&self.row_ptr, &self.cols, &self.values, self.real.as_deref(), x, y);
    }

    /// Block coordinates of a full vector.
    pub fn gather(&self, psi: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&i| psi[i]).collect()
    }

    /// Writes block coordinates into the matching entries of a full vector.
    pub fn scatter(&self, local: &[C64], psi: &mut [C64]) {
        for (&i, &v) in self.indices.iter().zip(local) {
            psi[i] = v;
        }
    }
}

fn csr_apply(row_ptr: &[usize], cols: &[usize], values: &[C64], real: Option<&[f64]>, x: &[C64], y: &mut [C64]) {
    let rows = row_ptr.len() - 1;
    assert_eq!(x.len(), rows);
    assert_eq!(y.len(), rows);
    match real {
        Some(vals) => {
            for (i, out) in y.iter_mut().enumerate() {
                let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                let mut acc = C64::new(0.0, 0.0);
                for (&c, &v) in cols[lo..hi].iter().zip(&vals[lo..hi]) {
                    acc += x[c] * v;
                }
                *out = acc;
            }
        }
        None => {
            for (i, out) in y.iter_mut().enumerate() {
                let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                let mut acc = C64::new(0.0, 0.0);
                for (&c, &v) in cols[lo..hi].iter().zip(&values[lo..hi]) {
                    acc += x[c] * v;
                }
                *out = acc;
            }
        }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.check_same_space(rhs);
        let dim = self.dim();
        let mut acc = vec![C64::new(0.0, 0.0); dim];
        let mut marker = vec![usize::MAX; dim];
        let mut touched = Vec::new();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            touched.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (mid, a) = (self.cols[k], self.values[k]);
                for l in rhs.row_ptr[mid]..rhs.row_ptr[mid + 1] {
                    let j = rhs.cols[l];
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        touched.push(j);
                    }
                    acc[j] += a * rhs.values[l];
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j].norm() >= DROP_TOL {
                    cols.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(cols.len());
        }
        OperatorMatrix::from_csr(self.space, row_ptr, cols, values)
    }
}

impl Mul<&OperatorMatrix> for f64 {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        rhs.scale_real(self)
    }
}

impl Mul<&OperatorMatrix> for C64 {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        rhs.scale(self)
    }
}

/// Lift a local (oscillator ⊗ qubit) operator, given as entries on local
/// indices, onto `site` of `space` with identity on the other site.
fn embed(space: &FockSpace, site: Site, local: &[(usize, usize, C64)]) -> Result<OperatorMatrix> {
    space.check_site(site)?;
    let d = space.local_dim();
    let triplets: Vec<(usize, usize, C64)> = match (space.n_sites(), site) {
        (1, _) => local.to_vec(),
        (_, Site::Left) => local
            .iter()
            .flat_map(|&(i, j, v)| (0..d).map(move |r| (i * d + r, j * d + r, v)))
            .collect(),
        (_, Site::Right) => local
            .iter()
            .flat_map(|&(i, j, v)| (0..d).map(move |l| (l * d + i, l * d + j, v)))
            .collect(),
    };
    Ok(OperatorMatrix::from_triplets(*space, triplets))
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Cavity annihilation operator `â` on `site`; `⟨n-1|â|n⟩ = √n`.
pub fn annihilator(space: &FockSpace, site: Site) -> Result<OperatorMatrix> {
    let local: Vec<_> = (1..=space.n_max())
        .flat_map(|n| (0..2).map(move |e| (2 * (n - 1) + e, 2 * n + e, re((n as f64).sqrt()))))
        .collect();
    embed(space, site, &local)
}

pub fn creator(space: &FockSpace, site: Site) -> Result<OperatorMatrix> {
    Ok(annihilator(space, site)?.adjoint())
}

/// Photon number `â†â` on `site` (built directly as a diagonal).
pub fn number(space: &FockSpace, site: Site) -> Result<OperatorMatrix> {
    let local: Vec<_> = (0..=space.n_max())
        .flat_map(|n| (0..2).map(move |e| (2 * n + e, 2 * n + e, re(n as f64))))
        .collect();
    embed(space, site, &local)
}

/// Pauli and qubit ladder operators on `site`, with `σᶻ|↑⟩ = |↑⟩`, `σᶻ|↓⟩ = -|↓⟩`
/// and `σ⁺ = |↑⟩⟨↓|`.
pub fn pauli(space: &FockSpace, site: Site, axis: PauliAxis) -> Result<OperatorMatrix> {
    let i = C64::new(0.0, 1.0);
    let local: Vec<_> = (0..=space.n_max())
        .flat_map(|n| {
            let (dn, up) = (2 * n, 2 * n + 1);
            let entries: Vec<(usize, usize, C64)> = match axis {
                PauliAxis::X => vec![(dn, up, re(1.0)), (up, dn, re(1.0))],
                PauliAxis::Y => vec![(up, dn, -i), (dn, up, i)],
                PauliAxis::Z => vec![(up, up, re(1.0)), (dn, dn, re(-1.0))],
                PauliAxis::Plus => vec![(up, dn, re(1.0))],
                PauliAxis::Minus => vec![(dn, up, re(1.0))],
            };
            entries
        })
        .collect();
    embed(space, site, &local)
}

pub fn identity(space: &FockSpace) -> OperatorMatrix {
    OperatorMatrix::from_diagonal(*space, &vec![1.0; space.dim()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{product_state, Qubit, SiteState};

    #[test]
    fn ladder_elements() {
        let space = FockSpace::new(2, 1).unwrap();
        let a = annihilator(&space, Site::Left).unwrap();
        // |n=1,↓⟩ is local index 2, |n=2,↓⟩ is 4.
        assert_eq!(a.get(0, 2), re(1.0));
        assert!((a.get(2, 4).re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn vacuum_annihilation_and_number() {
        let space = FockSpace::new(4, 1).unwrap();
        let a = annihilator(&space, Site::Left).unwrap();
        let vac = product_state(&space, &[SiteState::fock(0, Qubit::Down)]).unwrap();
        assert!(a.apply_vec(vac.amplitudes()).iter().all(|z| z.norm() == 0.0));

        let n = &a.adjoint() * &a;
        let two = product_state(&space, &[SiteState::fock(2, Qubit::Down)]).unwrap();
        let out = n.apply_vec(two.amplitudes());
        for (o, x) in out.iter().zip(two.amplitudes()) {
            assert!((o - x * 2.0).norm() < 1e-14);
        }
        assert!(n.max_abs_diff(&number(&space, Site::Left).unwrap()) < 1e-14);
    }

    #[test]
    fn commutator_is_identity_below_truncation() {
        let space = FockSpace::new(6, 2).unwrap();
        for &site in space.sites() {
            let a = annihilator(&space, site).unwrap();
            let comm = a.commutator(&a.adjoint());
            for (i, j, v) in comm.entries() {
                let n = space.decode(i)[site.index()].n;
                if n < space.n_max() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - re(expect)).norm() < 1e-14, "entry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn pauli_algebra() {
        let space = FockSpace::new(3, 2).unwrap();
        for &site in space.sites() {
            let x = pauli(&space, site, PauliAxis::X).unwrap();
            let y = pauli(&space, site, PauliAxis::Y).unwrap();
            let z = pauli(&space, site, PauliAxis::Z).unwrap();
            let p = pauli(&space, site, PauliAxis::Plus).unwrap();
            let m = pauli(&space, site, PauliAxis::Minus).unwrap();
            let id = identity(&space);
            assert_eq!(x.max_abs_diff(&(&p + &m)), 0.0);
            assert_eq!((&(&p * &m) + &(&m * &p)).max_abs_diff(&id), 0.0);
            // σ± = (σx ± iσy)/2
            let i = C64::new(0.0, 1.0);
            let plus = (&x + &(i * &y)).scale_real(0.5);
            assert_eq!(plus.max_abs_diff(&p), 0.0);
            // σx σy = i σz
            assert_eq!((&x * &y).max_abs_diff(&(i * &z)), 0.0);
            assert!(x.is_hermitian() && y.is_hermitian() && z.is_hermitian());
            assert!(!p.is_hermitian());
        }
    }

    #[test]
    fn sigma_z_on_down_is_minus_one() {
        let space = FockSpace::new(3, 1).unwrap();
        let z = pauli(&space, Site::Left, PauliAxis::Z).unwrap();
        let psi = product_state(&space, &[SiteState::fock(2, Qubit::Down)]).unwrap();
        assert!((z.expectation_raw(psi.amplitudes()).re + 1.0).abs() < 1e-15);
    }

    #[test]
    fn right_site_operator_acts_on_right_factor() {
        let space = FockSpace::new(3, 2).unwrap();
        let n_r = number(&space, Site::Right).unwrap();
        let psi = product_state(
            &space,
            &[SiteState::fock(1, Qubit::Down), SiteState::fock(3, Qubit::Up)],
        )
        .unwrap();
        assert_eq!(n_r.expectation_raw(psi.amplitudes()).re, 3.0);
    }

    #[test]
    fn dense_block_extracts_submatrix() {
        let space = FockSpace::new(2, 1).unwrap();
        let a = annihilator(&space, Site::Left).unwrap();
        let block = a.dense_block(&[0, 2, 4]);
        assert_eq!(block[(0, 1)], re(1.0));
        assert!((block[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(block[(1, 0)], re(0.0));
    }
}
