//! Dense hermitian eigendecompositions and the Lanczos propagator.

use faer::{c64, Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{OperatorMatrix, SparseBlock};

/// Real isometry `P` whose columns span an invariant subspace.
///
/// Each column is a sparse list of `(basis index, coefficient)` pairs; columns
/// are orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl Embedding {
    pub fn new(dim: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(columns.iter().flatten().all(|&(i, _)| i < dim));
        Self { dim, columns }
    }

    /// Coordinate subspace spanned by the given basis indices.
    pub fn indices(dim: usize, indices: &[usize]) -> Self {
        Self::new(dim, indices.iter().map(|&i| vec![(i, 1.0)]).collect())
    }

    pub fn full_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    /// `Pᵀ ψ`.
    pub fn restrict(&self, psi: &[C64]) -> Vec<C64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, c)| psi[i] * c).sum())
            .collect()
    }

    /// `P x`.
    pub fn extend(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (col, &v) in self.columns.iter().zip(x) {
            for &(i, c) in col {
                out[i] += v * c;
            }
        }
        out
    }

    /// Dense `Pᵀ M P`.
    pub fn compress(&self, op: &OperatorMatrix) -> Mat<c64> {
        let k = self.len();
        let mut m = Mat::<c64>::zeros(k, k);
        let mut unit = vec![C64::new(0.0, 0.0); self.dim];
        let mut image = vec![C64::new(0.0, 0.0); self.dim];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, c) in col {
                unit[i] = C64::new(c, 0.0);
            }
            op.apply(&unit, &mut image);
            for &(i, _) in col {
                unit[i] = C64::new(0.0, 0.0);
            }
            for (r, row) in self.columns.iter().enumerate() {
                m[(r, j)] = row.iter().map(|&(i, c)| image[i] * c).sum();
            }
        }
        m
    }
}

/// Eigenvectors stored as columns, real when the operator is real.
#[derive(Debug, Clone)]
enum Columns {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

/// Eigenpairs of a hermitian operator, ascending in energy.
///
/// When built on an invariant subspace (a symmetry sector) the vectors live in
/// that subspace and are mapped back through its [`Embedding`].
#[derive(Debug, Clone)]
pub struct Eigensystem {
    values: Vec<f64>,
    columns: Columns,
    embedding: Option<Embedding>,
    dim: usize,
}

impl Eigensystem {
    pub fn full(op: &OperatorMatrix) -> Result<Self> {
        Self::build(op, None)
    }

    /// Eigenpairs of the block of `op` on `indices`; the block must be invariant.
    pub fn block(op: &OperatorMatrix, indices: &[usize]) -> Result<Self> {
        Self::build(op, Some(Embedding::indices(op.dim(), indices)))
    }

    /// Eigenpairs of `Pᵀ op P`; the range of `P` must be invariant under `op`.
    pub fn sector(op: &OperatorMatrix, embedding: Embedding) -> Result<Self> {
        if embedding.full_dim() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: embedding.full_dim(),
            });
        }
        Self::build(op, Some(embedding))
    }

    fn build(op: &OperatorMatrix, embedding: Option<Embedding>) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian(op.hermitian_defect()));
        }
        let evd_err = |e| Error::Eigensolver(format!("{e:?}"));
        let (values, columns) = if op.is_real() {
            let m = match &embedding {
                None => op.to_dense_real().expect("real operator"),
                Some(p) => {
                    let c = p.compress(op);
                    Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)].re)
                }
            };
            let eig = m.self_adjoint_eigen(Side::Lower).map_err(evd_err)?;
            let values = eig.S().column_vector().iter().copied().collect();
            (values, Columns::Real(eig.U().to_owned()))
        } else {
            let m = match &embedding {
                None => op.to_dense(),
                Some(p) => p.compress(op),
            };
            let eig = m.self_adjoint_eigen(Side::Lower).map_err(evd_err)?;
            let values = eig.S().column_vector().iter().map(|z| z.re).collect();
            (values, Columns::Complex(eig.U().to_owned()))
        };
        Ok(Self {
            values,
            columns,
            embedding,
            dim: op.dim(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn full_dim(&self) -> usize {
        self.dim
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    /// Keep only the lowest `k` eigenpairs.
    pub fn truncate(&mut self, k: usize) {
        let k = k.min(self.len());
        self.values.truncate(k);
        self.columns = match &self.columns {
            Columns::Real(m) => Columns::Real(m.subcols(0, k).to_owned()),
            Columns::Complex(m) => Columns::Complex(m.subcols(0, k).to_owned()),
        };
    }

    fn rows(&self) -> usize {
        match &self.columns {
            Columns::Real(m) => m.nrows(),
            Columns::Complex(m) => m.nrows(),
        }
    }

    fn gather(&self, psi: &[C64]) -> Vec<C64> {
        match &self.embedding {
            Some(p) => p.restrict(psi),
            None => psi.to_vec(),
        }
    }

    fn scatter(&self, local: Vec<C64>) -> Vec<C64> {
        match &self.embedding {
            Some(p) => p.extend(&local),
            None => local,
        }
    }

    /// Full-space eigenvector `k`.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        let local: Vec<C64> = match &self.columns {
            Columns::Real(m) => m.col(k).iter().map(|&x| C64::new(x, 0.0)).collect(),
            Columns::Complex(m) => m.col(k).iter().copied().collect(),
        };
        self.scatter(local)
    }

    /// Coefficients `c_k = ⟨v_k|ψ⟩`.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.dim);
        let local = self.gather(psi);
        match &self.columns {
            Columns::Real(v) => {
                let x = Mat::<f64>::from_fn(self.rows(), 2, |i, j| if j == 0 { local[i].re } else { local[i].im });
                let y = v.transpose() * &x;
                (0..self.len()).map(|k| C64::new(y[(k, 0)], y[(k, 1)])).collect()
            }
            Columns::Complex(v) => {
                let x = Mat::<c64>::from_fn(self.rows(), 1, |i, _| local[i]);
                let y = v.adjoint() * &x;
                (0..self.len()).map(|k| y[(k, 0)]).collect()
            }
        }
    }

    /// Full-space vector `Σ_k c_k v_k`.
    pub fn expand(&self, coeffs: &[C64]) -> Vec<C64> {
        assert_eq!(coeffs.len(), self.len());
        let local: Vec<C64> = match &self.columns {
            Columns::Real(v) => {
                let x = Mat::<f64>::from_fn(self.len(), 2, |k, j| if j == 0 { coeffs[k].re } else { coeffs[k].im });
                let y = v * &x;
                (0..self.rows()).map(|i| C64::new(y[(i, 0)], y[(i, 1)])).collect()
            }
            Columns::Complex(v) => {
                let x = Mat::<c64>::from_fn(self.len(), 1, |k, _| coeffs[k]);
                let y = v * &x;
                (0..self.rows()).map(|i| y[(i, 0)]).collect()
            }
        };
        self.scatter(local)
    }

    /// Dense matrix `V^† O V` of `op` restricted to the retained eigenvectors.
    pub fn transform(&self, op: &OperatorMatrix) -> Mat<c64> {
        let k = self.len();
        let mut cols = Vec::with_capacity(k);
        for l in 0..k {
            cols.push(self.project(&op.apply_vec(&self.vector(l))));
        }
        Mat::from_fn(k, k, |i, j| cols[j][i])
    }

    /// Expectation values `⟨v_k|O|v_k⟩` of a diagonal operator for every retained pair.
    pub fn diagonal_expectations(&self, diagonal: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                self.vector(k)
                    .iter()
                    .zip(diagonal)
                    .map(|(v, d)| v.norm_sqr() * d)
                    .sum()
            })
            .collect()
    }

    /// `‖H v_k − E_k v_k‖` for every retained pair.
    pub fn residuals(&self, op: &OperatorMatrix) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let v = self.vector(k);
                let hv = op.apply_vec(&v);
                hv.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * self.values[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Eigendecomposition of a small real symmetric matrix given as a dense closure.
pub(crate) fn small_symmetric_eigen(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<(Vec<f64>, Mat<f64>)> {
    let m = Mat::<f64>::from_fn(n, n, f);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    Ok((eig.S().column_vector().iter().copied().collect(), eig.U().to_owned()))
}

/// Lanczos approximation of `e^{-iHt} ψ` with adaptive sub-stepping.
///
/// Each sub-step builds an `m`-dimensional Krylov space (three-term recurrence,
/// no re-orthogonalization) and takes the longest step whose a-posteriori
/// error estimate `β₀ β_m |[e^{-iτT}e₁]_m|` stays below `tol`.
#[derive(Debug)]
pub struct Lanczos<'a> {
    h: Generator<'a>,
    max_dim: usize,
    tol: f64,
    basis: Vec<Vec<C64>>,
    work: Vec<C64>,
    step_hint: Option<f64>,
    matvecs: usize,
}

#[derive(Debug, Clone, Copy)]
enum Generator<'a> {
    Full(&'a OperatorMatrix),
    Block(&'a SparseBlock),
}

impl Generator<'_> {
    fn dim(&self) -> usize {
        match self {
            Generator::Full(h) => h.dim(),
            Generator::Block(b) => b.dim(),
        }
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        match self {
            Generator::Full(h) => h.apply(x, y),
            Generator::Block(b) => b.apply(x, y),
        }
    }
}

impl<'a> Lanczos<'a> {
    pub fn new(h: &'a OperatorMatrix, max_dim: usize, tol: f64) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::NotHermitian(h.hermitian_defect()));
        }
        Self::build_with(Generator::Full(h), max_dim, tol)
    }

    /// Propagator acting on block coordinates of an invariant subspace.
    pub fn on_block(block: &'a SparseBlock, max_dim: usize, tol: f64) -> Result<Self> {
        if !block.is_hermitian() {
            return Err(Error::NotHermitian(f64::NAN));
        }
        Self::build_with(Generator::Block(block), max_dim, tol)
    }

    fn build_with(h: Generator<'a>, max_dim: usize, tol: f64) -> Result<Self> {
        if max_dim < 2 {
            return Err(Error::InvalidParameter(format!("krylov dimension {max_dim} < 2")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("step tolerance {tol} must be positive")));
        }
        let dim = h.dim();
        let m = max_dim.min(dim).max(1);
        Ok(Self {
            h,
            max_dim: m,
            tol,
            basis: vec![vec![C64::new(0.0, 0.0); dim]; m],
            work: vec![C64::new(0.0, 0.0); dim],
            step_hint: None,
            matvecs: 0,
        })
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs
    }

    /// Overwrites `psi` with `e^{-iHt} psi`. Negative `t` runs backwards.
    pub fn advance(&mut self, psi: &mut [C64], t: f64) -> Result<()> {
        let direction = t.signum();
        let mut remaining = t.abs();
        let mut elapsed = 0.0;
        while remaining > 0.0 {
            let beta0 = crate::fockspace::state_norm(psi);
            if beta0 == 0.0 {
                return Ok(());
            }
            let target = self.step_hint.map_or(remaining, |h| h.min(remaining));
            let (alphas, betas, exact) = self.build(psi, beta0, target)?;
            let m = alphas.len();
            let (lam, u) = tridiagonal_eigen(&alphas, &betas)?;
            let beta_m = if exact { 0.0 } else { betas[m - 1] };
            let coeffs = |tau: f64| -> Vec<C64> {
                (0..m)
                    .map(|j| {
                        (0..m)
                            .map(|k| C64::from_polar(u[(j, k)] * u[(0, k)], -direction * lam[k] * tau))
                            .sum()
                    })
                    .collect()
            };

            let limited = self.step_hint.map_or(false, |h| h < remaining);
            let mut tau = self.step_hint.map_or(remaining, |h| h.min(remaining));
            let mut shrunk = false;
            let mut y = coeffs(tau);
            loop {
                let err = beta0 * beta_m * y[m - 1].norm();
                if err <= self.tol {
                    break;
                }
                let factor = (0.9 * (self.tol / err).powf(1.0 / m as f64)).clamp(0.1, 0.9);
                tau *= factor;
                shrunk = true;
                if tau < 1e-12 * (1.0 + elapsed) {
                    return Err(Error::KrylovStall {
                        step: tau,
                        time: elapsed,
                    });
                }
                y = coeffs(tau);
            }

            self.work.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (j, yj) in y.iter().enumerate() {
                let c = yj * beta0;
                for (w, v) in self.work.iter_mut().zip(&self.basis[j]) {
                    *w += v * c;
                }
            }
            psi.copy_from_slice(&self.work);

            if shrunk {
                self.step_hint = Some(tau);
            } else if limited || self.step_hint.is_some() {
                self.step_hint = Some(tau * 1.2);
            }
            remaining -= tau;
            if remaining < 1e-14 * t.abs() {
                remaining = 0.0;
            }
            elapsed += tau;
        }
        Ok(())
    }

    /// Runs the recurrence from `psi / beta0`; returns the tridiagonal entries
    /// and whether the space became invariant (happy breakdown).
    ///
    /// Stops early once the error estimate for a step of `target` is already
    /// below half the tolerance.
    fn build(&mut self, psi: &[C64], beta0: f64, target: f64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
        let mut alphas = Vec::with_capacity(self.max_dim);
        let mut betas = Vec::with_capacity(self.max_dim);
        for (b, p) in self.basis[0].iter_mut().zip(psi) {
            *b = p / beta0;
        }
        let mut scale = 0.0f64;
        for j in 0..self.max_dim {
            self.h.apply(&self.basis[j], &mut self.work);
            self.matvecs += 1;
            let alpha = crate::fockspace::state_inner(&self.basis[j], &self.work).re;
            alphas.push(alpha);
            for (w, v) in self.work.iter_mut().zip(&self.basis[j]) {
                *w -= v * alpha;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (w, v) in self.work.iter_mut().zip(&self.basis[j - 1]) {
                    *w -= v * b;
                }
            }
            let beta = crate::fockspace::state_norm(&self.work);
            betas.push(beta);
            scale = scale.max(alpha.abs()).max(beta);
            if beta <= 1e-12 * scale.max(1.0) {
                return Ok((alphas, betas, true));
            }
            let m = j + 1;
            if m >= EARLY_STOP_MIN && m < self.max_dim && m % 2 == 0 {
                let (lam, u) = tridiagonal_eigen(&alphas, &betas)?;
                let tail: C64 = (0..m)
                    .map(|k| C64::from_polar(u[(m - 1, k)] * u[(0, k)], -lam[k] * target))
                    .sum();
                if beta0 * beta * tail.norm() <= 0.5 * self.tol {
                    return Ok((alphas, betas, false));
                }
            }
            if j + 1 < self.max_dim {
                let next = &mut self.basis[j + 1];
                for (n, w) in next.iter_mut().zip(&self.work) {
                    *n = w / beta;
                }
            }
        }
        Ok((alphas, betas, false))
    }
}

/// Smallest Krylov dimension at which early termination is tested.
const EARLY_STOP_MIN: usize = 8;

/// Eigenpairs of the symmetric tridiagonal matrix with diagonal `alphas` and
/// off-diagonal `betas[..alphas.len() - 1]`.
fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> Result<(Vec<f64>, Mat<f64>)> {
    small_symmetric_eigen(alphas.len(), |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    })
}
