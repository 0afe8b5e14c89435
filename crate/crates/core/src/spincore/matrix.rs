use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::units::TWO_PI;
use crate::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance used when a matrix must be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

/// Complex state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(DVector<C64>);

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Self {
        assert_eq!(entries.len(), dim * dim, "expected {dim}x{dim} entries");
        Self(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self(DMatrix::from_fn(dim, dim, |i, j| {
            assert_eq!(rows[i].len(), dim);
            re(rows[i][j])
        }))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self(DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                re(diag[i])
            } else {
                C64::default()
            }
        }))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(dim, dim, f))
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "ComplexMatrix must be square");
        Self(m)
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &Ket, b: &Ket) -> Self {
        Self(&a.0 * b.0.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * re(s))
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermitian_deviation() <= rel_tol * self.max_norm().max(1.0)
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        if self.is_hermitian(HERMITIAN_TOL) {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                deviation: self.hermitian_deviation(),
            })
        }
    }

    /// Eigen-decomposition of a Hermitian matrix.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        self.ensure_hermitian()?;
        Ok(self.eigh_unchecked())
    }

    pub(crate) fn eigh_unchecked(&self) -> HermitianEigen {
        let n = self.dim();
        let eig = self.0.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        HermitianEigen {
            values,
            vectors: Self(vectors),
        }
    }

    pub fn eigenvalues_hermitian(&self) -> Result<Vec<f64>> {
        Ok(self.eigh()?.values)
    }

    /// `exp(-i·2π·H·t)` for a Hermitian generator `H` in MHz and `t` in µs.
    pub fn propagator(&self, t: f64) -> Self {
        self.eigh_unchecked().propagator(t)
    }

    pub fn apply(&self, v: &Ket) -> Ket {
        Ket(&self.0 * &v.0)
    }

    /// `⟨a|M|b⟩`.
    pub fn matrix_element(&self, a: &Ket, b: &Ket) -> C64 {
        (a.0.adjoint() * &self.0 * &b.0)[(0, 0)]
    }

    /// Conjugation `U·M·U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self(&u.0 * &self.0 * u.0.adjoint())
    }
}

impl HermitianEigen {
    /// `exp(-i·2π·H·t)` assembled from the stored spectrum.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let v = &self.vectors.0;
        let n = v.nrows();
        let phases: Vec<C64> = self
            .values
            .iter()
            .map(|&e| C64::from_polar(1.0, -TWO_PI * e * t))
            .collect();
        let mut scaled = v.clone();
        for (j, ph) in phases.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= ph;
            }
        }
        ComplexMatrix(scaled * v.adjoint())
    }
}

impl Ket {
    pub fn from_slice(entries: &[C64]) -> Self {
        Self(DVector::from_column_slice(entries))
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = re(1.0);
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, k: usize) -> C64 {
        self.0[k]
    }

    pub fn inner(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn normalized(&self) -> Self {
        Self(&self.0 / re(self.norm()))
    }

    /// `⟨self|other⟩`.
    pub fn dot(&self, other: &Self) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// Column `k` of a matrix as a ket.
    pub fn column_of(m: &ComplexMatrix, k: usize) -> Self {
        Self(m.0.column(k).into_owned())
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(self.0 + rhs.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.0 += &rhs.0;
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(self.0 - rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(self.0 * rhs.0)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        ComplexMatrix(self.0 * re(rhs))
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-self.0)
    }
}
