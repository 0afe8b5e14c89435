use super::matrix::{re, ComplexMatrix, Ket, C64};
use crate::{Error, Result};

pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        m.ensure_hermitian()
            .map_err(|_| Error::InvalidState("not Hermitian".into()))?;
        let tr = m.trace();
        if (tr - re(1.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min_eig = m.eigh_unchecked().values[0];
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be a valid state (e.g. a unitary image
    /// of one). Debug builds still check the trace.
    pub(crate) fn trusted(m: ComplexMatrix) -> Self {
        debug_assert!((m.trace() - re(1.0)).norm() < 1e-8, "trace {}", m.trace());
        Self(m)
    }

    pub fn pure(psi: &Ket) -> Self {
        let psi = psi.normalized();
        Self(ComplexMatrix::outer(&psi, &psi))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim).scale(1.0 / dim as f64))
    }

    /// Diagonal state with the given populations (normalized to unit sum).
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let total: f64 = populations.iter().sum();
        if populations.iter().any(|&p| p < 0.0) || total <= 0.0 {
            return Err(Error::InvalidState(
                "populations must be non-negative".into(),
            ));
        }
        let p: Vec<f64> = populations.iter().map(|x| x / total).collect();
        Ok(Self(ComplexMatrix::from_diagonal(&p)))
    }

    /// Convex mixture `Σ wᵢ ρᵢ` with weights normalized to unit sum.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?
            .1
            .dim();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let mut acc = ComplexMatrix::zeros(dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rho.dim(),
                });
            }
            acc += &rho.0.scale(w / total);
        }
        Self::new(acc)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.0.get(k, k).re
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.eigh_unchecked().values[0]
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, psi: &Ket) -> f64 {
        self.0.matrix_element(psi, psi).re
    }
}

/// Traces out the leading (electron) factor of an `electron ⊗ nuclear` state.
pub fn partial_trace_electron(
    rho: &DensityMatrix,
    electron_dim: usize,
    nuclear_dim: usize,
) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if electron_dim * nuclear_dim != dim {
        return Err(Error::NonFactorizable {
            dim,
            electron: electron_dim,
            nuclear: nuclear_dim,
        });
    }
    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(nuclear_dim, |i, j| {
        (0..electron_dim)
            .map(|e| m.get(e * nuclear_dim + i, e * nuclear_dim + j))
            .sum()
    });
    Ok(DensityMatrix(out))
}

/// Traces out the trailing (nuclear) factor, leaving the electron state.
pub fn partial_trace_nuclear(
    rho: &DensityMatrix,
    electron_dim: usize,
    nuclear_dim: usize,
) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if electron_dim * nuclear_dim != dim {
        return Err(Error::NonFactorizable {
            dim,
            electron: electron_dim,
            nuclear: nuclear_dim,
        });
    }
    let m = rho.matrix();
    let out = ComplexMatrix::from_fn(electron_dim, |a, b| {
        (0..nuclear_dim)
            .map(|n| m.get(a * nuclear_dim + n, b * nuclear_dim + n))
            .sum()
    });
    Ok(DensityMatrix(out))
}

/// `Tr(ρ·O)` for a Hermitian observable.
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<f64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: op.dim(),
        });
    }
    op.ensure_hermitian()?;
    Ok(trace_of_product(rho.matrix(), op).re)
}

fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.dim();
    let (a, b) = (a.inner(), b.inner());
    let mut s = C64::default();
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spincore::operators::spin_half_operators;

    #[test]
    fn rejects_bad_trace_and_negativity() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2)).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_diagonal(&[1.5, -0.5])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::from_diagonal(&[0.3, 0.7])).is_ok());
    }

    #[test]
    fn expectation_of_iz() {
        let (_, _, iz) = spin_half_operators();
        let up = DensityMatrix::pure(&Ket::basis(2, 0));
        let down = DensityMatrix::pure(&Ket::basis(2, 1));
        assert_eq!(expectation(&up, &iz).unwrap(), 0.5);
        assert_eq!(expectation(&down, &iz).unwrap(), -0.5);
        assert_eq!(
            expectation(&DensityMatrix::maximally_mixed(2), &iz).unwrap(),
            0.0
        );
    }

    #[test]
    fn expectation_rejects_non_hermitian() {
        let rho = DensityMatrix::maximally_mixed(2);
        let op = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            expectation(&rho, &op),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let re_ = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
        let rn = DensityMatrix::diagonal(&[0.1, 0.3, 0.6]).unwrap();
        let joint = re_.kron(&rn);
        let back = partial_trace_electron(&joint, 2, 3).unwrap();
        assert!((back.matrix() - rn.matrix()).max_norm() < 1e-15);
        let e = partial_trace_nuclear(&joint, 2, 3).unwrap();
        assert!((e.matrix() - re_.matrix()).max_norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = Ket::from_slice(&[re(s), re(0.0), re(0.0), re(s)]);
        let rho = DensityMatrix::pure(&bell);
        let n = partial_trace_electron(&rho, 2, 2).unwrap();
        assert!((n.matrix() - DensityMatrix::maximally_mixed(2).matrix()).max_norm() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_factorization() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert!(matches!(
            partial_trace_electron(&rho, 4, 2),
            Err(Error::NonFactorizable { .. })
        ));
    }
}
