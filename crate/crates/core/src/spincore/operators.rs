use std::f64::consts::FRAC_1_SQRT_2;

use super::matrix::{c, re, ComplexMatrix, C64};

/// Spin-1 operators `(Sx, Sy, Sz)` in the basis `{|+1⟩, |0⟩, |−1⟩}`.
pub fn spin1_operators() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let s = FRAC_1_SQRT_2;
    let z = C64::default();
    let sx = ComplexMatrix::from_row_slice(3, &[z, re(s), z, re(s), z, re(s), z, re(s), z]);
    let sy = ComplexMatrix::from_row_slice(
        3,
        &[z, c(0.0, -s), z, c(0.0, s), z, c(0.0, -s), z, c(0.0, s), z],
    );
    let sz = ComplexMatrix::from_diagonal(&[1.0, 0.0, -1.0]);
    (sx, sy, sz)
}

/// Spin-½ operators `(Ix, Iy, Iz)` in the basis `{|↑⟩, |↓⟩}`.
pub fn spin_half_operators() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let (px, py, pz) = pauli();
    (px.scale(0.5), py.scale(0.5), pz.scale(0.5))
}

/// Pauli matrices `(σx, σy, σz)`.
pub fn pauli() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let z = C64::default();
    let x = ComplexMatrix::from_row_slice(2, &[z, re(1.0), re(1.0), z]);
    let y = ComplexMatrix::from_row_slice(2, &[z, c(0.0, -1.0), c(0.0, 1.0), z]);
    let zz = ComplexMatrix::from_diagonal(&[1.0, -1.0]);
    (x, y, zz)
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for f in factors {
        out = out.kron(f);
    }
    out
}

/// Embeds a single-site operator at position `site` of `n` spin-½ sites, with
/// identities elsewhere.
pub fn embed_spin_half(op: &ComplexMatrix, site: usize, n: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    let mut out = ComplexMatrix::identity(1);
    for k in 0..n {
        out = out.kron(if k == site { op } else { &id });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spincore::Ket;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).max_norm() < tol
    }

    #[test]
    fn spin1_sz_diagonal() {
        let (_, _, sz) = spin1_operators();
        assert_eq!(sz, ComplexMatrix::from_diagonal(&[1.0, 0.0, -1.0]));
    }

    #[test]
    fn spin1_casimir() {
        let (sx, sy, sz) = spin1_operators();
        let s2 = &(&(&sx * &sx) + &(&sy * &sy)) + &(&sz * &sz);
        assert!(close(&s2, &ComplexMatrix::identity(3).scale(2.0), 1e-14));
    }

    #[test]
    fn spin1_commutator() {
        let (sx, sy, sz) = spin1_operators();
        let r = &sx.commutator(&sy) - &sz.scale_c(c(0.0, 1.0));
        assert!(r.max_norm() < 1e-14);
    }

    #[test]
    fn spin_half_basics() {
        let (ix, _, iz) = spin_half_operators();
        assert_eq!(iz.eigenvalues_hermitian().unwrap(), vec![-0.5, 0.5]);
        let down = Ket::basis(2, 1);
        let r = ix.apply(&down);
        assert!((r.get(0) - re(0.5)).norm() < 1e-15 && r.get(1).norm() < 1e-15);
        assert!(close(
            &(&iz * &iz),
            &ComplexMatrix::identity(2).scale(0.25),
            1e-15
        ));
    }

    #[test]
    fn sz_kron_iz_is_diagonal_product() {
        let (_, _, sz) = spin1_operators();
        let (_, _, iz) = spin_half_operators();
        let expected = ComplexMatrix::from_diagonal(&[0.5, -0.5, 0.0, 0.0, -0.5, 0.5]);
        assert_eq!(tensor_product(&sz, &iz), expected);
    }

    #[test]
    fn embed_matches_explicit_kron() {
        let (_, _, iz) = spin_half_operators();
        let id = ComplexMatrix::identity(2);
        let expected = kron_all(&[&id, &iz, &id]);
        assert_eq!(embed_spin_half(&iz, 1, 3), expected);
    }
}
