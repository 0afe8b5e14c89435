//! Double-quantum dressed states, Hartmann-Hahn matching and the electron
//! nuclear transfer Hamiltonian.
//!
//! Electron operators in the dressed two-level space are spin-½ operators
//! (`σ = Pauli/2`). Two product bases are used:
//!
//! * adiabatic: `(χ₊↑, χ₊↓, χ₋↑, χ₋↓)`, the eigenbasis of the electronic part;
//! * fixed: `(|+⟩↑, |+⟩↓, |−⟩↑, |−⟩↓)` with `|±⟩ = (|−1⟩ ± |+1⟩)/√2`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::orientation::NvConstants;
use crate::spincore::{re, ComplexMatrix, Ket, C64};
use crate::table::Table;
use crate::units::dipolar_coupling_mhz;
use crate::{Error, Result};

/// Closest approach allowed for the point-dipole hyperfine model, nm.
pub const CONTACT_RADIUS_NM: f64 = 0.15;

/// Which of the two effective Hamiltonians applies, fixed by the sign of D(θ).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    PositiveD,
    NegativeD,
}

impl Branch {
    pub fn from_d_theta(d_theta: f64) -> Self {
        if d_theta >= 0.0 {
            Branch::PositiveD
        } else {
            Branch::NegativeD
        }
    }

    /// `+1` for the positive branch, `−1` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Branch::PositiveD => 1.0,
            Branch::NegativeD => -1.0,
        }
    }

    /// Polarization sign the swept flip-flop pumps the nucleus towards
    /// when the electron starts in `χ₋`.
    pub fn target_sign(self) -> f64 {
        -self.sign()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DressedParams {
    /// Microwave Rabi frequency Ω, when Ω_eff was derived from it.
    pub omega_drive: Option<f64>,
    pub omega_eff: f64,
    pub delta: f64,
    pub gamma_n_b: f64,
    pub branch: Branch,
}

impl DressedParams {
    pub fn new(omega_eff: f64, delta: f64, gamma_n_b: f64, branch: Branch) -> Result<Self> {
        if !(omega_eff > 0.0) {
            return Err(Error::invalid(
                "omega_eff",
                format!("{omega_eff} must be positive"),
            ));
        }
        Ok(Self {
            omega_drive: None,
            omega_eff,
            delta,
            gamma_n_b,
            branch,
        })
    }

    /// Derives Ω_eff and the branch from the drive and the projected splitting.
    pub fn from_drive(omega_drive: f64, d_theta: f64, delta: f64, gamma_n_b: f64) -> Result<Self> {
        if d_theta == 0.0 {
            return Err(Error::invalid(
                "d_theta",
                "zero splitting has no dressed pair",
            ));
        }
        if d_theta.abs() / omega_drive < 10.0 {
            log::warn!(
                "|D(theta)|/Omega = {:.2} is below 10; the two-level reduction is unreliable",
                d_theta.abs() / omega_drive
            );
        }
        let mut p = Self::new(
            omega_eff(omega_drive, d_theta),
            delta,
            gamma_n_b,
            Branch::from_d_theta(d_theta),
        )?;
        p.omega_drive = Some(omega_drive);
        Ok(p)
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    /// Dressed splitting half-width `ω_eff = √(Δ² + Ω_eff²/4)`.
    pub fn omega_total(&self) -> f64 {
        (self.delta * self.delta + self.omega_eff * self.omega_eff / 4.0).sqrt()
    }

    pub fn sin_phi(&self) -> f64 {
        sin_phi(self.delta, self.omega_eff)
    }

    pub fn cos_phi(&self) -> f64 {
        self.branch.sign() * self.delta / self.omega_total()
    }
}

/// Pseudosecular and secular hyperfine components in the rotated nuclear frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperfinePair {
    pub a_x: f64,
    pub a_z: f64,
}

impl HyperfinePair {
    pub fn new(a_x: f64, a_z: f64) -> Result<Self> {
        if !(a_x >= 0.0) {
            return Err(Error::invalid("a_x", format!("{a_x} must be non-negative")));
        }
        if !a_z.is_finite() {
            return Err(Error::invalid("a_z", "must be finite"));
        }
        Ok(Self { a_x, a_z })
    }

    /// Only the pseudosecular part, as used when a secular value is not given.
    pub fn pseudosecular(a_x: f64) -> Result<Self> {
        Self::new(a_x, 0.0)
    }
}

/// `Ω_eff = ½(−|D(θ)| + √(8Ω² + D(θ)²))`, evaluated without cancellation.
pub fn omega_eff(omega_drive: f64, d_theta: f64) -> f64 {
    let r = (8.0 * omega_drive * omega_drive + d_theta * d_theta).sqrt();
    4.0 * omega_drive * omega_drive / (r + d_theta.abs())
}

/// Exact eigensystem of the driven three-level matrix
/// `[[D, Ω, 0], [Ω, 0, Ω], [0, Ω, D]]` in the basis `{|+1⟩, |0⟩, |−1⟩}`.
#[derive(Clone, Debug)]
pub struct DressedEigensystem {
    pub mu_minus: Ket,
    pub mu_plus: Ket,
    pub lambda: Ket,
    pub omega_mu_minus: f64,
    pub omega_mu_plus: f64,
    pub omega_lambda: f64,
    pub x_plus: f64,
    pub x_minus: f64,
}

pub fn driven_three_level(d_theta: f64, omega_drive: f64) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[
        &[d_theta, omega_drive, 0.0],
        &[omega_drive, 0.0, omega_drive],
        &[0.0, omega_drive, d_theta],
    ])
}

pub fn dressed_eigensystem(d_theta: f64, omega_drive: f64) -> DressedEigensystem {
    let r = (8.0 * omega_drive * omega_drive + d_theta * d_theta).sqrt();
    let sgn = if d_theta >= 0.0 { 1.0 } else { -1.0 };
    // Small root of X² − (D/Ω)X − 2 = 0; the large one is −2/X_small.
    let x_small = -4.0 * omega_drive * sgn / (d_theta.abs() + r);
    let x_large = if x_small == 0.0 {
        -sgn * f64::INFINITY
    } else {
        -2.0 / x_small
    };
    // (1, −X, 1) for the small root, and its large-root partner rescaled by
    // 1/X_large = −X_small/2.
    let small = {
        let n = (2.0 + x_small * x_small).sqrt();
        Ket::from_slice(&[re(1.0 / n), re(-x_small / n), re(1.0 / n)])
    };
    let large = {
        let y = -x_small / 2.0;
        let n = (2.0 * y * y + 1.0).sqrt();
        Ket::from_slice(&[re(y / n), re(-1.0 / n), re(y / n)])
    };
    let lambda = Ket::from_slice(&[re(FRAC_1_SQRT_2), re(0.0), re(-FRAC_1_SQRT_2)]);
    // X₊ belongs to μ₋ and X₋ to μ₊.
    let (x_plus, x_minus, mu_minus, mu_plus) = if d_theta >= 0.0 {
        (x_large, x_small, large, small)
    } else {
        (x_small, x_large, small, large)
    };
    DressedEigensystem {
        mu_minus,
        mu_plus,
        lambda,
        omega_mu_minus: 0.5 * (d_theta - r),
        omega_mu_plus: 0.5 * (d_theta + r),
        omega_lambda: d_theta,
        x_plus,
        x_minus,
    }
}

/// Eigenpairs of the dressed electronic Hamiltonian at detuning `Δ`.
///
/// `chi_plus` is the state continuously connected to `|+⟩` at `Δ = 0`; its
/// energy is `+ω` on the positive branch and `−ω` on the negative branch.
/// Components are given in the fixed basis `(|+⟩, |−⟩)`.
#[derive(Clone, Debug)]
pub struct ChiStates {
    pub chi_plus: [f64; 2],
    pub chi_minus: [f64; 2],
    pub energy_plus: f64,
    pub energy_minus: f64,
    /// Mixing angle, `tan ζ = 2Δ/Ω_eff`.
    pub zeta: f64,
}

pub fn chi_states(delta: f64, omega_eff: f64, branch: Branch) -> ChiStates {
    let s = branch.sign();
    let zeta = (2.0 * delta).atan2(omega_eff);
    let (sn, cs) = (zeta / 2.0).sin_cos();
    let w = (delta * delta + omega_eff * omega_eff / 4.0).sqrt();
    ChiStates {
        chi_plus: [cs, s * sn],
        chi_minus: [-s * sn, cs],
        energy_plus: s * w,
        energy_minus: -s * w,
        zeta,
    }
}

impl ChiStates {
    /// 2×2 change of basis with columns `χ₊`, `χ₋` in the fixed basis.
    pub fn basis_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[
            &[self.chi_plus[0], self.chi_minus[0]],
            &[self.chi_plus[1], self.chi_minus[1]],
        ])
    }
}

/// `sinφ = Ω_eff/√(4Δ² + Ω_eff²)`.
pub fn sin_phi(delta: f64, omega_eff: f64) -> f64 {
    omega_eff / (4.0 * delta * delta + omega_eff * omega_eff).sqrt()
}

/// Detunings where the dressed splitting `2ω_eff` equals `γ_nB`.
pub fn hartmann_hahn_detunings(gamma_n_b: f64, omega_eff: f64) -> Result<(f64, f64)> {
    let disc = gamma_n_b * gamma_n_b - omega_eff * omega_eff;
    if disc < 0.0 {
        return Err(Error::NoResonance {
            gamma_n_b,
            omega_eff,
        });
    }
    let d = 0.5 * disc.sqrt();
    Ok((-d, d))
}

/// Hyperfine pair for a nucleus at `r_vec` (nm) from the NV, field along z.
pub fn hyperfine_from_geometry(r_vec: [f64; 3], c: NvConstants) -> Result<HyperfinePair> {
    let r = (r_vec[0].powi(2) + r_vec[1].powi(2) + r_vec[2].powi(2)).sqrt();
    if !(r > CONTACT_RADIUS_NM) {
        return Err(Error::RadiusTooSmall {
            radius_nm: r,
            min_nm: CONTACT_RADIUS_NM,
        });
    }
    let g = dipolar_coupling_mhz(c.gamma_e, c.gamma_n, r);
    let ez = r_vec[2] / r;
    let transverse = (1.0 - ez * ez).max(0.0).sqrt();
    Ok(HyperfinePair {
        a_x: 3.0 * g * ez.abs() * transverse,
        a_z: g * (3.0 * ez * ez - 1.0),
    })
}

/// Index of `(χ, nuclear)` in the adiabatic product basis; `chi_plus` and
/// `up` select the factors.
pub fn product_index(chi_plus: bool, up: bool) -> usize {
    2 * usize::from(!chi_plus) + usize::from(!up)
}

/// The flip-flop pair `(from, to)` driven by the sweep for the branch: the
/// electron starts in `χ₋` and the nucleus is pumped towards the target
/// polarization.
pub fn resonant_pair(branch: Branch) -> (usize, usize) {
    match branch {
        Branch::PositiveD => (product_index(false, true), product_index(true, false)),
        Branch::NegativeD => (product_index(false, false), product_index(true, true)),
    }
}

/// Transfer Hamiltonian in the adiabatic basis.
pub fn h_trans(dp: &DressedParams, hf: &HyperfinePair) -> ComplexMatrix {
    h_trans_with(dp, hf, true)
}

/// Transfer Hamiltonian with the `2a_z′cosφ σ_z̃ I_z′` term optional.
pub fn h_trans_with(dp: &DressedParams, hf: &HyperfinePair, secular_term: bool) -> ComplexMatrix {
    let s = dp.branch.sign();
    let w = dp.omega_total();
    let az = if secular_term {
        hf.a_z * dp.cos_phi()
    } else {
        0.0
    };
    let mut diag = [0.0; 4];
    for (chi_plus, es) in [(true, 0.5), (false, -0.5)] {
        for (up, ns) in [(true, 0.5), (false, -0.5)] {
            diag[product_index(chi_plus, up)] =
                2.0 * s * w * es + dp.gamma_n_b * ns + 2.0 * az * es * ns;
        }
    }
    let mut h = ComplexMatrix::from_diagonal(&diag);
    let (i, j) = resonant_pair(dp.branch);
    let g = re(hf.a_x * dp.sin_phi() / 2.0);
    h.set(i, j, g);
    h.set(j, i, g);
    h
}

/// Fixed-frame Hamiltonian `±Ω_eff σz + 2Δσx + γ_nB I_z + 2σx(a_x I_x + a_z I_z)`
/// in the basis `(|+⟩, |−⟩) ⊗ (↑, ↓)`, without the rotating-wave reduction.
pub fn h_dressed_full(dp: &DressedParams, hf: &HyperfinePair) -> ComplexMatrix {
    let (static_part, delta_part) = h_dressed_full_terms(dp.omega_eff, dp.branch, dp.gamma_n_b, hf);
    &static_part + &delta_part.scale(dp.delta)
}

/// Splits the fixed-frame Hamiltonian into its Δ-independent part and the
/// operator multiplying Δ.
pub fn h_dressed_full_terms(
    omega_eff: f64,
    branch: Branch,
    gamma_n_b: f64,
    hf: &HyperfinePair,
) -> (ComplexMatrix, ComplexMatrix) {
    use crate::spincore::{pauli, spin_half_operators};
    let (px, _, pz) = pauli();
    let (ix, _, iz) = spin_half_operators();
    let sx = px.scale(0.5);
    let sz = pz.scale(0.5);
    let id = ComplexMatrix::identity(2);
    let static_part = &(&sz.scale(branch.sign() * omega_eff).kron(&id)
        + &id.kron(&iz.scale(gamma_n_b)))
        + &sx.scale(2.0).kron(&(&ix.scale(hf.a_x) + &iz.scale(hf.a_z)));
    (static_part, sx.scale(2.0).kron(&id))
}

/// Unitary taking adiabatic-basis amplitudes at `(Δ, Ω_eff)` to fixed-basis
/// amplitudes.
pub fn adiabatic_to_fixed(delta: f64, omega_eff: f64, branch: Branch) -> ComplexMatrix {
    chi_states(delta, omega_eff, branch)
        .basis_matrix()
        .kron(&ComplexMatrix::identity(2))
}

/// Large-angle transfer block in the basis `{|χ₋↓⟩, |χ₊↑⟩}`.
pub fn h_matrix_large_angle(dp: &DressedParams, hf: &HyperfinePair) -> Result<ComplexMatrix> {
    if dp.branch != Branch::NegativeD {
        return Err(Error::invalid(
            "branch",
            "the large-angle block needs D(theta) < 0",
        ));
    }
    let w = dp.omega_total();
    let g = hf.a_x * dp.sin_phi() / 2.0;
    let d = w - dp.gamma_n_b / 2.0;
    Ok(ComplexMatrix::from_real_rows(&[&[d, g], &[g, -d]]))
}

/// Eigenvalues of [`h_trans`] over a detuning grid, columns
/// `delta_mhz, e1..e4` in ascending energy.
pub fn level_diagram(
    deltas: &[f64],
    omega_eff: f64,
    gamma_n_b: f64,
    branch: Branch,
    hf: &HyperfinePair,
) -> Result<Table> {
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("delta grid", "must be strictly increasing"));
    }
    let mut table = Table::new(&["delta_mhz", "e1", "e2", "e3", "e4"]);
    for &d in deltas {
        let dp = DressedParams::new(omega_eff, d, gamma_n_b, branch)?;
        let e = h_trans(&dp, hf).eigenvalues_hermitian()?;
        table.push(vec![d, e[0], e[1], e[2], e[3]])?;
    }
    Ok(table)
}

/// Complex helper for building kets in the fixed basis from χ components.
pub fn chi_ket(components: [f64; 2]) -> Ket {
    Ket::from_slice(&[C64::new(components[0], 0.0), C64::new(components[1], 0.0)])
}
