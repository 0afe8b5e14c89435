//! Orientation-dependent NV Hamiltonians in the laboratory frame and the
//! optically pumped initial state.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::numeric::gauss_legendre;
use crate::spincore::{re, ComplexMatrix, Ket, C64};
use crate::units::TWO_PI;
use crate::{Error, Result};

/// Zero-field and Zeeman constants. Frequencies in MHz, field in T.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NvConstants {
    pub d: f64,
    pub e: f64,
    pub gamma_e: f64,
    pub gamma_n: f64,
    pub b: f64,
}

impl Default for NvConstants {
    fn default() -> Self {
        Self {
            d: 2870.0,
            e: 20.0,
            gamma_e: 28700.0,
            gamma_n: 10.705,
            b: 0.36,
        }
    }
}

impl NvConstants {
    pub fn with_field(self, b: f64) -> Self {
        Self { b, ..self }
    }

    pub fn gamma_e_b(&self) -> f64 {
        self.gamma_e * self.b
    }

    pub fn gamma_n_b(&self) -> f64 {
        self.gamma_n * self.b
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::invalid("D", format!("{} must be positive", self.d)));
        }
        if !(self.b > 0.0) {
            return Err(Error::invalid("B", format!("{} must be positive", self.b)));
        }
        if !(self.gamma_e > 0.0 && self.gamma_n > 0.0) {
            return Err(Error::invalid(
                "gamma",
                "gyromagnetic ratios must be positive",
            ));
        }
        if self.gamma_e_b() <= 3.0 * self.d {
            log::warn!(
                "gamma_e*B = {} MHz is not well above 3D = {} MHz; the effective Hamiltonian is a poor approximation",
                self.gamma_e_b(),
                3.0 * self.d
            );
        }
        Ok(())
    }
}

/// Polar and azimuthal angle of the NV axis relative to the field, radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationParams {
    pub theta: f64,
    pub phi: f64,
}

impl OrientationParams {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid("theta", format!("{theta} outside [0, pi]")));
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            return Err(Error::invalid("phi", format!("{phi} outside [0, 2pi)")));
        }
        Ok(Self { theta, phi })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }
}

/// Second-order effective level structure for one orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveNvEnergies {
    pub d_theta: f64,
    pub delta_theta: f64,
    pub g1: C64,
    pub g2: C64,
}

impl EffectiveNvEnergies {
    pub fn compute(o: OrientationParams, k: NvConstants) -> Result<Self> {
        Ok(Self {
            d_theta: d_theta(o, k),
            delta_theta: delta_theta(o, k)?,
            g1: g1(o, k),
            g2: g2(o, k),
        })
    }
}

/// Projected zero-field splitting `D(θ)`.
pub fn d_theta(o: OrientationParams, k: NvConstants) -> f64 {
    let c2 = (2.0 * o.theta).cos();
    (k.d * (1.0 + 3.0 * c2) + 3.0 * k.e * (1.0 - c2)) / 4.0
}

pub fn g1(o: OrientationParams, k: NvConstants) -> C64 {
    let m = (k.d - k.e) * o.theta.sin() * o.theta.cos() * FRAC_1_SQRT_2;
    C64::from_polar(1.0, o.phi) * m
}

pub fn g2(o: OrientationParams, k: NvConstants) -> C64 {
    let m = (k.d + 3.0 * k.e + (k.e - k.d) * (2.0 * o.theta).cos()) / 4.0;
    C64::from_polar(1.0, 2.0 * o.phi) * m
}

/// Second-order shift `δ(θ)` of the `|±1⟩` levels.
pub fn delta_theta(o: OrientationParams, k: NvConstants) -> Result<f64> {
    let geb = k.gamma_e_b();
    let dt = d_theta(o, k);
    let denom = geb * geb - dt * dt;
    if denom.abs() < 1e-9 * geb * geb {
        return Err(Error::Pole(geb));
    }
    Ok(geb * g1(o, k).norm_sqr() / denom + g2(o, k).norm_sqr() / (2.0 * geb))
}

/// Laboratory-frame 3×3 Hamiltonian in the basis `{|+1⟩, |0⟩, |−1⟩}`.
pub fn full_nv_hamiltonian(o: OrientationParams, k: NvConstants) -> ComplexMatrix {
    let dt = d_theta(o, k);
    let geb = k.gamma_e_b();
    let a = g1(o, k);
    let b = g2(o, k);
    ComplexMatrix::from_row_slice(
        3,
        &[
            re(dt + geb),
            -a,
            b,
            -a.conj(),
            re(0.0),
            a,
            b.conj(),
            a.conj(),
            re(dt - geb),
        ],
    )
}

/// State left by optical pumping along the NV axis, in the field basis.
pub fn optical_initial_state(o: OrientationParams) -> Ket {
    let s = o.theta.sin() * FRAC_1_SQRT_2;
    Ket::from_slice(&[
        C64::from_polar(s, o.phi),
        re(o.theta.cos()),
        -C64::from_polar(s, -o.phi),
    ])
}

/// Net initialization polarization `cos²θ − sin²θ/2` for a single orientation.
pub fn initial_polarization(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c - s * s / 2.0
}

/// Area-weighted average of the initialization polarization over the two
/// polar caps `θ ≤ θmax` and `θ ≥ π − θmax`.
pub fn avg_initial_polarization_small_angle(theta_max: f64) -> Result<f64> {
    if !(theta_max > 0.0 && theta_max <= PI / 2.0) {
        return Err(Error::invalid(
            "theta_max",
            format!("{theta_max} outside (0, pi/2]"),
        ));
    }
    // The two caps are mirror images, so one suffices.
    let num = gauss_legendre(|t| initial_polarization(t) * t.sin(), 0.0, theta_max, 16);
    Ok(num / (1.0 - theta_max.cos()))
}

/// Band average of the normalized large-angle polarization
/// `(sin²θ/2 − cos²θ)/(sin²θ/2 + cos²θ)` over `θ ∈ [lo, hi]`, area weighted.
pub fn avg_initial_polarization_large_angle(lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi < PI && lo <= hi) {
        return Err(Error::invalid(
            "band",
            format!("[{lo}, {hi}] must lie inside (0, pi)"),
        ));
    }
    // In x = cosθ the integrand is −3 + 4/(1 + x²).
    let (x_hi, x_lo) = (lo.cos(), hi.cos());
    if (x_hi - x_lo).abs() < 1e-12 {
        return Ok(-3.0 + 4.0 / (1.0 + x_hi * x_hi));
    }
    Ok(-3.0 + 4.0 * (x_hi.atan() - x_lo.atan()) / (x_hi - x_lo))
}

/// Population of `|0⟩` sampled on a uniform grid of `n_points` over
/// `[0, duration]`, starting from `|0⟩` under the full Hamiltonian.
pub fn secular_population_trace(
    o: OrientationParams,
    k: NvConstants,
    duration: f64,
    n_points: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(duration > 0.0) || n_points < 2 {
        return Err(Error::invalid(
            "duration",
            "need a positive window and two or more points",
        ));
    }
    let eig = full_nv_hamiltonian(o, k).eigh()?;
    let v = &eig.vectors;
    // Amplitude of |0⟩ at time t: Σ_k |V_{0k}|² e^{-i2πE_k t}.
    let weights: Vec<f64> = (0..3).map(|j| v.get(1, j).norm_sqr()).collect();
    let dt = duration / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| {
            let t = i as f64 * dt;
            let amp: C64 = (0..3)
                .map(|j| C64::from_polar(weights[j], -TWO_PI * eig.values[j] * t))
                .sum();
            (t, amp.norm_sqr())
        })
        .collect())
}

/// Minimum `|0⟩` population over `[0, duration]`. The grid resolves the
/// fastest Bohr frequency with at least 20 points per period.
pub fn validate_secular_approx(o: OrientationParams, k: NvConstants, duration: f64) -> Result<f64> {
    let spread = k.gamma_e_b() + d_theta(o, k).abs() + k.d;
    let n = ((duration * spread * 20.0).ceil() as usize).max(2000);
    let trace = secular_population_trace(o, k, duration, n)?;
    Ok(trace.iter().map(|p| p.1).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(t: f64) -> OrientationParams {
        OrientationParams::from_degrees(t, 0.0).unwrap()
    }

    #[test]
    fn d_theta_endpoints() {
        let k = NvConstants::default();
        assert_eq!(d_theta(deg(0.0), k), 2870.0);
        assert!((d_theta(deg(90.0), k) + 1405.0).abs() < 1e-9);
    }

    #[test]
    fn d_theta_magic_angle_root() {
        let k = NvConstants {
            e: 0.0,
            ..Default::default()
        };
        let t = 0.5 * (-1.0f64 / 3.0).acos();
        let o = OrientationParams::new(t, 0.0).unwrap();
        assert!(d_theta(o, k).abs() < 1e-9);
    }

    #[test]
    fn couplings_at_zero_and_ten_degrees() {
        let k = NvConstants::default();
        assert_eq!(g1(deg(0.0), k).norm(), 0.0);
        assert!((g2(deg(0.0), k).norm() - 20.0).abs() < 1e-12);
        assert!((g1(deg(10.0), k).norm() - 344.7).abs() < 0.1);
    }

    #[test]
    fn delta_theta_values() {
        let k = NvConstants::default();
        let d0 = delta_theta(deg(0.0), k).unwrap();
        assert!((d0 - 400.0 / (2.0 * 10332.0)).abs() < 1e-12);
        let d20 = delta_theta(deg(20.0), k).unwrap();
        // Direct evaluation of the closed form, written out independently.
        let (s, c) = 20f64.to_radians().sin_cos();
        let dth = (2870.0 * (1.0 + 3.0 * (2.0 * 20f64.to_radians()).cos())
            + 60.0 * (1.0 - (2.0 * 20f64.to_radians()).cos()))
            / 4.0;
        let a = 2850.0 * s * c / 2f64.sqrt();
        let b = (2930.0 - 2850.0 * (2.0 * 20f64.to_radians()).cos()) / 4.0;
        let oracle = 10332.0 * a * a / (10332.0f64.powi(2) - dth * dth) + b * b / 20664.0;
        assert!((d20 - oracle).abs() < 1e-9);
        assert!((d20 - 45.0).abs() < 45.0 * 0.2, "δ(20°) = {d20}");
    }

    #[test]
    fn delta_theta_bounded() {
        let k = NvConstants::default();
        let max = (0..=180)
            .map(|t| delta_theta(deg(t as f64), k).unwrap())
            .fold(0.0, f64::max);
        assert!(max <= 140.0, "max δ = {max}");
    }

    #[test]
    fn delta_theta_pole_is_reported() {
        let k = NvConstants {
            b: 2870.0 / 28700.0,
            ..Default::default()
        };
        assert!(matches!(delta_theta(deg(0.0), k), Err(Error::Pole(_))));
    }

    #[test]
    fn full_hamiltonian_is_hermitian() {
        let k = NvConstants::default();
        for t in [0.0, 10.0, 37.0, 90.0, 151.0] {
            let o = OrientationParams::from_degrees(t, 33.0).unwrap();
            assert!(full_nv_hamiltonian(o, k).hermitian_deviation() < 1e-12);
        }
    }

    #[test]
    fn optical_state_overlaps() {
        let p = |t: f64| optical_initial_state(deg(t)).get(1).norm_sqr();
        assert_eq!(optical_initial_state(deg(0.0)), Ket::basis(3, 1));
        // cos²10° = 0.96985 and cos²20° = 0.88302.
        assert!((p(10.0) - 0.970).abs() < 5e-4);
        assert!((p(20.0) - 0.883).abs() < 5e-4);
        for t in [3.0, 10.0, 20.0, 71.0] {
            assert!((p(t) - t.to_radians().cos().powi(2)).abs() < 1e-15);
            assert!((optical_initial_state(deg(t)).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_angle_average_matches_closed_form() {
        let tm = 20f64.to_radians();
        let c = tm.cos();
        // ∫(c² − (1 − c²)/2)dc from cosθmax to 1, over (1 − cosθmax).
        let closed = c * (1.0 + c) / 2.0;
        let v = avg_initial_polarization_small_angle(tm).unwrap();
        assert!((v - closed).abs() < 1e-10);
        assert!((v - 0.91).abs() < 0.005);
        assert!((avg_initial_polarization_small_angle(1e-4).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn large_angle_average_matches_quadrature() {
        let (lo, hi) = (70f64.to_radians(), 110f64.to_radians());
        let v = avg_initial_polarization_large_angle(lo, hi).unwrap();
        let f = |t: f64| {
            let (s, c) = t.sin_cos();
            (s * s / 2.0 - c * c) / (s * s / 2.0 + c * c) * s
        };
        let oracle = gauss_legendre(f, lo, hi, 64) / (lo.cos() - hi.cos());
        assert!((v - oracle).abs() < 1e-10);
        assert!((v - 0.854).abs() < 0.002);
        let mid = PI / 2.0;
        assert!((avg_initial_polarization_large_angle(mid, mid).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn secular_validation() {
        let k = NvConstants::default();
        let lo = validate_secular_approx(deg(10.0), k, 1.0).unwrap();
        let hi = validate_secular_approx(deg(10.0), k.with_field(0.54), 1.0).unwrap();
        assert!(lo >= 0.98, "min pop {lo}");
        assert!(hi > lo);
        let k0 = NvConstants { e: 0.0, ..k };
        let flat = validate_secular_approx(deg(0.0), k0, 1.0).unwrap();
        assert!((flat - 1.0).abs() < 1e-12);
    }
}
