//! Physical constants and the frequency unit convention.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// μ0/4π in SI units (T·m/A).
pub const MU0_OVER_4PI: f64 = 1.0e-7;

/// Carbon atom number density of diamond, cm⁻³.
pub const DIAMOND_ATOM_DENSITY_CM3: f64 = 1.76e23;

/// Angular frequency in rad/µs for a frequency in MHz.
#[inline]
pub fn angular(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz
}

/// Point-dipole coupling `(μ0/4π)·h·γ1·γ2/r³` in MHz for gyromagnetic ratios
/// given in MHz/T and a distance in nm.
pub fn dipolar_coupling_mhz(gamma1_mhz_per_t: f64, gamma2_mhz_per_t: f64, r_nm: f64) -> f64 {
    // γ in Hz/T = 1e6·γ[MHz/T], r in m = 1e-9·r[nm], result in MHz = 1e-6·Hz.
    let hz = MU0_OVER_4PI * PLANCK * (gamma1_mhz_per_t * 1e6) * (gamma2_mhz_per_t * 1e6)
        / (r_nm * 1e-9).powi(3);
    hz * 1e-6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn carbon_pair_at_nearest_neighbour_distance_is_two_khz() {
        let d = dipolar_coupling_mhz(10.705, 10.705, 0.154_5);
        assert!((d * 1e3 - 2.06).abs() < 0.02, "d = {} kHz", d * 1e3);
    }

    #[test]
    fn diamond_density_from_mass_density() {
        let avogadro = 6.022_140_76e23;
        let n = 3.51 / 12.011 * avogadro;
        assert!((n / DIAMOND_ATOM_DENSITY_CM3 - 1.0).abs() < 5e-3);
    }
}
