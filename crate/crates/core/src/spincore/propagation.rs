use std::ops::Range;

use rayon::prelude::*;

use super::density::DensityMatrix;
use super::matrix::{ComplexMatrix, Ket};
use crate::{Error, Result};

/// Segments multiplied together inside one parallel work item. Fixed so the
/// floating-point product order does not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Clone, Debug)]
enum Generator {
    Explicit(ComplexMatrix),
    /// Real coefficients over the shared operator terms.
    Linear(Vec<f64>),
}

#[derive(Clone, Debug)]
struct Segment {
    duration: f64,
    generator: Generator,
}

/// Time-ordered list of constant Hermitian generators.
///
/// Long sweeps store a handful of shared operator terms and one coefficient
/// vector per segment instead of a dense matrix per segment.
#[derive(Clone, Debug)]
pub struct PiecewiseConstantHamiltonian {
    dim: usize,
    terms: Vec<ComplexMatrix>,
    segments: Vec<Segment>,
}

impl PiecewiseConstantHamiltonian {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
            segments: Vec::new(),
        }
    }

    /// Hamiltonian whose segments are real combinations of `terms`.
    pub fn with_terms(terms: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = terms
            .first()
            .ok_or_else(|| Error::invalid("terms", "at least one term is required"))?
            .dim();
        for t in &terms {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: t.dim(),
                });
            }
            t.ensure_hermitian()?;
        }
        Ok(Self {
            dim,
            terms,
            segments: Vec::new(),
        })
    }

    /// Builds from explicit `(duration, generator)` pairs.
    pub fn from_segments(dim: usize, segments: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        let mut h = Self::new(dim);
        for (t, g) in segments {
            h.push(t, g)?;
        }
        Ok(h)
    }

    fn check_duration(duration: f64) -> Result<()> {
        if duration > 0.0 && duration.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(
                "duration",
                format!("{duration} must be positive"),
            ))
        }
    }

    pub fn push(&mut self, duration: f64, generator: ComplexMatrix) -> Result<()> {
        Self::check_duration(duration)?;
        if generator.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: generator.dim(),
            });
        }
        generator.ensure_hermitian()?;
        self.segments.push(Segment {
            duration,
            generator: Generator::Explicit(generator),
        });
        Ok(())
    }

    pub fn push_linear(&mut self, duration: f64, coeffs: Vec<f64>) -> Result<()> {
        Self::check_duration(duration)?;
        if coeffs.len() != self.terms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.terms.len(),
                found: coeffs.len(),
            });
        }
        self.segments.push(Segment {
            duration,
            generator: Generator::Linear(coeffs),
        });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn duration(&self, k: usize) -> f64 {
        self.segments[k].duration
    }

    /// Dense generator of segment `k`.
    pub fn generator(&self, k: usize) -> ComplexMatrix {
        match &self.segments[k].generator {
            Generator::Explicit(m) => m.clone(),
            Generator::Linear(coeffs) => {
                let mut acc = ComplexMatrix::zeros(self.dim);
                for (c, t) in coeffs.iter().zip(&self.terms) {
                    if *c != 0.0 {
                        acc += &t.scale(*c);
                    }
                }
                acc
            }
        }
    }

    fn segment_propagator(&self, k: usize) -> ComplexMatrix {
        self.generator(k)
            .eigh_unchecked()
            .propagator(self.segments[k].duration)
    }

    /// Ordered product `U_N ⋯ U_1` over all segments.
    pub fn unitary(&self) -> ComplexMatrix {
        self.unitary_range(0..self.len())
    }

    /// Ordered product over the segments in `range`.
    pub fn unitary_range(&self, range: Range<usize>) -> ComplexMatrix {
        let idx: Vec<usize> = range.collect();
        let partials: Vec<ComplexMatrix> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut u = ComplexMatrix::identity(self.dim);
                for &k in chunk {
                    u = &self.segment_propagator(k) * &u;
                }
                u
            })
            .collect();
        partials
            .into_iter()
            .fold(ComplexMatrix::identity(self.dim), |acc, p| &p * &acc)
    }
}

/// `ρ → UρU†` with `U` the time-ordered propagator of `h`.
pub fn propagate(h: &PiecewiseConstantHamiltonian, state: &DensityMatrix) -> Result<DensityMatrix> {
    if h.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: h.dim(),
        });
    }
    let u = h.unitary();
    Ok(apply_unitary(&u, state))
}

pub fn apply_unitary(u: &ComplexMatrix, state: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::trusted(state.matrix().conjugate_by(u))
}

pub fn propagate_ket(h: &PiecewiseConstantHamiltonian, psi: &Ket) -> Result<Ket> {
    if h.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            found: h.dim(),
        });
    }
    Ok(h.unitary().apply(psi))
}

/// `max |U†U − 1|`.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    (&(&u.dagger() * u) - &ComplexMatrix::identity(u.dim())).max_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spincore::matrix::re;
    use crate::spincore::operators::pauli;

    #[test]
    fn zero_hamiltonian_leaves_state() {
        let rho = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
        let h =
            PiecewiseConstantHamiltonian::from_segments(2, vec![(5.0, ComplexMatrix::zeros(2))])
                .unwrap();
        let out = propagate(&h, &rho).unwrap();
        assert!((out.matrix() - rho.matrix()).max_norm() < 1e-15);
    }

    #[test]
    fn rabi_pi_pulse_inverts() {
        // H = (Ω/2)σx in MHz; a π pulse takes t = 1/(2Ω) µs.
        let omega = 3.0;
        let (sx, _, _) = pauli();
        let t = 1.0 / (2.0 * omega);
        // Split into uneven pieces to exercise segment ordering.
        let h = PiecewiseConstantHamiltonian::from_segments(
            2,
            vec![
                (0.3 * t, sx.scale(omega / 2.0)),
                (0.7 * t, sx.scale(omega / 2.0)),
            ],
        )
        .unwrap();
        let out = propagate(&h, &DensityMatrix::pure(&Ket::basis(2, 1))).unwrap();
        assert!((out.population(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_duration() {
        let mut h = PiecewiseConstantHamiltonian::new(2);
        assert!(h.push(0.0, ComplexMatrix::zeros(2)).is_err());
        assert!(h.push(1.0, ComplexMatrix::zeros(3)).is_err());
        h.push(1.0, ComplexMatrix::zeros(2)).unwrap();
        assert!(propagate(&h, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn linear_segments_match_explicit() {
        let (sx, _, sz) = pauli();
        let mut lin =
            PiecewiseConstantHamiltonian::with_terms(vec![sx.clone(), sz.clone()]).unwrap();
        let mut exp = PiecewiseConstantHamiltonian::new(2);
        for k in 0..200 {
            let a = 0.1 * k as f64;
            lin.push_linear(0.01, vec![a, 1.0]).unwrap();
            exp.push(0.01, &sx.scale(a) + &sz).unwrap();
        }
        let d = (&lin.unitary() - &exp.unitary()).max_norm();
        assert!(d < 1e-13, "{d}");
        assert!((lin.generator(3).get(0, 1) - re(0.3)).norm() < 1e-15);
    }
}
