//! Detuning sweeps: Landau-Zener analytics, numerically exact integrated
//! solid effect sweeps, the state-preparation sweep, field-rotation
//! adiabaticity and Brownian rotation timing.

use std::f64::consts::PI;

use crate::dressed::{
    adiabatic_to_fixed, chi_ket, chi_states, h_dressed_full_terms, h_trans_with,
    hartmann_hahn_detunings, resonant_pair, sin_phi, Branch, DressedParams, HyperfinePair,
};
use crate::orientation::{d_theta, delta_theta, NvConstants, OrientationParams};
use crate::spincore::{
    apply_unitary, re, spin_half_operators, ComplexMatrix, DensityMatrix, Ket,
    PiecewiseConstantHamiltonian,
};
use crate::units::{BOLTZMANN, TWO_PI};
use crate::{Error, Result};

/// Default minimum number of uniformly spaced Stokes-phase samples.
pub const MIN_PHASES: usize = 16;

/// Linear detuning trajectory `Δ(t) = Δ₀ + v·t` for `t ∈ [0, duration]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSchedule {
    pub delta_start: f64,
    pub rate_v: f64,
    pub duration: f64,
    pub time_step: f64,
}

impl SweepSchedule {
    pub fn new(delta_start: f64, rate_v: f64, duration: f64, time_step: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::invalid(
                "duration",
                format!("{duration} must be positive"),
            ));
        }
        if !(time_step > 0.0) {
            return Err(Error::invalid(
                "time_step",
                format!("{time_step} must be positive"),
            ));
        }
        if !rate_v.is_finite() || !delta_start.is_finite() {
            return Err(Error::invalid("rate_v", "sweep parameters must be finite"));
        }
        Ok(Self {
            delta_start,
            rate_v,
            duration,
            time_step,
        })
    }

    /// Sweep centred on `Δ = 0`.
    pub fn symmetric(rate_v: f64, duration: f64, time_step: f64) -> Result<Self> {
        Self::new(-rate_v * duration / 2.0, rate_v, duration, time_step)
    }

    pub fn delta_at(&self, t: f64) -> f64 {
        self.delta_start + self.rate_v * t
    }

    pub fn delta_end(&self) -> f64 {
        self.delta_at(self.duration)
    }

    pub fn n_steps(&self) -> usize {
        ((self.duration / self.time_step).ceil() as usize).max(1)
    }

    /// Segment midpoints and the common segment length.
    pub fn midpoints(&self) -> (Vec<f64>, f64) {
        let n = self.n_steps();
        let dt = self.duration / n as f64;
        (
            (0..n)
                .map(|k| self.delta_at((k as f64 + 0.5) * dt))
                .collect(),
            dt,
        )
    }

    /// Whether the detuning passes through both `±Δ_HH`.
    pub fn crosses(&self, delta_hh: f64) -> bool {
        let (lo, hi) = if self.delta_start <= self.delta_end() {
            (self.delta_start, self.delta_end())
        } else {
            (self.delta_end(), self.delta_start)
        };
        lo < -delta_hh && hi > delta_hh
    }
}

/// `min(1e-3 µs, 1/(200·a_x·sinφ))` with `sinφ` taken at the resonance.
pub fn default_time_step(omega_eff: f64, gamma_n_b: f64, hf: &HyperfinePair) -> f64 {
    let sphi = match hartmann_hahn_detunings(gamma_n_b, omega_eff) {
        Ok((_, d)) => sin_phi(d, omega_eff),
        Err(_) => 1.0,
    };
    let g = hf.a_x * sphi;
    if g > 0.0 {
        (1.0 / (200.0 * g)).min(1e-3)
    } else {
        1e-3
    }
}

/// Landau-Zener summary for one double passage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LzResult {
    pub mu: f64,
    pub p_lz: f64,
    pub p_max: f64,
    pub p_avg: f64,
}

/// Adiabaticity parameter `μ` of each Hartmann-Hahn crossing, with the unit
/// convention's residual 2π applied so that `P_LZ = exp(−2πμ)`.
pub fn lz_mu(omega_eff: f64, a_x: f64, rate_v: f64, gamma_n_b: f64) -> Result<f64> {
    if gamma_n_b <= omega_eff {
        return Err(Error::NoResonance {
            gamma_n_b,
            omega_eff,
        });
    }
    if rate_v == 0.0 || !rate_v.is_finite() {
        return Err(Error::invalid("rate_v", "sweep rate must be non-zero"));
    }
    let mhz_form = omega_eff.powi(2) * a_x.powi(2)
        / (8.0 * rate_v.abs() * gamma_n_b * (gamma_n_b.powi(2) - omega_eff.powi(2)).sqrt());
    Ok(TWO_PI * mhz_form)
}

/// The same `μ` computed from the crossing in strict angular units:
/// coupling `2π·a_x sinφ/2` rad/µs and diabatic slopes `±2π·v·cosφ` rad/µs².
pub fn lz_mu_angular(omega_eff: f64, a_x: f64, rate_v: f64, gamma_n_b: f64) -> Result<f64> {
    let (_, d) = hartmann_hahn_detunings(gamma_n_b, omega_eff)?;
    if rate_v == 0.0 {
        return Err(Error::invalid("rate_v", "sweep rate must be non-zero"));
    }
    let w = gamma_n_b / 2.0;
    let coupling = TWO_PI * a_x * sin_phi(d, omega_eff) / 2.0;
    let slope = TWO_PI * rate_v.abs() * (d / w);
    // H = [[βt/2, g], [g, −βt/2]] has P_LZ = exp(−2π g²/β); here β = 2·slope.
    Ok(coupling * coupling / (2.0 * slope))
}

pub fn lz_result(mu: f64) -> Result<LzResult> {
    if !(mu >= 0.0) {
        return Err(Error::invalid("mu", format!("{mu} must be non-negative")));
    }
    let p_lz = (-TWO_PI * mu).exp();
    let p_max = 4.0 * p_lz * (1.0 - p_lz);
    Ok(LzResult {
        mu,
        p_lz,
        p_max,
        p_avg: p_max / 2.0,
    })
}

/// Convenience: analytic double-passage summary for one parameter point.
pub fn lz_analytic(omega_eff: f64, a_x: f64, rate_v: f64, gamma_n_b: f64) -> Result<LzResult> {
    lz_result(lz_mu(omega_eff, a_x, rate_v, gamma_n_b)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdiabaticBand {
    Pass,
    Borderline,
    Fail,
}

/// Three-band reading of an adiabaticity margin.
pub fn classify_margin(margin: f64, pass_threshold: f64) -> AdiabaticBand {
    if margin > pass_threshold {
        AdiabaticBand::Pass
    } else if margin >= 1.0 {
        AdiabaticBand::Borderline
    } else {
        AdiabaticBand::Fail
    }
}

/// Far-from-resonance margin `Ω_eff²/|v|` in angular units (`2π·Ω_eff²/|v|`).
pub fn adiabaticity_margin_far(omega_eff: f64, rate_v: f64) -> f64 {
    if rate_v == 0.0 {
        return f64::INFINITY;
    }
    TWO_PI * omega_eff * omega_eff / rate_v.abs()
}

/// How the swept electron-nuclear dynamics is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferModel {
    /// The rotating-wave transfer Hamiltonian in the instantaneous dressed
    /// basis (basis order `χ₊↑, χ₊↓, χ₋↑, χ₋↓`).
    Secular,
    /// The fixed-frame dressed Hamiltonian without rotating-wave reduction
    /// (basis order `|+⟩↑, |+⟩↓, |−⟩↑, |−⟩↓`).
    Full,
}

/// Everything needed to assemble one sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSetup {
    pub omega_eff: f64,
    pub gamma_n_b: f64,
    pub branch: Branch,
    pub hf: HyperfinePair,
    pub schedule: SweepSchedule,
    pub model: TransferModel,
    /// Keep the `2a_z′cosφ σ_z̃ I_z′` term of the secular model.
    pub secular_term: bool,
}

impl SweepSetup {
    pub fn new(
        omega_eff: f64,
        gamma_n_b: f64,
        branch: Branch,
        hf: HyperfinePair,
        schedule: SweepSchedule,
    ) -> Self {
        Self {
            omega_eff,
            gamma_n_b,
            branch,
            hf,
            schedule,
            model: TransferModel::Secular,
            secular_term: true,
        }
    }

    pub fn with_model(self, model: TransferModel) -> Self {
        Self { model, ..self }
    }

    fn dp(&self, delta: f64) -> DressedParams {
        DressedParams {
            omega_drive: None,
            omega_eff: self.omega_eff,
            delta,
            gamma_n_b: self.gamma_n_b,
            branch: self.branch,
        }
    }

    /// Checks the schedule crosses both resonances; warns otherwise.
    pub fn spans_resonances(&self) -> bool {
        match hartmann_hahn_detunings(self.gamma_n_b, self.omega_eff) {
            Ok((_, d)) => {
                let ok = self.schedule.crosses(d);
                if !ok {
                    log::warn!(
                        "sweep from {} to {} MHz does not cross both resonances at ±{d:.4} MHz",
                        self.schedule.delta_start,
                        self.schedule.delta_end()
                    );
                }
                ok
            }
            Err(_) => {
                log::warn!("no Hartmann-Hahn resonance for this sweep");
                false
            }
        }
    }

    pub fn hamiltonian(&self) -> Result<PiecewiseConstantHamiltonian> {
        if !(self.omega_eff > 0.0) {
            return Err(Error::invalid("omega_eff", "must be positive"));
        }
        let (deltas, dt) = self.schedule.midpoints();
        match self.model {
            TransferModel::Secular => {
                let mut h = PiecewiseConstantHamiltonian::new(4);
                for d in deltas {
                    h.push(dt, h_trans_with(&self.dp(d), &self.hf, self.secular_term))?;
                }
                Ok(h)
            }
            TransferModel::Full => {
                let (s, x) =
                    h_dressed_full_terms(self.omega_eff, self.branch, self.gamma_n_b, &self.hf);
                let mut h = PiecewiseConstantHamiltonian::with_terms(vec![s, x])?;
                for d in deltas {
                    h.push_linear(dt, vec![1.0, d])?;
                }
                Ok(h)
            }
        }
    }

    /// Change of basis from the instantaneous adiabatic basis at `Δ` to the
    /// model's working basis.
    pub fn adiabatic_frame(&self, delta: f64) -> ComplexMatrix {
        match self.model {
            TransferModel::Secular => ComplexMatrix::identity(4),
            TransferModel::Full => adiabatic_to_fixed(delta, self.omega_eff, self.branch),
        }
    }

    /// Electron state `χ₋` at the start of the sweep, as a 2×2 density
    /// matrix in the model's electron basis.
    pub fn electron_chi_minus(&self) -> DensityMatrix {
        self.electron_chi(false)
    }

    pub fn electron_chi_plus(&self) -> DensityMatrix {
        self.electron_chi(true)
    }

    fn electron_chi(&self, plus: bool) -> DensityMatrix {
        let k = match self.model {
            TransferModel::Secular => Ket::basis(2, usize::from(!plus)),
            TransferModel::Full => {
                let cs = chi_states(self.schedule.delta_start, self.omega_eff, self.branch);
                let v = if plus { cs.chi_plus } else { cs.chi_minus };
                chi_ket(v)
            }
        };
        DensityMatrix::pure(&k)
    }

    /// Propagators for the two halves of the sweep, split at the segment
    /// boundary nearest the midpoint, and the detuning there.
    pub fn split_unitaries(&self) -> Result<SplitSweep> {
        let h = self.hamiltonian()?;
        let mid = h.len() / 2;
        let (_, dt) = self.schedule.midpoints();
        Ok(SplitSweep {
            first: h.unitary_range(0..mid),
            second: h.unitary_range(mid..h.len()),
            delta_mid: self.schedule.delta_at(mid as f64 * dt),
        })
    }

    /// Generator of the Stokes-phase kick at the sweep midpoint: `±½` on the
    /// two eigenstates of `H(Δ_mid)` that continue the resonant pair members.
    pub fn phase_generator(&self, delta_mid: f64) -> Result<ComplexMatrix> {
        let (i, j) = resonant_pair(self.branch);
        let a = self.adiabatic_frame(delta_mid);
        let h = match self.model {
            TransferModel::Secular => {
                h_trans_with(&self.dp(delta_mid), &self.hf, self.secular_term)
            }
            TransferModel::Full => {
                let (s, x) =
                    h_dressed_full_terms(self.omega_eff, self.branch, self.gamma_n_b, &self.hf);
                &s + &x.scale(delta_mid)
            }
        };
        let eig = h.eigh()?;
        let pick = |member: usize, skip: Option<usize>| -> usize {
            let target = Ket::column_of(&a, member);
            (0..4)
                .filter(|&k| Some(k) != skip)
                .max_by(|&x, &y| {
                    let ox = target.dot(&Ket::column_of(&eig.vectors, x)).norm_sqr();
                    let oy = target.dot(&Ket::column_of(&eig.vectors, y)).norm_sqr();
                    ox.total_cmp(&oy)
                })
                .unwrap_or(0)
        };
        let ki = pick(i, None);
        let kj = pick(j, Some(ki));
        let vi = Ket::column_of(&eig.vectors, ki);
        let vj = Ket::column_of(&eig.vectors, kj);
        Ok(&ComplexMatrix::outer(&vi, &vi).scale(0.5) - &ComplexMatrix::outer(&vj, &vj).scale(0.5))
    }
}

#[derive(Clone, Debug)]
pub struct SplitSweep {
    pub first: ComplexMatrix,
    pub second: ComplexMatrix,
    pub delta_mid: f64,
}

impl SplitSweep {
    pub fn full(&self) -> ComplexMatrix {
        &self.second * &self.first
    }
}

/// Raw and phase-averaged evolution operators for a sweep.
#[derive(Clone, Debug)]
pub struct SweepPropagators {
    /// Single trajectory.
    pub raw: ComplexMatrix,
    /// `U₂·K(α)·U₁` for uniformly spaced `α`.
    pub phased: Vec<ComplexMatrix>,
}

impl SweepPropagators {
    pub fn build(setup: &SweepSetup, n_phases: usize) -> Result<Self> {
        let split = setup.split_unitaries()?;
        let raw = split.full();
        let phased = if n_phases == 0 {
            Vec::new()
        } else {
            let q = setup.phase_generator(split.delta_mid)?;
            let eig = q.eigh()?;
            (0..n_phases)
                .map(|k| {
                    let alpha = TWO_PI * k as f64 / n_phases as f64;
                    // exp(−iαQ) = propagator of Q/(2π) over time α.
                    let kick = eig.propagator(alpha / TWO_PI);
                    &(&split.second * &kick) * &split.first
                })
                .collect()
        };
        Ok(Self { raw, phased })
    }

    pub fn apply_raw(&self, rho: &DensityMatrix) -> DensityMatrix {
        apply_unitary(&self.raw, rho)
    }

    /// Average of `U_α ρ U_α†` over the phase samples.
    pub fn apply_averaged(&self, rho: &DensityMatrix) -> DensityMatrix {
        if self.phased.is_empty() {
            return self.apply_raw(rho);
        }
        let mut acc = ComplexMatrix::zeros(rho.dim());
        for u in &self.phased {
            acc += &rho.matrix().conjugate_by(u);
        }
        DensityMatrix::new(acc.scale(1.0 / self.phased.len() as f64))
            .unwrap_or_else(|_| self.apply_raw(rho))
    }
}

/// One full detuning sweep applied to a 4-dimensional electron-nuclear
/// state in the model's working basis.
pub fn ise_single_sweep(initial: &DensityMatrix, setup: &SweepSetup) -> Result<DensityMatrix> {
    if initial.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: initial.dim(),
        });
    }
    setup.spans_resonances();
    let h = setup.hamiltonian()?;
    Ok(apply_unitary(&h.unitary(), initial))
}

/// Flip-flop transfer probability of one sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferResult {
    pub raw: f64,
    pub phase_averaged: f64,
}

/// Probability that the sweep takes the electron-nuclear pair from the
/// starting partner to the pumped partner of the resonant pair, where both
/// are read in the adiabatic basis at the ends of the sweep.
pub fn ise_transfer(setup: &SweepSetup, n_phases: usize) -> Result<TransferResult> {
    if n_phases > 0 && n_phases < MIN_PHASES {
        return Err(Error::invalid(
            "n_phases",
            format!("{n_phases} below the minimum of {MIN_PHASES}"),
        ));
    }
    setup.spans_resonances();
    let props = SweepPropagators::build(setup, n_phases)?;
    let (from, to) = resonant_pair(setup.branch);
    let a0 = setup.adiabatic_frame(setup.schedule.delta_start);
    let a1 = setup.adiabatic_frame(setup.schedule.delta_end());
    let start = Ket::column_of(&a0, from);
    let target = Ket::column_of(&a1, to);
    let prob = |u: &ComplexMatrix| target.dot(&u.apply(&start)).norm_sqr();
    let raw = prob(&props.raw);
    let phase_averaged = if props.phased.is_empty() {
        raw
    } else {
        props.phased.iter().map(prob).sum::<f64>() / props.phased.len() as f64
    };
    Ok(TransferResult {
        raw,
        phase_averaged,
    })
}

/// Microwave sweep used to move the optically pumped `|0⟩` into `|−1⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepSweep {
    pub omega_minus: f64,
    /// `dΔ_MW/dt`, MHz/µs.
    pub rate: f64,
    pub span: f64,
    /// Transition frequency offset `D(θ) + δ(θ)` at which the sweep is centred.
    pub center: f64,
}

impl PrepSweep {
    /// Sweep centred on the midpoint of `D(θ) + δ(θ)` over `θ ∈ [0, θmax]`.
    pub fn for_cone(
        c: NvConstants,
        theta_max: f64,
        omega_minus: f64,
        rate: f64,
        span: f64,
    ) -> Result<Self> {
        let offset = |t: f64| -> Result<f64> {
            let o = OrientationParams::new(t, 0.0)?;
            Ok(d_theta(o, c) + delta_theta(o, c)?)
        };
        let n = 200;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=n {
            let v = offset(theta_max * k as f64 / n as f64)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Self {
            omega_minus,
            rate,
            span,
            center: 0.5 * (lo + hi),
        })
    }

    pub fn duration(&self) -> f64 {
        self.span / self.rate.abs()
    }
}

/// Result of one preparation sweep started in `|0⟩` with the drive on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepOutcome {
    /// Bare `|−1⟩` population at the end of the sweep.
    pub population: f64,
    /// Population of the upper adiabatic branch, which the sweep connects
    /// from `|0⟩` to `|−1⟩`, measured between the branch states at the two
    /// span ends.
    pub branch: f64,
}

/// Upper eigenvector of `[[Δ/2, Ω], [Ω, −Δ/2]]` in the basis (|−1⟩, |0⟩).
fn prep_upper_branch(delta: f64, omega: f64) -> Ket {
    let e = (delta * delta / 4.0 + omega * omega).sqrt();
    let (a, b) = (omega, e - delta / 2.0);
    if a == 0.0 && b == 0.0 {
        // Ω = 0 with Δ > 0: the branch is bare |−1⟩.
        return Ket::basis(2, 0);
    }
    let n = (a * a + b * b).sqrt();
    Ket::from_slice(&[re(a / n), re(b / n)])
}

pub fn state_prep_sweep(theta: f64, c: NvConstants, sweep: &PrepSweep) -> Result<PrepOutcome> {
    if !(sweep.rate > 0.0 && sweep.span > 0.0 && sweep.omega_minus >= 0.0) {
        return Err(Error::invalid(
            "prep sweep",
            "rate and span must be positive",
        ));
    }
    let o = OrientationParams::new(theta, 0.0)?;
    let offset = d_theta(o, c) + delta_theta(o, c)? - sweep.center;
    let start = offset - sweep.span / 2.0;
    let end = offset + sweep.span / 2.0;
    if start >= 0.0 || end <= 0.0 {
        return Err(Error::SpanTooSmall { start, end });
    }
    let duration = sweep.duration();
    let scale = start.abs().max(end.abs()) / 2.0 + sweep.omega_minus;
    let n = ((duration * scale * 40.0).ceil() as usize).max(2000);
    let dt = duration / n as f64;
    // Basis (|−1⟩, |0⟩).
    let mut h = PiecewiseConstantHamiltonian::with_terms(vec![
        ComplexMatrix::from_diagonal(&[0.5, -0.5]),
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
    ])?;
    for k in 0..n {
        let d = start + sweep.rate * (k as f64 + 0.5) * dt;
        h.push_linear(dt, vec![d, sweep.omega_minus])?;
    }
    let u = h.unitary();
    let psi = u.apply(&Ket::basis(2, 1));
    let first = prep_upper_branch(start, sweep.omega_minus);
    let last = prep_upper_branch(end, sweep.omega_minus);
    Ok(PrepOutcome {
        population: psi.get(0).norm_sqr(),
        branch: last.dot(&u.apply(&first)).norm_sqr(),
    })
}

/// Ratio of the nuclear Larmor scale `2·(2πγ_nB)` to the rotation rate.
pub fn rotation_adiabaticity(gamma_n_b: f64, rotation_angle: f64, duration: f64) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let rate = rotation_angle.abs() / duration;
    if rate == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * TWO_PI * gamma_n_b / rate)
}

/// Overlap of a nuclear spin with the instantaneous field direction after a
/// uniform rotation of the field by `rotation_angle` over `duration`,
/// starting aligned.
pub fn rotation_following_fidelity(
    gamma_n_b: f64,
    rotation_angle: f64,
    duration: f64,
) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let (ix, _, iz) = spin_half_operators();
    let n = ((duration * gamma_n_b * 200.0).ceil() as usize).max(2000);
    let dt = duration / n as f64;
    let mut h = PiecewiseConstantHamiltonian::with_terms(vec![ix, iz])?;
    for k in 0..n {
        let a = rotation_angle * (k as f64 + 0.5) / n as f64;
        h.push_linear(dt, vec![gamma_n_b * a.sin(), gamma_n_b * a.cos()])?;
    }
    let psi = h.unitary().apply(&Ket::basis(2, 0));
    // Spin-½ state aligned with (sin a, 0, cos a).
    let (s, co) = (rotation_angle / 2.0).sin_cos();
    let aligned = Ket::from_slice(&[re(co), re(s)]);
    Ok(aligned.dot(&psi).norm_sqr())
}

/// Rotational correlation time `3V_Hη/kT` in µs for a hydrodynamic diameter
/// in nm, viscosity in Pa·s and temperature in K.
pub fn brownian_time(d_hydro_nm: f64, eta: f64, temperature: f64) -> Result<f64> {
    if !(d_hydro_nm > 0.0 && eta > 0.0 && temperature > 0.0) {
        return Err(Error::invalid(
            "brownian",
            "diameter, viscosity and temperature must be positive",
        ));
    }
    let d = d_hydro_nm * 1e-9;
    let v = PI / 6.0 * d * d * d;
    Ok(3.0 * v * eta / (BOLTZMANN * temperature) * 1e6)
}
