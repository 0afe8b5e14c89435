//! Iterated polarization cycles: sweep, trace out the electron, reset it,
//! repeat. Covers the single-nucleus map, the exact few-nucleus register with
//! internuclear dipolar coupling, and the depolarization map.

use crate::dressed::{
    chi_ket, chi_states, h_dressed_full_terms, Branch, DressedParams, HyperfinePair,
};
use crate::spincore::{
    embed_spin_half, partial_trace_electron, pauli, spin_half_operators, ComplexMatrix,
    DensityMatrix, Ket, PiecewiseConstantHamiltonian,
};
use crate::sweep::{SweepPropagators, SweepSchedule, SweepSetup, TransferModel, MIN_PHASES};
use crate::units::dipolar_coupling_mhz;
use crate::{Error, Result};

/// Exact-diagonalization budget for the multi-spin register.
pub const MAX_SPINS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct NuclearSpinRecord {
    pub label: String,
    /// Position relative to the NV center, nm.
    pub position: Option<[f64; 3]>,
    pub hyperfine: HyperfinePair,
}

impl NuclearSpinRecord {
    pub fn new(label: impl Into<String>, hyperfine: HyperfinePair) -> Self {
        Self {
            label: label.into(),
            position: None,
            hyperfine,
        }
    }

    pub fn at(self, position: [f64; 3]) -> Self {
        Self {
            position: Some(position),
            ..self
        }
    }
}

/// Electron state after each re-initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElectronReset {
    ChiMinus,
    ChiPlus,
    Unpolarized,
    /// Weighted reset: `chi_minus` on `χ₋`, `chi_plus` on `χ₊`, and the
    /// remainder left outside the driven subspace (no dynamics that cycle).
    Mixture {
        chi_minus: f64,
        chi_plus: f64,
    },
}

impl ElectronReset {
    /// Reset implied by imperfect optical initialization at polar angle θ:
    /// `cos²θ` reaches `χ₋`, `sin²θ/2` lands in `χ₊`, the rest is idle.
    pub fn from_orientation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        ElectronReset::Mixture {
            chi_minus: c * c,
            chi_plus: s * s / 2.0,
        }
    }

    /// `(weight on χ₋, weight on χ₊)`; the idle weight is `1 − sum`.
    fn weights(self) -> Result<(f64, f64)> {
        let w = match self {
            ElectronReset::ChiMinus => (1.0, 0.0),
            ElectronReset::ChiPlus => (0.0, 1.0),
            ElectronReset::Unpolarized => (0.5, 0.5),
            ElectronReset::Mixture {
                chi_minus,
                chi_plus,
            } => (chi_minus, chi_plus),
        };
        if w.0 < 0.0 || w.1 < 0.0 || w.0 + w.1 > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "electron_reset",
                "weights must be a sub-distribution",
            ));
        }
        Ok(w)
    }
}

/// Starting nuclear state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NuclearInit {
    Mixed,
    /// Fully polarized along the pumped direction of the branch.
    Polarized,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleConfig {
    pub n_cycles: usize,
    pub schedule: SweepSchedule,
    /// Ω_eff, γ_nB and branch; the detuning field is ignored.
    pub dp: DressedParams,
    pub model: TransferModel,
    pub secular_term: bool,
    pub electron_reset: ElectronReset,
    /// `None` for the single trajectory, or the number of Stokes phases.
    pub phase_averaging: Option<usize>,
    /// Rotating-frame lifetime in µs; scales each cycle's change by `exp(−Δt/T₁ρ)`.
    pub t1rho: Option<f64>,
}

impl CycleConfig {
    pub fn new(n_cycles: usize, schedule: SweepSchedule, dp: DressedParams) -> Self {
        Self {
            n_cycles,
            schedule,
            dp,
            model: TransferModel::Secular,
            secular_term: true,
            electron_reset: ElectronReset::ChiMinus,
            phase_averaging: None,
            t1rho: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::invalid("n_cycles", "must be at least 1"));
        }
        if let Some(n) = self.phase_averaging {
            if n < MIN_PHASES {
                return Err(Error::invalid(
                    "phase_averaging",
                    format!("{n} phases, need at least {MIN_PHASES}"),
                ));
            }
        }
        if let Some(t) = self.t1rho {
            if !(t > 0.0) {
                return Err(Error::invalid("t1rho", "must be positive"));
            }
        }
        self.electron_reset.weights()?;
        Ok(())
    }

    fn setup(&self, hf: HyperfinePair) -> SweepSetup {
        SweepSetup {
            omega_eff: self.dp.omega_eff,
            gamma_n_b: self.dp.gamma_n_b,
            branch: self.dp.branch,
            hf,
            schedule: self.schedule,
            model: self.model,
            secular_term: self.secular_term,
        }
    }

    /// Fraction of each cycle's change that survives electron relaxation.
    fn survival(&self) -> f64 {
        self.t1rho
            .map_or(1.0, |t| (-self.schedule.duration / t).exp())
    }
}

/// Per-cycle polarization, index 0 being the initial state. Values are
/// signed so that the branch's pumped direction is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarizationSeries {
    pub aggregate: Vec<f64>,
    /// One series per nuclear spin (a single entry for one-spin runs).
    pub per_spin: Vec<Vec<f64>>,
}

impl PolarizationSeries {
    fn new(n_spins: usize) -> Self {
        Self {
            aggregate: Vec::new(),
            per_spin: vec![Vec::new(); n_spins],
        }
    }

    fn record(&mut self, values: &[f64]) {
        for (s, v) in self.per_spin.iter_mut().zip(values) {
            s.push(*v);
        }
        self.aggregate
            .push(values.iter().sum::<f64>() / values.len() as f64);
    }

    pub fn last(&self) -> f64 {
        *self.aggregate.last().unwrap_or(&0.0)
    }
}

/// `Tr(ρ I_z)/(1/2)` averaged over the spin-½ sites of a nuclear register.
pub fn polarization_metric(rho_n: &DensityMatrix) -> Result<f64> {
    let n = register_size(rho_n.dim())?;
    Ok(per_spin_polarization(rho_n, n).iter().sum::<f64>() / n as f64)
}

fn register_size(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::invalid(
            "rho_n",
            format!("dimension {dim} is not 2^N"),
        ));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Site polarizations `2⟨I_z^(i)⟩`, read off the diagonal (site 0 is the
/// most significant bit, ↑ = 0).
fn per_spin_polarization(rho_n: &DensityMatrix, n: usize) -> Vec<f64> {
    let dim = rho_n.dim();
    let mut out = vec![0.0; n];
    for k in 0..dim {
        let p = rho_n.population(k);
        for (site, o) in out.iter_mut().enumerate() {
            let down = (k >> (n - 1 - site)) & 1 == 1;
            *o += if down { -p } else { p };
        }
    }
    out
}

/// Fully polarized register along the pumped direction.
fn polarized_register(n: usize, branch: Branch) -> DensityMatrix {
    let up = branch.target_sign() > 0.0;
    let k = if up { 0 } else { (1 << n) - 1 };
    DensityMatrix::pure(&Ket::basis(1 << n, k))
}

fn initial_register(n: usize, init: NuclearInit, branch: Branch) -> DensityMatrix {
    match init {
        NuclearInit::Mixed => DensityMatrix::maximally_mixed(1 << n),
        NuclearInit::Polarized => polarized_register(n, branch),
    }
}

/// The cycle map as a list of weighted unitaries and electron states.
struct CycleMap {
    unitaries: Vec<ComplexMatrix>,
    electron: Vec<(f64, DensityMatrix)>,
    idle: f64,
    survival: f64,
    nuclear_dim: usize,
}

impl CycleMap {
    fn apply(&self, rho_n: &DensityMatrix) -> Result<DensityMatrix> {
        let dim = rho_n.dim();
        let mut acc = rho_n.matrix().scale(self.idle);
        let norm = 1.0 / self.unitaries.len() as f64;
        for (w, rho_e) in &self.electron {
            if *w == 0.0 {
                continue;
            }
            let joint = rho_e.kron(rho_n);
            for u in &self.unitaries {
                let out = DensityMatrix::trusted(joint.matrix().conjugate_by(u));
                let reduced = partial_trace_electron(&out, 2, self.nuclear_dim)?;
                acc += &reduced.matrix().scale(w * norm);
            }
        }
        let s = self.survival;
        let mixed = &acc.scale(s) + &rho_n.matrix().scale(1.0 - s);
        debug_assert_eq!(mixed.dim(), dim);
        Ok(DensityMatrix::trusted(mixed))
    }
}

fn electron_states(
    reset: ElectronReset,
    chi_minus: DensityMatrix,
    chi_plus: DensityMatrix,
) -> Result<(Vec<(f64, DensityMatrix)>, f64)> {
    let (wm, wp) = reset.weights()?;
    Ok((
        vec![(wm, chi_minus), (wp, chi_plus)],
        (1.0 - wm - wp).max(0.0),
    ))
}

fn run_map(
    map: &CycleMap,
    mut rho: DensityMatrix,
    n_spins: usize,
    n_cycles: usize,
    sign: f64,
) -> Result<PolarizationSeries> {
    let mut series = PolarizationSeries::new(n_spins);
    let signed = |r: &DensityMatrix| -> Vec<f64> {
        per_spin_polarization(r, n_spins)
            .into_iter()
            .map(|p| sign * p + 0.0)
            .collect()
    };
    series.record(&signed(&rho));
    for _ in 0..n_cycles {
        rho = map.apply(&rho)?;
        series.record(&signed(&rho));
    }
    Ok(series)
}

fn single_map(cfg: &CycleConfig, hf: HyperfinePair) -> Result<CycleMap> {
    cfg.validate()?;
    let setup = cfg.setup(hf);
    setup.spans_resonances();
    let props = SweepPropagators::build(&setup, cfg.phase_averaging.unwrap_or(0))?;
    let unitaries = if props.phased.is_empty() {
        vec![props.raw]
    } else {
        props.phased
    };
    let (electron, idle) = electron_states(
        cfg.electron_reset,
        setup.electron_chi_minus(),
        setup.electron_chi_plus(),
    )?;
    Ok(CycleMap {
        unitaries,
        electron,
        idle,
        survival: cfg.survival(),
        nuclear_dim: 2,
    })
}

/// Single-nucleus buildup from a maximally mixed nuclear spin.
pub fn run_cycles_single(cfg: &CycleConfig, hf: HyperfinePair) -> Result<PolarizationSeries> {
    run_cycles_single_from(cfg, hf, NuclearInit::Mixed)
}

pub fn run_cycles_single_from(
    cfg: &CycleConfig,
    hf: HyperfinePair,
    init: NuclearInit,
) -> Result<PolarizationSeries> {
    let map = single_map(cfg, hf)?;
    let rho = initial_register(1, init, cfg.dp.branch);
    run_map(&map, rho, 1, cfg.n_cycles, cfg.dp.branch.target_sign())
}

/// Fully polarized nucleus in contact with an unpolarized electron each cycle.
pub fn run_depolarization(cfg: &CycleConfig, hf: HyperfinePair) -> Result<PolarizationSeries> {
    if cfg.electron_reset != ElectronReset::Unpolarized {
        return Err(Error::invalid(
            "electron_reset",
            "depolarization runs use the unpolarized reset",
        ));
    }
    run_cycles_single_from(cfg, hf, NuclearInit::Polarized)
}

/// Dipolar coupling `d·[I_i·I_j − 3(I_i·e)(I_j·e)]` between two register sites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipolarPair {
    pub i: usize,
    pub j: usize,
    /// MHz.
    pub d: f64,
    pub unit: [f64; 3],
}

/// Nearest-neighbour chain with uniform coupling along a fixed axis.
pub fn chain_couplings(n: usize, d: f64, axis: [f64; 3]) -> Vec<DipolarPair> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let unit = axis.map(|x| x / norm);
    (1..n)
        .map(|k| DipolarPair {
            i: k - 1,
            j: k,
            d,
            unit,
        })
        .collect()
}

/// All-pairs couplings from nuclear positions (nm).
pub fn couplings_from_positions(
    spins: &[NuclearSpinRecord],
    gamma_n: f64,
) -> Result<Vec<DipolarPair>> {
    let mut out = Vec::new();
    for i in 0..spins.len() {
        for j in i + 1..spins.len() {
            let (Some(a), Some(b)) = (spins[i].position, spins[j].position) else {
                return Err(Error::invalid("position", "every spin needs a position"));
            };
            let r = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let len = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                return Err(Error::invalid("position", "coincident nuclei"));
            }
            out.push(DipolarPair {
                i,
                j,
                d: dipolar_coupling_mhz(gamma_n, gamma_n, len),
                unit: r.map(|x| x / len),
            });
        }
    }
    Ok(out)
}

/// Static and `Δ`-proportional terms of the electron + N-nucleus
/// Hamiltonian, basis `electron ⊗ site₀ ⊗ … ⊗ site_{N−1}`.
pub fn h_tot_multi_terms(
    spins: &[NuclearSpinRecord],
    dp: &DressedParams,
    couplings: &[DipolarPair],
) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = spins.len();
    if n == 0 {
        return Err(Error::invalid("spins", "need at least one nuclear spin"));
    }
    if n > MAX_SPINS {
        return Err(Error::TooManySpins { n, max: MAX_SPINS });
    }
    let (px, _, pz) = pauli();
    let (ix, iy, iz) = spin_half_operators();
    let sx = px.scale(0.5);
    let sz = pz.scale(0.5);
    let nd = 1usize << n;
    let id_n = ComplexMatrix::identity(nd);
    let id_e = ComplexMatrix::identity(2);
    let site_ops: Vec<[ComplexMatrix; 3]> = (0..n)
        .map(|k| {
            [
                embed_spin_half(&ix, k, n),
                embed_spin_half(&iy, k, n),
                embed_spin_half(&iz, k, n),
            ]
        })
        .collect();

    let mut nuclear = ComplexMatrix::zeros(nd);
    let mut hf_op = ComplexMatrix::zeros(nd);
    for (k, s) in spins.iter().enumerate() {
        nuclear += &site_ops[k][2].scale(dp.gamma_n_b);
        hf_op += &(&site_ops[k][0].scale(s.hyperfine.a_x) + &site_ops[k][2].scale(s.hyperfine.a_z));
    }
    for p in couplings {
        if p.i >= n || p.j >= n || p.i == p.j {
            return Err(Error::invalid(
                "couplings",
                format!("bad pair ({}, {})", p.i, p.j),
            ));
        }
        let (a, b) = (&site_ops[p.i], &site_ops[p.j]);
        let mut dot = ComplexMatrix::zeros(nd);
        for q in 0..3 {
            dot += &(&a[q] * &b[q]);
        }
        let proj = |ops: &[ComplexMatrix; 3]| {
            let mut m = ComplexMatrix::zeros(nd);
            for q in 0..3 {
                m += &ops[q].scale(p.unit[q]);
            }
            m
        };
        let term = &dot - &(&proj(a) * &proj(b)).scale(3.0);
        nuclear += &term.scale(p.d);
    }
    let static_part = &(&sz.scale(dp.branch.sign() * dp.omega_eff).kron(&id_n)
        + &id_e.kron(&nuclear))
        + &sx.scale(2.0).kron(&hf_op);
    let delta_part = sx.scale(2.0).kron(&id_n);
    Ok((static_part, delta_part))
}

/// Piecewise-constant `H_tot(t)` over a sweep schedule.
pub fn build_h_tot_multi(
    spins: &[NuclearSpinRecord],
    dp: &DressedParams,
    couplings: &[DipolarPair],
    schedule: &SweepSchedule,
) -> Result<PiecewiseConstantHamiltonian> {
    let (s, x) = h_tot_multi_terms(spins, dp, couplings)?;
    let mut h = PiecewiseConstantHamiltonian::with_terms(vec![s, x])?;
    let (deltas, dt) = schedule.midpoints();
    for d in deltas {
        h.push_linear(dt, vec![1.0, d])?;
    }
    Ok(h)
}

/// Exact few-nucleus cycles. Uses the fixed-frame Hamiltonian regardless of
/// `cfg.model`; phase averaging is not defined for a register.
pub fn run_cycles_multi(
    cfg: &CycleConfig,
    spins: &[NuclearSpinRecord],
    couplings: &[DipolarPair],
) -> Result<PolarizationSeries> {
    cfg.validate()?;
    if cfg.phase_averaging.is_some() {
        return Err(Error::invalid(
            "phase_averaging",
            "not available for multi-spin runs",
        ));
    }
    let n = spins.len();
    let h = build_h_tot_multi(spins, &cfg.dp, couplings, &cfg.schedule)?;
    let u = h.unitary();
    let cs = chi_states(cfg.schedule.delta_start, cfg.dp.omega_eff, cfg.dp.branch);
    let (electron, idle) = electron_states(
        cfg.electron_reset,
        DensityMatrix::pure(&chi_ket(cs.chi_minus)),
        DensityMatrix::pure(&chi_ket(cs.chi_plus)),
    )?;
    let map = CycleMap {
        unitaries: vec![u],
        electron,
        idle,
        survival: cfg.survival(),
        nuclear_dim: 1 << n,
    };
    let rho = initial_register(n, NuclearInit::Mixed, cfg.dp.branch);
    run_map(&map, rho, n, cfg.n_cycles, cfg.dp.branch.target_sign())
}

/// One-spin fixed-frame terms, for cross-checking the register builder.
pub fn single_full_terms(dp: &DressedParams, hf: &HyperfinePair) -> (ComplexMatrix, ComplexMatrix) {
    h_dressed_full_terms(dp.omega_eff, dp.branch, dp.gamma_n_b, hf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::default_time_step;

    const GNB: f64 = 10.705 * 0.36;

    fn dp(om: f64) -> DressedParams {
        DressedParams::new(om, 0.0, GNB, Branch::PositiveD).unwrap()
    }

    fn cfg(om: f64, ax: f64, v: f64, dt: f64, n: usize) -> CycleConfig {
        let hf = HyperfinePair::new(ax, 0.0).unwrap();
        let ts = default_time_step(om, GNB, &hf);
        CycleConfig::new(n, SweepSchedule::symmetric(v, dt, ts).unwrap(), dp(om))
    }

    #[test]
    fn metric_examples() {
        let m = |p: &[f64]| polarization_metric(&DensityMatrix::diagonal(p).unwrap()).unwrap();
        assert!(m(&[0.5, 0.5]).abs() < 1e-15);
        assert_eq!(m(&[0.0, 1.0]), -1.0);
        assert_eq!(m(&[1.0, 0.0]), 1.0);
        assert!((m(&[0.75, 0.25]) - 0.5).abs() < 1e-15);
        let two = DensityMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(polarization_metric(&two).unwrap(), 1.0);
        assert!(polarization_metric(&DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn buildup_is_monotone_and_follows_first_cycle() {
        let c = cfg(3.0, 0.6, 6.0, 10.0, 30);
        let s = run_cycles_single(&c, HyperfinePair::new(0.6, 0.64).unwrap()).unwrap();
        let p1 = s.aggregate[1];
        for k in 1..s.aggregate.len() {
            assert!(s.aggregate[k] >= s.aggregate[k - 1] - 1e-9);
            let expected = 1.0 - (1.0 - p1).powi(k as i32);
            assert!((s.aggregate[k] - expected).abs() < 1e-9);
        }
        assert!(s.last() > 0.9);
    }

    #[test]
    fn weak_slow_sweep_builds_up() {
        let c = cfg(2.3, 0.1, 0.8, 50.0, 10);
        let s = run_cycles_single(&c, HyperfinePair::new(0.1, 0.0).unwrap()).unwrap();
        assert!(
            s.aggregate[1] > 1e-3 && s.last() > s.aggregate[1],
            "{:?}",
            s.aggregate
        );
    }

    #[test]
    fn depolarization_decays() {
        let mut c = cfg(3.5, 0.6, 6.0, 10.0, 8);
        c.electron_reset = ElectronReset::Unpolarized;
        let s = run_depolarization(&c, HyperfinePair::new(0.6, 0.0).unwrap()).unwrap();
        assert!((s.aggregate[0] - 1.0).abs() < 1e-12);
        for k in 1..s.aggregate.len() {
            assert!(s.aggregate[k].abs() <= s.aggregate[k - 1].abs() + 1e-9);
        }
        assert!(s.aggregate[4] < 0.5);
        let s0 = run_depolarization(&c, HyperfinePair::new(0.0, 0.0).unwrap()).unwrap();
        assert!(s0.aggregate.iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(run_depolarization(
            &cfg(3.5, 0.6, 6.0, 10.0, 2),
            HyperfinePair::new(0.6, 0.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn polarized_spin_is_a_fixed_point() {
        let c = cfg(3.0, 0.6, 6.0, 10.0, 5);
        let s = run_cycles_single_from(
            &c,
            HyperfinePair::new(0.6, 0.64).unwrap(),
            NuclearInit::Polarized,
        )
        .unwrap();
        for w in s.aggregate.windows(2) {
            assert!((w[1] - w[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn phase_averaged_first_cycle_matches_closed_form() {
        let mut c = cfg(3.0, 0.2, 0.3, 8.0 / 0.3, 1);
        c.phase_averaging = Some(16);
        let s = run_cycles_single(&c, HyperfinePair::new(0.2, 0.0).unwrap()).unwrap();
        let lz = crate::sweep::lz_analytic(3.0, 0.2, 0.3, GNB).unwrap();
        assert!((s.aggregate[1] / lz.p_avg - 1.0).abs() < 0.1);
    }

    #[test]
    fn t1rho_slows_buildup() {
        let c = cfg(3.0, 0.6, 6.0, 10.0, 3);
        let hf = HyperfinePair::new(0.6, 0.0).unwrap();
        let fast = run_cycles_single(&c, hf).unwrap();
        let slow = run_cycles_single(
            &CycleConfig {
                t1rho: Some(100.0),
                ..c
            },
            hf,
        )
        .unwrap();
        let f = (-0.1f64).exp();
        assert!((slow.aggregate[1] - f * fast.aggregate[1]).abs() < 1e-12);
    }

    #[test]
    fn orientation_reset_reduces_gain() {
        let c = cfg(3.0, 0.6, 6.0, 10.0, 40);
        let hf = HyperfinePair::new(0.6, 0.0).unwrap();
        let theta = 20f64.to_radians();
        let r = ElectronReset::from_orientation(theta);
        let s = run_cycles_single(
            &CycleConfig {
                electron_reset: r,
                ..c
            },
            hf,
        )
        .unwrap();
        let (sn, cs) = theta.sin_cos();
        let limit = (cs * cs - sn * sn / 2.0) / (cs * cs + sn * sn / 2.0);
        assert!((s.last() - limit).abs() < 0.02, "{} vs {limit}", s.last());
    }

    #[test]
    fn register_reduces_to_single_spin() {
        let d = dp(3.0);
        let hf = HyperfinePair::new(0.6, 0.64).unwrap();
        let (s1, x1) = single_full_terms(&d, &hf);
        let (sm, xm) = h_tot_multi_terms(&[NuclearSpinRecord::new("c1", hf)], &d, &[]).unwrap();
        assert!((&s1 - &sm).max_norm() < 1e-15 && (&x1 - &xm).max_norm() < 1e-15);

        let mut c = cfg(3.0, 0.6, 6.0, 10.0, 4);
        c.model = TransferModel::Full;
        let a = run_cycles_single(&c, hf).unwrap();
        let b = run_cycles_multi(&c, &[NuclearSpinRecord::new("c1", hf)], &[]).unwrap();
        for (x, y) in a.aggregate.iter().zip(&b.aggregate) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn register_builder_checks() {
        let hf = HyperfinePair::new(0.1, 0.0).unwrap();
        let spins: Vec<_> = (0..7)
            .map(|k| NuclearSpinRecord::new(format!("c{k}"), hf))
            .collect();
        assert!(matches!(
            h_tot_multi_terms(&spins, &dp(3.0), &[]),
            Err(Error::TooManySpins { n: 7, max: 6 })
        ));
        let pairs = chain_couplings(3, 0.002, [1.0, 0.0, 0.0]);
        let (s, _) = h_tot_multi_terms(&spins[..3], &dp(3.0), &pairs).unwrap();
        assert!(s.is_hermitian(1e-12));
        let (s0, _) = h_tot_multi_terms(&spins[..3], &dp(3.0), &[]).unwrap();
        let diff = &s - &s0;
        // Chain along x: flip-flop element of d[I·I − 3IxIx] is d(1/2 − 3/4) = −d/4
        // plus the double-flip term −3d/4; both show up in the off-diagonals.
        let max = diff.max_norm();
        assert!((max - 0.75 * 0.002).abs() < 1e-15, "{max}");
        let placed: Vec<_> = spins[..2]
            .iter()
            .enumerate()
            .map(|(k, s)| s.clone().at([0.0, 0.0, 0.5 * k as f64]))
            .collect();
        let c = couplings_from_positions(&placed, 10.705).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].unit[2] - 1.0).abs() < 1e-15);
    }
}
