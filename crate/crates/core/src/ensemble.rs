//! Coherence-free ensemble model of one NV in a rotating nanodiamond: a
//! random ¹³C lattice, rate-equation DNP during active orientations, gated
//! spin diffusion otherwise, and bulk totals.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cycles::NuclearSpinRecord;
use crate::dressed::{hyperfine_from_geometry, HyperfinePair};
use crate::orientation::{initial_polarization, NvConstants};
use crate::rng::SeedStream;
use crate::sweep::lz_analytic;
use crate::units::{dipolar_coupling_mhz, DIAMOND_ATOM_DENSITY_CM3, TWO_PI};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeConfig {
    pub n_sites: usize,
    pub abundance: f64,
    /// nm.
    pub lattice_constant: f64,
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            n_sites: 50_000,
            abundance: 0.011,
            lattice_constant: 0.357,
            seed: 0,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abundance > 0.0 && self.abundance <= 1.0) {
            return Err(Error::invalid(
                "abundance",
                format!("{} outside (0, 1]", self.abundance),
            ));
        }
        if !(self.lattice_constant > 0.0) {
            return Err(Error::invalid("lattice_constant", "must be positive"));
        }
        if self.n_sites == 0 {
            return Err(Error::invalid("n_sites", "must be positive"));
        }
        Ok(())
    }
}

/// The `n` diamond-lattice sites nearest the vacancy, in the NV frame (z along
/// [111]), nm. The vacancy and the nitrogen site are excluded.
pub fn lattice_sites(n: usize, lattice_constant: f64) -> Vec<[f64; 3]> {
    // Quarter-lattice-constant integer coordinates; 1/8 of points are sites.
    let radius = ((n as f64 + 2.0) * 8.0 * 3.0 / (4.0 * PI)).cbrt().ceil() as i64 + 4;
    let mut pts: Vec<(i64, [i64; 3])> = Vec::new();
    for x in -radius..=radius {
        for y in -radius..=radius {
            for z in -radius..=radius {
                let p = [x, y, z];
                if !is_diamond_site(p) || p == [0, 0, 0] || p == [1, 1, 1] {
                    continue;
                }
                pts.push((x * x + y * y + z * z, p));
            }
        }
    }
    pts.sort_unstable();
    let q = lattice_constant / 4.0;
    let e1 = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let e2 = [1.0 / 6f64.sqrt(), 1.0 / 6f64.sqrt(), -2.0 / 6f64.sqrt()];
    let e3 = [1.0 / 3f64.sqrt(); 3];
    let dot =
        |a: [f64; 3], b: [i64; 3]| a[0] * b[0] as f64 + a[1] * b[1] as f64 + a[2] * b[2] as f64;
    pts.into_iter()
        .take(n)
        .map(|(_, p)| [q * dot(e1, p), q * dot(e2, p), q * dot(e3, p)])
        .collect()
}

fn is_diamond_site(p: [i64; 3]) -> bool {
    let all_even = p.iter().all(|v| v.rem_euclid(2) == 0);
    let all_odd = p.iter().all(|v| v.rem_euclid(2) == 1);
    if all_even {
        (p[0] + p[1] + p[2]).rem_euclid(4) == 0
    } else if all_odd {
        (p[0] + p[1] + p[2] - 3).rem_euclid(4) == 0
    } else {
        false
    }
}

/// Randomly occupied ¹³C sites with their hyperfine couplings.
pub fn generate_lattice(cfg: &LatticeConfig, c: NvConstants) -> Result<Vec<NuclearSpinRecord>> {
    cfg.validate()?;
    let mut rng = SeedStream::new(cfg.seed).substream("lattice");
    let mut out = Vec::new();
    for (k, r) in lattice_sites(cfg.n_sites, cfg.lattice_constant)
        .into_iter()
        .enumerate()
    {
        let occupied = cfg.abundance >= 1.0 || rng.random::<f64>() < cfg.abundance;
        if occupied {
            let hf = hyperfine_from_geometry(r, c)?;
            out.push(NuclearSpinRecord::new(format!("site{k}"), hf).at(r));
        }
    }
    Ok(out)
}

/// `(p₀, p₊, p₋)` after optical pumping at polar angle θ.
pub fn classical_nv_populations(theta: f64) -> (f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * c, s * s / 2.0, s * s / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NvClassical {
    Zero,
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    /// Polarizations signed so that the pumped direction is positive.
    pub p: Vec<f64>,
    pub nv: NvClassical,
    pub theta: f64,
    /// µs.
    pub elapsed: f64,
}

impl EnsembleState {
    pub fn unpolarized(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            nv: NvClassical::Zero,
            theta: 0.0,
            elapsed: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.p.is_empty() {
            0.0
        } else {
            self.p.iter().sum::<f64>() / self.p.len() as f64
        }
    }
}

/// Sweep parameters shared by every active orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleSweep {
    pub omega_eff: f64,
    pub rate_v: f64,
    /// µs per polarization cycle.
    pub cycle_time: f64,
    pub gamma_n_b: f64,
}

/// Per-sweep transfer `2P_LZ(1 − P_LZ)` for each spin.
pub fn dnp_rates(spins: &[NuclearSpinRecord], sweep: &EnsembleSweep) -> Result<Vec<f64>> {
    spins
        .iter()
        .map(|s| {
            Ok(lz_analytic(
                sweep.omega_eff,
                s.hyperfine.a_x,
                sweep.rate_v,
                sweep.gamma_n_b,
            )?
            .p_avg)
        })
        .collect()
}

/// One sweep: `p_i ← p_i + η·r_i·(1 − p_i)` with η the initialization
/// polarization of the current orientation.
pub fn dnp_step(state: &mut EnsembleState, rates: &[f64], eta: f64) {
    for (p, r) in state.p.iter_mut().zip(rates) {
        *p = (*p + eta * r * (1.0 - *p)).clamp(-1.0, 1.0);
    }
}

/// Depolarizing sweep with an unpolarized electron: `p_i ← p_i(1 − r_i)`.
pub fn depolarize_step(state: &mut EnsembleState, rates: &[f64]) {
    for (p, r) in state.p.iter_mut().zip(rates) {
        *p *= 1.0 - r;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionConfig {
    pub flip_flop_rate_scale: f64,
    /// MHz.
    pub frozen_core_threshold: f64,
    /// µs; only used by the explicit stepper.
    pub time_step: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            flip_flop_rate_scale: 1.0,
            frozen_core_threshold: 0.002,
            time_step: 1.0,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.flip_flop_rate_scale > 0.0
            && self.frozen_core_threshold > 0.0
            && self.time_step > 0.0)
        {
            return Err(Error::invalid(
                "diffusion",
                "all parameters must be positive",
            ));
        }
        Ok(())
    }
}

/// Whether frozen-core pairs are blocked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Open,
    Frozen,
}

impl From<NvClassical> for Gate {
    fn from(nv: NvClassical) -> Self {
        match nv {
            NvClassical::Zero => Gate::Open,
            _ => Gate::Frozen,
        }
    }
}

/// Rate matrices and cached exact propagators of the diffusion equation
/// `dp_i/dt = Σ_j W_ij (p_j − p_i)`.
pub struct DiffusionModel {
    n: usize,
    /// Laplacians `L = D − W` for both gates.
    laplacian: HashMap<Gate, DMatrix<f64>>,
    eigen: HashMap<Gate, (DVector<f64>, DMatrix<f64>)>,
    cache: HashMap<(Gate, u64), DMatrix<f64>>,
    /// Largest per-application change of `Σp` seen so far.
    pub max_sum_drift: f64,
}

impl DiffusionModel {
    pub fn new(spins: &[NuclearSpinRecord], dcfg: &DiffusionConfig, gamma_n: f64) -> Result<Self> {
        dcfg.validate()?;
        let n = spins.len();
        let pos: Vec<[f64; 3]> = spins
            .iter()
            .map(|s| {
                s.position
                    .ok_or_else(|| Error::invalid("position", "diffusion needs positions"))
            })
            .collect::<Result<_>>()?;
        let mut flip = DMatrix::<f64>::zeros(n, n);
        let mut nearest = vec![f64::INFINITY; n];
        for i in 0..n {
            for j in i + 1..n {
                let r = [
                    pos[j][0] - pos[i][0],
                    pos[j][1] - pos[i][1],
                    pos[j][2] - pos[i][2],
                ];
                let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
                let d = dipolar_coupling_mhz(gamma_n, gamma_n, len);
                let cz = r[2] / len;
                // Secular flip-flop amplitude along the field (NV frame z).
                let b = d * (1.0 - 3.0 * cz * cz) / 2.0;
                flip[(i, j)] = b;
                flip[(j, i)] = b;
                nearest[i] = nearest[i].min(len);
                nearest[j] = nearest[j].min(len);
            }
        }
        let mut nn: Vec<f64> = nearest
            .iter()
            .filter(|r| r.is_finite())
            .map(|&r| dipolar_coupling_mhz(gamma_n, gamma_n, r))
            .collect();
        nn.sort_by(f64::total_cmp);
        let gamma_loc = if nn.is_empty() { 1.0 } else { nn[nn.len() / 2] };
        let scale = dcfg.flip_flop_rate_scale * TWO_PI / gamma_loc;
        let mut laplacian = HashMap::new();
        for gate in [Gate::Open, Gate::Frozen] {
            let mut l = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let frozen = (spins[i].hyperfine.a_z - spins[j].hyperfine.a_z).abs()
                        > dcfg.frozen_core_threshold;
                    if gate == Gate::Frozen && frozen {
                        continue;
                    }
                    let w = scale * flip[(i, j)] * flip[(i, j)];
                    l[(i, j)] -= w;
                    l[(j, i)] -= w;
                    l[(i, i)] += w;
                    l[(j, j)] += w;
                }
            }
            laplacian.insert(gate, l);
        }
        Ok(Self {
            n,
            laplacian,
            eigen: HashMap::new(),
            cache: HashMap::new(),
            max_sum_drift: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `W_ij` for one gate.
    pub fn rate(&self, gate: Gate, i: usize, j: usize) -> f64 {
        -self.laplacian[&gate][(i, j)]
    }

    /// `exp(−L t)` with columns renormalized to unit sum.
    fn propagator(&mut self, gate: Gate, t: f64) -> &DMatrix<f64> {
        let key = (gate, t.to_bits());
        if !self.cache.contains_key(&key) {
            let (vals, vecs) = self
                .eigen
                .entry(gate)
                .or_insert_with(|| {
                    let e = self.laplacian[&gate].clone().symmetric_eigen();
                    (e.eigenvalues, e.eigenvectors)
                })
                .clone();
            let n = self.n;
            let mut scaled = vecs.clone();
            for j in 0..n {
                let f = (-vals[j].max(0.0) * t).exp();
                for i in 0..n {
                    scaled[(i, j)] *= f;
                }
            }
            let mut p = scaled * vecs.transpose();
            for j in 0..n {
                let s: f64 = p.column(j).sum();
                let fix = (1.0 - s) / n as f64;
                for i in 0..n {
                    p[(i, j)] += fix;
                }
            }
            self.cache.insert(key, p);
        }
        &self.cache[&key]
    }

    /// Exact evolution over `t` µs.
    pub fn evolve(&mut self, p: &mut [f64], gate: Gate, t: f64) {
        if self.n == 0 || t <= 0.0 {
            return;
        }
        let before: f64 = p.iter().sum();
        let prop = self.propagator(gate, t);
        let out = prop * DVector::from_column_slice(p);
        for (dst, v) in p.iter_mut().zip(out.iter()) {
            *dst = v.clamp(-1.0, 1.0);
        }
        let after: f64 = p.iter().sum();
        self.max_sum_drift = self.max_sum_drift.max((after - before).abs());
    }

    /// Explicit pairwise-exchange step of length `dt`; conserves `Σp` by
    /// antisymmetry of the exchange.
    pub fn explicit_step(&self, p: &mut [f64], gate: Gate, dt: f64) {
        let l = &self.laplacian[&gate];
        let n = self.n;
        let mut dp = vec![0.0; n];
        for i in 0..n {
            for j in i + 1..n {
                let flux = -l[(i, j)] * (p[j] - p[i]) * dt;
                dp[i] += flux;
                dp[j] -= flux;
            }
        }
        for (x, d) in p.iter_mut().zip(dp) {
            *x += d;
        }
    }
}

/// One explicit diffusion step with the gate implied by the NV state.
pub fn diffusion_step(state: &mut EnsembleState, model: &DiffusionModel, dt: f64) {
    model.explicit_step(&mut state.p, state.nv.into(), dt);
    state.elapsed += dt;
}

/// A rotational-diffusion dwell at a fixed orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dwell {
    pub theta: f64,
    pub phi: f64,
    /// µs.
    pub duration: f64,
}

/// Uniformly random orientations, each held for `tau_b`, covering `total`.
pub fn brownian_schedule(tau_b: f64, total: f64, seed: u64) -> Result<Vec<Dwell>> {
    if !(tau_b > 0.0) || !(total >= 0.0) {
        return Err(Error::invalid("tau_b", "must be positive"));
    }
    let mut rng = SeedStream::new(seed).substream("brownian");
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < total - 1e-9 {
        let cos_t: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let phi = TWO_PI * rng.random::<f64>();
        let d = tau_b.min(total - t);
        out.push(Dwell {
            theta: cos_t.clamp(-1.0, 1.0).acos(),
            phi,
            duration: d,
        });
        t += d;
    }
    Ok(out)
}

/// Orientations at which the NV takes part in polarization cycles. Angles
/// are folded onto `[0, π/2]` since the NV axis is a line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActiveRegion {
    Cone { theta_max: f64 },
    Band { lo: f64, hi: f64 },
}

impl ActiveRegion {
    pub fn contains(&self, theta: f64) -> bool {
        let t = fold(theta);
        match *self {
            ActiveRegion::Cone { theta_max } => t <= theta_max,
            ActiveRegion::Band { lo, hi } => {
                let (a, b) = folded_band(lo, hi);
                t >= a && t <= b
            }
        }
    }

    /// Initialization polarization reached at θ; the band normalizes by the
    /// population of the driven subspace.
    pub fn eta(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        match self {
            ActiveRegion::Cone { .. } => initial_polarization(theta),
            ActiveRegion::Band { .. } => (s * s / 2.0 - c * c) / (s * s / 2.0 + c * c),
        }
    }

    /// Solid-angle fraction of orientations inside the region.
    pub fn solid_angle_fraction(&self) -> f64 {
        match *self {
            ActiveRegion::Cone { theta_max } => 1.0 - theta_max.cos(),
            ActiveRegion::Band { lo, hi } => {
                let (a, b) = folded_band(lo, hi);
                a.cos() - b.cos()
            }
        }
    }
}

/// Image of `[lo, hi]` under folding.
fn folded_band(lo: f64, hi: f64) -> (f64, f64) {
    let (lo, hi) = (lo.min(hi), lo.max(hi));
    let a = fold(lo).min(fold(hi));
    let b = if lo <= PI / 2.0 && hi >= PI / 2.0 {
        PI / 2.0
    } else {
        fold(lo).max(fold(hi))
    };
    (a, b)
}

fn fold(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    t.min(PI - t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub lattice: LatticeConfig,
    pub diffusion: DiffusionConfig,
    pub sweep: EnsembleSweep,
    pub active: ActiveRegion,
    /// Orientations at which an unpolarized NV depolarizes its neighbours.
    pub depolarizing: Option<ActiveRegion>,
    /// µs.
    pub tau_b: f64,
    /// µs.
    pub duration: f64,
    pub seed: u64,
    pub constants: NvConstants,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRun {
    /// µs at the end of each dwell, starting with 0.
    pub times: Vec<f64>,
    pub polarization: Vec<f64>,
    pub n_spins: usize,
    pub active_windows: usize,
    pub total_windows: usize,
    /// Largest change of `Σp` during any pure-diffusion evolution.
    pub max_sum_drift: f64,
}

impl EnsembleRun {
    pub fn last_or_zero(&self) -> f64 {
        *self.polarization.last().unwrap_or(&0.0)
    }
}

/// Alternates polarization cycles in active orientations with gated
/// diffusion in all others.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    let spins = generate_lattice(&cfg.lattice, cfg.constants)?;
    run_ensemble_with(cfg, &spins)
}

pub fn run_ensemble_with(cfg: &EnsembleConfig, spins: &[NuclearSpinRecord]) -> Result<EnsembleRun> {
    if !(cfg.sweep.cycle_time > 0.0) {
        return Err(Error::invalid("cycle_time", "must be positive"));
    }
    let rates = dnp_rates(spins, &cfg.sweep)?;
    let mut model = DiffusionModel::new(spins, &cfg.diffusion, cfg.constants.gamma_n)?;
    let schedule = brownian_schedule(cfg.tau_b, cfg.duration, cfg.seed)?;
    let mut nv_rng = SeedStream::new(cfg.seed).substream("nv-state");
    let mut state = EnsembleState::unpolarized(spins.len());
    let mut run = EnsembleRun {
        times: vec![0.0],
        polarization: vec![0.0],
        n_spins: spins.len(),
        active_windows: 0,
        total_windows: schedule.len(),
        max_sum_drift: 0.0,
    };
    for dwell in &schedule {
        state.theta = dwell.theta;
        if cfg.active.contains(dwell.theta) {
            run.active_windows += 1;
            state.nv = NvClassical::Minus;
            let eta = cfg.active.eta(dwell.theta);
            let n_cycles = (dwell.duration / cfg.sweep.cycle_time + 1e-9).floor() as usize;
            for _ in 0..n_cycles {
                dnp_step(&mut state, &rates, eta);
                model.evolve(&mut state.p, Gate::Frozen, cfg.sweep.cycle_time);
            }
            let rest = dwell.duration - n_cycles as f64 * cfg.sweep.cycle_time;
            if rest > 1e-9 {
                model.evolve(&mut state.p, Gate::Frozen, rest);
            }
        } else {
            let depolarizing = cfg.depolarizing.is_some_and(|r| r.contains(dwell.theta));
            let (p0, pp, _) = classical_nv_populations(dwell.theta);
            let u: f64 = nv_rng.random();
            state.nv = if u < p0 {
                NvClassical::Zero
            } else if u < p0 + pp {
                NvClassical::Plus
            } else {
                NvClassical::Minus
            };
            if depolarizing {
                let n_cycles = (dwell.duration / cfg.sweep.cycle_time + 1e-9).floor() as usize;
                for _ in 0..n_cycles {
                    depolarize_step(&mut state, &rates);
                    model.evolve(&mut state.p, Gate::Frozen, cfg.sweep.cycle_time);
                }
            } else {
                model.evolve(&mut state.p, state.nv.into(), dwell.duration);
                run.max_sum_drift = run.max_sum_drift.max(model.max_sum_drift);
            }
        }
        state.elapsed += dwell.duration;
        run.times.push(state.elapsed);
        run.polarization.push(state.mean());
    }
    Ok(run)
}

/// Bulk estimates for a nanodiamond powder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Totals {
    pub nv_per_nanodiamond: f64,
    pub n_nanodiamonds: f64,
    pub total_nv: f64,
    pub total_c13: f64,
    pub polarized_equivalent: f64,
}

/// `powder_volume` in mm³, `nd_diameter` in nm, `nv_concentration` in cm⁻³.
pub fn estimate_totals(
    powder_volume: f64,
    nd_diameter: f64,
    nv_concentration: f64,
    abundance: f64,
    achieved_polarization: f64,
) -> Result<Totals> {
    if !(powder_volume > 0.0 && nd_diameter > 0.0 && nv_concentration > 0.0) {
        return Err(Error::invalid(
            "totals",
            "volume, diameter and concentration must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&abundance) {
        return Err(Error::invalid("abundance", "must lie in [0, 1]"));
    }
    let volume_cm3 = powder_volume * 1e-3;
    let d_cm = nd_diameter * 1e-7;
    let nd_volume = PI / 6.0 * d_cm.powi(3);
    let total_c13 = DIAMOND_ATOM_DENSITY_CM3 * volume_cm3 * abundance;
    Ok(Totals {
        nv_per_nanodiamond: nv_concentration * nd_volume,
        n_nanodiamonds: volume_cm3 / nd_volume,
        total_nv: nv_concentration * volume_cm3,
        total_c13,
        polarized_equivalent: total_c13 * achieved_polarization,
    })
}

/// Heaviest-coupled spins first; handy for inspecting a lattice.
pub fn strongest_couplings(spins: &[NuclearSpinRecord], n: usize) -> Vec<HyperfinePair> {
    let mut hf: Vec<HyperfinePair> = spins.iter().map(|s| s.hyperfine).collect();
    hf.sort_by(|a, b| b.a_x.total_cmp(&a.a_x));
    hf.truncate(n);
    hf
}
