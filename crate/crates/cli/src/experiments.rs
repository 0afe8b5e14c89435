//! One runner per experiment. Each returns a table plus diagnostics for the
//! sidecar; none of them touches the filesystem.

use nvhp_core::cycles::{
    chain_couplings, run_cycles_multi, run_cycles_single, run_depolarization, CycleConfig,
    ElectronReset, NuclearSpinRecord,
};
use nvhp_core::dressed::{level_diagram, Branch, DressedParams, HyperfinePair};
use nvhp_core::ensemble::{
    estimate_totals, run_ensemble, ActiveRegion, DiffusionConfig, EnsembleConfig, EnsembleSweep,
    LatticeConfig,
};
use nvhp_core::numeric::linear_fit;
use nvhp_core::orientation::{secular_population_trace, OrientationParams};
use nvhp_core::sweep::{
    default_time_step, lz_analytic, rotation_adiabaticity, rotation_following_fidelity,
    state_prep_sweep, PrepSweep, SweepSchedule, TransferModel,
};
use nvhp_core::table::Table;
use nvhp_core::Result;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{
    ConstantsCfg, CycleCfg, EnsembleCfg, LevelsCfg, MultispinCfg, Params, PmaxSurfaceCfg, PrepCfg,
    RegionCfg, RotationCfg, RunConfig, TotalsCfg, ValidateSecularCfg,
};

pub struct RunOutput {
    pub table: Table,
    pub diagnostics: Map<String, Value>,
}

impl RunOutput {
    fn plain(table: Table) -> Self {
        Self {
            table,
            diagnostics: Map::new(),
        }
    }

    fn with(table: Table, diagnostics: Value) -> Self {
        let Value::Object(diagnostics) = diagnostics else {
            unreachable!("diagnostics are built as objects")
        };
        Self { table, diagnostics }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let c = &cfg.constants;
    match &cfg.params {
        Params::Levels(p) => levels(p, c),
        Params::PmaxSurface(p) => pmax_surface(p, c),
        Params::Prep(p) => prep(p, c),
        Params::Cycle(p) => cycle(p, c, false),
        Params::Depolarize(p) => cycle(p, c, true),
        Params::Multispin(p) => multispin(p, c),
        Params::Ensemble(p) => ensemble(p, c, cfg.seed),
        Params::Totals(p) => totals(p),
        Params::ValidateSecular(p) => validate_secular(p, c),
        Params::Rotation(p) => rotation(p, c),
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn branch(name: &str) -> Branch {
    match name {
        "negative" => Branch::NegativeD,
        _ => Branch::PositiveD,
    }
}

fn levels(p: &LevelsCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let hf = HyperfinePair::new(p.a_x, p.a_z)?;
    let deltas = linspace(p.delta_min, p.delta_max, p.n_points);
    let t = level_diagram(&deltas, p.omega_eff, c.gamma_n_b(), branch(&p.branch), &hf)?;
    Ok(RunOutput::plain(t))
}

fn pmax_surface(p: &PmaxSurfaceCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let grid: Vec<(f64, f64)> = linspace(p.a_x_min, p.a_x_max, p.n_a_x)
        .into_iter()
        .flat_map(|a| {
            linspace(p.rate_min, p.rate_max, p.n_rate)
                .into_iter()
                .map(move |v| (a, v))
        })
        .collect();
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(a, v)| {
            let r = lz_analytic(p.omega_eff, a, v, c.gamma_n_b())?;
            Ok(vec![a, v, r.mu, r.p_lz, r.p_max, r.p_avg])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["a_x_mhz", "rate_mhz_per_us", "mu", "p_lz", "p_max", "p_avg"]);
    for row in rows {
        t.push(row)?;
    }
    Ok(RunOutput::plain(t))
}

fn prep(p: &PrepCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let k = c.nv();
    let theta_max = p.theta_max_deg.to_radians();
    let sweep = PrepSweep::for_cone(k, theta_max, p.omega_minus, p.span / p.duration, p.span)?;
    let thetas = linspace(0.0, p.theta_max_deg, p.n_theta);
    let out: Vec<_> = thetas
        .par_iter()
        .map(|t| state_prep_sweep(t.to_radians(), k, &sweep))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["theta_deg", "fidelity", "branch_fidelity"]);
    for (th, f) in thetas.iter().zip(&out) {
        t.push(vec![*th, f.population, f.branch])?;
    }
    let min = out
        .iter()
        .map(|f| f.population)
        .fold(f64::INFINITY, f64::min);
    let min_branch = out.iter().map(|f| f.branch).fold(f64::INFINITY, f64::min);
    Ok(RunOutput::with(
        t,
        json!({ "center_mhz": sweep.center, "min_fidelity": min, "min_branch_fidelity": min_branch }),
    ))
}

fn reset(p: &CycleCfg) -> ElectronReset {
    match p.reset.as_str() {
        "chi-plus" => ElectronReset::ChiPlus,
        "unpolarized" => ElectronReset::Unpolarized,
        "orientation" => {
            ElectronReset::from_orientation(p.reset_theta_deg.unwrap_or(0.0).to_radians())
        }
        _ => ElectronReset::ChiMinus,
    }
}

fn cycle(p: &CycleCfg, c: &ConstantsCfg, depolarize: bool) -> Result<RunOutput> {
    let gnb = c.gamma_n_b();
    let hf = HyperfinePair::new(p.a_x, p.a_z)?;
    let dt = p
        .time_step
        .unwrap_or_else(|| default_time_step(p.omega_eff, gnb, &hf));
    let schedule = SweepSchedule::symmetric(p.rate, p.duration, dt)?;
    let dp = DressedParams::new(p.omega_eff, 0.0, gnb, branch(&p.branch))?;
    let mut cfg = CycleConfig::new(p.n_cycles, schedule, dp);
    cfg.model = if p.model == "full" {
        TransferModel::Full
    } else {
        TransferModel::Secular
    };
    cfg.secular_term = p.secular_term;
    cfg.electron_reset = reset(p);
    cfg.phase_averaging = p.phase_averaging;
    cfg.t1rho = p.t1rho;
    let series = if depolarize {
        run_depolarization(&cfg, hf)?
    } else {
        run_cycles_single(&cfg, hf)?
    };
    let mut t = Table::new(&["cycle", "polarization"]);
    for (k, v) in series.aggregate.iter().enumerate() {
        t.push(vec![k as f64, *v])?;
    }
    Ok(RunOutput::with(t, json!({ "time_step_us": dt })))
}

fn multispin(p: &MultispinCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let gnb = c.gamma_n_b();
    let spins: Vec<NuclearSpinRecord> = p
        .a_x
        .iter()
        .zip(&p.a_z)
        .enumerate()
        .map(|(k, (&ax, &az))| {
            Ok(NuclearSpinRecord::new(
                format!("spin_{}", k + 1),
                HyperfinePair::new(ax, az)?,
            ))
        })
        .collect::<Result<_>>()?;
    let schedule = SweepSchedule::symmetric(p.rate, p.duration, p.time_step)?;
    let dp = DressedParams::new(p.omega_eff, 0.0, gnb, branch(&p.branch))?;
    let mut cfg = CycleConfig::new(p.n_cycles, schedule, dp);
    cfg.model = TransferModel::Full;
    let norm = p.chain_axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let axis = [
        p.chain_axis[0] / norm,
        p.chain_axis[1] / norm,
        p.chain_axis[2] / norm,
    ];
    let couplings = chain_couplings(spins.len(), p.dipolar_d, axis);
    let (with, without) = rayon::join(
        || run_cycles_multi(&cfg, &spins, &couplings),
        || run_cycles_multi(&cfg, &spins, &[]),
    );
    let (with, without) = (with?, without?);
    let mut cols = vec![
        "cycle".to_string(),
        "aggregate".into(),
        "aggregate_no_dipolar".into(),
    ];
    cols.extend((1..=spins.len()).map(|k| format!("spin_{k}")));
    let mut t = Table::new(&cols);
    let mut max_diff: f64 = 0.0;
    for k in 0..with.aggregate.len() {
        let mut row = vec![k as f64, with.aggregate[k], without.aggregate[k]];
        row.extend(with.per_spin.iter().map(|s| s[k]));
        max_diff = max_diff.max((with.aggregate[k] - without.aggregate[k]).abs());
        t.push(row)?;
    }
    Ok(RunOutput::with(
        t,
        json!({ "max_aggregate_difference": max_diff }),
    ))
}

fn region(r: &RegionCfg) -> ActiveRegion {
    match r.kind.as_str() {
        "band" => ActiveRegion::Band {
            lo: r.lo_deg.unwrap_or(0.0).to_radians(),
            hi: r.hi_deg.unwrap_or(0.0).to_radians(),
        },
        _ => ActiveRegion::Cone {
            theta_max: r.theta_max_deg.unwrap_or(0.0).to_radians(),
        },
    }
}

pub fn ensemble_config(p: &EnsembleCfg, c: &ConstantsCfg, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        lattice: LatticeConfig {
            n_sites: p.lattice.n_sites,
            abundance: p.lattice.abundance,
            lattice_constant: p.lattice.lattice_constant,
            seed: p.lattice.seed,
        },
        diffusion: DiffusionConfig {
            flip_flop_rate_scale: p.diffusion.flip_flop_rate_scale,
            frozen_core_threshold: p.diffusion.frozen_core_threshold,
            ..DiffusionConfig::default()
        },
        sweep: EnsembleSweep {
            omega_eff: p.omega_eff,
            rate_v: p.rate,
            cycle_time: p.cycle_time,
            gamma_n_b: c.gamma_n_b(),
        },
        active: region(&p.active),
        depolarizing: p.depolarizing.as_ref().map(region),
        tau_b: p.tau_b,
        duration: p.duration,
        seed,
        constants: c.nv(),
    }
}

fn ensemble(p: &EnsembleCfg, c: &ConstantsCfg, seed: u64) -> Result<RunOutput> {
    let run = run_ensemble(&ensemble_config(p, c, seed))?;
    let mut t = Table::new(&["time_ms", "polarization"]);
    for (time, pol) in run.times.iter().zip(&run.polarization) {
        t.push(vec![time / 1000.0, *pol])?;
    }
    let (slope, _, r2) = linear_fit(&run.times, &run.polarization);
    Ok(RunOutput::with(
        t,
        json!({
            "n_spins": run.n_spins,
            "active_windows": run.active_windows,
            "total_windows": run.total_windows,
            "max_sum_drift": run.max_sum_drift,
            "final_polarization": run.last_or_zero(),
            "slope_per_s": slope * 1e6,
            "linear_fit_r2": r2,
        }),
    ))
}

fn totals(p: &TotalsCfg) -> Result<RunOutput> {
    let r = estimate_totals(
        p.volume_mm3,
        p.diameter_nm,
        p.nv_concentration,
        p.abundance,
        p.polarization,
    )?;
    let mut t = Table::new(&[
        "nv_per_nanodiamond",
        "n_nanodiamonds",
        "total_nv",
        "total_c13",
        "polarized_equivalent",
    ]);
    t.push(vec![
        r.nv_per_nanodiamond,
        r.n_nanodiamonds,
        r.total_nv,
        r.total_c13,
        r.polarized_equivalent,
    ])?;
    Ok(RunOutput::plain(t))
}

fn validate_secular(p: &ValidateSecularCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let o = OrientationParams::from_degrees(p.theta_deg, 0.0)?;
    let traces: Vec<Vec<(f64, f64)>> = p
        .fields
        .iter()
        .map(|&b| secular_population_trace(o, c.nv().with_field(b), p.duration, p.n_points))
        .collect::<Result<_>>()?;
    let mut cols = vec!["time_us".to_string()];
    cols.extend(p.fields.iter().map(|b| format!("p0_b{b}")));
    let mut t = Table::new(&cols);
    for k in 0..p.n_points {
        let mut row = vec![traces[0][k].0];
        row.extend(traces.iter().map(|tr| tr[k].1));
        t.push(row)?;
    }
    let minima: Vec<f64> = traces
        .iter()
        .map(|tr| tr.iter().map(|x| x.1).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(RunOutput::with(t, json!({ "min_population": minima })))
}

fn rotation(p: &RotationCfg, c: &ConstantsCfg) -> Result<RunOutput> {
    let angle = p.angle_deg.to_radians();
    let gnb = c.gamma_n_b();
    let rows: Vec<Vec<f64>> = p
        .durations
        .par_iter()
        .map(|&d| {
            Ok(vec![
                d,
                rotation_adiabaticity(gnb, angle, d)?,
                rotation_following_fidelity(gnb, angle, d)?,
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["duration_us", "margin", "fidelity"]);
    for row in rows {
        t.push(row)?;
    }
    Ok(RunOutput::plain(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run(text: &str) -> RunOutput {
        execute(&parse_config(text).unwrap()).unwrap()
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-6.0, 6.0, 3), vec![-6.0, 0.0, 6.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn levels_columns() {
        let out = run("experiment = \"levels\"\n[levels]\nn_points = 5");
        assert_eq!(out.table.columns(), ["delta_mhz", "e1", "e2", "e3", "e4"]);
        assert_eq!(out.table.len(), 5);
        let e1 = out.table.column("e1").unwrap();
        let e4 = out.table.column("e4").unwrap();
        assert!(e1.iter().zip(&e4).all(|(a, b)| a < b));
    }

    #[test]
    fn pmax_surface_grid_is_row_major_in_a_x() {
        let out = run("experiment = \"pmax-surface\"\n[pmax-surface]\nn_a_x = 3\nn_rate = 2");
        let a = out.table.column("a_x_mhz").unwrap();
        assert_eq!(out.table.len(), 6);
        assert_eq!(a[0], a[1]);
        assert!(a[2] > a[1]);
    }

    #[test]
    fn totals_single_row() {
        let out = run("experiment = \"totals\"");
        let nv = out.table.column("nv_per_nanodiamond").unwrap()[0];
        assert!((nv - 643.0).abs() < 1.0, "{nv}");
    }

    #[test]
    fn rotation_margin_falls_with_speed() {
        let out = run("experiment = \"rotation\"\n[rotation]\ndurations = [0.1, 1.0]");
        let m = out.table.column("margin").unwrap();
        assert!((m[1] / m[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn validate_secular_column_names() {
        let out = run("experiment = \"validate-secular\"\n[validate-secular]\nn_points = 11");
        assert_eq!(out.table.columns(), ["time_us", "p0_b0.36", "p0_b0.54"]);
    }

    #[test]
    fn short_cycle_run() {
        let out = run("experiment = \"cycle\"\n[cycle]\nn_cycles = 2");
        let p = out.table.column("polarization").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], 0.0);
        assert!(p[1] > 0.3 && p[2] > p[1]);
    }
}
