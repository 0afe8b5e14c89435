use nvhp_core::cycles::NuclearSpinRecord;
use nvhp_core::cycles::{run_cycles_single, CycleConfig};
use nvhp_core::dressed::{h_trans, hartmann_hahn_detunings, Branch, DressedParams, HyperfinePair};
use nvhp_core::ensemble::{
    brownian_schedule, dnp_step, DiffusionConfig, DiffusionModel, EnsembleState, Gate,
};
use nvhp_core::spincore::{
    apply_unitary, c, partial_trace_electron, unitarity_error, ComplexMatrix, DensityMatrix, Ket,
    PiecewiseConstantHamiltonian, C64,
};
use nvhp_core::sweep::{brownian_time, lz_result, SweepSchedule};
use nvhp_core::units::TWO_PI;
use proptest::prelude::*;

fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), dim * dim).prop_map(move |v| {
        let a = ComplexMatrix::from_fn(dim, |i, j| {
            let (x, y) = v[i * dim + j];
            c(x, y)
        });
        (&a + &a.dagger()).scale(0.5)
    })
}

fn ket(dim: usize) -> impl Strategy<Value = Ket> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("non-zero", |v| {
            v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3)
        })
        .prop_map(|v| {
            let e: Vec<C64> = v.iter().map(|&(a, b)| c(a, b)).collect();
            Ket::from_slice(&e).normalized()
        })
}

fn mixed_state(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec((0.0f64..1.0, ket(dim)), 1..4).prop_map(|parts| {
        let states: Vec<(f64, DensityMatrix)> = parts
            .into_iter()
            .map(|(w, k)| (w + 0.05, DensityMatrix::pure(&k)))
            .collect();
        let refs: Vec<(f64, &DensityMatrix)> = states.iter().map(|(w, s)| (*w, s)).collect();
        DensityMatrix::mixture(&refs).unwrap()
    })
}

/// Independent oracle: `exp(−i2πHt)` by scaling and squaring of a Taylor series.
fn expm_taylor(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let a = h.scale_c(c(0.0, -TWO_PI * t));
    let norm = a.max_norm() * a.dim() as f64;
    let mut squarings = 0;
    let mut s = 1.0;
    while norm * s > 0.5 {
        s *= 0.5;
        squarings += 1;
    }
    let a = a.scale(s);
    let mut term = ComplexMatrix::identity(a.dim());
    let mut sum = term.clone();
    for k in 1..30 {
        term = (&term * &a).scale(1.0 / k as f64);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagator_matches_series_oracle(h in hermitian(4), t in 0.0f64..1.0) {
        let u = h.propagator(t);
        let oracle = expm_taylor(&h, t);
        prop_assert!((&u - &oracle).max_norm() < 1e-9);
    }

    #[test]
    fn segment_products_are_unitary(
        hs in prop::collection::vec((hermitian(4), 0.001f64..0.3), 1..40)
    ) {
        let mut p = PiecewiseConstantHamiltonian::new(4);
        for (h, dt) in &hs {
            p.push(*dt, h.clone()).unwrap();
        }
        prop_assert!(unitarity_error(&p.unitary()) < 1e-10);
    }

    #[test]
    fn unitary_evolution_keeps_trace_and_positivity(
        h in hermitian(4), t in 0.0f64..2.0, rho in mixed_state(4)
    ) {
        let out = apply_unitary(&h.propagator(t), &rho);
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
        prop_assert!(out.trace().im.abs() < 1e-10);
        prop_assert!(out.min_eigenvalue() > -1e-10);
        prop_assert!(out.matrix().is_hermitian(1e-10));
    }

    #[test]
    fn kron_mixed_product(a in hermitian(2), b in hermitian(2), x in hermitian(2), y in hermitian(2)) {
        let lhs = &a.kron(&b) * &x.kron(&y);
        let rhs = (&a * &x).kron(&(&b * &y));
        prop_assert!((&lhs - &rhs).max_norm() < 1e-10);
    }

    #[test]
    fn partial_trace_of_product_state(e in mixed_state(2), n in mixed_state(2)) {
        let joint = e.kron(&n);
        let back = partial_trace_electron(&joint, 2, 2).unwrap();
        prop_assert!((back.matrix() - n.matrix()).max_norm() < 1e-12);
    }

    #[test]
    fn brownian_time_scaling(d in 1.0f64..200.0, eta in 1e-4f64..1e-1, temp in 200.0f64..400.0) {
        let base = brownian_time(d, eta, temp).unwrap();
        prop_assert!((brownian_time(2.0 * d, eta, temp).unwrap() / base - 8.0).abs() < 1e-9);
        prop_assert!((brownian_time(d, 3.0 * eta, temp).unwrap() / base - 3.0).abs() < 1e-9);
    }

    #[test]
    fn hartmann_hahn_closure(omega in 0.1f64..5.0, extra in 0.01f64..5.0) {
        let gamma = omega + extra;
        let (lo, hi) = hartmann_hahn_detunings(gamma, omega).unwrap();
        prop_assert!((lo + hi).abs() < 1e-12);
        let w = (hi * hi + omega * omega / 4.0).sqrt();
        prop_assert!((2.0 * w - gamma).abs() < 1e-10 * gamma);
    }

    #[test]
    fn lz_fields_consistent(mu in 0.0f64..5.0) {
        let r = lz_result(mu).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_lz));
        prop_assert!((r.p_max - 4.0 * r.p_lz * (1.0 - r.p_lz)).abs() < 1e-14);
        prop_assert!((r.p_avg - r.p_max / 2.0).abs() < 1e-15);
        prop_assert!(r.p_max <= 1.0 + 1e-15);
    }

    #[test]
    fn transfer_spectrum_even_in_detuning(delta in 0.0f64..20.0, ax in 0.0f64..1.0, om in 1.0f64..4.0) {
        let hf = HyperfinePair::new(ax, 0.0).unwrap();
        let dp = DressedParams::new(om, delta, 3.854, Branch::PositiveD).unwrap();
        let a = h_trans(&dp, &hf).eigenvalues_hermitian().unwrap();
        let b = h_trans(&dp.with_delta(-delta), &hf).eigenvalues_hermitian().unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dnp_step_stays_bounded(
        p in prop::collection::vec(-1.0f64..=1.0, 1..20),
        r in 0.0f64..=0.5,
        eta in -1.0f64..=1.0,
    ) {
        let mut s = EnsembleState::unpolarized(p.len());
        s.p = p.clone();
        let rates = vec![r; p.len()];
        for _ in 0..50 {
            dnp_step(&mut s, &rates, eta);
        }
        prop_assert!(s.p.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn diffusion_conserves_total(
        pos in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 2..12),
        p0 in prop::collection::vec(-1.0f64..=1.0, 12),
        t in 1.0f64..1e6,
    ) {
        let hf = HyperfinePair::new(0.0, 0.0).unwrap();
        let spins: Vec<_> = pos
            .iter()
            .enumerate()
            .map(|(k, &(x, y, z))| NuclearSpinRecord::new(format!("n{k}"), hf).at([x + 10.0 * k as f64, y, z]))
            .collect();
        let mut m = DiffusionModel::new(&spins, &DiffusionConfig::default(), 10.705).unwrap();
        let mut p: Vec<f64> = p0[..spins.len()].to_vec();
        let before: f64 = p.iter().sum();
        m.evolve(&mut p, Gate::Open, t);
        let after: f64 = p.iter().sum();
        prop_assert!((before - after).abs() < 1e-12);
    }
}

#[test]
fn replay_is_deterministic() {
    let a = brownian_schedule(205.0, 1e5, 42).unwrap();
    let b = brownian_schedule(205.0, 1e5, 42).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, brownian_schedule(205.0, 1e5, 43).unwrap());

    let hf = HyperfinePair::new(0.6, 0.64).unwrap();
    let dp = DressedParams::new(3.0, 0.0, 3.854, Branch::PositiveD).unwrap();
    let cfg = CycleConfig::new(3, SweepSchedule::symmetric(6.0, 10.0, 1e-3).unwrap(), dp);
    assert_eq!(
        run_cycles_single(&cfg, hf).unwrap(),
        run_cycles_single(&cfg, hf).unwrap()
    );
}
