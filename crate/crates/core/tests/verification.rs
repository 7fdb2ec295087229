//! Residual checks, decay fits, bound checks and sweeps on solved profiles.

mod common;

use std::sync::Arc;

use common::{grid_for, in_dimension, reference, reference_outflow, solve};
use proptest::prelude::*;
use radstat_core::analysis::{
    check_kernel_lemma, check_theorem_bounds, fit_decay_exponent, pointwise_hypothesis, pointwise_kernel_bound,
    residual_report, sweep, AnalysisError, SweepAxis, SweepSpec,
};
use radstat_core::fixedpoint::{impermeable_solution, reconstruct_physical, Control, PhysicalProfile};
use radstat_core::grid::{build_layer_grid, SampledField};
use radstat_core::model::{build_parameters, derive_constants, FlowRegime, RawParameters};

fn impermeable(n: u32, chi: f64) -> radstat_core::model::Parameters {
    let mut raw = RawParameters::reference();
    raw.n = i64::from(n);
    raw.u_minus = 0.0;
    raw.eta_minus = None;
    raw.chi_minus = chi;
    build_parameters(&raw).unwrap()
}

fn perturbed(prof: &PhysicalProfile, field: &str, i: usize, by: f64) -> PhysicalProfile {
    let mut out = prof.clone();
    let target = match field {
        "rho" => &mut out.rho,
        "chi" => &mut out.chi,
        _ => &mut out.u,
    };
    let mut values = target.values().to_vec();
    values[i] *= 1.0 + by;
    *target = SampledField::new(target.grid().clone(), values, 0.0).unwrap();
    out
}

#[test]
fn converged_profiles_pass_and_perturbed_ones_fail() {
    for p in [reference(), reference_outflow()] {
        let sol = solve(&p, 200.0, 4096, 1e-12);
        let prof = reconstruct_physical(&sol).unwrap();
        let ok = residual_report(&prof, &p);
        assert!(ok.is_solution, "{ok:?}");
        let mid = prof.grid().len() / 2;
        for field in ["rho", "chi", "u"] {
            let bad = residual_report(&perturbed(&prof, field, mid, 1e-2), &p);
            assert!(!bad.is_solution, "perturbing {field} went unnoticed: {bad:?}");
        }
    }
}

#[test]
fn closed_form_is_an_exact_solution() {
    for n in [3u32, 4, 5] {
        let p = impermeable(n, 0.2);
        let prof = impermeable_solution(&p, grid_for(&p, 200.0, 2048)).unwrap();
        let rep = residual_report(&prof, &p);
        assert!(rep.is_solution, "{rep:?}");
        assert!(rep.momentum.sup <= 1e-12 && rep.mass.sup == 0.0, "{rep:?}");
        let bounds = check_theorem_bounds(&prof, &p);
        // ‖χ‖ = χ_- exactly, and the estimate is stated against |χ_-|.
        assert!((bounds.chi_constant - 1.0).abs() <= 1e-14, "{bounds:?}");
        assert!(bounds.velocity_band.is_none() && bounds.report.holds);
    }
}

#[test]
fn residual_shrinks_under_refinement() {
    let p = reference();
    let measure = |n_nodes| {
        let prof = reconstruct_physical(&solve(&p, 200.0, n_nodes, 1e-12)).unwrap();
        residual_report(&prof, &p).differential()
    };
    let (a, b) = (measure(2048), measure(4096));
    assert!(b * 4.0 <= a, "{a:e} → {b:e}");
}

#[test]
fn fitted_exponents_match_the_decay_rates() {
    for base in [reference(), reference_outflow()] {
        for n in [3u32, 4] {
            let p = in_dimension(&base, n);
            let prof = reconstruct_physical(&solve(&p, 200.0, 2048, 1e-12)).unwrap();
            let nf = f64::from(n);
            for (name, f, expect) in [("eta", &prof.eta, 2.0 - nf), ("chi", &prof.chi, 2.0 - nf), ("u", &prof.u, 1.0 - nf)] {
                let fit = fit_decay_exponent(f, 50.0, 150.0).unwrap();
                assert!((fit.exponent - expect).abs() <= 0.15, "n={n} {name}: {fit:?}");
                assert!(fit.r_squared > 0.99);
            }
        }
    }
}

#[test]
fn fit_rejects_sign_changes_and_empty_windows() {
    let grid = Arc::new(build_layer_grid(3, 200.0, 1024, 1e-2).unwrap());
    let wave = SampledField::from_fn(grid.clone(), 1.0, |r| r.sin() / r).unwrap();
    assert_eq!(fit_decay_exponent(&wave, 50.0, 150.0).unwrap_err(), AnalysisError::Oscillatory);
    let decay = SampledField::from_fn(grid, 1.0, |r| 1.0 / r).unwrap();
    assert!(fit_decay_exponent(&decay, 150.0, 50.0).is_err());
    assert!(fit_decay_exponent(&decay, 100.0, 100.01).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Whenever the mass flux satisfies the hypothesis, the kernel ratio stays
    /// below one at every node.
    #[test]
    fn pointwise_kernel_bound_under_its_hypothesis(
        n in 3u32..=6,
        omega in 0.05f64..2.0,
        mu in 0.05f64..3.0,
        frac in 0.01f64..1.0,
    ) {
        let nf = f64::from(n);
        let eps = frac * nf * omega / ((nf - 2.0) * mu);
        prop_assume!(pointwise_hypothesis(n, omega, mu, eps));
        let grid = build_layer_grid(n, 100.0, 1024, (mu * eps / (nf * omega)).clamp(1e-4, 0.1)).unwrap();
        let rep = pointwise_kernel_bound(&grid, omega, mu, eps);
        prop_assert!(rep.holds, "{:?}", rep);
    }
}

#[test]
fn kernel_constants_are_uniform() {
    for p in [reference(), reference_outflow()] {
        let d = derive_constants(&p);
        let grid = grid_for(&p, 200.0, 2048);
        let rep = check_kernel_lemma(&p, &d, &grid).unwrap();
        assert!(rep.integral.holds, "{rep:?}");
        assert_eq!(rep.samples.len(), 18);
        match rep.regime {
            FlowRegime::Inflow => {
                assert!(rep.hypothesis_holds);
                assert!(rep.pointwise.unwrap().holds);
            }
            _ => assert!(rep.pointwise.is_none()),
        }
    }
}

#[test]
fn sweeps_cover_all_regimes() {
    let spec = SweepSpec {
        axis: SweepAxis::BoundaryVelocity,
        values: vec![1e-3, 0.0, -1e-3],
        r_max: 100.0,
        n_nodes: 1024,
        control: Control { tol: 1e-12, max_iter: 100 },
        probe_offset: 0.5,
    };
    let table = sweep(&spec, &reference()).unwrap();
    assert_eq!(table.succeeded(), 3);
    let regimes: Vec<_> = table.rows.iter().map(|r| r.regime.unwrap()).collect();
    assert_eq!(regimes, [FlowRegime::Outflow, FlowRegime::Impermeable, FlowRegime::Inflow]);
    for row in &table.rows {
        assert!(row.error.is_none() && row.residual <= 5e-3, "{row:?}");
    }
    // At u_- = 0 the density is the pressure-equilibrium profile up to
    // interpolation between nodes; with flow a layer appears.
    assert!(table.rows[1].layer_amplitude <= 1e-12);
    assert!(table.rows[0].layer_amplitude > 1e-9 && table.rows[2].layer_amplitude > 1e-9);

    let empty = SweepSpec { values: vec![], ..spec };
    assert_eq!(sweep(&empty, &reference()).unwrap_err(), AnalysisError::EmptyAxis);
}
