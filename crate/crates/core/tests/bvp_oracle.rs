//! The Newton boundary-value solver as an independent check of the
//! fixed-point solution.

mod common;

use common::{grid_for, reference, reference_outflow, solve};
use radstat_core::bvp::{compare_solutions, solve_bvp, BvpError, NewtonControl};
use radstat_core::grid::SampledField;
use radstat_core::model::{build_parameters, RawParameters};

#[test]
fn impermeable_regime_is_gated() {
    let mut raw = RawParameters::reference();
    raw.u_minus = 0.0;
    raw.eta_minus = None;
    let p = build_parameters(&raw).unwrap();
    let err = solve_bvp(&p, grid_for(&p, 100.0, 256), None, NewtonControl::default()).unwrap_err();
    assert_eq!(err, BvpError::Impermeable);
}

#[test]
fn warm_start_converges_in_few_steps() {
    for p in [reference(), reference_outflow()] {
        let fp = solve(&p, 200.0, 2048, 1e-12);
        let control = NewtonControl { extrapolate: false, ..NewtonControl::default() };
        let b = solve_bvp(&p, fp.state.grid().clone(), Some(&fp), control).unwrap();
        assert!(b.newton_steps <= 3, "{} steps", b.newton_steps);
        assert!(b.residual <= 1e-10, "residual {:e}", b.residual);
    }
}

#[test]
fn cold_start_agrees_with_fixed_point() {
    for p in [reference(), reference_outflow()] {
        let fp = solve(&p, 200.0, 2048, 1e-12);
        let b = solve_bvp(&p, fp.state.grid().clone(), None, NewtonControl::default()).unwrap();
        assert!(b.residual <= 1e-10);
        let c = compare_solutions(&fp, &b.solution, p.nf() - 2.0).unwrap();
        assert!(c.weighted() <= 1e-6, "{c:?}");
        assert!(c.alpha_relative <= 1e-8, "{c:?}");
    }
}

/// Without extrapolation the box scheme is second order, so doubling the
/// grid must shrink the discrepancy by at least half.
#[test]
fn discrepancy_shrinks_under_refinement() {
    let p = reference();
    let control = NewtonControl { extrapolate: false, ..NewtonControl::default() };
    let gap = |n_nodes| {
        let fp = solve(&p, 200.0, n_nodes, 1e-13);
        let b = solve_bvp(&p, fp.state.grid().clone(), Some(&fp), control).unwrap();
        compare_solutions(&fp, &b.solution, 1.0).unwrap().weighted()
    };
    let (coarse, fine) = (gap(1024), gap(2048));
    assert!(fine <= 0.5 * coarse, "{coarse:e} → {fine:e}");
}

#[test]
fn comparison_of_known_differences() {
    let a = solve(&reference(), 100.0, 512, 1e-12);
    let same = compare_solutions(&a, &a, 1.0).unwrap();
    assert_eq!(same.weighted(), 0.0);
    assert_eq!(same.eta_sup, 0.0);
    assert_eq!(same.alpha_relative, 0.0);

    let l = 1.0;
    let delta = 1e-7;
    let mut b = a.clone();
    let grid = a.state.grid().clone();
    let shifted: Vec<f64> = grid.nodes().iter().zip(a.state.eta.values()).map(|(r, v)| v + delta * r.powf(-l)).collect();
    b.state.eta = SampledField::new(grid, shifted, 1.0).unwrap();
    let c = compare_solutions(&a, &b, l).unwrap();
    assert!((c.eta_weighted - delta).abs() <= 1e-12 * delta.max(1.0), "{c:?}");
    assert_eq!(c.chi_weighted, 0.0);

    let other = solve(&reference(), 100.0, 600, 1e-12);
    assert!(compare_solutions(&a, &other, l).is_err());
}
