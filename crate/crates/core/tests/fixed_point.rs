//! The successive-approximation solver on small data.

mod common;

use common::{grid_for, reference, reference_outflow, solve};
use proptest::prelude::*;
use radstat_core::fixedpoint::{solve_stationary, Control, SolveError};
use radstat_core::model::{build_parameters, FlowRegime, RawParameters};

fn raw(n: u32, u: f64, eta: f64, chi: f64) -> RawParameters {
    let mut raw = RawParameters::reference();
    raw.n = i64::from(n);
    raw.u_minus = u;
    raw.eta_minus = (u > 0.0).then_some(eta);
    raw.chi_minus = chi;
    raw
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Small data in either regime: the increments contract by at least half
    /// at every step after the first and the boundary data are reproduced.
    #[test]
    fn small_data_contracts(
        n in 3u32..=4,
        outflow in any::<bool>(),
        u in 2e-4f64..4e-3,
        eta in -2e-3f64..2e-3,
        chi in -2e-3f64..2e-3,
    ) {
        let u = if outflow { -u } else { u };
        let p = build_parameters(&raw(n, u, eta, chi)).unwrap();
        let sol = solve_stationary(&p, grid_for(&p, 100.0, 1024), Control { tol: 1e-12, max_iter: 60 }).unwrap();
        prop_assert!(sol.converged, "{:?}", sol.termination);
        for (k, &q) in sol.contraction_ratios.iter().enumerate().skip(1) {
            prop_assert!(q <= 0.5, "ratio {} at step {}", q, k + 1);
        }
        let s = &sol.state;
        prop_assert!((s.chi.at_boundary() - chi).abs() <= 1e-14);
        if !outflow {
            prop_assert!((s.eta.at_boundary() - eta).abs() <= 1e-14);
        }
        prop_assert_eq!(s.epsilon.signum(), u.signum());
        prop_assert!(sol.fixed_point_residual <= 1e-11, "residual {}", sol.fixed_point_residual);
    }
}

#[test]
fn impermeable_data_is_not_iterated() {
    let p = build_parameters(&raw(3, 0.0, 0.0, 1e-3)).unwrap();
    let grid = grid_for(&p, 100.0, 512);
    assert_eq!(solve_stationary(&p, grid, Control::default()).unwrap_err(), SolveError::Impermeable);
}

#[test]
fn bad_control_is_rejected() {
    let p = reference();
    let grid = grid_for(&p, 100.0, 512);
    assert!(matches!(solve_stationary(&p, grid.clone(), Control { tol: 0.0, max_iter: 10 }), Err(SolveError::BadControl(_))));
    assert!(matches!(solve_stationary(&p, grid, Control { tol: 1e-10, max_iter: 0 }), Err(SolveError::BadControl(_))));
}

#[test]
fn iteration_budget_is_reported() {
    let p = reference();
    let sol = solve_stationary(&p, grid_for(&p, 100.0, 512), Control { tol: 1e-14, max_iter: 2 }).unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.iterations, 2);
}

/// Raising the wall temperature raises the temperature deviation at every
/// radius; raising the wall specific volume raises it next to the wall.
#[test]
fn response_is_monotone_in_the_data() {
    for base in [reference(), reference_outflow()] {
        let solve_with = |eta: f64, chi: f64| {
            let p = base.with_boundary(base.u_minus, eta, chi).unwrap();
            solve(&p, 100.0, 1024, 1e-12)
        };
        let lo = solve_with(base.eta_minus, 1e-3);
        let hi = solve_with(base.eta_minus, 2e-3);
        for (a, b) in lo.state.chi.values().iter().zip(hi.state.chi.values()) {
            assert!(b > a, "χ not monotone in χ_-");
        }
        if lo.regime == FlowRegime::Inflow {
            let thin = solve_with(1e-3, 1e-3);
            let thick = solve_with(3e-3, 1e-3);
            let nodes = thin.state.grid().nodes();
            let near = nodes.partition_point(|&r| r < 1.001);
            let pairs = thick.state.eta.values().iter().zip(thin.state.eta.values());
            for ((&a, &b), &r) in pairs.zip(nodes).take(near) {
                assert!(a > b, "η not monotone at r={r}");
            }
        }
    }
}

/// Halving all boundary data roughly halves the solution (the response is
/// linear to leading order).
#[test]
fn response_is_nearly_linear() {
    let p = reference();
    let half = p.with_boundary(p.u_minus / 2.0, p.eta_minus / 2.0, p.chi_minus / 2.0).unwrap();
    let a = solve(&p, 100.0, 1024, 1e-13);
    let b = solve(&half, 100.0, 1024, 1e-13);
    let scale = a.state.chi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.state.chi.values().iter().zip(b.state.chi.values()) {
        assert!((x - 2.0 * y).abs() <= 0.05 * scale);
    }
}
