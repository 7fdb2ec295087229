//! Helpers shared by the integration tests: an adaptive Gauss–Kronrod rule that
//! knows nothing about the grids or closures of the library, plus the
//! reference configurations.

#![allow(dead_code)]

use std::sync::Arc;

use radstat_core::fixedpoint::{default_grid, solve_stationary, Control, StationarySolution};
use radstat_core::grid::RadialGrid;
use radstat_core::model::{build_parameters, Parameters, RawParameters};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Kronrod estimate and its difference from the embedded Gauss rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// `∫_a^b f` by globally adaptive Gauss–Kronrod: the panel with the largest
/// error estimate is bisected until the summed estimate drops below
/// `rel·|total|` (or a fixed panel budget is spent).
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let pieces = 16;
    let h = (b - a) / pieces as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..pieces)
        .map(|k| {
            let lo = a + h * k as f64;
            let hi = if k + 1 == pieces { b } else { lo + h };
            let (v, e) = gk15(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    for _ in 0..4000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel * total.abs() {
            break;
        }
        let worst = (0..panels.len()).max_by(|&i, &j| panels[i].3.total_cmp(&panels[j].3)).unwrap();
        let (lo, hi, _, _) = panels[worst];
        let m = 0.5 * (lo + hi);
        let (lv, le) = gk15(f, lo, m);
        let (rv, re) = gk15(f, m, hi);
        panels[worst] = (lo, m, lv, le);
        panels.push((m, hi, rv, re));
    }
    panels.iter().map(|p| p.2).sum()
}

/// `∫_r^∞ f` through `s = r/x`, `x ∈ (0, 1]`, for integrands decaying
/// faster than `1/s`.
pub fn adaptive_to_infinity(f: &dyn Fn(f64) -> f64, r: f64, rel: f64) -> f64 {
    let g = |x: f64| if x <= 0.0 { 0.0 } else { f(r / x) * r / (x * x) };
    adaptive(&g, 0.0, 1.0, rel)
}

pub fn reference_raw() -> RawParameters {
    RawParameters::reference()
}

pub fn reference() -> Parameters {
    build_parameters(&RawParameters::reference()).unwrap()
}

pub fn reference_outflow() -> Parameters {
    let mut raw = RawParameters::reference();
    raw.u_minus = -1e-3;
    raw.eta_minus = None;
    build_parameters(&raw).unwrap()
}

/// Reference data in dimension `n`.
pub fn in_dimension(p: &Parameters, n: u32) -> Parameters {
    let mut raw = p.to_raw();
    raw.n = i64::from(n);
    build_parameters(&raw).unwrap()
}

pub fn grid_for(p: &Parameters, r_max: f64, n_nodes: usize) -> Arc<RadialGrid> {
    Arc::new(default_grid(p, r_max, n_nodes).unwrap())
}

pub fn solve(p: &Parameters, r_max: f64, n_nodes: usize, tol: f64) -> StationarySolution {
    let sol = solve_stationary(p, grid_for(p, r_max, n_nodes), Control { tol, max_iter: 200 }).unwrap();
    assert!(sol.converged, "solver did not converge: {:?}", sol.termination);
    sol
}

/// Index of the node closest to `r`.
pub fn nearest(grid: &RadialGrid, r: f64) -> usize {
    let nodes = grid.nodes();
    (0..nodes.len()).min_by(|&i, &j| (nodes[i] - r).abs().total_cmp(&(nodes[j] - r).abs())).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
