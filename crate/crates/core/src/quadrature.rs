//! Exponential kernels and the quadrature operators built on them.
//!
//! Both kernels depend on `r` and `s` only through `t = r^n`, so the
//! kernel-weighted integrals are evaluated in that variable:
//!
//! ```text
//! ∫ G(r,s) f(s) ds = ∫ exp(−a(T − t)) ĝ(t) dt,    ĝ(t) = f(s) / (n s^(n−1))
//! ```
//!
//! On every panel `ĝ` is replaced by the cubic through four neighbouring
//! nodes and the product with the exponential is integrated exactly
//! (product integration). The kernel therefore never has to be resolved by
//! the mesh, the rule is fourth order in the node spacing, and it is exact
//! whenever `f ∝ s^(n−1)`. Integrals over all nodes are one O(N) sweep,
//! using `G(r_{i+1}, s) = G(r_{i+1}, r_i)·G(r_i, s)`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::{GridError, RadialGrid, SampledField};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub enum QuadError {
    /// Kernel evaluated outside its triangle (`s > r` for `G`, `s < r` for `G̃`).
    Domain { r: f64, s: f64 },
    TailUnavailable,
    NonIntegrable { exponent: f64 },
    BadCoefficient { value: f64 },
    Grid(GridError),
}

impl fmt::Display for QuadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadError::Domain { r, s } => write!(f, "kernel domain error at r = {r}, s = {s}"),
            QuadError::TailUnavailable => write!(f, "tail closure unavailable"),
            QuadError::NonIntegrable { exponent } => {
                write!(f, "non-integrable algebraic tail (combined decay exponent {exponent} ≤ 1)")
            }
            QuadError::BadCoefficient { value } => write!(f, "decay coefficient must be positive (got {value})"),
            QuadError::Grid(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for QuadError {}

impl From<GridError> for QuadError {
    fn from(e: GridError) -> Self {
        QuadError::Grid(e)
    }
}

/// `G(r, s) = exp(−a(rⁿ − sⁿ))` for `1 ≤ s ≤ r`.
pub fn kernel_g(r: f64, s: f64, a: f64, n: u32) -> Result<f64, QuadError> {
    if s > r {
        return Err(QuadError::Domain { r, s });
    }
    Ok(math::exp_flushed(-a * math::pow_diff(r, s, n)))
}

/// `G̃(r, s) = exp(−b(sⁿ − rⁿ))` for `1 ≤ r ≤ s`.
pub fn kernel_g_tilde(r: f64, s: f64, b: f64, n: u32) -> Result<f64, QuadError> {
    if s < r {
        return Err(QuadError::Domain { r, s });
    }
    Ok(math::exp_flushed(-b * math::pow_diff(s, r, n)))
}

/// `m_j(x) = ∫₀¹ e^(−xu) u^j du` for `j = 0..4`.
pub fn exp_moments(x: f64) -> [f64; 4] {
    let mut m = [0.0; 4];
    if x <= 1.0 {
        for (j, mj) in m.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for k in 0..40 {
                let add = term / (k + j + 1) as f64;
                sum += add;
                if math::abs(add) <= 1e-18 * math::abs(sum) {
                    break;
                }
                term *= -x / (k + 1) as f64;
            }
            *mj = sum;
        }
    } else {
        let e = math::exp_flushed(-x);
        m[0] = -math::expm1(-x) / x;
        for j in 1..4 {
            m[j] = (j as f64 * m[j - 1] - e) / x;
        }
    }
    m
}

/// `∫₀¹ e^(−xu) L_k(u) du` for the Lagrange basis on the offsets `u`.
pub fn panel_weights(u: [f64; 4], moments: &[f64; 4]) -> [f64; 4] {
    let mut w = [0.0; 4];
    for k in 0..4 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        let mut deg = 0;
        for (j, &uj) in u.iter().enumerate() {
            if j == k {
                continue;
            }
            for i in (0..=deg).rev() {
                poly[i + 1] += poly[i];
                poly[i] *= -uj;
            }
            deg += 1;
            denom *= u[k] - uj;
        }
        w[k] = (0..4).map(|j| poly[j] * moments[j]).sum::<f64>() / denom;
    }
    w
}

/// First node of the four-point stencil used on panel `[i, i+1]`.
#[inline]
pub(crate) fn stencil_start(i: usize, len: usize) -> usize {
    i.saturating_sub(1).min(len - 4)
}

/// Positions `x_k − x_i` of the stencil nodes relative to the panel's left
/// node, accumulated from the step array so no large values are subtracted.
fn stencil_offsets(steps: &[f64], i: usize, k0: usize) -> [f64; 4] {
    let mut pos = [0.0; 4];
    for (slot, k) in (k0..k0 + 4).enumerate() {
        pos[slot] = if k >= i {
            steps[i..k].iter().sum()
        } else {
            -steps[k..i].iter().sum::<f64>()
        };
    }
    pos
}

/// `I_i = ∫_{t_0}^{t_i} exp(−a(t_i − t)) ĝ(t) dt` at every node, for `ĝ`
/// sampled at the nodes' `t = rⁿ`.
pub fn forward_kernel_sweep(grid: &RadialGrid, g_hat: &[f64], a: f64) -> Vec<f64> {
    let steps = grid.power_steps();
    let len = grid.len();
    let mut out = vec![0.0; len];
    for i in 0..len - 1 {
        let delta = steps[i];
        let k0 = stencil_start(i, len);
        let pos = stencil_offsets(steps, i, k0);
        let u = pos.map(|p| (delta - p) / delta);
        let x = a * delta;
        let w = panel_weights(u, &exp_moments(x));
        let local: f64 = (0..4).map(|j| w[j] * g_hat[k0 + j]).sum::<f64>() * delta;
        out[i + 1] = math::exp_flushed(-x) * out[i] + local;
    }
    out
}

/// `J_i = ∫_{t_i}^{∞} exp(−b(t − t_i)) ĝ(t) dt` at every node; `tail` is the
/// contribution from beyond the last node.
pub fn backward_kernel_sweep(grid: &RadialGrid, g_hat: &[f64], b: f64, tail: f64) -> Vec<f64> {
    let steps = grid.power_steps();
    let len = grid.len();
    let mut out = vec![0.0; len];
    out[len - 1] = tail;
    for i in (0..len - 1).rev() {
        let delta = steps[i];
        let k0 = stencil_start(i, len);
        let pos = stencil_offsets(steps, i, k0);
        let u = pos.map(|p| p / delta);
        let x = b * delta;
        let w = panel_weights(u, &exp_moments(x));
        let local: f64 = (0..4).map(|j| w[j] * g_hat[k0 + j]).sum::<f64>() * delta;
        out[i] = math::exp_flushed(-x) * out[i + 1] + local;
    }
    out
}

/// `∫_T^∞ exp(−b(t − T)) ĝ(T)(t/T)^(−q) dt`.
pub fn exponential_power_tail(g_at_t: f64, t: f64, b: f64, q: f64) -> f64 {
    let bt = b * t;
    if bt >= 50.0 {
        let y = 1.0 / bt;
        g_at_t / b * (1.0 - q * y + q * (q + 1.0) * y * y - q * (q + 1.0) * (q + 2.0) * y * y * y)
    } else {
        // ∫₀^∞ e^(−z)(1 + z/(bT))^(−q) dz by Simpson on [0, 60].
        let m = 1200;
        let h = 60.0 / m as f64;
        let f = |z: f64| math::exp(-z) * math::powf(1.0 + z / bt, -q);
        let mut s = f(0.0) + f(60.0);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        g_at_t / b * s * h / 3.0
    }
}

fn check_coefficient(a: f64) -> Result<(), QuadError> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(QuadError::BadCoefficient { value: a })
    }
}

/// `ĝ = f / (n s^(n−1))` at every node.
pub(crate) fn to_power_variable(grid: &RadialGrid, values: &[f64]) -> Vec<f64> {
    let n = grid.dim();
    grid.nodes()
        .iter()
        .zip(values)
        .map(|(&r, &f)| f / (f64::from(n) * math::powi(r, n as i32 - 1)))
        .collect()
}

/// `∫₁^{r_i} G(r_i, s) f(s) ds` at every node.
pub fn integrate_kernel_from_boundary_all(f: &SampledField, a: f64) -> Result<Vec<f64>, QuadError> {
    check_coefficient(a)?;
    let g_hat = to_power_variable(f.grid(), f.values());
    Ok(forward_kernel_sweep(f.grid(), &g_hat, a))
}

/// `∫₁^r G(r, s) f(s) ds` for a grid node `r`.
pub fn integrate_kernel_from_boundary(f: &SampledField, r: f64, a: f64) -> Result<f64, QuadError> {
    let i = f.grid().node_index(r)?;
    Ok(integrate_kernel_from_boundary_all(f, a)?[i])
}

/// Contribution of `s > R_max` to `∫_r^∞ G̃(r,s) f(s) ds` at `r = R_max`,
/// using `f`'s algebraic tail.
pub fn kernel_tail(f_outer: f64, r_max: f64, tail_exponent: f64, b: f64, n: u32) -> f64 {
    let nf = f64::from(n);
    let t = math::powi(r_max, n as i32);
    let g_hat = f_outer / (nf * math::powi(r_max, n as i32 - 1));
    let q = (tail_exponent + nf - 1.0) / nf;
    exponential_power_tail(g_hat, t, b, q)
}

/// `∫_{r_i}^∞ G̃(r_i, s) f(s) ds` at every node.
pub fn integrate_kernel_to_infinity_all(f: &SampledField, b: f64) -> Result<Vec<f64>, QuadError> {
    check_coefficient(b)?;
    if !f.tail_valid {
        return Err(QuadError::TailUnavailable);
    }
    let grid = f.grid();
    let g_hat = to_power_variable(grid, f.values());
    let tail = kernel_tail(f.at_outer(), grid.r_max(), f.tail_exponent, b, grid.dim());
    Ok(backward_kernel_sweep(grid, &g_hat, b, tail))
}

/// `∫_r^∞ G̃(r, s) f(s) ds` for a grid node `r`.
pub fn integrate_kernel_to_infinity(f: &SampledField, r: f64, b: f64) -> Result<f64, QuadError> {
    let i = f.grid().node_index(r)?;
    Ok(integrate_kernel_to_infinity_all(f, b)?[i])
}

/// `∫_R^∞ v·(s/R)^(−p) ds = v·R/(p − 1)`.
pub fn power_tail(value: f64, r_max: f64, exponent: f64) -> Result<f64, QuadError> {
    if !(exponent > 1.0) {
        return Err(QuadError::NonIntegrable { exponent });
    }
    Ok(value * r_max / (exponent - 1.0))
}

/// Backward cumulative integrals `∫_{r_i}^{R_max} h(s) ds + tail` of nodal
/// values, with fourth-order panel weights.
pub fn cumulative_from_values(grid: &RadialGrid, values: &[f64], tail: f64) -> Vec<f64> {
    let nodes = grid.nodes();
    let len = nodes.len();
    let plain = [1.0, 0.5, 1.0 / 3.0, 0.25];
    let mut out = vec![0.0; len];
    out[len - 1] = tail;
    for i in (0..len - 1).rev() {
        let h = nodes[i + 1] - nodes[i];
        let k0 = stencil_start(i, len);
        let u = core::array::from_fn(|j| (nodes[k0 + j] - nodes[i]) / h);
        let w = panel_weights(u, &plain);
        let local: f64 = (0..4).map(|j| w[j] * values[k0 + j]).sum::<f64>() * h;
        out[i] = out[i + 1] + local;
    }
    out
}

/// `∫_{r_i}^∞ f(s)·s^(−p) ds` at every node. The result decays with
/// exponent `tail_exponent + p − 1`.
pub fn cumulative_tail_integrals(f: &SampledField, extra_power: f64) -> Result<SampledField, QuadError> {
    if !f.tail_valid {
        return Err(QuadError::TailUnavailable);
    }
    let grid = f.grid();
    let integrand: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(f.values())
        .map(|(&s, &v)| v * math::powf(s, -extra_power))
        .collect();
    let decay = f.tail_exponent + extra_power;
    let tail = power_tail(integrand[integrand.len() - 1], grid.r_max(), decay)?;
    let values = cumulative_from_values(grid, &integrand, tail);
    Ok(SampledField::new(grid.clone(), values, decay - 1.0)?)
}

/// `∫_r^∞ f(s)·s^(−p) ds` at any `r ≥ 1`.
pub fn tail_integral_powerlaw(f: &SampledField, r: f64, extra_power: f64) -> Result<f64, QuadError> {
    let cumulative = cumulative_tail_integrals(f, extra_power)?;
    let grid = f.grid();
    let nodes = grid.nodes();
    if r >= grid.r_max() {
        let v = f.value_at(r) * math::powf(r, -extra_power);
        return power_tail(v, r, f.tail_exponent + extra_power);
    }
    if let Ok(i) = grid.node_index(r) {
        return Ok(cumulative.values()[i]);
    }
    // Partial panel [r, next node] by 4-point Gauss-Legendre on the interpolant.
    let j = nodes.partition_point(|&x| x <= r);
    let (lo, hi) = (r, nodes[j]);
    const X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let partial: f64 = X
        .iter()
        .zip(W)
        .map(|(&x, w)| {
            let s = mid + half * x;
            w * f.value_at(s) * math::powf(s, -extra_power)
        })
        .sum::<f64>()
        * half;
    Ok(partial + cumulative.values()[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_layer_grid;
    use alloc::sync::Arc;

    fn grid(n: u32, nodes: usize, width: f64) -> Arc<RadialGrid> {
        Arc::new(build_layer_grid(n, 200.0, nodes, width).unwrap())
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_g(1.7, 1.7, 5.0, 3).unwrap(), 1.0);
        let v = kernel_g(2.0, 1.0, 1.0, 3).unwrap();
        assert!((v - (-7.0f64).exp()).abs() < 1e-18);
        assert!((v - 9.11882e-4).abs() < 1e-9);
        assert_eq!(kernel_g(2.0, 1.0, 1e6, 3).unwrap(), 0.0);
        assert!(kernel_g(1.0, 2.0, 1.0, 3).is_err());

        assert_eq!(kernel_g_tilde(3.0, 3.0, 1.0, 3).unwrap(), 1.0);
        assert!((kernel_g_tilde(1.0, 2.0, 1.0, 3).unwrap() - (-7.0f64).exp()).abs() < 1e-18);
        assert!(kernel_g_tilde(2.0, 1.0, 1.0, 3).is_err());
        let mut prev = 1.0;
        for k in 1..50 {
            let g = kernel_g_tilde(1.0, 1.0 + 0.02 * k as f64, 2.0, 4).unwrap();
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn kernel_multiplicativity() {
        for &(r, t, s) in &[(3.0, 2.0, 1.0), (1.001, 1.0005, 1.0), (10.0, 9.99, 9.9)] {
            let a = 0.37;
            let lhs = kernel_g(r, s, a, 4).unwrap();
            let rhs = kernel_g(r, t, a, 4).unwrap() * kernel_g(t, s, a, 4).unwrap();
            assert!((lhs.ln() - rhs.ln()).abs() <= 1e-12 * lhs.ln().abs().max(1.0));
        }
    }

    #[test]
    fn moments_agree_across_branches() {
        for &x in &[0.999_999, 1.000_001] {
            let m = exp_moments(x);
            // m0 closed form
            assert!((m[0] - (1.0 - (-x).exp()) / x).abs() < 1e-14);
            // m3 by simple quadrature
            let k = 20000;
            let h = 1.0 / k as f64;
            let mut s = 0.0;
            for i in 0..=k {
                let u = i as f64 * h;
                let wt = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += wt * (-x * u).exp() * u * u * u;
            }
            assert!((m[3] - s * h / 3.0).abs() < 1e-12);
        }
        let big = exp_moments(1e6);
        assert!((big[0] - 1e-6).abs() < 1e-18);
        assert!((big[3] - 6e-24).abs() < 1e-30);
    }

    #[test]
    fn closed_form_identity_on_reference_grid() {
        for n in [3u32, 4, 5] {
            for a in [1e-2, 1.0, 1e2] {
                let g = grid(n, 4096, 1.0 / (f64::from(n) * a));
                let f = SampledField::from_fn(g.clone(), -(f64::from(n) - 1.0), |s| s.powi(n as i32 - 1)).unwrap();
                let all = integrate_kernel_from_boundary_all(&f, a).unwrap();
                for (i, &r) in g.nodes().iter().enumerate() {
                    let exact = -(-a * math::pow_diff(r, 1.0, n)).exp_m1() / (a * f64::from(n));
                    if exact > 0.0 {
                        assert!((all[i] - exact).abs() <= 1e-10 * exact, "n={n} a={a} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn outward_integral_of_growing_power() {
        let n = 3;
        let b = 2.0;
        let g = grid(n, 1024, 0.1);
        let f = SampledField::from_fn(g.clone(), -2.0, |s| s * s).unwrap();
        let all = integrate_kernel_to_infinity_all(&f, b).unwrap();
        for &v in &all {
            assert!((v - 1.0 / (b * 3.0)).abs() < 1e-12);
        }
        let zero = SampledField::zeros(g.clone(), 1.0);
        assert!(integrate_kernel_to_infinity_all(&zero, b).unwrap().iter().all(|&v| v == 0.0));
        let no_tail = SampledField::without_tail(g, alloc::vec![0.0; f.values().len()]).unwrap();
        assert_eq!(integrate_kernel_to_infinity_all(&no_tail, b), Err(QuadError::TailUnavailable));
    }

    #[test]
    fn power_tail_integrals() {
        let n = 3;
        let g = grid(n, 4096, 1e-2);
        let one = SampledField::from_fn(g.clone(), 0.0, |_| 1.0).unwrap();
        for r in [1.0, 1.37, 20.0, 150.0, 400.0] {
            let v = tail_integral_powerlaw(&one, r, 5.0).unwrap();
            let exact = r.powi(-4) / 4.0;
            assert!((v - exact).abs() <= 1e-9 * exact, "r={r}: {v} vs {exact}");
        }
        let zero = SampledField::zeros(g.clone(), 1.0);
        assert_eq!(tail_integral_powerlaw(&zero, 2.0, 3.0).unwrap(), 0.0);
        assert!(matches!(
            tail_integral_powerlaw(&one, 2.0, 1.0),
            Err(QuadError::NonIntegrable { .. })
        ));
    }

    #[test]
    fn cumulative_matches_pointwise() {
        let g = grid(3, 1024, 1e-2);
        let f = SampledField::from_fn(g.clone(), 1.0, |s| (1.0 + 0.3 * (3.0 * s).sin() / s) / s).unwrap();
        let all = cumulative_tail_integrals(&f, 2.0).unwrap();
        for (i, &r) in g.nodes().iter().enumerate().step_by(97) {
            let single = tail_integral_powerlaw(&f, r, 2.0).unwrap();
            assert!((all.values()[i] - single).abs() <= 1e-12 * single.abs().max(1e-300));
        }
    }
}
