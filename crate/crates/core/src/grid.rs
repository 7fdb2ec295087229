//! Graded radial mesh on `[1, R_max]` and fields sampled on it.
//!
//! Nodes are the images of a uniform parameter `ξ ∈ [0, 1]` under the
//! inverse of the monotone map
//!
//! ```text
//! q(r) = c_log · ln r + c_layer · (1 − exp(−(r − 1)/L)),   L = 2·layer_width
//! ```
//!
//! The first term gives log spacing in the far field, the second packs a
//! fixed fraction of the nodes into the kernel layer next to the sphere.
//! The map is smooth, so neighbouring spacings vary slowly everywhere.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::model::{DerivedConstants, Parameters};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 64;
/// Nodes required inside `[1, 1 + 10·layer_width]` when the layer is resolved.
pub const MIN_LAYER_NODES: usize = 16;
/// Default outer radius.
pub const DEFAULT_R_MAX: f64 = 200.0;

#[derive(Clone, Debug, PartialEq)]
pub enum GridError {
    RadiusTooSmall { r_max: f64 },
    InsufficientNodes { required: usize, given: usize },
    BadLayerScale { epsilon_scale: f64 },
    LengthMismatch { expected: usize, got: usize },
    NonFinite { index: usize },
    NotANode { r: f64 },
    GridMismatch,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::RadiusTooSmall { r_max } => write!(f, "R_max ≥ 10 required (got {r_max})"),
            GridError::InsufficientNodes { required, given } => {
                write!(f, "insufficient nodes: {given} given, at least {required} required")
            }
            GridError::BadLayerScale { epsilon_scale } => {
                write!(f, "kernel decay scale must be positive and finite (got {epsilon_scale})")
            }
            GridError::LengthMismatch { expected, got } => {
                write!(f, "field has {got} values, grid has {expected} nodes")
            }
            GridError::NonFinite { index } => write!(f, "non-finite field value at node {index}"),
            GridError::NotANode { r } => write!(f, "radius {r} is not a grid node"),
            GridError::GridMismatch => write!(f, "fields live on different grids"),
        }
    }
}

impl core::error::Error for GridError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Grading {
    /// Log spacing plus an exponential cluster of `layer_fraction` of the
    /// parameter range near `r = 1`, with length scale `layer_scale`.
    LayerLog { layer_fraction: f64, layer_scale: f64 },
    /// Pure log spacing (layer wider than a tenth of the domain).
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    /// `r_i^n`
    powers: Vec<f64>,
    /// `r_{i+1}^n − r_i^n`, computed without cancellation.
    power_steps: Vec<f64>,
    n: u32,
    layer_width: f64,
    grading: Grading,
}

impl RadialGrid {
    /// Build a grid from explicit nodes (strictly increasing, first node 1).
    pub fn from_nodes(nodes: Vec<f64>, n: u32, layer_width: f64, grading: Grading) -> Result<Self, GridError> {
        if nodes.len() < 4 {
            return Err(GridError::InsufficientNodes { required: 4, given: nodes.len() });
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(GridError::NonFinite { index: i + 1 });
            }
        }
        let powers = nodes.iter().map(|&r| math::powi(r, n as i32)).collect();
        let power_steps = nodes.windows(2).map(|w| math::pow_diff(w[1], w[0], n)).collect();
        Ok(RadialGrid { nodes, powers, power_steps, n, layer_width, grading })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn dim(&self) -> u32 {
        self.n
    }

    pub fn layer_width(&self) -> f64 {
        self.layer_width
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn power_steps(&self) -> &[f64] {
        &self.power_steps
    }

    /// Largest spacing between neighbouring nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Index of the node equal to `r` (within a relative `1e-13`).
    pub fn node_index(&self, r: f64) -> Result<usize, GridError> {
        let i = self.nodes.partition_point(|&x| x < r * (1.0 - 1e-13));
        if i < self.nodes.len() && math::abs(self.nodes[i] - r) <= 1e-13 * r {
            Ok(i)
        } else {
            Err(GridError::NotANode { r })
        }
    }

    /// Number of nodes in the closed interval `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.nodes.iter().filter(|&&r| r >= lo && r <= hi).count()
    }

    /// Every node of `self` followed by the midpoint of each interval.
    pub fn refined(&self) -> Result<RadialGrid, GridError> {
        let mut nodes = Vec::with_capacity(2 * self.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.r_max());
        RadialGrid::from_nodes(nodes, self.n, self.layer_width, self.grading)
    }
}

/// Build the graded mesh for the given kernel decay scale (`ε` for inflow,
/// `|u_-|/v_+` for outflow).
pub fn build_grid(
    p: &Parameters,
    d: &DerivedConstants,
    r_max: f64,
    n_nodes: usize,
    epsilon_scale: f64,
) -> Result<RadialGrid, GridError> {
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(GridError::RadiusTooSmall { r_max });
    }
    if n_nodes < MIN_NODES {
        return Err(GridError::InsufficientNodes { required: MIN_NODES, given: n_nodes });
    }
    if !(epsilon_scale > 0.0) || !epsilon_scale.is_finite() {
        return Err(GridError::BadLayerScale { epsilon_scale });
    }
    let width = d.layer_width(p.n, epsilon_scale);
    build_layer_grid(p.n, r_max, n_nodes, width)
}

/// Same as [`build_grid`] with the layer width given directly.
pub fn build_layer_grid(n: u32, r_max: f64, n_nodes: usize, layer_width: f64) -> Result<RadialGrid, GridError> {
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(GridError::RadiusTooSmall { r_max });
    }
    if n_nodes < MIN_NODES {
        return Err(GridError::InsufficientNodes { required: MIN_NODES, given: n_nodes });
    }
    let intervals = (n_nodes - 1) as f64;
    let ln_r = math::ln(r_max);

    // q(r) = c_log·ln r + c_layer·ln(1 + (r−1)/L)/ln(1 + (R−1)/L) maps [1, R]
    // onto [0, 1]; nodes are equispaced in q. The second term makes the
    // spacing grow geometrically from ~L/(N·c_layer) at the wall until it
    // merges with the logarithmic far-field spacing, so neighbouring
    // spacings never jump.
    let resolved = layer_width < (r_max - 1.0) / 10.0;
    let (c_layer, scale, grading) = if resolved {
        let scale = layer_width;
        let norm = math::ln(1.0 + (r_max - 1.0) / scale);
        let captured = math::ln(1.0 + 10.0 * layer_width / scale) / norm;
        // Nodes aimed at the layer: a fixed 1/64 of the grid, with a floor
        // above the 16-node requirement.
        let target = f64::max(20.0, intervals / 64.0);
        let c_layer = target / (intervals * captured);
        if c_layer > 0.75 {
            let required = (target / (0.75 * captured)) as usize + 2;
            return Err(GridError::InsufficientNodes { required, given: n_nodes });
        }
        (c_layer, scale, Grading::LayerLog { layer_fraction: c_layer, layer_scale: scale })
    } else {
        (0.0, 1.0, Grading::Log)
    };
    let norm = if resolved { math::ln(1.0 + (r_max - 1.0) / scale) } else { 1.0 };
    let c_log = (1.0 - c_layer) / ln_r;

    let q = |r: f64| -> f64 {
        let layer = if resolved { math::ln(1.0 + (r - 1.0) / scale) / norm } else { 0.0 };
        c_log * math::ln(r) + c_layer * layer
    };
    let dq = |r: f64| -> f64 {
        let layer = if resolved { 1.0 / ((scale + r - 1.0) * norm) } else { 0.0 };
        c_log / r + c_layer * layer
    };

    let mut nodes = Vec::with_capacity(n_nodes);
    nodes.push(1.0);
    let mut prev = 1.0;
    for i in 1..n_nodes - 1 {
        let target = i as f64 / intervals;
        // q is increasing and concave-ish; safeguarded Newton from the last node.
        let (mut lo, mut hi) = (prev, r_max);
        let mut r = prev + 1.0 / (intervals * dq(prev));
        if !(r > lo && r < hi) {
            r = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let g = q(r) - target;
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let step = g / dq(r);
            let mut next = r - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if math::abs(next - r) <= 1e-15 * r {
                r = next;
                break;
            }
            r = next;
        }
        nodes.push(r);
        prev = r;
    }
    nodes.push(r_max);

    let grid = RadialGrid::from_nodes(nodes, n, layer_width, grading)?;
    if resolved && grid.count_in(1.0, 1.0 + 10.0 * layer_width) < MIN_LAYER_NODES {
        return Err(GridError::InsufficientNodes { required: 2 * n_nodes, given: n_nodes });
    }
    Ok(grid)
}

/// A scalar function sampled on a grid, with an algebraic tail
/// `f(s) ≈ f(R_max)·(s/R_max)^(−tail_exponent)` assumed beyond `R_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    pub tail_exponent: f64,
    pub tail_valid: bool,
}

impl SampledField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, tail_exponent: f64) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index });
        }
        Ok(SampledField { grid, values, tail_exponent, tail_valid: true })
    }

    /// A field without a usable tail closure.
    pub fn without_tail(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        let mut f = SampledField::new(grid, values, 0.0)?;
        f.tail_valid = false;
        Ok(f)
    }

    pub fn zeros(grid: Arc<RadialGrid>, tail_exponent: f64) -> Self {
        let values = alloc::vec![0.0; grid.len()];
        SampledField { grid, values, tail_exponent, tail_valid: true }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, tail_exponent: f64, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        SampledField::new(grid, values, tail_exponent)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_boundary(&self) -> f64 {
        self.values[0]
    }

    pub fn at_outer(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn with_tail(mut self, tail_exponent: f64) -> Self {
        self.tail_exponent = tail_exponent;
        self.tail_valid = true;
        self
    }

    /// True when both fields share a grid (same allocation or equal nodes).
    pub fn same_grid(&self, other: &SampledField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.nodes() == other.grid.nodes()
    }

    pub fn check_same_grid(&self, other: &SampledField) -> Result<(), GridError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    /// Nodewise map keeping grid and tail.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> SampledField {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&r, &v)| f(r, v)).collect();
        SampledField { grid: self.grid.clone(), values, tail_exponent: self.tail_exponent, tail_valid: self.tail_valid }
    }

    pub fn scaled(&self, c: f64) -> SampledField {
        self.map(|_, v| c * v)
    }

    /// Value at an arbitrary radius: cubic Lagrange interpolation inside the
    /// grid, the algebraic tail beyond it.
    pub fn value_at(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let last = nodes.len() - 1;
        if r >= nodes[last] {
            let outer = self.values[last];
            return outer * math::powf(r / nodes[last], -self.tail_exponent);
        }
        if r <= nodes[0] {
            return self.values[0];
        }
        let i = nodes.partition_point(|&x| x <= r).saturating_sub(1);
        let k0 = i.saturating_sub(1).min(last - 3);
        let mut acc = 0.0;
        for k in k0..k0 + 4 {
            let mut l = 1.0;
            for j in k0..k0 + 4 {
                if j != k {
                    l *= (r - nodes[j]) / (nodes[k] - nodes[j]);
                }
            }
            acc += l * self.values[k];
        }
        acc
    }
}
