//! Composite Gauss-Legendre quadrature on a truncated line.
//!
//! Every density, moment and integral operator in this crate lives on one of
//! these grids. Sharing nodes removes interpolation error entirely: measures,
//! kernels and Nystrom matrices all see the same abscissae.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default Gauss-Legendre points per panel.
pub const DEFAULT_POINTS_PER_PANEL: usize = 20;
/// Default number of panels on `[-L, L]`.
pub const DEFAULT_PANELS: usize = 40;

/// Nodes and positive weights of a composite Gauss-Legendre rule on `[-L, L]`.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    half_width: f64,
    points_per_panel: usize,
    panels: usize,
}

impl Quadrature {
    /// Composite rule: `panels` equal subintervals of `[-L, L]`, an
    /// `n`-point Gauss-Legendre rule on each. Exact for polynomials of
    /// degree `2n - 1` per panel.
    pub fn build_grid(half_width: f64, points_per_panel: usize, panels: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::invalid(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        if points_per_panel < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 points per panel, got {points_per_panel}"
            )));
        }
        if panels < 1 {
            return Err(Error::invalid("need at least 1 panel"));
        }

        let (ref_nodes, ref_weights) = gauss_legendre_reference(points_per_panel);
        let panel_width = 2.0 * half_width / panels as f64;
        let scale = 0.5 * panel_width;

        let mut nodes = Vec::with_capacity(points_per_panel * panels);
        let mut weights = Vec::with_capacity(points_per_panel * panels);
        for p in 0..panels {
            let a = -half_width + p as f64 * panel_width;
            let mid = a + 0.5 * panel_width;
            for (&t, &w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + scale * t);
                weights.push(scale * w);
            }
        }

        Ok(Quadrature {
            nodes,
            weights,
            half_width,
            points_per_panel,
            panels,
        })
    }

    /// The default production grid for a model domain `[-L, L]`.
    pub fn default_grid(half_width: f64) -> Result<Arc<Self>> {
        Ok(Arc::new(Self::build_grid(
            half_width,
            DEFAULT_POINTS_PER_PANEL,
            DEFAULT_PANELS,
        )?))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn points_per_panel(&self) -> usize {
        self.points_per_panel
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// `sum_i w_i f(x_i)`. Errors on a non-finite integrand value, carrying
    /// the offending node.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Weighted sum of values already tabulated on the nodes.
    pub fn sum_weighted(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Same rule with the panel count doubled.
    pub fn refined(&self) -> Self {
        Self::build_grid(self.half_width, self.points_per_panel, 2 * self.panels)
            .expect("refining a valid grid cannot fail")
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Golub-Welsch: the nodes
/// are the eigenvalues of the symmetric tridiagonal Jacobi matrix of the
/// Legendre recurrence (off-diagonal `k / sqrt(4k^2 - 1)`), the weights are
/// `2 q_{0i}^2` with `q_{0i}` the first component of the i-th eigenvector.
fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let off = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eigen = jacobi.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let nodes: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| {
            let q0 = eigen.eigenvectors[(0, i)];
            2.0 * q0 * q0
        })
        .collect();
    (nodes, weights)
}
