//! Gibbs-type probability measures on a quadrature grid.
//!
//! A [`GibbsMeasure`] is the normalized density
//! `exp{-theta(alpha) V0 - alpha W(.; meanfield)}` tabulated at the grid
//! nodes. Densities are produced through log-sum-exp stabilization and the
//! exact log-density is kept alongside, so tail values stay meaningful far
//! below the floating-point underflow threshold.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Kernel, ModelSpec, RealFn};
use crate::quadrature::Quadrature;

/// The mean-field vector: the moments `mu(v_i)` and `mu(k_j)` through which a
/// measure enters its own defining potential.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub r_v: Vec<f64>,
    pub r_k: Vec<f64>,
}

impl MeanField {
    pub fn new(r_v: Vec<f64>, r_k: Vec<f64>) -> Self {
        MeanField { r_v, r_k }
    }

    pub fn zero(l: usize, m: usize) -> Self {
        MeanField {
            r_v: vec![0.0; l],
            r_k: vec![0.0; m],
        }
    }

    pub fn zero_for(model: &ModelSpec) -> Self {
        let (l, m) = model.ranks();
        Self::zero(l, m)
    }

    /// The odd block with flipped sign; for symmetric models this maps fixed
    /// points to fixed points.
    pub fn flipped_k(&self) -> Self {
        MeanField {
            r_v: self.r_v.clone(),
            r_k: self.r_k.iter().map(|r| -r).collect(),
        }
    }

    pub fn inf_distance(&self, other: &Self) -> f64 {
        self.r_v
            .iter()
            .zip(&other.r_v)
            .chain(self.r_k.iter().zip(&other.r_k))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.r_v.iter().chain(&self.r_k).all(|v| v.is_finite())
    }

    pub fn len(&self) -> usize {
        self.r_v.len() + self.r_k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A normalized density on a quadrature grid.
#[derive(Debug, Clone)]
pub struct GibbsMeasure {
    grid: Arc<Quadrature>,
    density: Vec<f64>,
    log_density: Vec<f64>,
    log_norm: f64,
    alpha: f64,
    meanfield: MeanField,
}

impl GibbsMeasure {
    pub fn grid(&self) -> &Arc<Quadrature> {
        &self.grid
    }

    /// Normalized density values at the nodes (floored at the smallest
    /// positive normal, so positivity holds even deep in the tails).
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Exact log of the normalized density; never underflows.
    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn meanfield(&self) -> &MeanField {
        &self.meanfield
    }

    /// `∫ f dμ` over the grid.
    pub fn moment<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let mut acc = 0.0;
        for i in 0..nodes.len() {
            let v = f(nodes[i]);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    x: nodes[i],
                    value: v,
                });
            }
            acc += weights[i] * self.density[i] * v;
        }
        Ok(acc)
    }

    /// Moment of values already tabulated on the nodes.
    pub fn moment_nodes(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.density.len());
        let weights = self.grid.weights();
        let mut acc = 0.0;
        for i in 0..values.len() {
            acc += weights[i] * self.density[i] * values[i];
        }
        acc
    }

    /// The centering projection `π f = f - μ(f)`, tabulated on the grid.
    pub fn pi_project<F: Fn(f64) -> f64>(&self, f: F) -> Result<Vec<f64>> {
        let vals: Vec<f64> = self.grid.nodes().iter().map(|&x| f(x)).collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: self.grid.nodes()[i],
                value: vals[i],
            });
        }
        Ok(self.pi_project_nodes(&vals))
    }

    pub fn pi_project_nodes(&self, values: &[f64]) -> Vec<f64> {
        let mean = self.moment_nodes(values);
        values.iter().map(|v| v - mean).collect()
    }

    /// Covariance `μ(fg) - μ(f)μ(g)` of two node-tabulated functions.
    pub fn covariance_nodes(&self, f: &[f64], g: &[f64]) -> f64 {
        let mf = self.moment_nodes(f);
        let weights = self.grid.weights();
        let mut acc = 0.0;
        for i in 0..f.len() {
            acc += weights[i] * self.density[i] * (f[i] - mf) * g[i];
        }
        acc
    }

    /// Two-column CSV `(x, density)` for plotting.
    pub fn write_density_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,density")?;
        for (x, d) in self.grid.nodes().iter().zip(&self.density) {
            writeln!(out, "{x},{d}")?;
        }
        Ok(())
    }
}

/// Normalize log-weights into a probability density on the grid.
///
/// The maximum log-weight is subtracted before exponentiation and restored in
/// the returned log-normalizer, making the result invariant under constant
/// shifts of the input.
pub fn normalize_log_weights(
    grid: &Arc<Quadrature>,
    log_weights: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric(format!(
            "degenerate potential: maximal log-weight is {max}"
        )));
    }
    let shifted: Vec<f64> = log_weights.iter().map(|l| l - max).collect();
    let z: f64 = grid
        .weights()
        .iter()
        .zip(&shifted)
        .map(|(w, s)| w * s.exp())
        .sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Numeric(format!(
            "normalization integral degenerated to {z}"
        )));
    }
    let log_z = z.ln();
    let log_density: Vec<f64> = shifted.iter().map(|s| s - log_z).collect();
    let density: Vec<f64> = log_density
        .iter()
        .map(|l| l.exp().max(f64::MIN_POSITIVE))
        .collect();
    Ok((density, log_density, max + log_z))
}

/// Log of the unnormalized Gibbs weight at `x` for a finite-rank model.
fn log_weight_finite_rank(
    model: &ModelSpec,
    alpha: f64,
    jr: &[f64],
    gr: &[f64],
    x: f64,
) -> f64 {
    let kernel = match &model.kernel {
        Kernel::FiniteRank(k) => k,
        Kernel::General(_) => unreachable!("finite-rank log-weight on a convolution model"),
    };
    let mut coupling = kernel.v1.eval(x);
    for (c, b) in jr.iter().zip(&kernel.v_basis) {
        coupling += c * b.eval(x);
    }
    for (c, b) in gr.iter().zip(&kernel.k_basis) {
        coupling += c * b.eval(x);
    }
    -model.temperature.theta(alpha) * model.v0.eval(x) - alpha * coupling
}

fn check_alpha(model: &ModelSpec, alpha: f64) -> Result<()> {
    if !model.temperature.contains(alpha) {
        let (lo, hi) = model.temperature.alpha_range();
        return Err(Error::invalid(format!(
            "alpha = {alpha} outside the model range ({lo}, {hi})"
        )));
    }
    Ok(())
}

/// Construct the Gibbs measure of a finite-rank model at `alpha` with the
/// given mean-field vector.
pub fn build_gibbs(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    mf: &MeanField,
) -> Result<GibbsMeasure> {
    check_alpha(model, alpha)?;
    let kernel = model.finite_rank().ok_or_else(|| {
        Error::invalid("build_gibbs needs a finite-rank kernel; use build_gibbs_convolution")
    })?;
    if mf.r_v.len() != kernel.l() || mf.r_k.len() != kernel.m() {
        return Err(Error::invalid(format!(
            "mean-field shape ({}, {}) does not match kernel ranks ({}, {})",
            mf.r_v.len(),
            mf.r_k.len(),
            kernel.l(),
            kernel.m()
        )));
    }
    if !mf.is_finite() {
        return Err(Error::invalid("mean-field vector has non-finite entries"));
    }

    // Precontract the coupling matrices with the mean field.
    let jr: Vec<f64> = (0..kernel.l())
        .map(|i| (0..kernel.l()).map(|j| kernel.j[(i, j)] * mf.r_v[j]).sum())
        .collect();
    let gr: Vec<f64> = (0..kernel.m())
        .map(|i| (0..kernel.m()).map(|j| kernel.g[(i, j)] * mf.r_k[j]).sum())
        .collect();

    let log_weights: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| log_weight_finite_rank(model, alpha, &jr, &gr, x))
        .collect();
    if let Some(i) = log_weights.iter().position(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NonFinite {
            x: grid.nodes()[i],
            value: log_weights[i],
        });
    }

    let (density, log_density, log_norm) = normalize_log_weights(grid, &log_weights)?;
    Ok(GibbsMeasure {
        grid: grid.clone(),
        density,
        log_density,
        log_norm,
        alpha,
        meanfield: mf.clone(),
    })
}

/// Construct the Gibbs measure of a convolution model given the previous
/// density iterate: `exp{-theta(alpha) V0 + alpha (H * rho)}`, with the
/// convolution evaluated by the shared quadrature (direct `O(n^2)` sum).
pub fn build_gibbs_convolution(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    rho: &[f64],
) -> Result<GibbsMeasure> {
    check_alpha(model, alpha)?;
    let kernel = model
        .general_kernel()
        .ok_or_else(|| Error::invalid("build_gibbs_convolution needs a convolution kernel"))?;
    if rho.len() != grid.node_count() {
        return Err(Error::invalid("density iterate does not match the grid"));
    }

    let nodes = grid.nodes();
    let weights = grid.weights();
    let theta = model.temperature.theta(alpha);
    let mut log_weights = Vec::with_capacity(nodes.len());
    for &x in nodes {
        let mut conv = 0.0;
        for j in 0..nodes.len() {
            conv += weights[j] * rho[j] * kernel.h.eval(x - nodes[j]);
        }
        let l = -theta * model.v0.eval(x) + alpha * conv;
        if l.is_nan() || l == f64::INFINITY {
            return Err(Error::NonFinite { x, value: l });
        }
        log_weights.push(l);
    }

    let (density, log_density, log_norm) = normalize_log_weights(grid, &log_weights)?;
    Ok(GibbsMeasure {
        grid: grid.clone(),
        density,
        log_density,
        log_norm,
        alpha,
        meanfield: MeanField::zero(0, 0),
    })
}

/// A test function with analytic first and second derivatives, for the
/// stationarity diagnostic.
#[derive(Clone)]
pub struct TestFunction {
    pub f: RealFn,
    pub d1: RealFn,
    pub d2: RealFn,
}

impl TestFunction {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            f: Arc::new(f),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }
}

/// Stationarity diagnostic: for each test function `g` returns
/// `∫ (g'' - U' g') dμ` where `U = theta(alpha) V0 + alpha W(.; mf)` is the
/// full potential of the measure. Near-zero residuals certify that `μ` is
/// invariant for the gradient diffusion generated by `Δ - U'∂`.
pub fn stationarity_residual(
    mu: &GibbsMeasure,
    model: &ModelSpec,
    test_fns: &[TestFunction],
) -> Result<Vec<f64>> {
    let alpha = mu.alpha();
    let theta = model.temperature.theta(alpha);
    let nodes = mu.grid().nodes();

    // Full potential gradient at the nodes.
    let u_prime: Vec<f64> = match &model.kernel {
        Kernel::FiniteRank(kernel) => {
            let mf = mu.meanfield();
            let jr: Vec<f64> = (0..kernel.l())
                .map(|i| (0..kernel.l()).map(|j| kernel.j[(i, j)] * mf.r_v[j]).sum())
                .collect();
            let gr: Vec<f64> = (0..kernel.m())
                .map(|i| (0..kernel.m()).map(|j| kernel.g[(i, j)] * mf.r_k[j]).sum())
                .collect();
            nodes
                .iter()
                .map(|&x| {
                    let mut w = kernel.v1.deriv(x);
                    for (c, b) in jr.iter().zip(&kernel.v_basis) {
                        w += c * b.deriv(x);
                    }
                    for (c, b) in gr.iter().zip(&kernel.k_basis) {
                        w += c * b.deriv(x);
                    }
                    theta * model.v0.deriv(x) + alpha * w
                })
                .collect()
        }
        Kernel::General(kernel) => {
            let weights = mu.grid().weights();
            let rho = mu.density();
            nodes
                .iter()
                .map(|&x| {
                    let mut conv = 0.0;
                    for j in 0..nodes.len() {
                        conv += weights[j] * rho[j] * kernel.h.deriv(x - nodes[j]);
                    }
                    theta * model.v0.deriv(x) - alpha * conv
                })
                .collect()
        }
    };

    let mut residuals = Vec::with_capacity(test_fns.len());
    for g in test_fns {
        let mut acc = 0.0;
        for (i, &x) in nodes.iter().enumerate() {
            let v = (g.d2)(x) - u_prime[i] * (g.d1)(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { x, value: v });
            }
            acc += mu.grid().weights()[i] * mu.density()[i] * v;
        }
        residuals.push(acc);
    }
    Ok(residuals)
}
