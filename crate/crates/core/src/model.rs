//! Declarative model definitions: confinement potentials, finite-rank or
//! convolution interaction kernels, temperature maps, and the built-in
//! catalog.
//!
//! A model describes the family of self-consistent Gibbs measures
//!
//! ```text
//! mu(dx) ~ exp{ -theta(alpha) V0(x) - alpha W(x, mu) } dx
//! ```
//!
//! where the coupling `W` is either finite-rank,
//! `W = V1(x) + sum_ij J_ij v_i(x) mu(v_j) + sum_ij G_ij k_i(x) mu(k_j)`,
//! or a convolution `W = -(H * mu)(x)` for kernels `H(x - y)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// A shareable scalar function of one real variable.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function bundled with its analytic first derivative.
#[derive(Clone)]
pub struct Differentiable {
    pub f: RealFn,
    pub df: RealFn,
}

impl Differentiable {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Differentiable {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn zero() -> Self {
        Differentiable::new(|_| 0.0, |_| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    /// Central-difference cross-check of the stored derivative.
    pub fn check_gradient(&self, points: &[f64], rel_tol: f64) -> Result<()> {
        for &x in points {
            let h = 1e-5 * (1.0 + x.abs());
            let fd = (self.eval(x + h) - self.eval(x - h)) / (2.0 * h);
            let got = self.deriv(x);
            if (fd - got).abs() > rel_tol * got.abs().max(1.0) {
                return Err(Error::Numeric(format!(
                    "analytic derivative {got} disagrees with finite difference {fd} at x = {x}"
                )));
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for Differentiable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Differentiable")
    }
}

/// The temperature map `alpha -> theta(alpha)` of the exponent
/// `-theta(alpha) V0 - alpha W`.
#[derive(Clone)]
pub struct TemperatureMap {
    theta: RealFn,
    theta_prime: RealFn,
    alpha_range: (f64, f64),
}

impl TemperatureMap {
    /// `theta(alpha) = slope * alpha`.
    pub fn linear(slope: f64, alpha_range: (f64, f64)) -> Self {
        TemperatureMap {
            theta: Arc::new(move |a| slope * a),
            theta_prime: Arc::new(move |_| slope),
            alpha_range,
        }
    }

    pub fn custom(theta: RealFn, theta_prime: RealFn, alpha_range: (f64, f64)) -> Self {
        TemperatureMap {
            theta,
            theta_prime,
            alpha_range,
        }
    }

    pub fn theta(&self, alpha: f64) -> f64 {
        (self.theta)(alpha)
    }

    pub fn theta_prime(&self, alpha: f64) -> f64 {
        (self.theta_prime)(alpha)
    }

    pub fn alpha_range(&self) -> (f64, f64) {
        self.alpha_range
    }

    pub fn contains(&self, alpha: f64) -> bool {
        alpha > self.alpha_range.0 && alpha < self.alpha_range.1
    }

    /// Solve `theta(alpha) = 2 / sigma^2` for `alpha` by bisection. This ties
    /// a diffusion constant `sigma` to the equation parameter so that the
    /// physical dynamics with unit confinement drift target the same
    /// stationary measure.
    pub fn alpha_for_sigma(&self, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let target = 2.0 / (sigma * sigma);
        let (mut lo, mut hi) = self.alpha_range;
        // Nudge inside the open interval.
        let span = hi - lo;
        lo += 1e-12 * span;
        hi -= 1e-12 * span;
        let f = |a: f64| self.theta(a) - target;
        let (mut flo, fhi) = (f(lo), f(hi));
        if flo * fhi > 0.0 {
            return Err(Error::invalid(format!(
                "theta(alpha) = 2/sigma^2 = {target} has no solution in {:?}",
                self.alpha_range
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                return Ok(mid);
            }
            if flo * fm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
            if (hi - lo) <= f64::EPSILON * mid.abs() {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl std::fmt::Debug for TemperatureMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TemperatureMap")
            .field("alpha_range", &self.alpha_range)
            .finish()
    }
}

/// Finite-rank interaction kernel
/// `V(x,y) = V1(x) + sum J_ij v_i(x) v_j(y) + K1(y) + sum G_ij k_i(x) k_j(y)`.
///
/// `K1` is recorded for completeness but never evaluated: it contributes a
/// constant to the exponent and divides out of the normalized map.
#[derive(Clone)]
pub struct FiniteRankKernel {
    pub v1: Differentiable,
    pub v_basis: Vec<Differentiable>,
    pub j: DMatrix<f64>,
    pub k_basis: Vec<Differentiable>,
    pub g: DMatrix<f64>,
    pub k1: Option<RealFn>,
}

impl std::fmt::Debug for FiniteRankKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteRankKernel")
            .field("l", &self.l())
            .field("m", &self.m())
            .field("j", &self.j)
            .field("g", &self.g)
            .finish()
    }
}

impl FiniteRankKernel {
    /// Rank of the even (`v`) block.
    pub fn l(&self) -> usize {
        self.v_basis.len()
    }

    /// Rank of the odd (`k`) block.
    pub fn m(&self) -> usize {
        self.k_basis.len()
    }

    pub fn zero() -> Self {
        FiniteRankKernel {
            v1: Differentiable::zero(),
            v_basis: Vec::new(),
            j: DMatrix::zeros(0, 0),
            k_basis: Vec::new(),
            g: DMatrix::zeros(0, 0),
            k1: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l, m) = (self.l(), self.m());
        if self.j.nrows() != l || self.j.ncols() != l {
            return Err(Error::invalid(format!(
                "J must be {l}x{l}, got {}x{}",
                self.j.nrows(),
                self.j.ncols()
            )));
        }
        if self.g.nrows() != m || self.g.ncols() != m {
            return Err(Error::invalid(format!(
                "G must be {m}x{m}, got {}x{}",
                self.g.nrows(),
                self.g.ncols()
            )));
        }
        if self.j != self.j.transpose() {
            return Err(Error::invalid("J must be symmetric"));
        }
        if self.g != self.g.transpose() {
            return Err(Error::invalid("G must be symmetric"));
        }
        Ok(())
    }
}

/// Convolution interaction: the exponent carries `+ alpha * (H * mu)(x)`.
#[derive(Clone, Debug)]
pub struct GeneralKernel {
    pub h: Differentiable,
}

#[derive(Clone, Debug)]
pub enum Kernel {
    FiniteRank(FiniteRankKernel),
    General(GeneralKernel),
}

/// Spatial structure of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    One,
    /// A 2-d model whose stationary measure factorizes as a Gaussian
    /// `y`-marginal (variance `sigma^2 / 2` at diffusion `sigma`) times the
    /// 1-d `x`-problem. All computation happens on the `x`-grid.
    TwoProductForm,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub name: String,
    pub v0: Differentiable,
    pub kernel: Kernel,
    pub temperature: TemperatureMap,
    pub domain_half_width: f64,
    /// Interaction strength for models parameterized as `alpha = 2 beta / sigma^2`.
    pub beta: f64,
    pub dimension: Dimension,
    /// `V0` and the `v` basis even, the `k` basis odd. Grants a symmetric
    /// trivial branch with vanishing odd moments.
    pub symmetric: bool,
}

impl ModelSpec {
    pub fn default_grid(&self) -> Result<Arc<Quadrature>> {
        Quadrature::default_grid(self.domain_half_width)
    }

    pub fn finite_rank(&self) -> Option<&FiniteRankKernel> {
        match &self.kernel {
            Kernel::FiniteRank(k) => Some(k),
            Kernel::General(_) => None,
        }
    }

    pub fn general_kernel(&self) -> Option<&GeneralKernel> {
        match &self.kernel {
            Kernel::General(k) => Some(k),
            Kernel::FiniteRank(_) => None,
        }
    }

    /// `(l, m)` basis ranks; `(0, 0)` for convolution kernels.
    pub fn ranks(&self) -> (usize, usize) {
        match &self.kernel {
            Kernel::FiniteRank(k) => (k.l(), k.m()),
            Kernel::General(_) => (0, 0),
        }
    }

    /// Variance of the analytic Gaussian `y`-marginal, for product-form models.
    pub fn y_marginal_variance(&self, sigma: f64) -> Option<f64> {
        match self.dimension {
            Dimension::TwoProductForm => Some(0.5 * sigma * sigma),
            Dimension::One => None,
        }
    }

    /// The double-well model with Curie-Weiss-type quadratic interaction:
    /// `V0 = x^4/4 - x^2/2`, coupling `(beta/sigma^2) * (x - y)^2`, written
    /// with `alpha = 2 beta / sigma^2`, `theta(alpha) = alpha / beta`,
    /// `V1 = x^2/2`, `k1 = x`, `G = [-1]`.
    pub fn dawson(beta: f64) -> Self {
        ModelSpec {
            name: "dawson".to_string(),
            v0: Differentiable::new(
                |x| x.powi(4) / 4.0 - x * x / 2.0,
                |x| x.powi(3) - x,
            ),
            kernel: Kernel::FiniteRank(FiniteRankKernel {
                v1: Differentiable::new(|x| x * x / 2.0, |x| x),
                v_basis: Vec::new(),
                j: DMatrix::zeros(0, 0),
                k_basis: vec![Differentiable::new(|x| x, |_| 1.0)],
                g: DMatrix::from_element(1, 1, -1.0),
                k1: Some(Arc::new(|y| y * y)),
            }),
            temperature: TemperatureMap::linear(1.0 / beta, (0.02, 60.0)),
            domain_half_width: 6.0,
            beta,
            dimension: Dimension::One,
            symmetric: true,
        }
    }

    /// Double-well with a rank-two odd kernel `-2xy + 2 sin x sin y`:
    /// `V0 = x^4/4 + x^2/2 - sin^2 x`, `theta(alpha) = alpha`,
    /// `k = (x, sin x)`, `G = diag(-2, 2)`.
    pub fn xsin() -> Self {
        ModelSpec {
            name: "xsin".to_string(),
            v0: Differentiable::new(
                |x| x.powi(4) / 4.0 + x * x / 2.0 - x.sin() * x.sin(),
                |x| x.powi(3) + x - (2.0 * x).sin(),
            ),
            kernel: Kernel::FiniteRank(FiniteRankKernel {
                v1: Differentiable::zero(),
                v_basis: Vec::new(),
                j: DMatrix::zeros(0, 0),
                k_basis: vec![
                    Differentiable::new(|x| x, |_| 1.0),
                    Differentiable::new(|x| x.sin(), |x| x.cos()),
                ],
                g: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-2.0, 2.0])),
                k1: None,
            }),
            temperature: TemperatureMap::linear(1.0, (0.05, 30.0)),
            domain_half_width: 6.0,
            beta: 2.0,
            dimension: Dimension::One,
            symmetric: true,
        }
    }

    /// Granular-media-type equation with a genuinely non-finite-rank
    /// convolution kernel: `V0 = x^4 - x^2 sin|x|`, `H(u) = (1 + u^2) sin u`.
    pub fn granular_sin() -> Self {
        ModelSpec {
            name: "granular-sin".to_string(),
            v0: Differentiable::new(
                |x| x.powi(4) - x * x * x.abs().sin(),
                |x| {
                    let s = if x >= 0.0 { 1.0 } else { -1.0 };
                    4.0 * x.powi(3) - 2.0 * x * x.abs().sin() - x * x * x.abs().cos() * s
                },
            ),
            kernel: Kernel::General(GeneralKernel {
                h: Differentiable::new(
                    |u| (1.0 + u * u) * u.sin(),
                    |u| 2.0 * u * u.sin() + (1.0 + u * u) * u.cos(),
                ),
            }),
            temperature: TemperatureMap::linear(1.0, (0.05, 20.0)),
            domain_half_width: 8.0,
            beta: 1.0,
            dimension: Dimension::One,
            symmetric: false,
        }
    }

    /// The kinetic (Vlasov-Fokker-Planck) variant of the double-well model.
    /// Its stationary measure factorizes as a Gaussian in the velocity
    /// variable times the 1-d `x`-problem, so the `x`-part is exactly
    /// [`ModelSpec::dawson`].
    pub fn vfp_dawson(beta: f64) -> Self {
        let mut m = Self::dawson(beta);
        m.name = "vfp-dawson".to_string();
        m.dimension = Dimension::TwoProductForm;
        m
    }

    /// Quartic confinement with a singular-drift odd coupling
    /// `k1(x) = sign(x) sqrt(|x|)` (gradient blows up at the origin) and a
    /// continuous measure-side statistic.
    pub fn singular_theta() -> Self {
        ModelSpec {
            name: "singular-theta".to_string(),
            v0: Differentiable::new(
                |x| x.powi(4) / 4.0 - x * x / 2.0,
                |x| x.powi(3) - x,
            ),
            kernel: Kernel::FiniteRank(FiniteRankKernel {
                v1: Differentiable::zero(),
                v_basis: Vec::new(),
                j: DMatrix::zeros(0, 0),
                k_basis: vec![Differentiable::new(
                    |x| x.signum() * x.abs().sqrt(),
                    |x| 0.5 / x.abs().sqrt(),
                )],
                g: DMatrix::from_element(1, 1, -1.0),
                k1: None,
            }),
            temperature: TemperatureMap::linear(1.0, (0.05, 20.0)),
            domain_half_width: 6.0,
            beta: 1.0,
            dimension: Dimension::One,
            symmetric: true,
        }
    }

    /// The same measure family as [`ModelSpec::dawson`] expressed through the
    /// convolution kernel `H(u) = -u^2/2` instead of the finite-rank
    /// decomposition. Used for two-path equivalence checks.
    pub fn dawson_convolution(beta: f64) -> Self {
        ModelSpec {
            name: "dawson-convolution".to_string(),
            v0: Differentiable::new(
                |x| x.powi(4) / 4.0 - x * x / 2.0,
                |x| x.powi(3) - x,
            ),
            kernel: Kernel::General(GeneralKernel {
                h: Differentiable::new(|u| -u * u / 2.0, |u| -u),
            }),
            temperature: TemperatureMap::linear(1.0 / beta, (0.02, 60.0)),
            domain_half_width: 6.0,
            beta,
            dimension: Dimension::One,
            symmetric: true,
        }
    }
}

/// Look up a built-in model by name.
pub fn catalog_lookup(name: &str) -> Result<ModelSpec> {
    match name {
        "dawson" => Ok(ModelSpec::dawson(1.0)),
        "xsin" => Ok(ModelSpec::xsin()),
        "granular-sin" => Ok(ModelSpec::granular_sin()),
        "vfp-dawson" => Ok(ModelSpec::vfp_dawson(1.0)),
        "singular-theta" => Ok(ModelSpec::singular_theta()),
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Names accepted by [`catalog_lookup`].
pub const CATALOG_NAMES: [&str; 5] = [
    "dawson",
    "xsin",
    "granular-sin",
    "vfp-dawson",
    "singular-theta",
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_points(half_width: f64, n: usize) -> Vec<f64> {
        // Deterministic, avoids the origin (some catalog gradients are
        // singular there).
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                let x = half_width * (2.0 * t - 1.0);
                if x.abs() < 1e-3 {
                    x + 0.01
                } else {
                    x
                }
            })
            .collect()
    }

    #[test]
    fn dawson_potential_value() {
        let m = catalog_lookup("dawson").unwrap();
        assert_relative_eq!(m.v0.eval(1.0), -0.25);
    }

    #[test]
    fn xsin_g_matrix() {
        let m = catalog_lookup("xsin").unwrap();
        let k = m.finite_rank().unwrap();
        assert_eq!(k.g[(0, 0)], -2.0);
        assert_eq!(k.g[(0, 1)], 0.0);
        assert_eq!(k.g[(1, 0)], 0.0);
        assert_eq!(k.g[(1, 1)], 2.0);
    }

    #[test]
    fn vfp_dawson_is_product_form() {
        let m = catalog_lookup("vfp-dawson").unwrap();
        assert_eq!(m.dimension, Dimension::TwoProductForm);
        let sigma = 1.3;
        assert_relative_eq!(m.y_marginal_variance(sigma).unwrap(), sigma * sigma / 2.0);
        assert!(catalog_lookup("dawson").unwrap().y_marginal_variance(1.0).is_none());
    }

    #[test]
    fn unknown_model_rejected() {
        match catalog_lookup("curie") {
            Err(Error::UnknownModel(n)) => assert_eq!(n, "curie"),
            other => panic!("expected UnknownModel, got {other:?}"),
        }
    }

    #[test]
    fn catalog_gradients_match_finite_differences() {
        for name in CATALOG_NAMES {
            let m = catalog_lookup(name).unwrap();
            let pts = sample_points(m.domain_half_width * 0.8, 10);
            m.v0
                .check_gradient(&pts, 1e-6)
                .unwrap_or_else(|e| panic!("{name} V0: {e}"));
            if let Some(k) = m.finite_rank() {
                k.v1.check_gradient(&pts, 1e-6)
                    .unwrap_or_else(|e| panic!("{name} V1: {e}"));
                for (i, b) in k.v_basis.iter().chain(k.k_basis.iter()).enumerate() {
                    b.check_gradient(&pts, 1e-6)
                        .unwrap_or_else(|e| panic!("{name} basis {i}: {e}"));
                }
            }
            if let Some(g) = m.general_kernel() {
                g.h.check_gradient(&pts, 1e-6)
                    .unwrap_or_else(|e| panic!("{name} H: {e}"));
            }
        }
    }

    #[test]
    fn catalog_theta_prime_matches_finite_differences() {
        for name in CATALOG_NAMES {
            let m = catalog_lookup(name).unwrap();
            let (lo, hi) = m.temperature.alpha_range();
            for i in 0..10 {
                let a = lo + (hi - lo) * (i as f64 + 0.5) / 10.0;
                let h = 1e-6 * (1.0 + a.abs());
                let fd = (m.temperature.theta(a + h) - m.temperature.theta(a - h)) / (2.0 * h);
                let got = m.temperature.theta_prime(a);
                assert!(
                    (fd - got).abs() <= 1e-6 * got.abs().max(1.0),
                    "{name}: theta' {got} vs fd {fd} at alpha {a}"
                );
                assert!(m.temperature.theta(a) > 0.0, "{name}: theta <= 0 at {a}");
            }
        }
    }

    #[test]
    fn declared_symmetry_holds_at_sample_points() {
        for name in CATALOG_NAMES {
            let m = catalog_lookup(name).unwrap();
            if !m.symmetric {
                continue;
            }
            for &x in &sample_points(m.domain_half_width, 50) {
                let even = |f: &Differentiable| (f.eval(-x) - f.eval(x)).abs();
                assert!(even(&m.v0) < 1e-12, "{name}: V0 not even at {x}");
                if let Some(k) = m.finite_rank() {
                    for v in &k.v_basis {
                        assert!(even(v) < 1e-12, "{name}: v not even at {x}");
                    }
                    for kb in &k.k_basis {
                        assert!(
                            (kb.eval(-x) + kb.eval(x)).abs() < 1e-12,
                            "{name}: k not odd at {x}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_shape_validation() {
        let mut k = FiniteRankKernel::zero();
        k.k_basis.push(Differentiable::new(|x| x, |_| 1.0));
        assert!(k.validate().is_err());
        k.g = DMatrix::from_element(1, 1, -1.0);
        assert!(k.validate().is_ok());
    }

    #[test]
    fn alpha_for_sigma_roundtrip() {
        let m = catalog_lookup("dawson").unwrap();
        // dawson: theta(alpha) = alpha / beta, so alpha = 2 beta / sigma^2.
        let a = m.temperature.alpha_for_sigma(2.0).unwrap();
        assert_relative_eq!(a, 0.5, max_relative = 1e-10);
        let x = catalog_lookup("xsin").unwrap();
        let a = x.temperature.alpha_for_sigma(0.58).unwrap();
        assert_relative_eq!(a, 2.0 / (0.58f64 * 0.58), max_relative = 1e-10);
    }
}
