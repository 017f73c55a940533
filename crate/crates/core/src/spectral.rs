//! Nystrom discretization of the linearized fixed-point operator, the
//! regularized determinant, and sign-change scans.
//!
//! The operator is the compact part of the linearization around the trivial
//! branch: `w -> alpha * pi (V2 + K2) pi w` on `L^2(mu_alpha)`, with the
//! centering projection applied on both sides. On the grid this becomes the
//! matrix
//!
//! ```text
//! A_ij = alpha * sqrt(w_i rho_i) * Kc(x_i, x_j) * sqrt(w_j rho_j)
//! ```
//!
//! where `Kc` is the doubly centered kernel. The square-root conjugation
//! keeps symmetric kernels symmetric, so their spectra come out real instead
//! of picking up spurious imaginary parts that would poison the sign of the
//! determinant.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::gibbs::GibbsMeasure;
use crate::model::{Kernel, ModelSpec};
use crate::quadrature::Quadrature;
use crate::selfconsistency::solve_trivial_branch;

/// Reported sign dead-band: below this magnitude det2 counts as zero.
pub const DET2_DEAD_BAND: f64 = 1e-12;

/// Entries this far below the largest one are flushed to exact zero at
/// assembly. Deep-tail nodes carry near-underflow densities, giving the
/// matrix a dynamic range that derails the QR iteration; at the tolerances
/// used here anything 30 orders below the top is spectrally invisible.
const ENTRY_FLUSH_REL: f64 = 1e-30;

fn flush_tiny(m: &mut DMatrix<f64>) {
    let floor = m.amax() * ENTRY_FLUSH_REL;
    for v in m.iter_mut() {
        if v.abs() < floor {
            *v = 0.0;
        }
    }
}

/// Which part of the kernel to discretize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPart {
    /// The full compact part `V2 + K2`.
    Full,
    /// The even (`V2`) part only, as needed for the invertibility hypothesis
    /// on the trivial branch.
    EvenOnly,
}

/// The discretized operator `alpha * pi (V2 + K2) pi` on a grid.
#[derive(Debug, Clone)]
pub struct NystromOperator {
    matrix: DMatrix<f64>,
    grid: Arc<Quadrature>,
    alpha: f64,
}

impl NystromOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &Arc<Quadrature> {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Tabulate the doubly centered kernel times `alpha`, conjugated by
/// `diag(sqrt(w rho))`.
pub fn nystrom_build(model: &ModelSpec, mu: &GibbsMeasure, alpha: f64) -> Result<NystromOperator> {
    build_part(model, mu, alpha, KernelPart::Full)
}

/// The even-part operator for the invertibility check.
pub fn nystrom_build_even(
    model: &ModelSpec,
    mu: &GibbsMeasure,
    alpha: f64,
) -> Result<NystromOperator> {
    build_part(model, mu, alpha, KernelPart::EvenOnly)
}

fn build_part(
    model: &ModelSpec,
    mu: &GibbsMeasure,
    alpha: f64,
    part: KernelPart,
) -> Result<NystromOperator> {
    let grid = mu.grid().clone();
    let n = grid.node_count();
    let sqrt_d: Vec<f64> = grid
        .weights()
        .iter()
        .zip(mu.density())
        .map(|(w, r)| (w * r).sqrt())
        .collect();

    let mut matrix = match &model.kernel {
        Kernel::FiniteRank(kernel) => {
            // Basis functions with their coupling blocks. Double centering
            // of a product kernel centers each factor, so the matrix is
            // assembled from centered basis columns directly.
            let mut funcs = Vec::new();
            let mut rank = 0usize;
            let l = kernel.l();
            let m = kernel.m();
            for b in &kernel.v_basis {
                funcs.push(b.clone());
                rank += 1;
            }
            if part == KernelPart::Full {
                for b in &kernel.k_basis {
                    funcs.push(b.clone());
                    rank += 1;
                }
            }
            let mut coupling = DMatrix::<f64>::zeros(rank, rank);
            coupling.view_mut((0, 0), (l, l)).copy_from(&kernel.j);
            if part == KernelPart::Full {
                coupling.view_mut((l, l), (m, m)).copy_from(&kernel.g);
            }

            // Rows: centered basis values scaled by sqrt(w rho).
            let mut b_scaled = DMatrix::<f64>::zeros(rank, n);
            for (r, f) in funcs.iter().enumerate() {
                let vals: Vec<f64> = grid.nodes().iter().map(|&x| f.eval(x)).collect();
                let centered = mu.pi_project_nodes(&vals);
                for i in 0..n {
                    b_scaled[(r, i)] = centered[i] * sqrt_d[i];
                }
            }
            alpha * b_scaled.transpose() * (coupling * &b_scaled)
        }
        Kernel::General(kernel) => {
            let nodes = grid.nodes();
            let mut k = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let v = match part {
                        KernelPart::Full => -kernel.h.eval(nodes[i] - nodes[j]),
                        KernelPart::EvenOnly => {
                            -0.5 * (kernel.h.eval(nodes[i] - nodes[j])
                                + kernel.h.eval(nodes[i] + nodes[j]))
                        }
                    };
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            x: nodes[i],
                            value: v,
                        });
                    }
                    k[(i, j)] = v;
                }
            }
            center_and_symmetrize(&k, &grid, mu, &sqrt_d, alpha)
        }
    };
    flush_tiny(&mut matrix);

    Ok(NystromOperator {
        matrix,
        grid,
        alpha,
    })
}

fn center_and_symmetrize(
    k: &DMatrix<f64>,
    grid: &Quadrature,
    mu: &GibbsMeasure,
    sqrt_d: &[f64],
    alpha: f64,
) -> DMatrix<f64> {
    let n = grid.node_count();
    let d: Vec<f64> = grid
        .weights()
        .iter()
        .zip(mu.density())
        .map(|(w, r)| w * r)
        .collect();
    let mut row_mean = vec![0.0; n];
    let mut col_mean = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            row_mean[i] += d[j] * k[(i, j)];
            col_mean[j] += d[i] * k[(i, j)];
        }
    }
    let total: f64 = (0..n).map(|i| d[i] * row_mean[i]).sum();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let centered = k[(i, j)] - row_mean[i] - col_mean[j] + total;
            a[(i, j)] = alpha * sqrt_d[i] * centered * sqrt_d[j];
        }
    }
    a
}

/// The raw collocation form `alpha * Kc(x_i, x_j) w_j rho_j`, similar to the
/// symmetrized matrix. Spectra of the two must agree.
pub fn nystrom_collocation_matrix(
    model: &ModelSpec,
    mu: &GibbsMeasure,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let op = nystrom_build(model, mu, alpha)?;
    let n = op.grid.node_count();
    let sqrt_d: Vec<f64> = op
        .grid
        .weights()
        .iter()
        .zip(mu.density())
        .map(|(w, r)| (w * r).sqrt())
        .collect();
    // D^{-1/2} A D^{1/2}; tail nodes keep sqrt(w rho) > 0 by the density floor.
    let mut raw = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            raw[(i, j)] = op.matrix[(i, j)] / sqrt_d[i] * sqrt_d[j];
        }
    }
    Ok(raw)
}

/// Eigenvalues, regularized determinant and its sign.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub alpha: f64,
    pub eigenvalues: Vec<Complex<f64>>,
    pub det2: f64,
    pub sign: i8,
    /// `min_i |1 + kappa_i|`: distance of the operator `I + A` from losing
    /// invertibility.
    pub min_abs_one_plus_kappa: f64,
}

/// Eigenvalues of a real matrix; the symmetric fast path keeps the spectrum
/// exactly real.
pub fn real_matrix_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let scale = m.amax().max(1e-300);
    let asym = (m - m.transpose()).amax();
    if asym <= 1e-12 * scale {
        let sym = 0.5 * (m + m.transpose());
        let eig = sym.symmetric_eigen();
        Ok(eig
            .eigenvalues
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect())
    } else {
        Ok(m.clone().complex_eigenvalues().iter().cloned().collect())
    }
}

/// `det2(I + A) = prod (1 + kappa_i) exp(-kappa_i)` over the eigenvalues of
/// `A`; zero exactly when `-1` is an eigenvalue.
pub fn det2(op: &NystromOperator) -> Result<SpectralReport> {
    let eigenvalues = real_matrix_eigenvalues(&op.matrix)?;
    let mut prod = Complex::new(1.0, 0.0);
    let mut min_abs = f64::INFINITY;
    for k in &eigenvalues {
        prod *= (Complex::new(1.0, 0.0) + k) * (-k).exp();
        min_abs = min_abs.min((Complex::new(1.0, 0.0) + k).norm());
    }
    if prod.im.abs() > 1e-10 * (1.0 + prod.re.abs()) {
        return Err(Error::Numeric(format!(
            "det2 has an imaginary residue {} (conjugate pairing failed)",
            prod.im
        )));
    }
    let det2 = prod.re;
    let sign = if det2.abs() < DET2_DEAD_BAND {
        0
    } else if det2 > 0.0 {
        1
    } else {
        -1
    };
    Ok(SpectralReport {
        alpha: op.alpha,
        eigenvalues,
        det2,
        sign,
        min_abs_one_plus_kappa: min_abs,
    })
}

/// The dual, grid-moment route to the finite-rank spectrum: the nonzero
/// eigenvalues of `alpha * pi K pi` equal those of `alpha * C * Sigma`, with
/// `C = blockdiag(J, G)` and `Sigma` the centered Gram matrix of the basis
/// under `mu`. Kept independent of the full Nystrom matrix so the two
/// routes can check each other.
pub fn finite_rank_spectrum(
    model: &ModelSpec,
    mu: &GibbsMeasure,
    alpha: f64,
) -> Result<Vec<Complex<f64>>> {
    let kernel = model
        .finite_rank()
        .ok_or_else(|| Error::invalid("finite-rank spectrum needs a finite-rank kernel"))?;
    let l = kernel.l();
    let m = kernel.m();
    let rank = l + m;
    let mut coupling = DMatrix::<f64>::zeros(rank, rank);
    coupling.view_mut((0, 0), (l, l)).copy_from(&kernel.j);
    coupling.view_mut((l, l), (m, m)).copy_from(&kernel.g);

    let values: Vec<Vec<f64>> = kernel
        .v_basis
        .iter()
        .chain(kernel.k_basis.iter())
        .map(|b| mu.grid().nodes().iter().map(|&x| b.eval(x)).collect())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(rank, rank);
    for a in 0..rank {
        for b in 0..rank {
            gram[(a, b)] = mu.covariance_nodes(&values[a], &values[b]);
        }
    }
    let small = alpha * coupling * gram;
    real_matrix_eigenvalues(&small)
}

/// One sample of a determinant scan.
#[derive(Debug, Clone)]
pub struct ScanSample {
    pub alpha: f64,
    /// `None` when the trivial branch could not be solved at this alpha.
    pub report: Option<SpectralReport>,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub samples: Vec<ScanSample>,
    /// Consecutive sample pairs across which det2 changes sign; bifurcation
    /// candidates.
    pub brackets: Vec<(f64, f64)>,
}

/// Sample `det2` on `steps` equally spaced points of `[alpha_lo, alpha_hi]`,
/// re-solving the trivial branch at each point (warm-started from the
/// previous one), and bracket the sign changes.
pub fn crossing_scan(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha_lo: f64,
    alpha_hi: f64,
    steps: usize,
) -> Result<ScanOutcome> {
    if !(alpha_lo < alpha_hi) || steps < 2 {
        return Err(Error::invalid(
            "need alpha_lo < alpha_hi and at least 2 scan steps",
        ));
    }
    let (l, _) = model.ranks();
    let mut warm = vec![0.0; l];
    let mut samples = Vec::with_capacity(steps);
    for i in 0..steps {
        let alpha = alpha_lo + (alpha_hi - alpha_lo) * i as f64 / (steps - 1) as f64;
        let report = solve_trivial_branch(model, grid, alpha, &warm, 1e-11, 300)
            .ok()
            .filter(|r| r.converged)
            .and_then(|branch| {
                warm = branch.meanfield.r_v.clone();
                nystrom_build(model, &branch.measure, alpha)
                    .and_then(|op| det2(&op))
                    .ok()
            });
        samples.push(ScanSample { alpha, report });
    }

    let mut brackets = Vec::new();
    for w in samples.windows(2) {
        if let (Some(a), Some(b)) = (&w[0].report, &w[1].report) {
            if a.sign * b.sign < 0 {
                brackets.push((w[0].alpha, w[1].alpha));
            }
        }
    }
    Ok(ScanOutcome { samples, brackets })
}

/// Check the invertibility hypothesis `I + alpha pi V2 pi` on the trivial
/// branch: returns the margin `min |1 + kappa|` over the even-part spectrum
/// and whether it clears `1e-6`.
pub fn invertibility_check(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
) -> Result<(bool, f64)> {
    let (l, _) = model.ranks();
    let branch = solve_trivial_branch(model, grid, alpha, &vec![0.0; l], 1e-11, 300)?;
    if !branch.converged {
        return Err(Error::Numeric(format!(
            "trivial branch did not converge at alpha = {alpha}"
        )));
    }
    invertibility_check_at(model, &branch.measure, alpha)
}

/// As [`invertibility_check`], on an already-solved branch measure.
pub fn invertibility_check_at(
    model: &ModelSpec,
    mu: &GibbsMeasure,
    alpha: f64,
) -> Result<(bool, f64)> {
    let op = nystrom_build_even(model, mu, alpha)?;
    let eigs = real_matrix_eigenvalues(op.matrix())?;
    let margin = eigs
        .iter()
        .map(|k| (Complex::new(1.0, 0.0) + k).norm())
        .fold(f64::INFINITY, f64::min);
    let margin = if margin.is_finite() { margin } else { 1.0 };
    Ok((margin > 1e-6, margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{build_gibbs, MeanField};
    use crate::model::{
        catalog_lookup, Differentiable, FiniteRankKernel, Kernel, ModelSpec, TemperatureMap,
    };
    use crate::quadrature::Quadrature;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix as NMatrix;

    fn trivial_measure(model: &ModelSpec, grid: &Arc<Quadrature>, alpha: f64) -> GibbsMeasure {
        build_gibbs(model, grid, alpha, &MeanField::zero_for(model)).unwrap()
    }

    fn custom_even_model(j: f64) -> ModelSpec {
        // Quartic confinement with a single even basis function x^2.
        ModelSpec {
            name: "even-rank-one".to_string(),
            v0: Differentiable::new(|x| x.powi(4) / 4.0, |x| x.powi(3)),
            kernel: Kernel::FiniteRank(FiniteRankKernel {
                v1: Differentiable::zero(),
                v_basis: vec![Differentiable::new(|x| x * x, |x| 2.0 * x)],
                j: NMatrix::from_element(1, 1, j),
                k_basis: Vec::new(),
                g: NMatrix::zeros(0, 0),
                k1: None,
            }),
            temperature: TemperatureMap::linear(1.0, (0.05, 50.0)),
            domain_half_width: 6.0,
            beta: 1.0,
            dimension: crate::model::Dimension::One,
            symmetric: true,
        }
    }

    #[test]
    fn rank_one_odd_kernel_eigenvalue() {
        // K2(x, y) = -xy under a symmetric measure: the single nonzero
        // eigenvalue is -alpha * m2.
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let alpha = 1.5;
        let mu = trivial_measure(&model, &grid, alpha);
        let m2 = mu.moment(|x| x * x).unwrap();
        let op = nystrom_build(&model, &mu, alpha).unwrap();
        let eigs = real_matrix_eigenvalues(op.matrix()).unwrap();
        let mut nonzero: Vec<f64> = eigs
            .iter()
            .filter(|k| k.norm() > 1e-10)
            .map(|k| k.re)
            .collect();
        assert_eq!(nonzero.len(), 1, "expected a rank-one spectrum");
        let kappa = nonzero.pop().unwrap();
        assert_relative_eq!(kappa, -alpha * m2, epsilon = 1e-8);
    }

    #[test]
    fn zero_kernel_gives_zero_matrix() {
        let mut model = catalog_lookup("dawson").unwrap();
        model.kernel = Kernel::FiniteRank(FiniteRankKernel::zero());
        let grid = model.default_grid().unwrap();
        let mu = trivial_measure(&model, &grid, 1.0);
        let op = nystrom_build(&model, &mu, 1.0).unwrap();
        assert!(op.matrix().amax() == 0.0);
        let rep = det2(&op).unwrap();
        assert_eq!(rep.det2, 1.0);
        assert_eq!(rep.sign, 1);
    }

    #[test]
    fn xsin_loses_invertibility_at_candidate() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = model.default_grid().unwrap();
        let alpha0 = 5.94468752;
        let mu = trivial_measure(&model, &grid, alpha0);
        let op = nystrom_build(&model, &mu, alpha0).unwrap();
        let rep = det2(&op).unwrap();
        assert!(
            rep.min_abs_one_plus_kappa < 5e-4,
            "smallest |1 + kappa| = {}",
            rep.min_abs_one_plus_kappa
        );
    }

    #[test]
    fn det2_of_identity_perturbations() {
        // All kappa = 0 -> det2 = 1; a single kappa = -1 -> det2 = 0.
        let grid = Quadrature::default_grid(6.0).unwrap();
        let n = 4;
        let zero = NystromOperator {
            matrix: NMatrix::zeros(n, n),
            grid: grid.clone(),
            alpha: 1.0,
        };
        assert_eq!(det2(&zero).unwrap().det2, 1.0);

        let mut m = NMatrix::zeros(n, n);
        m[(0, 0)] = -1.0;
        let op = NystromOperator {
            matrix: m,
            grid,
            alpha: 1.0,
        };
        let rep = det2(&op).unwrap();
        assert!(rep.det2.abs() < 1e-15);
        assert_eq!(rep.sign, 0);
    }

    #[test]
    fn dawson_det2_vanishes_at_candidate() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        // Root of 1 - alpha m2(alpha) located by bisection (independent of
        // the spectral machinery).
        let f = |a: f64| {
            let mu = trivial_measure(&model, &grid, a);
            1.0 - a * mu.moment(|x| x * x).unwrap()
        };
        let (mut lo, mut hi) = (1.0, 3.0);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha0 = 0.5 * (lo + hi);
        let mu = trivial_measure(&model, &grid, alpha0);
        let op = nystrom_build(&model, &mu, alpha0).unwrap();
        let rep = det2(&op).unwrap();
        assert!(rep.det2.abs() < 1e-6, "det2 = {}", rep.det2);
    }

    #[test]
    fn similarity_invariant_spectrum() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let alpha = 4.0;
        let mu = trivial_measure(&model, &grid, alpha);
        let sym = nystrom_build(&model, &mu, alpha).unwrap();
        let raw = nystrom_collocation_matrix(&model, &mu, alpha).unwrap();

        let mut sym_eigs: Vec<f64> = real_matrix_eigenvalues(sym.matrix())
            .unwrap()
            .iter()
            .map(|k| k.re)
            .collect();
        let mut raw_eigs: Vec<f64> = real_matrix_eigenvalues(&raw)
            .unwrap()
            .iter()
            .map(|k| k.re)
            .collect();
        sym_eigs.sort_by(f64::total_cmp);
        raw_eigs.sort_by(f64::total_cmp);
        for (a, b) in sym_eigs.iter().zip(&raw_eigs) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn finite_rank_exactness() {
        // The big Nystrom matrix has at most l + m nonzero eigenvalues and
        // they match the small moment-matrix spectrum.
        for (name, alpha) in [("dawson", 1.7), ("xsin", 5.0)] {
            let model = catalog_lookup(name).unwrap();
            let grid = model.default_grid().unwrap();
            let mu = trivial_measure(&model, &grid, alpha);
            let op = nystrom_build(&model, &mu, alpha).unwrap();
            let (l, m) = model.ranks();

            let mut big: Vec<f64> = real_matrix_eigenvalues(op.matrix())
                .unwrap()
                .iter()
                .map(|k| k.re)
                .filter(|v| v.abs() > 1e-10)
                .collect();
            assert!(big.len() <= l + m, "{name}: got {} nonzero eigenvalues", big.len());

            let mut small: Vec<f64> = finite_rank_spectrum(&model, &mu, alpha)
                .unwrap()
                .iter()
                .map(|k| k.re)
                .filter(|v| v.abs() > 1e-10)
                .collect();
            big.sort_by(f64::total_cmp);
            small.sort_by(f64::total_cmp);
            assert_eq!(big.len(), small.len(), "{name}");
            for (a, b) in big.iter().zip(&small) {
                assert!((a - b).abs() < 1e-8, "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn conjugate_pairing_of_complex_eigenvalues() {
        let model = catalog_lookup("granular-sin").unwrap();
        let grid = Arc::new(Quadrature::build_grid(8.0, 10, 10).unwrap());
        let res =
            crate::selfconsistency::solve_density_fixed_point(&model, &grid, 0.2, 1e-9, 300)
                .unwrap();
        let op = nystrom_build(&model, &res.measure, 0.2).unwrap();
        let eigs = real_matrix_eigenvalues(op.matrix()).unwrap();
        let mut unpaired: Vec<Complex<f64>> =
            eigs.iter().filter(|k| k.im > 1e-10).cloned().collect();
        for k in eigs.iter().filter(|k| k.im < -1e-10) {
            let conj = k.conj();
            let pos = unpaired
                .iter()
                .position(|u| (u - conj).norm() < 1e-10 * (1.0 + conj.norm()));
            assert!(pos.is_some(), "no conjugate partner for {k}");
            unpaired.swap_remove(pos.unwrap());
        }
        assert!(unpaired.is_empty());
    }

    #[test]
    fn xsin_crossing_scan_brackets_candidate() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 20).unwrap());
        let scan = crossing_scan(&model, &grid, 5.5, 6.5, 21).unwrap();
        assert_eq!(scan.brackets.len(), 1, "brackets: {:?}", scan.brackets);
        let (lo, hi) = scan.brackets[0];
        assert!(lo < 5.94468752 && 5.94468752 < hi);
    }

    #[test]
    fn zero_kernel_scan_has_no_sign_change() {
        let mut model = catalog_lookup("dawson").unwrap();
        model.kernel = Kernel::FiniteRank(FiniteRankKernel::zero());
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let scan = crossing_scan(&model, &grid, 0.5, 3.5, 7).unwrap();
        assert!(scan.brackets.is_empty());
        for s in &scan.samples {
            assert_eq!(s.report.as_ref().unwrap().det2, 1.0);
        }
    }

    #[test]
    fn invertibility_trivial_and_psd_cases() {
        // V2 = 0: margin exactly 1.
        let model = catalog_lookup("dawson").unwrap();
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let (ok, margin) = invertibility_check(&model, &grid, 1.0).unwrap();
        assert!(ok);
        assert_relative_eq!(margin, 1.0, epsilon = 1e-12);

        // PSD J and alpha > 0: all kappa >= 0, margin >= 1.
        let psd = custom_even_model(1.0);
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let (ok, margin) = invertibility_check(&psd, &grid, 2.0).unwrap();
        assert!(ok);
        assert!(margin >= 1.0 - 1e-10, "margin {margin}");
    }

    #[test]
    fn synthetic_negative_j_flagged_noninvertible() {
        // Tune J = -c so that alpha * c * Var(x^2) = 1 on the branch solved
        // with that same coupling, putting an eigenvalue at -1. The variance
        // depends on c through the branch measure, so iterate the tuning.
        let alpha = 2.0;
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let vals: Vec<f64> = grid.nodes().iter().map(|&x| x * x).collect();
        let mut c = 0.5;
        for _ in 0..40 {
            let model = custom_even_model(-c);
            let branch = solve_trivial_branch(&model, &grid, alpha, &[0.0], 1e-12, 300).unwrap();
            assert!(branch.converged);
            let var = branch.measure.covariance_nodes(&vals, &vals);
            let next = 1.0 / (alpha * var);
            if (next - c).abs() < 1e-12 {
                c = next;
                break;
            }
            c = next;
        }
        let tuned = custom_even_model(-c);
        let (ok, margin) = invertibility_check(&tuned, &grid, alpha).unwrap();
        assert!(!ok, "margin {margin} should flag non-invertibility");
    }

    #[test]
    fn det2_report_consistent_with_eigenvalues() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = Arc::new(Quadrature::build_grid(6.0, 20, 10).unwrap());
        let mu = trivial_measure(&model, &grid, 4.0);
        let op = nystrom_build(&model, &mu, 4.0).unwrap();
        let rep = det2(&op).unwrap();
        let mut prod = Complex::new(1.0, 0.0);
        for k in &rep.eigenvalues {
            prod *= (Complex::new(1.0, 0.0) + k) * (-k).exp();
        }
        assert_relative_eq!(rep.det2, prod.re, max_relative = 1e-10);
    }

    #[test]
    fn det2_stable_under_panel_doubling() {
        for (name, alpha) in [("dawson", 1.5), ("xsin", 5.0)] {
            let model = catalog_lookup(name).unwrap();
            let coarse = Arc::new(Quadrature::build_grid(6.0, 20, 20).unwrap());
            let fine = Arc::new(Quadrature::build_grid(6.0, 20, 40).unwrap());
            let mut vals = Vec::new();
            for grid in [&coarse, &fine] {
                let mu = trivial_measure(&model, grid, alpha);
                let op = nystrom_build(&model, &mu, alpha).unwrap();
                vals.push(det2(&op).unwrap().det2);
            }
            let rel = ((vals[0] - vals[1]) / vals[1]).abs();
            assert!(rel < 1e-3, "{name}: det2 moved by {rel}");
        }
    }
}
