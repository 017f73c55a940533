//! Fixed-point solvers for the self-consistency equation.
//!
//! Finite-rank kernels reduce the measure-valued problem to finitely many
//! unknowns `r_i = mu(v_i), mu(k_i)`; convolution kernels are iterated
//! directly on densities. Both use damped Picard iteration; the finite-rank
//! path switches to a finite-difference Newton polish near the solution.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gibbs::{build_gibbs, build_gibbs_convolution, GibbsMeasure, MeanField};
use crate::model::ModelSpec;
use crate::quadrature::Quadrature;

/// Damping bounds for the adaptive Picard step.
const LAMBDA_MIN: f64 = 0.05;
const LAMBDA_MAX: f64 = 1.0;
/// Residual below which the finite-rank solver tries Newton steps.
const NEWTON_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub meanfield: MeanField,
    pub measure: GibbsMeasure,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after each iteration.
    pub trace: Vec<f64>,
}

/// One application of the self-consistency map: build the Gibbs measure at
/// `mf` and return its mean-field vector.
pub fn selfconsistency_map(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    mf: &MeanField,
) -> Result<MeanField> {
    let mu = build_gibbs(model, grid, alpha, mf)?;
    meanfield_of(model, &mu)
}

/// The mean-field vector of an already-built measure.
pub fn meanfield_of(model: &ModelSpec, mu: &GibbsMeasure) -> Result<MeanField> {
    let kernel = model
        .finite_rank()
        .ok_or_else(|| Error::invalid("mean-field reduction needs a finite-rank kernel"))?;
    let mut r_v = Vec::with_capacity(kernel.l());
    for b in &kernel.v_basis {
        let f = b.f.clone();
        r_v.push(mu.moment(move |x| f(x))?);
    }
    let mut r_k = Vec::with_capacity(kernel.m());
    for b in &kernel.k_basis {
        let f = b.f.clone();
        r_k.push(mu.moment(move |x| f(x))?);
    }
    Ok(MeanField::new(r_v, r_k))
}

fn pack(mf: &MeanField) -> DVector<f64> {
    DVector::from_iterator(
        mf.len(),
        mf.r_v.iter().chain(mf.r_k.iter()).cloned(),
    )
}

fn unpack(v: &DVector<f64>, l: usize, m: usize) -> MeanField {
    MeanField::new(v.as_slice()[..l].to_vec(), v.as_slice()[l..l + m].to_vec())
}

/// Solve `r = F(r)` for a finite-rank model by damped Picard iteration with a
/// Newton polish. Non-convergence within `max_iter` is reported in the
/// result, not as an error.
pub fn solve_fixed_point(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    start: &MeanField,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    solve_masked(model, grid, alpha, start, tol, max_iter, false)
}

/// Solve the branch with the odd kernel switched off: the odd block of the
/// mean field is pinned to zero and only the even block is iterated. This is
/// the family from which bifurcating branches emanate.
pub fn solve_trivial_branch(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    start_rv: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    let (l, m) = model.ranks();
    if start_rv.len() != l {
        return Err(Error::invalid("trivial-branch start has wrong length"));
    }
    let start = MeanField::new(start_rv.to_vec(), vec![0.0; m]);
    solve_masked(model, grid, alpha, &start, tol, max_iter, true)
}

fn solve_masked(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    start: &MeanField,
    tol: f64,
    max_iter: usize,
    pin_odd: bool,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let (l, m) = model.ranks();
    let dim = if pin_odd { l } else { l + m };

    // Map on the active block only; the pinned odd block stays zero.
    let apply = |r: &DVector<f64>| -> Result<(DVector<f64>, GibbsMeasure)> {
        let mf = if pin_odd {
            MeanField::new(r.as_slice().to_vec(), vec![0.0; m])
        } else {
            unpack(r, l, m)
        };
        let mu = build_gibbs(model, grid, alpha, &mf)?;
        let out = meanfield_of(model, &mu)?;
        let packed = if pin_odd {
            DVector::from_vec(out.r_v.clone())
        } else {
            pack(&out)
        };
        Ok((packed, mu))
    };

    let mut r = if pin_odd {
        DVector::from_vec(start.r_v.clone())
    } else {
        pack(start)
    };

    let (mut fr, mut mu) = apply(&r)?;
    let mut residual = (&fr - &r).amax();
    if dim == 0 {
        residual = 0.0;
    }
    let mut trace = vec![residual];
    let mut lambda = LAMBDA_MAX;
    let mut iterations = 0usize;

    while residual >= tol && iterations < max_iter {
        iterations += 1;
        let mut stepped = false;

        if residual < NEWTON_THRESHOLD {
            // Newton on F(r) - r with a forward-difference Jacobian.
            let mut jac = DMatrix::<f64>::zeros(dim, dim);
            let base = &fr - &r;
            let mut ok = true;
            for j in 0..dim {
                let h = 1e-6 * (1.0 + r[j].abs());
                let mut rj = r.clone();
                rj[j] += h;
                match apply(&rj) {
                    Ok((frj, _)) => {
                        let col = (&frj - &rj - &base) / h;
                        jac.set_column(j, &col);
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                if let Some(lu) = nalgebra::LU::new(jac.clone()).solve(&(-&base)) {
                    let candidate = &r + &lu;
                    if let Ok((fc, muc)) = apply(&candidate) {
                        let res_c = (&fc - &candidate).amax();
                        if res_c.is_finite() && res_c < residual {
                            r = candidate;
                            fr = fc;
                            mu = muc;
                            residual = res_c;
                            stepped = true;
                        }
                    }
                }
            }
        }

        if !stepped {
            // Damped Picard step.
            let candidate = (1.0 - lambda) * &r + lambda * &fr;
            let (fc, muc) = apply(&candidate)?;
            let res_c = (&fc - &candidate).amax();
            if res_c <= residual {
                lambda = (lambda * 1.2).min(LAMBDA_MAX);
            } else {
                lambda = (lambda * 0.5).max(LAMBDA_MIN);
            }
            r = candidate;
            fr = fc;
            mu = muc;
            residual = res_c;
        }

        trace.push(residual);
    }

    let meanfield = if pin_odd {
        MeanField::new(r.as_slice().to_vec(), vec![0.0; m])
    } else {
        unpack(&r, l, m)
    };
    Ok(FixedPointResult {
        meanfield,
        measure: mu,
        residual_inf: residual,
        iterations,
        converged: residual < tol,
        trace,
    })
}

#[derive(Debug)]
pub struct MultiStartOutcome {
    /// One representative per distinct converged fixed point.
    pub distinct: Vec<FixedPointResult>,
    /// Starts whose solves did not converge (dropped from `distinct`).
    pub non_converged: usize,
}

/// Run [`solve_fixed_point`] from every start and cluster the converged
/// results; mean fields closer than `10 * tol` in sup-norm are considered the
/// same fixed point.
pub fn multi_start_solve(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    starts: &[MeanField],
    tol: f64,
) -> Result<MultiStartOutcome> {
    if starts.is_empty() {
        return Err(Error::invalid("need at least one start"));
    }
    let max_iter = 500;
    let mut distinct: Vec<FixedPointResult> = Vec::new();
    let mut non_converged = 0usize;
    for start in starts {
        let res = solve_fixed_point(model, grid, alpha, start, tol, max_iter)?;
        if !res.converged {
            non_converged += 1;
            continue;
        }
        let duplicate = distinct
            .iter()
            .any(|d| d.meanfield.inf_distance(&res.meanfield) < 10.0 * tol);
        if !duplicate {
            distinct.push(res);
        }
    }
    Ok(MultiStartOutcome {
        distinct,
        non_converged,
    })
}

/// Picard iteration on densities for convolution kernels:
/// `rho_{n+1} = normalize(exp{-theta(alpha) V0 + alpha (H * rho_n)})`,
/// damped like the finite-rank solver, converged when the sup-node change of
/// the mapped density falls below `tol`.
pub fn solve_density_fixed_point(
    model: &ModelSpec,
    grid: &Arc<Quadrature>,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if model.general_kernel().is_none() {
        return Err(Error::invalid(
            "density iteration needs a convolution kernel; use solve_fixed_point",
        ));
    }

    // Start from the pure confinement Gibbs density (zero interaction).
    let zero = vec![0.0; grid.node_count()];
    let mut mu = build_gibbs_convolution(model, grid, alpha, &zero)?;
    let mut rho: Vec<f64> = mu.density().to_vec();

    let sup_diff = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };

    let mut mapped = build_gibbs_convolution(model, grid, alpha, &rho)?;
    let mut residual = sup_diff(mapped.density(), &rho);
    let mut trace = vec![residual];
    let mut lambda = LAMBDA_MAX;
    let mut iterations = 0usize;

    while residual >= tol && iterations < max_iter {
        iterations += 1;
        let candidate: Vec<f64> = rho
            .iter()
            .zip(mapped.density())
            .map(|(old, new)| (1.0 - lambda) * old + lambda * new)
            .collect();
        let mapped_c = build_gibbs_convolution(model, grid, alpha, &candidate)?;
        let res_c = sup_diff(mapped_c.density(), &candidate);
        if res_c <= residual {
            lambda = (lambda * 1.2).min(LAMBDA_MAX);
        } else {
            lambda = (lambda * 0.5).max(LAMBDA_MIN);
        }
        rho = candidate;
        mapped = mapped_c;
        residual = res_c;
        trace.push(residual);
        mu = build_gibbs_convolution(model, grid, alpha, &rho)?;
    }

    Ok(FixedPointResult {
        meanfield: MeanField::zero(0, 0),
        measure: mu,
        residual_inf: residual,
        iterations,
        converged: residual < tol,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{catalog_lookup, Differentiable, FiniteRankKernel, Kernel, ModelSpec, TemperatureMap};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix as NMatrix;

    fn zero_coupled_model() -> ModelSpec {
        // A k-basis present but decoupled (G = 0): the map must ignore the
        // mean field entirely.
        ModelSpec {
            name: "decoupled".to_string(),
            v0: Differentiable::new(|x| x * x / 2.0, |x| x),
            kernel: Kernel::FiniteRank(FiniteRankKernel {
                v1: Differentiable::zero(),
                v_basis: Vec::new(),
                j: NMatrix::zeros(0, 0),
                k_basis: vec![Differentiable::new(|x| x, |_| 1.0)],
                g: NMatrix::from_element(1, 1, 0.0),
                k1: None,
            }),
            temperature: TemperatureMap::linear(1.0, (0.05, 50.0)),
            domain_half_width: 8.0,
            beta: 1.0,
            dimension: crate::model::Dimension::One,
            symmetric: true,
        }
    }

    #[test]
    fn symmetric_model_zero_meanfield_maps_to_zero() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = model.default_grid().unwrap();
        let out = selfconsistency_map(&model, &grid, 3.0, &MeanField::zero_for(&model)).unwrap();
        for r in &out.r_k {
            assert!(r.abs() < 1e-10, "odd moment {r}");
        }
    }

    #[test]
    fn decoupled_map_is_constant() {
        let model = zero_coupled_model();
        let grid = model.default_grid().unwrap();
        let a = selfconsistency_map(&model, &grid, 1.0, &MeanField::new(vec![], vec![0.0])).unwrap();
        let b = selfconsistency_map(&model, &grid, 1.0, &MeanField::new(vec![], vec![0.7])).unwrap();
        assert_eq!(a.r_k, b.r_k);
    }

    #[test]
    fn map_agrees_with_finer_grid_oracle() {
        // Independent oracle: the same map evaluated on a 4x finer grid.
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let fine = Arc::new(
            crate::quadrature::Quadrature::build_grid(model.domain_half_width, 20, 160).unwrap(),
        );
        let mf = MeanField::new(vec![], vec![0.5]);
        let coarse_out = selfconsistency_map(&model, &grid, 2.0, &mf).unwrap();
        let fine_out = selfconsistency_map(&model, &fine, 2.0, &mf).unwrap();
        assert!(
            (coarse_out.r_k[0] - fine_out.r_k[0]).abs() < 1e-9,
            "{} vs {}",
            coarse_out.r_k[0],
            fine_out.r_k[0]
        );
    }

    #[test]
    fn dawson_high_temperature_unique_symmetric_branch() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        // beta = 1, sigma = 2 -> alpha = 0.5.
        let res = solve_fixed_point(
            &model,
            &grid,
            0.5,
            &MeanField::zero_for(&model),
            1e-12,
            200,
        )
        .unwrap();
        assert!(res.converged);
        assert!(res.residual_inf < 1e-10);
        assert!(res.meanfield.r_k[0].abs() < 1e-10);
    }

    #[test]
    fn xsin_zero_is_fixed_point_at_candidate() {
        let model = catalog_lookup("xsin").unwrap();
        let grid = model.default_grid().unwrap();
        let mf = MeanField::zero_for(&model);
        let out = selfconsistency_map(&model, &grid, 5.94468752, &mf).unwrap();
        assert!(out.inf_distance(&mf) < 1e-10);
    }

    #[test]
    fn dawson_low_temperature_magnetized_branches() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        // beta = 1, sigma = 0.8 -> alpha = 3.125, below the critical sigma.
        let alpha = 3.125;
        let plus = solve_fixed_point(
            &model,
            &grid,
            alpha,
            &MeanField::new(vec![], vec![0.8]),
            1e-10,
            500,
        )
        .unwrap();
        assert!(plus.converged);
        let m = plus.meanfield.r_k[0];
        assert!(m > 0.1, "expected a magnetized branch, got {m}");

        // The mirrored start converges to the mirrored fixed point.
        let minus = solve_fixed_point(
            &model,
            &grid,
            alpha,
            &plus.meanfield.flipped_k(),
            1e-10,
            500,
        )
        .unwrap();
        assert!(minus.converged);
        assert_relative_eq!(minus.meanfield.r_k[0], -m, max_relative = 1e-6);
    }

    #[test]
    fn trace_decreases_once_newton_engages() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let res = solve_fixed_point(
            &model,
            &grid,
            3.125,
            &MeanField::new(vec![], vec![0.8]),
            1e-12,
            500,
        )
        .unwrap();
        assert!(res.converged);
        let start = res.trace.iter().position(|&r| r < 1e-3).unwrap();
        for w in res.trace[start..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "trace not monotone: {w:?}");
        }
    }

    #[test]
    fn non_convergence_is_data() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let res = solve_fixed_point(
            &model,
            &grid,
            3.125,
            &MeanField::new(vec![], vec![0.8]),
            1e-12,
            1,
        )
        .unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn multi_start_counts_branches() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let starts = [
            MeanField::new(vec![], vec![-1.0]),
            MeanField::new(vec![], vec![0.0]),
            MeanField::new(vec![], vec![1.0]),
        ];
        //

        // sigma = 2 (alpha = 0.5): one fixed point.
        let high = multi_start_solve(&model, &grid, 0.5, &starts, 1e-10).unwrap();
        assert_eq!(high.distinct.len(), 1);
        // sigma = 0.6 (alpha ~ 5.56): three fixed points.
        let low = multi_start_solve(&model, &grid, 2.0 / 0.36, &starts, 1e-10).unwrap();
        assert_eq!(low.distinct.len(), 3);
    }

    #[test]
    fn density_iteration_with_zero_kernel_converges_immediately() {
        let mut model = catalog_lookup("granular-sin").unwrap();
        model.kernel = Kernel::General(crate::model::GeneralKernel {
            h: Differentiable::zero(),
        });
        let grid = model.default_grid().unwrap();
        let res = solve_density_fixed_point(&model, &grid, 1.0, 1e-12, 50).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);

        let pure = build_gibbs_convolution(&model, &grid, 1.0, &vec![0.0; grid.node_count()])
            .unwrap();
        for (a, b) in res.measure.density().iter().zip(pure.density()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn granular_sin_density_fixed_point() {
        let model = catalog_lookup("granular-sin").unwrap();
        let grid = model.default_grid().unwrap();
        let res = solve_density_fixed_point(&model, &grid, 0.2, 1e-9, 300).unwrap();
        assert!(res.converged, "residual {}", res.residual_inf);
        assert!(res.residual_inf < 1e-9);
        assert_relative_eq!(res.measure.moment(|_| 1.0).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn two_path_equivalence_dawson() {
        // The same model through the finite-rank reduction and through the
        // convolution kernel H(u) = -u^2/2 must give the same measure.
        let alpha = 0.5;
        let fr_model = catalog_lookup("dawson").unwrap();
        let grid = fr_model.default_grid().unwrap();
        let fr = solve_fixed_point(
            &fr_model,
            &grid,
            alpha,
            &MeanField::zero_for(&fr_model),
            1e-12,
            300,
        )
        .unwrap();
        assert!(fr.converged);

        let conv_model = ModelSpec::dawson_convolution(1.0);
        let conv = solve_density_fixed_point(&conv_model, &grid, alpha, 1e-12, 300).unwrap();
        assert!(conv.converged);

        let sup: f64 = fr
            .measure
            .density()
            .iter()
            .zip(conv.measure.density())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "sup-node density difference {sup}");
    }

    #[test]
    fn converged_results_satisfy_fixed_point_residual() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        let tol = 1e-10;
        let res = solve_fixed_point(
            &model,
            &grid,
            3.125,
            &MeanField::new(vec![], vec![0.5]),
            tol,
            500,
        )
        .unwrap();
        assert!(res.converged);
        let again = selfconsistency_map(&model, &grid, 3.125, &res.meanfield).unwrap();
        assert!(again.inf_distance(&res.meanfield) < tol);
    }

    #[test]
    fn empty_starts_rejected() {
        let model = catalog_lookup("dawson").unwrap();
        let grid = model.default_grid().unwrap();
        assert!(multi_start_solve(&model, &grid, 0.5, &[], 1e-10).is_err());
    }
}
