//! Euler-Maruyama simulation of the N-particle mean-field system.
//!
//! The particles evolve under
//!
//! ```text
//! dX_i = -[a0 V0'(X_i) + c W'(X_i; empirical measure)] dt + sigma dB_i
//! ```
//!
//! with `a0 = theta(alpha) sigma^2 / 2` and `c = alpha sigma^2 / 2`, where
//! `alpha` solves `theta(alpha) = 2 / sigma^2`. The invariant law of the
//! mean-field limit is then exactly the Gibbs measure the fixed-point
//! solvers produce, which is what makes the runs usable as independent
//! cross-validation. The mean-field drift is computed from the empirical
//! measure itself, never from a solved density.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Kernel, ModelSpec};

/// Moment orders reported by every run.
pub const MOMENT_ORDERS: [u32; 4] = [1, 2, 4, 6];
const HISTOGRAM_BINS: usize = 101;
const TARGET_BATCHES: usize = 20;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub n_particles: usize,
    pub dt: f64,
    pub t_horizon: f64,
    /// Fraction of the horizon discarded before measuring.
    pub burn_in: f64,
    pub seed: u64,
    pub sigma: f64,
    pub beta: f64,
    /// All particles start at this point.
    pub init: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub seed: u64,
    /// The equation parameter the run targets, from `theta(alpha) = 2/sigma^2`.
    pub alpha: f64,
    pub sigma: f64,
    /// Time-averaged empirical moments with batch-means standard errors.
    pub moments: BTreeMap<u32, MomentEstimate>,
    pub histogram: Histogram,
    pub n_batches: usize,
    pub steps: usize,
    pub burn_in_steps: usize,
}

/// Estimate the stiffest confinement curvature on the domain, by finite
/// differences of the analytic gradient.
fn drift_stiffness(model: &ModelSpec) -> f64 {
    let l = model.domain_half_width;
    let h = l / 2000.0;
    let mut worst = 0.0f64;
    for i in 0..=400 {
        let x = -l + 2.0 * l * i as f64 / 400.0;
        let d2 = (model.v0.deriv(x + h) - model.v0.deriv(x - h)) / (2.0 * h);
        worst = worst.max(d2.abs());
    }
    worst
}

pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    if cfg.n_particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if !(cfg.dt > 0.0) || !(cfg.t_horizon >= cfg.dt) {
        return Err(Error::invalid("need 0 < dt <= t_horizon"));
    }
    if !(0.0..1.0).contains(&cfg.burn_in) {
        return Err(Error::invalid("burn_in must lie in [0, 1)"));
    }
    if (cfg.beta - cfg.model.beta).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "config beta = {} disagrees with the model's beta = {}; rebuild the model",
            cfg.beta, cfg.model.beta
        )));
    }

    let model = &cfg.model;
    let alpha = model.temperature.alpha_for_sigma(cfg.sigma)?;
    let sigma = cfg.sigma;
    let a0 = model.temperature.theta(alpha) * sigma * sigma / 2.0;
    let c = alpha * sigma * sigma / 2.0;

    let stiffness = a0 * drift_stiffness(model);
    if cfg.dt * stiffness >= 0.5 {
        return Err(Error::invalid(format!(
            "dt = {} too large for drift stiffness {stiffness:.3e} (need dt * stiffness < 0.5)",
            cfg.dt
        )));
    }

    let steps = (cfg.t_horizon / cfg.dt).round() as usize;
    let burn_in_steps = ((steps as f64) * cfg.burn_in).floor() as usize;
    let measure_steps = steps - burn_in_steps;
    if measure_steps == 0 {
        return Err(Error::invalid("burn-in leaves no measurement steps"));
    }
    let n_batches = TARGET_BATCHES.min(measure_steps);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_particles;
    let mut xs = vec![cfg.init; n];
    let escape = 10.0 * model.domain_half_width;
    let noise_scale = sigma * cfg.dt.sqrt();

    // Per-batch sums of the instantaneous empirical moments.
    let mut batch_sums: Vec<[f64; MOMENT_ORDERS.len()]> =
        vec![[0.0; MOMENT_ORDERS.len()]; n_batches];
    let mut batch_counts = vec![0usize; n_batches];

    let mut drifts = vec![0.0f64; n];
    for step in 0..steps {
        // Mean-field drift from the empirical measure at the current time.
        match &model.kernel {
            Kernel::FiniteRank(kernel) => {
                let l = kernel.l();
                let m = kernel.m();
                let mut s = vec![0.0; l];
                let mut t = vec![0.0; m];
                for &x in &xs {
                    for (i, b) in kernel.v_basis.iter().enumerate() {
                        s[i] += b.eval(x);
                    }
                    for (i, b) in kernel.k_basis.iter().enumerate() {
                        t[i] += b.eval(x);
                    }
                }
                for v in &mut s {
                    *v /= n as f64;
                }
                for v in &mut t {
                    *v /= n as f64;
                }
                let js: Vec<f64> = (0..l)
                    .map(|i| (0..l).map(|j| kernel.j[(i, j)] * s[j]).sum())
                    .collect();
                let gt: Vec<f64> = (0..m)
                    .map(|i| (0..m).map(|j| kernel.g[(i, j)] * t[j]).sum())
                    .collect();
                for (idx, &x) in xs.iter().enumerate() {
                    let mut w = kernel.v1.deriv(x);
                    for (i, b) in kernel.v_basis.iter().enumerate() {
                        w += js[i] * b.deriv(x);
                    }
                    for (i, b) in kernel.k_basis.iter().enumerate() {
                        w += gt[i] * b.deriv(x);
                    }
                    drifts[idx] = -(a0 * model.v0.deriv(x) + c * w);
                }
            }
            Kernel::General(kernel) => {
                // Exact pairwise interaction; O(N^2) per step.
                for (idx, &x) in xs.iter().enumerate() {
                    let mut conv = 0.0;
                    for &y in &xs {
                        conv += kernel.h.deriv(x - y);
                    }
                    conv /= n as f64;
                    drifts[idx] = -(a0 * model.v0.deriv(x) - c * conv);
                }
            }
        }

        for (idx, x) in xs.iter_mut().enumerate() {
            let xi: f64 = rng.sample(StandardNormal);
            *x += drifts[idx] * cfg.dt + noise_scale * xi;
            if x.abs() > escape {
                return Err(Error::Numeric(format!(
                    "particle escaped to {x:.3e} at step {step}; reduce dt = {}",
                    cfg.dt
                )));
            }
        }

        if step >= burn_in_steps {
            let k = step - burn_in_steps;
            let batch = k * n_batches / measure_steps;
            let sums = &mut batch_sums[batch];
            for &x in &xs {
                let x2 = x * x;
                let x4 = x2 * x2;
                sums[0] += x;
                sums[1] += x2;
                sums[2] += x4;
                sums[3] += x4 * x2;
            }
            batch_counts[batch] += 1;
        }
    }

    let mut moments = BTreeMap::new();
    for (oi, &order) in MOMENT_ORDERS.iter().enumerate() {
        let means: Vec<f64> = batch_sums
            .iter()
            .zip(&batch_counts)
            .map(|(sums, &cnt)| sums[oi] / (cnt as f64 * n as f64))
            .collect();
        let mean = means.iter().sum::<f64>() / n_batches as f64;
        let std_error = if n_batches > 1 {
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
                / (n_batches as f64 - 1.0);
            (var / n_batches as f64).sqrt()
        } else {
            f64::INFINITY
        };
        moments.insert(order, MomentEstimate { mean, std_error });
    }

    let (lo, hi) = (-model.domain_half_width, model.domain_half_width);
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for &x in &xs {
        let t = ((x - lo) / (hi - lo) * HISTOGRAM_BINS as f64).floor();
        let bin = (t.max(0.0) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }

    Ok(SimReport {
        seed: cfg.seed,
        alpha,
        sigma,
        moments,
        histogram: Histogram { lo, hi, counts },
        n_batches,
        steps,
        burn_in_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::MeanField;
    use crate::model::catalog_lookup;
    use crate::selfconsistency::solve_fixed_point;

    fn dawson_cfg() -> SimConfig {
        SimConfig {
            model: catalog_lookup("dawson").unwrap(),
            n_particles: 2000,
            dt: 2e-3,
            t_horizon: 20.0,
            burn_in: 0.3,
            seed: 42,
            sigma: 2.0,
            beta: 1.0,
            init: 0.0,
        }
    }

    #[test]
    fn deterministic_reruns_are_bit_identical() {
        let cfg = dawson_cfg();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn high_temperature_mean_is_zero_within_error() {
        let cfg = dawson_cfg();
        let rep = simulate(&cfg).unwrap();
        let m1 = rep.moments[&1];
        assert!(
            m1.mean.abs() < 4.0 * m1.std_error,
            "mean {} vs SE {}",
            m1.mean,
            m1.std_error
        );
    }

    #[test]
    fn m2_matches_quadrature_fixed_point() {
        let cfg = dawson_cfg();
        let rep = simulate(&cfg).unwrap();
        let grid = cfg.model.default_grid().unwrap();
        let fp = solve_fixed_point(
            &cfg.model,
            &grid,
            rep.alpha,
            &MeanField::zero_for(&cfg.model),
            1e-12,
            300,
        )
        .unwrap();
        let m2 = fp.measure.moment(|x| x * x).unwrap();
        let est = rep.moments[&2];
        assert!(
            (est.mean - m2).abs() < 4.0 * est.std_error,
            "empirical {} vs quadrature {m2} (SE {})",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn seed_sensitivity_within_mutual_error() {
        let mut cfg = dawson_cfg();
        let a = simulate(&cfg).unwrap();
        cfg.seed = 4242;
        let b = simulate(&cfg).unwrap();
        let (ma, mb) = (a.moments[&2], b.moments[&2]);
        assert!(
            (ma.mean - mb.mean).abs() < 6.0 * (ma.std_error + mb.std_error),
            "{} vs {}",
            ma.mean,
            mb.mean
        );
    }

    #[test]
    fn dt_refinement_shifts_m2_within_error() {
        let cfg = dawson_cfg();
        let coarse = simulate(&cfg).unwrap();
        let mut fine_cfg = dawson_cfg();
        fine_cfg.dt = cfg.dt / 2.0;
        let fine = simulate(&fine_cfg).unwrap();
        let (mc, mf) = (coarse.moments[&2], fine.moments[&2]);
        assert!(
            (mc.mean - mf.mean).abs() < 2.0 * (mc.std_error + mf.std_error),
            "{} vs {}",
            mc.mean,
            mf.mean
        );
    }

    #[test]
    fn magnetized_branch_tracked_from_biased_start() {
        let mut cfg = dawson_cfg();
        cfg.sigma = 0.6; // below the critical value
        cfg.init = 1.0;
        cfg.dt = 1e-3;
        let rep = simulate(&cfg).unwrap();
        let grid = cfg.model.default_grid().unwrap();
        let fp = solve_fixed_point(
            &cfg.model,
            &grid,
            rep.alpha,
            &MeanField::new(vec![], vec![1.0]),
            1e-12,
            500,
        )
        .unwrap();
        assert!(fp.converged);
        let target = fp.meanfield.r_k[0];
        let m1 = rep.moments[&1];
        assert!(target > 0.5);
        assert!(
            (m1.mean - target).abs() < 4.0 * m1.std_error.max(0.02),
            "empirical mean {} vs branch mean {target}",
            m1.mean
        );
    }

    #[test]
    fn oversized_dt_rejected_by_stability_guard() {
        let mut cfg = dawson_cfg();
        cfg.dt = 0.1;
        match simulate(&cfg) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("dt"), "{msg}"),
            other => panic!("expected stability rejection, got {other:?}"),
        }
    }

    #[test]
    fn beta_mismatch_rejected() {
        let mut cfg = dawson_cfg();
        cfg.beta = 2.0;
        assert!(simulate(&cfg).is_err());
    }
}
