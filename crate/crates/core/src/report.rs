//! JSON-serializable views of solver and pipeline outputs, plus the
//! human-readable bifurcation summary.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::bifurcation::{BifurcationReport, DawsonAudit};
use crate::particles::SimReport;
use crate::selfconsistency::FixedPointResult;
use crate::spectral::{ScanOutcome, SpectralReport};

/// Row-major dense matrix with explicit dimensions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRepr {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeanFieldJson {
    pub r_v: Vec<f64>,
    pub r_k: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FixedPointJson {
    pub alpha: f64,
    pub meanfield: MeanFieldJson,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&FixedPointResult> for FixedPointJson {
    fn from(r: &FixedPointResult) -> Self {
        FixedPointJson {
            alpha: r.measure.alpha(),
            meanfield: MeanFieldJson {
                r_v: r.meanfield.r_v.clone(),
                r_k: r.meanfield.r_k.clone(),
            },
            residual: r.residual_inf,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReportJson {
    pub alpha: f64,
    /// Eigenvalues as `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub det2: f64,
    pub sign: i8,
    pub min_abs_one_plus_kappa: f64,
}

impl From<&SpectralReport> for SpectralReportJson {
    fn from(r: &SpectralReport) -> Self {
        SpectralReportJson {
            alpha: r.alpha,
            eigenvalues: r
                .eigenvalues
                .iter()
                .map(|k: &Complex<f64>| [k.re, k.im])
                .collect(),
            det2: r.det2,
            sign: r.sign,
            min_abs_one_plus_kappa: r.min_abs_one_plus_kappa,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BifurcationReportJson {
    pub model: String,
    pub alpha0: f64,
    pub g_alpha0: MatrixRepr,
    pub j_alpha0: MatrixRepr,
    pub m_k: MatrixRepr,
    pub block: MatrixRepr,
    pub rank_block: usize,
    pub rank_core: usize,
    pub multiplicity: usize,
    pub multiplicity_odd: bool,
    pub rank_condition_holds: bool,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub one_plus_m0: Option<f64>,
    pub v2_invertible: bool,
    pub v2_margin: f64,
    pub det2_below: f64,
    pub det2_above: f64,
    pub det2_sign_change: bool,
}

impl From<&BifurcationReport> for BifurcationReportJson {
    fn from(r: &BifurcationReport) -> Self {
        BifurcationReportJson {
            model: r.model.clone(),
            alpha0: r.alpha0,
            g_alpha0: (&r.g_alpha0).into(),
            j_alpha0: (&r.j_alpha0).into(),
            m_k: (&r.m_k).into(),
            block: (&r.block).into(),
            rank_block: r.rank_block,
            rank_core: r.rank_core,
            multiplicity: r.multiplicity,
            multiplicity_odd: r.multiplicity_odd,
            rank_condition_holds: r.rank_condition_holds,
            verdict: r.verdict,
            one_plus_m0: r.one_plus_m0,
            v2_invertible: r.v2_invertible,
            v2_margin: r.v2_margin,
            det2_below: r.det2_below,
            det2_above: r.det2_above,
            det2_sign_change: r.det2_sign_change,
        }
    }
}

/// Multi-line human-readable summary of a bifurcation report.
pub fn bifurcation_summary(r: &BifurcationReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("model:            {}\n", r.model));
    s.push_str(&format!("alpha0:           {:.10}\n", r.alpha0));
    s.push_str(&format!(
        "multiplicity:     {} ({})\n",
        r.multiplicity,
        if r.multiplicity_odd { "odd" } else { "even" }
    ));
    s.push_str(&format!(
        "block rank:       {} (core rank {}, condition {})\n",
        r.rank_block,
        r.rank_core,
        if r.rank_condition_holds { "holds" } else { "fails" }
    ));
    if let Some(v) = r.one_plus_m0 {
        s.push_str(&format!("1 + M0~:          {v:.8}\n"));
    }
    s.push_str(&format!(
        "V2 invertibility: margin {:.3e} ({})\n",
        r.v2_margin,
        if r.v2_invertible { "ok" } else { "violated" }
    ));
    s.push_str(&format!(
        "det2 crossing:    {:.6e} -> {:.6e} ({})\n",
        r.det2_below,
        r.det2_above,
        if r.det2_sign_change {
            "sign change"
        } else {
            "no sign change"
        }
    ));
    s.push_str(&format!(
        "verdict:          {}\n",
        if r.verdict {
            "bifurcation point certified"
        } else {
            "not certified"
        }
    ));
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct DawsonCandidateJson {
    pub alpha0: f64,
    pub sigma0: f64,
    pub in_unit_interval: bool,
    pub m2: f64,
    pub m4: f64,
    pub m6: f64,
    pub candidate_residual: f64,
    pub ito_residual_m2: f64,
    pub ito_residual_m4: f64,
    pub hankel: f64,
    pub m0_integral: f64,
    pub m0_closed: f64,
    pub one_plus_m0_integral: f64,
    pub one_plus_m0_closed: f64,
    pub m4_minus_m2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DawsonAuditJson {
    pub beta: f64,
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<DawsonCandidateJson>,
}

impl From<&DawsonAudit> for DawsonAuditJson {
    fn from(a: &DawsonAudit) -> Self {
        DawsonAuditJson {
            beta: a.beta,
            found: a.candidate.is_some(),
            candidate: a.candidate.as_ref().map(|c| DawsonCandidateJson {
                alpha0: c.alpha0,
                sigma0: c.sigma0,
                in_unit_interval: c.in_unit_interval,
                m2: c.m2,
                m4: c.m4,
                m6: c.m6,
                candidate_residual: c.candidate_residual,
                ito_residual_m2: c.ito_residual_m2,
                ito_residual_m4: c.ito_residual_m4,
                hankel: c.hankel,
                m0_integral: c.m0_integral,
                m0_closed: c.m0_closed,
                one_plus_m0_integral: c.one_plus_m0_integral,
                one_plus_m0_closed: c.one_plus_m0_closed,
                m4_minus_m2: c.m4_minus_m2,
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentJson {
    pub order: u32,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReportJson {
    pub seed: u64,
    pub alpha: f64,
    pub sigma: f64,
    pub moments: Vec<MomentJson>,
    pub histogram_lo: f64,
    pub histogram_hi: f64,
    pub histogram: Vec<u64>,
    pub n_batches: usize,
    pub steps: usize,
    pub burn_in_steps: usize,
}

impl From<&SimReport> for SimReportJson {
    fn from(r: &SimReport) -> Self {
        SimReportJson {
            seed: r.seed,
            alpha: r.alpha,
            sigma: r.sigma,
            moments: r
                .moments
                .iter()
                .map(|(&order, m)| MomentJson {
                    order,
                    mean: m.mean,
                    std_error: m.std_error,
                })
                .collect(),
            histogram_lo: r.histogram.lo,
            histogram_hi: r.histogram.hi,
            histogram: r.histogram.counts.clone(),
            n_batches: r.n_batches,
            steps: r.steps,
            burn_in_steps: r.burn_in_steps,
        }
    }
}

/// CSV rows `(alpha, det2, sign, min_abs_one_plus_kappa)` of a determinant
/// scan; invalid samples keep the row with empty value fields.
pub fn scan_csv(scan: &ScanOutcome) -> String {
    let mut out = String::from("alpha,det2,sign,min_abs_one_plus_kappa\n");
    for s in &scan.samples {
        match &s.report {
            Some(r) => out.push_str(&format!(
                "{},{},{},{}\n",
                s.alpha, r.det2, r.sign, r.min_abs_one_plus_kappa
            )),
            None => out.push_str(&format!("{},,,\n", s.alpha)),
        }
    }
    out
}
