//! Loading user models from JSON documents.
//!
//! Schema:
//!
//! ```json
//! {
//!   "name": "my-model",
//!   "V0": "x^4/4 - x^2/2",
//!   "theta": {"kind": "linear", "slope": 1.0},
//!   "beta": 1.0,
//!   "V1": "x^2/2",
//!   "v_basis": [],
//!   "J": [],
//!   "k_basis": ["x"],
//!   "G": [[-1.0]],
//!   "domain_L": 6.0
//! }
//! ```
//!
//! `theta` may instead be `{"kind": "expr", "body": ..., "deriv": ...}` with
//! expressions in the parameter (written as `x`). Potentials use the grammar
//! of [`crate::expr`], so loaded models carry exact symbolic gradients.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{
    Differentiable, Dimension, FiniteRankKernel, Kernel, ModelSpec, TemperatureMap,
};

/// Range assigned to loaded models; the schema does not carry one.
const DEFAULT_ALPHA_RANGE: (f64, f64) = (0.05, 50.0);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(rename = "V0")]
    v0: String,
    theta: RawTheta,
    beta: f64,
    #[serde(rename = "V1")]
    v1: Option<String>,
    #[serde(default)]
    v_basis: Vec<String>,
    #[serde(rename = "J", default)]
    j: Vec<Vec<f64>>,
    #[serde(default)]
    k_basis: Vec<String>,
    #[serde(rename = "G", default)]
    g: Vec<Vec<f64>>,
    #[serde(rename = "domain_L")]
    domain_l: f64,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawTheta {
    Linear { slope: f64 },
    Expr { body: String, deriv: String },
}

/// Parse and validate a JSON model document.
pub fn load_model(json: &str) -> Result<ModelSpec> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let raw: RawModel = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        pointer: format!("/{}", e.path().to_string().replace('.', "/")),
        message: e.inner().to_string(),
    })?;
    build(raw)
}

/// As [`load_model`], reading the document from a file.
pub fn load_model_file(path: &std::path::Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    load_model(&text)
}

fn parse_fn(src: &str, pointer: &str) -> Result<Differentiable> {
    let ast = Expr::parse(src, pointer)?;
    let d = ast.diff(pointer)?;
    Ok(Differentiable {
        f: ast.into_fn(),
        df: d.into_fn(),
    })
}

fn parse_matrix(rows: &[Vec<f64>], dim: usize, pointer: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim {
        return Err(Error::Validation {
            pointer: pointer.to_string(),
            message: format!("expected {dim} rows, got {}", rows.len()),
        });
    }
    let mut m = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Validation {
                pointer: format!("{pointer}/{i}"),
                message: format!("expected {dim} columns, got {}", row.len()),
            });
        }
        for (jx, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation {
                    pointer: format!("{pointer}/{i}/{jx}"),
                    message: "entries must be finite".to_string(),
                });
            }
            m[(i, jx)] = v;
        }
    }
    if m != m.transpose() {
        return Err(Error::Validation {
            pointer: pointer.to_string(),
            message: "matrix must be symmetric".to_string(),
        });
    }
    Ok(m)
}

fn build(raw: RawModel) -> Result<ModelSpec> {
    if !(raw.domain_l > 0.0) {
        return Err(Error::Validation {
            pointer: "/domain_L".to_string(),
            message: "must be positive".to_string(),
        });
    }
    if !(raw.beta > 0.0) {
        return Err(Error::Validation {
            pointer: "/beta".to_string(),
            message: "must be positive".to_string(),
        });
    }

    let v0 = parse_fn(&raw.v0, "/V0")?;
    let v1 = match &raw.v1 {
        Some(src) => parse_fn(src, "/V1")?,
        None => Differentiable::zero(),
    };

    let mut v_basis = Vec::with_capacity(raw.v_basis.len());
    for (i, src) in raw.v_basis.iter().enumerate() {
        v_basis.push(parse_fn(src, &format!("/v_basis/{i}"))?);
    }
    let mut k_basis = Vec::with_capacity(raw.k_basis.len());
    for (i, src) in raw.k_basis.iter().enumerate() {
        k_basis.push(parse_fn(src, &format!("/k_basis/{i}"))?);
    }

    let j = parse_matrix(&raw.j, v_basis.len(), "/J")?;
    let g = parse_matrix(&raw.g, k_basis.len(), "/G")?;

    let temperature = match raw.theta {
        RawTheta::Linear { slope } => {
            if !(slope > 0.0) {
                return Err(Error::Validation {
                    pointer: "/theta/slope".to_string(),
                    message: "must be positive".to_string(),
                });
            }
            TemperatureMap::linear(slope, DEFAULT_ALPHA_RANGE)
        }
        RawTheta::Expr { body, deriv } => {
            let b = Expr::parse(&body, "/theta/body")?;
            let d = Expr::parse(&deriv, "/theta/deriv")?;
            // Spot-check positivity and the declared derivative.
            for i in 0..10 {
                let (lo, hi) = DEFAULT_ALPHA_RANGE;
                let a = lo + (hi - lo) * (i as f64 + 0.5) / 10.0;
                if !(b.eval(a) > 0.0) {
                    return Err(Error::Validation {
                        pointer: "/theta/body".to_string(),
                        message: format!("theta must be positive, got {} at {a}", b.eval(a)),
                    });
                }
                let h = 1e-6 * (1.0 + a);
                let fd = (b.eval(a + h) - b.eval(a - h)) / (2.0 * h);
                if (fd - d.eval(a)).abs() > 1e-6 * d.eval(a).abs().max(1.0) {
                    return Err(Error::Validation {
                        pointer: "/theta/deriv".to_string(),
                        message: format!(
                            "derivative {} disagrees with finite difference {fd} at {a}",
                            d.eval(a)
                        ),
                    });
                }
            }
            TemperatureMap::custom(b.into_fn(), d.into_fn(), DEFAULT_ALPHA_RANGE)
        }
    };

    let kernel = FiniteRankKernel {
        v1,
        v_basis,
        j,
        k_basis,
        g,
        k1: None,
    };
    kernel.validate()?;
    check_basis_independence(&kernel, raw.domain_l)?;

    let symmetric = detect_symmetry(&v0, &kernel, raw.domain_l);

    Ok(ModelSpec {
        name: raw.name,
        v0,
        kernel: Kernel::FiniteRank(kernel),
        temperature,
        domain_half_width: raw.domain_l,
        beta: raw.beta,
        dimension: Dimension::One,
        symmetric,
    })
}

/// `{1} ∪ v_basis` and `k_basis` must each be linearly independent on the
/// domain. Checked through Gram matrices under the uniform measure on
/// `[-L, L]`: centered `v` Gram and plain `k` Gram must be nonsingular.
fn check_basis_independence(kernel: &FiniteRankKernel, half_width: f64) -> Result<()> {
    let n = 801;
    let xs: Vec<f64> = (0..n)
        .map(|i| half_width * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0))
        .collect();

    let gram = |values: &[Vec<f64>]| -> DMatrix<f64> {
        let r = values.len();
        let mut g = DMatrix::zeros(r, r);
        for a in 0..r {
            for b in a..r {
                let dot: f64 =
                    values[a].iter().zip(&values[b]).map(|(u, v)| u * v).sum::<f64>() / n as f64;
                g[(a, b)] = dot;
                g[(b, a)] = dot;
            }
        }
        g
    };

    let check = |g: &DMatrix<f64>, pointer: &str| -> Result<()> {
        if g.nrows() == 0 {
            return Ok(());
        }
        let eig = g.clone().symmetric_eigen().eigenvalues;
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        if !(min > 1e-10 * max.max(1e-300)) {
            return Err(Error::Validation {
                pointer: pointer.to_string(),
                message: "basis functions are (numerically) linearly dependent".to_string(),
            });
        }
        Ok(())
    };

    let v_values: Vec<Vec<f64>> = kernel
        .v_basis
        .iter()
        .map(|b| {
            let vals: Vec<f64> = xs.iter().map(|&x| b.eval(x)).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            vals.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    check(&gram(&v_values), "/v_basis")?;

    let k_values: Vec<Vec<f64>> = kernel
        .k_basis
        .iter()
        .map(|b| xs.iter().map(|&x| b.eval(x)).collect())
        .collect();
    check(&gram(&k_values), "/k_basis")
}

fn detect_symmetry(v0: &Differentiable, kernel: &FiniteRankKernel, half_width: f64) -> bool {
    let xs: Vec<f64> = (1..=25)
        .map(|i| half_width * i as f64 / 26.0)
        .collect();
    let even = |f: &dyn Fn(f64) -> f64| {
        xs.iter()
            .all(|&x| (f(-x) - f(x)).abs() <= 1e-10 * f(x).abs().max(1.0))
    };
    let odd = |f: &dyn Fn(f64) -> f64| {
        xs.iter()
            .all(|&x| (f(-x) + f(x)).abs() <= 1e-10 * f(x).abs().max(1.0))
    };
    even(&|x| v0.eval(x))
        && even(&|x| kernel.v1.eval(x))
        && kernel.v_basis.iter().all(|b| even(&|x| b.eval(x)))
        && kernel.k_basis.iter().all(|b| odd(&|x| b.eval(x)))
}

/// A JSON document equivalent to the catalog `dawson` model; used by tests
/// and as a template for user models.
pub const DAWSON_JSON: &str = r#"{
  "name": "dawson",
  "V0": "x^4/4 - x^2/2",
  "theta": {"kind": "linear", "slope": 1.0},
  "beta": 1.0,
  "V1": "x^2/2",
  "v_basis": [],
  "J": [],
  "k_basis": ["x"],
  "G": [[-1.0]],
  "domain_L": 6.0
}"#;
