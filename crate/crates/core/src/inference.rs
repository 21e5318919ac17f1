//! Exact variances of the closed-form estimators and Wald inference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::estimation::ScfaFit;
use crate::ub::PartitionVector;

const NEGATIVE_VARIANCE_CLAMP: f64 = 1e-12;

/// `var(â_kk) = 2 a_kk² / ((n - 1)(p_k - 1))`.
pub fn var_a(a_kk: f64, n: usize, p_k: usize) -> f64 {
    2.0 * a_kk * a_kk / ((n as f64 - 1.0) * (p_k as f64 - 1.0))
}

/// Exact variance of `b̂_kk'`.
///
/// The off-diagonal form carries `b_kk'² + b_k'k²` as written for a general
/// matrix; for symmetric `b` that is `2 b_kk'²`.
pub fn var_b(a: &[f64], b: &DMatrix<f64>, n: usize, partition: &PartitionVector, k: usize, k2: usize) -> f64 {
    let nm1 = n as f64 - 1.0;
    let pk = partition.size(k) as f64;
    if k == k2 {
        let (akk, bkk) = (a[k], b[(k, k)]);
        let lead = akk + pk * bkk;
        2.0 / (nm1 * pk * (pk - 1.0)) * (lead * lead - (2.0 * akk + pk * bkk) * bkk)
    } else {
        let pk2 = partition.size(k2) as f64;
        let (bkk2, bk2k) = (b[(k, k2)], b[(k2, k)]);
        let lead = pk * pk2 * (bkk2 * bkk2 + bk2k * bk2k);
        let cross = 2.0 * (a[k] + pk * b[(k, k)]) * (a[k2] + pk2 * b[(k2, k2)]);
        (lead + cross) / (2.0 * nm1 * pk * pk2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Parameter {
    /// `a_kk`, 0-based community.
    A { k: usize },
    /// `b_kk'` with `k <= k2`.
    B { k: usize, k2: usize },
}

impl Parameter {
    /// Display name in 1-based paper style, e.g. `a11`, `b23`.
    pub fn name(&self, num_communities: usize) -> String {
        let (prefix, r, c) = match *self {
            Parameter::A { k } => ("a", k, k),
            Parameter::B { k, k2 } => ("b", k, k2),
        };
        if num_communities < 10 {
            format!("{prefix}{}{}", r + 1, c + 1)
        } else {
            format!("{prefix}_{}_{}", r + 1, c + 1)
        }
    }

    /// `a_11..a_KK` then the upper triangle of B row by row.
    pub fn all(num_communities: usize) -> Vec<Parameter> {
        let mut out: Vec<Parameter> = (0..num_communities).map(|k| Parameter::A { k }).collect();
        for k in 0..num_communities {
            for k2 in k..num_communities {
                out.push(Parameter::B { k, k2 });
            }
        }
        out
    }

    pub fn value(&self, a: &[f64], b: &DMatrix<f64>) -> f64 {
        match *self {
            Parameter::A { k } => a[k],
            Parameter::B { k, k2 } => b[(k, k2)],
        }
    }

    pub fn variance(&self, a: &[f64], b: &DMatrix<f64>, n: usize, partition: &PartitionVector) -> f64 {
        match *self {
            Parameter::A { k } => var_a(a[k], n, partition.size(k)),
            Parameter::B { k, k2 } => var_b(a, b, n, partition, k, k2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterInference {
    pub name: String,
    pub parameter: Parameter,
    #[serde(with = "crate::io::float")]
    pub estimate: f64,
    #[serde(with = "crate::io::float")]
    pub exact_variance: f64,
    #[serde(with = "crate::io::float")]
    pub standard_error: f64,
    #[serde(with = "crate::io::float")]
    pub ci_low: f64,
    #[serde(with = "crate::io::float")]
    pub ci_high: f64,
    #[serde(with = "crate::io::float")]
    pub z_statistic: f64,
    #[serde(with = "crate::io::float")]
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub alpha: f64,
    pub n: usize,
    pub parameters: Vec<ParameterInference>,
    pub diagnostics: Vec<String>,
}

impl InferenceReport {
    pub fn get(&self, parameter: Parameter) -> Option<&ParameterInference> {
        self.parameters.iter().find(|p| p.parameter == parameter)
    }
}

/// Two-sided standard-normal critical value `z_{1-α/2}`.
pub fn critical_value(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Wald intervals and tests for every `a_kk` and `b_kk'`, with the estimates
/// plugged into the exact variance formulas.
///
/// # Panics
///
/// If `alpha` is not in (0, 1).
pub fn wald_report(fit: &ScfaFit, n: usize, alpha: f64) -> InferenceReport {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1), got {alpha}");
    let k = fit.num_communities();
    let z_crit = critical_value(alpha);
    let normal = Normal::standard();
    let mut diagnostics = Vec::new();
    let parameters = Parameter::all(k)
        .into_iter()
        .map(|param| {
            let name = param.name(k);
            let estimate = param.value(&fit.a_hat, &fit.b_hat);
            let mut variance = param.variance(&fit.a_hat, &fit.b_hat, n, &fit.partition);
            if variance < 0.0 {
                if variance > -NEGATIVE_VARIANCE_CLAMP {
                    diagnostics.push(format!("plug-in variance of {name} clamped from {variance:e} to 0"));
                    variance = 0.0;
                } else {
                    diagnostics.push(format!("plug-in variance of {name} is negative ({variance:e})"));
                }
            }
            let se = variance.sqrt();
            let z = if estimate == 0.0 { 0.0 } else { estimate / se };
            let p_value = if z.is_nan() { f64::NAN } else { 2.0 * normal.sf(z.abs()) };
            let ci_low = estimate - z_crit * se;
            let ci_high = estimate + z_crit * se;
            ParameterInference {
                name,
                parameter: param,
                estimate,
                exact_variance: variance,
                standard_error: se,
                ci_low,
                ci_high,
                z_statistic: z,
                p_value,
                significant: ci_low > 0.0 || ci_high < 0.0,
            }
        })
        .collect();
    InferenceReport {
        alpha,
        n,
        parameters,
        diagnostics,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSign {
    Positive,
    Negative,
}

/// Factor-to-factor edge (or self-loop when `from == to`) of a path diagram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub from: usize,
    pub to: usize,
    pub estimate: f64,
    pub sign: EdgeSign,
    pub significant: bool,
}

pub fn edge_labels(report: &InferenceReport) -> Vec<EdgeLabel> {
    report
        .parameters
        .iter()
        .filter_map(|p| match p.parameter {
            Parameter::B { k, k2 } => Some(EdgeLabel {
                from: k,
                to: k2,
                estimate: p.estimate,
                sign: if p.estimate < 0.0 {
                    EdgeSign::Negative
                } else {
                    EdgeSign::Positive
                },
                significant: p.significant,
            }),
            Parameter::A { .. } => None,
        })
        .collect()
}
