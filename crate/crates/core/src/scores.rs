//! Least-squares factor scores.
//!
//! With the loading matrix `L = Bdiag(1_{p_1}, ..., 1_{p_K})` the OLS score of
//! observation i is the vector of its community means. GLS with any
//! `Σ_u = Bdiag(a_11 I, ..., a_KK I)` gives the same answer, and so does the
//! feasible variant with estimated `â`.

use nalgebra::DMatrix;

use crate::data::{DataMatrix, Membership};
use crate::error::{Result, ScfaError};
use crate::estimation::ScfaFit;
use crate::par::{map_indexed, Execution};
use crate::ub::PartitionVector;

const ROW_CHUNK: usize = 256;

/// n×K factor scores, row i estimating `f_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorScoreMatrix {
    pub scores: DMatrix<f64>,
    pub partition: PartitionVector,
    /// Exact covariance of each score row, when the model parameters are known.
    pub covariance: Option<DMatrix<f64>>,
}

impl FactorScoreMatrix {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn with_covariance(mut self, a: &[f64], b: &DMatrix<f64>) -> Self {
        self.covariance = Some(score_covariance(a, b, &self.partition));
        self
    }
}

/// `f̂_i = (LᵀL)⁻¹ Lᵀ X_i`: community means of each row.
pub fn score_ols(data: &DataMatrix, membership: &Membership) -> Result<FactorScoreMatrix> {
    score_ols_with(data, membership, Execution::default())
}

pub fn score_ols_with(data: &DataMatrix, membership: &Membership, execution: Execution) -> Result<FactorScoreMatrix> {
    membership.check_data(data)?;
    let x = data.values();
    let n = x.nrows();
    let k = membership.num_communities();
    let chunks = n.div_ceil(ROW_CHUNK);
    let rows = map_indexed(chunks, execution, |c| {
        let range = c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n);
        let mut out = Vec::with_capacity(range.len() * k);
        for i in range {
            for kk in 0..k {
                let members = membership.members(kk);
                let sum: f64 = members.iter().map(|&j| x[(i, j)]).sum();
                out.push(sum / members.len() as f64);
            }
        }
        out
    });
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(FactorScoreMatrix {
        scores: DMatrix::from_row_slice(n, k, &flat),
        partition: membership.partition().clone(),
        covariance: None,
    })
}

/// `f̂_i = (Lᵀ Σ_u⁻¹ L)⁻¹ Lᵀ Σ_u⁻¹ X_i` for per-community error variances.
///
/// Debug builds check the result against [`score_ols`] to 1e-12.
pub fn score_gls(data: &DataMatrix, membership: &Membership, error_variances: &[f64]) -> Result<FactorScoreMatrix> {
    membership.check_data(data)?;
    let k = membership.num_communities();
    if error_variances.len() != k {
        return Err(ScfaError::DimensionMismatch {
            expected: format!("{k} error variances"),
            found: error_variances.len().to_string(),
        });
    }
    if let Some(c) = error_variances.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(ScfaError::NonPositiveVariance {
            community: c + 1,
            value: error_variances[c],
        });
    }

    // G = Lᵀ Σ_u⁻¹ (K×p), M = G L (K×K)
    let labels = membership.labels();
    let p = labels.len();
    let g = DMatrix::from_fn(k, p, |r, j| {
        if labels[j] == r {
            1.0 / error_variances[r]
        } else {
            0.0
        }
    });
    let mut m = DMatrix::zeros(k, k);
    for (j, &l) in labels.iter().enumerate() {
        for r in 0..k {
            m[(r, l)] += g[(r, j)];
        }
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| ScfaError::SingularMatrix("Lᵀ Σ_u⁻¹ L is not positive definite".into()))?;
    let rhs = g * data.values().transpose();
    let scores = chol.solve(&rhs).transpose();
    let out = FactorScoreMatrix {
        scores,
        partition: membership.partition().clone(),
        covariance: None,
    };

    #[cfg(debug_assertions)]
    {
        let ols = score_ols_with(data, membership, Execution::Sequential)?;
        let scale = ols.scores.amax().max(1.0);
        let diff = (&ols.scores - &out.scores).amax();
        assert!(diff <= 1e-12 * scale, "GLS and OLS scores differ by {diff:e}");
    }
    Ok(out)
}

/// GLS with the estimated error variances `â`.
pub fn score_fgls(data: &DataMatrix, membership: &Membership, fit: &ScfaFit) -> Result<FactorScoreMatrix> {
    score_gls(data, membership, &fit.a_hat)
}

/// `cov(f̂_i) = diag(a_11/p_1, ..., a_KK/p_K) + B`.
pub fn score_covariance(a: &[f64], b: &DMatrix<f64>, partition: &PartitionVector) -> DMatrix<f64> {
    let mut cov = b.clone();
    for (k, &ak) in a.iter().enumerate() {
        cov[(k, k)] += ak / partition.size(k) as f64;
    }
    cov
}
