//! Closed-form maximum likelihood estimation of the uniform-block covariance
//! parameters and the factor-model matrices they determine.
//!
//! With `S` the sample covariance and `S_kk'` its blocks,
//!
//! ```text
//! a_kk  = (p_k tr(S_kk) - sum(S_kk)) / (p_k (p_k - 1))
//! b_kk  = (sum(S_kk) - tr(S_kk)) / (p_k (p_k - 1))
//! b_kk' = sum(S_kk') / (p_k p_k')
//! ```
//!
//! Only block traces and block sums are needed, so the data path never forms
//! the p×p matrix `S`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::{DataMatrix, Membership};
use crate::error::{Result, ScfaError};
use crate::par::{map_indexed, Execution};
use crate::ub::{block_summaries, BlockSummaries, PartitionVector, UniformBlockMatrix};

const REPAIR_FLOOR: f64 = 1e-8;
const ROW_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateOptions {
    /// Subtract column means and use divisor n - 1 instead of n.
    pub center: bool,
    /// Clip B̂ eigenvalues and â at 1e-8 when they come out non-positive.
    pub repair: bool,
    pub execution: Execution,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Communities (0-based) whose â came out non-positive.
    pub nonpositive_a: Vec<usize>,
    pub b_positive_definite: bool,
    pub repaired: bool,
    pub messages: Vec<String>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.nonpositive_a.is_empty() && self.b_positive_definite
    }
}

/// Estimated SCFA parameters.
///
/// `a_hat` and `b_hat` parameterize the covariance; loadings and factor
/// covariance follow from them and the loading scales `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScfaFit {
    pub a_hat: Vec<f64>,
    pub b_hat: DMatrix<f64>,
    pub tau: Vec<f64>,
    pub partition: PartitionVector,
    pub n: usize,
    pub log_likelihood: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl ScfaFit {
    /// Wraps known parameters, e.g. a simulation truth, with unit loadings.
    pub fn from_parameters(a: Vec<f64>, b: DMatrix<f64>, partition: PartitionVector, n: usize) -> Result<Self> {
        // validates shapes and symmetry
        UniformBlockMatrix::new(a.clone(), b.clone(), partition.clone())?;
        let k = partition.num_communities();
        let mut fit = ScfaFit {
            a_hat: a,
            b_hat: b,
            tau: vec![1.0; k],
            partition,
            n,
            log_likelihood: None,
            diagnostics: Diagnostics::default(),
        };
        fit.refresh_diagnostics();
        Ok(fit)
    }

    pub fn num_communities(&self) -> usize {
        self.a_hat.len()
    }

    /// Replaces the loading scales. The implied covariance is unchanged.
    pub fn with_tau(mut self, tau: Vec<f64>) -> Result<Self> {
        if tau.len() != self.num_communities() {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("{} loading scales", self.num_communities()),
                found: tau.len().to_string(),
            });
        }
        if tau.iter().any(|&t| t == 0.0 || !t.is_finite()) {
            return Err(ScfaError::InvalidSpec("loading scales must be finite and non-zero".into()));
        }
        self.tau = tau;
        Ok(self)
    }

    /// p×K loading matrix `Bdiag(τ_1 1_{p_1}, ..., τ_K 1_{p_K})`.
    pub fn loading_matrix(&self) -> DMatrix<f64> {
        let labels = self.partition.labels();
        DMatrix::from_fn(labels.len(), self.num_communities(), |j, k| {
            if labels[j] == k {
                self.tau[k]
            } else {
                0.0
            }
        })
    }

    /// Factor covariance `σ_f,kk' = b_kk' / (τ_k τ_k')`.
    pub fn factor_covariance(&self) -> DMatrix<f64> {
        let k = self.num_communities();
        DMatrix::from_fn(k, k, |r, c| self.b_hat[(r, c)] / (self.tau[r] * self.tau[c]))
    }

    /// Dense p×p error covariance `Bdiag(a_11 I, ..., a_KK I)`.
    pub fn error_covariance(&self) -> DMatrix<f64> {
        let labels = self.partition.labels();
        let diag: Vec<f64> = labels.iter().map(|&k| self.a_hat[k]).collect();
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
    }

    pub fn implied_covariance(&self) -> UniformBlockMatrix {
        implied_covariance(self)
    }

    fn refresh_diagnostics(&mut self) {
        let nonpositive_a: Vec<usize> = (0..self.a_hat.len()).filter(|&k| self.a_hat[k] <= 0.0).collect();
        let b_pd = self.b_hat.clone().cholesky().is_some();
        let mut messages = Vec::new();
        for &k in &nonpositive_a {
            messages.push(format!("a_{0}{0} estimate {1} is not positive", k + 1, self.a_hat[k]));
        }
        if !b_pd {
            messages.push("factor covariance estimate B is not positive definite".into());
        }
        let repaired = self.diagnostics.repaired;
        self.diagnostics = Diagnostics {
            nonpositive_a,
            b_positive_definite: b_pd,
            repaired,
            messages,
        };
    }

    fn repair(&mut self) {
        if self.diagnostics.is_clean() {
            return;
        }
        for a in &mut self.a_hat {
            *a = a.max(REPAIR_FLOOR);
        }
        let eig = SymmetricEigen::new(self.b_hat.clone());
        let clipped = eig.eigenvalues.map(|l| l.max(REPAIR_FLOOR));
        let v = &eig.eigenvectors;
        let b = v * DMatrix::from_diagonal(&clipped) * v.transpose();
        self.b_hat = (&b + b.transpose()) * 0.5;
        let mut messages = std::mem::take(&mut self.diagnostics.messages);
        messages.push("estimates repaired by eigenvalue clipping".into());
        self.diagnostics.repaired = true;
        self.refresh_diagnostics();
        self.diagnostics.messages.splice(0..0, messages);
    }
}

/// Dense p×p sample covariance: `XᵀX / n` by default, or the centered
/// covariance with divisor `n - 1`.
pub fn sample_covariance(data: &DataMatrix, center: bool) -> DMatrix<f64> {
    let (x, divisor) = prepared(data, center);
    let x = x.values();
    let p = x.ncols();
    let mut s = DMatrix::zeros(p, p);
    for j in 0..p {
        let cj = x.column(j);
        for l in 0..=j {
            let cl = x.column(l);
            let mut acc = 0.0;
            for i in 0..cj.len() {
                acc += cj[i] * cl[i];
            }
            let v = acc / divisor;
            s[(j, l)] = v;
            s[(l, j)] = v;
        }
    }
    s
}

fn prepared(data: &DataMatrix, center: bool) -> (std::borrow::Cow<'_, DataMatrix>, f64) {
    let n = data.n() as f64;
    if center {
        (std::borrow::Cow::Owned(data.centered()), n - 1.0)
    } else {
        (std::borrow::Cow::Borrowed(data), n)
    }
}

/// Block traces and sums of the sample covariance, accumulated from the data.
///
/// Within-community row sums run over the values in sorted order, which makes
/// the result independent of the column order inside each community.
pub fn data_block_summaries(
    data: &DataMatrix,
    membership: &Membership,
    center: bool,
    execution: Execution,
) -> Result<BlockSummaries> {
    membership.check_data(data)?;
    let (x, divisor) = prepared(data, center);
    let x = x.values();
    let n = x.nrows();
    let k = membership.num_communities();

    let chunks = n.div_ceil(ROW_CHUNK);
    let per_chunk = map_indexed(chunks, execution, |c| {
        let rows = c * ROW_CHUNK..((c + 1) * ROW_CHUNK).min(n);
        let mut buf = Vec::new();
        let mut out = Vec::with_capacity(rows.len() * k);
        for i in rows {
            for kk in 0..k {
                buf.clear();
                buf.extend(membership.members(kk).iter().map(|&j| x[(i, j)]));
                buf.sort_unstable_by(f64::total_cmp);
                let sum: f64 = buf.iter().sum();
                let sq: f64 = buf.iter().map(|v| v * v).sum();
                out.push((sum, sq));
            }
        }
        out
    });

    let mut traces = vec![0.0; k];
    let mut sums = DMatrix::zeros(k, k);
    for row in per_chunk.iter().flat_map(|c| c.chunks_exact(k)) {
        for r in 0..k {
            traces[r] += row[r].1;
            for c in 0..=r {
                sums[(r, c)] += row[r].0 * row[c].0;
            }
        }
    }
    for r in 0..k {
        traces[r] /= divisor;
        for c in 0..=r {
            let v = sums[(r, c)] / divisor;
            sums[(r, c)] = v;
            sums[(c, r)] = v;
        }
    }
    Ok(BlockSummaries { traces, sums })
}

pub fn estimate(data: &DataMatrix, membership: &Membership) -> Result<ScfaFit> {
    estimate_with(data, membership, &EstimateOptions::default())
}

pub fn estimate_with(data: &DataMatrix, membership: &Membership, opts: &EstimateOptions) -> Result<ScfaFit> {
    check_sample_size(data.n(), membership.partition())?;
    membership.partition().require_estimable()?;
    let summaries = data_block_summaries(data, membership, opts.center, opts.execution)?;
    let mut fit = estimate_from_summaries(&summaries, membership.partition(), data.n())?;
    if opts.repair {
        fit.repair();
        fit.log_likelihood = log_likelihood_from_summaries(&fit.a_hat, &fit.b_hat, &summaries, fit.n, &fit.partition).ok();
    }
    Ok(fit)
}

/// Estimation from a dense covariance matrix laid out in community order.
pub fn estimate_from_covariance(s: &DMatrix<f64>, partition: &PartitionVector, n: usize) -> Result<ScfaFit> {
    let summaries = block_summaries(s, partition)?;
    estimate_from_summaries(&summaries, partition, n)
}

fn check_sample_size(n: usize, partition: &PartitionVector) -> Result<()> {
    let k = partition.num_communities();
    let required = k + k * (k + 1) / 2;
    if n <= required {
        return Err(ScfaError::SampleTooSmall { n, required });
    }
    Ok(())
}

/// The closed-form estimates from block summaries, without the sample-size
/// and community-size checks of [`estimate_from_summaries`].
pub fn closed_form_estimates(summaries: &BlockSummaries, partition: &PartitionVector) -> (Vec<f64>, DMatrix<f64>) {
    let k = partition.num_communities();
    let p: Vec<f64> = partition.sizes().iter().map(|&s| s as f64).collect();
    let mut a_hat = vec![0.0; k];
    let mut b_hat = DMatrix::zeros(k, k);
    for r in 0..k {
        let tr = summaries.traces[r];
        let sm = summaries.sums[(r, r)];
        let denom = p[r] * (p[r] - 1.0);
        a_hat[r] = (p[r] * tr - sm) / denom;
        b_hat[(r, r)] = (sm - tr) / denom;
        for c in 0..r {
            let v = summaries.sums[(r, c)] / (p[r] * p[c]);
            b_hat[(r, c)] = v;
            b_hat[(c, r)] = v;
        }
    }
    (a_hat, b_hat)
}

pub fn estimate_from_summaries(summaries: &BlockSummaries, partition: &PartitionVector, n: usize) -> Result<ScfaFit> {
    check_sample_size(n, partition)?;
    partition.require_estimable()?;
    let k = partition.num_communities();
    let (a_hat, b_hat) = closed_form_estimates(summaries, partition);
    let log_likelihood = log_likelihood_from_summaries(&a_hat, &b_hat, summaries, n, partition).ok();
    let mut fit = ScfaFit {
        a_hat,
        b_hat,
        tau: vec![1.0; k],
        partition: partition.clone(),
        n,
        log_likelihood,
        diagnostics: Diagnostics::default(),
    };
    fit.refresh_diagnostics();
    if log_likelihood.is_none() {
        fit.diagnostics
            .messages
            .push("implied covariance is not positive definite; log-likelihood undefined".into());
    }
    Ok(fit)
}

/// Gaussian log-likelihood up to constants,
/// `-(n/2) log det Σ - (n/2) tr(S Σ⁻¹)`, with `S` dense in community order.
pub fn log_likelihood(a: &[f64], b: &DMatrix<f64>, s: &DMatrix<f64>, n: usize, partition: &PartitionVector) -> Result<f64> {
    let summaries = block_summaries(s, partition)?;
    log_likelihood_from_summaries(a, b, &summaries, n, partition)
}

pub fn log_likelihood_from_summaries(
    a: &[f64],
    b: &DMatrix<f64>,
    summaries: &BlockSummaries,
    n: usize,
    partition: &PartitionVector,
) -> Result<f64> {
    let sigma = UniformBlockMatrix::new(a.to_vec(), b.clone(), partition.clone())?;
    if !sigma.is_positive_definite()? {
        return Err(ScfaError::SingularMatrix("covariance is not positive definite".into()));
    }
    let logdet = sigma.log_determinant()?;
    let inv = sigma.inverse()?;
    let half_n = n as f64 / 2.0;
    Ok(-half_n * logdet.log_abs - half_n * summaries.trace_product(&inv))
}

/// `Σ = L Σ_f Lᵀ + Σ_u` as a uniform-block matrix. The loading scales cancel,
/// leaving `A = diag(â)` and `B = b̂`.
pub fn implied_covariance(fit: &ScfaFit) -> UniformBlockMatrix {
    let k = fit.num_communities();
    let sigma_f = fit.factor_covariance();
    let b = DMatrix::from_fn(k, k, |r, c| fit.tau[r] * sigma_f[(r, c)] * fit.tau[c]);
    let b = (&b + b.transpose()) * 0.5;
    UniformBlockMatrix::new_general(fit.a_hat.clone(), b, fit.partition.clone())
        .expect("fit coordinates have matching shapes")
}
