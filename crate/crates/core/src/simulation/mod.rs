//! Seeded data generation from the SCFA model and Monte Carlo studies.

mod study;
pub mod tables;
mod wishart;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, ScfaError};
use crate::ub::{PartitionVector, UniformBlockMatrix};

pub use study::{run_study, run_study_with, ParameterSummary, SimulationReport};
pub use wishart::{sample_wishart, wishart_factor};

/// Misspecification noise `E_κ ~ Wishart(p, κ I_p)` added to the model covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kappa: f64,
}

impl NoiseSpec {
    /// Mean diagonal of `E_κ`, `p κ`.
    pub fn noise_scale(&self, p: usize) -> f64 {
        p as f64 * self.kappa
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub n: usize,
    pub partition: PartitionVector,
    pub a: Vec<f64>,
    pub b: DMatrix<f64>,
    pub tau: Vec<f64>,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
}

impl GeneratorSpec {
    pub fn new(n: usize, partition: PartitionVector, a: Vec<f64>, b: DMatrix<f64>, seed: u64) -> Result<Self> {
        let k = partition.num_communities();
        let spec = Self {
            n,
            partition,
            a,
            b,
            tau: vec![1.0; k],
            seed,
            noise: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        self.noise = Some(noise);
        self.validate()?;
        Ok(self)
    }

    pub fn with_tau(mut self, tau: Vec<f64>) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_communities(&self) -> usize {
        self.partition.num_communities()
    }

    pub fn p(&self) -> usize {
        self.partition.total()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(ScfaError::InvalidSpec(m));
        let k = self.num_communities();
        if self.n < 2 {
            return invalid(format!("n = {} is below 2", self.n));
        }
        if self.tau.len() != k || self.tau.iter().any(|&t| t == 0.0 || !t.is_finite()) {
            return invalid("tau must hold one finite non-zero scale per community".into());
        }
        let sigma = UniformBlockMatrix::new(self.a.clone(), self.b.clone(), self.partition.clone())
            .map_err(|e| ScfaError::InvalidSpec(e.to_string()))?;
        if let Some(k) = self.a.iter().position(|&a| a.is_nan() || a <= 0.0) {
            return invalid(format!("a_{0}{0} = {1} must be positive", k + 1, self.a[k]));
        }
        if self.b.clone().cholesky().is_none() {
            return invalid("B must be positive definite".into());
        }
        if !sigma.is_positive_definite()? {
            return invalid("implied covariance is not positive definite".into());
        }
        if let Some(noise) = self.noise {
            if !(noise.kappa >= 0.0 && noise.kappa.is_finite()) {
                return invalid(format!("noise kappa = {} must be non-negative", noise.kappa));
            }
        }
        Ok(())
    }

    /// Factor covariance `b_kk' / (τ_k τ_k')`.
    pub fn factor_covariance(&self) -> DMatrix<f64> {
        let k = self.num_communities();
        DMatrix::from_fn(k, k, |r, c| self.b[(r, c)] / (self.tau[r] * self.tau[c]))
    }

    /// The model covariance without misspecification noise.
    pub fn covariance(&self) -> UniformBlockMatrix {
        UniformBlockMatrix::new(self.a.clone(), self.b.clone(), self.partition.clone()).expect("validated spec")
    }

    /// RNG for replicate `index`: ChaCha8 seeded from the spec seed, on stream `index`.
    pub fn replicate_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// JSON form of a generator spec, as read by `scfa simulate --config`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

impl TryFrom<GeneratorConfig> for GeneratorSpec {
    type Error = ScfaError;

    fn try_from(c: GeneratorConfig) -> Result<Self> {
        let partition = PartitionVector::new(c.sizes)?;
        let k = partition.num_communities();
        if c.b.len() != k || c.b.iter().any(|r| r.len() != k) {
            return Err(ScfaError::InvalidSpec(format!("b must be {k}x{k}")));
        }
        let b = DMatrix::from_fn(k, k, |r, col| c.b[r][col]);
        let mut spec = GeneratorSpec::new(c.n, partition, c.a, b, c.seed)?;
        if let Some(tau) = c.tau {
            spec = spec.with_tau(tau)?;
        }
        if let Some(noise) = c.noise {
            spec = spec.with_noise(noise)?;
        }
        Ok(spec)
    }
}

/// Draws one dataset from the spec seed (replicate stream 0).
pub fn generate(spec: &GeneratorSpec) -> Result<(DataMatrix, DMatrix<f64>)> {
    spec.validate()?;
    generate_with_rng(spec, &mut spec.replicate_rng(0))
}

/// `X_i = L f_i + u_i (+ e_i)`, returning the data and the latent scores `f_i`.
///
/// Factors use a K×K Cholesky factor of Σ_f and errors are scaled per
/// coordinate. With noise, one `E_κ = κ F Fᵀ` is drawn first and each row
/// gains `e_i = √κ F w_i`, so `X_i ~ N(0, Σ + E_κ)` without a p×p factorization.
pub fn generate_with_rng<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<(DataMatrix, DMatrix<f64>)> {
    let n = spec.n;
    let p = spec.p();
    let k = spec.num_communities();
    let chol = spec
        .factor_covariance()
        .cholesky()
        .ok_or_else(|| ScfaError::InvalidSpec("factor covariance is not positive definite".into()))?;
    let lf = chol.l();
    let labels = spec.partition.labels();
    let err_sd: Vec<f64> = spec.a.iter().map(|a| a.sqrt()).collect();

    let noise = spec.noise.filter(|ns| ns.kappa > 0.0).map(|ns| {
        let f = wishart_factor(p, p, rng);
        (f, ns.kappa.sqrt())
    });

    let mut x = DMatrix::zeros(n, p);
    let mut scores = DMatrix::zeros(n, k);
    let mut z = vec![0.0; k];
    let mut w: Vec<f64> = Vec::new();
    for i in 0..n {
        for zk in z.iter_mut() {
            *zk = StandardNormal.sample(rng);
        }
        for r in 0..k {
            let mut v = 0.0;
            for c in 0..=r {
                v += lf[(r, c)] * z[c];
            }
            scores[(i, r)] = v;
        }
        for j in 0..p {
            let kk = labels[j];
            let u: f64 = StandardNormal.sample(rng);
            x[(i, j)] = spec.tau[kk] * scores[(i, kk)] + err_sd[kk] * u;
        }
        if let Some((f, sqrt_kappa)) = &noise {
            w.clear();
            w.extend((0..f.ncols()).map(|_| -> f64 { StandardNormal.sample(rng) }));
            for j in 0..p {
                let row = f.row(j);
                let mut e = 0.0;
                for (fc, wc) in row.iter().zip(&w) {
                    e += fc * wc;
                }
                x[(i, j)] += sqrt_kappa * e;
            }
        }
    }
    Ok((DataMatrix::new(x)?, scores))
}

/// `Σ_i ‖f̂_i - f_i‖`.
pub fn euclidean_loss(estimated: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimated.shape() != truth.shape() {
        return Err(ScfaError::DimensionMismatch {
            expected: format!("{}x{}", truth.nrows(), truth.ncols()),
            found: format!("{}x{}", estimated.nrows(), estimated.ncols()),
        });
    }
    Ok((0..truth.nrows()).map(|i| (estimated.row(i) - truth.row(i)).norm()).sum())
}

/// `Σ_i ‖f̂_i - f_i‖ / Σ_i ‖f_i‖`.
pub fn relative_loss(estimated: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    let loss = euclidean_loss(estimated, truth)?;
    let norm: f64 = truth.row_iter().map(|r| r.norm()).sum();
    Ok(loss / norm)
}

/// SplitMix64 mix of a master seed and an index, for seeding independent studies.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
