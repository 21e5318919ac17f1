//! Uniform-block matrices.
//!
//! A p×p symmetric matrix partitioned into K communities is uniform-block when
//! diagonal block k equals `a_k I + b_kk J` and off-diagonal block (k, k')
//! equals `b_kk' 1`. Such a matrix is fully described by the length-K vector
//! `a`, the K×K matrix `B` and the community sizes, and all of the algebra
//! below runs on those K×K coordinates.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScfaError};

/// Community sizes `(p_1, ..., p_K)`, each greater than one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PartitionVector {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl PartitionVector {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(ScfaError::InvalidPartition("no communities".into()));
        }
        if let Some(k) = sizes.iter().position(|&s| s < 2) {
            return Err(ScfaError::InvalidPartition(format!(
                "community {} has size {}, sizes must exceed 1",
                k + 1,
                sizes[k]
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { sizes, offsets })
    }

    /// Every base size multiplied by `factor`, e.g. `4 × (3,3,4) = (12,12,16)`.
    pub fn scaled(base: &[usize], factor: usize) -> Result<Self> {
        Self::new(base.iter().map(|s| s * factor).collect())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_communities(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    /// Total dimension p.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Cumulative offsets `p̄_0 = 0, ..., p̄_K = p`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Community index of every position 0..p.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.total());
        for (k, &s) in self.sizes.iter().enumerate() {
            out.extend(std::iter::repeat_n(k, s));
        }
        out
    }

    /// Closed-form estimation needs every community to have at least three members.
    pub fn require_estimable(&self) -> Result<()> {
        match self.sizes.iter().position(|&s| s <= 2) {
            Some(k) => Err(ScfaError::CommunityTooSmall {
                community: (k + 1).to_string(),
                size: self.sizes[k],
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.sizes == other.sizes {
            Ok(())
        } else {
            Err(ScfaError::PartitionMismatch {
                left: self.sizes.clone(),
                right: other.sizes.clone(),
            })
        }
    }
}

impl TryFrom<Vec<usize>> for PartitionVector {
    type Error = ScfaError;

    fn try_from(sizes: Vec<usize>) -> Result<Self> {
        Self::new(sizes)
    }
}

impl From<PartitionVector> for Vec<usize> {
    fn from(p: PartitionVector) -> Self {
        p.sizes
    }
}

/// How `from_dense` treats entries that deviate from the block constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Projection {
    /// Fail if any entry is more than `tol` away from its block constant.
    Strict { tol: f64 },
    /// Average within blocks.
    Average,
}

impl Default for Projection {
    fn default() -> Self {
        Projection::Strict { tol: 1e-8 }
    }
}

/// Sign and log-magnitude of a determinant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogDet {
    pub sign: f64,
    pub log_abs: f64,
}

impl LogDet {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

const SINGULAR_TOL: f64 = 1e-12;
const INVERSE_ASYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UbJson", into = "UbJson")]
pub struct UniformBlockMatrix {
    a: Vec<f64>,
    b: DMatrix<f64>,
    partition: PartitionVector,
}

impl UniformBlockMatrix {
    /// Builds a uniform-block matrix; `b` must be exactly symmetric.
    pub fn new(a: Vec<f64>, b: DMatrix<f64>, partition: PartitionVector) -> Result<Self> {
        let m = Self::new_general(a, b, partition)?;
        if m.is_symmetric() {
            Ok(m)
        } else {
            Err(ScfaError::NotSymmetric)
        }
    }

    /// Like [`new`](Self::new) but accepts a non-symmetric `b`, as produced by
    /// products of two uniform-block matrices.
    pub fn new_general(a: Vec<f64>, b: DMatrix<f64>, partition: PartitionVector) -> Result<Self> {
        let k = partition.num_communities();
        if a.len() != k {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("a of length {k}"),
                found: format!("length {}", a.len()),
            });
        }
        if b.shape() != (k, k) {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("B of shape {k}x{k}"),
                found: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        Ok(Self { a, b, partition })
    }

    pub fn identity(partition: PartitionVector) -> Self {
        let k = partition.num_communities();
        Self {
            a: vec![1.0; k],
            b: DMatrix::zeros(k, k),
            partition,
        }
    }

    pub fn zeros(partition: PartitionVector) -> Self {
        let k = partition.num_communities();
        Self {
            a: vec![0.0; k],
            b: DMatrix::zeros(k, k),
            partition,
        }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn partition(&self) -> &PartitionVector {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.partition.total()
    }

    pub fn is_symmetric(&self) -> bool {
        self.b == self.b.transpose()
    }

    fn sizes_f64(&self) -> Vec<f64> {
        self.partition.sizes().iter().map(|&s| s as f64).collect()
    }

    /// `Δ = A + B P` with `P = diag(p_1, ..., p_K)`.
    pub fn delta(&self) -> DMatrix<f64> {
        let p = self.sizes_f64();
        let k = self.a.len();
        DMatrix::from_fn(k, k, |i, j| {
            let d = if i == j { self.a[i] } else { 0.0 };
            d + self.b[(i, j)] * p[j]
        })
    }

    /// `A + P^{1/2} B P^{1/2}`, similar to Δ and symmetric when B is.
    fn symmetric_delta(&self) -> DMatrix<f64> {
        let sq: Vec<f64> = self.sizes_f64().iter().map(|p| p.sqrt()).collect();
        let k = self.a.len();
        DMatrix::from_fn(k, k, |i, j| {
            let d = if i == j { self.a[i] } else { 0.0 };
            d + sq[i] * self.b[(i, j)] * sq[j]
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let part = &self.partition;
        let labels = part.labels();
        let p = part.total();
        DMatrix::from_fn(p, p, |i, j| {
            let (ki, kj) = (labels[i], labels[j]);
            let off = self.b[(ki, kj)];
            if i == j {
                self.a[ki] + off
            } else {
                off
            }
        })
    }

    /// Reads `(a, B)` back from a dense matrix laid out in community order.
    ///
    /// Strict mode takes the block constants from the first entry of each block
    /// and checks every other entry against them.
    pub fn from_dense(m: &DMatrix<f64>, partition: PartitionVector, mode: Projection) -> Result<Self> {
        let p = partition.total();
        if m.shape() != (p, p) {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("{p}x{p}"),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let k = partition.num_communities();
        let mut a = vec![0.0; k];
        let mut b = DMatrix::zeros(k, k);
        for r in 0..k {
            for c in r..k {
                let rows = partition.range(r);
                let cols = partition.range(c);
                let (off, diag) = match mode {
                    Projection::Average => block_means(m, rows.clone(), cols.clone()),
                    Projection::Strict { .. } => {
                        let off = m[(rows.start, cols.start + 1)];
                        let diag = (r == c).then(|| m[(rows.start, cols.start)]);
                        (off, diag)
                    }
                };
                if let Projection::Strict { tol } = mode {
                    let dev = max_block_deviation(m, rows.clone(), cols.clone(), off, diag, r == c);
                    let sym = if r == c { 0.0 } else { max_block_deviation(m, cols, rows, off, None, false) };
                    let worst = dev.max(sym);
                    if worst > tol || worst.is_nan() {
                        return Err(ScfaError::StructureViolation {
                            deviation: worst,
                            row: r + 1,
                            col: c + 1,
                        });
                    }
                }
                b[(r, c)] = off;
                b[(c, r)] = off;
                if let Some(d) = diag {
                    a[r] = d - off;
                }
            }
        }
        if let Projection::Strict { tol } = mode {
            if tol == 0.0 && !is_exactly_symmetric(m) {
                return Err(ScfaError::NotSymmetric);
            }
        }
        Ok(Self { a, b, partition })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.partition.ensure_same(&other.partition)?;
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x + sign * y).collect();
        let b = &self.b + &other.b * sign;
        Ok(Self {
            a,
            b,
            partition: self.partition.clone(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            a: self.a.iter().map(|x| x * c).collect(),
            b: &self.b * c,
            partition: self.partition.clone(),
        }
    }

    /// `N²`, with coordinates `A²` and `AB + BA + BPB`.
    pub fn square(&self) -> Self {
        let p = self.sizes_f64();
        let k = self.a.len();
        let a = self.a.iter().map(|x| x * x).collect();
        let bpb = weighted_product(&self.b, &p, &self.b);
        let b = DMatrix::from_fn(k, k, |i, j| self.a[i] * self.b[(i, j)] + self.b[(i, j)] * self.a[j] + bpb[(i, j)]);
        Self {
            a,
            b,
            partition: self.partition.clone(),
        }
    }

    /// General product `N1 N2`, with coordinates `A1 A2` and `A1 B2 + B1 A2 + B1 P B2`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.partition.ensure_same(&other.partition)?;
        let p = self.sizes_f64();
        let k = self.a.len();
        let a = self.a.iter().zip(&other.a).map(|(x, y)| x * y).collect();
        let bpb = weighted_product(&self.b, &p, &other.b);
        let b = DMatrix::from_fn(k, k, |i, j| {
            self.a[i] * other.b[(i, j)] + self.b[(i, j)] * other.a[j] + bpb[(i, j)]
        });
        Ok(Self {
            a,
            b,
            partition: self.partition.clone(),
        })
    }

    /// The K eigenvalues of Δ, ascending.
    pub fn delta_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_symmetric() {
            return Err(ScfaError::NotSymmetric);
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetric_delta()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// All p eigenvalues, ascending: each `a_k` with multiplicity `p_k - 1`
    /// plus the eigenvalues of Δ.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut ev = self.delta_eigenvalues()?;
        ev.reserve(self.dim() - ev.len());
        for (k, &a) in self.a.iter().enumerate() {
            ev.extend(std::iter::repeat_n(a, self.partition.size(k) - 1));
        }
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn is_positive_definite(&self) -> Result<bool> {
        if self.a.iter().any(|&a| a <= 0.0) {
            return Ok(false);
        }
        Ok(self.delta_eigenvalues()?[0] > 0.0)
    }

    /// `det N = (∏ a_k^{p_k - 1}) det Δ`, as sign and log-magnitude.
    pub fn log_determinant(&self) -> Result<LogDet> {
        let (delta_sign, delta_log) = self.delta_log_det()?;
        let mut sign = delta_sign;
        let mut log_abs = delta_log;
        for (k, &a) in self.a.iter().enumerate() {
            let mult = self.partition.size(k) - 1;
            log_abs += mult as f64 * a.abs().ln();
            if a < 0.0 && mult % 2 == 1 {
                sign = -sign;
            }
        }
        Ok(LogDet { sign, log_abs })
    }

    fn delta_log_det(&self) -> Result<(f64, f64)> {
        let scale = self.a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let delta = self.delta();
        let scale = scale.max(delta.amax());
        if let Some(k) = self.a.iter().position(|a| a.abs() <= SINGULAR_TOL * scale) {
            return Err(ScfaError::SingularMatrix(format!("a_{0}{0} is zero", k + 1)));
        }
        let lu = delta.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let umax = diag.amax();
        if umax == 0.0 || diag.iter().any(|d| d.abs() <= SINGULAR_TOL * umax.max(scale)) {
            return Err(ScfaError::SingularMatrix("Δ = A + BP is singular".into()));
        }
        let mut sign: f64 = lu.p().determinant();
        let mut log_abs = 0.0;
        for &d in diag.iter() {
            log_abs += d.abs().ln();
            if d < 0.0 {
                sign = -sign;
            }
        }
        Ok((sign, log_abs))
    }

    /// `N⁻¹`, with coordinates `A⁻¹` and `-Δ⁻¹ B A⁻¹`.
    pub fn inverse(&self) -> Result<Self> {
        self.delta_log_det()?;
        let k = self.a.len();
        let a_inv: Vec<f64> = self.a.iter().map(|a| 1.0 / a).collect();
        let b_ainv = DMatrix::from_fn(k, k, |i, j| self.b[(i, j)] * a_inv[j]);
        let solved = self
            .delta()
            .lu()
            .solve(&b_ainv)
            .ok_or_else(|| ScfaError::SingularMatrix("Δ = A + BP is singular".into()))?;
        let mut b = -solved;
        if self.is_symmetric() {
            let asym = (&b - b.transpose()).amax();
            if asym > INVERSE_ASYMMETRY_TOL * b.amax().max(1.0) {
                return Err(ScfaError::Consistency(format!(
                    "inverse coordinates asymmetric by {asym:e}"
                )));
            }
            b = (&b + b.transpose()) * 0.5;
        }
        Ok(Self {
            a: a_inv,
            b,
            partition: self.partition.clone(),
        })
    }
}

/// `L diag(p) R` for K×K matrices.
fn weighted_product(left: &DMatrix<f64>, p: &[f64], right: &DMatrix<f64>) -> DMatrix<f64> {
    let k = p.len();
    let scaled = DMatrix::from_fn(k, k, |i, j| p[i] * right[(i, j)]);
    left * scaled
}

fn is_exactly_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// Mean of the off-diagonal entries and, for diagonal blocks, of the diagonal.
fn block_means(m: &DMatrix<f64>, rows: Range<usize>, cols: Range<usize>) -> (f64, Option<f64>) {
    let on_diag = rows == cols;
    let mut off = 0.0;
    let mut n_off = 0usize;
    let mut diag = 0.0;
    for j in cols.clone() {
        for i in rows.clone() {
            if on_diag && i == j {
                diag += m[(i, j)];
            } else {
                off += m[(i, j)];
                n_off += 1;
            }
        }
    }
    let size = rows.len() as f64;
    (off / n_off as f64, on_diag.then_some(diag / size))
}

fn max_block_deviation(
    m: &DMatrix<f64>,
    rows: Range<usize>,
    cols: Range<usize>,
    off: f64,
    diag: Option<f64>,
    on_diag: bool,
) -> f64 {
    let mut worst = 0.0f64;
    for j in cols {
        for i in rows.clone() {
            let target = match (on_diag && i == j, diag) {
                (true, Some(d)) => d,
                _ => off,
            };
            let dev = (m[(i, j)] - target).abs();
            if dev.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// Block traces `tr(S_kk)` and block sums `sum(S_kk')` of a p×p matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSummaries {
    pub traces: Vec<f64>,
    pub sums: DMatrix<f64>,
}

impl BlockSummaries {
    /// `tr(S N)` for a uniform-block `N`:
    /// `Σ_k a_k tr(S_kk) + Σ_{k,k'} b_kk' sum(S_k'k)`.
    pub fn trace_product(&self, n: &UniformBlockMatrix) -> f64 {
        let k = self.traces.len();
        let mut t = 0.0;
        for r in 0..k {
            t += n.a()[r] * self.traces[r];
            for c in 0..k {
                t += n.b()[(r, c)] * self.sums[(c, r)];
            }
        }
        t
    }
}

/// Computes block traces and sums in one pass over `m`.
pub fn block_summaries(m: &DMatrix<f64>, partition: &PartitionVector) -> Result<BlockSummaries> {
    let p = partition.total();
    if m.shape() != (p, p) {
        return Err(ScfaError::DimensionMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let k = partition.num_communities();
    let labels = partition.labels();
    let mut traces = vec![0.0; k];
    let mut sums = DMatrix::zeros(k, k);
    for j in 0..p {
        let kj = labels[j];
        for i in 0..p {
            let v = m[(i, j)];
            sums[(labels[i], kj)] += v;
            if i == j {
                traces[kj] += v;
            }
        }
    }
    Ok(BlockSummaries { traces, sums })
}

#[derive(Serialize, Deserialize)]
struct UbJson {
    sizes: Vec<usize>,
    a: Vec<f64>,
    b: Vec<Vec<f64>>,
}

impl TryFrom<UbJson> for UniformBlockMatrix {
    type Error = ScfaError;

    fn try_from(j: UbJson) -> Result<Self> {
        let partition = PartitionVector::new(j.sizes)?;
        let k = partition.num_communities();
        if j.b.len() != k || j.b.iter().any(|r| r.len() != k) {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("b as {k} rows of {k}"),
                found: format!("{} rows", j.b.len()),
            });
        }
        let b = DMatrix::from_fn(k, k, |r, c| j.b[r][c]);
        Self::new(j.a, b, partition)
    }
}

impl From<UniformBlockMatrix> for UbJson {
    fn from(m: UniformBlockMatrix) -> Self {
        let k = m.a.len();
        UbJson {
            b: (0..k).map(|r| (0..k).map(|c| m.b[(r, c)]).collect()).collect(),
            a: m.a,
            sizes: m.partition.sizes,
        }
    }
}
