use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::DMatrix;

use crate::error::{Result, ScfaError};
use crate::ub::PartitionVector;

/// n×p observations, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(ScfaError::DegenerateSample(format!("{n} observations, need at least 2")));
        }
        if p < 2 {
            return Err(ScfaError::DimensionMismatch {
                expected: "at least 2 variables".into(),
                found: p.to_string(),
            });
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(ScfaError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_row_slice(n: usize, p: usize, rows: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(n, p, rows))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Copy with every column shifted to mean zero.
    pub fn centered(&self) -> DataMatrix {
        let mut v = self.values.clone();
        let n = v.nrows() as f64;
        for mut col in v.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
        }
        DataMatrix { values: v }
    }
}

/// Assignment of every variable to one community.
///
/// Community indices are 0-based here; they are printed 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership {
    labels: Vec<usize>,
    partition: PartitionVector,
    /// `order[q]` is the original index of the variable at reordered position q.
    order: Vec<usize>,
    /// Inverse of `order`.
    position: Vec<usize>,
}

impl Membership {
    /// `labels[j]` is the community of variable j; labels must cover `0..K`.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(ScfaError::InvalidPartition(format!("community {} has no variables", empty + 1)));
        }
        let partition = PartitionVector::new(sizes)?;
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&j| labels[j]);
        let mut position = vec![0; labels.len()];
        for (q, &j) in order.iter().enumerate() {
            position[j] = q;
        }
        Ok(Self {
            labels,
            partition,
            order,
            position,
        })
    }

    /// Compacts arbitrary labels to communities in first-appearance order.
    /// Returns the membership and the distinct labels by community index.
    pub fn from_labels<T: Eq + Hash + Clone>(raw: &[T]) -> Result<(Self, Vec<T>)> {
        let mut index: HashMap<&T, usize> = HashMap::new();
        let mut distinct = Vec::new();
        let labels = raw
            .iter()
            .map(|l| {
                *index.entry(l).or_insert_with(|| {
                    distinct.push(l.clone());
                    distinct.len() - 1
                })
            })
            .collect();
        Ok((Self::new(labels)?, distinct))
    }

    /// Variables already sorted by community.
    pub fn contiguous(partition: &PartitionVector) -> Self {
        Self::new(partition.labels()).expect("partition labels are valid")
    }

    pub fn partition(&self) -> &PartitionVector {
        &self.partition
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn p(&self) -> usize {
        self.labels.len()
    }

    pub fn num_communities(&self) -> usize {
        self.partition.num_communities()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Original variable indices belonging to community k, in original order.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.order[self.partition.range(k)]
    }

    /// Columns permuted so communities are contiguous.
    pub fn reorder_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_columns(self.order.iter())
    }

    /// Undoes [`reorder_columns`](Self::reorder_columns).
    pub fn restore_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_columns(self.position.iter())
    }

    pub(crate) fn check_data(&self, data: &DataMatrix) -> Result<()> {
        if data.p() != self.p() {
            return Err(ScfaError::DimensionMismatch {
                expected: format!("{} variables", self.p()),
                found: data.p().to_string(),
            });
        }
        Ok(())
    }
}
