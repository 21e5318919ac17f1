#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use scfa::{PartitionVector, UniformBlockMatrix};

/// Random symmetric positive definite UB matrix.
pub fn random_pd_ub<R: Rng>(rng: &mut R, k: usize, max_size: usize) -> UniformBlockMatrix {
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(2..=max_size)).collect();
    let a: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..3.0)).collect();
    let m = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    let b = &m * m.transpose() + DMatrix::identity(k, k) * 0.1;
    UniformBlockMatrix::new(a, b, PartitionVector::new(sizes).unwrap()).unwrap()
}

pub fn relative_error(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (x - y).amax() / y.amax().max(1.0)
}
