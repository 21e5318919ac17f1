use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// A factor `F` (p×m) of a `Wishart(df, I_p)` draw, `W = F Fᵀ`.
///
/// For `df >= p` this is the lower-triangular Bartlett factor; otherwise it is
/// the p×df matrix of the underlying Gaussian columns.
pub fn wishart_factor<R: Rng + ?Sized>(df: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(df >= 1, "Wishart degrees of freedom must be positive");
    if df >= p {
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            let chi = ChiSquared::new((df - i) as f64).expect("positive degrees of freedom");
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = StandardNormal.sample(rng);
            }
        }
        a
    } else {
        DMatrix::from_fn(p, df, |_, _| StandardNormal.sample(rng))
    }
}

/// Draws `W ~ Wishart(df, κ I_p)` by the Bartlett decomposition.
pub fn sample_wishart<R: Rng + ?Sized>(df: usize, kappa: f64, p: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(kappa >= 0.0, "Wishart scale must be non-negative");
    if kappa == 0.0 {
        return DMatrix::zeros(p, p);
    }
    let f = wishart_factor(df, p, rng);
    let w = &f * f.transpose() * kappa;
    (&w + w.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_scale_gives_zero_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_wishart(5, 0.0, 4, &mut rng), DMatrix::zeros(4, 4));
    }

    #[test]
    fn draws_are_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for df in [2, 6, 10] {
            let w = sample_wishart(df, 0.5, 6, &mut rng);
            assert_eq!(w, w.transpose());
            let ev = w.symmetric_eigenvalues();
            assert!(ev.iter().all(|&l| l > -1e-10));
            let rank = ev.iter().filter(|&&l| l > 1e-10).count();
            assert_eq!(rank, df.min(6));
        }
    }

    #[test]
    fn bartlett_factor_is_lower_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = wishart_factor(8, 5, &mut rng);
        for i in 0..5 {
            assert!(a[(i, i)] > 0.0);
            for j in i + 1..5 {
                assert_eq!(a[(i, j)], 0.0);
            }
        }
    }
}
