use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scfa::estimation::sample_covariance;
use scfa::simulation::{generate, sample_wishart, tables};
use scfa::{run_study_with, Execution, GeneratorSpec, NoiseSpec, PartitionVector};

#[test]
fn generated_data_has_model_covariance() {
    let n = 100_000;
    let spec = tables::paper_spec(n, 1, 2).unwrap();
    let (data, f) = generate(&spec).unwrap();
    let nf = n as f64;
    // factors: within 2% of B, on the scale of sqrt(b_kk b_k'k')
    let sf = f.transpose() * &f / nf;
    for i in 0..3 {
        for j in 0..3 {
            let scale = (spec.b[(i, i)] * spec.b[(j, j)]).sqrt();
            assert!((sf[(i, j)] - spec.b[(i, j)]).abs() < 0.02 * scale, "f ({i},{j}): {}", sf[(i, j)]);
        }
    }
    // errors u = X - L f: within 2% of Bdiag(a_kk I)
    let labels = spec.partition.labels();
    let u = DMatrix::from_fn(n, spec.p(), |i, j| data.values()[(i, j)] - f[(i, labels[j])]);
    let su = u.transpose() * &u / nf;
    for i in 0..spec.p() {
        for j in 0..spec.p() {
            let scale = (spec.a[labels[i]] * spec.a[labels[j]]).sqrt();
            let want = if i == j { spec.a[labels[i]] } else { 0.0 };
            assert!((su[(i, j)] - want).abs() < 0.02 * scale, "u ({i},{j}): {}", su[(i, j)]);
        }
    }
    // and the full covariance
    let s = sample_covariance(&data, false);
    let sigma = spec.covariance().to_dense();
    for i in 0..spec.p() {
        for j in 0..spec.p() {
            let se = ((sigma[(i, j)].powi(2) + sigma[(i, i)] * sigma[(j, j)]) / nf).sqrt();
            assert!((s[(i, j)] - sigma[(i, j)]).abs() < 5.0 * se, "({i},{j})");
        }
    }
}

#[test]
fn loadings_scale_data_not_covariance() {
    let spec = tables::paper_spec(100_000, 1, 4).unwrap().with_tau(vec![2.0, -1.0, 0.5]).unwrap();
    let (data, f) = generate(&spec).unwrap();
    let s = sample_covariance(&data, false);
    let sigma = spec.covariance().to_dense();
    assert!((s - sigma).amax() < 0.1);
    let sf = f.transpose() * &f / 100_000.0;
    assert!((sf - spec.factor_covariance()).amax() < 0.05);
}

#[test]
fn wishart_mean_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = sample_wishart(200, 0.01, 200, &mut rng);
    let mean_diag = w.diagonal().mean();
    assert!((mean_diag - 2.0).abs() < 0.05, "{mean_diag}");
}

#[test]
fn wishart_first_moment() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let draws = 20_000;
    let mut sum = DMatrix::<f64>::zeros(3, 3);
    for _ in 0..draws {
        sum += sample_wishart(3, 1.0, 3, &mut rng);
    }
    let mean = sum / draws as f64;
    for i in 0..3 {
        assert!((mean[(i, i)] / 3.0 - 1.0).abs() < 0.02, "diag {i}: {}", mean[(i, i)]);
        for j in 0..i {
            assert!(mean[(i, j)].abs() < 0.06, "off ({i},{j}): {}", mean[(i, j)]);
        }
    }
}

#[test]
fn wishart_variance_of_diagonal() {
    // var(W_ii) = 2 df for identity scale
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 20_000;
    let xs: Vec<f64> = (0..draws).map(|_| sample_wishart(5, 1.0, 4, &mut rng)[(2, 2)]).collect();
    let mean = xs.iter().sum::<f64>() / draws as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    assert!((var / 10.0 - 1.0).abs() < 0.06, "{var}");
}

#[test]
fn study_is_identical_across_execution_modes() {
    let spec = tables::paper_spec(40, 2, 99).unwrap();
    let seq = run_study_with(&spec, 30, 0.05, Execution::Sequential).unwrap();
    let par = run_study_with(&spec, 30, 0.05, Execution::Parallel).unwrap();
    assert_eq!(seq.without_timing(), par.without_timing());
    let again = run_study_with(&spec, 30, 0.05, Execution::Parallel).unwrap();
    assert_eq!(par.without_timing(), again.without_timing());
    let other = run_study_with(&spec.clone().with_seed(100), 30, 0.05, Execution::Parallel).unwrap();
    assert_ne!(par.losses, other.losses);
}

#[test]
fn noisy_study_is_deterministic() {
    let spec = tables::paper_spec(40, 2, 5).unwrap().with_noise(NoiseSpec { kappa: 0.05 }).unwrap();
    let seq = run_study_with(&spec, 10, 0.05, Execution::Sequential).unwrap();
    let par = run_study_with(&spec, 10, 0.05, Execution::Parallel).unwrap();
    assert_eq!(seq.without_timing(), par.without_timing());
    assert_eq!(seq.noise_draw.as_deref(), Some("per-replicate"));
}

#[test]
fn misspecification_inflates_error_variances_only() {
    // noise scale s = p·κ = 10 lands in â; b̂ stays nearly unbiased
    let spec = tables::misspecified_spec(0.05, 6).unwrap();
    let report = run_study_with(&spec, 100, 0.05, Execution::Parallel).unwrap();
    for name in ["a11", "a22", "a33"] {
        let bias = report.parameter(name).unwrap().bias;
        assert!((bias / 10.0 - 1.0).abs() < 0.1, "{name}: {bias}");
    }
    let b: Vec<f64> = report.parameters.iter().filter(|q| q.name.starts_with('b')).map(|q| q.bias.abs()).collect();
    let mean_abs = b.iter().sum::<f64>() / b.len() as f64;
    assert!(mean_abs < 0.06, "mean |bias| of b = {mean_abs}");
}

#[test]
fn invalid_specs_rejected() {
    let part = PartitionVector::new(vec![3, 3]).unwrap();
    let b = DMatrix::identity(2, 2);
    assert!(GeneratorSpec::new(1, part.clone(), vec![1.0, 1.0], b.clone(), 0).is_err());
    assert!(GeneratorSpec::new(10, part.clone(), vec![1.0, -1.0], b.clone(), 0).is_err());
    let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(GeneratorSpec::new(10, part.clone(), vec![1.0, 1.0], indefinite, 0).is_err());
    let ok = GeneratorSpec::new(10, part, vec![1.0, 1.0], b, 0).unwrap();
    assert!(ok.clone().with_noise(NoiseSpec { kappa: -1.0 }).is_err());
    assert!(ok.with_tau(vec![1.0, 0.0]).is_err());
}
