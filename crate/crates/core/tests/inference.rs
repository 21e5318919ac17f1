use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scfa::inference::{critical_value, edge_labels, var_a, var_b, EdgeSign};
use scfa::simulation::{generate_with_rng, tables};
use scfa::{estimate_with, wald_report, EstimateOptions, Execution, Membership, Parameter, ScfaFit};

fn sequential() -> EstimateOptions {
    EstimateOptions {
        execution: Execution::Sequential,
        ..Default::default()
    }
}

/// Average standard errors (×100) reported for n = 120, sizes 4×(3,3,4).
const PUBLISHED_ASE: [(&str, f64); 9] = [
    ("a11", 0.4),
    ("a22", 0.8),
    ("a33", 1.7),
    ("b11", 26.2),
    ("b12", 23.9),
    ("b13", 26.8),
    ("b22", 40.4),
    ("b23", 34.0),
    ("b33", 46.6),
];

#[test]
fn standard_errors_at_truth_match_published_ase() {
    let spec = tables::paper_spec(120, 4, 0).unwrap();
    let truth = ScfaFit::from_parameters(spec.a.clone(), spec.b.clone(), spec.partition.clone(), 120).unwrap();
    let report = wald_report(&truth, 120, 0.05);
    for (name, ase) in PUBLISHED_ASE {
        let se = report.parameters.iter().find(|q| q.name == name).unwrap().standard_error * 100.0;
        let tol = if name.starts_with('a') { 0.06 } else { 0.04 * ase };
        assert!((se - ase).abs() <= tol, "{name}: {se:.2} vs {ase}");
    }
}

#[test]
fn variance_scaling() {
    let v = var_a(0.5, 41, 5);
    assert!((var_a(0.5, 81, 5) - v / 2.0).abs() < 1e-15);
    assert!((var_a(0.5, 41, 9) - v / 2.0).abs() < 1e-15);
    assert!((var_a(1.0, 41, 5) - 4.0 * v).abs() < 1e-15);
}

#[test]
fn diagonal_b_variance_hand_value() {
    // a = 1, b = 0.5, p = 4, n = 11: 2/(10*12) * (9 - 4*0.5) = 7/60
    let part = scfa::PartitionVector::new(vec![4]).unwrap();
    let b = nalgebra::DMatrix::from_element(1, 1, 0.5);
    assert!((var_b(&[1.0], &b, 11, &part, 0, 0) - 7.0 / 60.0).abs() < 1e-15);
}

#[test]
fn sampling_variance_matches_exact_formula() {
    // the uncentered n-divisor covariance has variance formula × (n - 1)/n
    let spec = tables::paper_spec(40, 2, 31).unwrap();
    let membership = Membership::contiguous(&spec.partition);
    let reps = 20_000u64;
    let (mut sa, mut sa2, mut sb, mut sb2) = (0.0, 0.0, 0.0, 0.0);
    for r in 0..reps {
        let mut rng = spec.replicate_rng(r);
        let (data, _) = generate_with_rng(&spec, &mut rng).unwrap();
        let fit = estimate_with(&data, &membership, &sequential()).unwrap();
        sa += fit.a_hat[0];
        sa2 += fit.a_hat[0] * fit.a_hat[0];
        sb += fit.b_hat[(0, 1)];
        sb2 += fit.b_hat[(0, 1)] * fit.b_hat[(0, 1)];
    }
    let m = reps as f64;
    let emp_a = (sa2 - sa * sa / m) / (m - 1.0);
    let emp_b = (sb2 - sb * sb / m) / (m - 1.0);
    let shrink = 39.0 / 40.0;
    let exact_a = var_a(spec.a[0], 40, spec.partition.size(0)) * shrink;
    let exact_b = var_b(&spec.a, &spec.b, 40, &spec.partition, 0, 1) * shrink;
    assert!((emp_a / exact_a - 1.0).abs() < 0.05, "a11: {emp_a} vs {exact_a}");
    assert!((emp_b / exact_b - 1.0).abs() < 0.05, "b12: {emp_b} vs {exact_b}");
}

#[test]
fn wald_intervals_cover_at_nominal_rate() {
    let spec = tables::paper_spec(120, 4, 37).unwrap();
    let membership = Membership::contiguous(&spec.partition);
    let params = Parameter::all(3);
    let truth: Vec<f64> = params.iter().map(|p| p.value(&spec.a, &spec.b)).collect();
    let reps = 2000;
    let mut covered = vec![0usize; params.len()];
    let mut est = vec![Vec::with_capacity(reps as usize); params.len()];
    let mut se_sum = vec![0.0; params.len()];
    for r in 0..reps {
        let mut rng = spec.replicate_rng(r);
        let (data, _) = generate_with_rng(&spec, &mut rng).unwrap();
        let fit = estimate_with(&data, &membership, &sequential()).unwrap();
        let report = wald_report(&fit, data.n(), 0.05);
        for (i, q) in report.parameters.iter().enumerate() {
            if q.ci_low <= truth[i] && truth[i] <= q.ci_high {
                covered[i] += 1;
            }
            est[i].push(q.estimate);
            se_sum[i] += q.standard_error;
        }
    }
    for (i, c) in covered.iter().enumerate() {
        let cp = *c as f64 / reps as f64;
        assert!((0.92..=0.98).contains(&cp), "{}: coverage {cp}", params[i].name(3));
        let m = reps as f64;
        let mean = est[i].iter().sum::<f64>() / m;
        let mcsd = (est[i].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let ase = se_sum[i] / m;
        assert!((ase / mcsd - 1.0).abs() < 0.15, "{}: ASE {ase} MCSD {mcsd}", params[i].name(3));
    }
}

#[test]
fn report_fields_are_consistent() {
    let spec = tables::paper_spec(80, 2, 41).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (data, _) = generate_with_rng(&spec, &mut rng).unwrap();
    let fit = estimate_with(&data, &Membership::contiguous(&spec.partition), &sequential()).unwrap();
    let report = wald_report(&fit, data.n(), 0.1);
    let z = critical_value(0.1);
    for q in &report.parameters {
        assert!((q.standard_error - q.exact_variance.sqrt()).abs() < 1e-15);
        assert!((q.ci_high - q.ci_low - 2.0 * z * q.standard_error).abs() < 1e-12);
        assert!((q.z_statistic - q.estimate / q.standard_error).abs() < 1e-12);
        assert_eq!(q.significant, q.p_value < 0.1);
    }
    let edges = edge_labels(&report);
    assert_eq!(edges.len(), 6);
    for e in &edges {
        let want = if fit.b_hat[(e.from, e.to)] > 0.0 { EdgeSign::Positive } else { EdgeSign::Negative };
        assert_eq!(e.sign, want);
    }
}

#[test]
fn scaling_data_scales_estimates_and_variances() {
    let spec = tables::paper_spec(60, 2, 43).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (data, _) = generate_with_rng(&spec, &mut rng).unwrap();
    let membership = Membership::contiguous(&spec.partition);
    let c = 3.0;
    let scaled = scfa::DataMatrix::new(data.values() * c).unwrap();
    let fit = estimate_with(&data, &membership, &sequential()).unwrap();
    let fit_c = estimate_with(&scaled, &membership, &sequential()).unwrap();
    let r = wald_report(&fit, 60, 0.05);
    let rc = wald_report(&fit_c, 60, 0.05);
    for (q, qc) in r.parameters.iter().zip(&rc.parameters) {
        assert!((qc.estimate - c * c * q.estimate).abs() <= 1e-10 * qc.estimate.abs().max(1.0));
        assert!((qc.exact_variance / q.exact_variance - c.powi(4)).abs() < 1e-9);
        assert!((qc.z_statistic - q.z_statistic).abs() < 1e-9);
    }
}
