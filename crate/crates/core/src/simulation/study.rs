use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{euclidean_loss, generate_with_rng, relative_loss, GeneratorSpec};
use crate::error::{Result, ScfaError};
use crate::estimation::{estimate_with, EstimateOptions};
use crate::inference::{wald_report, Parameter};
use crate::par::{map_indexed, Execution};
use crate::scores::score_ols_with;
use crate::data::Membership;

const SEED_SCHEME: &str = "ChaCha8Rng::seed_from_u64(seed) with stream = replicate index";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub parameter: Parameter,
    pub truth: f64,
    pub bias: f64,
    pub mcsd: f64,
    pub ase: f64,
    pub cp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub kappa: Option<f64>,
    /// One misspecification noise matrix is drawn per replicate.
    pub noise_draw: Option<String>,
    pub alpha: f64,
    pub seed: u64,
    pub seed_scheme: String,
    pub replicates: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub parameters: Vec<ParameterSummary>,
    pub losses: Vec<f64>,
    pub relative_losses: Vec<f64>,
    pub mean_loss: f64,
    pub sd_loss: f64,
    pub mean_relative_loss: f64,
    pub runtime_seconds: f64,
}

impl SimulationReport {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// One row per parameter; bias, MCSD and ASE are ×100 and CP is a percentage.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,truth,bias_x100,mcsd_x100,ase_x100,cp_percent\n");
        for p in &self.parameters {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.name,
                p.truth,
                p.bias * 100.0,
                p.mcsd * 100.0,
                p.ase * 100.0,
                p.cp * 100.0
            );
        }
        out
    }

    /// The report with the wall-clock field zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            runtime_seconds: 0.0,
            ..self.clone()
        }
    }
}

struct Replicate {
    estimates: Vec<f64>,
    standard_errors: Vec<f64>,
    covered: Vec<bool>,
    loss: f64,
    relative_loss: f64,
}

pub fn run_study(spec: &GeneratorSpec, replicates: usize, alpha: f64) -> Result<SimulationReport> {
    run_study_with(spec, replicates, alpha, Execution::default())
}

/// generate → estimate → Wald report → factor scores, per replicate.
///
/// Replicate r draws from its own RNG stream, and aggregation walks the
/// replicates in index order, so the report does not depend on scheduling.
pub fn run_study_with(spec: &GeneratorSpec, replicates: usize, alpha: f64, execution: Execution) -> Result<SimulationReport> {
    spec.validate()?;
    if replicates < 2 {
        return Err(ScfaError::InvalidSpec(format!("need at least 2 replicates, got {replicates}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ScfaError::InvalidSpec(format!("alpha = {alpha} outside (0, 1)")));
    }
    let start = Instant::now();
    let k = spec.num_communities();
    let params = Parameter::all(k);
    let truth: Vec<f64> = params.iter().map(|p| p.value(&spec.a, &spec.b)).collect();
    let membership = Membership::contiguous(&spec.partition);
    let opts = EstimateOptions {
        execution: Execution::Sequential,
        ..Default::default()
    };

    let results = map_indexed(replicates, execution, |r| -> Result<Replicate> {
        let mut rng = spec.replicate_rng(r as u64);
        let (data, f) = generate_with_rng(spec, &mut rng)?;
        let fit = estimate_with(&data, &membership, &opts)?;
        let report = wald_report(&fit, data.n(), alpha);
        let scores = score_ols_with(&data, &membership, Execution::Sequential)?;
        let mut estimates = Vec::with_capacity(params.len());
        let mut standard_errors = Vec::with_capacity(params.len());
        let mut covered = Vec::with_capacity(params.len());
        for (q, t) in report.parameters.iter().zip(&truth) {
            estimates.push(q.estimate);
            standard_errors.push(q.standard_error);
            covered.push(q.ci_low <= *t && *t <= q.ci_high);
        }
        Ok(Replicate {
            estimates,
            standard_errors,
            covered,
            loss: euclidean_loss(&scores.scores, &f)?,
            relative_loss: relative_loss(&scores.scores, &f)?,
        })
    });

    let mut ok = Vec::with_capacity(replicates);
    let mut failure_messages = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => ok.push(rep),
            Err(e) => failure_messages.push(format!("replicate {r}: {e}")),
        }
    }
    let failures = failure_messages.len();
    if ok.len() < 2 {
        return Err(ScfaError::DegenerateSample(format!(
            "only {} of {replicates} replicates succeeded",
            ok.len()
        )));
    }
    let m = ok.len() as f64;

    let parameters = params
        .iter()
        .enumerate()
        .map(|(i, param)| {
            let est: Vec<f64> = ok.iter().map(|r| r.estimates[i]).collect();
            let (mean, sd) = mean_sd(&est);
            let ase = ok.iter().map(|r| r.standard_errors[i]).sum::<f64>() / m;
            let cp = ok.iter().filter(|r| r.covered[i]).count() as f64 / m;
            ParameterSummary {
                name: param.name(k),
                parameter: *param,
                truth: truth[i],
                bias: mean - truth[i],
                mcsd: sd,
                ase,
                cp,
            }
        })
        .collect();

    let losses: Vec<f64> = ok.iter().map(|r| r.loss).collect();
    let relative_losses: Vec<f64> = ok.iter().map(|r| r.relative_loss).collect();
    let (mean_loss, sd_loss) = mean_sd(&losses);
    let (mean_relative_loss, _) = mean_sd(&relative_losses);

    Ok(SimulationReport {
        n: spec.n,
        sizes: spec.partition.sizes().to_vec(),
        kappa: spec.noise.map(|ns| ns.kappa),
        noise_draw: spec.noise.map(|_| "per-replicate".to_string()),
        alpha,
        seed: spec.seed,
        seed_scheme: SEED_SCHEME.to_string(),
        replicates,
        failures,
        failure_messages,
        parameters,
        losses,
        relative_losses,
        mean_loss,
        sd_loss,
        mean_relative_loss,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean and sample standard deviation (divisor m - 1).
pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (m - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::tables;
    use crate::ub::PartitionVector;

    #[test]
    fn mean_sd_small() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn rejects_single_replicate() {
        let spec = tables::paper_spec(40, 2, 1).unwrap();
        assert!(run_study(&spec, 1, 0.05).is_err());
        assert!(run_study(&spec, 10, 1.5).is_err());
    }

    #[test]
    fn all_replicates_failing_is_an_error() {
        // K = 3 needs n > 9; every replicate fails estimation.
        let spec = GeneratorSpec::new(
            5,
            PartitionVector::new(vec![3, 3, 4]).unwrap(),
            tables::TRUE_A.to_vec(),
            tables::true_b(),
            1,
        )
        .unwrap();
        assert!(run_study(&spec, 4, 0.05).is_err());
    }

    #[test]
    fn large_n_recovers_truth() {
        let spec = tables::paper_spec(10_000, 1, 5).unwrap();
        let report = run_study(&spec, 2, 0.05).unwrap();
        assert_eq!(report.failures, 0);
        for p in &report.parameters {
            assert!(p.bias.abs() < 0.05, "{} bias {}", p.name, p.bias);
        }
    }

    #[test]
    fn csv_layout() {
        let spec = tables::paper_spec(40, 2, 1).unwrap();
        let report = run_study(&spec, 5, 0.05).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "parameter,truth,bias_x100,mcsd_x100,ase_x100,cp_percent");
        assert_eq!(lines.len(), 10);
        assert!(lines[1].starts_with("a11,0.1,"));
    }
}
