use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::ScfaFit;
use crate::inference::InferenceReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputProvenance {
    pub data_path: String,
    pub data_sha256: String,
    pub membership_path: String,
    pub membership_sha256: String,
    pub centered: bool,
    pub n: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityEntry {
    /// 1-based factor index.
    pub index: usize,
    pub label: String,
    pub size: usize,
}

/// One data column, in input order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableEntry {
    pub name: String,
    pub community: String,
    pub factor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsEntry {
    pub nonpositive_a: Vec<usize>,
    pub b_positive_definite: bool,
    pub repaired: bool,
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub load_seconds: f64,
    pub estimate_seconds: f64,
    pub total_seconds: f64,
}

/// Everything `scfa fit` produces, as one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub input: InputProvenance,
    pub sizes: Vec<usize>,
    pub communities: Vec<CommunityEntry>,
    pub variables: Vec<VariableEntry>,
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub log_likelihood: Option<f64>,
    pub inference: InferenceReport,
    pub diagnostics: DiagnosticsEntry,
    pub timing: Timing,
}

impl FitDocument {
    /// `variable_names` and `variable_labels` are in input column order;
    /// `variable_labels[j]` is the 0-based community of column j.
    pub fn new(
        input: InputProvenance,
        fit: &ScfaFit,
        report: &InferenceReport,
        variable_names: &[String],
        variable_labels: &[usize],
        community_labels: &[String],
        timing: Timing,
    ) -> Self {
        let sizes = fit.partition.sizes().to_vec();
        let k = sizes.len();
        FitDocument {
            schema_version: SCHEMA_VERSION,
            input,
            communities: (0..k)
                .map(|i| CommunityEntry {
                    index: i + 1,
                    label: community_labels[i].clone(),
                    size: sizes[i],
                })
                .collect(),
            variables: variable_names
                .iter()
                .zip(variable_labels)
                .map(|(name, &l)| VariableEntry {
                    name: name.clone(),
                    community: community_labels[l].clone(),
                    factor: l + 1,
                })
                .collect(),
            sizes,
            a_hat: fit.a_hat.clone(),
            b_hat: (0..k).map(|r| fit.b_hat.row(r).iter().copied().collect()).collect(),
            tau: fit.tau.clone(),
            log_likelihood: fit.log_likelihood,
            inference: report.clone(),
            diagnostics: DiagnosticsEntry {
                nonpositive_a: fit.diagnostics.nonpositive_a.clone(),
                b_positive_definite: fit.diagnostics.b_positive_definite,
                repaired: fit.diagnostics.repaired,
                messages: fit.diagnostics.messages.clone(),
            },
            timing,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
