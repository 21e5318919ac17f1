//! File formats: numeric tables, membership lists, UB matrix JSON, fit
//! documents, score CSVs and DOT diagrams.

mod dot;
mod fit_doc;
pub mod float;
mod table;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use dot::export_dot;
pub use fit_doc::{CommunityEntry, DiagnosticsEntry, FitDocument, InputProvenance, Timing, VariableEntry, SCHEMA_VERSION};
pub use table::{
    load_data, load_membership, membership_from_records, read_data, read_membership_records, LoadedData, MembershipTable,
    TableFormat,
};

use crate::error::Result;
use crate::scores::FactorScoreMatrix;
use crate::ub::UniformBlockMatrix;

/// Writes to a temporary file in the target directory, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_ub_matrix(path: &Path) -> Result<UniformBlockMatrix> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Scores as CSV with header `f1,...,fK`, one row per observation.
pub fn scores_csv(scores: &FactorScoreMatrix) -> String {
    let s = &scores.scores;
    let mut out = (1..=s.ncols()).map(|k| format!("f{k}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for i in 0..s.nrows() {
        for k in 0..s.ncols() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", s[(i, k)]);
        }
        out.push('\n');
    }
    out
}
