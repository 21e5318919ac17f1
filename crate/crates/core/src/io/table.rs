use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{DataMatrix, Membership};
use crate::error::{Result, ScfaError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Tsv,
}

impl TableFormat {
    /// `.tsv` and `.tab` files are tab-separated, everything else comma-separated.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(ext) if ext == "tsv" || ext == "tab" => TableFormat::Tsv,
            _ => TableFormat::Csv,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            TableFormat::Csv => b',',
            TableFormat::Tsv => b'\t',
        }
    }
}

/// A numeric table with its column names.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub names: Vec<String>,
    pub data: DataMatrix,
}

pub fn load_data(path: &Path, format: TableFormat, header: bool) -> Result<LoadedData> {
    let file = std::fs::File::open(path)?;
    read_data(file, format, header)
}

pub fn read_data<R: std::io::Read>(reader: R, format: TableFormat, header: bool) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut names: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| parse_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(ScfaError::RaggedRows {
                    line,
                    expected: w,
                    found: record.len(),
                })
            }
            Some(_) => {}
        }
        if header && names.is_none() {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| ScfaError::NonNumericCell {
                line,
                column: c + 1,
                value: field.to_string(),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let p = width.ok_or_else(|| ScfaError::Parse {
        line: 1,
        column: 1,
        message: "empty table".into(),
    })?;
    let names = names.unwrap_or_else(|| (1..=p).map(|j| format!("v{j}")).collect());
    let data = DataMatrix::new(DMatrix::from_row_slice(rows, p, &values))?;
    Ok(LoadedData { names, data })
}

fn parse_error(e: &csv::Error) -> ScfaError {
    let line = e.position().map_or(0, |p| p.line());
    ScfaError::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

/// Community assignment of the data columns, with the original labels.
#[derive(Clone, Debug)]
pub struct MembershipTable {
    pub membership: Membership,
    /// Label of community k, in first-appearance order of the file.
    pub community_labels: Vec<String>,
}

/// Reads `variable,community` records. A first row reading
/// `variable,community` (or `variable_name,community_label`) is skipped.
pub fn read_membership_records<R: std::io::Read>(reader: R) -> Result<Vec<(String, String, u64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(ScfaError::RaggedRows {
                line,
                expected: 2,
                found: record.len(),
            });
        }
        if i == 0 && is_membership_header(&record[0], &record[1]) {
            continue;
        }
        out.push((record[0].to_string(), record[1].to_string(), line));
    }
    Ok(out)
}

fn is_membership_header(a: &str, b: &str) -> bool {
    let a = a.to_ascii_lowercase();
    let b = b.to_ascii_lowercase();
    matches!(a.as_str(), "variable" | "variable_name" | "name")
        && matches!(b.as_str(), "community" | "community_label" | "label")
}

pub fn load_membership(path: &Path, variables: &[String]) -> Result<MembershipTable> {
    let file = std::fs::File::open(path)?;
    membership_from_records(read_membership_records(file)?, variables)
}

/// Aligns membership records to the data's column names. Every community
/// must end up with more than two variables.
pub fn membership_from_records(records: Vec<(String, String, u64)>, variables: &[String]) -> Result<MembershipTable> {
    let column: HashMap<&str, usize> = variables.iter().enumerate().map(|(j, v)| (v.as_str(), j)).collect();
    let mut label_of: Vec<Option<usize>> = vec![None; variables.len()];
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut community_labels = Vec::new();
    let mut seen = HashSet::new();
    for (name, label, line) in records {
        let &j = column.get(name.as_str()).ok_or_else(|| ScfaError::UnknownVariable(name.clone()))?;
        if !seen.insert(name.clone()) {
            return Err(ScfaError::Parse {
                line,
                column: 1,
                message: format!("variable {name:?} listed twice"),
            });
        }
        let next = community_labels.len();
        let k = *label_index.entry(label.clone()).or_insert_with(|| {
            community_labels.push(label);
            next
        });
        label_of[j] = Some(k);
    }
    let labels = label_of
        .into_iter()
        .enumerate()
        .map(|(j, l)| l.ok_or_else(|| ScfaError::MissingVariable(variables[j].clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut sizes = vec![0usize; community_labels.len()];
    for &l in &labels {
        sizes[l] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s <= 2) {
        return Err(ScfaError::CommunityTooSmall {
            community: community_labels[k].clone(),
            size: sizes[k],
        });
    }
    Ok(MembershipTable {
        membership: Membership::new(labels)?,
        community_labels,
    })
}
