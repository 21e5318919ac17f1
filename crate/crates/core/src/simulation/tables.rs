//! The simulation designs behind the published tables: three communities with
//! sizes a multiple of (3, 3, 4), error variances (0.1, 0.2, 0.5) and a fixed
//! factor covariance.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::{derive_seed, run_study_with, GeneratorSpec, NoiseSpec, SimulationReport};
use crate::error::Result;
use crate::par::Execution;
use crate::ub::PartitionVector;

pub const TRUE_A: [f64; 3] = [0.1, 0.2, 0.5];
pub const BASE_SIZES: [usize; 3] = [3, 3, 4];
pub const REPLICATES: usize = 100;
pub const ALPHA: f64 = 0.05;
/// Seed used by `scfa reproduce` when none is given.
pub const DEFAULT_SEED: u64 = 7;

/// `(n, size multiplier)` of every cell; p is ten times the multiplier.
/// The loss table and the parameter table share these cells.
pub const DESIGN_CELLS: [(usize, usize); 9] = [
    (40, 2),
    (40, 3),
    (40, 4),
    (80, 4),
    (80, 8),
    (80, 12),
    (120, 4),
    (120, 12),
    (120, 20),
];

pub const TABLE3_N: usize = 120;
pub const TABLE3_MULTIPLIER: usize = 20;
pub const TABLE3_KAPPAS: [f64; 3] = [0.01, 0.03, 0.05];

pub fn true_b() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[2.02, 0.73, 1.15, 0.73, 3.13, 1.63, 1.15, 1.63, 3.69])
}

pub fn paper_spec(n: usize, multiplier: usize, seed: u64) -> Result<GeneratorSpec> {
    GeneratorSpec::new(
        n,
        PartitionVector::scaled(&BASE_SIZES, multiplier)?,
        TRUE_A.to_vec(),
        true_b(),
        seed,
    )
}

pub fn misspecified_spec(kappa: f64, seed: u64) -> Result<GeneratorSpec> {
    paper_spec(TABLE3_N, TABLE3_MULTIPLIER, seed)?.with_noise(NoiseSpec { kappa })
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub n: usize,
    pub p: usize,
    pub report: SimulationReport,
}

fn run_cells(
    table: u64,
    cells: impl IntoIterator<Item = Result<GeneratorSpec>>,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Cell>> {
    cells
        .into_iter()
        .enumerate()
        .map(|(i, spec)| {
            let spec = spec?.with_seed(derive_seed(seed, table * 1000 + i as u64));
            let report = run_study_with(&spec, REPLICATES, ALPHA, execution)?;
            Ok(Cell {
                n: spec.n,
                p: spec.p(),
                report,
            })
        })
        .collect()
}

pub fn table1(seed: u64, execution: Execution) -> Result<Vec<Cell>> {
    run_cells(1, DESIGN_CELLS.iter().map(|&(n, m)| paper_spec(n, m, 0)), seed, execution)
}

pub fn table2(seed: u64, execution: Execution) -> Result<Vec<Cell>> {
    run_cells(2, DESIGN_CELLS.iter().map(|&(n, m)| paper_spec(n, m, 0)), seed, execution)
}

pub fn table3(seed: u64, execution: Execution) -> Result<Vec<Cell>> {
    run_cells(3, TABLE3_KAPPAS.iter().map(|&k| misspecified_spec(k, 0)), seed, execution)
}

/// Mean, s.d. and wall time of the factor-score loss per cell.
pub fn table1_csv(cells: &[Cell]) -> String {
    let mut out = String::from("n,p,mean_loss,sd_loss,seconds\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.3}",
            c.n, c.p, c.report.mean_loss, c.report.sd_loss, c.report.runtime_seconds
        );
    }
    out
}

/// Bias, MCSD and ASE ×100 and CP in percent, one row per cell and parameter.
pub fn table2_csv(cells: &[Cell]) -> String {
    let mut out = String::from("n,p,sizes,parameter,bias_x100,mcsd_x100,ase_x100,cp_percent\n");
    for c in cells {
        let sizes = sizes_label(&c.report.sizes);
        for q in &c.report.parameters {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.n,
                c.p,
                sizes,
                q.name,
                fixed(q.bias * 100.0, 1),
                fixed(q.mcsd * 100.0, 1),
                fixed(q.ase * 100.0, 1),
                fixed(q.cp * 100.0, 0)
            );
        }
    }
    out
}

pub fn table3_csv(cells: &[Cell]) -> String {
    let mut out = String::from("noise_scale,kappa,parameter,bias_x100,mcsd_x100,ase_x100,cp_percent\n");
    for c in cells {
        let kappa = c.report.kappa.unwrap_or(0.0);
        for q in &c.report.parameters {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                noise_scale(c),
                kappa,
                q.name,
                fixed(q.bias * 100.0, 1),
                fixed(q.mcsd * 100.0, 1),
                fixed(q.ase * 100.0, 1),
                fixed(q.cp * 100.0, 0)
            );
        }
    }
    out
}

/// Average relative factor-score loss per noise level.
pub fn table3_loss_csv(cells: &[Cell]) -> String {
    let mut out = String::from("noise_scale,kappa,relative_loss_percent\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{:.1}",
            noise_scale(c),
            c.report.kappa.unwrap_or(0.0),
            c.report.mean_relative_loss * 100.0
        );
    }
    out
}

fn noise_scale(c: &Cell) -> String {
    format!("{:.0}", c.report.kappa.unwrap_or(0.0) * c.p as f64)
}

/// Fixed-point text without a minus sign on values that round to zero.
fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn sizes_label(sizes: &[usize]) -> String {
    let parts: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    format!("({})", parts.join(";"))
}
