use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use scfa::io::{self, FitDocument, InputProvenance, TableFormat, Timing};
use scfa::simulation::{tables, GeneratorConfig};
use scfa::{estimate_with, score_fgls, wald_report, EstimateOptions, Execution, GeneratorSpec};

use crate::{FitArgs, Format, ReproduceArgs, SimulateArgs, Table, UbOp, UbmatArgs};

fn write(path: &Path, contents: &str) -> Result<()> {
    io::write_atomic(path, contents.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

pub fn fit(args: FitArgs) -> Result<()> {
    let start = Instant::now();
    let format = match args.format {
        Some(Format::Csv) => TableFormat::Csv,
        Some(Format::Tsv) => TableFormat::Tsv,
        None => TableFormat::from_path(&args.data),
    };
    let table = io::load_data(&args.data, format, !args.no_header).with_context(|| format!("reading {}", args.data.display()))?;
    let groups = io::load_membership(&args.membership, &table.names)
        .with_context(|| format!("reading {}", args.membership.display()))?;
    let load_seconds = start.elapsed().as_secs_f64();

    let est_start = Instant::now();
    let opts = EstimateOptions {
        center: args.center,
        ..Default::default()
    };
    let fit = estimate_with(&table.data, &groups.membership, &opts)?;
    let report = wald_report(&fit, table.data.n(), args.alpha);
    let estimate_seconds = est_start.elapsed().as_secs_f64();

    if let Some(path) = &args.scores {
        let scores = score_fgls(&table.data, &groups.membership, &fit)?;
        write(path, &io::scores_csv(&scores))?;
    }
    if let Some(path) = &args.dot {
        write(path, &io::export_dot(&fit, &report, &groups.community_labels))?;
    }

    let input = InputProvenance {
        data_path: args.data.display().to_string(),
        data_sha256: io::sha256_file(&args.data)?,
        membership_path: args.membership.display().to_string(),
        membership_sha256: io::sha256_file(&args.membership)?,
        centered: args.center,
        n: table.data.n(),
        p: table.data.p(),
    };
    let timing = Timing {
        load_seconds,
        estimate_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    let doc = FitDocument::new(
        input,
        &fit,
        &report,
        &table.names,
        groups.membership.labels(),
        &groups.community_labels,
        timing,
    );
    write(&args.out, &doc.to_json()?)?;

    println!(
        "n={} p={} K={} log_likelihood={}",
        table.data.n(),
        table.data.p(),
        fit.num_communities(),
        fit.log_likelihood.map_or("none".to_string(), |l| l.to_string())
    );
    for msg in &fit.diagnostics.messages {
        eprintln!("warning: {msg}");
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let config: GeneratorConfig = serde_json::from_str(&text)
        .map_err(scfa::ScfaError::from)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    let mut spec = GeneratorSpec::try_from(config)?;
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    let report = scfa::run_study(&spec, args.reps, args.alpha)?;
    write(&args.out, &serde_json::to_string_pretty(&report)?)?;
    if let Some(path) = &args.csv {
        write(path, &report.to_csv())?;
    }
    println!(
        "replicates={} failures={} mean_loss={:.4} seconds={:.3}",
        report.replicates, report.failures, report.mean_loss, report.runtime_seconds
    );
    Ok(())
}

pub fn reproduce(args: ReproduceArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let exec = Execution::Parallel;
    let files: Vec<(&str, String)> = match args.table {
        Table::Table1 => vec![("table1.csv", tables::table1_csv(&tables::table1(args.seed, exec)?))],
        Table::Table2 => vec![("table2.csv", tables::table2_csv(&tables::table2(args.seed, exec)?))],
        Table::Table3 => {
            let cells = tables::table3(args.seed, exec)?;
            vec![
                ("table3.csv", tables::table3_csv(&cells)),
                ("table3_loss.csv", tables::table3_loss_csv(&cells)),
            ]
        }
    };
    for (name, contents) in &files {
        let path = args.out.join(name);
        write(&path, contents)?;
        println!("wrote {}", path.display());
    }
    if let Table::Table1 | Table::Table3 = args.table {
        print!("{}", files.last().map_or("", |(_, c)| c.as_str()));
    }
    Ok(())
}

pub fn ubmat(args: UbmatArgs) -> Result<()> {
    let m = io::read_ub_matrix(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let out = match args.op {
        UbOp::Det => serde_json::to_string(&m.log_determinant()?)?,
        UbOp::Inv => serde_json::to_string_pretty(&m.inverse()?)?,
        UbOp::Eig => serde_json::to_string(&m.eigenvalues()?)?,
        UbOp::Check => serde_json::json!({
            "dim": m.dim(),
            "sizes": m.partition().sizes(),
            "symmetric": m.is_symmetric(),
            "positive_definite": m.is_positive_definite()?,
        })
        .to_string(),
    };
    println!("{out}");
    Ok(())
}
