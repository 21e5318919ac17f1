use std::fmt::Write as _;

use crate::estimation::ScfaFit;
use crate::inference::{InferenceReport, Parameter};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn edge_style(report: &InferenceReport, param: Parameter, value: f64) -> &'static str {
    let significant = report.get(param).is_some_and(|q| q.significant);
    match (significant, value > 0.0) {
        (true, true) => "color=red, style=solid",
        (true, false) => "color=blue, style=solid",
        (false, _) => "color=gray, style=dashed",
    }
}

/// Path diagram: a box per community, an ellipse per factor, loading edges
/// from factor to community, and two-headed factor covariance edges colored
/// by sign and significance. Self-loops carry the diagonal b̂.
pub fn export_dot(fit: &ScfaFit, report: &InferenceReport, community_labels: &[String]) -> String {
    let k = fit.num_communities();
    let mut out = String::from("digraph scfa {\n  rankdir=LR;\n");
    for i in 0..k {
        let label = community_labels.get(i).cloned().unwrap_or_else(|| format!("C{}", i + 1));
        let _ = writeln!(
            out,
            "  c{} [shape=box, label={}];",
            i + 1,
            quote(&format!("{label}\n{} variables", fit.partition.size(i)))
        );
    }
    for i in 0..k {
        let _ = writeln!(out, "  f{} [shape=ellipse, label={}];", i + 1, quote(&format!("F{}", i + 1)));
    }
    for i in 0..k {
        let _ = writeln!(out, "  f{0} -> c{0} [label={1}];", i + 1, quote(&format!("{:.3}", fit.tau[i])));
    }
    for i in 0..k {
        for j in i..k {
            let v = fit.b_hat[(i, j)];
            let _ = writeln!(
                out,
                "  f{} -> f{} [dir=both, {}, label={}];",
                i + 1,
                j + 1,
                edge_style(report, Parameter::B { k: i, k2: j }, v),
                quote(&format!("{v:.3}"))
            );
        }
    }
    out.push_str("}\n");
    out
}
