use std::io::Write;

use nalgebra::DMatrix;
use scfa::io::{self, export_dot, load_data, load_membership, TableFormat};
use scfa::simulation::{generate, tables};
use scfa::{estimate, wald_report, Membership, PartitionVector, ScfaError, ScfaFit};

fn file_with(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn csv_and_tsv_files() {
    let f = file_with("x,y,z\n1,2,3\n4,5,6.5\n", ".csv");
    let d = load_data(f.path(), TableFormat::from_path(f.path()), true).unwrap();
    assert_eq!(d.names, ["x", "y", "z"]);
    assert_eq!(d.data.values()[(1, 2)], 6.5);
    let f = file_with("1\t2\n3\t4\n", ".tsv");
    let d = load_data(f.path(), TableFormat::from_path(f.path()), false).unwrap();
    assert_eq!((d.data.n(), d.data.p()), (2, 2));
}

#[test]
fn parse_failures_carry_positions() {
    let f = file_with("a,b\n1,2\n3,4,5\n", ".csv");
    let err = load_data(f.path(), TableFormat::Csv, true).unwrap_err();
    assert!(matches!(err, ScfaError::RaggedRows { line: 3, .. }), "{err}");
    let f = file_with("a,b\n1,2\n3,abc\n", ".csv");
    let err = load_data(f.path(), TableFormat::Csv, true).unwrap_err();
    assert!(matches!(err, ScfaError::NonNumericCell { line: 3, column: 2, .. }), "{err}");
    let f = file_with("", ".csv");
    assert!(matches!(load_data(f.path(), TableFormat::Csv, false), Err(ScfaError::Parse { .. })));
    assert!(matches!(
        load_data(std::path::Path::new("/nonexistent/file.csv"), TableFormat::Csv, false),
        Err(ScfaError::Io(_))
    ));
}

#[test]
fn membership_file_aligns_to_columns() {
    let names: Vec<String> = ["g1", "g2", "g3", "g4", "g5", "g6"].iter().map(|s| s.to_string()).collect();
    let f = file_with("variable_name,community_label\ng1,A\ng2,B\ng3,A\ng4,B\ng5,A\ng6,B\n", ".csv");
    let t = load_membership(f.path(), &names).unwrap();
    assert_eq!(t.membership.labels(), &[0, 1, 0, 1, 0, 1]);
    assert_eq!(t.membership.partition().sizes(), &[3, 3]);
    let f = file_with("g1,A\ng2,A\ng3,A\ng4,B\ng5,B\n", ".csv");
    assert!(matches!(load_membership(f.path(), &names), Err(ScfaError::MissingVariable(v)) if v == "g6"));
}

#[test]
fn ub_matrix_file() {
    let f = file_with(r#"{"sizes":[2,3],"a":[1.0,2.0],"b":[[0.5,0.1],[0.1,0.3]]}"#, ".json");
    let m = io::read_ub_matrix(f.path()).unwrap();
    assert_eq!(m.dim(), 5);
    let f = file_with(r#"{"sizes":[2,3],"a":[1.0,2.0],"b":[[0.5,0.1],[0.2,0.3]]}"#, ".json");
    assert!(io::read_ub_matrix(f.path()).is_err());
}

mod dot_grammar {
    //! Recursive-descent check of the DOT subset: graph, node, edge and
    //! attribute statements with `[k=v, ...]` lists.

    #[derive(Debug, PartialEq)]
    enum Tok {
        Id(String),
        Sym(char),
        Arrow,
    }

    fn lex(s: &str) -> Result<Vec<Tok>, String> {
        let cs: Vec<char> = s.chars().collect();
        let mut i = 0;
        let mut out = Vec::new();
        while i < cs.len() {
            let c = cs[i];
            if c.is_whitespace() {
                i += 1;
            } else if "{}[];,=".contains(c) {
                out.push(Tok::Sym(c));
                i += 1;
            } else if c == '-' && cs.get(i + 1) == Some(&'>') {
                out.push(Tok::Arrow);
                i += 2;
            } else if c == '"' {
                let mut v = String::new();
                i += 1;
                loop {
                    match cs.get(i) {
                        None => return Err("unterminated string".into()),
                        Some('"') => break,
                        Some('\\') => {
                            v.push(*cs.get(i + 1).ok_or("dangling escape")?);
                            i += 2;
                        }
                        Some(&ch) => {
                            v.push(ch);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push(Tok::Id(v));
            } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
                let start = i;
                while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '.' || cs[i] == '-') {
                    if cs[i] == '-' && cs.get(i + 1) == Some(&'>') {
                        break;
                    }
                    i += 1;
                }
                out.push(Tok::Id(cs[start..i].iter().collect()));
            } else {
                return Err(format!("unexpected character {c:?}"));
            }
        }
        Ok(out)
    }

    pub type Attrs = Vec<(String, String)>;

    pub struct Summary {
        pub nodes: Vec<(String, Attrs)>,
        pub edges: Vec<(String, String, Attrs)>,
    }

    pub fn parse(s: &str) -> Result<Summary, String> {
        let toks = lex(s)?;
        let mut p = 0;
        let id = |p: &mut usize| -> Result<String, String> {
            match toks.get(*p) {
                Some(Tok::Id(v)) => {
                    *p += 1;
                    Ok(v.clone())
                }
                t => Err(format!("expected id, found {t:?}")),
            }
        };
        let sym = |p: &mut usize, c: char| -> Result<(), String> {
            if toks.get(*p) == Some(&Tok::Sym(c)) {
                *p += 1;
                Ok(())
            } else {
                Err(format!("expected {c:?} at token {p}, found {:?}", toks.get(*p)))
            }
        };
        let attrs = |p: &mut usize| -> Result<Vec<(String, String)>, String> {
            let mut out = Vec::new();
            if toks.get(*p) != Some(&Tok::Sym('[')) {
                return Ok(out);
            }
            *p += 1;
            while toks.get(*p) != Some(&Tok::Sym(']')) {
                let k = id(p)?;
                sym(p, '=')?;
                out.push((k, id(p)?));
                if toks.get(*p) == Some(&Tok::Sym(',')) {
                    *p += 1;
                }
            }
            *p += 1;
            Ok(out)
        };

        if id(&mut p)? != "digraph" {
            return Err("expected digraph".into());
        }
        if matches!(toks.get(p), Some(Tok::Id(_))) {
            p += 1;
        }
        sym(&mut p, '{')?;
        let mut summary = Summary { nodes: Vec::new(), edges: Vec::new() };
        while toks.get(p) != Some(&Tok::Sym('}')) {
            let first = id(&mut p)?;
            if toks.get(p) == Some(&Tok::Sym('=')) {
                p += 1;
                id(&mut p)?;
            } else if toks.get(p) == Some(&Tok::Arrow) {
                p += 1;
                let to = id(&mut p)?;
                summary.edges.push((first, to, attrs(&mut p)?));
            } else {
                summary.nodes.push((first, attrs(&mut p)?));
            }
            if toks.get(p) == Some(&Tok::Sym(';')) {
                p += 1;
            }
        }
        if p + 1 != toks.len() {
            return Err("trailing tokens".into());
        }
        Ok(summary)
    }
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[test]
fn dot_output_parses() {
    let spec = tables::paper_spec(120, 2, 8).unwrap();
    let (data, _) = generate(&spec).unwrap();
    let fit = estimate(&data, &Membership::contiguous(&spec.partition)).unwrap();
    let report = wald_report(&fit, 120, 0.05);
    let labels = vec!["first \"quoted\"".to_string(), "back\\slash".to_string(), "C".to_string()];
    let g = dot_grammar::parse(&export_dot(&fit, &report, &labels)).unwrap();
    let boxes = g.nodes.iter().filter(|(_, a)| attr(a, "shape") == Some("box")).count();
    let ellipses = g.nodes.iter().filter(|(_, a)| attr(a, "shape") == Some("ellipse")).count();
    assert_eq!((boxes, ellipses), (3, 3));
    // the checker keeps the character after a backslash, so "\\n" reads as "n"
    assert_eq!(attr(&g.nodes[0].1, "label"), Some("first \"quoted\"n6 variables"));
    assert_eq!(attr(&g.nodes[1].1, "label"), Some("back\\slashn6 variables"));
    let factor_edges: Vec<_> = g.edges.iter().filter(|(_, _, a)| attr(a, "dir") == Some("both")).collect();
    assert_eq!(factor_edges.len(), 6);
    assert_eq!(factor_edges.iter().filter(|(f, t, _)| f == t).count(), 3);
    assert_eq!(g.edges.len() - factor_edges.len(), 3);
}

#[test]
fn all_positive_significant_gives_red_edges() {
    let k = 4;
    let b = DMatrix::from_fn(k, k, |i, j| if i == j { 2.0 } else { 1.0 });
    let fit = ScfaFit::from_parameters(vec![0.2; k], b, PartitionVector::new(vec![25; k]).unwrap(), 1000).unwrap();
    let report = wald_report(&fit, 1000, 0.05);
    let g = dot_grammar::parse(&export_dot(&fit, &report, &[])).unwrap();
    let red_off_diagonal = g
        .edges
        .iter()
        .filter(|(f, t, a)| f != t && attr(a, "color") == Some("red") && attr(a, "style") == Some("solid"))
        .count();
    assert_eq!(red_off_diagonal, k * (k - 1) / 2);
}
