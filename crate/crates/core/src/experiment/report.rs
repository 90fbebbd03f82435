//! Results CSV and markdown summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::Split;

use super::runner::ResultRow;

pub const CSV_HEADER: &str = "class,rep,method,dim,k,split,ap,a_sum,a_frob,b";

pub fn format_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.class,
            r.rep,
            r.method,
            r.dim,
            r.k,
            r.split.label(),
            r.ap,
            r.a_sum,
            r.a_frob,
            r.b
        )
        .expect("writing to a string");
    }
    out
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing results header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let err = |m: &str| Error::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(err(&format!("expected 10 fields, found {}", f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| err(&format!("bad number '{s}'")))
            };
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| err(&format!("bad integer '{s}'")))
            };
            Ok(ResultRow {
                class: f[0].parse().map_err(|_| err("bad class id"))?,
                rep: int(f[1])?,
                method: f[2].to_string(),
                dim: int(f[3])?,
                k: int(f[4])?,
                split: match f[5] {
                    "train" => Split::Train,
                    "test" => Split::Test,
                    other => return Err(err(&format!("unknown split '{other}'"))),
                },
                ap: num(f[6])?,
                a_sum: num(f[7])?,
                a_frob: num(f[8])?,
                b: num(f[9])?,
            })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn stdev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Methods in first-appearance order.
fn method_order(rows: &[ResultRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

/// Test AP per method and class (averaged over repetitions) with the
/// unweighted mean over all classes and repetitions, followed by mean
/// constraint and spread diagnostics.
pub fn format_summary(rows: &[ResultRow]) -> String {
    let methods = method_order(rows);
    let classes: Vec<i64> = {
        let mut c: Vec<i64> = rows.iter().map(|r| r.class).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut out = String::from("## Test average precision\n\n| method |");
    for c in &classes {
        write!(out, " class {c} |").unwrap();
    }
    out.push_str(" mean | std | mean dim |\n|---|");
    out.push_str(&"---:|".repeat(classes.len() + 3));
    out.push('\n');
    for m in &methods {
        let test: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| &r.method == m && r.split == Split::Test)
            .collect();
        write!(out, "| {m} |").unwrap();
        for c in &classes {
            let v: Vec<f64> = test
                .iter()
                .filter(|r| r.class == *c)
                .map(|r| r.ap)
                .collect();
            if v.is_empty() {
                out.push_str(" - |");
            } else {
                write!(out, " {:.4} |", mean(&v)).unwrap();
            }
        }
        let all: Vec<f64> = test.iter().map(|r| r.ap).collect();
        let dims: Vec<f64> = test.iter().map(|r| r.dim as f64).collect();
        writeln!(
            out,
            " {:.4} | {:.4} | {:.1} |",
            mean(&all),
            stdev(&all),
            mean(&dims)
        )
        .unwrap();
    }

    out.push_str("\n## Constraint and spread\n\n");
    out.push_str("| method | A train | A test | A_F train | A_F test | B train | B test |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
    for m in &methods {
        let mut cols: BTreeMap<(u8, Split), Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| &r.method == m) {
            cols.entry((0, r.split)).or_default().push(r.a_sum);
            cols.entry((1, r.split)).or_default().push(r.a_frob);
            cols.entry((2, r.split)).or_default().push(r.b);
        }
        write!(out, "| {m} |").unwrap();
        for (_, v) in cols {
            write!(out, " {:.3e} |", mean(&v)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `results.csv` and `summary.md` into `dir`.
pub fn emit_report(rows: &[ResultRow], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if rows.is_empty() {
        return Err(Error::Input("no results to report".into()));
    }
    fs::create_dir_all(dir)
        .map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let csv = dir.join("results.csv");
    let md = dir.join("summary.md");
    fs::write(&csv, format_results_csv(rows))
        .map_err(|e| Error::from(e).context(format!("writing {}", csv.display())))?;
    fs::write(&md, format_summary(rows))
        .map_err(|e| Error::from(e).context(format!("writing {}", md.display())))?;
    Ok((csv, md))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<ResultRow> {
        let mut out = Vec::new();
        for (i, m) in ["csda", "ncsda:EA+s4+qr"].iter().enumerate() {
            for split in [Split::Train, Split::Test] {
                out.push(ResultRow {
                    class: i as i64,
                    rep: 1,
                    method: m.to_string(),
                    dim: 3,
                    k: 0,
                    split,
                    ap: 0.1 + 0.2 * i as f64,
                    a_sum: -1.5e-27,
                    a_frob: 1.0 / 3.0,
                    b: 60.68,
                });
            }
        }
        out
    }

    #[test]
    fn csv_has_ten_columns_and_round_trips() {
        let r = rows();
        let text = format_results_csv(&r);
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 10);
        }
        assert_eq!(parse_results_csv(&text).unwrap(), r);
    }

    #[test]
    fn empty_results_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], dir.path()), Err(Error::Input(_))));
        let (csv, md) = emit_report(&rows(), dir.path()).unwrap();
        assert!(csv.exists());
        assert!(fs::read_to_string(md).unwrap().contains("| csda |"));
    }
}
