//! File formats: comparison CSV, sample-stream CSV, JSON reports and
//! gnuplot-ready data files. All file writes go through a temp-and-rename so
//! error paths leave no partial outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chord_churn_core::analytics::TheoryPoint;
use chord_churn_core::sim::MetricsSample;
use serde::Serialize;

use crate::experiment::{ComparisonRow, Summary, SweepOutcome};

/// Writes atomically: a temp file in the target directory, then a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub const COMPARISON_CSV_HEADER: &str =
    "r,alpha,n0,bits,metric,k,theory,sim_mean,sim_stderr,rel_error";

fn fmt_opt(k: Option<u32>) -> String {
    k.map(|v| v.to_string()).unwrap_or_default()
}

/// Comparison rows as CSV (fixed schema, header mandatory).
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.r,
            r.alpha,
            r.n0,
            r.bits,
            r.metric,
            fmt_opt(r.k),
            r.theory,
            r.sim_mean,
            r.sim_stderr,
            r.rel_error
        ));
    }
    out
}

/// Header of the sample-stream CSV for a ring with `m` fingers.
pub fn sample_csv_header(m: usize) -> String {
    let mut h = String::from(
        "time,n_now,w1,d1,probe_inconsistency,probe_cost_mean,probes_failed,probes",
    );
    for k in 1..=m {
        h.push_str(&format!(",f_{k}"));
    }
    h
}

pub fn sample_csv_row(s: &MetricsSample) -> String {
    let mut row = format!(
        "{},{},{},{},{},{},{},{}",
        s.time,
        s.n_now,
        s.wrong_s1,
        s.dead_s1,
        s.probe_inconsistency,
        s.probe_cost_mean,
        s.probes_failed,
        s.probes
    );
    for f in &s.dead_finger {
        row.push_str(&format!(",{f}"));
    }
    row
}

/// A theory point rendered as comparison-schema CSV rows with the simulation
/// columns left empty.
pub fn theory_csv(tp: &TheoryPoint) -> String {
    let p = &tp.params;
    let mut out = String::from(COMPARISON_CSV_HEADER);
    out.push('\n');
    let mut push = |metric: &str, k: String, theory: f64| {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},,,\n",
            p.stab_ratio, p.alpha, p.node_count, p.key_bits, metric, k, theory
        ));
    };
    push("w1", String::new(), tp.wrong_s1);
    push("d1", String::new(), tp.dead_s1);
    push("I", String::new(), tp.inconsistency);
    for (i, f) in tp.dead_finger.iter().enumerate() {
        push("f_k", (i + 1).to_string(), *f);
    }
    push("L", String::new(), tp.mean_cost);
    out
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub spec: &'a crate::experiment::SweepSpec,
    pub rows: &'a [ComparisonRow],
    pub summary: &'a Summary,
}

pub fn report_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Gnuplot-ready two-column files: for each of w1/d1/I/L and each alpha, the
/// metric against `r` (theory and simulation separately); for the dead-finger
/// fractions, the profile against `k` per `(alpha, r)` point.
pub fn write_plot_data(dir: &Path, outcome: &SweepOutcome) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let spec = &outcome.spec;
    for metric in ["w1", "d1", "I", "L"] {
        for &alpha in &spec.alphas {
            let mut theory_lines = String::new();
            let mut sim_lines = String::new();
            for &r in &spec.stab_ratios {
                if let Some(row) = outcome.row(metric, r, alpha, None) {
                    theory_lines.push_str(&format!("{} {}\n", fmt_num(r), row.theory));
                    sim_lines.push_str(&format!("{} {}\n", fmt_num(r), row.sim_mean));
                }
            }
            if theory_lines.is_empty() {
                continue;
            }
            for (suffix, body) in [("theory", &theory_lines), ("sim", &sim_lines)] {
                let path = dir.join(format!("{metric}_alpha{alpha}_{suffix}.dat"));
                write_atomic(&path, body.as_bytes())?;
                written.push(path);
            }
        }
    }
    for &alpha in &spec.alphas {
        for &r in &spec.stab_ratios {
            let mut theory_lines = String::new();
            let mut sim_lines = String::new();
            for k in 1..=spec.bits {
                if let Some(row) = outcome.row("f_k", r, alpha, Some(k)) {
                    theory_lines.push_str(&format!("{k} {}\n", row.theory));
                    sim_lines.push_str(&format!("{k} {}\n", row.sim_mean));
                }
            }
            if theory_lines.is_empty() {
                continue;
            }
            for (suffix, body) in [("theory", &theory_lines), ("sim", &sim_lines)] {
                let path =
                    dir.join(format!("fk_alpha{alpha}_r{}_{suffix}.dat", fmt_num(r)));
                write_atomic(&path, body.as_bytes())?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
