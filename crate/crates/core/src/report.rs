//! Architecture tables and an accuracy chart from benchmark records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::write;
use crate::driver::RunRecord;
use crate::error::{Error, Result};
use crate::pbmh::Algorithm;
use crate::solvers::id_table;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureRow {
    pub missing_rate: f64,
    pub algorithm: Algorithm,
    pub repeat: usize,
    /// Hidden sizes as `[302,11]`.
    pub structure: String,
    pub learning_rate: f64,
    pub solver: String,
    pub accuracy: f64,
}

pub fn format_structure(sizes: &[usize]) -> String {
    let parts: Vec<String> = sizes.iter().map(usize::to_string).collect();
    format!("[{}]", parts.join(","))
}

/// Best run (highest accuracy, then lowest repeat) per algorithm and rate.
pub fn architecture_rows(records: &[RunRecord]) -> Vec<ArchitectureRow> {
    let mut best: BTreeMap<(u64, Algorithm), ArchitectureRow> = BTreeMap::new();
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.missing_rate.total_cmp(&b.missing_rate).then(a.repeat.cmp(&b.repeat)));
    for r in sorted {
        let Some(o) = r.completed() else { continue };
        let row = ArchitectureRow {
            missing_rate: r.missing_rate,
            algorithm: r.algorithm,
            repeat: r.repeat,
            structure: format_structure(&o.architecture.hidden_layer_sizes),
            learning_rate: o.architecture.learning_rate,
            solver: o.architecture.solver_name.clone(),
            accuracy: o.accuracy,
        };
        let key = (r.missing_rate.to_bits(), r.algorithm);
        if best.get(&key).is_none_or(|b| row.accuracy > b.accuracy) {
            best.insert(key, row);
        }
    }
    let mut rows: Vec<ArchitectureRow> = best.into_values().collect();
    rows.sort_by(|a, b| a.missing_rate.total_cmp(&b.missing_rate).then(a.algorithm.cmp(&b.algorithm)));
    rows
}

fn rows_csv(rows: &[&ArchitectureRow], with_rate: bool) -> String {
    let mut csv = String::new();
    if with_rate {
        csv.push_str("missing_rate,");
    }
    csv.push_str("algorithm,structure,learning_rate,solver,accuracy,repeat\n");
    for r in rows {
        if with_rate {
            let _ = write!(csv, "{},", r.missing_rate);
        }
        let _ = writeln!(
            csv,
            "{},\"{}\",{},{},{:.2},{}",
            r.algorithm, r.structure, r.learning_rate, r.solver, r.accuracy, r.repeat
        );
    }
    csv
}

/// Mean accuracy per algorithm over all completed runs, in algorithm order.
pub fn mean_accuracy(records: &[RunRecord]) -> Vec<(Algorithm, f64)> {
    let mut acc: BTreeMap<Algorithm, (f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(o) = r.completed() {
            let e = acc.entry(r.algorithm).or_default();
            e.0 += o.accuracy;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect()
}

pub fn accuracy_svg(means: &[(Algorithm, f64)]) -> String {
    const BAR: f64 = 40.0;
    const GAP: f64 = 16.0;
    const LEFT: f64 = 48.0;
    const TOP: f64 = 24.0;
    const PLOT_H: f64 = 200.0;
    let width = LEFT + GAP + means.len() as f64 * (BAR + GAP);
    let height = TOP + PLOT_H + 56.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ =
        writeln!(svg, r#"  <text x="{LEFT}" y="16" font-family="sans-serif" font-size="12">Mean accuracy (%)</text>"#);
    let base = TOP + PLOT_H;
    let _ = writeln!(svg, r#"  <line x1="{LEFT}" y1="{base}" x2="{width}" y2="{base}" stroke="black"/>"#);
    for tick in [0, 25, 50, 75, 100] {
        let y = base - PLOT_H * tick as f64 / 100.0;
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{tick}</text>"#,
            LEFT - 4.0,
            y + 3.0
        );
    }
    for (i, (alg, acc)) in means.iter().enumerate() {
        let x = LEFT + GAP + i as f64 * (BAR + GAP);
        let h = PLOT_H * acc.clamp(0.0, 100.0) / 100.0;
        let _ = writeln!(
            svg,
            r##"  <rect class="bar" data-algorithm="{alg}" x="{x}" y="{}" width="{BAR}" height="{h}" fill="#4a7bb7"><title>{alg}: {acc:.2}</title></rect>"##,
            base - h
        );
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{alg}</text>"#,
            x + BAR / 2.0,
            base + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `architectures.csv`, one `architectures_rate_<r>.csv` per missing
/// rate, `solvers.csv` and `accuracy.svg` into `dir`.
pub fn write_report(records: &[RunRecord], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = architecture_rows(records);
    write(dir, "architectures.csv", &rows_csv(&rows.iter().collect::<Vec<_>>(), true))?;
    let mut by_rate: BTreeMap<u64, Vec<&ArchitectureRow>> = BTreeMap::new();
    for r in &rows {
        by_rate.entry(r.missing_rate.to_bits()).or_default().push(r);
    }
    for (rate, rs) in by_rate {
        write(dir, &format!("architectures_rate_{}.csv", f64::from_bits(rate)), &rows_csv(&rs, false))?;
    }
    let mut csv = String::from("solver_id,solver\n");
    for (id, name) in id_table() {
        let _ = writeln!(csv, "{id},{name}");
    }
    write(dir, "solvers.csv", &csv)?;
    write(dir, "accuracy.svg", &accuracy_svg(&mean_accuracy(records)))
}
