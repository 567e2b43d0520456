//! Friedman ranks and pairwise Wilcoxon verdicts on a small accuracy table.

use neuroenergy::stats::{friedman, stability, wilcoxon_matrix, wilcoxon_signed_rank};

fn main() -> neuroenergy::Result<()> {
    let names = ["GA", "DE", "PSO", "SHADE"];
    // Rows are blocks (missing rates), columns are algorithms.
    let table = vec![
        vec![91.2, 92.0, 90.1, 93.4],
        vec![88.7, 89.9, 87.2, 90.8],
        vec![80.1, 82.5, 79.0, 83.9],
        vec![70.3, 73.8, 69.9, 74.2],
    ];
    let f = friedman(&table)?;
    println!("Friedman chi2 {:.3} (df {}), p {:.4}, rejects at 0.05: {}", f.chi2, f.df, f.p_value, f.rejects(0.05));
    for (n, r) in names.iter().zip(&f.average_ranks) {
        println!("  {n:<6} average rank {r:.2}");
    }

    let a = [71.0, 73.5, 72.2, 74.8, 70.9, 73.3, 72.7, 75.1];
    let b = [70.2, 72.0, 72.4, 73.1, 69.5, 71.8, 71.9, 73.0];
    let w = wilcoxon_signed_rank(&a, &b, 0.05)?;
    println!(
        "Wilcoxon W+ {} W- {} p {:.4} ({}) verdict {:?}",
        w.w_plus,
        w.w_minus,
        w.p_value,
        if w.exact { "exact" } else { "normal" },
        w.verdict
    );

    let columns: Vec<Vec<f64>> = (0..names.len()).map(|j| table.iter().map(|row| row[j]).collect()).collect();
    // Four blocks are too few for a Wilcoxon verdict, so every pair reads "=".
    let matrix = wilcoxon_matrix(&columns, 0.05)?;
    for (n, row) in names.iter().zip(&matrix) {
        let cells: Vec<&str> = row.iter().map(|v| v.symbol()).collect();
        println!("  {n:<6} {}", cells.join(" "));
    }
    for (n, col) in names.iter().zip(&columns) {
        println!("  {n:<6} stability {:.3}", stability(col)?);
    }
    Ok(())
}
