//! Aggregates benchmark records into the comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::RunRecord;
use crate::error::{Error, Result};
use crate::pbmh::Algorithm;
use crate::stats::{
    friedman, mean, population_std, stability, wilcoxon_matrix, win_tie_loss, FriedmanResult, Verdict, WinTieLoss,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub missing_rate: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f_measure_mean: f64,
    pub f_measure_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub alpha: f64,
    pub algorithms: Vec<Algorithm>,
    pub blocks: Vec<f64>,
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub critical_value: f64,
    pub reject_null: bool,
    pub average_ranks: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub algorithms: Vec<Algorithm>,
    pub rates: Vec<f64>,
    pub summary: Vec<CellSummary>,
    pub friedman: FriedmanReport,
    /// Number of paired runs behind each Wilcoxon comparison.
    pub paired_runs: usize,
    pub wilcoxon: Vec<Vec<Verdict>>,
    pub win_tie_loss: Vec<WinTieLoss>,
    /// Spread of mean accuracy across missing rates; empty with one rate.
    pub stability: Vec<(Algorithm, f64)>,
}

impl StatsReport {
    pub fn cell(&self, algorithm: Algorithm, rate: f64) -> Option<&CellSummary> {
        self.summary.iter().find(|c| c.algorithm == algorithm && c.missing_rate == rate)
    }
}

fn rate_key(rate: f64) -> u64 {
    rate.to_bits()
}

/// Compares the algorithms in `records`. Failed runs are ignored.
pub fn analyze(records: &[RunRecord], alpha: f64) -> Result<StatsReport> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    // (algorithm, rate) -> repeat -> (accuracy, f-measure)
    let mut cells: BTreeMap<(Algorithm, u64), BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in records {
        if let Some(o) = r.completed() {
            cells
                .entry((r.algorithm, rate_key(r.missing_rate)))
                .or_default()
                .insert(r.repeat, (o.accuracy, o.f_measure));
        }
    }
    let algorithms: Vec<Algorithm> = cells.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    if algorithms.len() < 2 {
        return Err(Error::invalid(format!(
            "need completed runs of at least two algorithms, found {}",
            algorithms.len()
        )));
    }
    let mut rates: Vec<f64> = cells.keys().map(|k| f64::from_bits(k.1)).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();

    let mut summary = Vec::new();
    for &rate in &rates {
        for &alg in &algorithms {
            if let Some(runs) = cells.get(&(alg, rate_key(rate))) {
                let acc: Vec<f64> = runs.values().map(|v| v.0).collect();
                let fm: Vec<f64> = runs.values().map(|v| v.1).collect();
                summary.push(CellSummary {
                    algorithm: alg,
                    missing_rate: rate,
                    runs: acc.len(),
                    accuracy_mean: mean(&acc),
                    accuracy_std: population_std(&acc),
                    f_measure_mean: mean(&fm),
                    f_measure_std: population_std(&fm),
                });
            }
        }
    }

    // Friedman: one block per rate that every algorithm covers.
    let blocks: Vec<f64> =
        rates.iter().copied().filter(|&r| algorithms.iter().all(|&a| cells.contains_key(&(a, rate_key(r))))).collect();
    if blocks.is_empty() {
        return Err(Error::invalid("no missing rate has runs from every algorithm"));
    }
    let mean_acc = |a: Algorithm, r: f64| {
        let runs = &cells[&(a, rate_key(r))];
        mean(&runs.values().map(|v| v.0).collect::<Vec<_>>())
    };
    let matrix: Vec<Vec<f64>> = blocks.iter().map(|&r| algorithms.iter().map(|&a| mean_acc(a, r)).collect()).collect();
    let fr: FriedmanResult = friedman(&matrix)?;
    let critical_value = fr.critical_value(alpha);
    let friedman_report = FriedmanReport {
        alpha,
        algorithms: algorithms.clone(),
        blocks: blocks.clone(),
        chi2: fr.chi2,
        df: fr.df,
        p_value: fr.p_value,
        critical_value,
        reject_null: fr.chi2 > critical_value,
        average_ranks: algorithms.iter().zip(&fr.average_ranks).map(|(a, &r)| (a.name().to_string(), r)).collect(),
    };

    // Wilcoxon: runs paired by (rate, repeat) present for every algorithm.
    let mut keys: Option<BTreeSet<(u64, usize)>> = None;
    for &a in &algorithms {
        let mine: BTreeSet<(u64, usize)> = cells
            .iter()
            .filter(|(k, _)| k.0 == a)
            .flat_map(|(k, runs)| runs.keys().map(move |&rep| (k.1, rep)))
            .collect();
        keys = Some(match keys {
            None => mine,
            Some(k) => k.intersection(&mine).copied().collect(),
        });
    }
    let keys: Vec<(u64, usize)> = keys.unwrap_or_default().into_iter().collect();
    let samples: Vec<Vec<f64>> =
        algorithms.iter().map(|&a| keys.iter().map(|&(r, rep)| cells[&(a, r)][&rep].0).collect()).collect();
    let wilcoxon = wilcoxon_matrix(&samples, alpha)?;
    let wtl = win_tie_loss(&wilcoxon)?;

    let mut stab = Vec::new();
    if blocks.len() >= 2 {
        for &a in &algorithms {
            let per_rate: Vec<f64> = blocks.iter().map(|&r| mean_acc(a, r)).collect();
            stab.push((a, stability(&per_rate)?));
        }
    }

    Ok(StatsReport {
        alpha,
        algorithms,
        rates,
        summary,
        friedman: friedman_report,
        paired_runs: keys.len(),
        wilcoxon,
        win_tie_loss: wtl,
        stability: stab,
    })
}

/// Writes `friedman.json`, `wilcoxon_matrix.csv`, `win_tie_loss.csv`,
/// `stability.csv` and `summary.csv` into `dir`.
pub fn write_stats(report: &StatsReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(&report.friedman)?;
    write(dir, "friedman.json", &(json + "\n"))?;

    let names: Vec<&str> = report.algorithms.iter().map(|a| a.name()).collect();
    let mut csv = format!("algorithm,{}\n", names.join(","));
    for (i, row) in report.wilcoxon.iter().enumerate() {
        let cells: Vec<&str> = row.iter().enumerate().map(|(j, v)| if i == j { "" } else { v.symbol() }).collect();
        let _ = writeln!(csv, "{},{}", names[i], cells.join(","));
    }
    write(dir, "wilcoxon_matrix.csv", &csv)?;

    let mut csv = String::from("algorithm,wins,ties,losses\n");
    for (name, c) in names.iter().zip(&report.win_tie_loss) {
        let _ = writeln!(csv, "{name},{},{},{}", c.wins, c.ties, c.losses);
    }
    write(dir, "win_tie_loss.csv", &csv)?;

    let mut csv = String::from("algorithm,stability\n");
    for (a, s) in &report.stability {
        let _ = writeln!(csv, "{a},{s}");
    }
    write(dir, "stability.csv", &csv)?;

    let mut csv = String::from("missing_rate,algorithm,runs,Accuracy-Mean,Accuracy-Std,F-measure-Mean,F-measure-Std\n");
    for c in &report.summary {
        let _ = writeln!(
            csv,
            "{},{},{},{:.2},{:.2},{:.2},{:.2}",
            c.missing_rate, c.algorithm, c.runs, c.accuracy_mean, c.accuracy_std, c.f_measure_mean, c.f_measure_std
        );
    }
    write(dir, "summary.csv", &csv)
}

pub(crate) fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::driver::{Architecture, RunOutcome, SearchOutcome};
    use crate::genome::{Genome, HyperBounds, HyperparamVector, SearchSpace};
    use crate::solvers::SolverKind;

    pub(crate) fn record(algorithm: Algorithm, rate: f64, repeat: usize, accuracy: f64) -> RunRecord {
        let genome = Genome {
            hyper: HyperparamVector::midrange(&HyperBounds::default(), SolverKind::Rprop),
            neurons: vec![302.0, 11.0],
        };
        RunRecord {
            algorithm,
            missing_rate: rate,
            repeat,
            seed: 0,
            mask_seed: 0,
            outcome: RunOutcome::Completed(Box::new(SearchOutcome {
                architecture: Architecture::from_genome(&genome, &SearchSpace::default()),
                genome,
                fitness: 100.0 - accuracy,
                accuracy,
                f_measure: accuracy - 1.0,
                stage_traces: vec![],
                stage_best: vec![],
                evaluations: 0,
            })),
            wall_time_s: None,
        }
    }

    fn grid() -> Vec<RunRecord> {
        let mut out = Vec::new();
        for (ri, rate) in [0.0, 0.4].into_iter().enumerate() {
            for (ai, alg) in [Algorithm::De, Algorithm::Pso, Algorithm::CmaEs].into_iter().enumerate() {
                for rep in 0..6 {
                    let acc = 90.0 - 20.0 * ri as f64 - 3.0 * ai as f64 + 0.1 * rep as f64;
                    out.push(record(alg, rate, rep, acc));
                }
            }
        }
        out
    }

    #[test]
    fn ranks_and_verdicts_follow_scores() {
        let r = analyze(&grid(), 0.05).unwrap();
        assert_eq!(r.algorithms, vec![Algorithm::De, Algorithm::Pso, Algorithm::CmaEs]);
        assert_eq!(r.friedman.average_ranks["DE"], 1.0);
        assert_eq!(r.friedman.average_ranks["CMA-ES"], 3.0);
        assert_eq!(r.paired_runs, 12);
        assert_eq!(r.wilcoxon[0][1], Verdict::Superior);
        assert_eq!(r.wilcoxon[2][0], Verdict::Inferior);
        assert_eq!(r.win_tie_loss[0], WinTieLoss { wins: 2, ties: 0, losses: 0 });
        for (_, s) in &r.stability {
            assert!((s - 10.0).abs() < 1e-9);
        }
        let c = r.cell(Algorithm::Pso, 0.4).unwrap();
        assert_eq!(c.runs, 6);
        assert!((c.accuracy_mean - (67.0 + 0.25)).abs() < 1e-9);
    }

    #[test]
    fn single_algorithm_rejected() {
        let recs: Vec<RunRecord> = grid().into_iter().filter(|r| r.algorithm == Algorithm::De).collect();
        assert!(analyze(&recs, 0.05).is_err());
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let r = analyze(&grid(), 0.05).unwrap();
        write_stats(&r, dir.path()).unwrap();
        let f: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("friedman.json")).unwrap()).unwrap();
        assert_eq!(f["alpha"], 0.05);
        let m = std::fs::read_to_string(dir.path().join("wilcoxon_matrix.csv")).unwrap();
        assert_eq!(m.lines().next().unwrap(), "algorithm,DE,PSO,CMA-ES");
        assert_eq!(m.lines().nth(1).unwrap(), "DE,,+,+");
        let s = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(s.starts_with("missing_rate,algorithm,runs,Accuracy-Mean,Accuracy-Std,F-measure-Mean,F-measure-Std"));
    }
}
