//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, write_stats};
use crate::data::{ingest, inject_missing, synthesize, EnergyClass, LabeledDataset, Schema};
use crate::driver::{
    layer_growth_search, mask_seed, read_records, run_benchmark, run_seed, BenchmarkOptions, JsonlWriter, Manifest,
    RunOutcome, RunRecord, SearchConfig,
};
use crate::error::{Error, Result};
use crate::objective::Evaluator;
use crate::pbmh::Algorithm;
use crate::report::write_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Where the labeled dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A prepared CSV: feature columns followed by `label`.
    Dataset {
        path: PathBuf,
    },
    /// A raw battery-state trace, labeled on load.
    Raw {
        path: PathBuf,
        schema: Option<PathBuf>,
    },
    Synthetic {
        rows: usize,
        features: usize,
        classes: usize,
        separation: f64,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DataSource::Dataset { path } => LabeledDataset::read_csv(open(path)?),
            DataSource::Raw { path, schema } => {
                let schema = load_schema(schema.as_deref())?;
                Ok(ingest(open(path)?, &schema)?.dataset)
            }
            DataSource::Synthetic { rows, features, classes, separation, seed } => {
                synthesize(*rows, *features, *classes, *separation, *seed)
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DataSource::Dataset { path } => fix(path),
            DataSource::Raw { path, schema } => {
                fix(path);
                if let Some(s) = schema {
                    fix(s);
                }
            }
            DataSource::Synthetic { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub data: DataSource,
    #[serde(default)]
    pub search: SearchConfig,
}

impl CliConfig {
    /// Reads a config; relative data paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> Result<(Self, Self)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let original: CliConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        original.search.validate()?;
        let mut resolved = original.clone();
        resolved.data.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok((original, resolved))
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn load_schema(path: Option<&Path>) -> Result<Schema> {
    match path {
        None => Ok(Schema::greenhub()),
        Some(p) => serde_json::from_reader(open(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Parser)]
#[command(name = "neuroenergy", version, about = "Neuroevolution of masked MLPs for smartphone energy classes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label a raw battery trace and write a model-ready dataset.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        /// Schema JSON; the built-in GreenHub layout when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Hide a fraction of a dataset's entries behind a mask.
    InjectMissing {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// One layer-growth search for a single algorithm.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        algorithm: String,
        /// Missing rate; the first configured rate when omitted.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every algorithm × missing rate × repeat.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Omit timings so reruns are byte-identical.
        #[arg(long)]
        deterministic: bool,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
    },
    /// Friedman ranks, Wilcoxon verdicts, win/tie/loss and stability.
    Stats {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Architecture tables and an accuracy chart.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Prepare { input, schema, output } => prepare(&input, schema.as_deref(), &output),
        Command::InjectMissing { input, rate, seed, output } => {
            let ds = LabeledDataset::read_csv(open(&input)?)?;
            let masked = inject_missing(&ds, rate, seed)?;
            create_dir(&output)?;
            masked.write_data_csv(create(&output.join("data.csv"))?)?;
            masked.write_mask_csv(create(&output.join("mask.csv"))?)?;
            println!(
                "masked {} of {} entries ({} rows x {} features)",
                masked.missing_entries(),
                masked.n_rows() * masked.n_features(),
                masked.n_rows(),
                masked.n_features()
            );
            Ok(EXIT_OK)
        }
        Command::Search { config, algorithm, rate, repeat, seed, out } => {
            search(&config, &algorithm, rate, repeat, seed, &out)
        }
        Command::Benchmark { config, out, deterministic, jobs, seed, repeats, algorithms } => {
            benchmark(&config, &out, BenchmarkOptions { deterministic, jobs }, seed, repeats, algorithms)
        }
        Command::Stats { results, alpha, out } => {
            let records = read_records(&results)?;
            let report = analyze(&records, alpha)?;
            write_stats(&report, &out)?;
            let f = &report.friedman;
            println!(
                "Friedman chi2 = {:.4} (df {}, p = {:.4e}, critical {:.2} at alpha {}): {}",
                f.chi2,
                f.df,
                f.p_value,
                f.critical_value,
                f.alpha,
                if f.reject_null { "differences are significant" } else { "no significant difference" }
            );
            for (name, rank) in &f.average_ranks {
                println!("  {name:<8} average rank {rank:.3}");
            }
            Ok(EXIT_OK)
        }
        Command::Report { results, out } => {
            let records = read_records(&results)?;
            write_report(&records, &out)?;
            println!("wrote report for {} records to {}", records.len(), out.display());
            Ok(EXIT_OK)
        }
    }
}

fn prepare(input: &Path, schema: Option<&Path>, output: &Path) -> Result<i32> {
    let schema = load_schema(schema)?;
    let out = ingest(open(input)?, &schema)?;
    create_dir(output)?;
    out.dataset.write_csv(create(&output.join("dataset.csv"))?)?;
    let counts = out.dataset.class_counts();
    let histogram = serde_json::json!({
        "classes": {
            EnergyClass::Safe.name(): counts[0],
            EnergyClass::Warning.name(): counts[1],
            EnergyClass::Critical.name(): counts[2],
        },
        "ingest": out.report,
    });
    let path = output.join("histogram.json");
    std::fs::write(&path, serde_json::to_string_pretty(&histogram)? + "\n").map_err(|e| Error::io(&path, e))?;
    if out.dataset.is_empty() {
        eprintln!("warning: no labeled discharging pairs in {}; wrote an empty dataset", input.display());
    }
    println!("safe {}, warning {}, critical {}", counts[0], counts[1], counts[2]);
    Ok(EXIT_OK)
}

fn search(
    config: &Path,
    algorithm: &str,
    rate: Option<f64>,
    repeat: usize,
    seed: Option<u64>,
    out: &Path,
) -> Result<i32> {
    let (_, mut cfg) = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.search.master_seed = s;
    }
    let algorithm: Algorithm = algorithm.parse()?;
    let rate = rate.unwrap_or(cfg.search.missing_rates[0]);
    let ds = cfg.data.load()?;
    let master = cfg.search.master_seed;
    let masked = inject_missing(&ds, rate, mask_seed(master, rate))?;
    let evaluator = Evaluator::new(&masked, &cfg.search.space(), &cfg.search.shared_eval())?;
    let seed = run_seed(master, algorithm, rate, repeat);
    let start = Instant::now();
    let outcome = layer_growth_search(algorithm, &evaluator, &cfg.search, seed)?;
    let record = RunRecord {
        algorithm,
        missing_rate: rate,
        repeat,
        seed,
        mask_seed: mask_seed(master, rate),
        outcome: RunOutcome::Completed(Box::new(outcome)),
        wall_time_s: Some(start.elapsed().as_secs_f64()),
    };
    create_dir(out)?;
    let path = out.join("record.json");
    std::fs::write(&path, serde_json::to_string_pretty(&record)? + "\n").map_err(|e| Error::io(&path, e))?;
    if let Some(o) = record.completed() {
        println!(
            "{algorithm}: accuracy {:.2}%, F-measure {:.2}%, hidden {:?}, solver {}, lr {}",
            o.accuracy,
            o.f_measure,
            o.architecture.hidden_layer_sizes,
            o.architecture.solver_name,
            o.architecture.learning_rate
        );
    }
    Ok(EXIT_OK)
}

fn benchmark(
    config: &Path,
    out: &Path,
    opts: BenchmarkOptions,
    seed: Option<u64>,
    repeats: Option<usize>,
    algorithms: Option<Vec<String>>,
) -> Result<i32> {
    let (original, mut cfg) = CliConfig::load(config)?;
    if let Some(s) = seed {
        cfg.search.master_seed = s;
    }
    if let Some(r) = repeats {
        cfg.search.repeats = r;
    }
    if let Some(names) = algorithms {
        cfg.search.algorithms = names.iter().map(|n| n.parse()).collect::<Result<_>>()?;
    }
    cfg.search.validate()?;
    let ds = cfg.data.load()?;
    create_dir(out)?;
    let mut writer = JsonlWriter::create(&out.join("results.jsonl"))?;
    let start = Instant::now();
    let total = cfg.search.missing_rates.len() * cfg.search.algorithms.len() * cfg.search.repeats;
    let mut done = 0;
    let records = run_benchmark(&ds, &cfg.search, opts, |r| {
        done += 1;
        match &r.outcome {
            RunOutcome::Completed(o) => eprintln!(
                "[{done}/{total}] {} rate {} repeat {}: accuracy {:.2}%",
                r.algorithm, r.missing_rate, r.repeat, o.accuracy
            ),
            RunOutcome::Failed { error } => {
                eprintln!(
                    "[{done}/{total}] {} rate {} repeat {} failed: {error}",
                    r.algorithm, r.missing_rate, r.repeat
                )
            }
        }
        writer.write(r)
    })?;
    let wall = (!opts.deterministic).then(|| start.elapsed().as_secs_f64());
    let mut manifest = Manifest::new(&cfg.search, &records, wall);
    manifest.data = serde_json::to_value(&original.data)?;
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    if manifest.failures.is_empty() {
        println!("{} records written to {}", records.len(), out.display());
    } else {
        eprintln!("{} of {} cells failed; see manifest.json", manifest.failures.len(), records.len());
    }
    Ok(benchmark_exit_code(&records))
}

fn benchmark_exit_code(records: &[RunRecord]) -> i32 {
    if records.iter().all(|r| r.completed().is_some()) {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}
