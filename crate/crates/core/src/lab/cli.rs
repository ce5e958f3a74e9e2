//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use super::config::{Experiment, ExperimentConfig};
use super::results::{
    build_id, unix_now, write_rows, Manifest, BP_HEADER, CURSE_EXTRA, HAAR_HEADER, HAAR_HIST_HEADER,
    MANIFEST_FILE, SWEEP_HEADER,
};
use super::sweeps::{
    bp_scan, curse_sweep, data_seed, dataset_meta, generate_preset, haar_baseline, imbalance_sweep,
    nc_sweep, temp_sweep, train_single,
};
use super::{configured_threads, with_pool};
use crate::data::{filter_classes, pool_features, write_dataset};
use crate::error::{Error, Result};
use crate::trainer::TRACE_HEADER;

#[derive(Debug, Parser)]
#[command(name = "qmclab", version, about = "Quantum multiclass classification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON config; missing keys take the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `circuit.n_qubits=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for `--set output.dir=<DIR>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset and write it as CSV with a JSON sidecar.
    GenData(RunArgs),
    /// Train one model and write its per-epoch trace.
    Train(RunArgs),
    /// Loss variance over random parameters versus observable locality.
    BpScan(RunArgs),
    /// Neural-collapse indicators versus layer count for each model kind.
    NcSweep(RunArgs),
    /// Loss and F1 versus softmax temperature.
    TempSweep(RunArgs),
    /// F1 and indicators versus class imbalance ratio.
    ImbalanceSweep(RunArgs),
    /// Indicators versus qubit count, with untrained and Haar baselines.
    CurseSweep(RunArgs),
    /// Fidelity statistics of Haar-random state pairs.
    HaarBaseline(RunArgs),
    /// Summarize a finished run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 1 for usage or config errors, 2 for
/// runtime failures.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let (experiment, args) = match command {
        Command::Report { run } => return report(&run, &mut std::io::stdout()),
        Command::GenData(a) => (Experiment::GenData, a),
        Command::Train(a) => (Experiment::Train, a),
        Command::BpScan(a) => (Experiment::BpScan, a),
        Command::NcSweep(a) => (Experiment::NcSweep, a),
        Command::TempSweep(a) => (Experiment::TempSweep, a),
        Command::ImbalanceSweep(a) => (Experiment::ImbalanceSweep, a),
        Command::CurseSweep(a) => (Experiment::CurseSweep, a),
        Command::HaarBaseline(a) => (Experiment::HaarBaseline, a),
    };
    let mut overrides = args.set;
    if let Some(out) = args.out {
        overrides.push(format!("output.dir={}", out.display()));
    }
    let cfg = ExperimentConfig::load(experiment, args.config.as_deref(), &overrides)?;
    let threads = configured_threads()?;
    let manifest = with_pool(threads, || run_experiment(&cfg))?;
    println!(
        "{}: {} rows in {:.1}s -> {}",
        cfg.experiment,
        manifest.rows,
        manifest.wall_time_s,
        cfg.output.dir.display()
    );
    Ok(())
}

/// Runs `cfg` and writes `<experiment>.csv` (plus any companion files) and
/// `manifest.json` into `cfg.output.dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let started_at = unix_now();
    let clock = Instant::now();
    let main = dir.join(format!("{}.csv", cfg.experiment));
    let mut outputs = vec![main.clone()];
    let rows = match cfg.experiment {
        Experiment::GenData => {
            let seed = data_seed(cfg);
            let (mut ds, params) = generate_preset(&cfg.dataset, seed)?;
            if let Some(classes) = &cfg.dataset.classes {
                ds = filter_classes(&ds, classes)?;
            }
            if let Some(width) = cfg.dataset.pool {
                ds = pool_features(&ds, width)?;
            }
            write_dataset(&ds, &main, &dataset_meta(&cfg.dataset, seed, &ds, params))?;
            outputs.push(main.with_extension("json"));
            ds.len()
        }
        Experiment::Train => {
            let (row, res) = train_single(cfg)?;
            res.outcome.trace.save(&main)?;
            let summary = dir.join("train-summary.csv");
            write_rows(&summary, &SWEEP_HEADER, &[row])?;
            outputs.push(summary);
            res.outcome.trace.rows.len()
        }
        Experiment::BpScan => {
            let rows = bp_scan(cfg)?;
            write_rows(&main, &BP_HEADER, &rows)?;
            rows.len()
        }
        Experiment::NcSweep => {
            let rows = nc_sweep(cfg)?;
            write_rows(&main, &SWEEP_HEADER, &rows)?;
            rows.len()
        }
        Experiment::TempSweep => {
            let rows = temp_sweep(cfg)?;
            write_rows(&main, &SWEEP_HEADER, &rows)?;
            rows.len()
        }
        Experiment::ImbalanceSweep => {
            let rows = imbalance_sweep(cfg)?;
            write_rows(&main, &SWEEP_HEADER, &rows)?;
            rows.len()
        }
        Experiment::CurseSweep => {
            let rows = curse_sweep(cfg)?;
            let header: Vec<&str> = SWEEP_HEADER.iter().chain(&CURSE_EXTRA).copied().collect();
            write_rows(&main, &header, &rows)?;
            rows.len()
        }
        Experiment::HaarBaseline => {
            let (rows, hist) = haar_baseline(cfg)?;
            write_rows(&main, &HAAR_HEADER, &rows)?;
            let hist_path = dir.join("haar-histogram.csv");
            write_rows(&hist_path, &HAAR_HIST_HEADER, &hist)?;
            outputs.push(hist_path);
            rows.len()
        }
    };
    let manifest = Manifest {
        experiment: cfg.experiment.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        started_at,
        finished_at: unix_now(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        build: build_id(),
        threads: rayon::current_num_threads(),
        outputs,
        rows,
    };
    manifest.write(dir)?;
    Ok(manifest)
}

const COORDINATES: [&str; 5] = ["model_kind", "n_layers", "n_qubits", "ratio", "temperature"];
const METRICS: [&str; 5] = ["train_loss", "train_f1", "test_f1", "intra", "inter"];

/// Prints the manifest and, for seeded sweeps, per-cell means over seeds.
pub fn report(run: &Path, out: &mut dyn Write) -> Result<()> {
    let manifest = Manifest::read(run).map_err(|e| {
        Error::Config(format!("cannot read {}: {e}", run.join(MANIFEST_FILE).display()))
    })?;
    writeln!(out, "experiment  {}", manifest.experiment)?;
    writeln!(out, "seed        {}", manifest.seed)?;
    writeln!(out, "build       {}", manifest.build)?;
    writeln!(out, "threads     {}", manifest.threads)?;
    writeln!(out, "wall time   {:.2}s", manifest.wall_time_s)?;
    writeln!(out, "rows        {}", manifest.rows)?;
    let Some(main) = manifest.outputs.first() else {
        return Ok(());
    };
    let path = run.join(main.file_name().unwrap_or(main.as_os_str()));
    let mut reader = csv::Reader::from_path(&path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    writeln!(out)?;
    let col = |name: &str| header.iter().position(|h| h == name);
    if col("seed").is_none() || col("test_f1").is_none() {
        writeln!(out, "{}", header.join("  "))?;
        for r in &records {
            writeln!(out, "{}", r.iter().collect::<Vec<_>>().join("  "))?;
        }
        return Ok(());
    }
    let coords: Vec<usize> = COORDINATES.iter().filter_map(|c| col(c)).collect();
    let metrics: Vec<(usize, &str)> = METRICS.iter().filter_map(|m| col(m).map(|i| (i, *m))).collect();
    let mut groups: BTreeMap<Vec<String>, Vec<&csv::StringRecord>> = BTreeMap::new();
    for r in &records {
        groups.entry(coords.iter().map(|&i| r[i].to_string()).collect()).or_default().push(r);
    }
    let names: Vec<&str> = coords.iter().map(|&i| header[i].as_str()).collect();
    let metric_names: Vec<String> = metrics.iter().map(|(_, m)| format!("{m:>10}")).collect();
    writeln!(out, "{}  {:>5}  {}", names.join("  "), "seeds", metric_names.join(" "))?;
    for (key, rows) in &groups {
        let means: Vec<String> = metrics
            .iter()
            .map(|&(i, _)| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r[i].parse().ok()).collect();
                format!("{:>10.4}", vals.iter().sum::<f64>() / vals.len().max(1) as f64)
            })
            .collect();
        writeln!(out, "{}  {:>5}  {}", key.join("  "), rows.len(), means.join(" "))?;
    }
    Ok(())
}

/// Headers of every CSV the lab writes, by file name.
pub fn csv_headers() -> Vec<(&'static str, Vec<&'static str>)> {
    let mut curse: Vec<&str> = SWEEP_HEADER.to_vec();
    curse.extend(CURSE_EXTRA);
    vec![
        ("train.csv", TRACE_HEADER.to_vec()),
        ("bp-scan.csv", BP_HEADER.to_vec()),
        ("nc-sweep.csv", SWEEP_HEADER.to_vec()),
        ("temp-sweep.csv", SWEEP_HEADER.to_vec()),
        ("imbalance-sweep.csv", SWEEP_HEADER.to_vec()),
        ("curse-sweep.csv", curse),
        ("haar-baseline.csv", HAAR_HEADER.to_vec()),
        ("haar-histogram.csv", HAAR_HIST_HEADER.to_vec()),
    ]
}
