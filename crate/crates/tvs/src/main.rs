//! `tvs` command line: simulate delay datasets, fit the TVS model next to an
//! OLS baseline, and compare fits against ground truth.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tvs::{
    decompose, fit, model::DEFAULT_SPARSITY_THRESHOLD, ols_fit, simulate, sparsity_check,
    FitConfig, JointLogLik, ModelParams, OlsResult, ShiftVector, SimConfig, TimeSeries,
};

#[derive(Parser)]
#[command(name = "tvs", version, about = "Regression with stochastic time delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known shifts and parameters.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the rng_seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the TVS model and the OLS baseline to a dataset.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare a fit result against the simulator's ground truth.
    Compare {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    params: ModelParams,
    shifts: ShiftVector,
    realized_shift_mean: f64,
}

#[derive(Serialize, Deserialize)]
struct ResultFile {
    tvs: ModelParams,
    shifts: ShiftVector,
    loglik: JointLogLik,
    ols: OlsResult,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: serde_json::Value,
    seed: Option<u64>,
    artifacts: Vec<String>,
    duration_seconds: f64,
    version: &'a str,
}

#[derive(Serialize)]
struct CompareReport {
    beta_error: f64,
    intercept_error: f64,
    sigma_error: f64,
    /// Fitted lambda against the realized mean of the drawn shifts.
    lambda_error: f64,
    /// Fraction of shifts recovered exactly.
    shift_recovery_rate: f64,
    ols_beta_error: f64,
    /// |tvs beta error| / |ols beta error|; absent when OLS is exact.
    tvs_vs_ols_beta_error_ratio: Option<f64>,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("TVS_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: TVS_THREADS must be a positive integer");
                return ExitCode::FAILURE;
            }
        }
    }
    let cli = Cli::parse();
    let run = match &cli.command {
        Command::Simulate { config, out, seed } => run_with_cleanup(out, |dir| {
            cmd_simulate(config, dir, *seed)
        }),
        Command::Fit {
            data,
            config,
            out,
            seed,
        } => run_with_cleanup(out, |dir| cmd_fit(data, config, dir, *seed)),
        Command::Compare { result, truth, out } => {
            run_with_cleanup(out, |dir| cmd_compare(result, truth, dir))
        }
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Tracks files written into the output directory so a failed run leaves
/// nothing behind.
struct OutputDir {
    path: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn open(path: &Path) -> Result<Self, String> {
        let created = !path.exists();
        fs::create_dir_all(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            created,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, String> {
        let p = self.path.join(name);
        fs::write(&p, contents).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
        self.written.push(p.clone());
        Ok(p)
    }

    fn artifacts(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.display().to_string())
            .collect()
    }

    fn cleanup(self) {
        if self.created {
            let _ = fs::remove_dir_all(&self.path);
        } else {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

fn run_with_cleanup(
    out: &Path,
    body: impl FnOnce(&mut OutputDir) -> Result<(), String>,
) -> Result<(), String> {
    let mut dir = OutputDir::open(out)?;
    match body(&mut dir) {
        Ok(()) => Ok(()),
        Err(e) => {
            dir.cleanup();
            Err(e)
        }
    }
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String, String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    s.push('\n');
    Ok(s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_manifest(
    dir: &mut OutputDir,
    command: &str,
    config: serde_json::Value,
    seed: Option<u64>,
    started: Instant,
) -> Result<(), String> {
    let manifest = Manifest {
        command,
        config,
        seed,
        artifacts: dir.artifacts(),
        duration_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    dir.write("manifest.json", &json_pretty(&manifest)?)?;
    Ok(())
}

fn cmd_simulate(config: &Path, dir: &mut OutputDir, seed: Option<u64>) -> Result<(), String> {
    let started = Instant::now();
    let mut cfg: SimConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let out = simulate(&cfg).map_err(|e| e.to_string())?;

    let mut csv = String::from("t,x,y,shifted_effect\n");
    for t in 0..out.x.len() {
        csv.push_str(&format!(
            "{t},{},{},{}\n",
            out.x.values()[t],
            out.y.values()[t],
            out.shifted_effect.values()[t]
        ));
    }
    dir.write("data.csv", &csv)?;

    let truth = TruthFile {
        params: out.true_params,
        realized_shift_mean: out.true_shifts.mean(),
        shifts: out.true_shifts,
    };
    dir.write("truth.json", &json_pretty(&truth)?)?;

    let echo = serde_json::to_value(cfg).map_err(|e| e.to_string())?;
    write_manifest(dir, "simulate", echo, seed, started)
}

struct DataFile {
    x: TimeSeries,
    y: TimeSeries,
}

fn read_data_csv(path: &Path) -> Result<DataFile, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format!("{}: empty file", path.display()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "x" || cols[2] != "y" {
        return Err(format!(
            "{}: header must start with t,x,y (got {header:?})",
            path.display()
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line_no + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(format!(
                "{} row {row}: expected {} fields, got {}",
                path.display(),
                cols.len(),
                fields.len()
            ));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|e| format!("{} row {row}: bad t: {e}", path.display()))?;
        if t != xs.len() {
            return Err(format!(
                "{} row {row}: t must count up from 0, got {t}",
                path.display()
            ));
        }
        xs.push(
            fields[1]
                .parse()
                .map_err(|e| format!("{} row {row}: bad x: {e}", path.display()))?,
        );
        ys.push(
            fields[2]
                .parse()
                .map_err(|e| format!("{} row {row}: bad y: {e}", path.display()))?,
        );
    }
    Ok(DataFile {
        x: TimeSeries::new(xs).map_err(|e| format!("{}: x: {e}", path.display()))?,
        y: TimeSeries::new(ys).map_err(|e| format!("{}: y: {e}", path.display()))?,
    })
}

fn cmd_fit(data: &Path, config: &Path, dir: &mut OutputDir, seed: Option<u64>) -> Result<(), String> {
    let started = Instant::now();
    let mut cfg: FitConfig = read_json(config)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let dataset = read_data_csv(data)?;

    let imp = decompose(&dataset.x);
    if imp.is_empty() {
        return Err("input x has no nonzero impulses".into());
    }
    let density = sparsity_check(&imp, DEFAULT_SPARSITY_THRESHOLD);
    if density.warning {
        eprintln!(
            "warning: impulse density {:.3} exceeds {:.3}; the shift search may miss the optimum",
            density.density, density.threshold
        );
    }

    let result = fit(&dataset.x, &dataset.y, &cfg).map_err(|e| e.to_string())?;
    let ols = ols_fit(&dataset.x, &dataset.y).map_err(|e| e.to_string())?;

    let result_file = ResultFile {
        tvs: result.params,
        shifts: result.shifts.clone(),
        loglik: result.loglik,
        ols,
    };
    dir.write("result.json", &json_pretty(&result_file)?)?;

    let mut trace = String::from("generation,best_objective\n");
    for (generation, best) in &result.trace {
        trace.push_str(&format!("{generation},{best}\n"));
    }
    dir.write("trace.csv", &trace)?;

    let yhat = tvs::apply_shifts(&imp, &result.shifts, &result.params)
        .map_err(|e| e.to_string())?;
    let mut residuals = String::from("t,y,yhat,residual\n");
    for t in 0..dataset.y.len() {
        let y = dataset.y.values()[t];
        let yh = yhat.values()[t];
        residuals.push_str(&format!("{t},{y},{yh},{}\n", y - yh));
    }
    dir.write("residuals.csv", &residuals)?;

    let echo = serde_json::to_value(cfg).map_err(|e| e.to_string())?;
    write_manifest(dir, "fit", echo, seed, started)
}

fn cmd_compare(result: &Path, truth: &Path, dir: &mut OutputDir) -> Result<(), String> {
    let started = Instant::now();
    let result_file: ResultFile = read_json(result)?;
    let truth_file: TruthFile = read_json(truth)?;

    let k = truth_file.shifts.len();
    if result_file.shifts.len() != k {
        return Err(format!(
            "impulse count mismatch: result has {}, truth has {k}",
            result_file.shifts.len()
        ));
    }
    let matched = result_file
        .shifts
        .shifts()
        .iter()
        .zip(truth_file.shifts.shifts())
        .filter(|(a, b)| a == b)
        .count();
    let recovery = if k == 0 { 1.0 } else { matched as f64 / k as f64 };

    let tvs_beta_error = (result_file.tvs.beta - truth_file.params.beta).abs();
    let ols_beta_error = (result_file.ols.beta - truth_file.params.beta).abs();
    let report = CompareReport {
        beta_error: tvs_beta_error,
        intercept_error: (result_file.tvs.intercept - truth_file.params.intercept).abs(),
        sigma_error: (result_file.tvs.sigma_eps - truth_file.params.sigma_eps).abs(),
        lambda_error: (result_file.tvs.lambda_tau - truth_file.realized_shift_mean).abs(),
        shift_recovery_rate: recovery,
        ols_beta_error,
        tvs_vs_ols_beta_error_ratio: (ols_beta_error > 0.0)
            .then(|| tvs_beta_error / ols_beta_error),
    };
    let text = json_pretty(&report)?;
    print!("{text}");
    dir.write("compare.json", &text)?;

    let echo = serde_json::json!({
        "result": result.display().to_string(),
        "truth": truth.display().to_string(),
    });
    write_manifest(dir, "compare", echo, None, started)
}
