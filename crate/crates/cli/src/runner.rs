use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use intermittency::applications::{
    run_asclt, run_empirical_measure, run_kde, run_periodogram, run_shadowing, write_points_csv, ExperimentResult,
};
use intermittency::concentration::{
    proven_alpha_limit, run_battery, write_reports_csv, write_tails_csv, BatteryContext, Regime,
};
use intermittency::measure::{
    build_ulam, covariance_series, green_kubo_sigma2, save_ulam, CacheStatus, GreenKubo, UlamCache,
};
use intermittency::observables::ScalarFn;
use intermittency::{MapModel, UlamMeasure, UlamOperator};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{CachePolicy, ConfigError, Experiment, RunConfig};

/// Overrides the cache directory when the config does not set one.
pub const CACHE_ENV: &str = "INTERMITTENCY_CACHE_DIR";
const DEFAULT_CACHE_DIR: &str = ".intermittency-cache";
const DEFAULT_OUT_DIR: &str = "results";
pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] intermittency::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("checksum mismatch for {file}: manifest {expected}, found {actual}")]
    Checksum {
        file: String,
        expected: String,
        actual: String,
    },

    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Size of the worker pool; `None` uses rayon's default.
    pub threads: Option<usize>,
    pub experiments: Option<Vec<Experiment>>,
}

impl RunOptions {
    /// The config with overrides applied, validated.
    pub fn resolve(&self, config: &RunConfig) -> Result<(RunConfig, Vec<String>), ConfigError> {
        let mut c = config.clone();
        if let Some(s) = self.seed {
            c.seed = Some(s);
        }
        if let Some(o) = &self.out {
            c.out_dir = Some(o.clone());
        }
        if let Some(e) = &self.experiments {
            c.experiments = e.clone();
        }
        let warnings = c.validate()?;
        Ok((c, warnings))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Hash of the canonical JSON config without `out_dir` and `cache`.
    pub config_sha256: String,
    pub config: RunConfig,
    pub seed: u64,
    pub threads: Option<usize>,
    pub cache: String,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentVerdict {
    pub experiment: String,
    pub passed: bool,
    pub failed_checks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub alpha: f64,
    pub seed: u64,
    pub regime: Regime,
    pub flags: Vec<String>,
    pub verdicts: Vec<ExperimentVerdict>,
    pub all_passed: bool,
}

#[derive(Serialize)]
struct GaussianRun<'a> {
    green_kubo: &'a GreenKubo,
    #[serde(flatten)]
    result: &'a ExperimentResult,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json {
            path: self.dir.join(name),
            source,
        })?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }

    fn put_points(&mut self, name: &str, result: &ExperimentResult) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_points_csv(&mut buf, std::slice::from_ref(result))?;
        self.put(&format!("{name}.csv"), &buf)?;
        self.put_json(&format!("{name}.json"), result)
    }
}

fn cache_dir(config: &RunConfig) -> PathBuf {
    config
        .cache
        .dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

/// Loads or builds the Ulam discretization according to the cache policy.
/// Returns a short description of where it came from.
pub fn build_measure(
    model: &MapModel,
    config: &RunConfig,
) -> Result<(UlamMeasure, UlamOperator, String), CliError> {
    let (cells, scheme) = (config.ulam_cells, config.grid_scheme);
    match config.cache.policy {
        CachePolicy::Off => {
            let (m, op) = build_ulam(model, cells, scheme)?;
            Ok((m, op, "built (cache off)".into()))
        }
        CachePolicy::Rebuild => {
            let cache = UlamCache::new(cache_dir(config));
            fs::create_dir_all(cache.dir()).map_err(io_err(cache.dir()))?;
            let (m, op) = build_ulam(model, cells, scheme)?;
            let path = cache.path_for(model.alpha(), cells, scheme);
            save_ulam(&path, &m, &op)?;
            Ok((m, op, format!("rebuilt {}", path.display())))
        }
        CachePolicy::Use => {
            let cache = UlamCache::new(cache_dir(config));
            fs::create_dir_all(cache.dir()).map_err(io_err(cache.dir()))?;
            let path = cache.path_for(model.alpha(), cells, scheme);
            let (m, op, status) = cache.load_or_build(model, cells, scheme)?;
            let how = match status {
                CacheStatus::Hit => "loaded",
                CacheStatus::Miss => "built",
                CacheStatus::Rebuilt(_) => "rebuilt after failed verification",
            };
            Ok((m, op, format!("{how} {}", path.display())))
        }
    }
}

/// Runs every selected experiment and writes outputs plus a manifest to the
/// output directory.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let (config, warnings) = opts.resolve(config)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    match opts.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            pool.install(|| run_resolved(&config, warnings, opts.threads))
        }
        None => run_resolved(&config, warnings, None),
    }
}

fn run_resolved(config: &RunConfig, flags: Vec<String>, threads: Option<usize>) -> Result<RunSummary, CliError> {
    let seed = config.seed();
    let out_dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;
    let mut out = Outputs {
        dir: out_dir.clone(),
        files: Vec::new(),
    };
    let mut timings = BTreeMap::new();

    let clock = Instant::now();
    let model = MapModel::new(config.alpha)?;
    let (measure, op, cache) = build_measure(&model, config)?;
    timings.insert("measure".to_string(), clock.elapsed().as_secs_f64());
    log::info!("invariant measure: {cache}");

    let v = ScalarFn::identity().centered(&measure);
    let grid_v = v.project(measure.grid());
    let gaussian_series = |lags: usize| covariance_series(&op, &measure, &grid_v, &grid_v, lags);

    let mut verdicts = Vec::new();
    let mut verdict = |name: &str, checks: Vec<(String, bool)>| {
        let failed: Vec<String> = checks.iter().filter(|c| !c.1).map(|c| c.0.clone()).collect();
        verdicts.push(ExperimentVerdict {
            experiment: name.to_string(),
            passed: failed.is_empty(),
            failed_checks: failed,
        });
    };
    let checks_of = |r: &ExperimentResult| r.checks.iter().map(|c| (c.name.clone(), c.passed)).collect();

    for exp in Experiment::ALL.into_iter().filter(|e| config.experiments.contains(e)) {
        let clock = Instant::now();
        log::info!("running {exp}");
        match exp {
            Experiment::Concentration => {
                let c = &config.concentration;
                let ctx = BatteryContext::new(&model, &measure, &op, c.battery.clone())?;
                let outcome = run_battery(&ctx, &c.n_grid, c.trials, seed)?;
                let mut buf = Vec::new();
                write_reports_csv(&mut buf, &outcome.reports)?;
                out.put("concentration.csv", &buf)?;
                buf.clear();
                write_tails_csv(&mut buf, &outcome.reports)?;
                out.put("concentration_tails.csv", &buf)?;
                out.put_json("concentration.json", &outcome)?;
                let mut checks: Vec<(String, bool)> = outcome
                    .verification
                    .verdicts
                    .iter()
                    .map(|v| (format!("{}_n{}", v.label, v.n), v.passed))
                    .collect();
                checks.push(("tails".into(), outcome.tails_passed));
                verdict(exp.name(), checks);
            }
            Experiment::Asclt => {
                let gk = green_kubo_sigma2(&gaussian_series(config.asclt.covariance_lags)?)?;
                let r = run_asclt(&model, &measure, &v, gk.sigma2, &config.asclt.config, seed)?;
                let mut buf = Vec::new();
                write_points_csv(&mut buf, std::slice::from_ref(&r))?;
                out.put("asclt.csv", &buf)?;
                out.put_json("asclt.json", &GaussianRun { green_kubo: &gk, result: &r })?;
                verdict(exp.name(), checks_of(&r));
            }
            Experiment::Kde => {
                let r = run_kde(&model, &measure, &config.kde, seed)?;
                out.put_points(exp.name(), &r)?;
                verdict(exp.name(), checks_of(&r));
            }
            Experiment::EmpiricalMeasure => {
                let r = run_empirical_measure(&model, &measure, &config.empirical_measure, seed)?;
                out.put_points(exp.name(), &r)?;
                verdict(exp.name(), checks_of(&r));
            }
            Experiment::Periodogram => {
                let series = gaussian_series(config.periodogram.covariance_lags)?;
                let r = run_periodogram(&model, &measure, &v, &series, &config.periodogram.config, seed)?;
                out.put_points(exp.name(), &r)?;
                verdict(exp.name(), checks_of(&r));
            }
            Experiment::Shadowing => {
                let r = run_shadowing(&model, &measure, &config.shadowing, seed)?;
                out.put_points(exp.name(), &r)?;
                verdict(exp.name(), checks_of(&r));
            }
        }
        timings.insert(exp.name().to_string(), clock.elapsed().as_secs_f64());
    }

    let summary = RunSummary {
        alpha: config.alpha,
        seed,
        regime: Regime::of(config.alpha),
        flags,
        all_passed: verdicts.iter().all(|v| v.passed),
        verdicts,
    };
    out.put_json(SUMMARY, &summary)?;

    // where results and caches live does not change them
    let mut hashed = config.clone();
    hashed.out_dir = None;
    hashed.cache = Default::default();
    let canonical = serde_json::to_vec(&hashed).map_err(|source| CliError::Json {
        path: out_dir.join(MANIFEST),
        source,
    })?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&canonical),
        config: config.clone(),
        seed,
        threads,
        cache,
        timings,
        files: out.files.clone(),
    };
    let path = out_dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| CliError::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(summary)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Verifies every checksum in the manifest and renders the summary as text.
pub fn report(out_dir: &Path) -> Result<String, CliError> {
    let manifest: Manifest = read_json(&out_dir.join(MANIFEST))?;
    for f in &manifest.files {
        let path = out_dir.join(&f.path);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let actual = sha256_hex(&bytes);
        if actual != f.sha256 {
            return Err(CliError::Checksum {
                file: f.path.clone(),
                expected: f.sha256.clone(),
                actual,
            });
        }
    }
    let summary: RunSummary = read_json(&out_dir.join(SUMMARY))?;

    let mut s = String::new();
    use std::fmt::Write;
    let _ = writeln!(
        s,
        "alpha = {} seed = {} regime = {:?} (proven for alpha < {:.6})",
        summary.alpha,
        summary.seed,
        summary.regime,
        proven_alpha_limit()
    );
    let _ = writeln!(s, "config sha256 {}", manifest.config_sha256);
    for flag in &summary.flags {
        let _ = writeln!(s, "flag: {flag}");
    }
    for v in &summary.verdicts {
        let t = manifest.timings.get(&v.experiment).copied().unwrap_or(f64::NAN);
        let status = if v.passed { "PASS" } else { "FAIL" };
        let _ = write!(s, "{status} {:<18} {t:>8.1}s", v.experiment);
        if !v.failed_checks.is_empty() {
            let _ = write!(s, "  failed: {}", v.failed_checks.join(", "));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "{} files verified", manifest.files.len());
    Ok(s)
}
