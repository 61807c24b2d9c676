use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use intermittency::applications::{AscltConfig, EmpiricalConfig, KdeConfig, PeriodogramConfig, ShadowingConfig};
use intermittency::concentration::{proven_alpha_limit, BatteryConfig, MIN_TRIALS};
use intermittency::measure::GridScheme;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Concentration,
    Asclt,
    Kde,
    EmpiricalMeasure,
    Periodogram,
    Shadowing,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Concentration,
        Experiment::Asclt,
        Experiment::Kde,
        Experiment::EmpiricalMeasure,
        Experiment::Periodogram,
        Experiment::Shadowing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Concentration => "concentration",
            Experiment::Asclt => "asclt",
            Experiment::Kde => "kde",
            Experiment::EmpiricalMeasure => "empirical_measure",
            Experiment::Periodogram => "periodogram",
            Experiment::Shadowing => "shadowing",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Load a verified cached discretization or build and store one.
    #[default]
    Use,
    /// Always rebuild and overwrite.
    Rebuild,
    /// Build in memory only.
    Off,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub policy: CachePolicy,
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationSection {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub battery: BatteryConfig,
}

impl Default for ConcentrationSection {
    fn default() -> Self {
        Self {
            n_grid: vec![100, 1_000, 10_000],
            trials: 2000,
            battery: BatteryConfig::default(),
        }
    }
}

/// Lags of the covariance series used for the CLT variance and the
/// spectral target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscltSection {
    pub covariance_lags: usize,
    #[serde(flatten)]
    pub config: AscltConfig,
}

impl Default for AscltSection {
    fn default() -> Self {
        Self {
            covariance_lags: 400,
            config: AscltConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodogramSection {
    pub covariance_lags: usize,
    #[serde(flatten)]
    pub config: PeriodogramConfig,
}

impl Default for PeriodogramSection {
    fn default() -> Self {
        Self {
            covariance_lags: 1000,
            config: PeriodogramConfig::default(),
        }
    }
}

fn default_cells() -> usize {
    4096
}

fn default_scheme() -> GridScheme {
    GridScheme::MarkovRefined
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required; there is no wall-clock default.
    pub seed: Option<u64>,
    pub alpha: f64,
    #[serde(default = "default_cells")]
    pub ulam_cells: usize,
    #[serde(default = "default_scheme")]
    pub grid_scheme: GridScheme,
    #[serde(default)]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default)]
    pub concentration: ConcentrationSection,
    #[serde(default)]
    pub asclt: AscltSection,
    #[serde(default)]
    pub kde: KdeConfig,
    #[serde(default)]
    pub empirical_measure: EmpiricalConfig,
    #[serde(default)]
    pub periodogram: PeriodogramSection,
    #[serde(default)]
    pub shadowing: ShadowingConfig,
}

impl FromStr for RunConfig {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Range and schema checks only. Returns warnings for runs that are
    /// allowed but outside the proven regime.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut errs = Vec::new();
        let mut err = |field: &str, message: String| {
            errs.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        let mut warnings = Vec::new();

        if self.seed.is_none() {
            err("seed", "missing; a master seed is required for reproducibility".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            err("alpha", format!("{} is outside (0, 1)", self.alpha));
        }
        if self.ulam_cells < 64 {
            err("ulam_cells", format!("{} is below the minimum of 64", self.ulam_cells));
        }
        if self.grid_scheme == GridScheme::Uniform && self.ulam_cells % 2 == 1 {
            err("ulam_cells", "must be even for the uniform grid".into());
        }
        if self.experiments.is_empty() {
            err("experiments", "no experiment selected".into());
        }
        let selected = |e: Experiment| self.experiments.contains(&e);

        let grid = |field: &str, g: &[usize], errs: &mut dyn FnMut(&str, String)| {
            if g.is_empty() {
                errs(field, "must be nonempty".into());
            } else if g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
                errs(field, format!("{g:?} must be positive and strictly increasing"));
            }
        };

        if selected(Experiment::Concentration) {
            let c = &self.concentration;
            grid("concentration.n_grid", &c.n_grid, &mut err);
            if c.trials < MIN_TRIALS {
                err("concentration.trials", format!("{} is below the minimum of {MIN_TRIALS}", c.trials));
            }
            if c.battery.shadow_set.is_empty() {
                err("concentration.battery.shadow_set", "must be nonempty".into());
            }
            check_intervals("concentration.battery.shadow_set", &c.battery.shadow_set, &mut err);
            if c.battery.shadow_candidates == 0 {
                err("concentration.battery.shadow_candidates", "must be positive".into());
            }
            if !(c.battery.kde_exponent > 0.0 && c.battery.kde_exponent < 1.0) {
                err("concentration.battery.kde_exponent", "must lie in (0, 1)".into());
            }
            if self.alpha >= proven_alpha_limit() {
                warnings.push(format!(
                    "exploratory: outside alpha < 4 - sqrt(15) = {:.6}; concentration verdicts are informative only",
                    proven_alpha_limit()
                ));
            }
        }
        if selected(Experiment::Asclt) {
            grid("asclt.n_grid", &self.asclt.config.n_grid, &mut err);
            if self.alpha >= 0.5 {
                err("alpha", "the almost-sure CLT experiment needs alpha < 1/2".into());
            }
            if self.asclt.config.trials == 0 {
                err("asclt.trials", "must be positive".into());
            }
            if self.asclt.covariance_lags < 10 {
                err("asclt.covariance_lags", "must be at least 10".into());
            }
        }
        if selected(Experiment::Kde) {
            let k = &self.kde;
            grid("kde.n_grid", &k.n_grid, &mut err);
            let s = k.schedule;
            if !(s.scale > 0.0) {
                err("kde.schedule.scale", "must be positive".into());
            }
            let a: Vec<f64> = k.n_grid.iter().map(|&n| s.bandwidth(n)).collect();
            let na: Vec<f64> = k.n_grid.iter().zip(&a).map(|(&n, a)| n as f64 * a).collect();
            if a.windows(2).any(|w| w[1] >= w[0]) {
                err("kde.schedule", "a_n must decrease to 0 along the n grid".into());
            }
            if na.windows(2).any(|w| w[1] <= w[0]) || !(s.exponent < 1.0) {
                err(
                    "kde.schedule",
                    "n * a_n must increase without bound; the density estimate needs a_n -> 0 and n a_n -> infinity"
                        .into(),
                );
            }
            if a.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                err("kde.schedule", "every a_n must lie in (0, 1)".into());
            }
        }
        if selected(Experiment::EmpiricalMeasure) {
            grid("empirical_measure.n_grid", &self.empirical_measure.n_grid, &mut err);
        }
        if selected(Experiment::Periodogram) {
            grid("periodogram.n_grid", &self.periodogram.config.n_grid, &mut err);
            if self.periodogram.config.omega_intervals < 2 {
                err("periodogram.omega_intervals", "must be at least 2".into());
            }
        }
        if selected(Experiment::Shadowing) {
            let s = &self.shadowing;
            grid("shadowing.n_grid", &s.n_grid, &mut err);
            if s.set.is_empty() {
                err("shadowing.set", "A is empty".into());
            }
            check_intervals("shadowing.set", &s.set, &mut err);
            if s.eps_grid.is_empty() || s.eps_grid.iter().any(|&e| !(e > 0.0)) {
                err("shadowing.eps_grid", "must be nonempty and positive".into());
            }
            if s.candidates == 0 {
                err("shadowing.candidates", "must be positive".into());
            }
        }
        for e in [
            (Experiment::Kde, self.kde.trials, "kde.trials"),
            (Experiment::EmpiricalMeasure, self.empirical_measure.trials, "empirical_measure.trials"),
            (Experiment::Periodogram, self.periodogram.config.trials, "periodogram.trials"),
            (Experiment::Shadowing, self.shadowing.trials, "shadowing.trials"),
        ] {
            if selected(e.0) && e.1 == 0 {
                err(e.2, "must be positive".into());
            }
        }

        if errs.is_empty() {
            Ok(warnings)
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

fn check_intervals(field: &str, set: &[(f64, f64)], err: &mut dyn FnMut(&str, String)) {
    for &(a, b) in set {
        if !(0.0 <= a && a < b && b <= 1.0) {
            err(field, format!("[{a}, {b}] is not a nondegenerate interval in [0, 1]"));
        }
    }
}
