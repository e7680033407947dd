//! Flat key=value run configuration with bracketed section headers.
//!
//! The file format is deliberately tiny: `[section]` lines open a section,
//! `key = value` lines set a key inside it, `#` starts a full-line comment,
//! and blank lines are skipped. Inline `--set section.key=value` overrides
//! use the same key namespace and are applied after the file.

use std::fmt;
use std::path::PathBuf;

use eurlab::bounds::SmoothParams;
use eurlab::continuous::IntervalBinSpec;
use eurlab::scenarios::{ScenarioConfig, SourceSpec};
use eurlab::states::{
    wavelength_to_angular_frequency, ChannelModel, GaussianBiphoton, TimeStdConvention,
    TmsvSpec, VacuumVarianceConvention,
};
use eurlab::Error;

/// Seed used when neither the command line, the environment, nor the config
/// file provides one.
pub const DEFAULT_SEED: u64 = 0x5eed_1234_abcd_0001;

/// Every key the config format accepts, as `section.key`.
pub const KNOWN_KEYS: &[&str] = &[
    "source.sigma_coh",
    "source.sigma_cor",
    "source.wavelength",
    "source.time_std_convention",
    "source.antisqueezing_db",
    "source.vacuum_variance",
    "bins.time_bin_width",
    "bins.time_half_window",
    "bins.freq_bin_width",
    "bins.freq_half_window",
    "channel.loss_db_per_km",
    "scan.distance_min_km",
    "scan.distance_max_km",
    "scan.distance_step_km",
    "bound.c_less_override",
    "smoothing.epsilon",
    "run.seed",
];

/// Where a bad entry came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Override,
    Environment,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Override => write!(f, "--set override"),
            Origin::Environment => write!(f, "EURLAB_SEED"),
        }
    }
}

/// A configuration-layer failure: file syntax, unknown key, or a value that
/// does not parse. Semantic range checks live in the core library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Syntax { origin: Origin, message: String },
    UnknownKey { origin: Origin, key: String, nearest: String },
    BadValue { origin: Origin, key: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { origin, message } => {
                write!(f, "config error at {origin}: {message}")
            }
            ConfigError::UnknownKey { origin, key, nearest } => write!(
                f,
                "config error at {origin}: unknown key \"{key}\"; nearest valid key is \"{nearest}\""
            ),
            ConfigError::BadValue { origin, key, message } => {
                write!(f, "config error at {origin}: bad value for \"{key}\": {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Resolved run settings: telecom defaults overlaid with config-file values
/// and inline overrides. Frequency binning defaults are derived from the
/// other settings, so they stay `None` until read through the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub sigma_coh: f64,
    pub sigma_cor: f64,
    pub wavelength: f64,
    pub time_std_convention: TimeStdConvention,
    pub antisqueezing_db: f64,
    pub vacuum_variance: VacuumVarianceConvention,
    pub time_bin_width: f64,
    pub time_half_window: f64,
    pub freq_bin_width: Option<f64>,
    pub freq_half_window: Option<f64>,
    pub loss_db_per_km: f64,
    pub distance_min_km: f64,
    pub distance_max_km: f64,
    pub distance_step_km: f64,
    pub c_less_override: Option<f64>,
    pub epsilon: f64,
    pub seed: Option<u64>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            sigma_coh: 6e-9,
            sigma_cor: 2e-12,
            wavelength: 1550e-9,
            time_std_convention: TimeStdConvention::PaperCalibrated,
            antisqueezing_db: 19.3,
            vacuum_variance: VacuumVarianceConvention::HalfVariance,
            time_bin_width: 20e-12,
            time_half_window: 0.5 / 55.6e6,
            freq_bin_width: None,
            freq_half_window: None,
            loss_db_per_km: 0.2,
            distance_min_km: 0.0,
            distance_max_km: 5.0,
            distance_step_km: 0.25,
            c_less_override: None,
            epsilon: 0.0,
            seed: None,
        }
    }
}

fn parse_f64(origin: &Origin, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::BadValue {
        origin: origin.clone(),
        key: key.to_string(),
        message: format!("expected a number, got \"{value}\""),
    })
}

fn parse_u64(origin: &Origin, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.parse::<u64>().map_err(|_| ConfigError::BadValue {
        origin: origin.clone(),
        key: key.to_string(),
        message: format!("expected an unsigned integer, got \"{value}\""),
    })
}

impl Settings {
    /// Applies one `section.key = value` entry. Unknown keys report the
    /// nearest valid key by edit distance.
    pub fn apply(&mut self, origin: &Origin, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "source.sigma_coh" => self.sigma_coh = parse_f64(origin, key, value)?,
            "source.sigma_cor" => self.sigma_cor = parse_f64(origin, key, value)?,
            "source.wavelength" => self.wavelength = parse_f64(origin, key, value)?,
            "source.time_std_convention" => {
                self.time_std_convention = match value {
                    "direct" | "direct_eq11" => TimeStdConvention::DirectEq11,
                    "calibrated" | "paper_calibrated" => TimeStdConvention::PaperCalibrated,
                    other => {
                        return Err(ConfigError::BadValue {
                            origin: origin.clone(),
                            key: key.to_string(),
                            message: format!(
                                "expected \"direct\" or \"calibrated\", got \"{other}\""
                            ),
                        })
                    }
                }
            }
            "source.antisqueezing_db" => self.antisqueezing_db = parse_f64(origin, key, value)?,
            "source.vacuum_variance" => {
                self.vacuum_variance = match value {
                    "unit" | "unit_variance" => VacuumVarianceConvention::UnitVariance,
                    "half" | "half_variance" => VacuumVarianceConvention::HalfVariance,
                    other => {
                        return Err(ConfigError::BadValue {
                            origin: origin.clone(),
                            key: key.to_string(),
                            message: format!("expected \"unit\" or \"half\", got \"{other}\""),
                        })
                    }
                }
            }
            "bins.time_bin_width" => self.time_bin_width = parse_f64(origin, key, value)?,
            "bins.time_half_window" => self.time_half_window = parse_f64(origin, key, value)?,
            "bins.freq_bin_width" => self.freq_bin_width = Some(parse_f64(origin, key, value)?),
            "bins.freq_half_window" => {
                self.freq_half_window = Some(parse_f64(origin, key, value)?)
            }
            "channel.loss_db_per_km" => self.loss_db_per_km = parse_f64(origin, key, value)?,
            "scan.distance_min_km" => self.distance_min_km = parse_f64(origin, key, value)?,
            "scan.distance_max_km" => self.distance_max_km = parse_f64(origin, key, value)?,
            "scan.distance_step_km" => self.distance_step_km = parse_f64(origin, key, value)?,
            "bound.c_less_override" => {
                self.c_less_override = Some(parse_f64(origin, key, value)?)
            }
            "smoothing.epsilon" => self.epsilon = parse_f64(origin, key, value)?,
            "run.seed" => self.seed = Some(parse_u64(origin, key, value)?),
            unknown => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.clone(),
                    key: unknown.to_string(),
                    nearest: nearest_key(unknown),
                })
            }
        }
        Ok(())
    }

    /// Biphoton source at the resolved parameters.
    pub fn biphoton(&self) -> eurlab::Result<GaussianBiphoton> {
        GaussianBiphoton::new(
            self.sigma_coh,
            self.sigma_cor,
            wavelength_to_angular_frequency(self.wavelength),
            self.time_std_convention,
        )
    }

    /// Two-mode-squeezed source at the resolved parameters.
    pub fn tmsv(&self) -> eurlab::Result<TmsvSpec> {
        TmsvSpec::new(self.antisqueezing_db, self.vacuum_variance)
    }

    /// Frequency bin width, defaulting to the value that puts the bin-pair
    /// overlap at 10^-3 for the resolved time bin width.
    pub fn resolved_freq_bin_width(&self) -> f64 {
        self.freq_bin_width
            .unwrap_or(2.0 * std::f64::consts::PI * 1e-3 / self.time_bin_width)
    }

    /// Frequency half-window, defaulting to nine marginal standard
    /// deviations of the resolved source.
    pub fn resolved_freq_half_window(&self) -> eurlab::Result<f64> {
        match self.freq_half_window {
            Some(w) => Ok(w),
            None => {
                let (freq_std, _) = self.biphoton()?.marginal_stds();
                Ok(9.0 * freq_std)
            }
        }
    }

    fn distances(&self) -> eurlab::Result<Vec<f64>> {
        let (lo, hi, step) = (self.distance_min_km, self.distance_max_km, self.distance_step_km);
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "scan.distance_step_km must be positive, got {step}"
            )));
        }
        if !(hi >= lo) {
            return Err(Error::InvalidConfig(format!(
                "scan.distance_max_km ({hi}) must be at least scan.distance_min_km ({lo})"
            )));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| lo + step * k as f64).collect())
    }

    /// Builds the scenario configuration the drivers consume. Range checks
    /// beyond parseability happen here and in the core validators.
    pub fn to_scenario(&self, seed: u64) -> eurlab::Result<ScenarioConfig> {
        let src = self.biphoton()?;
        let time_bins = IntervalBinSpec::tile(
            self.time_bin_width,
            -self.time_half_window,
            self.time_half_window,
        )?;
        let omega_o = src.omega_o();
        let half = self.resolved_freq_half_window()?;
        let frequency_bins = IntervalBinSpec::tile(
            self.resolved_freq_bin_width(),
            omega_o - half,
            omega_o + half,
        )?;
        let cfg = ScenarioConfig {
            source: SourceSpec::Biphoton(src),
            time_bins,
            frequency_bins,
            channel: ChannelModel::new(self.loss_db_per_km, 0.0)?,
            distances_km: self.distances()?,
            smoothing: SmoothParams::new(self.epsilon)?,
            c_less_override: self.c_less_override,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a config file body into `settings`, reporting the first problem.
pub fn parse_into(
    settings: &mut Settings,
    path: &PathBuf,
    text: &str,
) -> Result<(), ConfigError> {
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let origin = Origin::File { path: path.clone(), line: i + 1 };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(ConfigError::Syntax {
                    origin,
                    message: format!("unterminated section header \"{line}\""),
                });
            };
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                origin,
                message: format!("expected \"key = value\", got \"{line}\""),
            });
        };
        let Some(section) = section.as_deref() else {
            return Err(ConfigError::Syntax {
                origin,
                message: format!("key \"{}\" appears before any [section] header", key.trim()),
            });
        };
        let dotted = format!("{section}.{}", key.trim());
        settings.apply(&origin, &dotted, value.trim())?;
    }
    Ok(())
}

/// Applies one `--set section.key=value` override.
pub fn apply_override(settings: &mut Settings, spec: &str) -> Result<(), ConfigError> {
    let origin = Origin::Override;
    let Some((key, value)) = spec.split_once('=') else {
        return Err(ConfigError::Syntax {
            origin,
            message: format!("expected \"section.key=value\", got \"{spec}\""),
        });
    };
    settings.apply(&origin, key.trim(), value.trim())
}

/// Closest known key by edit distance, for "did you mean" diagnostics.
pub fn nearest_key(key: &str) -> String {
    KNOWN_KEYS
        .iter()
        .min_by_key(|k| edit_distance(key, k))
        .expect("key table is nonempty")
        .to_string()
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
