//! Experiment configuration (TOML).
//!
//! Every field is optional; missing values come from the selected preset
//! (`desk` unless `preset = "paper16"` or `--preset paper16`). Powers are
//! given in dBW and converted to watts once, in [`ExperimentConfig::resolve`].
//!
//! ```toml
//! preset = "desk"
//! seeds = [0, 1, 2, 3]
//! algorithms = ["EE-SCA", "RZF", "MMSE", "MBIM"]
//! output = "results.csv"
//! workers = 4
//!
//! [geometry]
//! beams = 8                       # hexagonal lattice around nadir
//! beam_spacing_deg = 0.4
//! # beam_centers = [[0.0, 0.0], [0.1, 0.3]]   # explicit (lat, lon) in degrees
//! # feed_boresights = ...                     # defaults to beam_centers
//! satellite_altitude_km = 35786.0
//! # coverage_radius_km = 145.0               # defaults to lattice circumradius
//! carrier_frequency_ghz = 20.0
//! bandwidth_mhz = 500.0
//! receive_gain_dbi = 41.7
//! g_over_t_db = 17.68             # or noise_temperature_k = 252.3
//! feed_peak_gain_dbi = 52.0
//! beam_halfwidth_deg = 0.2
//! boltzmann = 1.38e-23
//!
//! [layout]
//! users_per_beam = 2
//! # real_users_per_beam = [2, 1, 2, 2, 2, 2, 2, 2]
//!
//! [params]
//! p_t_dbw = 14.0
//! p_0_dbw = 10.0
//! noise_power = 1.0
//! # weights = [1.0, ...]
//! sinr_threshold = 0.0            # linear, all beams; or sinr_thresholds = [...]
//! tolerance = 1e-3
//! penalty = 100.0
//! max_sca_iters = 50
//! max_feas_iters = 30
//! slack_tolerance = 1e-6
//! log_base = "2"                  # or "e"
//!
//! [sweep]
//! p_t_dbw = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]
//! users_per_beam = [1, 2, 3, 4]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use satee_core::channel::{hex_beam_centers, GeometryConfig, GroundPoint};
use satee_core::metrics::{LogBase, SystemParams};
use satee_core::{db_to_linear, dbw_to_watts};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("unknown preset '{0}' (expected desk or paper16)")]
    UnknownPreset(String),
    #[error("unknown algorithm '{0}' (expected EE-SCA, RZF, MMSE or MBIM)")]
    UnknownAlgorithm(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    EeSca,
    Rzf,
    Mmse,
    Mbim,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::EeSca, Algorithm::Rzf, Algorithm::Mmse, Algorithm::Mbim];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::EeSca => "EE-SCA",
            Algorithm::Rzf => "RZF",
            Algorithm::Mmse => "MMSE",
            Algorithm::Mbim => "MBIM",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "EE-SCA" | "EESCA" | "SCA" => Ok(Algorithm::EeSca),
            "RZF" => Ok(Algorithm::Rzf),
            "MMSE" => Ok(Algorithm::Mmse),
            "MBIM" | "MBIM-STYLE" => Ok(Algorithm::Mbim),
            _ => Err(ConfigError::UnknownAlgorithm(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper16,
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper16" => Ok(Preset::Paper16),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }
}

// ---- raw file schema --------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub algorithms: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub layout: LayoutSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub beams: Option<usize>,
    pub beam_spacing_deg: Option<f64>,
    pub beam_centers: Option<Vec<[f64; 2]>>,
    pub feed_boresights: Option<Vec<[f64; 2]>>,
    pub satellite_altitude_km: Option<f64>,
    pub coverage_radius_km: Option<f64>,
    pub carrier_frequency_ghz: Option<f64>,
    pub bandwidth_mhz: Option<f64>,
    pub receive_gain_dbi: Option<f64>,
    pub g_over_t_db: Option<f64>,
    pub noise_temperature_k: Option<f64>,
    pub feed_peak_gain_dbi: Option<f64>,
    pub beam_halfwidth_deg: Option<f64>,
    pub boltzmann: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    pub users_per_beam: Option<usize>,
    pub real_users_per_beam: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub p_t_dbw: Option<f64>,
    pub p_0_dbw: Option<f64>,
    pub noise_power: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub sinr_threshold: Option<f64>,
    pub sinr_thresholds: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub penalty: Option<f64>,
    pub max_sca_iters: Option<usize>,
    pub max_feas_iters: Option<usize>,
    pub slack_tolerance: Option<f64>,
    pub log_base: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p_t_dbw: Option<Vec<f64>>,
    pub users_per_beam: Option<Vec<usize>>,
}

// ---- resolved config --------------------------------------------------------

/// Scenario scalars shared by every sweep point. Powers are in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub max_power_dbw: f64,
    pub max_power_w: f64,
    pub static_power_w: f64,
    pub noise_power: f64,
    pub weights: Option<Vec<f64>>,
    pub sinr_thresholds: Vec<f64>,
    pub tolerance: f64,
    pub penalty: f64,
    pub max_sca_iters: usize,
    pub max_feas_iters: usize,
    pub slack_tolerance: f64,
    pub log_base: LogBase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub users_per_beam: usize,
    pub real_users_per_beam: Option<Vec<usize>>,
    pub params: ScenarioParams,
    /// Sweep list in dBW as written, and the same values in watts.
    pub sweep_p_t_dbw: Vec<f64>,
    pub sweep_p_t_w: Vec<f64>,
    pub sweep_users_per_beam: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub output: PathBuf,
    pub workers: usize,
}

struct Defaults {
    beams: usize,
    altitude_km: f64,
    frequency_ghz: f64,
    bandwidth_mhz: f64,
    receive_gain_dbi: f64,
    g_over_t_db: f64,
    feed_peak_gain_dbi: f64,
    halfwidth_deg: f64,
    boltzmann: f64,
    users_per_beam: usize,
    p_t_dbw: f64,
    p_0_dbw: f64,
    seeds: usize,
}

impl Preset {
    fn defaults(self) -> Defaults {
        // Both presets share the GEO Ka-band link budget; they differ in size.
        let base = Defaults {
            beams: 8,
            altitude_km: 35_786.0,
            frequency_ghz: 20.0,
            bandwidth_mhz: 500.0,
            receive_gain_dbi: 41.7,
            g_over_t_db: 17.68,
            feed_peak_gain_dbi: 52.0,
            halfwidth_deg: 0.2,
            boltzmann: 1.38e-23,
            users_per_beam: 2,
            p_t_dbw: 14.0,
            p_0_dbw: 10.0,
            seeds: 10,
        };
        match self {
            Preset::Desk => base,
            Preset::Paper16 => Defaults { beams: 16, ..base },
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        Self::resolve(ConfigFile::default(), Some(preset)).expect("presets are valid")
    }

    pub fn from_toml(text: &str, preset_override: Option<Preset>) -> Result<Self, ConfigError> {
        Self::resolve(toml::from_str(text)?, preset_override)
    }

    pub fn from_path(path: &Path, preset_override: Option<Preset>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, preset_override)
    }

    /// Fills gaps from the preset, converts units and validates.
    pub fn resolve(file: ConfigFile, preset_override: Option<Preset>) -> Result<Self, ConfigError> {
        let preset = match (preset_override, &file.preset) {
            (Some(p), _) => p,
            (None, Some(name)) => name.parse()?,
            (None, None) => Preset::Desk,
        };
        let d = preset.defaults();
        let g = &file.geometry;

        let altitude = g.satellite_altitude_km.unwrap_or(d.altitude_km) * 1e3;
        let halfwidth = g.beam_halfwidth_deg.unwrap_or(d.halfwidth_deg).to_radians();
        // adjacent centres one 3 dB beamwidth apart
        let spacing = g.beam_spacing_deg.map_or(2.0 * halfwidth, f64::to_radians);
        let to_points = |v: &[[f64; 2]]| {
            v.iter()
                .map(|&[lat, lon]| GroundPoint::new(lat, lon))
                .collect::<Vec<_>>()
        };
        let beam_centers = match &g.beam_centers {
            Some(c) => to_points(c),
            None => hex_beam_centers(altitude, g.beams.unwrap_or(d.beams), spacing),
        };
        if let (Some(b), Some(c)) = (g.beams, &g.beam_centers) {
            if b != c.len() {
                return Err(ConfigError::Invalid(format!(
                    "geometry.beams = {b} but {} beam_centers given",
                    c.len()
                )));
            }
        }
        let feed_boresights = g
            .feed_boresights
            .as_deref()
            .map_or_else(|| beam_centers.clone(), to_points);
        let receive_gain_dbi = g.receive_gain_dbi.unwrap_or(d.receive_gain_dbi);
        let noise_temperature_k = match (g.noise_temperature_k, g.g_over_t_db) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either noise_temperature_k or g_over_t_db, not both".into(),
                ))
            }
            (Some(t), None) => t,
            (None, got) => db_to_linear(receive_gain_dbi - got.unwrap_or(d.g_over_t_db)),
        };
        let geometry = GeometryConfig {
            satellite_altitude_m: altitude,
            coverage_radius_m: g
                .coverage_radius_km
                .map_or(altitude * (spacing / 3f64.sqrt()).tan(), |r| r * 1e3),
            beam_centers,
            feed_boresights,
            carrier_frequency_hz: g.carrier_frequency_ghz.unwrap_or(d.frequency_ghz) * 1e9,
            bandwidth_hz: g.bandwidth_mhz.unwrap_or(d.bandwidth_mhz) * 1e6,
            receive_gain: db_to_linear(receive_gain_dbi),
            feed_peak_gain: db_to_linear(g.feed_peak_gain_dbi.unwrap_or(d.feed_peak_gain_dbi)),
            noise_temperature_k,
            boltzmann: g.boltzmann.unwrap_or(d.boltzmann),
            beam_halfwidth_3db_rad: halfwidth,
            rng_seed: 0,
        };
        geometry.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let beams = geometry.num_beams();

        let p = &file.params;
        let sinr_thresholds = match (&p.sinr_threshold, &p.sinr_thresholds) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either sinr_threshold or sinr_thresholds, not both".into(),
                ))
            }
            (Some(t), None) => vec![*t; beams],
            (None, Some(v)) => v.clone(),
            (None, None) => vec![0.0; beams],
        };
        let log_base = match p.log_base.as_deref() {
            None | Some("2") => LogBase::Two,
            Some("e") => LogBase::E,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "log_base must be \"2\" or \"e\", got {other}"
                )))
            }
        };
        let p_t_dbw = p.p_t_dbw.unwrap_or(d.p_t_dbw);
        let params = ScenarioParams {
            max_power_dbw: p_t_dbw,
            max_power_w: dbw_to_watts(p_t_dbw),
            static_power_w: dbw_to_watts(p.p_0_dbw.unwrap_or(d.p_0_dbw)),
            noise_power: p.noise_power.unwrap_or(1.0),
            weights: p.weights.clone(),
            sinr_thresholds,
            tolerance: p.tolerance.unwrap_or(1e-3),
            penalty: p.penalty.unwrap_or(100.0),
            max_sca_iters: p.max_sca_iters.unwrap_or(50),
            max_feas_iters: p.max_feas_iters.unwrap_or(30),
            slack_tolerance: p.slack_tolerance.unwrap_or(1e-6),
            log_base,
        };

        let sweep_p_t_dbw = file
            .sweep
            .p_t_dbw
            .unwrap_or_else(|| (0..=7).map(|i| 2.0 * i as f64).collect());
        let sweep_users_per_beam = file.sweep.users_per_beam.unwrap_or_else(|| vec![1, 2, 3, 4]);
        let seeds = file.seeds.unwrap_or_else(|| (0..d.seeds as u64).collect());
        let algorithms = match file.algorithms {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>, _>>()?,
            None => Algorithm::ALL.to_vec(),
        };

        let config = Self {
            geometry,
            users_per_beam: file.layout.users_per_beam.unwrap_or(d.users_per_beam),
            real_users_per_beam: file.layout.real_users_per_beam,
            params,
            sweep_p_t_w: sweep_p_t_dbw.iter().map(|&x| dbw_to_watts(x)).collect(),
            sweep_p_t_dbw,
            sweep_users_per_beam,
            seeds,
            algorithms,
            output: file.output.unwrap_or_else(|| PathBuf::from("results.csv")),
            workers: file.workers.unwrap_or(1),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return invalid("seeds must be nonempty".into());
        }
        if self.algorithms.is_empty() {
            return invalid("algorithms must be nonempty".into());
        }
        if self.sweep_p_t_dbw.is_empty() || self.sweep_users_per_beam.is_empty() {
            return invalid("sweep lists must be nonempty".into());
        }
        if self.users_per_beam == 0 || self.sweep_users_per_beam.contains(&0) {
            return invalid("users_per_beam must be positive".into());
        }
        if self.workers == 0 {
            return invalid("workers must be positive".into());
        }
        if self.sweep_p_t_dbw.iter().any(|p| !p.is_finite()) {
            return invalid("sweep powers must be finite".into());
        }
        if let Some(real) = &self.real_users_per_beam {
            if real.len() != self.geometry.num_beams() {
                return invalid(format!(
                    "real_users_per_beam has {} entries for {} beams",
                    real.len(),
                    self.geometry.num_beams()
                ));
            }
        }
        self.system_params(self.params.max_power_w, self.users_per_beam)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Core parameters for one sweep point.
    pub fn system_params(&self, max_power_w: f64, users_per_beam: usize) -> SystemParams {
        let s = &self.params;
        let mut p = SystemParams::new(
            self.geometry.num_feeds(),
            self.geometry.num_beams(),
            users_per_beam,
            max_power_w,
            s.static_power_w,
        );
        p.noise_power = s.noise_power;
        if let Some(w) = &s.weights {
            p.weights = w.clone();
        }
        p.sinr_thresholds = s.sinr_thresholds.clone();
        p.tolerance = s.tolerance;
        p.penalty = s.penalty;
        p.max_sca_iters = s.max_sca_iters;
        p.max_feas_iters = s.max_feas_iters;
        p.slack_tolerance = s.slack_tolerance;
        p.log_base = s.log_base;
        p
    }

    /// Real users per beam at a sweep point; explicit counts are capped at `q`.
    pub fn real_users_at(&self, users_per_beam: usize) -> Option<Vec<usize>> {
        self.real_users_per_beam
            .as_ref()
            .map(|r| r.iter().map(|&x| x.min(users_per_beam)).collect())
    }
}
