//! Scenario configuration: a flat `section.key = value` text format.
//!
//! ```text
//! # comment
//! scenario.seed = 7
//! scenario.seasons = storm, calm
//! network.node_counts = 20, 50, 100, 200
//! atmosphere.composition = 2:0.9532, 22:0.027
//! ```
//!
//! Every key is optional and falls back to [`Scenario::default`]. Unknown
//! keys are rejected. [`Scenario::to_config_text`] writes every key, and
//! parsing its output yields the same scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{LinkSampling, DEFAULT_NOISE_DB_PER_KM, DEFAULT_PATH_POINTS};
use crate::detect::DetectionConfig;
use crate::dustphys::{CdodConversion, DustParams};
use crate::errprop::UncertaintyBudget;
use crate::grid::Extent;
use crate::interp::InterpMethod;
use crate::network::{REFERENCE_L_MAX_KM, REFERENCE_NODE_COUNTS};
use crate::spectra::{AtmosphereState, Constituent, CO2, N2};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{key}: {reason}")]
    Value { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

/// Source of the dust field for one season.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeasonKind {
    Storm,
    Calm,
    /// Sol-by-sol CDOD grids listed in `field.files`.
    File,
}

impl SeasonKind {
    pub fn name(&self) -> &'static str {
        match self {
            SeasonKind::Storm => "storm",
            SeasonKind::Calm => "calm",
            SeasonKind::File => "file",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "storm" => Some(SeasonKind::Storm),
            "calm" => Some(SeasonKind::Calm),
            "file" => Some(SeasonKind::File),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Seeds `seed, seed + 1, …` are run.
    pub replicates: usize,
    pub seasons: Vec<SeasonKind>,
    /// Sols of dust-season data per run.
    pub sols: usize,
    /// Dust-free sols prepended to every run for the baseline.
    pub calibration_sols: usize,
    /// Hours averaged into one map.
    pub map_window_hours: usize,

    /// km.
    pub area_width: f64,
    pub area_height: f64,
    pub node_counts: Vec<usize>,
    /// Grid units.
    pub l_max: f64,
    /// km per grid unit.
    pub unit_km: f64,

    /// Hz.
    pub frequency: f64,
    /// dB/km.
    pub noise_sigma: f64,
    /// 0 selects midpoint sampling.
    pub path_points: usize,

    pub temperature: f64,
    pub pressure: f64,
    /// (HITRAN molecule id, mixing ratio).
    pub composition: Vec<(u16, f64)>,
    pub catalog: Option<PathBuf>,
    pub partition_table: Option<PathBuf>,

    pub dust: DustParams,
    pub cdod: CdodConversion,
    pub detection: DetectionConfig,

    pub methods: Vec<InterpMethod>,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub idw_power: f64,
    /// 0 solves the global kriging system.
    pub max_neighbors: usize,
    pub z: f64,

    pub budget: UncertaintyBudget,

    /// CDOD grids, one per sol, for the `file` season.
    pub field_files: Vec<PathBuf>,
    /// Raster spacing of synthetic fields, km.
    pub field_resolution_km: f64,

    pub output_dir: PathBuf,
    pub write_grids: bool,
    pub write_detection_logs: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "desk".into(),
            seed: 1,
            replicates: 1,
            seasons: vec![SeasonKind::Storm, SeasonKind::Calm],
            sols: 10,
            calibration_sols: 5,
            map_window_hours: 24,
            area_width: 120.0,
            area_height: 60.0,
            node_counts: REFERENCE_NODE_COUNTS.to_vec(),
            l_max: REFERENCE_L_MAX_KM,
            unit_km: 1.0,
            frequency: 1.0e12,
            noise_sigma: DEFAULT_NOISE_DB_PER_KM,
            path_points: DEFAULT_PATH_POINTS,
            temperature: 210.0,
            pressure: 610.0,
            composition: vec![(CO2, 0.9532), (N2, 0.027)],
            catalog: None,
            partition_table: None,
            dust: DustParams::default(),
            cdod: CdodConversion::default(),
            detection: DetectionConfig::default(),
            methods: InterpMethod::STANDARD.to_vec(),
            grid_nx: 100,
            grid_ny: 50,
            idw_power: 2.0,
            max_neighbors: 32,
            z: 1.0,
            budget: UncertaintyBudget::default(),
            field_files: Vec::new(),
            field_resolution_km: 1.0,
            output_dir: PathBuf::from("out"),
            write_grids: false,
            write_detection_logs: true,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::Value { key: key.into(), reason: format!("expected a number, got {v:?}") })
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError::Value { key: key.into(), reason: format!("expected a nonnegative integer, got {v:?}") })
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value { key: key.into(), reason: format!("expected true or false, got {v:?}") }),
    }
}

/// Parses `gas:ratio` pairs such as `2:0.9532, 22:0.027`.
pub fn parse_composition(v: &str) -> Result<Vec<(u16, f64)>, String> {
    split_list(v)
        .into_iter()
        .map(|item| {
            let (g, q) = item.split_once(':').ok_or_else(|| format!("expected gas:ratio, got {item:?}"))?;
            let gas = g.trim().parse::<u16>().map_err(|_| format!("bad gas id {g:?}"))?;
            let ratio = q.trim().parse::<f64>().map_err(|_| format!("bad mixing ratio {q:?}"))?;
            Ok((gas, ratio))
        })
        .collect()
}

fn split_list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn optional_path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl Scenario {
    /// Parses config text; later assignments of a key override earlier ones.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, reason: format!("expected 'section.key = value', got {content:?}") })?;
            let key = key.trim();
            if key.split('.').count() != 2 || key.split('.').any(str::is_empty) {
                return Err(ConfigError::Syntax { line, reason: format!("key {key:?} is not of the form section.key") });
            }
            entries.insert(key.to_string(), (line, value.trim().to_string()));
        }

        let mut s = Scenario::default();
        for (key, (line, v)) in &entries {
            let v = v.as_str();
            let k = key.as_str();
            match k {
                "scenario.name" => s.name = v.to_string(),
                "scenario.seed" => {
                    s.seed = v.parse().map_err(|_| ConfigError::Value { key: k.into(), reason: format!("expected an unsigned integer, got {v:?}") })?
                }
                "scenario.replicates" => s.replicates = parse_usize(k, v)?,
                "scenario.seasons" => {
                    s.seasons = split_list(v)
                        .into_iter()
                        .map(|x| SeasonKind::parse(x).ok_or_else(|| ConfigError::Value { key: k.into(), reason: format!("unknown season {x:?}") }))
                        .collect::<Result<_, _>>()?
                }
                "scenario.sols" => s.sols = parse_usize(k, v)?,
                "scenario.calibration_sols" => s.calibration_sols = parse_usize(k, v)?,
                "scenario.map_window_hours" => s.map_window_hours = parse_usize(k, v)?,
                "area.width" => s.area_width = parse_f64(k, v)?,
                "area.height" => s.area_height = parse_f64(k, v)?,
                "network.node_counts" => s.node_counts = split_list(v).into_iter().map(|x| parse_usize(k, x)).collect::<Result<_, _>>()?,
                "network.l_max" => s.l_max = parse_f64(k, v)?,
                "network.unit_km" => s.unit_km = parse_f64(k, v)?,
                "channel.frequency" => s.frequency = parse_f64(k, v)?,
                "channel.noise_sigma" => s.noise_sigma = parse_f64(k, v)?,
                "channel.path_points" => s.path_points = parse_usize(k, v)?,
                "atmosphere.temperature" => s.temperature = parse_f64(k, v)?,
                "atmosphere.pressure" => s.pressure = parse_f64(k, v)?,
                "atmosphere.composition" => {
                    s.composition = parse_composition(v).map_err(|reason| ConfigError::Value { key: k.into(), reason })?
                }
                "atmosphere.catalog" => s.catalog = optional_path(v),
                "atmosphere.partition_table" => s.partition_table = optional_path(v),
                "dust.radius" => s.dust.mean_radius = parse_f64(k, v)?,
                "dust.eps_real" => s.dust.eps_real = parse_f64(k, v)?,
                "dust.eps_imag" => s.dust.eps_imag = parse_f64(k, v)?,
                "cdod.extinction_factor" => s.cdod.extinction_factor = parse_f64(k, v)?,
                "cdod.q_ext" => s.cdod.q_ext = parse_f64(k, v)?,
                "cdod.radius" => s.cdod.radius = parse_f64(k, v)?,
                "cdod.scale_height" => s.cdod.scale_height = parse_f64(k, v)?,
                "detection.rho_threshold" => s.detection.rho_threshold = parse_f64(k, v)?,
                "detection.alpha" => s.detection.alpha = parse_f64(k, v)?,
                "detection.window" => s.detection.window = parse_usize(k, v)?,
                "interp.methods" => {
                    s.methods = split_list(v)
                        .into_iter()
                        .map(|m| m.parse::<InterpMethod>().map_err(|e| ConfigError::Value { key: k.into(), reason: e.to_string() }))
                        .collect::<Result<_, _>>()?
                }
                "interp.nx" => s.grid_nx = parse_usize(k, v)?,
                "interp.ny" => s.grid_ny = parse_usize(k, v)?,
                "interp.idw_power" => s.idw_power = parse_f64(k, v)?,
                "interp.max_neighbors" => s.max_neighbors = parse_usize(k, v)?,
                "interp.z" => s.z = parse_f64(k, v)?,
                "budget.sigma_r" => s.budget.sigma_r = parse_f64(k, v)?,
                "budget.sigma_eps_real" => s.budget.sigma_eps_real = parse_f64(k, v)?,
                "budget.sigma_eps_imag" => s.budget.sigma_eps_imag = parse_f64(k, v)?,
                "budget.sigma_n_rel" => s.budget.sigma_n_rel = parse_f64(k, v)?,
                "field.files" => s.field_files = split_list(v).into_iter().map(PathBuf::from).collect(),
                "field.resolution_km" => s.field_resolution_km = parse_f64(k, v)?,
                "output.dir" => s.output_dir = PathBuf::from(v),
                "output.write_grids" => s.write_grids = parse_bool(k, v)?,
                "output.write_detection_logs" => s.write_detection_logs = parse_bool(k, v)?,
                _ => return Err(ConfigError::Syntax { line: *line, reason: format!("unknown key {k:?}") }),
            }
        }
        s.validate()?;
        Ok(s)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_relative() { base.join(p) } else { p.to_path_buf() };
        s.catalog = s.catalog.as_deref().map(resolve);
        s.partition_table = s.partition_table.as_deref().map(resolve);
        s.field_files = s.field_files.iter().map(|p| resolve(p)).collect();
        s.output_dir = resolve(&s.output_dir);
        s.check_paths()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.replicates == 0 {
            return bad("scenario.replicates must be at least 1".into());
        }
        if self.seasons.is_empty() {
            return bad("scenario.seasons is empty".into());
        }
        if self.sols == 0 {
            return bad("scenario.sols must be at least 1".into());
        }
        if self.calibration_sols == 0 {
            return bad("scenario.calibration_sols must be at least 1 to define a baseline".into());
        }
        if self.map_window_hours == 0 {
            return bad("scenario.map_window_hours must be positive".into());
        }
        if let Err(e) = Extent::from_size(self.area_width, self.area_height) {
            return bad(format!("area: {e}"));
        }
        if self.node_counts.is_empty() || self.node_counts.iter().any(|n| *n < 2) {
            return bad("network.node_counts must list counts of at least 2".into());
        }
        if !(self.l_max > 0.0 && self.unit_km > 0.0) {
            return bad("network.l_max and network.unit_km must be positive".into());
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return bad("channel.frequency must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("channel.noise_sigma must be nonnegative".into());
        }
        self.atmosphere()?;
        self.dust.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cdod.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.detection.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.methods.is_empty() {
            return bad("interp.methods is empty".into());
        }
        if self.grid_nx == 0 || self.grid_ny == 0 {
            return bad("interp.nx and interp.ny must be positive".into());
        }
        if !(self.idw_power > 0.0) {
            return bad("interp.idw_power must be positive".into());
        }
        if !(self.z >= 0.0) {
            return bad("interp.z must be nonnegative".into());
        }
        self.budget.validate().map_err(ConfigError::Invalid)?;
        if self.seasons.contains(&SeasonKind::File) && self.field_files.len() != self.sols {
            return bad(format!("the file season needs {} grid files in field.files, got {}", self.sols, self.field_files.len()));
        }
        if !(self.field_resolution_km > 0.0) {
            return bad("field.resolution_km must be positive".into());
        }
        Ok(())
    }

    /// Checks that every referenced input file can be read.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let files = self.catalog.iter().chain(&self.partition_table).chain(&self.field_files);
        for p in files {
            std::fs::File::open(p).map_err(|e| ConfigError::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }

    pub fn atmosphere(&self) -> Result<AtmosphereState, ConfigError> {
        let comp = self.composition.iter().map(|(g, q)| Constituent::gas(*g, *q)).collect();
        AtmosphereState::new(self.temperature, self.pressure, comp).map_err(|e| ConfigError::Invalid(format!("atmosphere: {e}")))
    }

    pub fn area(&self) -> Extent {
        Extent::from_size(self.area_width, self.area_height).expect("validated area")
    }

    pub fn l_max_km(&self) -> f64 {
        self.l_max * self.unit_km
    }

    pub fn link_sampling(&self) -> LinkSampling {
        if self.path_points == 0 {
            LinkSampling::Midpoint
        } else {
            LinkSampling::Path(self.path_points)
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicates as u64).map(|r| self.seed.wrapping_add(r)).collect()
    }

    pub fn to_config_text(&self) -> String {
        let mut o = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        put("scenario.name", self.name.clone());
        put("scenario.seed", self.seed.to_string());
        put("scenario.replicates", self.replicates.to_string());
        put("scenario.seasons", self.seasons.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "));
        put("scenario.sols", self.sols.to_string());
        put("scenario.calibration_sols", self.calibration_sols.to_string());
        put("scenario.map_window_hours", self.map_window_hours.to_string());
        put("area.width", self.area_width.to_string());
        put("area.height", self.area_height.to_string());
        put("network.node_counts", join(&self.node_counts));
        put("network.l_max", self.l_max.to_string());
        put("network.unit_km", self.unit_km.to_string());
        put("channel.frequency", self.frequency.to_string());
        put("channel.noise_sigma", self.noise_sigma.to_string());
        put("channel.path_points", self.path_points.to_string());
        put("atmosphere.temperature", self.temperature.to_string());
        put("atmosphere.pressure", self.pressure.to_string());
        put("atmosphere.composition", self.composition.iter().map(|(g, q)| format!("{g}:{q}")).collect::<Vec<_>>().join(", "));
        put("atmosphere.catalog", path_text(&self.catalog));
        put("atmosphere.partition_table", path_text(&self.partition_table));
        put("dust.radius", self.dust.mean_radius.to_string());
        put("dust.eps_real", self.dust.eps_real.to_string());
        put("dust.eps_imag", self.dust.eps_imag.to_string());
        put("cdod.extinction_factor", self.cdod.extinction_factor.to_string());
        put("cdod.q_ext", self.cdod.q_ext.to_string());
        put("cdod.radius", self.cdod.radius.to_string());
        put("cdod.scale_height", self.cdod.scale_height.to_string());
        put("detection.rho_threshold", self.detection.rho_threshold.to_string());
        put("detection.alpha", self.detection.alpha.to_string());
        put("detection.window", self.detection.window.to_string());
        put("interp.methods", join(&self.methods));
        put("interp.nx", self.grid_nx.to_string());
        put("interp.ny", self.grid_ny.to_string());
        put("interp.idw_power", self.idw_power.to_string());
        put("interp.max_neighbors", self.max_neighbors.to_string());
        put("interp.z", self.z.to_string());
        put("budget.sigma_r", self.budget.sigma_r.to_string());
        put("budget.sigma_eps_real", self.budget.sigma_eps_real.to_string());
        put("budget.sigma_eps_imag", self.budget.sigma_eps_imag.to_string());
        put("budget.sigma_n_rel", self.budget.sigma_n_rel.to_string());
        put("field.files", self.field_files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
        put("field.resolution_km", self.field_resolution_km.to_string());
        put("output.dir", self.output_dir.display().to_string());
        put("output.write_grids", self.write_grids.to_string());
        put("output.write_detection_logs", self.write_detection_logs.to_string());
        o
    }
}
