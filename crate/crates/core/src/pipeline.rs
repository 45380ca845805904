//! End-to-end runs: field → network → link series → baseline → detection →
//! inversion → interpolation → scores.
//!
//! Work is split into independent cells, one per (season, seed, node
//! count), executed on the rayon pool. Cells only return data; every file is
//! written afterwards from the calling thread in a fixed order, so outputs do
//! not depend on the number of threads.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    estimate_baseline_from, isolate_dust_attenuation, signal_level_change, synthesize_network, AttenuationSeries, Baseline,
    ChannelModel, NoiseModel, HOURS_PER_SOL,
};
use crate::detect::{detection_log_csv, onset, scan};
use crate::dustphys::{concentration_from_attenuation, concentration_from_cdod, CdodConversion, DustMedium};
use crate::errprop::variance_components;
use crate::evalx::{evaluate, MetricsReport};
use crate::grid::{Extent, GridError, GridSpec, IntensityGrid};
use crate::interp::{InterpConfig, InterpMethod, Prepared};
use crate::network::Topology;
use crate::scenario::{ConfigError, Scenario, SeasonKind};
use crate::spectra::{parse_line_catalog, PartitionModel, SpectralLine};
use crate::synth::{Season, SyntheticField};
use crate::{rng, Point};

pub const METRICS_HEADER: &str = "season,method,ndf,seed,mae,rho,nbias,coverage,clamp_count,detect_latency";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Half-width of the catalog frequency window around the carrier, relative.
const CATALOG_WINDOW: f64 = 0.01;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("data: {0}")]
    Data(String),
    #[error("output: {0}")]
    Output(String),
}

/// Reads an `MDSD-GRID v1` file of CDOD values.
pub fn ingest_cdod_grid(path: &Path) -> Result<IntensityGrid, GridError> {
    IntensityGrid::read(path)
}

/// CDOD raster to concentration, m⁻³. Invalid cells stay invalid.
pub fn cdod_to_concentration(grid: &IntensityGrid, conv: &CdodConversion) -> IntensityGrid {
    let mut out = grid.map(|v| concentration_from_cdod(v, conv));
    for (v, ok) in out.values.iter_mut().zip(&grid.valid) {
        if !ok {
            *v = f64::NAN;
        }
    }
    out
}

/// One line of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub season: SeasonKind,
    pub method: InterpMethod,
    pub node_count: usize,
    pub ndf: f64,
    pub seed: u64,
    pub report: MetricsReport,
    pub clamp_count: usize,
    /// Hours from the start of the dust period to the end of the first
    /// flagged window; `None` when nothing was flagged.
    pub detect_latency: Option<i64>,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.9e}"));
        format!(
            "{},{},{:.6},{},{},{},{},{:.4},{},{}",
            self.season.name(),
            self.method,
            self.ndf,
            self.seed,
            opt(self.report.mae),
            opt(self.report.rho),
            opt(self.report.nbias),
            self.report.coverage,
            self.clamp_count,
            self.detect_latency.map_or_else(|| "NA".to_string(), |l| l.to_string())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub season: SeasonKind,
    pub node_count: usize,
    pub seed: u64,
    /// `None` when the failure happened before interpolation.
    pub method: Option<InterpMethod>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<CellFailure>,
    pub metrics_csv: String,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    seed: u64,
    seeds: Vec<u64>,
    threads: usize,
    wall_time_s: f64,
    config: String,
    rows: usize,
    failures: &'a [CellFailure],
}

/// Sol-by-sol dust field for one season, in CDOD.
enum FieldSource {
    Synthetic(SyntheticField),
    Grids(Vec<IntensityGrid>),
}

/// Shared, read-only inputs of a run.
struct Context<'a> {
    scenario: &'a Scenario,
    model: ChannelModel,
    per_unit_cdod: f64,
    file_grids: Option<Vec<IntensityGrid>>,
}

/// Everything about one (season, seed) that does not depend on the network.
struct SeasonData {
    season: SeasonKind,
    seed: u64,
    extent: Extent,
    /// Concentration frames, calibration sols first.
    frames: Vec<IntensityGrid>,
    /// Mean concentration per map window on the output grid.
    truth: Vec<IntensityGrid>,
    out_spec: GridSpec,
}

struct CellOutput {
    rows: Vec<MetricsRow>,
    failures: Vec<CellFailure>,
    detection_log: Option<String>,
    grids: Vec<(String, String)>,
}

impl Context<'_> {
    fn calibration_hours(&self) -> usize {
        self.scenario.calibration_sols * HOURS_PER_SOL
    }

    fn season_hours(&self) -> usize {
        self.scenario.sols * HOURS_PER_SOL
    }

    fn window_count(&self) -> usize {
        self.season_hours() / self.scenario.map_window_hours
    }

    fn season_data(&self, season: SeasonKind, seed: u64) -> Result<SeasonData, String> {
        let s = self.scenario;
        let source = match season {
            SeasonKind::Storm => FieldSource::Synthetic(SyntheticField::generate(Season::Storm, s.area(), seed)),
            SeasonKind::Calm => FieldSource::Synthetic(SyntheticField::generate(Season::Calm, s.area(), seed)),
            SeasonKind::File => FieldSource::Grids(self.file_grids.clone().ok_or("no field grids loaded")?),
        };
        let (extent, raster) = match &source {
            FieldSource::Synthetic(f) => {
                let nx = (f.extent.width() / s.field_resolution_km).ceil().max(2.0) as usize;
                let ny = (f.extent.height() / s.field_resolution_km).ceil().max(2.0) as usize;
                (f.extent, GridSpec::new(f.extent, nx, ny).map_err(|e| e.to_string())?)
            }
            FieldSource::Grids(g) => (g[0].spec.extent, g[0].spec),
        };
        let cal = self.calibration_hours();
        let mut frames = Vec::with_capacity(cal + self.season_hours());
        let zero = IntensityGrid::filled(raster, 0.0);
        frames.extend(std::iter::repeat_n(zero, cal));
        for h in 0..self.season_hours() {
            let cdod = match &source {
                FieldSource::Synthetic(f) => f.frame(&raster, h as f64),
                FieldSource::Grids(g) => g[h / HOURS_PER_SOL].clone(),
            };
            frames.push(cdod.map(|v| v * self.per_unit_cdod));
        }

        let out_spec = GridSpec::new(extent, s.grid_nx, s.grid_ny).map_err(|e| e.to_string())?;
        let centers = out_spec.centers();
        let w = s.map_window_hours;
        let truth = (0..self.window_count())
            .map(|k| {
                let start = cal + k * w;
                let mean = IntensityGrid::mean_of(&frames[start..start + w]).map_err(|e| e.to_string())?;
                let values: Vec<f64> = centers.iter().map(|c| mean.sample_bilinear(*c).unwrap_or(f64::NAN)).collect();
                IntensityGrid::from_values(out_spec, values).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(SeasonData { season, seed, extent, frames, truth, out_spec })
    }

    fn run_cell(&self, data: &SeasonData, count: usize) -> CellOutput {
        let s = self.scenario;
        let fail = |method: Option<InterpMethod>, error: String| CellFailure {
            season: data.season,
            node_count: count,
            seed: data.seed,
            method,
            error,
        };
        let mut out = CellOutput { rows: Vec::new(), failures: Vec::new(), detection_log: None, grids: Vec::new() };
        let prepared = match self.link_estimates(data, count) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{} n={} seed={}: {e}", data.season.name(), count, data.seed);
                out.failures.push(fail(None, e));
                return out;
            }
        };
        let LinkEstimates { topology, midpoints, windows, clamp_count, detect_latency, detection_log } = prepared;
        if s.write_detection_logs {
            out.detection_log = Some(detection_log);
        }

        for &method in &s.methods {
            let mut cfg = InterpConfig::with_method(method);
            cfg.idw_power = s.idw_power;
            cfg.max_neighbors = (s.max_neighbors > 0).then_some(s.max_neighbors);
            cfg.z = s.z;
            cfg.l_max = s.l_max_km();
            let result = Prepared::new(&midpoints, &data.out_spec, &cfg).and_then(|p| {
                windows.iter().map(|(values, variances)| p.evaluate(values, variances)).collect::<Result<Vec<_>, _>>()
            });
            let grids = match result {
                Ok(g) => g,
                Err(e) => {
                    log::warn!("{} n={} seed={} {method}: {e}", data.season.name(), count, data.seed);
                    out.failures.push(fail(Some(method), e.to_string()));
                    continue;
                }
            };
            let report = match evaluate(&grids, &data.truth) {
                Ok(r) => r,
                Err(e) => {
                    out.failures.push(fail(Some(method), e.to_string()));
                    continue;
                }
            };
            if s.write_grids {
                for (k, g) in grids.iter().enumerate() {
                    let name = format!("{}_{}_n{}_s{}_w{:03}.grid", data.season.name(), method, count, data.seed, k);
                    let meta = [("quantity", "concentration_m-3".to_string()), ("window", k.to_string())];
                    out.grids.push((name, g.to_grid_text(&meta)));
                }
            }
            out.rows.push(MetricsRow {
                season: data.season,
                method,
                node_count: count,
                ndf: topology.ndf(),
                seed: data.seed,
                report,
                clamp_count,
                detect_latency,
            });
        }
        out
    }

    fn link_estimates(&self, data: &SeasonData, count: usize) -> Result<LinkEstimates, String> {
        let s = self.scenario;
        let topo_seed = rng::derive_seed(data.seed, &[0x746f_706f, count as u64]);
        let topology = Topology::random(count, data.extent, s.l_max_km(), s.frequency, topo_seed).map_err(|e| e.to_string())?;
        if topology.links.is_empty() {
            return Err(format!("no links within {} km among {count} nodes", s.l_max_km()));
        }
        let noise = NoiseModel {
            sigma: s.noise_sigma,
            seed: rng::derive_seed(data.seed, &[0x6e6f_6973, data.season as u64, count as u64]),
        };
        let series = synthesize_network(&topology.links, &data.frames, &self.model, s.link_sampling(), &noise)
            .map_err(|e| e.to_string())?;

        let cal = self.calibration_hours();
        let clear: Vec<usize> = (0..cal).collect();
        let k = self.model.k_molecular;
        let molecular = self.model.molecular_db_per_km();
        let baselines = series
            .iter()
            .map(|ser| {
                let residual: Vec<f64> = ser.values.iter().map(|v| v - molecular).collect();
                estimate_baseline_from(&ser.times, &residual, &clear)
            })
            .collect::<Result<Vec<Baseline>, _>>()
            .map_err(|e| e.to_string())?;

        let delta: Vec<Vec<f64>> = series
            .iter()
            .zip(&baselines)
            .map(|(ser, b)| ser.times.iter().zip(&ser.values).map(|(t, v)| signal_level_change(*v, b.at_time(*t), k)).collect())
            .collect();
        let records = scan(&delta, &s.detection).map_err(|e| e.to_string())?;
        let detect_latency = onset(&records).map(|start| (start + s.detection.window) as i64 - 1 - cal as i64);

        let (windows, clamp_count) = self.window_samples(&series, &baselines);
        Ok(LinkEstimates {
            midpoints: topology.links.iter().map(|l| l.midpoint()).collect(),
            topology,
            windows,
            clamp_count,
            detect_latency,
            detection_log: detection_log_csv(&records),
        })
    }

    /// Per map window, the inverted concentration and its variance at every
    /// link, plus the number of clamped residuals.
    fn window_samples(&self, series: &[AttenuationSeries], baselines: &[Baseline]) -> (Vec<(Vec<f64>, Vec<f64>)>, usize) {
        let s = self.scenario;
        let cal = self.calibration_hours();
        let w = s.map_window_hours;
        let slope = s.dust.attenuation_per_particle(s.frequency);
        let noise_var = s.noise_sigma * s.noise_sigma / w as f64;
        let mut clamps = 0;
        let windows = (0..self.window_count())
            .map(|k| {
                let range = cal + k * w..cal + (k + 1) * w;
                let mut values = Vec::with_capacity(series.len());
                let mut variances = Vec::with_capacity(series.len());
                for (ser, b) in series.iter().zip(baselines) {
                    let measured = ser.values[range.clone()].iter().sum::<f64>() / w as f64;
                    let base = range.clone().map(|t| b.at_time(ser.times[t])).sum::<f64>() / w as f64;
                    let iso = isolate_dust_attenuation(measured, base, self.model.k_molecular);
                    clamps += iso.clamped as usize;
                    let n = concentration_from_attenuation(iso.a_dust, &s.dust, s.frequency);
                    let medium = DustMedium { params: s.dust, concentration: n };
                    let model_var = variance_components(&medium, s.frequency, &s.budget).total_variance();
                    values.push(n);
                    variances.push((model_var + noise_var) / (slope * slope));
                }
                (values, variances)
            })
            .collect();
        (windows, clamps)
    }
}

struct LinkEstimates {
    topology: Topology,
    midpoints: Vec<Point>,
    windows: Vec<(Vec<f64>, Vec<f64>)>,
    clamp_count: usize,
    detect_latency: Option<i64>,
    detection_log: String,
}

fn load_catalog(s: &Scenario) -> Result<Vec<SpectralLine>, PipelineError> {
    let Some(path) = &s.catalog else {
        return Ok(Vec::new());
    };
    let file = fs::File::open(path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    let gases: BTreeSet<u16> = s.composition.iter().map(|(g, _)| *g).collect();
    let window = (s.frequency * (1.0 - CATALOG_WINDOW), s.frequency * (1.0 + CATALOG_WINDOW));
    parse_line_catalog(BufReader::new(file), &gases, window).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

fn load_partition(s: &Scenario) -> Result<PartitionModel, PipelineError> {
    match &s.partition_table {
        None => Ok(PartitionModel::power_law()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
            PartitionModel::parse_table(&text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
        }
    }
}

fn load_field_grids(s: &Scenario) -> Result<Option<Vec<IntensityGrid>>, PipelineError> {
    if !s.seasons.contains(&SeasonKind::File) {
        return Ok(None);
    }
    let grids = s
        .field_files
        .iter()
        .map(|p| ingest_cdod_grid(p).map_err(|e| PipelineError::Data(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = grids[0].spec;
    for (g, p) in grids.iter().zip(&s.field_files) {
        if g.spec != spec {
            return Err(PipelineError::Data(format!("{}: grid shape differs from the first field file", p.display())));
        }
        if g.valid_count() != g.values.len() {
            return Err(PipelineError::Data(format!("{}: field grids must not contain NaN cells", p.display())));
        }
    }
    Ok(Some(grids))
}

/// Computes every cell and the metrics CSV without touching the disk.
pub fn compute(scenario: &Scenario) -> Result<RunSummary, PipelineError> {
    compute_with_files(scenario).map(|(summary, _)| summary)
}

/// Runs the scenario and writes the metrics CSV, detection logs, optional
/// grids and the manifest under `scenario.output_dir`.
pub fn run_scenario(scenario: &Scenario) -> Result<RunSummary, PipelineError> {
    let (summary, files) = compute_with_files(scenario)?;
    let dir = &scenario.output_dir;
    let write = |rel: &Path, text: &str| -> Result<(), PipelineError> {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::Output(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, text).map_err(|e| PipelineError::Output(format!("{}: {e}", path.display())))
    };
    write(Path::new(METRICS_FILE), &summary.metrics_csv)?;
    for (rel, text) in &files {
        write(rel, text)?;
    }
    let manifest = Manifest {
        name: &scenario.name,
        version: env!("CARGO_PKG_VERSION"),
        seed: scenario.seed,
        seeds: scenario.seeds(),
        threads: rayon::current_num_threads(),
        wall_time_s: summary.wall_time_s,
        config: scenario.to_config_text(),
        rows: summary.rows.len(),
        failures: &summary.failures,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Output(e.to_string()))?;
    write(Path::new(MANIFEST_FILE), &json)?;
    Ok(summary)
}

/// Reads back the scenario recorded in a manifest.
pub fn scenario_from_manifest(json: &str) -> Result<Scenario, PipelineError> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(|e| PipelineError::Data(e.to_string()))?;
    let text = value
        .get("config")
        .and_then(|c| c.as_str())
        .ok_or_else(|| PipelineError::Data("manifest has no config text".into()))?;
    Ok(Scenario::parse(text)?)
}

fn compute_with_files(scenario: &Scenario) -> Result<(RunSummary, Vec<(PathBuf, String)>), PipelineError> {
    let started = Instant::now();
    scenario.validate()?;
    let atm = scenario.atmosphere()?;
    let catalog = load_catalog(scenario)?;
    let partition = load_partition(scenario)?;
    let ctx = Context {
        scenario,
        model: ChannelModel::new(scenario.frequency, scenario.dust, &atm, &catalog, &partition),
        per_unit_cdod: scenario.cdod.per_unit_cdod(),
        file_grids: load_field_grids(scenario)?,
    };

    let seeds = scenario.seeds();
    let units: Vec<(SeasonKind, u64)> = scenario.seasons.iter().flat_map(|s| seeds.iter().map(move |seed| (*s, *seed))).collect();
    let outputs: Vec<(SeasonKind, u64, Vec<(usize, CellOutput)>)> = units
        .par_iter()
        .map(|&(season, seed)| {
            let cells = match ctx.season_data(season, seed) {
                Ok(data) => scenario.node_counts.par_iter().map(|&count| (count, ctx.run_cell(&data, count))).collect(),
                Err(error) => {
                    log::warn!("{} seed={seed}: {error}", season.name());
                    scenario
                        .node_counts
                        .iter()
                        .map(|&count| {
                            let failure = CellFailure { season, node_count: count, seed, method: None, error: error.clone() };
                            (count, CellOutput { rows: Vec::new(), failures: vec![failure], detection_log: None, grids: Vec::new() })
                        })
                        .collect()
                }
            };
            (season, seed, cells)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut files = Vec::new();
    for (season, seed, cells) in outputs {
        for (count, cell) in cells {
            rows.extend(cell.rows);
            failures.extend(cell.failures);
            if let Some(log) = cell.detection_log {
                files.push((PathBuf::from("detection").join(format!("{}_n{}_s{}.csv", season.name(), count, seed)), log));
            }
            for (name, text) in cell.grids {
                files.push((PathBuf::from("grids").join(name), text));
            }
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let season_rank = |s: SeasonKind| scenario.seasons.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    let method_rank = |m: InterpMethod| scenario.methods.iter().position(|x| *x == m).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (season_rank(r.season), method_rank(r.method), r.node_count, r.seed));
    failures.sort_by_key(|f| (season_rank(f.season), f.node_count, f.seed, f.method.map(method_rank)));

    let mut csv = String::from(METRICS_HEADER);
    csv.push('\n');
    for r in &rows {
        let _ = writeln!(csv, "{}", r.to_csv_line());
    }
    let summary = RunSummary { rows, failures, metrics_csv: csv, wall_time_s: started.elapsed().as_secs_f64() };
    Ok((summary, files))
}
