use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mdsd_core::dustphys::{
    concentration_from_attenuation, concentration_from_cdod, dust_attenuation, visibility_or_clear, CdodConversion,
    DustMedium, DustParams,
};
use mdsd_core::errprop::{frequency_sweep_csv, monte_carlo_sigma, variance_components, UncertaintyBudget};
use mdsd_core::pipeline::{ingest_cdod_grid, run_scenario, PipelineError};
use mdsd_core::scenario::{parse_composition, Scenario};
use mdsd_core::spectra::{
    absorption_coefficient, db_per_km, parse_line_catalog, AtmosphereState, Constituent, PartitionModel,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "mdsd", version, about = "Martian dust storm sensing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write metrics, logs and a manifest.
    Simulate {
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Molecular absorption coefficient at one frequency.
    Attenuation {
        /// Hz.
        #[arg(long)]
        freq: f64,
        /// K.
        #[arg(long, default_value_t = 210.0)]
        temp: f64,
        /// Pa.
        #[arg(long, default_value_t = 610.0)]
        pressure: f64,
        /// HITRAN 160-column line catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value = "2:0.9532, 22:0.027")]
        composition: String,
        #[arg(long)]
        partition_table: Option<PathBuf>,
    },
    /// Concentration and visibility from an isolated dust attenuation.
    Invert {
        /// dB/km.
        #[arg(long)]
        adust: f64,
        #[arg(long, default_value_t = 1.0e12)]
        freq: f64,
        #[command(flatten)]
        dust: DustArgs,
    },
    /// Attenuation uncertainty budget.
    Errprop {
        #[arg(long, default_value_t = 1.0e12)]
        freq: f64,
        /// Concentration, m⁻³.
        #[arg(long, default_value_t = 1.0e8)]
        n: f64,
        #[command(flatten)]
        dust: DustArgs,
        /// Monte Carlo draws; 0 skips the check.
        #[arg(long, default_value_t = 0)]
        mc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print a CSV sweep `start,stop,count` in Hz (log spaced) instead.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Read an MDSD-GRID v1 CDOD file.
    Ingest {
        #[arg(long)]
        check: PathBuf,
    },
}

#[derive(clap::Args)]
struct DustArgs {
    /// m.
    #[arg(long, default_value_t = 4.0e-6)]
    radius: f64,
    #[arg(long, default_value_t = 1.55)]
    eps_real: f64,
    #[arg(long, default_value_t = 6.3)]
    eps_imag: f64,
}

impl DustArgs {
    fn params(&self) -> Result<DustParams, Failure> {
        DustParams::new(self.radius, self.eps_real, self.eps_imag).map_err(|e| Failure::config(e.to_string()))
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Config(_) => EXIT_CONFIG,
            PipelineError::Data(_) => EXIT_DATA,
            PipelineError::Output(_) => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn simulate(config: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut scenario = Scenario::load(&config).map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    if let Some(dir) = out {
        scenario.output_dir = dir;
    }
    let summary = run_scenario(&scenario)?;
    println!(
        "{} rows, {} failed cells, {:.1} s, output in {}",
        summary.rows.len(),
        summary.failures.len(),
        summary.wall_time_s,
        scenario.output_dir.display()
    );
    for f in &summary.failures {
        let method = f.method.map_or_else(|| "-".to_string(), |m| m.to_string());
        eprintln!("failed: {} n={} seed={} method={method}: {}", f.season.name(), f.node_count, f.seed, f.error);
    }
    Ok(())
}

fn attenuation(
    freq: f64,
    temp: f64,
    pressure: f64,
    catalog: Option<PathBuf>,
    composition: &str,
    partition_table: Option<PathBuf>,
) -> Result<(), Failure> {
    if !(freq > 0.0) {
        return Err(Failure::config(format!("frequency must be positive, got {freq}")));
    }
    let comp = parse_composition(composition).map_err(Failure::config)?;
    let gases: BTreeSet<u16> = comp.iter().map(|(g, _)| *g).collect();
    let atm = AtmosphereState::new(temp, pressure, comp.into_iter().map(|(g, q)| Constituent::gas(g, q)).collect())
        .map_err(|e| Failure::config(e.to_string()))?;
    let partition = match partition_table {
        None => PartitionModel::power_law(),
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
            PartitionModel::parse_table(&text).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?
        }
    };
    let lines = match &catalog {
        None => Vec::new(),
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
            parse_line_catalog(BufReader::new(file), &gases, (freq * 0.99, freq * 1.01))
                .map_err(|e| Failure::data(format!("{}: {e}", p.display())))?
        }
    };
    let k = absorption_coefficient(&atm, &lines, freq, &partition);
    println!("lines_in_window {}", lines.len());
    println!("k_per_m {k:.9e}");
    println!("db_per_km {:.9e}", db_per_km(k));
    Ok(())
}

fn invert(adust: f64, freq: f64, dust: &DustArgs) -> Result<(), Failure> {
    let params = dust.params()?;
    if !(adust >= 0.0 && adust.is_finite()) {
        return Err(Failure::config(format!("dust attenuation must be a nonnegative number, got {adust}")));
    }
    if !(freq > 0.0) {
        return Err(Failure::config(format!("frequency must be positive, got {freq}")));
    }
    let n = concentration_from_attenuation(adust, &params, freq);
    let v = visibility_or_clear(adust, &params, freq);
    println!("concentration_per_m3 {n:.9e}");
    if v.is_finite() {
        println!("visibility_km {v:.9e}");
    } else {
        println!("visibility_km inf");
    }
    Ok(())
}

fn errprop(freq: f64, n: f64, dust: &DustArgs, mc: usize, seed: u64, sweep: Option<String>) -> Result<(), Failure> {
    let params = dust.params()?;
    let medium = DustMedium::new(params, n).map_err(|e| Failure::config(e.to_string()))?;
    let budget = UncertaintyBudget::default();
    if let Some(spec) = sweep {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [a, b, c] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()).zip(c.parse::<usize>().ok()),
            _ => None,
        };
        let Some(((start, stop), count)) = parsed.filter(|((a, b), c)| *a > 0.0 && *b > *a && *c >= 2) else {
            return Err(Failure::config(format!("--sweep expects start,stop,count with 0 < start < stop, count ≥ 2; got {spec:?}")));
        };
        let ratio = (stop / start).ln() / (count - 1) as f64;
        let freqs: Vec<f64> = (0..count).map(|i| start * (ratio * i as f64).exp()).collect();
        print!("{}", frequency_sweep_csv(&medium, &budget, &freqs));
        return Ok(());
    }
    if !(freq > 0.0) {
        return Err(Failure::config(format!("frequency must be positive, got {freq}")));
    }
    let v = variance_components(&medium, freq, &budget);
    println!("attenuation_db_km {:.6e}", dust_attenuation(&medium, freq));
    println!("var_r {:.6e}", v.var_r);
    println!("var_n {:.6e}", v.var_n);
    println!("var_eps_real {:.6e}", v.var_eps_real);
    println!("var_eps_imag {:.6e}", v.var_eps_imag);
    println!("total_sigma {:.6e}", v.total_sigma);
    if mc > 0 {
        let r = monte_carlo_sigma(&medium, freq, &budget, mc, seed);
        println!("mc_sigma {:.6e}", r.sigma);
        println!("mc_rejection_rate {:.6e}", r.rejection_rate());
    }
    Ok(())
}

fn ingest(path: PathBuf) -> Result<(), Failure> {
    let grid = ingest_cdod_grid(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let valid: Vec<f64> = grid.values.iter().zip(&grid.valid).filter(|(_, ok)| **ok).map(|(v, _)| *v).collect();
    let e = grid.spec.extent;
    println!("shape {} x {}", grid.spec.nx, grid.spec.ny);
    println!("extent_km {} {} {} {}", e.xmin, e.xmax, e.ymin, e.ymax);
    println!("valid_cells {} of {}", valid.len(), grid.values.len());
    if !valid.is_empty() {
        let min = valid.iter().copied().fold(f64::INFINITY, f64::min);
        let max = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let conv = CdodConversion::default();
        println!("cdod_range {min} {max}");
        println!(
            "concentration_range_per_m3 {:.6e} {:.6e}",
            concentration_from_cdod(min, &conv),
            concentration_from_cdod(max, &conv)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Attenuation { freq, temp, pressure, catalog, composition, partition_table } => {
            attenuation(freq, temp, pressure, catalog, &composition, partition_table)
        }
        Command::Invert { adust, freq, dust } => invert(adust, freq, &dust),
        Command::Errprop { freq, n, dust, mc, seed, sweep } => errprop(freq, n, &dust, mc, seed, sweep),
        Command::Ingest { check } => ingest(check),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            log::debug!("exit code {}", f.code);
            ExitCode::from(f.code)
        }
    }
}
