//! Fixed-width HITRAN 2004 (`.par`) line records.
//!
//! Only the molecule id (cols 1–2), isotopologue id (col 3), wavenumber
//! (cols 4–15), intensity (cols 16–25) and lower-state energy (cols 46–55)
//! are read; the remaining columns are ignored.

use std::collections::BTreeSet;
use std::io::BufRead;

use super::{molar_mass_of, SpectraError, SpectralLine};

pub const HITRAN_RECORD_WIDTH: usize = 160;

/// Reads catalog records, keeping lines of the requested molecules whose
/// center frequency falls inside `freq_window` (Hz, inclusive). Catalog order
/// is preserved. Fully blank lines are skipped; record indices in errors are
/// 1-based line numbers.
pub fn parse_line_catalog<R: BufRead>(
    reader: R,
    gas_filter: &BTreeSet<u16>,
    freq_window: (f64, f64),
) -> Result<Vec<SpectralLine>, SpectraError> {
    let (lower, upper) = freq_window;
    if !(lower < upper) {
        return Err(SpectraError::InvalidWindow { lower, upper });
    }
    let mut lines = Vec::new();
    for (idx, raw) in reader.split(b'\n').enumerate() {
        let index = idx + 1;
        let mut raw = raw.map_err(|e| SpectraError::Io(e.to_string()))?;
        if raw.last() == Some(&b'\r') {
            raw.pop();
        }
        if raw.is_empty() {
            continue;
        }
        if let Some(line) = parse_record(&raw, index, gas_filter)? {
            if line.center_frequency >= lower && line.center_frequency <= upper {
                lines.push(line);
            }
        }
    }
    Ok(lines)
}

pub fn parse_line_catalog_str(
    text: &str,
    gas_filter: &BTreeSet<u16>,
    freq_window: (f64, f64),
) -> Result<Vec<SpectralLine>, SpectraError> {
    parse_line_catalog(text.as_bytes(), gas_filter, freq_window)
}

fn parse_record(
    raw: &[u8],
    index: usize,
    gas_filter: &BTreeSet<u16>,
) -> Result<Option<SpectralLine>, SpectraError> {
    let err = |reason: String| SpectraError::Parse { index, reason };
    if raw.len() != HITRAN_RECORD_WIDTH {
        return Err(err(format!(
            "expected {HITRAN_RECORD_WIDTH} characters, found {}",
            raw.len()
        )));
    }
    let record = std::str::from_utf8(raw)
        .ok()
        .filter(|s| s.is_ascii())
        .ok_or_else(|| err("record is not ASCII".into()))?;

    let field = |range: std::ops::Range<usize>, name: &str| -> Result<f64, SpectraError> {
        let text = record[range].trim();
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(format!("non-numeric {name} {text:?}")))
    };

    let mol_text = record[0..2].trim();
    let molecule_id: u16 = mol_text
        .parse()
        .map_err(|_| err(format!("non-numeric molecule id {mol_text:?}")))?;
    let isotopologue_id = match record.as_bytes()[2] {
        b'0' => 10,
        c @ b'1'..=b'9' => u16::from(c - b'0'),
        c @ b'A'..=b'Z' => u16::from(c - b'A') + 11,
        c => return Err(err(format!("bad isotopologue id {:?}", c as char))),
    };
    let wavenumber = field(3..15, "wavenumber")?;
    let intensity = field(15..25, "intensity")?;
    let lower_state = field(45..55, "lower-state energy")?;

    if !gas_filter.contains(&molecule_id) {
        return Ok(None);
    }
    let molar_mass = molar_mass_of(molecule_id)
        .ok_or_else(|| err(format!("no molar mass known for molecule {molecule_id}")))?;
    SpectralLine::from_catalog_units(
        molecule_id,
        isotopologue_id,
        wavenumber,
        intensity,
        lower_state,
        molar_mass,
    )
    .map(Some)
    .map_err(|e| err(e.to_string()))
}

/// Formats a minimal 160-column record; unread columns are blank.
pub fn format_record(
    molecule_id: u16,
    isotopologue_id: u16,
    wavenumber_cm: f64,
    intensity_cm: f64,
    lower_state_energy: f64,
) -> String {
    let iso = match isotopologue_id {
        10 => '0',
        i @ 1..=9 => char::from(b'0' + i as u8),
        i => char::from(b'A' + (i - 11) as u8),
    };
    let mut record = format!(
        "{molecule_id:>2}{iso}{wavenumber_cm:>12.6}{:>10}{:20}{lower_state_energy:>10.4}",
        format!("{intensity_cm:.3E}"),
        ""
    );
    record.push_str(&" ".repeat(HITRAN_RECORD_WIDTH - record.len()));
    record
}
