//! Partition-function ratio Q(T₀)/Q(T).
//!
//! Tabulated values are used where an isotopologue has a table; everything
//! else falls back to the rotational power law (T₀/T)^β with β = 1 for linear
//! molecules and 1.5 for the rest.

use std::collections::BTreeMap;

use super::SpectraError;
use crate::constants::T_REF;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    Table,
    PowerLaw,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionModel {
    tables: BTreeMap<(u16, u16), Vec<(f64, f64)>>,
    exponent: Option<f64>,
}

/// β for the power-law fallback.
pub fn default_power_law_exponent(molecule_id: u16) -> f64 {
    match molecule_id {
        // CO2, N2O, CO, O2, NO, OH, HF, HCl, HBr, HI, OCS, N2, HCN, C2H2, H2
        2 | 4 | 5 | 7 | 8 | 13 | 14 | 15 | 16 | 17 | 19 | 22 | 23 | 26 | 45 => 1.0,
        _ => 1.5,
    }
}

impl PartitionModel {
    /// Power law for every species with the per-molecule default β.
    pub fn power_law() -> Self {
        Self::default()
    }

    /// Power law with one β for every species.
    pub fn power_law_with_exponent(beta: f64) -> Result<Self, SpectraError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(SpectraError::PartitionTable {
                line: 0,
                reason: format!("power-law exponent must be positive, got {beta}"),
            });
        }
        Ok(Self { tables: BTreeMap::new(), exponent: Some(beta) })
    }

    /// Adds a (T, Q) table for one isotopologue. Temperatures must be
    /// strictly increasing and Q positive.
    pub fn with_table(
        mut self,
        molecule_id: u16,
        isotopologue_id: u16,
        points: Vec<(f64, f64)>,
    ) -> Result<Self, SpectraError> {
        validate_table(&points).map_err(|reason| SpectraError::PartitionTable { line: 0, reason })?;
        self.tables.insert((molecule_id, isotopologue_id), points);
        Ok(self)
    }

    /// Parses a table file of `mol:iso T Q` lines; `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self, SpectraError> {
        let mut tables: BTreeMap<(u16, u16), Vec<(f64, f64)>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |reason: String| SpectraError::PartitionTable { line: line_no, reason };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", fields.len())));
            }
            let (mol, iso) = fields[0]
                .split_once(':')
                .ok_or_else(|| err(format!("bad isotopologue key {:?}", fields[0])))?;
            let mol: u16 = mol.parse().map_err(|_| err(format!("bad molecule id {mol:?}")))?;
            let iso: u16 = iso.parse().map_err(|_| err(format!("bad isotopologue id {iso:?}")))?;
            let t: f64 = fields[1].parse().map_err(|_| err(format!("bad temperature {:?}", fields[1])))?;
            let q: f64 = fields[2].parse().map_err(|_| err(format!("bad Q value {:?}", fields[2])))?;
            let table = tables.entry((mol, iso)).or_default();
            if let Some(&(last_t, _)) = table.last() {
                if !(t > last_t) {
                    return Err(err(format!("temperature {t} not above previous {last_t}")));
                }
            }
            if !(q > 0.0 && q.is_finite() && t > 0.0) {
                return Err(err("T and Q must be positive".into()));
            }
            table.push((t, q));
        }
        for points in tables.values() {
            validate_table(points).map_err(|reason| SpectraError::PartitionTable { line: 0, reason })?;
        }
        Ok(Self { tables, exponent: None })
    }

    pub fn mode_for(&self, molecule_id: u16, isotopologue_id: u16) -> PartitionMode {
        if self.tables.contains_key(&(molecule_id, isotopologue_id)) {
            PartitionMode::Table
        } else {
            PartitionMode::PowerLaw
        }
    }

    /// Q(296 K)/Q(T).
    pub fn q_ratio(&self, molecule_id: u16, isotopologue_id: u16, t: f64) -> f64 {
        match self.tables.get(&(molecule_id, isotopologue_id)) {
            Some(points) => interpolate(points, T_REF) / interpolate(points, t),
            None => {
                let beta = self.exponent.unwrap_or_else(|| default_power_law_exponent(molecule_id));
                (T_REF / t).powf(beta)
            }
        }
    }
}

fn validate_table(points: &[(f64, f64)]) -> Result<(), String> {
    if points.len() < 2 {
        return Err("a partition table needs at least two points".into());
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err("table temperatures must be strictly increasing".into());
    }
    if points.iter().any(|&(t, q)| !(t > 0.0 && q > 0.0 && q.is_finite())) {
        return Err("table entries must be positive".into());
    }
    Ok(())
}

/// Piecewise-linear in T; end segments are extended outside the table.
fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    let i = match points.iter().position(|&(pt, _)| pt >= t) {
        Some(0) => 1,
        Some(i) => i,
        None => points.len() - 1,
    };
    let (t0, q0) = points[i - 1];
    let (t1, q1) = points[i];
    q0 + (q1 - q0) * (t - t0) / (t1 - t0)
}
