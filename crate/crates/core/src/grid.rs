//! Regular 2-D rasters with a validity mask, and the `MDSD-GRID v1` text
//! format.
//!
//! ```text
//! MDSD-GRID v1
//! nx ny xmin xmax ymin ymax
//! # optional metadata comments
//! v00,v10,...            <- row 0, the ymin edge
//! ...
//! ```
//!
//! `NaN` marks an invalid cell. Values sit at cell centers.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point;

pub const GRID_MAGIC: &str = "MDSD-GRID";
pub const GRID_VERSION: &str = "v1";

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("line 1: unsupported grid version {found:?} (expected \"MDSD-GRID v1\")")]
    Version { found: String },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite value {value:?}")]
    NonFinite { line: usize, value: String },
    #[error("grid shape mismatch: {0}")]
    Shape(String),
    #[error("{0}")]
    Io(String),
}

/// Axis-aligned rectangle in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Extent {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self, GridError> {
        let all_finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !all_finite || !(xmax > xmin) || !(ymax > ymin) {
            return Err(GridError::Shape(format!(
                "extent [{xmin}, {xmax}] x [{ymin}, {ymax}] is empty or non-finite"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// `[0, width] x [0, height]`.
    pub fn from_size(width: f64, height: f64) -> Result<Self, GridError> {
        Self::new(0.0, width, 0.0, height)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { xmin: self.xmin + dx, xmax: self.xmax + dx, ymin: self.ymin + dy, ymax: self.ymax + dy }
    }
}

/// Extent plus resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: Extent,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(extent: Extent, nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx == 0 || ny == 0 {
            return Err(GridError::Shape(format!("resolution {nx}x{ny} has no cells")));
        }
        Ok(Self { extent, nx, ny })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.extent.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.extent.height() / self.ny as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.extent.xmin + (i as f64 + 0.5) * self.dx(),
            self.extent.ymin + (j as f64 + 0.5) * self.dy(),
        )
    }

    /// Cell centers in storage order (row-major from the ymin edge).
    pub fn centers(&self) -> Vec<Point> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| self.cell_center(i, j))
            .collect()
    }
}

/// Raster of intensities with a per-cell validity mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl IntensityGrid {
    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Self { spec, values: vec![value; spec.len()], valid: vec![true; spec.len()] }
    }

    /// Builds a grid, marking non-finite values invalid.
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != spec.len() {
            return Err(GridError::Shape(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        let valid = values.iter().map(|v| v.is_finite()).collect();
        Ok(Self { spec, values, valid })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(Point) -> f64) -> Self {
        let values: Vec<f64> = spec.centers().into_iter().map(f).collect();
        let valid = values.iter().map(|v| v.is_finite()).collect();
        Self { spec, values, valid }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = self.spec.index(i, j);
        self.valid[idx].then(|| self.values[idx])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
            valid: self.valid.clone(),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Bilinear interpolation between cell centers; clamps to the outermost
    /// centers near the edges. `None` outside the extent. Invalid cells are
    /// not consulted, so the grid is expected to be fully valid.
    pub fn sample_bilinear(&self, p: Point) -> Option<f64> {
        if !self.spec.extent.contains(p) {
            return None;
        }
        let spec = &self.spec;
        let fx = ((p.x - spec.extent.xmin) / spec.dx() - 0.5).clamp(0.0, (spec.nx - 1) as f64);
        let fy = ((p.y - spec.extent.ymin) / spec.dy() - 0.5).clamp(0.0, (spec.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(spec.nx.saturating_sub(2));
        let j0 = (fy.floor() as usize).min(spec.ny.saturating_sub(2));
        let i1 = (i0 + 1).min(spec.nx - 1);
        let j1 = (j0 + 1).min(spec.ny - 1);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v = |i, j| self.values[spec.index(i, j)];
        let bottom = v(i0, j0) * (1.0 - tx) + v(i1, j0) * tx;
        let top = v(i0, j1) * (1.0 - tx) + v(i1, j1) * tx;
        Some(bottom * (1.0 - ty) + top * ty)
    }

    /// Cell-wise mean of equally shaped, fully valid frames.
    pub fn mean_of(frames: &[IntensityGrid]) -> Result<Self, GridError> {
        let first = frames.first().ok_or_else(|| GridError::Shape("no frames to average".into()))?;
        let mut acc = vec![0.0; first.spec.len()];
        for frame in frames {
            if frame.spec != first.spec {
                return Err(GridError::Shape("frames differ in shape".into()));
            }
            for (a, v) in acc.iter_mut().zip(&frame.values) {
                *a += v;
            }
        }
        let n = frames.len() as f64;
        Ok(Self {
            spec: first.spec,
            values: acc.into_iter().map(|a| a / n).collect(),
            valid: vec![true; first.spec.len()],
        })
    }

    /// Serializes to `MDSD-GRID v1`. `metadata` pairs become `# key: value`
    /// lines after the header.
    pub fn to_grid_text(&self, metadata: &[(&str, String)]) -> String {
        let s = &self.spec;
        let e = &s.extent;
        let mut out = format!(
            "{GRID_MAGIC} {GRID_VERSION}\n{} {} {} {} {} {}\n",
            s.nx, s.ny, e.xmin, e.xmax, e.ymin, e.ymax
        );
        for (key, value) in metadata {
            let _ = writeln!(out, "# {key}: {value}");
        }
        for j in 0..s.ny {
            let row: Vec<String> = (0..s.nx)
                .map(|i| match self.get(i, j) {
                    Some(v) => format!("{v}"),
                    None => "NaN".to_string(),
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_grid_text(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

        let (_, header) = lines
            .next()
            .ok_or_else(|| GridError::Malformed { line: 1, reason: "empty file".into() })?;
        let mut words = header.split_whitespace();
        if words.next() != Some(GRID_MAGIC) {
            return Err(GridError::Malformed { line: 1, reason: format!("not an MDSD-GRID file: {header:?}") });
        }
        match (words.next(), words.next()) {
            (Some(GRID_VERSION), None) => {}
            _ => return Err(GridError::Version { found: header.to_string() }),
        }

        let mut content = lines.filter(|(_, l)| !l.starts_with('#') && !l.is_empty());
        let (dim_line, dims) = content
            .next()
            .ok_or_else(|| GridError::Malformed { line: 2, reason: "missing dimension line".into() })?;
        let dims: Vec<&str> = dims.split_whitespace().collect();
        if dims.len() != 6 {
            return Err(GridError::Malformed {
                line: dim_line,
                reason: format!("expected 'nx ny xmin xmax ymin ymax', found {} fields", dims.len()),
            });
        }
        let bad_dim = |reason: String| GridError::Malformed { line: dim_line, reason };
        let nx: usize = dims[0].parse().map_err(|_| bad_dim(format!("bad nx {:?}", dims[0])))?;
        let ny: usize = dims[1].parse().map_err(|_| bad_dim(format!("bad ny {:?}", dims[1])))?;
        let mut bounds = [0.0; 4];
        for (b, text) in bounds.iter_mut().zip(&dims[2..]) {
            *b = text.parse().map_err(|_| bad_dim(format!("bad bound {text:?}")))?;
        }
        let extent = Extent::new(bounds[0], bounds[1], bounds[2], bounds[3])
            .map_err(|e| bad_dim(e.to_string()))?;
        let spec = GridSpec::new(extent, nx, ny).map_err(|e| bad_dim(e.to_string()))?;

        let mut values = Vec::with_capacity(spec.len());
        let mut valid = Vec::with_capacity(spec.len());
        let mut rows = 0;
        for (line, row) in content {
            rows += 1;
            if rows > ny {
                return Err(GridError::Malformed { line, reason: format!("more than {ny} rows") });
            }
            let cells: Vec<&str> = row.split(',').map(str::trim).collect();
            if cells.len() != nx {
                return Err(GridError::Ragged { line, expected: nx, found: cells.len() });
            }
            for cell in cells {
                if cell == "NaN" {
                    values.push(f64::NAN);
                    valid.push(false);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| GridError::Malformed {
                    line,
                    reason: format!("non-numeric value {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(GridError::NonFinite { line, value: cell.to_string() });
                }
                values.push(v);
                valid.push(true);
            }
        }
        if rows != ny {
            return Err(GridError::Malformed {
                line: text.lines().count(),
                reason: format!("expected {ny} rows, found {rows}"),
            });
        }
        Ok(Self { spec, values, valid })
    }

    pub fn read(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_grid_text(&text)
    }
}
