//! Simulator for sensing Martian dust storms from THz link attenuation.
//!
//! The crate covers the forward model (molecular absorption in [`spectra`],
//! dust extinction in [`dustphys`], link synthesis in [`channel`]), the
//! network layout ([`network`]), and the inverse pipeline: storm detection
//! ([`detect`]), attenuation inversion, spatial interpolation ([`interp`]),
//! uncertainty propagation ([`errprop`]) and scoring ([`evalx`]). The
//! [`scenario`] and [`pipeline`] modules tie these together for batch runs.

pub mod channel;
pub mod constants;
pub mod detect;
pub mod dustphys;
pub mod errprop;
pub mod evalx;
pub mod grid;
pub mod interp;
pub mod network;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod spectra;
pub mod synth;

use serde::{Deserialize, Serialize};

/// Position on the surface plane, km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    /// Point a fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}
