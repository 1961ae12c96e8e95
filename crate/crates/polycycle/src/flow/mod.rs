//! Phase-space machinery: adaptive integration with section events, saddle
//! location, separatrix shooting, transition and return maps, and Dulac
//! exponent fits.

mod integrate;
mod maps;
pub(crate) mod rk;
mod saddle;

use serde::{Deserialize, Serialize};

use crate::polyalg::{Point2, Vec2};
use crate::real::{Precision, Real};

pub(crate) use integrate::{drive, Flow};
pub use integrate::{
    integrate, integrate_events, Crossing, EventHit, EventSpec, IntegrationResult,
};
pub use maps::{
    estimate_dulac_exponent, geometric_values, return_map, shoot_separatrix, transition_map,
    transition_map_reversed, DulacEstimate, ReturnResult, ShotOptions, ShotResult,
};
pub use saddle::{find_saddle, find_saddle_with, Branch, Saddle};

/// Segment `base + s·direction`, |s| ≤ half_width, used as a transversal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub base: Point2,
    pub direction: Vec2,
    pub half_width: f64,
}

impl Section {
    pub fn new(base: Point2, direction: Vec2, half_width: f64) -> Self {
        let l = direction[0].hypot(direction[1]);
        Section {
            base,
            direction: [direction[0] / l, direction[1] / l],
            half_width,
        }
    }

    pub fn point(&self, s: f64) -> Point2 {
        [
            self.base[0] + s * self.direction[0],
            self.base[1] + s * self.direction[1],
        ]
    }

    pub(crate) fn point_t<T: Real>(&self, s: f64) -> [T; 2] {
        let s = T::from_f64(s);
        [
            T::from_f64(self.base[0]) + s * T::from_f64(self.direction[0]),
            T::from_f64(self.base[1]) + s * T::from_f64(self.direction[1]),
        ]
    }

    /// Normal of the section line; positive side lies ahead when the field
    /// at the base is −perp(direction), as for builder sections.
    pub fn normal(&self) -> Vec2 {
        [self.direction[1], -self.direction[0]]
    }

    /// Signed coordinate along the section.
    pub fn coord(&self, x: Point2) -> f64 {
        self.coord_t::<f64>([x[0], x[1]])
    }

    pub(crate) fn coord_t<T: Real>(&self, x: [T; 2]) -> f64 {
        let dx = x[0] - T::from_f64(self.base[0]);
        let dy = x[1] - T::from_f64(self.base[1]);
        (dx * T::from_f64(self.direction[0]) + dy * T::from_f64(self.direction[1])).to_f64()
    }

    /// Signed distance to the section line.
    pub(crate) fn offset_t<T: Real>(&self, x: [T; 2]) -> f64 {
        let n = self.normal();
        let dx = x[0] - T::from_f64(self.base[0]);
        let dy = x[1] - T::from_f64(self.base[1]);
        (dx * T::from_f64(n[0]) + dy * T::from_f64(n[1])).to_f64()
    }

    /// Same segment with the opposite normal, for flows through it the other way.
    pub fn flipped(&self) -> Section {
        Section {
            base: self.base,
            direction: [-self.direction[0], -self.direction[1]],
            half_width: self.half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Point2>,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
    /// Event localization tolerance on the signed distance to the section line.
    pub event_tol: f64,
    pub precision: Precision,
    /// Speed below which the orbit counts as stalled near a singular point.
    pub stagnation_speed: f64,
    /// Time an orbit may stay stalled before the run is aborted.
    pub stagnation_time: f64,
    /// Orbits leaving this disc are reported as escaped.
    pub escape_radius: f64,
    pub record: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 10_000_000,
            h_max: 0.5,
            event_tol: 1e-12,
            precision: Precision::Double,
            stagnation_speed: 1e-13,
            stagnation_time: 1e3,
            escape_radius: 1e3,
            record: false,
        }
    }
}

impl IntegratorOptions {
    pub fn with_precision(mut self, p: Precision) -> Self {
        self.precision = p;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }
}
