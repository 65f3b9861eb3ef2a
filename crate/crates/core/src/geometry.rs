//! Straight-line mobility through circular coverage areas.
//!
//! A mobile station moves at constant speed along a fixed heading. The
//! interesting quantities are where that line cuts a femtocell's coverage
//! circle and how long the station stays inside it.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} must be {requirement}, got {value}")]
    OutOfDomain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

pub(crate) fn require(
    ok: bool,
    name: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<(), DomainError> {
    if ok {
        Ok(())
    } else {
        Err(DomainError::OutOfDomain {
            name,
            requirement,
            value,
        })
    }
}

/// A position in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Constant-velocity straight-line motion starting at `start_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    origin: Point2D,
    heading: f64,
    speed: f64,
    start_time: f64,
}

impl Trajectory {
    /// Builds a trajectory; the heading is normalized into `[0, 2π)`.
    pub fn new(
        origin: Point2D,
        heading: f64,
        speed: f64,
        start_time: f64,
    ) -> Result<Self, DomainError> {
        require(
            origin.x.is_finite() && origin.y.is_finite(),
            "origin",
            "finite",
            if origin.x.is_finite() {
                origin.y
            } else {
                origin.x
            },
        )?;
        require(heading.is_finite(), "heading", "finite", heading)?;
        require(speed.is_finite() && speed > 0.0, "speed", "positive", speed)?;
        require(
            start_time.is_finite() && start_time >= 0.0,
            "start_time",
            "non-negative",
            start_time,
        )?;
        let mut heading = heading.rem_euclid(TAU);
        if heading >= TAU {
            heading = 0.0;
        }
        Ok(Self {
            origin,
            heading,
            speed,
            start_time,
        })
    }

    pub fn origin(&self) -> Point2D {
        self.origin
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    fn direction(&self) -> (f64, f64) {
        let (sin, cos) = self.heading.sin_cos();
        (cos, sin)
    }

    pub fn position_at(&self, t: f64) -> Result<Point2D, DomainError> {
        require(
            t >= self.start_time,
            "t",
            "at or after the trajectory start",
            t,
        )?;
        let travelled = self.speed * (t - self.start_time);
        let (ux, uy) = self.direction();
        Ok(Point2D::new(
            self.origin.x + travelled * ux,
            self.origin.y + travelled * uy,
        ))
    }

    /// Where this trajectory cuts the circle of `radius` around `center`.
    ///
    /// Returns `None` when the ray misses the circle or has already left it
    /// at `start_time`. If the origin is inside, the entry is clamped to the
    /// start time and `chord_length` covers only the remaining part.
    pub fn intersect(&self, center: Point2D, radius: f64) -> Option<CoverageCrossing> {
        if radius.is_nan() || radius <= 0.0 {
            return None;
        }
        let (ux, uy) = self.direction();
        let px = self.origin.x - center.x;
        let py = self.origin.y - center.y;
        let along = px * ux + py * uy;
        let offset = (px * uy - py * ux).abs();
        let disc = along * along - (px * px + py * py - radius * radius);
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let s_exit = -along + root;
        if s_exit < 0.0 {
            return None;
        }
        let s_entry = (-along - root).max(0.0);
        let entry_time = self.start_time + s_entry / self.speed;
        let exit_time = self.start_time + s_exit / self.speed;
        Some(CoverageCrossing {
            entry_time,
            exit_time,
            chord_offset: offset.min(radius),
            chord_length: self.speed * (exit_time - entry_time),
        })
    }
}

/// One pass of a trajectory through a coverage circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCrossing {
    pub entry_time: f64,
    pub exit_time: f64,
    /// Perpendicular distance from the circle center to the line of travel.
    pub chord_offset: f64,
    /// Distance travelled inside the circle after the trajectory start.
    pub chord_length: f64,
}

impl CoverageCrossing {
    pub fn dwell(&self) -> f64 {
        self.exit_time - self.entry_time
    }
}

/// Length of the chord cut by a line at `offset` from the center of a circle.
pub fn chord_length(offset: f64, radius: f64) -> Result<f64, DomainError> {
    require(offset >= 0.0, "offset", "non-negative", offset)?;
    require(radius > 0.0, "radius", "positive", radius)?;
    if offset >= radius {
        return Ok(0.0);
    }
    Ok(2.0 * (radius * radius - offset * offset).sqrt())
}

pub fn dwell_time(chord: f64, speed: f64) -> Result<f64, DomainError> {
    require(chord >= 0.0, "chord", "non-negative", chord)?;
    require(speed > 0.0, "speed", "positive", speed)?;
    Ok(chord / speed)
}

/// Converts km/h to m/s.
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}
