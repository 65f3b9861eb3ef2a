//! Log-distance propagation and signal-to-interference estimation.

use serde::{Deserialize, Serialize};

use crate::geometry::{require, DomainError, Point2D, Trajectory};
use crate::model::FemtoAccessPoint;

/// Log-distance path loss, referenced to 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub reference_loss_db: f64,
    pub exponent: f64,
    /// Extra penetration loss added on every link using this model.
    pub wall_loss_db: f64,
}

impl PathLossModel {
    pub const DEFAULT_FEMTO: PathLossModel = PathLossModel {
        reference_loss_db: 37.0,
        exponent: 3.0,
        wall_loss_db: 0.0,
    };

    pub const DEFAULT_MACRO: PathLossModel = PathLossModel {
        reference_loss_db: 37.0,
        exponent: 3.5,
        wall_loss_db: 10.0,
    };

    pub fn new(
        reference_loss_db: f64,
        exponent: f64,
        wall_loss_db: f64,
    ) -> Result<Self, DomainError> {
        require(
            reference_loss_db > 0.0 && reference_loss_db.is_finite(),
            "reference_loss_db",
            "positive",
            reference_loss_db,
        )?;
        require(
            exponent > 0.0 && exponent.is_finite(),
            "exponent",
            "positive",
            exponent,
        )?;
        require(
            wall_loss_db >= 0.0 && wall_loss_db.is_finite(),
            "wall_loss_db",
            "non-negative",
            wall_loss_db,
        )?;
        Ok(Self {
            reference_loss_db,
            exponent,
            wall_loss_db,
        })
    }

    pub fn loss_db(&self, distance: f64) -> f64 {
        let d = distance.max(1.0);
        self.reference_loss_db + 10.0 * self.exponent * d.log10() + self.wall_loss_db
    }

    /// Distance at which a transmitter at `tx_dbm` is received at exactly
    /// `level_dbm`. `None` when the level is above what is received at the
    /// 1 m reference distance.
    pub fn range_for_level(&self, tx_dbm: f64, level_dbm: f64) -> Option<f64> {
        let budget = tx_dbm - self.reference_loss_db - self.wall_loss_db - level_dbm;
        if budget < 0.0 || budget.is_nan() {
            return None;
        }
        Some(10f64.powf(budget / (10.0 * self.exponent)))
    }
}

/// Received power; distances below 1 m are treated as 1 m.
pub fn received_power_dbm(tx_dbm: f64, distance: f64, model: &PathLossModel) -> f64 {
    tx_dbm - model.loss_db(distance)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub tx_dbm: f64,
    pub position: Point2D,
    pub model: PathLossModel,
}

/// Everything that is not the serving signal: co-channel transmitters plus
/// thermal noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InterferenceField {
    pub contributors: Vec<Interferer>,
    pub noise_floor_dbm: f64,
}

impl InterferenceField {
    pub fn new(contributors: Vec<Interferer>, noise_floor_dbm: f64) -> Self {
        Self {
            contributors,
            noise_floor_dbm,
        }
    }

    /// Total interference plus noise at `at`, in milliwatts.
    pub fn total_mw(&self, at: Point2D) -> f64 {
        let interference: f64 = self
            .contributors
            .iter()
            .map(|c| {
                dbm_to_mw(received_power_dbm(
                    c.tx_dbm,
                    at.distance_to(c.position),
                    &c.model,
                ))
            })
            .sum();
        interference + dbm_to_mw(self.noise_floor_dbm)
    }
}

/// Es/I0 in dB: serving power over the summed interference and noise.
pub fn es_io_db(
    serving_dbm: f64,
    field: &InterferenceField,
    at: Point2D,
) -> Result<f64, DomainError> {
    let total = field.total_mw(at);
    require(
        total > 0.0 && total.is_finite(),
        "interference plus noise",
        "positive and finite",
        total,
    )?;
    Ok(serving_dbm - mw_to_dbm(total))
}

/// A measurement report sample for one candidate FAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub time: f64,
    pub rsl_dbm: f64,
    pub es_io_db: f64,
}

/// Measures the FAP signal as seen from `at`.
pub fn measure(
    time: f64,
    at: Point2D,
    fap: &FemtoAccessPoint,
    model: &PathLossModel,
    field: &InterferenceField,
) -> Result<Measurement, DomainError> {
    let rsl_dbm = received_power_dbm(fap.tx_dbm, at.distance_to(fap.center), model);
    Ok(Measurement {
        time,
        rsl_dbm,
        es_io_db: es_io_db(rsl_dbm, field, at)?,
    })
}

/// Samples at `t0, t0 + interval, ...` up to and including `t1`.
pub fn sample_measurements(
    trajectory: &Trajectory,
    fap: &FemtoAccessPoint,
    model: &PathLossModel,
    field: &InterferenceField,
    interval: f64,
    window: (f64, f64),
) -> Result<Vec<Measurement>, DomainError> {
    let (t0, t1) = window;
    require(interval > 0.0, "interval", "positive", interval)?;
    require(t1 >= t0, "window end", "at or after the window start", t1)?;
    // 1e-9 keeps a sample that lands on t1 up to rounding.
    let count = ((t1 - t0) / interval + 1e-9).floor() as u64;
    (0..=count)
        .map(|k| {
            let t = t0 + k as f64 * interval;
            measure(t, trajectory.position_at(t)?, fap, model, field)
        })
        .collect()
}
