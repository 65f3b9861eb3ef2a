//! Simulation configuration and its flat `key: value` document form.
//!
//! Every key is optional; missing keys take the defaults below, which follow
//! the reference scenario (100 FAPs, 10 m circular coverage, 0.9 km/h mean
//! speed, 90 s mean call life after handover). Unknown keys are rejected.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cac::CacPolicy;
use crate::protocol::TopologyKind;
use crate::radio::PathLossModel;

/// Windows for the unnecessary-handover rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationWindows {
    /// A return to the macrocell sooner than this after admission is unnecessary.
    pub return_window_s: f64,
    /// A call ending sooner than this after admission is unnecessary.
    pub terminate_window_s: f64,
}

impl Default for ClassificationWindows {
    fn default() -> Self {
        Self {
            return_window_s: 60.0,
            terminate_window_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub fap_count: usize,
    /// FAPs sit on a square grid centered on the macro Node B.
    pub fap_spacing_m: f64,
    pub femto_radius_m: f64,
    pub fap_tx_dbm: f64,
    pub fap_capacity: usize,
    pub mean_speed_mps: f64,
    /// Sampled speeds are clamped up to this value.
    pub min_speed_mps: f64,
    pub mean_call_life_after_ho_s: f64,
    pub offered_calls: usize,
    /// Call `i` starts at `i * call_interval_s`.
    pub call_interval_s: f64,
    /// How far outside the coverage circle each trajectory begins.
    pub approach_margin_m: f64,
    /// Probability that a caller is registered at the FAP it walks through.
    pub csg_probability: f64,
    pub scan_radius_m: f64,
    /// The femtocell releases a call once its signal falls this far below
    /// the admission threshold (or the station leaves coverage).
    pub exit_hysteresis_db: f64,
    pub cac: CacPolicy,
    pub topology: TopologyKind,
    pub hop_latency_s: f64,
    pub femto_path_loss: PathLossModel,
    pub macro_tx_dbm: f64,
    pub macro_path_loss: PathLossModel,
    pub noise_floor_dbm: f64,
    /// Neighbor FAPs within this distance of a candidate interfere with it.
    pub interference_radius_m: f64,
    pub classification: ClassificationWindows,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fap_count: 100,
            fap_spacing_m: 40.0,
            femto_radius_m: 10.0,
            fap_tx_dbm: 10.0,
            fap_capacity: 4,
            mean_speed_mps: 0.25,
            min_speed_mps: 0.01,
            mean_call_life_after_ho_s: 90.0,
            offered_calls: 10_000,
            call_interval_s: 1.0,
            approach_margin_m: 5.0,
            csg_probability: 1.0,
            scan_radius_m: 100.0,
            exit_hysteresis_db: 30.0,
            cac: CacPolicy::DEFAULT,
            topology: TopologyKind::Concentrator,
            hop_latency_s: 0.01,
            femto_path_loss: PathLossModel::DEFAULT_FEMTO,
            macro_tx_dbm: 43.0,
            macro_path_loss: PathLossModel::DEFAULT_MACRO,
            noise_floor_dbm: -104.0,
            interference_radius_m: 50.0,
            classification: ClassificationWindows::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("invalid config:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Malformed(_) => &[],
        }
    }
}

#[derive(Default)]
struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, ok: bool, field: &'static str, message: impl Into<String>) {
        if !ok {
            self.violations.push(Violation {
                field,
                message: message.into(),
            });
        }
    }

    fn positive(&mut self, field: &'static str, v: f64) {
        self.check(
            v > 0.0 && v.is_finite(),
            field,
            format!("must be positive and finite, got {v}"),
        );
    }

    fn non_negative(&mut self, field: &'static str, v: f64) {
        self.check(
            v >= 0.0 && v.is_finite(),
            field,
            format!("must be non-negative and finite, got {v}"),
        );
    }

    fn finite(&mut self, field: &'static str, v: f64) {
        self.check(v.is_finite(), field, format!("must be finite, got {v}"));
    }

    fn at_least_one(&mut self, field: &'static str, v: usize) {
        self.check(v >= 1, field, "must be at least 1");
    }
}

impl SimConfig {
    /// Checks every field and reports all violations together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker::default();
        c.at_least_one("fap_count", self.fap_count);
        c.at_least_one("offered_calls", self.offered_calls);
        c.at_least_one("fap_capacity", self.fap_capacity);
        c.positive("fap_spacing_m", self.fap_spacing_m);
        c.positive("femto_radius_m", self.femto_radius_m);
        c.finite("fap_tx_dbm", self.fap_tx_dbm);
        c.positive("mean_speed_mps", self.mean_speed_mps);
        c.positive("min_speed_mps", self.min_speed_mps);
        c.check(
            self.min_speed_mps < self.mean_speed_mps,
            "min_speed_mps",
            "must be below mean_speed_mps",
        );
        c.positive("mean_call_life_after_ho_s", self.mean_call_life_after_ho_s);
        c.positive("call_interval_s", self.call_interval_s);
        c.non_negative("approach_margin_m", self.approach_margin_m);
        c.check(
            (0.0..=1.0).contains(&self.csg_probability),
            "csg_probability",
            format!("must lie in [0, 1], got {}", self.csg_probability),
        );
        c.positive("scan_radius_m", self.scan_radius_m);
        c.non_negative("exit_hysteresis_db", self.exit_hysteresis_db);
        c.finite("rsl_threshold_dbm", self.cac.rsl_threshold_dbm);
        c.non_negative("threshold_time_s", self.cac.threshold_time_s);
        c.check(
            !self.cac.es_io_floor_db.is_nan() && self.cac.es_io_floor_db != f64::INFINITY,
            "es_io_floor_db",
            format!(
                "must be a number below +inf, got {}",
                self.cac.es_io_floor_db
            ),
        );
        c.positive("sampling_interval_s", self.cac.sampling_interval_s);
        c.positive("hop_latency_s", self.hop_latency_s);
        for ((r, e, w), m) in [
            (
                (
                    "femto_reference_loss_db",
                    "femto_exponent",
                    "femto_wall_loss_db",
                ),
                &self.femto_path_loss,
            ),
            (
                (
                    "macro_reference_loss_db",
                    "macro_exponent",
                    "macro_wall_loss_db",
                ),
                &self.macro_path_loss,
            ),
        ] {
            c.positive(r, m.reference_loss_db);
            c.positive(e, m.exponent);
            c.non_negative(w, m.wall_loss_db);
        }
        c.finite("macro_tx_dbm", self.macro_tx_dbm);
        c.finite("noise_floor_dbm", self.noise_floor_dbm);
        c.positive("interference_radius_m", self.interference_radius_m);
        c.positive("return_window_s", self.classification.return_window_s);
        c.positive("terminate_window_s", self.classification.terminate_window_s);
        if c.violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(c.violations))
        }
    }

    pub fn with_threshold_time(mut self, t: f64) -> Self {
        self.cac.threshold_time_s = t;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// On-disk form: one flat, optional key per tunable.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    fap_count: Option<usize>,
    fap_spacing_m: Option<f64>,
    femto_radius_m: Option<f64>,
    fap_tx_dbm: Option<f64>,
    fap_capacity: Option<usize>,
    mean_speed_mps: Option<f64>,
    min_speed_mps: Option<f64>,
    mean_call_life_after_ho_s: Option<f64>,
    offered_calls: Option<usize>,
    call_interval_s: Option<f64>,
    approach_margin_m: Option<f64>,
    csg_probability: Option<f64>,
    scan_radius_m: Option<f64>,
    exit_hysteresis_db: Option<f64>,
    rsl_threshold_dbm: Option<f64>,
    threshold_time_s: Option<f64>,
    es_io_floor_db: Option<f64>,
    sampling_interval_s: Option<f64>,
    topology: Option<TopologyName>,
    hop_latency_s: Option<f64>,
    femto_reference_loss_db: Option<f64>,
    femto_exponent: Option<f64>,
    femto_wall_loss_db: Option<f64>,
    macro_tx_dbm: Option<f64>,
    macro_reference_loss_db: Option<f64>,
    macro_exponent: Option<f64>,
    macro_wall_loss_db: Option<f64>,
    noise_floor_dbm: Option<f64>,
    interference_radius_m: Option<f64>,
    return_window_s: Option<f64>,
    terminate_window_s: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TopologyName {
    Concentrator,
    DirectRnc,
}

impl From<TopologyName> for TopologyKind {
    fn from(t: TopologyName) -> Self {
        match t {
            TopologyName::Concentrator => TopologyKind::Concentrator,
            TopologyName::DirectRnc => TopologyKind::DirectRnc,
        }
    }
}

impl From<TopologyKind> for TopologyName {
    fn from(t: TopologyKind) -> Self {
        match t {
            TopologyKind::Concentrator => TopologyName::Concentrator,
            TopologyKind::DirectRnc => TopologyName::DirectRnc,
        }
    }
}

impl ConfigDocument {
    fn into_config(self) -> SimConfig {
        let mut c = SimConfig::default();
        macro_rules! apply {
            ($($key:ident => $($target:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$key { c.$($target).+ = v.into(); })*
            };
        }
        apply! {
            fap_count => fap_count,
            fap_spacing_m => fap_spacing_m,
            femto_radius_m => femto_radius_m,
            fap_tx_dbm => fap_tx_dbm,
            fap_capacity => fap_capacity,
            mean_speed_mps => mean_speed_mps,
            min_speed_mps => min_speed_mps,
            mean_call_life_after_ho_s => mean_call_life_after_ho_s,
            offered_calls => offered_calls,
            call_interval_s => call_interval_s,
            approach_margin_m => approach_margin_m,
            csg_probability => csg_probability,
            scan_radius_m => scan_radius_m,
            exit_hysteresis_db => exit_hysteresis_db,
            rsl_threshold_dbm => cac.rsl_threshold_dbm,
            threshold_time_s => cac.threshold_time_s,
            es_io_floor_db => cac.es_io_floor_db,
            sampling_interval_s => cac.sampling_interval_s,
            topology => topology,
            hop_latency_s => hop_latency_s,
            femto_reference_loss_db => femto_path_loss.reference_loss_db,
            femto_exponent => femto_path_loss.exponent,
            femto_wall_loss_db => femto_path_loss.wall_loss_db,
            macro_tx_dbm => macro_tx_dbm,
            macro_reference_loss_db => macro_path_loss.reference_loss_db,
            macro_exponent => macro_path_loss.exponent,
            macro_wall_loss_db => macro_path_loss.wall_loss_db,
            noise_floor_dbm => noise_floor_dbm,
            interference_radius_m => interference_radius_m,
            return_window_s => classification.return_window_s,
            terminate_window_s => classification.terminate_window_s,
            seed => seed,
        }
        c
    }

    fn from_config(c: &SimConfig) -> Self {
        Self {
            fap_count: Some(c.fap_count),
            fap_spacing_m: Some(c.fap_spacing_m),
            femto_radius_m: Some(c.femto_radius_m),
            fap_tx_dbm: Some(c.fap_tx_dbm),
            fap_capacity: Some(c.fap_capacity),
            mean_speed_mps: Some(c.mean_speed_mps),
            min_speed_mps: Some(c.min_speed_mps),
            mean_call_life_after_ho_s: Some(c.mean_call_life_after_ho_s),
            offered_calls: Some(c.offered_calls),
            call_interval_s: Some(c.call_interval_s),
            approach_margin_m: Some(c.approach_margin_m),
            csg_probability: Some(c.csg_probability),
            scan_radius_m: Some(c.scan_radius_m),
            exit_hysteresis_db: Some(c.exit_hysteresis_db),
            rsl_threshold_dbm: Some(c.cac.rsl_threshold_dbm),
            threshold_time_s: Some(c.cac.threshold_time_s),
            es_io_floor_db: Some(c.cac.es_io_floor_db),
            sampling_interval_s: Some(c.cac.sampling_interval_s),
            topology: Some(c.topology.into()),
            hop_latency_s: Some(c.hop_latency_s),
            femto_reference_loss_db: Some(c.femto_path_loss.reference_loss_db),
            femto_exponent: Some(c.femto_path_loss.exponent),
            femto_wall_loss_db: Some(c.femto_path_loss.wall_loss_db),
            macro_tx_dbm: Some(c.macro_tx_dbm),
            macro_reference_loss_db: Some(c.macro_path_loss.reference_loss_db),
            macro_exponent: Some(c.macro_path_loss.exponent),
            macro_wall_loss_db: Some(c.macro_path_loss.wall_loss_db),
            noise_floor_dbm: Some(c.noise_floor_dbm),
            interference_radius_m: Some(c.interference_radius_m),
            return_window_s: Some(c.classification.return_window_s),
            terminate_window_s: Some(c.classification.terminate_window_s),
            seed: Some(c.seed),
        }
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let value: serde_yaml::Value =
        serde_yaml::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    let doc = if value.is_null() {
        ConfigDocument::default()
    } else {
        serde_yaml::from_value::<ConfigDocument>(value)
            .map_err(|e| ConfigError::Malformed(e.to_string()))?
    };
    let config = doc.into_config();
    config.validate()?;
    Ok(config)
}

/// Writes every field, so the output does not depend on the defaults.
pub fn serialize_config(config: &SimConfig) -> String {
    serde_yaml::to_string(&ConfigDocument::from_config(config))
        .expect("flat config document always serializes")
}
