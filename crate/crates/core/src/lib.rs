//! Macrocell/femtocell handover simulation.
//!
//! The crate models mobile stations walking through closed-access femtocells
//! under macro coverage, an admission gate that waits for a sustained strong
//! signal before handing over, the signaling exchanged on the way in and out,
//! and the bookkeeping that labels each handover as necessary or not.
//!
//! [`engine::run`] is the entry point for a single seeded run and
//! [`sweep::sweep`] repeats it over admission wait times and seeds.

pub mod cac;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod radio;
pub mod rng;
pub mod sweep;

pub use cac::{CacDecision, CacPolicy, CacState, RejectReason};
pub use config::{parse_config, serialize_config, ClassificationWindows, ConfigError, SimConfig};
pub use engine::{run, EventKind, RunLog, SimError};
pub use geometry::{CoverageCrossing, DomainError, Point2D, Trajectory};
pub use metrics::{
    aggregate, classify_handover, Classification, Denominator, HandoverRecord, SweepRow,
    SweepSummary,
};
pub use model::{AccessMode, Attachment, FapId, FemtoAccessPoint, MobileStation, MsId, Serving};
pub use protocol::{Direction, NetworkTopology, TopologyKind};
pub use radio::{Measurement, PathLossModel};
