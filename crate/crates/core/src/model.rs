//! Network entities shared by the radio, protocol and simulation layers.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2D, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MsId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FapId(pub u32);

impl fmt::Display for MsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessMode {
    /// Anyone may attach.
    Open,
    /// Only members of the closed subscriber group may attach.
    Closed(BTreeSet<MsId>),
}

/// Which element a FAP's signaling goes through to reach the RNC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attachment {
    Fgw,
    Rnc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemtoAccessPoint {
    pub id: FapId,
    pub center: Point2D,
    pub radius: f64,
    pub tx_dbm: f64,
    pub access: AccessMode,
    pub attachment: Attachment,
}

impl FemtoAccessPoint {
    pub fn new(id: FapId, center: Point2D, radius: f64, tx_dbm: f64, access: AccessMode) -> Self {
        Self {
            id,
            center,
            radius,
            tx_dbm,
            access,
            attachment: Attachment::Fgw,
        }
    }

    /// A closed FAP whose subscriber group is `members`.
    pub fn closed(
        id: FapId,
        center: Point2D,
        radius: f64,
        tx_dbm: f64,
        members: impl IntoIterator<Item = MsId>,
    ) -> Self {
        Self::new(
            id,
            center,
            radius,
            tx_dbm,
            AccessMode::Closed(members.into_iter().collect()),
        )
    }

    pub fn register(&mut self, ms: MsId) {
        if let AccessMode::Closed(members) = &mut self.access {
            members.insert(ms);
        }
    }

    pub fn admits(&self, ms: MsId) -> bool {
        match &self.access {
            AccessMode::Open => true,
            AccessMode::Closed(members) => members.contains(&ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Serving {
    Macro,
    Femto(FapId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileStation {
    pub id: MsId,
    pub trajectory: Trajectory,
    pub call_end_time: f64,
    pub serving: Serving,
    /// FAPs whose subscriber group lists this station.
    pub memberships: BTreeSet<FapId>,
}

impl MobileStation {
    pub fn new(id: MsId, trajectory: Trajectory, call_end_time: f64) -> Self {
        Self {
            id,
            trajectory,
            call_end_time,
            serving: Serving::Macro,
            memberships: BTreeSet::new(),
        }
    }
}
