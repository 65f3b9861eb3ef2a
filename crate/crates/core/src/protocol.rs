//! Handover signaling between the macro and femto tiers.
//!
//! Both directions run a fixed, abstract message sequence over the selected
//! topology. With a concentrator every FAP reaches the RNC through the femto
//! gateway (FGW); in the direct layout the FAP talks to the RNC itself.
//!
//! Macrocell to femtocell, concentrator (12 messages):
//!
//! | #  | step | from  | to    | message                  |
//! |----|------|-------|-------|--------------------------|
//! | 1  | P1   | MS    | NodeB | MeasurementReport        |
//! | 2  | P1   | NodeB | RNC   | MeasurementReport        |
//! | 3  | P2   | RNC   | FGW   | RelocationRequest        |
//! | 4  | P3   | FGW   | FAP   | ResourceReservation      |
//! | 5  | P3   | FAP   | FGW   | ResourceReservationAck   |
//! | 6  | P3   | FGW   | RNC   | RelocationRequestAck     |
//! | 7  | E1   | RNC   | MS    | HandoverCommand          |
//! | 8  | E2   | MS    | FAP   | RrcReconfigurationComplete |
//! | 9  | E3   | FAP   | FGW   | RelocationComplete       |
//! | 10 | E3   | FGW   | RNC   | RelocationComplete       |
//! | 11 | E3   | RNC   | SGSN  | UpdatePdpContext         |
//! | 12 | E4   | RNC   | NodeB | RadioLinkRelease         |
//!
//! The access check runs at the FGW on receipt of message 3 and the FAP
//! reserves resources on receipt of message 4. The direct layout and the
//! reverse direction are listed in the tables below and in the README.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cac::CacDecision;
use crate::model::{FapId, FemtoAccessPoint, MobileStation, Serving};
use crate::radio::Measurement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Entity {
    Ms,
    NodeB,
    Rnc,
    Fgw,
    Fap,
    Sgsn,
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Entity::Ms => "MS",
            Entity::NodeB => "NodeB",
            Entity::Rnc => "RNC",
            Entity::Fgw => "FGW",
            Entity::Fap => "FAP",
            Entity::Sgsn => "SGSN",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    MeasurementReport,
    RelocationRequest,
    ResourceReservation,
    ResourceReservationAck,
    RelocationRequestAck,
    HandoverCommand,
    RrcReconfigurationComplete,
    RelocationComplete,
    UpdatePdpContext,
    RadioLinkRelease,
    RelocationRequired,
    RadioLinkSetup,
    IuRelease,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    /// Measurement report carrying the interference level.
    P1,
    /// Access authorization.
    P2,
    /// Resource reservation at the target.
    P3,
    /// Handover command.
    E1,
    /// Attach and RRC reconfiguration at the target.
    E2,
    /// Path switch.
    E3,
    /// Release of the source resources.
    E4,
}

impl Step {
    pub fn is_preparation(self) -> bool {
        matches!(self, Step::P1 | Step::P2 | Step::P3)
    }
}

/// Work the receiver of a message performs before the sequence continues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Authorize,
    Reserve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SequenceEntry {
    pub step: Step,
    pub from: Entity,
    pub to: Entity,
    pub message: MessageKind,
    pub checks: &'static [Check],
}

const fn msg(step: Step, from: Entity, to: Entity, message: MessageKind) -> SequenceEntry {
    SequenceEntry {
        step,
        from,
        to,
        message,
        checks: &[],
    }
}

const fn checked(
    step: Step,
    from: Entity,
    to: Entity,
    message: MessageKind,
    checks: &'static [Check],
) -> SequenceEntry {
    SequenceEntry {
        step,
        from,
        to,
        message,
        checks,
    }
}

use Entity::*;
use MessageKind as K;

pub const MACRO_TO_FEMTO_CONCENTRATOR: [SequenceEntry; 12] = [
    msg(Step::P1, Ms, NodeB, K::MeasurementReport),
    msg(Step::P1, NodeB, Rnc, K::MeasurementReport),
    checked(
        Step::P2,
        Rnc,
        Fgw,
        K::RelocationRequest,
        &[Check::Authorize],
    ),
    checked(
        Step::P3,
        Fgw,
        Fap,
        K::ResourceReservation,
        &[Check::Reserve],
    ),
    msg(Step::P3, Fap, Fgw, K::ResourceReservationAck),
    msg(Step::P3, Fgw, Rnc, K::RelocationRequestAck),
    msg(Step::E1, Rnc, Ms, K::HandoverCommand),
    msg(Step::E2, Ms, Fap, K::RrcReconfigurationComplete),
    msg(Step::E3, Fap, Fgw, K::RelocationComplete),
    msg(Step::E3, Fgw, Rnc, K::RelocationComplete),
    msg(Step::E3, Rnc, Sgsn, K::UpdatePdpContext),
    msg(Step::E4, Rnc, NodeB, K::RadioLinkRelease),
];

pub const MACRO_TO_FEMTO_DIRECT: [SequenceEntry; 9] = [
    msg(Step::P1, Ms, NodeB, K::MeasurementReport),
    msg(Step::P1, NodeB, Rnc, K::MeasurementReport),
    checked(
        Step::P2,
        Rnc,
        Fap,
        K::RelocationRequest,
        &[Check::Authorize, Check::Reserve],
    ),
    msg(Step::P3, Fap, Rnc, K::RelocationRequestAck),
    msg(Step::E1, Rnc, Ms, K::HandoverCommand),
    msg(Step::E2, Ms, Fap, K::RrcReconfigurationComplete),
    msg(Step::E3, Fap, Rnc, K::RelocationComplete),
    msg(Step::E3, Rnc, Sgsn, K::UpdatePdpContext),
    msg(Step::E4, Rnc, NodeB, K::RadioLinkRelease),
];

pub const FEMTO_TO_MACRO_CONCENTRATOR: [SequenceEntry; 8] = [
    msg(Step::P1, Ms, Fap, K::MeasurementReport),
    msg(Step::P1, Fap, Fgw, K::RelocationRequired),
    msg(Step::P1, Fgw, Rnc, K::RelocationRequired),
    msg(Step::P3, Rnc, NodeB, K::RadioLinkSetup),
    msg(Step::E1, Rnc, Ms, K::HandoverCommand),
    msg(Step::E3, Rnc, Sgsn, K::UpdatePdpContext),
    msg(Step::E4, Rnc, Fgw, K::IuRelease),
    msg(Step::E4, Fgw, Fap, K::IuRelease),
];

pub const FEMTO_TO_MACRO_DIRECT: [SequenceEntry; 6] = [
    msg(Step::P1, Ms, Fap, K::MeasurementReport),
    msg(Step::P1, Fap, Rnc, K::RelocationRequired),
    msg(Step::P3, Rnc, NodeB, K::RadioLinkSetup),
    msg(Step::E1, Rnc, Ms, K::HandoverCommand),
    msg(Step::E3, Rnc, Sgsn, K::UpdatePdpContext),
    msg(Step::E4, Rnc, Fap, K::IuRelease),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    /// FAPs reach the RNC through a femto gateway.
    Concentrator,
    /// FAPs are attached to the RNC like ordinary Node Bs.
    DirectRnc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    MacroToFemto,
    FemtoToMacro,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::MacroToFemto => "M2F",
            Direction::FemtoToMacro => "F2M",
        }
    }
}

pub fn sequence(direction: Direction, kind: TopologyKind) -> &'static [SequenceEntry] {
    match (direction, kind) {
        (Direction::MacroToFemto, TopologyKind::Concentrator) => &MACRO_TO_FEMTO_CONCENTRATOR,
        (Direction::MacroToFemto, TopologyKind::DirectRnc) => &MACRO_TO_FEMTO_DIRECT,
        (Direction::FemtoToMacro, TopologyKind::Concentrator) => &FEMTO_TO_MACRO_CONCENTRATOR,
        (Direction::FemtoToMacro, TopologyKind::DirectRnc) => &FEMTO_TO_MACRO_DIRECT,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("no latency configured for hop {0}-{1}")]
    MissingHop(Entity, Entity),
    #[error("hop {0}-{1} must have a positive latency, got {2}")]
    BadLatency(Entity, Entity, f64),
    #[error("macro to femto handover requires an Admit decision, got {0:?}")]
    NotAdmitted(CacDecision),
    #[error("station {ms} is not served by FAP {fap}")]
    NotServedBy { ms: u32, fap: FapId },
}

fn hop_key(a: Entity, b: Entity) -> (Entity, Entity) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Symmetric per-hop latencies for one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    kind: TopologyKind,
    latencies: BTreeMap<(Entity, Entity), f64>,
}

impl NetworkTopology {
    /// Every hop used by the topology's sequences gets `hop_latency_s`.
    pub fn uniform(kind: TopologyKind, hop_latency_s: f64) -> Result<Self, ProtocolError> {
        let mut latencies = BTreeMap::new();
        for dir in [Direction::MacroToFemto, Direction::FemtoToMacro] {
            for e in sequence(dir, kind) {
                latencies.insert(hop_key(e.from, e.to), hop_latency_s);
            }
        }
        let topo = Self { kind, latencies };
        topo.validate()?;
        Ok(topo)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn fgw_present(&self) -> bool {
        self.kind == TopologyKind::Concentrator
    }

    pub fn set_latency(&mut self, a: Entity, b: Entity, seconds: f64) -> Result<(), ProtocolError> {
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(ProtocolError::BadLatency(a, b, seconds));
        }
        self.latencies.insert(hop_key(a, b), seconds);
        Ok(())
    }

    pub fn latency(&self, a: Entity, b: Entity) -> Result<f64, ProtocolError> {
        self.latencies
            .get(&hop_key(a, b))
            .copied()
            .ok_or(ProtocolError::MissingHop(a, b))
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        for (&(a, b), &lat) in &self.latencies {
            if !(lat > 0.0 && lat.is_finite()) {
                return Err(ProtocolError::BadLatency(a, b, lat));
            }
        }
        let required: &[(Entity, Entity)] = match self.kind {
            TopologyKind::Concentrator => &[(Fap, Fgw), (Fgw, Rnc)],
            TopologyKind::DirectRnc => &[(Fap, Rnc)],
        };
        for &(a, b) in required {
            self.latency(a, b)?;
        }
        Ok(())
    }
}

/// Neighbor list of allowed FAPs within `scan_radius` of the station's
/// position at call start, nearest first, ties broken by id.
pub fn build_neighbor_list(
    ms: &MobileStation,
    faps: &[FemtoAccessPoint],
    scan_radius: f64,
) -> Vec<FapId> {
    let here = ms.trajectory.origin();
    let mut found: Vec<(f64, FapId)> = faps
        .iter()
        .filter(|f| check_access(ms, f))
        .map(|f| (f.center.distance_to(here), f.id))
        .filter(|&(d, _)| d <= scan_radius)
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.into_iter().map(|(_, id)| id).collect()
}

pub fn check_access(ms: &MobileStation, fap: &FemtoAccessPoint) -> bool {
    fap.admits(ms.id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    Unauthorized,
    NoResources,
    CallEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Preparation,
    Execution,
    Complete,
    Failed(FailureReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentMessage {
    pub entry: SequenceEntry,
    pub sent_at: f64,
    pub received_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoverAttempt {
    pub direction: Direction,
    pub phase: Phase,
    pub trigger_time: f64,
    /// End of the preparation phase.
    pub admission_time: Option<f64>,
    pub completion_time: Option<f64>,
    pub messages: Vec<SentMessage>,
}

impl HandoverAttempt {
    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn is_complete(&self) -> bool {
        self.phase == Phase::Complete
    }

    /// True if any execution-phase message went out.
    pub fn reached_execution(&self) -> bool {
        self.messages.iter().any(|m| !m.entry.step.is_preparation())
    }

    pub fn latency(&self) -> Option<f64> {
        self.completion_time.map(|c| c - self.trigger_time)
    }
}

/// State the target FAP contributes to resource reservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FapLoad {
    pub active_calls: usize,
    pub capacity: usize,
}

pub struct MacroToFemtoRequest<'a> {
    pub ms: &'a MobileStation,
    pub target: &'a FemtoAccessPoint,
    pub decision: CacDecision,
    /// The measurement on which the gate admitted; its time is the trigger.
    pub measurement: Measurement,
    pub topology: &'a NetworkTopology,
    pub load: FapLoad,
}

struct Runner<'a> {
    attempt: HandoverAttempt,
    topology: &'a NetworkTopology,
    call_end: f64,
    clock: f64,
}

impl<'a> Runner<'a> {
    fn new(
        direction: Direction,
        trigger: f64,
        topology: &'a NetworkTopology,
        call_end: f64,
    ) -> Self {
        Self {
            attempt: HandoverAttempt {
                direction,
                phase: Phase::Preparation,
                trigger_time: trigger,
                admission_time: None,
                completion_time: None,
                messages: Vec::new(),
            },
            topology,
            call_end,
            clock: trigger,
        }
    }

    /// Walks the sequence; `check` decides each receiver-side check.
    fn run(
        mut self,
        seq: &[SequenceEntry],
        mut check: impl FnMut(Check) -> Option<FailureReason>,
    ) -> Result<HandoverAttempt, ProtocolError> {
        for (i, entry) in seq.iter().enumerate() {
            if self.attempt.phase == Phase::Preparation && !entry.step.is_preparation() {
                self.attempt.phase = Phase::Execution;
                self.attempt.admission_time = Some(self.clock);
            }
            if self.clock > self.call_end {
                self.attempt.phase = Phase::Failed(FailureReason::CallEnded);
                return Ok(self.attempt);
            }
            let received_at = self.clock + self.topology.latency(entry.from, entry.to)?;
            self.attempt.messages.push(SentMessage {
                entry: *entry,
                sent_at: self.clock,
                received_at,
            });
            self.clock = received_at;
            for &c in entry.checks {
                if let Some(reason) = check(c) {
                    self.attempt.phase = Phase::Failed(reason);
                    return Ok(self.attempt);
                }
            }
            if i + 1 == seq.len() && self.clock > self.call_end {
                self.attempt.phase = Phase::Failed(FailureReason::CallEnded);
                return Ok(self.attempt);
            }
        }
        self.attempt.phase = Phase::Complete;
        self.attempt.completion_time = Some(self.clock);
        Ok(self.attempt)
    }
}

/// Runs the macrocell to femtocell sequence from the admitting measurement.
///
/// Fails with `Unauthorized` when the station is outside the target's
/// subscriber group, `NoResources` when the target is full, and
/// `CallEnded` when the call is released before the last message lands.
pub fn run_macro_to_femto(req: &MacroToFemtoRequest<'_>) -> Result<HandoverAttempt, ProtocolError> {
    if req.decision != CacDecision::Admit {
        return Err(ProtocolError::NotAdmitted(req.decision));
    }
    let seq = sequence(Direction::MacroToFemto, req.topology.kind());
    let runner = Runner::new(
        Direction::MacroToFemto,
        req.measurement.time,
        req.topology,
        req.ms.call_end_time,
    );
    runner.run(seq, |c| match c {
        Check::Authorize if !check_access(req.ms, req.target) => Some(FailureReason::Unauthorized),
        Check::Reserve if req.load.active_calls >= req.load.capacity => {
            Some(FailureReason::NoResources)
        }
        _ => None,
    })
}

/// Runs the shorter femtocell to macrocell sequence. No authorization and no
/// interference evaluation take place.
pub fn run_femto_to_macro(
    ms: &MobileStation,
    serving: &FemtoAccessPoint,
    topology: &NetworkTopology,
    trigger_time: f64,
) -> Result<HandoverAttempt, ProtocolError> {
    if ms.serving != Serving::Femto(serving.id) {
        return Err(ProtocolError::NotServedBy {
            ms: ms.id.0,
            fap: serving.id,
        });
    }
    let seq = sequence(Direction::FemtoToMacro, topology.kind());
    Runner::new(
        Direction::FemtoToMacro,
        trigger_time,
        topology,
        ms.call_end_time,
    )
    .run(seq, |_| None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2D, Trajectory};
    use crate::model::MsId;

    fn station(id: u32, at: Point2D, call_end: f64) -> MobileStation {
        MobileStation::new(
            MsId(id),
            Trajectory::new(at, 0.0, 0.25, 0.0).unwrap(),
            call_end,
        )
    }

    fn fap(id: u32, x: f64, members: &[u32]) -> FemtoAccessPoint {
        FemtoAccessPoint::closed(
            FapId(id),
            Point2D::new(x, 0.0),
            10.0,
            10.0,
            members.iter().map(|&m| MsId(m)),
        )
    }

    fn admit_at(t: f64) -> Measurement {
        Measurement {
            time: t,
            rsl_dbm: -30.0,
            es_io_db: 20.0,
        }
    }

    fn request<'a>(
        ms: &'a MobileStation,
        target: &'a FemtoAccessPoint,
        topology: &'a NetworkTopology,
    ) -> MacroToFemtoRequest<'a> {
        MacroToFemtoRequest {
            ms,
            target,
            decision: CacDecision::Admit,
            measurement: admit_at(100.0),
            topology,
            load: FapLoad {
                active_calls: 0,
                capacity: 4,
            },
        }
    }

    #[test]
    fn neighbor_list_filters_and_orders() {
        let ms = station(7, Point2D::ORIGIN, 1e9);
        let faps = vec![
            fap(0, 50.0, &[1]),
            fap(1, 30.0, &[7]),
            fap(2, 20.0, &[2]),
            fap(3, 10.0, &[7, 2]),
            fap(4, 90.0, &[]),
        ];
        assert_eq!(
            build_neighbor_list(&ms, &faps, 100.0),
            vec![FapId(3), FapId(1)]
        );
        assert!(build_neighbor_list(&station(9, Point2D::ORIGIN, 1e9), &faps, 100.0).is_empty());

        let tied = vec![fap(5, 20.0, &[7]), fap(2, -20.0, &[7])];
        assert_eq!(
            build_neighbor_list(&ms, &tied, 100.0),
            vec![FapId(2), FapId(5)]
        );
        assert!(build_neighbor_list(&ms, &tied, 10.0).is_empty());
    }

    #[test]
    fn access_check() {
        let ms = station(7, Point2D::ORIGIN, 1e9);
        assert!(check_access(&ms, &fap(0, 0.0, &[7])));
        assert!(!check_access(&ms, &fap(0, 0.0, &[8])));
        let open = FemtoAccessPoint::new(
            FapId(1),
            Point2D::ORIGIN,
            10.0,
            10.0,
            crate::model::AccessMode::Open,
        );
        assert!(check_access(&ms, &open));
    }

    #[test]
    fn committed_message_counts() {
        assert_eq!(MACRO_TO_FEMTO_CONCENTRATOR.len(), 12);
        assert_eq!(FEMTO_TO_MACRO_CONCENTRATOR.len(), 8);
        assert_eq!(MACRO_TO_FEMTO_DIRECT.len(), 9);
        assert_eq!(FEMTO_TO_MACRO_DIRECT.len(), 6);
        for kind in [TopologyKind::Concentrator, TopologyKind::DirectRnc] {
            let m2f = sequence(Direction::MacroToFemto, kind);
            let f2m = sequence(Direction::FemtoToMacro, kind);
            assert!(f2m.len() < m2f.len());
            // the reverse direction never authorizes
            assert!(f2m
                .iter()
                .all(|e| e.checks.is_empty() && e.step != Step::P2));
            let has_fgw = |s: &[SequenceEntry]| s.iter().any(|e| e.from == Fgw || e.to == Fgw);
            assert_eq!(has_fgw(m2f), kind == TopologyKind::Concentrator);
            assert_eq!(has_fgw(f2m), kind == TopologyKind::Concentrator);
        }
    }

    #[test]
    fn authorized_concentrator_handover_completes() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let ms = station(7, Point2D::ORIGIN, 1e9);
        let target = fap(0, 0.0, &[7]);
        let a = run_macro_to_femto(&request(&ms, &target, &topo)).unwrap();
        assert_eq!(a.phase, Phase::Complete);
        assert_eq!(a.message_count(), 12);
        assert!((a.latency().unwrap() - 0.12).abs() < 1e-9);
        assert!((a.admission_time.unwrap() - 100.06).abs() < 1e-9);
        assert!(a.trigger_time <= a.admission_time.unwrap());
        assert!(a.admission_time.unwrap() <= a.completion_time.unwrap());
        let sent: Vec<_> = a.messages.iter().map(|m| m.entry).collect();
        assert_eq!(sent, MACRO_TO_FEMTO_CONCENTRATOR.to_vec());
    }

    #[test]
    fn unauthorized_fails_in_preparation() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let ms = station(8, Point2D::ORIGIN, 1e9);
        let target = fap(0, 0.0, &[7]);
        let a = run_macro_to_femto(&request(&ms, &target, &topo)).unwrap();
        assert_eq!(a.phase, Phase::Failed(FailureReason::Unauthorized));
        assert!(!a.reached_execution());
        assert_eq!(a.message_count(), 3);
    }

    #[test]
    fn full_fap_reports_no_resources() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let ms = station(7, Point2D::ORIGIN, 1e9);
        let target = fap(0, 0.0, &[7]);
        let mut req = request(&ms, &target, &topo);
        req.load.active_calls = 4;
        let a = run_macro_to_femto(&req).unwrap();
        assert_eq!(a.phase, Phase::Failed(FailureReason::NoResources));
        assert!(!a.reached_execution());
    }

    #[test]
    fn direct_topology_uses_fewer_hops() {
        let conc = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let direct = NetworkTopology::uniform(TopologyKind::DirectRnc, 0.01).unwrap();
        assert!(conc.fgw_present() && !direct.fgw_present());
        let ms = station(7, Point2D::ORIGIN, 1e9);
        let target = fap(0, 0.0, &[7]);
        let a = run_macro_to_femto(&request(&ms, &target, &conc)).unwrap();
        let b = run_macro_to_femto(&request(&ms, &target, &direct)).unwrap();
        assert!(b.is_complete());
        assert!(b.message_count() < a.message_count());
        assert!(b.latency().unwrap() < a.latency().unwrap());
        assert!(direct.latency(Fgw, Rnc).is_err());
    }

    #[test]
    fn requires_admit() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let ms = station(7, Point2D::ORIGIN, 1e9);
        let target = fap(0, 0.0, &[7]);
        let mut req = request(&ms, &target, &topo);
        req.decision = CacDecision::Pending;
        assert!(matches!(
            run_macro_to_femto(&req),
            Err(ProtocolError::NotAdmitted(_))
        ));
    }

    #[test]
    fn femto_to_macro_is_shorter() {
        for kind in [TopologyKind::Concentrator, TopologyKind::DirectRnc] {
            let topo = NetworkTopology::uniform(kind, 0.01).unwrap();
            let target = fap(0, 0.0, &[7]);
            let mut ms = station(7, Point2D::ORIGIN, 1e9);
            let inbound = run_macro_to_femto(&request(&ms, &target, &topo)).unwrap();
            ms.serving = Serving::Femto(FapId(0));
            let outbound = run_femto_to_macro(&ms, &target, &topo, 200.0).unwrap();
            assert!(outbound.is_complete());
            assert!(outbound.message_count() < inbound.message_count());
            assert!(outbound.latency().unwrap() < inbound.latency().unwrap());
        }
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let mut ms = station(7, Point2D::ORIGIN, 1e9);
        ms.serving = Serving::Femto(FapId(0));
        assert_eq!(
            run_femto_to_macro(&ms, &fap(0, 0.0, &[7]), &topo, 0.0)
                .unwrap()
                .message_count(),
            8
        );
    }

    #[test]
    fn femto_to_macro_requires_serving_fap() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let ms = station(7, Point2D::ORIGIN, 1e9);
        assert!(matches!(
            run_femto_to_macro(&ms, &fap(0, 0.0, &[7]), &topo, 0.0),
            Err(ProtocolError::NotServedBy { .. })
        ));
    }

    #[test]
    fn call_end_mid_execution_aborts_before_path_switch() {
        let topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        let mut ms = station(7, Point2D::ORIGIN, 10.035);
        ms.serving = Serving::Femto(FapId(0));
        let a = run_femto_to_macro(&ms, &fap(0, 0.0, &[7]), &topo, 10.0).unwrap();
        assert_eq!(a.phase, Phase::Failed(FailureReason::CallEnded));
        assert!(a.completion_time.is_none());
        assert!(a
            .messages
            .iter()
            .all(|m| m.entry.message != MessageKind::UpdatePdpContext));
    }

    #[test]
    fn latency_table_validation() {
        let mut topo = NetworkTopology::uniform(TopologyKind::Concentrator, 0.01).unwrap();
        assert!(topo.set_latency(Fap, Fgw, 0.0).is_err());
        topo.set_latency(Fap, Fgw, 0.05).unwrap();
        assert_eq!(topo.latency(Fgw, Fap).unwrap(), 0.05);
        assert!(NetworkTopology::uniform(TopologyKind::DirectRnc, -1.0).is_err());
    }
}
