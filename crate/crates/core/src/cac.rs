//! Admission gate for macrocell to femtocell handovers.
//!
//! A candidate FAP is accepted once its received signal has stayed at or
//! above the threshold level for at least the threshold time, and the
//! Es/I0 at that moment clears its floor. Any sample below the threshold
//! restarts the timer. Comparisons are inclusive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::Measurement;

/// Slack on the duration comparison so that sample grids built as
/// `k * interval` do not lose an admission to rounding.
pub const DURATION_EPSILON_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacPolicy {
    pub rsl_threshold_dbm: f64,
    /// Operator-chosen threshold time `T`.
    pub threshold_time_s: f64,
    pub es_io_floor_db: f64,
    pub sampling_interval_s: f64,
}

impl CacPolicy {
    /// Defaults used by the shipped simulation configuration.
    pub const DEFAULT: CacPolicy = CacPolicy {
        rsl_threshold_dbm: -30.0,
        threshold_time_s: 0.0,
        es_io_floor_db: 0.0,
        sampling_interval_s: 0.1,
    };

    pub fn with_threshold_time(mut self, t: f64) -> Self {
        self.threshold_time_s = t;
        self
    }
}

impl Default for CacPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    InterferenceBelowFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacDecision {
    Pending,
    Admit,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CacError {
    #[error("measurement at {got}s arrived after one at {last}s")]
    OutOfOrder { last: f64, got: f64 },
}

/// Timer state for one (station, candidate FAP) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacState {
    above_since: Option<f64>,
    last_time: Option<f64>,
    decision: CacDecision,
    admitted_at: Option<f64>,
}

impl Default for CacState {
    fn default() -> Self {
        Self::new()
    }
}

impl CacState {
    pub fn new() -> Self {
        Self {
            above_since: None,
            last_time: None,
            decision: CacDecision::Pending,
            admitted_at: None,
        }
    }

    pub fn above_since(&self) -> Option<f64> {
        self.above_since
    }

    pub fn admitted_at(&self) -> Option<f64> {
        self.admitted_at
    }

    pub fn decision(&self) -> CacDecision {
        self.decision
    }

    /// Feeds one measurement through the gate. Once admitted the state is
    /// latched; rejections are re-evaluated on every later sample.
    pub fn update(&self, m: &Measurement, policy: &CacPolicy) -> Result<CacState, CacError> {
        if let Some(last) = self.last_time {
            if m.time < last {
                return Err(CacError::OutOfOrder { last, got: m.time });
            }
        }
        let mut next = *self;
        next.last_time = Some(m.time);
        if self.decision == CacDecision::Admit {
            return Ok(next);
        }

        if m.rsl_dbm < policy.rsl_threshold_dbm {
            next.above_since = None;
            next.decision = CacDecision::Pending;
            return Ok(next);
        }
        let since = *next.above_since.get_or_insert(m.time);
        if m.time - since + DURATION_EPSILON_S < policy.threshold_time_s {
            next.decision = CacDecision::Pending;
        } else if m.es_io_db >= policy.es_io_floor_db {
            next.decision = CacDecision::Admit;
            next.admitted_at = Some(m.time);
        } else {
            next.decision = CacDecision::Reject(RejectReason::InterferenceBelowFloor);
        }
        Ok(next)
    }
}

pub fn update(state: &CacState, m: &Measurement, policy: &CacPolicy) -> Result<CacState, CacError> {
    state.update(m, policy)
}

pub fn admit_decision(state: &CacState) -> CacDecision {
    state.decision()
}

/// Runs a whole trace through a fresh gate and returns the admission time.
pub fn first_admission(trace: &[Measurement], policy: &CacPolicy) -> Result<Option<f64>, CacError> {
    let mut state = CacState::new();
    for m in trace {
        state = state.update(m, policy)?;
        if let Some(t) = state.admitted_at() {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(t: f64) -> CacPolicy {
        CacPolicy {
            rsl_threshold_dbm: -60.0,
            threshold_time_s: t,
            es_io_floor_db: 5.0,
            sampling_interval_s: 0.1,
        }
    }

    fn sample(k: u32, rsl: f64, esio: f64) -> Measurement {
        Measurement {
            time: k as f64 * 0.1,
            rsl_dbm: rsl,
            es_io_db: esio,
        }
    }

    #[test]
    fn short_excursion_is_never_admitted() {
        let p = policy(20.0);
        let mut s = CacState::new();
        for k in 0..200 {
            s = s.update(&sample(k, -50.0, 20.0), &p).unwrap();
            assert_eq!(s.decision(), CacDecision::Pending);
        }
        assert_eq!(s.above_since(), Some(0.0));
        s = s.update(&sample(200, -70.0, 20.0), &p).unwrap();
        assert_eq!(s.decision(), CacDecision::Pending);
        assert_eq!(s.above_since(), None);
    }

    #[test]
    fn zero_threshold_time_admits_immediately() {
        let s = CacState::new()
            .update(&sample(0, -50.0, 20.0), &policy(0.0))
            .unwrap();
        assert_eq!(admit_decision(&s), CacDecision::Admit);
        assert_eq!(s.admitted_at(), Some(0.0));
    }

    #[test]
    fn admits_after_ten_seconds_above() {
        let p = policy(10.0);
        let trace: Vec<_> = (0..300)
            .map(|k| {
                let rsl = if k < 50 { -70.0 } else { -50.0 };
                sample(k, rsl, 20.0)
            })
            .collect();
        let t = first_admission(&trace, &p).unwrap().unwrap();
        assert!((t - 15.0).abs() < 1e-9, "admitted at {t}");
    }

    #[test]
    fn fresh_state_is_pending() {
        assert_eq!(admit_decision(&CacState::new()), CacDecision::Pending);
    }

    #[test]
    fn interference_floor_rejects_without_latching() {
        let p = policy(1.0);
        let mut s = CacState::new();
        for k in 0..30 {
            s = s.update(&sample(k, -50.0, 0.0), &p).unwrap();
        }
        assert_eq!(
            s.decision(),
            CacDecision::Reject(RejectReason::InterferenceBelowFloor)
        );
        s = s.update(&sample(30, -50.0, 9.0), &p).unwrap();
        assert_eq!(s.decision(), CacDecision::Admit);
    }

    #[test]
    fn out_of_order_is_an_error() {
        let p = policy(1.0);
        let s = CacState::new().update(&sample(5, -50.0, 9.0), &p).unwrap();
        assert!(matches!(
            s.update(&sample(4, -50.0, 9.0), &p),
            Err(CacError::OutOfOrder { .. })
        ));
        // equal timestamps are fine
        assert!(s.update(&sample(5, -50.0, 9.0), &p).is_ok());
    }

    #[test]
    fn admission_is_latched() {
        let p = policy(0.0);
        let s = CacState::new().update(&sample(0, -50.0, 9.0), &p).unwrap();
        let s = s.update(&sample(1, -90.0, -9.0), &p).unwrap();
        assert_eq!(s.decision(), CacDecision::Admit);
        assert_eq!(s.admitted_at(), Some(0.0));
    }

    fn trace_strategy() -> impl Strategy<Value = Vec<Measurement>> {
        proptest::collection::vec((any::<bool>(), -5.0f64..15.0), 1..400).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(k, (above, esio))| sample(k as u32, if above { -55.0 } else { -65.0 }, esio))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn admission_monotone_in_threshold_time(trace in trace_strategy(), t1 in 0.0f64..20.0, dt in 0.0f64..20.0) {
            let t2 = t1 + dt;
            let a2 = first_admission(&trace, &policy(t2)).unwrap();
            if let Some(at2) = a2 {
                let at1 = first_admission(&trace, &policy(t1)).unwrap();
                prop_assert!(at1.is_some());
                prop_assert!(at1.unwrap() <= at2);
            }
        }

        #[test]
        fn floor_above_trace_blocks_admission(trace in trace_strategy(), t in 0.0f64..10.0) {
            let mut p = policy(t);
            p.es_io_floor_db = 15.0 + 1e-6;
            prop_assert_eq!(first_admission(&trace, &p).unwrap(), None);
        }

        #[test]
        fn update_is_pure(trace in trace_strategy()) {
            let p = policy(2.0);
            let mut s = CacState::new();
            for m in &trace {
                let a = s.update(m, &p).unwrap();
                let b = s.update(m, &p).unwrap();
                prop_assert_eq!(a, b);
                s = a;
            }
        }
    }
}
