//! Handover classification and sweep statistics.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ClassificationWindows;
use crate::engine::RunLog;
use crate::model::{FapId, MsId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Necessary,
    /// Back on the macrocell within the return window.
    UnnecessaryReturn,
    /// Call ended inside the femtocell within the termination window.
    UnnecessaryShortCall,
    /// Admitted by the gate but refused by the target during preparation.
    Blocked,
}

impl Classification {
    pub fn is_unnecessary(self) -> bool {
        matches!(
            self,
            Classification::UnnecessaryReturn | Classification::UnnecessaryShortCall
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Necessary => "necessary",
            Classification::UnnecessaryReturn => "unnecessary_return",
            Classification::UnnecessaryShortCall => "unnecessary_short_call",
            Classification::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverRecord {
    pub call: MsId,
    pub fap: FapId,
    /// When the admission gate accepted the handover.
    pub admission_time: f64,
    /// Completion of the handover back to the macrocell.
    pub leave_time: Option<f64>,
    /// Call release while attached to the femtocell.
    pub terminate_time: Option<f64>,
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("record for call {0} has neither a leave nor a termination time")]
    Incomplete(MsId),
    #[error("record for call {0} has both a leave and a termination time")]
    Ambiguous(MsId),
    #[error("no run logs to aggregate")]
    NoLogs,
    #[error("fap_count must be at least 1")]
    NoFaps,
    #[error("csv: {0}")]
    Csv(String),
}

/// Applies the unnecessary-handover rule. Gaps exactly equal to a window
/// count as necessary.
pub fn classify_handover(
    rec: &HandoverRecord,
    windows: &ClassificationWindows,
) -> Result<Classification, MetricsError> {
    match (rec.leave_time, rec.terminate_time) {
        (Some(leave), None) => Ok(if leave - rec.admission_time < windows.return_window_s {
            Classification::UnnecessaryReturn
        } else {
            Classification::Necessary
        }),
        (None, Some(end)) => Ok(if end - rec.admission_time < windows.terminate_window_s {
            Classification::UnnecessaryShortCall
        } else {
            Classification::Necessary
        }),
        (None, None) => Err(MetricsError::Incomplete(rec.call)),
        (Some(_), Some(_)) => Err(MetricsError::Ambiguous(rec.call)),
    }
}

/// Whether blocked attempts count in the unnecessary-fraction denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    #[default]
    AdmittedOnly,
    IncludeBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub admitted: u64,
    pub unnecessary: u64,
    pub blocked: u64,
}

impl Counts {
    pub fn add(&mut self, c: Classification) {
        match c {
            Classification::Blocked => self.blocked += 1,
            other => {
                self.admitted += 1;
                if other.is_unnecessary() {
                    self.unnecessary += 1;
                }
            }
        }
    }

    pub fn of(records: &[HandoverRecord]) -> Self {
        let mut c = Self::default();
        for r in records {
            c.add(r.classification);
        }
        c
    }
}

/// One row of a threshold-time sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold_time_s: f64,
    pub handovers_per_fap: f64,
    pub unnecessary_fraction: Option<f64>,
    pub unnecessary_stderr: Option<f64>,
    pub blocked_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

/// Pools the records of `logs` into one row.
///
/// `handovers_per_fap` is completed macro to femto handovers per FAP per run.
/// The standard error is the binomial one for the pooled fraction.
pub fn aggregate(
    logs: &[RunLog],
    fap_count: usize,
    denominator: Denominator,
) -> Result<SweepRow, MetricsError> {
    let first = logs.first().ok_or(MetricsError::NoLogs)?;
    if fap_count == 0 {
        return Err(MetricsError::NoFaps);
    }
    let mut counts = Counts::default();
    for log in logs {
        for r in &log.records {
            counts.add(r.classification);
        }
    }
    Ok(row_from_counts(
        first.threshold_time_s,
        counts,
        fap_count,
        logs.len(),
        denominator,
    ))
}

fn row_from_counts(
    threshold_time_s: f64,
    c: Counts,
    fap_count: usize,
    runs: usize,
    denominator: Denominator,
) -> SweepRow {
    let base = match denominator {
        Denominator::AdmittedOnly => c.admitted,
        Denominator::IncludeBlocked => c.admitted + c.blocked,
    };
    let fraction = (base > 0).then(|| c.unnecessary as f64 / base as f64);
    let attempts = c.admitted + c.blocked;
    SweepRow {
        threshold_time_s,
        handovers_per_fap: c.admitted as f64 / (fap_count as f64 * runs as f64),
        unnecessary_fraction: fraction,
        unnecessary_stderr: fraction.map(|p| (p * (1.0 - p) / base as f64).sqrt()),
        blocked_fraction: if attempts == 0 {
            0.0
        } else {
            c.blocked as f64 / attempts as f64
        },
    }
}

/// Per-FAP counts for one run, indexed by FAP id.
pub fn per_fap_counts(log: &RunLog, fap_count: usize) -> Vec<Counts> {
    let mut out = vec![Counts::default(); fap_count];
    for r in &log.records {
        out[r.fap.0 as usize].add(r.classification);
    }
    out
}

/// Mean handovers per FAP computed FAP by FAP.
pub fn mean_of_per_fap_handovers(log: &RunLog, fap_count: usize) -> f64 {
    let per = per_fap_counts(log, fap_count);
    per.iter().map(|c| c.admitted as f64).sum::<f64>() / fap_count as f64
}

/// Combines per-seed rows for one threshold time: means across seeds, with
/// the across-seed standard error of the unnecessary fraction.
pub fn combine_seeds(threshold_time_s: f64, rows: &[SweepRow]) -> SweepRow {
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let per_fap: Vec<f64> = rows.iter().map(|r| r.handovers_per_fap).collect();
    let blocked: Vec<f64> = rows.iter().map(|r| r.blocked_fraction).collect();
    let fractions: Vec<f64> = rows.iter().filter_map(|r| r.unnecessary_fraction).collect();
    let (fraction, stderr) = match fractions.len() {
        0 => (None, None),
        1 => (
            Some(fractions[0]),
            rows.iter().find_map(|r| r.unnecessary_stderr),
        ),
        n => {
            let m = mean(&fractions);
            let var = fractions.iter().map(|f| (f - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            (Some(m), Some((var / n as f64).sqrt()))
        }
    };
    SweepRow {
        threshold_time_s,
        handovers_per_fap: if per_fap.is_empty() {
            0.0
        } else {
            mean(&per_fap)
        },
        unnecessary_fraction: fraction,
        unnecessary_stderr: stderr,
        blocked_fraction: if blocked.is_empty() {
            0.0
        } else {
            mean(&blocked)
        },
    }
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "threshold_time_s",
    "handovers_per_fap",
    "unnecessary_fraction",
    "unnecessary_stderr",
    "blocked_fraction",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepSummary {
    pub fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| a.threshold_time_s.total_cmp(&b.threshold_time_s));
    }

    /// CSV with a header row; absent values are empty fields.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| MetricsError::Csv(e.to_string());
        w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.threshold_time_s.to_string(),
                r.handovers_per_fap.to_string(),
                opt(r.unnecessary_fraction),
                opt(r.unnecessary_stderr),
                r.blocked_fraction.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| MetricsError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, MetricsError> {
        let mut rdr = csv::Reader::from_reader(input);
        let bad = |e: String| MetricsError::Csv(e);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().ne(SWEEP_COLUMNS) {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let opt_num = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            rows.push(SweepRow {
                threshold_time_s: num(&rec[0])?,
                handovers_per_fap: num(&rec[1])?,
                unnecessary_fraction: opt_num(&rec[2])?,
                unnecessary_stderr: opt_num(&rec[3])?,
                blocked_fraction: num(&rec[4])?,
            });
        }
        Ok(Self { rows })
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:>8}  {:>12}  {:>12}  {:>9}  {:>8}\n",
            "T (s)", "HO per FAP", "unnecessary", "stderr", "blocked"
        );
        for r in &self.rows {
            let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:>8}  {:>12.4}  {:>12}  {:>9}  {:>8.4}\n",
                r.threshold_time_s,
                r.handovers_per_fap,
                f(r.unnecessary_fraction),
                f(r.unnecessary_stderr),
                r.blocked_fraction
            ));
        }
        s
    }
}
