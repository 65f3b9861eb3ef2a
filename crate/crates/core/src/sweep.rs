//! Repeated runs over admission wait times and seeds.
//!
//! Every wait time reuses the same seeds, so the runs for different wait
//! times see identical calls and differ only in the gate. Summary rows are
//! means over seeds; the standard error is the spread across seeds.

use crate::config::SimConfig;
use crate::engine::{run, SimError};
use crate::metrics::{aggregate, combine_seeds, Denominator, SweepRow, SweepSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub seed: u64,
    pub row: SweepRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Averaged over seeds, one row per wait time, sorted.
    pub summary: SweepSummary,
    /// One row per (wait time, seed), in sweep order.
    pub per_seed: Vec<SeedRow>,
}

impl SweepOutcome {
    pub fn rows_for_seed(&self, seed: u64) -> Vec<&SweepRow> {
        let mut rows: Vec<&SweepRow> = self
            .per_seed
            .iter()
            .filter(|r| r.seed == seed)
            .map(|r| &r.row)
            .collect();
        rows.sort_by(|a, b| a.threshold_time_s.total_cmp(&b.threshold_time_s));
        rows
    }
}

pub fn sweep(
    base: &SimConfig,
    threshold_times: &[f64],
    seeds: &[u64],
    denominator: Denominator,
) -> Result<SweepOutcome, SimError> {
    let mut rows = Vec::with_capacity(threshold_times.len());
    let mut per_seed = Vec::new();
    for &t in threshold_times {
        let mut seed_rows = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = base.clone().with_threshold_time(t).with_seed(seed);
            let log = run(&cfg)?;
            let row = aggregate(std::slice::from_ref(&log), base.fap_count, denominator)?;
            per_seed.push(SeedRow { seed, row: row.clone() });
            seed_rows.push(row);
        }
        rows.push(combine_seeds(t, &seed_rows));
    }
    let mut summary = SweepSummary { rows };
    summary.sort();
    Ok(SweepOutcome { summary, per_seed })
}
