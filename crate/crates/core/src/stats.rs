//! CSV rows for per-run statistics and best-cost traces.

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::refine::{IterationRecord, RecordKind, RefineOutcome};

/// One line of the per-run statistics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub run_id: String,
    pub map: String,
    pub scenario: String,
    pub agents: usize,
    pub seed: u64,
    pub feedback: String,
    pub reassign: String,
    pub k: usize,
    pub status: String,
    pub init_flowtime: Option<u64>,
    pub best_flowtime: Option<u64>,
    pub normalized_cost: Option<f64>,
    pub imprv_pct: Option<f64>,
    pub iters: usize,
    pub elapsed_ms: u64,
    pub pathfind_ms: u64,
    pub reassign_ms: u64,
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_INITIAL_FAILURE: &str = "initial_failure";
pub const STATUS_INFEASIBLE: &str = "infeasible";

/// Fills the outcome-dependent columns of `row`. With `timing` off all
/// wall-clock columns are zero so that identical runs produce identical
/// bytes.
pub fn fill_from_outcome(row: &mut StatsRow, outcome: &RefineOutcome, timing: bool) {
    let last = outcome.records.last().expect("initial record");
    row.status = STATUS_OK.to_string();
    row.init_flowtime = Some(outcome.initial_flowtime());
    row.best_flowtime = Some(outcome.solution.flowtime);
    row.normalized_cost = Some(round6(outcome.solution.normalized_cost));
    row.imprv_pct = Some(round6(outcome.improvement_rate()));
    row.iters = outcome.iterations();
    let ms = |d: Duration| if timing { d.as_millis() as u64 } else { 0 };
    row.elapsed_ms = ms(last.elapsed);
    row.pathfind_ms = ms(last.time_in_pathfinding);
    row.reassign_ms = ms(last.time_in_reassignment);
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub elapsed_ms: u64,
    pub best_flowtime: u64,
}

pub fn trace_rows(records: &[IterationRecord], timing: bool) -> Vec<TraceRow> {
    records
        .iter()
        .filter(|r| r.kind != RecordKind::FinalOptimization)
        .map(|r| TraceRow {
            iter: r.index,
            elapsed_ms: if timing {
                r.elapsed.as_millis() as u64
            } else {
                0
            },
            best_flowtime: r.best_flowtime,
        })
        .collect()
}

pub fn write_rows<W: io::Write, T: Serialize>(out: W, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: io::Read, T: for<'de> Deserialize<'de>>(input: R) -> csv::Result<Vec<T>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
