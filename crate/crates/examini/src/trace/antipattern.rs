//! Detector for the latency-bound exchange antipattern: barrier-bounded
//! runs of many tiny point-to-point messages with essentially no
//! computation between them. Such phases cost per-message latency rather
//! than bandwidth and collapse under message aggregation.

use serde::{Deserialize, Serialize};

use super::{State, TraceTimeline};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AntipatternParams {
    /// Minimum number of consecutive small messages worth reporting.
    pub min_run: usize,
    /// A message is "small" at or below this payload size.
    pub max_bytes: u64,
    /// Maximum non-message time (useful/idle) tolerated inside a run.
    pub max_gap_ns: i64,
}

impl Default for AntipatternParams {
    fn default() -> Self {
        AntipatternParams { min_run: 5, max_bytes: 1024, max_gap_ns: 1_000 }
    }
}

/// One detected run, merged across the ranks whose runs overlap in time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AntipatternFinding {
    pub ranks: Vec<usize>,
    pub t_start: i64,
    pub t_end: i64,
    /// Longest per-rank message count inside the merged window.
    pub run_length: usize,
    /// Total time spent inside the run's message events, summed over ranks:
    /// an estimate of the latency bill the pattern pays.
    pub accumulated_latency_ns: i64,
}

pub fn detect_latency_antipattern(
    trace: &TraceTimeline,
    params: &AntipatternParams,
) -> Vec<AntipatternFinding> {
    let mut runs: Vec<LaneRun> = Vec::new();
    for rank in 0..trace.ranks() {
        for thread in 0..trace.threads_per_rank() {
            scan_lane(rank, trace.lane(rank, thread), params, &mut runs);
        }
    }
    merge_runs(runs)
}

struct LaneRun {
    rank: usize,
    t_start: i64,
    t_end: i64,
    count: usize,
    latency_ns: i64,
}

fn scan_lane(
    rank: usize,
    lane: &[super::TraceEvent],
    params: &AntipatternParams,
    out: &mut Vec<LaneRun>,
) {
    let mut cur: Option<LaneRun> = None;
    let mut gap_since_last = 0i64;
    let flush = |run: &mut Option<LaneRun>, out: &mut Vec<LaneRun>| {
        if let Some(r) = run.take() {
            if r.count >= params.min_run {
                out.push(r);
            }
        }
    };
    for ev in lane {
        match ev.state {
            State::Send | State::Recv | State::Wait => {
                let small = ev.bytes.unwrap_or(0) <= params.max_bytes;
                if !small {
                    // A bandwidth-sized message breaks the latency pattern.
                    flush(&mut cur, out);
                    gap_since_last = 0;
                    continue;
                }
                match cur.as_mut() {
                    Some(run) if gap_since_last <= params.max_gap_ns => {
                        run.count += 1;
                        run.t_end = ev.t_end;
                        run.latency_ns += ev.duration();
                    }
                    _ => {
                        flush(&mut cur, out);
                        cur = Some(LaneRun {
                            rank,
                            t_start: ev.t_start,
                            t_end: ev.t_end,
                            count: 1,
                            latency_ns: ev.duration(),
                        });
                    }
                }
                gap_since_last = 0;
            }
            State::Barrier | State::Collective => {
                flush(&mut cur, out);
                gap_since_last = 0;
            }
            State::Useful | State::Idle | State::OmpRuntime => {
                gap_since_last += ev.duration();
            }
        }
    }
    flush(&mut cur, out);
}

/// Merges per-lane runs whose time windows overlap into one finding.
fn merge_runs(mut runs: Vec<LaneRun>) -> Vec<AntipatternFinding> {
    runs.sort_by_key(|r| (r.t_start, r.t_end, r.rank));
    let mut findings: Vec<AntipatternFinding> = Vec::new();
    for run in runs {
        match findings.last_mut() {
            Some(f) if run.t_start < f.t_end => {
                f.t_end = f.t_end.max(run.t_end);
                f.run_length = f.run_length.max(run.count);
                f.accumulated_latency_ns += run.latency_ns;
                if !f.ranks.contains(&run.rank) {
                    f.ranks.push(run.rank);
                    f.ranks.sort_unstable();
                }
            }
            _ => findings.push(AntipatternFinding {
                ranks: vec![run.rank],
                t_start: run.t_start,
                t_end: run.t_end,
                run_length: run.count,
                accumulated_latency_ns: run.latency_ns,
            }),
        }
    }
    findings
}
