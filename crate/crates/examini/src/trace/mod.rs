//! Event-interval trace model for rank-parallel runs.
//!
//! A trace is a set of lanes, one per `(rank, thread)`, each holding
//! time-ordered, non-overlapping state intervals (nanosecond resolution).
//! On top of the model sit the POP-style efficiency metrics
//! ([`metrics::compute_pop_metrics`]), an ideal-network replay that bounds
//! what a zero-latency, infinite-bandwidth fabric could achieve
//! ([`replay::ideal_network_replay`]), and a detector for latency-bound
//! message antipatterns ([`antipattern::detect_latency_antipattern`]).

mod antipattern;
mod format;
mod metrics;
mod record;
mod replay;
pub mod synthetic;

pub use antipattern::{detect_latency_antipattern, AntipatternFinding, AntipatternParams};
pub use format::{load_trace, save_trace};
pub use metrics::{
    compute_pop_metrics, compute_pop_metrics_with_replay, compute_scalability, global_efficiency,
    EfficiencyReport, ScalabilityReport,
};
pub use record::{Clock, Recorder};
pub use replay::{ideal_network_replay, ReplayOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a lane is doing during one interval.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum State {
    Useful,
    Send,
    Recv,
    Wait,
    Collective,
    Barrier,
    OmpRuntime,
    Idle,
}

impl State {
    /// Point-to-point message states (the ones matched sender-to-receiver).
    pub fn is_p2p(self) -> bool {
        matches!(self, State::Send | State::Recv | State::Wait)
    }

    pub fn is_sync(self) -> bool {
        matches!(self, State::Collective | State::Barrier)
    }
}

/// One state interval on one lane. Times are nanoseconds from the run epoch.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TraceEvent {
    pub rank: usize,
    pub thread: usize,
    pub state: State,
    pub t_start: i64,
    pub t_end: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<u64>,
}

impl TraceEvent {
    pub fn duration(&self) -> i64 {
        self.t_end - self.t_start
    }

    fn has_region(&self, region: Option<&str>) -> bool {
        match region {
            None => true,
            Some(r) => self.region.as_deref() == Some(r),
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {msg}")]
    MalformedEvent { line: usize, msg: String },
    #[error(
        "rank {rank} thread {thread}: event at t={t_start} overlaps previous event ending at {prev_end}"
    )]
    OverlapViolation {
        rank: usize,
        thread: usize,
        t_start: i64,
        prev_end: i64,
    },
    #[error("trace holds no ranks")]
    EmptyTrace,
    #[error("no events carry region label {0:?}")]
    RegionNotFound(String),
    #[error("degenerate trace: no useful time inside the region of interest")]
    DegenerateTrace,
    #[error("message pairing failed: {0}")]
    UnmatchedMessage(String),
    #[error("instruction counters absent on rank {rank} thread {thread}")]
    MissingCounters { rank: usize, thread: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A complete run trace: `ranks * threads_per_rank` lanes plus the region of
/// interest window all metrics are computed over.
#[derive(Clone, PartialEq, Debug)]
pub struct TraceTimeline {
    ranks: usize,
    threads_per_rank: usize,
    roi: (i64, i64),
    /// Lane-major storage: index `rank * threads_per_rank + thread`.
    lanes: Vec<Vec<TraceEvent>>,
}

impl TraceTimeline {
    pub fn new(ranks: usize, threads_per_rank: usize, roi: (i64, i64)) -> Self {
        TraceTimeline {
            ranks,
            threads_per_rank,
            roi,
            lanes: vec![Vec::new(); ranks * threads_per_rank],
        }
    }

    pub fn ranks(&self) -> usize {
        self.ranks
    }

    pub fn threads_per_rank(&self) -> usize {
        self.threads_per_rank
    }

    pub fn roi(&self) -> (i64, i64) {
        self.roi
    }

    /// RoI window length: the wall-clock time `T` the metrics divide by.
    pub fn span(&self) -> i64 {
        self.roi.1 - self.roi.0
    }

    pub fn lane(&self, rank: usize, thread: usize) -> &[TraceEvent] {
        &self.lanes[rank * self.threads_per_rank + thread]
    }

    pub fn iter_events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.lanes.iter().flatten()
    }

    pub fn total_events(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    /// Appends an event to its lane, enforcing time order and non-overlap.
    pub fn push(&mut self, ev: TraceEvent) -> Result<(), TraceError> {
        if ev.rank >= self.ranks || ev.thread >= self.threads_per_rank {
            return Err(TraceError::MalformedEvent {
                line: 0,
                msg: format!(
                    "event addressed to lane ({}, {}) outside {}x{} layout",
                    ev.rank, ev.thread, self.ranks, self.threads_per_rank
                ),
            });
        }
        if ev.t_end < ev.t_start {
            return Err(TraceError::MalformedEvent {
                line: 0,
                msg: format!("event ends at {} before it starts at {}", ev.t_end, ev.t_start),
            });
        }
        let lane = &mut self.lanes[ev.rank * self.threads_per_rank + ev.thread];
        if let Some(prev) = lane.last() {
            if ev.t_start < prev.t_end {
                return Err(TraceError::OverlapViolation {
                    rank: ev.rank,
                    thread: ev.thread,
                    t_start: ev.t_start,
                    prev_end: prev.t_end,
                });
            }
        }
        lane.push(ev);
        Ok(())
    }

    /// Builds a timeline from per-lane recorders; the RoI defaults to the
    /// full span of all recorded events.
    pub fn from_recorders(
        ranks: usize,
        threads_per_rank: usize,
        recorders: Vec<Recorder>,
        roi: Option<(i64, i64)>,
    ) -> Result<Self, TraceError> {
        let mut events: Vec<TraceEvent> = Vec::new();
        for rec in recorders {
            events.extend(rec.into_events());
        }
        let roi = roi.unwrap_or_else(|| {
            let t0 = events.iter().map(|e| e.t_start).min().unwrap_or(0);
            let t1 = events.iter().map(|e| e.t_end).max().unwrap_or(0);
            (t0, t1)
        });
        let mut tl = TraceTimeline::new(ranks, threads_per_rank, roi);
        for ev in events {
            if let Some(ev) = clip_to_roi(ev, roi) {
                tl.push(ev)?;
            }
        }
        Ok(tl)
    }

    /// Total USEFUL nanoseconds on one rank's master thread (thread 0),
    /// optionally restricted to a region label. This is the `useful_i`
    /// entering the rank-level efficiency metrics.
    pub fn rank_useful(&self, rank: usize, region: Option<&str>) -> i64 {
        self.lane(rank, 0)
            .iter()
            .filter(|e| e.state == State::Useful && e.has_region(region))
            .map(TraceEvent::duration)
            .sum()
    }

    /// Total USEFUL nanoseconds over every lane (all ranks, all threads).
    pub fn total_useful(&self) -> i64 {
        self.iter_events()
            .filter(|e| e.state == State::Useful)
            .map(TraceEvent::duration)
            .sum()
    }
}

/// Wall-clock roll-up of a timeline: seconds per region label, largest first.
#[derive(Clone, Debug, Serialize)]
pub struct TimingSummary {
    /// Steps (or cycles) the RoI covers.
    pub steps: usize,
    pub walltime_s: f64,
    /// (region, seconds summed over ranks), largest first
    pub regions: Vec<(String, f64)>,
}

pub fn summarize_regions(tl: &TraceTimeline, steps: usize) -> TimingSummary {
    let mut regions: Vec<(String, f64)> = Vec::new();
    for ev in tl.iter_events() {
        let name = ev
            .region
            .clone()
            .unwrap_or_else(|| format!("{:?}", ev.state).to_lowercase());
        let secs = ev.duration() as f64 * 1e-9;
        match regions.iter_mut().find(|(n, _)| *n == name) {
            Some((_, acc)) => *acc += secs,
            None => regions.push((name, secs)),
        }
    }
    regions.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    TimingSummary { steps, walltime_s: tl.span() as f64 * 1e-9, regions }
}

fn clip_to_roi(mut ev: TraceEvent, roi: (i64, i64)) -> Option<TraceEvent> {
    if ev.t_end <= roi.0 || ev.t_start >= roi.1 {
        return None;
    }
    ev.t_start = ev.t_start.max(roi.0);
    ev.t_end = ev.t_end.min(roi.1);
    Some(ev)
}
