use std::time::Instant;

use super::{State, TraceEvent};

/// Shared run epoch. Every rank copies the same `Clock`, so lane timestamps
/// are mutually comparable.
#[derive(Clone, Copy, Debug)]
pub struct Clock {
    epoch: Instant,
}

impl Clock {
    pub fn start() -> Self {
        Clock { epoch: Instant::now() }
    }

    pub fn now_ns(&self) -> i64 {
        self.epoch.elapsed().as_nanos() as i64
    }
}

/// Single-owner event recorder for one `(rank, thread)` lane. Each rank
/// records only its own lane while running; lanes merge into a
/// [`super::TraceTimeline`] after the ranks join.
#[derive(Debug)]
pub struct Recorder {
    rank: usize,
    thread: usize,
    clock: Clock,
    events: Vec<TraceEvent>,
}

impl Recorder {
    pub fn new(rank: usize, thread: usize, clock: Clock) -> Self {
        Recorder { rank, thread, clock, events: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn now_ns(&self) -> i64 {
        self.clock.now_ns()
    }

    /// Runs `f` and records the elapsed interval as USEFUL work.
    pub fn useful<R>(&mut self, region: &str, instructions: u64, f: impl FnOnce() -> R) -> R {
        let t0 = self.clock.now_ns();
        let out = f();
        let t1 = self.clock.now_ns();
        self.push_interval(State::Useful, t0, t1, None, None, Some(region), Some(instructions));
        out
    }

    /// Records a communication interval that already happened (the runtime
    /// times its own blocking calls).
    pub fn comm(
        &mut self,
        state: State,
        t_start: i64,
        t_end: i64,
        peer: Option<usize>,
        bytes: Option<u64>,
        region: Option<&str>,
    ) {
        self.push_interval(state, t_start, t_end, peer, bytes, region, None);
    }

    fn push_interval(
        &mut self,
        state: State,
        t_start: i64,
        t_end: i64,
        peer: Option<usize>,
        bytes: Option<u64>,
        region: Option<&str>,
        instructions: Option<u64>,
    ) {
        // Timer resolution can make back-to-back intervals touch; clamp so
        // the lane stays non-overlapping by construction.
        let prev_end = self.events.last().map_or(i64::MIN, |e| e.t_end);
        let t_start = t_start.max(prev_end);
        let t_end = t_end.max(t_start);
        self.events.push(TraceEvent {
            rank: self.rank,
            thread: self.thread,
            state,
            t_start,
            t_end,
            peer,
            bytes,
            region: region.map(str::to_owned),
            instructions,
        });
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}
