//! In-process logical ranks.
//!
//! Each rank is a thread owning its slice of the problem; ranks exchange
//! typed messages over channels and reduce through a fixed-order fold, so a
//! run's numerical results depend only on `(config, rank count, seed)` —
//! never on worker scheduling. Every communication call records itself on
//! the rank's trace lane.

use std::sync::mpsc;
use std::time::Duration;

use thiserror::Error;

use crate::trace::{Clock, Recorder, State, TraceError, TraceTimeline};

#[derive(Debug, Error)]
pub enum CommError {
    #[error("rank {rank}: no message from peer {peer} (tag {tag:#x}) within {waited_ms} ms")]
    NeighborTimeout { rank: usize, peer: usize, tag: u64, waited_ms: u64 },
    #[error("rank {rank}: peer {peer} hung up")]
    Disconnected { rank: usize, peer: usize },
}

/// Message payloads. Floats travel as raw `f64` so halo data is preserved
/// bit for bit; counts travel as integers.
#[derive(Clone, Debug)]
pub enum Payload {
    F64(Vec<f64>),
    U64(Vec<u64>),
}

impl Payload {
    pub fn byte_len(&self) -> u64 {
        match self {
            Payload::F64(v) => (v.len() * 8) as u64,
            Payload::U64(v) => (v.len() * 8) as u64,
        }
    }

    pub fn into_f64(self) -> Vec<f64> {
        match self {
            Payload::F64(v) => v,
            Payload::U64(_) => panic!("expected f64 payload"),
        }
    }

    pub fn into_u64(self) -> Vec<u64> {
        match self {
            Payload::U64(v) => v,
            Payload::F64(_) => panic!("expected u64 payload"),
        }
    }
}

struct Packet {
    from: usize,
    tag: u64,
    payload: Payload,
}

/// Per-rank communicator: senders to every peer plus an inbox with a small
/// stash for out-of-order arrivals. Receives match on `(peer, tag)`.
pub struct Comm {
    rank: usize,
    size: usize,
    senders: Vec<mpsc::Sender<Packet>>,
    inbox: mpsc::Receiver<Packet>,
    stash: Vec<Packet>,
    watchdog: Duration,
}

impl Comm {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Posts a message; never blocks (channels are unbounded), so a batch
    /// of sends can always be initiated before any receive completes.
    pub fn send(&self, rec: &mut Recorder, to: usize, tag: u64, payload: Payload, region: &str) {
        let bytes = payload.byte_len();
        let t0 = rec.now_ns();
        self.senders[to]
            .send(Packet { from: self.rank, tag, payload })
            .expect("receiver alive for the duration of the run");
        let t1 = rec.now_ns();
        rec.comm(State::Send, t0, t1, Some(to), Some(bytes), Some(region));
    }

    /// Blocking matched receive with a watchdog timeout.
    pub fn recv(
        &mut self,
        rec: &mut Recorder,
        from: usize,
        tag: u64,
        region: &str,
    ) -> Result<Payload, CommError> {
        let t0 = rec.now_ns();
        let payload = self.recv_raw(from, tag)?;
        let t1 = rec.now_ns();
        rec.comm(State::Recv, t0, t1, Some(from), Some(payload.byte_len()), Some(region));
        Ok(payload)
    }

    fn recv_raw(&mut self, from: usize, tag: u64) -> Result<Payload, CommError> {
        if let Some(pos) = self.stash.iter().position(|p| p.from == from && p.tag == tag) {
            return Ok(self.stash.swap_remove(pos).payload);
        }
        let deadline = std::time::Instant::now() + self.watchdog;
        loop {
            let remaining = deadline.saturating_duration_since(std::time::Instant::now());
            if remaining.is_zero() {
                return Err(CommError::NeighborTimeout {
                    rank: self.rank,
                    peer: from,
                    tag,
                    waited_ms: self.watchdog.as_millis() as u64,
                });
            }
            match self.inbox.recv_timeout(remaining) {
                Ok(p) if p.from == from && p.tag == tag => return Ok(p.payload),
                Ok(p) => self.stash.push(p),
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    return Err(CommError::NeighborTimeout {
                        rank: self.rank,
                        peer: from,
                        tag,
                        waited_ms: self.watchdog.as_millis() as u64,
                    })
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(CommError::Disconnected { rank: self.rank, peer: from })
                }
            }
        }
    }

    fn send_raw(&self, to: usize, tag: u64, payload: Payload) {
        self.senders[to]
            .send(Packet { from: self.rank, tag, payload })
            .expect("receiver alive for the duration of the run");
    }

    /// Rendezvous of all ranks; recorded as a BARRIER interval.
    pub fn barrier(&mut self, rec: &mut Recorder, seq: u64) -> Result<(), CommError> {
        let t0 = rec.now_ns();
        let tag = compose_tag(TAG_BARRIER, seq);
        if self.rank == 0 {
            for peer in 1..self.size {
                self.recv_raw(peer, tag)?;
            }
            for peer in 1..self.size {
                self.send_raw(peer, tag, Payload::U64(vec![]));
            }
        } else {
            self.send_raw(0, tag, Payload::U64(vec![]));
            self.recv_raw(0, tag)?;
        }
        let t1 = rec.now_ns();
        rec.comm(State::Barrier, t0, t1, None, None, None);
        Ok(())
    }

    /// Element-wise sum of `buf` across ranks, folded in rank order on rank
    /// 0 and broadcast back: the result is identical on every rank and
    /// independent of arrival order.
    pub fn allreduce_sum(
        &mut self,
        rec: &mut Recorder,
        seq: u64,
        buf: &mut [f64],
        region: &str,
    ) -> Result<(), CommError> {
        self.allreduce_fold(rec, seq, buf, region, |acc, x| {
            for (a, b) in acc.iter_mut().zip(x) {
                *a += b;
            }
        })
    }

    pub fn allreduce_min(
        &mut self,
        rec: &mut Recorder,
        seq: u64,
        buf: &mut [f64],
        region: &str,
    ) -> Result<(), CommError> {
        self.allreduce_fold(rec, seq, buf, region, |acc, x| {
            for (a, b) in acc.iter_mut().zip(x) {
                *a = a.min(*b);
            }
        })
    }

    pub fn allreduce_max(
        &mut self,
        rec: &mut Recorder,
        seq: u64,
        buf: &mut [f64],
        region: &str,
    ) -> Result<(), CommError> {
        self.allreduce_fold(rec, seq, buf, region, |acc, x| {
            for (a, b) in acc.iter_mut().zip(x) {
                *a = a.max(*b);
            }
        })
    }

    fn allreduce_fold(
        &mut self,
        rec: &mut Recorder,
        seq: u64,
        buf: &mut [f64],
        region: &str,
        fold: impl Fn(&mut [f64], &[f64]),
    ) -> Result<(), CommError> {
        let t0 = rec.now_ns();
        let tag = compose_tag(TAG_REDUCE, seq);
        if self.rank == 0 {
            for peer in 1..self.size {
                let part = self.recv_raw(peer, tag)?.into_f64();
                fold(buf, &part);
            }
            for peer in 1..self.size {
                self.send_raw(peer, tag, Payload::F64(buf.to_vec()));
            }
        } else {
            self.send_raw(0, tag, Payload::F64(buf.to_vec()));
            let result = self.recv_raw(0, tag)?.into_f64();
            buf.copy_from_slice(&result);
        }
        let t1 = rec.now_ns();
        let bytes = (buf.len() * 8) as u64;
        rec.comm(State::Collective, t0, t1, None, Some(bytes), Some(region));
        Ok(())
    }

    /// Gathers a variable-length vector from every rank onto rank 0
    /// (rank order); other ranks get `None`.
    pub fn gather_root(
        &mut self,
        rec: &mut Recorder,
        seq: u64,
        data: Vec<f64>,
        region: &str,
    ) -> Result<Option<Vec<Vec<f64>>>, CommError> {
        let t0 = rec.now_ns();
        let tag = compose_tag(TAG_GATHER, seq);
        let bytes = (data.len() * 8) as u64;
        let out = if self.rank == 0 {
            let mut parts = vec![data];
            for peer in 1..self.size {
                parts.push(self.recv_raw(peer, tag)?.into_f64());
            }
            Some(parts)
        } else {
            self.send_raw(0, tag, Payload::F64(data));
            None
        };
        let t1 = rec.now_ns();
        rec.comm(State::Collective, t0, t1, None, Some(bytes), Some(region));
        Ok(out)
    }
}

const TAG_BARRIER: u32 = 0xB000_0000;
const TAG_REDUCE: u32 = 0xC000_0000;
const TAG_GATHER: u32 = 0xD000_0000;

/// Tags are `(family | phase, sequence)` pairs packed into 64 bits.
pub fn compose_tag(family: u32, seq: u64) -> u64 {
    ((family as u64) << 32) | (seq & 0xFFFF_FFFF)
}

pub struct RankCtx {
    pub comm: Comm,
    pub rec: Recorder,
}

pub struct RunOutput<T> {
    pub results: Vec<T>,
    pub recorders: Vec<Recorder>,
}

impl<T> RunOutput<T> {
    /// Merges the per-rank recorders into one timeline (one thread per
    /// rank). `roi` narrows the analysis window; default is the full run.
    pub fn into_timeline(self, roi: Option<(i64, i64)>) -> Result<(Vec<T>, TraceTimeline), TraceError> {
        let ranks = self.recorders.len();
        let tl = TraceTimeline::from_recorders(ranks, 1, self.recorders, roi)?;
        Ok((self.results, tl))
    }
}

/// Default watchdog for matched receives.
pub const DEFAULT_WATCHDOG: Duration = Duration::from_secs(60);

/// Spawns `ranks` logical ranks and runs `f` on each. Panics in any rank
/// propagate. Results come back in rank order together with the trace
/// recorders.
pub fn run_ranks<T, F>(ranks: usize, watchdog: Duration, f: F) -> RunOutput<T>
where
    T: Send,
    F: Fn(&mut RankCtx) -> T + Sync,
{
    assert!(ranks >= 1, "need at least one rank");
    let clock = Clock::start();

    let mut senders_proto: Vec<mpsc::Sender<Packet>> = Vec::with_capacity(ranks);
    let mut inboxes: Vec<mpsc::Receiver<Packet>> = Vec::with_capacity(ranks);
    for _ in 0..ranks {
        let (tx, rx) = mpsc::channel();
        senders_proto.push(tx);
        inboxes.push(rx);
    }

    let mut ctxs: Vec<RankCtx> = inboxes
        .into_iter()
        .enumerate()
        .map(|(rank, inbox)| RankCtx {
            comm: Comm {
                rank,
                size: ranks,
                senders: senders_proto.clone(),
                inbox,
                stash: Vec::new(),
                watchdog,
            },
            rec: Recorder::new(rank, 0, clock),
        })
        .collect();
    drop(senders_proto);

    let f = &f;
    let mut results: Vec<Option<T>> = Vec::new();
    let mut recorders: Vec<Option<Recorder>> = Vec::new();
    for _ in 0..ranks {
        results.push(None);
        recorders.push(None);
    }

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(ranks);
        for mut ctx in ctxs.drain(..) {
            handles.push(scope.spawn(move || {
                let out = f(&mut ctx);
                (out, ctx.rec)
            }));
        }
        for (rank, handle) in handles.into_iter().enumerate() {
            let (out, rec) = handle.join().unwrap_or_else(|e| std::panic::resume_unwind(e));
            results[rank] = Some(out);
            recorders[rank] = Some(rec);
        }
    });

    RunOutput {
        results: results.into_iter().map(|r| r.expect("rank completed")).collect(),
        recorders: recorders.into_iter().map(|r| r.expect("rank completed")).collect(),
    }
}

/// Worker cap: hardware parallelism, optionally clamped by EXAMINI_WORKERS.
pub fn worker_count() -> usize {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("EXAMINI_WORKERS").ok().and_then(|s| s.parse::<usize>().ok()) {
        Some(n) if n >= 1 => hw.min(n),
        _ => hw,
    }
}

/// Applies `f` to disjoint chunks of `out` on up to `workers` threads.
/// Each element is written by exactly one worker, so the result is
/// schedule-independent.
pub fn parallel_fill<O: Send, F>(out: &mut [O], workers: usize, f: F)
where
    F: Fn(usize, &mut O) + Sync,
{
    let workers = workers.max(1);
    if workers == 1 || out.len() <= 1 {
        for (i, slot) in out.iter_mut().enumerate() {
            f(i, slot);
        }
        return;
    }
    let chunk = out.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        for (c, slice) in out.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                for (i, slot) in slice.iter_mut().enumerate() {
                    f(c * chunk + i, slot);
                }
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_match_on_peer_and_tag() {
        let out = run_ranks(2, DEFAULT_WATCHDOG, |ctx| {
            let me = ctx.comm.rank();
            if me == 0 {
                // Send two tagged messages out of order of the receive.
                ctx.comm.send(&mut ctx.rec, 1, compose_tag(1, 7), Payload::F64(vec![7.0]), "t");
                ctx.comm.send(&mut ctx.rec, 1, compose_tag(1, 3), Payload::F64(vec![3.0]), "t");
                0.0
            } else {
                let a = ctx.comm.recv(&mut ctx.rec, 0, compose_tag(1, 3), "t").unwrap();
                let b = ctx.comm.recv(&mut ctx.rec, 0, compose_tag(1, 7), "t").unwrap();
                a.into_f64()[0] * 10.0 + b.into_f64()[0]
            }
        });
        assert_eq!(out.results[1], 37.0);
    }

    #[test]
    fn allreduce_folds_in_rank_order_everywhere() {
        let out = run_ranks(4, DEFAULT_WATCHDOG, |ctx| {
            let mut buf = [(ctx.comm.rank() + 1) as f64];
            ctx.comm.allreduce_sum(&mut ctx.rec, 0, &mut buf, "r").unwrap();
            buf[0]
        });
        assert!(out.results.iter().all(|&v| v == 10.0));
    }

    #[test]
    fn reductions_and_barriers_trace_consistently() {
        let out = run_ranks(3, DEFAULT_WATCHDOG, |ctx| {
            let mut buf = [ctx.comm.rank() as f64];
            ctx.comm.allreduce_max(&mut ctx.rec, 0, &mut buf, "r").unwrap();
            ctx.comm.barrier(&mut ctx.rec, 1).unwrap();
            buf[0]
        });
        assert!(out.results.iter().all(|&v| v == 2.0));
        let (_, tl) = out.into_timeline(None).unwrap();
        // One COLLECTIVE and one BARRIER per rank; replay must accept them.
        let replay = crate::trace::ideal_network_replay(&tl).unwrap();
        assert!(replay.t_ideal_ns <= tl.span());
    }

    #[test]
    fn missing_peer_times_out() {
        let out = run_ranks(2, Duration::from_millis(50), |ctx| {
            if ctx.comm.rank() == 1 {
                match ctx.comm.recv(&mut ctx.rec, 0, compose_tag(9, 9), "t") {
                    Err(CommError::NeighborTimeout { peer: 0, .. }) => true,
                    other => panic!("expected timeout, got {other:?}"),
                }
            } else {
                true // rank 0 deliberately never sends
            }
        });
        assert!(out.results.iter().all(|&ok| ok));
    }

    #[test]
    fn parallel_fill_is_deterministic() {
        let mut a = vec![0usize; 1000];
        let mut b = vec![0usize; 1000];
        parallel_fill(&mut a, 1, |i, slot| *slot = i * i);
        parallel_fill(&mut b, 7, |i, slot| *slot = i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn worker_count_is_at_least_one() {
        assert!(worker_count() >= 1);
    }
}
