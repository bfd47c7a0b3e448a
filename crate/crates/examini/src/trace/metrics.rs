//! Multiplicative efficiency metrics over trace timelines.
//!
//! With `useful_i` the USEFUL time on rank i's master thread and `T` the
//! RoI wall-clock time:
//!
//! ```text
//! LB    = mean(useful) / max(useful)          load balance
//! CommE = max(useful) / T                     communication efficiency
//! PE    = mean(useful) / T = LB * CommE       parallel efficiency
//! SerE  = max(useful) / T_ideal               serialization efficiency
//! TE    = T_ideal / T                         transfer efficiency
//! ```
//!
//! so `CommE = SerE * TE` once an ideal-network replay supplies `T_ideal`.
//! Every metric is stored from its own defining ratio; the identities are
//! checked by tests rather than enforced by derivation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::replay::ReplayOutcome;
use super::{State, TraceError, TraceTimeline};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Region label the report is restricted to; `None` means the whole RoI.
    pub region: Option<String>,
    pub ranks: usize,
    pub t_ns: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_ideal_ns: Option<i64>,
    pub load_balance: f64,
    pub communication_efficiency: f64,
    pub parallel_efficiency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub serialization_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer_efficiency: Option<f64>,
    pub omp_core_efficiency: f64,
    pub per_rank_useful_ns: Vec<i64>,
}

impl EfficiencyReport {
    /// Flat `(region, metric, value)` rows for CSV emission.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let region = self.region.clone().unwrap_or_else(|| "global".into());
        let mut rows = vec![
            (region.clone(), "load_balance".into(), self.load_balance),
            (region.clone(), "communication_efficiency".into(), self.communication_efficiency),
            (region.clone(), "parallel_efficiency".into(), self.parallel_efficiency),
            (region.clone(), "omp_core_efficiency".into(), self.omp_core_efficiency),
        ];
        if let Some(v) = self.serialization_efficiency {
            rows.push((region.clone(), "serialization_efficiency".into(), v));
        }
        if let Some(v) = self.transfer_efficiency {
            rows.push((region.clone(), "transfer_efficiency".into(), v));
        }
        rows
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "region,metric,value")?;
        for (region, metric, value) in self.rows() {
            writeln!(w, "{region},{metric},{value}")?;
        }
        Ok(())
    }
}

/// Computes the replay-free metrics (LB, CommE, PE, OCE).
pub fn compute_pop_metrics(
    trace: &TraceTimeline,
    region: Option<&str>,
) -> Result<EfficiencyReport, TraceError> {
    let core = MetricCore::gather(trace, region)?;
    Ok(core.report(region, None, None))
}

/// As [`compute_pop_metrics`], additionally filling SerE and TE from an
/// ideal-network replay of the same trace.
pub fn compute_pop_metrics_with_replay(
    trace: &TraceTimeline,
    replay: &ReplayOutcome,
    region: Option<&str>,
) -> Result<EfficiencyReport, TraceError> {
    let core = MetricCore::gather(trace, region)?;
    let t_ideal = match region {
        None => replay.t_ideal_ns,
        Some(r) => region_span(&replay.timeline, r)?,
    };
    if t_ideal <= 0 {
        return Err(TraceError::DegenerateTrace);
    }
    let ser_e = core.max_useful as f64 / t_ideal as f64;
    let te = t_ideal as f64 / core.t as f64;
    Ok(core.report(region, Some(t_ideal), Some((ser_e, te))))
}

struct MetricCore {
    ranks: usize,
    t: i64,
    useful: Vec<i64>,
    max_useful: i64,
    oce: f64,
}

impl MetricCore {
    fn gather(trace: &TraceTimeline, region: Option<&str>) -> Result<Self, TraceError> {
        if trace.ranks() == 0 {
            return Err(TraceError::EmptyTrace);
        }
        let t = match region {
            None => trace.span(),
            Some(r) => region_span(trace, r)?,
        };
        if t <= 0 {
            return Err(TraceError::DegenerateTrace);
        }
        let useful: Vec<i64> = (0..trace.ranks()).map(|r| trace.rank_useful(r, region)).collect();
        let max_useful = *useful.iter().max().expect("at least one rank");
        if max_useful == 0 {
            return Err(TraceError::DegenerateTrace);
        }

        // Hybrid-level core efficiency: per rank, useful thread time over
        // useful plus OpenMP-runtime overhead, averaged across ranks.
        let mut oce_sum = 0.0;
        for rank in 0..trace.ranks() {
            let mut th_useful = 0i64;
            let mut th_omp = 0i64;
            for thread in 0..trace.threads_per_rank() {
                for ev in trace.lane(rank, thread) {
                    if !ev.has_region(region) {
                        continue;
                    }
                    match ev.state {
                        State::Useful => th_useful += ev.duration(),
                        State::OmpRuntime => th_omp += ev.duration(),
                        _ => {}
                    }
                }
            }
            oce_sum += if th_useful + th_omp == 0 {
                1.0
            } else {
                th_useful as f64 / (th_useful + th_omp) as f64
            };
        }
        let oce = oce_sum / trace.ranks() as f64;

        Ok(MetricCore { ranks: trace.ranks(), t, useful, max_useful, oce })
    }

    fn report(
        &self,
        region: Option<&str>,
        t_ideal: Option<i64>,
        ser_te: Option<(f64, f64)>,
    ) -> EfficiencyReport {
        let mean = self.useful.iter().sum::<i64>() as f64 / self.ranks as f64;
        EfficiencyReport {
            region: region.map(str::to_owned),
            ranks: self.ranks,
            t_ns: self.t,
            t_ideal_ns: t_ideal,
            load_balance: mean / self.max_useful as f64,
            communication_efficiency: self.max_useful as f64 / self.t as f64,
            parallel_efficiency: mean / self.t as f64,
            serialization_efficiency: ser_te.map(|p| p.0),
            transfer_efficiency: ser_te.map(|p| p.1),
            omp_core_efficiency: self.oce,
            per_rank_useful_ns: self.useful.clone(),
        }
    }
}

fn region_span(trace: &TraceTimeline, region: &str) -> Result<i64, TraceError> {
    let mut t_min = i64::MAX;
    let mut t_max = i64::MIN;
    for ev in trace.iter_events() {
        if ev.region.as_deref() == Some(region) {
            t_min = t_min.min(ev.t_start);
            t_max = t_max.max(ev.t_end);
        }
    }
    if t_min == i64::MAX {
        return Err(TraceError::RegionNotFound(region.to_owned()));
    }
    Ok(t_max - t_min)
}

/// Scaling ratios between a base run and a scaled run of the same workload.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalabilityReport {
    /// Computation scalability: total base USEFUL time over total scaled.
    pub computation_scalability: f64,
    /// Instruction scalability: total base instructions over total scaled.
    pub instruction_scalability: f64,
}

pub fn compute_scalability(
    base: &TraceTimeline,
    scaled: &TraceTimeline,
) -> Result<ScalabilityReport, TraceError> {
    let useful_base = base.total_useful();
    let useful_scaled = scaled.total_useful();
    if useful_base == 0 || useful_scaled == 0 {
        return Err(TraceError::DegenerateTrace);
    }
    let instr_base = total_instructions(base)?;
    let instr_scaled = total_instructions(scaled)?;
    if instr_base == 0 || instr_scaled == 0 {
        return Err(TraceError::DegenerateTrace);
    }
    Ok(ScalabilityReport {
        computation_scalability: useful_base as f64 / useful_scaled as f64,
        instruction_scalability: instr_base as f64 / instr_scaled as f64,
    })
}

/// GE = PE * CompS: the global efficiency of a scaled run relative to base.
pub fn global_efficiency(parallel_efficiency: f64, computation_scalability: f64) -> f64 {
    parallel_efficiency * computation_scalability
}

fn total_instructions(trace: &TraceTimeline) -> Result<u64, TraceError> {
    let mut total = 0u64;
    for ev in trace.iter_events() {
        if ev.state == State::Useful {
            match ev.instructions {
                Some(n) => total += n,
                None => {
                    return Err(TraceError::MissingCounters { rank: ev.rank, thread: ev.thread })
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::super::ideal_network_replay;
    use super::super::TraceEvent;
    use super::*;

    fn ev(rank: usize, state: State, t0: i64, t1: i64) -> TraceEvent {
        TraceEvent {
            rank,
            thread: 0,
            state,
            t_start: t0,
            t_end: t1,
            peer: None,
            bytes: None,
            region: None,
            instructions: Some((t1 - t0) as u64),
        }
    }

    /// Two ranks over T=10: rank 0 does 8 useful + 2 comm, rank 1 does
    /// 6 useful + 4 comm. Derived by hand: LB 0.875, CommE 0.8, PE 0.7.
    #[test]
    fn two_rank_fixture_matches_hand_values() {
        let mut tl = TraceTimeline::new(2, 1, (0, 10));
        tl.push(ev(0, State::Useful, 0, 8)).unwrap();
        let mut c0 = ev(0, State::Send, 8, 10);
        c0.peer = Some(1);
        tl.push(c0).unwrap();
        tl.push(ev(1, State::Useful, 0, 6)).unwrap();
        let mut c1 = ev(1, State::Recv, 6, 10);
        c1.peer = Some(0);
        tl.push(c1).unwrap();

        let rep = compute_pop_metrics(&tl, None).unwrap();
        assert!((rep.load_balance - 0.875).abs() < 1e-12);
        assert!((rep.communication_efficiency - 0.8).abs() < 1e-12);
        assert!((rep.parallel_efficiency - 0.7).abs() < 1e-12);
        assert!((rep.omp_core_efficiency - 1.0).abs() < 1e-12);
        assert!(
            (rep.parallel_efficiency - rep.load_balance * rep.communication_efficiency).abs()
                < 1e-12
        );
    }

    /// The late-send fixture: T=9, T_ideal=8, so SerE=0.5 and TE=8/9.
    #[test]
    fn replay_fixture_matches_hand_values() {
        let mut tl = TraceTimeline::new(2, 1, (0, 9));
        tl.push(ev(0, State::Useful, 0, 4)).unwrap();
        let mut s = ev(0, State::Send, 4, 5);
        s.peer = Some(1);
        tl.push(s).unwrap();
        let mut w = ev(1, State::Wait, 0, 5);
        w.peer = Some(0);
        tl.push(w).unwrap();
        tl.push(ev(1, State::Useful, 5, 9)).unwrap();

        let replay = ideal_network_replay(&tl).unwrap();
        let rep = compute_pop_metrics_with_replay(&tl, &replay, None).unwrap();
        assert_eq!(rep.t_ideal_ns, Some(8));
        assert!((rep.serialization_efficiency.unwrap() - 0.5).abs() < 1e-12);
        assert!((rep.transfer_efficiency.unwrap() - 8.0 / 9.0).abs() < 1e-12);
        assert!((rep.communication_efficiency - 4.0 / 9.0).abs() < 1e-12);
        let prod =
            rep.serialization_efficiency.unwrap() * rep.transfer_efficiency.unwrap();
        assert!((rep.communication_efficiency - prod).abs() < 1e-12);
    }

    #[test]
    fn all_idle_trace_is_degenerate_not_nan() {
        let mut tl = TraceTimeline::new(1, 1, (0, 10));
        tl.push(ev(0, State::Idle, 0, 10)).unwrap();
        assert!(matches!(compute_pop_metrics(&tl, None), Err(TraceError::DegenerateTrace)));
    }

    #[test]
    fn unknown_region_is_reported() {
        let mut tl = TraceTimeline::new(1, 1, (0, 10));
        tl.push(ev(0, State::Useful, 0, 10)).unwrap();
        assert!(matches!(
            compute_pop_metrics(&tl, Some("nope")),
            Err(TraceError::RegionNotFound(_))
        ));
    }

    #[test]
    fn oce_averages_thread_overhead() {
        let mut tl = TraceTimeline::new(1, 2, (0, 10));
        tl.push(ev(0, State::Useful, 0, 8)).unwrap();
        let mut worker = ev(0, State::Useful, 0, 6);
        worker.thread = 1;
        tl.push(worker).unwrap();
        let mut omp = ev(0, State::OmpRuntime, 6, 8);
        omp.thread = 1;
        omp.instructions = None;
        tl.push(omp).unwrap();
        let rep = compute_pop_metrics(&tl, None).unwrap();
        // 14 useful over 14 useful + 2 runtime.
        assert!((rep.omp_core_efficiency - 14.0 / 16.0).abs() < 1e-12);
    }

    /// 100 base instructions against 500 scaled gives InstrS = 0.2.
    #[test]
    fn instruction_scalability_ratio() {
        let mut base = TraceTimeline::new(1, 1, (0, 10));
        let mut b = ev(0, State::Useful, 0, 10);
        b.instructions = Some(100);
        base.push(b).unwrap();
        let mut scaled = TraceTimeline::new(1, 1, (0, 10));
        let mut s = ev(0, State::Useful, 0, 10);
        s.instructions = Some(500);
        scaled.push(s).unwrap();
        let rep = compute_scalability(&base, &scaled).unwrap();
        assert!((rep.instruction_scalability - 0.2).abs() < 1e-12);
        assert!((rep.computation_scalability - 1.0).abs() < 1e-12);
        assert!((global_efficiency(0.7, rep.computation_scalability) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn missing_counters_flagged() {
        let mut base = TraceTimeline::new(1, 1, (0, 10));
        let mut b = ev(0, State::Useful, 0, 10);
        b.instructions = None;
        base.push(b).unwrap();
        let scaled = base.clone();
        assert!(matches!(
            compute_scalability(&base, &scaled),
            Err(TraceError::MissingCounters { .. })
        ));
    }
}
