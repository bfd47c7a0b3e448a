//! Ideal-network replay: reschedules a trace as if every message transfer
//! were instantaneous, keeping per-lane event order and all USEFUL
//! durations. The resulting makespan `T_ideal` separates serialization from
//! transfer cost in the efficiency hierarchy.

use std::collections::HashMap;

use super::{State, TraceError, TraceEvent, TraceTimeline};

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    /// Makespan of the rescheduled run, relative to the RoI origin.
    pub t_ideal_ns: i64,
    /// The rescheduled timeline (same lanes, same event order, new times).
    pub timeline: TraceTimeline,
}

/// Replay rules, per event kind:
///
/// * USEFUL / OMP_RUNTIME / IDLE keep their duration;
/// * SEND collapses to zero duration and its payload becomes available to
///   the receiver at the moment the SEND begins;
/// * RECV / WAIT end as soon as both the lane and the matched payload are
///   ready (pure dependency wait, no transfer time);
/// * COLLECTIVE / BARRIER participants all exit at
///   `max over participants (arrival + recorded duration)`, so a balanced
///   barrier chain replays to exactly its original schedule.
///
/// Replay is idempotent: replaying an already-ideal timeline reproduces it.
pub fn ideal_network_replay(trace: &TraceTimeline) -> Result<ReplayOutcome, TraceError> {
    if trace.ranks() == 0 {
        return Err(TraceError::EmptyTrace);
    }
    let n_lanes = trace.ranks() * trace.threads_per_rank();
    let lanes: Vec<&[TraceEvent]> = (0..trace.ranks())
        .flat_map(|r| (0..trace.threads_per_rank()).map(move |t| (r, t)))
        .map(|(r, t)| trace.lane(r, t))
        .collect();

    let matches = match_messages(trace, &lanes)?;
    let groups = match_collectives(trace, &lanes)?;

    // Scheduling state.
    let t0 = trace.roi().0;
    let mut clock = vec![t0; n_lanes];
    let mut cursor = vec![0usize; n_lanes];
    // Replayed start time of each SEND, keyed by (lane, event index).
    let mut send_start: HashMap<(usize, usize), i64> = HashMap::new();
    // Replayed (start, end) of every event, same keying.
    let mut placed: HashMap<(usize, usize), (i64, i64)> = HashMap::new();
    // Arrival clocks per collective group.
    let mut arrivals: Vec<HashMap<usize, i64>> = vec![HashMap::new(); groups.groups.len()];

    loop {
        let mut progress = false;
        let mut done = true;
        for lane_idx in 0..n_lanes {
            loop {
                let idx = cursor[lane_idx];
                let lane = lanes[lane_idx];
                if idx >= lane.len() {
                    break;
                }
                done = false;
                let ev = &lane[idx];
                let arrive = clock[lane_idx];
                match ev.state {
                    State::Useful | State::OmpRuntime | State::Idle => {
                        let end = arrive + ev.duration();
                        placed.insert((lane_idx, idx), (arrive, end));
                        clock[lane_idx] = end;
                        cursor[lane_idx] += 1;
                        progress = true;
                    }
                    State::Send => {
                        send_start.insert((lane_idx, idx), arrive);
                        placed.insert((lane_idx, idx), (arrive, arrive));
                        cursor[lane_idx] += 1;
                        progress = true;
                    }
                    State::Recv | State::Wait => {
                        let src = matches.recv_to_send[&(lane_idx, idx)];
                        match send_start.get(&src) {
                            Some(&avail) => {
                                let end = arrive.max(avail);
                                placed.insert((lane_idx, idx), (arrive, end));
                                clock[lane_idx] = end;
                                cursor[lane_idx] += 1;
                                progress = true;
                            }
                            None => break, // sender not scheduled yet
                        }
                    }
                    State::Collective | State::Barrier => {
                        let gid = groups.membership[&(lane_idx, idx)];
                        arrivals[gid].entry(lane_idx).or_insert(arrive);
                        let group = &groups.groups[gid];
                        if arrivals[gid].len() == group.len() {
                            let exit = group
                                .iter()
                                .map(|&(l, i)| arrivals[gid][&l] + lanes[l][i].duration())
                                .max()
                                .expect("non-empty group");
                            for &(l, i) in group {
                                placed.insert((l, i), (arrivals[gid][&l], exit));
                                clock[l] = exit;
                                cursor[l] += 1;
                            }
                            progress = true;
                        }
                        break; // either finalized (cursor moved) or blocked
                    }
                }
                // A finalized collective may have advanced this lane's
                // cursor already; re-entering the inner loop handles it.
            }
        }
        if done {
            break;
        }
        if !progress {
            return Err(TraceError::UnmatchedMessage(
                "replay deadlocked: trace is not causally consistent".into(),
            ));
        }
    }

    // Assemble the rescheduled timeline.
    let t_ideal = placed.values().map(|&(_, end)| end).max().unwrap_or(t0) - t0;
    let mut out = TraceTimeline::new(trace.ranks(), trace.threads_per_rank(), (t0, t0 + t_ideal));
    for (lane_idx, lane) in lanes.iter().enumerate() {
        for (idx, ev) in lane.iter().enumerate() {
            let (start, end) = placed[&(lane_idx, idx)];
            let mut ev = ev.clone();
            ev.t_start = start;
            ev.t_end = end;
            out.push(ev)?;
        }
    }
    Ok(ReplayOutcome { t_ideal_ns: t_ideal, timeline: out })
}

struct MessageMatches {
    recv_to_send: HashMap<(usize, usize), (usize, usize)>,
}

/// FIFO-matches the k-th SEND from rank s to rank r with the k-th RECV/WAIT
/// on rank r naming peer s, pooling a rank's threads in time order.
fn match_messages(
    trace: &TraceTimeline,
    lanes: &[&[TraceEvent]],
) -> Result<MessageMatches, TraceError> {
    let tpr = trace.threads_per_rank();
    let mut sends: HashMap<(usize, usize), Vec<(i64, usize, usize)>> = HashMap::new();
    let mut recvs: HashMap<(usize, usize), Vec<(i64, usize, usize)>> = HashMap::new();
    for (lane_idx, lane) in lanes.iter().enumerate() {
        let rank = lane_idx / tpr;
        for (idx, ev) in lane.iter().enumerate() {
            if !ev.state.is_p2p() {
                continue;
            }
            let peer = ev.peer.ok_or_else(|| {
                TraceError::UnmatchedMessage(format!(
                    "{:?} on rank {rank} at t={} carries no peer",
                    ev.state, ev.t_start
                ))
            })?;
            if peer >= trace.ranks() {
                return Err(TraceError::UnmatchedMessage(format!(
                    "{:?} on rank {rank} names peer {peer} outside 0..{}",
                    ev.state,
                    trace.ranks()
                )));
            }
            match ev.state {
                State::Send => sends
                    .entry((rank, peer))
                    .or_default()
                    .push((ev.t_start, lane_idx, idx)),
                State::Recv | State::Wait => recvs
                    .entry((peer, rank))
                    .or_default()
                    .push((ev.t_start, lane_idx, idx)),
                _ => unreachable!(),
            }
        }
    }
    for list in sends.values_mut().chain(recvs.values_mut()) {
        list.sort_by_key(|&(t, lane, idx)| (t, lane, idx));
    }

    let mut recv_to_send = HashMap::new();
    for (channel, send_list) in &sends {
        let recv_list = recvs.remove(channel).unwrap_or_default();
        if recv_list.len() != send_list.len() {
            return Err(TraceError::UnmatchedMessage(format!(
                "channel {} -> {}: {} sends but {} receives",
                channel.0,
                channel.1,
                send_list.len(),
                recv_list.len()
            )));
        }
        for (s, r) in send_list.iter().zip(&recv_list) {
            recv_to_send.insert((r.1, r.2), (s.1, s.2));
        }
    }
    if let Some((channel, orphans)) = recvs.iter().find(|(_, v)| !v.is_empty()) {
        return Err(TraceError::UnmatchedMessage(format!(
            "channel {} -> {}: {} receives with no matching send",
            channel.0,
            channel.1,
            orphans.len()
        )));
    }
    Ok(MessageMatches { recv_to_send })
}

struct CollectiveGroups {
    groups: Vec<Vec<(usize, usize)>>,
    membership: HashMap<(usize, usize), usize>,
}

/// Groups the k-th COLLECTIVE/BARRIER with a given region label across all
/// ranks; every rank must participate in every occurrence.
fn match_collectives(
    trace: &TraceTimeline,
    lanes: &[&[TraceEvent]],
) -> Result<CollectiveGroups, TraceError> {
    type Key = (State, Option<String>);
    let tpr = trace.threads_per_rank();
    let mut occurrences: HashMap<(Key, usize), Vec<(usize, usize, usize)>> = HashMap::new();
    let mut per_lane_counts: HashMap<(usize, Key), usize> = HashMap::new();
    for (lane_idx, lane) in lanes.iter().enumerate() {
        let rank = lane_idx / tpr;
        for (idx, ev) in lane.iter().enumerate() {
            if !ev.state.is_sync() {
                continue;
            }
            let key: Key = (ev.state, ev.region.clone());
            let n = per_lane_counts.entry((lane_idx, key.clone())).or_insert(0);
            occurrences.entry((key, *n)).or_default().push((rank, lane_idx, idx));
            *n += 1;
        }
    }

    let mut keys: Vec<_> = occurrences.keys().cloned().collect();
    keys.sort();
    let mut groups = Vec::new();
    let mut membership = HashMap::new();
    for key in keys {
        let members = &occurrences[&key];
        let mut ranks_seen: Vec<usize> = members.iter().map(|m| m.0).collect();
        ranks_seen.sort_unstable();
        ranks_seen.dedup();
        if ranks_seen.len() != trace.ranks() || members.len() != trace.ranks() {
            return Err(TraceError::UnmatchedMessage(format!(
                "collective {:?} occurrence {} has {} participants, expected {}",
                key.0 .0,
                key.1,
                members.len(),
                trace.ranks()
            )));
        }
        let gid = groups.len();
        for &(_, lane_idx, idx) in members {
            membership.insert((lane_idx, idx), gid);
        }
        groups.push(members.iter().map(|&(_, l, i)| (l, i)).collect());
    }
    Ok(CollectiveGroups { groups, membership })
}
