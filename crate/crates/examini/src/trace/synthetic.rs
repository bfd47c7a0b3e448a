//! Synthetic trace builders: deterministic fixtures for the detector and a
//! seeded random-run generator used to exercise the metric identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{State, TraceEvent, TraceTimeline};

fn ev(
    rank: usize,
    state: State,
    t_start: i64,
    t_end: i64,
    peer: Option<usize>,
    bytes: Option<u64>,
) -> TraceEvent {
    TraceEvent {
        rank,
        thread: 0,
        state,
        t_start,
        t_end,
        peer,
        bytes,
        region: None,
        instructions: None,
    }
}

/// Two ranks exchange `run_len` tiny messages back to back between two
/// barriers: the canonical latency-bound pattern. `insert_large_at` swaps in
/// one bandwidth-sized (1 MiB) message at that position, splitting the run.
pub fn barrier_bounded_fixture(
    run_len: usize,
    small_bytes: u64,
    insert_large_at: Option<usize>,
) -> TraceTimeline {
    let msg_ns = 400i64;
    let end_of_msgs = 1_000 + (run_len as i64) * msg_ns;
    let mut tl = TraceTimeline::new(2, 1, (0, end_of_msgs + 1_000));
    for rank in 0..2 {
        tl.push(ev(rank, State::Barrier, 0, 1_000, None, None)).unwrap();
    }
    for i in 0..run_len {
        let t = 1_000 + (i as i64) * msg_ns;
        let bytes = if insert_large_at == Some(i) { 1 << 20 } else { small_bytes };
        tl.push(ev(0, State::Send, t, t + msg_ns, Some(1), Some(bytes))).unwrap();
        tl.push(ev(1, State::Recv, t, t + msg_ns, Some(0), Some(bytes))).unwrap();
    }
    for rank in 0..2 {
        tl.push(ev(rank, State::Barrier, end_of_msgs, end_of_msgs + 1_000, None, None)).unwrap();
    }
    tl
}

/// Forward-simulates a random but causally consistent run: random compute
/// bursts, ring exchanges with per-message latency, reductions and
/// barriers. Every emitted trace replays without error and satisfies the
/// metric identities, which makes the generator the workhorse for
/// randomized property checks.
pub fn random_timeline(seed: u64) -> TraceTimeline {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranks = rng.gen_range(2..=6);
    let phases = rng.gen_range(3..=9);
    let latency = 500i64;
    let byte_ns = 2i64; // 1 byte costs 2 ns on the simulated wire

    let mut clock = vec![0i64; ranks];
    let mut lanes: Vec<Vec<TraceEvent>> = vec![Vec::new(); ranks];

    for phase in 0..phases {
        match rng.gen_range(0..4) {
            // Compute burst, possibly imbalanced.
            0 | 1 => {
                for r in 0..ranks {
                    let work = rng.gen_range(1_000..50_000);
                    let region = if phase % 2 == 0 { Some("step") } else { None };
                    lanes[r].push(TraceEvent {
                        rank: r,
                        thread: 0,
                        state: State::Useful,
                        t_start: clock[r],
                        t_end: clock[r] + work,
                        peer: None,
                        bytes: None,
                        region: region.map(str::to_owned),
                        instructions: Some(work as u64 / 10),
                    });
                    clock[r] += work;
                }
            }
            // Ring exchange: rank r sends to r+1, receives from r-1.
            2 => {
                let bytes = rng.gen_range(64..8_192) as u64;
                let mut send_start = vec![0i64; ranks];
                for r in 0..ranks {
                    let to = (r + 1) % ranks;
                    let dur = rng.gen_range(100..400);
                    send_start[r] = clock[r];
                    lanes[r].push(ev(r, State::Send, clock[r], clock[r] + dur, Some(to), Some(bytes)));
                    clock[r] += dur;
                }
                for r in 0..ranks {
                    let from = (r + ranks - 1) % ranks;
                    let avail = send_start[from] + latency + bytes as i64 * byte_ns;
                    let end = clock[r].max(avail);
                    lanes[r].push(ev(r, State::Recv, clock[r], end, Some(from), Some(bytes)));
                    clock[r] = end;
                }
            }
            // Barrier or reduction.
            _ => {
                let state = if rng.gen_bool(0.5) { State::Barrier } else { State::Collective };
                let op_cost = rng.gen_range(100..800);
                let exit = clock.iter().max().unwrap() + op_cost;
                for r in 0..ranks {
                    lanes[r].push(ev(r, state, clock[r], exit, None, None));
                    clock[r] = exit;
                }
            }
        }
    }
    // Close every lane with a short useful tail so no rank ends mid-wait.
    for r in 0..ranks {
        let work = rng.gen_range(500..2_000);
        lanes[r].push(TraceEvent {
            rank: r,
            thread: 0,
            state: State::Useful,
            t_start: clock[r],
            t_end: clock[r] + work,
            peer: None,
            bytes: None,
            region: None,
            instructions: Some(work as u64 / 10),
        });
        clock[r] += work;
    }

    let t_end = *clock.iter().max().unwrap();
    let mut tl = TraceTimeline::new(ranks, 1, (0, t_end));
    for lane in lanes {
        for e in lane {
            tl.push(e).expect("generator emits ordered lanes");
        }
    }
    tl
}
