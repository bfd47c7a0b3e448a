//! Latency-antipattern detection: many tiny messages vs one aggregate.
//!
//! Runs the same neighbour exchange twice. The chatty variant posts each
//! boundary value as its own message, paying per-message latency; the
//! aggregated variant packs the batch into a single payload. The detector
//! flags the chatty run and stays quiet on the aggregated one.
//!
//!     cargo run --release -p examini --example antipattern_detect [ranks] [messages]

use examini::runtime::{run_ranks, Payload, DEFAULT_WATCHDOG};
use examini::trace::{detect_latency_antipattern, AntipatternParams, TraceTimeline};

fn exchange(ranks: usize, messages: u64, aggregate: bool) -> TraceTimeline {
    let run = run_ranks(ranks, DEFAULT_WATCHDOG, |ctx| {
        let rank = ctx.comm.rank();
        let peer = rank ^ 1; // pair ranks (0,1), (2,3), ...
        if peer >= ctx.comm.size() {
            return;
        }
        if aggregate {
            let batch = vec![rank as f64; messages as usize];
            ctx.comm.send(&mut ctx.rec, peer, 0, Payload::F64(batch), "halo");
            let got = ctx.comm.recv(&mut ctx.rec, peer, 0, "halo").expect("recv");
            assert_eq!(got.into_f64().len(), messages as usize);
        } else {
            for m in 0..messages {
                ctx.comm.send(&mut ctx.rec, peer, m, Payload::F64(vec![rank as f64]), "halo");
            }
            for m in 0..messages {
                let got = ctx.comm.recv(&mut ctx.rec, peer, m, "halo").expect("recv");
                assert_eq!(got.into_f64()[0], peer as f64);
            }
        }
    });
    run.into_timeline(None).expect("merge recorders").1
}

fn report(label: &str, tl: &TraceTimeline, params: &AntipatternParams) {
    let findings = detect_latency_antipattern(tl, params);
    println!("\n{label}: {} finding(s)", findings.len());
    for f in &findings {
        println!(
            "  ranks {:?}  window [{} ns, {} ns]  run of {} messages  latency bill {} ns",
            f.ranks, f.t_start, f.t_end, f.run_length, f.accumulated_latency_ns
        );
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let ranks: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let messages: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(64);

    let params = AntipatternParams::default();
    println!(
        "detector: runs of >= {} messages <= {} bytes with gaps <= {} ns",
        params.min_run, params.max_bytes, params.max_gap_ns
    );

    let chatty = exchange(ranks, messages, false);
    report(
        &format!("chatty exchange ({messages} single-value messages per rank)"),
        &chatty,
        &params,
    );
    let findings = detect_latency_antipattern(&chatty, &params);
    assert!(!findings.is_empty(), "the chatty exchange must be flagged");
    let longest = findings.iter().map(|f| f.run_length).max().unwrap();
    assert!(
        longest >= messages as usize,
        "expected a run covering all {messages} sends, saw {longest}"
    );

    let aggregated = exchange(ranks, messages, true);
    report("aggregated exchange (one batched message per rank)", &aggregated, &params);
    assert!(
        detect_latency_antipattern(&aggregated, &params).is_empty(),
        "a single large message is bandwidth-bound, not a latency pattern"
    );

    println!(
        "\nsame data moved; aggregation removed {} tiny messages per rank",
        messages - 1
    );
}
