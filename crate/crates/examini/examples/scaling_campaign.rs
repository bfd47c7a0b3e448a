//! End-to-end scaling campaign on the synthetic kernel: run, report,
//! baseline, regression-check.
//!
//! Weak and strong campaigns share the measurement machinery — median of
//! repeated runs, speedup normalised by the work ratio, efficiency against
//! ideal scaling. Afterwards the strong result seeds a baseline store and
//! is checked against itself, then against a doctored "10x faster"
//! baseline to show a failing check. Artifacts land in a temp directory.
//!
//!     cargo run --release -p examini --example scaling_campaign [max_ranks] [size]

use examini::bench::{
    emit_report, regression_check, run_campaign, App, CampaignResult, CampaignSpec,
    MachineProfile, Mode, RegressionStatus,
};

fn print_points(result: &CampaignResult) {
    println!(
        "  {:>5} {:>10} {:>12} {:>9} {:>7} {:>6}",
        "ranks", "size", "walltime", "speedup", "ideal", "eff"
    );
    for p in &result.points {
        println!(
            "  {:>5} {:>10} {:>10.2}ms {:>9.2} {:>7.0} {:>6.3}",
            p.rank_count,
            p.resolution,
            p.walltime_s * 1e3,
            p.speedup,
            p.ideal_speedup,
            p.efficiency
        );
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let max_ranks: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    let size: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2_000_000);

    let mut rank_counts = vec![1usize];
    while *rank_counts.last().unwrap() * 2 <= max_ranks {
        rank_counts.push(rank_counts.last().unwrap() * 2);
    }
    let machine = MachineProfile::detect();
    println!(
        "machine: {} with {} workers (fingerprint {})",
        machine.cpu_model,
        machine.workers,
        machine.fingerprint()
    );

    let spec = |mode: Mode| CampaignSpec {
        app: App::Synthetic,
        mode,
        rank_counts: rank_counts.clone(),
        size,
        repetitions: 3,
        seed: 17,
        baseline_ref: None,
    };

    println!("\nweak scaling ({size} work units per rank):");
    let weak = run_campaign(&spec(Mode::Weak), None).expect("weak campaign");
    print_points(&weak);

    println!("\nstrong scaling ({size} work units total):");
    let strong = run_campaign(&spec(Mode::Strong), None).expect("strong campaign");
    print_points(&strong);

    let out = std::env::temp_dir().join(format!("examini-campaign-{}", std::process::id()));
    let (csv, json) = emit_report(&strong, &out, "strong").expect("emit report");
    println!("\nreport written to {} and {}", csv.display(), json.display());

    // baseline cycle: record, re-check (pass), then shrink the stored
    // walltime to fake a regression (fail)
    let baselines = out.join("baselines");
    let tolerance = 25.0; // generous: repeated runs on a busy host jitter
    let recorded = regression_check(&strong, &baselines, tolerance, true).expect("record");
    println!("\nbaselines recorded: {} entr(ies)", recorded.entries.len());

    let again = run_campaign(&spec(Mode::Strong), None).expect("second run");
    let checked = regression_check(&again, &baselines, tolerance, false).expect("check");
    for e in &checked.entries {
        match &e.status {
            RegressionStatus::Pass { delta_pct, .. } => {
                println!("  pass r{:<3} delta {delta_pct:+.1}%", e.rank_count)
            }
            RegressionStatus::Fail { delta_pct, .. } => {
                println!("  FAIL r{:<3} delta {delta_pct:+.1}%", e.rank_count)
            }
            other => println!("  r{:<3} {other:?}", e.rank_count),
        }
    }
    println!("within {tolerance}% of the stored baseline: {}", checked.passed);

    // a baseline 10x below reality turns every entry into a failure
    for entry in std::fs::read_dir(&baselines).expect("read store") {
        let path = entry.expect("entry").path();
        let mut rec: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).expect("read")).expect("parse");
        let w = rec["walltime_s"].as_f64().expect("walltime");
        rec["walltime_s"] = serde_json::json!(w / 10.0);
        std::fs::write(&path, serde_json::to_string_pretty(&rec).expect("encode")).expect("write");
    }
    let vs_fast = regression_check(&again, &baselines, tolerance, false).expect("check");
    let failures = vs_fast
        .entries
        .iter()
        .filter(|e| matches!(e.status, RegressionStatus::Fail { .. }))
        .count();
    println!(
        "against a 10x-faster fake baseline: passed = {}, {} of {} entries flagged",
        vs_fast.passed,
        failures,
        vs_fast.entries.len()
    );
    assert!(!vs_fast.passed, "a 10x slowdown must not pass a {tolerance}% gate");

    let _ = std::fs::remove_dir_all(&out);
}
