//! Tree-walk force accuracy against the O(n²) direct sum.
//!
//! Draws a random cloud, builds the octree once, then sweeps the opening
//! angle θ. For each θ the per-body and grouped walks are compared to the
//! direct sum: median / 99th-percentile / max relative error, plus the
//! interaction counts that explain where the speed comes from.
//!
//!     cargo run --release -p examini --example gravity_force_accuracy [bodies] [seed]

use examini::gravity::{
    bh_force, build_tree, direct_sum, grouped_walk_force, Body, Domain, WalkParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_errors(walk: &[[f64; 3]], exact: &[[f64; 3]]) -> Vec<f64> {
    walk.iter()
        .zip(exact)
        .map(|(a, b)| {
            let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
            let n2: f64 = b.iter().map(|c| c * c).sum();
            (d2 / n2).sqrt()
        })
        .collect()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bodies: Vec<Body> = (0..n)
        .map(|_| {
            Body::at(
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ],
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();

    let domain = Domain::enclosing(&bodies);
    let tree = build_tree(&mut bodies, &domain, 8).expect("tree build");
    println!("{n} bodies, seed {seed}, {} tree nodes", tree.nodes.len());

    let softening = 1e-4;
    let exact = direct_sum(&bodies, softening);
    let direct_pairs = (n * (n - 1)) as u64;
    println!("direct sum: {direct_pairs} pair evaluations (the oracle)\n");

    println!(
        "{:>5}  {:>10} {:>10} {:>10}  {:>12} {:>12}  {:>8}",
        "theta", "median", "p99", "max", "node evals", "pair evals", "work"
    );
    for theta in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let params = WalkParams { theta, softening, group_size: 32, direct_radius: 0.0 };
        let run = bh_force(&tree, &bodies, &params);
        let mut errs = rel_errors(&run.accel, &exact);
        errs.sort_by(f64::total_cmp);
        let work = (run.stats.monopole_evals + run.stats.particle_evals) as f64
            / direct_pairs as f64;
        println!(
            "{theta:>5.2}  {:>10.3e} {:>10.3e} {:>10.3e}  {:>12} {:>12}  {:>7.1}%",
            percentile(&errs, 0.5),
            percentile(&errs, 0.99),
            errs.last().copied().unwrap_or(0.0),
            run.stats.monopole_evals,
            run.stats.particle_evals,
            100.0 * work,
        );
    }

    // the grouped walk shares one interaction list per group of targets;
    // it may only be *more* conservative than the per-body walk
    let params = WalkParams::default();
    let per_body = bh_force(&tree, &bodies, &params);
    let grouped = grouped_walk_force(&tree, &bodies, &params);
    let mut e_body = rel_errors(&per_body.accel, &exact);
    let mut e_group = rel_errors(&grouped.accel, &exact);
    e_body.sort_by(f64::total_cmp);
    e_group.sort_by(f64::total_cmp);

    let mean_list = |s: &examini::gravity::WalkStats| {
        s.list_lengths.iter().sum::<u64>() as f64 / s.list_lengths.len() as f64
    };
    println!("\ngrouped walk at theta {} (groups of {}):", params.theta, params.group_size);
    println!(
        "  per-body: max err {:.3e}, mean list {:.0} entries over {} walks",
        e_body.last().unwrap(),
        mean_list(&per_body.stats),
        per_body.stats.list_lengths.len(),
    );
    println!(
        "  grouped:  max err {:.3e}, mean list {:.0} entries over {} walks",
        e_group.last().unwrap(),
        mean_list(&grouped.stats),
        grouped.stats.list_lengths.len(),
    );
    assert!(
        *e_group.last().unwrap() <= e_body.last().unwrap() + 1e-12,
        "grouped opening criterion must not lose accuracy"
    );
}
