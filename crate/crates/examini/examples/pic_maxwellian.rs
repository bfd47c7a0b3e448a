//! Two-species thermal plasma on a periodic 2D grid.
//!
//! Loads a quiet-start Maxwellian (electrons + heavy ions), seeds a small
//! standing E_x perturbation, and runs the semi-implicit cycle across two
//! logical ranks. Prints the energy ledger, the per-kernel timing roll-up,
//! and the efficiency metrics computed from the run's own trace.
//!
//!     cargo run --release -p examini --example pic_maxwellian [cells] [ppc] [cycles] [ranks]

use examini::pic::{run_pic, GmresConfig, PicConfig, SpeciesConfig};
use examini::trace::compute_pop_metrics;

fn main() {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(32);
    let ppc: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let cycles: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(25);
    let ranks: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    let cfg = PicConfig {
        cells: [cells, cells],
        extent: [1.0, 1.0],
        dt: 0.05,
        theta: 0.5,
        mover_iterations: 3,
        gmres: GmresConfig::default(),
        species: vec![
            SpeciesConfig {
                charge: -1.0,
                mass: 1.0,
                thermal: [0.05, 0.05, 0.05],
                ppc,
                density: 1.0,
            },
            SpeciesConfig {
                charge: 1.0,
                mass: 100.0,
                thermal: [0.005, 0.005, 0.005],
                ppc,
                density: 1.0,
            },
        ],
        seed: 42,
        quiet_start: true,
        background_b: [0.0, 0.0, 0.1],
        e_perturbation: 0.02,
        watchdog_secs: 120,
    };

    println!(
        "thermal plasma: {cells}x{cells} cells, {ppc} ppc x 2 species = {} particles, {ranks} ranks, {cycles} cycles",
        2 * cells * cells * ppc
    );

    let out = run_pic(&cfg, ranks, cycles).unwrap_or_else(|e| {
        eprintln!("run failed: {e}");
        std::process::exit(1);
    });

    let r0 = &out.results[0];
    print!("particles per rank:");
    for r in &out.results {
        print!(" rank{}={}", r.rank, r.particle_counts.iter().sum::<usize>());
    }
    let sent: u64 = out.results.iter().map(|r| r.sent_particles).sum();
    println!("  (migrated {sent} in total)");

    println!("\n cycle     field          kinetic        total         drift");
    let e0 = r0.energy[0].total();
    let stride = (cycles / 10).max(1);
    for s in r0.energy.iter().filter(|s| s.cycle % stride == 0 || s.cycle == cycles) {
        println!(
            "{:6}   {:.6e}   {:.6e}   {:.6e}   {:+.2e}",
            s.cycle,
            s.field,
            s.kinetic,
            s.total(),
            (s.total() - e0) / e0
        );
    }

    let iters = &r0.solver_iterations;
    println!(
        "\nfield solver: {} GMRES iterations min, {} max over {} solves",
        iters.iter().min().unwrap(),
        iters.iter().max().unwrap(),
        iters.len()
    );

    println!("\ncharge per species: {:+.6e} / {:+.6e} (net {:+.2e})",
        r0.moments.species_charge(0),
        r0.moments.species_charge(1),
        r0.moments.total_charge(),
    );

    println!("\nkernel seconds (summed over cycles, rank 0):");
    for kernel in ["CalculateField", "ParticlesMover", "GatherMoments"] {
        let secs: f64 = r0
            .kernel_rows
            .iter()
            .filter(|k| k.kernel == kernel)
            .map(|k| k.seconds)
            .sum();
        println!("  {kernel:<16} {secs:.4}");
    }

    match compute_pop_metrics(&out.timeline, None) {
        Ok(m) => println!(
            "\nefficiencies: LB {:.3}  Comm {:.3}  Parallel {:.3}",
            m.load_balance, m.communication_efficiency, m.parallel_efficiency
        ),
        Err(e) => println!("\nmetrics unavailable: {e}"),
    }
}
