//! 3D Orszag–Tang vortex on a periodic unit cube with constrained transport.
//! Prints the conserved-quantity series (mass, energy, normalized max |div B|)
//! and the per-region timing summary, then the POP-style efficiency metrics
//! for the run's trace.
//!
//!   cargo run --release -p examini --example mhd_orszag_tang [cells] [steps] [ranks]
//!
//! Defaults: 32 cells, 20 steps, 2 ranks.

use examini::mhd::{
    run_mhd, DivbMode, MhdConfig, MhdSetup, Reconstruction, RiemannSolver, TimeStepper,
};
use examini::trace::compute_pop_metrics;

fn main() {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(32);
    let steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let ranks: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);

    let cfg = MhdConfig {
        cells: [cells; 3],
        extent: [[0.0, 1.0]; 3],
        gamma: 5.0 / 3.0,
        cfl: 0.3,
        reconstruction: Reconstruction::WenoZ,
        riemann: RiemannSolver::Hlld,
        time_stepper: TimeStepper::Rk3,
        divb_mode: DivbMode::Ct,
        setup: MhdSetup::OrszagTang { vz_amplitude: 0.01 },
        t_end: None,
        max_steps: Some(steps),
        glm_ch_ratio: 1.0,
        glm_damping: 0.18,
        layout: None,
        ghost_width: 3,
        series_every: (steps / 10).max(1),
        roi_last_steps: None,
        watchdog_secs: 120,
    };

    let out = run_mhd(&cfg, ranks).expect("run failed");

    println!("Orszag–Tang {cells}³, {ranks} ranks, CT divergence control");
    println!(
        "{:>5} {:>10} {:>16} {:>16} {:>12}",
        "step", "t", "mass", "energy", "max|divB|n"
    );
    for s in &out.results[0].series {
        println!(
            "{:>5} {:>10.6} {:>16.12} {:>16.12} {:>12.3e}",
            s.step, s.t, s.mass, s.energy, s.divb_max_normalized
        );
    }

    let r = &out.results[0];
    let first = &r.series[0];
    let last = r.series.last().unwrap();
    println!(
        "\nrelative drift over {} steps: mass {:.2e}, energy {:.2e}",
        r.steps,
        ((last.mass - first.mass) / first.mass).abs(),
        ((last.energy - first.energy) / first.energy).abs(),
    );
    let floors: u64 = out.results.iter().map(|r| r.pressure_floors + r.recon_floors).sum();
    let fallbacks: u64 = out.results.iter().map(|r| r.hlld_fallbacks).sum();
    println!("positivity floors: {floors}, HLLD degeneracy fallbacks: {fallbacks}");

    println!("\nper-region time (summed over ranks):");
    for (region, secs) in &out.summary.regions {
        println!("  {region:<12} {secs:>9.4} s");
    }

    match compute_pop_metrics(&out.timeline, None) {
        Ok(m) => println!(
            "\nPOP metrics: LB {:.3}  CommE {:.3}  PE {:.3}",
            m.load_balance, m.communication_efficiency, m.parallel_efficiency
        ),
        Err(e) => println!("\nPOP metrics unavailable: {e}"),
    }
}
