//! Convergence study on the circularly polarized Alfvén wave — an exact
//! nonlinear solution of ideal MHD, propagated along the grid diagonal for
//! one full period and compared against the analytic evaluator.
//!
//!   cargo run --release -p examini --example mhd_alfven_convergence
//!   cargo run --release -p examini --example mhd_alfven_convergence -- --full
//!
//! `--full` adds the 64³ run (a few minutes single-threaded); without it the
//! study covers 16³ and 32³.

use examini::mhd::{
    cp_alfven_wave, run_mhd, DivbMode, MhdConfig, MhdSetup, Reconstruction, RiemannSolver,
    TimeStepper, MX, RHO,
};

fn config(n: usize, t_end: f64) -> MhdConfig {
    MhdConfig {
        cells: [n; 3],
        extent: [[0.0, 1.0]; 3],
        gamma: 5.0 / 3.0,
        cfl: 0.3,
        reconstruction: Reconstruction::WenoZ,
        riemann: RiemannSolver::Hlld,
        time_stepper: TimeStepper::Rk3,
        divb_mode: DivbMode::Glm,
        setup: MhdSetup::CpAlfven { amplitude: 0.1 },
        t_end: Some(t_end),
        max_steps: None,
        glm_ch_ratio: 1.0,
        glm_damping: 0.18,
        layout: None,
        ghost_width: 3,
        series_every: 1_000_000,
        roi_last_steps: None,
        watchdog_secs: 120,
    }
}

/// Mean |v_perp − v_perp^analytic| over all cells at the final time.
fn l1_vperp_error(n: usize) -> (f64, usize) {
    let wave = cp_alfven_wave(0.1);
    let (_, e1, e2) = wave.frame();
    let cfg = config(n, wave.period());
    let out = run_mhd(&cfg, 1).expect("run failed");
    let r = &out.results[0];
    let dx = 1.0 / n as f64;
    let mut err = 0.0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = (k * n + j) * n + i;
                let rho = r.interior[RHO][idx];
                let v = [
                    r.interior[MX][idx] / rho,
                    r.interior[MX + 1][idx] / rho,
                    r.interior[MX + 2][idx] / rho,
                ];
                let x = [
                    (i as f64 + 0.5) * dx,
                    (j as f64 + 0.5) * dx,
                    (k as f64 + 0.5) * dx,
                ];
                let wa = wave.prim_at(x, r.t_final);
                let d = [v[0] - wa.v[0], v[1] - wa.v[1], v[2] - wa.v[2]];
                let d1 = d[0] * e1[0] + d[1] * e1[1] + d[2] * e1[2];
                let d2 = d[0] * e2[0] + d[1] * e2[1] + d[2] * e2[2];
                err += (d1 * d1 + d2 * d2).sqrt();
            }
        }
    }
    (err / (n * n * n) as f64, r.steps)
}

fn main() {
    let full = std::env::args().any(|a| a == "--full");
    let resolutions: &[usize] = if full { &[16, 32, 64] } else { &[16, 32] };

    let wave = cp_alfven_wave(0.1);
    println!(
        "circularly polarized Alfvén wave, one period t = {:.6}, diagonal propagation",
        wave.period()
    );
    println!("{:>6} {:>8} {:>14} {:>8}", "cells", "steps", "L1(v_perp)", "order");

    let mut prev: Option<f64> = None;
    for &n in resolutions {
        let (err, steps) = l1_vperp_error(n);
        match prev {
            Some(p) => println!("{:>6} {:>8} {:>14.6e} {:>8.2}", n, steps, err, (p / err).log2()),
            None => println!("{:>6} {:>8} {:>14.6e} {:>8}", n, steps, err, "-"),
        }
        prev = Some(err);
    }
}
