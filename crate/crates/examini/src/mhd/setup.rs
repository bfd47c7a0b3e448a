//! Benchmark problem setups: the 3D Orszag–Tang vortex and a circularly
//! polarized Alfvén wave propagating along the grid diagonal. Both live on
//! the periodic unit cube.

use super::PrimState;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Orszag–Tang primitive state at a point, extended to 3D by a small
/// sinusoidal vz perturbation that triggers out-of-plane dynamics.
pub fn init_orszag_tang_3d(vz_amplitude: f64) -> impl Fn([f64; 3]) -> PrimState {
    let rho = 25.0 / (36.0 * std::f64::consts::PI);
    let p = 5.0 / (12.0 * std::f64::consts::PI);
    let b0 = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    move |x: [f64; 3]| PrimState {
        rho,
        v: [-(TAU * x[1]).sin(), (TAU * x[0]).sin(), vz_amplitude * (TAU * x[2]).sin()],
        p,
        b: [-b0 * (TAU * x[1]).sin(), b0 * (2.0 * TAU * x[0]).sin(), 0.0],
        psi: 0.0,
    }
}

/// z-component of the Orszag–Tang vector potential; differencing it along
/// cell edges yields exactly divergence-free staggered faces.
pub fn orszag_tang_az() -> impl Fn(f64, f64) -> f64 {
    let b0 = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    move |x: f64, y: f64| b0 * ((TAU * y).cos() / TAU + (2.0 * TAU * x).cos() / (2.0 * TAU))
}

/// Exact traveling-wave solution: background B ∥ n̂ with |B| = 1, ρ = 1,
/// p = 0.1; the transverse field rotates with amplitude `A` and the
/// transverse velocity is −δB (Alfvén speed 1, propagation along +n̂).
#[derive(Clone, Copy, Debug)]
pub struct AlfvenWave {
    pub amplitude: f64,
    nhat: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    k: [f64; 3],
    omega: f64,
}

impl AlfvenWave {
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// Orthonormal wave frame (n̂, ê1, ê2).
    pub fn frame(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        (self.nhat, self.e1, self.e2)
    }

    pub fn prim_at(&self, x: [f64; 3], t: f64) -> PrimState {
        let phi = self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2] - self.omega * t;
        let (s, c) = phi.sin_cos();
        let mut b = [0.0; 3];
        let mut v = [0.0; 3];
        for d in 0..3 {
            let perp = self.amplitude * (c * self.e1[d] + s * self.e2[d]);
            b[d] = self.nhat[d] + perp;
            v[d] = -perp;
        }
        PrimState { rho: 1.0, v, p: 0.1, b, psi: 0.0 }
    }
}

/// One wavelength per unit-cube diagonal: k = 2π(1,1,1), ω = 2π√3.
pub fn cp_alfven_wave(amplitude: f64) -> AlfvenWave {
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    AlfvenWave {
        amplitude,
        nhat: [1.0 / s3, 1.0 / s3, 1.0 / s3],
        e1: [1.0 / s2, -1.0 / s2, 0.0],
        e2: [1.0 / s6, 1.0 / s6, -2.0 / s6],
        k: [TAU, TAU, TAU],
        omega: TAU * s3,
    }
}

/// Initial-data closure plus the analytic evaluator used for error
/// measurement.
pub fn init_cp_alfven(amplitude: f64) -> (impl Fn([f64; 3]) -> PrimState, AlfvenWave) {
    let wave = cp_alfven_wave(amplitude);
    (move |x: [f64; 3]| wave.prim_at(x, 0.0), wave)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alfven_evaluator_matches_initial_data() {
        let (init, wave) = init_cp_alfven(0.1);
        for x in [[0.0, 0.0, 0.0], [0.3, 0.7, 0.1], [0.99, 0.5, 0.25]] {
            assert_eq!(init(x), wave.prim_at(x, 0.0));
        }
    }

    #[test]
    fn alfven_frame_is_orthonormal_and_divergence_free() {
        let w = cp_alfven_wave(0.1);
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        assert!(dot(w.nhat, w.e1).abs() < 1e-15);
        assert!(dot(w.nhat, w.e2).abs() < 1e-15);
        assert!(dot(w.e1, w.e2).abs() < 1e-15);
        assert!((dot(w.e1, w.e1) - 1.0).abs() < 1e-15);
        assert!((dot(w.e2, w.e2) - 1.0).abs() < 1e-15);
        // k ⊥ both polarization axes: the wave carries no compressive part
        assert!(dot(w.k, w.e1).abs() < 1e-12);
        assert!(dot(w.k, w.e2).abs() < 1e-12);
    }

    #[test]
    fn alfven_advances_by_exact_translation() {
        let w = cp_alfven_wave(0.1);
        let t = 0.2 * w.period();
        // moving along n̂ by t·v_A shifts the phase by ωt
        let shift = [t / 3f64.sqrt(); 3];
        let a = w.prim_at([0.4 + shift[0], 0.1 + shift[1], 0.8 + shift[2]], t);
        let b = w.prim_at([0.4, 0.1, 0.8], 0.0);
        for d in 0..3 {
            assert!((a.b[d] - b.b[d]).abs() < 1e-12);
            assert!((a.v[d] - b.v[d]).abs() < 1e-12);
        }
    }

    #[test]
    fn orszag_tang_momentum_cancels_on_the_lattice() {
        let init = init_orszag_tang_3d(0.01);
        let n = 16;
        let mut m = [0.0f64; 3];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let x = [
                        (i as f64 + 0.5) / n as f64,
                        (j as f64 + 0.5) / n as f64,
                        (k as f64 + 0.5) / n as f64,
                    ];
                    let w = init(x);
                    for d in 0..3 {
                        m[d] += w.rho * w.v[d];
                    }
                }
            }
        }
        for d in 0..3 {
            assert!(m[d].abs() < 1e-10, "net momentum {} on axis {d}", m[d]);
        }
    }
}
