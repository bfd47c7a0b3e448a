//! Three-stage strong-stability-preserving Runge-Kutta (Shu–Osher form):
//!
//!   u¹ = u + Δt L(u)
//!   u² = ¾ u + ¼ (u¹ + Δt L(u¹))
//!   uⁿ⁺¹ = ⅓ u + ⅔ (u² + Δt L(u²))

pub trait RkState: Clone {
    /// self += s · rhs
    fn add_scaled(&mut self, rhs: &Self, s: f64);
    /// self = a · self + b · other
    fn blend(&mut self, a: f64, other: &Self, b: f64);
}

impl RkState for Vec<f64> {
    fn add_scaled(&mut self, rhs: &Self, s: f64) {
        for (u, r) in self.iter_mut().zip(rhs) {
            *u += s * r;
        }
    }

    fn blend(&mut self, a: f64, other: &Self, b: f64) {
        for (u, o) in self.iter_mut().zip(other) {
            *u = a * *u + b * o;
        }
    }
}

/// Advances `u` by one SSP-RK3 step; `rhs` is evaluated exactly three times.
pub fn ssp_rk3<S: RkState>(u: &mut S, dt: f64, rhs: impl FnMut(&S) -> S) {
    ssp_rk3_with(u, dt, rhs, |_| {});
}

/// Like [`ssp_rk3`], but runs `post_stage` after each stage combination —
/// used to re-derive constrained quantities (e.g. cell-centered fields from
/// staggered faces) before the next RHS evaluation sees the state.
pub fn ssp_rk3_with<S: RkState>(
    u: &mut S,
    dt: f64,
    mut rhs: impl FnMut(&S) -> S,
    mut post_stage: impl FnMut(&mut S),
) {
    let u0 = u.clone();
    let l0 = rhs(u);
    u.add_scaled(&l0, dt);
    post_stage(u);
    let l1 = rhs(u);
    u.add_scaled(&l1, dt);
    u.blend(0.25, &u0, 0.75);
    post_stage(u);
    let l2 = rhs(u);
    u.add_scaled(&l2, dt);
    u.blend(2.0 / 3.0, &u0, 1.0 / 3.0);
    post_stage(u);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_is_a_fixed_point_to_roundoff() {
        // the stage blends (¼u + ¾u₀ etc.) round their products, so exact
        // bitwise identity is one ulp out of reach
        let start: Vec<f64> = (1..100).map(|i| (i as f64).sqrt() * 0.37).collect();
        let mut u = start.clone();
        ssp_rk3(&mut u, 0.125, |s| vec![0.0; s.len()]);
        for (a, b) in u.iter().zip(&start) {
            assert!((a - b).abs() <= 1e-15 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn exponential_decay_has_fourth_order_local_error() {
        let mut u = vec![1.0];
        ssp_rk3(&mut u, 0.1, |s| vec![-s[0]]);
        assert!((u[0] - (-0.1f64).exp()).abs() < 5e-6);
    }

    #[test]
    fn halving_dt_cuts_one_step_advection_error_cubically() {
        // advect sin(2πx) at unit speed with 6th-order central differences,
        // so the spatial term cannot mask the temporal order
        let n = 32;
        let dx = 1.0 / n as f64;
        let rhs = move |u: &Vec<f64>| -> Vec<f64> {
            let mut d = vec![0.0; n];
            for i in 0..n {
                let v = |off: isize| u[((i as isize + off).rem_euclid(n as isize)) as usize];
                d[i] = -(45.0 * (v(1) - v(-1)) - 9.0 * (v(2) - v(-2)) + (v(3) - v(-3)))
                    / (60.0 * dx);
            }
            d
        };
        let err = |dt: f64| -> f64 {
            let mut u: Vec<f64> = (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * i as f64 * dx).sin())
                .collect();
            ssp_rk3(&mut u, dt, rhs);
            (0..n)
                .map(|i| {
                    let x = i as f64 * dx - dt;
                    (u[i] - (2.0 * std::f64::consts::PI * x).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        assert!(
            e1 / e2 >= 2f64.powf(3.5),
            "one-step error ratio {} below third order",
            e1 / e2
        );
    }
}
