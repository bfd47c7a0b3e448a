//! Iterated implicit-midpoint particle mover.
//!
//! Each particle solves the midpoint system
//!   v̄ = vⁿ + (q dt / 2m)(E(x̄) + v̄ × B(x̄)),  x̄ = xⁿ + v̄ dt/2
//! by fixed-point iteration on x̄: the fields are re-gathered at the
//! current midpoint guess and the rotation equation for v̄ is then solved
//! exactly in closed form, so in a uniform B the speed is preserved to
//! roundoff and the per-step rotation angle is 2·atan(qB dt/2m). The full
//! update is xⁿ⁺¹ = xⁿ + v̄ dt, vⁿ⁺¹ = 2v̄ − vⁿ.

use super::grid::FieldGrid;
use super::particles::ParticleSet;
use super::PicError;

#[inline]
fn wrap(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // tiny negative inputs can round the remainder up to l itself
    if r >= l {
        0.0
    } else {
        r
    }
}

/// Solves v̄ = a + v̄ × b in closed form.
#[inline]
fn midpoint_velocity(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let adotb = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let axb = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let denom = 1.0 + b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    [
        (a[0] + axb[0] + adotb * b[0]) / denom,
        (a[1] + axb[1] + adotb * b[1]) / denom,
        (a[2] + axb[2] + adotb * b[2]) / denom,
    ]
}

/// Advances every particle of one species by dt through the grid fields.
/// `species` only labels the error on a non-finite update.
pub fn particle_mover(
    parts: &mut ParticleSet,
    grid: &FieldGrid,
    dt: f64,
    iterations: usize,
    species: usize,
) -> Result<(), PicError> {
    let [lx, ly] = grid.extent;
    for i in 0..parts.len() {
        let beta = 0.5 * parts.qm[i] * dt;
        let (x0, y0) = (parts.x[i], parts.y[i]);
        let v0 = [parts.vx[i], parts.vy[i], parts.vz[i]];

        let mut xm = x0;
        let mut ym = y0;
        let mut vbar = v0;
        for _ in 0..iterations {
            let (e, b) = grid.gather_eb(xm, ym);
            let a = [
                v0[0] + beta * e[0],
                v0[1] + beta * e[1],
                v0[2] + beta * e[2],
            ];
            vbar = midpoint_velocity(a, [beta * b[0], beta * b[1], beta * b[2]]);
            xm = wrap(x0 + 0.5 * dt * vbar[0], lx);
            ym = wrap(y0 + 0.5 * dt * vbar[1], ly);
        }

        let xn = wrap(x0 + dt * vbar[0], lx);
        let yn = wrap(y0 + dt * vbar[1], ly);
        let vn = [
            2.0 * vbar[0] - v0[0],
            2.0 * vbar[1] - v0[1],
            2.0 * vbar[2] - v0[2],
        ];
        if !(xn.is_finite() && yn.is_finite() && vn.iter().all(|c| c.is_finite())) {
            return Err(PicError::NonFiniteParticle { species, index: i });
        }
        parts.x[i] = xn;
        parts.y[i] = yn;
        parts.vx[i] = vn[0];
        parts.vy[i] = vn[1];
        parts.vz[i] = vn[2];
    }
    Ok(())
}
