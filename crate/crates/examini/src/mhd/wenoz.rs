//! Fifth-order WENO-Z interface reconstruction.
//!
//! Weights follow the Borges et al. form: α_k = d_k (1 + (τ₅/(β_k+ε))^p)
//! with τ₅ = |β₀ − β₂|, ε = 1e-40, p = 2, ideal weights d = (1/10, 6/10,
//! 3/10). Smoothness indicators are shared between the two interface sides
//! (the stencil reversal maps β₀ ↔ β₂).

const D0: f64 = 0.1;
const D1: f64 = 0.6;
const D2: f64 = 0.3;
const EPS: f64 = 1e-40;

/// Reconstructs both interface values of the middle cell from a 5-cell
/// stencil `(v_{i-2}, v_{i-1}, v_i, v_{i+1}, v_{i+2})`.
/// Returns `(left, right)` = (value at i−½ from the right side, value at
/// i+½ from the left side).
#[inline]
pub fn wenoz_reconstruct(v: &[f64; 5]) -> (f64, f64) {
    let b0 = 13.0 / 12.0 * sq(v[0] - 2.0 * v[1] + v[2]) + 0.25 * sq(v[0] - 4.0 * v[1] + 3.0 * v[2]);
    let b1 = 13.0 / 12.0 * sq(v[1] - 2.0 * v[2] + v[3]) + 0.25 * sq(v[1] - v[3]);
    let b2 = 13.0 / 12.0 * sq(v[2] - 2.0 * v[3] + v[4]) + 0.25 * sq(3.0 * v[2] - 4.0 * v[3] + v[4]);
    let tau = (b0 - b2).abs();
    let r0 = tau / (b0 + EPS);
    let r1 = tau / (b1 + EPS);
    let r2 = tau / (b2 + EPS);
    let (f0, f1, f2) = (1.0 + r0 * r0, 1.0 + r1 * r1, 1.0 + r2 * r2);

    // i+½ seen from the left.
    let a0 = D0 * f0;
    let a1 = D1 * f1;
    let a2 = D2 * f2;
    let inv = 1.0 / (a0 + a1 + a2);
    let q0 = 2.0 * v[0] - 7.0 * v[1] + 11.0 * v[2];
    let q1 = -v[1] + 5.0 * v[2] + 2.0 * v[3];
    let q2 = 2.0 * v[2] + 5.0 * v[3] - v[4];
    let right = inv * (a0 * q0 + a1 * q1 + a2 * q2) / 6.0;

    // i−½ seen from the right: same betas on the reversed stencil.
    let a0m = D0 * f2;
    let a1m = D1 * f1;
    let a2m = D2 * f0;
    let invm = 1.0 / (a0m + a1m + a2m);
    let q0m = 2.0 * v[4] - 7.0 * v[3] + 11.0 * v[2];
    let q1m = -v[3] + 5.0 * v[2] + 2.0 * v[1];
    let q2m = 2.0 * v[2] + 5.0 * v[1] - v[0];
    let left = invm * (a0m * q0m + a1m * q1m + a2m * q2m) / 6.0;

    (left, right)
}

#[inline(always)]
fn sq(x: f64) -> f64 {
    x * x
}

/// Pencil driver: `line` holds `n + 2g` cell values (`g ≥ 3` ghosts each
/// side, cell i at `line[i + g]`). Fills the `n + 1` interface states:
/// `wl[f]` is the left-side value at face f (from cell f−1), `wr[f]` the
/// right-side value (from cell f). Outputs are written with `stride`
/// between consecutive faces so callers can interleave components.
pub fn reconstruct_line(line: &[f64], n: usize, g: usize, wl: &mut [f64], wr: &mut [f64], stride: usize) {
    debug_assert!(g >= 3);
    debug_assert_eq!(line.len(), n + 2 * g);
    // cells −1..=n each produce their two face values
    for c in -1..=(n as isize) {
        let base = (c + g as isize) as usize;
        let sten = [line[base - 2], line[base - 1], line[base], line[base + 1], line[base + 2]];
        let (left, right) = wenoz_reconstruct(&sten);
        if c >= 0 {
            wr[(c as usize) * stride] = left;
        }
        if c + 1 <= n as isize {
            wl[((c + 1) as usize) * stride] = right;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_reproduce_exactly() {
        let (l, r) = wenoz_reconstruct(&[2.5; 5]);
        assert_eq!(l, 2.5);
        assert_eq!(r, 2.5);
    }

    #[test]
    fn linear_data_gives_exact_interfaces() {
        // v_i = a + b·i around the middle cell at i = 0
        let (a, b) = (1.3, 0.7);
        let v = [a - 2.0 * b, a - b, a, a + b, a + 2.0 * b];
        let (l, r) = wenoz_reconstruct(&v);
        assert!((l - (a - 0.5 * b)).abs() < 1e-13);
        assert!((r - (a + 0.5 * b)).abs() < 1e-13);
    }

    #[test]
    fn sin_interface_error_drops_fifth_order() {
        // cell averages of sin on meshes h and h/2; compare the i+½ value
        let face_err = |h: f64| {
            let avg = |lo: f64| (f64::cos(lo) - f64::cos(lo + h)) / h;
            let v = [
                avg(-2.5 * h),
                avg(-1.5 * h),
                avg(-0.5 * h),
                avg(0.5 * h),
                avg(1.5 * h),
            ];
            let (_, r) = wenoz_reconstruct(&v);
            (r - f64::sin(0.5 * h)).abs()
        };
        let e1 = face_err(0.2);
        let e2 = face_err(0.1);
        assert!(
            e1 / e2 >= 2f64.powf(4.5),
            "convergence ratio {} below fifth order",
            e1 / e2
        );
    }

    #[test]
    fn jump_reconstruction_stays_bounded() {
        // essentially non-oscillatory: face values remain inside the data range
        let v = [1.0, 1.0, 1.0, 0.0, 0.0];
        let (l, r) = wenoz_reconstruct(&v);
        for x in [l, r] {
            assert!((-0.05..=1.05).contains(&x), "oscillatory value {x}");
        }
    }

    #[test]
    fn line_driver_matches_pointwise_calls() {
        let n = 6;
        let g = 3;
        let line: Vec<f64> = (0..n + 2 * g).map(|i| ((i * i) % 7) as f64 * 0.3).collect();
        let mut wl = vec![0.0; n + 1];
        let mut wr = vec![0.0; n + 1];
        reconstruct_line(&line, n, g, &mut wl, &mut wr, 1);
        for f in 0..=n {
            let c = f as isize - 1 + g as isize; // cell left of face f
            let sten = [
                line[(c - 2) as usize],
                line[(c - 1) as usize],
                line[c as usize],
                line[(c + 1) as usize],
                line[(c + 2) as usize],
            ];
            assert_eq!(wl[f], wenoz_reconstruct(&sten).1);
        }
    }
}
