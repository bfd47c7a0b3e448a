//! Restarted GMRES with modified Gram–Schmidt Arnoldi and Givens rotations.
//!
//! The operator is a black box `apply(x, out)`, so the same kernel serves
//! the matrix-free curl–curl solve and any dense test operator. The Givens
//! update keeps the least-squares residual available at every inner step
//! without forming the iterate, which is what makes the per-iteration
//! residual history cheap to record.

use super::PicError;

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// Relative residual after each inner iteration, starting with the
    /// residual of the initial guess.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Arnoldi produced a zero vector: the solution is exact in the current
    /// Krylov subspace and the iterate was returned early.
    pub breakdown: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = rhs` where `A` is only available as `apply`.
///
/// Convergence is measured against `tolerance` as a residual relative to
/// `|rhs|` (absolute when the right-hand side vanishes). `restart` bounds
/// the Krylov dimension per cycle; `max_iters` bounds the total inner
/// iterations across cycles.
pub fn gmres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    x0: &[f64],
    tolerance: f64,
    restart: usize,
    max_iters: usize,
) -> Result<GmresOutcome, PicError> {
    let n = rhs.len();
    assert_eq!(x0.len(), n, "initial guess dimension mismatch");
    let bnorm = norm(rhs);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };

    let mut x = x0.to_vec();
    let mut residuals = Vec::new();
    let mut iterations = 0usize;
    let mut work = vec![0.0; n];

    loop {
        // r = rhs - A x
        apply(&x, &mut work);
        let mut r: Vec<f64> = rhs.iter().zip(&work).map(|(b, ax)| b - ax).collect();
        let beta = norm(&r);
        let rel = beta / scale;
        if residuals.is_empty() {
            residuals.push(rel);
        }
        if rel <= tolerance {
            return Ok(GmresOutcome { x, residuals, iterations, breakdown: false });
        }
        if iterations >= max_iters {
            return Err(PicError::GmresNoConvergence { residual: rel, iterations });
        }

        let m = restart.min(max_iters - iterations).max(1);
        for v in &mut r {
            *v /= beta;
        }
        let mut basis: Vec<Vec<f64>> = vec![r];
        // Column-major Hessenberg: h[j] holds column j with j+2 entries.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0usize;
        let mut breakdown = false;

        for k in 0..m {
            apply(&basis[k], &mut work);
            let mut col = vec![0.0; k + 2];
            let mut w = work.clone();
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                col[j] = hjk;
                for (wi, vji) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vji;
                }
            }
            let hnext = norm(&w);
            col[k + 1] = hnext;

            // Apply the accumulated rotations to the new column.
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = (col[k] * col[k] + col[k + 1] * col[k + 1]).sqrt();
            let (c, s) = if denom > 0.0 {
                (col[k] / denom, col[k + 1] / denom)
            } else {
                (1.0, 0.0)
            };
            cs.push(c);
            sn.push(s);
            col[k] = denom;
            col[k + 1] = 0.0;
            let gt = c * g[k];
            g[k + 1] = -s * g[k];
            g[k] = gt;
            h.push(col);

            iterations += 1;
            k_used = k + 1;
            let rel_k = g[k + 1].abs() / scale;
            residuals.push(rel_k);

            if hnext <= f64::EPSILON * denom.max(1.0) {
                breakdown = true;
                break;
            }
            if rel_k <= tolerance || iterations >= max_iters {
                break;
            }
            for v in &mut w {
                *v /= hnext;
            }
            basis.push(w);
        }

        // Back-substitute the triangular system for the update coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for (xi, vji) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * vji;
            }
        }

        if breakdown {
            return Ok(GmresOutcome { x, residuals, iterations, breakdown: true });
        }
        let rel_now = g[k_used].abs() / scale;
        if rel_now <= tolerance {
            return Ok(GmresOutcome { x, residuals, iterations, breakdown: false });
        }
        if iterations >= max_iters {
            return Err(PicError::GmresNoConvergence { residual: rel_now, iterations });
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense row-major matrix-vector product for test operators.
    pub(crate) fn dense_apply(a: &[f64], n: usize) -> impl Fn(&[f64], &mut [f64]) + '_ {
        move |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            }
        }
    }

    /// Gaussian elimination with partial pivoting; the reference solution
    /// GMRES is checked against.
    pub(crate) fn solve_dense(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m = a.to_vec();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap()
                })
                .unwrap();
            if pivot != col {
                for j in 0..n {
                    m.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let d = m[col * n + col];
            assert!(d.abs() > 1e-300, "singular test matrix");
            for row in (col + 1)..n {
                let f = m[row * n + col] / d;
                for j in col..n {
                    m[row * n + j] -= f * m[col * n + j];
                }
                rhs[row] -= f * rhs[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..n {
                s -= m[i * n + j] * x[j];
            }
            x[i] = s / m[i * n + i];
        }
        x
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let rhs = vec![3.0, -1.0, 2.5, 0.25];
        let apply = |x: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        let got = gmres(&apply, &rhs, &vec![0.0; 4], 1e-12, 20, 100).unwrap();
        assert_eq!(got.iterations, 1);
        for (a, b) in got.x.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_initial_guess_returns_immediately() {
        let a = vec![2.0, 1.0, 0.0, 3.0];
        let apply = dense_apply(&a, 2);
        let x_true = vec![1.5, -2.0];
        let mut rhs = vec![0.0; 2];
        apply(&x_true, &mut rhs);
        let got = gmres(&apply, &rhs, &x_true, 1e-10, 20, 100).unwrap();
        assert_eq!(got.iterations, 0);
        assert!(got.residuals[0] <= 1e-10);
        assert_eq!(got.x, x_true);
    }

    #[test]
    fn nonsymmetric_system_matches_gaussian_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = 4;
            let mut a = vec![0.0; n * n];
            for (i, v) in a.iter_mut().enumerate() {
                *v = rng.gen_range(-1.0..1.0);
                if i % (n + 1) == 0 {
                    *v += 4.0; // diagonal dominance keeps the system well conditioned
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let oracle = solve_dense(&a, &b);
            let apply = dense_apply(&a, n);
            let got = gmres(&apply, &b, &vec![0.0; n], 1e-14, 20, 200).unwrap();
            for (g, o) in got.x.iter().zip(&oracle) {
                assert!((g - o).abs() < 1e-12, "gmres {g} vs oracle {o}");
            }
        }
    }

    #[test]
    fn residual_history_is_monotone_within_a_restart_cycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let mut a = vec![0.0; n * n];
        for (i, v) in a.iter_mut().enumerate() {
            *v = rng.gen_range(-1.0..1.0);
            if i % (n + 1) == 0 {
                *v += 6.0;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let apply = dense_apply(&a, n);
        let restart = 7;
        let got = gmres(&apply, &b, &vec![0.0; n], 1e-12, restart, 500).unwrap();
        // Entry 0 is the initial residual; each restart cycle then appends
        // up to `restart` monotone entries.
        for (i, pair) in got.residuals.windows(2).enumerate() {
            if i % restart != 0 || i == 0 {
                assert!(
                    pair[1] <= pair[0] * (1.0 + 1e-12),
                    "residual rose within a cycle at step {i}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
        assert!(*got.residuals.last().unwrap() <= 1e-12);
    }

    #[test]
    fn rank_deficient_reachability_flags_breakdown() {
        // A = I on a 3-dim space, rhs in span{e1}: Krylov space collapses
        // after one step and the solver reports an exact-in-subspace result.
        let a = vec![
            1.0, 0.0, 0.0, //
            0.0, 2.0, 0.0, //
            0.0, 0.0, 3.0,
        ];
        let apply = dense_apply(&a, 3);
        let rhs = vec![5.0, 0.0, 0.0];
        let got = gmres(&apply, &rhs, &vec![0.0; 3], 1e-30, 10, 50).unwrap();
        assert!(got.breakdown);
        assert!((got.x[0] - 5.0).abs() < 1e-13);
        assert_eq!(&got.x[1..], &[0.0, 0.0]);
    }

    #[test]
    fn max_iters_exhaustion_reports_no_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let mut a = vec![0.0; n * n];
        for (i, v) in a.iter_mut().enumerate() {
            *v = rng.gen_range(-1.0..1.0);
            if i % (n + 1) == 0 {
                *v += 5.0;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let apply = dense_apply(&a, n);
        match gmres(&apply, &b, &vec![0.0; n], 1e-15, 4, 6) {
            Err(PicError::GmresNoConvergence { residual, iterations }) => {
                assert_eq!(iterations, 6);
                assert!(residual > 1e-15);
            }
            other => panic!("expected GmresNoConvergence, got {other:?}"),
        }
    }
}
