//! Cubic-spline SPH density and adaptive smoothing lengths.
//!
//! The kernel is the standard M4 spline with compact support 2h,
//! W(0, h) = 1/(π h³) and unit volume integral. Smoothing lengths solve
//! the effective-neighbour equation (4π/3) h³ n̄(h) = N_ngb by bracketed
//! bisection, where n̄(h) = Σ_j W(|r_ij|, h) includes the body itself;
//! neighbour candidates come from a tree range query over boxes within
//! the 2h support radius.

use super::tree::OctTree;
use super::{Body, GravityError, SphParams};
use crate::runtime::{parallel_fill, worker_count};
use std::f64::consts::PI;

/// M4 cubic spline, 3-D normalisation.
pub fn cubic_spline(r: f64, h: f64) -> f64 {
    let q = r / h;
    let sigma = 1.0 / (PI * h * h * h);
    if q < 1.0 {
        sigma * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
    } else if q < 2.0 {
        let t = 2.0 - q;
        sigma * 0.25 * t * t * t
    } else {
        0.0
    }
}

/// Indices of bodies with |r - center| < radius, in storage order.
fn range_query(tree: &OctTree, center: [f64; 3], radius: f64, out: &mut Vec<usize>) {
    out.clear();
    let r2 = radius * radius;
    let mut stack = vec![0usize];
    while let Some(ni) = stack.pop() {
        let node = &tree.nodes[ni];
        if node.dist2_to_point(center) >= r2 {
            continue;
        }
        if node.is_leaf() {
            out.extend(node.start..node.end);
        } else {
            for &c in &node.children {
                if c >= 0 {
                    stack.push(c as usize);
                }
            }
        }
    }
    out.sort_unstable();
}

fn effective_neighbours(
    tree: &OctTree,
    bodies: &[Body],
    center: [f64; 3],
    h: f64,
    scratch: &mut Vec<usize>,
) -> f64 {
    range_query(tree, center, 2.0 * h, scratch);
    let mut nbar = 0.0;
    for &j in scratch.iter() {
        let d = bodies[j].position;
        let dr = [d[0] - center[0], d[1] - center[1], d[2] - center[2]];
        let r = (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2]).sqrt();
        nbar += cubic_spline(r, h);
    }
    4.0 * PI / 3.0 * h * h * h * nbar
}

/// Smoothing length per body. Monotonicity of the neighbour count in h
/// makes the bracket-and-bisect search safe; a body that cannot reach
/// `n_ngb` effective neighbours (too few bodies in total) is reported,
/// not silently clamped.
pub fn find_hsml(
    tree: &OctTree,
    bodies: &[Body],
    params: &SphParams,
) -> Result<Vec<f64>, GravityError> {
    assert!(params.n_ngb >= 8.0, "n_ngb below 8 undersamples the kernel");
    assert!(params.tolerance > 0.0);
    let domain = &tree.domain;
    let volume: f64 = domain.size.iter().product();
    let h_seed = (volume / bodies.len() as f64).cbrt();

    let mut out: Vec<Result<f64, GravityError>> = (0..bodies.len()).map(|_| Ok(0.0)).collect();
    parallel_fill(&mut out, worker_count(), |i, slot| {
        let center = bodies[i].position;
        let mut scratch = Vec::new();
        let target = params.n_ngb;

        let mut hi = h_seed.max(1e-300);
        let mut grow = 0;
        while effective_neighbours(tree, bodies, center, hi, &mut scratch) < target {
            hi *= 2.0;
            grow += 1;
            if grow > 60 {
                *slot = Err(GravityError::NoConvergence { body: i, iterations: grow, last_h: hi });
                return;
            }
        }
        let mut lo = hi;
        while effective_neighbours(tree, bodies, center, lo, &mut scratch) > target {
            lo *= 0.5;
            if lo < 1e-300 {
                break;
            }
        }

        let mut h = 0.5 * (lo + hi);
        for _ in 0..params.max_iterations {
            let n = effective_neighbours(tree, bodies, center, h, &mut scratch);
            if (n - target).abs() <= params.tolerance * target {
                *slot = Ok(h);
                return;
            }
            if n < target {
                lo = h;
            } else {
                hi = h;
            }
            h = 0.5 * (lo + hi);
        }
        *slot = Err(GravityError::NoConvergence {
            body: i,
            iterations: params.max_iterations,
            last_h: h,
        });
    });

    out.into_iter().collect()
}

/// Gather-form density: rho_i = Σ_j m_j W(|r_ij|, h_i), self included.
pub fn sph_density(tree: &OctTree, bodies: &[Body], hsml: &[f64]) -> Vec<f64> {
    assert_eq!(bodies.len(), hsml.len());
    let mut rho = vec![0.0; bodies.len()];
    parallel_fill(&mut rho, worker_count(), |i, r| {
        let center = bodies[i].position;
        let h = hsml[i];
        let mut scratch = Vec::new();
        range_query(tree, center, 2.0 * h, &mut scratch);
        let mut sum = 0.0;
        for &j in &scratch {
            let d = bodies[j].position;
            let dr = [d[0] - center[0], d[1] - center[1], d[2] - center[2]];
            let dist = (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2]).sqrt();
            sum += bodies[j].mass * cubic_spline(dist, h);
        }
        *r = sum;
    });
    rho
}
