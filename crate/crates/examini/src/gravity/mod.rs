//! Tree gravity with space-filling-curve locality, plus the SPH
//! density / smoothing-length kernel.
//!
//! Bodies are sorted along a Hilbert curve; the oct-tree is then built by
//! splitting contiguous key ranges, so every node owns a contiguous slice
//! of the body array and walks touch memory in curve order. Forces come
//! from three interchangeable routes: an O(n²) direct summation (the
//! oracle), the classic per-body Barnes–Hut walk, and a grouped walk that
//! builds one shared interaction list per Hilbert-contiguous group of
//! bodies with a conservative acceptance test (a node is opened if any
//! group member would open it) and direct summation inside a fixed radius
//! around the group.

mod force;
mod hilbert;
mod io;
mod sph;
mod tree;

pub use force::{bh_force, direct_sum, grouped_walk_force, ForceResult, WalkStats};
pub use hilbert::hilbert_key;
pub use io::{load_bodies, save_bodies, write_force_comparison_csv};
pub use sph::{cubic_spline, find_hsml, sph_density};
pub use tree::{build_tree, OctTree, TreeNode, DEFAULT_LEAF_CAPACITY};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GravityError {
    #[error("position {position:?} lies outside the domain")]
    OutOfDomain { position: [f64; 3] },
    #[error("degenerate domain: axis {axis} has extent {extent}")]
    DegenerateDomain { axis: usize, extent: f64 },
    #[error("smoothing length for body {body} did not converge in {iterations} bisections (last h = {last_h:.6e})")]
    NoConvergence { body: usize, iterations: usize, last_h: f64 },
    #[error("snapshot header: {0}")]
    MalformedHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Body {
    pub position: [f64; 3],
    pub mass: f64,
    pub velocity: [f64; 3],
    /// Only active bodies receive forces; all bodies act as sources.
    pub active: bool,
    /// Locality key; refreshed by [`build_tree`].
    #[serde(default)]
    pub hilbert_key: u64,
}

impl Body {
    pub fn at(position: [f64; 3], mass: f64) -> Self {
        Body { position, mass, velocity: [0.0; 3], active: true, hilbert_key: 0 }
    }
}

/// Axis-aligned box the Hilbert curve is anchored to.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct Domain {
    pub min: [f64; 3],
    pub size: [f64; 3],
}

impl Domain {
    pub fn validate(&self) -> Result<(), GravityError> {
        for axis in 0..3 {
            if !(self.size[axis] > 0.0) {
                return Err(GravityError::DegenerateDomain { axis, extent: self.size[axis] });
            }
        }
        Ok(())
    }

    /// Tight bounding box of a body set, padded so boundary points stay
    /// strictly inside.
    pub fn enclosing(bodies: &[Body]) -> Domain {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for b in bodies {
            for d in 0..3 {
                min[d] = min[d].min(b.position[d]);
                max[d] = max[d].max(b.position[d]);
            }
        }
        let mut size = [0.0; 3];
        for d in 0..3 {
            let ext = (max[d] - min[d]).max(1e-12);
            let pad = ext * 1e-6;
            min[d] -= pad;
            size[d] = ext + 2.0 * pad;
        }
        Domain { min, size }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.min[d] + self.size[d])
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WalkParams {
    /// Opening angle: a node of size s at distance d is accepted when
    /// s/d ≤ theta. Zero degenerates to direct summation.
    pub theta: f64,
    /// Plummer softening ε.
    pub softening: f64,
    /// Bodies per Hilbert-contiguous group in the grouped walk.
    pub group_size: usize,
    /// Everything within this distance of a group is summed directly.
    pub direct_radius: f64,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams { theta: 0.5, softening: 1e-4, group_size: 32, direct_radius: 0.0 }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if !(self.theta >= 0.0) {
            problems.push("theta must be non-negative".to_string());
        }
        if !(self.softening > 0.0) {
            problems.push("softening must be positive".to_string());
        }
        if self.group_size == 0 {
            problems.push("group_size must be at least 1".to_string());
        }
        if !(self.direct_radius >= 0.0) {
            problems.push("direct_radius must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SphParams {
    /// Target effective neighbour count.
    pub n_ngb: f64,
    /// Relative tolerance on the neighbour-count equation.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SphParams {
    fn default() -> Self {
        SphParams { n_ngb: 32.0, tolerance: 1e-4, max_iterations: 100 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_cloud(n: usize, seed: u64) -> Vec<Body> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
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
            .collect()
    }

    #[test]
    fn degenerate_domain_is_rejected() {
        let d = Domain { min: [0.0; 3], size: [1.0, 0.0, 1.0] };
        assert!(matches!(d.validate(), Err(GravityError::DegenerateDomain { axis: 1, .. })));
    }

    #[test]
    fn enclosing_domain_contains_every_body() {
        let bodies = random_cloud(200, 3);
        let d = Domain::enclosing(&bodies);
        d.validate().unwrap();
        assert!(bodies.iter().all(|b| d.contains(b.position)));
    }

    #[test]
    fn walk_params_validation_collects_problems() {
        let p = WalkParams { theta: -1.0, softening: 0.0, group_size: 0, direct_radius: -2.0 };
        assert_eq!(p.validate().unwrap_err().len(), 4);
        assert!(WalkParams::default().validate().is_ok());
    }
}
