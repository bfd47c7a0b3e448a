//! 2D3V semi-implicit particle-in-cell mini-app.
//!
//! The cycle mirrors the classic implicit-moment structure: a field solve
//! for E at the θ-level through a matrix-free curl–curl system (GMRES), an
//! iterated implicit-midpoint particle mover, and cloud-in-cell moment
//! gathering. Velocities keep three components on a 2D periodic grid, so
//! magnetized orbits and full current/pressure moments are representable.
//! Time steps may exceed the explicit CFL limit; the implicit field solve
//! damps under-resolved modes instead of amplifying them.

mod checkpoint;
mod gmres;
mod grid;
mod mover;
mod moments;
mod particles;
mod solver;
mod driver;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, SpeciesMeta};
pub use driver::{run_pic, KernelRow, PicRankResult, PicRunOutput, EnergySample};
pub use gmres::{gmres, GmresOutcome};
pub use grid::{FieldGrid, Moments, NodeField, SpeciesMoments};
pub use mover::particle_mover;
pub use moments::{gather_moments, merge_moments};
pub use particles::{init_maxwellian, ParticleSet};
pub use solver::{assemble_dense_operator, field_solve, FieldSolveReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::CommError;
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum PicError {
    #[error("invalid PIC configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("GMRES stalled: relative residual {residual:.3e} after {iterations} iterations")]
    GmresNoConvergence { residual: f64, iterations: usize },
    #[error("non-finite particle state: species {species}, index {index}")]
    NonFiniteParticle { species: usize, index: usize },
    #[error("communication failure: {0}")]
    Comm(#[from] CommError),
    #[error("trace assembly failure: {0}")]
    Trace(#[from] TraceError),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GmresConfig {
    #[serde(default = "default_gmres_tol")]
    pub tolerance: f64,
    #[serde(default = "default_gmres_restart")]
    pub restart: usize,
    #[serde(default = "default_gmres_iters")]
    pub max_iters: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tolerance: default_gmres_tol(),
            restart: default_gmres_restart(),
            max_iters: default_gmres_iters(),
        }
    }
}

fn default_gmres_tol() -> f64 {
    1e-8
}
fn default_gmres_restart() -> usize {
    20
}
fn default_gmres_iters() -> usize {
    400
}

/// One particle species: physical charge and mass per simulated particle,
/// per-component thermal velocity, and macro-particles per cell.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpeciesConfig {
    pub charge: f64,
    pub mass: f64,
    pub thermal: [f64; 3],
    pub ppc: usize,
    /// Reference number density; macro-particle weight is
    /// density · cell area / ppc.
    #[serde(default = "default_density")]
    pub density: f64,
}

fn default_density() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicConfig {
    /// Cells per axis; the node lattice is (nx+1)×(ny+1) with aliased edges.
    pub cells: [usize; 2],
    #[serde(default = "default_pic_extent")]
    pub extent: [f64; 2],
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_mover_iterations")]
    pub mover_iterations: usize,
    #[serde(default)]
    pub gmres: GmresConfig,
    pub species: Vec<SpeciesConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Pair every sampled velocity with its negation for zero net momentum.
    #[serde(default = "default_true")]
    pub quiet_start: bool,
    #[serde(default)]
    pub background_b: [f64; 3],
    /// Amplitude of a seeded E_x ∝ sin(2πx/Lx) standing perturbation.
    #[serde(default)]
    pub e_perturbation: f64,
    #[serde(default = "default_pic_watchdog")]
    pub watchdog_secs: u64,
}

fn default_pic_extent() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_theta() -> f64 {
    0.5
}
fn default_mover_iterations() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_pic_watchdog() -> u64 {
    60
}

impl PicConfig {
    pub fn validate(&self, ranks: usize) -> Result<(), PicError> {
        let mut problems = Vec::new();
        for (d, &n) in self.cells.iter().enumerate() {
            if n == 0 {
                problems.push(format!("cells[{d}] must be positive"));
            }
        }
        for (d, &e) in self.extent.iter().enumerate() {
            if !(e > 0.0) {
                problems.push(format!("extent[{d}] must be positive"));
            }
        }
        if !(self.dt > 0.0) {
            problems.push("dt must be positive".to_string());
        }
        if !(0.5..=1.0).contains(&self.theta) {
            problems.push("theta must lie in [0.5, 1]".to_string());
        }
        if self.mover_iterations == 0 {
            problems.push("mover_iterations must be at least 1".to_string());
        }
        if self.species.is_empty() {
            problems.push("at least one species is required".to_string());
        }
        for (s, sp) in self.species.iter().enumerate() {
            if !(sp.mass > 0.0) {
                problems.push(format!("species[{s}].mass must be positive"));
            }
            if sp.ppc == 0 {
                problems.push(format!("species[{s}].ppc must be positive"));
            }
        }
        if !(self.gmres.tolerance > 0.0) {
            problems.push("gmres.tolerance must be positive".to_string());
        }
        if self.gmres.restart == 0 {
            problems.push("gmres.restart must be positive".to_string());
        }
        if ranks == 0 {
            problems.push("ranks must be positive".to_string());
        } else if self.cells[0] % ranks.max(1) != 0 {
            problems.push(format!(
                "cells[0]={} not divisible into {} rank stripes",
                self.cells[0], ranks
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PicError::InvalidConfig(problems))
        }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.extent[0] / self.cells[0] as f64,
            self.extent[1] / self.cells[1] as f64,
        ]
    }

    /// Explicit light-wave CFL limit of the node lattice (c = 1).
    pub fn explicit_cfl_dt(&self) -> f64 {
        let [dx, dy] = self.spacing();
        dx.min(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn maxwellian_config(cells: [usize; 2], ppc: usize, dt: f64) -> PicConfig {
        PicConfig {
            cells,
            extent: [1.0, 1.0],
            dt,
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
            seed: 7,
            quiet_start: true,
            background_b: [0.0, 0.0, 0.0],
            e_perturbation: 0.0,
            watchdog_secs: 60,
        }
    }

    #[test]
    fn validate_collects_every_problem() {
        let cfg = PicConfig {
            cells: [0, 8],
            extent: [1.0, -1.0],
            dt: 0.0,
            theta: 0.2,
            mover_iterations: 0,
            gmres: GmresConfig { tolerance: 0.0, restart: 0, max_iters: 10 },
            species: vec![],
            seed: 0,
            quiet_start: true,
            background_b: [0.0; 3],
            e_perturbation: 0.0,
            watchdog_secs: 60,
        };
        match cfg.validate(1) {
            Err(PicError::InvalidConfig(problems)) => {
                assert!(problems.len() >= 7, "only {} problems: {problems:?}", problems.len());
            }
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn stripe_divisibility_is_checked() {
        let cfg = maxwellian_config([10, 8], 4, 0.01);
        assert!(cfg.validate(2).is_ok());
        assert!(matches!(cfg.validate(3), Err(PicError::InvalidConfig(_))));
    }

    #[test]
    fn explicit_cfl_uses_smaller_spacing() {
        let mut cfg = maxwellian_config([16, 8], 1, 0.01);
        cfg.extent = [1.0, 1.0];
        // dx = 1/16, dy = 1/8
        assert!((cfg.explicit_cfl_dt() - 1.0 / 16.0).abs() < 1e-15);
    }
}
