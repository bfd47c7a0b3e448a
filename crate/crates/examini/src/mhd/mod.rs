//! Rank-parallel 3D ideal-MHD finite-volume solver.
//!
//! One logical rank owns one block of a periodic Cartesian grid. Each step
//! runs the same pipeline per Runge-Kutta stage: halo exchange, conservative
//! to primitive map, WENO-Z reconstruction, HLLD/HLL Riemann fluxes, RHS
//! accumulation — plus either a constrained-transport update of staggered
//! face fields or GLM divergence cleaning with a ninth scalar.

mod ct;
mod driver;
mod field;
mod glm;
mod halo;
mod hlld;
mod output;
mod rk3;
mod setup;
mod wenoz;

pub use ct::{ct_rhs, ct_update, divb_face, face_to_center, init_faceb_from_az, EdgeEmf};
pub use driver::{run_mhd, ConservedSample, MhdRankResult, MhdRunOutput};
pub use field::{FaceB, Field3};
pub use glm::{glm_damping_factor, glm_face_solve};
pub use halo::{halo_exchange, BlockMap};
pub use hlld::{hll_flux, hlld_flux, physical_flux_x, HlldSolution};
pub use output::{
    assemble_global, load_fields, save_fields, write_series_csv, FieldHeader, COMPONENT_NAMES,
};
pub use rk3::{ssp_rk3, ssp_rk3_with, RkState};
pub use setup::{cp_alfven_wave, init_cp_alfven, init_orszag_tang_3d, AlfvenWave};
pub use wenoz::{reconstruct_line, wenoz_reconstruct};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::CommError;
use crate::trace::TraceError;

/// Conserved component slots. Primitive blocks reuse the same slots with
/// velocity in place of momentum and pressure in place of total energy.
pub const RHO: usize = 0;
pub const MX: usize = 1;
pub const MY: usize = 2;
pub const MZ: usize = 3;
pub const EN: usize = 4;
pub const BX: usize = 5;
pub const BY: usize = 6;
pub const BZ: usize = 7;
pub const PSI: usize = 8;

pub const VX: usize = 1;
pub const VY: usize = 2;
pub const VZ: usize = 3;
pub const PRS: usize = 4;

#[derive(Debug, Error)]
pub enum MhdError {
    #[error("invalid MHD configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("negative density at cell {cell:?} (step {step})")]
    NegativeDensity { cell: [usize; 3], step: usize },
    #[error("negative pressure at cell {cell:?} (step {step})")]
    NegativePressure { cell: [usize; 3], step: usize },
    #[error("communication failure: {0}")]
    Comm(#[from] CommError),
    #[error("trace assembly failure: {0}")]
    Trace(#[from] TraceError),
}

/// Unphysical single-state signals; block-level callers attach cell and
/// step context when promoting these to `MhdError`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("negative density")]
    NegativeDensity,
    #[error("negative pressure")]
    NegativePressure,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimState {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
    pub b: [f64; 3],
    pub psi: f64,
}

impl PrimState {
    pub fn zero() -> Self {
        PrimState { rho: 0.0, v: [0.0; 3], p: 0.0, b: [0.0; 3], psi: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsState {
    pub rho: f64,
    pub m: [f64; 3],
    pub e: f64,
    pub b: [f64; 3],
    pub psi: f64,
}

/// E = p/(γ−1) + ½ρ|v|² + ½|B|². The GLM scalar carries no energy.
pub fn prim_to_cons(w: &PrimState, gamma: f64) -> ConsState {
    let v2 = w.v[0] * w.v[0] + w.v[1] * w.v[1] + w.v[2] * w.v[2];
    let b2 = w.b[0] * w.b[0] + w.b[1] * w.b[1] + w.b[2] * w.b[2];
    ConsState {
        rho: w.rho,
        m: [w.rho * w.v[0], w.rho * w.v[1], w.rho * w.v[2]],
        e: w.p / (gamma - 1.0) + 0.5 * w.rho * v2 + 0.5 * b2,
        b: w.b,
        psi: w.psi,
    }
}

pub fn cons_to_prim(u: &ConsState, gamma: f64) -> Result<PrimState, StateError> {
    if u.rho <= 0.0 {
        return Err(StateError::NegativeDensity);
    }
    let v = [u.m[0] / u.rho, u.m[1] / u.rho, u.m[2] / u.rho];
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let b2 = u.b[0] * u.b[0] + u.b[1] * u.b[1] + u.b[2] * u.b[2];
    let p = (gamma - 1.0) * (u.e - 0.5 * u.rho * v2 - 0.5 * b2);
    if p <= 0.0 {
        return Err(StateError::NegativePressure);
    }
    Ok(PrimState { rho: u.rho, v, p, b: u.b, psi: u.psi })
}

/// Recovery that floors non-positive pressure instead of failing; returns
/// whether the floor fired so drivers can keep a diagnostic count.
pub fn cons_to_prim_floored(u: &ConsState, gamma: f64, p_floor: f64) -> Result<(PrimState, bool), StateError> {
    match cons_to_prim(u, gamma) {
        Ok(w) => Ok((w, false)),
        Err(StateError::NegativePressure) => {
            let v = [u.m[0] / u.rho, u.m[1] / u.rho, u.m[2] / u.rho];
            Ok((PrimState { rho: u.rho, v, p: p_floor, b: u.b, psi: u.psi }, true))
        }
        Err(e) => Err(e),
    }
}

/// Fast magnetosonic speed along `axis`:
/// cf² = ½[(a² + b²) + √((a² + b²)² − 4 a² bn²)] with a² = γp/ρ, b² = |B|²/ρ.
pub fn fast_speed(w: &PrimState, axis: usize, gamma: f64) -> f64 {
    let a2 = gamma * w.p / w.rho;
    let b2 = (w.b[0] * w.b[0] + w.b[1] * w.b[1] + w.b[2] * w.b[2]) / w.rho;
    let bn2 = w.b[axis] * w.b[axis] / w.rho;
    let s = a2 + b2;
    let disc = (s * s - 4.0 * a2 * bn2).max(0.0);
    (0.5 * (s + disc.sqrt())).sqrt()
}

/// |v·ê_axis| + cf_axis, the per-axis CFL signal speed.
pub fn max_signal(w: &PrimState, axis: usize, gamma: f64) -> f64 {
    w.v[axis].abs() + fast_speed(w, axis, gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    WenoZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiemannSolver {
    Hlld,
    Hll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStepper {
    Rk3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivbMode {
    Ct,
    Glm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum MhdSetup {
    /// 2D vortex replicated in z with a small vz(z) perturbation.
    OrszagTang {
        #[serde(default = "default_ot_vz")]
        vz_amplitude: f64,
    },
    /// Circularly polarized Alfvén wave along the grid diagonal; exact
    /// nonlinear solution, used for convergence measurement.
    CpAlfven {
        #[serde(default = "default_cp_amplitude")]
        amplitude: f64,
    },
    /// Uniform state, mostly for plumbing tests.
    Uniform { prim: PrimState },
}

fn default_ot_vz() -> f64 {
    0.01
}
fn default_cp_amplitude() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    5.0 / 3.0
}
fn default_cfl() -> f64 {
    0.3
}
fn default_extent() -> [[f64; 2]; 3] {
    [[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]
}
fn default_recon() -> Reconstruction {
    Reconstruction::WenoZ
}
fn default_riemann() -> RiemannSolver {
    RiemannSolver::Hlld
}
fn default_stepper() -> TimeStepper {
    TimeStepper::Rk3
}
fn default_glm_ch_ratio() -> f64 {
    1.0
}
fn default_glm_damping() -> f64 {
    0.18
}
fn default_ghost() -> usize {
    3
}
fn default_series_every() -> usize {
    1
}
fn default_watchdog() -> u64 {
    60
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MhdConfig {
    pub cells: [usize; 3],
    #[serde(default = "default_extent")]
    pub extent: [[f64; 2]; 3],
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_recon")]
    pub reconstruction: Reconstruction,
    #[serde(default = "default_riemann")]
    pub riemann: RiemannSolver,
    #[serde(default = "default_stepper")]
    pub time_stepper: TimeStepper,
    pub divb_mode: DivbMode,
    pub setup: MhdSetup,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_glm_ch_ratio")]
    pub glm_ch_ratio: f64,
    #[serde(default = "default_glm_damping")]
    pub glm_damping: f64,
    /// Ranks per axis; derived from the rank count when absent.
    #[serde(default)]
    pub layout: Option<[usize; 3]>,
    #[serde(default = "default_ghost")]
    pub ghost_width: usize,
    #[serde(default = "default_series_every")]
    pub series_every: usize,
    /// Restrict the trace region of interest to the last N steps.
    #[serde(default)]
    pub roi_last_steps: Option<usize>,
    #[serde(default = "default_watchdog")]
    pub watchdog_secs: u64,
}

impl MhdConfig {
    pub fn validate(&self, ranks: usize) -> Result<(), MhdError> {
        let mut problems = Vec::new();
        for (d, &n) in self.cells.iter().enumerate() {
            if n == 0 {
                problems.push(format!("cells[{d}] must be positive"));
            }
        }
        for (d, ex) in self.extent.iter().enumerate() {
            if !(ex[1] > ex[0]) {
                problems.push(format!("extent[{d}] must satisfy hi > lo"));
            }
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            problems.push("cfl must lie in (0, 1)".to_string());
        }
        if !(self.gamma > 1.0) {
            problems.push("gamma must exceed 1".to_string());
        }
        if self.ghost_width < 3 {
            problems.push("ghost_width must be at least 3 (WENO-Z stencil)".to_string());
        }
        if self.t_end.is_none() && self.max_steps.is_none() {
            problems.push("one of t_end or max_steps is required".to_string());
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0) {
                problems.push("t_end must be non-negative".to_string());
            }
        }
        if self.series_every == 0 {
            problems.push("series_every must be positive".to_string());
        }
        if matches!(self.setup, MhdSetup::CpAlfven { .. }) && self.divb_mode == DivbMode::Ct {
            problems.push(
                "cp_alfven initial data is cell-centered; use divb_mode = glm".to_string(),
            );
        }
        let layout = match self.layout {
            Some(l) => {
                if l.iter().product::<usize>() != ranks {
                    problems.push(format!("layout {:?} does not factor {} ranks", l, ranks));
                }
                l
            }
            None => auto_layout(ranks, self.cells),
        };
        for d in 0..3 {
            if layout[d] == 0 || self.cells[d] % layout[d].max(1) != 0 {
                problems.push(format!(
                    "cells[{d}]={} not divisible by layout[{d}]={}",
                    self.cells[d], layout[d]
                ));
            } else if self.cells[d] / layout[d] < self.ghost_width {
                problems.push(format!(
                    "block too thin on axis {d}: {} cells per rank < ghost width {}",
                    self.cells[d] / layout[d],
                    self.ghost_width
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MhdError::InvalidConfig(problems))
        }
    }

    pub fn resolved_layout(&self, ranks: usize) -> [usize; 3] {
        self.layout.unwrap_or_else(|| auto_layout(ranks, self.cells))
    }

    pub fn spacing(&self) -> [f64; 3] {
        let mut dx = [0.0; 3];
        for d in 0..3 {
            dx[d] = (self.extent[d][1] - self.extent[d][0]) / self.cells[d] as f64;
        }
        dx
    }

    pub fn ncomp(&self) -> usize {
        match self.divb_mode {
            DivbMode::Ct => 8,
            DivbMode::Glm => 9,
        }
    }
}

/// Splits `ranks` into a 3-axis layout, repeatedly assigning each prime
/// factor (largest first) to the axis whose per-rank extent is currently
/// largest. Ties go to the lower axis index, so the result is stable.
pub fn auto_layout(ranks: usize, cells: [usize; 3]) -> [usize; 3] {
    let mut layout = [1usize; 3];
    let mut rem = ranks.max(1);
    let mut factors = Vec::new();
    let mut p = 2;
    while p * p <= rem {
        while rem % p == 0 {
            factors.push(p);
            rem /= p;
        }
        p += 1;
    }
    if rem > 1 {
        factors.push(rem);
    }
    factors.sort_unstable_by(|a, b| b.cmp(a));
    for f in factors {
        let mut best = 0;
        let mut best_size = 0.0f64;
        for d in 0..3 {
            let size = cells[d] as f64 / layout[d] as f64;
            if size > best_size {
                best_size = size;
                best = d;
            }
        }
        layout[best] *= f;
    }
    layout
}
