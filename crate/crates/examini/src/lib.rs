//! Desk-scale laboratory for the kernels that dominate large astrophysical
//! simulations: a finite-volume MHD solver, a semi-implicit particle-in-cell
//! code, a Hilbert-ordered tree-gravity/SPH core, a trace model with
//! POP-style efficiency metrics, and a scaling-benchmark harness that ties
//! them together.
//!
//! The crate is a library first. Each major capability has a runnable
//! example under `examples/`:
//!
//! ```text
//! cargo run --release -p examini --example mhd_orszag_tang
//! cargo run --release -p examini --example mhd_alfven_convergence
//! cargo run --release -p examini --example pic_maxwellian
//! cargo run --release -p examini --example gravity_force_accuracy
//! cargo run --release -p examini --example sph_smoothing_lengths
//! cargo run --release -p examini --example trace_pop_metrics
//! cargo run --release -p examini --example antipattern_detect
//! cargo run --release -p examini --example scaling_campaign
//! ```
//!
//! A single thin binary (`examini`) exposes the same entry points as
//! subcommands (`mhd`, `pic`, `gravity`, `trace`, `campaign`, `report`) for
//! scripted use; see [`cli`].

pub mod bench;
pub mod cli;
pub mod gravity;
pub mod mhd;
pub mod pic;
pub mod runtime;
pub mod trace;
