//! Cycle driver: stripe decomposition, the three-kernel cycle, and
//! particle migration.
//!
//! The domain splits into vertical stripes, one per rank; each rank owns
//! the particles inside its stripe. Moments are deposited locally onto the
//! full node lattice and summed with a fixed-order reduction, after which
//! every rank runs the identical (deliberately serial, replicated) field
//! solve — so the fields never need a halo exchange and stay identical
//! across ranks by construction. Particles crossing a stripe boundary
//! migrate with a counts-then-payload handshake after the mover.

use crate::runtime::{compose_tag, run_ranks, Payload, RankCtx};
use crate::trace::{summarize_regions, TimingSummary, TraceTimeline};

use super::grid::{FieldGrid, Moments};
use super::moments::gather_moments;
use super::mover::particle_mover;
use super::particles::{init_maxwellian, ParticleSet};
use super::solver::field_solve;
use super::{PicConfig, PicError};

const TAG_MIG_COUNT: u32 = 0xE000_0000;
const TAG_MIG_LOAD: u32 = 0xE800_0000;

/// One timed kernel execution on one rank.
#[derive(Clone, Debug)]
pub struct KernelRow {
    pub cycle: usize,
    pub kernel: &'static str,
    pub rank: usize,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EnergySample {
    pub cycle: usize,
    pub field: f64,
    pub kinetic: f64,
}

impl EnergySample {
    pub fn total(&self) -> f64 {
        self.field + self.kinetic
    }
}

#[derive(Debug)]
pub struct PicRankResult {
    pub rank: usize,
    /// Particles held per species after the last cycle.
    pub particle_counts: Vec<usize>,
    /// Particles handed to other ranks over the whole run.
    pub sent_particles: u64,
    /// Globally reduced moments after the final gather (replicated).
    pub moments: Moments,
    /// Field state after the final solve (replicated).
    pub fields: FieldGrid,
    pub solver_iterations: Vec<usize>,
    pub kernel_rows: Vec<KernelRow>,
    pub energy: Vec<EnergySample>,
    /// Final particle state, one set per species, for checkpointing.
    pub particles: Vec<ParticleSet>,
}

#[derive(Debug)]
pub struct PicRunOutput {
    pub results: Vec<PicRankResult>,
    pub timeline: TraceTimeline,
    pub summary: TimingSummary,
}

pub fn run_pic(cfg: &PicConfig, ranks: usize, cycles: usize) -> Result<PicRunOutput, PicError> {
    cfg.validate(ranks)?;

    // One global, rank-count-independent ensemble, split into stripes.
    let global = init_maxwellian(cfg);
    let stripe_w = cfg.extent[0] / ranks as f64;
    let mut stripes: Vec<Vec<ParticleSet>> = (0..ranks)
        .map(|_| {
            cfg.species
                .iter()
                .map(|sp| ParticleSet::with_capacity(sp, 0))
                .collect()
        })
        .collect();
    for (s, set) in global.iter().enumerate() {
        for i in 0..set.len() {
            let owner = stripe_owner(set.x[i], stripe_w, ranks);
            set.copy_to(i, &mut stripes[owner][s]);
        }
    }

    let watchdog = std::time::Duration::from_secs(cfg.watchdog_secs);
    let out = run_ranks(ranks, watchdog, |ctx| {
        let rank = ctx.comm.rank();
        let parts = stripes[rank].clone();
        rank_main(cfg, cycles, parts, ctx)
    });

    let mut results = Vec::with_capacity(ranks);
    for r in out.results {
        results.push(r?);
    }
    let timeline = TraceTimeline::from_recorders(ranks, 1, out.recorders, None)?;
    let summary = summarize_regions(&timeline, cycles);
    Ok(PicRunOutput { results, timeline, summary })
}

fn stripe_owner(x: f64, stripe_w: f64, ranks: usize) -> usize {
    ((x / stripe_w) as usize).min(ranks - 1)
}

fn rank_main(
    cfg: &PicConfig,
    cycles: usize,
    mut parts: Vec<ParticleSet>,
    ctx: &mut RankCtx,
) -> Result<PicRankResult, PicError> {
    let rank = ctx.comm.rank();
    let ranks = ctx.comm.size();
    let stripe_w = cfg.extent[0] / ranks as f64;
    let n_species = cfg.species.len();
    let dof = 3 * cfg.cells[0] * cfg.cells[1];
    let mut seq = 0u64;
    let mut next_seq = || {
        let s = seq;
        seq += 1;
        s
    };

    let mut grid = FieldGrid::new(cfg.cells, cfg.extent);
    for d in 0..3 {
        if cfg.background_b[d] != 0.0 {
            grid.b[d].fill(cfg.background_b[d]);
        }
    }
    if cfg.e_perturbation != 0.0 {
        let lx = cfg.extent[0];
        let dx = grid.spacing()[0];
        let amp = cfg.e_perturbation;
        grid.e[0].map_distinct(|i, _, _| {
            amp * (2.0 * std::f64::consts::PI * (i as f64 * dx) / lx).sin()
        });
    }

    let mut sent_particles = 0u64;
    let mut solver_iterations = Vec::with_capacity(cycles);
    let mut kernel_rows = Vec::with_capacity(3 * cycles);
    let mut energy = Vec::with_capacity(cycles + 1);

    // Moments feeding the first solve come from the initial ensemble.
    let mut moments = reduce_moments(cfg, &parts, ctx, next_seq())?;
    energy.push(sample_energy(0, &grid, &parts, ctx, next_seq())?);

    for cycle in 1..=cycles {
        // --- CalculateField: replicated implicit solve ------------------
        let t0 = ctx.rec.now_ns();
        let solved = ctx.rec.useful("CalculateField", dof as u64, || {
            field_solve(&mut grid, &moments, &cfg.species, cfg.dt, cfg.theta, &cfg.gmres)
        });
        let (report, e_theta) = solved?;
        solver_iterations.push(report.iterations);
        kernel_rows.push(KernelRow {
            cycle,
            kernel: "CalculateField",
            rank,
            seconds: (ctx.rec.now_ns() - t0) as f64 * 1e-9,
        });

        // --- ParticlesMover: push with E^{n+θ}, then migrate ------------
        let t0 = ctx.rec.now_ns();
        let mover_grid = FieldGrid {
            cells: grid.cells,
            extent: grid.extent,
            e: e_theta,
            b: grid.b.clone(),
        };
        let npart: usize = parts.iter().map(ParticleSet::len).sum();
        let moved: Result<(), PicError> =
            ctx.rec.useful(
                "ParticlesMover",
                (npart * cfg.mover_iterations) as u64,
                || {
                    for (s, set) in parts.iter_mut().enumerate() {
                        particle_mover(set, &mover_grid, cfg.dt, cfg.mover_iterations, s)?;
                    }
                    Ok(())
                },
            );
        moved?;
        if ranks > 1 {
            sent_particles += migrate(&mut parts, ctx, stripe_w, cycle, n_species)?;
        }
        kernel_rows.push(KernelRow {
            cycle,
            kernel: "ParticlesMover",
            rank,
            seconds: (ctx.rec.now_ns() - t0) as f64 * 1e-9,
        });

        // --- GatherMoments: deposit + fixed-order reduction --------------
        let t0 = ctx.rec.now_ns();
        moments = reduce_moments(cfg, &parts, ctx, next_seq())?;
        kernel_rows.push(KernelRow {
            cycle,
            kernel: "GatherMoments",
            rank,
            seconds: (ctx.rec.now_ns() - t0) as f64 * 1e-9,
        });

        energy.push(sample_energy(cycle, &grid, &parts, ctx, next_seq())?);
    }

    Ok(PicRankResult {
        rank,
        particle_counts: parts.iter().map(ParticleSet::len).collect(),
        sent_particles,
        moments,
        fields: grid,
        solver_iterations,
        kernel_rows,
        energy,
        particles: parts,
    })
}

/// Local CIC deposit plus the rank-ordered global sum; every rank ends up
/// with the identical global moment set.
fn reduce_moments(
    cfg: &PicConfig,
    parts: &[ParticleSet],
    ctx: &mut RankCtx,
    seq: u64,
) -> Result<Moments, PicError> {
    let npart: usize = parts.iter().map(ParticleSet::len).sum();
    let local = ctx
        .rec
        .useful("GatherMoments", npart as u64, || {
            gather_moments(parts, cfg.cells, cfg.extent)
        });
    let mut buf = local.pack_distinct();
    ctx.comm.allreduce_sum(&mut ctx.rec, seq, &mut buf, "GatherMoments")?;
    let mut global = Moments::new(cfg.species.len(), cfg.cells, cfg.extent);
    global.unpack_distinct(&buf);
    Ok(global)
}

fn sample_energy(
    cycle: usize,
    grid: &FieldGrid,
    parts: &[ParticleSet],
    ctx: &mut RankCtx,
    seq: u64,
) -> Result<EnergySample, PicError> {
    let mut buf = [parts.iter().map(ParticleSet::kinetic_energy).sum::<f64>()];
    ctx.comm.allreduce_sum(&mut ctx.rec, seq, &mut buf, "series")?;
    Ok(EnergySample { cycle, field: grid.field_energy(), kinetic: buf[0] })
}

/// Counts-then-payload exchange of particles that left the stripe.
/// Payload layout: 7 floats per particle (x, y, vx, vy, vz, qm, weight).
fn migrate(
    parts: &mut [ParticleSet],
    ctx: &mut RankCtx,
    stripe_w: f64,
    cycle: usize,
    n_species: usize,
) -> Result<u64, PicError> {
    let rank = ctx.comm.rank();
    let ranks = ctx.comm.size();
    let mut sent = 0u64;

    for s in 0..n_species {
        let set = &mut parts[s];
        let mut leaving: Vec<usize> = Vec::new();
        let mut outbound: Vec<Vec<f64>> = vec![Vec::new(); ranks];
        for i in 0..set.len() {
            let owner = stripe_owner(set.x[i], stripe_w, ranks);
            if owner != rank {
                leaving.push(i);
                let o = &mut outbound[owner];
                o.push(set.x[i]);
                o.push(set.y[i]);
                o.push(set.vx[i]);
                o.push(set.vy[i]);
                o.push(set.vz[i]);
                o.push(set.qm[i]);
                o.push(set.weight[i]);
            }
        }
        set.remove_indices(&leaving);
        sent += leaving.len() as u64;

        let seq = (cycle * n_species + s) as u64;
        let count_tag = compose_tag(TAG_MIG_COUNT, seq);
        let load_tag = compose_tag(TAG_MIG_LOAD, seq);

        // counts first, to every peer
        for peer in 0..ranks {
            if peer == rank {
                continue;
            }
            let n = (outbound[peer].len() / 7) as u64;
            ctx.comm
                .send(&mut ctx.rec, peer, count_tag, Payload::U64(vec![n]), "ParticlesMover");
        }
        // then the payloads that exist
        for peer in 0..ranks {
            if peer == rank || outbound[peer].is_empty() {
                continue;
            }
            let load = std::mem::take(&mut outbound[peer]);
            ctx.comm
                .send(&mut ctx.rec, peer, load_tag, Payload::F64(load), "ParticlesMover");
        }
        // receive in ascending peer order for a deterministic append order
        for peer in 0..ranks {
            if peer == rank {
                continue;
            }
            let n = ctx
                .comm
                .recv(&mut ctx.rec, peer, count_tag, "ParticlesMover")?
                .into_u64()[0];
            if n == 0 {
                continue;
            }
            let load = ctx
                .comm
                .recv(&mut ctx.rec, peer, load_tag, "ParticlesMover")?
                .into_f64();
            debug_assert_eq!(load.len() as u64, 7 * n);
            for chunk in load.chunks_exact(7) {
                parts[s].push(
                    chunk[0],
                    chunk[1],
                    [chunk[2], chunk[3], chunk[4]],
                    chunk[5],
                    chunk[6],
                );
            }
        }
    }
    Ok(sent)
}
