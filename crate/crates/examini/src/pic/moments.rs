//! Cloud-in-cell moment deposition.
//!
//! Each particle spreads charge ρ, current J = ρv, and the second moment
//! P = m n ⟨v⊗v⟩ onto its four surrounding nodes, normalised by the node
//! area so that Σ ρ·ΔA over distinct nodes reproduces the total charge to
//! rounding. Deposits touching aliased boundary nodes are folded back onto
//! the primary lattice at the end of the sweep.

use super::grid::{cic_weights, Moments};
use super::particles::ParticleSet;

/// Deposits all species onto a fresh node-centered moment set.
pub fn gather_moments(
    sets: &[ParticleSet],
    cells: [usize; 2],
    extent: [f64; 2],
) -> Moments {
    let mut m = Moments::new(sets.len(), cells, extent);
    let [dx, dy] = m.spacing();
    let inv_area = 1.0 / (dx * dy);

    for (s, parts) in sets.iter().enumerate() {
        let sp = &mut m.species[s];
        for p in 0..parts.len() {
            let c = cic_weights(parts.x[p], parts.y[p], cells, [dx, dy]);
            let q = parts.charge * parts.weight[p] * inv_area;
            let mw = parts.mass * parts.weight[p] * inv_area;
            let v = [parts.vx[p], parts.vy[p], parts.vz[p]];
            let vv = [
                v[0] * v[0],
                v[0] * v[1],
                v[0] * v[2],
                v[1] * v[1],
                v[1] * v[2],
                v[2] * v[2],
            ];
            let nodes = [
                (c.i, c.j),
                (c.i + 1, c.j),
                (c.i, c.j + 1),
                (c.i + 1, c.j + 1),
            ];
            for (w, (i, j)) in c.w.iter().zip(nodes) {
                sp.rho.add(i, j, w * q);
                for d in 0..3 {
                    sp.j[d].add(i, j, w * q * v[d]);
                }
                for d in 0..6 {
                    sp.p[d].add(i, j, w * mw * vv[d]);
                }
            }
        }
        sp.rho.fold_boundaries();
        for f in &mut sp.j {
            f.fold_boundaries();
        }
        for f in &mut sp.p {
            f.fold_boundaries();
        }
    }
    m
}

/// Element-wise accumulation used when combining per-rank contributions.
pub fn merge_moments(into: &mut Moments, from: &Moments) {
    assert_eq!(into.cells, from.cells);
    assert_eq!(into.species.len(), from.species.len());
    let [nx, ny] = into.cells;
    for (a, b) in into.species.iter_mut().zip(&from.species) {
        for (fa, fb) in std::iter::once(&mut a.rho)
            .chain(&mut a.j)
            .chain(&mut a.p)
            .zip(std::iter::once(&b.rho).chain(&b.j).chain(&b.p))
        {
            for j in 0..ny {
                for i in 0..nx {
                    fa.add(i, j, fb.at(i, j));
                }
            }
            fa.sync_aliases();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::maxwellian_config;
    use super::super::{init_maxwellian, SpeciesConfig};
    use super::*;

    fn single(x: f64, y: f64, v: [f64; 3], charge: f64, mass: f64, weight: f64) -> ParticleSet {
        let sp = SpeciesConfig {
            charge,
            mass,
            thermal: [0.0; 3],
            ppc: 1,
            density: 1.0,
        };
        let mut set = ParticleSet::with_capacity(&sp, 1);
        set.push(x, y, v, charge / mass, weight);
        set
    }

    #[test]
    fn particle_on_a_node_deposits_everything_there() {
        let cells = [8, 8];
        let set = single(3.0 / 8.0, 5.0 / 8.0, [0.5, 0.0, 0.0], -1.0, 1.0, 2.0);
        let m = gather_moments(&[set], cells, [1.0, 1.0]);
        let area = (1.0 / 8.0) * (1.0 / 8.0);
        assert_eq!(m.species[0].rho.at(3, 5), -2.0 / area);
        assert_eq!(m.species[0].rho.at(4, 5), 0.0);
        assert_eq!(m.species[0].j[0].at(3, 5), -1.0 / area);
        assert_eq!(m.species[0].p[0].at(3, 5), 0.5 / area);
        assert!((m.species_charge(0) - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn particle_at_a_cell_center_splits_four_ways() {
        let cells = [8, 8];
        let set = single(1.5 / 8.0, 6.5 / 8.0, [0.0; 3], 1.0, 1.0, 1.0);
        let m = gather_moments(&[set], cells, [1.0, 1.0]);
        let area = (1.0 / 8.0) * (1.0 / 8.0);
        for (i, j) in [(1, 6), (2, 6), (1, 7), (2, 7)] {
            assert!((m.species[0].rho.at(i, j) - 0.25 / area).abs() < 1e-15);
        }
    }

    #[test]
    fn seam_deposits_fold_onto_primary_nodes() {
        let cells = [4, 4];
        // last cell in both directions: corners touch the aliased row/col
        let set = single(0.96875, 0.96875, [0.0; 3], 1.0, 1.0, 1.0);
        let m = gather_moments(&[set], cells, [1.0, 1.0]);
        let rho = &m.species[0].rho;
        assert!(rho.aliases_consistent());
        assert!((m.species_charge(0) - 1.0).abs() < 1e-14);
        // dominant corner is the wrapped origin node
        assert!(rho.at(0, 0) > rho.at(3, 3));
    }

    #[test]
    fn total_charge_matches_scalar_resummation() {
        let cfg = maxwellian_config([8, 8], 4, 0.01);
        let sets = init_maxwellian(&cfg);
        let m = gather_moments(&sets, cfg.cells, cfg.extent);
        for (s, set) in sets.iter().enumerate() {
            // independent route: plain scalar loop over macro-particles
            let direct: f64 = set.weight.iter().map(|w| set.charge * w).sum();
            assert!(
                (m.species_charge(s) - direct).abs() < 1e-12,
                "species {s}: {} vs {direct}",
                m.species_charge(s)
            );
        }
        assert!(m.total_charge().abs() < 1e-12); // two balanced species
    }

    #[test]
    fn quiet_start_has_zero_initial_current() {
        let cfg = maxwellian_config([8, 8], 4, 0.01);
        let sets = init_maxwellian(&cfg);
        let m = gather_moments(&sets, cfg.cells, cfg.extent);
        for sp in &m.species {
            for d in 0..3 {
                for j in 0..8 {
                    for i in 0..8 {
                        assert!(
                            sp.j[d].at(i, j).abs() < 1e-12,
                            "current leak at ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn merge_adds_contributions_nodewise() {
        let a_set = single(0.2, 0.3, [1.0, 0.0, 0.0], 1.0, 1.0, 1.0);
        let b_set = single(0.2, 0.3, [1.0, 0.0, 0.0], 1.0, 1.0, 2.0);
        let mut a = gather_moments(&[a_set], [4, 4], [1.0, 1.0]);
        let b = gather_moments(&[b_set], [4, 4], [1.0, 1.0]);
        merge_moments(&mut a, &b);
        assert!((a.species_charge(0) - 3.0).abs() < 1e-14);
        assert!(a.species[0].rho.aliases_consistent());
    }
}
