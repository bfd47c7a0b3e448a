//! Force evaluation: direct summation, per-body Barnes–Hut walk and the
//! grouped walk with one shared interaction list per Hilbert-contiguous
//! body group. G = 1 throughout; softening is Plummer:
//! a_i = Σ m_j (r_j − r_i) / (|r_j − r_i|² + ε²)^{3/2}.

use super::tree::{OctTree, TreeNode};
use super::{Body, WalkParams};
use crate::runtime::{parallel_fill, worker_count};

#[derive(Clone, Debug, Default)]
pub struct WalkStats {
    /// Node-as-monopole evaluations actually accumulated.
    pub monopole_evals: u64,
    /// Particle-particle evaluations actually accumulated.
    pub particle_evals: u64,
    /// Interaction-list entries per walk unit: one slot per body for the
    /// per-body walk, one per group for the grouped walk. Particle
    /// entries count every body in the opened leaf, monopole entries
    /// count one.
    pub list_lengths: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct ForceResult {
    pub accel: Vec<[f64; 3]>,
    pub stats: WalkStats,
}

#[inline]
fn pp_accel(p: [f64; 3], src: [f64; 3], mass: f64, eps2: f64, a: &mut [f64; 3]) {
    let dr = [src[0] - p[0], src[1] - p[1], src[2] - p[2]];
    let r2 = dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2] + eps2;
    if r2 > 0.0 {
        let w = mass / (r2 * r2.sqrt());
        a[0] += w * dr[0];
        a[1] += w * dr[1];
        a[2] += w * dr[2];
    }
}

#[inline]
fn box_point_dist2(bmin: [f64; 3], bmax: [f64; 3], p: [f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for d in 0..3 {
        let gap = (bmin[d] - p[d]).max(p[d] - bmax[d]).max(0.0);
        d2 += gap * gap;
    }
    d2
}

/// O(n²) pairwise reference. Every body receives a force regardless of
/// its active flag; this is the oracle the walks are judged against.
pub fn direct_sum(bodies: &[Body], softening: f64) -> Vec<[f64; 3]> {
    let eps2 = softening * softening;
    let mut accel = vec![[0.0; 3]; bodies.len()];
    parallel_fill(&mut accel, worker_count(), |i, a| {
        let p = bodies[i].position;
        for (j, b) in bodies.iter().enumerate() {
            if j != i {
                pp_accel(p, b.position, b.mass, eps2, a);
            }
        }
    });
    accel
}

#[derive(Default)]
struct BodySlot {
    a: [f64; 3],
    list: u64,
    mono: u64,
    part: u64,
}

/// Per-body Barnes–Hut walk. A node of size s at distance d from the
/// target is opened when s > theta·d, or always when the target sits
/// inside the node's box (an accepted node must never contain the
/// target, otherwise its own mass pollutes the monopole). `bodies` must
/// be the slice the tree was built over, in its post-build order.
pub fn bh_force(tree: &OctTree, bodies: &[Body], params: &WalkParams) -> ForceResult {
    let theta2 = params.theta * params.theta;
    let eps2 = params.softening * params.softening;
    let mut slots: Vec<BodySlot> = (0..bodies.len()).map(|_| BodySlot::default()).collect();

    parallel_fill(&mut slots, worker_count(), |i, slot| {
        if !bodies[i].active {
            return;
        }
        let p = bodies[i].position;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &tree.nodes[ni];
            let dr = [node.com[0] - p[0], node.com[1] - p[1], node.com[2] - p[2]];
            let d2 = dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2];
            let size = node.size();
            let open = node.dist2_to_point(p) == 0.0 || size * size > theta2 * d2;
            if open && !node.is_leaf() {
                for &c in &node.children {
                    if c >= 0 {
                        stack.push(c as usize);
                    }
                }
            } else if open {
                for (j, b) in bodies[node.start..node.end].iter().enumerate() {
                    slot.list += 1;
                    if node.start + j != i {
                        pp_accel(p, b.position, b.mass, eps2, &mut slot.a);
                        slot.part += 1;
                    }
                }
            } else {
                slot.list += 1;
                slot.mono += 1;
                let r2 = d2 + eps2;
                if r2 > 0.0 {
                    let w = node.mass / (r2 * r2.sqrt());
                    for d in 0..3 {
                        slot.a[d] += w * dr[d];
                    }
                }
            }
        }
    });

    let mut stats = WalkStats { list_lengths: Vec::with_capacity(slots.len()), ..Default::default() };
    let mut accel = Vec::with_capacity(slots.len());
    for s in slots {
        accel.push(s.a);
        stats.list_lengths.push(s.list);
        stats.monopole_evals += s.mono;
        stats.particle_evals += s.part;
    }
    ForceResult { accel, stats }
}

enum Entry {
    Node(usize),
    Particles(usize, usize),
}

struct GroupSlot {
    accel: Vec<[f64; 3]>,
    list: u64,
    mono: u64,
    part: u64,
}

/// Grouped walk: active bodies are taken in storage (Hilbert) order and
/// chunked into groups of `group_size`. Each group gets one interaction
/// list, built with a conservative acceptance test against the group's
/// bounding box — a node is opened whenever *any* member could need it —
/// and every node within `direct_radius` of the group (strictly, so a
/// zero radius disables the rule) is resolved down to particles. All
/// members then accumulate the shared list in the same order, skipping
/// only themselves.
pub fn grouped_walk_force(tree: &OctTree, bodies: &[Body], params: &WalkParams) -> ForceResult {
    let theta2 = params.theta * params.theta;
    let eps2 = params.softening * params.softening;
    let radius2 = params.direct_radius * params.direct_radius;
    let active: Vec<usize> = (0..bodies.len()).filter(|&i| bodies[i].active).collect();
    let groups: Vec<&[usize]> = active.chunks(params.group_size.max(1)).collect();

    let mut slots: Vec<GroupSlot> = groups
        .iter()
        .map(|g| GroupSlot { accel: vec![[0.0; 3]; g.len()], list: 0, mono: 0, part: 0 })
        .collect();

    parallel_fill(&mut slots, worker_count(), |g, slot| {
        let members = groups[g];
        let mut gmin = [f64::INFINITY; 3];
        let mut gmax = [f64::NEG_INFINITY; 3];
        for &i in members {
            for d in 0..3 {
                gmin[d] = gmin[d].min(bodies[i].position[d]);
                gmax[d] = gmax[d].max(bodies[i].position[d]);
            }
        }

        let mut entries = Vec::new();
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node: &TreeNode = &tree.nodes[ni];
            let box_gap2 = node.dist2_to_box(gmin, gmax);
            let com_gap2 = box_point_dist2(gmin, gmax, node.com);
            let size = node.size();
            let open = box_gap2 == 0.0
                || (params.direct_radius > 0.0 && box_gap2 < radius2)
                || size * size > theta2 * com_gap2;
            if open && !node.is_leaf() {
                for &c in &node.children {
                    if c >= 0 {
                        stack.push(c as usize);
                    }
                }
            } else if open {
                slot.list += (node.end - node.start) as u64;
                entries.push(Entry::Particles(node.start, node.end));
            } else {
                slot.list += 1;
                entries.push(Entry::Node(ni));
            }
        }

        for (k, &i) in members.iter().enumerate() {
            let p = bodies[i].position;
            let a = &mut slot.accel[k];
            for entry in &entries {
                match *entry {
                    Entry::Node(ni) => {
                        let node = &tree.nodes[ni];
                        slot.mono += 1;
                        pp_accel(p, node.com, node.mass, eps2, a);
                    }
                    Entry::Particles(start, end) => {
                        for (j, b) in bodies[start..end].iter().enumerate() {
                            if start + j != i {
                                pp_accel(p, b.position, b.mass, eps2, a);
                                slot.part += 1;
                            }
                        }
                    }
                }
            }
        }
    });

    let mut accel = vec![[0.0; 3]; bodies.len()];
    let mut stats = WalkStats { list_lengths: Vec::with_capacity(groups.len()), ..Default::default() };
    for (g, slot) in groups.iter().zip(slots) {
        for (k, &i) in g.iter().enumerate() {
            accel[i] = slot.accel[k];
        }
        stats.list_lengths.push(slot.list);
        stats.monopole_evals += slot.mono;
        stats.particle_evals += slot.part;
    }
    ForceResult { accel, stats }
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_cloud;
    use super::super::tree::build_tree;
    use super::super::Domain;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: [f64; 3]) -> f64 {
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    fn rel_errors(test: &[[f64; 3]], oracle: &[[f64; 3]]) -> Vec<f64> {
        test.iter()
            .zip(oracle)
            .map(|(t, o)| {
                let diff = [t[0] - o[0], t[1] - o[1], t[2] - o[2]];
                norm(diff) / norm(*o).max(f64::MIN_POSITIVE)
            })
            .collect()
    }

    fn median(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.total_cmp(b));
        xs[xs.len() / 2]
    }

    #[test]
    fn newton_pair_pulls_with_unit_force() {
        let bodies = vec![Body::at([-0.5, 0.0, 0.0], 1.0), Body::at([0.5, 0.0, 0.0], 1.0)];
        let a = direct_sum(&bodies, 0.0);
        assert_eq!(a[0], [1.0, 0.0, 0.0]);
        assert_eq!(a[1], [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn isolated_square_conserves_momentum() {
        let bodies = vec![
            Body::at([1.0, 1.0, 0.0], 1.0),
            Body::at([-1.0, 1.0, 0.0], 2.0),
            Body::at([-1.0, -1.0, 0.0], 3.0),
            Body::at([1.0, -1.0, 0.0], 4.0),
        ];
        let a = direct_sum(&bodies, 0.1);
        for d in 0..3 {
            let p_dot: f64 = bodies.iter().zip(&a).map(|(b, ai)| b.mass * ai[d]).sum();
            assert!(p_dot.abs() < 1e-13, "momentum leak {p_dot:e} on axis {d}");
        }
    }

    #[test]
    fn right_triangle_matches_hand_computation() {
        let bodies = vec![
            Body::at([0.0, 0.0, 0.0], 1.0),
            Body::at([1.0, 0.0, 0.0], 1.0),
            Body::at([0.0, 1.0, 0.0], 1.0),
        ];
        let a = direct_sum(&bodies, 0.0);
        let s = 1.0 / (2.0 * 2.0f64.sqrt()); // far pair at distance √2
        let expect = [
            [1.0, 1.0, 0.0],
            [-1.0 - s, s, 0.0],
            [s, -1.0 - s, 0.0],
        ];
        for (got, want) in a.iter().zip(&expect) {
            for d in 0..3 {
                assert!((got[d] - want[d]).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn theta_zero_walk_degenerates_to_direct_summation() {
        let mut bodies = random_cloud(2000, 31);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let oracle = direct_sum(&bodies, 0.05);
        let walk = bh_force(&tree, &bodies, &WalkParams { theta: 0.0, softening: 0.05, ..Default::default() });
        let worst = rel_errors(&walk.accel, &oracle).into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst deviation {worst:e}");
        // every body interacts with all n bodies: multi-body leaves are torn
        // open, and the only accepted "monopoles" are single-body boxes of
        // zero size, which are the exact particle term
        assert!(walk.stats.list_lengths.iter().all(|&l| l == bodies.len() as u64));
    }

    #[test]
    fn distant_cluster_collapses_to_a_monopole() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut bodies: Vec<Body> = (0..100)
            .map(|_| {
                Body::at(
                    [
                        rng.gen_range(-0.1..0.1),
                        rng.gen_range(-0.1..0.1),
                        rng.gen_range(-0.1..0.1),
                    ],
                    rng.gen_range(0.5..1.5),
                )
            })
            .collect();
        bodies.push(Body::at([10.0, 0.0, 0.0], 1.0));
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();

        let probe = bodies.iter().position(|b| b.position[0] > 5.0).unwrap();
        let oracle = direct_sum(&bodies, 1e-3);
        let walk = bh_force(&tree, &bodies, &WalkParams { theta: 0.5, softening: 1e-3, ..Default::default() });

        let size_over_d = 0.2 / 10.0;
        let err = rel_errors(&walk.accel, &oracle)[probe];
        assert!(err < size_over_d * size_over_d, "monopole error {err:e}");
        assert!(
            walk.stats.list_lengths[probe] <= 16,
            "probe saw {} interactions",
            walk.stats.list_lengths[probe]
        );
    }

    #[test]
    fn median_error_stays_under_a_percent_at_half_theta() {
        let mut bodies = random_cloud(1000, 55);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let oracle = direct_sum(&bodies, 0.02);
        let walk = bh_force(&tree, &bodies, &WalkParams { theta: 0.5, softening: 0.02, ..Default::default() });
        let med = median(rel_errors(&walk.accel, &oracle));
        assert!(med < 0.01, "median relative error {med:e}");
    }

    #[test]
    fn tightening_theta_never_worsens_the_median_error() {
        let mut bodies = random_cloud(1000, 90);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let oracle = direct_sum(&bodies, 0.02);
        let medians: Vec<f64> = [0.8, 0.5, 0.3]
            .iter()
            .map(|&theta| {
                let walk = bh_force(&tree, &bodies, &WalkParams { theta, softening: 0.02, ..Default::default() });
                median(rel_errors(&walk.accel, &oracle))
            })
            .collect();
        assert!(medians[1] <= medians[0], "0.5 worse than 0.8: {medians:?}");
        assert!(medians[2] <= medians[1], "0.3 worse than 0.5: {medians:?}");
        assert!(medians[2] < medians[0], "no improvement across range: {medians:?}");
    }

    #[test]
    fn singleton_groups_reproduce_the_per_body_walk() {
        let mut bodies = random_cloud(800, 12);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let params = WalkParams { theta: 0.6, softening: 0.02, group_size: 1, direct_radius: 0.0 };
        let per_body = bh_force(&tree, &bodies, &params);
        let grouped = grouped_walk_force(&tree, &bodies, &params);
        for (a, b) in per_body.accel.iter().zip(&grouped.accel) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() <= 1e-12 * a[d].abs().max(1.0));
            }
        }
        // acceptance decisions must be identical, not merely close
        assert_eq!(per_body.stats.list_lengths, grouped.stats.list_lengths);
    }

    #[test]
    fn grouped_walk_is_no_less_accurate_than_per_body() {
        let mut bodies = random_cloud(1000, 44);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let oracle = direct_sum(&bodies, 0.02);
        let base = WalkParams { theta: 0.5, softening: 0.02, group_size: 1, direct_radius: 0.0 };
        let per_body = bh_force(&tree, &bodies, &base);
        let grouped = grouped_walk_force(&tree, &bodies, &WalkParams { group_size: 32, ..base });
        let worst_bh = rel_errors(&per_body.accel, &oracle).into_iter().fold(0.0, f64::max);
        let worst_grouped = rel_errors(&grouped.accel, &oracle).into_iter().fold(0.0, f64::max);
        assert!(
            worst_grouped <= worst_bh + 1e-12,
            "grouped {worst_grouped:e} vs per-body {worst_bh:e}"
        );
    }

    #[test]
    fn shared_lists_beat_the_sum_of_member_lists() {
        let mut bodies = random_cloud(1000, 23);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let base = WalkParams { theta: 0.5, softening: 0.02, group_size: 32, direct_radius: 0.0 };
        let per_body = bh_force(&tree, &bodies, &base);
        let grouped = grouped_walk_force(&tree, &bodies, &base);
        let active: Vec<usize> = (0..bodies.len()).collect();
        for (g, chunk) in active.chunks(base.group_size).enumerate() {
            let member_sum: u64 = chunk.iter().map(|&i| per_body.stats.list_lengths[i]).sum();
            let shared = grouped.stats.list_lengths[g];
            assert!(shared <= member_sum, "group {g}: shared {shared} > members {member_sum}");
        }
    }

    #[test]
    fn direct_radius_forces_nearby_particle_sums() {
        let mut bodies = random_cloud(600, 66);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let base = WalkParams { theta: 0.8, softening: 0.02, group_size: 16, direct_radius: 0.0 };
        let far = grouped_walk_force(&tree, &bodies, &base);
        let near = grouped_walk_force(&tree, &bodies, &WalkParams { direct_radius: 0.5, ..base });
        assert!(near.stats.particle_evals > far.stats.particle_evals);
        assert!(near.stats.monopole_evals < far.stats.monopole_evals);
        // resolving more of the near field can only help accuracy
        let oracle = direct_sum(&bodies, 0.02);
        let e_far = median(rel_errors(&far.accel, &oracle));
        let e_near = median(rel_errors(&near.accel, &oracle));
        assert!(e_near <= e_far, "near {e_near:e} vs far {e_far:e}");
    }

    #[test]
    fn inactive_bodies_feel_nothing_but_still_pull() {
        let mut bodies = random_cloud(500, 13);
        let domain = Domain::enclosing(&bodies);
        let tree = build_tree(&mut bodies, &domain, 8).unwrap();
        let all_active = bh_force(&tree, &bodies, &WalkParams::default());

        for (i, b) in bodies.iter_mut().enumerate() {
            b.active = i % 2 == 0;
        }
        let masked = bh_force(&tree, &bodies, &WalkParams::default());
        for (i, a) in masked.accel.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(*a, all_active.accel[i], "sources must not depend on the mask");
            } else {
                assert_eq!(*a, [0.0; 3]);
            }
        }

        let grouped = grouped_walk_force(&tree, &bodies, &WalkParams::default());
        let oracle = direct_sum(&bodies, WalkParams::default().softening);
        for (i, a) in grouped.accel.iter().enumerate() {
            if i % 2 == 0 {
                let diff = [a[0] - oracle[i][0], a[1] - oracle[i][1], a[2] - oracle[i][2]];
                assert!(norm(diff) / norm(oracle[i]) < 0.05);
            } else {
                assert_eq!(*a, [0.0; 3]);
            }
        }
    }
}
