//! Oct-tree over Hilbert-sorted bodies.
//!
//! Keys are computed once at a fixed order; sorting by key makes every
//! tree node a contiguous slice of the body array, so the build is a
//! sequence of range splits on the next 3-bit key digit and no
//! per-node particle lists are needed.

use super::hilbert::{cell_key, position_cell};
use super::{Body, Domain, GravityError};

pub const TREE_ORDER: u32 = 16;
pub const DEFAULT_LEAF_CAPACITY: usize = 8;

const NO_CHILD: i32 = -1;

#[derive(Clone, Copy, Debug)]
pub struct TreeNode {
    /// Tight bounding box of the bodies in `start..end`.
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub com: [f64; 3],
    pub mass: f64,
    pub children: [i32; 8],
    pub start: usize,
    pub end: usize,
    pub depth: u32,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.iter().all(|&c| c == NO_CHILD)
    }

    pub fn count(&self) -> usize {
        self.end - self.start
    }

    /// Longest box edge; the size used by the opening criterion.
    pub fn size(&self) -> f64 {
        (0..3).map(|d| self.box_max[d] - self.box_min[d]).fold(0.0, f64::max)
    }

    /// Squared distance from a point to the box (zero inside).
    pub fn dist2_to_point(&self, p: [f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for d in 0..3 {
            let gap = (self.box_min[d] - p[d]).max(p[d] - self.box_max[d]).max(0.0);
            d2 += gap * gap;
        }
        d2
    }

    /// Squared distance between this box and another box (zero if they touch).
    pub fn dist2_to_box(&self, other_min: [f64; 3], other_max: [f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for d in 0..3 {
            let gap = (self.box_min[d] - other_max[d]).max(other_min[d] - self.box_max[d]).max(0.0);
            d2 += gap * gap;
        }
        d2
    }
}

pub struct OctTree {
    pub nodes: Vec<TreeNode>,
    pub domain: Domain,
    pub order: u32,
    pub leaf_capacity: usize,
}

impl OctTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Leaf whose key range covers `position`, or `None` when the matching
    /// branch holds no bodies.
    pub fn leaf_containing(&self, position: [f64; 3]) -> Result<Option<usize>, GravityError> {
        let cell = position_cell(position, &self.domain, self.order)?;
        let key = cell_key(cell, self.order);
        let mut ni = 0usize;
        loop {
            let node = &self.nodes[ni];
            if node.is_leaf() {
                return Ok(Some(ni));
            }
            let digit = (key >> (3 * (self.order - 1 - node.depth))) & 7;
            let child = node.children[digit as usize];
            if child == NO_CHILD {
                return Ok(None);
            }
            ni = child as usize;
        }
    }

    /// Structural invariants: leaves tile the body range exactly, parent
    /// mass closes over children to 1e-12 relative, centres of mass stay
    /// inside their boxes and bodies stay inside their leaf boxes.
    pub fn audit(&self, bodies: &[Body]) -> Result<(), String> {
        let mut leaf_ranges = Vec::new();
        for (ni, node) in self.nodes.iter().enumerate() {
            if node.start >= node.end {
                return Err(format!("node {ni} owns an empty range"));
            }
            for d in 0..3 {
                if node.com[d] < node.box_min[d] - 1e-12 || node.com[d] > node.box_max[d] + 1e-12 {
                    return Err(format!("node {ni} centre of mass escapes its box on axis {d}"));
                }
            }
            if node.is_leaf() {
                leaf_ranges.push((node.start, node.end));
                let mut mass = 0.0;
                for b in &bodies[node.start..node.end] {
                    mass += b.mass;
                    for d in 0..3 {
                        if b.position[d] < node.box_min[d] || b.position[d] > node.box_max[d] {
                            return Err(format!("body outside leaf {ni} box"));
                        }
                    }
                }
                let rel = (node.mass - mass).abs() / mass.max(f64::MIN_POSITIVE);
                if rel > 1e-12 {
                    return Err(format!("leaf {ni} mass off by {rel:.3e} relative"));
                }
            } else {
                let mut mass = 0.0;
                let mut covered = node.start;
                for &c in &node.children {
                    if c == NO_CHILD {
                        continue;
                    }
                    let child = &self.nodes[c as usize];
                    if child.start != covered {
                        return Err(format!("node {ni} children leave a gap at {covered}"));
                    }
                    covered = child.end;
                    mass += child.mass;
                }
                if covered != node.end {
                    return Err(format!("node {ni} children do not cover its range"));
                }
                let rel = (node.mass - mass).abs() / mass.max(f64::MIN_POSITIVE);
                if rel > 1e-12 {
                    return Err(format!("node {ni} mass off by {rel:.3e} relative"));
                }
            }
        }
        leaf_ranges.sort_unstable();
        let mut covered = 0;
        for (s, e) in leaf_ranges {
            if s != covered {
                return Err(format!("leaves leave bodies {covered}..{s} unowned"));
            }
            covered = e;
        }
        if covered != bodies.len() {
            return Err(format!("leaves cover {covered} of {} bodies", bodies.len()));
        }
        Ok(())
    }
}

/// Builds the tree in place: stamps Hilbert keys, sorts `bodies` by key
/// (stable, so equal-cell bodies keep their input order) and splits
/// contiguous key ranges until a range fits `leaf_capacity` or the key
/// resolution is exhausted.
pub fn build_tree(
    bodies: &mut [Body],
    domain: &Domain,
    leaf_capacity: usize,
) -> Result<OctTree, GravityError> {
    assert!(!bodies.is_empty(), "build_tree needs at least one body");
    assert!(leaf_capacity >= 1);
    domain.validate()?;

    for b in bodies.iter_mut() {
        let cell = position_cell(b.position, domain, TREE_ORDER)?;
        b.hilbert_key = cell_key(cell, TREE_ORDER);
    }
    bodies.sort_by_key(|b| b.hilbert_key);

    let mut nodes = Vec::with_capacity(2 * bodies.len() / leaf_capacity.max(1) + 16);
    build_range(bodies, 0, bodies.len(), 0, leaf_capacity, &mut nodes);
    Ok(OctTree { nodes, domain: *domain, order: TREE_ORDER, leaf_capacity })
}

fn build_range(
    bodies: &[Body],
    start: usize,
    end: usize,
    depth: u32,
    leaf_capacity: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let ni = nodes.len();
    nodes.push(TreeNode {
        box_min: [f64::INFINITY; 3],
        box_max: [f64::NEG_INFINITY; 3],
        com: [0.0; 3],
        mass: 0.0,
        children: [NO_CHILD; 8],
        start,
        end,
        depth,
    });

    if end - start <= leaf_capacity || depth == TREE_ORDER {
        let mut mass = 0.0;
        let mut weighted = [0.0; 3];
        let mut bmin = [f64::INFINITY; 3];
        let mut bmax = [f64::NEG_INFINITY; 3];
        for b in &bodies[start..end] {
            mass += b.mass;
            for d in 0..3 {
                weighted[d] += b.mass * b.position[d];
                bmin[d] = bmin[d].min(b.position[d]);
                bmax[d] = bmax[d].max(b.position[d]);
            }
        }
        let node = &mut nodes[ni];
        node.mass = mass;
        node.com = [weighted[0] / mass, weighted[1] / mass, weighted[2] / mass];
        node.box_min = bmin;
        node.box_max = bmax;
        return ni;
    }

    let shift = 3 * (TREE_ORDER - 1 - depth);
    let mut children = [NO_CHILD; 8];
    let mut cursor = start;
    while cursor < end {
        let digit = ((bodies[cursor].hilbert_key >> shift) & 7) as usize;
        let sub_end = bodies[cursor..end]
            .partition_point(|b| ((b.hilbert_key >> shift) & 7) as usize == digit)
            + cursor;
        children[digit] = build_range(bodies, cursor, sub_end, depth + 1, leaf_capacity, nodes) as i32;
        cursor = sub_end;
    }

    let mut mass = 0.0;
    let mut weighted = [0.0; 3];
    let mut bmin = [f64::INFINITY; 3];
    let mut bmax = [f64::NEG_INFINITY; 3];
    for &c in &children {
        if c == NO_CHILD {
            continue;
        }
        let child = &nodes[c as usize];
        mass += child.mass;
        for d in 0..3 {
            weighted[d] += child.mass * child.com[d];
            bmin[d] = bmin[d].min(child.box_min[d]);
            bmax[d] = bmax[d].max(child.box_max[d]);
        }
    }
    let node = &mut nodes[ni];
    node.children = children;
    node.mass = mass;
    node.com = [weighted[0] / mass, weighted[1] / mass, weighted[2] / mass];
    node.box_min = bmin;
    node.box_max = bmax;
    ni
}
