//! Ghosted 3D scalar storage.
//!
//! `Field3` holds one component on an `n[0]×n[1]×n[2]` owned region padded
//! by `g` ghost layers per side; indices are signed so ghost cells sit at
//! negative offsets. Cell- and face-centered quantities share the type —
//! a face field simply owns one extra plane along its own axis.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field3 {
    n: [usize; 3],
    g: usize,
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Field3 {
    pub fn new(n: [usize; 3], g: usize) -> Self {
        let dims = [n[0] + 2 * g, n[1] + 2 * g, n[2] + 2 * g];
        Field3 { n, g, dims, data: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn ghost(&self) -> usize {
        self.g
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline(always)]
    pub fn idx(&self, i: isize, j: isize, k: isize) -> usize {
        let g = self.g as isize;
        debug_assert!(i >= -g && (i + g) < self.dims[0] as isize);
        debug_assert!(j >= -g && (j + g) < self.dims[1] as isize);
        debug_assert!(k >= -g && (k + g) < self.dims[2] as isize);
        ((k + g) as usize * self.dims[1] + (j + g) as usize) * self.dims[0] + (i + g) as usize
    }

    #[inline(always)]
    pub fn at(&self, i: isize, j: isize, k: isize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline(always)]
    pub fn set(&mut self, i: isize, j: isize, k: isize, v: f64) {
        let id = self.idx(i, j, k);
        self.data[id] = v;
    }

    #[inline(always)]
    pub fn add(&mut self, i: isize, j: isize, k: isize, v: f64) {
        let id = self.idx(i, j, k);
        self.data[id] += v;
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Owned (non-ghost) values flattened in z-major order, for global
    /// assembly and bitwise comparisons.
    pub fn owned(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n[0] * self.n[1] * self.n[2]);
        for k in 0..self.n[2] as isize {
            for j in 0..self.n[1] as isize {
                for i in 0..self.n[0] as isize {
                    out.push(self.at(i, j, k));
                }
            }
        }
        out
    }

    /// Iterates `f(i, j, k)` over the owned region.
    pub fn for_owned(&mut self, mut f: impl FnMut(isize, isize, isize) -> f64) {
        for k in 0..self.n[2] as isize {
            for j in 0..self.n[1] as isize {
                for i in 0..self.n[0] as isize {
                    self.set(i, j, k, f(i, j, k));
                }
            }
        }
    }
}

/// Staggered face-centered magnetic field: `bx` lives on x-faces
/// (nx+1 per row), `by` on y-faces, `bz` on z-faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceB {
    pub bx: Field3,
    pub by: Field3,
    pub bz: Field3,
}

impl FaceB {
    pub fn new(cells: [usize; 3], g: usize) -> Self {
        FaceB {
            bx: Field3::new([cells[0] + 1, cells[1], cells[2]], g),
            by: Field3::new([cells[0], cells[1] + 1, cells[2]], g),
            bz: Field3::new([cells[0], cells[1], cells[2] + 1], g),
        }
    }

    pub fn cells(&self) -> [usize; 3] {
        [self.bx.n()[0] - 1, self.by.n()[1] - 1, self.bz.n()[2] - 1]
    }

    pub fn fields_mut(&mut self) -> [&mut Field3; 3] {
        [&mut self.bx, &mut self.by, &mut self.bz]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghost_indexing_round_trips() {
        let mut f = Field3::new([4, 3, 2], 2);
        f.set(-2, -2, -2, 7.0);
        f.set(5, 4, 3, 9.0);
        f.set(0, 0, 0, 1.0);
        assert_eq!(f.at(-2, -2, -2), 7.0);
        assert_eq!(f.at(5, 4, 3), 9.0);
        assert_eq!(f.at(0, 0, 0), 1.0);
        assert_eq!(f.dims(), [8, 7, 6]);
    }

    #[test]
    fn owned_extract_skips_ghosts() {
        let mut f = Field3::new([2, 2, 1], 1);
        let mut v = 0.0;
        f.for_owned(|_, _, _| {
            v += 1.0;
            v
        });
        assert_eq!(f.owned(), vec![1.0, 2.0, 3.0, 4.0]);
        // ghost corners untouched
        assert_eq!(f.at(-1, -1, -1), 0.0);
    }

    #[test]
    fn faceb_extents_are_staggered() {
        let fb = FaceB::new([4, 5, 6], 3);
        assert_eq!(fb.bx.n(), [5, 5, 6]);
        assert_eq!(fb.by.n(), [4, 6, 6]);
        assert_eq!(fb.bz.n(), [4, 5, 7]);
        assert_eq!(fb.cells(), [4, 5, 6]);
    }
}
