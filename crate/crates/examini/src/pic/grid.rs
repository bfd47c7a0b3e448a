//! Node-centered field storage on a periodic 2D lattice.
//!
//! Cells are nx×ny; nodes are stored (nx+1)×(ny+1) so a particle's four
//! cloud-in-cell corners are always addressable without wrapping. Row nx
//! and column ny are aliases of row/column 0: deposits land on whichever
//! copy the particle touches and are folded onto the primary nodes
//! afterwards, while reads rely on the aliases being kept in sync.

use serde::{Deserialize, Serialize};

/// One scalar field on the aliased node lattice.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct NodeField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl NodeField {
    pub fn new(cells: [usize; 2]) -> Self {
        NodeField {
            nx: cells[0],
            ny: cells[1],
            data: vec![0.0; (cells[0] + 1) * (cells[1] + 1)],
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let ix = self.idx(i, j);
        self.data[ix] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let ix = self.idx(i, j);
        self.data[ix] += v;
    }

    pub fn cells(&self) -> [usize; 2] {
        [self.nx, self.ny]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn from_raw(cells: [usize; 2], data: Vec<f64>) -> Self {
        assert_eq!(data.len(), (cells[0] + 1) * (cells[1] + 1));
        NodeField { nx: cells[0], ny: cells[1], data }
    }

    /// Adds the aliased boundary copies onto the primary nodes, then
    /// restores the aliases. Call once after a deposition sweep.
    pub fn fold_boundaries(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..=ny {
            let v = self.at(nx, j);
            self.add(0, j, v);
            self.set(nx, j, 0.0);
        }
        for i in 0..=nx {
            let v = self.at(i, ny);
            self.add(i, 0, v);
            self.set(i, ny, 0.0);
        }
        self.sync_aliases();
    }

    /// Copies row/column 0 onto row nx / column ny.
    pub fn sync_aliases(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..=ny {
            let v = self.at(0, j);
            self.set(nx, j, v);
        }
        for i in 0..=nx {
            let v = self.at(i, 0);
            self.set(i, ny, v);
        }
    }

    /// True when every aliased copy equals its primary node exactly.
    pub fn aliases_consistent(&self) -> bool {
        let (nx, ny) = (self.nx, self.ny);
        (0..=ny).all(|j| self.at(nx, j) == self.at(0, j))
            && (0..=nx).all(|i| self.at(i, ny) == self.at(i, 0))
    }

    /// Sum over the nx×ny distinct nodes.
    pub fn sum_distinct(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                s += self.at(i, j);
            }
        }
        s
    }

    /// Applies `f(i, j, value)` over distinct nodes.
    pub fn map_distinct(&mut self, mut f: impl FnMut(usize, usize, f64) -> f64) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = f(i, j, self.at(i, j));
                self.set(i, j, v);
            }
        }
        self.sync_aliases();
    }
}

/// Cloud-in-cell stencil: the lower-left node and the four corner weights
/// in the order (i,j), (i+1,j), (i,j+1), (i+1,j+1).
#[derive(Clone, Copy, Debug)]
pub struct Cic {
    pub i: usize,
    pub j: usize,
    pub w: [f64; 4],
}

/// Positions must already be wrapped into [0, Lx) × [0, Ly).
pub fn cic_weights(x: f64, y: f64, cells: [usize; 2], spacing: [f64; 2]) -> Cic {
    let fx = x / spacing[0];
    let fy = y / spacing[1];
    let mut i = fx as usize;
    let mut j = fy as usize;
    // x just below the boundary can round the quotient up to nx.
    if i >= cells[0] {
        i = cells[0] - 1;
    }
    if j >= cells[1] {
        j = cells[1] - 1;
    }
    let ax = fx - i as f64;
    let ay = fy - j as f64;
    Cic {
        i,
        j,
        w: [
            (1.0 - ax) * (1.0 - ay),
            ax * (1.0 - ay),
            (1.0 - ax) * ay,
            ax * ay,
        ],
    }
}

/// Electromagnetic field pair on the node lattice.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct FieldGrid {
    pub cells: [usize; 2],
    pub extent: [f64; 2],
    pub e: [NodeField; 3],
    pub b: [NodeField; 3],
}

impl FieldGrid {
    pub fn new(cells: [usize; 2], extent: [f64; 2]) -> Self {
        FieldGrid {
            cells,
            extent,
            e: std::array::from_fn(|_| NodeField::new(cells)),
            b: std::array::from_fn(|_| NodeField::new(cells)),
        }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.extent[0] / self.cells[0] as f64,
            self.extent[1] / self.cells[1] as f64,
        ]
    }

    /// CIC interpolation of E and B to a point.
    pub fn gather_eb(&self, x: f64, y: f64) -> ([f64; 3], [f64; 3]) {
        let c = cic_weights(x, y, self.cells, self.spacing());
        let mut e = [0.0; 3];
        let mut b = [0.0; 3];
        let nodes = [(c.i, c.j), (c.i + 1, c.j), (c.i, c.j + 1), (c.i + 1, c.j + 1)];
        for (w, (i, j)) in c.w.iter().zip(nodes) {
            for d in 0..3 {
                e[d] += w * self.e[d].at(i, j);
                b[d] += w * self.b[d].at(i, j);
            }
        }
        (e, b)
    }

    /// ½∫(E² + B²) dA over the distinct lattice.
    pub fn field_energy(&self) -> f64 {
        let [dx, dy] = self.spacing();
        let mut s = 0.0;
        for j in 0..self.cells[1] {
            for i in 0..self.cells[0] {
                for d in 0..3 {
                    let e = self.e[d].at(i, j);
                    let b = self.b[d].at(i, j);
                    s += e * e + b * b;
                }
            }
        }
        0.5 * s * dx * dy
    }
}

/// Charge density, current density, and second-moment (stress) components
/// per species, all node-centered. Stress components are ordered
/// xx, xy, xz, yy, yz, zz.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SpeciesMoments {
    pub rho: NodeField,
    pub j: [NodeField; 3],
    pub p: [NodeField; 6],
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Moments {
    pub cells: [usize; 2],
    pub extent: [f64; 2],
    pub species: Vec<SpeciesMoments>,
}

impl Moments {
    pub fn new(n_species: usize, cells: [usize; 2], extent: [f64; 2]) -> Self {
        Moments {
            cells,
            extent,
            species: (0..n_species)
                .map(|_| SpeciesMoments {
                    rho: NodeField::new(cells),
                    j: std::array::from_fn(|_| NodeField::new(cells)),
                    p: std::array::from_fn(|_| NodeField::new(cells)),
                })
                .collect(),
        }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.extent[0] / self.cells[0] as f64,
            self.extent[1] / self.cells[1] as f64,
        ]
    }

    /// Σ ρ_s · ΔA over distinct nodes: the total charge carried by species s.
    pub fn species_charge(&self, s: usize) -> f64 {
        let [dx, dy] = self.spacing();
        self.species[s].rho.sum_distinct() * dx * dy
    }

    pub fn total_charge(&self) -> f64 {
        (0..self.species.len()).map(|s| self.species_charge(s)).sum()
    }

    /// Flattens distinct-node values of every component for reductions.
    pub fn pack_distinct(&self) -> Vec<f64> {
        let [nx, ny] = self.cells;
        let mut out = Vec::with_capacity(self.species.len() * 10 * nx * ny);
        for sp in &self.species {
            for f in std::iter::once(&sp.rho).chain(&sp.j).chain(&sp.p) {
                for j in 0..ny {
                    for i in 0..nx {
                        out.push(f.at(i, j));
                    }
                }
            }
        }
        out
    }

    pub fn unpack_distinct(&mut self, buf: &[f64]) {
        let [nx, ny] = self.cells;
        let mut it = buf.iter();
        for sp in &mut self.species {
            for f in std::iter::once(&mut sp.rho).chain(&mut sp.j).chain(&mut sp.p) {
                for j in 0..ny {
                    for i in 0..nx {
                        f.set(i, j, *it.next().expect("moment buffer too short"));
                    }
                }
                f.sync_aliases();
            }
        }
        assert!(it.next().is_none(), "moment buffer too long");
    }
}
