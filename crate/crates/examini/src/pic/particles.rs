//! Particle storage and Maxwellian loading.
//!
//! Particles are generated in a single global order (species by species,
//! cell by cell) from a seeded stream, so the initial ensemble is identical
//! for any rank count; ranks pick their stripe out of the global set
//! afterwards. The quiet start pairs every sampled velocity with its exact
//! negation at the same position, cancelling net momentum and the initial
//! current node-by-node.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PicConfig, SpeciesConfig};

/// Structure-of-arrays storage for one species.
#[derive(Clone, PartialEq, Debug)]
pub struct ParticleSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub vz: Vec<f64>,
    /// Charge-to-mass ratio per particle.
    pub qm: Vec<f64>,
    /// Statistical weight per particle (physical particles per macro).
    pub weight: Vec<f64>,
    /// Physical charge and mass of one represented particle.
    pub charge: f64,
    pub mass: f64,
}

impl ParticleSet {
    pub fn with_capacity(sp: &SpeciesConfig, cap: usize) -> Self {
        ParticleSet {
            x: Vec::with_capacity(cap),
            y: Vec::with_capacity(cap),
            vx: Vec::with_capacity(cap),
            vy: Vec::with_capacity(cap),
            vz: Vec::with_capacity(cap),
            qm: Vec::with_capacity(cap),
            weight: Vec::with_capacity(cap),
            charge: sp.charge,
            mass: sp.mass,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, x: f64, y: f64, v: [f64; 3], qm: f64, weight: f64) {
        self.x.push(x);
        self.y.push(y);
        self.vx.push(v[0]);
        self.vy.push(v[1]);
        self.vz.push(v[2]);
        self.qm.push(qm);
        self.weight.push(weight);
    }

    /// Copies particle `i` into `dst`.
    pub fn copy_to(&self, i: usize, dst: &mut ParticleSet) {
        dst.push(
            self.x[i],
            self.y[i],
            [self.vx[i], self.vy[i], self.vz[i]],
            self.qm[i],
            self.weight[i],
        );
    }

    pub fn remove_indices(&mut self, sorted: &[usize]) {
        // Sweep once, keeping everything not listed; `sorted` is ascending.
        let mut next = 0usize;
        let mut keep = 0usize;
        for i in 0..self.len() {
            if next < sorted.len() && sorted[next] == i {
                next += 1;
                continue;
            }
            self.x[keep] = self.x[i];
            self.y[keep] = self.y[i];
            self.vx[keep] = self.vx[i];
            self.vy[keep] = self.vy[i];
            self.vz[keep] = self.vz[i];
            self.qm[keep] = self.qm[i];
            self.weight[keep] = self.weight[i];
            keep += 1;
        }
        self.truncate(keep);
    }

    pub fn truncate(&mut self, len: usize) {
        self.x.truncate(len);
        self.y.truncate(len);
        self.vx.truncate(len);
        self.vy.truncate(len);
        self.vz.truncate(len);
        self.qm.truncate(len);
        self.weight.truncate(len);
    }

    pub fn append(&mut self, other: &ParticleSet) {
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
        self.vx.extend_from_slice(&other.vx);
        self.vy.extend_from_slice(&other.vy);
        self.vz.extend_from_slice(&other.vz);
        self.qm.extend_from_slice(&other.qm);
        self.weight.extend_from_slice(&other.weight);
    }

    /// Net momentum Σ m·w·v.
    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for i in 0..self.len() {
            let mw = self.mass * self.weight[i];
            p[0] += mw * self.vx[i];
            p[1] += mw * self.vy[i];
            p[2] += mw * self.vz[i];
        }
        p
    }

    /// Σ ½ m·w·|v|².
    pub fn kinetic_energy(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len() {
            let v2 = self.vx[i] * self.vx[i] + self.vy[i] * self.vy[i] + self.vz[i] * self.vz[i];
            s += 0.5 * self.mass * self.weight[i] * v2;
        }
        s
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // gen_range(0.0..1.0) can return 0, which ln() rejects.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}

fn sample_velocity(rng: &mut ChaCha8Rng, thermal: [f64; 3]) -> [f64; 3] {
    let (n0, n1) = box_muller(rng);
    let (n2, _) = box_muller(rng);
    [thermal[0] * n0, thermal[1] * n1, thermal[2] * n2]
}

/// Loads every species over the whole domain. Placement is uniform inside
/// each cell; velocities are Maxwellian with per-component thermal spread.
pub fn init_maxwellian(cfg: &PicConfig) -> Vec<ParticleSet> {
    let [nx, ny] = cfg.cells;
    let [dx, dy] = cfg.spacing();
    let mut out = Vec::with_capacity(cfg.species.len());

    for (s, sp) in cfg.species.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(s as u64 + 1)));
        let total = nx * ny * sp.ppc;
        let mut set = ParticleSet::with_capacity(sp, total);
        let qm = sp.charge / sp.mass;
        let weight = sp.density * dx * dy / sp.ppc as f64;

        for cj in 0..ny {
            for ci in 0..nx {
                let mut left = sp.ppc;
                while left > 0 {
                    let x = (ci as f64 + rng.gen::<f64>()) * dx;
                    let y = (cj as f64 + rng.gen::<f64>()) * dy;
                    let v = sample_velocity(&mut rng, sp.thermal);
                    if cfg.quiet_start {
                        if left >= 2 {
                            set.push(x, y, v, qm, weight);
                            set.push(x, y, [-v[0], -v[1], -v[2]], qm, weight);
                            left -= 2;
                        } else {
                            // odd ppc: the unpaired particle sits still
                            set.push(x, y, [0.0; 3], qm, weight);
                            left -= 1;
                        }
                    } else {
                        set.push(x, y, v, qm, weight);
                        left -= 1;
                    }
                }
            }
        }
        out.push(set);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::maxwellian_config;
    use super::*;

    #[test]
    fn particle_count_matches_cells_times_ppc() {
        let cfg = maxwellian_config([8, 8], 4, 0.01);
        let sets = init_maxwellian(&cfg);
        let total: usize = sets.iter().map(ParticleSet::len).sum();
        assert_eq!(total, 512);
        assert_eq!(sets[0].len(), 256);
    }

    #[test]
    fn quiet_start_cancels_momentum() {
        let cfg = maxwellian_config([8, 8], 4, 0.01);
        for set in init_maxwellian(&cfg) {
            let p = set.momentum();
            for c in p {
                assert!(c.abs() < 1e-12, "net momentum {p:?}");
            }
        }
    }

    #[test]
    fn positions_stay_inside_the_domain() {
        let cfg = maxwellian_config([8, 8], 5, 0.01); // odd ppc exercises the unpaired branch
        for set in init_maxwellian(&cfg) {
            assert_eq!(set.len(), 8 * 8 * 5);
            for i in 0..set.len() {
                assert!((0.0..1.0).contains(&set.x[i]));
                assert!((0.0..1.0).contains(&set.y[i]));
            }
            let p = set.momentum();
            assert!(p.iter().all(|c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn thermal_variance_matches_at_large_count() {
        let mut cfg = maxwellian_config([50, 50], 40, 0.01); // 1e5 per species
        cfg.species.truncate(1);
        cfg.species[0].thermal = [0.05, 0.08, 0.03];
        let set = &init_maxwellian(&cfg)[0];
        assert_eq!(set.len(), 100_000);
        let n = set.len() as f64;
        for (comp, vt) in [(&set.vx, 0.05), (&set.vy, 0.08), (&set.vz, 0.03)] {
            let var: f64 = comp.iter().map(|v| v * v).sum::<f64>() / n;
            let rel = (var - vt * vt).abs() / (vt * vt);
            assert!(rel < 0.02, "variance off by {:.3}%", rel * 100.0);
        }
    }

    #[test]
    fn same_seed_reproduces_the_ensemble() {
        let cfg = maxwellian_config([8, 4], 4, 0.01);
        let a = init_maxwellian(&cfg);
        let b = init_maxwellian(&cfg);
        assert_eq!(a, b);
        let mut cfg2 = cfg.clone();
        cfg2.seed = 8;
        assert_ne!(init_maxwellian(&cfg2), a);
    }

    #[test]
    fn remove_indices_keeps_survivor_order() {
        let cfg = maxwellian_config([4, 4], 2, 0.01);
        let mut set = init_maxwellian(&cfg).remove(0);
        let before: Vec<f64> = set.x.clone();
        set.remove_indices(&[0, 5, 6, 31]);
        assert_eq!(set.len(), 28);
        let expected: Vec<f64> = before
            .iter()
            .enumerate()
            .filter(|(i, _)| ![0usize, 5, 6, 31].contains(i))
            .map(|(_, &v)| v)
            .collect();
        assert_eq!(set.x, expected);
    }
}
