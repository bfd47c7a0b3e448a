//! 26-neighbor ghost exchange over the rank grid.
//!
//! Every direction's payload packs the bands of all requested fields into
//! one message; all sends are posted before any receive completes. Face
//! fields (one extra plane along their own axis) shift the source band by
//! one so the shared boundary plane — owned and updated identically by
//! both ranks — is never overwritten.

use crate::runtime::{compose_tag, Comm, CommError, Payload};
use crate::trace::Recorder;

use super::field::Field3;

const TAG_HALO_BASE: u32 = 0xA000_0000;

/// All 26 ghost directions in a fixed order (z-major).
pub const DIRS: [[i32; 3]; 26] = build_dirs();

const fn build_dirs() -> [[i32; 3]; 26] {
    let mut out = [[0; 3]; 26];
    let mut idx = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[idx] = [dx, dy, dz];
                    idx += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
}

fn dir_index(d: [i32; 3]) -> usize {
    DIRS.iter().position(|x| *x == d).expect("valid direction")
}

fn opposite(d: [i32; 3]) -> [i32; 3] {
    [-d[0], -d[1], -d[2]]
}

/// This rank's place in the periodic rank grid (x-fastest rank ordering).
#[derive(Clone, Copy, Debug)]
pub struct BlockMap {
    pub layout: [usize; 3],
    pub coords: [usize; 3],
    pub block_cells: [usize; 3],
}

impl BlockMap {
    pub fn new(rank: usize, layout: [usize; 3], global_cells: [usize; 3]) -> Self {
        assert!(rank < layout[0] * layout[1] * layout[2]);
        let coords = [
            rank % layout[0],
            (rank / layout[0]) % layout[1],
            rank / (layout[0] * layout[1]),
        ];
        let block_cells = [
            global_cells[0] / layout[0],
            global_cells[1] / layout[1],
            global_cells[2] / layout[2],
        ];
        BlockMap { layout, coords, block_cells }
    }

    pub fn rank_of(&self, coords: [usize; 3]) -> usize {
        (coords[2] * self.layout[1] + coords[1]) * self.layout[0] + coords[0]
    }

    pub fn neighbor(&self, dir: [i32; 3]) -> usize {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let l = self.layout[d] as i64;
            c[d] = ((self.coords[d] as i64 + dir[d] as i64).rem_euclid(l)) as usize;
        }
        self.rank_of(c)
    }

    /// Global index of this block's first owned cell per axis.
    pub fn origin(&self) -> [usize; 3] {
        [
            self.coords[0] * self.block_cells[0],
            self.coords[1] * self.block_cells[1],
            self.coords[2] * self.block_cells[2],
        ]
    }
}

/// Signed per-axis band `[start, start+len)` in a field's index space.
fn recv_range(dir: i32, own: usize, g: usize) -> (isize, usize) {
    match dir {
        1 => (own as isize, g),
        -1 => (-(g as isize), g),
        _ => (0, own),
    }
}

fn src_range(dir: i32, own: usize, n: usize, g: usize) -> (isize, usize) {
    match dir {
        // the receiver's upper ghosts map to our lower owned band; face
        // fields skip the shared boundary plane (shift = own − n = 1)
        1 => ((own - n) as isize, g),
        -1 => ((n - g) as isize, g),
        _ => (0, own),
    }
}

fn pack(field: &Field3, ranges: [(isize, usize); 3], out: &mut Vec<f64>) {
    for dk in 0..ranges[2].1 as isize {
        let k = ranges[2].0 + dk;
        for dj in 0..ranges[1].1 as isize {
            let j = ranges[1].0 + dj;
            for di in 0..ranges[0].1 as isize {
                out.push(field.at(ranges[0].0 + di, j, k));
            }
        }
    }
}

fn unpack(field: &mut Field3, ranges: [(isize, usize); 3], data: &[f64], cursor: &mut usize) {
    for dk in 0..ranges[2].1 as isize {
        let k = ranges[2].0 + dk;
        for dj in 0..ranges[1].1 as isize {
            let j = ranges[1].0 + dj;
            for di in 0..ranges[0].1 as isize {
                field.set(ranges[0].0 + di, j, k, data[*cursor]);
                *cursor += 1;
            }
        }
    }
}

fn src_ranges(field: &Field3, map: &BlockMap, recv_dir: [i32; 3]) -> [(isize, usize); 3] {
    let mut r = [(0isize, 0usize); 3];
    for a in 0..3 {
        r[a] = src_range(recv_dir[a], field.n()[a], map.block_cells[a], field.ghost());
    }
    r
}

fn recv_ranges(field: &Field3, recv_dir: [i32; 3]) -> [(isize, usize); 3] {
    let mut r = [(0isize, 0usize); 3];
    for a in 0..3 {
        r[a] = recv_range(recv_dir[a], field.n()[a], field.ghost());
    }
    r
}

/// Fills every ghost layer of `fields` from the periodic neighbors.
/// `seq` must be distinct per exchange (any monotone step counter works).
pub fn halo_exchange(
    comm: &mut Comm,
    rec: &mut Recorder,
    map: &BlockMap,
    fields: &mut [&mut Field3],
    seq: u64,
    region: &str,
) -> Result<(), CommError> {
    let me = comm.rank();
    // post all sends first
    for s in DIRS {
        let peer = map.neighbor(s);
        if peer == me {
            continue;
        }
        let recv_dir = opposite(s);
        let mut buf = Vec::new();
        for field in fields.iter() {
            pack(field, src_ranges(field, map, recv_dir), &mut buf);
        }
        let tag = compose_tag(TAG_HALO_BASE + dir_index(recv_dir) as u32, seq);
        comm.send(rec, peer, tag, Payload::F64(buf), region);
    }
    // complete receives in fixed direction order; periodic self-wraps
    // degenerate to local copies
    for d in DIRS {
        let peer = map.neighbor(d);
        if peer == me {
            let mut buf = Vec::new();
            for field in fields.iter() {
                pack(field, src_ranges(field, map, d), &mut buf);
            }
            let mut cursor = 0;
            for field in fields.iter_mut() {
                unpack(field, recv_ranges(field, d), &buf, &mut cursor);
            }
            continue;
        }
        let tag = compose_tag(TAG_HALO_BASE + dir_index(d) as u32, seq);
        let data = comm.recv(rec, peer, tag, region)?.into_f64();
        let mut cursor = 0;
        for field in fields.iter_mut() {
            unpack(field, recv_ranges(field, d), &data, &mut cursor);
        }
        debug_assert_eq!(cursor, data.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{run_ranks, DEFAULT_WATCHDOG};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn global_value(gi: i64, gj: i64, gk: i64, n: [usize; 3]) -> f64 {
        let w = |v: i64, m: usize| v.rem_euclid(m as i64) as f64;
        w(gi, n[0]) + 100.0 * w(gj, n[1]) + 10_000.0 * w(gk, n[2])
    }

    #[test]
    fn single_rank_wraps_periodically() {
        let n = [4, 5, 6];
        let g = 2;
        let map = BlockMap::new(0, [1, 1, 1], n);
        let out = run_ranks(1, DEFAULT_WATCHDOG, |ctx| {
            let mut f = Field3::new(n, g);
            f.for_owned(|i, j, k| global_value(i as i64, j as i64, k as i64, n));
            halo_exchange(&mut ctx.comm, &mut ctx.rec, &map, &mut [&mut f], 0, "halo").unwrap();
            f
        });
        let f = &out.results[0];
        for k in -(g as isize)..(n[2] + g) as isize {
            for j in -(g as isize)..(n[1] + g) as isize {
                for i in -(g as isize)..(n[0] + g) as isize {
                    assert_eq!(f.at(i, j, k), global_value(i as i64, j as i64, k as i64, n));
                }
            }
        }
    }

    #[test]
    fn two_ranks_exchange_interior_planes_bitwise() {
        let cells = [8, 4, 4];
        let layout = [2, 1, 1];
        let g = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let global: Vec<f64> = (0..cells[0] * cells[1] * cells[2])
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let gval = |gi: i64, gj: i64, gk: i64| {
            let w = |v: i64, m: usize| v.rem_euclid(m as i64) as usize;
            global[(w(gk, cells[2]) * cells[1] + w(gj, cells[1])) * cells[0] + w(gi, cells[0])]
        };
        let out = run_ranks(2, DEFAULT_WATCHDOG, |ctx| {
            let map = BlockMap::new(ctx.comm.rank(), layout, cells);
            let o = map.origin();
            let mut f = Field3::new(map.block_cells, g);
            f.for_owned(|i, j, k| gval(o[0] as i64 + i as i64, o[1] as i64 + j as i64, o[2] as i64 + k as i64));
            halo_exchange(&mut ctx.comm, &mut ctx.rec, &map, &mut [&mut f], 0, "halo").unwrap();
            (map, f)
        });
        // rank 0 right ghosts == rank 1 first interior planes, bit for bit
        let (_, f0) = &out.results[0];
        let (_, f1) = &out.results[1];
        for k in 0..4isize {
            for j in 0..4isize {
                for di in 0..g as isize {
                    assert_eq!(f0.at(4 + di, j, k), f1.at(di, j, k));
                    assert_eq!(f1.at(4 + di, j, k), f0.at(di, j, k)); // wraps
                }
            }
        }
    }

    #[test]
    fn eight_rank_ghosts_match_single_rank_oracle() {
        let cells = [8, 8, 8];
        let g = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let global: Vec<f64> = (0..cells[0] * cells[1] * cells[2])
            .map(|_| rng.gen_range(-10.0..10.0))
            .collect();
        let gval = move |gi: i64, gj: i64, gk: i64| {
            let w = |v: i64, m: usize| v.rem_euclid(m as i64) as usize;
            global[(w(gk, cells[2]) * cells[1] + w(gj, cells[1])) * cells[0] + w(gi, cells[0])]
        };

        // single-rank reference: the same data exchanged on one block
        let oracle = run_ranks(1, DEFAULT_WATCHDOG, |ctx| {
            let map = BlockMap::new(0, [1, 1, 1], cells);
            let mut f = Field3::new(cells, g);
            f.for_owned(|i, j, k| gval(i as i64, j as i64, k as i64));
            halo_exchange(&mut ctx.comm, &mut ctx.rec, &map, &mut [&mut f], 0, "halo").unwrap();
            f
        });
        let oracle = &oracle.results[0];

        let out = run_ranks(8, DEFAULT_WATCHDOG, |ctx| {
            let map = BlockMap::new(ctx.comm.rank(), [2, 2, 2], cells);
            let o = map.origin();
            let mut f = Field3::new(map.block_cells, g);
            f.for_owned(|i, j, k| gval(o[0] as i64 + i as i64, o[1] as i64 + j as i64, o[2] as i64 + k as i64));
            halo_exchange(&mut ctx.comm, &mut ctx.rec, &map, &mut [&mut f], 0, "halo").unwrap();
            (map.origin(), f)
        });
        for (origin, f) in &out.results {
            for k in -(g as isize)..(4 + g) as isize {
                for j in -(g as isize)..(4 + g) as isize {
                    for i in -(g as isize)..(4 + g) as isize {
                        let (gi, gj, gk) = (
                            origin[0] as i64 + i as i64,
                            origin[1] as i64 + j as i64,
                            origin[2] as i64 + k as i64,
                        );
                        let want = gval(gi, gj, gk);
                        assert_eq!(f.at(i, j, k), want, "mismatch at global ({gi},{gj},{gk})");
                        // and agree with the explicitly exchanged 1-rank field
                        let w = |v: i64, m: usize| v.rem_euclid(m as i64) as isize;
                        assert_eq!(
                            f.at(i, j, k),
                            oracle.at(w(gi, cells[0]), w(gj, cells[1]), w(gk, cells[2]))
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn face_fields_shift_past_the_shared_plane() {
        let cells = [8, 4, 4];
        let layout = [2, 1, 1];
        let g = 3;
        let out = run_ranks(2, DEFAULT_WATCHDOG, |ctx| {
            let map = BlockMap::new(ctx.comm.rank(), layout, cells);
            let o = map.origin();
            // face field along x: owned extent 5 per block, faces share gf=4k
            let mut f = Field3::new([map.block_cells[0] + 1, 4, 4], g);
            f.for_owned(|i, j, k| {
                let gf = (o[0] + i as usize) % cells[0];
                gf as f64 + 0.01 * j as f64 + 0.0001 * k as f64
            });
            halo_exchange(&mut ctx.comm, &mut ctx.rec, &map, &mut [&mut f], 1, "halo").unwrap();
            f
        });
        let f0 = &out.results[0];
        let f1 = &out.results[1];
        for k in 0..4isize {
            for j in 0..4isize {
                // rank0 ghost faces 5..7 are rank1's interior faces 1..3 (global 5..7)
                for d in 0..g as isize {
                    assert_eq!(f0.at(5 + d, j, k), f1.at(1 + d, j, k));
                    // and the shared global face 4 was never clobbered
                }
                assert_eq!(f0.at(4, j, k), f1.at(0, j, k));
            }
        }
    }
}
