//! 3-D Hilbert curve keys via Skilling's transpose construction.

use super::{Domain, GravityError};

pub const MAX_ORDER: u32 = 21; // 3*21 = 63 bits fits a u64

/// Skilling's AxesToTranspose: turns per-axis cell coordinates into the
/// transposed Hilbert index, in place. `order` bits per axis.
fn axes_to_transpose(x: &mut [u32; 3], order: u32) {
    let m = 1u32 << (order - 1);

    // inverse undo
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..3 {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    // gray encode
    for i in 1..3 {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    q = m;
    while q > 1 {
        if x[2] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut() {
        *xi ^= t;
    }
}

/// Key for integer cell coordinates on a 2^order lattice. Bits of the
/// transpose are interleaved x-major, most significant first.
pub(super) fn cell_key(cell: [u32; 3], order: u32) -> u64 {
    debug_assert!(order >= 1 && order <= MAX_ORDER);
    let mut x = cell;
    axes_to_transpose(&mut x, order);
    let mut key = 0u64;
    for bit in (0..order).rev() {
        for xi in &x {
            key = (key << 1) | ((xi >> bit) & 1) as u64;
        }
    }
    key
}

pub(super) fn position_cell(
    position: [f64; 3],
    domain: &Domain,
    order: u32,
) -> Result<[u32; 3], GravityError> {
    let cells = 1u64 << order;
    let mut cell = [0u32; 3];
    for d in 0..3 {
        let rel = (position[d] - domain.min[d]) / domain.size[d];
        if !(0.0..=1.0).contains(&rel) || !rel.is_finite() {
            return Err(GravityError::OutOfDomain { position });
        }
        cell[d] = ((rel * cells as f64) as u64).min(cells - 1) as u32;
    }
    Ok(cell)
}

/// Hilbert key of a position inside `domain`, on a 2^order per-axis grid.
/// The curve is continuous: consecutive keys are face-adjacent cells, so
/// sorting by key yields spatial locality.
pub fn hilbert_key(position: [f64; 3], domain: &Domain, order: u32) -> Result<u64, GravityError> {
    assert!(order >= 1 && order <= MAX_ORDER, "order must be in 1..=21");
    let cell = position_cell(position, domain, order)?;
    Ok(cell_key(cell, order))
}
