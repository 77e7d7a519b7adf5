//! Perfect-shuffle basis changes realized as index permutations.
//!
//! The shuffle S is defined by the tuple right-rotation
//! `S |n_1, ..., n_K> = |n_K, n_1, ..., n_{K-1}>`, which conjugates Kronecker
//! strings by rolling their factors: `S (A_1 x ... x A_K) S^T
//! = A_K x A_1 x ... x A_{K-1}`. It is never stored as a matrix — only the
//! forward index map is kept, so applying it is one O(D) scatter pass and the
//! auxiliary footprint is exactly D indices.
//!
//! Two frames exist: row-major product bases (used by the optomechanical
//! pair, any factor dimensions) and Skolem-ordered excitation islands (used
//! by the Bose-Hubbard chain). The cyclic identities `S^K = 1` and
//! `(S^T)^{K-1} = S` hold in the island frame always, and in the product
//! frame when all factor dimensions are equal; rolling unequal dimensions
//! changes the shape, so repeated application is only meaningful there via
//! the transpose.

use crate::fock::{self, ModeTuple};
use crate::tridiag::{StateVector, C64};
use crate::{Error, Result};

/// Which basis a permutation reindexes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// Row-major product basis with the given factor dimensions.
    Product { dims: Vec<usize> },
    /// Skolem-ordered excitation island, indices stored as `z - z_low`.
    Island { n_total: u64, k: usize },
}

/// An index permutation over the linear basis: applying it sends the
/// amplitude at `z` to `map[z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShufflePermutation {
    map: Vec<usize>,
    /// Cyclic order K of the underlying roll.
    order: u32,
    /// Frame positions advanced per application, mod `order`.
    shift: u32,
    frame: Frame,
}

impl ShufflePermutation {
    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// The inverse permutation.
    pub fn transpose(&self) -> Self {
        let mut inv = vec![0usize; self.map.len()];
        for (z, &m) in self.map.iter().enumerate() {
            inv[m] = z;
        }
        Self {
            map: inv,
            order: self.order,
            shift: (self.order - self.shift % self.order) % self.order,
            frame: self.frame.clone(),
        }
    }

    /// The j-fold composition.
    pub fn power(&self, j: u32) -> Self {
        let mut map: Vec<usize> = (0..self.map.len()).collect();
        for _ in 0..j {
            for m in map.iter_mut() {
                *m = self.map[*m];
            }
        }
        Self {
            map,
            order: self.order,
            shift: (self.shift as u64 * j as u64 % self.order as u64) as u32,
            frame: self.frame.clone(),
        }
    }

    /// Scatter `src` into `dst` without allocating: `dst[map[z]] = src[z]`.
    pub fn apply_into(&self, src: &[C64], dst: &mut [C64]) -> Result<()> {
        if src.len() != self.map.len() || dst.len() != self.map.len() {
            return Err(Error::DimensionMismatch {
                expected: self.map.len(),
                got: src.len().max(dst.len()),
            });
        }
        for (z, &m) in self.map.iter().enumerate() {
            dst[m] = src[z];
        }
        Ok(())
    }
}

/// Permutation realizing the roll `|n_1, ..., n_K> -> |n_K, n_1, ...,
/// n_{K-1}>` on a row-major product basis, so that conjugation satisfies
/// `S (x_j A_j) S^T = A_K x (x_{j<K} A_j)`.
pub fn product_shuffle(dims: &[usize]) -> Result<ShufflePermutation> {
    if dims.is_empty() || dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParam(
            "product shuffle needs at least one factor, all dimensions >= 1".into(),
        ));
    }
    let total: u128 = dims.iter().map(|&d| d as u128).product();
    let dim = usize::try_from(total).map_err(|_| Error::Overflow("product basis dimension"))?;
    let k = dims.len();
    // rolled layout: dims' = (d_K, d_1, ..., d_{K-1}); a tuple's new index is
    // its rotation evaluated against the rolled strides, which works out to
    // new = n_K * (D / d_K) + old_without_nK
    let stride_last = dim / dims[k - 1];
    let mut map = vec![0usize; dim];
    for (z, m) in map.iter_mut().enumerate() {
        let n_last = z % dims[k - 1];
        let rest = z / dims[k - 1];
        *m = n_last * stride_last + rest;
    }
    Ok(ShufflePermutation {
        map,
        order: k as u32,
        shift: 1,
        frame: Frame::Product {
            dims: dims.to_vec(),
        },
    })
}

/// The same roll conjugated into the Skolem island basis:
/// `pi(z - z_low) = skolem(rotate_right(skolem_inverse(z))) - z_low`.
/// Rotation preserves the total occupation, so the island maps to itself.
pub fn island_shuffle(n_total: u64, k: usize) -> Result<ShufflePermutation> {
    let spec = fock::island_spec(n_total, k)?;
    let tuples = fock::enumerate_island(n_total, k)?;
    let mut map = vec![0usize; tuples.len()];
    for (i, t) in tuples.iter().enumerate() {
        let z = fock::skolem(&t.rotate_right())?;
        debug_assert!(z >= spec.z_low && z <= spec.z_high);
        map[i] = (z - spec.z_low) as usize;
    }
    Ok(ShufflePermutation {
        map,
        order: k as u32,
        shift: 1,
        frame: Frame::Island { n_total, k },
    })
}

/// Apply a permutation to a state, writing a fresh output vector. Norm and
/// inner products are preserved exactly (amplitudes are only moved).
pub fn apply_perm(p: &ShufflePermutation, v: &StateVector) -> Result<StateVector> {
    if v.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: v.dim(),
        });
    }
    let mut out = vec![C64::new(0.0, 0.0); v.dim()];
    p.apply_into(v.amps(), &mut out)?;
    let mut state = StateVector::new(out)?;
    state.set_frame((v.frame() + p.shift) % p.order.max(1));
    Ok(state)
}

/// Rotate a tuple right, exposed for observable bookkeeping.
pub fn rotate_right(t: &ModeTuple) -> ModeTuple {
    t.rotate_right()
}
