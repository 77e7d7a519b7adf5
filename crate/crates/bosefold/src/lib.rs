//! Exact tridiagonal renderings of multi-mode bosonic Hamiltonians and
//! norm-preserving split-operator propagators.
//!
//! Bose-Hubbard chains and a driven two-mode optomechanical oscillator are
//! rendered as real symmetric tridiagonal matrices by ordering the Fock basis
//! with Skolem polynomials (a combinatorial number system over occupation
//! tuples). In that ordering the nearest-neighbor hopping pair couples only
//! adjacent basis indices, so each Hamiltonian term stores 2D-1 numbers,
//! splits into small irreducible blocks, and diagonalizes cheaply. Time
//! evolution alternates exact block-spectral exponentials with perfect-shuffle
//! basis changes that are pure index permutations, which keeps every factor
//! unitary and the propagation norm-preserving at machine precision.
//!
//! Module map:
//! - [`fock`]: tuple <-> linear index bijection, excitation islands
//! - [`tridiag`]: band storage, block splitting, QL eigensolver, `exp_apply`
//! - [`shuffle`]: roll-over permutations in product and island frames
//! - [`hamiltonian`]: Bose-Hubbard and optomechanical builders
//! - [`propagator`]: first/second-order split-operator plans and evolution
//! - [`oracle`]: dense brute-force reference for small instances

pub mod fock;
pub mod hamiltonian;
pub mod oracle;
pub mod propagator;
pub mod shuffle;
pub mod tridiag;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// 64-bit unsigned arithmetic overflowed; reported, never wrapped.
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    /// A K-combination was not strictly decreasing.
    #[error("invalid combination: entries must be strictly decreasing, got {0:?}")]
    InvalidCombination(Vec<u64>),

    /// A basis or matrix is too large to materialize.
    #[error("capacity exceeded: {what} requires {needed} > cap {cap}")]
    Capacity {
        what: &'static str,
        needed: u128,
        cap: u64,
    },

    /// Vector/matrix/permutation dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The QL iteration failed to converge within its cap.
    #[error("eigensolver did not converge on block at offset {start} (size {size})")]
    EigenNoConvergence { start: usize, size: usize },

    /// A nonzero matrix element would fall outside the tridiagonal band.
    #[error("band consistency violation at basis index {z}")]
    BandConsistency { z: u64 },

    /// A configuration the shuffle-recycling machinery cannot honor.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    /// A state is not in the frame a plan step expects.
    #[error("frame mismatch: state is in frame {found}, plan expects {expected}")]
    FrameMismatch { expected: u32, found: u32 },

    /// Invalid parameter with a field-level message.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub use fock::{IslandSpec, KCombination, ModeTuple};
pub use hamiltonian::{BhBasis, BhParams, Boundary, Drive, OmParams};
pub use propagator::{PropagatorPlan, Record, StepOrder};
pub use shuffle::ShufflePermutation;
pub use tridiag::{BlockSpectralForm, StateVector, SymTriMatrix, C64};
