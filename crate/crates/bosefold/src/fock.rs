//! Bijective, gap-free indexing between K-mode occupation tuples and linear
//! basis indices.
//!
//! The map is a combinatorial number system evaluated on partial sums: a
//! tuple `(n_1, ..., n_K)` is sent to
//!
//! ```text
//! z = sum_{k=1}^{K} C(n_1 + ... + n_k + k - 1, k)
//! ```
//!
//! which is a bijection from unrestricted tuples onto the non-negative
//! integers. Tuples with equal total occupation N ("excitation islands") map
//! onto a contiguous index range, islands are ordered by N, and the
//! single-hop neighbors `(n_1 +- 1, n_2 -+ 1, ...)` land at `z +- 1` — the
//! property that makes nearest-neighbor hopping tridiagonal.
//!
//! All arithmetic is 64-bit unsigned and overflow-checked; oversized requests
//! fail loudly instead of wrapping.

use crate::{Error, Result};

/// Occupation numbers of K bosonic modes. Position 0 holds `n_1`, the
/// fastest-varying index of the linear ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeTuple {
    entries: Vec<u64>,
}

impl ModeTuple {
    /// Wrap a sequence of occupation numbers; must be non-empty.
    pub fn new(entries: Vec<u64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParam(
                "mode tuple must have at least one entry".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total excitation `N = sum_j n_j`, overflow-checked.
    pub fn total(&self) -> Result<u64> {
        self.entries
            .iter()
            .try_fold(0u64, |acc, &n| acc.checked_add(n))
            .ok_or(Error::Overflow("mode tuple total"))
    }

    /// Right-rotation `(n_1, ..., n_K) -> (n_K, n_1, ..., n_{K-1})`.
    pub fn rotate_right(&self) -> Self {
        let k = self.entries.len();
        let mut out = Vec::with_capacity(k);
        out.push(self.entries[k - 1]);
        out.extend_from_slice(&self.entries[..k - 1]);
        Self { entries: out }
    }
}

impl std::fmt::Display for ModeTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, n) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

/// A strictly decreasing sequence `(v_K, v_{K-1}, ..., v_1)`, the digits of a
/// combinatorial number system representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KCombination {
    /// Stored largest-first: `entries[0] = v_K`, ..., `entries[K-1] = v_1`.
    entries: Vec<u64>,
}

impl KCombination {
    /// Wrap a largest-first digit sequence, checking strict decrease.
    pub fn new(entries: Vec<u64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParam(
                "combination must have at least one digit".into(),
            ));
        }
        if entries.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidCombination(entries));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }
}

/// Binomial coefficient `C(n, k)` with the convention `C(n, k) = 0` for
/// `n < k`. Overflow of the 64-bit result is an error.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    match binomial_u128(n, k) {
        Some(v) => u64::try_from(v).map_err(|_| Error::Overflow("binomial")),
        None => Err(Error::Overflow("binomial")),
    }
}

/// `C(n, k)` in 128-bit arithmetic; `None` only if even u128 overflows.
/// The incremental product `C(n-k+i, i)` is exact at every step.
fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc.checked_mul((n - k + i) as u128)?;
        acc /= i as u128;
    }
    Some(acc)
}

/// `C(n, k) <= limit`, never spuriously overflowing: anything beyond u128 is
/// certainly above any u64 limit.
fn binomial_le(n: u64, k: u64, limit: u64) -> bool {
    match binomial_u128(n, k) {
        Some(v) => v <= limit as u128,
        None => false,
    }
}

/// Rank of a K-combination: `V = sum_k C(v_k, k)`.
pub fn rank_combination(c: &KCombination) -> Result<u64> {
    let order = c.order() as u64;
    let mut acc: u64 = 0;
    for (i, &v) in c.entries.iter().enumerate() {
        let k = order - i as u64;
        acc = acc
            .checked_add(binomial(v, k)?)
            .ok_or(Error::Overflow("combination rank"))?;
    }
    Ok(acc)
}

/// Inverse of [`rank_combination`]: the greedy construction choosing, for
/// each digit position `k = K, ..., 1`, the largest `v_k` with
/// `C(v_k, k) <= V`, then subtracting. Total on all of the non-negative
/// integers; the digits come out strictly decreasing by construction.
pub fn unrank_combination(v: u64, k: usize) -> KCombination {
    assert!(k >= 1, "combination order must be at least 1");
    let mut entries = Vec::with_capacity(k);
    let mut rest = v;
    for deg in (1..=k as u64).rev() {
        let digit = largest_digit(rest, deg);
        // C(digit, deg) <= rest by construction of largest_digit
        rest -= binomial_u128(digit, deg).expect("digit fits") as u64;
        entries.push(digit);
    }
    KCombination { entries }
}

/// Largest `x` with `C(x, deg) <= target`. Linear scan for small targets,
/// doubling bracket plus bisection otherwise.
fn largest_digit(target: u64, deg: u64) -> u64 {
    // C(deg - 1, deg) = 0 <= target always holds.
    if target < 64 {
        let mut x = deg - 1;
        while binomial_le(x + 1, deg, target) {
            x += 1;
        }
        return x;
    }
    let mut hi = deg.max(1);
    while binomial_le(hi, deg, target) {
        hi = hi.saturating_mul(2);
    }
    // invariant: C(lo, deg) <= target < C(hi, deg)
    let mut lo = deg - 1;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binomial_le(mid, deg, target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The index polynomial: `z = sum_k C(n_1 + ... + n_k + k - 1, k)`.
pub fn skolem(n: &ModeTuple) -> Result<u64> {
    let mut partial: u64 = 0;
    let mut acc: u64 = 0;
    for (i, &nk) in n.entries.iter().enumerate() {
        let k = i as u64 + 1;
        partial = partial
            .checked_add(nk)
            .ok_or(Error::Overflow("occupation partial sum"))?;
        let upper = partial
            .checked_add(k - 1)
            .ok_or(Error::Overflow("index polynomial argument"))?;
        acc = acc
            .checked_add(binomial(upper, k)?)
            .ok_or(Error::Overflow("index polynomial"))?;
    }
    Ok(acc)
}

/// Inverse of [`skolem`]: unrank `z` into digits `v_k = (n_1 + ... + n_k)
/// + k - 1` and recover occupations from the partial-sum differences.
pub fn skolem_inverse(z: u64, k: usize) -> ModeTuple {
    let comb = unrank_combination(z, k);
    // comb.entries = (v_K, ..., v_1); occupations: n_1 = v_1,
    // n_j = v_j - v_{j-1} - 1 for j >= 2. Strict decrease of the digits
    // guarantees every difference is non-negative.
    let vs = &comb.entries;
    let mut entries = Vec::with_capacity(k);
    entries.push(vs[k - 1]);
    for j in 2..=k {
        let vj = vs[k - j];
        let vjm1 = vs[k - j + 1];
        entries.push(vj - vjm1 - 1);
    }
    ModeTuple { entries }
}

/// Bookkeeping for one excitation island: the contiguous index range covered
/// by all K-tuples with total occupation N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslandSpec {
    pub k: usize,
    pub n_total: u64,
    /// Island cardinality `C(N + K - 1, N)`.
    pub size: u64,
    /// Index of `(0, ..., 0, N)`, the island's lowest state.
    pub z_low: u64,
    /// Index of `(N, 0, ..., 0)`, the island's highest state.
    pub z_high: u64,
}

/// Compute the island's size and index bounds, asserting the closure
/// relation `z_low + size = z_high + 1`.
pub fn island_spec(n_total: u64, k: usize) -> Result<IslandSpec> {
    assert!(k >= 1, "site count must be at least 1");
    let size = binomial(
        n_total
            .checked_add(k as u64 - 1)
            .ok_or(Error::Overflow("island size argument"))?,
        n_total,
    )?;
    let mut low_tuple = vec![0u64; k];
    low_tuple[k - 1] = n_total;
    let mut high_tuple = vec![0u64; k];
    high_tuple[0] = n_total;
    let z_low = skolem(&ModeTuple::new(low_tuple)?)?;
    let z_high = skolem(&ModeTuple::new(high_tuple)?)?;
    debug_assert_eq!(z_low + size, z_high + 1);
    Ok(IslandSpec {
        k,
        n_total,
        size,
        z_low,
        z_high,
    })
}

/// Materialize the island in index order: element `i` satisfies
/// `skolem(out[i]) = z_low + i`, a contiguous, gap-free cover.
pub fn enumerate_island(n_total: u64, k: usize) -> Result<Vec<ModeTuple>> {
    let spec = island_spec(n_total, k)?;
    let size = usize::try_from(spec.size).map_err(|_| Error::Capacity {
        what: "island enumeration",
        needed: spec.size as u128,
        cap: usize::MAX as u64,
    })?;
    // keep materialized islands well below address-space pathologies
    const MAX_MATERIALIZED: u64 = 1 << 32;
    if spec.size > MAX_MATERIALIZED {
        return Err(Error::Capacity {
            what: "island enumeration",
            needed: spec.size as u128,
            cap: MAX_MATERIALIZED,
        });
    }
    let mut out = Vec::with_capacity(size);
    for i in 0..spec.size {
        out.push(skolem_inverse(spec.z_low + i, k));
    }
    Ok(out)
}
