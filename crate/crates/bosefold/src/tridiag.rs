//! Real symmetric tridiagonal matrices stored as 2D-1 numbers, their
//! irreducible-block eigendecompositions, and spectral application of matrix
//! exponentials to complex state vectors.
//!
//! A zero off-diagonal entry decouples the eigenproblem, so a matrix is split
//! at every exact 0.0 into irreducible blocks and each block is diagonalized
//! independently with an implicit-shift QL iteration. The resulting
//! [`BlockSpectralForm`] is the reusable propagation kernel: applying
//! `exp(tau * scale * T)` to a vector costs two small dense mat-vecs per
//! block, and blocks touch disjoint index ranges so they can run in parallel
//! without changing a single output bit.

use rayon::prelude::*;

use crate::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Dimension below which block loops stay serial; parallel dispatch on tiny
/// systems costs more than it saves.
const PAR_MIN_DIM: usize = 2048;

/// Blocks up to this size run the compensated exponential kernel. Small
/// blocks dominate small systems, where long propagations would otherwise
/// integrate the fixed rounding lean of the stored eigenvectors into a
/// visible norm drift; on large blocks the plain kernel's lean is already
/// far below any per-step budget and the 5x flop cost would hurt.
const COMP_MAX_BLOCK: usize = 32;

/// A real symmetric tridiagonal matrix: D diagonal entries plus D-1
/// off-diagonal entries, entry `i` coupling indices `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTriMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTriMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParam("matrix dimension must be >= 1".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len() - 1,
                got: offdiag.len(),
            });
        }
        if diag.iter().chain(offdiag.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("matrix entries must be finite".into()));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Split at every off-diagonal entry that is exactly 0.0. Returns
    /// `(start, size)` pairs; the concatenation covers `[0, D)` and no block
    /// has an interior zero coupling.
    pub fn split_blocks(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::new();
        let mut start = 0usize;
        for (i, &e) in self.offdiag.iter().enumerate() {
            if e == 0.0 {
                blocks.push((start, i + 1 - start));
                start = i + 1;
            }
        }
        blocks.push((start, self.dim() - start));
        blocks
    }

    /// Eigendecompose every irreducible block.
    pub fn spectral_form(&self) -> Result<BlockSpectralForm> {
        let blocks = self.split_blocks();
        let solve = |&(start, size): &(usize, usize)| -> Result<SpectralBlock> {
            let d = &self.diag[start..start + size];
            let e = &self.offdiag[start..start + size - 1];
            let (eigenvalues, eigenvectors) =
                eigh_block(d, e).map_err(|err| match err {
                    Error::EigenNoConvergence { .. } => {
                        Error::EigenNoConvergence { start, size }
                    }
                    other => other,
                })?;
            Ok(SpectralBlock {
                start,
                size,
                eigenvalues,
                eigenvectors,
            })
        };
        let solved: Result<Vec<SpectralBlock>> = if self.dim() >= PAR_MIN_DIM {
            blocks.par_iter().map(solve).collect()
        } else {
            blocks.iter().map(solve).collect()
        };
        Ok(BlockSpectralForm {
            dim: self.dim(),
            blocks: solved?,
        })
    }

    /// Sparse quadratic form `<v|T|v>`, real by symmetry. Serial summation
    /// keeps the result independent of thread count.
    pub fn quadratic_form(&self, v: &[C64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut acc = 0.0;
        for (i, &d) in self.diag.iter().enumerate() {
            acc += d * v[i].norm_sqr();
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            acc += 2.0 * e * (v[i].conj() * v[i + 1]).re;
        }
        Ok(acc)
    }
}

/// Eigendecomposition of one irreducible block.
#[derive(Debug, Clone)]
pub struct SpectralBlock {
    pub start: usize,
    pub size: usize,
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column-major: `eigenvectors[j*size + i]` is
    /// component `i` of eigenvector `j`. Sign convention: the first nonzero
    /// component of each column is positive.
    pub eigenvectors: Vec<f64>,
}

/// Eigendecomposition of a [`SymTriMatrix`] split into irreducible blocks.
#[derive(Debug, Clone)]
pub struct BlockSpectralForm {
    dim: usize,
    blocks: Vec<SpectralBlock>,
}

impl BlockSpectralForm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    /// Histogram of block sizes as sorted `(size, count)` pairs.
    pub fn block_histogram(&self) -> Vec<(usize, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for b in &self.blocks {
            *counts.entry(b.size).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

/// Eigenvalues and eigenvectors of one unreduced symmetric tridiagonal block
/// by implicit-shift QL iteration (EISPACK tql2 lineage). Eigenvalues come
/// back ascending; eigenvectors are orthonormal columns, column-major.
pub fn eigh_block(diag: &[f64], offdiag: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::InvalidParam("empty eigenblock".into()));
    }
    if offdiag.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: offdiag.len(),
        });
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut q = vec![0.0f64; n * n];
    for j in 0..n {
        q[j * n + j] = 1.0;
    }

    let eps = f64::EPSILON;
    let max_iters = 50 * n;
    let mut iters = 0usize;
    for l in 0..n {
        loop {
            // locate the first negligible coupling at or above l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iters += 1;
            if iters > max_iters {
                return Err(Error::EigenNoConvergence { start: 0, size: n });
            }
            // implicit shift from the leading 2x2
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut deflated = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // rotate eigenvector columns i and i+1
                let (lo, hi) = q.split_at_mut((i + 1) * n);
                let qi = &mut lo[i * n..(i + 1) * n];
                let qi1 = &mut hi[..n];
                for k in 0..n {
                    f = qi1[k];
                    qi1[k] = s * qi[k] + c * f;
                    qi[k] = c * qi[k] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // ascending order: sort an index permutation, then gather columns
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let mut evals = Vec::with_capacity(n);
    let mut evecs = vec![0.0f64; n * n];
    for (jout, &jin) in order.iter().enumerate() {
        evals.push(d[jin]);
        evecs[jout * n..(jout + 1) * n].copy_from_slice(&q[jin * n..(jin + 1) * n]);
    }

    // Polish the frame: a fixed orthogonality or normalization defect in Q,
    // reapplied every propagation step, integrates into a linear norm drift.
    // One Newton pass with a compensated Gram matrix centers the off-diagonal
    // defect; a compensated renormalization centers the column norms. Both
    // leave only fresh half-ulp roundings with no systematic lean.
    newton_orthogonalize(&mut evecs, n);
    for j in 0..n {
        renormalize_compensated(&mut evecs[j * n..(j + 1) * n]);
    }
    gram_diag_tune(&mut evecs, n);
    for j in 0..n {
        let col = &mut evecs[j * n..(j + 1) * n];
        if let Some(&lead) = col.iter().find(|x| **x != 0.0) {
            if lead < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }

    Ok((evals, evecs))
}

/// Exact squared-norm defects of every row and column, compensated.
fn gram_diag_defects(q: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rows = vec![0.0f64; n];
    let mut cols = vec![0.0f64; n];
    for j in 0..n {
        let col = &q[j * n..(j + 1) * n];
        let (h, l) = dd_dot(col, col);
        cols[j] = (h - 1.0) + l;
    }
    for (i, slot) in rows.iter_mut().enumerate() {
        let mut hi = 0.0f64;
        let mut lo = 0.0f64;
        for j in 0..n {
            let x = q[j * n + i];
            let (p, pe) = two_product(x, x);
            let (s, se) = two_sum(hi, p);
            hi = s;
            lo += se + pe;
        }
        *slot = (hi - 1.0) + lo;
    }
    (rows, cols)
}

/// Walk individual matrix entries by single ulps until every row and column
/// of Q has squared norm 1 to ~1e-18. Rounding an orthogonal matrix to f64
/// leaves each row and column norm at a fixed signed epsilon-scale defect;
/// the exponential built from Q is then a fixed slightly-non-unitary map, and
/// a propagation loop integrates that defect into a linear norm drift no
/// arithmetic care in the application can remove. Each nudge of entry (i, j)
/// moves the row-i and column-j defects together, so rows and columns are
/// relaxed alternately, scoring candidate nudges on both.
fn gram_diag_tune(q: &mut [f64], n: usize) {
    if n < 2 {
        // a 1x1 block is +-1 exactly after sign fixing
        return;
    }
    let (mut rows, mut cols) = gram_diag_defects(q, n);
    let target = 1e-18;
    for _round in 0..4 {
        let worst = rows
            .iter()
            .chain(cols.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if worst < target {
            break;
        }
        for i in 0..n {
            tune_row(q, n, i, &mut rows, &mut cols, target);
        }
        for j in 0..n {
            tune_col(q, n, j, &mut rows, &mut cols, target);
        }
    }
}

fn tune_row(q: &mut [f64], n: usize, i: usize, rows: &mut [f64], cols: &mut [f64], target: f64) {
    for _ in 0..24 {
        if rows[i].abs() < target {
            return;
        }
        let mut best: Option<(usize, f64, f64, f64)> = None; // (j, val, score, delta)
        let here = rows[i] * rows[i];
        for j in 0..n {
            let x = q[j * n + i];
            if x == 0.0 || !x.is_finite() {
                continue;
            }
            for cand in [x.next_up(), x.next_down()] {
                let delta = (cand - x) * (cand + x);
                let nr = rows[i] + delta;
                let nc = cols[j] + delta;
                let score = nr * nr + nc * nc - cols[j] * cols[j];
                if score < best.as_ref().map_or(here, |b| b.2) {
                    best = Some((j, cand, score, delta));
                }
            }
        }
        match best {
            Some((j, v, _, delta)) => {
                q[j * n + i] = v;
                rows[i] += delta;
                cols[j] += delta;
            }
            None => return,
        }
    }
}

fn tune_col(q: &mut [f64], n: usize, j: usize, rows: &mut [f64], cols: &mut [f64], target: f64) {
    for _ in 0..24 {
        if cols[j].abs() < target {
            return;
        }
        let mut best: Option<(usize, f64, f64, f64)> = None;
        let here = cols[j] * cols[j];
        for i in 0..n {
            let x = q[j * n + i];
            if x == 0.0 || !x.is_finite() {
                continue;
            }
            for cand in [x.next_up(), x.next_down()] {
                let delta = (cand - x) * (cand + x);
                let nc = cols[j] + delta;
                let nr = rows[i] + delta;
                let score = nc * nc + nr * nr - rows[i] * rows[i];
                if score < best.as_ref().map_or(here, |b| b.2) {
                    best = Some((i, cand, score, delta));
                }
            }
        }
        match best {
            Some((i, v, _, delta)) => {
                q[j * n + i] = v;
                cols[j] += delta;
                rows[i] += delta;
            }
            None => return,
        }
    }
}

/// Compensated dot product: returns `(hi, lo)` with `hi + lo` accurate to
/// ~1e-32.
fn dd_dot(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut hi = 0.0f64;
    let mut lo = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let (p, pe) = two_product(*x, *y);
        let (s, se) = two_sum(hi, p);
        hi = s;
        lo += se + pe;
    }
    (hi, lo)
}

/// Scale a near-unit vector so its norm defect is centered at zero instead
/// of carrying the summation bias of a plain norm computation.
fn renormalize_compensated(col: &mut [f64]) {
    let (r_hi, r_lo) = dd_dot(col, col);
    let d = (r_hi - 1.0) + r_lo;
    if !(d.abs() < 1e-8) {
        // not near unit norm; plain rescale
        let norm = r_hi.sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|x| *x /= norm);
        }
        return;
    }
    // 1/sqrt(1 + d) = 1 + d (3d/8 - 1/2) + O(d^3)
    let e = d * (0.375 * d - 0.5);
    col.iter_mut().for_each(|x| *x += *x * e);
}

/// `Q <- Q (3I - Q^T Q) / 2` with the Gram matrix formed in compensated
/// arithmetic; the correction itself is epsilon-sized, so plain updates add
/// only centered rounding.
fn newton_orthogonalize(q: &mut [f64], n: usize) {
    if n < 2 {
        return;
    }
    // defect = Q^T Q - I, tiny entries held accurately
    let mut defect = vec![0.0f64; n * n];
    for a in 0..n {
        let col_a = &q[a * n..(a + 1) * n];
        for b in a..n {
            let col_b = &q[b * n..(b + 1) * n];
            let (hi, lo) = dd_dot(col_a, col_b);
            let g = if a == b { (hi - 1.0) + lo } else { hi + lo };
            defect[a * n + b] = g;
            defect[b * n + a] = g;
        }
    }
    // correction = -Q defect / 2, accumulated before touching Q
    let mut corr = vec![0.0f64; n * n];
    for j in 0..n {
        let dst = &mut corr[j * n..(j + 1) * n];
        for b in 0..n {
            let x = -0.5 * defect[b * n + j];
            if x == 0.0 {
                continue;
            }
            let src = &q[b * n..(b + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += x * s;
            }
        }
    }
    for (qe, ce) in q.iter_mut().zip(&corr) {
        *qe += ce;
    }
}

/// Complex amplitudes over the linearly ordered basis, tagged with the
/// permutation frame currently in effect (0 is the home frame).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    frame: u32,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidParam("state must have dimension >= 1".into()));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParam("state amplitudes must be finite".into()));
        }
        Ok(Self { amps, frame: 0 })
    }

    /// Basis state: amplitude 1 at `index`.
    pub fn fock(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    /// Equal real amplitudes `1/sqrt(D)`.
    pub fn uniform(dim: usize) -> Result<Self> {
        let a = 1.0 / (dim as f64).sqrt();
        Self::new(vec![C64::new(a, 0.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub(crate) fn take_amps(&mut self) -> Vec<C64> {
        std::mem::take(&mut self.amps)
    }

    pub(crate) fn put_amps(&mut self, amps: Vec<C64>) {
        self.amps = amps;
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub(crate) fn set_frame(&mut self, frame: u32) {
        self.frame = frame;
    }

    /// Euclidean norm, accumulated serially for thread-count-independent
    /// bit-exact results.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Error-free product via Veltkamp splitting (no FMA dependency).
#[inline]
fn two_product(a: f64, b: f64) -> (f64, f64) {
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let p = a * b;
    let ta = SPLIT * a;
    let ah = ta - (ta - a);
    let al = a - ah;
    let tb = SPLIT * b;
    let bh = tb - (tb - b);
    let bl = b - bh;
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let err = (a - (s - v)) + (b - v);
    (s, err)
}

/// Per-eigenvalue phase factors for `exp(tau * scale * T)`, held in
/// double-double precision. Library sin/cos leave `|e^{i theta}| - 1` at a
/// signed epsilon-scale offset, and the same phases recur every step of a
/// propagation, so in plain f64 that offset integrates into a linear norm
/// drift; the extended representation keeps the modulus defect at ~1e-32 and
/// only fresh, data-dependent roundings reach the state.
///
/// Entry for eigenvalue `j` of a block sits at `block.start + j`.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    hi: Vec<C64>,
    lo: Vec<C64>,
}

impl PhaseTable {
    pub fn len(&self) -> usize {
        self.hi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hi.is_empty()
    }

    /// The rounded phase values (diagnostics only; applications keep the
    /// low-order parts).
    pub fn values(&self) -> &[C64] {
        &self.hi
    }
}

/// `e^{i theta}` as a double-double pair with unit modulus to ~1e-32.
#[inline]
fn dd_unit_phase(theta: f64) -> (C64, C64) {
    let c = theta.cos();
    let s = theta.sin();
    let (cc, cc_err) = two_product(c, c);
    let (ss, ss_err) = two_product(s, s);
    let (r, r_err) = two_sum(cc, ss);
    let d = (r - 1.0) + (r_err + (cc_err + ss_err));
    // 1/sqrt(1 + d) = 1 + d (3d/8 - 1/2) + O(d^3)
    let e = d * (0.375 * d - 0.5);
    let (pc, pc_err) = two_product(c, e);
    let (hi_re, hc) = two_sum(c, pc);
    let lo_re = hc + pc_err;
    let (ps, ps_err) = two_product(s, e);
    let (hi_im, hs) = two_sum(s, ps);
    let lo_im = hs + ps_err;
    (C64::new(hi_re, hi_im), C64::new(lo_re, lo_im))
}

/// Phase table for `exp(tau * scale * T)`; plans cache these across steps.
pub fn compute_phases(form: &BlockSpectralForm, tau: C64, scale: f64) -> PhaseTable {
    let mut hi = vec![C64::new(1.0, 0.0); form.dim];
    let mut lo = vec![C64::new(0.0, 0.0); form.dim];
    for b in &form.blocks {
        for (j, &lam) in b.eigenvalues.iter().enumerate() {
            let arg = tau * (scale * lam);
            let (mut h, mut l) = dd_unit_phase(arg.im);
            if arg.re != 0.0 {
                // growth factor for non-imaginary tau; unit-modulus care is
                // moot there
                let m = arg.re.exp();
                h = C64::new(m * h.re, m * h.im);
                l = C64::new(m * l.re, m * l.im);
            }
            hi[b.start + j] = h;
            lo[b.start + j] = l;
        }
    }
    PhaseTable { hi, lo }
}

/// `w * phase` with the phase in double-double; one final rounding per
/// component, no systematic modulus lean.
#[inline]
fn mul_dd_phase(w: C64, hi: C64, lo: C64) -> C64 {
    let (a, a_err) = two_product(w.re, hi.re);
    let (b, b_err) = two_product(w.im, hi.im);
    let (s1, s1_err) = two_sum(a, -b);
    let re = s1 + (s1_err + (a_err - b_err) + (w.re * lo.re - w.im * lo.im));
    let (c, c_err) = two_product(w.re, hi.im);
    let (d, d_err) = two_product(w.im, hi.re);
    let (s2, s2_err) = two_sum(c, d);
    let im = s2 + (s2_err + (c_err + d_err) + (w.re * lo.im + w.im * lo.re));
    C64::new(re, im)
}

/// `out = Q exp(tau * scale * Lambda) Q^T v`, block by block. For purely
/// imaginary `tau` every factor is unitary and the norm is preserved to
/// `10 eps sqrt(D)`. `tau == 0` (or `scale == 0`) reproduces `v` exactly.
pub fn exp_apply(
    form: &BlockSpectralForm,
    tau: C64,
    v: &StateVector,
    scale: f64,
    out: &mut StateVector,
) -> Result<()> {
    if v.dim() != form.dim {
        return Err(Error::DimensionMismatch {
            expected: form.dim,
            got: v.dim(),
        });
    }
    if out.dim() != form.dim {
        return Err(Error::DimensionMismatch {
            expected: form.dim,
            got: out.dim(),
        });
    }
    out.frame = v.frame;
    if tau == C64::new(0.0, 0.0) || scale == 0.0 {
        out.amps.copy_from_slice(&v.amps);
        return Ok(());
    }
    let phases = compute_phases(form, tau, scale);
    let apply = |block: &SpectralBlock, vin: &[C64], vout: &mut [C64]| {
        let mut w = Vec::with_capacity(block.size);
        block_project(block, &phases, vin, &mut w);
        block_reconstruct(block, &w, vout);
    };
    if form.dim >= PAR_MIN_DIM {
        let mut tasks: Vec<(&SpectralBlock, &mut [C64])> = Vec::with_capacity(form.blocks.len());
        let mut rest: &mut [C64] = &mut out.amps;
        for b in &form.blocks {
            let (head, tail) = rest.split_at_mut(b.size);
            tasks.push((b, head));
            rest = tail;
        }
        tasks
            .into_par_iter()
            .for_each(|(b, vout)| apply(b, &v.amps[b.start..b.start + b.size], vout));
    } else {
        for b in &form.blocks {
            apply(
                b,
                &v.amps[b.start..b.start + b.size],
                &mut out.amps[b.start..b.start + b.size],
            );
        }
    }
    Ok(())
}

/// In-place variant used by the propagator hot loop; per-block scratch only.
pub fn exp_apply_in_place(
    form: &BlockSpectralForm,
    tau: C64,
    scale: f64,
    amps: &mut [C64],
) -> Result<()> {
    if tau == C64::new(0.0, 0.0) || scale == 0.0 {
        if amps.len() != form.dim {
            return Err(Error::DimensionMismatch {
                expected: form.dim,
                got: amps.len(),
            });
        }
        return Ok(());
    }
    let phases = compute_phases(form, tau, scale);
    exp_apply_with_phases(form, &phases, amps)
}

/// In-place application with a precomputed phase table from
/// [`compute_phases`].
pub fn exp_apply_with_phases(
    form: &BlockSpectralForm,
    phases: &PhaseTable,
    amps: &mut [C64],
) -> Result<()> {
    if amps.len() != form.dim {
        return Err(Error::DimensionMismatch {
            expected: form.dim,
            got: amps.len(),
        });
    }
    if phases.len() != form.dim {
        return Err(Error::DimensionMismatch {
            expected: form.dim,
            got: phases.len(),
        });
    }
    let apply = |block: &SpectralBlock, vs: &mut [C64]| {
        let mut w = Vec::with_capacity(block.size);
        block_project(block, phases, vs, &mut w);
        block_reconstruct(block, &w, vs);
    };
    if form.dim >= PAR_MIN_DIM {
        let mut tasks: Vec<(&SpectralBlock, &mut [C64])> = Vec::with_capacity(form.blocks.len());
        let mut rest = amps;
        for b in &form.blocks {
            let (head, tail) = rest.split_at_mut(b.size);
            tasks.push((b, head));
            rest = tail;
        }
        tasks.into_par_iter().for_each(|(b, vs)| apply(b, vs));
    } else {
        for b in &form.blocks {
            apply(b, &mut amps[b.start..b.start + b.size]);
        }
    }
    Ok(())
}

/// `w = exp(tau * scale * Lambda) Q^T v` for one block.
fn block_project(block: &SpectralBlock, phases: &PhaseTable, vin: &[C64], w: &mut Vec<C64>) {
    let n = block.size;
    if n <= COMP_MAX_BLOCK {
        for j in 0..n {
            let col = &block.eigenvectors[j * n..(j + 1) * n];
            let (mut re_hi, mut re_lo) = (0.0f64, 0.0f64);
            let (mut im_hi, mut im_lo) = (0.0f64, 0.0f64);
            for i in 0..n {
                let (p, pe) = two_product(col[i], vin[i].re);
                let (s, se) = two_sum(re_hi, p);
                re_hi = s;
                re_lo += se + pe;
                let (p, pe) = two_product(col[i], vin[i].im);
                let (s, se) = two_sum(im_hi, p);
                im_hi = s;
                im_lo += se + pe;
            }
            let k = block.start + j;
            w.push(mul_dd_phase(
                C64::new(re_hi + re_lo, im_hi + im_lo),
                phases.hi[k],
                phases.lo[k],
            ));
        }
        return;
    }
    for j in 0..n {
        let col = &block.eigenvectors[j * n..(j + 1) * n];
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..n {
            re += col[i] * vin[i].re;
            im += col[i] * vin[i].im;
        }
        let k = block.start + j;
        w.push(mul_dd_phase(C64::new(re, im), phases.hi[k], phases.lo[k]));
    }
}

/// `vout = Q w` for one block.
fn block_reconstruct(block: &SpectralBlock, w: &[C64], vout: &mut [C64]) {
    let n = block.size;
    if n <= COMP_MAX_BLOCK {
        let mut hi = vec![C64::new(0.0, 0.0); n];
        let mut lo = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let col = &block.eigenvectors[j * n..(j + 1) * n];
            let wj = w[j];
            for i in 0..n {
                let (p, pe) = two_product(wj.re, col[i]);
                let (s, se) = two_sum(hi[i].re, p);
                hi[i].re = s;
                lo[i].re += se + pe;
                let (p, pe) = two_product(wj.im, col[i]);
                let (s, se) = two_sum(hi[i].im, p);
                hi[i].im = s;
                lo[i].im += se + pe;
            }
        }
        for i in 0..n {
            vout[i] = C64::new(hi[i].re + lo[i].re, hi[i].im + lo[i].im);
        }
        return;
    }
    vout.fill(C64::new(0.0, 0.0));
    for j in 0..n {
        let col = &block.eigenvectors[j * n..(j + 1) * n];
        let wj = w[j];
        for i in 0..n {
            vout[i].re += wj.re * col[i];
            vout[i].im += wj.im * col[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::new(amps).unwrap()
    }

    #[test]
    fn split_at_exact_zero() {
        let t = SymTriMatrix::new(vec![1.0; 4], vec![1.0, 0.0, 2.0]).unwrap();
        assert_eq!(t.split_blocks(), vec![(0, 2), (2, 2)]);
        let t = SymTriMatrix::new(vec![1.0; 4], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(t.split_blocks(), vec![(0, 4)]);
        let t = SymTriMatrix::new(vec![1.0], vec![]).unwrap();
        assert_eq!(t.split_blocks(), vec![(0, 1)]);
    }

    #[test]
    fn eigh_single_entry() {
        let (vals, vecs) = eigh_block(&[0.0], &[]).unwrap();
        assert_eq!(vals, vec![0.0]);
        assert_eq!(vecs, vec![1.0]);
    }

    #[test]
    fn eigh_two_by_two() {
        let (vals, vecs) = eigh_block(&[0.0, 0.0], &[-1.0]).unwrap();
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((vals[0] + 1.0).abs() < 1e-15);
        assert!((vals[1] - 1.0).abs() < 1e-15);
        // lambda = -1: (1, 1)/sqrt(2); lambda = +1: (1, -1)/sqrt(2)
        assert!((vecs[0] - s).abs() < 1e-15 && (vecs[1] - s).abs() < 1e-15);
        assert!((vecs[2] - s).abs() < 1e-15 && (vecs[3] + s).abs() < 1e-15);
    }

    #[test]
    fn eigh_residual_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let e: Vec<f64> = (0..n - 1)
            .map(|_| {
                let x: f64 = rng.gen_range(0.05..2.0);
                if rng.gen_bool(0.5) {
                    x
                } else {
                    -x
                }
            })
            .collect();
        let (vals, q) = eigh_block(&d, &e).unwrap();
        let tnorm: f64 = (0..n)
            .map(|i| {
                d[i].abs()
                    + if i > 0 { e[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { e[i].abs() } else { 0.0 }
            })
            .fold(0.0f64, f64::max);
        let tol = 100.0 * f64::EPSILON * n as f64;
        for j in 0..n {
            // residual || T q_j - lambda_j q_j ||
            let col = &q[j * n..(j + 1) * n];
            let mut res = 0.0f64;
            for i in 0..n {
                let mut y = d[i] * col[i];
                if i > 0 {
                    y += e[i - 1] * col[i - 1];
                }
                if i + 1 < n {
                    y += e[i] * col[i + 1];
                }
                res += (y - vals[j] * col[i]).powi(2);
            }
            assert!(res.sqrt() <= tol * tnorm, "residual {} block 50", res.sqrt());
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| q[a * n + i] * q[b * n + i]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() <= tol);
            }
        }
        for j in 0..n - 1 {
            assert!(vals[j] <= vals[j + 1]);
        }
    }

    #[test]
    fn eigh_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 17;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.1..1.0)).collect();
        let (_, q) = eigh_block(&d, &e).unwrap();
        for j in 0..n {
            let lead = q[j * n..(j + 1) * n].iter().find(|x| **x != 0.0).unwrap();
            assert!(*lead > 0.0);
        }
    }

    #[test]
    fn exp_apply_zero_tau_is_identity() {
        let t = SymTriMatrix::new(vec![0.3, -0.2, 0.9], vec![0.5, -0.1]).unwrap();
        let form = t.spectral_form().unwrap();
        let v = random_state(3, 7);
        let mut out = StateVector::new(vec![C64::new(0.0, 0.0); 3]).unwrap();
        exp_apply(&form, C64::new(0.0, 0.0), &v, 1.0, &mut out).unwrap();
        assert_eq!(out.amps(), v.amps());
    }

    #[test]
    fn exp_apply_two_level_rotation() {
        // T = [[0,-1],[-1,0]]; exp(-i t T) = cos(t) I + i sin(t) sigma_x
        let t = SymTriMatrix::new(vec![0.0, 0.0], vec![-1.0]).unwrap();
        let form = t.spectral_form().unwrap();
        let angle = 0.3f64;
        let tau = C64::new(0.0, -angle);
        let v = random_state(2, 21);
        let mut out = StateVector::new(vec![C64::new(0.0, 0.0); 2]).unwrap();
        exp_apply(&form, tau, &v, 1.0, &mut out).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let i = C64::new(0.0, 1.0);
        let expect0 = c * v.amps()[0] + i * s * v.amps()[1];
        let expect1 = i * s * v.amps()[0] + c * v.amps()[1];
        assert!((out.amps()[0] - expect0).norm() < 1e-15);
        assert!((out.amps()[1] - expect1).norm() < 1e-15);
    }

    #[test]
    fn exp_apply_unitary_for_imaginary_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 80;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        e[20] = 0.0; // exercise multiple blocks
        let t = SymTriMatrix::new(d, e).unwrap();
        let form = t.spectral_form().unwrap();
        let v = random_state(n, 9);
        let mut out = StateVector::new(vec![C64::new(0.0, 0.0); n]).unwrap();
        exp_apply(&form, C64::new(0.0, -0.7), &v, 1.3, &mut out).unwrap();
        let bound = 10.0 * f64::EPSILON * (n as f64).sqrt();
        assert!((out.norm() - v.norm()).abs() <= bound);
    }

    #[test]
    fn exp_apply_block_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 24;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        e[7] = 0.0;
        e[15] = 0.0;
        let t = SymTriMatrix::new(d, e).unwrap();
        let form = t.spectral_form().unwrap();
        let mut reversed = form.clone();
        reversed.blocks.reverse();
        let v = random_state(n, 2);
        let mut out_a = StateVector::new(vec![C64::new(0.0, 0.0); n]).unwrap();
        let mut out_b = StateVector::new(vec![C64::new(0.0, 0.0); n]).unwrap();
        let tau = C64::new(0.0, -0.11);
        exp_apply(&form, tau, &v, 1.0, &mut out_a).unwrap();
        exp_apply(&reversed, tau, &v, 1.0, &mut out_b).unwrap();
        assert_eq!(out_a.amps(), out_b.amps());
    }

    #[test]
    fn exp_apply_in_place_matches_out_of_place() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = SymTriMatrix::new(d, e).unwrap();
        let form = t.spectral_form().unwrap();
        let v = random_state(n, 19);
        let tau = C64::new(0.0, -0.05);
        let mut out = StateVector::new(vec![C64::new(0.0, 0.0); n]).unwrap();
        exp_apply(&form, tau, &v, 2.0, &mut out).unwrap();
        let mut amps = v.amps().to_vec();
        exp_apply_in_place(&form, tau, 2.0, &mut amps).unwrap();
        assert_eq!(out.amps(), &amps[..]);
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let t = SymTriMatrix::new(vec![1.0, -2.0, 0.5], vec![0.7, -0.3]).unwrap();
        let v = random_state(3, 31);
        let a = v.amps();
        let mut expect = 0.0;
        let dense = [
            [1.0, 0.7, 0.0],
            [0.7, -2.0, -0.3],
            [0.0, -0.3, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                expect += (a[i].conj() * dense[i][j] * a[j]).re;
            }
        }
        assert!((t.quadratic_form(a).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_reported() {
        let t = SymTriMatrix::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let form = t.spectral_form().unwrap();
        let v = StateVector::uniform(3).unwrap();
        let mut out = StateVector::uniform(3).unwrap();
        assert!(matches!(
            exp_apply(&form, C64::new(0.0, -0.1), &v, 1.0, &mut out),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
