//! Dense brute-force reference for small instances.
//!
//! Hamiltonians are assembled literally from Kronecker products of dense
//! ladder, number, and identity factors, then restricted to the ordered
//! basis; matrix exponentials go through a full symmetric eigendecomposition
//! (Householder reduction to tridiagonal, then the same QL kernel the fast
//! path uses). Exists for correctness, not scale: dimensions are capped.

use crate::hamiltonian::{BhBasis, BhParams, Boundary, OmParams};
use crate::tridiag::{self, C64};
use crate::{Error, Result};

/// Largest dense dimension the oracle will touch.
pub const DENSE_CAP: usize = 4096;

/// Dense real square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 || n > DENSE_CAP {
            return Err(Error::Capacity {
                what: "dense matrix",
                needed: n as u128,
                cap: DENSE_CAP as u64,
            });
        }
        Ok(Self {
            n,
            data: vec![0.0; n * n],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }

    /// Entrywise `self += other`.
    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Entrywise `c * self`.
    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// `y = M v` over complex amplitudes.
    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = C64::new(0.0, 0.0);
            for (m, a) in row.iter().zip(v) {
                acc += a * *m;
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// Keep rows and columns at `indices`, in that order.
    pub fn restrict(&self, indices: &[usize]) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(indices.len())?;
        for (i, &pi) in indices.iter().enumerate() {
            for (j, &pj) in indices.iter().enumerate() {
                out.set(i, j, self.get(pi, pj));
            }
        }
        Ok(out)
    }

    /// `S M S^T` for the permutation matrix `S[map[z], z] = 1`:
    /// `out[map[i], map[j]] = M[i, j]`.
    pub fn conjugate_by_perm(&self, map: &[usize]) -> Result<DenseMatrix> {
        if map.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: map.len(),
            });
        }
        let mut out = DenseMatrix::zeros(self.n)?;
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(map[i], map[j], self.get(i, j));
            }
        }
        Ok(out)
    }
}

/// Literal Kronecker product: entry `(i_a n_b + i_b, j_a n_b + j_b)` is
/// `A[i_a, j_a] * B[i_b, j_b]`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a
        .n
        .checked_mul(b.n)
        .ok_or(Error::Overflow("kron dimension"))?;
    let mut out = DenseMatrix::zeros(n)?;
    for ia in 0..a.n {
        for ja in 0..a.n {
            let aij = a.get(ia, ja);
            for ib in 0..b.n {
                for jb in 0..b.n {
                    out.set(ia * b.n + ib, ja * b.n + jb, aij * b.get(ib, jb));
                }
            }
        }
    }
    Ok(out)
}

/// True iff every entry with `|i - j| >= 2` is exactly zero.
pub fn tridiagonality_check(m: &DenseMatrix) -> bool {
    for i in 0..m.n {
        for j in 0..m.n {
            if i.abs_diff(j) >= 2 && m.get(i, j) != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Annihilation operator on a `d`-level mode: `<n|b|n+1> = sqrt(n+1)`.
pub fn ladder_lower(d: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(d)?;
    for n in 0..d.saturating_sub(1) {
        m.set(n, n + 1, ((n + 1) as f64).sqrt());
    }
    Ok(m)
}

/// Creation operator, the transpose of [`ladder_lower`].
pub fn ladder_raise(d: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(d)?;
    for n in 0..d.saturating_sub(1) {
        m.set(n + 1, n, ((n + 1) as f64).sqrt());
    }
    Ok(m)
}

/// Number operator `diag(n)`.
pub fn number_op(d: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(d)?;
    for n in 0..d {
        m.set(n, n, n as f64);
    }
    Ok(m)
}

/// `diag(n (n - 1))`, shaped as `n * (n - 1)` in f64 to match the builders.
pub fn number_number_minus_one(d: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(d)?;
    for n in 0..d {
        let nf = n as f64;
        m.set(n, n, nf * (nf - 1.0));
    }
    Ok(m)
}

/// Position quadrature `b+ + b` (no 1/sqrt(2)).
pub fn quadrature(d: usize) -> Result<DenseMatrix> {
    let mut m = ladder_raise(d)?;
    m.add_assign(&ladder_lower(d)?)?;
    Ok(m)
}

/// Left fold of [`kron`] over a factor chain; site 1 is the leftmost,
/// slowest-varying factor.
fn kron_chain(factors: &[DenseMatrix]) -> Result<DenseMatrix> {
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// Factor dimensions of the product box enclosing the configured basis.
fn box_dims(p: &BhParams) -> Vec<usize> {
    match &p.basis {
        BhBasis::Island { n_total } => vec![*n_total as usize + 1; p.k],
        BhBasis::Capped { caps } => caps.iter().map(|&c| c as usize + 1).collect(),
    }
}

/// Row-major box index of a tuple (site 1 slowest).
fn box_index(entries: &[u64], dims: &[usize]) -> usize {
    let mut idx = 0usize;
    for (n, d) in entries.iter().zip(dims) {
        idx = idx * d + *n as usize;
    }
    idx
}

/// Box indices of the ordered basis states, for restriction.
fn basis_box_indices(p: &BhParams) -> Result<Vec<usize>> {
    let dims = box_dims(p);
    Ok(p.basis_tuples()?
        .iter()
        .map(|t| box_index(t.entries(), &dims))
        .collect())
}

/// One chain of `id` factors with `op` substituted at 1-based `site`.
fn placed(op: &DenseMatrix, site: usize, dims: &[usize]) -> Result<DenseMatrix> {
    let mut factors = Vec::with_capacity(dims.len());
    for (pos, &d) in dims.iter().enumerate() {
        if pos + 1 == site {
            factors.push(op.clone());
        } else {
            factors.push(DenseMatrix::identity(d)?);
        }
    }
    kron_chain(&factors)
}

/// Pair term `H_{j, (j+1) mod K}` over the full product box: the hop between
/// sites j and j+1 plus site j's on-site diagonal.
fn dense_bh_term_box(p: &BhParams, site_j: usize) -> Result<DenseMatrix> {
    let dims = box_dims(p);
    let k = p.k;
    let jn = if site_j == k { 1 } else { site_j + 1 };
    let (mu, u, hop_j) = (p.mu_at(site_j), p.u_at(site_j), p.j_at(site_j));

    let mut factors_up: Vec<DenseMatrix> = Vec::with_capacity(k);
    let mut factors_dn: Vec<DenseMatrix> = Vec::with_capacity(k);
    for (pos, &d) in dims.iter().enumerate() {
        let site = pos + 1;
        if site == site_j {
            factors_up.push(ladder_raise(d)?);
            factors_dn.push(ladder_lower(d)?);
        } else if site == jn {
            factors_up.push(ladder_lower(d)?);
            factors_dn.push(ladder_raise(d)?);
        } else {
            factors_up.push(DenseMatrix::identity(d)?);
            factors_dn.push(DenseMatrix::identity(d)?);
        }
    }
    let mut h = kron_chain(&factors_up)?.scaled(-hop_j);
    h.add_assign(&kron_chain(&factors_dn)?.scaled(-hop_j))?;
    h.add_assign(&placed(&number_op(dims[site_j - 1])?, site_j, &dims)?.scaled(-mu))?;
    h.add_assign(
        &placed(&number_number_minus_one(dims[site_j - 1])?, site_j, &dims)?.scaled(0.5 * u),
    )?;
    Ok(h)
}

/// Pair term `H_{j, (j+1) mod K}` restricted to the ordered basis.
pub fn dense_bh_term(p: &BhParams, site_j: usize) -> Result<DenseMatrix> {
    if site_j == 0 || site_j > p.k {
        return Err(Error::InvalidParam(format!(
            "pair term site must be in [1, {}], got {site_j}",
            p.k
        )));
    }
    dense_bh_term_box(p, site_j)?.restrict(&basis_box_indices(p)?)
}

/// On-site diagonal `d_site` restricted to the ordered basis.
pub fn dense_bh_diag(p: &BhParams, site: usize) -> Result<DenseMatrix> {
    let dims = box_dims(p);
    let mut h = placed(&number_op(dims[site - 1])?, site, &dims)?.scaled(-p.mu_at(site));
    h.add_assign(
        &placed(&number_number_minus_one(dims[site - 1])?, site, &dims)?.scaled(0.5 * p.u_at(site)),
    )?;
    h.restrict(&basis_box_indices(p)?)
}

/// Full Bose-Hubbard Hamiltonian in the ordered basis, built term by term
/// from Kronecker strings and honoring the boundary condition.
pub fn dense_bh(p: &BhParams) -> Result<DenseMatrix> {
    let n_pair_terms = match p.boundary {
        Boundary::Periodic => p.k,
        Boundary::Open => p.k - 1,
    };
    let mut h = dense_bh_term_box(p, 1)?;
    for j in 2..=n_pair_terms {
        h.add_assign(&dense_bh_term_box(p, j)?)?;
    }
    if p.boundary == Boundary::Open {
        let dims = box_dims(p);
        h.add_assign(&placed(&number_op(dims[p.k - 1])?, p.k, &dims)?.scaled(-p.mu_at(p.k)))?;
        h.add_assign(
            &placed(&number_number_minus_one(dims[p.k - 1])?, p.k, &dims)?
                .scaled(0.5 * p.u_at(p.k)),
        )?;
    }
    h.restrict(&basis_box_indices(p)?)
}

/// Interaction `n_a (x) (b+ + b)` in the home product ordering.
pub fn dense_om_int(p: &OmParams) -> Result<DenseMatrix> {
    kron(&number_op(p.na + 1)?, &quadrature(p.nb + 1)?)
}

/// Drive quadrature `(a+ + a) (x) 1_b` in the home product ordering, where
/// it is NOT tridiagonal.
pub fn dense_om_drive_home(p: &OmParams) -> Result<DenseMatrix> {
    kron(&quadrature(p.na + 1)?, &DenseMatrix::identity(p.nb + 1)?)
}

/// Full optomechanical Hamiltonian at a frozen drive value.
pub fn dense_om(p: &OmParams, drive_value: f64) -> Result<DenseMatrix> {
    let mut h = dense_om_int(p)?;
    h.add_assign(&dense_om_drive_home(p)?.scaled(drive_value))?;
    Ok(h)
}

/// Full symmetric eigendecomposition: Householder reduction to tridiagonal,
/// then the block QL kernel, then the back-transformation.
pub struct DenseEig {
    n: usize,
    pub eigenvalues: Vec<f64>,
    /// Column-major eigenvectors, like [`tridiag::SpectralBlock`].
    pub eigenvectors: Vec<f64>,
}

impl DenseEig {
    /// `out = Q exp(tau * Lambda) Q^T v`.
    pub fn expm_apply(&self, tau: C64, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let n = self.n;
        let mut w = Vec::with_capacity(n);
        for j in 0..n {
            let col = &self.eigenvectors[j * n..(j + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                acc += v[i] * col[i];
            }
            w.push(acc * (tau * self.eigenvalues[j]).exp());
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let col = &self.eigenvectors[j * n..(j + 1) * n];
            for i in 0..n {
                out[i] += w[j] * col[i];
            }
        }
        Ok(out)
    }
}

pub fn dense_eigh(h: &DenseMatrix) -> Result<DenseEig> {
    debug_assert!(h.is_symmetric());
    let n = h.n;
    let mut v = h.data.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    householder_tridiagonalize(n, &mut v, &mut d, &mut e);
    let (eigenvalues, qt) = tridiag::eigh_block(&d, &e[1..])?;
    // back-transform, column-major: q[j][i] = sum_m V[i][m] qt[j][m]
    let mut q = vec![0.0f64; n * n];
    for j in 0..n {
        let qt_col = &qt[j * n..(j + 1) * n];
        let q_col = &mut q[j * n..(j + 1) * n];
        for (i, slot) in q_col.iter_mut().enumerate() {
            let row = &v[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for m in 0..n {
                acc += row[m] * qt_col[m];
            }
            *slot = acc;
        }
    }
    Ok(DenseEig {
        n,
        eigenvalues,
        eigenvectors: q,
    })
}

/// `exp(tau H) v` by full eigendecomposition; H must be symmetric.
pub fn dense_expm_apply(h: &DenseMatrix, tau: C64, v: &[C64]) -> Result<Vec<C64>> {
    dense_eigh(h)?.expm_apply(tau, v)
}

/// Symmetric Householder reduction to tridiagonal form (EISPACK tred2
/// lineage). On exit `v` holds the accumulated orthogonal transformation
/// (row-major, `A = V T V^T`), `d` the diagonal of T, and `e[1..]` the
/// sub-diagonal (`e[0] = 0`).
fn householder_tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0f64;
        let mut h = 0.0f64;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }
    // accumulate transformations
    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + (i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + (i + 1)] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + (i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + (n - 1)] = 1.0;
    e[0] = 0.0;
}
