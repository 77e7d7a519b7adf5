//! Shared helpers for the oracle cross-check suites.

use bosefold::oracle::DenseMatrix;
use bosefold::{StateVector, SymTriMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded, normalized random state.
pub fn random_state(dim: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::new(amps).unwrap()
}

/// Seeded random dense symmetric-free matrix (general entries).
pub fn random_dense(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DenseMatrix::zeros(n).unwrap();
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    m
}

pub fn l2_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of ln(err) against ln(dt).
pub fn fitted_slope(dts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let num: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let den: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    num / den
}

/// Dense rendering of a tridiagonal matrix.
pub fn tri_to_dense(t: &SymTriMatrix) -> DenseMatrix {
    let n = t.dim();
    let mut m = DenseMatrix::zeros(n).unwrap();
    for (i, &d) in t.diag().iter().enumerate() {
        m.set(i, i, d);
    }
    for (i, &e) in t.offdiag().iter().enumerate() {
        m.set(i, i + 1, e);
        m.set(i + 1, i, e);
    }
    m
}
