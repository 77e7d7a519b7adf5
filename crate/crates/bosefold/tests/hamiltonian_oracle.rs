//! Builder output against the dense Kronecker-product oracle.

mod common;

use bosefold::fock;
use bosefold::hamiltonian::{
    build_bh_diag, build_bh_pair, build_om_drive, build_om_int, BhBasis, BhParams, Boundary,
    Drive, OmParams,
};
use bosefold::oracle::{
    dense_bh, dense_bh_term, dense_om_drive_home, dense_om_int, tridiagonality_check,
};
use bosefold::shuffle::product_shuffle;
use common::tri_to_dense;

fn island(k: usize, n: u64, mu: f64, u: f64, j: f64) -> BhParams {
    BhParams::new(k, Boundary::Periodic, mu, u, j, BhBasis::Island { n_total: n }).unwrap()
}

#[test]
fn pair_term_tridiagonal_and_bands_exact() {
    // K = 3, every island up to N = 8: the dense pair term has zero entries
    // at all |i - j| >= 2 in the ordered basis, and its bands reproduce the
    // builder entries bit for bit
    for n in 0..=8u64 {
        let p = island(3, n, 0.4, 1.0, 0.9);
        let dense = dense_bh_term(&p, 1).unwrap();
        assert!(tridiagonality_check(&dense), "N = {n}");
        let tri = build_bh_pair(&p).unwrap();
        assert_eq!(dense.dim(), tri.dim());
        for i in 0..tri.dim() {
            assert_eq!(dense.get(i, i), tri.diag()[i], "diag at {i}, N = {n}");
        }
        for i in 0..tri.dim() - 1 {
            assert_eq!(dense.get(i + 1, i), tri.offdiag()[i], "sub at {i}, N = {n}");
            assert_eq!(dense.get(i, i + 1), tri.offdiag()[i], "super at {i}, N = {n}");
        }
    }
}

#[test]
fn pair_term_conserves_total_occupation() {
    // in a capped box covering several islands, elements between tuples of
    // different totals vanish identically
    let p = BhParams::new(
        3,
        Boundary::Periodic,
        0.2,
        1.0,
        0.8,
        BhBasis::Capped {
            caps: vec![2, 2, 2],
        },
    )
    .unwrap();
    let tuples = p.basis_tuples().unwrap();
    let dense = dense_bh_term(&p, 1).unwrap();
    for (i, ti) in tuples.iter().enumerate() {
        for (j, tj) in tuples.iter().enumerate() {
            if ti.total().unwrap() != tj.total().unwrap() {
                assert_eq!(dense.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn capped_box_bands_match_dense_truncation() {
    let p = BhParams::new(
        3,
        Boundary::Open,
        0.3,
        0.7,
        1.2,
        BhBasis::Capped {
            caps: vec![2, 1, 2],
        },
    )
    .unwrap();
    let dense = dense_bh_term(&p, 1).unwrap();
    assert!(tridiagonality_check(&dense));
    let tri = build_bh_pair(&p).unwrap();
    for i in 0..tri.dim() {
        assert_eq!(dense.get(i, i), tri.diag()[i]);
        if i + 1 < tri.dim() {
            assert_eq!(dense.get(i, i + 1), tri.offdiag()[i]);
        }
    }
}

#[test]
fn two_site_full_hamiltonian_no_double_counting() {
    // H(2 sites) = pair term (site-1 diagonal + hop) + site-2 diagonal
    for n in 1..=6u64 {
        let mut p = island(2, n, 0.5, 1.3, 0.8);
        p.boundary = Boundary::Open;
        let tri = build_bh_pair(&p).unwrap();
        let d2 = build_bh_diag(&p, 2).unwrap();
        let dense = dense_bh(&p).unwrap();
        for i in 0..tri.dim() {
            assert_eq!(dense.get(i, i), tri.diag()[i] + d2[i]);
            if i + 1 < tri.dim() {
                assert_eq!(dense.get(i, i + 1), tri.offdiag()[i]);
            }
        }
    }
}

#[test]
fn island_build_covers_whole_island() {
    let p = island(4, 5, 0.0, 1.0, 1.0);
    let spec = fock::island_spec(5, 4).unwrap();
    let tri = build_bh_pair(&p).unwrap();
    assert_eq!(tri.dim() as u64, spec.size);
    let tuples = p.basis_tuples().unwrap();
    for (i, t) in tuples.iter().enumerate() {
        assert_eq!(fock::skolem(t).unwrap(), spec.z_low + i as u64);
    }
}

#[test]
fn om_int_matches_kronecker_oracle() {
    let p = OmParams {
        na: 4,
        nb: 3,
        drive: Drive::Constant(0.0),
    };
    let dense = dense_om_int(&p).unwrap();
    assert!(tridiagonality_check(&dense));
    let tri = build_om_int(&p).unwrap();
    for i in 0..tri.dim() {
        assert_eq!(dense.get(i, i), tri.diag()[i]);
        if i + 1 < tri.dim() {
            assert_eq!(dense.get(i, i + 1), tri.offdiag()[i]);
        }
    }
    // boundary couplings vanish exactly where n_b = Nb
    let db = p.nb + 1;
    for (i, &e) in tri.offdiag().iter().enumerate() {
        if i % db == db - 1 {
            assert_eq!(e, 0.0);
        }
    }
}

#[test]
fn om_drive_conjugates_to_home_frame_quadrature() {
    // undoing the swap on the tridiagonal drive reproduces the dense,
    // non-tridiagonal (a+ + a) (x) 1_b
    let p = OmParams {
        na: 3,
        nb: 2,
        drive: Drive::Constant(1.0),
    };
    let drive_tri = tri_to_dense(&build_om_drive(&p).unwrap());
    let swap = product_shuffle(&[p.na + 1, p.nb + 1]).unwrap();
    let home = drive_tri.conjugate_by_perm(swap.transpose().map()).unwrap();
    let expect = dense_om_drive_home(&p).unwrap();
    assert!(!tridiagonality_check(&expect));
    assert_eq!(home, expect);
}
