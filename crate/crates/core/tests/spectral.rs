mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use netident::graph::triangular_order;
use netident::model::{feedthrough_matrices, EntryPattern, ModelSetStructure, PatternGrid};
use netident::numeric::psd_rank;
use netident::spectral::{
    embedded_lambda, ldl_consistency, ldl_recover_lambda, noise_feedthrough_spectrum,
    ordering_permutation, permute_sym, square_embedding, OrderingRoute,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference LDL^T with unit upper factor, by recursion on the trailing block.
fn ldl_recursive(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DVector::zeros(0));
    }
    let d = a[(n - 1, n - 1)];
    let col = a.view((0, n - 1), (n - 1, 1)).into_owned();
    let l_col = if d.abs() > 1e-14 {
        &col / d
    } else {
        DMatrix::zeros(n - 1, 1)
    };
    let schur = a.view((0, 0), (n - 1, n - 1)).into_owned() - &l_col * d * l_col.transpose();
    let (u_head, d_head) = ldl_recursive(&schur);
    let mut u = DMatrix::identity(n, n);
    u.view_mut((0, 0), (n - 1, n - 1)).copy_from(&u_head);
    u.view_mut((0, n - 1), (n - 1, 1)).copy_from(&l_col);
    let mut dv = DVector::zeros(n);
    dv.rows_mut(0, n - 1).copy_from(&d_head);
    dv[n - 1] = d;
    (u, dv)
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

fn feedthrough_order_of(g_inf: &DMatrix<f64>) -> Vec<usize> {
    triangular_order(g_inf.nrows(), |i, j| g_inf[(i, j)] != 0.0).expect("acyclic")
}

#[test]
fn ldl_implementations_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let order: Vec<usize> = (0..n).rev().collect();
        let (u1, d1) = ldl_recover_lambda(&a, &order).unwrap();
        let (u2, d2) = ldl_recursive(&permute_sym(&a, &order));
        assert!((&u1 - &u2).amax() < 1e-10);
        assert!((&d1 - &d2).amax() < 1e-10);
        let back = &u1 * DMatrix::from_diagonal(&d1) * u1.transpose();
        assert!((back - permute_sym(&a, &order)).amax() < 1e-10);
    }
}

#[test]
fn strictly_proper_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let l = rng.random_range(2..5);
        let m = random_model(&mut rng, l, RandomClass::StrictlyProper);
        let nf = noise_feedthrough_spectrum(&m).unwrap();
        let o = ordering_permutation(
            &DMatrix::zeros(l, m.k()),
            &nf,
            OrderingRoute::StrictlyProper,
        )
        .unwrap();
        assert_eq!(o.p, m.p());
        assert!(rel_err(&o.lambda_tilde, &embedded_lambda(&m).unwrap()) < 1e-8);
        let lead = permute_sym(&o.lambda_tilde, &o.order)
            .view((0, 0), (o.p, o.p))
            .into_owned();
        assert_eq!(psd_rank(&lead, 1e-9), o.p);
    }
}

#[test]
fn acyclic_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let l = rng.random_range(2..4);
        let m = random_model(&mut rng, l, RandomClass::Acyclic);
        let f = feedthrough_matrices(&m).unwrap();
        let order = feedthrough_order_of(&f.g);
        let nf = noise_feedthrough_spectrum(&m).unwrap();
        let o = ordering_permutation(
            &f.t_wr,
            &nf,
            OrderingRoute::NoAlgebraicLoops { order: &order },
        )
        .unwrap();
        assert_eq!(o.p, m.p());
        assert!(rel_err(&o.lambda_tilde, &embedded_lambda(&m).unwrap()) < 1e-8);
        // noise-free nodes leave their feedthrough columns undetermined
        if m.p() == l {
            assert!((&o.g_inf - &f.g).amax() < 1e-8);
        }
    }
}

#[test]
fn looped_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let l = rng.random_range(2..4);
        let m = random_model(&mut rng, l, RandomClass::Looped);
        let pp = EntryPattern::Param(netident::model::Properness::Proper);
        let mut g = PatternGrid::filled(l, l, pp);
        for i in 0..l {
            g.set(i, i, EntryPattern::Zero);
        }
        let s = ModelSetStructure::new(
            g,
            PatternGrid::from_matrix(&m.r),
            PatternGrid::zeros(l, 0),
            None,
            false,
        )
        .unwrap();
        let f = feedthrough_matrices(&m).unwrap();
        let nf = noise_feedthrough_spectrum(&m).unwrap();
        let o = ordering_permutation(&f.t_wr, &nf, OrderingRoute::Feedthrough { structure: &s })
            .unwrap();
        assert_eq!(o.p, m.p());
        assert!(rel_err(&o.lambda_tilde, &embedded_lambda(&m).unwrap()) < 1e-8);
    }
}

#[test]
fn ldl_flags_algebraic_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut flagged = 0;
    let mut trials = 0;
    while trials < 100 {
        let l = rng.random_range(2..4);
        let mut m = random_model(&mut rng, l, RandomClass::Looped);
        let f = feedthrough_matrices(&m).unwrap();
        if triangular_order(l, |i, j| f.g[(i, j)] != 0.0).is_ok() {
            continue;
        }
        trials += 1;
        // full noise with diagonal covariance, so only the loop can break LDL
        m.h = netident::RMat::identity(l);
        m.lambda = DMatrix::from_diagonal(&DVector::from_fn(l, |_, _| rng.random_range(0.5..2.0)));
        let nf = noise_feedthrough_spectrum(&m).unwrap();
        let order: Vec<usize> = (0..l).collect();
        if ldl_consistency(&nf.phi, &order, &m.lambda).flagged {
            flagged += 1;
        }
    }
    assert!(flagged >= 99, "flagged {flagged} of 100");
}

#[test]
fn ldl_accepts_acyclic_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let m = random_model(&mut rng, 3, RandomClass::Acyclic);
        let f = feedthrough_matrices(&m).unwrap();
        let order = feedthrough_order_of(&f.g);
        let nf = noise_feedthrough_spectrum(&m).unwrap();
        let check = ldl_consistency(&nf.phi, &order, &embedded_lambda(&m).unwrap());
        assert!(!check.flagged, "mismatch {}", check.mismatch);
    }
}

#[test]
fn embedding_preserves_spectrum_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let m = random_model(&mut rng, 4, RandomClass::StrictlyProper);
        let e = square_embedding(&m.h, &m.lambda).unwrap();
        assert_eq!(psd_rank(&e.delta_breve, 1e-9), m.p());
    }
}

#[test]
fn random_three_node_spectrum_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seen = false;
    for _ in 0..50 {
        let m = random_model(&mut rng, 3, RandomClass::StrictlyProper);
        if m.p() == 2 {
            assert_eq!(noise_feedthrough_spectrum(&m).unwrap().p, 2);
            seen = true;
        }
    }
    assert!(seen);
}
