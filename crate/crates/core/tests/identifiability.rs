mod common;

use common::*;
use netident::identifiability::{
    analyze, build_row_permutations, check_no_algebraic_loops, check_theorem1, extract_ti,
    precondition_route, AnalysisOptions, Route, RowVerdict, Verdict,
};
use netident::model::network_transfer;
use netident::numeric::{normal_rank, RankOptions};
use netident::poly::int;
use netident::Rat;

#[test]
fn s1_is_identifiable_for_every_instantiation() {
    let s = example_one();
    for a in a_values() {
        for b in b_values() {
            let rep = analyze(&s, Some(&s1(&a, &b)), &AnalysisOptions::default()).unwrap();
            assert_eq!(
                rep.overall,
                Verdict::IdentifiableAtModel,
                "A = {a}, B = {b}"
            );
            assert_eq!(rep.route.route, Some(Route::StrictlyProper));
            for row in &rep.theorem2 {
                assert_eq!((row.alpha, row.beta), (2, 0));
                assert_eq!(row.rank, Some(2));
            }
        }
    }
}

#[test]
fn s2_is_not_identifiable_with_rank_one_witness() {
    let s = example_one();
    for a in a_values() {
        for b in b_values() {
            let m = s2(&a, &b);
            let rep = analyze(&s, Some(&m), &AnalysisOptions::default()).unwrap();
            assert_eq!(rep.overall, Verdict::NotIdentifiable);
            let w = rep
                .witnesses
                .iter()
                .find(|w| w.row == 1)
                .expect("row 2 witness");
            assert_eq!(w.rank, Some(1));
            assert!(w.sigma_ratio.unwrap() < 1e-9);
            // [[1, 0], [A + 1, 0]]
            let ti = w.ti.as_ref().unwrap();
            assert_eq!(ti[(0, 0)], Rat::one());
            assert_eq!(ti[(1, 0)], &a + &Rat::one());
            assert!(ti[(0, 1)].is_zero() && ti[(1, 1)].is_zero());

            let alt = w.alternative.as_ref().expect("alternative model");
            assert_ne!(alt.model, m);
            assert_eq!(
                network_transfer(&alt.model).unwrap(),
                network_transfer(&m).unwrap()
            );
        }
    }
}

#[test]
fn s2_reduced_matrix_for_unit_delays() {
    let s = example_one();
    let m = s2(&Rat::delay(int(1), 1), &Rat::delay(int(2), 1));
    let t = network_transfer(&m).unwrap();
    let ti = extract_ti(&build_row_permutations(&s, 1), &t);
    assert_eq!(ti[(1, 0)], ratio(&[1, 1], &[0, 1]));
    let est = normal_rank(&ti, &RankOptions::default()).unwrap();
    assert_eq!(est.rank, 1);
}

#[test]
fn s1_row_one_reduced_matrix() {
    let s = example_one();
    let m = s1(&Rat::delay(int(1), 1), &Rat::delay(int(2), 1));
    let ti = extract_ti(
        &build_row_permutations(&s, 0),
        &network_transfer(&m).unwrap(),
    );
    assert_eq!(ti[(0, 0)], ratio(&[1], &[0, 1]));
    assert_eq!(ti[(0, 1)], Rat::one());
    assert_eq!(ti[(1, 0)], ratio(&[2, 0, 1], &[0, 0, 1]));
    assert_eq!(ti[(1, 1)], ratio(&[2], &[0, 1]));
}

#[test]
fn restricting_g21_makes_s2_identifiable() {
    let s = example_one_restricted();
    for a in a_values() {
        for b in b_values() {
            let rep = analyze(&s, Some(&s2(&a, &b)), &AnalysisOptions::default()).unwrap();
            assert_eq!(rep.overall, Verdict::IdentifiableAtModel);
        }
    }
}

#[test]
fn example_one_set_is_generically_identifiable() {
    let rep = analyze(&example_one(), None, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.overall, Verdict::GenericallyIdentifiable);
    // U = R has rank 2 < 3 rows: no diagonalization
    assert!(!rep.theorem1.passed);
}

#[test]
fn closed_loop_matches_identity_assignment() {
    let s = closed_loop();
    assert_eq!(check_no_algebraic_loops(&s), Ok(vec![1, 0]));
    let t1 = check_theorem1(&s);
    assert!(t1.passed);
    // y takes the noise column e1, u takes the reference r1
    assert_eq!(t1.assignment, Some(vec![1, 0]));
    let rep = analyze(&s, None, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.route.route, Some(Route::NoAlgebraicLoops));
    assert_eq!(rep.overall, Verdict::GenericallyIdentifiable);
    let at = analyze(&s, Some(&closed_loop_model()), &AnalysisOptions::default()).unwrap();
    assert_eq!(at.overall, Verdict::IdentifiableAtModel);
}

#[test]
fn five_node_flips_with_extra_excitation() {
    for seed in [0, 1, 2] {
        let opts = AnalysisOptions::with_seed(seed);
        let rep = analyze(&five_node(false), None, &opts).unwrap();
        assert!(!rep.theorem1.passed);
        assert_eq!(rep.route.route, Some(Route::StrictlyProper));
        assert_eq!(rep.overall, Verdict::NotIdentifiable, "seed {seed}");
        assert!(rep.witnesses.iter().any(|w| w.row == 1));
        assert_eq!(rep.theorem2[1].verdict, RowVerdict::Fail);

        let rep = analyze(&five_node(true), None, &opts).unwrap();
        assert!(rep.theorem1.passed);
        assert_eq!(rep.overall, Verdict::GenericallyIdentifiable, "seed {seed}");
    }
}

#[test]
fn example_four_three_way() {
    assert!(check_theorem1(&example_four(true, false)).passed);
    assert!(!check_theorem1(&example_four(false, false)).passed);
    assert!(check_theorem1(&example_four(false, true)).passed);
    let rep = analyze(
        &example_four(true, false),
        None,
        &AnalysisOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.overall, Verdict::GenericallyIdentifiable);
}

#[test]
fn proper_loop_uses_feedthrough_route() {
    let s = proper_loop();
    assert!(check_no_algebraic_loops(&s).is_err());
    let rep = precondition_route(&s, None, &AnalysisOptions::default()).unwrap();
    assert_eq!(rep.route, Some(Route::Feedthrough));
    let rows = rep.feedthrough_rows.unwrap();
    assert!(rows.iter().all(|r| r.ok && r.alpha == 1));
    let at = analyze(&s, Some(&proper_loop_model()), &AnalysisOptions::default()).unwrap();
    assert_eq!(at.route.route, Some(Route::Feedthrough));
    assert_eq!(at.overall, Verdict::IdentifiableAtModel);
}

#[test]
fn verdicts_agree_across_seeds() {
    let corpus = [
        example_one(),
        example_one_restricted(),
        closed_loop(),
        five_node(false),
        five_node(true),
        example_four(true, false),
        example_four(false, false),
        example_four(false, true),
        proper_loop(),
    ];
    for s in &corpus {
        let a = analyze(s, None, &AnalysisOptions::with_seed(11)).unwrap();
        let b = analyze(s, None, &AnalysisOptions::with_seed(12345)).unwrap();
        assert_eq!(a.overall, b.overall);
        let va: Vec<_> = a.theorem2.iter().map(|r| r.verdict).collect();
        let vb: Vec<_> = b.theorem2.iter().map(|r| r.verdict).collect();
        assert_eq!(va, vb);
    }
}
