mod common;

use common::*;
use nalgebra::DMatrix;
use netident::identifiability::{
    analyze, check_theorem1, check_theorem2, AnalysisOptions, Mode, RowVerdict, Verdict,
};
use netident::model::{
    extract_theta, instantiate_unchecked, network_transfer, random_theta, ModelSetStructure,
    NetworkModel, PatternGrid,
};
use netident::poly::{frac, int};
use netident::{Poly, RMat, Rat};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn poly_strategy(max_len: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(-4i64..=4, 1..=max_len).prop_map(|c| Poly::from_ints(&c))
}

fn rat_strategy() -> impl Strategy<Value = Rat> {
    (
        poly_strategy(3),
        poly_strategy(3).prop_filter("nonzero denominator", |d| !d.is_zero()),
    )
        .prop_map(|(n, d)| Rat::new(n, d).unwrap())
}

/// Fixed seed so failures reproduce without a regression file.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x6e65_7469_6465_6e74),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn close(a: Option<Complex64>, b: Option<Complex64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).norm() <= 1e-8 * (1.0 + x.norm().max(y.norm())),
        _ => true,
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn rational_field_laws(a in rat_strategy(), b in rat_strategy(), c in rat_strategy()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a * &Rat::one(), a.clone());
        if !a.is_zero() {
            prop_assert_eq!(&a * &a.inv().unwrap(), Rat::one());
        }
        let z = Complex64::new(0.3, 1.7);
        prop_assert!(close((&a * &b).eval(z), a.eval(z).zip(b.eval(z)).map(|(x, y)| x * y)));
        prop_assert!(close((&a + &b).eval(z), a.eval(z).zip(b.eval(z)).map(|(x, y)| x + y)));
    }
}

/// Unvalidated model with small random modules; `I - G` invertible generically.
fn loose_model(seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.random_range(1..=3);
    let k = rng.random_range(0..=2);
    let p = rng.random_range(0..=l);
    let entry = |rng: &mut ChaCha8Rng, ft: bool| {
        if rng.random::<f64>() < 0.4 {
            Rat::zero()
        } else {
            small_module(rng, ft.then_some(0.25))
        }
    };
    let mut g = RMat::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            if i != j {
                let ft = rng.random();
                g[(i, j)] = entry(&mut rng, ft);
            }
        }
    }
    let r = RMat::from_entries(l, k, (0..l * k).map(|_| entry(&mut rng, true)).collect()).unwrap();
    let mut h = RMat::zeros(l, p);
    for i in 0..l {
        for j in 0..p {
            h[(i, j)] = if i == j {
                &Rat::one() + &entry(&mut rng, false)
            } else {
                entry(&mut rng, i >= p)
            };
        }
    }
    NetworkModel::new(g, r, h, DMatrix::identity(p, p)).unwrap()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn transfer_solves_network_equation(seed in any::<u64>()) {
        let m = loose_model(seed);
        let t = network_transfer(&m).unwrap();
        prop_assert_eq!(m.i_minus_g().mul(&t).unwrap(), m.u());
    }

    #[test]
    fn extraction_inverts_instantiation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_structure(&mut rng);
        let theta = random_theta(&s, &mut rng);
        let m = instantiate_unchecked(&s, &theta).unwrap();
        let back = extract_theta(&s, &m).unwrap();
        prop_assert_eq!(&back.entries, &theta.entries);
        if s.p() > 0 && s.fixed_lambda().is_none() {
            prop_assert_eq!(back.lambda, theta.lambda);
        }
    }

    #[test]
    fn exact_rank_matches_largest_nonzero_minor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m, k) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(0..=4));
        let small = |rng: &mut ChaCha8Rng| {
            match rng.random_range(0..4) {
                0 => Rat::zero(),
                1 => Rat::constant(int(rng.random_range(-3..=3))),
                _ => Rat::first_order(int(rng.random_range(-2..=2)), frac(rng.random_range(-3..=3), 4)),
            }
        };
        let a = RMat::from_entries(n, k, (0..n * k).map(|_| small(&mut rng)).collect()).unwrap();
        let b = RMat::from_entries(k, m, (0..k * m).map(|_| small(&mut rng)).collect()).unwrap();
        let x = a.mul(&b).unwrap();
        let rank = x.rank_exact();
        prop_assert!(rank <= k.min(n).min(m));
        prop_assert_eq!(rank, brute_force_rank(&x));
    }
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    if n < size {
        return vec![];
    }
    let mut out = subsets(n - 1, size);
    for mut s in subsets(n - 1, size - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

fn brute_force_rank(x: &RMat) -> usize {
    for size in (1..=x.rows().min(x.cols())).rev() {
        for rows in subsets(x.rows(), size) {
            for cols in subsets(x.cols(), size) {
                if !x.select(&rows, &cols).determinant().unwrap().is_zero() {
                    return size;
                }
            }
        }
    }
    0
}

/// Relabels nodes by `perm`; noise columns follow their monic nodes.
fn renumber(s: &ModelSetStructure, perm: &[usize]) -> ModelSetStructure {
    let (l, k, p) = (s.l(), s.k(), s.p());
    let mut g = PatternGrid::zeros(l, l);
    let mut r = PatternGrid::zeros(l, k);
    let mut h = PatternGrid::zeros(l, p);
    for i in 0..l {
        for j in 0..l {
            g.set(perm[i], perm[j], s.g().get(i, j).clone());
        }
        for c in 0..k {
            r.set(perm[i], c, s.r().get(i, c).clone());
        }
        for c in 0..p {
            h.set(perm[i], perm[c], s.h().get(i, c).clone());
        }
    }
    ModelSetStructure::new(
        g,
        r,
        h,
        s.fixed_lambda().cloned(),
        s.lambda_diagonal_feedthrough(),
    )
    .unwrap()
}

fn shuffle(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (lo..hi).collect();
    for i in (1..v.len()).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    v
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn diagonalization_implies_rank_condition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_structure(&mut rng);
        if check_theorem1(&s).passed {
            let opts = AnalysisOptions::with_seed(seed);
            let rep = check_theorem2(&s, Mode::Generic, &opts).unwrap();
            prop_assert!(rep.rows.iter().all(|r| r.verdict != RowVerdict::Fail));
            prop_assert_ne!(analyze(&s, None, &opts).unwrap().overall, Verdict::NotIdentifiable);
        }
    }

    #[test]
    fn verdict_invariant_under_renumbering(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_structure(&mut rng);
        // noisy nodes must stay in front of the noise-free ones
        let mut perm = shuffle(&mut rng, 0, s.p());
        perm.extend(shuffle(&mut rng, s.p(), s.l()));
        let t = renumber(&s, &perm);
        let opts = AnalysisOptions::with_seed(seed);
        let a = analyze(&s, None, &opts).unwrap();
        let b = analyze(&t, None, &opts).unwrap();
        prop_assert_eq!(a.overall, b.overall);
        prop_assert_eq!(a.theorem1.passed, b.theorem1.passed);
        prop_assert_eq!(a.route.route, b.route.route);
    }
}

#[test]
fn structure_corpus_exercises_both_outcomes() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let corpus: Vec<_> = (0..200).map(|_| random_structure(&mut rng)).collect();
    let passing = corpus.iter().filter(|s| check_theorem1(s).passed).count();
    assert!((20..=180).contains(&passing), "{passing} of 200 pass");
}
