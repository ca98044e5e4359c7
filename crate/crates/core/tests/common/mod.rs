#![allow(dead_code)]

use nalgebra::DMatrix;
use netident::model::{
    extract_theta, EntryPattern, ModelSetStructure, NetworkModel, PatternGrid, Properness,
    ThetaAssignment,
};
use netident::poly::{frac, int};
use netident::{Poly, RMat, Rat};

pub fn z() -> EntryPattern {
    EntryPattern::Zero
}
pub fn ps() -> EntryPattern {
    EntryPattern::Param(Properness::Strict)
}
pub fn pp() -> EntryPattern {
    EntryPattern::Param(Properness::Proper)
}
pub fn one() -> EntryPattern {
    EntryPattern::Fixed(Rat::one())
}

pub fn grid(rows: Vec<Vec<EntryPattern>>) -> PatternGrid {
    PatternGrid::from_rows(rows).unwrap()
}

/// Three nodes, every off-diagonal module free, r1 on nodes 1 and 3, r2 on node 2.
pub fn example_one() -> ModelSetStructure {
    let g = grid(vec![
        vec![z(), ps(), ps()],
        vec![ps(), z(), ps()],
        vec![ps(), ps(), z()],
    ]);
    ModelSetStructure::new(g, example_one_r(), PatternGrid::zeros(3, 0), None, false).unwrap()
}

pub fn example_one_r() -> PatternGrid {
    grid(vec![vec![one(), z()], vec![z(), one()], vec![one(), z()]])
}

/// Same set with `G21` fixed to zero.
pub fn example_one_restricted() -> ModelSetStructure {
    example_one().with_g(1, 0, z()).unwrap()
}

pub fn r_example_one() -> RMat {
    RMat::from_rows(vec![
        vec![Rat::one(), Rat::zero()],
        vec![Rat::zero(), Rat::one()],
        vec![Rat::one(), Rat::zero()],
    ])
}

/// Chain `1 -> 2 -> 3` with `G21 = A`, `G32 = B`.
pub fn s1(a: &Rat, b: &Rat) -> NetworkModel {
    let mut g = RMat::zeros(3, 3);
    g[(1, 0)] = a.clone();
    g[(2, 1)] = b.clone();
    NetworkModel::noise_free(g, r_example_one()).unwrap()
}

/// `G23 = B`, `G31 = A`.
pub fn s2(a: &Rat, b: &Rat) -> NetworkModel {
    let mut g = RMat::zeros(3, 3);
    g[(1, 2)] = b.clone();
    g[(2, 0)] = a.clone();
    NetworkModel::noise_free(g, r_example_one()).unwrap()
}

pub fn a_values() -> Vec<Rat> {
    vec![
        Rat::delay(int(1), 1),
        Rat::first_order(frac(1, 2), frac(3, 10)),
    ]
}

pub fn b_values() -> Vec<Rat> {
    vec![Rat::delay(int(2), 1), Rat::first_order(int(1), frac(-2, 5))]
}

/// Node 1 = y (noisy output), node 2 = u (controller output, excited by r).
/// Plant `G12` strictly proper, controller `G21` proper.
pub fn closed_loop() -> ModelSetStructure {
    let g = grid(vec![vec![z(), ps()], vec![pp(), z()]]);
    let r = grid(vec![vec![z()], vec![one()]]);
    let h = grid(vec![vec![ps()], vec![z()]]);
    ModelSetStructure::new(g, r, h, None, true).unwrap()
}

pub fn closed_loop_model() -> NetworkModel {
    let mut g = RMat::zeros(2, 2);
    g[(0, 1)] = Rat::delay(frac(1, 2), 1);
    g[(1, 0)] = Rat::constant(frac(1, 5));
    let r = RMat::from_rows(vec![vec![Rat::zero()], vec![Rat::one()]]);
    let h_a = &Rat::one() + &Rat::first_order(frac(1, 2), frac(1, 2));
    let h = RMat::from_rows(vec![vec![h_a], vec![Rat::zero()]]);
    NetworkModel::new(g, r, h, DMatrix::from_element(1, 1, 1.0)).unwrap()
}

/// Five nodes, noise on nodes 1..3 with `v1, v2` correlated, fixed unit
/// excitations on nodes 4 and 5; optional unit excitations on nodes 1, 2.
pub fn five_node(excited: bool) -> ModelSetStructure {
    let mut gp = vec![vec![z(); 5]; 5];
    for (i, j) in [(1, 0), (2, 0), (2, 1), (3, 2), (4, 3), (2, 4)] {
        gp[i][j] = ps();
    }
    let mut rp = vec![vec![z(); 2]; 5];
    rp[3][0] = one();
    rp[4][1] = one();
    let mut hp = vec![vec![z(); 3]; 5];
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)] {
        hp[i][j] = ps();
    }
    let s = ModelSetStructure::new(grid(gp), grid(rp), grid(hp), None, false).unwrap();
    if !excited {
        return s;
    }
    let unit = |n: usize| {
        (0..5)
            .map(|i| if i == n { one() } else { z() })
            .collect::<Vec<_>>()
    };
    s.with_extra_r_columns(&[unit(0), unit(1)]).unwrap()
}

/// Three nodes with all modules free, correlated noise on nodes 1, 2.
pub fn example_four(with_r: bool, diagonal_h: bool) -> ModelSetStructure {
    let g = grid(vec![
        vec![z(), ps(), ps()],
        vec![ps(), z(), ps()],
        vec![ps(), ps(), z()],
    ]);
    let off = if diagonal_h { z() } else { ps() };
    let h = grid(vec![
        vec![ps(), off.clone(), z()],
        vec![off, ps(), z()],
        vec![z(), z(), ps()],
    ]);
    let r = if with_r {
        grid(vec![vec![ps(), z()], vec![z(), ps()], vec![z(), z()]])
    } else {
        PatternGrid::zeros(3, 0)
    };
    ModelSetStructure::new(g, r, h, None, false).unwrap()
}

/// Two nodes in an algebraic loop, both modules proper, each node excited.
pub fn proper_loop() -> ModelSetStructure {
    let g = grid(vec![vec![z(), pp()], vec![pp(), z()]]);
    let r = grid(vec![vec![one(), z()], vec![z(), one()]]);
    ModelSetStructure::new(g, r, PatternGrid::zeros(2, 0), None, false).unwrap()
}

pub fn proper_loop_model() -> NetworkModel {
    let mut g = RMat::zeros(2, 2);
    g[(0, 1)] = &Rat::constant(frac(1, 2)) + &Rat::first_order(frac(1, 4), frac(1, 3));
    g[(1, 0)] = &Rat::constant(frac(-3, 5)) + &Rat::delay(frac(1, 5), 1);
    NetworkModel::noise_free(g, RMat::identity(2)).unwrap()
}

pub fn theta_of(s: &ModelSetStructure, m: &NetworkModel) -> ThetaAssignment {
    extract_theta(s, m).unwrap()
}

/// `(z + c) / z` style helper.
pub fn ratio(num: &[i64], den: &[i64]) -> Rat {
    Rat::new(Poly::from_ints(num), Poly::from_ints(den)).unwrap()
}

#[allow(unused_imports)]
pub use netident::random::{
    random_spd, random_structure, random_valid_model as random_model, small_module, RandomClass,
};
