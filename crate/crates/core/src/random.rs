//! Random instances for tests and benchmarks: stable modules, valid models
//! of the three precondition classes, and model-set structures.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::model::{
    random_module, validate_model, EntryPattern, ModelSetStructure, NetworkModel, PatternGrid,
    Properness,
};
use crate::poly::{frac, Scalar};
use crate::{RMat, Rat};

/// Random stable first-order module scaled down so that loops stay stable.
pub fn small_module(rng: &mut impl Rng, feedthrough: Option<f64>) -> Rat {
    let ft = feedthrough.map(|d| Scalar::new(((d * 1024.0).round() as i64).into(), 1024.into()));
    random_module(rng, None).scale(&frac(1, 4)) + ft.map_or(Rat::zero(), Rat::constant)
}

pub fn random_spd(rng: &mut impl Rng, p: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(p, p) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomClass {
    /// All modules strictly proper.
    StrictlyProper,
    /// Feedthroughs along an acyclic order, diagonal noise feedthrough spectrum.
    Acyclic,
    /// Feedthroughs everywhere, one unit excitation per node.
    Looped,
}

/// Random valid model of the given class, `1 <= p <= l` (rejection sampled).
pub fn random_valid_model(rng: &mut impl Rng, l: usize, class: RandomClass) -> NetworkModel {
    loop {
        let p = rng.random_range(1..=l);
        let order: Vec<usize> = {
            let mut v: Vec<usize> = (0..l).collect();
            for i in (1..l).rev() {
                v.swap(i, rng.random_range(0..=i));
            }
            v
        };
        let rank_of = |n: usize| order.iter().position(|&x| x == n).unwrap();
        let mut g = RMat::zeros(l, l);
        for i in 0..l {
            for j in 0..l {
                if i == j || rng.random::<f64>() < 0.3 {
                    continue;
                }
                let with_ft = match class {
                    RandomClass::StrictlyProper => false,
                    RandomClass::Acyclic => rank_of(j) < rank_of(i),
                    RandomClass::Looped => true,
                };
                let mag = rng.random_range(0.1..0.45);
                let sign = if rng.random() { 1.0 } else { -1.0 };
                let ft = with_ft.then_some(mag * sign);
                g[(i, j)] = small_module(rng, ft);
            }
        }
        let r = match class {
            RandomClass::Looped => RMat::identity(l),
            _ => {
                let k = rng.random_range(0..=2);
                RMat::from_entries(
                    l,
                    k,
                    (0..l * k)
                        .map(|_| {
                            if rng.random::<f64>() < 0.5 {
                                small_module(rng, Some(1.0))
                            } else {
                                Rat::zero()
                            }
                        })
                        .collect(),
                )
                .expect("dimensions match")
            }
        };
        let mut h = RMat::zeros(l, p);
        for i in 0..l {
            for j in 0..p {
                let monic_block = i < p;
                h[(i, j)] = if monic_block && i == j {
                    &Rat::one() + &small_module(rng, None)
                } else if monic_block || class == RandomClass::Acyclic {
                    if rng.random::<f64>() < 0.5 {
                        small_module(rng, None)
                    } else {
                        Rat::zero()
                    }
                } else {
                    let d = rng.random_range(-1.0..1.0);
                    small_module(rng, Some(d))
                };
            }
        }
        let lambda = if class == RandomClass::Acyclic {
            DMatrix::from_diagonal(&DVector::from_fn(p, |_, _| rng.random_range(0.5..2.0)))
        } else {
            random_spd(rng, p)
        };
        let Ok(m) = NetworkModel::new(g, r, h, lambda) else {
            continue;
        };
        if validate_model(&m).is_ok_and(|rep| rep.is_valid()) {
            return m;
        }
    }
}

/// Random structure with strictly proper parameterized modules.
pub fn random_structure(rng: &mut impl Rng) -> ModelSetStructure {
    let l = rng.random_range(2..=4);
    let k = rng.random_range(0..=2);
    let p = rng.random_range(0..=l.min(3));
    let pick = |rng: &mut dyn RngCore, zero: f64, fixed: f64| {
        let u = rng.random::<f64>();
        if u < zero {
            EntryPattern::Zero
        } else if u < zero + fixed {
            EntryPattern::Fixed(Rat::one())
        } else {
            EntryPattern::Param(Properness::Strict)
        }
    };
    let g = PatternGrid::from_rows(
        (0..l)
            .map(|i| {
                (0..l)
                    .map(|j| {
                        if i == j {
                            EntryPattern::Zero
                        } else {
                            pick(rng, 0.5, 0.0)
                        }
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap();
    let r = PatternGrid::from_rows(
        (0..l)
            .map(|_| (0..k).map(|_| pick(rng, 0.5, 0.3)).collect())
            .collect(),
    )
    .unwrap_or_else(|_| PatternGrid::zeros(l, k));
    let h = PatternGrid::from_rows(
        (0..l)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        if i == j {
                            EntryPattern::Param(Properness::Strict)
                        } else {
                            pick(rng, 0.6, 0.0)
                        }
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap_or_else(|_| PatternGrid::zeros(l, p));
    ModelSetStructure::new(g, r, h, None, rng.random()).unwrap()
}
