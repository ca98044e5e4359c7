//! Rational functions `num(z) / den(z)` in reduced, monic-denominator form.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{scalar_to_f64, Poly, Scalar};

/// Stability margin: every pole must satisfy `|pole| < 1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// A rational transfer function.
///
/// Invariants: `den` is monic, `gcd(num, den) = 1`, zero is `0 / 1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rat {
    num: Poly,
    den: Poly,
}

impl Rat {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Rat::zero();
        }
        let g = Poly::gcd(&num, &den);
        let (num, den) = if g.is_constant() {
            (num, den)
        } else {
            (num.exact_div(&g).unwrap(), den.exact_div(&g).unwrap())
        };
        let lc = den.leading().unwrap().recip();
        Rat {
            num: num.scale(&lc),
            den: den.scale(&lc),
        }
    }

    pub fn zero() -> Self {
        Rat {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        Rat::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        Rat {
            num: Poly::constant(c),
            den: Poly::one(),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        Rat {
            num: p,
            den: Poly::one(),
        }
    }

    /// `c / (z - a)`
    pub fn first_order(c: Scalar, a: Scalar) -> Self {
        Self::reduce(Poly::constant(c), Poly::new(vec![-a, Scalar::one()]))
    }

    /// `c / z^k`
    pub fn delay(c: Scalar, k: usize) -> Self {
        Self::reduce(Poly::constant(c), Poly::monomial(Scalar::one(), k))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_constant() && self.num == Poly::one()
    }

    pub fn num_degree(&self) -> Option<usize> {
        self.num.degree()
    }

    pub fn den_degree(&self) -> usize {
        self.den.degree().unwrap()
    }

    /// Largest degree of numerator or denominator.
    pub fn degree(&self) -> usize {
        self.num.degree().unwrap_or(0).max(self.den_degree())
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree().is_none_or(|d| d <= self.den_degree())
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.degree().is_none_or(|d| d < self.den_degree())
    }

    /// Limit as `z -> infinity`.
    pub fn feedthrough(&self) -> Result<Scalar> {
        match self.num.degree() {
            None => Ok(Scalar::zero()),
            Some(n) if n < self.den_degree() => Ok(Scalar::zero()),
            Some(n) if n == self.den_degree() => Ok(self.num.leading().unwrap().clone()),
            Some(n) => Err(Error::Improper {
                num: n,
                den: self.den_degree(),
            }),
        }
    }

    pub fn feedthrough_f64(&self) -> Result<f64> {
        self.feedthrough().map(|q| scalar_to_f64(&q))
    }

    pub fn inv(&self) -> Result<Rat> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(self.den.clone(), self.num.clone()))
    }

    pub fn checked_div(&self, rhs: &Rat) -> Result<Rat> {
        Ok(self * &rhs.inv()?)
    }

    pub fn scale(&self, c: &Scalar) -> Rat {
        Rat {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
        .renormalized()
    }

    fn renormalized(self) -> Rat {
        if self.num.is_zero() {
            Rat::zero()
        } else {
            self
        }
    }

    /// Evaluates at `z`; `None` when `z` is (numerically) a pole.
    pub fn eval(&self, z: Complex64) -> Option<Complex64> {
        let d = self.den.eval_complex(z);
        let scale: f64 = self
            .den
            .coeffs()
            .iter()
            .map(|c| scalar_to_f64(c).abs())
            .sum::<f64>()
            * z.norm().max(1.0).powi(self.den_degree() as i32);
        if d.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        Some(self.num.eval_complex(z) / d)
    }

    /// Poles from the denominator roots.
    pub fn poles(&self) -> Vec<Complex64> {
        self.den.roots()
    }

    /// All poles strictly inside `|z| < 1 - STABILITY_MARGIN`.
    pub fn is_stable(&self) -> bool {
        self.den.root_radius() < 1.0 - STABILITY_MARGIN
    }
}

impl Default for Rat {
    fn default() -> Self {
        Rat::zero()
    }
}

impl Add for &Rat {
    type Output = Rat;
    fn add(self, rhs: &Rat) -> Rat {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return Rat::reduce(&self.num + &rhs.num, self.den.clone());
        }
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        Rat::reduce(num, &self.den * &rhs.den)
    }
}

impl Sub for &Rat {
    type Output = Rat;
    fn sub(self, rhs: &Rat) -> Rat {
        self + &(-rhs)
    }
}

impl Mul for &Rat {
    type Output = Rat;
    fn mul(self, rhs: &Rat) -> Rat {
        if self.is_zero() || rhs.is_zero() {
            return Rat::zero();
        }
        Rat::reduce(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Rat {
            type Output = Rat;
            fn $m(self, rhs: Rat) -> Rat {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Rat> for Rat {
            type Output = Rat;
            fn $m(self, rhs: &Rat) -> Rat {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &Poly| {
            if p.coeffs().iter().filter(|c| !c.is_zero()).count() > 1 {
                format!("({p})")
            } else {
                p.to_string()
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rat({self})")
    }
}
