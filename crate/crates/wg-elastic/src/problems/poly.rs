//! Bivariate polynomials with exact rational coefficients.
//!
//! Manufactured solutions are entered with their printed rational
//! coefficients and differentiated symbolically, so body forces and jump data
//! carry no decimal drift; rounding enters only at evaluation time.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Convenience constructor for rational constants.
pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone, Default)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), BigRational>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly2::default();
        if !c.is_zero() {
            p.terms.insert((0, 0), c);
        }
        p
    }

    pub fn var_x() -> Self {
        Poly2::monomial(1, 0, q(1, 1))
    }

    pub fn var_y() -> Self {
        Poly2::monomial(0, 1, q(1, 1))
    }

    pub fn monomial(a: u32, b: u32, c: BigRational) -> Self {
        let mut p = Poly2::default();
        if !c.is_zero() {
            p.terms.insert((a, b), c);
        }
        p
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Poly2::zero();
        }
        Poly2 {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (*k, v * c))
                .collect(),
        }
    }

    pub fn dx(&self) -> Self {
        let mut out = Poly2::default();
        for (&(a, b), c) in &self.terms {
            if a > 0 {
                out.add_term(a - 1, b, c * BigRational::from(BigInt::from(a)));
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = Poly2::default();
        for (&(a, b), c) in &self.terms {
            if b > 0 {
                out.add_term(a, b - 1, c * BigRational::from(BigInt::from(b)));
            }
        }
        out
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|&(a, b)| (a + b) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), c)| {
                c.to_f64().expect("coefficient fits f64") * x.powi(a as i32) * y.powi(b as i32)
            })
            .sum()
    }

    /// Exact coefficient of x^a y^b.
    pub fn coeff(&self, a: u32, b: u32) -> BigRational {
        self.terms.get(&(a, b)).cloned().unwrap_or_else(BigRational::zero)
    }

    fn add_term(&mut self, a: u32, b: u32, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self
            .terms
            .entry((a, b))
            .or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&(a, b));
        }
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, o: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(a, b), c) in &o.terms {
            out.add_term(a, b, c.clone());
        }
        out
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, o: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (&(a, b), c) in &o.terms {
            out.add_term(a, b, -c.clone());
        }
        out
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, o: &Poly2) -> Poly2 {
        let mut out = Poly2::default();
        for (&(a1, b1), c1) in &self.terms {
            for (&(a2, b2), c2) in &o.terms {
                out.add_term(a1 + a2, b1 + b2, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        Poly2 {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (*k, -v.clone()))
                .collect(),
        }
    }
}

/// Builder for polynomial expressions in x and y with i64/i64 rational
/// constants: `expr(&[(coeff, xpow, ypow), ...])`.
pub fn expr(terms: &[(i64, i64, u32, u32)]) -> Poly2 {
    let mut p = Poly2::default();
    for &(num, den, a, b) in terms {
        p.add_term(a, b, q(num, den));
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        // p = x^2 y - 3/2 y
        let p = expr(&[(1, 1, 2, 1), (-3, 2, 0, 1)]);
        assert_eq!(p.total_degree(), 3);
        let px = p.dx(); // 2 x y
        assert_eq!(px.coeff(1, 1), q(2, 1));
        let py = p.dy(); // x^2 - 3/2
        assert_eq!(py.coeff(2, 0), q(1, 1));
        assert_eq!(py.coeff(0, 0), q(-3, 2));
        let v = p.eval(2.0, 0.5);
        assert!((v - (4.0 * 0.5 - 1.5 * 0.5)).abs() < 1e-15);
        // (x + y)^2 = x^2 + 2xy + y^2
        let s = &Poly2::var_x() + &Poly2::var_y();
        let sq = &s * &s;
        assert_eq!(sq.coeff(1, 1), q(2, 1));
    }
}
