//! Exact rational functions in one variable `t`, where `t^2 = eps`.
//!
//! Values are kept as `num/den` with `num, den ∈ Z[t]`, coprime, and the
//! leading coefficient of `den` positive. Equality is structural on that
//! reduced form.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::Error;

/// Dense polynomial over Z, coefficients in ascending order, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(Vec<BigInt>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut p = Poly(vec![c]);
        p.trim();
        p
    }

    pub fn monomial(c: BigInt, k: usize) -> Self {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigInt::zero(); k + 1];
        v[k] = c;
        Poly(v)
    }

    pub fn from_coeffs(coeffs: Vec<BigInt>) -> Self {
        let mut p = Poly(coeffs);
        p.trim();
        p
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.0
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    /// Lowest power with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.0.iter().position(|c| !c.is_zero())
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.0.last()
    }

    fn is_monomial(&self) -> bool {
        self.0.iter().filter(|c| !c.is_zero()).count() == 1
    }

    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.0 {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn scale_div(&self, d: &BigInt) -> Poly {
        Poly(self.0.iter().map(|c| c / d).collect())
    }

    fn scale(&self, s: &BigInt) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    fn shift_down(&self, k: usize) -> Poly {
        Poly(self.0[k..].to_vec())
    }

    /// Primitive part with positive leading coefficient.
    fn primitive(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut g = self.content();
        if self.leading().unwrap().is_negative() {
            g = -g;
        }
        self.scale_div(&g)
    }

    fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.0.get(i);
            let b = o.0.get(i);
            v.push(match (a, b) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        Poly::from_coeffs(v)
    }

    fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigInt::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                if !b.is_zero() {
                    v[i + j] += a * b;
                }
            }
        }
        Poly::from_coeffs(v)
    }

    /// Pseudo-remainder of `self` by `b`: lc(b)^(deg a - deg b + 1) * a mod b.
    fn pseudo_rem(&self, b: &Poly) -> Poly {
        let db = b.degree().expect("division by zero polynomial");
        let lb = b.leading().unwrap().clone();
        let mut r = self.clone();
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            let lr = r.leading().unwrap().clone();
            let shift = dr - db;
            let mut next = r.scale(&lb);
            for (i, c) in b.0.iter().enumerate() {
                next.0[i + shift] -= &lr * c;
            }
            next.trim();
            r = next;
        }
        r
    }

    /// Exact quotient when `d` divides `self` over Z.
    fn exact_div(&self, d: &Poly) -> Poly {
        let dd = d.degree().expect("division by zero polynomial");
        let ld = d.leading().unwrap();
        let mut r = self.clone();
        let Some(dr) = r.degree() else {
            return Poly::zero();
        };
        let mut q = vec![BigInt::zero(); dr + 1 - dd.min(dr + 1)];
        while let Some(dr) = r.degree() {
            if dr < dd {
                break;
            }
            let (c, rem) = r.leading().unwrap().div_rem(ld);
            debug_assert!(rem.is_zero());
            let shift = dr - dd;
            for (i, dc) in d.0.iter().enumerate() {
                r.0[i + shift] -= &c * dc;
            }
            q[shift] = c;
            r.trim();
        }
        debug_assert!(r.is_zero());
        Poly::from_coeffs(q)
    }

    fn gcd_primitive(&self, o: &Poly) -> Poly {
        let mut a = self.primitive();
        let mut b = o.primitive();
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = r.primitive();
        }
        a
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + BigRational::from_integer(c.clone());
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.0.iter().rev() {
            acc = acc * x + bigint_to_f64(c);
        }
        acc
    }

    fn render(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if s.is_empty() {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let body = match k {
                0 => a.to_string(),
                _ => {
                    let pw = if k == 1 { "t".to_string() } else { format!("t^{k}") };
                    if a.is_one() {
                        pw
                    } else {
                        format!("{a}*{pw}")
                    }
                }
            };
            s.push_str(&body);
        }
        s
    }
}

fn bigint_to_f64(c: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    c.to_f64().unwrap_or(f64::NAN)
}

/// Limit of an exact scalar as `t -> 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Limit {
    Finite(BigRational),
    Diverges { pole_order: usize },
}

/// Rational function in `t` with integer coefficients, always reduced.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    num: Poly,
    den: Poly,
}

impl Default for ExactScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl ExactScalar {
    pub fn zero() -> Self {
        ExactScalar { num: Poly::zero(), den: Poly::constant(BigInt::one()) }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(k: i64) -> Self {
        ExactScalar { num: Poly::constant(BigInt::from(k)), den: Poly::constant(BigInt::one()) }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Self::from_parts(Poly::constant(r.numer().clone()), Poly::constant(r.denom().clone()))
            .expect("rational denominators are nonzero")
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::from_rational(&BigRational::new(n.into(), d.into()))
    }

    /// The variable `t`.
    pub fn t() -> Self {
        Self::t_pow(1)
    }

    /// `t^k` for any integer `k`.
    pub fn t_pow(k: i32) -> Self {
        let one = BigInt::one();
        if k >= 0 {
            ExactScalar { num: Poly::monomial(one.clone(), k as usize), den: Poly::constant(one) }
        } else {
            ExactScalar { num: Poly::constant(one.clone()), den: Poly::monomial(one, (-k) as usize) }
        }
    }

    /// `eps = t^2`.
    pub fn eps() -> Self {
        Self::t_pow(2)
    }

    /// Builds `num/den` and reduces it.
    pub fn from_parts(num: Poly, den: Poly) -> Result<Self, Error> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(num, den))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn reduce(mut num: Poly, mut den: Poly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        // strip common powers of t
        let k = num.valuation().unwrap().min(den.valuation().unwrap());
        if k > 0 {
            num = num.shift_down(k);
            den = den.shift_down(k);
        }
        if !den.is_monomial() {
            let g = num.gcd_primitive(&den);
            if g.degree().unwrap_or(0) > 0 {
                num = num.exact_div(&g);
                den = den.exact_div(&g);
            }
        }
        let mut c = num.content().gcd(&den.content());
        if den.leading().unwrap().is_negative() {
            c = -c;
        }
        if !c.is_one() {
            num = num.scale_div(&c);
            den = den.scale_div(&c);
        }
        ExactScalar { num, den }
    }

    pub fn checked_div(&self, o: &ExactScalar) -> Result<ExactScalar, Error> {
        if o.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduce(self.num.mul(&o.den), self.den.mul(&o.num)))
    }

    pub fn recip(&self) -> Result<ExactScalar, Error> {
        Self::one().checked_div(self)
    }

    pub fn pow(&self, k: i32) -> Result<ExactScalar, Error> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut acc = Self::one();
        for _ in 0..k.unsigned_abs() {
            acc = &acc * &base;
        }
        Ok(acc)
    }

    /// Order of vanishing at `t = 0` (negative for a pole); `None` for zero.
    pub fn order_at_zero(&self) -> Option<i64> {
        let vn = self.num.valuation()? as i64;
        Some(vn - self.den.valuation().unwrap() as i64)
    }

    pub fn limit_at_zero(&self) -> Limit {
        match self.order_at_zero() {
            None => Limit::Finite(BigRational::zero()),
            Some(o) if o < 0 => Limit::Diverges { pole_order: (-o) as usize },
            Some(0) => {
                let vn = self.num.valuation().unwrap();
                let vd = self.den.valuation().unwrap();
                Limit::Finite(BigRational::new(self.num.0[vn].clone(), self.den.0[vd].clone()))
            }
            Some(_) => Limit::Finite(BigRational::zero()),
        }
    }

    pub fn evaluate(&self, t0: &BigRational) -> Result<BigRational, Error> {
        let d = self.den.eval_rational(t0);
        if d.is_zero() {
            return Err(Error::Pole(t0.to_string()));
        }
        Ok(self.num.eval_rational(t0) / d)
    }

    pub fn evaluate_f64(&self, t0: f64) -> f64 {
        self.num.eval_f64(t0) / self.den.eval_f64(t0)
    }

    /// The constant value when this scalar does not depend on `t`.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.num.degree().unwrap_or(0) == 0 && self.den.degree() == Some(0) {
            let n = self.num.0.first().cloned().unwrap_or_default();
            return Some(BigRational::new(n, self.den.0[0].clone()));
        }
        None
    }

    /// True when only even powers of `t` occur, i.e. the value is a function of `eps`.
    pub fn is_even_in_t(&self) -> bool {
        let even = |p: &Poly| p.0.iter().enumerate().all(|(k, c)| k % 2 == 0 || c.is_zero());
        even(&self.num) && even(&self.den)
    }

    pub fn sign_at(&self, t0: &BigRational) -> Result<Ordering, Error> {
        Ok(self.evaluate(t0)?.cmp(&BigRational::zero()))
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})/({})", self.num.render(), self.den.render())
    }
}

impl From<i64> for ExactScalar {
    fn from(k: i64) -> Self {
        Self::from_int(k)
    }
}

impl From<BigRational> for ExactScalar {
    fn from(r: BigRational) -> Self {
        Self::from_rational(&r)
    }
}

impl<'a> Add<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn add(self, o: &ExactScalar) -> ExactScalar {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return ExactScalar::reduce(self.num.add(&o.num), self.den.clone());
        }
        ExactScalar::reduce(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }
}

impl<'a> Sub<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn sub(self, o: &ExactScalar) -> ExactScalar {
        self + &(-o)
    }
}

impl<'a> Mul<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn mul(self, o: &ExactScalar) -> ExactScalar {
        if self.is_zero() || o.is_zero() {
            return ExactScalar::zero();
        }
        ExactScalar::reduce(self.num.mul(&o.num), self.den.mul(&o.den))
    }
}

impl<'a> Div<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    /// Panics on division by zero; use [`ExactScalar::checked_div`] otherwise.
    fn div(self, o: &ExactScalar) -> ExactScalar {
        self.checked_div(o).expect("division by zero")
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar { num: self.num.neg(), den: self.den.clone() }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        -&self
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr<ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, o: ExactScalar) -> ExactScalar {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, o: &ExactScalar) -> ExactScalar {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $m(self, o: ExactScalar) -> ExactScalar {
                self.$m(&o)
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&ExactScalar> for ExactScalar {
    fn add_assign(&mut self, o: &ExactScalar) {
        *self = &*self + o;
    }
}

impl SubAssign<&ExactScalar> for ExactScalar {
    fn sub_assign(&mut self, o: &ExactScalar) {
        *self = &*self - o;
    }
}

impl MulAssign<&ExactScalar> for ExactScalar {
    fn mul_assign(&mut self, o: &ExactScalar) {
        *self = &*self * o;
    }
}

impl std::iter::Sum for ExactScalar {
    fn sum<I: Iterator<Item = ExactScalar>>(iter: I) -> Self {
        let mut acc = ExactScalar::zero();
        for x in iter {
            acc += &x;
        }
        acc
    }
}
