//! Exact truncated power series.
//!
//! [`Series`] is a univariate series truncated at a fixed order, generic over
//! the coefficient ring so that counting code can stay in integers while
//! generating-function algebra uses rationals. [`SchemePoly`] is a z-series
//! whose coefficients are sparse polynomials in `x, x_1, ..., x_k`.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeriesError {
    #[error("exponent denominator must be 1 or 2, got {0}")]
    BadExponent(i64),
    #[error("series with zero constant term has no inverse")]
    NotInvertible,
    #[error("coefficient {0} is not an integer")]
    NotIntegral(String),
}

/// Coefficient ring for [`Series`].
pub trait Coeff:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
}

impl Coeff for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
}

impl Coeff for Rat {
    fn from_i64(v: i64) -> Self {
        Rat::from_integer(BigInt::from(v))
    }
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Power series truncated at order `N` (coefficients `0..=N`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Series<C> {
    coeffs: Vec<C>,
}

pub type TruncSeries = Series<Rat>;
pub type IntSeries = Series<BigInt>;

impl<C: Coeff> Series<C> {
    pub fn zero(order: usize) -> Self {
        Series { coeffs: vec![C::zero(); order + 1] }
    }

    pub fn one(order: usize) -> Self {
        Self::monomial(order, 0, C::one())
    }

    /// `c z^k`, or zero when `k` exceeds the order.
    pub fn monomial(order: usize, k: usize, c: C) -> Self {
        let mut s = Self::zero(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    /// Panics on an empty vector: a series always has order ≥ 0.
    pub fn from_coeffs(coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least one coefficient");
        Series { coeffs }
    }

    pub fn from_i64s(order: usize, values: &[i64]) -> Self {
        let mut s = Self::zero(order);
        for (i, v) in values.iter().enumerate().take(order + 1) {
            s.coeffs[i] = C::from_i64(*v);
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^n`; zero past the order.
    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C> {
        self.coeffs
    }

    pub fn set(&mut self, n: usize, c: C) {
        self.coeffs[n] = c;
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut s = Self::zero(order);
        for (i, c) in self.coeffs.iter().enumerate().take(order + 1) {
            s.coeffs[i] = c.clone();
        }
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Series { coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_order(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        Series { coeffs }
    }

    pub fn scale(&self, c: &C) -> Self {
        Series { coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check_order(other);
        let n = self.order();
        let mut out = vec![C::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=n - i].iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] = out[i + j].clone() + a.clone() * b.clone();
                }
            }
        }
        Series { coeffs: out }
    }

    pub fn pow(&self, m: u32) -> Self {
        let mut result = Self::one(self.order());
        let mut base = self.clone();
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Term-by-term derivative; the result has order `N - 1` (order 0 stays 0).
    pub fn derive(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        let coeffs = (1..self.coeffs.len())
            .map(|i| self.coeffs[i].clone() * C::from_i64(i as i64))
            .collect();
        Series { coeffs }
    }

    /// Multiply by `z^k`, keeping the order.
    pub fn shift_up(&self, k: usize) -> Self {
        let mut s = Self::zero(self.order());
        for i in 0..self.coeffs.len() {
            if i + k <= self.order() {
                s.coeffs[i + k] = self.coeffs[i].clone();
            }
        }
        s
    }

    /// Divide by `z^k`, dropping the low coefficients; the order shrinks by `k`.
    pub fn shift_down(&self, k: usize) -> Self {
        assert!(k <= self.order(), "shift exceeds order");
        Series { coeffs: self.coeffs[k..].to_vec() }
    }

    /// `z * a(z^p)` truncated at `order`.
    pub fn subst_power(&self, p: usize, order: usize) -> Self {
        assert!(p >= 1, "period must be positive");
        let mut s = Self::zero(order);
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = 1 + i * p;
            if e > order {
                break;
            }
            s.coeffs[e] = c.clone();
        }
        s
    }

    /// `a(z^p)` truncated at `order` (no extra factor `z`).
    pub fn stretch(&self, p: usize, order: usize) -> Self {
        assert!(p >= 1, "period must be positive");
        let mut s = Self::zero(order);
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = i * p;
            if e > order {
                break;
            }
            s.coeffs[e] = c.clone();
        }
        s
    }

    fn check_order(&self, other: &Self) {
        assert_eq!(self.order(), other.order(), "series order mismatch");
    }
}

impl TruncSeries {
    /// Expansion of `(1 - c z)^alpha` with `alpha = num / den`, `den` ∈ {1, 2}.
    pub fn binomial(num: i64, den: i64, c: &Rat, order: usize) -> Result<Self, SeriesError> {
        if den != 1 && den != 2 {
            return Err(SeriesError::BadExponent(den));
        }
        let alpha = rat(num, den);
        let mut s = Self::zero(order);
        let mut cur = Rat::one();
        for n in 0..=order {
            s.coeffs[n] = cur.clone();
            cur = cur * c * (rat_int(n as i64) - &alpha) / rat_int(n as i64 + 1);
        }
        Ok(s)
    }

    /// Multiplicative inverse; needs a nonzero constant term.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let a0 = &self.coeffs[0];
        if a0.is_zero() {
            return Err(SeriesError::NotInvertible);
        }
        let inv0 = a0.recip();
        let mut out = vec![Rat::zero(); self.coeffs.len()];
        out[0] = inv0.clone();
        for n in 1..self.coeffs.len() {
            let mut acc = Rat::zero();
            for k in 1..=n {
                if !self.coeffs[k].is_zero() {
                    acc += &self.coeffs[k] * &out[n - k];
                }
            }
            out[n] = -acc * &inv0;
        }
        Ok(Series { coeffs: out })
    }

    pub fn from_int(s: &IntSeries) -> Self {
        Series { coeffs: s.coeffs.iter().map(|c| Rat::from_integer(c.clone())).collect() }
    }

    /// Integer coefficients, failing on the first non-integral one.
    pub fn to_int(&self) -> Result<IntSeries, SeriesError> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                if c.is_integer() {
                    Ok(c.to_integer())
                } else {
                    Err(SeriesError::NotIntegral(c.to_string()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Series { coeffs })
    }

    pub fn to_f64s(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

impl IntSeries {
    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }
}

/// Sparse polynomial in `x, x_1, ..., x_k`. A monomial is its exponent
/// vector `[e_x, e_1, ..., e_k]`, always of length `k + 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly<C = Rat> {
    vars: usize,
    terms: BTreeMap<Vec<u16>, C>,
}

impl<C: Coeff> Poly<C> {
    pub fn zero(vars: usize) -> Self {
        Poly { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, c: C) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars + 1], c);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs.
    pub fn from_terms(vars: usize, terms: &[(&[u16], i64)]) -> Self {
        let mut p = Self::zero(vars);
        for (m, c) in terms {
            p.add_term(m.to_vec(), C::from_i64(*c));
        }
        p
    }

    /// Number of marked-vertex variables `k`.
    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u16>, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, monomial: &[u16]) -> C {
        self.terms.get(monomial).cloned().unwrap_or_else(C::zero)
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::zero(self.vars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    pub fn add_term(&mut self, monomial: Vec<u16>, c: C) {
        assert_eq!(monomial.len(), self.vars + 1, "monomial arity mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(monomial) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Poly<C>) {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add(&self, other: &Poly<C>) -> Poly<C> {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &Poly<C>) -> Poly<C> {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Poly<C>) -> Poly<C> {
        assert_eq!(self.vars, other.vars, "variable count mismatch");
        let mut out = Poly::zero(self.vars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let m = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                out.add_term(m, c1.clone() * c2.clone());
            }
        }
        out
    }

    /// Product where the marked variables of `other` are appended after
    /// those of `self`: `A(x, x_1..x_a) * B(x, x_{a+1}..x_{a+b})`.
    pub fn mul_concat(&self, other: &Poly<C>) -> Poly<C> {
        let mut out = Poly::zero(self.vars + other.vars);
        out.add_mul_concat(self, other, 0);
        out
    }

    /// Adds `x^shift * a.mul_concat(b)` in place.
    pub fn add_mul_concat(&mut self, a: &Poly<C>, b: &Poly<C>, shift: u16) {
        assert_eq!(self.vars, a.vars + b.vars, "variable count mismatch");
        for (m1, c1) in &a.terms {
            for (m2, c2) in &b.terms {
                let mut m = Vec::with_capacity(self.vars + 1);
                m.push(m1[0] + m2[0] + shift);
                m.extend_from_slice(&m1[1..]);
                m.extend_from_slice(&m2[1..]);
                self.add_term(m, c1.clone() * c2.clone());
            }
        }
    }

    /// Multiply by the monomial with exponent vector `monomial`.
    pub fn mul_monomial(&self, monomial: &[u16]) -> Poly<C> {
        assert_eq!(monomial.len(), self.vars + 1, "monomial arity mismatch");
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.iter().zip(monomial).map(|(a, b)| a + b).collect(), c.clone()))
            .collect();
        Poly { vars: self.vars, terms }
    }

    /// `(x A(x,...) - x_j A(x_j,...)) / (x - x_j)`, computed on monomials:
    /// `x^m` maps to `sum_{i<=m} x^i x_j^{m-i}`. When `j = k + 1` a new
    /// variable is appended; otherwise `A` must not involve `x_j`.
    pub fn divided_difference(&self, j: usize) -> Poly<C> {
        let mut out = Poly::zero(self.vars.max(j));
        out.add_divided_difference(self, j, 0, 0);
        out
    }

    /// Adds `x^sx x_j^sj * divided_difference(a, j)` in place.
    pub fn add_divided_difference(&mut self, a: &Poly<C>, j: usize, sx: u16, sj: u16) {
        assert!(j >= 1 && j <= a.vars + 1, "variable index out of range");
        assert_eq!(self.vars, a.vars.max(j), "variable count mismatch");
        for (m, c) in &a.terms {
            let mut base = m.clone();
            base.resize(self.vars + 1, 0);
            assert_eq!(base[j], 0, "polynomial already involves x_{j}");
            let deg = m[0];
            for i in 0..=deg {
                let mut mm = base.clone();
                mm[0] = i + sx;
                mm[j] = deg - i + sj;
                self.add_term(mm, c.clone());
            }
        }
    }

    /// Differentiate in `x_j`, set `x_j = x`, and renumber `x_i` to `x_{i-1}`
    /// for `i > j`.
    pub fn subst_chain(&self, j: usize) -> Poly<C> {
        let mut out = Poly::zero(self.vars - 1);
        out.add_subst_chain(self, j, 0, &C::one());
        out
    }

    /// Adds `factor * x^shift * subst_chain(a, j)` in place.
    pub fn add_subst_chain(&mut self, a: &Poly<C>, j: usize, shift: u16, factor: &C) {
        assert!(j >= 1 && j <= a.vars, "variable index out of range");
        assert_eq!(self.vars + 1, a.vars, "variable count mismatch");
        for (m, c) in &a.terms {
            let d = m[j];
            if d == 0 {
                continue;
            }
            let mut mm = Vec::with_capacity(a.vars);
            mm.push(m[0] + d - 1 + shift);
            mm.extend_from_slice(&m[1..j]);
            mm.extend_from_slice(&m[j + 1..]);
            self.add_term(mm, c.clone() * C::from_i64(d as i64) * factor.clone());
        }
    }

    /// Evaluate at `[x, x_1, ..., x_k]`.
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.vars + 1, "point arity mismatch");
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in point.iter().zip(m) {
                for _ in 0..*e {
                    t = t * v.clone();
                }
            }
            acc = acc + t;
        }
        acc
    }
}

/// z-series with [`Poly`] coefficients, all in the same variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemePoly<C = Rat> {
    var_count: usize,
    z_coeffs: Vec<Poly<C>>,
}

impl<C: Coeff> SchemePoly<C> {
    pub fn zero(var_count: usize, order: usize) -> Self {
        SchemePoly { var_count, z_coeffs: vec![Poly::zero(var_count); order + 1] }
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn order(&self) -> usize {
        self.z_coeffs.len() - 1
    }

    pub fn z_coeff(&self, e: usize) -> &Poly<C> {
        &self.z_coeffs[e]
    }

    pub fn set_z_coeff(&mut self, e: usize, p: Poly<C>) {
        assert_eq!(p.vars(), self.var_count, "variable count mismatch");
        self.z_coeffs[e] = p;
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> SchemePoly<D> {
        SchemePoly {
            var_count: self.var_count,
            z_coeffs: self.z_coeffs.iter().map(|p| p.map_coeffs(&f)).collect(),
        }
    }

    pub fn divided_difference(&self, j: usize) -> SchemePoly<C> {
        let z_coeffs = self.z_coeffs.iter().map(|p| p.divided_difference(j)).collect();
        SchemePoly { var_count: self.var_count.max(j), z_coeffs }
    }

    pub fn subst_chain(&self, j: usize) -> SchemePoly<C> {
        let z_coeffs = self.z_coeffs.iter().map(|p| p.subst_chain(j)).collect();
        SchemePoly { var_count: self.var_count - 1, z_coeffs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(s: &TruncSeries) -> Vec<i64> {
        s.coeffs().iter().map(|c| c.to_integer().to_i64().unwrap()).collect()
    }

    #[test]
    fn add_cancels() {
        let a = TruncSeries::from_i64s(3, &[1, 1]);
        let b = TruncSeries::from_i64s(3, &[1, -1]);
        assert_eq!(ints(&a.add(&b)), vec![2, 0, 0, 0]);
    }

    #[test]
    fn catalan_doubled() {
        let t = TruncSeries::from_i64s(4, &[0, 1, 1, 2, 5]);
        assert_eq!(t.add(&t).coeff(4), rat_int(10));
    }

    #[test]
    fn central_binomials_square_to_geometric() {
        let s = TruncSeries::binomial(-1, 2, &rat_int(4), 6).unwrap();
        assert_eq!(ints(&s)[..5], [1, 2, 6, 20, 70]);
        assert_eq!(ints(&s.pow(2)), vec![1, 4, 16, 64, 256, 1024, 4096]);
    }

    #[test]
    fn binomial_integer_exponents() {
        let g = TruncSeries::binomial(-1, 1, &rat_int(4), 4).unwrap();
        assert_eq!(ints(&g), vec![1, 4, 16, 64, 256]);
        let p = TruncSeries::binomial(1, 1, &rat_int(4), 3).unwrap();
        assert_eq!(ints(&p), vec![1, -4, 0, 0]);
        assert!(TruncSeries::binomial(1, 3, &rat_int(4), 3).is_err());
    }

    #[test]
    fn pow_zero_is_one() {
        let s = TruncSeries::from_i64s(3, &[2, 3, 4]);
        assert_eq!(s.pow(0), TruncSeries::one(3));
    }

    #[test]
    fn derivative_of_binary_trees() {
        let t = TruncSeries::from_i64s(4, &[0, 1, 1, 2, 5]);
        assert_eq!(ints(&t.derive()), vec![1, 2, 6, 20]);
    }

    #[test]
    fn subst_power_examples() {
        let y = TruncSeries::from_i64s(1, &[1, 1]);
        assert_eq!(ints(&y.subst_power(2, 3)), vec![0, 1, 0, 1]);
        let y4 = TruncSeries::from_i64s(3, &[1, 1, 3, 12]);
        assert_eq!(ints(&y4.subst_power(2, 7)), vec![0, 1, 0, 1, 0, 3, 0, 12]);
        assert_eq!(ints(&y.subst_power(1, 2)), vec![0, 1, 1]);
    }

    #[test]
    fn inverse_roundtrip() {
        let s = TruncSeries::binomial(-1, 2, &rat_int(4), 8).unwrap();
        assert_eq!(s.mul(&s.inverse().unwrap()), TruncSeries::one(8));
        assert_eq!(TruncSeries::from_i64s(2, &[0, 1]).inverse(), Err(SeriesError::NotInvertible));
    }

    #[test]
    fn divided_difference_monomial_rule() {
        let a: Poly = Poly::from_terms(0, &[(&[2], 1)]);
        let expect = Poly::from_terms(1, &[(&[2, 0], 1), (&[1, 1], 1), (&[0, 2], 1)]);
        assert_eq!(a.divided_difference(1), expect);
        assert_eq!(Poly::constant(0, Rat::one()).divided_difference(1), Poly::constant(1, Rat::one()));
        let cube: Poly = Poly::from_terms(0, &[(&[3], 1)]);
        let expect = Poly::from_terms(1, &[(&[3, 0], 1), (&[2, 1], 1), (&[1, 2], 1), (&[0, 3], 1)]);
        assert_eq!(cube.divided_difference(1), expect);
    }

    #[test]
    fn divided_difference_times_denominator() {
        let a: Poly = Poly::from_terms(1, &[(&[3, 1], 2), (&[0, 2], -1), (&[1, 0], 5)]);
        let dd = a.divided_difference(2);
        // (x - x_2) * dd == x A(x, x_1) - x_2 A(x_2, x_1)
        let lhs = dd.mul(&Poly::from_terms(2, &[(&[1, 0, 0], 1), (&[0, 0, 1], -1)]));
        let mut rhs = Poly::zero(2);
        for (m, c) in a.terms() {
            rhs.add_term(vec![m[0] + 1, m[1], 0], c.clone());
            rhs.add_term(vec![0, m[1], m[0] + 1], -c.clone());
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn subst_chain_examples() {
        let a: Poly = Poly::from_terms(1, &[(&[0, 2], 1)]);
        assert_eq!(a.subst_chain(1), Poly::from_terms(0, &[(&[1], 2)]));
        let b: Poly = Poly::from_terms(2, &[(&[1, 1, 1], 1)]);
        assert_eq!(b.subst_chain(1), Poly::from_terms(1, &[(&[1, 1], 1)]));
    }

    #[test]
    fn integer_series_roundtrip() {
        let s = TruncSeries::from_i64s(3, &[1, 2, 3, 4]);
        assert_eq!(TruncSeries::from_int(&s.to_int().unwrap()), s);
        let h = TruncSeries::from_coeffs(vec![rat(1, 2)]);
        assert!(h.to_int().is_err());
    }
}
