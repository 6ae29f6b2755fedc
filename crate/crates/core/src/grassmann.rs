//! Real Grassmann algebra on `L` anticommuting generators.
//!
//! An element is stored as its full coefficient vector over the canonical
//! basis `θ_A = θ_{a1} θ_{a2} ... θ_{ak}` with `a1 < a2 < ... < ak`, where the
//! subset `A` is encoded as an `L`-bit mask (bit `i` is generator `i + 1`).
//! Mask `0` is the body. Products only visit nonzero coefficients, so sparse
//! elements stay cheap even though storage is dense.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

/// Hard upper bound on the number of generators.
pub const MAX_GENERATORS: usize = 12;

/// Z2 degree of an element, or `Nonhomogeneous` when both degrees occur.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Nonhomogeneous,
}

impl Parity {
    pub fn from_bit(bit: u32) -> Self {
        if bit & 1 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// 0 for even, 1 for odd, `None` for mixed elements.
    pub fn bit(self) -> Option<u32> {
        match self {
            Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Nonhomogeneous => None,
        }
    }

    /// Parity of a product of homogeneous factors.
    pub fn combine(self, other: Parity) -> Parity {
        match (self.bit(), other.bit()) {
            (Some(a), Some(b)) => Parity::from_bit(a ^ b),
            _ => Parity::Nonhomogeneous,
        }
    }
}

/// `(-1)^(a*b)` for parity bits.
#[inline]
pub fn koszul(a: u32, b: u32) -> f64 {
    if a & b & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Sign of `θ_A θ_B = sign · θ_{A∪B}` for disjoint masks: the parity of the
/// number of pairs `(i ∈ A, j ∈ B)` with `i > j`.
#[inline]
pub fn merge_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannElement {
    generators: usize,
    /// Inline up to three generators.
    coeffs: SmallVec<[f64; 8]>,
}

impl GrassmannElement {
    pub fn zero(generators: usize) -> Self {
        assert!(
            generators <= MAX_GENERATORS,
            "at most {MAX_GENERATORS} generators are supported"
        );
        Self {
            generators,
            coeffs: smallvec![0.0; 1 << generators],
        }
    }

    pub fn try_zero(generators: usize) -> Result<Self> {
        if generators > MAX_GENERATORS {
            return Err(Error::TooManyGenerators(generators));
        }
        Ok(Self::zero(generators))
    }

    pub fn scalar(generators: usize, value: f64) -> Self {
        let mut out = Self::zero(generators);
        out.coeffs[0] = value;
        out
    }

    pub fn one(generators: usize) -> Self {
        Self::scalar(generators, 1.0)
    }

    /// The generator `θ_{index+1}` (zero-based `index`).
    pub fn generator(generators: usize, index: usize) -> Self {
        assert!(index < generators, "generator {index} out of range");
        let mut out = Self::zero(generators);
        out.coeffs[1 << index] = 1.0;
        out
    }

    pub fn monomial(generators: usize, mask: u32, value: f64) -> Self {
        let mut out = Self::zero(generators);
        out.set(mask, value);
        out
    }

    /// Builds an element from `(mask, coefficient)` pairs; repeated masks add up.
    pub fn from_pairs(generators: usize, pairs: &[(u32, f64)]) -> Result<Self> {
        let mut out = Self::try_zero(generators)?;
        for &(mask, c) in pairs {
            if mask as usize >= out.coeffs.len() {
                return Err(Error::MaskOutOfRange { mask, generators });
            }
            out.coeffs[mask as usize] += c;
        }
        Ok(out)
    }

    /// Nonzero `(mask, coefficient)` pairs in increasing mask order.
    pub fn to_pairs(&self) -> Vec<(u32, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| (m as u32, *c))
            .collect()
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn from_coeffs(generators: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), 1 << generators);
        Self {
            generators,
            coeffs: SmallVec::from_vec(coeffs),
        }
    }

    pub fn from_slice(generators: usize, coeffs: &[f64]) -> Self {
        assert_eq!(coeffs.len(), 1 << generators);
        Self {
            generators,
            coeffs: SmallVec::from_slice(coeffs),
        }
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs.get(mask as usize).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, mask: u32, value: f64) {
        self.coeffs[mask as usize] = value;
    }

    pub fn body(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn soul(&self) -> Self {
        let mut s = self.clone();
        s.coeffs[0] = 0.0;
        s
    }

    pub fn body_soul(&self) -> (f64, Self) {
        (self.body(), self.soul())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Zero is reported even.
    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                if (mask as u32).count_ones() & 1 == 0 {
                    even = true;
                } else {
                    odd = true;
                }
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Nonhomogeneous,
        }
    }

    /// Largest coefficient sitting on a mask whose popcount parity differs from `parity`.
    pub fn parity_defect(&self, parity: Parity) -> f64 {
        let want = match parity.bit() {
            Some(b) => b,
            None => return 0.0,
        };
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(m, _)| (*m as u32).count_ones() & 1 != want)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Projection onto the even or odd part.
    pub fn part(&self, parity: Parity) -> Self {
        let Some(want) = parity.bit() else {
            return self.clone();
        };
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            if (m as u32).count_ones() & 1 != want {
                *c = 0.0;
            }
        }
        out
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        if self.generators != rhs.generators {
            return Err(Error::MismatchedGeneratorCount(
                self.generators,
                rhs.generators,
            ));
        }
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let mut out = Self::zero(self.generators);
        out.add_product(1.0, self, rhs);
        out
    }

    /// `self += factor * a * b` without a temporary.
    pub fn add_product(&mut self, factor: f64, a: &Self, b: &Self) {
        assert!(
            a.generators == self.generators && b.generators == self.generators,
            "generator count mismatch"
        );
        for (ma, &ca) in a.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            let ma = ma as u32;
            let fa = factor * ca;
            for (mb, &cb) in b.coeffs.iter().enumerate() {
                let mb = mb as u32;
                if cb == 0.0 || ma & mb != 0 {
                    continue;
                }
                self.coeffs[(ma | mb) as usize] += merge_sign(ma, mb) * fa * cb;
            }
        }
    }

    /// `self += factor * a * b * c`, grouped as `(a b) c`.
    pub fn add_triple_product(&mut self, factor: f64, a: &Self, b: &Self, c: &Self) {
        if a.is_zero() || b.is_zero() || c.is_zero() {
            return;
        }
        if a.generators == 0 {
            self.coeffs[0] += factor * a.coeffs[0] * b.coeffs[0] * c.coeffs[0];
            return;
        }
        let ab = a.mul_unchecked(b);
        self.add_product(factor, &ab, c);
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        if self.generators != rhs.generators {
            return Err(Error::MismatchedGeneratorCount(
                self.generators,
                rhs.generators,
            ));
        }
        let mut out = self.clone();
        out += rhs;
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            generators: self.generators,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        assert_eq!(self.generators, other.generators);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
    }

    pub fn pow(&self, exponent: u32) -> Self {
        let mut out = Self::one(self.generators);
        for _ in 0..exponent {
            out = out.mul_unchecked(self);
            if out.is_zero() {
                break;
            }
        }
        out
    }

    /// Inverse of an even element with nonzero body via the terminating
    /// Neumann series `(b + s)^-1 = b^-1 Σ_k (-s/b)^k`.
    pub fn invert(&self) -> Result<Self> {
        let body = self.body();
        if body == 0.0 {
            return Err(Error::ZeroBody);
        }
        if self.parity() != Parity::Even {
            return Err(Error::OddElement);
        }
        let x = self.soul().scale(-1.0 / body);
        let mut sum = Self::one(self.generators);
        let mut term = Self::one(self.generators);
        for _ in 0..self.generators {
            term = term.mul_unchecked(&x);
            if term.is_zero() {
                break;
            }
            sum += &term;
        }
        Ok(sum.scale(1.0 / body))
    }

    /// Evaluates `f(body + soul) = Σ_k f^(k)(body) soul^k / k!`, exact since
    /// the soul is nilpotent. `derivative(k, body)` must return `f^(k)(body)`.
    pub fn taylor(&self, derivative: impl Fn(usize, f64) -> f64) -> Self {
        let (b, s) = self.body_soul();
        let mut out = Self::scalar(self.generators, derivative(0, b));
        let mut power = Self::one(self.generators);
        let mut factorial = 1.0;
        for k in 1..=self.generators {
            power = power.mul_unchecked(&s);
            if power.is_zero() {
                break;
            }
            factorial *= k as f64;
            out.axpy(derivative(k, b) / factorial, &power);
        }
        out
    }

    /// Left derivative with respect to generator `index`: moves `θ_index` to
    /// the front of each monomial and strips it.
    pub fn left_derivative(&self, index: usize) -> Self {
        let bit = 1u32 << index;
        let below = bit - 1;
        let mut out = Self::zero(self.generators);
        for (m, &c) in self.coeffs.iter().enumerate() {
            let m = m as u32;
            if c != 0.0 && m & bit != 0 {
                let sign = if (m & below).count_ones() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                };
                out.coeffs[(m & !bit) as usize] += sign * c;
            }
        }
        out
    }

    /// Re-embeds into an algebra with more generators, keeping generator indices.
    pub fn extend(&self, generators: usize) -> Self {
        assert!(generators >= self.generators);
        let mut out = Self::zero(generators);
        out.coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.generators, other.generators);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.generators == other.generators && self.max_abs_diff(other) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Renders a mask as `t1^t3`.
pub fn mask_label(mask: u32) -> String {
    let mut parts = Vec::new();
    let mut rest = mask;
    while rest != 0 {
        let i = rest.trailing_zeros();
        parts.push(format!("t{}", i + 1));
        rest &= rest - 1;
    }
    parts.join("^")
}

/// Renders a mask as a bit string, generator 1 first.
pub fn mask_bits(mask: u32, generators: usize) -> String {
    (0..generators)
        .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

impl fmt::Display for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = self.to_pairs();
        if pairs.is_empty() {
            return write!(f, "0");
        }
        for (i, (mask, c)) in pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if *mask == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c}*{}", mask_label(*mask))?;
            }
        }
        Ok(())
    }
}

impl AddAssign<&GrassmannElement> for GrassmannElement {
    fn add_assign(&mut self, rhs: &GrassmannElement) {
        assert_eq!(self.generators, rhs.generators, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&GrassmannElement> for GrassmannElement {
    fn sub_assign(&mut self, rhs: &GrassmannElement) {
        assert_eq!(self.generators, rhs.generators, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Add for &GrassmannElement {
    type Output = GrassmannElement;
    fn add(self, rhs: &GrassmannElement) -> GrassmannElement {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &GrassmannElement {
    type Output = GrassmannElement;
    fn sub(self, rhs: &GrassmannElement) -> GrassmannElement {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &GrassmannElement {
    type Output = GrassmannElement;
    fn neg(self) -> GrassmannElement {
        self.scale(-1.0)
    }
}

impl Mul for &GrassmannElement {
    type Output = GrassmannElement;
    fn mul(self, rhs: &GrassmannElement) -> GrassmannElement {
        assert_eq!(self.generators, rhs.generators, "generator count mismatch");
        self.mul_unchecked(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th(l: usize, i: usize) -> GrassmannElement {
        GrassmannElement::generator(l, i)
    }

    #[test]
    fn generators_anticommute() {
        let a = &th(2, 0) * &th(2, 1);
        let b = &th(2, 1) * &th(2, 0);
        assert_eq!(a, GrassmannElement::monomial(2, 0b11, 1.0));
        assert_eq!(b, GrassmannElement::monomial(2, 0b11, -1.0));
    }

    #[test]
    fn odd_generator_squares_to_zero() {
        let x = &GrassmannElement::one(1) + &th(1, 0);
        let sq = &x * &x;
        assert_eq!(sq, GrassmannElement::from_pairs(1, &[(0, 1.0), (1, 2.0)]).unwrap());
    }

    #[test]
    fn nilpotency_truncates_top_degree() {
        let a = GrassmannElement::from_pairs(2, &[(0, 2.0), (3, 1.0)]).unwrap();
        let b = GrassmannElement::from_pairs(2, &[(0, 3.0), (3, -1.0)]).unwrap();
        let p = &a * &b;
        assert_eq!(p, GrassmannElement::from_pairs(2, &[(0, 6.0), (3, 1.0)]).unwrap());
    }

    #[test]
    fn mismatched_generator_count() {
        let a = GrassmannElement::one(1);
        let b = GrassmannElement::one(2);
        assert!(matches!(
            a.checked_mul(&b),
            Err(Error::MismatchedGeneratorCount(1, 2))
        ));
    }

    #[test]
    fn invert_examples() {
        let one = GrassmannElement::one(2);
        assert_eq!(one.invert().unwrap(), one);
        let a = GrassmannElement::from_pairs(2, &[(0, 2.0), (3, 1.0)]).unwrap();
        let inv = a.invert().unwrap();
        assert_eq!(inv, GrassmannElement::from_pairs(2, &[(0, 0.5), (3, -0.25)]).unwrap());
        assert!((&a * &inv).approx_eq(&one, 1e-15));
        assert!(matches!(th(2, 0).invert(), Err(Error::ZeroBody)));
        let mixed = &GrassmannElement::one(2) + &th(2, 0);
        assert!(matches!(mixed.invert(), Err(Error::OddElement)));
    }

    #[test]
    fn parity_examples() {
        assert_eq!(th(2, 0).parity(), Parity::Odd);
        let e = GrassmannElement::from_pairs(2, &[(0, 3.0), (3, 1.0)]).unwrap();
        assert_eq!(e.parity(), Parity::Even);
        let m = &GrassmannElement::one(2) + &th(2, 0);
        assert_eq!(m.parity(), Parity::Nonhomogeneous);
        assert_eq!(GrassmannElement::zero(3).parity(), Parity::Even);
    }

    #[test]
    fn body_soul_examples() {
        let e = GrassmannElement::from_pairs(2, &[(0, 2.0), (3, 1.0)]).unwrap();
        let (b, s) = e.body_soul();
        assert_eq!(b, 2.0);
        assert_eq!(s, GrassmannElement::monomial(2, 3, 1.0));
        let (b, s) = GrassmannElement::scalar(2, 5.0).body_soul();
        assert_eq!((b, s.is_zero()), (5.0, true));
        let (b, s) = th(2, 0).body_soul();
        assert_eq!((b, s), (0.0, th(2, 0)));
    }

    #[test]
    fn left_derivative_strips_with_sign() {
        let t12 = GrassmannElement::monomial(2, 0b11, 1.0);
        assert_eq!(t12.left_derivative(0), th(2, 1));
        assert_eq!(t12.left_derivative(1), th(2, 0).scale(-1.0));
    }

    #[test]
    fn taylor_of_exp_truncates() {
        let x = GrassmannElement::monomial(2, 3, 1.0);
        let e = x.taylor(|_, b| b.exp());
        assert_eq!(e, GrassmannElement::from_pairs(2, &[(0, 1.0), (3, 1.0)]).unwrap());
    }

    #[test]
    fn display_format() {
        let e = GrassmannElement::from_pairs(2, &[(0, 1.5), (1, 2.0), (3, -1.0)]).unwrap();
        assert_eq!(e.to_string(), "1.5 + 2*t1 + -1*t1^t2");
    }

    #[test]
    fn too_many_generators() {
        assert!(matches!(
            GrassmannElement::try_zero(13),
            Err(Error::TooManyGenerators(13))
        ));
    }
}
