//! The exact coefficient field Q(t), with kappa = t^2.
//!
//! Every conformal-weight and operator coefficient in the crate lives here:
//! c(kappa), h_{1,2}(kappa), the Coulomb-gas charges alpha_{n,m} and so on
//! all embed into Q(t) once one sets kappa = t^2 (so that sqrt(kappa) = t is
//! itself a field element). Elements are kept normalized: numerator and
//! denominator are integer polynomials with gcd 1 (including content) and the
//! denominator has a positive leading coefficient, so equality is structural.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Dense univariate integer polynomial, coefficient of t^i at index i.
/// Invariant: no trailing zero coefficients (zero polynomial = empty vec).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntPoly {
    coeffs: Vec<BigInt>,
}

impl IntPoly {
    pub fn zero() -> Self {
        IntPoly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        IntPoly::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Self {
        let mut p = IntPoly { coeffs: vec![c] };
        p.trim();
        p
    }

    pub fn from_coeffs(coeffs: Vec<BigInt>) -> Self {
        let mut p = IntPoly { coeffs };
        p.trim();
        p
    }

    pub fn from_i64s(coeffs: &[i64]) -> Self {
        IntPoly::from_coeffs(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// The monomial t^n.
    pub fn t_pow(n: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        IntPoly { coeffs }
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Degree, or None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    pub fn add(&self, other: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![BigInt::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            coeffs[i] += c;
        }
        IntPoly::from_coeffs(coeffs)
    }

    pub fn sub(&self, other: &IntPoly) -> IntPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn mul(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() || other.is_zero() {
            return IntPoly::zero();
        }
        let mut coeffs = vec![BigInt::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        IntPoly::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &BigInt) -> IntPoly {
        if c.is_zero() {
            return IntPoly::zero();
        }
        IntPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// gcd of all coefficients, with the sign of the leading coefficient.
    /// Returns 1 for the zero polynomial (so division by content is safe).
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = gcd_bigint(&g, c);
            if g.is_one() {
                break;
            }
        }
        if g.is_zero() {
            return BigInt::one();
        }
        if let Some(l) = self.leading() {
            if l.is_negative() {
                g = -g;
            }
        }
        g
    }

    /// Exact division by a constant; panics if not exact (internal use after content/gcd).
    fn div_const_exact(&self, c: &BigInt) -> IntPoly {
        IntPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|a| {
                    let (q, r) = num_integer::Integer::div_rem(a, c);
                    debug_assert!(r.is_zero(), "non-exact constant division");
                    q
                })
                .collect(),
        }
    }

    /// Pseudo-remainder of self by other (other nonzero).
    fn pseudo_rem(&self, other: &IntPoly) -> IntPoly {
        let d = other.degree().expect("pseudo_rem by zero");
        let lc = other.leading().unwrap().clone();
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < d {
                break;
            }
            // r <- lc * r - lead(r) * t^(rd-d) * other
            let lead_r = r.leading().unwrap().clone();
            let mut shifted = vec![BigInt::zero(); rd - d];
            shifted.extend(other.coeffs.iter().map(|c| c * &lead_r));
            let shifted = IntPoly::from_coeffs(shifted);
            r = r.scale(&lc).sub(&shifted);
            if r.degree() == Some(rd) {
                // should not happen; guard against non-termination
                unreachable!("pseudo-division failed to reduce degree");
            }
        }
        r
    }

    /// Primitive-PRS gcd over Z[t]; result is primitive with positive leading coefficient,
    /// scaled by the gcd of the contents.
    pub fn gcd(&self, other: &IntPoly) -> IntPoly {
        if self.is_zero() {
            let c = other.content();
            return other.div_const_exact(&c).scale(&c.abs());
        }
        if other.is_zero() {
            let c = self.content();
            return self.div_const_exact(&c).scale(&c.abs());
        }
        let ca = self.content();
        let cb = other.content();
        let cg = gcd_bigint(&ca, &cb).abs();
        let mut a = self.div_const_exact(&ca);
        let mut b = other.div_const_exact(&cb);
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b);
            a = b;
            b = if r.is_zero() {
                IntPoly::zero()
            } else {
                let c = r.content();
                r.div_const_exact(&c)
            };
        }
        let c = a.content();
        a.div_const_exact(&c).scale(&cg)
    }

    /// Exact polynomial division; returns None if not divisible.
    pub fn div_exact(&self, other: &IntPoly) -> Option<IntPoly> {
        if self.is_zero() {
            return Some(IntPoly::zero());
        }
        let d = other.degree()?;
        let lc = other.leading().unwrap();
        let mut rem = self.clone();
        let n = self.degree()?;
        if n < d {
            return None;
        }
        let mut q = vec![BigInt::zero(); n - d + 1];
        while let Some(rd) = rem.degree() {
            if rd < d {
                return None;
            }
            let lead_r = rem.leading().unwrap();
            let (qc, rr) = num_integer::Integer::div_rem(lead_r, lc);
            if !rr.is_zero() {
                return None;
            }
            q[rd - d] = qc.clone();
            let mut shifted = vec![BigInt::zero(); rd - d];
            shifted.extend(other.coeffs.iter().map(|c| c * &qc));
            rem = rem.sub(&IntPoly::from_coeffs(shifted));
        }
        Some(IntPoly::from_coeffs(q))
    }

    /// Split P(t) = E(t^2) + t * O(t^2).
    pub fn even_odd_parts(&self) -> (IntPoly, IntPoly) {
        let mut even = vec![];
        let mut odd = vec![];
        for (i, c) in self.coeffs.iter().enumerate() {
            if i % 2 == 0 {
                even.push(c.clone());
            } else {
                odd.push(c.clone());
            }
        }
        (IntPoly::from_coeffs(even), IntPoly::from_coeffs(odd))
    }

    pub fn eval_rational(&self, t0: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t0 + BigRational::from_integer(c.clone());
        }
        acc
    }

    pub fn eval_f64(&self, t0: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * t0 + bigint_to_f64(c);
        }
        acc
    }
}

fn gcd_bigint(a: &BigInt, b: &BigInt) -> BigInt {
    num_integer::Integer::gcd(a, b)
}

fn bigint_to_f64(x: &BigInt) -> f64 {
    // BigInt -> f64 via string is exact enough for our numeric companions;
    // num provides a direct conversion.
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if first {
                first = false;
                if i == 0 {
                    write!(f, "{}", c)?;
                } else if c.is_one() {
                    write!(f, "t^{}", i)?;
                } else if *c == -BigInt::one() {
                    write!(f, "-t^{}", i)?;
                } else {
                    write!(f, "{}*t^{}", c, i)?;
                }
            } else {
                let (sign, mag) = if c.is_negative() {
                    ("-", -c)
                } else {
                    ("+", c.clone())
                };
                if i == 0 {
                    write!(f, " {} {}", sign, mag)?;
                } else if mag.is_one() {
                    write!(f, " {} t^{}", sign, i)?;
                } else {
                    write!(f, " {} {}*t^{}", sign, mag, i)?;
                }
            }
        }
        Ok(())
    }
}

/// An element of Q(t). See module docs for the normalization invariants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarK {
    num: IntPoly,
    den: IntPoly,
}

impl ScalarK {
    fn normalized(num: IntPoly, den: IntPoly) -> Result<ScalarK> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(ScalarK {
                num: IntPoly::zero(),
                den: IntPoly::one(),
            });
        }
        let g = num.gcd(&den);
        let mut num = num.div_exact(&g).expect("gcd divides");
        let mut den = den.div_exact(&g).expect("gcd divides");
        if den.leading().map(|l| l.is_negative()).unwrap_or(false) {
            num = num.neg();
            den = den.neg();
        }
        Ok(ScalarK { num, den })
    }

    pub fn from_parts(num: IntPoly, den: IntPoly) -> Result<ScalarK> {
        ScalarK::normalized(num, den)
    }

    pub fn zero() -> ScalarK {
        ScalarK {
            num: IntPoly::zero(),
            den: IntPoly::one(),
        }
    }

    pub fn one() -> ScalarK {
        ScalarK {
            num: IntPoly::one(),
            den: IntPoly::one(),
        }
    }

    pub fn from_int(n: i64) -> ScalarK {
        ScalarK {
            num: IntPoly::from_i64s(&[n]),
            den: IntPoly::one(),
        }
    }

    pub fn from_ratio(n: i64, d: i64) -> ScalarK {
        assert!(d != 0);
        ScalarK::normalized(IntPoly::from_i64s(&[n]), IntPoly::from_i64s(&[d])).unwrap()
    }

    pub fn from_bigrational(r: &BigRational) -> ScalarK {
        ScalarK::normalized(
            IntPoly::constant(r.numer().clone()),
            IntPoly::constant(r.denom().clone()),
        )
        .unwrap()
    }

    /// The generator t = sqrt(kappa).
    pub fn t() -> ScalarK {
        ScalarK {
            num: IntPoly::t_pow(1),
            den: IntPoly::one(),
        }
    }

    /// kappa = t^2.
    pub fn kappa() -> ScalarK {
        ScalarK {
            num: IntPoly::t_pow(2),
            den: IntPoly::one(),
        }
    }

    pub fn num(&self) -> &IntPoly {
        &self.num
    }

    pub fn den(&self) -> &IntPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn add_ref(&self, other: &ScalarK) -> ScalarK {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        ScalarK::normalized(num, den).expect("nonzero denominators")
    }

    pub fn sub_ref(&self, other: &ScalarK) -> ScalarK {
        self.add_ref(&other.neg_ref())
    }

    pub fn mul_ref(&self, other: &ScalarK) -> ScalarK {
        ScalarK::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("nonzero denominators")
    }

    pub fn div_ref(&self, other: &ScalarK) -> Result<ScalarK> {
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        ScalarK::normalized(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn neg_ref(&self) -> ScalarK {
        ScalarK {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn inv(&self) -> Result<ScalarK> {
        ScalarK::one().div_ref(self)
    }

    pub fn pow(&self, n: i64) -> Result<ScalarK> {
        if n == 0 {
            return Ok(ScalarK::one());
        }
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let mut acc = ScalarK::one();
        for _ in 0..n.unsigned_abs() {
            acc = acc.mul_ref(&base);
        }
        Ok(acc)
    }

    pub fn scale_i64(&self, k: i64) -> ScalarK {
        self.mul_ref(&ScalarK::from_int(k))
    }

    /// If the value is a constant integer, return it.
    pub fn as_integer(&self) -> Option<BigInt> {
        if self.is_zero() {
            return Some(BigInt::zero());
        }
        if self.den.is_one() && self.num.degree() == Some(0) {
            return Some(self.num.coeffs()[0].clone());
        }
        None
    }

    /// Exact specialization at a rational t0; errors at poles.
    pub fn eval(&self, t0: &BigRational) -> Result<BigRational> {
        let d = self.den.eval_rational(t0);
        if d.is_zero() {
            return Err(Error::PoleAtSpecialization(t0.to_string()));
        }
        Ok(self.num.eval_rational(t0) / d)
    }

    /// Exact specialization at a rational kappa = t^2. Defined for values that
    /// are rational functions of kappa (no odd-in-t part after rationalizing
    /// the denominator); errors on genuinely odd values or poles.
    pub fn eval_at_kappa(&self, k0: &BigRational) -> Result<BigRational> {
        // rationalize: (E1 + t O1)/(E2 + t O2) * (E2 - t O2)/(E2 - t O2)
        let (e1, o1) = self.num.even_odd_parts();
        let (e2, o2) = self.den.even_odd_parts();
        // with u = t^2: den -> E2(u)^2 - u O2(u)^2
        // num even part: E1 E2 - u O1 O2 ; num odd part: O1 E2 - E1 O2
        let odd = o1.mul(&e2).sub(&e1.mul(&o2));
        if !odd.is_zero() {
            return Err(Error::Unsupported(format!(
                "{} is not a rational function of kappa",
                self
            )));
        }
        let e1e2 = e1.mul(&e2);
        let uo1o2 = o1.mul(&o2);
        let den_even = e2.mul(&e2);
        let uo2sq = o2.mul(&o2);
        let num_val = e1e2.eval_rational(k0) - k0 * uo1o2.eval_rational(k0);
        let den_val = den_even.eval_rational(k0) - k0 * uo2sq.eval_rational(k0);
        if den_val.is_zero() {
            return Err(Error::PoleAtSpecialization(format!("kappa = {k0}")));
        }
        Ok(num_val / den_val)
    }

    /// Like `eval_at_kappa` but repackaged as a constant ScalarK.
    pub fn specialize_kappa(&self, k0: &BigRational) -> Result<ScalarK> {
        Ok(ScalarK::from_bigrational(&self.eval_at_kappa(k0)?))
    }

    /// Constant value as a rational, if the element is constant.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.den.degree() == Some(0) && self.num.degree() == Some(0) {
            return Some(BigRational::new(
                self.num.coeffs()[0].clone(),
                self.den.coeffs()[0].clone(),
            ));
        }
        None
    }

    /// Floating specialization at a real t0; errors at (numerically detected) poles.
    pub fn eval_f64(&self, t0: f64) -> Result<f64> {
        let d = self.den.eval_f64(t0);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::PoleAtSpecialization(format!("{t0}")));
        }
        Ok(self.num.eval_f64(t0) / d)
    }
}

impl Add for ScalarK {
    type Output = ScalarK;
    fn add(self, rhs: ScalarK) -> ScalarK {
        self.add_ref(&rhs)
    }
}

impl Sub for ScalarK {
    type Output = ScalarK;
    fn sub(self, rhs: ScalarK) -> ScalarK {
        self.sub_ref(&rhs)
    }
}

impl Mul for ScalarK {
    type Output = ScalarK;
    fn mul(self, rhs: ScalarK) -> ScalarK {
        self.mul_ref(&rhs)
    }
}

impl Div for ScalarK {
    type Output = ScalarK;
    fn div(self, rhs: ScalarK) -> ScalarK {
        self.div_ref(&rhs).expect("division by zero")
    }
}

impl Neg for ScalarK {
    type Output = ScalarK;
    fn neg(self) -> ScalarK {
        self.neg_ref()
    }
}

impl fmt::Display for ScalarK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

/// Serialized form: numerator/denominator coefficient arrays (decimal strings
/// by ascending degree in t, exact for arbitrary-precision integers).
#[derive(Serialize, Deserialize)]
struct ScalarKRepr {
    num: Vec<String>,
    den: Vec<String>,
}

impl Serialize for ScalarK {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = ScalarKRepr {
            num: self.num.coeffs().iter().map(|c| c.to_string()).collect(),
            den: self.den.coeffs().iter().map(|c| c.to_string()).collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScalarK {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = ScalarKRepr::deserialize(d)?;
        let parse = |v: &[String]| -> std::result::Result<IntPoly, D::Error> {
            let mut coeffs = Vec::with_capacity(v.len());
            for s in v {
                coeffs.push(s.parse::<BigInt>().map_err(DeError::custom)?);
            }
            Ok(IntPoly::from_coeffs(coeffs))
        };
        ScalarK::from_parts(parse(&repr.num)?, parse(&repr.den)?).map_err(DeError::custom)
    }
}

/// Standard quantities of the theory, as exact elements of Q(t) with kappa = t^2.
pub mod consts {
    use super::*;

    /// c(kappa) = (6 - kappa)(3 kappa - 8) / (2 kappa).
    pub fn central_charge() -> ScalarK {
        let k = ScalarK::kappa();
        let six = ScalarK::from_int(6);
        let num = (six.clone() - k.clone()) * (k.clone().scale_i64(3) - ScalarK::from_int(8));
        num.div_ref(&k.scale_i64(2)).unwrap()
    }

    /// h_{1,2}(kappa) = (6 - kappa) / (2 kappa), the one-leg boundary weight.
    pub fn h_one_leg() -> ScalarK {
        let k = ScalarK::kappa();
        (ScalarK::from_int(6) - k.clone())
            .div_ref(&k.scale_i64(2))
            .unwrap()
    }

    /// Weight (6 - kappa_i)/(2 kappa_i) for a curve with given kappa_i.
    pub fn h_for_kappa(kappa_i: &ScalarK) -> ScalarK {
        (ScalarK::from_int(6) - kappa_i.clone())
            .div_ref(&kappa_i.clone().scale_i64(2))
            .unwrap()
    }

    /// kappa* = 16/kappa, the dual parameter.
    pub fn kappa_dual() -> ScalarK {
        ScalarK::from_int(16).div_ref(&ScalarK::kappa()).unwrap()
    }

    /// alpha_+ = sqrt(kappa)/2 = t/2.
    pub fn alpha_plus() -> ScalarK {
        ScalarK::t().mul_ref(&ScalarK::from_ratio(1, 2))
    }

    /// alpha_- = -2/sqrt(kappa) = -2/t.
    pub fn alpha_minus() -> ScalarK {
        ScalarK::from_int(-2).div_ref(&ScalarK::t()).unwrap()
    }

    /// alpha_0 = (alpha_+ + alpha_-)/2.
    pub fn alpha_zero() -> ScalarK {
        (alpha_plus() + alpha_minus()).mul_ref(&ScalarK::from_ratio(1, 2))
    }

    /// alpha_{n,m} = (1-n)/2 alpha_+ + (1-m)/2 alpha_-.
    pub fn alpha_nm(n: i64, m: i64) -> ScalarK {
        alpha_plus().scale_i64(1 - n).mul_ref(&ScalarK::from_ratio(1, 2))
            + alpha_minus().scale_i64(1 - m).mul_ref(&ScalarK::from_ratio(1, 2))
    }

    /// h(alpha) = alpha^2 - 2 alpha_0 alpha.
    pub fn h_of_alpha(alpha: &ScalarK) -> ScalarK {
        alpha.mul_ref(alpha) - alpha_zero().scale_i64(2).mul_ref(alpha)
    }

    /// Fock central charge 1 - 24 alpha_0^2.
    pub fn fock_central_charge() -> ScalarK {
        ScalarK::one() - alpha_zero().mul_ref(&alpha_zero()).scale_i64(24)
    }
}
