//! Multivariate polynomials over Q(t) in the point variables x_I, y_K, w_R,
//! the map coefficients f_m (m <= -2) and a few auxiliary symbols.
//!
//! These are the coefficients of every truncated series in the crate and the
//! polynomial part of function-space elements. The grading assigns degree 1
//! to point variables and degree -m to f_m.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::ScalarK;

/// A variable of the ambient polynomial ring.
///
/// The `Ord` instance fixes a global display/processing order; the *chamber*
/// order of point variables is a separate piece of data owned by
/// `funcspace::VariableSet`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    /// Driving-process position x_I (0-based index).
    X(u32),
    /// Passive point y_K.
    Y(u32),
    /// Screening-charge position w_R.
    W(u32),
    /// Map coefficient f_m, stored by m <= -2.
    F(i32),
    /// Auxiliary symbols (r, s, ... in residue identities).
    Aux(u8),
}

impl Var {
    /// Homogeneity degree: 1 for point-like variables, -m for f_m.
    pub fn degree(&self) -> i64 {
        match self {
            Var::F(m) => -(*m as i64),
            _ => 1,
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Var::X(_) | Var::Y(_) | Var::W(_))
    }

    pub fn name(&self) -> String {
        match self {
            Var::X(i) => format!("x{}", i + 1),
            Var::Y(i) => format!("y{}", i + 1),
            Var::W(i) => format!("w{}", i + 1),
            Var::F(m) => format!("f{}", m),
            Var::Aux(i) => format!("aux{}", i),
        }
    }

    pub fn parse(s: &str) -> Option<Var> {
        if let Some(rest) = s.strip_prefix('x') {
            return rest.parse::<u32>().ok().map(|i| Var::X(i - 1));
        }
        if let Some(rest) = s.strip_prefix('y') {
            return rest.parse::<u32>().ok().map(|i| Var::Y(i - 1));
        }
        if let Some(rest) = s.strip_prefix('w') {
            return rest.parse::<u32>().ok().map(|i| Var::W(i - 1));
        }
        if let Some(rest) = s.strip_prefix('f') {
            return rest.parse::<i32>().ok().map(Var::F);
        }
        if let Some(rest) = s.strip_prefix("aux") {
            return rest.parse::<u8>().ok().map(Var::Aux);
        }
        None
    }
}

/// Exponent vector, sorted by variable. Empty map = the monomial 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<Var, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(BTreeMap::from([(v, 1)]))
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (&v, &e) in &other.0 {
            *m.entry(v).or_insert(0) += e;
        }
        Monomial(m)
    }

    pub fn degree(&self) -> i64 {
        self.0.iter().map(|(v, &e)| v.degree() * e as i64).sum()
    }

    pub fn power_of(&self, v: Var) -> u32 {
        self.0.get(&v).copied().unwrap_or(0)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{}", v.name())?;
            } else {
                write!(f, "{}^{}", v.name(), e)?;
            }
        }
        Ok(())
    }
}

/// Sparse multivariate polynomial over Q(t). Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct MPoly {
    terms: BTreeMap<Monomial, ScalarK>,
}

impl MPoly {
    pub fn zero() -> Self {
        MPoly::default()
    }

    pub fn one() -> Self {
        MPoly::constant(ScalarK::one())
    }

    pub fn constant(c: ScalarK) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        MPoly { terms }
    }

    pub fn var(v: Var) -> Self {
        MPoly::from_term(Monomial::var(v), ScalarK::one())
    }

    pub fn from_term(m: Monomial, c: ScalarK) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        MPoly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &ScalarK)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn constant_term(&self) -> ScalarK {
        self.terms
            .get(&Monomial::one())
            .cloned()
            .unwrap_or_else(ScalarK::zero)
    }

    /// The unique coefficient if the polynomial is a constant, else None.
    pub fn as_constant(&self) -> Option<ScalarK> {
        if self.terms.is_empty() {
            return Some(ScalarK::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add_term(&mut self, m: Monomial, c: ScalarK) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get().add_ref(&c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MPoly {
        MPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c.neg_ref()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul_ref(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &ScalarK) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.mul_ref(c)))
                .collect(),
        }
    }

    pub fn scale_ratio(&self, num: i64, den: i64) -> MPoly {
        self.scale(&ScalarK::from_ratio(num, den))
    }

    pub fn pow(&self, n: u32) -> MPoly {
        let mut acc = MPoly::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Partial derivative.
    pub fn derive(&self, v: Var) -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let e = m.power_of(v);
            if e == 0 {
                continue;
            }
            let mut m2 = m.0.clone();
            if e == 1 {
                m2.remove(&v);
            } else {
                m2.insert(v, e - 1);
            }
            out.add_term(Monomial(m2), c.scale_i64(e as i64));
        }
        out
    }

    /// Substitute a polynomial for a variable.
    pub fn subst(&self, v: Var, value: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            let e = m.power_of(v);
            let mut m2 = m.0.clone();
            m2.remove(&v);
            let base = MPoly::from_term(Monomial(m2), c.clone());
            out = out.add(&base.mul(&value.pow(e)));
        }
        out
    }

    /// All variables occurring with nonzero exponent.
    pub fn vars(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.0.keys().copied())
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Homogeneity degree if all monomials agree (deg x = 1, deg f_m = -m);
    /// None if inhomogeneous. The zero polynomial reports Some(0).
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let mut deg = None;
        for m in self.terms.keys() {
            let d = m.degree();
            match deg {
                None => deg = Some(d),
                Some(d0) if d0 != d => return None,
                _ => {}
            }
        }
        Some(deg.unwrap_or(0))
    }

    /// Quotient by the linear form (a - b), or None when not divisible.
    /// Divisibility is equivalent to the substitution a := b vanishing.
    pub fn div_by_linear_diff(&self, a: Var, b: Var) -> Option<MPoly> {
        if self.is_zero() {
            return Some(MPoly::zero());
        }
        // Treat as a polynomial in `a` with MPoly coefficients; synthetic
        // division by (a - b).
        let max_e = self
            .terms
            .keys()
            .map(|m| m.power_of(a))
            .max()
            .unwrap_or(0);
        if max_e == 0 {
            return None;
        }
        let mut by_pow: Vec<MPoly> = vec![MPoly::zero(); (max_e + 1) as usize];
        for (m, c) in &self.terms {
            let e = m.power_of(a);
            let mut m2 = m.0.clone();
            m2.remove(&a);
            by_pow[e as usize].add_term(Monomial(m2), c.clone());
        }
        let bp = MPoly::var(b);
        // p = sum_e c_e a^e ; divide by (a - b): q_e = c_{e+1} + b*q_{e+1}
        let mut q: Vec<MPoly> = vec![MPoly::zero(); max_e as usize];
        let mut carry = MPoly::zero();
        for e in (1..=max_e as usize).rev() {
            let qe = by_pow[e].add(&carry);
            carry = qe.mul(&bp);
            q[e - 1] = qe;
        }
        // remainder = c_0 + b*q_0
        let rem = by_pow[0].add(&carry);
        if !rem.is_zero() {
            return None;
        }
        let mut out = MPoly::zero();
        for (e, qe) in q.into_iter().enumerate() {
            let am = MPoly::var(a).pow(e as u32);
            out = out.add(&qe.mul(&am));
        }
        Some(out)
    }

    /// Evaluate numerically with variable values and t = t0.
    pub fn eval_f64(&self, values: &BTreeMap<Var, f64>, t0: f64) -> crate::error::Result<f64> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut term = c.eval_f64(t0)?;
            for (v, &e) in &m.0 {
                let val = values.get(v).copied().ok_or_else(|| {
                    crate::error::Error::UnknownVariable(v.name())
                })?;
                term *= val.powi(e as i32);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Exact evaluation of coefficients at rational t0, keeping the monomials.
    pub fn eval_t(&self, t0: &num_rational::BigRational) -> crate::error::Result<MPoly> {
        let mut out = MPoly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), ScalarK::from_bigrational(&c.eval(t0)?));
        }
        Ok(out)
    }
}

impl fmt::Display for MPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})*{}", c, m)?;
        }
        Ok(())
    }
}

/// JSON form of a monomial: variable name -> power.
impl Serialize for Monomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, u32> = self.0.iter().map(|(v, &e)| (v.name(), e)).collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Monomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let map = BTreeMap::<String, u32>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for (k, e) in map {
            let v = Var::parse(&k).ok_or_else(|| DeError::custom(format!("bad variable {k}")))?;
            if e > 0 {
                out.insert(v, e);
            }
        }
        Ok(Monomial(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_and_subst() {
        // d/df_{-2} (f_{-2}^2 x) = 2 f_{-2} x
        let f2 = Var::F(-2);
        let x = Var::X(0);
        let p = MPoly::var(f2).pow(2).mul(&MPoly::var(x));
        let d = p.derive(f2);
        let expect = MPoly::var(f2).mul(&MPoly::var(x)).scale_ratio(2, 1);
        assert_eq!(d, expect);
        // substitute f_{-2} := -x
        let q = p.subst(f2, &MPoly::var(x).neg());
        assert_eq!(q, MPoly::var(x).pow(3));
    }

    #[test]
    fn homogeneity_grading() {
        // f_{-2} has degree 2, x has degree 1
        let p = MPoly::var(Var::F(-2)).add(&MPoly::var(Var::X(0)).pow(2));
        assert_eq!(p.homogeneous_degree(), Some(2));
        let q = MPoly::var(Var::F(-2)).add(&MPoly::var(Var::X(0)));
        assert_eq!(q.homogeneous_degree(), None);
    }

    #[test]
    fn linear_division() {
        let x = Var::X(0);
        let y = Var::Y(0);
        // (y - x)^3 divisible by (y - x) twice over
        let diff = MPoly::var(y).sub(&MPoly::var(x));
        let p = diff.pow(3);
        let q = p.div_by_linear_diff(y, x).unwrap();
        assert_eq!(q, diff.pow(2));
        // x*y + 1 is not divisible
        let r = MPoly::var(x).mul(&MPoly::var(y)).add(&MPoly::one());
        assert!(r.div_by_linear_diff(y, x).is_none());
    }
}
