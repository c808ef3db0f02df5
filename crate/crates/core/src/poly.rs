//! Integer polynomials used by the exact combinatorial layer.
//!
//! [`LaurentPoly`] holds a Laurent polynomial in `q`; [`BiPoly`] a polynomial
//! in `(x, q)`. Both keep no zero coefficients and print in a canonical text
//! form (`"1 + 1*x + 1*q*x"`) that [`std::str::FromStr`] parses back.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    coeffs: BTreeMap<i64, BigInt>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, BigInt::one())
    }

    pub fn monomial(deg: i64, coeff: BigInt) -> Self {
        let mut p = Self::default();
        p.add_term(deg, coeff);
        p
    }

    /// Builds `sum c_j q^j` from a dense coefficient list starting at `q^0`.
    pub fn from_coeffs<I, C>(coeffs: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<BigInt>,
    {
        let mut p = Self::default();
        for (j, c) in coeffs.into_iter().enumerate() {
            p.add_term(j as i64, c.into());
        }
        p
    }

    pub fn add_term(&mut self, deg: i64, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(deg).or_default();
        *entry += coeff;
        if entry.is_zero() {
            self.coeffs.remove(&deg);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, deg: i64) -> BigInt {
        self.coeffs.get(&deg).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigInt)> {
        self.coeffs.iter().map(|(d, c)| (*d, c))
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    /// Dense coefficients of `q^0..q^max`; fails if negative powers survive.
    pub fn to_dense(&self) -> Result<Vec<BigInt>> {
        if let Some(d) = self.min_degree() {
            if d < 0 {
                return Err(Error::Internal(format!("negative power q^{d} in a polynomial")));
            }
        }
        let top = self.max_degree().unwrap_or(0).max(0) as usize;
        let mut out = vec![BigInt::zero(); top + 1];
        for (d, c) in &self.coeffs {
            out[*d as usize] = c.clone();
        }
        Ok(out)
    }

    /// Multiplies by `q^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(d, c)| (d + k, c.clone())).collect(),
        }
    }

    pub fn scale(&self, s: &BigInt) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            coeffs: self.coeffs.iter().map(|(d, c)| (*d, c * s)).collect(),
        }
    }

    pub fn eval<S: Scalar>(&self, q: &S) -> S {
        let mut acc = S::zero();
        for (d, c) in &self.coeffs {
            acc = acc + S::from_bigint(c) * q.powi(*d);
        }
        acc
    }

    pub fn eval_at_one(&self) -> BigInt {
        self.coeffs.values().sum()
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (d, c) in &rhs.coeffs {
            out.add_term(*d, c.clone());
        }
        out
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (d, c) in &rhs.coeffs {
            out.add_term(*d, -c);
        }
        out
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (d1, c1) in &self.coeffs {
            for (d2, c2) in &rhs.coeffs {
                out.add_term(d1 + d2, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly {
            coeffs: self.coeffs.iter().map(|(d, c)| (*d, -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($t:ty, $tr:ident, $m:ident) => {
        impl $tr for $t {
            type Output = $t;
            fn $m(self, rhs: $t) -> $t {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(LaurentPoly, Add, add);
forward_owned!(LaurentPoly, Sub, sub);
forward_owned!(LaurentPoly, Mul, mul);

fn write_terms<'a, I>(f: &mut fmt::Formatter<'_>, terms: I) -> fmt::Result
where
    I: Iterator<Item = (&'a BigInt, String)>,
{
    let mut first = true;
    for (c, vars) in terms {
        let body = if vars.is_empty() {
            c.abs().to_string()
        } else {
            format!("{}*{}", c.abs(), vars)
        };
        match (first, c.is_negative()) {
            (true, false) => write!(f, "{body}")?,
            (true, true) => write!(f, "-{body}")?,
            (false, false) => write!(f, " + {body}")?,
            (false, true) => write!(f, " - {body}")?,
        }
        first = false;
    }
    if first {
        write!(f, "0")?;
    }
    Ok(())
}

fn power(var: &str, d: i64) -> Option<String> {
    match d {
        0 => None,
        1 => Some(var.to_string()),
        _ => Some(format!("{var}^{d}")),
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(
            f,
            self.coeffs.iter().map(|(d, c)| (c, power("q", *d).unwrap_or_default())),
        )
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(
            f,
            self.coeffs.iter().map(|((xd, qd), c)| {
                let parts: Vec<String> = [power("q", *qd as i64), power("x", *xd as i64)]
                    .into_iter()
                    .flatten()
                    .collect();
                (c, parts.join("*"))
            }),
        )
    }
}

/// Splits canonical text into signed terms and parses each into
/// `(coefficient, exponents by variable)`.
fn parse_terms(text: &str, vars: &[char]) -> Result<Vec<(BigInt, Vec<i64>)>> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(domain("empty polynomial text"));
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'^' {
            pieces.push(&s[start..i]);
            start = i;
        }
    }
    pieces.push(&s[start..]);
    let mut out = Vec::new();
    for piece in pieces {
        let (neg, body) = match piece.as_bytes()[0] {
            b'+' => (false, &piece[1..]),
            b'-' => (true, &piece[1..]),
            _ => (false, piece),
        };
        let mut coeff = BigInt::one();
        let mut exps = vec![0i64; vars.len()];
        for (k, factor) in body.split('*').enumerate() {
            if factor.is_empty() {
                return Err(domain(format!("malformed term {piece:?}")));
            }
            if let Some(pos) = vars.iter().position(|v| factor.starts_with(*v)) {
                let rest = &factor[1..];
                let e = if rest.is_empty() {
                    1
                } else {
                    rest.strip_prefix('^')
                        .and_then(|e| e.parse::<i64>().ok())
                        .ok_or_else(|| domain(format!("bad exponent in {factor:?}")))?
                };
                exps[pos] += e;
            } else if k == 0 {
                coeff = factor
                    .parse()
                    .map_err(|_| domain(format!("bad coefficient {factor:?}")))?;
            } else {
                return Err(domain(format!("unexpected factor {factor:?}")));
            }
        }
        if neg {
            coeff = -coeff;
        }
        out.push((coeff, exps));
    }
    Ok(out)
}

impl FromStr for LaurentPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Self::zero();
        for (c, e) in parse_terms(s, &['q'])? {
            p.add_term(e[0], c);
        }
        Ok(p)
    }
}

/// Polynomial in `(x, q)` with integer coefficients, keyed by
/// `(x-degree, q-degree)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BiPoly {
    coeffs: BTreeMap<(u32, u32), BigInt>,
}

impl BiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, 0, BigInt::one())
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, BigInt::one())
    }

    pub fn monomial(xdeg: u32, qdeg: u32, coeff: BigInt) -> Self {
        let mut p = Self::default();
        p.add_term(xdeg, qdeg, coeff);
        p
    }

    pub fn add_term(&mut self, xdeg: u32, qdeg: u32, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        let key = (xdeg, qdeg);
        let entry = self.coeffs.entry(key).or_default();
        *entry += coeff;
        if entry.is_zero() {
            self.coeffs.remove(&key);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, xdeg: u32, qdeg: u32) -> BigInt {
        self.coeffs.get(&(xdeg, qdeg)).cloned().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), &BigInt)> {
        self.coeffs.iter().map(|(k, c)| (*k, c))
    }

    pub fn x_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|k| k.0).max()
    }

    /// Coefficients `F_i(q)` of `x^i`, dense in `i`.
    pub fn x_coefficients(&self) -> Vec<LaurentPoly> {
        let Some(top) = self.x_degree() else {
            return Vec::new();
        };
        let mut out = vec![LaurentPoly::zero(); top as usize + 1];
        for ((xd, qd), c) in &self.coeffs {
            out[*xd as usize].add_term(*qd as i64, c.clone());
        }
        out
    }

    /// Inverse of [`BiPoly::x_coefficients`]; every coefficient must be a
    /// genuine polynomial in `q`.
    pub fn from_x_coefficients(cs: &[LaurentPoly]) -> Result<Self> {
        let mut p = Self::zero();
        for (i, f) in cs.iter().enumerate() {
            for (d, c) in f.terms() {
                if d < 0 {
                    return Err(Error::Internal(format!("negative q-power in x^{i} coefficient")));
                }
                p.add_term(i as u32, d as u32, c.clone());
            }
        }
        Ok(p)
    }

    /// Multiplies by `x^k`.
    pub fn shift_x(&self, k: u32) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|((x, q), c)| ((x + k, *q), c.clone())).collect(),
        }
    }

    /// Specialisation `x = 1`.
    pub fn at_x_one(&self) -> LaurentPoly {
        let mut p = LaurentPoly::zero();
        for ((_, qd), c) in &self.coeffs {
            p.add_term(*qd as i64, c.clone());
        }
        p
    }

    pub fn eval<S: Scalar>(&self, x: &S, q: &S) -> S {
        let mut acc = S::zero();
        for ((xd, qd), c) in &self.coeffs {
            acc = acc + S::from_bigint(c) * x.powi(*xd as i64) * q.powi(*qd as i64);
        }
        acc
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for ((x, q), c) in &rhs.coeffs {
            out.add_term(*x, *q, c.clone());
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for ((x, q), c) in &rhs.coeffs {
            out.add_term(*x, *q, -c);
        }
        out
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((x1, q1), c1) in &self.coeffs {
            for ((x2, q2), c2) in &rhs.coeffs {
                out.add_term(x1 + x2, q1 + q2, c1 * c2);
            }
        }
        out
    }
}

forward_owned!(BiPoly, Add, add);
forward_owned!(BiPoly, Sub, sub);
forward_owned!(BiPoly, Mul, mul);

impl FromStr for BiPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Self::zero();
        for (c, e) in parse_terms(s, &['x', 'q'])? {
            if e[0] < 0 || e[1] < 0 {
                return Err(domain(format!("negative exponent in {s:?}")));
            }
            p.add_term(e[0] as u32, e[1] as u32, c);
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trip() {
        let mut p = BiPoly::one();
        p.add_term(1, 0, 1.into());
        p.add_term(1, 1, 1.into());
        assert_eq!(p.to_string(), "1 + 1*x + 1*q*x");
        assert_eq!(p.to_string().parse::<BiPoly>().unwrap(), p);
        let l = LaurentPoly::from_coeffs([2, -1, 0, 5]).shift(-1);
        assert_eq!(l.to_string(), "2*q^-1 - 1 + 5*q^2");
        assert_eq!(l.to_string().parse::<LaurentPoly>().unwrap(), l);
        assert_eq!(BiPoly::zero().to_string(), "0");
        assert_eq!("0".parse::<LaurentPoly>().unwrap(), LaurentPoly::zero());
        assert!("1 + *x".parse::<BiPoly>().is_err());
    }

    #[test]
    fn arithmetic() {
        let a = LaurentPoly::from_coeffs([1, 1]);
        let sq = &a * &a;
        assert_eq!(sq, LaurentPoly::from_coeffs([1, 2, 1]));
        assert!((&sq - &sq).is_zero());
        assert_eq!(sq.eval(&2.0f64), 9.0);
        let x = BiPoly::x();
        let p = &(&x * &x) + &BiPoly::one();
        assert_eq!(p.x_degree(), Some(2));
        assert_eq!(BiPoly::from_x_coefficients(&p.x_coefficients()).unwrap(), p);
        assert_eq!(p.at_x_one(), LaurentPoly::from_coeffs([2]));
    }

    #[test]
    fn dense_rejects_negative_powers() {
        assert!(LaurentPoly::monomial(-1, 1.into()).to_dense().is_err());
        assert_eq!(
            LaurentPoly::from_coeffs([0, 3]).to_dense().unwrap(),
            vec![BigInt::from(0), BigInt::from(3)]
        );
    }
}
