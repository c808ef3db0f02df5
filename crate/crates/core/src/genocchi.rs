//! q-Gandhi polynomials, q-Genocchi numbers and surjective pistols.
//!
//! Everything here is exact integer arithmetic.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{domain, Error, Result};
use crate::poly::{BiPoly, LaurentPoly};
use crate::qseries::{q_factorial, q_number};
use crate::scalar::{binomial, Ring, Scalar};

/// Largest pistol size `n` (sequences of length `2n`) we agree to enumerate.
pub const MAX_PISTOL_N: usize = 6;

impl Zero for LaurentPoly {
    fn zero() -> Self {
        LaurentPoly::zero()
    }
    fn is_zero(&self) -> bool {
        LaurentPoly::is_zero(self)
    }
}

impl One for LaurentPoly {
    fn one() -> Self {
        LaurentPoly::one()
    }
}

/// The q-Hahn operator `(f(1+qx) - f(x)) / ((1+qx) - x)`.
pub fn q_hahn_delta(f: &BiPoly) -> Result<BiPoly> {
    let fs = f.x_coefficients();
    let d = fs.len();
    if d <= 1 {
        return Ok(BiPoly::zero());
    }
    // f(1+qx) = sum_m q^m x^m sum_{i>=m} C(i,m) F_i.
    let mut g = Vec::with_capacity(d);
    for m in 0..d {
        let mut acc = LaurentPoly::zero();
        for (i, fi) in fs.iter().enumerate().skip(m) {
            acc = &acc + &fi.scale(&binomial(i as u64, m as u64));
        }
        g.push(&acc.shift(m as i64) - &fs[m]);
    }
    // Divide by 1 + (q-1)x, ascending in x.
    let q_minus_one = LaurentPoly::from_coeffs([-1, 1]);
    let mut h: Vec<LaurentPoly> = Vec::with_capacity(d - 1);
    for m in 0..d - 1 {
        let prev = if m == 0 {
            LaurentPoly::zero()
        } else {
            &q_minus_one * &h[m - 1]
        };
        h.push(&g[m] - &prev);
    }
    let remainder = &g[d - 1] - &(&q_minus_one * &h[d - 2]);
    if !remainder.is_zero() {
        return Err(Error::Internal(format!(
            "q-Hahn division left remainder {remainder}"
        )));
    }
    BiPoly::from_x_coefficients(&h)
}

/// `B_1 = 1`, `B_n = Delta_q(x^2 B_{n-1})`.
pub fn gandhi_poly(n: usize) -> Result<BiPoly> {
    if n == 0 {
        return Err(domain("q-Gandhi polynomials start at n = 1"));
    }
    Ok(gandhi_sequence(n)?.pop().expect("nonempty"))
}

/// `[B_1, ..., B_max_n]`.
pub fn gandhi_sequence(max_n: usize) -> Result<Vec<BiPoly>> {
    let mut out = Vec::with_capacity(max_n);
    if max_n == 0 {
        return Ok(out);
    }
    out.push(BiPoly::one());
    for _ in 1..max_n {
        let next = q_hahn_delta(&out.last().unwrap().shift_x(2))?;
        out.push(next);
    }
    Ok(out)
}

/// `B_n(1, q)` with the convention `B_0 = 1`.
pub fn q_genocchi(n: usize) -> Result<LaurentPoly> {
    if n == 0 {
        return Ok(LaurentPoly::one());
    }
    Ok(gandhi_poly(n)?.at_x_one())
}

/// `[B_0(1,q), ..., B_max_n(1,q)]`.
pub fn q_genocchi_sequence(max_n: usize) -> Result<Vec<LaurentPoly>> {
    let mut out = vec![LaurentPoly::one()];
    out.extend(gandhi_sequence(max_n)?.iter().map(BiPoly::at_x_one));
    Ok(out)
}

static GANDHI_CACHE: Mutex<Vec<BiPoly>> = Mutex::new(Vec::new());

/// `[B_0(1,q), ..., B_max_n(1,q)]`, reusing Gandhi polynomials computed by
/// earlier calls in this process.
pub fn q_genocchi_cached(max_n: usize) -> Result<Vec<LaurentPoly>> {
    let mut cache = GANDHI_CACHE.lock().unwrap_or_else(|e| e.into_inner());
    if cache.is_empty() && max_n > 0 {
        cache.push(BiPoly::one());
    }
    while cache.len() < max_n {
        let next = q_hahn_delta(&cache.last().unwrap().shift_x(2))?;
        cache.push(next);
    }
    let mut out = vec![LaurentPoly::one()];
    out.extend(cache[..max_n].iter().map(BiPoly::at_x_one));
    Ok(out)
}

/// Complete homogeneous symmetric polynomial `h_m(args)`, `h_0 = 1`.
pub fn hsym<T: Ring>(m: usize, args: &[T]) -> T {
    // row[j] = h_j(args[..=i]) after processing argument i.
    let mut row = vec![T::zero(); m + 1];
    row[0] = T::one();
    for a in args {
        for j in 1..=m {
            row[j] = row[j].clone() + a.clone() * row[j - 1].clone();
        }
    }
    row[m].clone()
}

/// `B_n(1,q)` from the explicit alternating formula in complete homogeneous
/// symmetric functions of `[i]_q^2 / q^i`.
pub fn genocchi_via_hsym(n: usize) -> Result<LaurentPoly> {
    if n == 0 {
        return Err(domain("the symmetric-function formula starts at n = 1"));
    }
    let q = LaurentPoly::from_coeffs([0, 1]);
    let args: Vec<LaurentPoly> = (1..=n)
        .map(|i| {
            let qi = q_number(i, &q);
            (&qi * &qi).shift(-(i as i64))
        })
        .collect();
    let mut total = LaurentPoly::zero();
    for k in 0..n {
        let m = n - 1 - k;
        let fact = q_factorial(k + 1, &q);
        let mut term = &hsym(m, &args[..=k]) * &(&fact * &fact);
        term = term.shift(-((k * (k + 1) / 2) as i64));
        if m % 2 == 1 {
            term = -&term;
        }
        total = &total + &term;
    }
    if total.min_degree().is_some_and(|d| d < 0) {
        return Err(Error::Internal(format!(
            "negative powers survived in B_{n}(1,q) = {total}"
        )));
    }
    Ok(total)
}

/// Coefficients of `t^1..t^order` in the Han–Zeng generating function
/// `sum_n ([n]_q!)^2 q^n t^n / prod_{i<=n} (q^i + [i]_q^2 t)`, expanded as a
/// formal power series at a fixed rational `q`.
pub fn genocchi_gf_coefficients(q: &BigRational, order: usize) -> Result<Vec<BigRational>> {
    if q.is_zero() {
        return Err(domain("the generating function needs q != 0"));
    }
    let zero = BigRational::zero();
    let mut total = vec![zero.clone(); order + 1];
    // Running product prod_{i<=n} 1/(q^i + [i]^2 t), truncated at t^order.
    let mut denom_inv = vec![zero.clone(); order + 1];
    denom_inv[0] = BigRational::one();
    for n in 1..=order {
        let qi = q.powi(n as i64);
        let ni = q_number(n, q);
        let ratio = -(ni.clone() * ni) / qi.clone();
        // 1/(q^n + [n]^2 t) = q^{-n} sum_m ratio^m t^m.
        let mut geo = Vec::with_capacity(order + 1);
        let mut p = BigRational::one() / qi;
        for _ in 0..=order {
            geo.push(p.clone());
            p = p * ratio.clone();
        }
        let mut next = vec![zero.clone(); order + 1];
        for (i, a) in denom_inv.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in geo.iter().enumerate().take(order + 1 - i) {
                next[i + j] += a * b;
            }
        }
        denom_inv = next;
        let f = q_factorial(n, q);
        let lead = f.clone() * f * q.powi(n as i64);
        for (j, a) in denom_inv.iter().enumerate().take(order + 1 - n) {
            total[n + j] += lead.clone() * a;
        }
    }
    total.remove(0);
    Ok(total)
}

/// Catalan number `binom(2n, n) / (n + 1)`.
pub fn catalan(n: u64) -> BigInt {
    binomial(2 * n, n) / BigInt::from(n + 1)
}

/// A surjective pistol of size `n`: `p(1..2n)` with even values, `p(i) >= i`,
/// hitting every value in `{2, 4, ..., 2n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pistol {
    values: Vec<u32>,
}

impl Pistol {
    pub fn new(values: Vec<u32>) -> Result<Self> {
        let len = values.len();
        if len == 0 || len % 2 == 1 {
            return Err(domain("a pistol has even positive length"));
        }
        let mut hit = vec![false; len / 2];
        for (i, &v) in values.iter().enumerate() {
            if v % 2 == 1 || v == 0 || v as usize > len || (v as usize) < i + 1 {
                return Err(domain(format!("invalid pistol value {v} at position {}", i + 1)));
            }
            hit[v as usize / 2 - 1] = true;
        }
        if hit.iter().any(|h| !h) {
            return Err(domain("pistol is not surjective"));
        }
        Ok(Self { values })
    }

    /// Size `n` (the sequence has length `2n`).
    pub fn size(&self) -> usize {
        self.values.len() / 2
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }
}

/// Number of special inversions: pairs `i > j` with `p(i) < p(j)` where `i`
/// is the rightmost position carrying the value `p(i)`.
pub fn sinv(p: &Pistol) -> usize {
    let v = &p.values;
    let mut count = 0;
    for i in 0..v.len() {
        if v[i + 1..].contains(&v[i]) {
            continue;
        }
        count += v[..i].iter().filter(|&&pj| pj > v[i]).count();
    }
    count
}

/// Lazy depth-first enumeration of surjective pistols.
pub struct PistolIter {
    len: usize,
    current: Vec<u32>,
    /// Next candidate value per filled position.
    next_choice: Vec<u32>,
    used: Vec<u32>,
    done: bool,
}

impl PistolIter {
    fn new(n: usize) -> Self {
        Self {
            len: 2 * n,
            current: Vec::with_capacity(2 * n),
            next_choice: vec![0; 2 * n],
            used: vec![0; n + 1],
            done: false,
        }
    }

    fn first_candidate(pos: usize) -> u32 {
        // Smallest even value >= pos (1-based position).
        let p = pos as u32;
        p + (p % 2)
    }

    /// Values <= pos must all be hit by positions <= pos.
    fn feasible(&self, pos: usize) -> bool {
        pos % 2 == 1 || self.used[pos / 2] > 0
    }
}

impl Iterator for PistolIter {
    type Item = Pistol;

    fn next(&mut self) -> Option<Pistol> {
        if self.done {
            return None;
        }
        // Resume: on entry the stack is either empty (start) or full (the last
        // pistol emitted), in which case we backtrack first.
        let mut backtrack = self.current.len() == self.len;
        if self.current.is_empty() {
            self.next_choice[0] = Self::first_candidate(1);
        }
        loop {
            if backtrack {
                match self.current.pop() {
                    None => {
                        self.done = true;
                        return None;
                    }
                    Some(v) => {
                        self.used[v as usize / 2] -= 1;
                        backtrack = false;
                    }
                }
            }
            let depth = self.current.len();
            let v = self.next_choice[depth];
            if v as usize > self.len {
                backtrack = true;
                continue;
            }
            self.next_choice[depth] = v + 2;
            self.current.push(v);
            self.used[v as usize / 2] += 1;
            let pos = depth + 1;
            if !self.feasible(pos) {
                self.current.pop();
                self.used[v as usize / 2] -= 1;
                continue;
            }
            if pos == self.len {
                return Some(Pistol {
                    values: self.current.clone(),
                });
            }
            self.next_choice[pos] = Self::first_candidate(pos + 1);
        }
    }
}

/// All surjective pistols of size `n`, each exactly once.
pub fn enumerate_pistols(n: usize) -> Result<PistolIter> {
    if n == 0 {
        return Err(domain("pistol size must be positive"));
    }
    if n > MAX_PISTOL_N {
        return Err(Error::Resource(format!(
            "pistol enumeration is capped at n = {MAX_PISTOL_N}, got {n}"
        )));
    }
    Ok(PistolIter::new(n))
}

/// `sum_p q^{sinv(p)}` over surjective pistols of size `n`.
pub fn pistol_sinv_polynomial(n: usize) -> Result<LaurentPoly> {
    let mut p = LaurentPoly::zero();
    for pistol in enumerate_pistols(n)? {
        p.add_term(sinv(&pistol) as i64, BigInt::one());
    }
    Ok(p)
}
