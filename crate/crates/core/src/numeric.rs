//! Double-double arithmetic and binomial coefficients.
//!
//! The basis conversions of isotropic distributions are alternating sums of
//! binomially weighted terms, so their condition number grows like `2^n`.
//! Coefficients are therefore carried as unevaluated sums of two `f64`
//! (about 106 bits of mantissa) which keeps the conversions accurate to
//! roughly `1e-13` up to `n = 64`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::factorial::ln_binomial;

/// Largest `n` for which binomial coefficients are computed exactly.
pub const EXACT_BINOMIAL_MAX_N: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }

    /// Exact for values below `2^106`.
    pub fn from_u128(v: u128) -> Self {
        let hi = v as f64;
        let rem = v as i128 - hi as i128;
        let (hi, lo) = quick_two_sum(hi, rem as f64);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn powi(self, mut k: u64) -> Self {
        let mut base = self;
        let mut acc = Dd::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd::new(v)
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, o: f64) -> Dd {
        self * Dd::new(o)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * q1;
        let q2 = r.hi / o.hi;
        let r = r - o * q2;
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl std::iter::Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::ZERO, |a, b| a + b)
    }
}

/// `C(n, k)` as an exact integer; `None` when `n` exceeds the exact range.
pub fn binomial_exact(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    if n > EXACT_BINOMIAL_MAX_N {
        return None;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    Some(c)
}

pub(crate) fn binomial_dd(n: usize, k: usize) -> Dd {
    match binomial_exact(n, k) {
        Some(c) => Dd::from_u128(c),
        None => Dd::new(ln_binomial(n as u64, k as u64).exp()),
    }
}

/// `C(n, k)` as a float: exact for `n <= 64`, log-gamma based beyond.
pub fn binomial(n: usize, k: usize) -> f64 {
    binomial_dd(n, k).to_f64()
}

/// `C(k, w) / C(m, w)`: the chance that a uniform `w`-subset of an
/// `m`-set lands inside a fixed `k`-subset.
pub fn subset_ratio(k: usize, m: usize, w: usize) -> f64 {
    if w > k {
        return 0.0;
    }
    (0..w).fold(1.0, |acc, i| acc * (k - i) as f64 / (m - i) as f64)
}
