//! Isotropic distributions on bit patterns of length `n`.
//!
//! An isotropic distribution gives every pattern of weight `k` the same
//! probability `p_k`. It is described equally well by
//!
//! * `p_k`, the probability of one particular weight-`k` pattern,
//! * `F_a`, the probability that a random pattern is covered by a fixed
//!   weight-`a` mask, and
//! * `G_a`, the probability that a random pattern covers a fixed weight-`a`
//!   mask (the fraction of candidates a prescreen with that mask keeps).
//!
//! Conversions between the three bases are binomial transforms. The
//! alternating ones amplify rounding error by up to `2^n`, so coefficients
//! are stored in double-double precision and binomial coefficients are exact
//! for `n <= 64` ([`EXACT_BINOMIAL_MAX_N`]). Beyond that, binomials come
//! from log-gamma and the alternating conversions lose accuracy quickly;
//! the monotone directions (`P -> F`, `P -> G`) remain well conditioned.

use crate::error::{Error, Result};
use crate::numeric::{binomial_dd, Dd};

pub use crate::numeric::EXACT_BINOMIAL_MAX_N;

/// Construction-time tolerance for the distribution invariants.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    P,
    F,
    G,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicDistribution {
    n: usize,
    basis: Basis,
    coeffs: Vec<Dd>,
}

/// Raw moments of the weight of a random pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub variance: f64,
}

impl MomentSet {
    pub fn from_raw(mu1: f64, mu2: f64, mu3: f64) -> Self {
        MomentSet {
            mu1,
            mu2,
            mu3,
            variance: mu2 - mu1 * mu1,
        }
    }

    /// Moments of a point mass at weight `r`.
    pub fn point_mass(r: f64) -> Self {
        MomentSet {
            mu1: r,
            mu2: r * r,
            mu3: r * r * r,
            variance: 0.0,
        }
    }

    /// Moments of a weight histogram indexed by weight.
    pub fn from_histogram(hist: &[f64]) -> Self {
        let mut m = [Dd::ZERO; 3];
        for (k, &h) in hist.iter().enumerate() {
            let k = Dd::new(k as f64);
            let h = Dd::new(h);
            m[0] = m[0] + h * k;
            m[1] = m[1] + h * k * k;
            m[2] = m[2] + h * k * k * k;
        }
        MomentSet {
            mu1: m[0].to_f64(),
            mu2: m[1].to_f64(),
            mu3: m[2].to_f64(),
            variance: (m[1] - m[0] * m[0]).to_f64(),
        }
    }
}

fn sign(k: usize) -> Dd {
    if k.is_multiple_of(2) {
        Dd::ONE
    } else {
        -Dd::ONE
    }
}

impl IsotropicDistribution {
    /// Builds a distribution from coefficients in `basis`, checking the
    /// invariants with [`DEFAULT_TOLERANCE`].
    pub fn new(n: usize, basis: Basis, coeffs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(n, basis, coeffs, DEFAULT_TOLERANCE)
    }

    /// Like [`new`](Self::new) with an explicit tolerance, e.g. for
    /// coefficients estimated by sampling.
    pub fn with_tolerance(n: usize, basis: Basis, coeffs: Vec<f64>, tol: f64) -> Result<Self> {
        let d = Self::from_dd(n, basis, coeffs.into_iter().map(Dd::new).collect())?;
        d.check(tol)?;
        Ok(d)
    }

    pub(crate) fn from_dd(n: usize, basis: Basis, coeffs: Vec<Dd>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroLength);
        }
        if coeffs.len() != n + 1 {
            return Err(Error::LengthMismatch {
                left: coeffs.len(),
                right: n + 1,
            });
        }
        Ok(IsotropicDistribution { n, basis, coeffs })
    }

    /// Each bit set independently with probability `1 - q`: `F_m = q^(n-m)`.
    pub fn from_binomial(n: usize, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", format!("{q} is outside [0, 1]")));
        }
        let q = Dd::new(q);
        let coeffs = (0..=n).map(|m| q.powi((n - m) as u64)).collect();
        Self::from_dd(n, Basis::F, coeffs)
    }

    /// Uniform over the patterns of weight `w`: `F_m = C(n-w, n-m) / C(n, m)`.
    pub fn from_fixed_weight(n: usize, w: usize) -> Result<Self> {
        if w > n {
            return Err(Error::param("w", format!("{w} exceeds n = {n}")));
        }
        // F_m = C(m, w) / C(n, w), built downward from F_n = 1.
        let mut coeffs = vec![Dd::ZERO; n + 1];
        coeffs[n] = Dd::ONE;
        for m in (w..n).rev() {
            coeffs[m] = coeffs[m + 1] * Dd::new((m + 1 - w) as f64) / Dd::new((m + 1) as f64);
        }
        Self::from_dd(n, Basis::F, coeffs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.to_f64()).collect()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs[k].to_f64()
    }

    pub(crate) fn coeffs_dd(&self) -> &[Dd] {
        &self.coeffs
    }

    pub fn p_coeffs(&self) -> Vec<f64> {
        self.to_basis(Basis::P).coeffs()
    }

    pub fn f_coeffs(&self) -> Vec<f64> {
        self.to_basis(Basis::F).coeffs()
    }

    pub fn g_coeffs(&self) -> Vec<f64> {
        self.to_basis(Basis::G).coeffs()
    }

    /// Probability of each weight, `C(n, k) p_k`.
    pub fn weight_probabilities(&self) -> Vec<f64> {
        let p = self.to_basis(Basis::P);
        p.coeffs
            .iter()
            .enumerate()
            .map(|(k, &pk)| (binomial_dd(self.n, k) * pk).to_f64())
            .collect()
    }

    /// Checks the basis-specific invariants within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        let c = self.coeffs();
        let n = self.n;
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match self.basis {
            Basis::P => {
                if let Some(k) = c.iter().position(|&p| p < -tol || !p.is_finite()) {
                    return bad(format!("p_{k} = {} is negative", c[k]));
                }
                let total: Dd = self
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| binomial_dd(n, k) * p)
                    .sum();
                let total = total.to_f64();
                if (total - 1.0).abs() > tol {
                    return bad(format!("weight probabilities sum to {total}"));
                }
            }
            Basis::F => {
                if c[0] < -tol || !c[0].is_finite() {
                    return bad(format!("F_0 = {} is negative", c[0]));
                }
                if let Some(k) = (0..n).find(|&k| c[k] > c[k + 1] + tol || !c[k + 1].is_finite()) {
                    return bad(format!("F_{k} > F_{}", k + 1));
                }
                if (c[n] - 1.0).abs() > tol {
                    return bad(format!("F_n = {} != 1", c[n]));
                }
            }
            Basis::G => {
                if (c[0] - 1.0).abs() > tol {
                    return bad(format!("G_0 = {} != 1", c[0]));
                }
                if let Some(k) = (0..n).find(|&k| c[k] + tol < c[k + 1] || !c[k + 1].is_finite()) {
                    return bad(format!("G_{k} < G_{}", k + 1));
                }
                if c[n] < -tol {
                    return bad(format!("G_n = {} is negative", c[n]));
                }
            }
        }
        Ok(())
    }

    /// Re-expresses the distribution in `target` coefficients.
    pub fn to_basis(&self, target: Basis) -> IsotropicDistribution {
        let n = self.n;
        let c = &self.coeffs;
        let coeffs: Vec<Dd> = match (self.basis, target) {
            (a, b) if a == b => c.clone(),
            // F_a = sum_k C(a, k) p_k
            (Basis::P, Basis::F) => (0..=n)
                .map(|a| (0..=a).map(|k| binomial_dd(a, k) * c[k]).sum())
                .collect(),
            // G_a = sum_{k >= a} C(n - a, k - a) p_k
            (Basis::P, Basis::G) => (0..=n)
                .map(|a| (a..=n).map(|k| binomial_dd(n - a, k - a) * c[k]).sum())
                .collect(),
            // p_m = sum_k (-1)^(m+k) C(m, k) F_k
            (Basis::F, Basis::P) => (0..=n)
                .map(|m| {
                    (0..=m)
                        .map(|k| sign(m + k) * binomial_dd(m, k) * c[k])
                        .sum()
                })
                .collect(),
            // G_m = sum_k (-1)^k C(m, k) F_(n-k)
            (Basis::F, Basis::G) => (0..=n)
                .map(|m| {
                    (0..=m)
                        .map(|k| sign(k) * binomial_dd(m, k) * c[n - k])
                        .sum()
                })
                .collect(),
            // F_a = sum_k (-1)^k C(n - a, k) G_k   (dual of F -> G)
            (Basis::G, Basis::F) => (0..=n)
                .map(|a| {
                    (0..=n - a)
                        .map(|k| sign(k) * binomial_dd(n - a, k) * c[k])
                        .sum()
                })
                .collect(),
            // p_j = sum_k (-1)^(n-j+k) C(n - j, k) G_(n-k)   (dual of F -> P)
            (Basis::G, Basis::P) => (0..=n)
                .map(|j| {
                    (0..=n - j)
                        .map(|k| sign(n - j + k) * binomial_dd(n - j, k) * c[n - k])
                        .sum()
                })
                .collect(),
            _ => unreachable!(),
        };
        IsotropicDistribution {
            n,
            basis: target,
            coeffs,
        }
    }

    /// The complementary distribution, obtained by flipping every bit.
    pub fn complement(&self) -> IsotropicDistribution {
        let p = self.to_basis(Basis::P);
        let coeffs = p.coeffs.iter().rev().copied().collect();
        IsotropicDistribution {
            n: self.n,
            basis: Basis::P,
            coeffs,
        }
    }

    fn eval(&self, basis: Basis, t: f64, reversed: bool) -> f64 {
        let d = self.to_basis(basis);
        let n = self.n;
        let t = Dd::new(t);
        let mut acc = Dd::ZERO;
        for k in (0..=n).rev() {
            let c = if reversed {
                d.coeffs[n - k]
            } else {
                d.coeffs[k]
            };
            acc = acc * t + binomial_dd(n, k) * c;
        }
        acc.to_f64()
    }

    /// Probability generating function of the weight, `f(t) = sum C(n,k) p_k t^k`.
    pub fn gf_p(&self, t: f64) -> f64 {
        self.eval(Basis::P, t, false)
    }

    /// `F(t) = sum C(n,m) F_m t^m`.
    pub fn gf_f(&self, t: f64) -> f64 {
        self.eval(Basis::F, t, false)
    }

    /// `G(t) = sum C(n,k) G_(n-k) t^k`; `G(0) = G_n`.
    pub fn gf_g(&self, t: f64) -> f64 {
        self.eval(Basis::G, t, true)
    }

    /// `G_1..G_3` without a full basis conversion.
    fn low_g(&self) -> [Dd; 4] {
        let n = self.n;
        let c = &self.coeffs;
        let mut g = [Dd::ZERO; 4];
        for (m, gm) in g.iter_mut().enumerate().take(n.min(3) + 1) {
            *gm = match self.basis {
                Basis::G => c[m],
                Basis::F => (0..=m)
                    .map(|k| sign(k) * binomial_dd(m, k) * c[n - k])
                    .sum(),
                Basis::P => (m..=n).map(|k| binomial_dd(n - m, k - m) * c[k]).sum(),
            };
        }
        g
    }

    /// Raw moments of the weight from the factorial moments
    /// `E[X(X-1)...(X-k+1)] = k! C(n,k) G_k`.
    pub fn moments(&self) -> MomentSet {
        let n = self.n as f64;
        let g = self.low_g();
        let nn = Dd::new(n);
        let f1 = nn * g[1];
        let f2 = nn * Dd::new(n - 1.0) * g[2];
        let f3 = nn * Dd::new(n - 1.0) * Dd::new(n - 2.0) * g[3];
        let mu1 = f1;
        let mu2 = f1 + f2;
        let mu3 = f1 + f2 * 3.0 + f3;
        MomentSet {
            mu1: mu1.to_f64(),
            mu2: mu2.to_f64(),
            mu3: mu3.to_f64(),
            variance: (mu2 - mu1 * mu1).to_f64(),
        }
    }
}
