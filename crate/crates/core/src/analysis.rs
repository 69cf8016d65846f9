//! Source models, target distributions and false-drop predictions.
//!
//! The central fact: if every source bit gets its code word from the same
//! distribution with cover coefficients `F_m`, the signature distribution
//! has cover coefficients `Pi(F_m)`, where `Pi` is the generating function
//! of the source weight. False-drop rates (`theta`) are computed in log
//! space since `theta` is an `n`-th power and underflows for realistic `n`.

use std::collections::BTreeMap;
use std::f64::consts::{E, LN_2};
use std::fmt;

use crate::codegen::CodeSpec;
use crate::error::{Error, Result};
use crate::isotropic::{Basis, IsotropicDistribution, MomentSet};
use crate::numeric::{binomial_dd, Dd};

/// Tolerance on a weight histogram summing to one.
pub const HISTOGRAM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Uniform over the source patterns with exactly `r` set bits.
    FixedWeight { r: usize },
    /// Bit `j` set independently with probability `p[j]`.
    IndependentBits { p: Vec<f64> },
    /// Weight `k` with probability `hist[k]`, uniform among patterns of that weight.
    Empirical { hist: Vec<f64> },
}

/// Statistics of the source bit strings of length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    len: usize,
    kind: SourceKind,
}

impl SourceModel {
    pub fn fixed_weight(len: usize, r: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::ZeroLength);
        }
        if r > len {
            return Err(Error::param("r", format!("{r} exceeds N = {len}")));
        }
        Ok(SourceModel {
            len,
            kind: SourceKind::FixedWeight { r },
        })
    }

    pub fn independent(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::ZeroLength);
        }
        if let Some(j) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::param(
                "p",
                format!("p[{j}] = {} is outside [0, 1]", p[j]),
            ));
        }
        Ok(SourceModel {
            len: p.len(),
            kind: SourceKind::IndependentBits { p },
        })
    }

    /// `hist[k]` is the probability of weight `k`; shorter histograms are
    /// padded with zeros up to `len + 1` entries.
    pub fn empirical(len: usize, mut hist: Vec<f64>) -> Result<Self> {
        if len == 0 {
            return Err(Error::ZeroLength);
        }
        if hist.len() > len + 1 {
            if hist[len + 1..].iter().any(|&h| h != 0.0) {
                return Err(Error::param("hist", format!("mass above weight N = {len}")));
            }
            hist.truncate(len + 1);
        }
        hist.resize(len + 1, 0.0);
        if let Some(k) = hist.iter().position(|h| *h < 0.0 || !h.is_finite()) {
            return Err(Error::param(
                "hist",
                format!("hist[{k}] = {} is negative", hist[k]),
            ));
        }
        let total: f64 = hist.iter().sum();
        if (total - 1.0).abs() > HISTOGRAM_TOLERANCE {
            return Err(Error::param(
                "hist",
                format!("probabilities sum to {total}"),
            ));
        }
        Ok(SourceModel {
            len,
            kind: SourceKind::Empirical { hist },
        })
    }

    pub fn empirical_from_map(len: usize, hist: &BTreeMap<usize, f64>) -> Result<Self> {
        let top = hist.keys().next_back().copied().unwrap_or(0);
        let mut v = vec![0.0; top.max(len) + 1];
        for (&k, &h) in hist {
            v[k] += h;
        }
        Self::empirical(len, v)
    }

    /// Source length `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// `Pi(t) = E[t^weight]`.
    pub fn gf(&self, t: f64) -> f64 {
        match &self.kind {
            SourceKind::IndependentBits { p } if self.len > 64 => {
                let mut log = 0.0;
                for &pj in p {
                    let factor = 1.0 - pj + pj * t;
                    if factor == 0.0 {
                        return 0.0;
                    }
                    if factor < 0.0 {
                        return self.gf_dd(Dd::new(t)).to_f64();
                    }
                    log += (pj * (t - 1.0)).ln_1p();
                }
                log.exp()
            }
            _ => self.gf_dd(Dd::new(t)).to_f64(),
        }
    }

    pub(crate) fn gf_dd(&self, t: Dd) -> Dd {
        match &self.kind {
            SourceKind::FixedWeight { r } => t.powi(*r as u64),
            SourceKind::IndependentBits { p } => p.iter().fold(Dd::ONE, |acc, &pj| {
                acc * (Dd::new(pj) * t + Dd::new(1.0 - pj))
            }),
            SourceKind::Empirical { hist } => hist
                .iter()
                .rev()
                .fold(Dd::ZERO, |acc, &h| acc * t + Dd::new(h)),
        }
    }

    /// Probability of each source weight `0..=N`.
    pub fn weight_histogram(&self) -> Vec<f64> {
        match &self.kind {
            SourceKind::FixedWeight { r } => {
                let mut h = vec![0.0; self.len + 1];
                h[*r] = 1.0;
                h
            }
            SourceKind::IndependentBits { p } => {
                let mut h = vec![0.0; self.len + 1];
                h[0] = 1.0;
                for (j, &pj) in p.iter().enumerate() {
                    for k in (1..=j + 1).rev() {
                        h[k] = h[k] * (1.0 - pj) + h[k - 1] * pj;
                    }
                    h[0] *= 1.0 - pj;
                }
                h
            }
            SourceKind::Empirical { hist } => hist.clone(),
        }
    }

    pub fn weight_moments(&self) -> MomentSet {
        match &self.kind {
            SourceKind::FixedWeight { r } => MomentSet::point_mass(*r as f64),
            _ => MomentSet::from_histogram(&self.weight_histogram()),
        }
    }

    pub fn mean_weight(&self) -> f64 {
        self.weight_moments().mu1
    }

    /// Cover probability of the signature when source bit `j` has code
    /// cover coefficient `f[j]` (all for the same mask weight).
    ///
    /// For independent bits this is `prod_j (p_j f_j + 1 - p_j)`; for the
    /// weight-uniform models it averages the product of `f_j` over uniform
    /// subsets of each weight.
    pub fn cover_probability_per_bit(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len {
            return Err(Error::LengthMismatch {
                left: f.len(),
                right: self.len,
            });
        }
        Ok(match &self.kind {
            SourceKind::IndependentBits { p } => p
                .iter()
                .zip(f)
                .map(|(&pj, &fj)| pj * fj + 1.0 - pj)
                .product(),
            SourceKind::FixedWeight { r } => subset_product_means(f, *r)[*r],
            SourceKind::Empirical { hist } => {
                let top = hist.iter().rposition(|&h| h > 0.0).unwrap_or(0);
                let means = subset_product_means(f, top);
                hist.iter().zip(&means).map(|(h, m)| h * m).sum()
            }
        })
    }
}

/// `out[k]` = mean of `prod_{j in S} x_j` over all `k`-subsets `S`, for
/// `k = 0..=max_k` (the normalized elementary symmetric polynomials).
fn subset_product_means(x: &[f64], max_k: usize) -> Vec<f64> {
    let mut a = vec![0.0; max_k + 1];
    a[0] = 1.0;
    for (idx, &xj) in x.iter().enumerate() {
        let j = idx + 1;
        for k in (1..=j.min(max_k)).rev() {
            let jf = j as f64;
            a[k] = (j - k) as f64 / jf * a[k] + k as f64 / jf * xj * a[k - 1];
        }
    }
    a
}

pub fn source_gf(model: &SourceModel, t: f64) -> f64 {
    model.gf(t)
}

/// Signature distribution for uniform code generation: `F'_m = Pi(F_m)`.
pub fn target_distribution(
    model: &SourceModel,
    code: &IsotropicDistribution,
) -> IsotropicDistribution {
    let f = code.to_basis(Basis::F);
    let coeffs = f.coeffs_dd().iter().map(|&fm| model.gf_dd(fm)).collect();
    IsotropicDistribution::from_dd(code.n(), Basis::F, coeffs).expect("same length as code")
}

/// Signature distribution when source bit `j` is coded with `specs[j]`.
pub fn target_distribution_per_bit(
    model: &SourceModel,
    specs: &[CodeSpec],
) -> Result<IsotropicDistribution> {
    let n = specs.first().ok_or(Error::ZeroLength)?.n();
    if let Some(s) = specs.iter().find(|s| s.n() != n) {
        return Err(Error::LengthMismatch {
            left: s.n(),
            right: n,
        });
    }
    let coeffs = (0..=n)
        .map(|a| {
            let f: Vec<f64> = specs.iter().map(|s| s.cover_probability(a)).collect();
            model.cover_probability_per_bit(&f).map(Dd::new)
        })
        .collect::<Result<Vec<_>>>()?;
    IsotropicDistribution::from_dd(n, Basis::F, coeffs)
}

/// Mean and variance of the signature weight from `Pi(F_(n-1))` and
/// `Pi(F_(n-2))`; the third moment comes from the full target distribution.
pub fn target_moments(model: &SourceModel, code: &IsotropicDistribution) -> MomentSet {
    let n = code.n();
    let f = code.to_basis(Basis::F);
    let nn = Dd::new(n as f64);
    let pi1 = model.gf_dd(f.coeffs_dd()[n - 1]);
    let pi2 = if n >= 2 {
        model.gf_dd(f.coeffs_dd()[n - 2])
    } else {
        Dd::ZERO
    };
    let mu1 = nn * (Dd::ONE - pi1);
    let var = nn * (pi1 - nn * pi1 * pi1 + Dd::new(n as f64 - 1.0) * pi2);
    let mu2 = var + mu1 * mu1;
    let mu3 = target_distribution(model, code).moments().mu3;
    MomentSet {
        mu1: mu1.to_f64(),
        mu2: mu2.to_f64(),
        mu3,
        variance: var.to_f64(),
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("{q} is outside (0, 1)")));
    }
    Ok(())
}

/// `ln theta` for binomial codes, record weight `r`, query weight `s`:
/// `n ln[(1 - q^r)(1 - q^s) + q^s]`.
pub fn ln_false_drop_binomial(n: usize, r: usize, s: usize, q: f64) -> f64 {
    let qr = q.powi(r as i32);
    let qs = q.powi(s as i32);
    n as f64 * (-qr * (1.0 - qs)).ln_1p()
}

/// Expected fraction of statistical covers between independent random
/// record and query signatures under binomial codes.
pub fn false_drop_binomial(n: usize, r: usize, s: usize, q: f64) -> f64 {
    ln_false_drop_binomial(n, r, s, q).exp()
}

/// Minimizer of [`false_drop_binomial`] in `q`: `q^s = r / (r + s)`.
pub fn optimal_q_binomial(r: usize, s: usize) -> f64 {
    (r as f64 / (r + s) as f64).powf(1.0 / s as f64)
}

/// First-order signature length for binomial codes:
/// `ceil(r e / s_min * |ln theta_max|)`. Valid asymptotically for `r >> s_min`.
/// `theta_max = 1` means no constraint and yields 0.
pub fn required_length(r: usize, s_min: usize, theta_max: f64) -> Result<usize> {
    if !(theta_max > 0.0 && theta_max <= 1.0) {
        return Err(Error::param(
            "theta_max",
            format!("{theta_max} is outside (0, 1)"),
        ));
    }
    if s_min == 0 {
        return Err(Error::param("s_min", "must be at least 1"));
    }
    let raw = r as f64 * E / s_min as f64 * theta_max.ln().abs();
    Ok(raw.ceil() as usize)
}

/// [`required_length`] bumped upward until the exact binomial `theta` at the
/// optimal `q` is at most `theta_max`.
pub fn required_length_checked(r: usize, s_min: usize, theta_max: f64) -> Result<usize> {
    let mut n = required_length(r, s_min, theta_max)?;
    if r == 0 || theta_max >= 1.0 {
        return Ok(n);
    }
    let q = optimal_q_binomial(r, s_min);
    let per_bit = ln_false_drop_binomial(1, r, s_min, q);
    let ln_max = theta_max.ln();
    if per_bit < 0.0 {
        n = n.max((ln_max / per_bit).ceil() as usize);
    }
    while ln_false_drop_binomial(n, r, s_min, q) > ln_max {
        n += 1;
    }
    Ok(n)
}

/// Roberts' approximation for fixed-weight codes with `q = 1 - w/n`:
/// `ln theta ~ n (1 - q^s) ln(1 - q^r)`.
pub fn ln_false_drop_fixed_weight(n: usize, r: usize, s: usize, w: usize) -> f64 {
    let q = 1.0 - w as f64 / n as f64;
    let qr = q.powi(r as i32);
    let qs = q.powi(s as i32);
    n as f64 * (1.0 - qs) * (-qr).ln_1p()
}

pub fn false_drop_fixed_weight(n: usize, r: usize, s: usize, w: usize) -> f64 {
    ln_false_drop_fixed_weight(n, r, s, w).exp()
}

/// Code weight putting the signature at half density, `q^r = 1/2`:
/// `round(n (1 - 2^(-1/r)))`.
pub fn fixed_weight_for_half(n: usize, r: usize) -> usize {
    let w = n as f64 * (1.0 - 0.5_f64.powf(1.0 / r.max(1) as f64));
    (w.round() as usize).clamp(1, n)
}

/// `db_size * G_m` of the signature distribution: the predicted number of
/// records a prescreen with a weight-`m` query signature keeps.
pub fn expected_candidates(
    target: &IsotropicDistribution,
    query_weight: usize,
    db_size: usize,
) -> Result<f64> {
    if query_weight > target.n() {
        return Err(Error::param(
            "query_weight",
            format!("{query_weight} exceeds n = {}", target.n()),
        ));
    }
    let g = target.to_basis(Basis::G).coeff(query_weight);
    Ok(db_size as f64 * g)
}

/// Probability that an independent query signature is covered by a record
/// signature: `sum_a C(n, a) p_a(record) F_a(query)`.
pub fn independent_false_drop(
    record: &IsotropicDistribution,
    query: &IsotropicDistribution,
) -> Result<f64> {
    let n = record.n();
    if query.n() != n {
        return Err(Error::LengthMismatch {
            left: query.n(),
            right: n,
        });
    }
    let p = record.to_basis(Basis::P);
    let f = query.to_basis(Basis::F);
    let total: Dd = (0..=n)
        .map(|a| binomial_dd(n, a) * p.coeffs_dd()[a] * f.coeffs_dd()[a])
        .sum();
    Ok(total.to_f64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Binomial,
    FixedWeight,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Binomial => "binomial",
            Scheme::FixedWeight => "fixed",
        })
    }
}

/// Predicted behavior of a code design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub scheme: Scheme,
    pub n: usize,
    pub r: Option<usize>,
    pub s: Option<usize>,
    pub q: f64,
    pub w: Option<usize>,
    pub theta: Option<f64>,
    pub ln_theta: Option<f64>,
    /// Set when `theta` comes from an approximation rather than an exact formula.
    pub approximate: bool,
    pub target_mean: f64,
    pub target_variance: f64,
    pub epsilon: Option<f64>,
    pub q_series: Option<f64>,
    pub pi_q: Option<f64>,
}

impl DesignReport {
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let mut rows = vec![
            ("scheme", self.scheme.to_string()),
            ("n", self.n.to_string()),
        ];
        let mut opt = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                rows.push((k, v));
            }
        };
        opt("r", self.r.map(|v| v.to_string()));
        opt("s", self.s.map(|v| v.to_string()));
        opt("q", Some(format!("{:.6}", self.q)));
        opt("w", self.w.map(|v| v.to_string()));
        opt("theta", self.theta.map(|v| format!("{v:.6e}")));
        opt("ln_theta", self.ln_theta.map(|v| format!("{v:.6}")));
        opt("epsilon", self.epsilon.map(|v| format!("{v:.6}")));
        opt("q_series", self.q_series.map(|v| format!("{v:.6}")));
        opt("pi_q", self.pi_q.map(|v| format!("{v:.9}")));
        rows.push(("approximate", self.approximate.to_string()));
        rows.push(("target_mean", format!("{:.6}", self.target_mean)));
        rows.push(("target_variance", format!("{:.6}", self.target_variance)));
        rows
    }
}

impl fmt::Display for DesignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.rows() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn check_weights(r: usize, s: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::param("r", "must be at least 1"));
    }
    if s == 0 {
        return Err(Error::param("s", "must be at least 1"));
    }
    Ok(())
}

/// Exact prediction for binomial codes and fixed-weight records and queries.
pub fn design_binomial(n: usize, r: usize, s: usize, q: f64) -> Result<DesignReport> {
    check_q(q)?;
    check_weights(r, s)?;
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    let model = SourceModel::fixed_weight(r, r)?;
    let m = target_moments(&model, &IsotropicDistribution::from_binomial(n, q)?);
    let ln_theta = ln_false_drop_binomial(n, r, s, q);
    Ok(DesignReport {
        scheme: Scheme::Binomial,
        n,
        r: Some(r),
        s: Some(s),
        q,
        w: None,
        theta: Some(ln_theta.exp()),
        ln_theta: Some(ln_theta),
        approximate: false,
        target_mean: m.mu1,
        target_variance: m.variance,
        epsilon: None,
        q_series: None,
        pi_q: None,
    })
}

/// Prediction for fixed-weight codes; `theta` is Roberts' approximation,
/// the signature moments are exact.
pub fn design_fixed_weight(n: usize, r: usize, s: usize, w: usize) -> Result<DesignReport> {
    check_weights(r, s)?;
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    if w == 0 || w > n {
        return Err(Error::param("w", format!("{w} is outside 1..={n}")));
    }
    let model = SourceModel::fixed_weight(r, r)?;
    let m = target_moments(&model, &IsotropicDistribution::from_fixed_weight(n, w)?);
    let ln_theta = ln_false_drop_fixed_weight(n, r, s, w);
    Ok(DesignReport {
        scheme: Scheme::FixedWeight,
        n,
        r: Some(r),
        s: Some(s),
        q: 1.0 - w as f64 / n as f64,
        w: Some(w),
        theta: Some(ln_theta.exp()),
        ln_theta: Some(ln_theta),
        approximate: true,
        target_mean: m.mu1,
        target_variance: m.variance,
        epsilon: None,
        q_series: None,
        pi_q: None,
    })
}

/// `ln 2`-optimal fixed weight for record weight `r`: `round(n ln 2 / r)`.
pub fn roberts_weight(n: usize, r: usize) -> usize {
    ((n as f64 * LN_2 / r.max(1) as f64).round() as usize).clamp(1, n)
}
