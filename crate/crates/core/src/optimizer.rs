//! Choosing code weights.
//!
//! Two routes: per-bit fixed weights for independent source bits with known
//! frequencies, and a single shared weight derived from the moments (or the
//! full weight histogram) of an arbitrary source. Both aim the signature at
//! half density, `F'_(n-1) = 1/2`.

use std::f64::consts::LN_2;

use crate::analysis::{target_moments, DesignReport, Scheme, SourceModel};
use crate::codegen::CodeSpec;
use crate::error::{Error, Result};
use crate::isotropic::{Basis, IsotropicDistribution, MomentSet};
use crate::numeric::binomial;

/// Per-source-bit code weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPlan {
    pub n: usize,
    pub weights: Vec<usize>,
    /// First-order estimate of `lambda - 2` for the Lagrange multiplier.
    pub lambda_diag: f64,
    pub max_p: f64,
    pub warnings: Vec<String>,
}

impl WeightPlan {
    pub fn specs(&self) -> Vec<CodeSpec> {
        self.weights
            .iter()
            .map(|&w| CodeSpec::fixed_weight(self.n, w).expect("weights within 0..=n"))
            .collect()
    }

    /// `F'_a = prod_j (p_j F^(j)_a + 1 - p_j)` for fixed-weight code words.
    pub fn cover_probability(&self, p: &[f64], a: usize) -> Result<f64> {
        let model = SourceModel::independent(p.to_vec())?;
        let f: Vec<f64> = self
            .specs()
            .iter()
            .map(|s| s.cover_probability(a))
            .collect();
        model.cover_probability_per_bit(&f)
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Fixed weights for independent source bits with frequencies `p`:
/// `w_j = n / (1 - p_j) * ln 2 / sum_k p_k / (1 - p_k)`, rounded half up
/// and clamped to `1..=n`.
///
/// Bits with `p_j = 0` are never set; they get weight 0 and a warning.
/// `p_j >= 1` is rejected.
pub fn optimal_weights_independent(p: &[f64], n: usize) -> Result<WeightPlan> {
    if n < 2 {
        return Err(Error::param("n", format!("{n} is below 2")));
    }
    if p.is_empty() {
        return Err(Error::ZeroLength);
    }
    if let Some(j) = p.iter().position(|&x| x >= 1.0 || x.is_nan()) {
        return Err(Error::param(
            "p",
            format!("p[{j}] = {} is not below 1", p[j]),
        ));
    }
    let odds: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| x / (1.0 - x)).sum();
    if odds <= 0.0 {
        return Err(Error::param("p", "no source bit has positive frequency"));
    }
    let nf = n as f64;
    let mut warnings = Vec::new();
    let weights = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| {
            if pj <= 0.0 {
                warnings.push(format!("bit {j}: p = {pj}, excluded with weight 0"));
                return 0;
            }
            let w = round_half_up(nf / (1.0 - pj) * LN_2 / odds).clamp(1, n);
            // u_j = 1 - p_j w_j / n must stay within [1 - (n-1) p_j / n, 1].
            if w == n {
                warnings.push(format!(
                    "bit {j}: weight clamped to n, outside the admissible domain"
                ));
            }
            w
        })
        .collect();
    Ok(WeightPlan {
        n,
        weights,
        lambda_diag: 1.0 / nf - 2.0 * LN_2 / odds,
        max_p: p.iter().copied().fold(0.0, f64::max),
        warnings,
    })
}

/// The isotropic distribution on `N` bits with the same weight histogram:
/// `p_m = hist[m] / C(N, m)`. Its generating function equals the source's.
pub fn isotropize(hist: &[f64], len: usize) -> Result<IsotropicDistribution> {
    let model = SourceModel::empirical(len, hist.to_vec())?;
    let h = model.weight_histogram();
    let p = h
        .iter()
        .enumerate()
        .map(|(m, &hm)| hm / binomial(len, m))
        .collect();
    IsotropicDistribution::new(len, Basis::P, p)
}

/// Three-term inversion of `G'_1 = sum_m (-1)^(m+1) mu_m eps^m / m!`:
///
/// `eps = G/mu1 + mu2 G^2 / (2 mu1^3) + (3 mu2^2 - mu1 mu3) G^3 / (6 mu1^5)`.
pub fn solve_epsilon(moments: &MomentSet, target_g1: f64) -> Result<f64> {
    let MomentSet { mu1, mu2, mu3, .. } = *moments;
    if mu1.is_nan() || mu1 <= 0.0 {
        return Err(Error::param("mu1", format!("{mu1} is not positive")));
    }
    if !(target_g1 > 0.0 && target_g1 < 1.0) {
        return Err(Error::param(
            "target_g1",
            format!("{target_g1} is outside (0, 1)"),
        ));
    }
    let g = target_g1;
    Ok(g / mu1
        + mu2 * g * g / (2.0 * mu1.powi(3))
        + (3.0 * mu2 * mu2 - mu1 * mu3) * g.powi(3) / (6.0 * mu1.powi(5)))
}

/// Forward series truncated after the third moment:
/// `mu1 eps - mu2 eps^2 / 2 + mu3 eps^3 / 6`. Its truncation error is of
/// order `mu4 eps^4 / 24`.
pub fn g1_series(moments: &MomentSet, eps: f64) -> f64 {
    moments.mu1 * eps - moments.mu2 * eps * eps / 2.0 + moments.mu3 * eps.powi(3) / 6.0
}

/// Shared fixed-weight design from moments alone: `q = e^(-eps)`,
/// `w = round(n (1 - q))`.
pub fn design_from_moments(moments: &MomentSet, n: usize) -> Result<(CodeSpec, f64)> {
    if n < 2 {
        return Err(Error::param("n", format!("{n} is below 2")));
    }
    let eps = solve_epsilon(moments, 0.5)?;
    let q = (-eps).exp();
    let w = round_half_up(n as f64 * (1.0 - q)).clamp(1, n);
    Ok((CodeSpec::fixed_weight(n, w)?, q))
}

/// Solves `Pi(q) = 1/2` on `(0, 1)` by bisection; `Pi` is increasing.
fn bisect_half(model: &SourceModel) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.gf(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One shared fixed-weight code for an arbitrary source given its weight
/// histogram.
///
/// The moment series supplies a first estimate `q = e^(-eps)`; since the
/// full histogram is known, `Pi(q) = 1/2` is then solved exactly by
/// bisection. The report keeps both `q_series` and the refined `q`.
pub fn general_design(hist: &[f64], len: usize, n: usize) -> Result<(CodeSpec, DesignReport)> {
    if n < 2 {
        return Err(Error::param("n", format!("{n} is below 2")));
    }
    let model = SourceModel::empirical(len, hist.to_vec())?;
    let h = model.weight_histogram();
    if h[0] >= 0.5 {
        return Err(Error::param(
            "hist",
            format!(
                "weight 0 has probability {}, Pi(q) = 1/2 is unattainable",
                h[0]
            ),
        ));
    }
    let moments = MomentSet::from_histogram(&h);
    let eps = solve_epsilon(&moments, 0.5)?;
    let q_series = (-eps).exp();
    let q = bisect_half(&model);
    let w = round_half_up(n as f64 * (1.0 - q)).clamp(1, n);
    let spec = CodeSpec::fixed_weight(n, w)?;
    let m = target_moments(&model, &spec.coefficients());
    let report = DesignReport {
        scheme: Scheme::FixedWeight,
        n,
        r: None,
        s: None,
        q,
        w: Some(w),
        theta: None,
        ln_theta: None,
        approximate: false,
        target_mean: m.mu1,
        target_variance: m.variance,
        epsilon: Some(eps),
        q_series: Some(q_series),
        pi_q: Some(model.gf(q)),
    };
    Ok((spec, report))
}
