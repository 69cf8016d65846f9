//! Brute-force oracles shared by the integration tests. They enumerate
//! patterns directly and never call the conversion or generating-function
//! code under test.

#![allow(dead_code)]

use supcode::rng::SplitMix64;

/// Exact `C(n, k)` for small arguments.
pub fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1u128;
    for i in 0..k.min(n - k) {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// Random per-pattern probabilities `p_k` of an isotropic distribution on
/// `n` bits. Roughly a third of the weights get zero mass.
pub fn random_p_vector(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let mut mass: Vec<f64> = (0..=n)
        .map(|_| {
            if rng.next_f64() < 0.3 {
                0.0
            } else {
                rng.next_f64()
            }
        })
        .collect();
    if mass.iter().all(|&m| m == 0.0) {
        mass[rng.below(n as u64 + 1) as usize] = 1.0;
    }
    let total: f64 = mass.iter().sum();
    mass.iter()
        .enumerate()
        .map(|(k, m)| m / total / choose(n, k))
        .collect()
}

/// `F_a` by summing `p_|xi|` over every pattern `xi` under the mask of the
/// first `a` positions.
pub fn enumerate_f(n: usize, p: &[f64]) -> Vec<f64> {
    (0..=n)
        .map(|a| {
            let mask: u64 = (1u64 << a) - 1;
            (0u64..1 << n)
                .filter(|xi| xi & !mask == 0)
                .map(|xi| p[xi.count_ones() as usize])
                .sum()
        })
        .collect()
}

/// `G_a` by summing over patterns containing the first `a` positions.
pub fn enumerate_g(n: usize, p: &[f64]) -> Vec<f64> {
    (0..=n)
        .map(|a| {
            let mask: u64 = (1u64 << a) - 1;
            (0u64..1 << n)
                .filter(|xi| xi & mask == mask)
                .map(|xi| p[xi.count_ones() as usize])
                .sum()
        })
        .collect()
}

/// Random probability distribution over all `2^len` source patterns.
pub fn random_pattern_distribution(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    let mass: Vec<f64> = (0..1usize << len)
        .map(|_| {
            if rng.next_f64() < 0.25 {
                0.0
            } else {
                rng.next_f64()
            }
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if total == 0.0 {
        let mut m = vec![0.0; 1 << len];
        m[0] = 1.0;
        return m;
    }
    mass.iter().map(|m| m / total).collect()
}

/// Mask cover probability for per-bit code words: the sum over all source
/// patterns `beta` of `P(beta) * prod_{j in beta} F^(j)_a`.
pub fn brute_cover(pattern_prob: &[f64], per_bit_f: &[f64]) -> f64 {
    pattern_prob
        .iter()
        .enumerate()
        .map(|(beta, &pb)| {
            pb * (0..per_bit_f.len())
                .filter(|j| beta >> j & 1 == 1)
                .map(|j| per_bit_f[j])
                .product::<f64>()
        })
        .sum()
}

/// Pattern probabilities of independent bits.
pub fn independent_patterns(p: &[f64]) -> Vec<f64> {
    (0..1usize << p.len())
        .map(|beta| {
            p.iter()
                .enumerate()
                .map(|(j, &pj)| if beta >> j & 1 == 1 { pj } else { 1.0 - pj })
                .product()
        })
        .collect()
}
