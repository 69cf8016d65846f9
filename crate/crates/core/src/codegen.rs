//! Random code words and codebooks.

use rayon::prelude::*;

use crate::bitkit::{superimpose, BitPattern};
use crate::error::{Error, Result};
use crate::isotropic::IsotropicDistribution;
use crate::numeric::subset_ratio;
use crate::rng::{stream, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodeKind {
    /// Exactly `w` distinct positions set, uniformly chosen.
    FixedWeight { w: usize },
    /// Each position set independently with probability `1 - q`.
    Binomial { q: f64 },
}

/// How the code word of one source bit is drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeSpec {
    n: usize,
    kind: CodeKind,
}

impl CodeSpec {
    /// `w` must lie in `0..=n`. Weight 0 yields the all-zero word, which
    /// removes the source bit from the signature entirely.
    pub fn fixed_weight(n: usize, w: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroLength);
        }
        if w > n {
            return Err(Error::param("w", format!("{w} exceeds n = {n}")));
        }
        Ok(CodeSpec {
            n,
            kind: CodeKind::FixedWeight { w },
        })
    }

    pub fn binomial(n: usize, q: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroLength);
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::param("q", format!("{q} is outside (0, 1)")));
        }
        Ok(CodeSpec {
            n,
            kind: CodeKind::Binomial { q },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    /// F-basis distribution of one code word.
    pub fn coefficients(&self) -> IsotropicDistribution {
        match self.kind {
            CodeKind::FixedWeight { w } => IsotropicDistribution::from_fixed_weight(self.n, w),
            CodeKind::Binomial { q } => IsotropicDistribution::from_binomial(self.n, q),
        }
        .expect("validated code spec")
    }

    /// `F_a`: probability that the code word lies under a fixed weight-`a` mask.
    pub fn cover_probability(&self, a: usize) -> f64 {
        let a = a.min(self.n);
        match self.kind {
            CodeKind::FixedWeight { w } => subset_ratio(a, self.n, w),
            CodeKind::Binomial { q } => q.powi((self.n - a) as i32),
        }
    }

    pub fn mean_weight(&self) -> f64 {
        match self.kind {
            CodeKind::FixedWeight { w } => w as f64,
            CodeKind::Binomial { q } => self.n as f64 * (1.0 - q),
        }
    }

    /// Draws one code word.
    ///
    /// Fixed weight uses a partial Fisher-Yates shuffle of `0..n`
    /// (`j = i + next_u64() mod (n - i)`, swap slots `i` and `j`, keep the
    /// first `w` slots). Binomial visits positions in ascending order and
    /// sets bit `i` iff `next_f64() < 1 - q`.
    pub fn sample(&self, rng: &mut SplitMix64) -> BitPattern {
        let mut word = BitPattern::zeros(self.n).expect("n >= 1");
        match self.kind {
            CodeKind::FixedWeight { w } => {
                let mut slots: Vec<u32> = (0..self.n as u32).collect();
                for i in 0..w {
                    let j = i + rng.below((self.n - i) as u64) as usize;
                    slots.swap(i, j);
                    word.set(slots[i] as usize);
                }
            }
            CodeKind::Binomial { q } => {
                let p = 1.0 - q;
                for i in 0..self.n {
                    if rng.next_f64() < p {
                        word.set(i);
                    }
                }
            }
        }
        word
    }
}

pub fn spec_coefficients(spec: &CodeSpec) -> IsotropicDistribution {
    spec.coefficients()
}

pub fn sample_codeword(spec: &CodeSpec, rng: &mut SplitMix64) -> BitPattern {
    spec.sample(rng)
}

/// The code word of source bit `index` in the codebook with `seed`.
///
/// Each word has its own stream, so any subset of a codebook can be
/// materialized without generating the rest.
pub fn generate_word(spec: &CodeSpec, seed: u64, index: usize) -> BitPattern {
    spec.sample(&mut stream(seed, index as u64))
}

/// A materialized assignment of code words to source bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n: usize,
    words: Vec<BitPattern>,
    specs: Vec<CodeSpec>,
    seed: u64,
}

pub fn build_codebook(specs: Vec<CodeSpec>, seed: u64) -> Result<Codebook> {
    Codebook::build(specs, seed)
}

impl Codebook {
    pub fn build(specs: Vec<CodeSpec>, seed: u64) -> Result<Self> {
        let n = specs.first().ok_or(Error::ZeroLength)?.n;
        if let Some(bad) = specs.iter().find(|s| s.n != n) {
            return Err(Error::LengthMismatch {
                left: bad.n,
                right: n,
            });
        }
        let words = specs
            .par_iter()
            .enumerate()
            .map(|(j, spec)| generate_word(spec, seed, j))
            .collect();
        Ok(Codebook {
            n,
            words,
            specs,
            seed,
        })
    }

    /// Target length `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Source length `N`.
    pub fn source_len(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[BitPattern] {
        &self.words
    }

    pub fn specs(&self) -> &[CodeSpec] {
        &self.specs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The shared spec if every source bit uses the same one.
    pub fn uniform_spec(&self) -> Option<CodeSpec> {
        let first = self.specs[0];
        self.specs.iter().all(|s| *s == first).then_some(first)
    }

    pub fn encode(&self, source: &BitPattern) -> Result<BitPattern> {
        superimpose(&self.words, source)
    }
}
