//! Increment laws for `ξ` and reproducible sampling.
//!
//! Every stream is a ChaCha8 keystream: the key is derived from the master
//! seed, the 64-bit stream id is the replicate index and the block counter is
//! the position. Two `(master_seed, replicate_index)` pairs therefore never
//! share a keystream, and a replicate produces the same numbers regardless
//! of which thread runs it.
//!
//! Rademacher draws use one bit each (lowest bit first). Continuous laws use
//! one 64-bit word per uniform; the normal law uses Box–Muller on pairs.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic_limits::mp_closed_form;
use crate::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Distribution of a single coordinate `ξ`. All laws are centered and have
/// finite moments of every order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IncrementLaw {
    /// Uniform on `{−1, +1}`.
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    UniformSym,
    StandardNormal,
    /// `Exp(1) − 1`.
    CenteredExponential,
    /// Uniform on `{−c, +c}`, `c > 0`.
    ScaledRademacher(f64),
}

impl IncrementLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IncrementLaw::ScaledRademacher(c) if !(c.is_finite() && c > 0.0) => {
                Err(Error::invalid(alloc::format!("rademacher scale must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sigma(&self) -> f64 {
        law_sigma(self)
    }

    /// `E|ξ|^q`, when the law has a closed form for it.
    pub fn abs_moment(&self, q: f64) -> Option<f64> {
        law_abs_moment(self, q)
    }

    fn is_rademacher(&self) -> bool {
        matches!(self, IncrementLaw::Rademacher | IncrementLaw::ScaledRademacher(_))
    }
}

pub fn law_sigma(law: &IncrementLaw) -> f64 {
    match *law {
        IncrementLaw::Rademacher
        | IncrementLaw::UniformSym
        | IncrementLaw::StandardNormal
        | IncrementLaw::CenteredExponential => 1.0,
        IncrementLaw::ScaledRademacher(c) => c.abs(),
    }
}

pub fn law_abs_moment(law: &IncrementLaw, q: f64) -> Option<f64> {
    if !(q.is_finite() && q >= 0.0) {
        return None;
    }
    match *law {
        IncrementLaw::Rademacher => Some(1.0),
        IncrementLaw::ScaledRademacher(c) => Some(libm::pow(c.abs(), q)),
        IncrementLaw::UniformSym => Some(libm::pow(SQRT_3, q) / (q + 1.0)),
        IncrementLaw::StandardNormal => mp_closed_form(q).ok(),
        IncrementLaw::CenteredExponential => None,
    }
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncrementLaw::Rademacher => f.write_str("rademacher"),
            IncrementLaw::UniformSym => f.write_str("uniform"),
            IncrementLaw::StandardNormal => f.write_str("normal"),
            IncrementLaw::CenteredExponential => f.write_str("cexp"),
            IncrementLaw::ScaledRademacher(c) => write!(f, "rademacher:c={c}"),
        }
    }
}

impl FromStr for IncrementLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let law = match s.trim() {
            "rademacher" => IncrementLaw::Rademacher,
            "uniform" => IncrementLaw::UniformSym,
            "normal" => IncrementLaw::StandardNormal,
            "cexp" => IncrementLaw::CenteredExponential,
            other => {
                let c = other
                    .strip_prefix("rademacher:c=")
                    .and_then(|c| c.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::invalid(alloc::format!(
                            "unknown law `{other}` (expected rademacher, uniform, normal, cexp or rademacher:c=<real>)"
                        ))
                    })?;
                IncrementLaw::ScaledRademacher(c)
            }
        };
        law.validate()?;
        Ok(law)
    }
}

/// Key of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self { master_seed, replicate_index }
    }
}

/// Sequential draws of `ξ` from one stream.
#[derive(Debug, Clone)]
pub struct XiStream {
    law: IncrementLaw,
    rng: ChaCha8Rng,
    bits: u64,
    bits_left: u32,
    spare_normal: Option<f64>,
}

impl XiStream {
    pub fn new(law: IncrementLaw, seed: SeedSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.master_seed);
        rng.set_stream(seed.replicate_index);
        Self { law, rng, bits: 0, bits_left: 0, spare_normal: None }
    }

    pub fn law(&self) -> IncrementLaw {
        self.law
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    fn next_sign(&mut self) -> f64 {
        if self.bits_left == 0 {
            self.bits = self.rng.next_u64();
            self.bits_left = 64;
        }
        let bit = self.bits & 1;
        self.bits >>= 1;
        self.bits_left -= 1;
        if bit == 1 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let r = libm::sqrt(-2.0 * libm::log(self.open_uniform()));
        let (s, c) = libm::sincos(TAU * self.open_uniform());
        self.spare_normal = Some(r * s);
        r * c
    }

    #[inline]
    pub fn next_xi(&mut self) -> f64 {
        match self.law {
            IncrementLaw::Rademacher => self.next_sign(),
            IncrementLaw::ScaledRademacher(c) => c * self.next_sign(),
            IncrementLaw::UniformSym => SQRT_3 * (2.0 * self.open_uniform() - 1.0),
            IncrementLaw::StandardNormal => self.next_normal(),
            IncrementLaw::CenteredExponential => -libm::log(self.open_uniform()) - 1.0,
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        match self.law {
            IncrementLaw::Rademacher => out.iter_mut().for_each(|x| *x = self.next_sign()),
            IncrementLaw::ScaledRademacher(c) => {
                out.iter_mut().for_each(|x| *x = c * self.next_sign())
            }
            IncrementLaw::UniformSym => {
                out.iter_mut().for_each(|x| *x = SQRT_3 * (2.0 * self.open_uniform() - 1.0))
            }
            IncrementLaw::StandardNormal => out.iter_mut().for_each(|x| *x = self.next_normal()),
            IncrementLaw::CenteredExponential => {
                out.iter_mut().for_each(|x| *x = -libm::log(self.open_uniform()) - 1.0)
            }
        }
    }

    /// Sum of the next `count` draws. Consumes the stream exactly as `count`
    /// calls to [`next_xi`](Self::next_xi) would; Rademacher sums are counted
    /// a word at a time and are exact.
    pub fn sum(&mut self, count: usize) -> f64 {
        if !self.law.is_rademacher() {
            let mut acc = crate::NeumaierSum::new();
            for _ in 0..count {
                acc.add(self.next_xi());
            }
            return acc.value();
        }
        let mut ones: u64 = 0;
        let mut left = count as u64;

        let take = left.min(u64::from(self.bits_left)) as u32;
        if take > 0 {
            ones += u64::from((self.bits & low_mask(take)).count_ones());
            self.bits = if take == 64 { 0 } else { self.bits >> take };
            self.bits_left -= take;
            left -= u64::from(take);
        }
        while left >= 64 {
            ones += u64::from(self.rng.next_u64().count_ones());
            left -= 64;
        }
        if left > 0 {
            let word = self.rng.next_u64();
            let take = left as u32;
            ones += u64::from((word & low_mask(take)).count_ones());
            self.bits = word >> take;
            self.bits_left = 64 - take;
        }
        let signed = 2.0 * ones as f64 - count as f64;
        match self.law {
            IncrementLaw::ScaledRademacher(c) => c * signed,
            _ => signed,
        }
    }
}

#[inline]
fn low_mask(k: u32) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// `count` i.i.d. draws from `law`, bit-reproducible for fixed arguments.
pub fn sample_xi_block(law: &IncrementLaw, count: usize, stream: SeedSpec) -> Vec<f64> {
    let mut out = alloc::vec![0.0; count];
    XiStream::new(*law, stream).fill(&mut out);
    out
}
