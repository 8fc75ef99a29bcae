//! Coin-processing combinators: the five-step quantum protocol and the
//! classical constructions it is compared against.
//!
//! Everything here is exact in distribution; imperfect outputs can only come
//! from imperfect inputs. Unbounded-repeat stages are bounded by `max_rounds`
//! / `max_draws` and report a cutoff instead of hanging.

pub mod doubling;

use crate::coin::{Bit, CoinSource, ConsumptionMeter};
use crate::quoin::{sample_quoin, Basis, NoiseModel, QuoinSpec};
use doubling::TruncatedDoubling;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub const STEP_Z_QUOIN: &str = "z_quoin";
pub const STEP_X_QUOIN: &str = "x_quoin";

#[derive(Debug, Error, PartialEq)]
pub enum FactoryError {
    #[error("{stage}: cutoff exceeded after {rounds} rounds / {draws} draws")]
    Cutoff {
        stage: &'static str,
        rounds: u64,
        draws: u64,
    },
    #[error("invalid parameter: {what}")]
    Domain { what: &'static str },
}

/// Cutoffs and tossing strategy shared by every pipeline stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FactoryPipeline {
    /// Bound on repeat rounds for the race/ratio/von Neumann stages.
    pub max_rounds: u64,
    /// Bound on source draws for the doubling and square-root stages.
    pub max_draws: u64,
    /// Skip tosses whose value cannot change the outcome.
    pub lazy_toss: bool,
    /// Take fair bits from system randomness instead of von Neumann
    /// extraction on the p-coin (sensitivity analysis only; default off so
    /// classical cost stays in p-coin units).
    pub half_coin_free: bool,
}

impl Default for FactoryPipeline {
    fn default() -> Self {
        Self {
            max_rounds: 1_000_000,
            max_draws: 1 << 20,
            lazy_toss: true,
            half_coin_free: false,
        }
    }
}

impl FactoryPipeline {
    pub fn validate(&self) -> Result<(), FactoryError> {
        if self.max_rounds == 0 {
            return Err(FactoryError::Domain {
                what: "max_rounds must be at least 1",
            });
        }
        if self.max_draws < 32 {
            return Err(FactoryError::Domain {
                what: "max_draws must be at least 32",
            });
        }
        Ok(())
    }
}

/// Von Neumann extraction: flip twice, start over on equal outcomes,
/// otherwise output the second value. Exactly fair for any bias in (0,1).
pub fn von_neumann(src: &mut impl CoinSource, max_rounds: u64) -> Result<Bit, FactoryError> {
    for _ in 0..max_rounds {
        let first = src.toss();
        let second = src.toss();
        if first != second {
            return Ok(second);
        }
    }
    Err(FactoryError::Cutoff {
        stage: "von_neumann",
        rounds: max_rounds,
        draws: 2 * max_rounds,
    })
}

/// The m-coin: toss twice, head iff the tosses differ. Head probability
/// 2p(1-p) at exactly two draws.
pub fn diff_coin(src: &mut impl CoinSource) -> Bit {
    Bit::from_head(src.toss() != src.toss())
}

/// The s-coin stage: repeat { toss m-coin; tail -> output tail; toss again;
/// tail -> output head; both heads -> repeat }. Head probability m/(m+1).
/// With `lazy` the second toss is skipped after a leading tail.
pub fn race_coin<F>(mut msrc: F, lazy: bool, max_rounds: u64) -> Result<Bit, FactoryError>
where
    F: FnMut() -> Result<Bit, FactoryError>,
{
    for _ in 0..max_rounds {
        let first = msrc()?;
        if lazy {
            if !first.is_head() {
                return Ok(Bit::Tail);
            }
            if !msrc()?.is_head() {
                return Ok(Bit::Head);
            }
        } else {
            let second = msrc()?;
            if !first.is_head() {
                return Ok(Bit::Tail);
            }
            if !second.is_head() {
                return Ok(Bit::Head);
            }
        }
    }
    Err(FactoryError::Cutoff {
        stage: "race_coin",
        rounds: max_rounds,
        draws: 0,
    })
}

/// The step-5 stage: toss the s-coin then the t-coin; HT outputs head, TH
/// outputs tail, anything else repeats. Head probability s(1-t) / (s(1-t) +
/// (1-s)t), which is m/(m+n) for race-derived inputs.
pub fn ratio_coin<F, G>(mut ssrc: F, mut tsrc: G, max_rounds: u64) -> Result<Bit, FactoryError>
where
    F: FnMut() -> Result<Bit, FactoryError>,
    G: FnMut() -> Result<Bit, FactoryError>,
{
    for _ in 0..max_rounds {
        let s = ssrc()?;
        let t = tsrc()?;
        match (s.is_head(), t.is_head()) {
            (true, false) => return Ok(Bit::Head),
            (false, true) => return Ok(Bit::Tail),
            _ => {}
        }
    }
    Err(FactoryError::Cutoff {
        stage: "ratio_coin",
        rounds: max_rounds,
        draws: 0,
    })
}

/// One f(p) = 4p(1-p) output and its full consumption record.
#[derive(Clone, Debug)]
pub struct F4pOutcome {
    pub bit: Bit,
    pub meter: ConsumptionMeter,
    pub purify_rejections: u64,
}

struct QuoinTap<'a> {
    spec: &'a QuoinSpec,
    noise: &'a NoiseModel,
    rng: &'a mut ChaCha8Rng,
    meter: ConsumptionMeter,
    purify_rejections: u64,
}

impl QuoinTap<'_> {
    fn measure(&mut self, basis: Basis, step: &'static str) -> Bit {
        let outcome = sample_quoin(self.spec, &basis, self.noise, self.rng);
        self.meter.record(step, 1);
        self.purify_rejections += outcome.purify_rejections;
        outcome.bit
    }

    fn m_coin(&mut self) -> Bit {
        let a = self.measure(Basis::Z, STEP_Z_QUOIN);
        let b = self.measure(Basis::Z, STEP_Z_QUOIN);
        Bit::from_head(a != b)
    }

    fn n_coin(&mut self) -> Bit {
        let a = self.measure(Basis::X, STEP_X_QUOIN);
        let b = self.measure(Basis::X, STEP_X_QUOIN);
        Bit::from_head(a != b)
    }

    fn s_coin(&mut self, pipe: &FactoryPipeline) -> Result<Bit, FactoryError> {
        let lazy = pipe.lazy_toss;
        let rounds = pipe.max_rounds;
        race_coin(|| Ok(self.m_coin()), lazy, rounds)
    }

    fn t_coin(&mut self, pipe: &FactoryPipeline) -> Result<Bit, FactoryError> {
        let lazy = pipe.lazy_toss;
        let rounds = pipe.max_rounds;
        race_coin(|| Ok(self.n_coin()), lazy, rounds)
    }
}

/// The full protocol: Z-measured quoins feed the m-branch, X-measured quoins
/// the n-branch, raced into s- and t-coins and combined by the ratio stage.
/// Ideal quoins give head probability exactly 4p(1-p).
pub fn quantum_f4p(
    spec: &QuoinSpec,
    noise: &NoiseModel,
    pipe: &FactoryPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<F4pOutcome, FactoryError> {
    let mut tap = QuoinTap {
        spec,
        noise,
        rng,
        meter: ConsumptionMeter::new(),
        purify_rejections: 0,
    };
    for _ in 0..pipe.max_rounds {
        let s = tap.s_coin(pipe)?;
        let t = tap.t_coin(pipe)?;
        let bit = match (s.is_head(), t.is_head()) {
            (true, false) => Bit::Head,
            (false, true) => Bit::Tail,
            _ => continue,
        };
        return Ok(F4pOutcome {
            bit,
            meter: tap.meter,
            purify_rejections: tap.purify_rejections,
        });
    }
    Err(FactoryError::Cutoff {
        stage: "quantum_f4p",
        rounds: pipe.max_rounds,
        draws: tap.meter.total(),
    })
}

/// min(2p, 1 - 2*eps1p) from a p-coin via degree-doubling envelopes.
pub fn truncated_double(
    src: &mut impl CoinSource,
    eps1p: f64,
    pipe: &FactoryPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<Bit, FactoryError> {
    TruncatedDoubling::new(eps1p)?.sample(src, pipe.max_draws, rng)
}

/// min(4p(1-p), 1 - eps1): the m-coin composed into the doubling factory,
/// h(g(p)) with g(p) = 2p(1-p) and h(y) = min(2y, 1 - eps1).
pub fn classical_ft(
    src: &mut impl CoinSource,
    eps1: f64,
    pipe: &FactoryPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<Bit, FactoryError> {
    let factory = TruncatedDoubling::new(eps1 / 2.0)?;
    let mut gcoin = DiffAdapter { src };
    factory.sample(&mut gcoin, pipe.max_draws, rng)
}

struct DiffAdapter<'a, S: CoinSource> {
    src: &'a mut S,
}

impl<S: CoinSource> CoinSource for DiffAdapter<'_, S> {
    fn toss(&mut self) -> Bit {
        diff_coin(self.src)
    }
}

/// sqrt(f) from an f-coin via the binomial series
/// 1 - sqrt(f) = sum_k c_k (1-f)^k with c_1 = 1/2, c_{k+1} = c_k (2k-1)/(2k+2):
/// the mixture depth is resolved progressively, flips stop at the first head.
/// The f-coin closure receives the shared entropy stream.
pub fn sqrt_coin<F>(mut fsrc: F, max_draws: u64, rng: &mut ChaCha8Rng) -> Result<Bit, FactoryError>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<Bit, FactoryError>,
{
    let mut survival = 1.0f64;
    let mut coeff = 0.5f64;
    let mut k = 1u64;
    loop {
        if k > max_draws {
            return Err(FactoryError::Cutoff {
                stage: "sqrt_coin",
                rounds: k,
                draws: k - 1,
            });
        }
        if fsrc(rng)?.is_head() {
            return Ok(Bit::Head);
        }
        // flip k was tail; stop here iff the mixture depth equals k
        if rng.gen::<f64>() < (coeff / survival).min(1.0) {
            return Ok(Bit::Tail);
        }
        survival -= coeff;
        coeff *= (2 * k - 1) as f64 / (2 * k + 2) as f64;
        k += 1;
    }
}

/// A fair bit in p-coin units (von Neumann on the source), or from system
/// randomness when the pipeline opts into free fair bits.
pub fn half_coin(
    src: &mut impl CoinSource,
    pipe: &FactoryPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<Bit, FactoryError> {
    if pipe.half_coin_free {
        return Ok(Bit::from_head(rng.gen::<bool>()));
    }
    von_neumann(src, pipe.max_rounds)
}

/// The truncated q-coin Q_t(p) = [1 + sqrt(f_t(p))]/2: toss the 1/2-coin and
/// the sqrt(f_t)-coin, tail iff both are tail. `eps1` parameterizes the inner
/// truncation; the outer one is eps3 with 1 - eps3 = [1 + sqrt(1 - eps1)]/2.
pub fn classical_qt(
    src: &mut impl CoinSource,
    eps1: f64,
    pipe: &FactoryPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<Bit, FactoryError> {
    let half = half_coin(src, pipe, rng)?;
    if pipe.lazy_toss && half.is_head() {
        return Ok(Bit::Head);
    }
    let factory = TruncatedDoubling::new(eps1 / 2.0)?;
    let sqrt_bit = sqrt_coin(
        |r| {
            let mut gcoin = DiffAdapter { src: &mut *src };
            factory.sample(&mut gcoin, pipe.max_draws, r)
        },
        pipe.max_draws,
        rng,
    )?;
    Ok(Bit::from_head(half.is_head() || sqrt_bit.is_head()))
}
