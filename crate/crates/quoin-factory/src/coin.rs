//! Coins: seeded, meterable i.i.d. binary sources.
//!
//! Head is 0 and maps to the computational-basis outcome |0>; tail is 1 and
//! maps to |1>. That convention is fixed globally so that derived biases (the
//! q-coin in particular) keep their sign everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoinError {
    #[error("bias {0} is outside [0, 1]")]
    InvalidBias(f64),
}

/// One binary outcome. Head = 0 = |0>, tail = 1 = |1>.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Bit {
    Head,
    Tail,
}

impl Bit {
    pub fn is_head(self) -> bool {
        matches!(self, Bit::Head)
    }

    pub fn from_head(head: bool) -> Self {
        if head {
            Bit::Head
        } else {
            Bit::Tail
        }
    }
}

/// Anything that emits bits on demand. Implemented by base sources, metered
/// wrappers and the derived coins of the factory module.
pub trait CoinSource {
    fn toss(&mut self) -> Bit;
}

/// An i.i.d. binary source with hidden bias `p`, fully determined by
/// `(seed, stream, draw index)`.
///
/// ChaCha streams are independent keystreams, so parallel shards built from
/// the same seed and distinct stream ids are statistically independent.
#[derive(Clone, Debug)]
pub struct BiasedSource {
    p: f64,
    seed: u64,
    stream: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl BiasedSource {
    pub fn new(p: f64, seed: u64) -> Result<Self, CoinError> {
        Self::with_stream(p, seed, 0)
    }

    pub fn with_stream(p: f64, seed: u64, stream: u64) -> Result<Self, CoinError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(CoinError::InvalidBias(p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self {
            p,
            seed,
            stream,
            draws: 0,
            rng,
        })
    }

    pub fn bias(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of bits emitted so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}

impl CoinSource for BiasedSource {
    fn toss(&mut self) -> Bit {
        self.draws += 1;
        // u in [0,1): p=0 never heads, p=1 always heads.
        let u: f64 = self.rng.gen();
        Bit::from_head(u < self.p)
    }
}

/// Makes a `p`-coin. Identical `(p, seed)` replays the identical bit stream.
pub fn make_bernoulli(p: f64, seed: u64) -> Result<BiasedSource, CoinError> {
    BiasedSource::new(p, seed)
}

/// Step labels for consumption accounting.
pub type StepLabel = &'static str;

/// Counts primitive consumptions attributed to one derived output,
/// broken down by protocol step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConsumptionMeter {
    primitive_draws: u64,
    per_step: BTreeMap<StepLabel, u64>,
}

impl ConsumptionMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: StepLabel, count: u64) {
        self.primitive_draws += count;
        *self.per_step.entry(step).or_insert(0) += count;
    }

    pub fn total(&self) -> u64 {
        self.primitive_draws
    }

    pub fn per_step(&self) -> &BTreeMap<StepLabel, u64> {
        &self.per_step
    }

    pub fn step(&self, step: StepLabel) -> u64 {
        self.per_step.get(step).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &ConsumptionMeter) {
        for (step, count) in &other.per_step {
            self.record(step, *count);
        }
    }
}

/// A source wrapped with a consumption meter. Wrapping never perturbs the bit
/// stream; it only counts. Meters nest: inner and outer both see every toss.
#[derive(Clone, Debug)]
pub struct Metered<S> {
    inner: S,
    meter: ConsumptionMeter,
    step: StepLabel,
}

impl<S: CoinSource> Metered<S> {
    pub fn labelled(inner: S, step: StepLabel) -> Self {
        Self {
            inner,
            meter: ConsumptionMeter::new(),
            step,
        }
    }

    pub fn meter(&self) -> &ConsumptionMeter {
        &self.meter
    }

    pub fn into_parts(self) -> (S, ConsumptionMeter) {
        (self.inner, self.meter)
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: CoinSource> CoinSource for Metered<S> {
    fn toss(&mut self) -> Bit {
        self.meter.record(self.step, 1);
        self.inner.toss()
    }
}

/// Wraps a source with a meter under the default "base" step label.
pub fn metered<S: CoinSource>(source: S) -> Metered<S> {
    Metered::labelled(source, "base")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_of(src: &mut impl CoinSource, n: usize) -> Vec<Bit> {
        (0..n).map(|_| src.toss()).collect()
    }

    #[test]
    fn degenerate_biases() {
        let mut zero = make_bernoulli(0.0, 7).unwrap();
        assert!(stream_of(&mut zero, 200).iter().all(|b| *b == Bit::Tail));
        let mut one = make_bernoulli(1.0, 7).unwrap();
        assert!(stream_of(&mut one, 200).iter().all(|b| *b == Bit::Head));
    }

    #[test]
    fn rejects_bad_bias() {
        assert_eq!(make_bernoulli(-0.1, 0).unwrap_err(), CoinError::InvalidBias(-0.1));
        assert_eq!(make_bernoulli(1.5, 0).unwrap_err(), CoinError::InvalidBias(1.5));
        assert!(make_bernoulli(f64::NAN, 0).is_err());
    }

    #[test]
    fn replay_is_bit_exact() {
        let mut a = make_bernoulli(0.3, 99).unwrap();
        let mut b = make_bernoulli(0.3, 99).unwrap();
        assert_eq!(stream_of(&mut a, 4096), stream_of(&mut b, 4096));
        assert_eq!(a.draws(), 4096);
    }

    #[test]
    fn fair_coin_frequency_within_4_sigma() {
        let n = 1_000_000u64;
        let mut src = make_bernoulli(0.5, 1).unwrap();
        let heads = (0..n).filter(|_| src.toss().is_head()).count() as f64;
        let frac = heads / n as f64;
        // 4 * sqrt(0.25/1e6) = 0.002
        assert!((frac - 0.5).abs() < 0.002, "fair coin off: {frac}");
    }

    #[test]
    fn frequency_consistency_grid() {
        let n = 1_000_000u64;
        for (i, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let mut src = make_bernoulli(p, 0xF00D + i as u64).unwrap();
            let heads = (0..n).filter(|_| src.toss().is_head()).count() as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (heads / n as f64 - p).abs() < 4.0 * se,
                "bias {p}: got {}",
                heads / n as f64
            );
        }
    }

    #[test]
    fn distinct_streams_pass_chi_square_independence() {
        // Paired bits from two shards of the same seed; 2x2 contingency table,
        // df = 1, critical value 6.635 at significance 0.01.
        let n = 100_000u64;
        let mut a = BiasedSource::with_stream(0.5, 123, 1).unwrap();
        let mut b = BiasedSource::with_stream(0.5, 123, 2).unwrap();
        let mut counts = [[0u64; 2]; 2];
        for _ in 0..n {
            let x = usize::from(!a.toss().is_head());
            let y = usize::from(!b.toss().is_head());
            counts[x][y] += 1;
        }
        let (a00, a01, a10, a11) = (
            counts[0][0] as f64,
            counts[0][1] as f64,
            counts[1][0] as f64,
            counts[1][1] as f64,
        );
        let nf = n as f64;
        let chi2 = nf * (a00 * a11 - a01 * a10).powi(2)
            / ((a00 + a01) * (a10 + a11) * (a00 + a10) * (a01 + a11));
        assert!(chi2 < 6.635, "independence rejected: chi2 = {chi2}");
    }

    #[test]
    fn meter_counts_and_transparency() {
        let mut plain = make_bernoulli(0.4, 5).unwrap();
        let reference = stream_of(&mut plain, 64);

        let mut wrapped = metered(make_bernoulli(0.4, 5).unwrap());
        assert_eq!(stream_of(&mut wrapped, 64), reference);
        assert_eq!(wrapped.meter().total(), 64);
        assert_eq!(wrapped.meter().step("base"), 64);
    }

    #[test]
    fn nested_meters_agree() {
        let mut nested = metered(metered(make_bernoulli(0.7, 11).unwrap()));
        for _ in 0..5 {
            nested.toss();
        }
        assert_eq!(nested.meter().total(), 5);
        assert_eq!(nested.inner().meter().total(), 5);
    }

    #[test]
    fn meter_total_is_sum_of_steps() {
        let mut m = ConsumptionMeter::new();
        m.record("z_quoin", 3);
        m.record("x_quoin", 4);
        m.record("z_quoin", 1);
        assert_eq!(m.total(), 8);
        assert_eq!(m.per_step().values().sum::<u64>(), m.total());
    }
}
