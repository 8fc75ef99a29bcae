//! Exact factory for the truncated doubling function min(2y, 1-2e).
//!
//! Degree-doubling Bernstein envelopes driven by a single uniform, in the
//! reverse-time-martingale style. After n = 16 * 2^j coin flips with S heads
//! the envelope coefficients are
//!
//!   lower:  a(n,S) = f(S/n),                    f(y) = min(2y, 2y*),
//!   upper:  b(n,S) = 1                          for n < n_active,
//!           b(n,S) = f(S/n) + (C/sqrt(n)) * exp(-n (S/n - y*)^2)  otherwise,
//!
//! with y* = 1/2 - e the truncation kink and n_active the first degree at
//! which the bump amplitude C/sqrt(n) fits under the plateau headroom 2e, so
//! the upper envelope never leaves [0, 1]. Consistency across a doubling
//! requires, conditionally on the total head count s at degree 2n (the
//! first-half count K is then hypergeometric):
//!
//!   a(2n,s) >= E[a(n,K) | s]   and   b(2n,s) <= E[b(n,K) | s].
//!
//! The lower condition is Jensen's inequality for the concave f. The upper
//! one is trivial while b = 1 and is carried by the bump's shrinkage
//! afterwards; `certify_doubling` checks it numerically for every degree the
//! sampler can reach, and the refinement step clamps to the conditional
//! bracket so float-level slack cannot break the interval nesting.
//!
//! A single uniform G decides each output: accept (head) once G falls below
//! the lower level, reject once it exceeds the upper level, where the levels
//! refine by the conditional-bracket fractions each doubling. The head
//! probability is then exactly the Bernstein limit of the lower envelope,
//! f(p). The delayed upper activation mirrors the published tail bound for
//! this construction, which is itself vacuous until n is of order
//! ln(36/e^2)/(2e^2): tails cannot be certified cheaply near a truncation
//! kink, so tail outputs pay ~n_active flips while head outputs stay cheap.

use crate::coin::{Bit, CoinSource};
use crate::factory::FactoryError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Bump amplitude of the upper envelope once active.
const BUMP_AMPLITUDE: f64 = 4.0;

/// Flips consumed by the first stage.
const INITIAL_DEGREE: u64 = 16;

/// Relative weight below which hypergeometric tail terms are dropped; the
/// weights are normalized afterwards, so this only perturbs conditional
/// means at the 1e-15 level.
const WEIGHT_CUTOFF: f64 = 1e-18;

#[derive(Clone, Copy, Debug)]
pub struct TruncatedDoubling {
    /// Kink location y* = 1/2 - eps1p.
    y_star: f64,
    /// First degree with an informative upper envelope.
    n_active: u64,
}

impl TruncatedDoubling {
    /// `eps1p` is the truncation half-gap: the target is min(2y, 1 - 2*eps1p).
    pub fn new(eps1p: f64) -> Result<Self, FactoryError> {
        if !(eps1p > 0.0 && eps1p < 0.25) {
            return Err(FactoryError::Domain {
                what: "truncation half-gap eps1p must lie in (0, 1/4)",
            });
        }
        // Smallest power-of-two degree where C/sqrt(n) <= 2*eps1p.
        let needed = (BUMP_AMPLITUDE / (2.0 * eps1p)).powi(2);
        let mut n_active = INITIAL_DEGREE;
        while (n_active as f64) < needed {
            n_active *= 2;
        }
        Ok(Self {
            y_star: 0.5 - eps1p,
            n_active,
        })
    }

    pub fn target(&self, y: f64) -> f64 {
        (2.0 * y).min(2.0 * self.y_star)
    }

    /// Degree at which tail outputs start to resolve.
    pub fn activation_degree(&self) -> u64 {
        self.n_active
    }

    fn coeff_lower(&self, n: u64, k: u64) -> f64 {
        self.target(k as f64 / n as f64)
    }

    fn coeff_upper(&self, n: u64, k: u64) -> f64 {
        if n < self.n_active {
            return 1.0;
        }
        let nf = n as f64;
        let d = k as f64 / nf - self.y_star;
        self.coeff_lower(n, k) + BUMP_AMPLITUDE / nf.sqrt() * (-nf * d * d).exp()
    }

    /// Conditional means of the degree-n coefficients given `s` heads at
    /// degree `2n`, via the hypergeometric split of the first n flips.
    /// Weights are generated outward from the mode by ratio recurrence, so
    /// the sum spans O(sqrt(n)) terms.
    fn conditional_means(&self, n: u64, s: u64) -> (f64, f64) {
        debug_assert!(s <= 2 * n);
        let lo = s.saturating_sub(n);
        let hi = s.min(n);
        let mode = ((s as f64) / 2.0).round() as u64;
        let mode = mode.clamp(lo, hi);

        let ratio = |i: u64| -> f64 {
            // w(i+1) / w(i) for w(i) = C(n,i) C(n,s-i)
            ((n - i) as f64 * (s - i) as f64) / ((i + 1) as f64 * (n + i + 1 - s) as f64)
        };

        let mut total = 0.0;
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        let mut add = |i: u64, w: f64| {
            total += w;
            sum_a += w * self.coeff_lower(n, i);
            sum_b += w * self.coeff_upper(n, i);
        };

        add(mode, 1.0);
        let mut w = 1.0;
        let mut i = mode;
        while i < hi {
            w *= ratio(i);
            i += 1;
            if w < WEIGHT_CUTOFF {
                break;
            }
            add(i, w);
        }
        w = 1.0;
        i = mode;
        while i > lo {
            w /= ratio(i - 1);
            i -= 1;
            if w < WEIGHT_CUTOFF {
                break;
            }
            add(i, w);
        }
        (sum_a / total, sum_b / total)
    }

    /// One exact sample of the min(2y, 1-2e)-coin from a y-coin.
    /// `max_draws` bounds the flips taken from `src`.
    pub fn sample(
        &self,
        src: &mut impl CoinSource,
        max_draws: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Bit, FactoryError> {
        let g: f64 = rng.gen();

        let mut n = INITIAL_DEGREE;
        let mut heads = 0u64;
        for _ in 0..n.min(max_draws) {
            if src.toss().is_head() {
                heads += 1;
            }
        }
        if n > max_draws {
            return Err(FactoryError::Cutoff {
                stage: "truncated_double",
                rounds: 0,
                draws: max_draws,
            });
        }
        let mut lo = self.coeff_lower(n, heads);
        let mut hi = self.coeff_upper(n, heads);
        loop {
            if g <= lo {
                return Ok(Bit::Head);
            }
            if g > hi {
                return Ok(Bit::Tail);
            }
            if 2 * n > max_draws {
                return Err(FactoryError::Cutoff {
                    stage: "truncated_double",
                    rounds: 0,
                    draws: n,
                });
            }
            for _ in 0..n {
                if src.toss().is_head() {
                    heads += 1;
                }
            }
            let big_n = 2 * n;
            let (mean_lower, mean_upper) = self.conditional_means(n, heads);
            let bracket = mean_upper - mean_lower;
            if bracket > 0.0 {
                let accept =
                    ((self.coeff_lower(big_n, heads) - mean_lower) / bracket).clamp(0.0, 1.0);
                let reject = ((mean_upper - self.coeff_upper(big_n, heads)) / bracket)
                    .clamp(0.0, 1.0 - accept);
                let width = hi - lo;
                lo += width * accept;
                hi -= width * reject;
            }
            n = big_n;
        }
    }

    /// Verifies the doubling inequalities for every total `s` in the range
    /// at degree `2n`. Returns the worst (most negative) margin.
    #[doc(hidden)]
    pub fn certify_doubling(&self, n: u64, s_range: std::ops::RangeInclusive<u64>) -> f64 {
        let mut worst = f64::INFINITY;
        for s in s_range {
            debug_assert!(s <= 2 * n);
            let (mean_lower, mean_upper) = self.conditional_means(n, s);
            let lower_margin = self.coeff_lower(2 * n, s) - mean_lower;
            let upper_margin = mean_upper - self.coeff_upper(2 * n, s);
            worst = worst.min(lower_margin).min(upper_margin);
        }
        worst
    }
}
