//! Independent exact oracles for the coin-processing chains.
//!
//! Every repeat-until-exit stage of the protocol is a one-state absorbing
//! Markov chain: each round exits to head with weight `w_h`, to tail with
//! `w_t`, and repeats otherwise. First-step analysis in exact rationals gives
//! the absorption split and the expected round count without touching the
//! samplers, so these values anchor the Monte Carlo suites.

use num::rational::BigRational;
use num::{BigInt, One, ToPrimitive, Zero};

/// One repeat-until-exit stage.
#[derive(Clone, Debug)]
pub struct RepeatChain {
    pub exit_head: BigRational,
    pub exit_tail: BigRational,
}

impl RepeatChain {
    pub fn new(exit_head: BigRational, exit_tail: BigRational) -> Self {
        assert!(exit_head >= BigRational::zero() && exit_tail >= BigRational::zero());
        assert!(&exit_head + &exit_tail <= BigRational::one());
        Self { exit_head, exit_tail }
    }

    fn exit_mass(&self) -> BigRational {
        &self.exit_head + &self.exit_tail
    }

    /// P(absorbed at head). Requires a nonzero exit mass.
    pub fn head_prob(&self) -> BigRational {
        let mass = self.exit_mass();
        assert!(!mass.is_zero(), "divergent chain: no exit");
        &self.exit_head / mass
    }

    /// Expected number of rounds until absorption.
    pub fn expected_rounds(&self) -> BigRational {
        let mass = self.exit_mass();
        assert!(!mass.is_zero(), "divergent chain: no exit");
        mass.recip()
    }

    /// P(still running after `rounds` rounds) = (repeat probability)^rounds.
    pub fn survival(&self, rounds: u32) -> BigRational {
        let repeat = BigRational::one() - self.exit_mass();
        num::pow::pow(repeat, rounds as usize)
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn one_minus(x: &BigRational) -> BigRational {
    BigRational::one() - x
}

/// Von Neumann extraction: flip twice, restart on equal, output the second
/// value otherwise. Exit weights are p(1-p) each way.
pub fn von_neumann_chain(p: &BigRational) -> RepeatChain {
    let w = p * one_minus(p);
    RepeatChain::new(w.clone(), w)
}

/// m-coin: toss twice, head iff the tosses differ. Enumerates the four
/// outcomes directly.
pub fn diff_head_prob(p: &BigRational) -> BigRational {
    let q = one_minus(p);
    // HT + TH out of {HH, HT, TH, TT}
    p * &q + &q * p
}

/// s-coin stage on an m-coin: tail exits with weight (1-m), head with m(1-m),
/// both-heads repeats. Absorbs to head with probability m/(m+1).
pub fn race_chain(m: &BigRational) -> RepeatChain {
    RepeatChain::new(m * one_minus(m), one_minus(m))
}

/// Step-5 stage on an s-coin and a t-coin: head on HT, tail on TH.
pub fn ratio_chain(s: &BigRational, t: &BigRational) -> RepeatChain {
    RepeatChain::new(s * one_minus(t), one_minus(s) * t)
}

/// Exact per-stage biases of the full protocol for an ideal quoin of bias `p`.
#[derive(Clone, Debug)]
pub struct ProtocolOracle {
    pub p: BigRational,
    pub m: BigRational,
    pub n: BigRational,
    pub s: BigRational,
    pub t: BigRational,
    pub f: BigRational,
}

impl ProtocolOracle {
    /// For ideal quoins the n-branch bias is rational even though q is not:
    /// n = 2q(1-q) = 1/2 - 2p(1-p).
    pub fn ideal(p: BigRational) -> Self {
        let m = diff_head_prob(&p);
        let n = rat(1, 2) - &m;
        Self::from_branches(p, m, n)
    }

    /// General form from arbitrary branch biases (used for noisy folds).
    pub fn from_branches(p: BigRational, m: BigRational, n: BigRational) -> Self {
        let s = race_chain(&m).head_prob();
        let t = race_chain(&n).head_prob();
        let f = ratio_chain(&s, &t).head_prob();
        Self { p, m, n, s, t, f }
    }

    /// Expected quoins per output bit, exactly, from the chain expectations.
    /// Each m-coin costs 2 Z-quoins and each n-coin 2 X-quoins.
    pub fn expected_quoins(&self, lazy: bool) -> BigRational {
        let per_s = race_cost(&self.m, lazy);
        let per_t = race_cost(&self.n, lazy);
        let rounds = ratio_chain(&self.s, &self.t).expected_rounds();
        rounds * (rat(2, 1) * per_s + rat(2, 1) * per_t)
    }
}

/// Expected inner-coin tosses per race-stage output. Lazily skipping the
/// second toss after a leading tail gives (1+m)/(1-m^2) = 1/(1-m); eager
/// tossing gives 2/(1-m^2).
pub fn race_cost(m: &BigRational, lazy: bool) -> BigRational {
    let chain = race_chain(m);
    let rounds = chain.expected_rounds();
    let per_round = if lazy {
        BigRational::one() + m
    } else {
        rat(2, 1)
    };
    rounds * per_round
}

/// Convenience: f64 view of a rational oracle value.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("oracle value fits in f64")
}
