//! Quoin preparation and measurement, ideal and noisy.
//!
//! A quoin is a qubit rotated about Y to `cos(theta/2)|0> + sin(theta/2)|1>`,
//! i.e. `sqrt(p)|0> + sqrt(1-p)|1>` with `p = cos^2(theta/2)`. Measuring in Z
//! gives a p-coin; measuring in X (an extra pre-rotation, then Z readout)
//! gives the q-coin with `q = [1 + 2 sqrt(p(1-p))]/2`; the general a-basis
//! gives `h_a(p) = (sqrt(p(1-a)) + sqrt(a(1-p)))^2`.
//!
//! The noise pipeline is fixed as: preparation flip -> basis rotation (gate
//! error on non-Z bases) -> asymmetric readout confusion. `noisy_outcome_prob`
//! folds it in closed form and is the oracle for `sample_quoin`, which plays
//! the same pipeline out event by event.

use crate::coin::Bit;
use crate::exact::ExactProb;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuoinError {
    #[error("theta {0} rad is outside [0, pi]")]
    InvalidTheta(f64),
    #[error("probability field {field} = {value} is outside [0, 1]")]
    InvalidProbability { field: &'static str, value: f64 },
}

/// Preparation angle and the bias it encodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuoinSpec {
    theta: f64,
    p: f64,
}

impl QuoinSpec {
    /// Rotation angle in radians about Y, `0 <= theta <= pi`.
    pub fn from_theta(theta: f64) -> Result<Self, QuoinError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) || theta.is_nan() {
            return Err(QuoinError::InvalidTheta(theta));
        }
        let c = (theta / 2.0).cos();
        Ok(Self { theta, p: c * c })
    }

    pub fn from_theta_deg(deg: f64) -> Result<Self, QuoinError> {
        Self::from_theta(deg.to_radians())
    }

    /// Builds the spec directly from the encoded bias.
    pub fn from_p(p: f64) -> Result<Self, QuoinError> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(QuoinError::InvalidProbability { field: "p", value: p });
        }
        Ok(Self {
            theta: 2.0 * p.sqrt().acos(),
            p,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta.to_degrees()
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Measurement setting. `General(0)` reproduces Z and `General(1/2)` is
/// statistically identical to X on ideal quoins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Basis {
    Z,
    X,
    General(f64),
}

impl Basis {
    /// Non-Z measurements need a pre-rotation pulse, which is where the gate
    /// error applies.
    pub fn uses_pre_rotation(&self) -> bool {
        !matches!(self, Basis::Z)
    }

    fn validate(&self) -> Result<(), QuoinError> {
        if let Basis::General(a) = self {
            if !(0.0..=1.0).contains(a) || a.is_nan() {
                return Err(QuoinError::InvalidProbability { field: "a", value: *a });
            }
        }
        Ok(())
    }
}

/// Imperfections of the simulated qubit. All fields are probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseModel {
    /// Excited-state population before purification.
    pub steady_excited: f64,
    /// Probability the prepared state is |1> after post-selection succeeded.
    pub purify_residual: f64,
    /// Per-pre-rotation error, applied as a symmetric outcome flip on non-Z bases.
    pub gate_error: f64,
    /// P(read head | state |0>).
    pub readout_f0: f64,
    /// P(read tail | state |1>).
    pub readout_f1: f64,
    pub purification_enabled: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            steady_excited: 0.085,
            purify_residual: 0.004,
            gate_error: 0.0013,
            readout_f0: 0.996,
            readout_f1: 0.943,
            purification_enabled: true,
        }
    }
}

impl NoiseModel {
    /// Perfect preparation, gates and readout.
    pub fn ideal() -> Self {
        Self {
            steady_excited: 0.0,
            purify_residual: 0.0,
            gate_error: 0.0,
            readout_f0: 1.0,
            readout_f1: 1.0,
            purification_enabled: false,
        }
    }

    pub fn validate(&self) -> Result<(), QuoinError> {
        for (field, value) in [
            ("steady_excited", self.steady_excited),
            ("purify_residual", self.purify_residual),
            ("gate_error", self.gate_error),
            ("readout_f0", self.readout_f0),
            ("readout_f1", self.readout_f1),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(QuoinError::InvalidProbability { field, value });
            }
        }
        Ok(())
    }

    /// Probability the prepared state is |1> right before the rotation pulse.
    fn prep_flip(&self) -> f64 {
        if self.purification_enabled {
            self.purify_residual
        } else {
            self.steady_excited
        }
    }
}

/// Head probability of the basis measurement on an ideal quoin prepared
/// from |0>, in exact arithmetic. Z -> p; X -> [1 + 2 sqrt(p(1-p))]/2;
/// General(a) -> (sqrt(p(1-a)) + sqrt(a(1-p)))^2.
pub fn ideal_outcome_prob(spec: &QuoinSpec, basis: &Basis) -> ExactProb {
    basis.validate().expect("invalid basis parameter");
    let p = ExactProb::from_f64(spec.p()).expect("spec bias in range");
    exact_head_prob(&p, basis, false)
}

/// Same map for the state prepared from |1> (preparation flip), where the
/// rotated state is `-sin(theta/2)|0> + cos(theta/2)|1>`:
/// Z -> 1-p; X -> 1-q; General(a) -> (sqrt(a p) - sqrt((1-a)(1-p)))^2.
fn exact_head_prob(p: &ExactProb, basis: &Basis, flipped: bool) -> ExactProb {
    use num::rational::BigRational;
    let one_minus_p = p.complement();
    let (a, b) = match basis {
        Basis::Z => (ExactProb::one(), ExactProb::zero()),
        Basis::X => (ExactProb::ratio(1, 2), ExactProb::ratio(1, 2)),
        Basis::General(a) => {
            let a = ExactProb::from_f64(*a).expect("basis parameter in range");
            (a.complement(), a)
        }
    };
    // Unflipped amplitude^2: (sqrt(p(1-a)) + sqrt(a(1-p)))^2
    // Flipped amplitude^2:   (sqrt(a p)    - sqrt((1-a)(1-p)))^2
    let (t1, t2) = if flipped {
        (&b * p, &a * &one_minus_p)
    } else {
        (&a * p, &b * &one_minus_p)
    };
    let s1 = crate::exact::sqrt_rational(&t1, crate::exact::SQRT_DIGITS);
    let s2 = crate::exact::sqrt_rational(&t2, crate::exact::SQRT_DIGITS);
    let amp: BigRational = if flipped { s1 - s2 } else { s1 + s2 };
    let sq = &amp * &amp;
    // Floor-rounded square roots can push the square a hair past 1.
    let clamped = sq.min(num::one());
    ExactProb::new(clamped).expect("head probability in range")
}

/// Closed-form head probability of `sample_quoin` under the documented noise
/// pipeline. With ideal noise this equals `ideal_outcome_prob`.
pub fn noisy_outcome_prob(spec: &QuoinSpec, basis: &Basis, noise: &NoiseModel) -> ExactProb {
    noise.validate().expect("invalid noise model");
    basis.validate().expect("invalid basis parameter");
    let p = ExactProb::from_f64(spec.p()).expect("spec bias in range");
    let flip = ExactProb::from_f64(noise.prep_flip()).expect("validated");

    let h0 = exact_head_prob(&p, basis, false);
    let h1 = exact_head_prob(&p, basis, true);
    let state_head = &flip.complement() * &h0 + &flip * &h1;

    let after_gate = if basis.uses_pre_rotation() {
        let g = ExactProb::from_f64(noise.gate_error).expect("validated");
        let g = g.value();
        &state_head * &(num::one::<num::BigRational>() - g - g) + g
    } else {
        state_head
    };

    let f0 = ExactProb::from_f64(noise.readout_f0).expect("validated");
    let miss1 = ExactProb::from_f64(noise.readout_f1).expect("validated").complement();
    let read_head =
        &after_gate * f0.value() + (num::one::<num::BigRational>() - &after_gate) * miss1.value();
    ExactProb::new(read_head).expect("folded probability in range")
}

/// Acceptance probability of one purification attempt: the initialization
/// measurement reads head.
pub fn purify_accept_prob(noise: &NoiseModel) -> ExactProb {
    let se = ExactProb::from_f64(noise.steady_excited).expect("validated");
    let f0 = ExactProb::from_f64(noise.readout_f0).expect("validated");
    let miss1 = ExactProb::from_f64(noise.readout_f1).expect("validated").complement();
    ExactProb::new(&se.complement() * &f0 + &se * &miss1).expect("in range")
}

/// Outcome of one preparation (purification included when enabled).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preparation {
    /// Prepared state is |1> instead of |0>.
    pub excited: bool,
    /// Post-selection attempts that read tail before the accepted one.
    pub rejections: u64,
}

/// One post-selection attempt: measure the steady-state qubit, accept on a
/// head readout. On accept the prepared state is |1> with `purify_residual`.
pub fn purify(noise: &NoiseModel, rng: &mut ChaCha8Rng) -> bool {
    let excited = rng.gen::<f64>() < noise.steady_excited;
    let read_head = if excited {
        rng.gen::<f64>() >= noise.readout_f1
    } else {
        rng.gen::<f64>() < noise.readout_f0
    };
    read_head
}

/// Prepares the qubit, looping post-selection until accepted.
pub fn prepare(noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Preparation {
    if !noise.purification_enabled {
        return Preparation {
            excited: rng.gen::<f64>() < noise.steady_excited,
            rejections: 0,
        };
    }
    let mut rejections = 0;
    while !purify(noise, rng) {
        rejections += 1;
    }
    Preparation {
        excited: rng.gen::<f64>() < noise.purify_residual,
        rejections,
    }
}

/// Result of one quoin measurement: the classical bit plus the purification
/// rejections it cost (rejections are tallied separately from consumptions).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuoinOutcome {
    pub bit: Bit,
    pub purify_rejections: u64,
}

/// Prepare one quoin and measure it: one quoin consumption per call.
/// The event sequence mirrors the pulse order; its head probability is
/// exactly `noisy_outcome_prob`.
pub fn sample_quoin(
    spec: &QuoinSpec,
    basis: &Basis,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> QuoinOutcome {
    debug_assert!(noise.validate().is_ok());
    let prep = prepare(noise, rng);

    let state_head_prob = head_prob_f64(spec.p(), basis, prep.excited);
    let mut head = rng.gen::<f64>() < state_head_prob;

    if basis.uses_pre_rotation() && rng.gen::<f64>() < noise.gate_error {
        head = !head;
    }

    let read_head = if head {
        rng.gen::<f64>() < noise.readout_f0
    } else {
        rng.gen::<f64>() >= noise.readout_f1
    };

    QuoinOutcome {
        bit: Bit::from_head(read_head),
        purify_rejections: prep.rejections,
    }
}

/// f64 fast path of the per-state head probabilities used by the sampler.
fn head_prob_f64(p: f64, basis: &Basis, flipped: bool) -> f64 {
    let a = match basis {
        Basis::Z => 0.0,
        Basis::X => 0.5,
        Basis::General(a) => *a,
    };
    let amp = if flipped {
        (a * p).sqrt() - ((1.0 - a) * (1.0 - p)).sqrt()
    } else {
        (p * (1.0 - a)).sqrt() + (a * (1.0 - p)).sqrt()
    };
    (amp * amp).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::rational::BigRational;
    use num::{BigInt, Signed};
    use rand::SeedableRng;

    fn oracle_tol() -> BigRational {
        BigRational::new(BigInt::from(1), BigInt::from(10u32).pow(50))
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn spec_maps_theta_to_p() {
        let s = QuoinSpec::from_theta_deg(90.0).unwrap();
        assert!((s.p() - 0.5).abs() < 1e-15);
        assert!(QuoinSpec::from_theta(-0.1).is_err());
        assert!(QuoinSpec::from_theta(3.2).is_err());
        // p(theta) + p(pi - theta) = 1, monotone decreasing
        let mut last = f64::INFINITY;
        for deg in [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0] {
            let a = QuoinSpec::from_theta_deg(deg).unwrap().p();
            let b = QuoinSpec::from_theta_deg(180.0 - deg).unwrap().p();
            assert!((a + b - 1.0).abs() < 1e-12);
            assert!(a < last);
            last = a;
        }
    }

    #[test]
    fn ideal_outcomes_match_reference_points() {
        // theta = 90deg in X: q = 1
        let s = QuoinSpec::from_p(0.5).unwrap();
        let q = ideal_outcome_prob(&s, &Basis::X);
        assert!(q.complement().value() < &oracle_tol(), "q(1/2) = {q}");

        // p = 0.850 in X: q = 0.857 (reference row, 3 decimals)
        let s = QuoinSpec::from_p(0.850).unwrap();
        let q = ideal_outcome_prob(&s, &Basis::X).to_f64();
        assert!((q - 0.857).abs() < 1e-3, "q(0.85) = {q}");

        // General(0) reproduces Z for arbitrary p
        let s = QuoinSpec::from_p(0.37).unwrap();
        let z = ideal_outcome_prob(&s, &Basis::Z);
        let g0 = ideal_outcome_prob(&s, &Basis::General(0.0));
        assert!(z.abs_diff(&g0) < oracle_tol());
        assert_eq!(z.to_f64(), 0.37);

        // p = a in General(a): 4a(1-a)
        let a = 0.3;
        let s = QuoinSpec::from_p(a).unwrap();
        let h = ideal_outcome_prob(&s, &Basis::General(a));
        let ea = ExactProb::from_f64(a).unwrap();
        let expect = ea.value() * ea.complement().value() * BigRational::from_integer(4.into());
        assert!((h.value() - expect).abs() < oracle_tol());
    }

    #[test]
    fn general_half_is_x_on_random_grid() {
        // h_{1/2} identity at oracle precision for 100 deterministic p values.
        let mut r = rng(0xA11CE);
        for _ in 0..100 {
            let p: f64 = rand::Rng::gen(&mut r);
            let s = QuoinSpec::from_p(p).unwrap();
            let x = ideal_outcome_prob(&s, &Basis::X);
            let g = ideal_outcome_prob(&s, &Basis::General(0.5));
            assert!(x.abs_diff(&g) < oracle_tol(), "mismatch at p={p}");
        }
    }

    #[test]
    fn ideal_symmetries() {
        // Dyadic biases so p and 1-p are both exact in f64.
        for p in [0.0625, 0.25, 0.5, 0.6875] {
            let s = QuoinSpec::from_p(p).unwrap();
            let s_swap = QuoinSpec::from_p(1.0 - p).unwrap();
            // X invariant under p -> 1-p
            assert!(ideal_outcome_prob(&s, &Basis::X)
                .abs_diff(&ideal_outcome_prob(&s_swap, &Basis::X))
                < oracle_tol());
            // Z maps p -> 1-p
            assert!(ideal_outcome_prob(&s, &Basis::Z)
                .abs_diff(&ideal_outcome_prob(&s_swap, &Basis::Z).complement())
                < oracle_tol());
        }
    }

    #[test]
    fn ideal_noise_fold_is_identity() {
        let noise = NoiseModel::ideal();
        for p in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let s = QuoinSpec::from_p(p).unwrap();
            for basis in [Basis::Z, Basis::X, Basis::General(0.3)] {
                let a = ideal_outcome_prob(&s, &basis);
                let b = noisy_outcome_prob(&s, &basis, &noise);
                assert!(a.abs_diff(&b) < oracle_tol(), "p={p} basis={basis:?}");
            }
        }
    }

    #[test]
    fn noisy_fold_reference_values() {
        let noise = NoiseModel::default();
        // (p=1/2, X): in [0.985, 0.995], close to the 0.990 reference.
        let s = QuoinSpec::from_p(0.5).unwrap();
        let q = noisy_outcome_prob(&s, &Basis::X, &noise).to_f64();
        assert!((0.985..=0.995).contains(&q), "q~ = {q}");
        assert!((q - 0.9910330656).abs() < 1e-9);

        // (theta=0, Z): two-term fold 0.996*(1-0.004) + (1-0.943)*0.004.
        let s = QuoinSpec::from_p(1.0).unwrap();
        let pt = noisy_outcome_prob(&s, &Basis::Z, &noise).to_f64();
        let expect = 0.996 * (1.0 - 0.004) + (1.0 - 0.943) * 0.004;
        assert!((pt - expect).abs() < 1e-12, "p~(0deg) = {pt}");
    }

    #[test]
    fn degradation_is_monotone_in_readout_f0() {
        // At p = 1/2 in X nearly all weight sits on the head state, so the
        // head probability degrades with f0; f1 touches only the small
        // complementary weight and acts in the opposite direction.
        let s = QuoinSpec::from_p(0.5).unwrap();
        let base = NoiseModel::default();
        let q = noisy_outcome_prob(&s, &Basis::X, &base).to_f64();
        assert!(q < 1.0);
        let mut worse = base;
        worse.readout_f0 = 0.95;
        let q_worse = noisy_outcome_prob(&s, &Basis::X, &worse).to_f64();
        assert!(q_worse < q);

        let mut f1_low = base;
        f1_low.readout_f1 = 0.90;
        let q_f1 = noisy_outcome_prob(&s, &Basis::X, &f1_low).to_f64();
        assert!(q_f1 > q, "f1 acts on the tail-state weight only");
    }

    #[test]
    fn purify_acceptance_matches_fold() {
        let noise = NoiseModel::default();
        let expect = 1.0 - 0.085 * 0.943 - (1.0 - 0.085) * (1.0 - 0.996);
        assert!((purify_accept_prob(&noise).to_f64() - expect).abs() < 1e-12);

        // Perfect readout, no steady excitation: always accepted, residual 0.
        let clean = NoiseModel {
            steady_excited: 0.0,
            purify_residual: 0.0,
            readout_f0: 1.0,
            readout_f1: 1.0,
            ..NoiseModel::default()
        };
        let mut r = rng(3);
        for _ in 0..100 {
            assert!(purify(&clean, &mut r));
        }
        assert_eq!(prepare(&clean, &mut r), Preparation { excited: false, rejections: 0 });
    }

    #[test]
    fn purification_disabled_passthrough() {
        let noise = NoiseModel {
            purification_enabled: false,
            steady_excited: 0.3,
            ..NoiseModel::default()
        };
        let mut r = rng(17);
        let n = 200_000;
        let excited = (0..n).filter(|_| prepare(&noise, &mut r).excited).count() as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((excited / n as f64 - 0.3).abs() < 4.0 * se);
    }

    #[test]
    fn purify_acceptance_rate_matches_oracle() {
        let noise = NoiseModel::default();
        let mut r = rng(29);
        let n = 200_000u64;
        let mut attempts = 0u64;
        for _ in 0..n {
            let prep = prepare(&noise, &mut r);
            attempts += prep.rejections + 1;
        }
        let rate = n as f64 / attempts as f64;
        let expect = purify_accept_prob(&noise).to_f64();
        let se = (expect * (1.0 - expect) / attempts as f64).sqrt();
        assert!((rate - expect).abs() < 4.0 * se, "accept rate {rate} vs {expect}");
    }

    #[test]
    fn sampler_matches_oracle_on_grid() {
        let n = 1_000_000u64;
        let grids = [
            (QuoinSpec::from_p(0.5).unwrap(), Basis::Z, NoiseModel::ideal()),
            (QuoinSpec::from_theta_deg(90.0).unwrap(), Basis::X, NoiseModel::default()),
            (QuoinSpec::from_theta_deg(0.0).unwrap(), Basis::Z, NoiseModel::default()),
            (QuoinSpec::from_theta_deg(45.0).unwrap(), Basis::X, NoiseModel::default()),
            (QuoinSpec::from_theta_deg(150.0).unwrap(), Basis::General(0.25), NoiseModel::default()),
        ];
        for (i, (spec, basis, noise)) in grids.iter().enumerate() {
            let mut r = rng(0xBEEF + i as u64);
            let heads = (0..n)
                .filter(|_| sample_quoin(spec, basis, noise, &mut r).bit.is_head())
                .count() as f64;
            let frac = heads / n as f64;
            let expect = noisy_outcome_prob(spec, basis, noise).to_f64();
            let se = (expect * (1.0 - expect) / n as f64).sqrt().max(1e-9);
            assert!(
                (frac - expect).abs() < 4.0 * se,
                "grid {i}: {frac} vs {expect}"
            );
        }
    }

    #[test]
    fn fair_coin_from_ideal_half_quoin() {
        let spec = QuoinSpec::from_p(0.5).unwrap();
        let noise = NoiseModel::ideal();
        let mut r = rng(0xFA1);
        let n = 1_000_000u64;
        let heads = (0..n)
            .filter(|_| sample_quoin(&spec, &Basis::Z, &noise, &mut r).bit.is_head())
            .count() as f64;
        assert!((heads / n as f64 - 0.5).abs() < 0.002);
    }
}
