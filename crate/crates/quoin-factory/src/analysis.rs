//! Estimation, truncation fitting, tail-bound arithmetic and consumption
//! accounting: everything that turns raw runs into report rows.

use crate::coin::Bit;
use serde::Serialize;

/// Binomial point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasEstimate {
    pub n_samples: u64,
    pub heads: u64,
    pub p_hat: f64,
    pub std_err: f64,
}

impl BiasEstimate {
    pub fn from_counts(heads: u64, n_samples: u64) -> Self {
        assert!(n_samples > 0, "empty sample");
        assert!(heads <= n_samples);
        let p_hat = heads as f64 / n_samples as f64;
        let std_err = (p_hat * (1.0 - p_hat) / n_samples as f64).sqrt();
        Self {
            n_samples,
            heads,
            p_hat,
            std_err,
        }
    }
}

pub fn estimate_bias(bits: &[Bit]) -> BiasEstimate {
    let heads = bits.iter().filter(|b| b.is_head()).count() as u64;
    BiasEstimate::from_counts(heads, bits.len() as u64)
}

/// Theory columns from a measured bias: q = [1 + 2 sqrt(p(1-p))]/2 and
/// f = 4p(1-p).
pub fn theory_row(p_hat: f64) -> (f64, f64) {
    assert!((0.0..=1.0).contains(&p_hat));
    let root = (p_hat * (1.0 - p_hat)).sqrt();
    (0.5 * (1.0 + 2.0 * root), 4.0 * p_hat * (1.0 - p_hat))
}

/// Truncation parameter of min(f, 1-eps) read off at the peak: eps = 1 - value.
pub fn fit_truncation_epsilon(value_at_half: f64) -> f64 {
    assert!((0.0..=1.0).contains(&value_at_half));
    1.0 - value_at_half
}

/// Outer truncation produced by composing the square-root step on a
/// truncated inner function: 1 - eps3 = [1 + sqrt(1 - eps1)]/2.
pub fn eps3_from_eps1(eps1: f64) -> f64 {
    1.0 - 0.5 * (1.0 + (1.0 - eps1).sqrt())
}

/// Published reference statistics for the twelve preparation angles:
/// (theta in degrees, measured p, theory q, theory f), where the theory
/// columns were derived from the unrounded bias estimates.
pub const REFERENCE_ROWS: [(f64, f64, f64, f64); 12] = [
    (0.0, 0.996, 0.563, 0.016),
    (15.0, 0.979, 0.644, 0.083),
    (30.0, 0.929, 0.756, 0.262),
    (45.0, 0.850, 0.857, 0.509),
    (60.0, 0.748, 0.934, 0.754),
    (75.0, 0.630, 0.983, 0.933),
    (90.0, 0.502, 1.000, 1.000),
    (105.0, 0.375, 0.984, 0.938),
    (120.0, 0.258, 0.938, 0.766),
    (135.0, 0.157, 0.864, 0.530),
    (150.0, 0.080, 0.772, 0.296),
    (165.0, 0.033, 0.678, 0.126),
];

/// Parameters of the truncated-doubling tail bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBoundParams {
    /// Truncation half-gap of min(2p, 1 - 2*eps1p).
    pub eps1p: f64,
    /// Coin budget.
    pub n: u64,
}

/// Three-term bound on P(N > n) for the truncated doubling construction:
/// sqrt(2)/(e(sqrt(2)-1)) * sqrt(2/n) * exp(-2 e^2 n)
///   + 72 (1 - exp(-2 e^2))^-1 * exp(-2 e^2 n) + 4 * 2^(-n/9).
pub fn np_tail_bound(params: &TailBoundParams) -> f64 {
    let e = params.eps1p;
    assert!(e > 0.0 && e < 0.25, "eps1p out of (0, 1/4)");
    assert!(params.n >= 1);
    let n = params.n as f64;
    let decay = (-2.0 * e * e * n).exp();
    let t1 = 2f64.sqrt() / (e * (2f64.sqrt() - 1.0)) * (2.0 / n).sqrt() * decay;
    let t2 = 72.0 / (1.0 - (-2.0 * e * e).exp()) * decay;
    let t3 = 4.0 * 2f64.powf(-n / 9.0);
    t1 + t2 + t3
}

/// Result of the minimum-budget computation: the smallest n with a
/// nontrivial bound (value <= 1) and the closed-form approximation
/// n ~ -ln(e^2/36) / (2 e^2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinBudget {
    pub exact_n: u64,
    pub approx_n: f64,
}

pub fn np_min_n(eps1p: f64) -> MinBudget {
    assert!(eps1p > 0.0 && eps1p < 0.25);
    let approx_n = -((eps1p * eps1p / 36.0).ln()) / (2.0 * eps1p * eps1p);

    // The bound is strictly decreasing in n, so bracket and bisect.
    let value = |n: u64| np_tail_bound(&TailBoundParams { eps1p, n });
    let mut hi = 1u64;
    while value(hi) > 1.0 {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if value(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    MinBudget { exact_n: hi, approx_n }
}

/// Exact expected quoins per f(p)-coin assembled from the stage chains:
/// each m-/n-coin costs 2 quoins, a race stage consumes 1/(1-m) inner coins
/// lazily (2/(1-m^2) eagerly), and the final stage runs
/// 1/(s(1-t) + (1-s)t) rounds of one s-coin plus one t-coin.
pub fn expected_consumption(p: f64, lazy: bool) -> f64 {
    assert!(p > 0.0 && p < 1.0, "degenerate bias");
    let m = 2.0 * p * (1.0 - p);
    let n = 0.5 - m;
    let per_s = if lazy { 1.0 / (1.0 - m) } else { 2.0 / (1.0 - m * m) };
    let per_t = if lazy { 1.0 / (1.0 - n) } else { 2.0 / (1.0 - n * n) };
    let s = m / (1.0 + m);
    let t = n / (1.0 + n);
    let rounds = 1.0 / (s * (1.0 - t) + (1.0 - s) * t);
    rounds * (2.0 * per_s + 2.0 * per_t)
}

/// Two-sided z test of a binomial estimate against a target bias, using the
/// null standard error. Passes at the suite-wide 4-sigma threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZTest {
    pub z: f64,
    pub pass: bool,
}

pub const Z_THRESHOLD: f64 = 4.0;

pub fn z_test(est: &BiasEstimate, target: f64) -> ZTest {
    assert!(est.n_samples >= 1_000, "z test needs at least 10^3 samples");
    assert!((0.0..=1.0).contains(&target));
    let se = (target * (1.0 - target) / est.n_samples as f64).sqrt();
    let z = if se == 0.0 {
        if est.p_hat == target {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (est.p_hat - target) / se
    };
    ZTest {
        z,
        pass: z.abs() <= Z_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use num::rational::BigRational;
    use num::BigInt;

    #[test]
    fn estimate_bias_examples() {
        // 10^6 fair bits: std_err ~ 5e-4.
        let est = BiasEstimate::from_counts(500_000, 1_000_000);
        assert!((est.std_err - 5e-4).abs() < 1e-6);
        // all heads: p_hat 1, zero SE
        let est = BiasEstimate::from_counts(100, 100);
        assert_eq!(est.p_hat, 1.0);
        assert_eq!(est.std_err, 0.0);
        // N = 2e7 at p ~ 0.5: SE ~ 1.1e-4
        let est = BiasEstimate::from_counts(10_000_000, 20_000_000);
        assert!((est.std_err - 1.118e-4).abs() < 1e-6);
        // bit-slice front end
        let bits = [Bit::Head, Bit::Tail, Bit::Head, Bit::Head];
        let est = estimate_bias(&bits);
        assert_eq!(est.heads, 3);
        assert_eq!(est.n_samples, 4);
    }

    #[test]
    fn theory_row_reference_points() {
        let (q, f) = theory_row(0.996);
        assert!((q - 0.563).abs() <= 1e-3 + 1e-9);
        assert!((f - 0.016).abs() <= 1e-3 + 1e-9);
        let (q, f) = theory_row(0.502);
        assert!((q - 1.000).abs() <= 1e-3 + 1e-9);
        assert!((f - 1.000).abs() <= 1e-3 + 1e-9);
        let (q, _) = theory_row(0.080);
        assert!((q - 0.772).abs() <= 1e-3 + 1e-9);
    }

    #[test]
    fn theory_rows_reproduce_reference_within_rounding() {
        // All 24 theory values lie within 2e-3 of the reference columns; the
        // q column within 1e-3. The f column cannot be pinned to 1e-3 from
        // the rounded p column: |df/dp| approaches 4, so the prints carry up
        // to 4 * 5e-4 of input-rounding slack (worst observed row: 30 deg at
        // 1.84e-3). The acceptance suite asserts the stricter stated bound
        // and documents the three rows that exceed it.
        for (theta, p, q_ref, f_ref) in REFERENCE_ROWS {
            let (q, f) = theory_row(p);
            assert!(
                (q - q_ref).abs() <= 1e-3 + 1e-9,
                "q at theta={theta}: {q} vs {q_ref}"
            );
            assert!(
                (f - f_ref).abs() <= 2e-3 + 1e-9,
                "f at theta={theta}: {f} vs {f_ref}"
            );
        }
    }

    #[test]
    fn truncation_fit() {
        assert!((fit_truncation_epsilon(0.965) - 0.035).abs() < 1e-12);
        assert!((fit_truncation_epsilon(0.990) - 0.010).abs() < 1e-12);
        assert_eq!(fit_truncation_epsilon(1.0), 0.0);
        // identity on the truncated model at the peak
        for eps in [0.01, 0.035, 0.2] {
            let value = 1.0f64.min(1.0 - eps);
            assert!((fit_truncation_epsilon(value) - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_relation() {
        // 1 - eps3 = [1 + sqrt(1 - eps1)]/2 exactly
        let eps1 = 0.04;
        let eps3 = eps3_from_eps1(eps1);
        assert_eq!(1.0 - eps3, 0.5 * (1.0 + (1.0 - eps1).sqrt()));
        // eps1 = 0.04 maps to eps3 = 0.01 at the published two-decimal rounding
        assert!((eps3 - 0.01).abs() < 1.1e-4, "eps3 = {eps3}");
        assert_eq!((eps3 * 100.0).round() / 100.0, 0.01);
    }

    #[test]
    fn tail_bound_values() {
        // eps' = 0.0175, n = 1.9e4: bound ~ 1 (within a factor of 2).
        let b = np_tail_bound(&TailBoundParams { eps1p: 0.0175, n: 19_000 });
        assert!(b > 0.5 && b < 2.0, "bound at 1.9e4: {b}");
        // small n: trivial (no information)
        let b = np_tail_bound(&TailBoundParams { eps1p: 0.0175, n: 1_000 });
        assert!(b > 1.0);
    }

    #[test]
    fn tail_bound_is_strictly_decreasing() {
        for eps in [0.01, 0.0175, 0.1, 0.24] {
            let mut last = f64::INFINITY;
            for n in (1..2000).step_by(13) {
                let b = np_tail_bound(&TailBoundParams { eps1p: eps, n });
                assert!(b < last, "not decreasing at eps={eps}, n={n}");
                last = b;
            }
        }
    }

    #[test]
    fn min_budget_matches_published_scale() {
        let mb = np_min_n(0.0175);
        assert!((mb.approx_n - 1.9e4).abs() / 1.9e4 < 0.05, "approx {}", mb.approx_n);
        assert!((mb.exact_n as f64 - 1.9e4).abs() / 1.9e4 < 0.05, "exact {}", mb.exact_n);
        // classical f_t cost: two p-coins per doubled coin
        assert!((2.0 * mb.approx_n - 3.8e4).abs() / 3.8e4 < 0.05);
        // boundary is genuine
        assert!(np_tail_bound(&TailBoundParams { eps1p: 0.0175, n: mb.exact_n }) <= 1.0);
        assert!(np_tail_bound(&TailBoundParams { eps1p: 0.0175, n: mb.exact_n - 1 }) > 1.0);
        // weak truncation needs few coins
        assert!(np_min_n(0.24).exact_n < np_min_n(0.0175).exact_n);
    }

    #[test]
    fn consumption_closed_form_matches_exact_chains() {
        for (n, d) in [(1i64, 10i64), (1, 4), (1, 3), (1, 2), (2, 3), (9, 10)] {
            let p = n as f64 / d as f64;
            let exact = oracle::ProtocolOracle::ideal(BigRational::new(
                BigInt::from(n),
                BigInt::from(d),
            ));
            for lazy in [true, false] {
                let closed = expected_consumption(p, lazy);
                let chain = oracle::to_f64(&exact.expected_quoins(lazy));
                assert!(
                    (closed - chain).abs() < 1e-12,
                    "p={p} lazy={lazy}: {closed} vs {chain}"
                );
            }
            assert!(expected_consumption(p, true) <= expected_consumption(p, false));
        }
        assert_eq!(expected_consumption(0.5, true), 18.0);
        // p -> 0 stays finite: the s-branch exits via tail immediately.
        assert!(expected_consumption(1e-9, true) < 19.0);
    }

    #[test]
    fn z_test_behaviour() {
        let fair = BiasEstimate::from_counts(500_100, 1_000_000);
        assert!(z_test(&fair, 0.5).pass);
        // 0.51 vs 0.50 at N = 1e6: z = 20
        let biased = BiasEstimate::from_counts(510_000, 1_000_000);
        let t = z_test(&biased, 0.5);
        assert!(!t.pass);
        assert!((t.z - 20.0).abs() < 0.01);
        // target equal to p_hat: z = 0, even at degenerate targets
        let all_heads = BiasEstimate::from_counts(10_000, 10_000);
        assert_eq!(z_test(&all_heads, 1.0).z, 0.0);
        let t = z_test(&fair, 0.5001);
        assert!((t.z - (fair.p_hat - 0.5001) / fair.std_err.max(1e-12)).abs() < 0.01);
    }
}
