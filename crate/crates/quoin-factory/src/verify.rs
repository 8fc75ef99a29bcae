//! The acceptance suite: every release-gating check, runnable from both
//! `cargo test` (the `acceptance` target) and the CLI `verify` mode.
//!
//! Statistical checks use the suite-wide 4-sigma rule; with ~40 Monte Carlo
//! comparisons that keeps the false-failure probability below 1%. All
//! tolerances are fixed here, not configurable.

use crate::analysis::{self, BiasEstimate};
use crate::coin::{BiasedSource, CoinSource};
use crate::factory::{self, FactoryPipeline};
use crate::oracle;
use crate::quoin::{noisy_outcome_prob, Basis, NoiseModel, QuoinSpec};
use crate::runner;
use num::rational::BigRational;
use num::BigInt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionOutcome {
    fn new(id: &'static str, name: &'static str, passed: bool, details: String) -> Self {
        Self {
            id,
            name,
            passed,
            details,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} — {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

/// Runs all criteria in order. Heavy ones shard over rayon internally.
pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    vec![
        criterion_1_theory_rows(),
        criterion_2_ideal_protocol(seed),
        criterion_3_noisy_peak(seed),
        criterion_4_consumption(seed),
        criterion_5_bound_arithmetic(),
        criterion_6_epsilon_relation(),
        criterion_7_oracle_equivalence(seed),
        criterion_8_standard_error(seed),
    ]
}

const SHARDS: u64 = 64;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// MC head count for a closure-driven coin, sharded deterministically.
fn sharded_heads(
    seed: u64,
    point: usize,
    total: u64,
    one: impl Fn(&mut BiasedSource, &mut ChaCha8Rng) -> crate::coin::Bit + Sync,
    bias_for_source: f64,
) -> u64 {
    runner::split_work(total, SHARDS)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut src = BiasedSource::with_stream(
                bias_for_source,
                seed,
                runner::stream_id(runner::PURPOSE_VERIFY, point, 2 * shard as u64),
            )
            .expect("valid bias");
            let mut rng = runner::rng_for(
                seed,
                runner::stream_id(runner::PURPOSE_VERIFY, point, 2 * shard as u64 + 1),
            );
            (0..count).filter(|_| one(&mut src, &mut rng).is_head()).count() as u64
        })
        .sum()
}

fn four_sigma(expect: f64, n: u64) -> f64 {
    4.0 * (expect * (1.0 - expect) / n as f64).sqrt().max(1e-9)
}

/// Criterion 1: theory_row reproduces the published (q_th, f_th) pairs from
/// the table's p column to +-0.001.
///
/// The f column cannot meet +-0.001 from the rounded p inputs (|df/dp| is up
/// to ~3.9, so the p column's half-ulp injects up to ~1.9e-3); the three
/// affected rows are reported and the criterion is left honestly red. A
/// +-0.002 envelope over all 24 values is asserted in the unit suite.
fn criterion_1_theory_rows() -> CriterionOutcome {
    let tol = 1e-3 + 1e-9;
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (theta, p, q_ref, f_ref) in analysis::REFERENCE_ROWS {
        let (q, f) = analysis::theory_row(p);
        let dq = (q - q_ref).abs();
        let df = (f - f_ref).abs();
        worst = worst.max(dq).max(df);
        if dq > tol {
            failures.push(format!("theta={theta}: |dq|={dq:.4}"));
        }
        if df > tol {
            failures.push(format!("theta={theta}: |df|={df:.4}"));
        }
    }
    let passed = failures.is_empty();
    let details = if passed {
        format!("all 24 theory values within 0.001 (worst {worst:.4})")
    } else {
        format!(
            "{} of 24 values exceed 0.001 from the rounded p column ({}); all pass at 0.002",
            failures.len(),
            failures.join(", ")
        )
    };
    CriterionOutcome::new("C1", "theory row reproduction", passed, details)
}

/// Criterion 2: ideal quoins. theta = 90deg gives f_hat >= 0.999 at N = 1e6;
/// p =up 1/3 gives |f_hat - 8/9| within 4 binomial sigma.
fn criterion_2_ideal_protocol(seed: u64) -> CriterionOutcome {
    let pipe = FactoryPipeline::default();
    let noise = NoiseModel::ideal();
    let n = 1_000_000u64;

    let spec = QuoinSpec::from_theta_deg(90.0).unwrap();
    let peak = runner::run_f4p(&spec, &noise, &pipe, seed, 100, n, SHARDS);
    let f_peak = peak.heads as f64 / peak.produced.max(1) as f64;

    let spec = QuoinSpec::from_p(1.0 / 3.0).unwrap();
    let third = runner::run_f4p(&spec, &noise, &pipe, seed, 101, n, SHARDS);
    let f_third = third.heads as f64 / third.produced.max(1) as f64;
    let target = 8.0 / 9.0;
    let tol = four_sigma(target, n);

    let pass_peak = f_peak >= 0.999 && peak.cutoffs == 0;
    let pass_third = (f_third - target).abs() < tol;
    CriterionOutcome::new(
        "C2",
        "ideal protocol exactness",
        pass_peak && pass_third,
        format!(
            "f_hat(90deg) = {f_peak:.6} (need >= 0.999); f_hat(p=1/3) = {f_third:.6} vs 8/9 = {target:.6} (tol {tol:.6})"
        ),
    )
}

/// Criterion 3: default noise at the peak reproduces q = 0.990 +- 0.010 and
/// f = 0.965 +- 0.020 at N = 1e6.
fn criterion_3_noisy_peak(seed: u64) -> CriterionOutcome {
    let noise = NoiseModel::default();
    let pipe = FactoryPipeline::default();
    let spec = QuoinSpec::from_theta_deg(90.0).unwrap();
    let n = 1_000_000u64;

    let x = runner::measure_quoins(&spec, Basis::X, &noise, seed, runner::PURPOSE_VERIFY, 102, n, SHARDS);
    let q_hat = x.heads as f64 / x.samples as f64;

    let f = runner::run_f4p(&spec, &noise, &pipe, seed, 103, n, SHARDS);
    let f_hat = f.heads as f64 / f.produced.max(1) as f64;

    let pass_q = (q_hat - 0.990).abs() <= 0.010;
    let pass_f = (f_hat - 0.965).abs() <= 0.020;
    CriterionOutcome::new(
        "C3",
        "noisy peak reproduction",
        pass_q && pass_f,
        format!("q_hat = {q_hat:.6} (0.990 +- 0.010); f_hat = {f_hat:.6} (0.965 +- 0.020)"),
    )
}

/// Criterion 4: mean quoins per f-coin at the peak within 2% of the chain
/// expectation, which itself lies in [18, 24].
fn criterion_4_consumption(seed: u64) -> CriterionOutcome {
    let analytic = analysis::expected_consumption(0.5, true);
    let in_window = (18.0..=24.0).contains(&analytic);

    let pipe = FactoryPipeline::default();
    let noise = NoiseModel::ideal();
    let spec = QuoinSpec::from_p(0.5).unwrap();
    let n = 100_000u64;
    let agg = runner::run_f4p(&spec, &noise, &pipe, seed, 104, n, SHARDS);
    let empirical = agg.quoins as f64 / agg.produced.max(1) as f64;
    let rel = (empirical - analytic).abs() / analytic;

    CriterionOutcome::new(
        "C4",
        "quoin consumption accounting",
        in_window && rel <= 0.02,
        format!(
            "analytic = {analytic:.4} (window [18, 24]); empirical mean = {empirical:.4} (rel dev {:.3}%)",
            100.0 * rel
        ),
    )
}

/// Criterion 5: minimum-budget arithmetic within 5% of the published scale.
fn criterion_5_bound_arithmetic() -> CriterionOutcome {
    let mb = analysis::np_min_n(0.0175);
    let approx_ok = (mb.approx_n - 1.9e4).abs() / 1.9e4 <= 0.05;
    let cost = 2.0 * mb.approx_n;
    let cost_ok = (cost - 3.8e4).abs() / 3.8e4 <= 0.05;
    CriterionOutcome::new(
        "C5",
        "tail bound arithmetic",
        approx_ok && cost_ok,
        format!(
            "approx n = {:.1} (vs 1.9e4), exact min n = {}, doubled cost = {:.1} (vs 3.8e4)",
            mb.approx_n, mb.exact_n, cost
        ),
    )
}

/// Criterion 6: 1 - eps3 = [1 + sqrt(1 - eps1)]/2 holds exactly and maps
/// eps1 = 0.04 to eps3 = 0.01 at the published rounding.
fn criterion_6_epsilon_relation() -> CriterionOutcome {
    let eps1 = 0.04;
    let eps3 = analysis::eps3_from_eps1(eps1);
    let exact = 1.0 - eps3 == 0.5 * (1.0 + (1.0 - eps1).sqrt());
    let rounds_to_001 = (eps3 * 100.0).round() / 100.0 == 0.01;
    CriterionOutcome::new(
        "C6",
        "epsilon relation",
        exact && rounds_to_001,
        format!("eps3(0.04) = {eps3:.6} (exact relation holds: {exact}; rounds to 0.01: {rounds_to_001})"),
    )
}

struct PointCheck {
    label: String,
    expect: f64,
    got: f64,
    n: u64,
}

impl PointCheck {
    fn passes(&self) -> bool {
        (self.got - self.expect).abs() < four_sigma(self.expect, self.n)
    }

    fn z(&self) -> f64 {
        (self.got - self.expect) / (four_sigma(self.expect, self.n) / 4.0)
    }
}

/// Criterion 7: Monte Carlo bias of every combinator within 4 sigma of the
/// exact closed form / chain oracle on the rational-p grid.
fn criterion_7_oracle_equivalence(seed: u64) -> CriterionOutcome {
    let grid: [(i64, i64); 6] = [(1, 10), (1, 4), (1, 3), (1, 2), (2, 3), (9, 10)];
    let mut checks: Vec<PointCheck> = Vec::new();
    let pipe = FactoryPipeline::default();

    // von Neumann: exact 1/2 everywhere in (0,1)
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let n = 200_000;
        let heads = sharded_heads(seed, 200 + i, n, |src, _| {
            factory::von_neumann(src, 1_000_000).expect("terminates")
        }, p);
        checks.push(PointCheck {
            label: format!("von_neumann p={nn}/{dd}"),
            expect: 0.5,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // diff: 2p(1-p) against the four-outcome enumeration oracle
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let expect = oracle::to_f64(&oracle::diff_head_prob(&rat(nn, dd)));
        let n = 200_000;
        let heads = sharded_heads(seed, 210 + i, n, |src, _| factory::diff_coin(src), p);
        checks.push(PointCheck {
            label: format!("diff p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // race on the derived m-coin: m/(m+1)
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let m = oracle::diff_head_prob(&rat(nn, dd));
        let expect = oracle::to_f64(&oracle::race_chain(&m).head_prob());
        let n = 200_000;
        let heads = sharded_heads(seed, 220 + i, n, |src, _| {
            factory::race_coin(|| Ok(factory::diff_coin(src)), true, 1_000_000).expect("terminates")
        }, p);
        checks.push(PointCheck {
            label: format!("race p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // ratio on exact s/t sources: m/(m+n)
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let m = oracle::diff_head_prob(&rat(nn, dd));
        let n_branch = rat(1, 2) - &m;
        let s = oracle::race_chain(&m).head_prob();
        let t = oracle::race_chain(&n_branch).head_prob();
        let expect = oracle::to_f64(&oracle::ratio_chain(&s, &t).head_prob());
        let s_f = oracle::to_f64(&s);
        let t_f = oracle::to_f64(&t);
        let n = 200_000;
        let heads = sharded_heads(seed, 230 + i, n, |src, rng| {
            // src carries the s-bias; an auxiliary t-source shares the rng
            let t_draw = |r: &mut ChaCha8Rng| {
                use rand::Rng;
                crate::coin::Bit::from_head(r.gen::<f64>() < t_f)
            };
            factory::ratio_coin(|| Ok(src.toss()), || Ok(t_draw(rng)), 1_000_000)
                .expect("terminates")
        }, s_f);
        checks.push(PointCheck {
            label: format!("ratio m-from p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // sqrt on direct f-sources
    for (i, f) in [0.25, 1.0 / 3.0, 0.5, 0.81, 1.0].into_iter().enumerate() {
        let n = 200_000;
        let heads = sharded_heads(seed, 240 + i, n, |src, rng| {
            factory::sqrt_coin(|_| Ok(src.toss()), 1 << 20, rng).expect("terminates")
        }, f);
        checks.push(PointCheck {
            label: format!("sqrt f={f:.4}"),
            expect: f.sqrt(),
            got: heads as f64 / n as f64,
            n,
        });
    }

    // truncated doubling: min(2p, 1 - 2*0.0175)
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let expect = (2.0 * p).min(1.0 - 2.0 * 0.0175);
        let n = 100_000;
        let heads = sharded_heads(seed, 250 + i, n, |src, rng| {
            factory::truncated_double(src, 0.0175, &pipe, rng).expect("terminates")
        }, p);
        checks.push(PointCheck {
            label: format!("truncated_double p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // classical f_t: min(4p(1-p), 1 - 0.035)
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let expect = (4.0 * p * (1.0 - p)).min(1.0 - 0.035);
        let n = 100_000;
        let heads = sharded_heads(seed, 260 + i, n, |src, rng| {
            factory::classical_ft(src, 0.035, &pipe, rng).expect("terminates")
        }, p);
        checks.push(PointCheck {
            label: format!("classical_ft p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    // classical q_t: [1 + sqrt(min(4p(1-p), 1 - 0.04))]/2
    for (i, (nn, dd)) in grid.into_iter().enumerate() {
        let p = nn as f64 / dd as f64;
        let expect = 0.5 * (1.0 + (4.0 * p * (1.0 - p)).min(1.0 - 0.04).sqrt());
        let n = 100_000;
        let heads = sharded_heads(seed, 270 + i, n, |src, rng| {
            factory::classical_qt(src, 0.04, &pipe, rng).expect("terminates")
        }, p);
        checks.push(PointCheck {
            label: format!("classical_qt p={nn}/{dd}"),
            expect,
            got: heads as f64 / n as f64,
            n,
        });
    }

    let failures: Vec<&PointCheck> = checks.iter().filter(|c| !c.passes()).collect();
    let worst = checks
        .iter()
        .map(|c| c.z().abs())
        .fold(0.0f64, f64::max);
    let details = if failures.is_empty() {
        format!("{} points all within 4 sigma (worst |z| = {worst:.2})", checks.len())
    } else {
        let mut msg = format!("{} of {} points failed: ", failures.len(), checks.len());
        for f in &failures {
            let _ = write!(msg, "[{} got {:.5} vs {:.5}] ", f.label, f.got, f.expect);
        }
        msg
    };
    CriterionOutcome::new(
        "C7",
        "oracle equivalence suite",
        failures.is_empty(),
        details,
    )
}

/// Criterion 8: with 2e7 quoins at the peak (half to the Z estimate) the
/// reported standard error of p_hat is of order 1e-4.
fn criterion_8_standard_error(seed: u64) -> CriterionOutcome {
    let noise = NoiseModel::default();
    let spec = QuoinSpec::from_theta_deg(90.0).unwrap();
    let z_n = 10_000_000u64;
    let z = runner::measure_quoins(&spec, Basis::Z, &noise, seed, runner::PURPOSE_VERIFY, 105, z_n, SHARDS);
    let est = BiasEstimate::from_counts(z.heads, z.samples);
    let pass = (0.8e-4..=2.5e-4).contains(&est.std_err);
    CriterionOutcome::new(
        "C8",
        "standard error consistency",
        pass,
        format!(
            "p_hat = {:.6}, std_err = {:.3e} at N_Z = 1e7 of 2e7 quoins (expect order 1e-4)",
            est.p_hat, est.std_err
        ),
    )
}

/// Informational: the default-noise closed-form fold per reference angle,
/// next to the ideal and truncated-model curves. Not asserted; the band
/// degenerates off-peak (see the q column at 75 degrees).
pub fn noisy_curve_table() -> String {
    let noise = NoiseModel::default();
    let mut out = String::from(
        "theta_deg  q_ideal   q_fold    q_trunc   f_ideal   f_fold    f_trunc\n",
    );
    for i in 0..12 {
        let theta = 15.0 * i as f64;
        let spec = QuoinSpec::from_theta_deg(theta).unwrap();
        let p = spec.p();
        let q_ideal = 0.5 * (1.0 + 2.0 * (p * (1.0 - p)).sqrt());
        let f_ideal = 4.0 * p * (1.0 - p);
        let p_fold = noisy_outcome_prob(&spec, &Basis::Z, &noise).to_f64();
        let q_fold = noisy_outcome_prob(&spec, &Basis::X, &noise).to_f64();
        let m = 2.0 * p_fold * (1.0 - p_fold);
        let nn = 2.0 * q_fold * (1.0 - q_fold);
        let f_fold = m / (m + nn);
        let q_trunc = q_ideal.min(1.0 - 0.010);
        let f_trunc = f_ideal.min(1.0 - 0.035);
        let _ = writeln!(
            out,
            "{theta:<10} {q_ideal:<9.4} {q_fold:<9.4} {q_trunc:<9.4} {f_ideal:<9.4} {f_fold:<9.4} {f_trunc:<9.4}"
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // The full criteria run in the acceptance target; here only the cheap
    // arithmetic ones.

    #[test]
    fn fast_criteria() {
        assert!(criterion_5_bound_arithmetic().passed);
        assert!(criterion_6_epsilon_relation().passed);
    }

    #[test]
    fn criterion_1_reports_known_rounding_rows() {
        let c1 = criterion_1_theory_rows();
        assert!(!c1.passed);
        assert!(c1.details.contains("theta=30"));
        assert!(c1.details.contains("theta=150"));
        assert!(c1.details.contains("theta=165"));
        // exactly the three f-column rows, none from the q column
        assert_eq!(c1.details.matches("|df|").count(), 3);
        assert_eq!(c1.details.matches("|dq|").count(), 0);
    }

    #[test]
    fn curve_table_has_12_rows() {
        let table = noisy_curve_table();
        assert_eq!(table.lines().count(), 13);
    }
}
