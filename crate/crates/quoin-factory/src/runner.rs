//! Sharded Monte Carlo execution behind the CLI modes.
//!
//! Work is split into a fixed number of shards keyed by
//! (seed, purpose, point index, shard id); shards run on whatever threads
//! rayon provides and are folded in shard order, so reports depend only on
//! the config and seed, never on scheduling.

use crate::analysis::{self, BiasEstimate};
use crate::coin::{BiasedSource, CoinSource};
use crate::config::ExperimentConfig;
use crate::factory::{self, FactoryError, FactoryPipeline};
use crate::quoin::{sample_quoin, Basis, NoiseModel, QuoinSpec};
use crate::report::{BoundRow, BoundsReport, ClassicalRow, RunReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

// Stream-id purposes; the base-coin stream of a classical run gets the
// AUX_OFFSET-shifted id so source and auxiliary randomness never collide.
const PURPOSE_Z_ESTIMATE: u8 = 1;
const PURPOSE_X_ESTIMATE: u8 = 2;
const PURPOSE_F4P: u8 = 3;
const PURPOSE_FT: u8 = 4;
const PURPOSE_QT: u8 = 5;
pub(crate) const PURPOSE_VERIFY: u8 = 6;
const AUX_OFFSET: u8 = 0x40;

pub(crate) fn stream_id(purpose: u8, point: usize, shard: u64) -> u64 {
    ((purpose as u64) << 48) | ((point as u64 & 0xFFFF) << 32) | (shard & 0xFFFF_FFFF)
}

/// Splits `total` into `shards` near-equal chunks.
pub(crate) fn split_work(total: u64, shards: u64) -> Vec<u64> {
    let base = total / shards;
    let extra = total % shards;
    (0..shards)
        .map(|i| base + u64::from(i < extra))
        .collect()
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tallies of repeated quoin measurements in one basis.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct QuoinTally {
    pub heads: u64,
    pub samples: u64,
    pub purify_rejections: u64,
}

pub(crate) fn measure_quoins(
    spec: &QuoinSpec,
    basis: Basis,
    noise: &NoiseModel,
    seed: u64,
    purpose: u8,
    point: usize,
    total: u64,
    shards: u64,
) -> QuoinTally {
    split_work(total, shards)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut rng = rng_for(seed, stream_id(purpose, point, shard as u64));
            let mut tally = QuoinTally::default();
            for _ in 0..count {
                let out = sample_quoin(spec, &basis, noise, &mut rng);
                tally.samples += 1;
                tally.heads += u64::from(out.bit.is_head());
                tally.purify_rejections += out.purify_rejections;
            }
            tally
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(QuoinTally::default(), |mut acc, t| {
            acc.heads += t.heads;
            acc.samples += t.samples;
            acc.purify_rejections += t.purify_rejections;
            acc
        })
}

/// Aggregate of repeated protocol runs.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct F4pAggregate {
    pub heads: u64,
    pub produced: u64,
    pub cutoffs: u64,
    pub quoins: u64,
    pub z_quoins: u64,
    pub x_quoins: u64,
    pub purify_rejections: u64,
}

pub(crate) fn run_f4p(
    spec: &QuoinSpec,
    noise: &NoiseModel,
    pipe: &FactoryPipeline,
    seed: u64,
    point: usize,
    total: u64,
    shards: u64,
) -> F4pAggregate {
    split_work(total, shards)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut rng = rng_for(seed, stream_id(PURPOSE_F4P, point, shard as u64));
            let mut agg = F4pAggregate::default();
            for _ in 0..count {
                match factory::quantum_f4p(spec, noise, pipe, &mut rng) {
                    Ok(out) => {
                        agg.produced += 1;
                        agg.heads += u64::from(out.bit.is_head());
                        agg.quoins += out.meter.total();
                        agg.z_quoins += out.meter.step(factory::STEP_Z_QUOIN);
                        agg.x_quoins += out.meter.step(factory::STEP_X_QUOIN);
                        agg.purify_rejections += out.purify_rejections;
                    }
                    Err(FactoryError::Cutoff { .. }) => agg.cutoffs += 1,
                    Err(e) => panic!("unexpected factory error: {e}"),
                }
            }
            agg
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(F4pAggregate::default(), |mut acc, a| {
            acc.heads += a.heads;
            acc.produced += a.produced;
            acc.cutoffs += a.cutoffs;
            acc.quoins += a.quoins;
            acc.z_quoins += a.z_quoins;
            acc.x_quoins += a.x_quoins;
            acc.purify_rejections += a.purify_rejections;
            acc
        })
}

/// Per-angle simulation: estimate p from Z, q from X, then produce f-coins.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<RunReport>, FactoryError> {
    if cfg.n_quoins == 0 || cfg.n_outputs == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::with_capacity(cfg.theta_list.len());
    for (idx, theta) in cfg.theta_list.iter().enumerate() {
        let spec = QuoinSpec::from_theta_deg(*theta).expect("validated theta");
        let z_n = cfg.n_quoins / 2;
        let x_n = cfg.n_quoins - z_n;

        let z = measure_quoins(
            &spec,
            Basis::Z,
            &cfg.noise,
            cfg.seed,
            PURPOSE_Z_ESTIMATE,
            idx,
            z_n,
            cfg.shards,
        );
        let x = measure_quoins(
            &spec,
            Basis::X,
            &cfg.noise,
            cfg.seed,
            PURPOSE_X_ESTIMATE,
            idx,
            x_n,
            cfg.shards,
        );
        let f = run_f4p(
            &spec,
            &cfg.noise,
            &cfg.pipeline,
            cfg.seed,
            idx,
            cfg.n_outputs,
            cfg.shards,
        );

        let p_est = BiasEstimate::from_counts(z.heads, z.samples);
        let q_est = BiasEstimate::from_counts(x.heads, x.samples);
        let (q_th, f_th) = analysis::theory_row(p_est.p_hat);
        let produced = f.produced.max(1);
        let f_est = BiasEstimate::from_counts(f.heads, produced);

        rows.push(RunReport {
            theta_deg: *theta,
            p_hat: p_est.p_hat,
            n_p: cfg.n_quoins,
            q_th,
            q_exp: q_est.p_hat,
            f_th,
            f_exp: f_est.p_hat,
            n_f: f.produced,
            mean_quoins_per_f: f.quoins as f64 / produced as f64,
            p_std_err: p_est.std_err,
            q_std_err: q_est.std_err,
            f_std_err: f_est.std_err,
            mean_z_quoins_per_f: f.z_quoins as f64 / produced as f64,
            mean_x_quoins_per_f: f.x_quoins as f64 / produced as f64,
            purify_rejections: z.purify_rejections + x.purify_rejections + f.purify_rejections,
            cutoffs: f.cutoffs,
        });
    }
    Ok(rows)
}

/// Per-sample outcome of a classical construction shard.
#[derive(Clone, Debug, Default)]
struct ClassicalShard {
    heads: u64,
    produced: u64,
    cutoffs: u64,
    draws: Vec<u64>,
}

type ClassicalSampler = dyn Fn(
        &mut BiasedSource,
        &FactoryPipeline,
        &mut ChaCha8Rng,
    ) -> Result<crate::coin::Bit, FactoryError>
    + Sync;

struct ClassicalStats {
    est: BiasEstimate,
    cutoffs: u64,
    mean_draws: f64,
    quantiles: [u64; 3],
}

fn run_classical_point(
    p: f64,
    point: usize,
    cfg: &ExperimentConfig,
    purpose: u8,
    sampler: &ClassicalSampler,
) -> ClassicalStats {
    let shards: Vec<ClassicalShard> = split_work(cfg.n_outputs, cfg.shards)
        .into_par_iter()
        .enumerate()
        .map(|(shard, count)| {
            let mut src = BiasedSource::with_stream(
                p,
                cfg.seed,
                stream_id(purpose + AUX_OFFSET, point, shard as u64),
            )
            .expect("validated bias");
            let mut rng = rng_for(cfg.seed, stream_id(purpose, point, shard as u64));
            let mut out = ClassicalShard::default();
            for _ in 0..count {
                let before = src.draws();
                match sampler(&mut src, &cfg.pipeline, &mut rng) {
                    Ok(bit) => {
                        out.produced += 1;
                        out.heads += u64::from(bit.is_head());
                        out.draws.push(src.draws() - before);
                    }
                    Err(FactoryError::Cutoff { .. }) => out.cutoffs += 1,
                    Err(e) => panic!("unexpected factory error: {e}"),
                }
            }
            out
        })
        .collect();

    let mut heads = 0;
    let mut produced = 0;
    let mut cutoffs = 0;
    let mut draws = Vec::new();
    for s in shards {
        heads += s.heads;
        produced += s.produced;
        cutoffs += s.cutoffs;
        draws.extend(s.draws);
    }
    draws.sort_unstable();
    let quantile = |q: f64| -> u64 {
        if draws.is_empty() {
            0
        } else {
            draws[((draws.len() - 1) as f64 * q).round() as usize]
        }
    };
    ClassicalStats {
        est: BiasEstimate::from_counts(heads, produced.max(1)),
        cutoffs,
        mean_draws: if draws.is_empty() {
            0.0
        } else {
            draws.iter().sum::<u64>() as f64 / draws.len() as f64
        },
        quantiles: [quantile(0.5), quantile(0.9), quantile(0.99)],
    }
}

/// Classical constructions on the bias grid implied by the angle list.
pub fn run_classical(cfg: &ExperimentConfig) -> Result<Vec<ClassicalRow>, FactoryError> {
    if cfg.n_outputs == 0 {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for (idx, theta) in cfg.theta_list.iter().enumerate() {
        let p = QuoinSpec::from_theta_deg(*theta).expect("validated theta").p();
        let eps1 = cfg.eps1;
        let ft = run_classical_point(p, idx, cfg, PURPOSE_FT, &move |src, pipe, rng| {
            factory::classical_ft(src, eps1, pipe, rng)
        });
        let qt_eps1 = cfg.qt_eps1;
        let qt = run_classical_point(p, idx, cfg, PURPOSE_QT, &move |src, pipe, rng| {
            factory::classical_qt(src, qt_eps1, pipe, rng)
        });
        let ft_target = (4.0 * p * (1.0 - p)).min(1.0 - cfg.eps1);
        let qt_target = 0.5 * (1.0 + (4.0 * p * (1.0 - p)).min(1.0 - cfg.qt_eps1).sqrt());
        rows.push(ClassicalRow {
            p,
            n_outputs: cfg.n_outputs,
            ft_target,
            ft_hat: ft.est.p_hat,
            ft_std_err: ft.est.std_err,
            ft_mean_coins: ft.mean_draws,
            ft_q50: ft.quantiles[0],
            ft_q90: ft.quantiles[1],
            ft_q99: ft.quantiles[2],
            ft_cutoffs: ft.cutoffs,
            qt_target,
            qt_hat: qt.est.p_hat,
            qt_std_err: qt.est.std_err,
            qt_mean_coins: qt.mean_draws,
            qt_q50: qt.quantiles[0],
            qt_q90: qt.quantiles[1],
            qt_q99: qt.quantiles[2],
            qt_cutoffs: qt.cutoffs,
        });
    }
    Ok(rows)
}

/// Tail-bound table for the configured truncation.
pub fn run_bounds(cfg: &ExperimentConfig) -> BoundsReport {
    let eps1p = cfg.eps1p;
    let grid = [
        1_000u64, 2_000, 5_000, 10_000, 15_000, 19_000, 25_000, 38_000, 50_000, 100_000,
    ];
    let rows = grid
        .iter()
        .map(|&n| BoundRow {
            eps1p,
            n,
            bound: analysis::np_tail_bound(&analysis::TailBoundParams { eps1p, n }),
        })
        .collect();
    let min = analysis::np_min_n(eps1p);
    BoundsReport {
        rows,
        eps1p,
        approx_n: min.approx_n,
        exact_min_n: min.exact_n,
        two_n_cost: 2.0 * min.approx_n,
    }
}
