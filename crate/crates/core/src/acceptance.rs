//! Self-check suite: eleven numbered criteria covering sampler statistics,
//! closed-form constants, allocator/oracle agreement, moment inequalities,
//! the minoration sweep, dichotomy counting, chaining bands, and
//! worker-count determinism. Each criterion returns pass/fail plus a detail
//! line and appends flat result rows; the last criterion replays the whole
//! row-producing run on a different thread count and demands byte-identical
//! output.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::alloc::{alloc_bruteforce_oracle, xt_moment_alloc, ORACLE_STEPS};
use crate::chaining::{
    build_distance_family, check_regularity, default_levels, exhaustive_gamma, gamma_functional,
    DistanceSource,
};
use crate::estimate::{chunked_mc, MeanAcc};
use crate::families::{family_by_name, gaussian_family, mixed_family, p32_family, FAMILY_NAMES};
use crate::measure::{b_constant, surface_area, BlockInput, BlockSpec, Potential, ProductMeasure};
use crate::minoration::{
    dichotomy, esup_mc, generate_cube_set, minoration_ratio, CubeConstants, CubeSet,
};
use crate::moments::{gaussian_form_moment, lp_norm, mc_form_moments};
use crate::report::{comparable_csv, ResultRow};
use crate::rng::RngStream;
use crate::sampling::{BlockSampler, MeasureSampler};
use crate::{Error, Result};

/// Master seed used when none is supplied on the command line.
pub const DEFAULT_MASTER_SEED: u64 = 20260815;

/// Ceiling asserted on the empirical minoration constant over the sweep.
pub const K_HAT_CEILING: f64 = 30.0;

/// Band asserted on esup/gamma ratios over the sweep: all ratios must lie in
/// `[1/RATIO_BAND, RATIO_BAND]`.
pub const RATIO_BAND: f64 = 10.0;

/// Pinned lower bound on the per-level growth factor minus one for mixtures
/// whose block exponents stay at or below 4.
const MIXED_GROWTH_MIN: f64 = 0.08;

/// Pinned upper bound on the same quantity for a single block with exponent
/// 32, whose distances stop growing once the order passes the exponent.
const SATURATED_GROWTH_MAX: f64 = 0.05;

const SAMPLER_BUDGET_SECONDS: f64 = 60.0;
const ORACLE_BUDGET_SECONDS: f64 = 120.0;
const SWEEP_BUDGET_SECONDS: f64 = 1200.0;

const SWEEP_LEVELS: [f64; 3] = [2.0, 3.0, 4.0];
const SWEEP_DIMS: [usize; 3] = [32, 64, 128];
const SWEEP_INSTANCES: usize = 20;
const SWEEP_ESUP_SAMPLES: u64 = 4_000;

/// Outcome of one numbered criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Everything the suite produces: per-criterion verdicts plus the flat rows
/// from the single-worker run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutput {
    pub criteria: Vec<CriterionResult>,
    pub rows: Vec<ResultRow>,
}

impl SuiteOutput {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// Run criteria 1 through 10 on the current rayon pool. Failures never
/// propagate: a criterion that errors is recorded as failed with the error
/// in its detail line.
pub fn run_criteria(master_seed: u64) -> (Vec<CriterionResult>, Vec<ResultRow>) {
    let mut criteria = Vec::new();
    let mut rows = Vec::new();

    run_one(
        &mut criteria,
        &mut rows,
        1,
        "sampler moments and cone normalization",
        Some(SAMPLER_BUDGET_SECONDS),
        |rows| sampler_statistics(master_seed, rows),
    );
    run_one(
        &mut criteria,
        &mut rows,
        2,
        "closed-form constants",
        None,
        closed_form_constants,
    );
    run_one(
        &mut criteria,
        &mut rows,
        3,
        "allocation against the grid oracle",
        Some(ORACLE_BUDGET_SECONDS),
        |rows| allocation_vs_oracle(master_seed, rows),
    );
    run_one(
        &mut criteria,
        &mut rows,
        4,
        "gaussian closed forms",
        None,
        |rows| gaussian_reference_checks(master_seed, rows),
    );
    run_one(
        &mut criteria,
        &mut rows,
        5,
        "moment growth inequality",
        None,
        |rows| moment_growth_inequality(master_seed, rows),
    );
    run_one(
        &mut criteria,
        &mut rows,
        6,
        "radial moment regularity constant",
        None,
        radial_regularity_grid,
    );

    // Criteria 7 and 9 share one instance sweep; its runtime is charged to 7.
    let sweep_start = Instant::now();
    match run_sweep(master_seed, &mut rows) {
        Ok(records) => {
            let label = RngStream::new(master_seed, 7).label();
            let (mut pass, mut detail) = evaluate_sweep(&records, &mut rows, label);
            let seconds = sweep_start.elapsed().as_secs_f64();
            pass &= seconds < SWEEP_BUDGET_SECONDS;
            let _ = write!(
                detail,
                "; runtime {seconds:.0}s (budget {SWEEP_BUDGET_SECONDS:.0}s)"
            );
            criteria.push(CriterionResult {
                id: 7,
                name: "minoration constant sweep".into(),
                pass,
                detail,
                seconds,
            });
            run_one(
                &mut criteria,
                &mut rows,
                8,
                "dichotomy pigeonhole",
                None,
                |rows| dichotomy_pigeonhole(master_seed, rows),
            );
            run_one(
                &mut criteria,
                &mut rows,
                9,
                "two-sided chaining band",
                None,
                |rows| two_sided_band(master_seed, &records, rows),
            );
        }
        Err(err) => {
            let seconds = sweep_start.elapsed().as_secs_f64();
            criteria.push(CriterionResult {
                id: 7,
                name: "minoration constant sweep".into(),
                pass: false,
                detail: format!("sweep errored: {err}"),
                seconds,
            });
            run_one(
                &mut criteria,
                &mut rows,
                8,
                "dichotomy pigeonhole",
                None,
                |rows| dichotomy_pigeonhole(master_seed, rows),
            );
            criteria.push(CriterionResult {
                id: 9,
                name: "two-sided chaining band".into(),
                pass: false,
                detail: "minoration sweep unavailable".into(),
                seconds: 0.0,
            });
        }
    }

    run_one(
        &mut criteria,
        &mut rows,
        10,
        "distance family growth",
        None,
        |rows| distance_growth_checks(master_seed, rows),
    );

    (criteria, rows)
}

/// Run the full suite: criteria 1-10 on a single worker, the same again on
/// eight workers, and an eleventh criterion comparing the two row sets
/// byte for byte (timestamps blanked).
pub fn run_suite(master_seed: u64) -> Result<SuiteOutput> {
    let (mut criteria, rows) = thread_pool(1)?.install(|| run_criteria(master_seed));
    let replay_start = Instant::now();
    let (criteria_replay, rows_replay) = thread_pool(8)?.install(|| run_criteria(master_seed));
    let seconds = replay_start.elapsed().as_secs_f64();

    let csv_single = comparable_csv(&rows)?;
    let csv_replay = comparable_csv(&rows_replay)?;
    let identical = csv_single == csv_replay;
    let verdicts_match = criteria.len() == criteria_replay.len()
        && criteria
            .iter()
            .zip(&criteria_replay)
            .all(|(a, b)| a.id == b.id && a.pass == b.pass);
    criteria.push(CriterionResult {
        id: 11,
        name: "worker-count determinism".into(),
        pass: identical && verdicts_match,
        detail: format!(
            "{} rows ({} bytes) on 1 and 8 workers: {}; verdicts {}",
            rows.len(),
            csv_single.len(),
            if identical { "byte-identical" } else { "DIVERGED" },
            if verdicts_match { "match" } else { "DIFFER" },
        ),
        seconds,
    });
    Ok(SuiteOutput { criteria, rows })
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("failed to build a {threads}-thread pool: {e}")))
}

fn run_one<F>(
    criteria: &mut Vec<CriterionResult>,
    rows: &mut Vec<ResultRow>,
    id: usize,
    name: &str,
    budget: Option<f64>,
    criterion: F,
) where
    F: FnOnce(&mut Vec<ResultRow>) -> Result<(bool, String)>,
{
    let start = Instant::now();
    let outcome = criterion(rows);
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match outcome {
        Ok(x) => x,
        Err(err) => (false, format!("errored: {err}")),
    };
    if let Some(budget) = budget {
        pass &= seconds < budget;
        let _ = write!(detail, "; runtime {seconds:.1}s (budget {budget:.0}s)");
    }
    criteria.push(CriterionResult {
        id,
        name: name.to_string(),
        pass,
        detail,
        seconds,
    });
}

/// Criterion 1: coordinate mean/variance of a standard product measure over
/// one million draws, plus cone-sample normalization and the direction
/// second moment on three block shapes.
fn sampler_statistics(master_seed: u64, rows: &mut Vec<ResultRow>) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 1);
    let measure = gaussian_family(4)?;
    let sampler = MeasureSampler::new(&measure);
    let dim = sampler.dim();
    const DRAWS: u64 = 1_000_000;

    let coord_stream = stream.substream(0);
    let chunks = chunked_mc(DRAWS, coord_stream, |_, len, rng| {
        let mut x = vec![0.0; dim];
        let mut mean = MeanAcc::default();
        let mut square = MeanAcc::default();
        for _ in 0..len {
            sampler.sample_into(rng, &mut x);
            for &v in &x {
                mean.push(v);
                square.push(v * v);
            }
        }
        (mean, square)
    });
    let mut mean = MeanAcc::default();
    let mut square = MeanAcc::default();
    for (m, s) in &chunks {
        mean.merge(m);
        square.merge(s);
    }
    let mean_est = mean.estimate(coord_stream.label());
    let square_est = square.estimate(coord_stream.label());
    let variance = square_est.value - mean_est.value * mean_est.value;
    let mean_ok = mean_est.value.abs() < 4.0 * mean_est.stderr;
    let var_ok = (variance - 1.0).abs() < 4.0 * square_est.stderr;
    rows.push(ResultRow::new(
        "sampler",
        "gaussian-d4",
        "coord_mean",
        mean_est.value,
        mean_est.stderr,
        mean_est.n_samples,
        mean_est.seed,
    ));
    rows.push(ResultRow::new(
        "sampler",
        "gaussian-d4",
        "coord_variance",
        variance,
        square_est.stderr,
        square_est.n_samples,
        square_est.seed,
    ));

    let mut worst_norm_dev = 0.0f64;
    let mut cone_ok = true;
    for (idx, &(n, p)) in [(3usize, 1.5f64), (8, 2.0), (5, 3.0)].iter().enumerate() {
        let block = BlockSpec::new(n, p, Potential { lambda: 1.0, gamma: 1.0 }, 0.1)?;
        let block_sampler = BlockSampler::new(block);
        let sub = stream.substream(1 + idx as u64);
        let mut rng = sub.rng();
        let mut v = vec![0.0; n];
        let mut acc = MeanAcc::default();
        for _ in 0..20_000 {
            block_sampler.direction_into(&mut rng, &mut v);
            worst_norm_dev = worst_norm_dev.max((lp_norm(&v, p) - 1.0).abs());
            // A single coordinate per draw: averaging v_i^2 over coordinates
            // is degenerate at p = 2 (the sum is identically one).
            acc.push(v[0] * v[0]);
        }
        let est = acc.estimate(sub.label());
        let want = block.mean_square_direction_coord();
        cone_ok &= (est.value - want).abs() < 4.0 * est.stderr;
        rows.push(ResultRow::new(
            "sampler",
            format!("cone-n{n}-p{p}"),
            "direction_coord_square",
            est.value,
            est.stderr,
            est.n_samples,
            est.seed,
        ));
    }
    let norms_ok = worst_norm_dev < 1e-12;
    rows.push(ResultRow::new(
        "sampler",
        "cone-all",
        "worst_norm_deviation",
        worst_norm_dev,
        0.0,
        60_000,
        stream.label(),
    ));

    let pass = mean_ok && var_ok && norms_ok && cone_ok;
    Ok((
        pass,
        format!(
            "coord mean {:.2e} (se {:.1e}), variance {:.5} (se {:.1e}), \
             worst cone-norm deviation {:.1e}, direction second moments {}",
            mean_est.value,
            mean_est.stderr,
            variance,
            square_est.stderr,
            worst_norm_dev,
            if cone_ok { "within 4 se" } else { "OUT OF BAND" },
        ),
    ))
}

/// Criterion 2: boundary measure and isotropy constant at analytically known
/// points, to within 1e-10.
fn closed_form_constants(rows: &mut Vec<ResultRow>) -> Result<(bool, String)> {
    let checks = [
        ("surface_area_2_2", surface_area(2, 2.0), std::f64::consts::TAU),
        ("surface_area_2_1", surface_area(2, 1.0), 4.0),
        ("b_2", b_constant(2.0), 0.5),
    ];
    let mut worst = 0.0f64;
    for (name, got, want) in checks {
        let dev = (got - want).abs();
        worst = worst.max(dev);
        rows.push(ResultRow::new("constants", name, "abs_error", dev, 0.0, 0, 0));
    }
    Ok((
        worst <= 1e-10,
        format!("worst absolute error {worst:.2e} (tolerance 1e-10)"),
    ))
}

/// Criterion 3: the water-filling allocator against the brute-force grid
/// oracle on 50 random instances with at most three blocks.
fn allocation_vs_oracle(master_seed: u64, rows: &mut Vec<ResultRow>) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 3);
    let mut rng = stream.rng();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(1..=3usize);
        let blocks: Vec<BlockInput> = (0..m)
            .map(|_| BlockInput {
                n: rng.random_range(1..=5),
                p: 1.1 + 3.9 * rng.random::<f64>(),
                potential: Potential {
                    lambda: 0.3 + 1.7 * rng.random::<f64>(),
                    gamma: 1.0 + rng.random::<f64>(),
                },
            })
            .collect();
        let measure = ProductMeasure::from_blocks(blocks, 0.1)?;
        let mut t: Vec<f64> = (0..measure.dim())
            .map(|_| {
                if rng.random::<f64>() < 0.25 {
                    0.0
                } else {
                    2.0 * rng.random::<f64>() - 1.0
                }
            })
            .collect();
        if t.iter().all(|&v| v == 0.0) {
            t[0] = 0.7;
        }
        let support = t.iter().filter(|&&v| v != 0.0).count();
        let order = support as f64 + 6.0 * rng.random::<f64>();
        let fast = xt_moment_alloc(&measure, &t, order)?;
        let slow = alloc_bruteforce_oracle(&measure, &t, order, ORACLE_STEPS)?;
        let scale = slow.value.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((fast.value - slow.value).abs() / scale);
    }
    rows.push(ResultRow::new(
        "allocation",
        "random-instances",
        "worst_rel_error",
        worst,
        0.0,
        50,
        stream.label(),
    ));
    Ok((
        worst <= 1e-6,
        format!("worst relative error {worst:.2e} over 50 instances (tolerance 1e-6)"),
    ))
}

/// Criterion 4: Monte Carlo moments of a gaussian form against the exact
/// gamma-ratio value for orders 2, 4, 8, and the empirical supremum of
/// {0, e1} against the half-normal mean, all within three standard errors.
fn gaussian_reference_checks(
    master_seed: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 4);
    let measure = gaussian_family(6)?;
    let mut rng = stream.substream(0).rng();
    let t: Vec<f64> = (0..6).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let norm2 = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let orders = [2.0, 4.0, 8.0];
    let ests = mc_form_moments(&measure, &t, &orders, 300_000, stream.substream(1))?;
    let mut ok = true;
    let mut worst_z = 0.0f64;
    for (est, &r) in ests.iter().zip(&orders) {
        let want = norm2 * gaussian_form_moment(r, 1.0);
        let z = (est.value - want).abs() / est.stderr;
        worst_z = worst_z.max(z);
        ok &= z < 3.0;
        rows.push(ResultRow::new(
            "gaussian-reference",
            format!("moment-r{r}"),
            "mc_moment",
            est.value,
            est.stderr,
            est.n_samples,
            est.seed,
        ));
    }

    let pair = gaussian_family(2)?;
    let cube = CubeSet::from_parts(
        pair,
        2.0,
        vec![1.0; 2],
        vec![vec![], vec![0]],
        CubeConstants::default(),
    )?;
    let est = esup_mc(&cube, 400_000, stream.substream(2));
    let want = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let z = (est.value - want).abs() / est.stderr;
    worst_z = worst_z.max(z);
    ok &= z < 3.0;
    rows.push(ResultRow::new(
        "gaussian-reference",
        "esup-origin-e1",
        "esup",
        est.value,
        est.stderr,
        est.n_samples,
        est.seed,
    ));

    Ok((
        ok,
        format!("worst z-score {worst_z:.2} across three moment orders and the half-normal esup (limit 3)"),
    ))
}

/// Criterion 5: the moment growth inequality |X_t|_q <= (q/p)|X_t|_p on 100
/// random (measure, form) instances with integer 2 <= p < q <= 16, allowing
/// five standard errors of slack; zero violations.
fn moment_growth_inequality(
    master_seed: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 5);
    let mut violations = 0u32;
    let mut worst_margin = f64::NEG_INFINITY;
    for i in 0..100u64 {
        let sub = stream.substream(i);
        let mut rng = sub.rng();
        let measure = family_by_name(FAMILY_NAMES[(i % 4) as usize], 8)?;
        let t: Vec<f64> = (0..8).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let p = rng.random_range(2..=15u32);
        let q = rng.random_range(p + 1..=16u32);
        let (pf, qf) = (f64::from(p), f64::from(q));
        let ests = mc_form_moments(&measure, &t, &[pf, qf], 100_000, sub.substream(1))?;
        let ratio = qf / pf;
        let slack = 5.0 * (ests[1].stderr + ratio * ests[0].stderr);
        let margin = ests[1].value - ratio * ests[0].value - slack;
        if margin > 0.0 {
            violations += 1;
        }
        worst_margin = worst_margin.max(margin / ests[1].value.max(f64::MIN_POSITIVE));
    }
    rows.push(ResultRow::new(
        "moment-growth",
        "random-instances",
        "violations",
        f64::from(violations),
        0.0,
        100,
        stream.label(),
    ));
    rows.push(ResultRow::new(
        "moment-growth",
        "random-instances",
        "worst_rel_margin",
        worst_margin,
        0.0,
        100,
        stream.label(),
    ));
    Ok((
        violations == 0,
        format!(
            "{violations} violations over 100 instances; worst relative margin {worst_margin:.3} \
             (negative means the bound held with room)"
        ),
    ))
}

/// Criterion 6: regularity of the radial factor's moment curve. Over every
/// block shape on the grid, the q-to-p norm ratio must stay within a
/// constant of ((n+q)/(n+p))^(1/p_k); the worst constant is reported and
/// must not exceed 3.
fn radial_regularity_grid(rows: &mut Vec<ResultRow>) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    let mut arg = (0usize, 0.0f64);
    for &pk in &[1.1, 1.5, 2.0, 4.0] {
        let lambda = b_constant(pk);
        for n in 1..=64usize {
            let block = BlockSpec::new(n, pk, Potential { lambda, gamma: 1.0 }, 0.1)?;
            let ln_norm: Vec<f64> = (1..=128).map(|r| block.ln_radius_norm(r as f64)).collect();
            let ln_shift: Vec<f64> = (1..=128).map(|r| ((n + r) as f64).ln()).collect();
            for p in 1..128usize {
                for q in (p + 1)..=128 {
                    let excess =
                        ln_norm[q - 1] - ln_norm[p - 1] - (ln_shift[q - 1] - ln_shift[p - 1]) / pk;
                    if excess > worst {
                        worst = excess;
                        arg = (n, pk);
                    }
                }
            }
        }
    }
    let constant = worst.exp();
    rows.push(ResultRow::new(
        "radial-regularity",
        "grid",
        "constant",
        constant,
        0.0,
        0,
        0,
    ));
    Ok((
        constant <= 3.0,
        format!(
            "regularity constant {constant:.4} (limit 3), attained at n={}, block exponent {}",
            arg.0, arg.1
        ),
    ))
}

/// One sweep instance: separation level, ambient dimension, the measured
/// minoration constant, and the esup/gamma ratio.
struct SweepRecord {
    p: f64,
    d: usize,
    k_hat: f64,
    ratio: f64,
}

/// The shared instance sweep behind criteria 7 and 9: for every level,
/// dimension, and family, generate separated cube sets, estimate their
/// supremum, and compute the greedy chaining functional.
fn run_sweep(master_seed: u64, rows: &mut Vec<ResultRow>) -> Result<Vec<SweepRecord>> {
    let stream = RngStream::new(master_seed, 7);
    let constants = CubeConstants {
        delta_prime: 0.5,
        ..CubeConstants::default()
    };
    let mut records =
        Vec::with_capacity(SWEEP_LEVELS.len() * SWEEP_DIMS.len() * 4 * SWEEP_INSTANCES);
    for (pi, &p) in SWEEP_LEVELS.iter().enumerate() {
        for (di, &d) in SWEEP_DIMS.iter().enumerate() {
            for (fi, family) in FAMILY_NAMES.iter().enumerate() {
                let measure = family_by_name(family, d)?;
                for i in 0..SWEEP_INSTANCES {
                    let idx = ((pi * SWEEP_DIMS.len() + di) * FAMILY_NAMES.len() + fi)
                        * SWEEP_INSTANCES
                        + i;
                    let sub = stream.substream(idx as u64);
                    let cube = generate_cube_set(&measure, p, p, constants, sub.substream(0))?;
                    let report = minoration_ratio(&cube, SWEEP_ESUP_SAMPLES, sub.substream(1))?;
                    let points: Vec<Vec<f64>> =
                        (0..cube.n_points()).map(|t| cube.point_vec(t)).collect();
                    let dists = build_distance_family(
                        &measure,
                        &points,
                        default_levels(p),
                        DistanceSource::Surrogate,
                    )?;
                    let (gamma, _) = gamma_functional(&dists);
                    if !(gamma.is_finite() && gamma > 0.0) {
                        return Err(Error::Invariant(format!(
                            "degenerate chaining functional {gamma} on instance p={p} d={d} {family}"
                        )));
                    }
                    let ratio = report.esup.value / gamma;
                    let rel = report.esup.stderr / report.esup.value;
                    let instance = format!("p{p}-d{d}-{family}-i{i:02}");
                    rows.push(ResultRow::new(
                        "minoration-sweep",
                        instance.clone(),
                        "k_hat",
                        report.k_hat,
                        report.k_hat * rel,
                        SWEEP_ESUP_SAMPLES,
                        sub.label(),
                    ));
                    rows.push(ResultRow::new(
                        "minoration-sweep",
                        instance.clone(),
                        "gamma",
                        gamma,
                        0.0,
                        0,
                        sub.label(),
                    ));
                    rows.push(ResultRow::new(
                        "minoration-sweep",
                        instance,
                        "esup_gamma_ratio",
                        ratio,
                        ratio * rel,
                        SWEEP_ESUP_SAMPLES,
                        sub.label(),
                    ));
                    records.push(SweepRecord {
                        p,
                        d,
                        k_hat: report.k_hat,
                        ratio,
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Criterion 7 verdict: every constant finite, the maximum below the pinned
/// ceiling, and no significant upward drift of the constant in dimension at
/// any fixed level (lower end of the 95% slope interval at or below zero).
fn evaluate_sweep(
    records: &[SweepRecord],
    rows: &mut Vec<ResultRow>,
    label: u64,
) -> (bool, String) {
    let all_finite = records.iter().all(|r| r.k_hat.is_finite());
    let max_k = records.iter().map(|r| r.k_hat).fold(0.0f64, f64::max);
    let mut drift_ok = true;
    let mut worst_lower = f64::NEG_INFINITY;
    for &p in &SWEEP_LEVELS {
        let xs: Vec<f64> = records
            .iter()
            .filter(|r| r.p == p)
            .map(|r| (r.d as f64).ln())
            .collect();
        let ys: Vec<f64> = records
            .iter()
            .filter(|r| r.p == p)
            .map(|r| r.k_hat)
            .collect();
        let (slope, se) = ols_slope(&xs, &ys);
        let lower = slope - 1.96 * se;
        worst_lower = worst_lower.max(lower);
        drift_ok &= lower <= 1e-9;
        rows.push(ResultRow::new(
            "minoration-sweep",
            format!("drift-p{p}"),
            "k_hat_slope_lower95",
            lower,
            se,
            ys.len() as u64,
            label,
        ));
    }
    rows.push(ResultRow::new(
        "minoration-sweep",
        "summary",
        "max_k_hat",
        max_k,
        0.0,
        records.len() as u64,
        label,
    ));
    let pass = all_finite && max_k <= K_HAT_CEILING && drift_ok;
    (
        pass,
        format!(
            "{} instances: max constant {max_k:.2} (ceiling {K_HAT_CEILING}), \
             worst drift slope lower bound {worst_lower:.3}, all finite: {all_finite}",
            records.len()
        ),
    )
}

/// Criterion 8: on 100 random cube sets, the dichotomy always returns a
/// separated or clustered part of at least ceil(sqrt(set size)) points.
fn dichotomy_pigeonhole(master_seed: u64, rows: &mut Vec<ResultRow>) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 8);
    let constants = CubeConstants {
        delta_prime: 0.5,
        ..CubeConstants::default()
    };
    // Dimensions start at 32: support caps floor(delta_prime * p) give only
    // singleton supports below p = 4, and ceil(e^3) - 1 = 20 nonzero points
    // need at least 20 of them.
    let dims = [32usize, 64, 128];
    let mut failures = 0u32;
    let mut tightest = f64::INFINITY;
    for i in 0..100u64 {
        let p = SWEEP_LEVELS[(i % 3) as usize];
        let d = dims[((i / 3) % 3) as usize];
        let family = FAMILY_NAMES[((i / 9) % 4) as usize];
        let measure = family_by_name(family, d)?;
        let cube = generate_cube_set(&measure, p, p, constants, stream.substream(i))?;
        let need = (cube.n_points() as f64).sqrt().ceil() as usize;
        let got = dichotomy(&cube, p, constants.big_d, p).len();
        if got < need {
            failures += 1;
        }
        tightest = tightest.min(got as f64 - need as f64);
    }
    rows.push(ResultRow::new(
        "dichotomy",
        "random-cubes",
        "failures",
        f64::from(failures),
        0.0,
        100,
        stream.label(),
    ));
    Ok((
        failures == 0,
        format!("{failures} pigeonhole failures over 100 cube sets; tightest margin {tightest}"),
    ))
}

/// Criterion 9: all sweep esup/gamma ratios inside the pinned band, and the
/// greedy chaining functional within a factor two of the exhaustive optimum
/// on sets of at most six points.
fn two_sided_band(
    master_seed: u64,
    records: &[SweepRecord],
    rows: &mut Vec<ResultRow>,
) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 9);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for r in records {
        min_ratio = min_ratio.min(r.ratio);
        max_ratio = max_ratio.max(r.ratio);
    }
    let band = (1.0 / min_ratio).max(max_ratio);
    let band_ok = band.is_finite() && band <= RATIO_BAND;
    rows.push(ResultRow::new(
        "two-sided",
        "sweep",
        "ratio_band",
        band,
        0.0,
        records.len() as u64,
        stream.label(),
    ));

    let measure = mixed_family(8)?;
    let mut worst_factor = 0.0f64;
    let mut ordered_ok = true;
    let mut case = 0u64;
    for size in 2..=6usize {
        for _ in 0..4 {
            let sub = stream.substream(case);
            case += 1;
            let mut rng = sub.rng();
            let points: Vec<Vec<f64>> = (0..size)
                .map(|_| (0..8).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
                .collect();
            let family = build_distance_family(&measure, &points, 3, DistanceSource::Surrogate)?;
            let exact = exhaustive_gamma(&family)?;
            let (greedy, _) = gamma_functional(&family);
            ordered_ok &= greedy >= exact - 1e-9 * exact.max(1.0);
            let factor = if exact > 0.0 { greedy / exact } else { 1.0 };
            worst_factor = worst_factor.max(factor);
        }
    }
    rows.push(ResultRow::new(
        "two-sided",
        "small-sets",
        "worst_greedy_factor",
        worst_factor,
        0.0,
        case,
        stream.label(),
    ));

    let pass = band_ok && ordered_ok && worst_factor <= 2.0 + 1e-9;
    Ok((
        pass,
        format!(
            "esup/gamma band {band:.2} over {} instances (limit {RATIO_BAND}); \
             greedy within {worst_factor:.3}x of exhaustive on {case} small sets (limit 2)",
            records.len()
        ),
    ))
}

/// Criterion 10: surrogate distances double at most per level (checked
/// exactly), mixtures with block exponents <= 4 keep a strictly positive
/// per-level growth margin, and a single exponent-32 block drives that
/// margin toward zero.
fn distance_growth_checks(
    master_seed: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<(bool, String)> {
    let stream = RngStream::new(master_seed, 10);
    let mut rng = stream.rng();
    let points: Vec<Vec<f64>> = (0..7)
        .map(|_| (0..8).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect();

    let mixed = mixed_family(8)?;
    let family_mixed = build_distance_family(&mixed, &points, 9, DistanceSource::Surrogate)?;
    let reg_mixed = check_regularity(&family_mixed);

    let saturated = p32_family(8)?;
    let family_sat = build_distance_family(&saturated, &points, 9, DistanceSource::Surrogate)?;
    let reg_sat = check_regularity(&family_sat);

    let mut worst_doubling = 0.0f64;
    for family in [&family_mixed, &family_sat] {
        let n = family.n_points();
        for level in 1..family.levels() {
            for i in 0..n {
                for j in (i + 1)..n {
                    let prev = family.distance(level - 1, i, j);
                    if prev > 0.0 {
                        worst_doubling = worst_doubling.max(family.distance(level, i, j) / prev);
                    }
                }
            }
        }
    }

    rows.push(ResultRow::new(
        "distance-growth",
        "both-families",
        "worst_doubling",
        worst_doubling,
        0.0,
        0,
        stream.label(),
    ));
    rows.push(ResultRow::new(
        "distance-growth",
        "mixed-exponents",
        "growth_margin",
        reg_mixed.epsilon,
        0.0,
        0,
        stream.label(),
    ));
    rows.push(ResultRow::new(
        "distance-growth",
        "exponent-32",
        "growth_margin",
        reg_sat.epsilon,
        0.0,
        0,
        stream.label(),
    ));

    let pass = worst_doubling <= 2.0 + 1e-9
        && reg_mixed.doubling_ok
        && reg_sat.doubling_ok
        && reg_mixed.epsilon > MIXED_GROWTH_MIN
        && reg_sat.epsilon < SATURATED_GROWTH_MAX
        && reg_sat.epsilon > 0.0;
    Ok((
        pass,
        format!(
            "worst doubling factor {worst_doubling:.4} (limit 2); growth margin {:.4} for \
             mixed exponents (needs > {MIXED_GROWTH_MIN}) vs {:.4} for exponent 32 \
             (needs 0 < margin < {SATURATED_GROWTH_MAX})",
            reg_mixed.epsilon, reg_sat.epsilon,
        ),
    ))
}

/// Least-squares slope of y on x with its normal-theory standard error.
fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    (slope, se)
}
