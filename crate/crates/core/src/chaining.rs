//! Dyadic moment-distance families over finite point sets, greedy partition
//! trees, the chaining functional they induce, and the empirical probes that
//! compare it against Monte Carlo suprema: regularity of the distance scales,
//! the growth condition, and concentration of the supremum.

use rayon::prelude::*;
use serde::Serialize;

use crate::alloc::relaxed_moment_alloc;
use crate::estimate::{chunked_mc, Estimate, MeanAcc};
use crate::measure::ProductMeasure;
use crate::minoration::esup_mc_points;
use crate::moments::{conjugate_block_norms, mc_form_moments, mc_tail_unstable};
use crate::rng::RngStream;
use crate::sampling::MeasureSampler;
use crate::{Error, Result};

/// Moment surrogate of the process distance between two points at `order`:
/// the relaxed budget allocation over the conjugate block norms of `s - t`.
/// Monotone in the order, symmetric, and a metric on coefficient vectors.
pub fn moment_distance(
    measure: &ProductMeasure,
    s: &[f64],
    t: &[f64],
    order: f64,
) -> Result<f64> {
    if s.len() != t.len() || s.len() != measure.dim() {
        return Err(Error::Config("point lengths do not match the dimension".into()));
    }
    let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
    let weights = conjugate_block_norms(measure, &diff);
    Ok(relaxed_moment_alloc(measure, &weights, order)?.value)
}

/// Number of dyadic levels used by default at moment level `p`: orders
/// `2^0 .. 2^(floor(log2 p) + 2)`.
pub fn default_levels(p: f64) -> usize {
    debug_assert!(p >= 1.0);
    p.log2().floor() as usize + 2
}

/// How a [`DistanceFamily`] measures its pairwise distances.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSource {
    /// Deterministic moment surrogate (validated: symmetric, triangle
    /// inequality, monotone and at most doubling across levels).
    Surrogate,
    /// Monte Carlo moments of each difference from one shared sample batch
    /// per pair; metric checks are skipped because of sampling noise.
    Mc { n_samples: u64, stream: RngStream },
}

/// Pairwise distances of a point set at every dyadic order `2^n`,
/// `n = 0 .. n_max`.
#[derive(Debug, Clone)]
pub struct DistanceFamily {
    measure: ProductMeasure,
    points: Vec<Vec<f64>>,
    matrices: Vec<Vec<f64>>,
    mc_based: bool,
}

impl DistanceFamily {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Number of stored levels (`n_max + 1`).
    pub fn levels(&self) -> usize {
        self.matrices.len()
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn order_at(level: usize) -> f64 {
        (1u64 << level) as f64
    }

    pub fn distance(&self, level: usize, i: usize, j: usize) -> f64 {
        self.matrices[level][i * self.points.len() + j]
    }

    /// Distance at any level: stored when available, otherwise the doubling
    /// extension `2^(level - n_max) * d_(n_max)`.
    pub fn distance_extended(&self, level: usize, i: usize, j: usize) -> f64 {
        let last = self.matrices.len() - 1;
        if level <= last {
            self.distance(level, i, j)
        } else {
            2f64.powi((level - last) as i32) * self.distance(last, i, j)
        }
    }

    /// Largest pairwise distance inside a cell at one level.
    pub fn diameter(&self, level: usize, cell: &[usize]) -> f64 {
        self.diameter_pair(level, cell).0
    }

    fn diameter_pair(&self, level: usize, cell: &[usize]) -> (f64, (usize, usize)) {
        let mut best = (0.0, (0, 0));
        for (a, &i) in cell.iter().enumerate() {
            for &j in &cell[a + 1..] {
                let d = self.distance_extended(level, i, j);
                if d > best.0 {
                    best = (d, (i, j));
                }
            }
        }
        best
    }
}

/// Compute the distance family of a point set. Surrogate families are
/// validated: distances must be monotone across levels, grow by at most a
/// factor of two per level, and satisfy the triangle inequality at every
/// level. Monte Carlo families refuse order/sample combinations whose tails
/// are too heavy to estimate.
pub fn build_distance_family(
    measure: &ProductMeasure,
    points: &[Vec<f64>],
    n_max: usize,
    source: DistanceSource,
) -> Result<DistanceFamily> {
    if points.is_empty() {
        return Err(Error::Config("distance family needs at least one point".into()));
    }
    if points.iter().any(|t| t.len() != measure.dim()) {
        return Err(Error::Config("point length does not match dimension".into()));
    }
    if n_max > 20 {
        return Err(Error::Config(format!("level count {n_max} is too deep", )));
    }
    let orders: Vec<f64> = (0..=n_max).map(DistanceFamily::order_at).collect();
    if let DistanceSource::Mc { n_samples, .. } = source {
        if mc_tail_unstable(orders[n_max], n_samples) {
            return Err(Error::Config(format!(
                "Monte Carlo moments of order {} need at least 1e6 samples, got {n_samples}",
                orders[n_max]
            )));
        }
    }

    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let per_pair: Vec<Result<Vec<f64>>> = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, &(i, j))| match source {
            DistanceSource::Surrogate => {
                let diff: Vec<f64> = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| a - b)
                    .collect();
                let weights = conjugate_block_norms(measure, &diff);
                orders
                    .iter()
                    .map(|&r| Ok(relaxed_moment_alloc(measure, &weights, r)?.value))
                    .collect()
            }
            DistanceSource::Mc { n_samples, stream } => {
                let diff: Vec<f64> = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| a - b)
                    .collect();
                let ests =
                    mc_form_moments(measure, &diff, &orders, n_samples, stream.substream(idx as u64))?;
                Ok(ests.into_iter().map(|e| e.value).collect())
            }
        })
        .collect();

    let mut matrices = vec![vec![0.0; n * n]; n_max + 1];
    for (&(i, j), row) in pairs.iter().zip(per_pair) {
        let row = row?;
        for (level, d) in row.into_iter().enumerate() {
            matrices[level][i * n + j] = d;
            matrices[level][j * n + i] = d;
        }
    }
    let family = DistanceFamily {
        measure: measure.clone(),
        points: points.to_vec(),
        matrices,
        mc_based: matches!(source, DistanceSource::Mc { .. }),
    };
    if !family.mc_based {
        validate_family(&family)?;
    }
    Ok(family)
}

fn validate_family(family: &DistanceFamily) -> Result<()> {
    let n = family.n_points();
    let slack = 1.0 + 1e-9;
    for level in 0..family.levels() {
        for i in 0..n {
            for j in (i + 1)..n {
                let d = family.distance(level, i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Invariant(format!(
                        "distance({level}, {i}, {j}) = {d} is not a metric value"
                    )));
                }
                if level > 0 {
                    let prev = family.distance(level - 1, i, j);
                    if d < prev / slack {
                        return Err(Error::Invariant(format!(
                            "distances shrank across levels {} -> {level} on pair ({i}, {j})",
                            level - 1
                        )));
                    }
                    if d > 2.0 * prev * slack {
                        return Err(Error::Invariant(format!(
                            "distances more than doubled across levels {} -> {level} on pair ({i}, {j})",
                            level - 1
                        )));
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d_ij = family.distance(level, i, j);
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let via = family.distance(level, i, k) + family.distance(level, k, j);
                    if d_ij > via * slack + 1e-12 {
                        return Err(Error::Invariant(format!(
                            "triangle inequality failed at level {level} on ({i}, {j}) via {k}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Nested partitions of the index set, one per level; level `n` holds at
/// most `2^(2^n)` cells and refines level `n - 1`.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionTree {
    pub levels: Vec<Vec<Vec<usize>>>,
}

fn allowed_cells(level: usize) -> usize {
    if level >= 6 {
        usize::MAX
    } else {
        1usize << (1usize << level)
    }
}

/// Greedy partition tree: each level starts from its parent's cells and
/// repeatedly splits the cell with the largest diameter (measured at that
/// level's distance) across its diameter pair, until the cell budget of the
/// level is spent or every cell stops being splittable.
pub fn greedy_partition_tree(family: &DistanceFamily) -> PartitionTree {
    let n = family.n_points();
    let mut levels: Vec<Vec<Vec<usize>>> = vec![vec![(0..n).collect()]];
    for level in 1..=32 {
        let budget = allowed_cells(level).min(n);
        let mut cells = levels[level - 1].clone();
        while cells.len() < budget {
            let split = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.len() > 1)
                .map(|(ci, c)| (ci, family.diameter_pair(level, c)))
                .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
            let Some((ci, (diam, (a, b)))) = split else { break };
            if diam <= 0.0 {
                break;
            }
            let cell = cells.swap_remove(ci);
            let (mut near_a, mut near_b) = (Vec::new(), Vec::new());
            for &t in &cell {
                if family.distance_extended(level, t, a) <= family.distance_extended(level, t, b) {
                    near_a.push(t);
                } else {
                    near_b.push(t);
                }
            }
            cells.push(near_a);
            cells.push(near_b);
        }
        let done = cells
            .iter()
            .all(|c| c.len() == 1 || family.diameter_pair(level, c).0 <= 0.0);
        levels.push(cells);
        if done {
            break;
        }
    }
    PartitionTree { levels }
}

/// Chaining sum of a tree: `sup_t sum_n diam_n(cell of t at level n)`.
pub fn gamma_value(family: &DistanceFamily, tree: &PartitionTree) -> f64 {
    let mut totals = vec![0.0f64; family.n_points()];
    for (level, cells) in tree.levels.iter().enumerate() {
        for cell in cells {
            if cell.len() < 2 {
                continue;
            }
            let d = family.diameter(level, cell);
            for &t in cell {
                totals[t] += d;
            }
        }
    }
    totals.into_iter().fold(0.0, f64::max)
}

/// Greedy upper estimate of the chaining functional together with the tree
/// that realizes it.
pub fn gamma_functional(family: &DistanceFamily) -> (f64, PartitionTree) {
    let tree = greedy_partition_tree(family);
    (gamma_value(family, &tree), tree)
}

/// Exact chaining functional for up to six points. The first two levels
/// decide everything at this size: level 1 holds at most 4 cells and level 2
/// already affords singletons, so the value is the level-0 diameter plus the
/// best worst-cell level-1 diameter over all partitions into at most 4 cells.
pub fn exhaustive_gamma(family: &DistanceFamily) -> Result<f64> {
    let n = family.n_points();
    if n > 6 {
        return Err(Error::Config(format!(
            "exhaustive chaining functional supports at most 6 points, got {n}"
        )));
    }
    if family.levels() < 2 {
        return Err(Error::Config("exhaustive functional needs two levels".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let delta0 = family.diameter(0, &all);
    if n <= 4 {
        return Ok(delta0);
    }

    fn descend(
        family: &DistanceFamily,
        next: usize,
        n: usize,
        blocks: &mut Vec<Vec<usize>>,
        best: &mut f64,
    ) {
        if next == n {
            let worst = blocks
                .iter()
                .map(|cell| family.diameter(1, cell))
                .fold(0.0, f64::max);
            *best = best.min(worst);
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(next);
            descend(family, next + 1, n, blocks, best);
            blocks[b].pop();
        }
        if blocks.len() < 4 {
            blocks.push(vec![next]);
            descend(family, next + 1, n, blocks, best);
            blocks.pop();
        }
    }
    let mut best = f64::INFINITY;
    descend(family, 1, n, &mut vec![vec![0]], &mut best);
    Ok(delta0 + best)
}

/// Observed growth of distances across consecutive levels. `epsilon` is the
/// worst-case relative growth (`min ratio - 1`): distance families whose
/// blocks exhaust their useful moment range stop growing and `epsilon`
/// collapses toward zero.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub per_level: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub doubling_ok: bool,
}

pub fn check_regularity(family: &DistanceFamily) -> RegularityReport {
    let n = family.n_points();
    let mut per_level = Vec::new();
    let mut epsilon = f64::INFINITY;
    let mut doubling_ok = true;
    for level in 1..family.levels() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in (i + 1)..n {
                let prev = family.distance(level - 1, i, j);
                if prev <= 0.0 {
                    continue;
                }
                let ratio = family.distance(level, i, j) / prev;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        if lo.is_finite() {
            epsilon = epsilon.min(lo - 1.0);
            doubling_ok &= hi <= 2.0 + 1e-9;
            per_level.push((lo, hi));
        } else {
            per_level.push((f64::NAN, f64::NAN));
        }
    }
    RegularityReport {
        per_level,
        epsilon: if epsilon.is_finite() { epsilon } else { 0.0 },
        doubling_ok,
    }
}

/// Geometry of the growth-condition probe: centers separated by
/// `2^n r^-(j+1)` at level `n + 1` carry balls of radius `2^(n+kappa) r^-(j+2)`
/// at level `n + kappa`.
#[derive(Debug, Clone, Copy)]
pub struct GrowthProbeConfig {
    pub r: f64,
    pub kappa: usize,
    pub trials: usize,
    pub n_samples: u64,
}

impl Default for GrowthProbeConfig {
    fn default() -> Self {
        GrowthProbeConfig {
            r: 4.0,
            kappa: 2,
            trials: 2,
            n_samples: 20_000,
        }
    }
}

impl GrowthProbeConfig {
    /// Theory-sized probe for a family of growth `epsilon`: the level offset
    /// is large enough that scales shrink by a factor of 64 across it.
    pub fn from_regularity(epsilon: f64) -> Self {
        let kappa = (64f64.ln() / (1.0 + epsilon.max(1e-6)).ln()).ceil() as usize;
        let kappa = kappa.clamp(2, 24);
        GrowthProbeConfig {
            r: 2f64.powi(kappa as i32 - 2),
            kappa,
            ..GrowthProbeConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCase {
    pub level: usize,
    pub scale_index: usize,
    pub separation: f64,
    pub n_centers: usize,
    pub esup_union: Estimate,
    pub esup_ball_min: Estimate,
    pub k_needed: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthProbeReport {
    pub worst_k: f64,
    pub cases: Vec<GrowthCase>,
}

/// Empirical growth condition: for every probe geometry with at least two
/// separated centers, estimate how large a constant `K` must be for
/// `E sup over the union >= separation / K + min_i E sup over ball i`.
/// Singleton balls reduce the case to the separated lower bound itself.
pub fn growth_condition_probe(
    family: &DistanceFamily,
    config: GrowthProbeConfig,
    stream: RngStream,
) -> Result<GrowthProbeReport> {
    if config.kappa == 0 || config.r <= 1.0 {
        return Err(Error::Config("growth probe needs kappa >= 1 and r > 1".into()));
    }
    if family.levels() <= config.kappa {
        return Err(Error::Config(format!(
            "growth probe offset {} needs a deeper family ({} levels)",
            config.kappa,
            family.levels()
        )));
    }
    let n = family.n_points();
    let mut cases = Vec::new();
    let mut counter = 0u64;
    for level in 0..(family.levels() - config.kappa) {
        for j in 0..config.trials {
            let separation = 2f64.powi(level as i32) / config.r.powi(j as i32 + 1);
            let mut centers: Vec<usize> = Vec::new();
            for i in 0..n {
                if centers
                    .iter()
                    .all(|&c| family.distance(level + 1, i, c) >= separation)
                {
                    centers.push(i);
                }
            }
            if centers.len() < 2 {
                continue;
            }
            let radius = 2f64.powi((level + config.kappa) as i32) / config.r.powi(j as i32 + 2);
            let balls: Vec<Vec<usize>> = centers
                .iter()
                .map(|&c| {
                    (0..n)
                        .filter(|&i| family.distance(level + config.kappa, i, c) <= radius)
                        .collect()
                })
                .collect();
            let mut union: Vec<usize> = balls.iter().flatten().copied().collect();
            union.sort_unstable();
            union.dedup();
            let gather = |idx: &[usize]| -> Vec<Vec<f64>> {
                idx.iter().map(|&i| family.points[i].clone()).collect()
            };
            let esup_union = esup_mc_points(
                &family.measure,
                &gather(&union),
                config.n_samples,
                stream.substream(counter),
            )?;
            counter += 1;
            let mut ball_estimates = Vec::with_capacity(balls.len());
            for ball in &balls {
                ball_estimates.push(esup_mc_points(
                    &family.measure,
                    &gather(ball),
                    config.n_samples,
                    stream.substream(counter),
                )?);
                counter += 1;
            }
            let esup_ball_min = ball_estimates
                .into_iter()
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .expect("at least two balls");
            let gap = esup_union.value - esup_ball_min.value;
            cases.push(GrowthCase {
                level,
                scale_index: j,
                separation,
                n_centers: centers.len(),
                esup_union,
                esup_ball_min,
                k_needed: if gap > 0.0 { separation / gap } else { f64::INFINITY },
            });
        }
    }
    let worst_k = cases.iter().map(|c| c.k_needed).fold(0.0, f64::max);
    Ok(GrowthProbeReport { worst_k, cases })
}

/// Empirical supremum against the chaining functional of the same set.
#[derive(Debug, Clone, Serialize)]
pub struct TwoSidedReport {
    pub esup: Estimate,
    pub gamma: f64,
    pub ratio: f64,
}

/// Ratio `E sup / gamma`. A degenerate family (all points equal) has both
/// sides identically zero by symmetry of the measure, reported as ratio 1.
pub fn two_sided_compare(
    family: &DistanceFamily,
    n_samples: u64,
    stream: RngStream,
) -> Result<TwoSidedReport> {
    let (gamma, _) = gamma_functional(family);
    let esup = esup_mc_points(&family.measure, &family.points, n_samples, stream)?;
    let ratio = if gamma == 0.0 {
        1.0
    } else {
        esup.value / gamma
    };
    Ok(TwoSidedReport { esup, gamma, ratio })
}

/// Deviation grid of the concentration probe.
pub const CONCENTRATION_K_GRID: [f64; 5] = [1.0, 1.25, 1.5, 2.0, 3.0];

/// For each multiplier `K`, the smallest `L` with
/// `| (sup - K E sup)_+ |_order <= L * diameter`, measured empirically.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub order: f64,
    pub esup: Estimate,
    pub diameter: f64,
    pub rows: Vec<(f64, f64)>,
}

pub fn concentration_probe(
    measure: &ProductMeasure,
    points: &[Vec<f64>],
    order: f64,
    ks: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<ConcentrationReport> {
    if !(order.is_finite() && order >= 1.0) {
        return Err(Error::Config("concentration probe needs order >= 1".into()));
    }
    if ks.is_empty() {
        return Err(Error::Config("concentration probe needs multipliers".into()));
    }
    let mut diameter = 0.0f64;
    for (i, s) in points.iter().enumerate() {
        for t in &points[i + 1..] {
            diameter = diameter.max(moment_distance(measure, s, t, order)?);
        }
    }
    if diameter <= 0.0 {
        return Err(Error::Config(
            "concentration probe needs two distinct points".into(),
        ));
    }
    let esup = esup_mc_points(measure, points, n_samples, stream.substream(0))?;
    let sampler = MeasureSampler::new(measure);
    let dim = measure.dim();
    let chunks = chunked_mc(n_samples, stream.substream(1), |_, len, rng| {
        let mut accs = vec![MeanAcc::default(); ks.len()];
        let mut x = vec![0.0; dim];
        for _ in 0..len {
            sampler.sample_into(rng, &mut x);
            let sup = points
                .iter()
                .map(|t| t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            for (acc, &k) in accs.iter_mut().zip(ks) {
                let excess = (sup - k * esup.value).max(0.0);
                acc.push(excess.powf(order));
            }
        }
        accs
    });
    let mut totals = vec![MeanAcc::default(); ks.len()];
    for chunk in &chunks {
        for (total, acc) in totals.iter_mut().zip(chunk) {
            total.merge(acc);
        }
    }
    let rows = ks
        .iter()
        .zip(&totals)
        .map(|(&k, total)| (k, total.mean().powf(1.0 / order) / diameter))
        .collect();
    Ok(ConcentrationReport {
        order,
        esup,
        diameter,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{BlockInput, Potential, ProductMeasure};
    use crate::moments::gaussian_form_moment;
    use rand::Rng;

    fn bi(n: usize, p: f64, gamma: f64, lambda: f64) -> BlockInput {
        BlockInput {
            n,
            p,
            potential: Potential { lambda, gamma },
        }
    }

    fn mixed_measure() -> ProductMeasure {
        ProductMeasure::from_blocks(
            vec![
                bi(1, 2.0, 1.0, 0.5),
                bi(2, 1.5, 1.0, 1.0),
                bi(4, 3.0, 1.0, 1.0),
                bi(1, 1.1, 1.0, 1.0),
            ],
            0.1,
        )
        .unwrap()
    }

    fn random_points(measure: &ProductMeasure, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..count)
            .map(|_| {
                (0..measure.dim())
                    .map(|_| 2.0 * rng.random::<f64>() - 1.0)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gaussian_two_point_distances_match_the_closed_form() {
        let measure = ProductMeasure::from_blocks(vec![bi(3, 2.0, 1.0, 0.5)], 0.1).unwrap();
        let points = vec![vec![0.0; 3], vec![0.3, -1.2, 0.4]];
        let family =
            build_distance_family(&measure, &points, 4, DistanceSource::Surrogate).unwrap();
        let norm = points[1].iter().map(|x| x * x).sum::<f64>().sqrt();
        for level in 0..family.levels() {
            let want = norm * gaussian_form_moment(DistanceFamily::order_at(level), 1.0);
            let got = family.distance(level, 0, 1);
            assert!(
                (got - want).abs() < 1e-10 * want,
                "level {level}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn family_validates_and_its_levels_are_monotone() {
        let measure = mixed_measure();
        let points = random_points(&measure, 9, 17);
        let family =
            build_distance_family(&measure, &points, 3, DistanceSource::Surrogate).unwrap();
        for level in 1..family.levels() {
            for i in 0..9 {
                for j in (i + 1)..9 {
                    let prev = family.distance(level - 1, i, j);
                    let cur = family.distance(level, i, j);
                    assert!(cur >= prev * (1.0 - 1e-12));
                    assert!(cur <= 2.0 * prev * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn moment_distance_is_a_metric_on_sampled_triples() {
        let measure = mixed_measure();
        let points = random_points(&measure, 6, 3);
        for order in [1.0, 2.0, 5.0] {
            for a in 0..6 {
                for b in 0..6 {
                    let ab = moment_distance(&measure, &points[a], &points[b], order).unwrap();
                    let ba = moment_distance(&measure, &points[b], &points[a], order).unwrap();
                    assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
                    if a == b {
                        assert_eq!(ab, 0.0);
                    }
                    for c in 0..6 {
                        let ac = moment_distance(&measure, &points[a], &points[c], order).unwrap();
                        let cb = moment_distance(&measure, &points[c], &points[b], order).unwrap();
                        assert!(ab <= (ac + cb) * (1.0 + 1e-9) + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn mc_families_track_the_surrogate_and_reject_heavy_tails() {
        let measure = mixed_measure();
        let points = random_points(&measure, 3, 5);
        let sur = build_distance_family(&measure, &points, 2, DistanceSource::Surrogate).unwrap();
        let mc = build_distance_family(
            &measure,
            &points,
            2,
            DistanceSource::Mc {
                n_samples: 40_000,
                stream: RngStream::new(8, 0),
            },
        )
        .unwrap();
        for level in 0..sur.levels() {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let ratio = mc.distance(level, i, j) / sur.distance(level, i, j);
                    assert!(
                        ratio > 0.25 && ratio < 4.0,
                        "mc/surrogate ratio {ratio} at level {level}"
                    );
                }
            }
        }
        let err = build_distance_family(
            &measure,
            &points,
            5,
            DistanceSource::Mc {
                n_samples: 40_000,
                stream: RngStream::new(8, 1),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn singleton_families_have_zero_gamma_and_unit_ratio() {
        let measure = mixed_measure();
        let points = vec![vec![0.25; measure.dim()]];
        let family =
            build_distance_family(&measure, &points, 2, DistanceSource::Surrogate).unwrap();
        let (gamma, tree) = gamma_functional(&family);
        assert_eq!(gamma, 0.0);
        assert_eq!(tree.levels[0], vec![vec![0]]);
        let report = two_sided_compare(&family, 2_000, RngStream::new(2, 2)).unwrap();
        assert_eq!(report.ratio, 1.0);
        assert_eq!(exhaustive_gamma(&family).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_gamma_of_two_points_is_the_diameter() {
        let measure = mixed_measure();
        let points = random_points(&measure, 2, 11);
        let family =
            build_distance_family(&measure, &points, 3, DistanceSource::Surrogate).unwrap();
        let want = family.distance(0, 0, 1);
        assert_eq!(exhaustive_gamma(&family).unwrap(), want);
        let (greedy, _) = gamma_functional(&family);
        assert!((greedy - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn greedy_gamma_stays_within_twice_the_exhaustive_value() {
        let measure = mixed_measure();
        for seed in 0..8 {
            let count = 4 + (seed as usize % 3);
            let points = random_points(&measure, count, 100 + seed);
            let family =
                build_distance_family(&measure, &points, 3, DistanceSource::Surrogate).unwrap();
            let exact = exhaustive_gamma(&family).unwrap();
            let (greedy, tree) = gamma_functional(&family);
            assert!(
                greedy >= exact * (1.0 - 1e-12),
                "greedy {greedy} below exact {exact}"
            );
            assert!(
                greedy <= 2.0 * exact * (1.0 + 1e-12),
                "greedy {greedy} vs exact {exact} (seed {seed})"
            );
            // Trees refine: every cell sits inside one parent cell.
            for level in 1..tree.levels.len() {
                for cell in &tree.levels[level] {
                    let inside = tree.levels[level - 1]
                        .iter()
                        .any(|parent| cell.iter().all(|t| parent.contains(t)));
                    assert!(inside, "level {level} cell escapes its parent");
                }
            }
        }
    }

    #[test]
    fn regularity_separates_balanced_and_saturated_families() {
        // Saturation needs orders past the largest block exponent, so the
        // probe families run deep (orders up to 2^9).
        let measure = mixed_measure();
        let points = random_points(&measure, 7, 23);
        let family =
            build_distance_family(&measure, &points, 9, DistanceSource::Surrogate).unwrap();
        let report = check_regularity(&family);
        assert!(report.doubling_ok);
        assert!(
            report.epsilon > 0.08,
            "mixed family should keep growing, epsilon {}",
            report.epsilon
        );

        let flat = ProductMeasure::from_blocks(vec![bi(8, 32.0, 1.0, 1.0)], 0.1).unwrap();
        let points = random_points(&flat, 7, 24);
        let family = build_distance_family(&flat, &points, 9, DistanceSource::Surrogate).unwrap();
        let report = check_regularity(&family);
        assert!(report.doubling_ok);
        assert!(
            report.epsilon < 0.05,
            "saturated family should stall, epsilon {}",
            report.epsilon
        );
        assert!(report.epsilon > 0.0);
    }

    #[test]
    fn growth_probe_is_deterministic_and_reduces_to_separated_lower_bounds() {
        let measure = ProductMeasure::from_blocks(vec![bi(1, 2.0, 1.0, 0.5); 6], 0.1).unwrap();
        let mut points = vec![vec![0.0; 6]];
        for i in 0..6 {
            let mut t = vec![0.0; 6];
            t[i] = 1.0;
            points.push(t);
        }
        let family =
            build_distance_family(&measure, &points, 3, DistanceSource::Surrogate).unwrap();
        let config = GrowthProbeConfig {
            r: 4.0,
            kappa: 2,
            trials: 2,
            n_samples: 10_000,
        };
        let a = growth_condition_probe(&family, config, RngStream::new(33, 0)).unwrap();
        let b = growth_condition_probe(&family, config, RngStream::new(33, 0)).unwrap();
        assert!(!a.cases.is_empty());
        assert!(a.worst_k.is_finite() && a.worst_k > 0.0);
        assert_eq!(a.worst_k.to_bits(), b.worst_k.to_bits());
        for (ca, cb) in a.cases.iter().zip(&b.cases) {
            assert_eq!(ca.k_needed.to_bits(), cb.k_needed.to_bits());
        }

        let shallow = GrowthProbeConfig {
            kappa: 9,
            ..config
        };
        assert!(growth_condition_probe(&family, shallow, RngStream::new(33, 1)).is_err());
    }

    #[test]
    fn concentration_tail_shrinks_along_the_multiplier_grid() {
        let measure = mixed_measure();
        let points = random_points(&measure, 5, 41);
        let report = concentration_probe(
            &measure,
            &points,
            2.0,
            &CONCENTRATION_K_GRID,
            60_000,
            RngStream::new(51, 0),
        )
        .unwrap();
        assert_eq!(report.rows.len(), CONCENTRATION_K_GRID.len());
        for pair in report.rows.windows(2) {
            assert!(pair[1].1 <= pair[0].1 + 1e-12);
        }
        assert!(report.rows[0].1 > 0.0);
        assert!(report.rows.last().unwrap().1 < report.rows[0].1);

        let same = vec![vec![0.5; measure.dim()]; 2];
        assert!(concentration_probe(
            &measure,
            &same,
            2.0,
            &CONCENTRATION_K_GRID,
            1_000,
            RngStream::new(51, 1)
        )
        .is_err());
    }

    #[test]
    fn two_sided_ratio_is_stable_for_orthonormal_gaussians() {
        let measure = ProductMeasure::from_blocks(vec![bi(1, 2.0, 1.0, 0.5); 8], 0.1).unwrap();
        let mut points = vec![vec![0.0; 8]];
        for i in 0..8 {
            let mut t = vec![0.0; 8];
            t[i] = 1.0;
            points.push(t);
        }
        let family =
            build_distance_family(&measure, &points, 3, DistanceSource::Surrogate).unwrap();
        let report = two_sided_compare(&family, 60_000, RngStream::new(61, 0)).unwrap();
        assert!(
            report.ratio > 0.05 && report.ratio < 20.0,
            "ratio {} out of band",
            report.ratio
        );
        assert!(report.gamma > 0.0);
    }
}
