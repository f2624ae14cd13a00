//! Cube-like separated point sets and the empirical lower-bound experiment:
//! generate sets whose pairwise moment distances sit at a prescribed level,
//! estimate `E sup_t <X, t>` by Monte Carlo, and report the ratio between the
//! two. Also implements the small/large coefficient split of a point, the
//! packing/cluster dichotomy on small parts, the truncated-process moment
//! surrogate, and the large-coefficient norm budget diagnostics.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::xt_moment_alloc_weighted;
use crate::estimate::{chunked_mc, Estimate, MeanAcc};
use crate::measure::ProductMeasure;
use crate::moments::{lp_norm_indexed, mc_form_moments};
use crate::rng::RngStream;
use crate::sampling::MeasureSampler;
use crate::{Error, Result};

/// Interrelated constants of the cube-set construction and the coefficient
/// split. `delta` and `big_c` bound the per-point weight mass, `delta_prime`
/// caps support sizes, `rho` floors the weights, `big_d` drives the split
/// threshold and the dichotomy distance, and `separation` records the
/// certified minimum pairwise moment distance of a built set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeConstants {
    pub delta: f64,
    pub delta_prime: f64,
    pub delta_double_prime: f64,
    pub rho: f64,
    pub big_c: f64,
    pub big_d: f64,
    pub separation: f64,
}

impl Default for CubeConstants {
    fn default() -> Self {
        CubeConstants {
            delta: 0.45,
            delta_prime: 0.25,
            delta_double_prime: 1.0,
            rho: 0.5 / std::f64::consts::E,
            big_c: 2.0,
            big_d: 2.0,
            separation: 0.0,
        }
    }
}

impl CubeConstants {
    /// Defaults with the separation level chosen so that
    /// `separation^{p_k} >= big_d^{q_k}` holds for every block; the binding
    /// block is the one with the smallest norm exponent.
    pub fn for_measure(measure: &ProductMeasure) -> Self {
        let mut constants = CubeConstants::default();
        let worst = measure
            .blocks()
            .iter()
            .map(|b| b.q / b.p)
            .fold(0.0f64, f64::max);
        constants.separation = constants.big_d.powf(worst);
        constants
    }

    /// Maximum support size of a point. The fractional cap `delta_prime * p`
    /// never drops below one coordinate, otherwise no nonzero point exists.
    pub fn support_cap(&self, p: f64) -> usize {
        ((self.delta_prime * p).floor() as usize).max(1)
    }

    /// Upper bound on the summed weights over one point's support.
    pub fn weight_budget(&self, p: f64) -> f64 {
        2.0 * self.big_c * self.delta * p
    }
}

/// Largest moment level the desk-scale construction accepts; the set size
/// `ceil(e^p)` and the quadratic separation scans stay interactive below it.
pub const MAX_CUBE_ORDER: f64 = 8.0;

/// Finite point set with per-coordinate weights: every point takes the value
/// `k_i` or `0` at each coordinate, the origin is always a member, and every
/// support respects the size and weight budgets of [`CubeConstants`].
#[derive(Debug, Clone)]
pub struct CubeSet {
    measure: ProductMeasure,
    p: f64,
    weights: Vec<f64>,
    supports: Vec<Vec<usize>>,
    constants: CubeConstants,
    block_of: Vec<usize>,
}

impl CubeSet {
    /// Assemble a set from explicit parts. `supports[0]` must be empty (the
    /// origin); each support must be strictly increasing and within bounds.
    /// Budgets and the weight floor are enforced; the cardinality window of
    /// generated sets is not, so hand-built test sets of any size are fine.
    pub fn from_parts(
        measure: ProductMeasure,
        p: f64,
        weights: Vec<f64>,
        supports: Vec<Vec<usize>>,
        constants: CubeConstants,
    ) -> Result<Self> {
        let d = measure.dim();
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::Config(format!("cube moment level must be >= 1, got {p}")));
        }
        if weights.len() != d {
            return Err(Error::Config(format!(
                "{} weights for dimension {d}",
                weights.len()
            )));
        }
        if weights.iter().any(|k| !k.is_finite() || *k <= 0.0) {
            return Err(Error::Config("cube weights must be finite and > 0".into()));
        }
        if supports.first().map_or(true, |s| !s.is_empty()) {
            return Err(Error::Config(
                "the first point must be the origin (empty support)".into(),
            ));
        }
        let cap = constants.support_cap(p);
        let budget = constants.weight_budget(p);
        for support in &supports {
            if support.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("supports must be strictly increasing".into()));
            }
            if support.last().is_some_and(|&i| i >= d) {
                return Err(Error::Config("support index out of range".into()));
            }
            if support.len() > cap {
                return Err(Error::Config(format!(
                    "support size {} exceeds the cap {cap}",
                    support.len()
                )));
            }
            let mass: f64 = support.iter().map(|&i| weights[i]).sum();
            if mass > budget * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "support weight mass {mass} exceeds the budget {budget}"
                )));
            }
        }
        if weights.iter().any(|&k| k < constants.rho) {
            return Err(Error::Config(format!(
                "weights must stay above the floor {}",
                constants.rho
            )));
        }
        let mut block_of = vec![0usize; d];
        for (k, idx) in measure.index_sets().iter().enumerate() {
            for &i in idx {
                block_of[i] = k;
            }
        }
        Ok(CubeSet {
            measure,
            p,
            weights,
            supports,
            constants,
            block_of,
        })
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn constants(&self) -> &CubeConstants {
        &self.constants
    }

    pub fn n_points(&self) -> usize {
        self.supports.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn support(&self, idx: usize) -> &[usize] {
        &self.supports[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dense coordinate vector of one point.
    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        for &i in &self.supports[idx] {
            t[i] = self.weights[i];
        }
        t
    }

    /// Same set with all weights (hence all distances) multiplied by
    /// `factor`; used by homogeneity experiments.
    pub fn scaled(&self, factor: f64) -> CubeSet {
        assert!(factor.is_finite() && factor > 0.0);
        let mut cube = self.clone();
        for k in cube.weights.iter_mut() {
            *k *= factor;
        }
        cube.constants.separation *= factor;
        cube
    }

    /// Cardinality window of fully generated sets.
    pub fn validate_cardinality(&self) -> Result<()> {
        let want = self.p.exp().ceil() as usize;
        let got = self.n_points();
        if got < want || got > want + 1 {
            return Err(Error::Invariant(format!(
                "cube set has {got} points, expected {want} or {}",
                want + 1
            )));
        }
        Ok(())
    }

    /// Per-block conjugate norms and support counts of the difference of two
    /// points. Coordinates shared by both supports cancel exactly.
    fn diff_block_data(&self, a: usize, b: usize) -> (Vec<f64>, Vec<usize>) {
        let nb = self.measure.n_blocks();
        let mut norms = vec![0.0f64; nb];
        let mut counts = vec![0usize; nb];
        let mut push = |i: usize| {
            let blk = self.block_of[i];
            let q = self.measure.block(blk).q;
            counts[blk] += 1;
            if q.is_infinite() {
                norms[blk] = norms[blk].max(self.weights[i]);
            } else {
                norms[blk] += self.weights[i].powf(q);
            }
        };
        for &i in symmetric_difference(&self.supports[a], &self.supports[b]).iter() {
            push(i);
        }
        for (blk, norm) in norms.iter_mut().enumerate() {
            let q = self.measure.block(blk).q;
            if !q.is_infinite() && *norm > 0.0 {
                *norm = norm.powf(1.0 / q);
            }
        }
        (norms, counts)
    }

    /// Moment surrogate of the distance between two points at the set's
    /// level `p`.
    pub fn surrogate_distance(&self, a: usize, b: usize) -> Result<f64> {
        let (norms, counts) = self.diff_block_data(a, b);
        Ok(xt_moment_alloc_weighted(&self.measure, &norms, &counts, self.p)?.value)
    }
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc.saturating_mul((n - j) as u128) / (j + 1) as u128;
    }
    acc
}

fn combinations(d: usize, size: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(start: usize, d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=(d - left) {
            cur.push(i);
            rec(i + 1, d, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(0, d, size, &mut Vec::new(), out);
}

fn draw_supports(d: usize, m: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if binomial(d, m) >= 4 * count as u128 {
        let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut support = Vec::with_capacity(m);
            while support.len() < m {
                let i = rng.random_range(0..d);
                if !support.contains(&i) {
                    support.push(i);
                }
            }
            support.sort_unstable();
            if seen.insert(support.clone()) {
                out.push(support);
            }
        }
        out
    } else {
        let mut all = Vec::new();
        for size in (1..=m).rev() {
            combinations(d, size, &mut all);
        }
        all.shuffle(rng);
        all.truncate(count);
        all
    }
}

/// Randomized construction of a separated cube set: `ceil(e^p)` points
/// (including the origin) on distinct supports of size
/// `constants.support_cap(p)`, with all weights rescaled so the minimum
/// pairwise moment distance equals `target_a`. Retries with fresh draws when
/// the rescale lands outside the weight budgets.
pub fn generate_cube_set(
    measure: &ProductMeasure,
    p: f64,
    target_a: f64,
    constants: CubeConstants,
    stream: RngStream,
) -> Result<CubeSet> {
    if !(p.is_finite() && (2.0..=MAX_CUBE_ORDER).contains(&p)) {
        return Err(Error::Config(format!(
            "cube level must lie in [2, {MAX_CUBE_ORDER}], got {p}"
        )));
    }
    if !(target_a.is_finite() && target_a > 0.0) {
        return Err(Error::Config("target separation must be positive".into()));
    }
    let d = measure.dim();
    let n_points = p.exp().ceil() as usize;
    let m = constants.support_cap(p);
    if 2.0 * m as f64 > p {
        return Err(Error::Config(format!(
            "support cap {m} is infeasible: pairwise differences need up to {} \
             support against a moment budget of {p}",
            2 * m
        )));
    }
    let reachable: u128 = (1..=m).map(|j| binomial(d, j)).sum();
    if reachable < (n_points - 1) as u128 {
        return Err(Error::Capacity(format!(
            "dimension {d} offers {reachable} supports of size <= {m}, \
             but the set needs {} distinct nonzero points",
            n_points - 1
        )));
    }
    let mut last_err = None;
    for attempt in 0..20u64 {
        let mut rng = stream.substream(attempt).rng();
        let mut supports = vec![Vec::new()];
        supports.extend(draw_supports(d, m, n_points - 1, &mut rng));
        let weights: Vec<f64> = (0..d)
            .map(|_| constants.rho * (1.0 + 0.2 * rng.random::<f64>()))
            .collect();
        let mut built = constants;
        built.separation = target_a;

        let seed =
            CubeSet::from_parts(measure.clone(), p, weights, supports.clone(), built)?;
        let initial = check_separation(&seed, SeparationMethod::Surrogate)?;
        if !(initial.a_min.is_finite() && initial.a_min > 0.0) {
            last_err = Some(Error::Invariant(
                "degenerate initial separation in cube construction".into(),
            ));
            continue;
        }
        let factor = target_a / initial.a_min;
        let scaled: Vec<f64> = seed.weights.iter().map(|k| k * factor).collect();
        match CubeSet::from_parts(measure.clone(), p, scaled, supports, built) {
            Ok(cube) => {
                debug_assert!({
                    let sep = check_separation(&cube, SeparationMethod::Surrogate)?;
                    (sep.a_min - target_a).abs() <= 1e-6 * target_a
                });
                return Ok(cube);
            }
            Err(err) => last_err = Some(err),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::Invariant("cube construction failed and recorded no cause".into())
    }))
}

/// How [`check_separation`] measures pairwise distances.
#[derive(Debug, Clone, Copy)]
pub enum SeparationMethod {
    /// Deterministic moment surrogate at the set's level.
    Surrogate,
    /// Monte Carlo moment of each difference, one substream per pair.
    Mc { n_samples: u64, stream: RngStream },
}

/// Minimum pairwise distance and the pair realizing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Separation {
    pub a_min: f64,
    pub witness: (usize, usize),
}

/// Full pairwise scan for the minimum distance of a cube set.
pub fn check_separation(cube: &CubeSet, method: SeparationMethod) -> Result<Separation> {
    let n = cube.n_points();
    if n < 2 {
        return Err(Error::Config("separation needs at least two points".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let distances: Vec<Result<f64>> = match method {
        SeparationMethod::Surrogate => pairs
            .par_iter()
            .map(|&(a, b)| cube.surrogate_distance(a, b))
            .collect(),
        SeparationMethod::Mc { n_samples, stream } => pairs
            .par_iter()
            .enumerate()
            .map(|(idx, &(a, b))| {
                let ta = cube.point_vec(a);
                let tb = cube.point_vec(b);
                let diff: Vec<f64> = ta.iter().zip(&tb).map(|(x, y)| x - y).collect();
                let est = mc_form_moments(
                    &cube.measure,
                    &diff,
                    &[cube.p],
                    n_samples,
                    stream.substream(idx as u64),
                )?;
                Ok(est[0].value)
            })
            .collect(),
    };
    let mut a_min = f64::INFINITY;
    let mut witness = (0, 0);
    for (&pair, dist) in pairs.iter().zip(distances) {
        let dist = dist?;
        if dist < a_min {
            a_min = dist;
            witness = pair;
        }
    }
    Ok(Separation { a_min, witness })
}

/// Monte Carlo estimate of `E max_t <X, t>` over the set (the origin pins the
/// maximum at zero or above). One draw is evaluated against every point
/// through sparse dot products.
pub fn esup_mc(cube: &CubeSet, n_samples: u64, stream: RngStream) -> Estimate {
    let sampler = MeasureSampler::new(cube.measure());
    let dim = cube.dim();
    let chunks = chunked_mc(n_samples, stream, |_, len, rng| {
        let mut acc = MeanAcc::default();
        let mut x = vec![0.0; dim];
        for _ in 0..len {
            sampler.sample_into(rng, &mut x);
            let mut best = f64::NEG_INFINITY;
            for support in &cube.supports {
                let dot: f64 = support.iter().map(|&i| cube.weights[i] * x[i]).sum();
                if dot > best {
                    best = dot;
                }
            }
            acc.push(best);
        }
        acc
    });
    let mut total = MeanAcc::default();
    for chunk in &chunks {
        total.merge(chunk);
    }
    total.estimate(stream.label())
}

/// [`esup_mc`] over explicit dense points (no origin is implied).
pub fn esup_mc_points(
    measure: &ProductMeasure,
    points: &[Vec<f64>],
    n_samples: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if points.is_empty() {
        return Err(Error::Config("esup needs at least one point".into()));
    }
    if points.iter().any(|t| t.len() != measure.dim()) {
        return Err(Error::Config("point length does not match dimension".into()));
    }
    let sampler = MeasureSampler::new(measure);
    let dim = measure.dim();
    let chunks = chunked_mc(n_samples, stream, |_, len, rng| {
        let mut acc = MeanAcc::default();
        let mut x = vec![0.0; dim];
        for _ in 0..len {
            sampler.sample_into(rng, &mut x);
            let best = points
                .iter()
                .map(|t| t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            acc.push(best);
        }
        acc
    });
    let mut total = MeanAcc::default();
    for chunk in &chunks {
        total.merge(chunk);
    }
    Ok(total.estimate(stream.label()))
}

/// Outcome of the empirical lower-bound experiment on one cube set.
#[derive(Debug, Clone, Serialize)]
pub struct MinorationReport {
    pub p: f64,
    pub dim: usize,
    pub n_points: usize,
    pub a_min: f64,
    pub witness: (usize, usize),
    pub esup: Estimate,
    pub k_hat: f64,
    pub k_hat_ci: (f64, f64),
    pub constants: CubeConstants,
}

/// Certified separation over estimated supremum: the empirical constant of
/// the lower bound `E sup >= A / K`.
pub fn minoration_ratio(cube: &CubeSet, n_samples: u64, stream: RngStream) -> Result<MinorationReport> {
    let separation = check_separation(cube, SeparationMethod::Surrogate)?;
    let esup = esup_mc(cube, n_samples, stream);
    let ratio = |denom: f64| {
        if denom > 0.0 {
            separation.a_min / denom
        } else {
            f64::INFINITY
        }
    };
    let (lo, hi) = esup.ci(3.0);
    Ok(MinorationReport {
        p: cube.p,
        dim: cube.dim(),
        n_points: cube.n_points(),
        a_min: separation.a_min,
        witness: separation.witness,
        esup,
        k_hat: ratio(esup.value),
        k_hat_ci: (ratio(hi), ratio(lo)),
        constants: cube.constants,
    })
}

/// Coordinatewise decomposition of a point into small and large block parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPoint {
    pub small: Vec<f64>,
    pub large: Vec<f64>,
}

/// Whether a block's coefficients are large at separation level `a`:
/// `big_d^q * |t_k|_q^q > a^p * n_k`, compared in logs; exact threshold
/// equality counts as small.
fn block_is_large(p: f64, q: f64, n: usize, t_norm_q: f64, a: f64, big_d: f64) -> bool {
    if t_norm_q <= 0.0 {
        return false;
    }
    if q.is_infinite() {
        return big_d * t_norm_q > 1.0;
    }
    q * (big_d.ln() + t_norm_q.ln()) > p * a.ln() + (n as f64).ln()
}

/// Threshold split of a point per block. A block goes entirely to the large
/// part when its conjugate-norm mass exceeds `a^{p_k} n_k / big_d^{q_k}`,
/// otherwise entirely to the small part; equality goes small.
pub fn split_small_large(
    measure: &ProductMeasure,
    t: &[f64],
    a: f64,
    big_d: f64,
) -> Result<SplitPoint> {
    if t.len() != measure.dim() {
        return Err(Error::Config("point length does not match dimension".into()));
    }
    if !(a.is_finite() && a > 0.0 && big_d.is_finite() && big_d > 0.0) {
        return Err(Error::Config("split thresholds must be positive".into()));
    }
    let mut small = vec![0.0; t.len()];
    let mut large = vec![0.0; t.len()];
    for (k, block) in measure.blocks().iter().enumerate() {
        let idx = measure.index_set(k);
        let norm = lp_norm_indexed(t, idx, block.q);
        let target: &mut Vec<f64> = if block_is_large(block.p, block.q, block.n, norm, a, big_d) {
            &mut large
        } else {
            &mut small
        };
        for &i in idx {
            target[i] = t[i];
        }
    }
    Ok(SplitPoint { small, large })
}

/// Result of the packing/cluster dichotomy: either a large subset that stays
/// pairwise separated in the small-part distance, or a large cluster ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Dichotomy {
    Separated { members: Vec<usize> },
    Cluster { center: usize, members: Vec<usize> },
}

impl Dichotomy {
    pub fn len(&self) -> usize {
        match self {
            Dichotomy::Separated { members } => members.len(),
            Dichotomy::Cluster { members, .. } => members.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn small_support(cube: &CubeSet, idx: usize, a: f64, big_d: f64) -> Vec<usize> {
    let mut per_block: Vec<Vec<usize>> = vec![Vec::new(); cube.measure.n_blocks()];
    for &i in cube.support(idx) {
        per_block[cube.block_of[i]].push(i);
    }
    let mut out = Vec::new();
    for (coords, block) in per_block.iter().zip(cube.measure.blocks()) {
        if coords.is_empty() {
            continue;
        }
        let norm = if block.q.is_infinite() {
            coords.iter().map(|&i| cube.weights[i]).fold(0.0, f64::max)
        } else {
            coords
                .iter()
                .map(|&i| cube.weights[i].powf(block.q))
                .sum::<f64>()
                .powf(1.0 / block.q)
        };
        if !block_is_large(block.p, block.q, block.n, norm, a, big_d) {
            out.extend_from_slice(coords);
        }
    }
    out.sort_unstable();
    out
}

/// Small-part distance used by the dichotomy:
/// `sum_k big_d^{q_k} sum_{i in small-support difference} k_i^{q_k}`.
pub fn small_part_distance(cube: &CubeSet, a: usize, b: usize, big_d: f64, a_sep: f64) -> f64 {
    let sa = small_support(cube, a, a_sep, big_d);
    let sb = small_support(cube, b, a_sep, big_d);
    let mut total = 0.0f64;
    for i in symmetric_difference(&sa, &sb) {
        let q = cube.measure.block(cube.block_of[i]).q;
        total += (big_d * cube.weights[i]).powf(q);
    }
    total
}

/// Greedy maximal packing of the set in the small-part distance at threshold
/// `p`. A packing of at least `ceil(sqrt(|T|))` points is returned as
/// `Separated`; otherwise the largest ball around a packing center is
/// returned as `Cluster`, and the pigeonhole guarantees it reaches the same
/// size.
pub fn dichotomy(cube: &CubeSet, p: f64, big_d: f64, a_sep: f64) -> Dichotomy {
    let n = cube.n_points();
    let threshold = (n as f64).sqrt().ceil() as usize;
    let mut packing: Vec<usize> = Vec::new();
    for i in 0..n {
        if packing
            .iter()
            .all(|&c| small_part_distance(cube, i, c, big_d, a_sep) >= p)
        {
            packing.push(i);
        }
    }
    if packing.len() >= threshold {
        return Dichotomy::Separated { members: packing };
    }
    let mut balls: Vec<Vec<usize>> = vec![Vec::new(); packing.len()];
    for i in 0..n {
        for (c, &center) in packing.iter().enumerate() {
            if small_part_distance(cube, i, center, big_d, a_sep) < p {
                balls[c].push(i);
                break;
            }
        }
    }
    let best = (0..packing.len())
        .max_by_key(|&c| (balls[c].len(), std::cmp::Reverse(c)))
        .expect("packing is never empty");
    Dichotomy::Cluster {
        center: packing[best],
        members: std::mem::take(&mut balls[best]),
    }
}

/// Moment surrogate of the truncated process difference: maximizes
/// `sum_i min(k_i r_i^{1/p_i}, (big_d k_i)^{q_i})` over `sum_i r_i = order`,
/// where `i` ranges over the support difference of two points.
pub fn truncated_moment_surrogate(
    cube: &CubeSet,
    a: usize,
    b: usize,
    order: f64,
    big_d: f64,
) -> Result<f64> {
    if !(order.is_finite() && order > 0.0) {
        return Err(Error::Config("truncated surrogate needs a positive order".into()));
    }
    let coords = symmetric_difference(cube.support(a), cube.support(b));
    if coords.is_empty() {
        return Ok(0.0);
    }
    struct Coord {
        k: f64,
        p: f64,
        cap: f64,
        r_cap: f64,
    }
    let items: Vec<Coord> = coords
        .iter()
        .map(|&i| {
            let block = cube.measure.block(cube.block_of[i]);
            let k = cube.weights[i];
            let cap = (big_d * k).powf(block.q);
            let r_cap = if cap.is_finite() { (cap / k).powf(block.p) } else { f64::INFINITY };
            Coord { k, p: block.p, cap, r_cap }
        })
        .collect();

    let saturation: f64 = items.iter().map(|c| c.r_cap).sum();
    if saturation <= order {
        return Ok(items.iter().map(|c| c.cap).sum());
    }

    // Slope-balance solve: each coordinate responds to the multiplier with
    // r(mu) = min(r_cap, (k / (p mu))^{p/(p-1)}), monotone in mu.
    let response = |c: &Coord, mu: f64| -> f64 {
        if c.p == 1.0 {
            return if c.k >= mu { c.r_cap } else { 0.0 };
        }
        let unconstrained = (c.k / (c.p * mu)).powf(c.p / (c.p - 1.0));
        unconstrained.min(c.r_cap)
    };
    let total = |ln_mu: f64| -> f64 { items.iter().map(|c| response(c, ln_mu.exp())).sum() };
    let mut lo = 0.0f64;
    let mut step = 1.0;
    while total(lo) < order {
        lo -= step;
        step *= 2.0;
        if lo < -700.0 {
            break;
        }
    }
    let mut hi = 0.0f64;
    step = 1.0;
    while total(hi) > order {
        hi += step;
        step *= 2.0;
        if hi > 700.0 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > order {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = (0.5 * (lo + hi)).exp();
    let mut rs: Vec<f64> = items.iter().map(|c| response(c, mu)).collect();
    let residual = order - rs.iter().sum::<f64>();
    if residual.abs() > 0.0 {
        // Spread the rounding residue over unsaturated coordinates.
        let open: Vec<usize> = (0..rs.len()).filter(|&i| rs[i] < items[i].r_cap).collect();
        if !open.is_empty() {
            let share = residual / open.len() as f64;
            for i in open {
                rs[i] = (rs[i] + share).clamp(0.0, items[i].r_cap);
            }
        }
    }
    Ok(rs
        .iter()
        .zip(&items)
        .map(|(&r, c)| (c.k * r.powf(1.0 / c.p)).min(c.cap))
        .sum())
}

/// Large-part norm budget diagnostics: the weighted conjugate-norm sum
/// `sum_k n_k^{1/p_k} |large_k|_{q_k}` and the covered dimension count
/// `sum_k n_k 1{large_k != 0}`, each compared against a multiple of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargeNormBudget {
    pub norm_sum: f64,
    pub weighted_count: f64,
    pub pass: bool,
}

pub fn large_norm_budget(
    measure: &ProductMeasure,
    split: &SplitPoint,
    p: f64,
    norm_multiple: f64,
    count_multiple: f64,
) -> Result<LargeNormBudget> {
    if split.large.len() != measure.dim() {
        return Err(Error::Config("split length does not match dimension".into()));
    }
    let mut norm_sum = 0.0;
    let mut weighted_count = 0.0;
    for (k, block) in measure.blocks().iter().enumerate() {
        let idx = measure.index_set(k);
        let norm = lp_norm_indexed(&split.large, idx, block.q);
        if norm > 0.0 {
            norm_sum += (block.n as f64).powf(1.0 / block.p) * norm;
            weighted_count += block.n as f64;
        }
    }
    Ok(LargeNormBudget {
        norm_sum,
        weighted_count,
        pass: norm_sum <= norm_multiple * p && weighted_count <= count_multiple * p,
    })
}
