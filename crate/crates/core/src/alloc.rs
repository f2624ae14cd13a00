//! Budgeted moment-order allocation: the computable surrogate for the
//! p-norm of a linear form of the product measure.
//!
//! For a moment budget `p` the surrogate maximizes
//! `sum_k w_k f_k(r_k)` over allocations `sum_k r_k = p`, where
//! `w_k = |t_k|_{q_k}` and `f_k` is the block's exact coordinate moment
//! curve (increasing, concave, and order-doubling changes it by at most a
//! factor of two). Strict mode adds support constraints: a participating
//! block needs `r_k` at least the number of nonzero coefficients it carries,
//! and blocks may be dropped entirely. Relaxed mode removes the floors and
//! lets zero-order blocks contribute their geometric-mean limit, which makes
//! the value subadditive in the weights — the property the chaining distance
//! needs for an exact triangle inequality.

use crate::measure::{BlockSpec, ProductMeasure};
use crate::moments::{block_supports, conjugate_block_norms};
use crate::{Error, Result};

/// Concave increasing curve on `r >= 0`, exposed through value, slope and
/// log-slope so the water-filling solver can run Newton steps on it.
pub trait MomentCurve: Sync {
    /// `f(r) >= 0`; finite at `r = 0`.
    fn value(&self, r: f64) -> f64;
    /// `ln f'(r)`; may be `+inf` at `r = 0` and must be strictly decreasing.
    fn ln_slope(&self, r: f64) -> f64;
    /// `d/dr ln f'(r)` (negative).
    fn ln_slope_deriv(&self, r: f64) -> f64;

    /// Solve `ln f'(r) = target` on `[lo, hi]`; `hint` warm-starts the
    /// safeguarded Newton iteration.
    fn invert_slope(&self, target: f64, lo: f64, hi: f64, hint: f64) -> f64 {
        let mut a = lo;
        let mut b = hi;
        let mut r = if hint > a && hint < b { hint } else { 0.5 * (a + b) };
        for _ in 0..64 {
            let g = self.ln_slope(r) - target;
            if g > 0.0 {
                a = r;
            } else {
                b = r;
            }
            let d = self.ln_slope_deriv(r);
            let mut next = if d < 0.0 { r - g / d } else { 0.5 * (a + b) };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - r).abs() <= 1e-14 * r.abs().max(1.0) {
                return next;
            }
            r = next;
        }
        r
    }
}

/// Exact coordinate moment curve of one block: `f(r) = |X_1|_r` for the
/// scaled block vector.
#[derive(Debug, Clone, Copy)]
pub struct BlockCurve {
    block: BlockSpec,
}

impl BlockCurve {
    pub fn new(block: BlockSpec) -> Self {
        BlockCurve { block }
    }
}

impl MomentCurve for BlockCurve {
    fn value(&self, r: f64) -> f64 {
        self.block.coord_norm(r)
    }

    fn ln_slope(&self, r: f64) -> f64 {
        // f' = f * (ln f)'
        self.block.ln_coord_norm(r) + self.block.ln_coord_norm_deriv(r).ln()
    }

    fn ln_slope_deriv(&self, r: f64) -> f64 {
        let d1 = self.block.ln_coord_norm_deriv(r);
        let d2 = self.block.ln_coord_norm_deriv2(r);
        d1 + d2 / d1
    }
}

/// Power curve `f(r) = r^(1/p)`: the moment growth of the iid comparison
/// process, which carries no radial coupling.
#[derive(Debug, Clone, Copy)]
pub struct PowerCurve {
    exponent: f64,
}

impl PowerCurve {
    /// Curve for a block with norm exponent `p >= 1`.
    pub fn new(p: f64) -> Self {
        PowerCurve { exponent: 1.0 / p }
    }
}

impl MomentCurve for PowerCurve {
    fn value(&self, r: f64) -> f64 {
        r.powf(self.exponent)
    }

    fn ln_slope(&self, r: f64) -> f64 {
        if self.exponent == 1.0 {
            return 0.0;
        }
        self.exponent.ln() + (self.exponent - 1.0) * r.ln()
    }

    fn ln_slope_deriv(&self, r: f64) -> f64 {
        (self.exponent - 1.0) / r
    }

    fn invert_slope(&self, target: f64, lo: f64, hi: f64, _hint: f64) -> f64 {
        let e = self.exponent;
        (((target - e.ln()) / (e - 1.0)).exp()).clamp(lo, hi)
    }
}

/// One participating block inside the water-filling solver.
struct Item<'a, C: MomentCurve> {
    curve: &'a C,
    w: f64,
    ln_w: f64,
    lo: f64,
}

impl<'a, C: MomentCurve> Item<'a, C> {
    fn new(curve: &'a C, w: f64, lo: f64) -> Self {
        Item {
            curve,
            w,
            ln_w: w.ln(),
            lo,
        }
    }

    /// Budget responding to the multiplier: `r` with `w f'(r) = mu`,
    /// clamped to `[lo, budget]`.
    fn response(&self, ln_mu: f64, budget: f64, hint: f64) -> f64 {
        let target = ln_mu - self.ln_w;
        if self.curve.ln_slope(budget) >= target {
            return budget;
        }
        if self.curve.ln_slope(self.lo) <= target {
            return self.lo;
        }
        self.curve.invert_slope(target, self.lo, budget, hint)
    }
}

/// Maximize `sum w_k f_k(r_k)` over `r_k in [lo_k, budget]`,
/// `sum r_k = budget`. Requires `sum lo_k <= budget`.
fn water_fill<C: MomentCurve>(items: &[Item<'_, C>], budget: f64) -> (f64, Vec<f64>) {
    let m = items.len();
    debug_assert!(m > 0);
    debug_assert!(items.iter().map(|it| it.lo).sum::<f64>() <= budget * (1.0 + 1e-12));
    if m == 1 {
        return (items[0].w * items[0].curve.value(budget), vec![budget]);
    }

    let mut rs: Vec<f64> = items.iter().map(|it| (budget / m as f64).max(it.lo)).collect();
    let fill = |ln_mu: f64, rs: &mut Vec<f64>| -> f64 {
        let mut total = 0.0;
        for (r, item) in rs.iter_mut().zip(items) {
            *r = item.response(ln_mu, budget, *r);
            total += *r;
        }
        total
    };

    // Bracket the multiplier: small mu gives everyone the full budget,
    // large mu pushes everyone to the floor.
    let mut ln_lo = items
        .iter()
        .zip(&rs)
        .map(|(it, &r)| it.ln_w + it.curve.ln_slope(r.max(1e-8)))
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let mut ln_hi = ln_lo + 2.0;
    let mut step = 2.0;
    for _ in 0..200 {
        if fill(ln_lo, &mut rs) >= budget {
            break;
        }
        ln_lo -= step;
        step *= 2.0;
    }
    step = 2.0;
    for _ in 0..200 {
        if fill(ln_hi, &mut rs) <= budget {
            break;
        }
        ln_hi += step;
        step *= 2.0;
    }

    // Bisection with Newton acceleration on the multiplier.
    let tol = 1e-13 * budget.max(1.0);
    let mut ln_mu = 0.5 * (ln_lo + ln_hi);
    for _ in 0..90 {
        let total = fill(ln_mu, &mut rs);
        let g = total - budget;
        if g.abs() <= tol || (ln_hi - ln_lo) < 1e-15 {
            break;
        }
        if g > 0.0 {
            ln_lo = ln_mu;
        } else {
            ln_hi = ln_mu;
        }
        let mut dg = 0.0;
        for (r, item) in rs.iter().zip(items) {
            if *r > item.lo + 1e-14 && *r < budget - 1e-14 {
                dg += 1.0 / item.curve.ln_slope_deriv(*r);
            }
        }
        let mut next = if dg < 0.0 { ln_mu - g / dg } else { f64::NAN };
        if !(next > ln_lo && next < ln_hi) {
            next = 0.5 * (ln_lo + ln_hi);
        }
        ln_mu = next;
    }

    // Restore the sum constraint exactly: spread the residual over interior
    // blocks; in degenerate (piecewise-linear) cases shift deterministically.
    let mut residual = budget - rs.iter().sum::<f64>();
    if residual != 0.0 {
        let interior: Vec<usize> = (0..m)
            .filter(|&i| rs[i] > items[i].lo + 1e-12 && rs[i] < budget - 1e-12)
            .collect();
        if !interior.is_empty() {
            let share = residual / interior.len() as f64;
            for &i in &interior {
                rs[i] = (rs[i] + share).clamp(items[i].lo, budget);
            }
            residual = budget - rs.iter().sum::<f64>();
        }
        if residual > 0.0 {
            for r in rs.iter_mut() {
                let add = residual.min(budget - *r);
                *r += add;
                residual -= add;
                if residual <= 0.0 {
                    break;
                }
            }
        } else if residual < 0.0 {
            for (r, item) in rs.iter_mut().zip(items).rev() {
                let cut = (-residual).min(*r - item.lo);
                *r -= cut;
                residual += cut;
                if residual >= 0.0 {
                    break;
                }
            }
        }
    }

    let value = rs
        .iter()
        .zip(items)
        .map(|(&r, item)| item.w * item.curve.value(r))
        .sum();
    (value, rs)
}

/// Result of an order allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAllocation {
    /// Surrogate value `sum_k w_k f_k(r_k)`.
    pub value: f64,
    /// Allocated order per block; `0` for dropped or zero-weight blocks.
    pub orders: Vec<f64>,
    /// Total active support divided by the order budget; the thin-support
    /// regime the strict formula is meant for keeps this below 1/4.
    pub support_load: f64,
}

impl MomentAllocation {
    fn zero(n_blocks: usize) -> Self {
        MomentAllocation {
            value: 0.0,
            orders: vec![0.0; n_blocks],
            support_load: 0.0,
        }
    }

    /// Whether the allocation sits in the thin-support regime
    /// (supports consume at most a quarter of the budget).
    pub fn thin_support(&self) -> bool {
        self.support_load <= 0.25
    }
}

const MAX_ENUMERATED_BLOCKS: usize = 12;

/// Strict allocation over the active blocks: enumerate which blocks
/// participate (small counts exactly, larger ones by greedy drops), then
/// water-fill each candidate set with the support floors.
fn strict_optimize<C: MomentCurve>(
    curves: &[C],
    weights: &[f64],
    floors: &[f64],
    budget: f64,
) -> (f64, Vec<f64>) {
    let m = curves.len();
    let mut best_value = 0.0;
    let mut best_orders = vec![0.0; m];
    let consider = |subset: &[usize], best_value: &mut f64, best_orders: &mut Vec<f64>| {
        let items: Vec<Item<'_, C>> = subset
            .iter()
            .map(|&i| Item::new(&curves[i], weights[i], floors[i]))
            .collect();
        let (value, rs) = water_fill(&items, budget);
        if value > *best_value {
            *best_value = value;
            best_orders.iter_mut().for_each(|r| *r = 0.0);
            for (&i, &r) in subset.iter().zip(&rs) {
                best_orders[i] = r;
            }
        }
        value
    };

    if m <= MAX_ENUMERATED_BLOCKS {
        for mask in 1u32..(1 << m) {
            let subset: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
            let floor_sum: f64 = subset.iter().map(|&i| floors[i]).sum();
            if floor_sum > budget {
                continue;
            }
            consider(&subset, &mut best_value, &mut best_orders);
        }
    } else {
        let mut current: Vec<usize> = (0..m).collect();
        let mut current_value = consider(&current, &mut best_value, &mut best_orders);
        loop {
            let mut best_drop: Option<(f64, usize)> = None;
            for drop in 0..current.len() {
                if current.len() == 1 {
                    break;
                }
                let candidate: Vec<usize> = current
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != drop)
                    .map(|(_, &i)| i)
                    .collect();
                let value = consider(&candidate, &mut best_value, &mut best_orders);
                if value > current_value * (1.0 + 1e-14)
                    && best_drop.map_or(true, |(v, _)| value > v)
                {
                    best_drop = Some((value, drop));
                }
            }
            match best_drop {
                Some((value, drop)) => {
                    current.remove(drop);
                    current_value = value;
                }
                None => break,
            }
        }
    }
    (best_value, best_orders)
}

fn check_order(order: f64, min: f64) -> Result<()> {
    if !(order.is_finite() && order >= min) {
        return Err(Error::Config(format!(
            "moment order must be finite and >= {min}, got {order}"
        )));
    }
    Ok(())
}

fn check_vector_len(measure: &ProductMeasure, len: usize) -> Result<()> {
    if len != measure.dim() {
        return Err(Error::Config(format!(
            "vector length {len} does not match measure dimension {}",
            measure.dim()
        )));
    }
    Ok(())
}

fn check_weights(measure: &ProductMeasure, weights: &[f64]) -> Result<()> {
    if weights.len() != measure.n_blocks() {
        return Err(Error::Config(format!(
            "{} weights for {} blocks",
            weights.len(),
            measure.n_blocks()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Config("block weights must be finite and >= 0".into()));
    }
    Ok(())
}

/// Moment surrogate for `|<X, t>|_p` with support floors: each active block
/// must receive at least as much order as it has nonzero coefficients, or be
/// dropped. Fails with `SupportBudget` when the total support exceeds the
/// order budget.
pub fn xt_moment_alloc(
    measure: &ProductMeasure,
    t: &[f64],
    order: f64,
) -> Result<MomentAllocation> {
    check_vector_len(measure, t.len())?;
    let weights = conjugate_block_norms(measure, t);
    let supports = block_supports(measure, t);
    xt_moment_alloc_weighted(measure, &weights, &supports, order)
}

/// [`xt_moment_alloc`] with precomputed per-block weights and support sizes.
pub fn xt_moment_alloc_weighted(
    measure: &ProductMeasure,
    weights: &[f64],
    supports: &[usize],
    order: f64,
) -> Result<MomentAllocation> {
    check_order(order, 1.0)?;
    check_weights(measure, weights)?;
    if supports.len() != weights.len() {
        return Err(Error::Config("supports and weights lengths differ".into()));
    }
    let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(MomentAllocation::zero(measure.n_blocks()));
    }
    if active.iter().any(|&k| supports[k] == 0) {
        return Err(Error::Config(
            "active block reported with zero support".into(),
        ));
    }
    let total_support: usize = active.iter().map(|&k| supports[k]).sum();
    if total_support as f64 > order {
        return Err(Error::SupportBudget {
            support: total_support,
            p: order,
        });
    }

    let curves: Vec<BlockCurve> = active
        .iter()
        .map(|&k| BlockCurve::new(*measure.block(k)))
        .collect();
    let w: Vec<f64> = active.iter().map(|&k| weights[k]).collect();
    let floors: Vec<f64> = active.iter().map(|&k| supports[k] as f64).collect();
    let (value, rs) = strict_optimize(&curves, &w, &floors, order);

    let mut orders = vec![0.0; measure.n_blocks()];
    for (&k, &r) in active.iter().zip(&rs) {
        orders[k] = r;
    }
    Ok(MomentAllocation {
        value,
        orders,
        support_load: total_support as f64 / order,
    })
}

/// Relaxed allocation on nonnegative block weights: no support floors, no
/// drops; every positive-weight block contributes at least its
/// geometric-mean limit. The value is subadditive and positively homogeneous
/// in the weight vector.
pub fn relaxed_moment_alloc(
    measure: &ProductMeasure,
    weights: &[f64],
    order: f64,
) -> Result<MomentAllocation> {
    check_order(order, f64::MIN_POSITIVE)?;
    check_weights(measure, weights)?;
    let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(MomentAllocation::zero(measure.n_blocks()));
    }
    let curves: Vec<BlockCurve> = active
        .iter()
        .map(|&k| BlockCurve::new(*measure.block(k)))
        .collect();
    let items: Vec<Item<'_, BlockCurve>> = curves
        .iter()
        .zip(&active)
        .map(|(c, &k)| Item::new(c, weights[k], 0.0))
        .collect();
    let (value, rs) = water_fill(&items, order);
    let mut orders = vec![0.0; measure.n_blocks()];
    for (&k, &r) in active.iter().zip(&rs) {
        orders[k] = r;
    }
    Ok(MomentAllocation {
        value,
        orders,
        support_load: 0.0,
    })
}

/// Moment surrogate for the iid comparison process `|<Y, t>|_p`: same
/// budgeted allocation but over the power curves `r^(1/p_k)`, which ignore
/// the radial coupling.
pub fn y_moment_surrogate(
    measure: &ProductMeasure,
    t: &[f64],
    order: f64,
) -> Result<MomentAllocation> {
    check_vector_len(measure, t.len())?;
    check_order(order, f64::MIN_POSITIVE)?;
    let weights = conjugate_block_norms(measure, t);
    let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(MomentAllocation::zero(measure.n_blocks()));
    }
    let curves: Vec<PowerCurve> = active
        .iter()
        .map(|&k| PowerCurve::new(measure.block(k).p))
        .collect();
    let items: Vec<Item<'_, PowerCurve>> = curves
        .iter()
        .zip(&active)
        .map(|(c, &k)| Item::new(c, weights[k], 0.0))
        .collect();
    let (value, rs) = water_fill(&items, order);
    let mut orders = vec![0.0; measure.n_blocks()];
    for (&k, &r) in active.iter().zip(&rs) {
        orders[k] = r;
    }
    Ok(MomentAllocation {
        value,
        orders,
        support_load: 0.0,
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Independent optimizer used as a test oracle: coarse simplex grid to find
/// the right basin, then pairwise golden-section transfers until no budget
/// move between any two blocks improves the value.
fn oracle_optimize<C: MomentCurve>(
    items: &[Item<'_, C>],
    budget: f64,
    steps: usize,
) -> (f64, Vec<f64>) {
    let m = items.len();
    let objective = |rs: &[f64]| -> f64 {
        rs.iter()
            .zip(items)
            .map(|(&r, item)| item.w * item.curve.value(r))
            .sum()
    };
    if m == 1 {
        return (items[0].w * items[0].curve.value(budget), vec![budget]);
    }

    assert!(m <= 6, "grid oracle supports at most 6 items");
    let free: f64 = budget - items.iter().map(|it| it.lo).sum::<f64>();
    debug_assert!(free >= 0.0);
    let n = match m {
        2 | 3 => steps,
        4 => steps.min(120),
        5 => steps.min(48),
        _ => steps.min(28),
    };
    let delta = free / n as f64;
    // Per-item value tables on the shared grid lo_i + j * delta.
    let tables: Vec<Vec<f64>> = items
        .iter()
        .map(|it| {
            (0..=n)
                .map(|j| it.w * it.curve.value(it.lo + j as f64 * delta))
                .collect()
        })
        .collect();

    // Walk every composition of n into m parts.
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = vec![0usize; m];
    let mut idx = vec![0usize; m];
    fn walk(
        tables: &[Vec<f64>],
        dim: usize,
        left: usize,
        partial: f64,
        idx: &mut [usize],
        best: &mut f64,
        best_idx: &mut [usize],
    ) {
        if dim + 1 == idx.len() {
            idx[dim] = left;
            let v = partial + tables[dim][left];
            if v > *best {
                *best = v;
                best_idx.copy_from_slice(idx);
            }
            return;
        }
        for j in 0..=left {
            idx[dim] = j;
            walk(tables, dim + 1, left - j, partial + tables[dim][j], idx, best, best_idx);
        }
    }
    walk(&tables, 0, n, 0.0, &mut idx, &mut best, &mut best_idx);

    let mut rs: Vec<f64> = best_idx
        .iter()
        .zip(items)
        .map(|(&j, it)| it.lo + j as f64 * delta)
        .collect();

    // Pairwise polish: for a separable concave objective on the simplex,
    // pairwise slope balance is global optimality.
    for _ in 0..200 {
        let mut moved: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (items[i].lo - rs[i], rs[j] - items[j].lo);
                if b - a < 1e-15 {
                    continue;
                }
                let f = |s: f64| {
                    items[i].w * items[i].curve.value(rs[i] + s)
                        + items[j].w * items[j].curve.value(rs[j] - s)
                };
                let s = golden_max(f, a, b);
                rs[i] += s;
                rs[j] -= s;
                moved = moved.max(s.abs());
            }
        }
        if moved < 1e-13 * budget.max(1.0) {
            break;
        }
    }
    (objective(&rs), rs)
}

/// Default grid resolution of [`alloc_bruteforce_oracle`].
pub const ORACLE_STEPS: usize = 2000;

/// Brute-force reference for [`xt_moment_alloc`] (at most 4 active blocks):
/// subset enumeration plus an independent grid/golden-section optimizer.
pub fn alloc_bruteforce_oracle(
    measure: &ProductMeasure,
    t: &[f64],
    order: f64,
    steps: usize,
) -> Result<MomentAllocation> {
    check_vector_len(measure, t.len())?;
    check_order(order, 1.0)?;
    let weights = conjugate_block_norms(measure, t);
    let supports = block_supports(measure, t);
    let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(MomentAllocation::zero(measure.n_blocks()));
    }
    if active.len() > 4 {
        return Err(Error::Config(format!(
            "bruteforce oracle supports at most 4 active blocks, got {}",
            active.len()
        )));
    }
    let total_support: usize = active.iter().map(|&k| supports[k]).sum();
    if total_support as f64 > order {
        return Err(Error::SupportBudget {
            support: total_support,
            p: order,
        });
    }

    let curves: Vec<BlockCurve> = active
        .iter()
        .map(|&k| BlockCurve::new(*measure.block(k)))
        .collect();
    let mut best_value = 0.0;
    let mut best_orders = vec![0.0; measure.n_blocks()];
    let m = active.len();
    for mask in 1u32..(1 << m) {
        let subset: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        let floor_sum: f64 = subset.iter().map(|&i| supports[active[i]] as f64).sum();
        if floor_sum > order {
            continue;
        }
        let items: Vec<Item<'_, BlockCurve>> = subset
            .iter()
            .map(|&i| Item::new(&curves[i], weights[active[i]], supports[active[i]] as f64))
            .collect();
        let (value, rs) = oracle_optimize(&items, order, steps);
        if value > best_value {
            best_value = value;
            best_orders.iter_mut().for_each(|r| *r = 0.0);
            for (&i, &r) in subset.iter().zip(&rs) {
                best_orders[active[i]] = r;
            }
        }
    }
    Ok(MomentAllocation {
        value: best_value,
        orders: best_orders,
        support_load: total_support as f64 / order,
    })
}

/// Brute-force reference for [`relaxed_moment_alloc`].
pub fn relaxed_bruteforce_oracle(
    measure: &ProductMeasure,
    weights: &[f64],
    order: f64,
    steps: usize,
) -> Result<MomentAllocation> {
    check_order(order, f64::MIN_POSITIVE)?;
    check_weights(measure, weights)?;
    let active: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
    if active.is_empty() {
        return Ok(MomentAllocation::zero(measure.n_blocks()));
    }
    if active.len() > 4 {
        return Err(Error::Config(format!(
            "bruteforce oracle supports at most 4 active blocks, got {}",
            active.len()
        )));
    }
    let curves: Vec<BlockCurve> = active
        .iter()
        .map(|&k| BlockCurve::new(*measure.block(k)))
        .collect();
    let items: Vec<Item<'_, BlockCurve>> = curves
        .iter()
        .zip(&active)
        .map(|(c, &k)| Item::new(c, weights[k], 0.0))
        .collect();
    let (value, rs) = oracle_optimize(&items, order, steps);
    let mut orders = vec![0.0; measure.n_blocks()];
    for (&k, &r) in active.iter().zip(&rs) {
        orders[k] = r;
    }
    Ok(MomentAllocation {
        value,
        orders,
        support_load: 0.0,
    })
}

/// Test-only oracle for capped power objectives
/// `sum_i min(k_i r_i^{1/p_i}, cap_i)` over `sum_i r_i = budget`, at most six
/// coordinates given as `(k, p, cap)` triples.
#[cfg(test)]
pub(crate) fn capped_power_oracle(coords: &[(f64, f64, f64)], budget: f64, steps: usize) -> f64 {
    struct Capped {
        exponent: f64,
        cap: f64,
    }
    impl MomentCurve for Capped {
        fn value(&self, r: f64) -> f64 {
            r.powf(self.exponent).min(self.cap)
        }

        fn ln_slope(&self, r: f64) -> f64 {
            if r.powf(self.exponent) >= self.cap {
                f64::NEG_INFINITY
            } else {
                self.exponent.ln() + (self.exponent - 1.0) * r.ln()
            }
        }

        fn ln_slope_deriv(&self, r: f64) -> f64 {
            (self.exponent - 1.0) / r
        }
    }
    let curves: Vec<Capped> = coords
        .iter()
        .map(|&(k, p, cap)| Capped {
            exponent: 1.0 / p,
            cap: cap / k,
        })
        .collect();
    let items: Vec<Item<'_, Capped>> = coords
        .iter()
        .zip(&curves)
        .map(|(&(k, _, _), curve)| Item::new(curve, k, 0.0))
        .collect();
    oracle_optimize(&items, budget, steps).0
}
