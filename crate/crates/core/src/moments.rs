//! Moment computations for linear forms `<X, t>`: closed forms, fast
//! surrogates and Monte Carlo estimates with delta-method errors.

use crate::estimate::{chunked_mc, Estimate, MeanAcc};
use crate::measure::{BlockSpec, ProductMeasure};
use crate::rng::RngStream;
use crate::sampling::MeasureSampler;
use crate::special::{dlg, ln_gamma};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;

/// `|x|_p` with `p = inf` supported; scale-invariant evaluation so large
/// exponents do not overflow.
pub fn lp_norm(xs: &[f64], p: f64) -> f64 {
    let m = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|x| (x.abs() / m).powf(p)).sum();
    m * sum.powf(1.0 / p)
}

/// `|t restricted to idx|_p`.
pub fn lp_norm_indexed(t: &[f64], idx: &[usize], p: f64) -> f64 {
    let m = idx.iter().fold(0.0f64, |m, &i| m.max(t[i].abs()));
    if m == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return m;
    }
    let sum: f64 = idx.iter().map(|&i| (t[i].abs() / m).powf(p)).sum();
    m * sum.powf(1.0 / p)
}

/// Per-block conjugate norms `|t_k|_{q_k}`.
pub fn conjugate_block_norms(measure: &ProductMeasure, t: &[f64]) -> Vec<f64> {
    measure
        .blocks()
        .iter()
        .zip(measure.index_sets())
        .map(|(b, idx)| lp_norm_indexed(t, idx, b.q))
        .collect()
}

/// Number of nonzero coefficients of `t` inside each block.
pub fn block_supports(measure: &ProductMeasure, t: &[f64]) -> Vec<usize> {
    measure
        .index_sets()
        .iter()
        .map(|idx| idx.iter().filter(|&&i| t[i] != 0.0).count())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-term surrogate for the r-norm of a sum of iid symmetric exponentials:
/// `r |t|_inf + sqrt(r) |t|_2`.
pub fn exp_sum_moment(r: f64, t: &[f64]) -> f64 {
    r * lp_norm(t, f64::INFINITY) + r.sqrt() * lp_norm(t, 2.0)
}

/// Head-plus-tail surrogate: the sum of the `floor(r)` largest magnitudes
/// plus `sqrt(r)` times the Euclidean norm of the rest.
pub fn top_k_plus_tail_moment(r: f64, t: &[f64]) -> f64 {
    let mut mags: Vec<f64> = t.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = (r.floor() as usize).min(mags.len());
    let head: f64 = mags[..k].iter().sum();
    let tail: f64 = mags[k..].iter().map(|x| x * x).sum::<f64>().sqrt();
    head + r.sqrt() * tail
}

/// Piecewise surrogate for the inner r-norm contribution of one block:
/// `|t_k|_q (r / n)^(1/p)` for moderate orders, saturating at `|t_k|_q` once
/// `r` passes the block dimension. Orders below the support size of `t_k`
/// are outside the regime and rejected.
pub fn cone_inner_moment(block: &BlockSpec, t_k: &[f64], r: f64) -> Result<f64> {
    let support = t_k.iter().filter(|x| **x != 0.0).count();
    if r < support as f64 {
        return Err(Error::SupportBudget {
            support,
            p: r,
        });
    }
    let w = lp_norm(t_k, block.q);
    let n = block.n as f64;
    if r >= n {
        Ok(w)
    } else {
        Ok(w * (r / n).powf(1.0 / block.p))
    }
}

/// Exact r-norm of a centered Gaussian with standard deviation `sigma`.
pub fn gaussian_form_moment(r: f64, sigma: f64) -> f64 {
    sigma * (0.5 * (2.0f64).ln() + dlg(0.5, 0.5, r)).exp()
}

/// Exact r-norm of the symmetric exponential law `exp(-|x|)/2`:
/// `Gamma(r + 1)^(1/r)`.
pub fn sym_exponential_moment(r: f64) -> f64 {
    (ln_gamma(r + 1.0) / r).exp()
}

/// Flag combinations of moment order and sample size for which the pth-power
/// tail dominates the Monte Carlo error and estimates are untrustworthy.
pub fn mc_tail_unstable(order: f64, n_samples: u64) -> bool {
    order >= 20.0 && n_samples < 1_000_000
}

fn mc_moments_with<F>(
    dim: usize,
    t: &[f64],
    orders: &[f64],
    n_samples: u64,
    stream: RngStream,
    fill: F,
) -> Result<Vec<Estimate>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if t.len() != dim {
        return Err(Error::Config(format!(
            "vector length {} does not match measure dimension {dim}",
            t.len()
        )));
    }
    if n_samples < 2 {
        return Err(Error::Config("need at least 2 samples".into()));
    }
    for &r in orders {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("moment order must be positive, got {r}")));
        }
    }
    let chunks = chunked_mc(n_samples, stream, |_, len, rng| {
        let mut x = vec![0.0; dim];
        let mut accs = vec![MeanAcc::default(); orders.len()];
        for _ in 0..len {
            fill(rng, &mut x);
            let z = dot(&x, t).abs();
            for (acc, &r) in accs.iter_mut().zip(orders) {
                acc.push(z.powf(r));
            }
        }
        accs
    });
    let mut totals = vec![MeanAcc::default(); orders.len()];
    for chunk in &chunks {
        for (tot, acc) in totals.iter_mut().zip(chunk) {
            tot.merge(acc);
        }
    }
    Ok(totals
        .iter()
        .zip(orders)
        .map(|(acc, &r)| {
            let m = acc.mean();
            if m <= 0.0 {
                return Estimate {
                    value: 0.0,
                    stderr: 0.0,
                    n_samples,
                    seed: stream.label(),
                };
            }
            let value = m.powf(1.0 / r);
            let sd = acc.variance().sqrt();
            Estimate {
                value,
                stderr: value / (r * m) * sd / (n_samples as f64).sqrt(),
                n_samples,
                seed: stream.label(),
            }
        })
        .collect())
}

/// Monte Carlo r-norms of `<X, t>` for all `orders` from one shared sample
/// batch (estimates are comparable across orders sample-by-sample).
pub fn mc_form_moments(
    measure: &ProductMeasure,
    t: &[f64],
    orders: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    let sampler = MeasureSampler::new(measure);
    mc_moments_with(measure.dim(), t, orders, n_samples, stream, |rng, x| {
        sampler.sample_into(rng, x)
    })
}

/// Monte Carlo r-norms of `<Y, t>` for the iid comparison process.
pub fn mc_iid_form_moments(
    measure: &ProductMeasure,
    t: &[f64],
    orders: &[f64],
    n_samples: u64,
    stream: RngStream,
) -> Result<Vec<Estimate>> {
    let sampler = MeasureSampler::new(measure);
    mc_moments_with(measure.dim(), t, orders, n_samples, stream, |rng, x| {
        sampler.sample_iid_into(rng, x)
    })
}

/// Running min/max of observed ratios; used to report empirical constant
/// bands instead of hardcoding them.
#[derive(Debug, Clone, Copy)]
pub struct RatioBand {
    pub min: f64,
    pub max: f64,
}

impl Default for RatioBand {
    fn default() -> Self {
        RatioBand {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl RatioBand {
    pub fn observe(&mut self, ratio: f64) {
        self.min = self.min.min(ratio);
        self.max = self.max.max(ratio);
    }

    pub fn is_finite(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min > 0.0
    }

    /// Smallest `B` with all ratios in `[1/B, B]`.
    pub fn symmetric_bound(&self) -> f64 {
        self.max.max(1.0 / self.min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{BlockInput, Potential, ProductMeasure};

    fn gaussian_measure(n: usize) -> ProductMeasure {
        let blocks = (0..n)
            .map(|_| BlockInput {
                n: 1,
                p: 2.0,
                potential: Potential {
                    lambda: 0.5,
                    gamma: 1.0,
                },
            })
            .collect();
        ProductMeasure::from_blocks(blocks, 0.1).unwrap()
    }

    #[test]
    fn lp_norms() {
        let t = [3.0, -4.0];
        assert!((lp_norm(&t, 2.0) - 5.0).abs() < 1e-14);
        assert!((lp_norm(&t, 1.0) - 7.0).abs() < 1e-14);
        assert!((lp_norm(&t, f64::INFINITY) - 4.0).abs() < 1e-14);
        assert_eq!(lp_norm(&[0.0, 0.0], 2.0), 0.0);
        // Scale invariance keeps huge entries finite at large exponents.
        let big = [1e200, 5e199];
        assert!((lp_norm(&big, 100.0) / 1e200 - (1.0f64 + 0.5f64.powi(100)).powf(0.01)).abs() < 1e-12);
        let idx = [1usize, 2];
        let t = [9.0, 3.0, -4.0];
        assert!((lp_norm_indexed(&t, &idx, 2.0) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn conjugate_norms_per_block() {
        let measure = ProductMeasure::from_blocks(
            vec![
                BlockInput {
                    n: 2,
                    p: 2.0,
                    potential: Potential {
                        lambda: 0.5,
                        gamma: 1.0,
                    },
                },
                BlockInput {
                    n: 2,
                    p: 1.5,
                    potential: Potential {
                        lambda: 1.0,
                        gamma: 1.0,
                    },
                },
            ],
            0.1,
        )
        .unwrap();
        let t = [3.0, 4.0, 1.0, 1.0];
        let norms = conjugate_block_norms(&measure, &t);
        assert!((norms[0] - 5.0).abs() < 1e-13);
        // q = 3 for p = 1.5.
        assert!((norms[1] - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-13);
        assert_eq!(block_supports(&measure, &[3.0, 0.0, 1.0, 1.0]), vec![1, 2]);
    }

    #[test]
    fn exponential_sum_surrogate() {
        let t = [3.0, 1.0];
        let expected = 2.0 * 3.0 + 2.0f64.sqrt() * 10.0f64.sqrt();
        assert!((exp_sum_moment(2.0, &t) - expected).abs() < 1e-13);
    }

    #[test]
    fn head_tail_surrogate() {
        let t = [1.0, -5.0, 3.0, 2.0, 4.0];
        let expected = 12.0 + 3.5f64.sqrt() * 5.0f64.sqrt();
        assert!((top_k_plus_tail_moment(3.5, &t) - expected).abs() < 1e-13);
        // Orders past the length take the whole head.
        assert!((top_k_plus_tail_moment(9.0, &t) - 15.0).abs() < 1e-13);
    }

    #[test]
    fn cone_inner_moment_pieces() {
        let block = BlockSpec::new(8, 2.0, Potential { lambda: 0.5, gamma: 1.0 }, 0.1).unwrap();
        let t = [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            cone_inner_moment(&block, &t, 3.0),
            Err(Error::SupportBudget { support: 4, .. })
        ));
        let w = 2.0; // |t|_2
        let mid = cone_inner_moment(&block, &t, 6.0).unwrap();
        assert!((mid - w * (6.0f64 / 8.0).sqrt()).abs() < 1e-13);
        let at_n = cone_inner_moment(&block, &t, 8.0).unwrap();
        let past_n = cone_inner_moment(&block, &t, 50.0).unwrap();
        assert!((at_n - w).abs() < 1e-13);
        assert!((past_n - w).abs() < 1e-13);
    }

    #[test]
    fn gaussian_and_exponential_closed_forms() {
        assert!((gaussian_form_moment(1.0, 1.0) - 0.797_884_560_802_865_355_88).abs() < 1e-14);
        assert!((gaussian_form_moment(2.0, 3.0) - 3.0).abs() < 1e-13);
        assert!((gaussian_form_moment(4.0, 1.0) - 1.316_074_012_952_492_460_8).abs() < 1e-13);
        assert!((sym_exponential_moment(1.0) - 1.0).abs() < 1e-14);
        assert!((sym_exponential_moment(2.0) - 2.0f64.sqrt()).abs() < 1e-14);
        assert!((sym_exponential_moment(4.0) - 2.213_363_839_400_643_184_8).abs() < 1e-13);
    }

    #[test]
    fn mc_matches_gaussian_closed_form() {
        let measure = gaussian_measure(3);
        let t = [1.0, -2.0, 2.0];
        let sigma = 3.0;
        let orders = [1.0, 2.0, 4.0];
        let est = mc_form_moments(&measure, &t, &orders, 200_000, RngStream::new(41, 0)).unwrap();
        for (e, &r) in est.iter().zip(&orders) {
            let exact = gaussian_form_moment(r, sigma);
            assert!(
                (e.value - exact).abs() <= 4.0 * e.stderr,
                "order {r}: value {} exact {exact} stderr {}",
                e.value,
                e.stderr
            );
            assert!(e.stderr > 0.0 && e.stderr < 0.05 * exact);
        }
    }

    #[test]
    fn shared_batch_moments_are_monotone_in_the_order() {
        let measure = gaussian_measure(4);
        let t = [0.5, 1.0, -1.5, 0.25];
        let orders = [1.0, 2.0, 4.0, 8.0];
        let est = mc_form_moments(&measure, &t, &orders, 50_000, RngStream::new(43, 0)).unwrap();
        for w in est.windows(2) {
            assert!(w[0].value <= w[1].value * (1.0 + 1e-12));
        }
    }

    #[test]
    fn iid_comparison_moments_have_unit_variance_coordinates() {
        let measure = ProductMeasure::from_blocks(
            vec![BlockInput {
                n: 4,
                p: 1.5,
                potential: Potential {
                    lambda: 1.0,
                    gamma: 1.0,
                },
            }],
            0.1,
        )
        .unwrap();
        let t = [1.0, 0.0, 0.0, 0.0];
        let est =
            mc_iid_form_moments(&measure, &t, &[2.0], 100_000, RngStream::new(47, 0)).unwrap();
        assert!((est[0].value - 1.0).abs() <= 4.0 * est[0].stderr);
    }

    #[test]
    fn mc_rejects_bad_inputs() {
        let measure = gaussian_measure(2);
        assert!(mc_form_moments(&measure, &[1.0], &[2.0], 100, RngStream::new(1, 0)).is_err());
        assert!(
            mc_form_moments(&measure, &[1.0, 0.0], &[-1.0], 100, RngStream::new(1, 0)).is_err()
        );
        assert!(mc_form_moments(&measure, &[1.0, 0.0], &[2.0], 1, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn tail_instability_flag() {
        assert!(mc_tail_unstable(32.0, 100_000));
        assert!(mc_tail_unstable(20.0, 1_000));
        assert!(!mc_tail_unstable(32.0, 1_000_000));
        assert!(!mc_tail_unstable(8.0, 1_000));
        assert!(!mc_tail_unstable(19.9, 1_000));
    }

    #[test]
    fn ratio_band_tracks_extremes() {
        let mut band = RatioBand::default();
        for r in [0.8, 1.1, 2.0, 0.9] {
            band.observe(r);
        }
        assert!(band.is_finite());
        assert!((band.min - 0.8).abs() < 1e-15);
        assert!((band.max - 2.0).abs() < 1e-15);
        assert!((band.symmetric_bound() - 2.0).abs() < 1e-15);
    }
}
