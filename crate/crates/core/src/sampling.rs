//! Exact samplers for the product measure and its comparison processes.
//!
//! Every block factorizes as `X_k = scale * R * V` with `R` the radial part
//! and `V` uniform on the unit p-sphere under the normalized cone measure.
//! `V` is drawn as a vector of iid generalized Gaussians divided by its
//! p-norm; radii are powers of Gamma variables.

use crate::measure::{BlockSpec, ProductMeasure};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

/// Sampler for one block with the Gamma generators built once.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    spec: BlockSpec,
    /// Shape `n / (p gamma)`: radius of the block.
    radial: Gamma<f64>,
    /// Shape `n / p`: p-norm of the iid comparison vector.
    iid_radial: Gamma<f64>,
    /// Shape `1 / p`: magnitude of one generalized-Gaussian coordinate.
    coord: Gamma<f64>,
}

impl BlockSampler {
    pub fn new(spec: BlockSpec) -> Self {
        let nf = spec.n as f64;
        let radial = Gamma::new(nf / (spec.p * spec.potential.gamma), 1.0)
            .expect("radial shape is positive");
        let iid_radial = Gamma::new(nf / spec.p, 1.0).expect("iid radial shape is positive");
        let coord = Gamma::new(1.0 / spec.p, 1.0).expect("coordinate shape is positive");
        BlockSampler {
            spec,
            radial,
            iid_radial,
            coord,
        }
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    /// Radius `R = (G / lambda)^(1 / (p gamma))`, `G ~ Gamma(n / (p gamma))`.
    pub fn radius(&self, rng: &mut ChaCha8Rng) -> f64 {
        let g = self.radial.sample(rng);
        (g / self.spec.potential.lambda).powf(1.0 / (self.spec.p * self.spec.potential.gamma))
    }

    /// Comparison radius `R~ = (G / b)^(1/p)`, `G ~ Gamma(n / p)`.
    pub fn iid_radius(&self, rng: &mut ChaCha8Rng) -> f64 {
        let g = self.iid_radial.sample(rng);
        (g / self.spec.b).powf(1.0 / self.spec.p)
    }

    /// One signed generalized-Gaussian coordinate, density proportional to
    /// `exp(-b |y|^p)` (unit variance).
    pub fn iid_coord(&self, rng: &mut ChaCha8Rng) -> f64 {
        let g = self.coord.sample(rng);
        let magnitude = (g / self.spec.b).powf(1.0 / self.spec.p);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }

    /// Fill `out` with the direction `V = Y / |Y|_p`; `|out| = n`.
    pub fn direction_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.spec.n);
        let mut norm_p = 0.0;
        for y in out.iter_mut() {
            *y = self.iid_coord(rng);
            norm_p += y.abs().powf(self.spec.p);
        }
        let norm = norm_p.powf(1.0 / self.spec.p);
        for y in out.iter_mut() {
            *y /= norm;
        }
    }

    /// Fill `out` with one scaled block vector `scale * R * V`.
    pub fn block_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        self.direction_into(rng, out);
        let factor = self.spec.scale * self.radius(rng);
        for y in out.iter_mut() {
            *y *= factor;
        }
    }
}

/// Sampler for a whole product measure.
#[derive(Debug, Clone)]
pub struct MeasureSampler {
    measure: ProductMeasure,
    samplers: Vec<BlockSampler>,
}

impl MeasureSampler {
    pub fn new(measure: &ProductMeasure) -> Self {
        let samplers = measure
            .blocks()
            .iter()
            .map(|b| BlockSampler::new(*b))
            .collect();
        MeasureSampler {
            measure: measure.clone(),
            samplers,
        }
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    pub fn block_samplers(&self) -> &[BlockSampler] {
        &self.samplers
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    /// Draw one vector of the product measure into `out` (`|out| = dim`),
    /// writing each block at its index set.
    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut buf = [0.0; 64];
        let mut heap;
        for (sampler, idx) in self.samplers.iter().zip(self.measure.index_sets()) {
            let n = sampler.spec.n;
            let block: &mut [f64] = if n <= 64 {
                &mut buf[..n]
            } else {
                heap = vec![0.0; n];
                &mut heap
            };
            sampler.block_into(rng, block);
            for (&i, &v) in idx.iter().zip(block.iter()) {
                out[i] = v;
            }
        }
    }

    /// Draw one iid comparison vector (each coordinate an independent
    /// generalized Gaussian of its block, no radial coupling and no scale).
    pub fn sample_iid_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        for (sampler, idx) in self.samplers.iter().zip(self.measure.index_sets()) {
            for &i in idx {
                out[i] = sampler.iid_coord(rng);
            }
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_iid(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_iid_into(rng, &mut out);
        out
    }
}

/// Symmetric exponential variable, density `exp(-|x|) / 2`.
pub fn sample_sym_exponential(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let magnitude = -(1.0 - u).ln();
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{BlockInput, MeasureSpec, Potential};
    use crate::rng::RngStream;
    use statrs::function::erf::erf;

    fn block(n: usize, p: f64, gamma: f64, lambda: f64) -> BlockSpec {
        BlockSpec::new(n, p, Potential { lambda, gamma }, 0.1).unwrap()
    }

    fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    fn assert_within_sigmas(xs: &[f64], expected: f64, sigmas: f64) {
        let (mean, se) = mean_and_sd(xs);
        assert!(
            (mean - expected).abs() <= sigmas * se,
            "mean {mean}, expected {expected}, stderr {se}"
        );
    }

    #[test]
    fn sampling_is_reproducible_per_stream() {
        let spec = MeasureSpec {
            blocks: vec![
                BlockInput {
                    n: 3,
                    p: 1.5,
                    potential: Potential {
                        lambda: 1.0,
                        gamma: 1.0,
                    },
                },
                BlockInput {
                    n: 2,
                    p: 2.0,
                    potential: Potential {
                        lambda: 0.5,
                        gamma: 1.0,
                    },
                },
            ],
            eps_cutoff: 0.1,
            index_sets: None,
        };
        let sampler = MeasureSampler::new(&ProductMeasure::from_spec(&spec).unwrap());
        let a: Vec<Vec<f64>> = {
            let mut rng = RngStream::new(7, 3).rng();
            (0..5).map(|_| sampler.sample(&mut rng)).collect()
        };
        let b: Vec<Vec<f64>> = {
            let mut rng = RngStream::new(7, 3).rng();
            (0..5).map(|_| sampler.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);
        let mut rng = RngStream::new(7, 4).rng();
        assert_ne!(a[0], sampler.sample(&mut rng));
    }

    #[test]
    fn directions_live_on_the_unit_p_sphere() {
        for spec in [block(4, 1.3, 1.0, 1.0), block(7, 2.0, 2.0, 0.5), block(2, 6.0, 1.0, 2.0)] {
            let sampler = BlockSampler::new(spec);
            let mut rng = RngStream::new(5, 0).rng();
            let mut v = vec![0.0; spec.n];
            for _ in 0..200 {
                sampler.direction_into(&mut rng, &mut v);
                let norm: f64 = v.iter().map(|x| x.abs().powf(spec.p)).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn direction_coordinates_are_sign_symmetric_with_known_second_moment() {
        let spec = block(8, 2.0, 1.0, 0.5);
        let sampler = BlockSampler::new(spec);
        let mut rng = RngStream::new(11, 0).rng();
        let mut v = vec![0.0; spec.n];
        let mut first = Vec::with_capacity(100_000);
        let mut first_sq = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            sampler.direction_into(&mut rng, &mut v);
            first.push(v[0]);
            first_sq.push(v[0] * v[0]);
        }
        assert_within_sigmas(&first, 0.0, 4.0);
        assert_within_sigmas(&first_sq, spec.mean_square_direction_coord(), 4.0);
    }

    #[test]
    fn radius_samples_match_exact_first_moments() {
        for spec in [block(3, 1.5, 2.0, 0.8), block(5, 2.0, 1.0, 0.5)] {
            let sampler = BlockSampler::new(spec);
            let mut rng = RngStream::new(13, 0).rng();
            let r: Vec<f64> = (0..100_000).map(|_| sampler.radius(&mut rng)).collect();
            assert_within_sigmas(&r, spec.radius_norm(1.0), 4.0);
            let rt: Vec<f64> = (0..100_000).map(|_| sampler.iid_radius(&mut rng)).collect();
            assert_within_sigmas(&rt, spec.iid_radius_norm(1.0), 4.0);
        }
    }

    #[test]
    fn iid_coordinates_have_unit_variance() {
        for spec in [block(1, 1.5, 1.0, 1.0), block(1, 4.0, 1.0, 1.0)] {
            let sampler = BlockSampler::new(spec);
            let mut rng = RngStream::new(17, 0).rng();
            let sq: Vec<f64> = (0..150_000)
                .map(|_| sampler.iid_coord(&mut rng).powi(2))
                .collect();
            assert_within_sigmas(&sq, 1.0, 4.0);
        }
    }

    #[test]
    fn gaussian_block_coordinate_passes_ks_against_normal_cdf() {
        let spec = block(3, 2.0, 1.0, 0.5);
        let sampler = BlockSampler::new(spec);
        let mut rng = RngStream::new(19, 0).rng();
        let mut v = vec![0.0; 3];
        let n = 50_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            sampler.block_into(&mut rng, &mut v);
            xs.push(v[0]);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let phi = |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = phi(x);
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - f).abs());
        }
        assert!(d < 2.5 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn scaled_blocks_have_unit_coordinate_variance_and_no_correlation() {
        let spec = block(4, 1.5, 1.0, 1.0);
        let sampler = BlockSampler::new(spec);
        let mut rng = RngStream::new(23, 0).rng();
        let mut v = vec![0.0; 4];
        let mut sq = Vec::with_capacity(100_000);
        let mut cross = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            sampler.block_into(&mut rng, &mut v);
            sq.push(v[1] * v[1]);
            cross.push(v[0] * v[2]);
        }
        assert_within_sigmas(&sq, 1.0, 4.0);
        assert_within_sigmas(&cross, 0.0, 4.0);
    }

    #[test]
    fn explicit_index_sets_permute_the_contiguous_sample() {
        let blocks = vec![
            BlockInput {
                n: 2,
                p: 1.5,
                potential: Potential {
                    lambda: 1.0,
                    gamma: 1.0,
                },
            },
            BlockInput {
                n: 1,
                p: 2.0,
                potential: Potential {
                    lambda: 0.5,
                    gamma: 1.0,
                },
            },
        ];
        let contiguous = ProductMeasure::from_spec(&MeasureSpec {
            blocks: blocks.clone(),
            eps_cutoff: 0.1,
            index_sets: None,
        })
        .unwrap();
        let permuted = ProductMeasure::from_spec(&MeasureSpec {
            blocks,
            eps_cutoff: 0.1,
            index_sets: Some(vec![vec![2, 0], vec![1]]),
        })
        .unwrap();
        let mut rng_a = RngStream::new(29, 0).rng();
        let mut rng_b = RngStream::new(29, 0).rng();
        let a = MeasureSampler::new(&contiguous).sample(&mut rng_a);
        let b = MeasureSampler::new(&permuted).sample(&mut rng_b);
        assert_eq!(b[2], a[0]);
        assert_eq!(b[0], a[1]);
        assert_eq!(b[1], a[2]);
    }

    #[test]
    fn sym_exponential_moments() {
        let mut rng = RngStream::new(31, 0).rng();
        let xs: Vec<f64> = (0..200_000).map(|_| sample_sym_exponential(&mut rng)).collect();
        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let p4: Vec<f64> = xs.iter().map(|x| x.powi(4)).collect();
        assert_within_sigmas(&xs, 0.0, 4.0);
        assert_within_sigmas(&abs, 1.0, 4.0);
        assert_within_sigmas(&sq, 2.0, 4.0);
        // Fourth moment of the two-sided exponential is 4! = 24.
        assert_within_sigmas(&p4, 24.0, 4.0);
    }
}
