//! Product measure model: block specifications, normalizing constants and
//! exact single-block moment curves.
//!
//! A block is an `n`-dimensional factor with density proportional to
//! `exp(-U(|x|_p^p))`, `U(x) = lambda * x^gamma`. Every block is stored
//! together with its conjugate exponent, the unit-variance constant of the
//! matching generalized Gaussian, and an isotropizing scale so that the
//! scaled block vector has identity covariance.

use crate::special::{dlg, dlg_deriv, dlg_deriv2, ln_gamma};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Radial potential `U(x) = lambda * x^gamma`, increasing with `U(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub lambda: f64,
    pub gamma: f64,
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "potential lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return Err(Error::Config(format!(
                "potential gamma must be finite and >= 1, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Conjugate exponent `q` with `1/p + 1/q = 1`; `q = inf` when `p = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Constant `b` for which the density proportional to `exp(-b |x|^p)` has
/// unit variance: `b = [Gamma(3/p) / Gamma(1/p)]^(p/2)`.
pub fn b_constant(p: f64) -> f64 {
    (0.5 * p * (ln_gamma(3.0 / p) - ln_gamma(1.0 / p))).exp()
}

/// Log surface measure of the boundary of the unit p-ball in dimension `n`.
pub fn ln_surface_area(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    p.ln() + nf * ((2.0f64).ln() + ln_gamma(1.0 + 1.0 / p)) - ln_gamma(nf / p)
}

pub fn surface_area(n: usize, p: f64) -> f64 {
    ln_surface_area(n, p).exp()
}

/// Log volume of the unit p-ball in dimension `n`.
pub fn ln_ball_volume(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    nf * ((2.0f64).ln() + ln_gamma(1.0 + 1.0 / p)) - ln_gamma(1.0 + nf / p)
}

/// One block of the product measure, with all derived constants resolved.
#[derive(Debug, Clone, Copy)]
pub struct BlockSpec {
    pub n: usize,
    pub p: f64,
    /// Conjugate exponent of `p` (infinite when `p = 1`).
    pub q: f64,
    /// Unit-variance constant `b_constant(p)`.
    pub b: f64,
    /// Isotropizing factor: the scaled block vector `scale * R * V` has
    /// identity covariance.
    pub scale: f64,
    pub potential: Potential,
}

impl BlockSpec {
    pub fn new(n: usize, p: f64, potential: Potential, eps_cutoff: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("block dimension must be at least 1".into()));
        }
        if !(eps_cutoff.is_finite() && eps_cutoff >= 0.0) {
            return Err(Error::Config(format!(
                "eps_cutoff must be finite and >= 0, got {eps_cutoff}"
            )));
        }
        if !p.is_finite() || p < 1.0 {
            return Err(Error::Config(format!(
                "block exponent p must be finite and >= 1, got {p}"
            )));
        }
        if p < 1.0 + eps_cutoff {
            return Err(Error::Cutoff { p, eps: eps_cutoff });
        }
        potential.validate()?;

        let q = conjugate_exponent(p);
        let b = b_constant(p);
        let nf = n as f64;
        let s = 1.0 / (p * potential.gamma);
        // E R^2 for the radial density r^(n-1) exp(-lambda r^(p gamma)).
        let ln_er2 =
            -2.0 * s * potential.lambda.ln() + ln_gamma((nf + 2.0) * s) - ln_gamma(nf * s);
        // E V_1^2 for the direction V = Y / |Y|_p, Y iid with constant b.
        let ln_ev2 = (2.0 / p) * b.ln() + ln_gamma(nf / p) - ln_gamma((nf + 2.0) / p);
        let scale = (-0.5 * (ln_er2 + ln_ev2)).exp();

        Ok(BlockSpec {
            n,
            p,
            q,
            b,
            scale,
            potential,
        })
    }

    /// `E R^2` of the radial factor (density `r^(n-1) exp(-lambda r^(p gamma))`).
    pub fn mean_square_radius(&self) -> f64 {
        (2.0 * self.ln_radius_norm(2.0)).exp()
    }

    /// `E V_1^2` of one coordinate of the direction factor.
    pub fn mean_square_direction_coord(&self) -> f64 {
        (2.0 * self.ln_direction_coord_norm(2.0)).exp()
    }

    /// `ln |R|_r` of the radial factor; finite limit at `r = 0`
    /// (log geometric mean).
    pub fn ln_radius_norm(&self, r: f64) -> f64 {
        let s = 1.0 / (self.p * self.potential.gamma);
        -s * self.potential.lambda.ln() + dlg(self.n as f64 * s, s, r)
    }

    pub fn radius_norm(&self, r: f64) -> f64 {
        self.ln_radius_norm(r).exp()
    }

    /// `ln |R~|_r` where `R~ = |Y|_p` and `Y` has `n` iid coordinates with
    /// density proportional to `exp(-b |y|^p)`.
    pub fn ln_iid_radius_norm(&self, r: f64) -> f64 {
        -self.b.ln() / self.p + dlg(self.n as f64 / self.p, 1.0 / self.p, r)
    }

    pub fn iid_radius_norm(&self, r: f64) -> f64 {
        self.ln_iid_radius_norm(r).exp()
    }

    /// `ln |V_1|_r` of one coordinate of the direction `V = Y / |Y|_p`.
    pub fn ln_direction_coord_norm(&self, r: f64) -> f64 {
        let inv_p = 1.0 / self.p;
        dlg(inv_p, inv_p, r) - dlg(self.n as f64 * inv_p, inv_p, r)
    }

    pub fn direction_coord_norm(&self, r: f64) -> f64 {
        self.ln_direction_coord_norm(r).exp()
    }

    /// `ln |Y_1|_r` of one iid comparison coordinate (density proportional
    /// to `exp(-b |y|^p)`); equals the iid radius and direction curves
    /// combined.
    pub fn ln_iid_coord_norm(&self, r: f64) -> f64 {
        let inv_p = 1.0 / self.p;
        -self.b.ln() * inv_p + dlg(inv_p, inv_p, r)
    }

    pub fn iid_coord_norm(&self, r: f64) -> f64 {
        self.ln_iid_coord_norm(r).exp()
    }

    /// `ln |X_1|_r` of one coordinate of the scaled block vector
    /// `X = scale * R * V`. This curve is increasing and concave in `r`, and
    /// doubling `r` at most doubles the norm.
    pub fn ln_coord_norm(&self, r: f64) -> f64 {
        self.scale.ln() + self.ln_radius_norm(r) + self.ln_direction_coord_norm(r)
    }

    pub fn coord_norm(&self, r: f64) -> f64 {
        self.ln_coord_norm(r).exp()
    }

    /// Derivative of `ln_coord_norm` in `r`.
    pub fn ln_coord_norm_deriv(&self, r: f64) -> f64 {
        let s = 1.0 / (self.p * self.potential.gamma);
        let inv_p = 1.0 / self.p;
        let nf = self.n as f64;
        dlg_deriv(nf * s, s, r) + dlg_deriv(inv_p, inv_p, r) - dlg_deriv(nf * inv_p, inv_p, r)
    }

    /// Second derivative of `ln_coord_norm` in `r`.
    pub fn ln_coord_norm_deriv2(&self, r: f64) -> f64 {
        let s = 1.0 / (self.p * self.potential.gamma);
        let inv_p = 1.0 / self.p;
        let nf = self.n as f64;
        dlg_deriv2(nf * s, s, r) + dlg_deriv2(inv_p, inv_p, r) - dlg_deriv2(nf * inv_p, inv_p, r)
    }
}

fn default_eps_cutoff() -> f64 {
    0.1
}

/// Serialized form of a block: dimension, exponent and potential. Derived
/// constants are never stored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockInput {
    pub n: usize,
    pub p: f64,
    pub potential: Potential,
}

/// Serialized form of a product measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub blocks: Vec<BlockInput>,
    #[serde(default = "default_eps_cutoff")]
    pub eps_cutoff: f64,
    /// Optional explicit partition of coordinates into blocks; contiguous
    /// by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_sets: Option<Vec<Vec<usize>>>,
}

/// Validated product measure: blocks plus a partition of the ambient
/// coordinates into per-block index sets.
#[derive(Debug, Clone)]
pub struct ProductMeasure {
    blocks: Vec<BlockSpec>,
    index_sets: Vec<Vec<usize>>,
    eps_cutoff: f64,
}

impl ProductMeasure {
    pub fn from_spec(spec: &MeasureSpec) -> Result<Self> {
        if spec.blocks.is_empty() {
            return Err(Error::Config("measure must have at least one block".into()));
        }
        let blocks = spec
            .blocks
            .iter()
            .map(|b| BlockSpec::new(b.n, b.p, b.potential, spec.eps_cutoff))
            .collect::<Result<Vec<_>>>()?;
        let dim: usize = blocks.iter().map(|b| b.n).sum();
        let index_sets = match &spec.index_sets {
            None => contiguous_sets(&blocks),
            Some(sets) => {
                validate_partition(sets, &blocks, dim)?;
                sets.clone()
            }
        };
        Ok(ProductMeasure {
            blocks,
            index_sets,
            eps_cutoff: spec.eps_cutoff,
        })
    }

    /// Convenience constructor with the default contiguous partition.
    pub fn from_blocks(blocks: Vec<BlockInput>, eps_cutoff: f64) -> Result<Self> {
        ProductMeasure::from_spec(&MeasureSpec {
            blocks,
            eps_cutoff,
            index_sets: None,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let spec: MeasureSpec = serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("invalid measure spec: {e}")))?;
        ProductMeasure::from_spec(&spec)
    }

    pub fn to_spec(&self) -> MeasureSpec {
        MeasureSpec {
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockInput {
                    n: b.n,
                    p: b.p,
                    potential: b.potential,
                })
                .collect(),
            eps_cutoff: self.eps_cutoff,
            index_sets: Some(self.index_sets.clone()),
        }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &BlockSpec {
        &self.blocks[k]
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn index_set(&self, k: usize) -> &[usize] {
        &self.index_sets[k]
    }

    pub fn eps_cutoff(&self) -> f64 {
        self.eps_cutoff
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }
}

fn contiguous_sets(blocks: &[BlockSpec]) -> Vec<Vec<usize>> {
    let mut offset = 0;
    blocks
        .iter()
        .map(|b| {
            let set = (offset..offset + b.n).collect();
            offset += b.n;
            set
        })
        .collect()
}

fn validate_partition(sets: &[Vec<usize>], blocks: &[BlockSpec], dim: usize) -> Result<()> {
    if sets.len() != blocks.len() {
        return Err(Error::Config(format!(
            "index_sets has {} sets for {} blocks",
            sets.len(),
            blocks.len()
        )));
    }
    for (k, (set, block)) in sets.iter().zip(blocks).enumerate() {
        if set.len() != block.n {
            return Err(Error::Config(format!(
                "index set {k} has {} indices, block dimension is {}",
                set.len(),
                block.n
            )));
        }
    }
    let mut seen = vec![false; dim];
    for &i in sets.iter().flatten() {
        if i >= dim {
            return Err(Error::Config(format!(
                "coordinate index {i} out of range for dimension {dim}"
            )));
        }
        if seen[i] {
            return Err(Error::Config(format!("coordinate index {i} appears twice")));
        }
        seen[i] = true;
    }
    Ok(())
}
