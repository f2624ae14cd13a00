//! Named measure families used by the sweep experiments. Each family maps a
//! total dimension to a product measure; dimensions must respect the family's
//! block layout.

use crate::measure::{BlockInput, Potential, ProductMeasure};
use crate::{Error, Result};

/// Default coordinate cutoff of the sweep families.
pub const FAMILY_EPS_CUTOFF: f64 = 0.1;

fn block(n: usize, p: f64, gamma: f64, lambda: f64) -> BlockInput {
    BlockInput {
        n,
        p,
        potential: Potential { lambda, gamma },
    }
}

/// `d` one-dimensional Gaussian blocks.
pub fn gaussian_family(d: usize) -> Result<ProductMeasure> {
    ProductMeasure::from_blocks(vec![block(1, 2.0, 1.0, 0.5); d], FAMILY_EPS_CUTOFF)
}

/// `d` one-dimensional blocks just above the exponential cutoff.
pub fn exponential_family(d: usize) -> Result<ProductMeasure> {
    ProductMeasure::from_blocks(vec![block(1, 1.1, 1.0, 1.0); d], FAMILY_EPS_CUTOFF)
}

/// Four-dimensional blocks with norm exponent 1.5; `d` must be a multiple
/// of 4.
pub fn p15_family(d: usize) -> Result<ProductMeasure> {
    if d % 4 != 0 {
        return Err(Error::Config(format!("p15 family needs 4 | d, got {d}")));
    }
    ProductMeasure::from_blocks(vec![block(4, 1.5, 1.0, 1.0); d / 4], FAMILY_EPS_CUTOFF)
}

/// Cycles of four heterogeneous blocks spanning 8 coordinates; `d` must be a
/// multiple of 8.
pub fn mixed_family(d: usize) -> Result<ProductMeasure> {
    if d % 8 != 0 {
        return Err(Error::Config(format!("mixed family needs 8 | d, got {d}")));
    }
    let cycle = [
        block(1, 2.0, 1.0, 0.5),
        block(2, 1.5, 1.0, 1.0),
        block(4, 3.0, 1.0, 1.0),
        block(1, 1.1, 1.0, 1.0),
    ];
    let blocks: Vec<BlockInput> = std::iter::repeat_with(|| cycle.iter().copied())
        .take(d / 8)
        .flatten()
        .collect();
    ProductMeasure::from_blocks(blocks, FAMILY_EPS_CUTOFF)
}

/// One flat high-exponent block; used to exhibit stalled distance growth.
pub fn p32_family(d: usize) -> Result<ProductMeasure> {
    ProductMeasure::from_blocks(vec![block(d, 32.0, 1.0, 1.0)], FAMILY_EPS_CUTOFF)
}

/// Names accepted by [`family_by_name`], in sweep order.
pub const FAMILY_NAMES: [&str; 4] = ["gaussian", "exponential", "p15", "mixed"];

pub fn family_by_name(name: &str, d: usize) -> Result<ProductMeasure> {
    match name {
        "gaussian" => gaussian_family(d),
        "exponential" => exponential_family(d),
        "p15" => p15_family(d),
        "mixed" => mixed_family(d),
        "p32" => p32_family(d),
        other => Err(Error::Config(format!(
            "unknown family {other:?}; known: gaussian, exponential, p15, mixed, p32"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_build_at_sweep_dimensions_and_are_isotropic() {
        for d in [32, 64, 128] {
            for name in FAMILY_NAMES {
                let measure = family_by_name(name, d).unwrap();
                assert_eq!(measure.dim(), d, "{name} at {d}");
                for b in measure.blocks() {
                    let second = b.coord_norm(2.0);
                    assert!(
                        (second - 1.0).abs() < 1e-10,
                        "{name}: coordinate second moment {second}"
                    );
                }
            }
        }
    }

    #[test]
    fn misaligned_dimensions_are_rejected() {
        assert!(p15_family(30).is_err());
        assert!(mixed_family(28).is_err());
        assert!(family_by_name("unknown", 32).is_err());
    }

    #[test]
    fn mixed_family_cycles_its_blocks() {
        let measure = mixed_family(16).unwrap();
        assert_eq!(measure.n_blocks(), 8);
        let ps: Vec<f64> = measure.blocks().iter().map(|b| b.p).collect();
        assert_eq!(ps, vec![2.0, 1.5, 3.0, 1.1, 2.0, 1.5, 3.0, 1.1]);
    }
}
