//! Block-diagonal empirical Fisher accumulation.
//!
//! Gradient samples are accumulated as per-block outer products; finalize
//! dampens and inverts each block. Blocks are sized to the pattern's group
//! width so every within-group correlation used by the saliency score
//! lives inside one block.

use crate::error::{Error, Result};
use crate::exec;
use crate::prune::spd::SymMatrix;

/// Dampening policy for the finalized Fisher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Damp {
    /// `lambda = factor * mean(diag)` of the accumulated Fisher. Falls back
    /// to `factor` itself when the accumulated diagonal is all zero.
    AutoScaled(f64),
    /// Absolute `lambda`.
    Fixed(f64),
}

impl Default for Damp {
    fn default() -> Self {
        Damp::AutoScaled(1e-4)
    }
}

/// Accumulates `sum g_b g_b^T` per diagonal block over gradient samples.
#[derive(Debug, Clone)]
pub struct FisherEstimator {
    width: usize,
    block_size: usize,
    damp: Damp,
    sample_count: usize,
    blocks: Vec<Vec<f64>>,
}

impl FisherEstimator {
    /// `width` is the flattened weight count; `block_size` must divide it.
    pub fn new(width: usize, block_size: usize, damp: Damp) -> Result<Self> {
        if width == 0 || block_size == 0 || width % block_size != 0 {
            return Err(Error::FisherShapeMismatch {
                context: format!("block size {block_size} does not divide width {width}"),
            });
        }
        let nblocks = width / block_size;
        Ok(Self {
            width,
            block_size,
            damp,
            sample_count: 0,
            blocks: vec![vec![0.0; block_size * block_size]; nblocks],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Adds one gradient sample. Callers must not interleave samples into
    /// one estimator concurrently; accumulation order is theirs to fix.
    pub fn add_sample(&mut self, grad: &[f32]) -> Result<()> {
        if grad.len() != self.width {
            return Err(Error::LengthMismatch {
                expected: self.width,
                got: grad.len(),
            });
        }
        let b = self.block_size;
        for (bi, block) in self.blocks.iter_mut().enumerate() {
            let g = &grad[bi * b..(bi + 1) * b];
            for i in 0..b {
                let gi = g[i] as f64;
                for j in 0..b {
                    block[i * b + j] += gi * g[j] as f64;
                }
            }
        }
        self.sample_count += 1;
        Ok(())
    }

    /// Dampens, averages and inverts every block:
    /// `(lambda I + (1/count) * sum g g^T)^-1`.
    pub fn finalize(&self) -> Result<FisherInverse> {
        if self.sample_count == 0 {
            return Err(Error::NoSamples);
        }
        let b = self.block_size;
        let scale = 1.0 / self.sample_count as f64;
        let lambda = match self.damp {
            Damp::Fixed(l) => l,
            Damp::AutoScaled(factor) => {
                let mut diag_sum = 0.0;
                for block in &self.blocks {
                    for i in 0..b {
                        diag_sum += block[i * b + i] * scale;
                    }
                }
                let mean = diag_sum / self.width as f64;
                if mean > 0.0 {
                    factor * mean
                } else {
                    factor
                }
            }
        };
        if lambda <= 0.0 {
            return Err(Error::SingularSubmatrix);
        }

        let inverses = exec::map_indexed(self.blocks.len(), |bi| {
            let block = &self.blocks[bi];
            let mut f = SymMatrix::zeros(b);
            for i in 0..b {
                for j in 0..b {
                    let mut x = block[i * b + j] * scale;
                    if i == j {
                        x += lambda;
                    }
                    *f.at_mut(i, j) = x;
                }
            }
            f.inverse_spd()
        });
        let blocks = inverses.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(FisherInverse {
            block_size: b,
            blocks,
        })
    }
}

/// Finalized inverse Fisher: one SPD inverse per diagonal block.
#[derive(Debug, Clone)]
pub struct FisherInverse {
    block_size: usize,
    blocks: Vec<SymMatrix>,
}

impl FisherInverse {
    /// Builds an inverse-Fisher directly from per-block inverse matrices.
    /// Handy for synthetic curvature in tests and sweeps.
    pub fn from_blocks(blocks: Vec<SymMatrix>) -> Result<Self> {
        let block_size = blocks.first().map(|b| b.dim()).unwrap_or(0);
        if block_size == 0 || blocks.iter().any(|b| b.dim() != block_size) {
            return Err(Error::FisherShapeMismatch {
                context: "blocks must be non-empty and uniformly sized".to_string(),
            });
        }
        Ok(Self { block_size, blocks })
    }

    /// Scaled-identity inverse Fisher, the magnitude-pruning degenerate case.
    pub fn scaled_identity(nblocks: usize, block_size: usize, scale: f64) -> Self {
        let mut block = SymMatrix::zeros(block_size);
        for i in 0..block_size {
            *block.at_mut(i, i) = scale;
        }
        Self {
            block_size,
            blocks: vec![block; nblocks],
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &SymMatrix {
        &self.blocks[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_bumps_count() {
        let mut est = FisherEstimator::new(4, 2, Damp::Fixed(1.0)).unwrap();
        est.add_sample(&[0.0; 4]).unwrap();
        assert_eq!(est.sample_count(), 1);
        assert!(est.blocks.iter().flatten().all(|&x| x == 0.0));
        // Dampened zero accumulation inverts to (1/lambda) I = I.
        let inv = est.finalize().unwrap();
        assert_eq!(inv.num_blocks(), 2);
        for b in 0..2 {
            assert_eq!(inv.block(b).data(), &[1.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn single_sample_outer_product() {
        let mut est = FisherEstimator::new(2, 2, Damp::Fixed(0.1)).unwrap();
        est.add_sample(&[1.0, 2.0]).unwrap();
        assert_eq!(est.blocks[0], vec![1.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn scalar_block_arithmetic() {
        // B=1, one sample g=[2], lambda=0.5: block = 0.5 + 4 = 4.5.
        let mut est = FisherEstimator::new(1, 1, Damp::Fixed(0.5)).unwrap();
        est.add_sample(&[2.0]).unwrap();
        let inv = est.finalize().unwrap();
        assert!((inv.block(0).at(0, 0) - 1.0 / 4.5).abs() < 1e-15);
    }

    #[test]
    fn accumulation_matches_dense_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (width, bsize, samples) = (12usize, 4usize, 10usize);
        let mut est = FisherEstimator::new(width, bsize, Damp::Fixed(1.0)).unwrap();
        let mut dense = vec![0.0f64; width * width];
        for _ in 0..samples {
            let g: Vec<f32> = (0..width).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            est.add_sample(&g).unwrap();
            for i in 0..width {
                for j in 0..width {
                    dense[i * width + j] += g[i] as f64 * g[j] as f64;
                }
            }
        }
        // Blocks must equal the dense outer-product sum restricted to the
        // block diagonal.
        for bi in 0..width / bsize {
            for i in 0..bsize {
                for j in 0..bsize {
                    let gi = bi * bsize + i;
                    let gj = bi * bsize + j;
                    assert_eq!(est.blocks[bi][i * bsize + j], dense[gi * width + gj]);
                }
            }
        }
    }

    #[test]
    fn errors() {
        assert!(FisherEstimator::new(5, 2, Damp::Fixed(1.0)).is_err());
        let mut est = FisherEstimator::new(4, 2, Damp::Fixed(1.0)).unwrap();
        assert!(matches!(
            est.add_sample(&[1.0; 3]),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        ));
        assert!(matches!(est.finalize(), Err(Error::NoSamples)));
    }
}
