//! Deterministic random sampling.
//!
//! Every stochastic routine in the crate draws from [`DeterministicSampler`],
//! which wraps a counter-based stream cipher generator and derives floats by
//! fixed bit manipulation. Two runs with the same seed produce bitwise
//! identical samples on any platform, which is what makes report output
//! reproducible byte for byte.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Seeded random source with reproducible float derivation.
///
/// Uniforms take the top 53 bits of a 64-bit draw; normals use the
/// trigonometric Box-Muller transform. Both choices are pinned so the
/// stream can be reproduced outside this crate if ever needed.
pub struct DeterministicSampler {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl DeterministicSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 high bits scaled by 2^-53: the standard dyadic uniform.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via trigonometric Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // Guard the logarithm away from u1 = 0.
        let u1 = loop {
            let u = self.uniform();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Vector of independent standard normals.
    pub fn gaussian_vector(&mut self, dim: usize) -> Result<DVector<f64>> {
        if dim == 0 {
            return Err(Error::InvalidInput("gaussian vector of dimension 0".into()));
        }
        Ok(DVector::from_fn(dim, |_, _| self.normal()))
    }

    /// Uniformly distributed unit vector (normalized Gaussian).
    pub fn unit_vector(&mut self, dim: usize) -> Result<DVector<f64>> {
        loop {
            let v = self.gaussian_vector(dim)?;
            let norm = v.norm();
            if norm > 1e-8 {
                return Ok(v / norm);
            }
        }
    }
}
