//! Randomness consumed by the transition kernels.
//!
//! Kernels draw through [`NoiseSource`] rather than a raw RNG so that tests can
//! replay or transform the exact variates one kernel consumed and feed them to
//! another (shared-randomness equivalence checks). Every `RngCore` is a noise
//! source; [`Tape`] records and replays.

use std::collections::VecDeque;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

pub trait NoiseSource {
    /// One standard normal variate.
    fn gaussian(&mut self) -> f64;

    /// One uniform variate on `[0, 1)`.
    fn uniform(&mut self) -> f64;

    fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }
}

impl<R: RngCore + ?Sized> NoiseSource for R {
    fn gaussian(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}

/// Recorded variates, replayed in the order they were pushed.
///
/// Gaussians and uniforms live on separate queues, so two kernels that consume
/// the same counts of each (in any interleaving) see identical values.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    gaussians: VecDeque<f64>,
    uniforms: VecDeque<f64>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(gaussians: Vec<f64>, uniforms: Vec<f64>) -> Self {
        Tape {
            gaussians: gaussians.into(),
            uniforms: uniforms.into(),
        }
    }

    /// Draws `n_gauss` normals and `n_unif` uniforms from `source` into a fresh tape.
    pub fn record<N: NoiseSource + ?Sized>(source: &mut N, n_gauss: usize, n_unif: usize) -> Self {
        let gaussians = (0..n_gauss).map(|_| source.gaussian()).collect();
        let uniforms = (0..n_unif).map(|_| source.uniform()).collect();
        Tape { gaussians, uniforms }
    }

    pub fn gaussians(&self) -> impl Iterator<Item = &f64> {
        self.gaussians.iter()
    }

    pub fn uniforms(&self) -> impl Iterator<Item = &f64> {
        self.uniforms.iter()
    }

    pub fn remaining(&self) -> (usize, usize) {
        (self.gaussians.len(), self.uniforms.len())
    }
}

impl NoiseSource for Tape {
    fn gaussian(&mut self) -> f64 {
        self.gaussians.pop_front().expect("tape ran out of gaussian variates")
    }

    fn uniform(&mut self) -> f64 {
        self.uniforms.pop_front().expect("tape ran out of uniform variates")
    }
}
