//! Seeded multi-chain execution.
//!
//! Chain `i` of a run with base seed `b` draws from ChaCha20 seeded with `b` on
//! stream `i`, so every chain's randomness is fixed by `(b, i)` alone and does
//! not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::diagnostics::ChainRecord;
use crate::noise::NoiseSource;
use crate::samplers::Kernel;
use crate::targets::{LatticeSpec, TargetModel};
use crate::{Real, Result, Vector};

pub fn chain_rng(base_seed: u64, chain: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(base_seed);
    rng.set_stream(chain as u64);
    rng
}

/// Uniformly random lattice point, one uniform per coordinate.
pub fn random_state<T: Real, N: NoiseSource + ?Sized>(lattice: &LatticeSpec<T>, noise: &mut N) -> Vector<T> {
    let k = lattice.k();
    let levels: Vec<usize> = (0..lattice.dim())
        .map(|_| ((noise.uniform() * k as f64) as usize).min(k - 1))
        .collect();
    lattice.point(&levels)
}

/// How chains are started.
#[derive(Debug, Clone)]
pub enum ChainStart<T: Real> {
    /// Uniformly random lattice point drawn from the chain's own stream.
    Random,
    /// The same point for every chain.
    Fixed(Vector<T>),
}

/// Runs one chain for `n_steps` transitions, recording the state after each.
pub fn run_chain<T, M>(
    kernel: &Kernel<T>,
    target: &M,
    start: &ChainStart<T>,
    n_steps: usize,
    base_seed: u64,
    chain: usize,
) -> Result<ChainRecord<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let mut rng = chain_rng(base_seed, chain);
    let s0 = match start {
        ChainStart::Random => random_state(target.lattice(), &mut rng),
        ChainStart::Fixed(s) => s.clone(),
    };
    let mut state = kernel.init_state(target, s0, &mut rng)?;
    let mut record = ChainRecord::for_target(target, base_seed, kernel.label());
    for _ in 0..n_steps {
        let out = kernel.step(target, &state, &mut rng)?;
        record.push(&out.next, out.accepted);
        state = out.next;
    }
    Ok(record)
}

/// Runs `n_chains` chains in parallel on the current rayon pool.
pub fn run_chains<T, M>(
    kernel: &Kernel<T>,
    target: &M,
    start: &ChainStart<T>,
    n_chains: usize,
    n_steps: usize,
    base_seed: u64,
) -> Result<Vec<ChainRecord<T>>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    (0..n_chains)
        .into_par_iter()
        .map(|c| run_chain(kernel, target, start, n_steps, base_seed, c))
        .collect()
}
