//! Discrete gradient-based MCMC with second-order preconditioning.
//!
//! The crate implements the preconditioned auxiliary-variable gradient sampler
//! (PAVG), the vanilla and over-relaxed preconditioned discrete Hamiltonian-assisted
//! Metropolis samplers (V-PDHAMS, O-PDHAMS), the Gaussian-integral-trick Gibbs
//! sampler and a random-walk Metropolis baseline, together with:
//!
//! - benchmark targets on homogeneous lattices ([`targets`]),
//! - calibration of the preconditioning triple `(W, D = λI, L)` ([`precondition`]),
//! - product categorical proposals and discrete over-relaxation ([`proposals`]),
//! - convergence diagnostics ([`diagnostics`]) and parameter tuning ([`tuning`]).
//!
//! All numerical code is generic over the scalar type through the [`Real`] trait;
//! `f64` aliases are provided at the crate root for the common case.
//!
//! ```
//! use pdhams::targets::{self, TargetModel};
//! use pdhams::{precondition, samplers};
//! use rand::SeedableRng;
//!
//! let target = targets::discrete_gaussian::<f64>(4, 5, 5.0, 0.9).unwrap();
//! let quad = target.quadratic().unwrap();
//! let lambda = precondition::lambda_shift(&quad.w, 0.1);
//! let pre = precondition::factorize(&quad.w, lambda, 100.0).unwrap();
//! let kernel = samplers::Kernel::vpdhams(pre, samplers::SamplerConfig::default());
//!
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
//! let mut state = kernel.init_state(&target, vec![0.0; 4].into(), &mut rng).unwrap();
//! for _ in 0..10 {
//!     let out = kernel.step(&target, &state, &mut rng).unwrap();
//!     assert!(out.log_accept_ratio.abs() < 1e-8);
//!     state = out.next;
//! }
//! ```

pub mod chains;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod precondition;
pub mod proposals;
pub mod samplers;
pub mod scalar;
pub mod targets;
pub mod tuning;

pub use error::{Error, Result};
pub use noise::{NoiseSource, Tape};
pub use scalar::Real;

/// Lattice point or real vector.
pub type Vector<T> = nalgebra::DVector<T>;
/// Dense square matrix.
pub type Matrix<T> = nalgebra::DMatrix<T>;

pub type Lattice64 = targets::LatticeSpec<f64>;
pub type QuadraticTarget64 = targets::QuadraticTarget<f64>;
pub type Preconditioner64 = precondition::Preconditioner<f64>;
pub type CalibrationSample64 = precondition::CalibrationSample<f64>;
pub type ProductCategorical64 = proposals::ProductCategorical<f64>;
pub type ChainState64 = samplers::ChainState<f64>;
pub type StepOutcome64 = samplers::StepOutcome<f64>;
pub type Kernel64 = samplers::Kernel<f64>;
pub type ChainRecord64 = diagnostics::ChainRecord<f64>;
pub type Pmf64 = targets::Pmf<f64>;
