//! Transition kernels.
//!
//! Every kernel consumes randomness in a fixed order per step: momentum or
//! auxiliary normals first (`d` of them, none for Metropolis and none for
//! PDHAMS at `ε = 1`), then proposal uniforms in ascending coordinate order
//! (one per coordinate, two for the over-relaxed kernel), then one acceptance
//! uniform. The Gibbs kernel draws the acceptance uniform too, so all kernels
//! stay aligned on a shared stream.

mod gibbs;
mod metropolis;
mod pavg;
mod pdhams;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::noise::NoiseSource;
use crate::precondition::Preconditioner;
use crate::targets::TargetModel;
use crate::{Error, Real, Result, Vector};

pub use pavg::PavgTransition;
pub use pdhams::PdhamsTransition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gibbs,
    Pavg,
    Vpdhams,
    Opdhams,
    Metropolis,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gibbs => "gibbs",
            KernelKind::Pavg => "pavg",
            KernelKind::Vpdhams => "vpdhams",
            KernelKind::Opdhams => "opdhams",
            KernelKind::Metropolis => "metropolis",
        }
    }

    pub fn uses_momentum(self) -> bool {
        matches!(self, KernelKind::Vpdhams | KernelKind::Opdhams)
    }

    pub fn needs_preconditioner(self) -> bool {
        self != KernelKind::Metropolis
    }
}

/// Tuning parameters; each kernel reads only the fields it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Auto-regression weight of the momentum refresh.
    pub epsilon: f64,
    /// Stepsize feeding the λ-shift.
    pub delta: f64,
    /// Gradient correction weight in the momentum update.
    pub phi: f64,
    /// Over-relaxation parameter.
    pub beta: f64,
    /// Metropolis proposal radius in lattice-index units.
    pub r: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            epsilon: 0.9,
            delta: 0.1,
            phi: 0.0,
            beta: 0.1,
            r: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta {} must be positive", self.delta)));
        }
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return Err(Error::invalid(format!("phi {} must be non-negative", self.phi)));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        if self.r == 0 {
            return Err(Error::invalid("metropolis radius must be at least 1"));
        }
        Ok(())
    }
}

/// Lattice point, optional transformed momentum, and cached `f(s)`, `∇f(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T: Real> {
    s: Vector<T>,
    v: Option<Vector<T>>,
    levels: Vec<usize>,
    energy: T,
    grad: Vector<T>,
}

impl<T: Real> ChainState<T> {
    pub fn new<M: TargetModel<T> + ?Sized>(target: &M, s: Vector<T>, v: Option<Vector<T>>) -> Result<Self> {
        let levels = target.lattice().indices_of(&s)?;
        Self::from_levels(target, levels, v)
    }

    pub fn from_levels<M: TargetModel<T> + ?Sized>(
        target: &M,
        levels: Vec<usize>,
        v: Option<Vector<T>>,
    ) -> Result<Self> {
        let d = target.dim();
        if levels.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: levels.len() });
        }
        if let Some(v) = &v {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        let s = target.lattice().point(&levels);
        let energy = target.log_density(&s);
        let grad = target.grad_log_density(&s);
        if !Real::is_finite(energy) || grad.iter().any(|g| !Real::is_finite(*g)) {
            return Err(Error::NonFinite("target evaluation".into()));
        }
        Ok(ChainState { s, v, levels, energy, grad })
    }

    pub fn s(&self) -> &Vector<T> {
        &self.s
    }

    pub fn v(&self) -> Option<&Vector<T>> {
        self.v.as_ref()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// `f(s)`.
    pub fn energy(&self) -> T {
        self.energy
    }

    /// `∇f(s)`.
    pub fn grad(&self) -> &Vector<T> {
        &self.grad
    }

    pub fn with_momentum(mut self, v: Option<Vector<T>>) -> Self {
        self.v = v;
        self
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome<T: Real> {
    pub next: ChainState<T>,
    pub accepted: bool,
    /// Log Metropolis–Hastings ratio before truncation at zero.
    pub log_accept_ratio: T,
    /// The proposed lattice point.
    pub proposal: Vector<T>,
}

/// `v₀ = (Lᵀ)⁻¹ Z`, a draw from `N(0, (W + λI)⁻¹)`.
pub fn momentum_init<T: Real, N: NoiseSource + ?Sized>(pre: &Preconditioner<T>, noise: &mut N) -> Vector<T> {
    pre.l_inv_t() * standard_normal(pre.dim(), noise)
}

pub(crate) fn standard_normal<T: Real, N: NoiseSource + ?Sized>(d: usize, noise: &mut N) -> Vector<T> {
    Vector::from_iterator(d, (0..d).map(|_| T::lit(noise.gaussian())))
}

/// Metropolis–Hastings decision on one uniform. `Δ = −∞` always rejects; NaN and `+∞` are errors.
pub(crate) fn mh_accept<T: Real, N: NoiseSource + ?Sized>(log_ratio: T, noise: &mut N) -> Result<bool> {
    if log_ratio.is_nan() || log_ratio == T::infinity() {
        return Err(Error::NonFinite(format!("log acceptance ratio {log_ratio}")));
    }
    let u = noise.uniform();
    Ok(log_ratio >= T::zero() || u.ln() < log_ratio.as_f64())
}

/// A configured transition kernel. Immutable; cheap to clone and share across chains.
#[derive(Debug, Clone)]
pub struct Kernel<T: Real> {
    kind: KernelKind,
    pre: Option<Arc<Preconditioner<T>>>,
    config: SamplerConfig,
    first_order: bool,
}

impl<T: Real> Kernel<T> {
    pub fn new(kind: KernelKind, pre: Option<Preconditioner<T>>, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        if kind.needs_preconditioner() && pre.is_none() {
            return Err(Error::invalid(format!("{} needs a preconditioner", kind.name())));
        }
        Ok(Kernel {
            kind,
            pre: pre.map(Arc::new),
            config,
            first_order: false,
        })
    }

    pub fn gibbs(pre: Preconditioner<T>) -> Self {
        Self::build(KernelKind::Gibbs, Some(pre), SamplerConfig::default())
    }

    pub fn pavg(pre: Preconditioner<T>) -> Self {
        Self::build(KernelKind::Pavg, Some(pre), SamplerConfig::default())
    }

    /// Panics if `config` is invalid; use [`Kernel::new`] to get an error instead.
    pub fn vpdhams(pre: Preconditioner<T>, config: SamplerConfig) -> Self {
        Self::build(KernelKind::Vpdhams, Some(pre), config)
    }

    /// Panics if `config` is invalid; use [`Kernel::new`] to get an error instead.
    pub fn opdhams(pre: Preconditioner<T>, config: SamplerConfig) -> Self {
        Self::build(KernelKind::Opdhams, Some(pre), config)
    }

    /// Panics if `config` is invalid; use [`Kernel::new`] to get an error instead.
    pub fn metropolis(config: SamplerConfig) -> Self {
        Self::build(KernelKind::Metropolis, None, config)
    }

    fn build(kind: KernelKind, pre: Option<Preconditioner<T>>, config: SamplerConfig) -> Self {
        Self::new(kind, pre, config).expect("valid sampler configuration")
    }

    /// The kernel with `W = 0`, `λ = δ`, `L = √δ I` (`δ = config.delta`).
    pub fn first_order_specialize(kind: KernelKind, d: usize, config: SamplerConfig) -> Result<Self> {
        if !matches!(kind, KernelKind::Pavg | KernelKind::Vpdhams | KernelKind::Opdhams) {
            return Err(Error::invalid(format!(
                "{} has no first-order specialization",
                kind.name()
            )));
        }
        config.validate()?;
        let pre = Preconditioner::first_order(d, T::lit(config.delta))?;
        let mut kernel = Self::new(kind, Some(pre), config)?;
        kernel.first_order = true;
        Ok(kernel)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn preconditioner(&self) -> Option<&Preconditioner<T>> {
        self.pre.as_deref()
    }

    pub fn is_first_order(&self) -> bool {
        self.first_order
    }

    /// Identifier used in outputs, e.g. `vpdhams` or `vpdhams_first_order`.
    pub fn label(&self) -> String {
        if self.first_order {
            format!("{}_first_order", self.kind.name())
        } else {
            self.kind.name().to_string()
        }
    }

    fn pre(&self) -> &Preconditioner<T> {
        self.pre.as_deref().expect("kernel built with a preconditioner")
    }

    fn check_dims<M: TargetModel<T> + ?Sized>(&self, target: &M) -> Result<()> {
        if let Some(pre) = &self.pre {
            if pre.dim() != target.dim() {
                return Err(Error::DimensionMismatch { expected: target.dim(), got: pre.dim() });
            }
        }
        Ok(())
    }

    /// Chain start at `s0`; PDHAMS kernels draw the initial momentum with [`momentum_init`].
    pub fn init_state<M, N>(&self, target: &M, s0: Vector<T>, noise: &mut N) -> Result<ChainState<T>>
    where
        M: TargetModel<T> + ?Sized,
        N: NoiseSource + ?Sized,
    {
        self.check_dims(target)?;
        let v = if self.kind.uses_momentum() {
            Some(momentum_init(self.pre(), noise))
        } else {
            None
        };
        ChainState::new(target, s0, v)
    }

    pub fn step<M, N>(&self, target: &M, state: &ChainState<T>, noise: &mut N) -> Result<StepOutcome<T>>
    where
        M: TargetModel<T> + ?Sized,
        N: NoiseSource + ?Sized,
    {
        self.check_dims(target)?;
        match self.kind {
            KernelKind::Gibbs => gibbs::step(target, self.pre(), state, noise),
            KernelKind::Pavg => pavg::step(target, self.pre(), state, noise),
            KernelKind::Vpdhams => pdhams::step(target, self.pre(), &self.config, false, state, noise),
            KernelKind::Opdhams => pdhams::step(target, self.pre(), &self.config, true, state, noise),
            KernelKind::Metropolis => metropolis::step(target, self.config.r, state, noise),
        }
    }

    /// Closed-form PAVG quantities for moving from `state` to `s_star` through auxiliary `z`.
    pub fn pavg_transition<M: TargetModel<T> + ?Sized>(
        &self,
        target: &M,
        state: &ChainState<T>,
        z: &Vector<T>,
        s_star: &[usize],
    ) -> Result<PavgTransition<T>> {
        self.check_dims(target)?;
        pavg::transition(target, self.pre(), state, z, s_star)
    }

    /// Closed-form PDHAMS quantities for moving from `state` with intermediate momentum
    /// `v_half` to `s_star`. Uses over-relaxed proposal probabilities for O-PDHAMS.
    pub fn pdhams_transition<M: TargetModel<T> + ?Sized>(
        &self,
        target: &M,
        state: &ChainState<T>,
        v_half: &Vector<T>,
        s_star: &[usize],
    ) -> Result<PdhamsTransition<T>> {
        self.check_dims(target)?;
        if !self.kind.uses_momentum() {
            return Err(Error::Contract(format!("{} carries no momentum", self.kind.name())));
        }
        pdhams::transition(
            target,
            self.pre(),
            &self.config,
            self.kind == KernelKind::Opdhams,
            state,
            v_half,
            s_star,
        )
    }

    /// `log π(s, v) = f(s) − ½ vᵀ(W + λI)v` up to a constant.
    pub fn joint_log_density(&self, state: &ChainState<T>, v: &Vector<T>) -> T {
        state.energy() - T::lit(0.5) * self.pre().kinetic(v)
    }
}
