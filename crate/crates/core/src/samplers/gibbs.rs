use super::{standard_normal, ChainState, StepOutcome};
use crate::noise::NoiseSource;
use crate::precondition::Preconditioner;
use crate::proposals::{proposal_from_bracket, sample_product};
use crate::targets::TargetModel;
use crate::{Error, Real, Result};

/// Gaussian-integral-trick Gibbs sweep for a quadratic target whose matrix is `pre.w()`.
pub(super) fn step<T, M, N>(
    target: &M,
    pre: &Preconditioner<T>,
    state: &ChainState<T>,
    noise: &mut N,
) -> Result<StepOutcome<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
    N: NoiseSource + ?Sized,
{
    let quad = target
        .quadratic()
        .ok_or_else(|| Error::Contract(format!("{} is not quadratic", target.name())))?;
    let scale = quad.w.amax() + T::one();
    if (&quad.w - pre.w()).amax() > T::lit(1e-10) * scale {
        return Err(Error::Contract("preconditioner W differs from the target's quadratic matrix".into()));
    }
    let d = target.dim();
    let z = state.s() + pre.l_inv_t() * standard_normal(d, noise);
    let bracket = &quad.b + pre.precision() * z;
    let q = proposal_from_bracket(&bracket, pre.lambda(), target.lattice().values())?;
    let levels = sample_product(&q, noise);
    noise.uniform();
    let next = ChainState::from_levels(target, levels, None)?;
    Ok(StepOutcome {
        proposal: next.s().clone(),
        next,
        accepted: true,
        log_accept_ratio: T::zero(),
    })
}
