use super::{mh_accept, standard_normal, ChainState, StepOutcome};
use crate::noise::NoiseSource;
use crate::precondition::Preconditioner;
use crate::proposals::{build_proposal, sample_product};
use crate::targets::TargetModel;
use crate::{Real, Result, Vector};

/// Quantities entering the PAVG acceptance ratio.
#[derive(Debug, Clone)]
pub struct PavgTransition<T: Real> {
    pub proposal: ChainState<T>,
    /// `log Q(s* | z; s)`.
    pub log_forward: T,
    /// `log Q(s | z; s*)`.
    pub log_backward: T,
    pub log_accept_ratio: T,
}

pub(super) fn transition<T, M>(
    target: &M,
    pre: &Preconditioner<T>,
    state: &ChainState<T>,
    z: &Vector<T>,
    s_star: &[usize],
) -> Result<PavgTransition<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let values = target.lattice().values();
    let fwd = build_proposal(state.grad(), state.s(), z, pre, values)?;
    let log_forward = fwd.log_prob(s_star);
    evaluate(target, pre, state, z, s_star.to_vec(), log_forward)
}

fn evaluate<T, M>(
    target: &M,
    pre: &Preconditioner<T>,
    state: &ChainState<T>,
    z: &Vector<T>,
    s_star: Vec<usize>,
    log_forward: T,
) -> Result<PavgTransition<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let proposal = ChainState::from_levels(target, s_star, None)?;
    let bwd = build_proposal(proposal.grad(), proposal.s(), z, pre, target.lattice().values())?;
    let log_backward = bwd.log_prob(state.levels());
    let half = T::lit(0.5);
    let log_accept_ratio = proposal.energy() - state.energy() - half * pre.kinetic(&(z - proposal.s()))
        + half * pre.kinetic(&(z - state.s()))
        + log_backward
        - log_forward;
    Ok(PavgTransition {
        proposal,
        log_forward,
        log_backward,
        log_accept_ratio,
    })
}

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
    let z = state.s() + pre.l_inv_t() * standard_normal(target.dim(), noise);
    let fwd = build_proposal(state.grad(), state.s(), &z, pre, target.lattice().values())?;
    let s_star = sample_product(&fwd, noise);
    let log_forward = fwd.log_prob(&s_star);
    let tr = evaluate(target, pre, state, &z, s_star, log_forward)?;
    let accepted = mh_accept(tr.log_accept_ratio, noise)?;
    let proposal = tr.proposal.s().clone();
    let next = if accepted { tr.proposal } else { state.clone() };
    Ok(StepOutcome {
        next,
        accepted,
        log_accept_ratio: tr.log_accept_ratio,
        proposal,
    })
}
