use super::{mh_accept, standard_normal, ChainState, SamplerConfig, StepOutcome};
use crate::noise::NoiseSource;
use crate::precondition::Preconditioner;
use crate::proposals::{build_proposal, over_relax, over_relax_log_prob, sample_product, ProductCategorical};
use crate::targets::TargetModel;
use crate::{Error, Real, Result, Vector};

/// Quantities entering the PDHAMS acceptance ratio for one proposal.
#[derive(Debug, Clone)]
pub struct PdhamsTransition<T: Real> {
    pub proposal: ChainState<T>,
    /// `v* = −v_half + s − s* + φ(∇f(s*) − ∇f(s) + W(s − s*))`.
    pub v_star: Vector<T>,
    /// Log probability of proposing `s*` from `(s, v_half)`.
    pub log_forward: T,
    /// Log probability of proposing `s` from `(s*, v*)`.
    pub log_backward: T,
    pub log_accept_ratio: T,
}

fn over_relaxed_log_prob<T: Real>(q: &ProductCategorical<T>, from: &[usize], to: &[usize], beta: f64) -> Result<T> {
    let mut total = 0.0;
    for i in 0..from.len() {
        total += over_relax_log_prob(from[i], to[i], &q.row_pmf(i), beta)?;
    }
    Ok(T::lit(total))
}

fn forward_proposal<T, M>(target: &M, pre: &Preconditioner<T>, state: &ChainState<T>, v_half: &Vector<T>) -> Result<ProductCategorical<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let z = state.s() - v_half;
    build_proposal(state.grad(), state.s(), &z, pre, target.lattice().values())
}

pub(super) fn transition<T, M>(
    target: &M,
    pre: &Preconditioner<T>,
    config: &SamplerConfig,
    over_relaxed: bool,
    state: &ChainState<T>,
    v_half: &Vector<T>,
    s_star: &[usize],
) -> Result<PdhamsTransition<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let fwd = forward_proposal(target, pre, state, v_half)?;
    let log_forward = if over_relaxed {
        over_relaxed_log_prob(&fwd, state.levels(), s_star, config.beta)?
    } else {
        fwd.log_prob(s_star)
    };
    evaluate(target, pre, config, over_relaxed, state, v_half, s_star.to_vec(), log_forward)
}

#[allow(clippy::too_many_arguments)]
fn evaluate<T, M>(
    target: &M,
    pre: &Preconditioner<T>,
    config: &SamplerConfig,
    over_relaxed: bool,
    state: &ChainState<T>,
    v_half: &Vector<T>,
    s_star: Vec<usize>,
    log_forward: T,
) -> Result<PdhamsTransition<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
{
    let proposal = ChainState::from_levels(target, s_star, None)?;
    let ds = state.s() - proposal.s();
    let mut v_star = &ds - v_half;
    if config.phi != 0.0 {
        let correction = proposal.grad() - state.grad() + pre.w() * &ds;
        v_star += correction * T::lit(config.phi);
    }
    let z_back = proposal.s() + &v_star;
    let bwd = build_proposal(proposal.grad(), proposal.s(), &z_back, pre, target.lattice().values())?;
    let log_backward = if over_relaxed {
        over_relaxed_log_prob(&bwd, proposal.levels(), state.levels(), config.beta)?
    } else {
        bwd.log_prob(state.levels())
    };
    let half = T::lit(0.5);
    // a realized move of computed probability zero sits on a level boundary; rejecting it
    // changes the kernel only on a null set
    let log_accept_ratio = if log_forward == T::neg_infinity() {
        T::neg_infinity()
    } else {
        proposal.energy() - state.energy() - half * pre.kinetic(&v_star) + half * pre.kinetic(v_half) + log_backward
            - log_forward
    };
    Ok(PdhamsTransition {
        proposal,
        v_star,
        log_forward,
        log_backward,
        log_accept_ratio,
    })
}

pub(super) fn step<T, M, N>(
    target: &M,
    pre: &Preconditioner<T>,
    config: &SamplerConfig,
    over_relaxed: bool,
    state: &ChainState<T>,
    noise: &mut N,
) -> Result<StepOutcome<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
    N: NoiseSource + ?Sized,
{
    let v = state
        .v()
        .ok_or_else(|| Error::Contract("PDHAMS state has no momentum".into()))?;
    let v_half = if config.epsilon == 1.0 {
        v.clone()
    } else {
        let eps = T::lit(config.epsilon);
        let refresh = T::lit((1.0 - config.epsilon * config.epsilon).sqrt());
        v * eps + pre.l_inv_t() * standard_normal(target.dim(), noise) * refresh
    };

    let fwd = forward_proposal(target, pre, state, &v_half)?;
    let (s_star, log_forward) = if over_relaxed {
        let mut levels = Vec::with_capacity(target.dim());
        let mut total = 0.0;
        for (i, &x0) in state.levels().iter().enumerate() {
            let (x1, lp) = over_relax(x0, &fwd.row_pmf(i), config.beta, noise)?;
            levels.push(x1);
            total += lp;
        }
        (levels, T::lit(total))
    } else {
        let levels = sample_product(&fwd, noise);
        let lp = fwd.log_prob(&levels);
        (levels, lp)
    };

    let tr = evaluate(target, pre, config, over_relaxed, state, &v_half, s_star, log_forward)?;
    let accepted = mh_accept(tr.log_accept_ratio, noise)?;
    let proposal = tr.proposal.s().clone();
    let next = if accepted {
        tr.proposal.with_momentum(Some(tr.v_star))
    } else {
        state.clone().with_momentum(Some(-v_half))
    };
    Ok(StepOutcome {
        next,
        accepted,
        log_accept_ratio: tr.log_accept_ratio,
        proposal,
    })
}
