use super::{mh_accept, ChainState, StepOutcome};
use crate::noise::NoiseSource;
use crate::targets::TargetModel;
use crate::{Real, Result};

/// Index window `[lo, hi]` of radius `r` around `c`, clipped to `0..k`.
fn window(c: usize, r: usize, k: usize) -> (usize, usize) {
    (c.saturating_sub(r), (c + r).min(k - 1))
}

/// Random-walk Metropolis with per-coordinate uniform moves within index distance `r`.
pub(super) fn step<T, M, N>(target: &M, r: usize, state: &ChainState<T>, noise: &mut N) -> Result<StepOutcome<T>>
where
    T: Real,
    M: TargetModel<T> + ?Sized,
    N: NoiseSource + ?Sized,
{
    let k = target.lattice().k();
    let mut log_q_correction = 0.0;
    let levels: Vec<usize> = state
        .levels()
        .iter()
        .map(|&c| {
            let (lo, hi) = window(c, r, k);
            let n = hi - lo + 1;
            let pick = (lo + (noise.uniform() * n as f64) as usize).min(hi);
            let (lo2, hi2) = window(pick, r, k);
            log_q_correction += (n as f64).ln() - ((hi2 - lo2 + 1) as f64).ln();
            pick
        })
        .collect();
    let proposal = ChainState::from_levels(target, levels, None)?;
    let log_accept_ratio = proposal.energy() - state.energy() + T::lit(log_q_correction);
    let accepted = mh_accept(log_accept_ratio, noise)?;
    let proposed = proposal.s().clone();
    Ok(StepOutcome {
        next: if accepted { proposal } else { state.clone() },
        accepted,
        log_accept_ratio,
        proposal: proposed,
    })
}
