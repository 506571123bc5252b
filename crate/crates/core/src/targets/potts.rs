use std::f64::consts::PI;

use super::{LatticeSpec, TargetModel};
use crate::{Error, Real, Result, Vector};

/// q-state clock model on a periodic `side × side` square lattice:
/// `f(s) = J Σ_⟨i,j⟩ cos(θ_i - θ_j)`, `θ_i = 2π s_i / q`.
///
/// Edges are the right and down neighbor of every site, so there are `2·side²`
/// of them; on a `2 × 2` torus each neighboring pair therefore appears twice.
#[derive(Debug, Clone)]
pub struct ClockPotts<T: Real> {
    lattice: LatticeSpec<T>,
    side: usize,
    q: usize,
    coupling: T,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<[usize; 4]>,
}

pub fn clock_potts<T: Real>(side: usize, q: usize, coupling: T) -> Result<ClockPotts<T>> {
    if side < 2 {
        return Err(Error::invalid("side must be at least 2"));
    }
    if q < 2 {
        return Err(Error::invalid("q must be at least 2"));
    }
    let d = side * side;
    let site = |r: usize, c: usize| (r % side) * side + (c % side);
    let mut edges = Vec::with_capacity(2 * d);
    let mut neighbors = Vec::with_capacity(d);
    for r in 0..side {
        for c in 0..side {
            let i = site(r, c);
            edges.push((i, site(r, c + 1)));
            edges.push((i, site(r + 1, c)));
            neighbors.push([
                site(r, c + 1),
                site(r + 1, c),
                site(r, c + side - 1),
                site(r + side - 1, c),
            ]);
        }
    }
    Ok(ClockPotts {
        lattice: LatticeSpec::spins(d, q)?,
        side,
        q,
        coupling,
        edges,
        neighbors,
    })
}

impl<T: Real> ClockPotts<T> {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn coupling(&self) -> T {
        self.coupling
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    fn angle_scale(&self) -> T {
        T::lit(2.0 * PI / self.q as f64)
    }
}

impl<T: Real> TargetModel<T> for ClockPotts<T> {
    fn lattice(&self) -> &LatticeSpec<T> {
        &self.lattice
    }

    fn log_density(&self, s: &Vector<T>) -> T {
        let a = self.angle_scale();
        let sum = self
            .edges
            .iter()
            .fold(T::zero(), |acc, &(i, j)| acc + (a * (s[i] - s[j])).cos());
        self.coupling * sum
    }

    fn grad_log_density(&self, s: &Vector<T>) -> Vector<T> {
        let a = self.angle_scale();
        Vector::from_fn(s.len(), |i, _| {
            let sines = self.neighbors[i]
                .iter()
                .fold(T::zero(), |acc, &j| acc + (a * (s[i] - s[j])).sin());
            -self.coupling * a * sines
        })
    }

    fn name(&self) -> &'static str {
        "clock_potts"
    }
}
