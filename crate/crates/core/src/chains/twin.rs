//! Same-randomness coupling of two copies of a chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::asep::{asep_step_in_place, left_order_leq_unchecked, AsepState};
use super::at::{at_step_in_place, restricted_at_step_in_place};
use super::blocks::{block_step, BlockDraw, BlockDynamics};
use super::rng::UpdateDraw;
use crate::error::{contract, Error, Result};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// A chain on permutations driven by explicit draws.
pub trait Dynamics {
    type Draw;

    fn n(&self) -> usize;

    fn draw<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> Self::Draw;

    fn apply(&self, sigma: &mut Permutation, draw: &Self::Draw) -> Result<()>;

    /// Whether `sigma` is a valid state of the chain.
    fn admits(&self, sigma: &Permutation) -> bool {
        sigma.n() == self.n()
    }
}

fn edge_draw<R: Rng + ?Sized>(n: usize, t: u64, rng: &mut R) -> UpdateDraw {
    UpdateDraw {
        edge: rng.random_range(1..n),
        u: rng.random(),
        t,
    }
}

/// The unrestricted adjacent-transposition chain.
#[derive(Clone, Copy, Debug)]
pub struct AtChain<'a> {
    pub p: &'a BiasMatrix,
}

impl Dynamics for AtChain<'_> {
    type Draw = UpdateDraw;

    fn n(&self) -> usize {
        self.p.n()
    }

    fn draw<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> UpdateDraw {
        edge_draw(self.n(), t, rng)
    }

    fn apply(&self, sigma: &mut Permutation, draw: &UpdateDraw) -> Result<()> {
        at_step_in_place(sigma, self.p, draw);
        Ok(())
    }
}

/// The chain restricted to localized permutations.
#[derive(Clone, Copy, Debug)]
pub struct RestrictedAtChain<'a> {
    pub p: &'a BiasMatrix,
    pub ell: &'a LocalizationVector,
}

impl Dynamics for RestrictedAtChain<'_> {
    type Draw = UpdateDraw;

    fn n(&self) -> usize {
        self.p.n()
    }

    fn draw<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> UpdateDraw {
        edge_draw(self.n(), t, rng)
    }

    fn apply(&self, sigma: &mut Permutation, draw: &UpdateDraw) -> Result<()> {
        restricted_at_step_in_place(sigma, self.p, self.ell, draw);
        Ok(())
    }

    fn admits(&self, sigma: &Permutation) -> bool {
        sigma.n() == self.n() && sigma.is_localized(self.ell)
    }
}

impl Dynamics for BlockDynamics {
    type Draw = BlockDraw;

    fn n(&self) -> usize {
        self.schedule.n
    }

    fn draw<R: Rng + ?Sized>(&self, _t: u64, rng: &mut R) -> BlockDraw {
        BlockDraw::sample(&self.schedule, self.rule, rng)
    }

    fn apply(&self, sigma: &mut Permutation, draw: &BlockDraw) -> Result<()> {
        block_step(sigma, &self.schedule, &self.hb, draw)
    }

    fn admits(&self, sigma: &Permutation) -> bool {
        sigma.n() == self.n()
            && (1..=sigma.n()).all(|x| {
                let (lo, hi) = self.hb.dp().window_of(x);
                (lo..=hi).contains(&sigma.position_of(x))
            })
    }
}

/// Result of a coupled run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingOutcome {
    /// First step at which the two copies agree.
    Coalesced(u64),
    /// No agreement within the given number of steps.
    TimedOut(u64),
}

impl CouplingOutcome {
    pub fn time(&self) -> Option<u64> {
        match *self {
            CouplingOutcome::Coalesced(t) => Some(t),
            CouplingOutcome::TimedOut(_) => None,
        }
    }
}

/// Runs two copies from `x0a` and `x0b` on one draw stream for at most
/// `max_steps` steps.
pub fn twin_chain_coupling_run<D: Dynamics, R: Rng + ?Sized>(
    x0a: &Permutation,
    x0b: &Permutation,
    dynamics: &D,
    max_steps: u64,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    if x0a.n() != x0b.n() || x0a.n() != dynamics.n() {
        return contract("twin chains need equal sizes");
    }
    if !dynamics.admits(x0a) || !dynamics.admits(x0b) {
        return contract("a start state lies outside the chain's state space");
    }
    let (mut a, mut b) = (x0a.clone(), x0b.clone());
    if a == b {
        return Ok(CouplingOutcome::Coalesced(0));
    }
    for t in 1..=max_steps {
        let d = dynamics.draw(t - 1, rng);
        dynamics.apply(&mut a, &d)?;
        dynamics.apply(&mut b, &d)?;
        if a == b {
            return Ok(CouplingOutcome::Coalesced(t));
        }
    }
    Ok(CouplingOutcome::TimedOut(max_steps))
}

/// Coalescence time of the monotone ASEP coupling between the left-packed
/// and right-packed states; every other pair is sandwiched between them.
pub fn asep_coalescence_run<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    q: f64,
    max_steps: u64,
    rng: &mut R,
) -> Result<CouplingOutcome> {
    if n < 2 || k > n {
        return Err(Error::InvalidParameter(format!("ASEP with n = {n}, k = {k}")));
    }
    let mut lo = AsepState::left_packed(n, k);
    let mut hi = AsepState::right_packed(n, k);
    // the pair agrees once the number of unmatched prefix counts hits zero;
    // track the gap `Σ_r (count_lo(r) − count_hi(r))`, which changes only at
    // the updated edge
    let mut gap: i64 = {
        let (a, b) = (lo.prefix_counts(), hi.prefix_counts());
        a.iter().zip(&b).map(|(x, y)| *x as i64 - *y as i64).sum()
    };
    if gap == 0 {
        return Ok(CouplingOutcome::Coalesced(0));
    }
    for t in 1..=max_steps {
        let d = edge_draw(n, t - 1, rng);
        let i = d.edge;
        let before = lo.at(i) as i64 - hi.at(i) as i64;
        asep_step_in_place(&mut lo, q, &d);
        asep_step_in_place(&mut hi, q, &d);
        let after = lo.at(i) as i64 - hi.at(i) as i64;
        // prefix r = i is the only prefix count that moves
        gap += after - before;
        debug_assert!(left_order_leq_unchecked(&lo, &hi));
        if gap == 0 {
            debug_assert_eq!(lo, hi);
            return Ok(CouplingOutcome::Coalesced(t));
        }
    }
    Ok(CouplingOutcome::TimedOut(max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_starts_coalesce_immediately() {
        let p = BiasMatrix::constant(4, 0.6).unwrap();
        let s = Permutation::reversal(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = twin_chain_coupling_run(&s, &s, &AtChain { p: &p }, 10, &mut rng).unwrap();
        assert_eq!(out, CouplingOutcome::Coalesced(0));
    }

    #[test]
    fn two_particles_coalesce_in_one_step() {
        let p = BiasMatrix::constant(2, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = twin_chain_coupling_run(
            &Permutation::identity(2),
            &Permutation::reversal(2),
            &AtChain { p: &p },
            10,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out, CouplingOutcome::Coalesced(1));
    }

    #[test]
    fn coalesced_copies_stay_together() {
        let p = BiasMatrix::constant(6, 0.7).unwrap();
        let ell = LocalizationVector::constant(6, 2);
        let chain = RestrictedAtChain { p: &p, ell: &ell };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Permutation::from_one_line(vec![3, 2, 1, 6, 5, 4]).unwrap();
        let mut b = Permutation::identity(6);
        let mut met = false;
        for t in 0..20_000 {
            let d = chain.draw(t, &mut rng);
            chain.apply(&mut a, &d).unwrap();
            chain.apply(&mut b, &d).unwrap();
            met |= a == b;
            if met {
                assert_eq!(a, b);
            }
        }
        assert!(met);
    }

    #[test]
    fn asep_pair_coalesces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = asep_coalescence_run(20, 10, 0.75, 1_000_000, &mut rng).unwrap();
        assert!(out.time().is_some());
        assert_eq!(asep_coalescence_run(5, 0, 0.75, 10, &mut rng).unwrap(), CouplingOutcome::Coalesced(0));
    }
}
