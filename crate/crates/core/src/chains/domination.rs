//! Grand coupling of the permutation chain with a family of ASEPs, one per
//! tracked `k`, under which `η_k(σ_t)` stays to the left of `Y_t^{(k)}`.
//!
//! The ASEP consumes `u` directly, the permutation chain consumes `1 − u`.
//! With that reflection a mixed edge that the ASEP sets to `(1,0)` is also set
//! to small-label-first by the chain, because `p_{s,g} >= q` for `s < g`.

use super::asep::{eta_projection, left_order_leq_unchecked, asep_step_in_place, AsepState};
use super::at::{at_step_in_place, restricted_at_step_in_place, StepOutcome};
use super::rng::UpdateDraw;
use crate::error::{contract, Error, Result};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// One ASEP of the dominating family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackedAsep {
    pub k: usize,
    pub state: AsepState,
}

/// `{1, 2, 4, ...} ∪ {n − 1}`, all below `n`.
pub fn default_tracked_ks(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1;
    while k < n {
        ks.push(k);
        k *= 2;
    }
    if n >= 2 && ks.last() != Some(&(n - 1)) {
        ks.push(n - 1);
    }
    ks
}

/// Family started from the projections of `sigma` itself.
pub fn projected_family(sigma: &Permutation, ks: &[usize]) -> Vec<TrackedAsep> {
    ks.iter()
        .map(|&k| TrackedAsep {
            k,
            state: eta_projection(sigma, k),
        })
        .collect()
}

/// The chain draw paired with an ASEP draw.
#[inline]
pub fn reflected(draw: &UpdateDraw) -> UpdateDraw {
    UpdateDraw {
        u: 1.0 - draw.u,
        ..*draw
    }
}

/// Whether the strongest constant bias dominated by `p` is at least `q`.
pub fn q_is_dominated(p: &BiasMatrix, q: f64) -> bool {
    q <= p.asep_q() * (1.0 + 1e-12)
}

/// Checks `η_k(σ) <= Y^{(k)}` for every tracked `k`.
pub fn domination_holds(sigma: &Permutation, family: &[TrackedAsep]) -> bool {
    family
        .iter()
        .all(|f| f.state.n() == sigma.n() && left_order_leq_unchecked(&eta_projection(sigma, f.k), &f.state))
}

/// A running coupled system.
#[derive(Clone, Debug)]
pub struct DominationCoupling<'a> {
    p: &'a BiasMatrix,
    ell: Option<&'a LocalizationVector>,
    q: f64,
    pub sigma: Permutation,
    pub family: Vec<TrackedAsep>,
    pub rejections: u64,
}

impl<'a> DominationCoupling<'a> {
    pub fn new(
        p: &'a BiasMatrix,
        ell: Option<&'a LocalizationVector>,
        q: f64,
        sigma: Permutation,
        family: Vec<TrackedAsep>,
    ) -> Result<Self> {
        if !q_is_dominated(p, q) {
            return Err(Error::InvalidParameter(format!(
                "q = {q} exceeds the bias q = {} certified by the instance",
                p.asep_q()
            )));
        }
        if let Some(ell) = ell {
            if !sigma.is_localized(ell) {
                return contract("restricted coupling started outside the localized set");
            }
        }
        if family.iter().any(|f| f.k == 0 || f.k >= sigma.n() || f.state.k() != f.k) {
            return contract("tracked ASEPs need 1 <= k < n particles");
        }
        if !domination_holds(&sigma, &family) {
            return contract("initial ASEP family does not dominate the permutation");
        }
        Ok(Self {
            p,
            ell,
            q,
            sigma,
            family,
            rejections: 0,
        })
    }

    /// Advances every process with `draw` and checks the invariant at the
    /// only prefix that can change.
    pub fn step(&mut self, draw: &UpdateDraw) -> Result<()> {
        let chain_draw = reflected(draw);
        match self.ell {
            None => {
                at_step_in_place(&mut self.sigma, self.p, &chain_draw);
            }
            Some(ell) => {
                if restricted_at_step_in_place(&mut self.sigma, self.p, ell, &chain_draw) == StepOutcome::Rejected {
                    self.rejections += 1;
                }
            }
        }
        for f in &mut self.family {
            asep_step_in_place(&mut f.state, self.q, draw);
        }
        let i = draw.edge;
        for f in &self.family {
            let chain = (1..=i).filter(|&pos| self.sigma.at(pos) <= f.k).count();
            let asep = (1..=i).filter(|&pos| f.state.at(pos) == 1).count();
            if chain < asep {
                return Err(Error::OrderViolation(format!(
                    "step {} edge {} u {}: k = {} chain {} vs ASEP {}",
                    draw.t,
                    draw.edge,
                    draw.u,
                    f.k,
                    eta_projection(&self.sigma, f.k),
                    f.state
                )));
            }
        }
        Ok(())
    }

    /// Full check of every prefix for every tracked `k`.
    pub fn audit(&self) -> Result<()> {
        if domination_holds(&self.sigma, &self.family) {
            Ok(())
        } else {
            Err(Error::OrderViolation("audit found a dominated prefix".into()))
        }
    }
}

/// One coupled step from explicit states; the invariant is verified before
/// and after.
pub fn coupled_domination_step(
    sigma: &Permutation,
    p: &BiasMatrix,
    family: &[TrackedAsep],
    q: f64,
    ell: Option<&LocalizationVector>,
    draw: &UpdateDraw,
) -> Result<(Permutation, Vec<TrackedAsep>)> {
    if !draw.is_valid(sigma.n()) {
        return contract(format!("invalid draw {draw:?}"));
    }
    let mut c = DominationCoupling::new(p, ell, q, sigma.clone(), family.to_vec())?;
    c.step(draw)?;
    c.audit()?;
    Ok((c.sigma, c.family))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracked_grid() {
        assert_eq!(default_tracked_ks(10), vec![1, 2, 4, 8, 9]);
        assert_eq!(default_tracked_ks(9), vec![1, 2, 4, 8]);
        assert_eq!(default_tracked_ks(2), vec![1]);
    }

    #[test]
    fn ground_state_family_dominates() {
        let s = Permutation::identity(7);
        let fam = projected_family(&s, &default_tracked_ks(7));
        assert!(domination_holds(&s, &fam));
    }

    #[test]
    fn rejects_overstrong_asep() {
        let p = BiasMatrix::constant_eps(5, 0.5).unwrap();
        let s = Permutation::identity(5);
        let fam = projected_family(&s, &[2]);
        assert!(DominationCoupling::new(&p, None, 0.8, s.clone(), fam.clone()).is_err());
        assert!(DominationCoupling::new(&p, None, 0.6, s, fam).is_ok());
    }

    #[test]
    fn short_run_keeps_order() {
        let p = BiasMatrix::constant_eps(12, 0.5).unwrap();
        let s = Permutation::reversal(12);
        let ks = default_tracked_ks(12);
        let fam = ks
            .iter()
            .map(|&k| TrackedAsep {
                k,
                state: AsepState::right_packed(12, k),
            })
            .collect();
        let mut c = DominationCoupling::new(&p, None, p.asep_q(), s, fam).unwrap();
        for d in super::super::rng::DrawStream::new(12, 3).take(20_000) {
            c.step(&d).unwrap();
        }
        c.audit().unwrap();
    }
}
