//! Single-edge steps of the adjacent-transposition chain.
//!
//! Orientation: at edge `i` holding the particles `s < g` (in either order),
//! `g` ends ahead iff `u < p_{g,s}`, otherwise `s` ends ahead. The outcome
//! depends only on the unordered pair and `u`, which makes two copies driven
//! by the same draw agree on any edge where they hold the same pair.

use super::rng::UpdateDraw;
use crate::error::{contract, Result};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// Whether the larger label ends ahead at this edge under draw `u`.
#[inline]
fn larger_ahead(p: &BiasMatrix, s: usize, g: usize, u: f64) -> bool {
    u < p.p(g, s)
}

/// In-place step; returns whether the configuration changed.
#[inline]
pub fn at_step_in_place(sigma: &mut Permutation, p: &BiasMatrix, draw: &UpdateDraw) -> bool {
    let i = draw.edge;
    let a = sigma.at(i);
    let b = sigma.at(i + 1);
    let (s, g) = if a < b { (a, b) } else { (b, a) };
    let want_g_first = larger_ahead(p, s, g, draw.u);
    let g_first = a == g;
    if want_g_first != g_first {
        sigma.swap_adjacent_unchecked(i);
        true
    } else {
        false
    }
}

/// One step of the chain driven by `draw`.
pub fn at_step(sigma: &Permutation, p: &BiasMatrix, draw: &UpdateDraw) -> Result<Permutation> {
    check_draw(sigma, p, draw)?;
    let mut out = sigma.clone();
    at_step_in_place(&mut out, p, draw);
    Ok(out)
}

/// Outcome of a restricted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Unchanged,
    Moved,
    Rejected,
}

/// In-place restricted step: a swap that would leave the localized set is
/// rejected. The caller guarantees `sigma` is localized.
#[inline]
pub fn restricted_at_step_in_place(
    sigma: &mut Permutation,
    p: &BiasMatrix,
    ell: &LocalizationVector,
    draw: &UpdateDraw,
) -> StepOutcome {
    let i = draw.edge;
    let a = sigma.at(i);
    let b = sigma.at(i + 1);
    let (s, g) = if a < b { (a, b) } else { (b, a) };
    if larger_ahead(p, s, g, draw.u) == (a == g) {
        return StepOutcome::Unchanged;
    }
    if !(ell.allows(a, i + 1) && ell.allows(b, i)) {
        debug_assert!(a < b, "an out-of-order swap was rejected");
        return StepOutcome::Rejected;
    }
    sigma.swap_adjacent_unchecked(i);
    StepOutcome::Moved
}

/// One step of the chain restricted to `ell`-localized permutations.
pub fn restricted_at_step(
    sigma: &Permutation,
    p: &BiasMatrix,
    ell: &LocalizationVector,
    draw: &UpdateDraw,
) -> Result<Permutation> {
    check_draw(sigma, p, draw)?;
    if ell.n() != sigma.n() || !sigma.is_localized(ell) {
        return contract("restricted step from a permutation that is not localized");
    }
    let mut out = sigma.clone();
    restricted_at_step_in_place(&mut out, p, ell, draw);
    Ok(out)
}

fn check_draw(sigma: &Permutation, p: &BiasMatrix, draw: &UpdateDraw) -> Result<()> {
    if p.n() != sigma.n() {
        return contract(format!("bias matrix for n = {} applied to n = {}", p.n(), sigma.n()));
    }
    if !draw.is_valid(sigma.n()) {
        return contract(format!("invalid draw {draw:?} for n = {}", sigma.n()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(v: &[usize]) -> Permutation {
        Permutation::from_one_line(v.to_vec()).unwrap()
    }

    #[test]
    fn two_particle_rule() {
        let p = BiasMatrix::constant(2, 0.6).unwrap();
        let s = perm(&[1, 2]);
        assert_eq!(at_step(&s, &p, &UpdateDraw::new(1, 0.3, 0)).unwrap(), perm(&[2, 1]));
        assert_eq!(at_step(&s, &p, &UpdateDraw::new(1, 0.9, 0)).unwrap(), perm(&[1, 2]));
        // from (2,1) the same draw lands on the same order
        assert_eq!(at_step(&perm(&[2, 1]), &p, &UpdateDraw::new(1, 0.3, 0)).unwrap(), perm(&[2, 1]));
    }

    #[test]
    fn totally_asymmetric_never_unsorts() {
        let p = BiasMatrix::totally_asymmetric(4);
        let s = Permutation::identity(4);
        for edge in 1..4 {
            for u in [0.0, 0.25, 0.5, 0.999] {
                assert_eq!(at_step(&s, &p, &UpdateDraw::new(edge, u, 0)).unwrap(), s);
            }
        }
    }

    #[test]
    fn frozen_under_zero_window() {
        let p = BiasMatrix::constant(4, 0.6).unwrap();
        let ell = LocalizationVector::constant(4, 0);
        let mut s = Permutation::identity(4);
        for edge in 1..4 {
            let o = restricted_at_step_in_place(&mut s, &p, &ell, &UpdateDraw::new(edge, 0.0, 0));
            assert_eq!(o, StepOutcome::Rejected);
        }
        assert_eq!(s, Permutation::identity(4));
    }

    #[test]
    fn rejection_at_window_edge() {
        let p = BiasMatrix::constant(3, 0.6).unwrap();
        let ell = LocalizationVector::constant(3, 1);
        let s = perm(&[2, 1, 3]);
        let out = restricted_at_step(&s, &p, &ell, &UpdateDraw::new(2, 0.1, 0)).unwrap();
        assert_eq!(out, s);
        assert!(restricted_at_step(&perm(&[3, 1, 2]), &p, &ell, &UpdateDraw::new(1, 0.1, 0)).is_err());
    }

    #[test]
    fn invalid_draw_is_a_contract_error() {
        let p = BiasMatrix::constant(3, 0.6).unwrap();
        let s = Permutation::identity(3);
        assert!(at_step(&s, &p, &UpdateDraw::new(3, 0.1, 0)).is_err());
        assert!(at_step(&s, &p, &UpdateDraw::new(0, 0.1, 0)).is_err());
        assert!(at_step(&s, &p, &UpdateDraw::new(1, 1.0, 0)).is_err());
    }
}
