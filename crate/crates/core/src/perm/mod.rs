//! Permutations, bias matrices, localization windows and boundary relabeling.

mod bias;
mod boundary;
mod localization;
mod permutation;

pub use bias::{epsilon_for_q, q_for_epsilon, BiasFile, BiasMatrix, BIAS_SCHEMA};
pub use boundary::{BoundaryAssignment, Restriction};
pub use localization::{LocalizationFile, LocalizationVector};
pub use permutation::{all_permutations, Permutation};

/// All permutations of `[n]` that satisfy `ell`, in lexicographic order.
///
/// Built by depth-first placement so that only localized prefixes are visited.
pub fn localized_permutations(ell: &LocalizationVector) -> Vec<Permutation> {
    let n = ell.n();
    let mut out = Vec::new();
    let mut line = Vec::with_capacity(n);
    let mut used = vec![false; n + 1];
    fn rec(
        ell: &LocalizationVector,
        line: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Permutation>,
    ) {
        let n = ell.n();
        let pos = line.len() + 1;
        if pos > n {
            out.push(Permutation::from_one_line_unchecked(line.clone()));
            return;
        }
        for k in 1..=n {
            if !used[k] && ell.allows(k, pos) {
                used[k] = true;
                line.push(k);
                rec(ell, line, used, out);
                line.pop();
                used[k] = false;
            }
        }
    }
    rec(ell, &mut line, &mut used, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn localized_enumeration_counts() {
        assert_eq!(localized_permutations(&LocalizationVector::constant(4, 0)).len(), 1);
        assert_eq!(localized_permutations(&LocalizationVector::unbounded(5)).len(), 120);
        // adjacent-swap tilings: Fibonacci numbers
        assert_eq!(localized_permutations(&LocalizationVector::constant(6, 1)).len(), 13);
        let ell = LocalizationVector::constant(6, 2);
        let brute = all_permutations(6)
            .into_iter()
            .filter(|s| s.is_localized(&ell))
            .count();
        assert_eq!(localized_permutations(&ell).len(), brute);
    }
}
