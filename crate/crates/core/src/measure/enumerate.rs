use super::{Caps, DistributionTable};
use crate::error::{Error, Result};
use crate::perm::{all_permutations, localized_permutations};
use crate::{BiasMatrix, LocalizationVector, Permutation};

/// `Σ_{i<j} ln p_{σ(i), σ(j)}`; `−∞` when some ordered pair has probability 0.
pub fn log_weight(sigma: &Permutation, p: &BiasMatrix) -> f64 {
    let line = sigma.one_line();
    let mut acc = 0.0;
    for (i, &a) in line.iter().enumerate() {
        for &b in &line[i + 1..] {
            acc += p.p(a, b).ln();
        }
    }
    acc
}

/// Size of the state space the enumeration engine would build.
pub(crate) fn check_enumeration_cap(n: usize, caps: &Caps) -> Result<()> {
    if n > caps.enumeration {
        return Err(Error::EnumerationCap {
            n,
            cap: caps.enumeration,
        });
    }
    if n > super::DEFAULT_ENUM_CAP {
        log::warn!("enumerating all permutations of n = {n}; this is slow and memory hungry");
    }
    Ok(())
}

/// The stationary measure, optionally conditioned on `ell`, over its full
/// support in lexicographic order.
pub fn enumerate_stationary(
    p: &BiasMatrix,
    ell: Option<&LocalizationVector>,
    caps: &Caps,
) -> Result<DistributionTable<Permutation>> {
    let n = p.n();
    check_enumeration_cap(n, caps)?;
    let support = match ell {
        Some(ell) => {
            if ell.n() != n {
                return Err(Error::SizeMismatch {
                    expected: n,
                    got: ell.n(),
                });
            }
            localized_permutations(ell)
        }
        None => all_permutations(n),
    };
    let log_w: Vec<f64> = support.iter().map(|s| log_weight(s, p)).collect();
    DistributionTable::from_log_weights(support, &log_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::from_one_line(v.to_vec()).unwrap()
    }

    #[test]
    fn log_weight_examples() {
        let q = BiasMatrix::constant(3, 0.6).unwrap();
        assert!((log_weight(&Permutation::identity(3), &q) - 0.216f64.ln()).abs() < 1e-14);
        assert!((log_weight(&p(&[2, 1, 3]), &q) - 0.144f64.ln()).abs() < 1e-14);
        let t = BiasMatrix::totally_asymmetric(2);
        assert_eq!(log_weight(&p(&[2, 1]), &t), f64::NEG_INFINITY);
    }

    #[test]
    fn enumeration_examples() {
        let caps = Caps::default();
        let q = BiasMatrix::constant(2, 0.7).unwrap();
        let t = enumerate_stationary(&q, None, &caps).unwrap();
        assert!((t.prob_of(&p(&[1, 2])) - 0.7).abs() < 1e-15);
        assert!((t.prob_of(&p(&[2, 1])) - 0.3).abs() < 1e-15);

        let q = BiasMatrix::constant(3, 0.6).unwrap();
        let t = enumerate_stationary(&q, None, &caps).unwrap();
        assert!((t.log_z - 0.76f64.ln()).abs() < 1e-14);
        assert!((t.prob_of(&Permutation::identity(3)) - 0.216 / 0.76).abs() < 1e-14);
        assert!(t.is_valid());

        let t = enumerate_stationary(&q, Some(&LocalizationVector::constant(3, 0)), &caps).unwrap();
        assert_eq!(t.support, vec![Permutation::identity(3)]);
        assert_eq!(t.probs, vec![1.0]);
    }

    #[test]
    fn cap_refuses() {
        let q = BiasMatrix::constant(9, 0.6).unwrap();
        assert!(matches!(
            enumerate_stationary(&q, None, &Caps::default()),
            Err(Error::EnumerationCap { n: 9, cap: 8 })
        ));
    }

    #[test]
    fn totally_asymmetric_concentrates_on_identity() {
        let t = enumerate_stationary(&BiasMatrix::totally_asymmetric(4), None, &Caps::default()).unwrap();
        assert_eq!(t.prob_of(&Permutation::identity(4)), 1.0);
        assert_eq!(t.len(), 24);
    }
}
