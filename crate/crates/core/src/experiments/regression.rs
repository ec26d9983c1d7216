use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::{BiasMatrix, LocalizationVector};

/// Bias levels used by the regression instances.
pub const REGRESSION_EPSILONS: [f64; 3] = [0.2, 0.5, 1.0];

/// Fixed seed of the repository regression set.
pub const REGRESSION_SEED: u64 = 0x5eed_2024;

/// One instance of the regression set.
#[derive(Clone, Debug)]
pub struct RegressionInstance {
    pub id: usize,
    pub epsilon: f64,
    pub p: BiasMatrix,
    pub ell: Option<LocalizationVector>,
}

/// `count` random instances with `n` drawn from `ns`, ε cycling through
/// [`REGRESSION_EPSILONS`], alternately unrestricted and with a random
/// admissible window of maximal bound `max_bound`. Half of the bias
/// matrices are monotone.
pub fn regression_set(seed: u64, count: usize, ns: &[usize], max_bound: usize) -> Result<Vec<RegressionInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for id in 0..count {
        let n = ns[rng.random_range(0..ns.len())];
        let epsilon = REGRESSION_EPSILONS[id % REGRESSION_EPSILONS.len()];
        let p = if rng.random::<bool>() {
            BiasMatrix::random_eps(n, epsilon, &mut rng)?
        } else {
            BiasMatrix::monotone_eps(n, epsilon, &mut rng)?
        };
        let ell = (id % 2 == 1).then(|| LocalizationVector::random_admissible(n, max_bound, &mut rng));
        out.push(RegressionInstance { id, epsilon, p, ell });
    }
    Ok(out)
}
