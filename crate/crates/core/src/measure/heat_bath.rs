use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use super::band::{BandDp, BandSampler, Tables};
use super::Caps;
use crate::error::{Error, Result};
use crate::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};

/// Tuning for [`HeatBath`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatBathOptions {
    /// Log-weight pruning threshold for the transfer-matrix tables; `None`
    /// keeps every state and makes each update exact.
    pub prune: Option<f64>,
    /// With pruning on, the shared instance-wide tables are only used when the
    /// boundary state is within this many nats of the best state at its cut;
    /// otherwise the update builds tables anchored at the boundary itself.
    pub guard: f64,
}

impl Default for HeatBathOptions {
    fn default() -> Self {
        Self {
            prune: None,
            guard: 15.0,
        }
    }
}

/// Cap on cached boundary-anchored tables, in stored states.
const CACHE_STATE_BUDGET: usize = 20_000_000;

/// Resamples a block of positions from the localized stationary measure
/// conditioned on everything outside the block.
///
/// Every update of `k` positions consumes exactly `k` uniforms, assigned to
/// positions in order, and candidates are scanned in increasing label order;
/// two configurations driven by the same uniforms therefore agree on a
/// stretch as soon as their cut states meet.
pub struct HeatBath {
    dp: BandDp,
    opts: HeatBathOptions,
    alpha: OnceLock<std::result::Result<Tables, String>>,
    beta: OnceLock<std::result::Result<Tables, String>>,
    cache: Mutex<(usize, HashMap<(usize, usize, u64, u64), Arc<Tables>>)>,
}

impl HeatBath {
    pub fn new(p: &BiasMatrix, ell: &LocalizationVector, caps: &Caps, opts: HeatBathOptions) -> Result<Self> {
        let dp = BandDp::new(p, ell, caps)?.with_pruning(opts.prune);
        Ok(Self {
            dp,
            opts,
            alpha: OnceLock::new(),
            beta: OnceLock::new(),
            cache: Mutex::new((0, HashMap::new())),
        })
    }

    pub fn n(&self) -> usize {
        self.dp.n()
    }

    pub fn dp(&self) -> &BandDp {
        &self.dp
    }

    fn global_alpha(&self) -> Result<&Tables> {
        self.alpha
            .get_or_init(|| self.dp.forward_all().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::EmptySupport(e.clone()))
    }

    fn global_beta(&self) -> Result<&Tables> {
        self.beta
            .get_or_init(|| {
                let alpha = self.global_alpha().map_err(|e| e.to_string())?;
                match self.dp.pruning() {
                    None => self.dp.backward_all(),
                    Some(_) => self.dp.backward_within(self.n(), 0, 0, None, alpha),
                }
                .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::EmptySupport(e.clone()))
    }

    fn typical(&self, tables: &Tables, t: usize, mask: u64) -> bool {
        match tables.get(t, mask) {
            None => false,
            Some(v) => match self.opts.prune {
                None => true,
                Some(_) => v >= tables.col(t).max_log() - self.opts.guard,
            },
        }
    }

    /// Suffix tables anchored at `(t1, end)` that reach `(t0, start)`: a
    /// forward pass from the start fixes the support, and the backward pass
    /// from the end is restricted to it. The threshold is widened if the
    /// pruned support loses the end.
    fn anchored(&self, dp: &BandDp, t0: usize, start: u64, t1: usize, end: u64, cacheable: bool) -> Result<Arc<Tables>> {
        let key = (t0, t1, start, end);
        if cacheable {
            if let Some(hit) = self.cache.lock().expect("cache lock").1.get(&key) {
                return Ok(hit.clone());
            }
        }
        let ladder: Vec<Option<f64>> = match dp.pruning() {
            None => vec![None],
            Some(th) => vec![Some(th), Some(2.0 * th), Some(4.0 * th)],
        };
        let mut last_err = None;
        for level in ladder {
            let d = dp.clone().with_pruning(level);
            let attempt = d
                .forward(t0, start, t1, Some(end))
                .and_then(|support| d.backward_within(t1, end, t0, Some(start), &support));
            match attempt {
                Ok(tables) if tables.get(t0, start).is_some() => {
                    let tables = Arc::new(tables);
                    if cacheable {
                        let mut guard = self.cache.lock().expect("cache lock");
                        if guard.0 + tables.size() > CACHE_STATE_BUDGET {
                            guard.1.clear();
                            guard.0 = 0;
                        }
                        guard.0 += tables.size();
                        guard.1.insert(key, tables.clone());
                    }
                    return Ok(tables);
                }
                Ok(_) => {
                    last_err = Some(Error::EmptySupport("boundary admits no localized completion".into()))
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("nonempty ladder"))
    }

    /// Resamples positions `a..=b` of `sigma` in place.
    pub fn sample_block(&self, sigma: &mut Permutation, a: usize, b: usize, uniforms: &[f64]) -> Result<()> {
        let n = self.n();
        if a == 0 || b > n || a > b {
            return Err(Error::Contract(format!("invalid block [{a}, {b}]")));
        }
        if uniforms.len() < b - a + 1 {
            return Err(Error::Contract("too few uniforms for block".into()));
        }
        if a == b {
            return Ok(());
        }
        let (t0, t1) = (a - 1, b);
        let start = self.dp.prefix_mask(t0, sigma)?;
        let end = self.dp.prefix_mask(t1, sigma)?;
        let labels = if t0 == 0 && self.typical(self.global_alpha()?, t1, end) {
            self.dp.sample_backward(self.global_alpha()?, t1, end, uniforms)?
        } else if t1 == n && self.typical(self.global_beta()?, t0, start) {
            self.dp.sample_forward(self.global_beta()?, t0, start, uniforms)?
        } else {
            let beta = self.anchored(&self.dp, t0, start, t1, end, true)?;
            self.dp.sample_forward(&beta, t0, start, uniforms)?
        };
        sigma.overwrite_positions(a, &labels);
        Ok(())
    }

    /// Resamples the union of disjoint, increasing intervals jointly.
    ///
    /// `uniforms[k]` drives position `segments[0].0 + k`. Segments whose
    /// particles cannot reach any other segment are independent given the
    /// rest and are updated one by one; otherwise the whole span is resampled
    /// with the positions between segments pinned.
    pub fn sample_union(&self, sigma: &mut Permutation, segments: &[(usize, usize)], uniforms: &[f64]) -> Result<()> {
        let Some(&(first, _)) = segments.first() else {
            return Ok(());
        };
        let last = segments.last().expect("nonempty").1;
        if segments.windows(2).any(|w| w[0].1 >= w[1].0) || segments.iter().any(|s| s.0 > s.1) {
            return Err(Error::Contract("segments must be disjoint and increasing".into()));
        }
        if uniforms.len() < last - first + 1 {
            return Err(Error::Contract("too few uniforms for block".into()));
        }
        if segments.len() == 1 {
            return self.sample_block(sigma, first, last, uniforms);
        }
        // whether particle x could be placed in some other segment
        let ell_reach = |x: usize, seg: usize| {
            let (lo, hi) = self.dp.window_of(x);
            segments
                .iter()
                .enumerate()
                .any(|(j, &(a, b))| j != seg && lo <= b && a <= hi)
        };
        let separable = segments
            .iter()
            .enumerate()
            .all(|(i, &(a, b))| (a..=b).all(|pos| !ell_reach(sigma.at(pos), i)));
        if separable {
            for &(a, b) in segments {
                self.sample_block(sigma, a, b, &uniforms[a - first..])?;
            }
            return Ok(());
        }
        let mut gaps = Vec::new();
        for w in segments.windows(2) {
            for pos in w[0].1 + 1..w[1].0 {
                gaps.push((pos, sigma.at(pos)));
            }
        }
        let pinned = self.dp.clone().with_pins(gaps)?;
        let (t0, t1) = (first - 1, last);
        let start = pinned.prefix_mask(t0, sigma)?;
        let end = pinned.prefix_mask(t1, sigma)?;
        let beta = self.anchored(&pinned, t0, start, t1, end, false)?;
        let labels = pinned.sample_forward(&beta, t0, start, uniforms)?;
        sigma.overwrite_positions(first, &labels);
        Ok(())
    }

}

/// Exact heat-bath update of the interval `block` through the relabeled
/// sub-instance on the block: the outside is frozen as a boundary, the block
/// is restricted, sampled exactly and embedded back.
pub fn heat_bath_block_sample<R: Rng + ?Sized>(
    sigma: &Permutation,
    block: (usize, usize),
    p: &BiasMatrix,
    ell: &LocalizationVector,
    caps: &Caps,
    rng: &mut R,
) -> Result<Permutation> {
    let n = sigma.n();
    let (a, b) = block;
    if a == 0 || b > n || a > b {
        return Err(Error::Contract(format!("invalid block [{a}, {b}]")));
    }
    if !sigma.is_localized(ell) {
        return Err(Error::Contract("permutation is not localized".into()));
    }
    let boundary = BoundaryAssignment::from_permutation(sigma, a - 1, n - b)?;
    let (ell2, p2, _) = boundary.restrict_instance(p, ell)?;
    let sampler = BandSampler::new(&p2, &ell2, caps)?;
    let inner = sampler.sample(rng)?;
    let out = boundary.embed(&inner)?;
    debug_assert!(out.is_localized(ell));
    Ok(out)
}
