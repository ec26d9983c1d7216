//! Block schedules and heat-bath block dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::measure::{Caps, HeatBath, HeatBathOptions};
use crate::{BiasMatrix, LocalizationVector, Permutation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    /// `B_W = [1, ⌈2n/3⌉]`, `B_E = [⌊n/3⌋, n]`.
    WestEast,
    /// `B₀ = ∪ (6iM, (6i+4)M]`, `B₁ = ∪ ((6i+3)M, (6i+7)M]`, clipped to `[n]`.
    Interleaved { m: usize },
    /// The whole of `[n]` as one block.
    Single,
}

/// How a block is chosen at each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Probability proportional to the block size.
    #[default]
    SizeWeighted,
    Uniform,
}

/// A list of blocks, each a union of disjoint increasing intervals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub kind: BlockKind,
    pub n: usize,
    pub blocks: Vec<Vec<(usize, usize)>>,
}

impl BlockSchedule {
    pub fn west_east(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("west/east blocks need n >= 2".into()));
        }
        let west = (1, (2 * n).div_ceil(3));
        let east = ((n / 3).max(1), n);
        Ok(Self {
            kind: BlockKind::WestEast,
            n,
            blocks: vec![vec![west], vec![east]],
        })
    }

    pub fn interleaved(n: usize, m: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("interleaved blocks need n, M >= 1".into()));
        }
        let clip = |a: usize, b: usize| -> Option<(usize, usize)> {
            let (lo, hi) = (a + 1, b.min(n));
            (lo <= hi).then_some((lo, hi))
        };
        let mut b0 = Vec::new();
        let mut b1 = Vec::new();
        let mut i = 0;
        while 6 * i * m < n {
            b0.extend(clip(6 * i * m, (6 * i + 4) * m));
            b1.extend(clip((6 * i + 3) * m, (6 * i + 7) * m));
            i += 1;
        }
        let blocks: Vec<_> = [b0, b1].into_iter().filter(|b| !b.is_empty()).collect();
        Ok(Self {
            kind: BlockKind::Interleaved { m },
            n,
            blocks,
        })
    }

    pub fn single(n: usize) -> Self {
        Self {
            kind: BlockKind::Single,
            n,
            blocks: vec![vec![(1, n)]],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_size(&self, b: usize) -> usize {
        self.blocks[b].iter().map(|&(a, z)| z + 1 - a).sum()
    }

    /// Positions of block `b`, increasing.
    pub fn positions(&self, b: usize) -> Vec<usize> {
        self.blocks[b].iter().flat_map(|&(a, z)| a..=z).collect()
    }

    /// Number of blocks containing each position `1..=n`.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for b in 0..self.len() {
            for pos in self.positions(b) {
                c[pos - 1] += 1;
            }
        }
        c
    }

    /// `χ`: the largest number of blocks sharing a position.
    pub fn coverage(&self) -> usize {
        self.multiplicity().into_iter().max().unwrap_or(0)
    }

    pub fn covers(&self) -> bool {
        self.multiplicity().iter().all(|&c| c >= 1)
    }

    /// Selection probability of each block.
    pub fn weights(&self, rule: SelectionRule) -> Vec<f64> {
        match rule {
            SelectionRule::Uniform => vec![1.0 / self.len() as f64; self.len()],
            SelectionRule::SizeWeighted => {
                let total: usize = (0..self.len()).map(|b| self.block_size(b)).sum();
                (0..self.len()).map(|b| self.block_size(b) as f64 / total as f64).collect()
            }
        }
    }

    /// Inverse-CDF block choice from a uniform.
    pub fn select(&self, rule: SelectionRule, u: f64) -> usize {
        let mut cum = 0.0;
        let w = self.weights(rule);
        for (b, wb) in w.iter().enumerate() {
            cum += wb;
            if u < cum {
                return b;
            }
        }
        self.len() - 1
    }
}

/// Shared randomness of one block update: the block and one uniform per
/// position of `[n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDraw {
    pub block: usize,
    pub uniforms: Vec<f64>,
}

impl BlockDraw {
    pub fn sample<R: Rng + ?Sized>(schedule: &BlockSchedule, rule: SelectionRule, rng: &mut R) -> Self {
        let block = schedule.select(rule, rng.random());
        let uniforms = (0..schedule.n).map(|_| rng.random()).collect();
        Self { block, uniforms }
    }
}

/// Heat-bath update of the block named by `draw`.
pub fn block_step(sigma: &mut Permutation, schedule: &BlockSchedule, hb: &HeatBath, draw: &BlockDraw) -> Result<()> {
    if schedule.n != sigma.n() || hb.n() != sigma.n() {
        return contract("schedule, heat bath and permutation sizes differ");
    }
    let segments = schedule
        .blocks
        .get(draw.block)
        .ok_or_else(|| Error::OutOfRange {
            index: draw.block,
            max: schedule.len(),
        })?;
    let first = segments[0].0;
    hb.sample_union(sigma, segments, &draw.uniforms[first - 1..])
}

/// Block dynamics for one instance, with its heat-bath engine.
pub struct BlockDynamics {
    pub schedule: BlockSchedule,
    pub rule: SelectionRule,
    pub hb: HeatBath,
}

impl BlockDynamics {
    pub fn new(
        schedule: BlockSchedule,
        rule: SelectionRule,
        p: &BiasMatrix,
        ell: &LocalizationVector,
        caps: &Caps,
        opts: HeatBathOptions,
    ) -> Result<Self> {
        if schedule.n != p.n() {
            return contract("schedule size differs from the instance");
        }
        if !schedule.covers() {
            return contract("blocks do not cover [n]");
        }
        let hb = HeatBath::new(p, ell, caps, opts)?;
        Ok(Self { schedule, rule, hb })
    }

    pub fn step<R: Rng + ?Sized>(&self, sigma: &mut Permutation, rng: &mut R) -> Result<()> {
        let d = BlockDraw::sample(&self.schedule, self.rule, rng);
        block_step(sigma, &self.schedule, &self.hb, &d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn west_east_small() {
        let s = BlockSchedule::west_east(3).unwrap();
        assert_eq!(s.blocks, vec![vec![(1, 2)], vec![(1, 3)]]);
        let s = BlockSchedule::west_east(300).unwrap();
        assert_eq!(s.blocks, vec![vec![(1, 200)], vec![(100, 300)]]);
        assert_eq!(s.coverage(), 2);
        assert!(s.covers());
    }

    #[test]
    fn interleaved_formula() {
        let s = BlockSchedule::interleaved(13, 1).unwrap();
        assert_eq!(s.blocks[0], vec![(1, 4), (7, 10), (13, 13)]);
        assert_eq!(s.blocks[1], vec![(4, 7), (10, 13)]);
        assert!(s.covers());
        assert_eq!(s.coverage(), 2);
        for m in 1..5 {
            for n in 1..80 {
                let s = BlockSchedule::interleaved(n, m).unwrap();
                assert!(s.covers(), "n={n} m={m}");
                assert!(s.coverage() <= 2);
                // overlaps are stretches of length M unless clipped at n
                let mult = s.multiplicity();
                let mut i = 0;
                while i < n {
                    if mult[i] == 2 {
                        let start = i;
                        while i < n && mult[i] == 2 {
                            i += 1;
                        }
                        assert!(i - start == m || i == n, "n={n} m={m}");
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn selection_rules() {
        let s = BlockSchedule::west_east(9).unwrap();
        let w = s.weights(SelectionRule::SizeWeighted);
        assert!((w[0] - 6.0 / 13.0).abs() < 1e-15);
        assert_eq!(s.weights(SelectionRule::Uniform), vec![0.5, 0.5]);
        assert_eq!(s.select(SelectionRule::Uniform, 0.49), 0);
        assert_eq!(s.select(SelectionRule::Uniform, 0.51), 1);
    }

    #[test]
    fn single_block_is_full_resample() {
        let p = BiasMatrix::constant(5, 0.7).unwrap();
        let ell = LocalizationVector::constant(5, 2);
        let dynamics = BlockDynamics::new(
            BlockSchedule::single(5),
            SelectionRule::SizeWeighted,
            &p,
            &ell,
            &Caps::default(),
            HeatBathOptions::default(),
        )
        .unwrap();
        let d = BlockDraw {
            block: 0,
            uniforms: vec![0.3, 0.9, 0.1, 0.5, 0.7],
        };
        let mut a = Permutation::identity(5);
        let mut b = Permutation::from_one_line(vec![2, 1, 4, 3, 5]).unwrap();
        block_step(&mut a, &dynamics.schedule, &dynamics.hb, &d).unwrap();
        block_step(&mut b, &dynamics.schedule, &dynamics.hb, &d).unwrap();
        assert_eq!(a, b);
    }
}
