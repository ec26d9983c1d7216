//! Transfer-matrix engine for the localized stationary measure.
//!
//! The state after filling positions `1..=t` (the cut `t`) is the set `S` of
//! particles already placed. Localization forces every particle `k` with
//! `k + ℓ_k⁺ <= t` into `S` and keeps every particle with `k − ℓ_k⁻ > t` out
//! of it, so `S` is determined by a bit mask over the free labels
//! `[lo_t, hi_t]`, whose width is at most `ℓ_max⁻ + ℓ_max⁺`.
//!
//! Placing particle `x` at position `t + 1` multiplies the weight by
//! `Π_{y ∉ S ∪ {x}} p_{x,y}`, so the stationary weight of a permutation is the
//! product of its per-position multipliers.

use std::collections::HashMap;

use rand::Rng;

use super::table::{log_add, log_sum_exp};
use super::{Caps, DistributionTable};
use crate::error::{Error, Result};
use crate::{BiasMatrix, BoundaryAssignment, LocalizationVector, Permutation};

/// Hard limit imposed by the 64-bit occupancy word.
pub const MAX_WINDOW: usize = 64;

/// A DP cell: the cut (frontier), the occupancy word relative to the first
/// free label, and the accumulated log weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandState {
    pub frontier: usize,
    pub window: u64,
    pub log_weight: f64,
}

/// One DP column, sorted by occupancy word.
#[derive(Clone, Debug, Default)]
pub struct Column {
    pub cut: usize,
    pub entries: Vec<(u64, f64)>,
}

impl Column {
    #[inline]
    pub fn get(&self, mask: u64) -> Option<f64> {
        self.entries
            .binary_search_by_key(&mask, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn max_log(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn states(&self) -> impl Iterator<Item = BandState> + '_ {
        self.entries.iter().map(move |&(window, log_weight)| BandState {
            frontier: self.cut,
            window,
            log_weight,
        })
    }
}

/// Consecutive columns for cuts `first..=last`.
#[derive(Clone, Debug)]
pub struct Tables {
    pub first: usize,
    pub cols: Vec<Column>,
}

impl Tables {
    pub fn last(&self) -> usize {
        self.first + self.cols.len() - 1
    }

    #[inline]
    pub fn col(&self, t: usize) -> &Column {
        &self.cols[t - self.first]
    }

    #[inline]
    pub fn get(&self, t: usize, mask: u64) -> Option<f64> {
        if t < self.first || t > self.last() {
            return None;
        }
        self.col(t).get(mask)
    }

    /// Total number of stored states.
    pub fn size(&self) -> usize {
        self.cols.iter().map(|c| c.entries.len()).sum()
    }
}

/// A localized instance prepared for transfer-matrix passes.
#[derive(Clone, Debug)]
pub struct BandDp {
    n: usize,
    lp: Vec<f64>,
    suf: Vec<f64>,
    left: Vec<usize>,
    right: Vec<usize>,
    lo_cut: Vec<usize>,
    hi_cut: Vec<usize>,
    pins: Vec<usize>,
    pinned_at: Vec<usize>,
    prune: Option<f64>,
}

impl BandDp {
    pub fn new(p: &BiasMatrix, ell: &LocalizationVector, caps: &Caps) -> Result<Self> {
        let n = p.n();
        if ell.n() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: ell.n(),
            });
        }
        ell.require_admissible()?;
        let width = ell.band_width();
        let cap = caps.window.min(MAX_WINDOW);
        if width > cap {
            return Err(Error::WindowCap { width, cap });
        }
        let lp = p.log_table();
        let mut suf = vec![0.0; n * (n + 1)];
        for x in 1..=n {
            let row = &mut suf[(x - 1) * (n + 1)..x * (n + 1)];
            for h in (0..n).rev() {
                let y = h + 1;
                row[h] = row[h + 1] + if y != x { lp[(x - 1) * n + (y - 1)] } else { 0.0 };
            }
        }
        let left: Vec<usize> = (1..=n).map(|k| ell.left(k)).collect();
        let right: Vec<usize> = (1..=n).map(|k| ell.right(k)).collect();
        let lo_cut = (0..=n)
            .map(|t| (1..=n).find(|&k| right[k - 1] > t).unwrap_or(n + 1))
            .collect();
        let hi_cut = (0..=n)
            .map(|t| (1..=n).rev().find(|&k| left[k - 1] <= t).unwrap_or(0))
            .collect();
        Ok(Self {
            n,
            lp,
            suf,
            left,
            right,
            lo_cut,
            hi_cut,
            pins: vec![0; n],
            pinned_at: vec![0; n],
            prune: None,
        })
    }

    /// Forces particle `label` onto position `pos` for each pair.
    pub fn with_pins(mut self, pins: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        for (pos, label) in pins {
            if pos == 0 || pos > self.n || label == 0 || label > self.n {
                return Err(Error::OutOfRange {
                    index: pos.max(label),
                    max: self.n,
                });
            }
            if self.pins[pos - 1] != 0 || self.pinned_at[label - 1] != 0 {
                return Err(Error::Contract(format!(
                    "conflicting pins at position {pos} / particle {label}"
                )));
            }
            if !(self.left[label - 1] <= pos && pos <= self.right[label - 1]) {
                return Err(Error::EmptySupport(format!(
                    "particle {label} pinned outside its window at position {pos}"
                )));
            }
            self.pins[pos - 1] = label;
            self.pinned_at[label - 1] = pos;
        }
        Ok(self)
    }

    /// Drops states whose log weight falls more than `threshold` below the
    /// best state of the same column. `None` keeps the engine exact.
    pub fn with_pruning(mut self, threshold: Option<f64>) -> Self {
        self.prune = threshold;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pruning(&self) -> Option<f64> {
        self.prune
    }

    /// First free label at cut `t`.
    #[inline]
    pub fn lo_cut(&self, t: usize) -> usize {
        self.lo_cut[t]
    }

    /// Last free label at cut `t`.
    #[inline]
    pub fn hi_cut(&self, t: usize) -> usize {
        self.hi_cut[t]
    }

    /// `(leftmost, rightmost)` allowed position of particle `x`.
    pub fn window_of(&self, x: usize) -> (usize, usize) {
        (self.left[x - 1], self.right[x - 1])
    }

    #[inline]
    fn width(&self, t: usize) -> usize {
        (self.hi_cut[t] + 1).saturating_sub(self.lo_cut[t])
    }

    #[inline]
    fn placed(&self, t: usize, mask: u64, y: usize) -> bool {
        let lo = self.lo_cut[t];
        y < lo || (y <= self.hi_cut[t] && mask >> (y - lo) & 1 == 1)
    }

    /// The unique particle that must go to position `t + 1`, if any;
    /// `Err(())` when two or more are overdue.
    #[inline]
    fn forced(&self, t: usize, mask: u64) -> std::result::Result<Option<usize>, ()> {
        let mut forced = None;
        for y in self.lo_cut[t]..self.lo_cut[t + 1] {
            if !self.placed(t, mask, y) {
                if forced.is_some() {
                    return Err(());
                }
                forced = Some(y);
            }
        }
        if let Some(c) = self.pins.get(t).copied().filter(|&c| c != 0) {
            match forced {
                Some(f) if f != c => return Err(()),
                _ => forced = Some(c),
            }
        }
        Ok(forced)
    }

    #[inline]
    fn admissible_move(&self, t: usize, mask: u64, x: usize) -> bool {
        let pos = t + 1;
        x >= self.lo_cut[t]
            && x <= self.hi_cut[t + 1]
            && !self.placed(t, mask, x)
            && self.left[x - 1] <= pos
            && pos <= self.right[x - 1]
            && (self.pinned_at[x - 1] == 0 || self.pinned_at[x - 1] == pos)
    }

    /// Particles that may be placed at position `t + 1`, in increasing order.
    fn candidates(&self, t: usize, mask: u64, out: &mut Vec<usize>) {
        out.clear();
        match self.forced(t, mask) {
            Err(()) => {}
            Ok(Some(x)) => {
                if self.admissible_move(t, mask, x) {
                    out.push(x);
                }
            }
            Ok(None) => {
                for x in self.lo_cut[t]..=self.hi_cut[t + 1] {
                    if self.admissible_move(t, mask, x) {
                        out.push(x);
                    }
                }
            }
        }
    }

    #[inline]
    fn is_candidate(&self, t: usize, mask: u64, x: usize) -> bool {
        match self.forced(t, mask) {
            Err(()) => false,
            Ok(Some(f)) => f == x && self.admissible_move(t, mask, x),
            Ok(None) => self.admissible_move(t, mask, x),
        }
    }

    /// Successor word and log multiplier for placing `x` at position `t + 1`.
    #[inline]
    fn transition(&self, t: usize, mask: u64, x: usize) -> (u64, f64) {
        let lo = self.lo_cut[t];
        let hi = self.hi_cut[t];
        let w = self.width(t);
        let row = &self.lp[(x - 1) * self.n..x * self.n];
        let mut log_w = self.suf[(x - 1) * (self.n + 1) + hi];
        let mut free = !mask & low_bits(w);
        while free != 0 {
            let b = free.trailing_zeros() as usize;
            free &= free - 1;
            let y = lo + b;
            if y != x {
                log_w += row[y - 1];
            }
        }
        let shift = self.lo_cut[t + 1] - lo;
        let grown = mask | (1u64 << (x - lo));
        let next = if shift >= 64 { 0 } else { grown >> shift };
        (next, log_w)
    }

    /// Whether the set at cut `t` contains the set `sub` at cut `t_sub <= t`.
    #[inline]
    fn contains_set(&self, t: usize, mask: u64, t_sub: usize, sub: u64) -> bool {
        let shift = self.lo_cut[t] - self.lo_cut[t_sub];
        let rest = if shift >= 64 { 0 } else { sub >> shift };
        rest & !mask == 0
    }

    fn finish_column(&self, cut: usize, mut buf: Vec<(u64, f64)>) -> Result<Column> {
        buf.sort_unstable_by_key(|e| e.0);
        let mut entries: Vec<(u64, f64)> = Vec::with_capacity(buf.len());
        for (m, v) in buf {
            match entries.last_mut() {
                Some(last) if last.0 == m => last.1 = log_add(last.1, v),
                _ => entries.push((m, v)),
            }
        }
        if let Some(th) = self.prune {
            let max = entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
            entries.retain(|e| e.1 >= max - th);
        }
        if entries.is_empty() {
            return Err(Error::EmptySupport(format!(
                "no localized completion reaches cut {cut}"
            )));
        }
        Ok(Column { cut, entries })
    }

    /// Prefix sums anchored at `(t0, start)`: entry `(t, S)` is the log of the
    /// total weight of fillings of positions `t0+1..=t` leading to `S`.
    /// With `end = Some((t1, S_end))` only subsets of `S_end` are kept.
    pub fn forward(&self, t0: usize, start: u64, t1: usize, end: Option<u64>) -> Result<Tables> {
        let mut cols = vec![Column {
            cut: t0,
            entries: vec![(start, 0.0)],
        }];
        let mut cands = Vec::new();
        for t in t0..t1 {
            let prev = cols.last().expect("nonempty");
            let mut buf = Vec::with_capacity(prev.entries.len() * 2);
            for &(mask, a) in &prev.entries {
                self.candidates(t, mask, &mut cands);
                for &x in &cands {
                    let (next, lw) = self.transition(t, mask, x);
                    let v = a + lw;
                    if v == f64::NEG_INFINITY {
                        continue;
                    }
                    if let Some(e) = end {
                        if !self.contains_set(t1, e, t + 1, next) {
                            continue;
                        }
                    }
                    buf.push((next, v));
                }
            }
            cols.push(self.finish_column(t + 1, buf)?);
        }
        Ok(Tables { first: t0, cols })
    }

    /// Suffix sums anchored at `(t1, end)`: entry `(t, S)` is the log of the
    /// total weight of fillings of positions `t+1..=t1` from `S` to `end`.
    /// With `start = Some(S_start)` only supersets of the cut-`t0` set are kept.
    pub fn backward(&self, t1: usize, end: u64, t0: usize, start: Option<u64>) -> Result<Tables> {
        self.backward_impl(t1, end, t0, start, None)
    }

    /// [`BandDp::backward`] restricted to the states stored in `support`,
    /// typically forward tables anchored at the start. Pruning then acts
    /// relative to the best supported state of each column, so a start far
    /// below the column optimum still survives.
    pub fn backward_within(&self, t1: usize, end: u64, t0: usize, start: Option<u64>, support: &Tables) -> Result<Tables> {
        self.backward_impl(t1, end, t0, start, Some(support))
    }

    fn backward_impl(
        &self,
        t1: usize,
        end: u64,
        t0: usize,
        start: Option<u64>,
        support: Option<&Tables>,
    ) -> Result<Tables> {
        let mut rev = vec![Column {
            cut: t1,
            entries: vec![(end, 0.0)],
        }];
        for t in (t0..t1).rev() {
            let next_col = rev.last().expect("nonempty");
            let lo = self.lo_cut[t];
            let w = self.width(t);
            let shift = self.lo_cut[t + 1] - lo;
            let mut buf = Vec::with_capacity(next_col.entries.len() * 2);
            for &(m2, b) in &next_col.entries {
                // S' written relative to lo_t, labels below lo_{t+1} all present
                let full: u128 = ((m2 as u128) << shift) | ((1u128 << shift) - 1);
                let mut bits = full;
                while bits != 0 {
                    let bit = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let x = lo + bit;
                    let prev = full & !(1u128 << bit);
                    if w < 128 && prev >> w != 0 {
                        continue;
                    }
                    let mask = prev as u64;
                    if !self.is_candidate(t, mask, x) {
                        continue;
                    }
                    if let Some(s) = start {
                        if !self.contains_set(t, mask, t0, s) {
                            continue;
                        }
                    }
                    if support.is_some_and(|sup| sup.get(t, mask).is_none()) {
                        continue;
                    }
                    let (check, lw) = self.transition(t, mask, x);
                    debug_assert_eq!(check, m2);
                    let v = b + lw;
                    if v > f64::NEG_INFINITY {
                        buf.push((mask, v));
                    }
                }
            }
            rev.push(self.finish_column(t, buf)?);
        }
        rev.reverse();
        Ok(Tables { first: t0, cols: rev })
    }

    /// Global prefix tables from the empty set at cut 0.
    pub fn forward_all(&self) -> Result<Tables> {
        self.forward(0, 0, self.n, None)
    }

    /// Global suffix tables ending at the full set at cut `n`.
    /// With pruning on, the suffix pass is restricted to the support of the
    /// prefix pass; suffix weights alone keep far too many states.
    pub fn backward_all(&self) -> Result<Tables> {
        match self.prune {
            None => self.backward(self.n, 0, 0, None),
            Some(_) => self.backward_within(self.n, 0, 0, None, &self.forward_all()?),
        }
    }

    /// Log partition function of the (pinned) localized measure.
    pub fn log_partition(&self) -> Result<f64> {
        let alpha = self.forward_all()?;
        Ok(alpha.get(self.n, 0).unwrap_or(f64::NEG_INFINITY))
    }

    /// Occupancy word of the prefix set `{σ(1), ..., σ(t)}`.
    pub fn prefix_mask(&self, t: usize, sigma: &Permutation) -> Result<u64> {
        let lo = self.lo_cut[t];
        let hi = self.hi_cut[t];
        for y in 1..lo {
            if sigma.position_of(y) > t {
                return Err(Error::Contract(format!(
                    "particle {y} lies outside its localization window"
                )));
            }
        }
        let mut mask = 0u64;
        for y in lo..=hi {
            if sigma.position_of(y) <= t {
                mask |= 1 << (y - lo);
            }
        }
        for y in hi + 1..=self.n {
            if sigma.position_of(y) <= t {
                return Err(Error::Contract(format!(
                    "particle {y} lies outside its localization window"
                )));
            }
        }
        Ok(mask)
    }

    /// Occupancy word of the set `[k]` at cut `k`.
    pub fn initial_segment_mask(&self, k: usize) -> u64 {
        let lo = self.lo_cut[k];
        if k < lo {
            0
        } else {
            low_bits(k + 1 - lo)
        }
    }

    /// Whether particle `y` belongs to the set encoded by `mask` at cut `t`.
    pub fn mask_contains(&self, t: usize, mask: u64, y: usize) -> bool {
        self.placed(t, mask, y)
    }

    /// Samples positions `t0+1..=t1` forward from `start`, given suffix tables
    /// anchored at the desired end. One uniform is consumed per position.
    pub fn sample_forward(&self, beta: &Tables, t0: usize, start: u64, uniforms: &[f64]) -> Result<Vec<usize>> {
        let t1 = beta.last();
        let mut out = Vec::with_capacity(t1 - t0);
        let mut cur = start;
        let mut cands = Vec::new();
        let mut weights: Vec<(u64, f64)> = Vec::new();
        for t in t0..t1 {
            self.candidates(t, cur, &mut cands);
            weights.clear();
            for &x in &cands {
                let (next, lw) = self.transition(t, cur, x);
                let v = beta.get(t + 1, next).map_or(f64::NEG_INFINITY, |b| b + lw);
                weights.push((next, v));
            }
            let pick = pick_index(&weights, uniforms[t - t0]).ok_or_else(|| {
                Error::EmptySupport(format!("no continuation from cut {t}"))
            })?;
            out.push(cands[pick]);
            cur = weights[pick].0;
        }
        Ok(out)
    }

    /// Samples positions `t0+1..=t1` backward from `end` at cut `t1`, given
    /// prefix tables anchored at the start. `uniforms[k]` drives position
    /// `t0 + 1 + k`.
    pub fn sample_backward(&self, alpha: &Tables, t1: usize, end: u64, uniforms: &[f64]) -> Result<Vec<usize>> {
        let t0 = alpha.first;
        let mut out = vec![0usize; t1 - t0];
        let mut cur = end;
        let mut opts: Vec<(usize, u64)> = Vec::new();
        let mut weights: Vec<(u64, f64)> = Vec::new();
        for t in (t0..t1).rev() {
            let lo = self.lo_cut[t];
            let w = self.width(t);
            let shift = self.lo_cut[t + 1] - lo;
            let full: u128 = ((cur as u128) << shift) | ((1u128 << shift) - 1);
            opts.clear();
            weights.clear();
            let mut bits = full;
            while bits != 0 {
                let bit = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let prev = full & !(1u128 << bit);
                if w < 128 && prev >> w != 0 {
                    continue;
                }
                let mask = prev as u64;
                let x = lo + bit;
                if !self.is_candidate(t, mask, x) {
                    continue;
                }
                let Some(a) = alpha.get(t, mask) else { continue };
                let (_, lw) = self.transition(t, mask, x);
                opts.push((x, mask));
                weights.push((mask, a + lw));
            }
            let pick = pick_index(&weights, uniforms[t - t0]).ok_or_else(|| {
                Error::EmptySupport(format!("no predecessor at cut {t}"))
            })?;
            out[t - t0] = opts[pick].0;
            cur = opts[pick].1;
        }
        Ok(out)
    }

    /// Law of the cut state at `t`: `(mask, probability)` pairs, from global
    /// prefix and suffix tables.
    pub fn cut_law(&self, alpha: &Tables, beta: &Tables, t: usize) -> Vec<(u64, f64)> {
        let log_z = alpha.get(self.n, 0).unwrap_or(f64::NEG_INFINITY);
        let a = alpha.col(t);
        let b = beta.col(t);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.entries.len() && j < b.entries.len() {
            let (ma, va) = a.entries[i];
            let (mb, vb) = b.entries[j];
            match ma.cmp(&mb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push((ma, (va + vb - log_z).exp()));
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// Exact joint law of `(σ(r1), ..., σ(r2))` as `(labels, log probability)`.
    pub fn region_law(
        &self,
        alpha: &Tables,
        beta: &Tables,
        r1: usize,
        r2: usize,
        cap: usize,
    ) -> Result<Vec<(Vec<usize>, f64)>> {
        if r1 == 0 || r2 < r1 || r2 > self.n {
            return Err(Error::Contract(format!("invalid region [{r1}, {r2}]")));
        }
        let log_z = alpha.get(self.n, 0).unwrap_or(f64::NEG_INFINITY);
        if log_z == f64::NEG_INFINITY {
            return Err(Error::EmptySupport("no localized completion".into()));
        }
        let mut acc: HashMap<Vec<usize>, f64> = HashMap::new();
        let mut path = Vec::with_capacity(r2 - r1 + 1);
        for &(mask, a) in &alpha.col(r1 - 1).entries {
            self.region_dfs(beta, r1 - 1, r2, mask, a, &mut path, &mut acc, cap)?;
        }
        let mut out: Vec<(Vec<usize>, f64)> = acc.into_iter().map(|(k, v)| (k, v - log_z)).collect();
        out.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn region_dfs(
        &self,
        beta: &Tables,
        t: usize,
        r2: usize,
        mask: u64,
        acc_w: f64,
        path: &mut Vec<usize>,
        acc: &mut HashMap<Vec<usize>, f64>,
        cap: usize,
    ) -> Result<()> {
        if t == r2 {
            if let Some(b) = beta.get(t, mask) {
                let v = acc_w + b;
                if v > f64::NEG_INFINITY {
                    if !acc.contains_key(path.as_slice()) && acc.len() >= cap {
                        return Err(Error::StateCap(format!(
                            "more than {cap} distinct region assignments"
                        )));
                    }
                    let e = acc.entry(path.clone()).or_insert(f64::NEG_INFINITY);
                    *e = log_add(*e, v);
                }
            }
            return Ok(());
        }
        let mut cands = Vec::new();
        self.candidates(t, mask, &mut cands);
        for x in cands {
            let (next, lw) = self.transition(t, mask, x);
            if lw == f64::NEG_INFINITY || beta.get(t + 1, next).is_none() {
                continue;
            }
            path.push(x);
            self.region_dfs(beta, t + 1, r2, next, acc_w + lw, path, acc, cap)?;
            path.pop();
        }
        Ok(())
    }
}

#[inline]
fn low_bits(w: usize) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

/// Inverse-CDF choice among log weights; `None` if all weights vanish.
fn pick_index(weights: &[(u64, f64)], u: f64) -> Option<usize> {
    let max = weights.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let total: f64 = weights.iter().map(|e| (e.1 - max).exp()).sum();
    let target = u * total;
    let mut cum = 0.0;
    let mut last = None;
    for (i, e) in weights.iter().enumerate() {
        if e.1 == f64::NEG_INFINITY {
            continue;
        }
        cum += (e.1 - max).exp();
        last = Some(i);
        if target < cum {
            return Some(i);
        }
    }
    last
}

/// A reusable exact sampler for the localized stationary measure.
#[derive(Clone, Debug)]
pub struct BandSampler {
    dp: BandDp,
    beta: Tables,
}

impl BandSampler {
    pub fn new(p: &BiasMatrix, ell: &LocalizationVector, caps: &Caps) -> Result<Self> {
        let dp = BandDp::new(p, ell, caps)?;
        let beta = dp.backward_all()?;
        Ok(Self { dp, beta })
    }

    pub fn from_dp(dp: BandDp) -> Result<Self> {
        let beta = dp.backward_all()?;
        Ok(Self { dp, beta })
    }

    pub fn log_partition(&self) -> f64 {
        self.beta.get(0, 0).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn dp(&self) -> &BandDp {
        &self.dp
    }

    pub fn beta(&self) -> &Tables {
        &self.beta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Permutation> {
        let uniforms: Vec<f64> = (0..self.dp.n).map(|_| rng.random::<f64>()).collect();
        self.sample_with(&uniforms)
    }

    /// A draw driven by explicit uniforms, one per position.
    pub fn sample_with(&self, uniforms: &[f64]) -> Result<Permutation> {
        let line = self.dp.sample_forward(&self.beta, 0, 0, uniforms)?;
        Ok(Permutation::from_one_line_unchecked(line))
    }
}

/// Log of `Σ_{σ localized} Π_{i<j} p_{σ(i),σ(j)}`.
pub fn band_dp_partition(p: &BiasMatrix, ell: &LocalizationVector, caps: &Caps) -> Result<f64> {
    BandDp::new(p, ell, caps)?.log_partition()
}

/// One exact draw from the localized stationary measure.
pub fn band_dp_sample<R: Rng + ?Sized>(
    p: &BiasMatrix,
    ell: &LocalizationVector,
    caps: &Caps,
    rng: &mut R,
) -> Result<Permutation> {
    BandSampler::new(p, ell, caps)?.sample(rng)
}

/// Exact law of `σ(region)` given the boundary and localization.
pub fn band_dp_conditional_marginal(
    p: &BiasMatrix,
    ell: &LocalizationVector,
    boundary: &BoundaryAssignment,
    region: (usize, usize),
    caps: &Caps,
) -> Result<DistributionTable<Vec<usize>>> {
    let (a, b) = boundary.free_interval();
    if region.0 < a || region.1 > b || region.0 > region.1 {
        return Err(Error::Contract(format!(
            "region [{}, {}] is not inside the free interval [{a}, {b}]",
            region.0, region.1
        )));
    }
    if !boundary.is_localized(ell) {
        return Err(Error::EmptySupport(
            "boundary places a particle outside its window".into(),
        ));
    }
    let dp = BandDp::new(p, ell, caps)?.with_pins(boundary.pins())?;
    let alpha = dp.forward_all().map_err(empty_conditional)?;
    let beta = dp.backward_all().map_err(empty_conditional)?;
    let law = dp.region_law(&alpha, &beta, region.0, region.1, caps.region_states)?;
    let log_z = alpha.get(dp.n(), 0).unwrap_or(f64::NEG_INFINITY);
    let (support, log_p): (Vec<_>, Vec<_>) = law.into_iter().unzip();
    let mut table = DistributionTable::from_log_weights(support, &log_p)?;
    table.log_z = log_z;
    debug_assert!((log_sum_exp(&log_p)).abs() < 1e-9);
    Ok(table)
}

fn empty_conditional(e: Error) -> Error {
    match e {
        Error::EmptySupport(_) => Error::EmptySupport("boundary admits no localized completion".into()),
        other => other,
    }
}
