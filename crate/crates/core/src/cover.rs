//! Exclusion masks and exact small-cardinality set cover over them.
//!
//! A mask records which negative sample points a halfspace excludes; a
//! polyhedron built from halfspaces `H_1..H_t'` classifies every negative
//! correctly iff the OR of their masks is all ones.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExclusionMask {
    words: Vec<u64>,
    len: usize,
}

impl ExclusionMask {
    pub fn new(len: usize) -> Self {
        ExclusionMask { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn full(len: usize) -> Self {
        let mut m = Self::new(len);
        for i in 0..len {
            m.set(i);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &Self) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect();
        ExclusionMask { words, len: self.len }
    }

    pub fn intersection_count(&self, other: &Self) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words.iter().enumerate().find(|(_, w)| **w != 0).map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    pub fn first_zero(&self) -> Option<usize> {
        (0..self.len).find(|&i| !self.get(i))
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    /// Parses a bit string where character `i` is bit `i` (`"1100"` has bits
    /// 0 and 1 set).
    pub fn from_bit_str(s: &str) -> Self {
        let mut m = Self::new(s.len());
        for (i, c) in s.chars().enumerate() {
            if c == '1' {
                m.set(i);
            }
        }
        m
    }
}

impl fmt::Debug for ExclusionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
        write!(f, "ExclusionMask({s})")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoverStats {
    /// Candidate masks left after dedup and dominance filtering.
    pub candidates: usize,
    /// Search nodes expanded by the depth-first search.
    pub expansions: usize,
}

/// Selects at most `t` masks whose union covers all `n_neg` bits, returning
/// their positions in `masks`, or `None` if no such selection exists.
pub fn assemble_cover(masks: &[ExclusionMask], t: usize, n_neg: usize) -> Option<Vec<usize>> {
    assemble_cover_with_stats(masks, t, n_neg).0
}

/// [`assemble_cover`] plus search statistics.
///
/// Identical masks are collapsed and masks contained in another mask are
/// dropped, which cannot lose a solution; the remaining candidates are
/// searched exhaustively, always branching on the lowest uncovered bit.
pub fn assemble_cover_with_stats(masks: &[ExclusionMask], t: usize, n_neg: usize) -> (Option<Vec<usize>>, CoverStats) {
    let mut stats = CoverStats::default();
    if n_neg == 0 {
        return (Some(Vec::new()), stats);
    }
    if t == 0 {
        return (None, stats);
    }

    let mut order: Vec<usize> = (0..masks.len()).filter(|&i| !masks[i].is_empty()).collect();
    order.sort_by(|&a, &b| masks[b].count().cmp(&masks[a].count()).then(a.cmp(&b)));
    order.dedup_by(|b, a| masks[*a] == masks[*b]);

    // descending popcount: a mask can only be contained in an earlier one
    let mut kept: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        if !kept.iter().any(|&k| masks[i].is_subset_of(&masks[k])) {
            kept.push(i);
        }
    }
    stats.candidates = kept.len();

    let full = ExclusionMask::full(n_neg);
    let mut union = ExclusionMask::new(n_neg);
    for &k in &kept {
        union.union_with(&masks[k]);
    }
    if union != full {
        return (None, stats);
    }

    let candidates: Vec<&ExclusionMask> = kept.iter().map(|&k| &masks[k]).collect();
    let mut chosen = Vec::with_capacity(t);
    if dfs(&candidates, &full, t, &mut chosen, &mut stats) {
        let picked = chosen.into_iter().map(|c| kept[c]).collect();
        (Some(picked), stats)
    } else {
        (None, stats)
    }
}

fn dfs(
    candidates: &[&ExclusionMask],
    uncovered: &ExclusionMask,
    budget: usize,
    chosen: &mut Vec<usize>,
    stats: &mut CoverStats,
) -> bool {
    stats.expansions += 1;
    let Some(bit) = uncovered.first_one() else {
        return true;
    };
    if budget == 0 {
        return false;
    }
    let remaining = uncovered.count();
    let best_gain = candidates.iter().map(|m| m.intersection_count(uncovered)).max().unwrap_or(0);
    if remaining > budget * best_gain {
        return false;
    }
    for (c, mask) in candidates.iter().enumerate() {
        if !mask.get(bit) {
            continue;
        }
        chosen.push(c);
        if dfs(candidates, &uncovered.minus(mask), budget - 1, chosen, stats) {
            return true;
        }
        chosen.pop();
    }
    false
}
