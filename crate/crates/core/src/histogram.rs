//! Vote ingestion, histogram construction, sorting, gap queries, and top-k
//! extraction.
//!
//! The counting model: each user may vote for an arbitrary subset of the `m`
//! candidates, and a `(user, candidate)` pair contributes at most one count no
//! matter how often it appears in the input. Neighboring datasets differ in
//! one user's entire vote vector, so adding or removing a user moves every
//! count by at most one.

use std::collections::{BTreeSet, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Per-candidate non-negative counts over a fixed candidate domain `[0, m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    /// Dense counts; `counts.len()` is the domain size `m >= 1`.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::param("m", "candidate domain must be non-empty"));
        }
        Ok(Self { counts })
    }

    /// Builds the histogram from raw votes, deduplicating repeated
    /// `(user, candidate)` pairs.
    pub fn build<U, I>(votes: I, m: usize) -> Result<Self>
    where
        U: Eq + Hash,
        I: IntoIterator<Item = (U, usize)>,
    {
        if m == 0 {
            return Err(Error::param("m", "candidate domain must be non-empty"));
        }
        let mut counts = vec![0u64; m];
        let mut seen: HashSet<(U, usize)> = HashSet::new();
        for (user, candidate) in votes {
            if candidate >= m {
                return Err(Error::CandidateOutOfRange { id: candidate, m });
            }
            if seen.insert((user, candidate)) {
                counts[candidate] += 1;
            }
        }
        Ok(Self { counts })
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, candidate: usize) -> u64 {
        self.counts.get(candidate).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sorted(&self) -> SortedView {
        SortedView::of(self)
    }
}

/// Descending-count permutation of a histogram, with ties broken by ascending
/// candidate id so that every downstream mechanism is reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedView {
    order: Vec<usize>,
    counts: Vec<u64>,
}

impl SortedView {
    fn of(h: &Histogram) -> Self {
        let mut order: Vec<usize> = (0..h.m()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(h.counts[i]), i));
        let counts = order.iter().map(|&i| h.counts[i]).collect();
        Self { order, counts }
    }

    /// Direct construction from already-sorted counts (rank r holds candidate
    /// id `r-1`). Errors if the sequence increases anywhere.
    pub fn from_sorted_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::param("counts", "must be non-empty"));
        }
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::param("counts", "must be non-increasing"));
        }
        let order = (0..counts.len()).collect();
        Ok(Self { order, counts })
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }

    /// Candidate ids in rank order (rank 1 first).
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Counts in rank order.
    pub fn sorted_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count at 1-based rank `j`; ranks beyond `m` are zero by convention so
    /// the gap is total on `[1, m]`.
    pub fn count_at_rank(&self, j: usize) -> u64 {
        if j == 0 || j > self.m() {
            0
        } else {
            self.counts[j - 1]
        }
    }

    /// Gap `q_j` between the j-th and (j+1)-th largest counts.
    pub fn gap(&self, j: usize) -> Result<u64> {
        if j < 1 || j > self.m() {
            return Err(Error::RankOutOfRange {
                rank: j,
                lo: 1,
                hi: self.m(),
            });
        }
        Ok(self.count_at_rank(j) - self.count_at_rank(j + 1))
    }

    /// The unordered index set of the top `k` candidates.
    pub fn top_k_indices(&self, k: usize) -> Result<SelectionOutcome> {
        if k < 1 || k > self.m() {
            return Err(Error::RankOutOfRange {
                rank: k,
                lo: 1,
                hi: self.m(),
            });
        }
        Ok(SelectionOutcome::Indices(
            self.order[..k].iter().copied().collect(),
        ))
    }

    /// Plain set variant of [`Self::top_k_indices`] for internal use.
    pub(crate) fn top_k_set(&self, k: usize) -> BTreeSet<usize> {
        self.order[..k].iter().copied().collect()
    }
}

/// Result of a selection mechanism: either the refusal outcome or an
/// unordered set of candidate ids.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub enum SelectionOutcome {
    /// The mechanism declined to release a set.
    Bottom,
    Indices(BTreeSet<usize>),
}

impl SelectionOutcome {
    pub fn is_bottom(&self) -> bool {
        matches!(self, SelectionOutcome::Bottom)
    }

    pub fn indices(&self) -> Option<&BTreeSet<usize>> {
        match self {
            SelectionOutcome::Bottom => None,
            SelectionOutcome::Indices(s) => Some(s),
        }
    }
}

// Refusal serializes as `null` so callers cannot mistake it for an empty set.
impl Serialize for SelectionOutcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SelectionOutcome::Bottom => serializer.serialize_none(),
            SelectionOutcome::Indices(s) => serializer.collect_seq(s.iter()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_deduplicates_user_candidate_pairs() {
        let votes = vec![("u1", 0), ("u1", 0), ("u2", 0), ("u1", 1)];
        let h = Histogram::build(votes, 3).unwrap();
        assert_eq!(h.counts(), &[2, 1, 0]);
    }

    #[test]
    fn build_empty_and_full_vote_vectors() {
        let h = Histogram::build(Vec::<(&str, usize)>::new(), 4).unwrap();
        assert_eq!(h.counts(), &[0, 0, 0, 0]);

        let votes: Vec<(&str, usize)> = (0..5).map(|c| ("solo", c)).collect();
        let h = Histogram::build(votes, 5).unwrap();
        assert_eq!(h.counts(), &[1, 1, 1, 1, 1]);
    }

    #[test]
    fn build_rejects_out_of_range_candidate() {
        let err = Histogram::build(vec![("u", 3)], 3).unwrap_err();
        assert!(matches!(err, Error::CandidateOutOfRange { id: 3, m: 3 }));
    }

    #[test]
    fn sort_breaks_ties_by_ascending_id() {
        let h = Histogram::from_counts(vec![3, 9, 3]).unwrap();
        assert_eq!(h.sorted().order(), &[1, 0, 2]);

        let h = Histogram::from_counts(vec![4, 4, 4]).unwrap();
        assert_eq!(h.sorted().order(), &[0, 1, 2]);

        let h = Histogram::from_counts(vec![0, 0, 5]).unwrap();
        assert_eq!(h.sorted().order(), &[2, 0, 1]);
    }

    #[test]
    fn gap_with_zero_extension() {
        let sv = SortedView::from_sorted_counts(vec![10, 7, 3]).unwrap();
        assert_eq!(sv.gap(1).unwrap(), 3);
        assert_eq!(sv.gap(2).unwrap(), 4);
        assert_eq!(sv.gap(3).unwrap(), 3); // rank m+1 counts as zero
        assert!(sv.gap(0).is_err());
        assert!(sv.gap(4).is_err());

        let flat = SortedView::from_sorted_counts(vec![5, 5, 4]).unwrap();
        assert_eq!(flat.gap(1).unwrap(), 0);
    }

    #[test]
    fn top_k_as_unordered_set() {
        let h = Histogram::from_counts(vec![3, 9, 3]).unwrap();
        let sv = h.sorted();
        assert_eq!(
            sv.top_k_indices(2).unwrap(),
            SelectionOutcome::Indices([0, 1].into())
        );
        assert_eq!(
            sv.top_k_indices(3).unwrap(),
            SelectionOutcome::Indices([0, 1, 2].into())
        );
        let sv = Histogram::from_counts(vec![10, 7, 3]).unwrap().sorted();
        assert_eq!(
            sv.top_k_indices(1).unwrap(),
            SelectionOutcome::Indices([0].into())
        );
        assert!(sv.top_k_indices(0).is_err());
        assert!(sv.top_k_indices(4).is_err());
    }

    #[test]
    fn bottom_serializes_as_null() {
        let b = serde_json::to_string(&SelectionOutcome::Bottom).unwrap();
        assert_eq!(b, "null");
        let s = serde_json::to_string(&SelectionOutcome::Indices([2, 0].into())).unwrap();
        assert_eq!(s, "[0,2]");
    }

    /// All histograms with `m` bins and counts bounded by `cmax`.
    fn all_histograms(m: usize, cmax: u64) -> Vec<Vec<u64>> {
        let mut out = vec![vec![]];
        for _ in 0..m {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (0..=cmax).map(move |c| {
                        let mut v = v.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// One-user neighbors: add or remove a full vote vector in {0,1}^m.
    fn neighbors(counts: &[u64]) -> Vec<Vec<u64>> {
        let m = counts.len();
        let mut out = Vec::new();
        for mask in 0u32..(1 << m) {
            let mut add = counts.to_vec();
            let mut rem = counts.to_vec();
            let mut rem_ok = true;
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    add[i] += 1;
                    if rem[i] == 0 {
                        rem_ok = false;
                    } else {
                        rem[i] -= 1;
                    }
                }
            }
            out.push(add);
            if rem_ok {
                out.push(rem);
            }
        }
        out
    }

    #[test]
    fn gap_changes_by_at_most_one_across_neighbors() {
        // Exhaustive over small histograms: adding or removing one user's
        // votes moves every gap by at most 1.
        for m in 2..=4 {
            for counts in all_histograms(m, 3) {
                let sv = Histogram::from_counts(counts.clone()).unwrap().sorted();
                for nb in neighbors(&counts) {
                    let nsv = Histogram::from_counts(nb).unwrap().sorted();
                    for j in 1..=m {
                        let a = sv.gap(j).unwrap() as i64;
                        let b = nsv.gap(j).unwrap() as i64;
                        assert!((a - b).abs() <= 1, "counts {counts:?} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn gap_above_one_pins_the_top_k_set() {
        for m in 2..=4 {
            for counts in all_histograms(m, 3) {
                let sv = Histogram::from_counts(counts.clone()).unwrap().sorted();
                for k in 1..m {
                    if sv.gap(k).unwrap() > 1 {
                        let base = sv.top_k_set(k);
                        for nb in neighbors(&counts) {
                            let nsv = Histogram::from_counts(nb.clone()).unwrap().sorted();
                            assert_eq!(nsv.top_k_set(k), base, "counts {counts:?} -> {nb:?} k={k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sorted_view_stable_under_relabeling() {
        // Relabeling candidates and inverting the relabeling preserves the
        // sorted counts and maps the order through the permutation.
        let counts = vec![2, 7, 7, 0, 3];
        let perm = [4usize, 2, 0, 1, 3]; // new id of each old id
        let mut relabeled = vec![0u64; counts.len()];
        for (old, &new) in perm.iter().enumerate() {
            relabeled[new] = counts[old];
        }
        let sv = Histogram::from_counts(counts.clone()).unwrap().sorted();
        let rsv = Histogram::from_counts(relabeled).unwrap().sorted();
        assert_eq!(sv.sorted_counts(), rsv.sorted_counts());
        let mapped_back: Vec<usize> = rsv
            .order()
            .iter()
            .map(|&new| perm.iter().position(|&p| p == new).unwrap())
            .collect();
        let set_a: BTreeSet<_> = sv.order()[..2].iter().collect();
        let set_b: BTreeSet<_> = mapped_back[..2].iter().collect();
        assert_eq!(set_a, set_b);
    }
}
