use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which neighbouring intervals are considered to
/// touch and are merged.
const MERGE_RTOL: f64 = 1e-15;

/// A finite union of closed intervals on the real line, stored sorted and
/// pairwise disjoint.
///
/// Serialises as a JSON array of `[lo, hi]` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Builds a union from arbitrary (possibly overlapping, unsorted)
    /// intervals. Overlapping or touching intervals are merged.
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut raw: Vec<(f64, f64)> = intervals.into_iter().collect();
        for &(lo, hi) in &raw {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::domain("interval", format!("non-finite endpoint in [{lo}, {hi}]")));
            }
            if lo >= hi {
                return Err(Error::domain("interval", format!("empty or reversed interval [{lo}, {hi}]")));
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted_unchecked(raw))
    }

    /// Merges an already sorted list (by `lo`) without re-validating it.
    pub(crate) fn from_sorted_unchecked(sorted: Vec<(f64, f64)>) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (lo, hi) in sorted {
            match merged.last_mut() {
                Some(last) if lo <= last.1 + MERGE_RTOL * last.1.abs().max(lo.abs()).max(1.0) => {
                    last.1 = last.1.max(hi);
                }
                _ => merged.push((lo, hi)),
            }
        }
        Self { intervals: merged }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Number of disjoint intervals.
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Smallest closed interval containing the union.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }

    pub fn diameter(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| hi - lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.intervals.partition_point(|&(lo, _)| lo <= x);
        idx > 0 && x <= self.intervals[idx - 1].1
    }

    /// `{x + dx : x in self}`.
    pub fn translate(&self, dx: f64) -> Self {
        Self {
            intervals: self.intervals.iter().map(|&(lo, hi)| (lo + dx, hi + dx)).collect(),
        }
    }

    /// `{s x : x in self}` for `s > 0`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain("scale", format!("scale factor must be positive, got {s}")));
        }
        Ok(Self {
            intervals: self.intervals.iter().map(|&(lo, hi)| (s * lo, s * hi)).collect(),
        })
    }

    /// `{-x : x in self}`.
    pub fn mirror(&self) -> Self {
        Self {
            intervals: self.intervals.iter().rev().map(|&(lo, hi)| (-hi, -lo)).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all: Vec<(f64, f64)> = self.intervals.iter().chain(&other.intervals).copied().collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_sorted_unchecked(all)
    }

    /// `mes(self ∩ (other + shift))` by a linear merge sweep.
    pub fn overlap_measure(&self, other: &Self, shift: f64) -> f64 {
        let b = &other.intervals;
        let mut j = 0;
        let mut total = 0.0;
        for &(lo, hi) in &self.intervals {
            while j < b.len() && b[j].1 + shift <= lo {
                j += 1;
            }
            let mut k = j;
            while k < b.len() && b[k].0 + shift < hi {
                let (blo, bhi) = (b[k].0 + shift, b[k].1 + shift);
                let overlap = hi.min(bhi) - lo.max(blo);
                if overlap > 0.0 {
                    total += overlap;
                }
                k += 1;
            }
        }
        total
    }

    /// `mes(self \ (other + shift))`, summed interval by interval so that
    /// small differences are not lost against the total measure.
    pub fn difference_measure(&self, other: &Self, shift: f64) -> f64 {
        let b = &other.intervals;
        let mut j = 0;
        let mut total = 0.0;
        for &(lo, hi) in &self.intervals {
            while j < b.len() && b[j].1 + shift <= lo {
                j += 1;
            }
            // uncovered length of [lo, hi]
            let mut cursor = lo;
            let mut uncovered = 0.0;
            let mut k = j;
            while k < b.len() && b[k].0 + shift < hi {
                let (blo, bhi) = (b[k].0 + shift, b[k].1 + shift);
                if blo > cursor {
                    uncovered += blo - cursor;
                }
                cursor = cursor.max(bhi);
                if cursor >= hi {
                    break;
                }
                k += 1;
            }
            if cursor < hi {
                uncovered += hi - cursor;
            }
            total += uncovered;
        }
        total
    }

    /// Every pairwise endpoint difference `x_i - x_j` with `x_i > x_j`,
    /// sorted and deduplicated. These are the kinks of the piecewise linear
    /// autocorrelation `h -> mes(self ∩ (self + h))`.
    pub fn autocorrelation_breakpoints(&self) -> Vec<f64> {
        let ends: Vec<f64> = self.intervals.iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
        let mut out = Vec::with_capacity(ends.len() * ends.len() / 2);
        for (i, &a) in ends.iter().enumerate() {
            for &b in &ends[..i] {
                out.push(a - b);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
        out
    }
}

impl TryFrom<Vec<[f64; 2]>> for IntervalUnion {
    type Error = Error;

    fn try_from(value: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(value.into_iter().map(|[lo, hi]| (lo, hi)))
    }
}

impl From<IntervalUnion> for Vec<[f64; 2]> {
    fn from(value: IntervalUnion) -> Self {
        value.intervals.into_iter().map(|(lo, hi)| [lo, hi]).collect()
    }
}

/// `mes(A \ (A - h))`, where `A - h = {x - h : x in A}`.
pub fn set_difference_measure(a: &IntervalUnion, h: f64) -> f64 {
    if h == 0.0 || a.is_empty() {
        return 0.0;
    }
    a.difference_measure(a, -h)
}

/// Squared L2 modulus of continuity of the indicator of `a` at shift `h`:
/// `mes(A \ A_h) + mes(A \ A_{-h})`.
pub fn modulus_sq(a: &IntervalUnion, h: f64) -> f64 {
    set_difference_measure(a, h) + set_difference_measure(a, -h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(iv: &[(f64, f64)]) -> IntervalUnion {
        IntervalUnion::new(iv.iter().copied()).unwrap()
    }

    #[test]
    fn merges_and_sorts() {
        let a = u(&[(2.0, 3.0), (0.0, 1.0), (0.5, 1.5), (1.5, 1.75)]);
        assert_eq!(a.intervals(), &[(0.0, 1.75), (2.0, 3.0)]);
        assert_eq!(a.measure(), 2.75);
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(IntervalUnion::new([(1.0, 1.0)]).is_err());
        assert!(IntervalUnion::new([(2.0, 1.0)]).is_err());
        assert!(IntervalUnion::new([(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn shifted_unit_interval() {
        let a = u(&[(0.0, 1.0)]);
        assert_eq!(set_difference_measure(&a, 0.25), 0.25);
        assert_eq!(set_difference_measure(&a, 0.0), 0.0);
        assert_eq!(modulus_sq(&a, 0.25), 0.5);
        assert_eq!(set_difference_measure(&a, 5.0), 1.0);
    }

    #[test]
    fn two_intervals_with_gap() {
        // [0,1] ∪ [2,3] shifted left by 1.5 is [-1.5,-0.5] ∪ [0.5,1.5]
        let a = u(&[(0.0, 1.0), (2.0, 3.0)]);
        assert!((set_difference_measure(&a, 1.5) - 1.5).abs() < 1e-15);
        assert!((set_difference_measure(&a, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mirror_symmetry() {
        let a = u(&[(0.0, 0.3), (0.7, 2.0), (2.5, 2.6)]);
        for h in [0.05, 0.4, 1.3] {
            let lhs = set_difference_measure(&a, h);
            let rhs = set_difference_measure(&a.mirror(), -h);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn contains_and_bounds() {
        let a = u(&[(0.0, 1.0), (2.0, 3.0)]);
        assert!(a.contains(0.0) && a.contains(1.0) && a.contains(2.5));
        assert!(!a.contains(1.5) && !a.contains(-0.1) && !a.contains(3.1));
        assert_eq!(a.bounds(), Some((0.0, 3.0)));
        assert_eq!(IntervalUnion::empty().bounds(), None);
    }

    #[test]
    fn json_is_array_of_pairs() {
        let a = u(&[(0.0, 1.0), (2.0, 3.5)]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[0.0,1.0],[2.0,3.5]]");
        let back: IntervalUnion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<IntervalUnion>("[[1.0,0.0]]").is_err());
    }

    #[test]
    fn breakpoints_of_unit_interval() {
        let a = u(&[(0.0, 1.0)]);
        assert_eq!(a.autocorrelation_breakpoints(), vec![1.0]);
    }
}
