//! Cantor-like sets whose indicator has a prescribed L² modulus of
//! continuity exponent.
//!
//! `Ω_α ⊂ [0, α]` is built by *adding* intervals: the middle `q`-part of
//! `[0, α]` is added, the middle `q`-part of each of the two remaining pieces
//! is skipped, the middle `q`-part of each of the four pieces left after that
//! is added, and so on. Generation `k` therefore adds `4^k` intervals of
//! length `α q Q^{2k}` with `Q = (1 - q)/2`. A finite union of scaled copies
//! `Ω_{γ^j}` closes the gaps between the shift bands on which the lower
//! modulus estimate holds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::IntervalUnion;
use crate::error::{Error, Result};

/// Smallest interval length targeted by the default truncation depth.
pub const MIN_DEFAULT_LENGTH: f64 = 1.0 / (1u64 << 40) as f64;

/// Upper bound on the number of intervals of one materialised copy `Ω_α`
/// under the default depth.
pub const MAX_COPY_INTERVALS: usize = 1 << 18;

/// Hard cap for explicit materialisation requests.
pub const HARD_MAX_INTERVALS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    beta: f64,
    big_q: f64,
    q: f64,
    gamma: f64,
    copies: usize,
    depth: usize,
}

impl CantorParams {
    /// Modulus exponent `β = 1 - log 2 / log(1/Q)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Length ratio `Q = (1 - q)/2` of the pieces left beside a middle part.
    #[allow(non_snake_case)]
    pub fn Q(&self) -> f64 {
        self.big_q
    }

    /// Relative length of the middle part.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Scale ratio between consecutive copies, `(q + Q²)/(qQ + Q²)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number `N` of extra scaled copies `Ω_γ, ..., Ω_{γ^N}`.
    pub fn n_copies(&self) -> usize {
        self.copies
    }

    /// Last generation included in the truncated construction.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    /// `a_k = (q + Q) Q^{2k}` for `α = 1`: lower end of the `k`-th shift band.
    pub fn band_lower(&self, k: usize) -> f64 {
        (self.q + self.big_q) * self.big_q.powi(2 * k as i32)
    }

    /// `b_k = (q/Q + Q) Q^{2k}` for `α = 1`.
    pub fn band_upper(&self, k: usize) -> f64 {
        (self.q / self.big_q + self.big_q) * self.big_q.powi(2 * k as i32)
    }

    /// Number of intervals in one truncated copy, `Σ_{k ≤ depth} 4^k`.
    pub fn intervals_per_copy(&self) -> usize {
        intervals_up_to(self.depth)
    }

    /// Total measure of the infinite `Ω_α` at `α = 1`, `q / (1 - 4Q²)`.
    pub fn limit_measure(&self) -> f64 {
        self.q / (1.0 - 4.0 * self.big_q * self.big_q)
    }
}

fn intervals_up_to(depth: usize) -> usize {
    // (4^{depth+1} - 1) / 3, saturating
    let mut total: usize = 0;
    let mut gen: usize = 1;
    for _ in 0..=depth {
        total = total.saturating_add(gen);
        gen = gen.saturating_mul(4);
    }
    total
}

/// Derives `Q`, `q`, `γ`, `N` and a default truncation depth from the target
/// exponent `β`.
pub fn cantor_params_from_beta(beta: f64) -> Result<CantorParams> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain("beta", format!("must lie in (0, 1), got {beta}")));
    }
    let big_q = 2f64.powf(-1.0 / (1.0 - beta));
    let q = 1.0 - 2.0 * big_q;
    let q2 = big_q * big_q;
    let gamma = (q + q2) / (q * big_q + q2);
    let target = (q + big_q) / (q * big_q + q2 * big_q);
    let mut copies = 1;
    while gamma.powi(copies as i32) < target {
        copies += 1;
    }
    let mut depth = 0;
    while q * big_q.powi(2 * (depth as i32 + 1)) >= MIN_DEFAULT_LENGTH
        && intervals_up_to(depth + 1) <= MAX_COPY_INTERVALS
    {
        depth += 1;
    }
    Ok(CantorParams {
        beta,
        big_q,
        q,
        gamma,
        copies,
        depth,
    })
}

fn check_truncation(params: &CantorParams, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain("alpha", format!("must be positive, got {alpha}")));
    }
    let smallest = alpha * params.q * params.big_q.powi(2 * params.depth as i32);
    if !(smallest >= f64::MIN_POSITIVE) {
        return Err(Error::Truncation(format!(
            "depth {} gives interval length {smallest:e} below 2^-1022",
            params.depth
        )));
    }
    Ok(())
}

/// The truncated set `Ω_α ⊂ [0, α]` (generations `0..=depth`).
pub fn build_cantor_omega(params: &CantorParams, alpha: f64) -> Result<IntervalUnion> {
    check_truncation(params, alpha)?;
    let count = params.intervals_per_copy();
    if count > HARD_MAX_INTERVALS {
        return Err(Error::Truncation(format!(
            "depth {} needs {count} intervals, more than the cap of {HARD_MAX_INTERVALS}",
            params.depth
        )));
    }
    let (big_q, q) = (params.big_q, params.q);
    let mut out = Vec::with_capacity(count);
    let mut blocks = vec![0.0f64];
    for k in 0..=params.depth {
        let len = alpha * big_q.powi(2 * k as i32);
        let last = k == params.depth;
        let mut next = Vec::with_capacity(if last { 0 } else { blocks.len() * 4 });
        for &s in &blocks {
            out.push((s + len * big_q, s + len * (big_q + q)));
            if !last {
                next.extend(child_offsets(len, big_q).map(|o| s + o));
            }
        }
        blocks = next;
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let set = IntervalUnion::from_sorted_unchecked(out);
    if set.len() != count {
        return Err(Error::Truncation(format!(
            "depth {} is not resolvable in double precision: expected {count} disjoint intervals, got {} after merging",
            params.depth,
            set.len()
        )));
    }
    Ok(set)
}

/// Start offsets of the four sub-blocks of a block of length `len`.
fn child_offsets(len: f64, big_q: f64) -> [f64; 4] {
    let q2 = big_q * big_q;
    [0.0, len * (big_q - q2), len * (1.0 - big_q), len * (1.0 - q2)]
}

/// One scaled, translated copy `Ω_α + shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorCopy {
    pub alpha: f64,
    pub shift: f64,
}

/// The union `Ω_1 ∪ (Ω_γ + s_1) ∪ ... ∪ (Ω_{γ^N} + s_N)` kept in structured
/// form. Copy `j` sits a unit gap to the left of copy `j - 1`, i.e.
/// `s_j = -Σ_{i=1..j} (1 + γ^i)`.
///
/// The structured form allows evaluating the Fourier transform of the
/// indicator in `O(depth)` per frequency instead of `O(4^depth)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorSet {
    params: CantorParams,
    copies: Vec<CantorCopy>,
}

impl CantorSet {
    pub fn new(params: CantorParams) -> Result<Self> {
        check_truncation(&params, 1.0)?;
        let mut copies = Vec::with_capacity(params.copies + 1);
        let mut shift = 0.0;
        for j in 0..=params.copies {
            let alpha = params.gamma.powi(j as i32);
            if j > 0 {
                shift -= 1.0 + alpha;
            }
            copies.push(CantorCopy { alpha, shift });
        }
        Ok(Self { params, copies })
    }

    pub fn from_beta(beta: f64) -> Result<Self> {
        Self::new(cantor_params_from_beta(beta)?)
    }

    pub fn params(&self) -> &CantorParams {
        &self.params
    }

    pub fn copies(&self) -> &[CantorCopy] {
        &self.copies
    }

    /// Measure of one truncated `Ω_α`.
    pub fn copy_measure(&self, alpha: f64) -> f64 {
        let p = &self.params;
        let ratio = 4.0 * p.big_q * p.big_q;
        let mut term = alpha * p.q;
        let mut total = 0.0;
        for _ in 0..=p.depth {
            total += term;
            term *= ratio;
        }
        total
    }

    pub fn measure(&self) -> f64 {
        self.copies.iter().map(|c| self.copy_measure(c.alpha)).sum()
    }

    /// Closed hull `[min, max]` of the set: the outermost deepest-generation
    /// intervals of the last and the first copy.
    pub fn bounds(&self) -> (f64, f64) {
        let p = &self.params;
        let edge = p.big_q.powi(2 * p.depth as i32) * p.big_q;
        let last = self.copies.last().expect("at least one copy");
        let first = &self.copies[0];
        (last.shift + last.alpha * edge, first.shift + first.alpha * (1.0 - edge))
    }

    /// Materialises the truncated union, verifying the copies are disjoint.
    pub fn to_union(&self) -> Result<IntervalUnion> {
        let mut pieces: Vec<IntervalUnion> = Vec::with_capacity(self.copies.len());
        for c in &self.copies {
            pieces.push(build_cantor_omega(&self.params, c.alpha)?.translate(c.shift));
        }
        for j in 1..pieces.len() {
            let right = pieces[j - 1].bounds().expect("nonempty copy").0;
            let left = pieces[j].bounds().expect("nonempty copy").1;
            if left >= right {
                return Err(Error::Consistency(format!(
                    "copy {j} ends at {left} but copy {} starts at {right}",
                    j - 1
                )));
            }
        }
        let mut all: Vec<(f64, f64)> = pieces
            .iter()
            .rev()
            .flat_map(|p| p.intervals().iter().copied())
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = self.copies.len() * self.params.intervals_per_copy();
        let set = IntervalUnion::from_sorted_unchecked(all);
        if set.len() != total {
            return Err(Error::Truncation(format!(
                "copies are not resolvable in double precision: {total} intervals merged into {}",
                set.len()
            )));
        }
        Ok(set)
    }

    /// Fourier transform `∫ χ(x) e^{-iux} dx` of the indicator, evaluated
    /// by the self-similar recursion
    /// `F_k(u) = Î_k(u) + G_k(u) F_{k+1}(u)`, where `Î_k` is the transform
    /// of the middle part of a generation-`k` block and `G_k` sums the phases
    /// of its four sub-blocks.
    pub fn fourier(&self, u: f64) -> Complex64 {
        self.copies
            .iter()
            .map(|c| phase(u * c.shift) * self.omega_fourier(c.alpha, u))
            .sum()
    }

    fn omega_fourier(&self, alpha: f64, u: f64) -> Complex64 {
        let p = &self.params;
        let lens: Vec<f64> = (0..=p.depth).map(|k| alpha * p.big_q.powi(2 * k as i32)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &len) in lens.iter().enumerate().rev() {
            let middle = interval_fourier(len * p.big_q, len * p.q, u);
            acc = if k == p.depth {
                middle
            } else {
                let g: Complex64 = child_offsets(len, p.big_q).iter().map(|&o| phase(u * o)).sum();
                middle + g * acc
            };
        }
        acc
    }
}

/// `e^{-i t}`.
#[inline]
pub(crate) fn phase(t: f64) -> Complex64 {
    let (s, c) = t.sin_cos();
    Complex64::new(c, -s)
}

/// Fourier transform of the indicator of `[start, start + len]`, in the
/// cancellation-free form `len sinc(u len / 2) e^{-iu(start + len/2)}`.
#[inline]
pub(crate) fn interval_fourier(start: f64, len: f64, u: f64) -> Complex64 {
    let half = 0.5 * u * len;
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    phase(u * (start + 0.5 * len)) * (len * sinc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_for_half() {
        let p = cantor_params_from_beta(0.5).unwrap();
        assert!((p.Q() - 0.25).abs() < 1e-15);
        assert!((p.q() - 0.5).abs() < 1e-15);
        assert!((p.gamma() - 3.0).abs() < 1e-14);
        assert_eq!(p.n_copies(), 2);
        let beta_back = 1.0 - 2f64.ln() / (1.0 / p.Q()).ln();
        assert!((beta_back - 0.5).abs() < 1e-14);
    }

    #[test]
    fn params_invariants_hold_across_beta() {
        for i in 1..100 {
            let beta = i as f64 / 100.0;
            let p = cantor_params_from_beta(beta).unwrap();
            let (q, big_q) = (p.q(), p.Q());
            assert!(big_q > 0.0 && big_q < 0.5);
            assert!((q - (1.0 - 2.0 * big_q)).abs() < 1e-15);
            let back = 1.0 - 2f64.ln() / (1.0 / big_q).ln();
            assert!((back - beta).abs() < 1e-14, "beta {beta}: {back}");
            let target = (q + big_q) / (q * big_q + big_q.powi(3));
            assert!(p.gamma().powi(p.n_copies() as i32) >= target);
            assert!(p.n_copies() == 1 || p.gamma().powi(p.n_copies() as i32 - 1) < target);
            assert!(p.intervals_per_copy() <= MAX_COPY_INTERVALS);
        }
    }

    #[test]
    fn beta_near_one_limits() {
        let p = cantor_params_from_beta(0.001).unwrap();
        assert!(p.Q() < 0.5 && p.Q() > 0.49);
        assert!(p.q() > 0.0 && p.q() < 0.02);
        let p = cantor_params_from_beta(0.9).unwrap();
        assert!(p.Q() < 1e-3 && p.q() > 0.99);
        let p = cantor_params_from_beta(0.99).unwrap();
        assert_eq!(p.depth(), 0);
        assert_eq!(build_cantor_omega(&p, 1.0).unwrap().len(), 1);
        assert!(matches!(build_cantor_omega(&p.with_depth(1), 1.0), Err(Error::Truncation(_))));
    }

    #[test]
    fn rejects_out_of_range_beta() {
        for b in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(matches!(cantor_params_from_beta(b), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn depth_zero_is_middle_part() {
        let p = cantor_params_from_beta(0.5).unwrap().with_depth(0);
        let omega = build_cantor_omega(&p, 1.0).unwrap();
        assert_eq!(omega.intervals(), &[(0.25, 0.75)]);
    }

    #[test]
    fn generation_counts_and_lengths() {
        let p = cantor_params_from_beta(0.5).unwrap();
        for depth in 0..=6 {
            let omega = build_cantor_omega(&p.with_depth(depth), 1.0).unwrap();
            assert_eq!(omega.len(), (4usize.pow(depth as u32 + 1) - 1) / 3);
            for k in 0..=depth {
                let want = p.q() * p.Q().powi(2 * k as i32);
                let n = omega
                    .intervals()
                    .iter()
                    .filter(|(lo, hi)| ((hi - lo) - want).abs() < 1e-12 * want)
                    .count();
                assert_eq!(n, 4usize.pow(k as u32), "generation {k}");
            }
        }
    }

    #[test]
    fn measure_converges_to_two_thirds() {
        let p = cantor_params_from_beta(0.5).unwrap().with_depth(9);
        let omega = build_cantor_omega(&p, 1.0).unwrap();
        // geometric series q Σ (4Q²)^k = 0.5 Σ 4^{-k}
        let exact = p.limit_measure();
        assert!((exact - 2.0 / 3.0).abs() < 1e-15);
        assert!((omega.measure() - exact).abs() < 0.5 * 4f64.powi(-10) / 0.75 + 1e-12);
    }

    #[test]
    fn underflowing_depth_is_rejected() {
        let p = cantor_params_from_beta(0.5).unwrap().with_depth(300);
        assert!(matches!(build_cantor_omega(&p, 1.0), Err(Error::Truncation(_))));
        assert!(matches!(CantorSet::new(p), Err(Error::Truncation(_))));
    }

    #[test]
    fn copies_are_disjoint_and_ordered() {
        for beta in [0.3, 0.5, 0.7] {
            let set = CantorSet::new(cantor_params_from_beta(beta).unwrap().with_depth(3)).unwrap();
            let mut previous_lo = f64::INFINITY;
            for c in set.copies() {
                let omega = build_cantor_omega(set.params(), c.alpha).unwrap().translate(c.shift);
                let (lo, hi) = omega.bounds().unwrap();
                assert!(hi < previous_lo);
                previous_lo = lo;
            }
            let union = set.to_union().unwrap();
            assert!((union.measure() - set.measure()).abs() < 1e-12 * set.measure());
            let (lo, hi) = union.bounds().unwrap();
            let (slo, shi) = set.bounds();
            assert!((lo - slo).abs() < 1e-12 && (hi - shi).abs() < 1e-12);
        }
    }

    #[test]
    fn structured_transform_matches_direct_sum() {
        let set = CantorSet::new(cantor_params_from_beta(0.4).unwrap().with_depth(4)).unwrap();
        let union = set.to_union().unwrap();
        for u in [0.0, 1e-6, 0.3, 2.0, 17.5, 311.0, -45.0] {
            let direct: Complex64 = union
                .intervals()
                .iter()
                .map(|&(lo, hi)| interval_fourier(lo, hi - lo, u))
                .sum();
            let fast = set.fourier(u);
            assert!((direct - fast).norm() < 1e-11 * union.measure(), "u={u}");
        }
        assert!((set.fourier(0.0).re - set.measure()).abs() < 1e-13);
    }
}
