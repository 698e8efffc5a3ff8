//! Interval-union set algebra, the Cantor-like construction with a
//! prescribed modulus exponent, and product regions.

mod cantor;
mod interval;
mod region;

pub use cantor::{
    build_cantor_omega, cantor_params_from_beta, CantorCopy, CantorParams, CantorSet,
    HARD_MAX_INTERVALS, MAX_COPY_INTERVALS, MIN_DEFAULT_LENGTH,
};
pub(crate) use cantor::{interval_fourier, phase};
pub use interval::{modulus_sq, set_difference_measure, IntervalUnion};
pub use region::{product_modulus_sq, AngularUnit, Mode, RegionSpec};

use serde::Serialize;

use crate::error::{Error, Result};

/// `build_cantor_set`: the materialised union of all scaled copies.
pub fn build_cantor_set(params: &CantorParams) -> Result<IntervalUnion> {
    CantorSet::new(*params)?.to_union()
}

/// Observed two-sided window of `modulus_sq(h) / h^β` over a set of shifts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusWindow {
    pub beta: f64,
    pub shifts: Vec<f64>,
    pub ratios: Vec<f64>,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl ModulusWindow {
    pub fn spread(&self) -> f64 {
        self.c_upper / self.c_lower
    }

    /// Decades of `h` covered by the scan.
    pub fn decades(&self) -> f64 {
        let (lo, hi) = self
            .shifts
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
        (hi / lo).log10()
    }
}

/// Dyadic shifts `h_max 2^{-j}`, `j = 0, 1, ...`, down to (and including the
/// last one above) `h_min`.
pub fn dyadic_shifts(h_max: f64, h_min: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = h_max;
    while h >= h_min && out.len() < 2048 {
        out.push(h);
        h *= 0.5;
    }
    out
}

/// Scans `modulus_sq(a, h) / h^β` over `shifts`.
pub fn modulus_window(a: &IntervalUnion, beta: f64, shifts: &[f64]) -> Result<ModulusWindow> {
    if shifts.is_empty() {
        return Err(Error::domain("shifts", "no shifts to scan"));
    }
    if let Some(h) = shifts.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::domain("shifts", format!("shifts must be positive, got {h}")));
    }
    let ratios: Vec<f64> = shifts.iter().map(|&h| modulus_sq(a, h) / h.powf(beta)).collect();
    let c_lower = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c_upper = ratios.iter().copied().fold(0.0, f64::max);
    Ok(ModulusWindow {
        beta,
        shifts: shifts.to_vec(),
        ratios,
        c_lower,
        c_upper,
    })
}

/// The verified shift range for a truncated Cantor set: dyadic shifts from
/// `a_1` down to `Q^{2·depth}`.
pub fn cantor_shift_grid(params: &CantorParams) -> Vec<f64> {
    dyadic_shifts(params.band_lower(1), params.Q().powi(2 * params.depth() as i32))
}

/// A one-dimensional set usable as a momentum-space factor: either an
/// explicit interval union or a Cantor-like set kept in structured form.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetFactor {
    Intervals(IntervalUnion),
    Cantor(CantorSet),
}

impl SetFactor {
    pub fn measure(&self) -> f64 {
        match self {
            SetFactor::Intervals(u) => u.measure(),
            SetFactor::Cantor(c) => c.measure(),
        }
    }

    /// Closed hull; `None` for the empty set.
    pub fn hull(&self) -> Option<(f64, f64)> {
        match self {
            SetFactor::Intervals(u) => u.bounds(),
            SetFactor::Cantor(c) => Some(c.bounds()),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SetFactor::Intervals(u) if u.is_empty())
    }

    /// Explicit interval list (materialises Cantor sets).
    pub fn to_union(&self) -> Result<IntervalUnion> {
        match self {
            SetFactor::Intervals(u) => Ok(u.clone()),
            SetFactor::Cantor(c) => c.to_union(),
        }
    }

    /// Number of boundary points, when it is finite and cheap to know.
    pub fn interval_count(&self) -> usize {
        match self {
            SetFactor::Intervals(u) => u.len(),
            SetFactor::Cantor(c) => c.copies().len() * c.params().intervals_per_copy(),
        }
    }
}

impl From<IntervalUnion> for SetFactor {
    fn from(value: IntervalUnion) -> Self {
        SetFactor::Intervals(value)
    }
}

impl From<CantorSet> for SetFactor {
    fn from(value: CantorSet) -> Self {
        SetFactor::Cantor(value)
    }
}
