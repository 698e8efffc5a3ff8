use serde::{Deserialize, Serialize};

use super::{set_difference_measure, IntervalUnion};
use crate::error::{Error, Result};

/// How a region or symbol is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `l²(Z^d)` with momenta on the torus.
    Lattice,
    /// `L²(R^d)`, discretised by the Nyström method.
    Nystrom,
}

/// Unit of lattice momenta: radians (`θ ∈ [-π, π]`) or turns
/// (`ν ∈ [-1/2, 1/2]`, `θ = 2πν`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngularUnit {
    #[default]
    Radians,
    Turns,
}

impl AngularUnit {
    /// Factor converting a momentum in this unit to radians.
    pub fn to_radians(self) -> f64 {
        match self {
            AngularUnit::Radians => 1.0,
            AngularUnit::Turns => std::f64::consts::TAU,
        }
    }
}

/// A `d`-dimensional Cartesian product of interval unions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    factors: Vec<IntervalUnion>,
    mode: Mode,
    #[serde(default)]
    angular_unit: AngularUnit,
}

impl RegionSpec {
    pub fn new(factors: Vec<IntervalUnion>, mode: Mode) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::domain("factors", "a region needs at least one dimension"));
        }
        if let Some(j) = factors.iter().position(IntervalUnion::is_empty) {
            return Err(Error::domain("factors", format!("factor {j} is empty")));
        }
        Ok(Self {
            factors,
            mode,
            angular_unit: AngularUnit::Radians,
        })
    }

    /// `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize, mode: Mode) -> Result<Self> {
        let side = IntervalUnion::interval(lo, hi)?;
        Self::new(vec![side; d], mode)
    }

    pub fn with_angular_unit(mut self, unit: AngularUnit) -> Self {
        self.angular_unit = unit;
        self
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[IntervalUnion] {
        &self.factors
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn angular_unit(&self) -> AngularUnit {
        self.angular_unit
    }

    pub fn measure(&self) -> f64 {
        self.factors.iter().map(IntervalUnion::measure).product()
    }
}

/// Squared modulus of continuity of the indicator of a product region,
/// `mes_d(Ω \ Ω_h) + mes_d(Ω \ Ω_{-h})`.
///
/// Uses `mes_d(Ω \ Ω_h) = Π m_j - Π (m_j - s_j)` with
/// `s_j = mes_1(Ω_j \ Ω_j - h_j)`, expanded as the telescoping sum
/// `Σ_k Π_{j<k} (m_j - s_j) · s_k · Π_{j>k} m_j` so that no cancellation
/// occurs and `d = 1` reproduces the one-dimensional value exactly.
pub fn product_modulus_sq(region: &RegionSpec, h: &[f64]) -> Result<f64> {
    if region.mode() != Mode::Nystrom {
        return Err(Error::Unsupported(
            "product modulus is defined for continuum regions".into(),
        ));
    }
    if h.len() != region.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: h.len(),
        });
    }
    let one_side = |sign: f64| -> f64 {
        let mut total = 0.0;
        for k in 0..region.dim() {
            let mut term = set_difference_measure(&region.factors[k], sign * h[k]);
            if term == 0.0 {
                continue;
            }
            for (j, f) in region.factors.iter().enumerate() {
                if j < k {
                    term *= f.measure() - set_difference_measure(f, sign * h[j]);
                } else if j > k {
                    term *= f.measure();
                }
            }
            total += term;
        }
        total
    };
    Ok(one_side(1.0) + one_side(-1.0))
}
