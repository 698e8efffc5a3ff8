//! Fourier transforms of indicator functions and step symbols, and the tail
//! integrals `T(ρ) = ∫_{|u| ≥ ρ} |χ̂(u)|² du` that encode boundary
//! regularity.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::StepSymbol;
use crate::quad::{self, PanelRule};
use crate::setlib::{interval_fourier, CantorSet, IntervalUnion, SetFactor};

/// A set on the line whose indicator can be Fourier transformed,
/// `χ̂(u) = ∫ χ(x) e^{-iux} dx`.
pub trait Indicator: Sync {
    fn fourier(&self, u: f64) -> Complex64;
    fn measure(&self) -> f64;
    /// Closed hull, `None` when empty.
    fn hull(&self) -> Option<(f64, f64)>;

    fn diameter(&self) -> f64 {
        self.hull().map_or(0.0, |(lo, hi)| hi - lo)
    }
}

impl Indicator for IntervalUnion {
    fn fourier(&self, u: f64) -> Complex64 {
        self.intervals()
            .iter()
            .map(|&(lo, hi)| interval_fourier(lo, hi - lo, u))
            .sum()
    }

    fn measure(&self) -> f64 {
        IntervalUnion::measure(self)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        self.bounds()
    }
}

impl Indicator for CantorSet {
    fn fourier(&self, u: f64) -> Complex64 {
        CantorSet::fourier(self, u)
    }

    fn measure(&self) -> f64 {
        CantorSet::measure(self)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        Some(self.bounds())
    }
}

impl Indicator for SetFactor {
    fn fourier(&self, u: f64) -> Complex64 {
        match self {
            SetFactor::Intervals(s) => s.fourier(u),
            SetFactor::Cantor(s) => CantorSet::fourier(s, u),
        }
    }

    fn measure(&self) -> f64 {
        SetFactor::measure(self)
    }

    fn hull(&self) -> Option<(f64, f64)> {
        SetFactor::hull(self)
    }
}

/// `|χ̂_A(u)|²`; exactly `mes(A)²` at `u = 0`.
pub fn chi_hat_sq<A: Indicator + ?Sized>(a: &A, u: f64) -> f64 {
    if u == 0.0 {
        let m = a.measure();
        return m * m;
    }
    a.fourier(u).norm_sqr()
}

/// Panel rule for integrands built from `|χ̂_A|²`: panels of half the
/// fastest oscillation period `2π / diam(A)`.
pub(crate) fn oscillation_rule(diameter: f64) -> PanelRule {
    PanelRule::new(PI / diameter.max(1e-3))
}

/// `T(ρ)` at every point of an increasing grid, through the Parseval
/// complement `T(ρ) = 2π mes(A) - 2 ∫_0^ρ |χ̂_A|²`.
pub fn tail_integrals<A: Indicator + ?Sized>(a: &A, rhos: &[f64]) -> Result<Vec<f64>> {
    if let Some(r) = rhos.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
        return Err(Error::domain("rho", format!("must be finite and non-negative, got {r}")));
    }
    if a.measure() == 0.0 {
        return Ok(vec![0.0; rhos.len()]);
    }
    let full = TAU * a.measure();
    let mut rule = oscillation_rule(a.diameter());
    rule.abs_floor = full;
    let heads = quad::cumulative(|u| [chi_hat_sq(a, u)], 0.0, rhos, rule)?;
    let tol = 1e-8 * full;
    heads
        .iter()
        .zip(rhos)
        .map(|(h, &rho)| {
            let t = full - 2.0 * h[0];
            if t < -tol {
                Err(Error::Numerical {
                    reason: format!("tail integral at rho = {rho} came out negative ({t:e})"),
                    achieved: -t / full,
                })
            } else {
                Ok(t.max(0.0))
            }
        })
        .collect()
}

/// `T(ρ) = ∫_{|u| ≥ ρ} |χ̂_A(u)|² du`.
pub fn tail_integral<A: Indicator + ?Sized>(a: &A, rho: f64) -> Result<f64> {
    Ok(tail_integrals(a, &[rho])?[0])
}

/// Smallest `T(ρ) / (2π mes(A))` accepted by [`fit_tail_exponent`].
pub const TAIL_RESOLUTION: f64 = 1e-7;

/// Tail integrals on a geometric grid together with the fitted power law
/// `T(ρ) ~ ρ^{exponent}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailProfile {
    pub rho_grid: Vec<f64>,
    pub tail_values: Vec<f64>,
    pub fitted_exponent: f64,
    pub fit_window: (f64, f64),
}

impl TailProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# fitted_exponent={} fit_window=[{}, {}]",
            self.fitted_exponent, self.fit_window.0, self.fit_window.1
        )?;
        writeln!(w, "rho,tail")?;
        for (r, t) in self.rho_grid.iter().zip(&self.tail_values) {
            writeln!(w, "{r},{t}")?;
        }
        Ok(())
    }
}

/// Geometric grid with `n` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

/// Number of grid points for `per_decade` points per decade over a window.
pub fn points_for_window(window: (f64, f64), per_decade: usize) -> usize {
    ((window.1 / window.0).log10() * per_decade as f64).round() as usize + 1
}

/// Ordinary least-squares slope of `y` against `x`.
pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fits `log T` against `log ρ` on a geometric grid over `rho_window`.
pub fn fit_tail_exponent<A: Indicator + ?Sized>(
    a: &A,
    rho_window: (f64, f64),
    n_points: usize,
) -> Result<TailProfile> {
    let (lo, hi) = rho_window;
    if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain("rho_window", format!("need 1 <= lo < hi, got ({lo}, {hi})")));
    }
    if n_points < 4 {
        return Err(Error::domain("n_points", format!("need at least 4 points, got {n_points}")));
    }
    let grid = geometric_grid(lo, hi, n_points);
    let tails = tail_integrals(a, &grid)?;
    if let Some((&rho, &value)) = grid.iter().zip(&tails).find(|(_, t)| **t <= 0.0) {
        return Err(Error::DegenerateTail { rho, value });
    }
    // T is a difference against 2π mes(A); below this floor it carries
    // fewer than two significant digits.
    let floor = TAIL_RESOLUTION * TAU * a.measure();
    if let Some((&rho, &value)) = grid.iter().zip(&tails).find(|(_, t)| **t < floor) {
        return Err(Error::Numerical {
            reason: format!("tail T({rho}) = {value:e} is below the resolvable floor {floor:e}"),
            achieved: value / (TAU * a.measure()),
        });
    }
    let lx: Vec<f64> = grid.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = tails.iter().map(|t| t.ln()).collect();
    Ok(TailProfile {
        fitted_exponent: ols_slope(&lx, &ly),
        rho_grid: grid,
        tail_values: tails,
        fit_window: rho_window,
    })
}

/// `φ(u) = |F_{ξ→u} σ|` for a product step symbol, `u` one frequency per
/// dimension.
pub fn phi_for_symbol(sigma: &StepSymbol, u: &[f64]) -> Result<f64> {
    if u.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: u.len(),
        });
    }
    let per_dim: Vec<Vec<Complex64>> = sigma
        .pieces()
        .iter()
        .zip(u)
        .map(|(pieces, &uj)| {
            pieces
                .iter()
                .map(|p| if uj == 0.0 { Complex64::new(p.measure(), 0.0) } else { p.fourier(uj) })
                .collect()
        })
        .collect();
    let total: Complex64 = sigma
        .cells()
        .map(|(idx, v)| idx.iter().enumerate().map(|(j, &c)| per_dim[j][c]).product::<Complex64>() * v)
        .sum();
    Ok(total.norm())
}

/// `ψ(u) = φ(u) φ(-u)`. For real symbols `φ(-u) = φ(u)`, so `ψ = φ²`.
pub fn psi_for_symbol(sigma: &StepSymbol, u: &[f64]) -> Result<f64> {
    let phi = phi_for_symbol(sigma, u)?;
    Ok(phi * phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setlib::cantor_params_from_beta;

    fn centred() -> IntervalUnion {
        IntervalUnion::interval(-0.5, 0.5).unwrap()
    }

    #[test]
    fn interval_transform_closed_form() {
        let a = centred();
        assert_eq!(chi_hat_sq(&a, 0.0), 1.0);
        for u in [1e-9f64, 1e-3, 0.5, 3.0, 40.0, -7.0] {
            let want = 4.0 * (u / 2.0).sin().powi(2) / (u * u);
            assert!((chi_hat_sq(&a, u) - want).abs() < 1e-15, "u={u}");
        }
    }

    #[test]
    fn two_intervals_against_quadrature() {
        let a = IntervalUnion::new([(-1.0, -0.2), (0.3, 1.7)]).unwrap();
        for u in [0.4, 2.5, 11.0] {
            // ∫_A e^{-iux} dx by panel quadrature
            let re = quad::integrate(|x| (u * x).cos(), -1.0, -0.2, PanelRule::new(0.1)).unwrap()
                + quad::integrate(|x| (u * x).cos(), 0.3, 1.7, PanelRule::new(0.1)).unwrap();
            let im = -quad::integrate(|x| (u * x).sin(), -1.0, -0.2, PanelRule::new(0.1)).unwrap()
                - quad::integrate(|x| (u * x).sin(), 0.3, 1.7, PanelRule::new(0.1)).unwrap();
            let want = re * re + im * im;
            assert!((chi_hat_sq(&a, u) - want).abs() < 1e-10, "u={u}");
        }
    }

    #[test]
    fn transform_is_even() {
        let a = IntervalUnion::new([(-1.0, -0.2), (0.3, 1.7), (4.0, 4.01)]).unwrap();
        for u in [0.1, 1.3, 77.0] {
            assert!((chi_hat_sq(&a, u) - chi_hat_sq(&a, -u)).abs() < 1e-14);
        }
    }

    #[test]
    fn tail_of_interval() {
        let a = centred();
        assert!((tail_integral(&a, 0.0).unwrap() - TAU).abs() < 1e-12);
        // ρ T(ρ) → 4 (average of 8 sin²(u/2)/u² tails)
        for rho in [10.0, 100.0, 1000.0] {
            let t = tail_integral(&a, rho).unwrap();
            assert!((3.0..=5.0).contains(&(rho * t)), "rho={rho}: {}", rho * t);
        }
    }

    #[test]
    fn tail_is_non_increasing() {
        let a = IntervalUnion::new([(0.0, 0.3), (0.5, 0.55), (1.0, 2.0)]).unwrap();
        let grid = geometric_grid(1.0, 500.0, 40);
        let t = tail_integrals(&a, &grid).unwrap();
        assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn interval_exponent_is_minus_one() {
        let p = fit_tail_exponent(&centred(), (10.0, 1000.0), 33).unwrap();
        assert!((p.fitted_exponent + 1.0).abs() < 0.1, "{}", p.fitted_exponent);
    }

    #[test]
    fn fit_validates_arguments() {
        assert!(fit_tail_exponent(&centred(), (0.5, 10.0), 8).is_err());
        assert!(fit_tail_exponent(&centred(), (10.0, 100.0), 3).is_err());
    }

    #[test]
    fn cantor_union_transform_agrees_with_structured() {
        let set = CantorSet::new(cantor_params_from_beta(0.5).unwrap().with_depth(3)).unwrap();
        let union = set.to_union().unwrap();
        for u in [0.0, 0.7, 13.0, 250.0] {
            assert!((chi_hat_sq(&set, u) - chi_hat_sq(&union, u)).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_export() {
        let p = TailProfile {
            rho_grid: vec![1.0, 2.0],
            tail_values: vec![0.5, 0.25],
            fitted_exponent: -1.0,
            fit_window: (1.0, 2.0),
        };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# fitted_exponent=-1 fit_window=[1, 2]\nrho,tail\n1,0.5\n2,0.25\n");
    }
}
