//! Spectra of assembled compressions and the trace functionals built on
//! them: entropy, particle-number variance, `Tr f(PQP)`, the Weyl term and
//! the Szegő remainder.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DenseHermitian, OverlapOperator, StepSymbol};
use crate::setlib::{Mode, RegionSpec};

/// Eigenvalues within this distance outside `[0, 1]` are clamped for
/// projection symbols; anything further out is an error.
pub const CLAMP_EPS: f64 = 1e-8;

/// Relative Hermiticity tolerance accepted by [`eigenvalues`].
pub const HERMITICITY_TOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ClampReport {
    pub count: usize,
    pub max_excursion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralResult {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub clamp: ClampReport,
    pub lambda: f64,
    pub n: usize,
    pub mode: Mode,
    pub projection: bool,
}

impl SpectralResult {
    /// Wraps a raw spectrum, e.g. for testing the functionals.
    pub fn from_values(mut eigenvalues: Vec<f64>, lambda: f64, projection: bool) -> Result<Self> {
        eigenvalues.sort_by(f64::total_cmp);
        let clamp = if projection { clamp_unit(&mut eigenvalues)? } else { ClampReport::default() };
        Ok(Self {
            n: eigenvalues.len(),
            eigenvalues,
            clamp,
            lambda,
            mode: Mode::Nystrom,
            projection,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue")?;
        for (k, e) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{k},{e:.17e}")?;
        }
        Ok(())
    }
}

fn clamp_unit(values: &mut [f64]) -> Result<ClampReport> {
    let mut report = ClampReport::default();
    for v in values.iter_mut() {
        let excursion = if *v < 0.0 {
            -*v
        } else if *v > 1.0 {
            *v - 1.0
        } else {
            continue;
        };
        if !(excursion <= CLAMP_EPS) {
            return Err(Error::SpectrumValidity {
                value: *v,
                eps: CLAMP_EPS,
            });
        }
        report.count += 1;
        report.max_excursion = report.max_excursion.max(excursion);
        *v = v.clamp(0.0, 1.0);
    }
    Ok(report)
}

fn max_abs(m: &DenseHermitian) -> f64 {
    match m {
        DenseHermitian::Real(a) => a.col_iter().flat_map(|c| c.iter().map(|x| x.abs()).collect::<Vec<_>>()).fold(0.0, f64::max),
        DenseHermitian::Complex(a) => a.col_iter().flat_map(|c| c.iter().map(|x| x.norm()).collect::<Vec<_>>()).fold(0.0, f64::max),
    }
}

fn check_hermitian(m: &DenseHermitian) -> Result<()> {
    let limit = HERMITICITY_TOL * max_abs(m).max(f64::MIN_POSITIVE);
    let defect = m.hermiticity_defect();
    if defect > limit {
        return Err(Error::NonHermitian { defect, limit });
    }
    Ok(())
}

fn solver_error(e: impl fmt::Debug) -> Error {
    Error::Numerical {
        reason: format!("dense eigensolver did not converge: {e:?}"),
        achieved: f64::NAN,
    }
}

/// Eigenvalues of a dense Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DenseHermitian) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let mut values = match m {
        DenseHermitian::Real(a) => a.self_adjoint_eigenvalues(Side::Lower).map_err(solver_error)?,
        DenseHermitian::Complex(a) => a.self_adjoint_eigenvalues(Side::Lower).map_err(solver_error)?,
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Full spectrum of the assembled compression. For projection symbols the
/// spectrum is clamped into `[0, 1]` (see [`CLAMP_EPS`]).
pub fn eigenvalues(op: &OverlapOperator) -> Result<SpectralResult> {
    let mut values = hermitian_eigenvalues(&op.matrix)?;
    let projection = op.is_projection();
    let clamp = if projection { clamp_unit(&mut values)? } else { ClampReport::default() };
    Ok(SpectralResult {
        n: values.len(),
        eigenvalues: values,
        clamp,
        lambda: op.lambda,
        mode: op.mode,
        projection,
    })
}

/// Largest relative residual `‖Mv - ev‖ / ‖M‖` over `samples` eigenpairs
/// spread across the spectrum. Costs a full eigendecomposition with vectors.
pub fn eigen_residual(m: &DenseHermitian, samples: usize) -> Result<f64> {
    check_hermitian(m)?;
    let n = m.n();
    let pick: Vec<usize> = (0..samples.min(n)).map(|k| if samples <= 1 { 0 } else { k * (n - 1) / (samples - 1) }).collect();
    let norm = m.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    let worst = match m {
        DenseHermitian::Real(a) => {
            let evd = a.self_adjoint_eigen(Side::Lower).map_err(solver_error)?;
            let (u, s) = (evd.U(), evd.S().column_vector());
            pick.iter()
                .map(|&k| {
                    let v = u.col(k);
                    let mv = a * v;
                    (0..n).map(|i| (mv[i] - s[k] * v[i]).powi(2)).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
        }
        DenseHermitian::Complex(a) => {
            let evd = a.self_adjoint_eigen(Side::Lower).map_err(solver_error)?;
            let (u, s) = (evd.U(), evd.S().column_vector());
            pick.iter()
                .map(|&k| {
                    let v = u.col(k);
                    let mv = a * v;
                    let e: Complex64 = s[k];
                    (0..n).map(|i| (mv[i] - v[i] * e.re).norm_sqr()).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
        }
    };
    Ok(worst / norm)
}

/// `h(t) = -t log₂ t - (1 - t) log₂(1 - t)`, zero at the endpoints.
pub fn binary_entropy(t: f64) -> f64 {
    fn part(x: f64) -> f64 {
        if x < 1e-300 {
            0.0
        } else {
            x * (1.0 / x).log2()
        }
    }
    part(t) + part(1.0 - t)
}

fn require_projection(spec: &SpectralResult) -> Result<()> {
    if !spec.projection {
        return Err(Error::Unsupported("entropy and variance need a projection-symbol spectrum".into()));
    }
    Ok(())
}

/// `S = Σ h(e_k)` in bits.
pub fn entropy(spec: &SpectralResult) -> Result<f64> {
    require_projection(spec)?;
    Ok(spec.eigenvalues.iter().map(|&e| binary_entropy(e)).sum())
}

/// `(ΔN)² = Σ e_k (1 - e_k)`.
pub fn variance(spec: &SpectralResult) -> Result<f64> {
    require_projection(spec)?;
    Ok(spec.eigenvalues.iter().map(|&e| e * (1.0 - e)).sum())
}

/// A scalar function applied to the spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `t ↦ t^m`.
    Power(u32),
    /// The binary entropy `h`.
    EntropyH,
    /// Piecewise-linear interpolation of `(t, f(t))` samples; undefined
    /// outside the sampled range.
    Table(Vec<(f64, f64)>),
}

impl Functional {
    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("table", "needs at least two points"));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::domain("table", "points must be finite"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("table", "abscissae must be distinct"));
        }
        Ok(Functional::Table(points))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            Functional::Power(m) => Ok(t.powi(*m as i32)),
            Functional::EntropyH => {
                if (0.0..=1.0).contains(&t) {
                    Ok(binary_entropy(t))
                } else {
                    Err(Error::domain("t", format!("h is defined on [0, 1], got {t}")))
                }
            }
            Functional::Table(points) => {
                let (first, last) = (points[0].0, points[points.len() - 1].0);
                if !(first..=last).contains(&t) {
                    return Err(Error::domain("t", format!("{t} outside the table range [{first}, {last}]")));
                }
                let k = points.partition_point(|p| p.0 <= t).clamp(1, points.len() - 1);
                let ((t0, v0), (t1, v1)) = (points[k - 1], points[k]);
                Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Functional::Power(m) => format!("power({m})"),
            Functional::EntropyH => "entropy_h".into(),
            Functional::Table(p) => format!("table({} points)", p.len()),
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `Σ f(e_k)`.
pub fn trace_f(spec: &SpectralResult, f: &Functional) -> Result<f64> {
    spec.eigenvalues.iter().map(|&e| f.eval(e)).sum()
}

/// Number of lattice sites of `λΩ`, counted with the half-open convention.
fn lattice_sites(region: &RegionSpec, lambda: f64) -> f64 {
    region
        .factors()
        .iter()
        .map(|f| {
            f.intervals()
                .iter()
                .map(|&(lo, hi)| ((lambda * hi).ceil() - (lambda * lo).ceil()).max(0.0))
                .sum::<f64>()
        })
        .product()
}

/// Leading term `Tr P f(A_λ) P`: `(λ/2π)^d mes(Ω) ∫ f(σ)` in the continuum,
/// `#sites · ((s/2π)^d ∫_cells f(σ) + f(0) · (1 - (s/2π)^d mes(cells)))` on
/// the lattice with `s` the angular-unit factor.
pub fn weyl_term(region: &RegionSpec, symbol: &StepSymbol, lambda: f64, f: &Functional) -> Result<f64> {
    if region.dim() != symbol.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: symbol.dim(),
        });
    }
    let d = region.dim() as i32;
    let mut integral = 0.0;
    let mut all_cells = 0.0;
    let dims: Vec<usize> = symbol.pieces().iter().map(Vec::len).collect();
    let total_cells: usize = dims.iter().product();
    for flat in 0..total_cells {
        let mut idx = vec![0; dims.len()];
        let mut rest = flat;
        for j in (0..dims.len()).rev() {
            idx[j] = rest % dims[j];
            rest /= dims[j];
        }
        let mes = symbol.cell_measure(&idx);
        all_cells += mes;
        integral += f.eval(symbol.values()[flat])? * mes;
    }
    let f0 = f.eval(0.0)?;
    match region.mode() {
        Mode::Nystrom => {
            if f0 != 0.0 {
                return Err(Error::Integrability(format!(
                    "f(0) = {f0} is nonzero, so f(σ) is not integrable over momentum space"
                )));
            }
            Ok((lambda / TAU).powi(d) * region.measure() * integral)
        }
        Mode::Lattice => {
            let s = region.angular_unit().to_radians();
            let density = (s / TAU).powi(d);
            Ok(lattice_sites(region, lambda) * (density * integral + f0 * (1.0 - density * all_cells)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    pub lambda: f64,
    pub n: usize,
    pub functional: String,
    pub trace_f: f64,
    pub weyl_term: f64,
    /// `trace_f - weyl_term`.
    pub remainder: f64,
}

impl TraceReport {
    pub const CSV_HEADER: &'static str = "lambda,n,functional,trace_f,weyl,remainder";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.17e},{:.17e},{:.17e}",
            self.lambda, self.n, self.functional, self.trace_f, self.weyl_term, self.remainder
        )
    }
}

/// `Tr f(PA_λP) - Tr P f(A_λ) P`, from the spectrum of `op`.
pub fn szego_remainder(op: &OverlapOperator, spec: &SpectralResult, f: &Functional) -> Result<TraceReport> {
    let tf = trace_f(spec, f)?;
    let weyl = weyl_term(&op.region, &op.symbol, op.lambda, f)?;
    Ok(TraceReport {
        lambda: op.lambda,
        n: spec.n,
        functional: f.name(),
        trace_f: tf,
        weyl_term: weyl,
        remainder: tf - weyl,
    })
}

/// Convenience for small matrices in tests and examples.
pub fn real_matrix(rows: &[Vec<f64>]) -> DenseHermitian {
    let n = rows.len();
    DenseHermitian::Real(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{assemble, hs_cross_norm_direct, AssemblyOptions};
    use std::f64::consts::PI;

    /// Cyclic Jacobi rotations, an independent eigenvalue oracle.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    fn pseudo_random_symmetric(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }

    #[test]
    fn trivial_spectra() {
        assert_eq!(hermitian_eigenvalues(&real_matrix(&[vec![0.5]])).unwrap(), vec![0.5]);
        let d = hermitian_eigenvalues(&real_matrix(&[vec![3.0, 0.0], vec![0.0, -1.0]])).unwrap();
        assert_eq!(d, vec![-1.0, 3.0]);
    }

    #[test]
    fn matches_jacobi_and_trace_identities() {
        let a = pseudo_random_symmetric(50, 7);
        let m = real_matrix(&a);
        let ours = hermitian_eigenvalues(&m).unwrap();
        let oracle = jacobi_eigenvalues(a.clone());
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
        let sum: f64 = ours.iter().sum();
        let sq: f64 = ours.iter().map(|e| e * e).sum();
        assert!((sum - m.trace()).abs() <= 1e-10 * m.trace().abs().max(1.0));
        assert!((sq - m.frobenius_sq()).abs() <= 1e-10 * m.frobenius_sq());
        assert!(eigen_residual(&m, 5).unwrap() < 1e-10);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = real_matrix(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(matches!(hermitian_eigenvalues(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn entropy_and_variance_basics() {
        let half = SpectralResult::from_values(vec![0.5], 1.0, true).unwrap();
        assert_eq!(entropy(&half).unwrap(), 1.0);
        assert_eq!(variance(&half).unwrap(), 0.25);
        let pure = SpectralResult::from_values(vec![0.0, 1.0, 1.0, 0.0], 1.0, true).unwrap();
        assert_eq!(entropy(&pure).unwrap(), 0.0);
        assert_eq!(variance(&pure).unwrap(), 0.0);
        assert_eq!(binary_entropy(1e-320), 0.0);
    }

    #[test]
    fn clamping_policy() {
        let s = SpectralResult::from_values(vec![-5e-9, 1.0 + 5e-9, 0.3], 1.0, true).unwrap();
        assert_eq!(s.eigenvalues, vec![0.0, 0.3, 1.0]);
        assert_eq!(s.clamp.count, 2);
        assert!(matches!(
            SpectralResult::from_values(vec![-1e-6], 1.0, true),
            Err(Error::SpectrumValidity { .. })
        ));
    }

    #[test]
    fn functionals() {
        let s = SpectralResult::from_values(vec![0.5], 1.0, true).unwrap();
        assert_eq!(trace_f(&s, &Functional::Power(2)).unwrap(), 0.25);
        assert_eq!(trace_f(&s, &Functional::EntropyH).unwrap(), entropy(&s).unwrap());
        let t = Functional::table(vec![(1.0, 1.0), (0.0, 0.0)]).unwrap();
        assert_eq!(t.eval(0.25).unwrap(), 0.25);
        assert!(t.eval(1.5).is_err());
        assert!(Functional::table(vec![(0.0, 1.0)]).is_err());
    }

    #[test]
    fn weyl_examples() {
        let r = RegionSpec::cube(0.0, 1.0, 1, Mode::Nystrom).unwrap();
        let g = StepSymbol::cube(-1.0, 1.0, 1).unwrap();
        assert!((weyl_term(&r, &g, TAU, &Functional::Power(2)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(weyl_term(&r, &g, 50.0, &Functional::EntropyH).unwrap(), 0.0);
        let bad = Functional::table(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(weyl_term(&r, &g, 5.0, &bad), Err(Error::Integrability(_))));

        let lat = RegionSpec::cube(0.0, 1.0, 1, Mode::Lattice).unwrap();
        let half = StepSymbol::cube(-PI / 2.0, PI / 2.0, 1).unwrap();
        let op = assemble(&lat, &half, 37.0, &AssemblyOptions::default()).unwrap();
        assert_eq!(weyl_term(&lat, &half, 37.0, &Functional::Power(1)).unwrap(), op.matrix.trace());
    }

    #[test]
    fn z_squared_remainder_is_minus_variance() {
        let lat = RegionSpec::cube(0.0, 1.0, 1, Mode::Lattice).unwrap();
        let half = StepSymbol::cube(-PI / 2.0, PI / 2.0, 1).unwrap();
        let op = assemble(&lat, &half, 64.0, &AssemblyOptions::default()).unwrap();
        let spec = eigenvalues(&op).unwrap();
        let v = variance(&spec).unwrap();
        let rep = szego_remainder(&op, &spec, &Functional::Power(2)).unwrap();
        assert!((rep.remainder + v).abs() < 1e-10 * v);
        assert!((hs_cross_norm_direct(&op).unwrap() - v).abs() < 1e-10 * v);
        let ent = szego_remainder(&op, &spec, &Functional::EntropyH).unwrap();
        assert_eq!(ent.remainder, entropy(&spec).unwrap());
    }
}
