//! λ-sweeps, regression of scaling laws, the Widom coefficient for box
//! unions, and checks of the two-sided entropy bounds.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{assemble, hs_cross_norm_integral, AssemblyOptions, StepSymbol};
use crate::spectral::{self, ClampReport, Functional, TraceReport};
use crate::setlib::RegionSpec;

/// A sweep aborts when more than this fraction of its λ values fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

/// Slack applied to asymptotic bounds.
pub const ASYMPTOTIC_SLACK: f64 = 0.05;

/// Asymptotic bounds are only judged from this λ on.
pub const MIN_GATED_LAMBDA: f64 = 16.0;

/// `λ₀ · 2^j` for `j = 0..count`.
pub fn dyadic_grid(lambda0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| lambda0 * 2f64.powi(j as i32)).collect()
}

/// Dyadic grid from `min` up to at most `max` with `points_per_octave`
/// points per doubling.
pub fn octave_grid(min: f64, max: f64, points_per_octave: usize) -> Vec<f64> {
    let ppo = points_per_octave.max(1) as f64;
    let steps = ((max / min).log2() * ppo + 1e-9).floor() as usize;
    (0..=steps).map(|k| min * 2f64.powf(k as f64 / ppo)).collect()
}

/// Everything needed to run one spectral pipeline per λ.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub region: RegionSpec,
    pub symbol: StepSymbol,
    pub lambdas: Vec<f64>,
    pub assembly: AssemblyOptions,
    /// Functionals for which a Szegő remainder is reported.
    pub functionals: Vec<Functional>,
    /// Worker threads; 0 uses the global pool.
    pub parallelism: usize,
}

impl Experiment {
    pub fn new(region: RegionSpec, symbol: StepSymbol, lambdas: Vec<f64>) -> Self {
        Self {
            region,
            symbol,
            lambdas,
            assembly: AssemblyOptions::default(),
            functionals: Vec::new(),
            parallelism: 0,
        }
    }
}

/// Results of one λ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub n: usize,
    pub entropy: Option<f64>,
    pub variance: Option<f64>,
    /// `Tr M - Tr M²` from the matrix itself.
    pub hs_cross_direct: Option<f64>,
    pub reports: Vec<TraceReport>,
    pub clamp: ClampReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepFailure {
    pub lambda: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRun {
    /// Successful runs, sorted by λ.
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Scalar quantity extracted from a [`SweepRun`].
#[derive(Clone, Debug, PartialEq)]
pub enum Quantity {
    Entropy,
    Variance,
    Remainder(Functional),
}

impl Quantity {
    pub fn tag(&self) -> String {
        match self {
            Quantity::Entropy => "entropy".into(),
            Quantity::Variance => "variance".into(),
            Quantity::Remainder(f) => format!("remainder[{f}]"),
        }
    }
}

impl SweepRun {
    pub fn series(&self, q: &Quantity, descriptor: &str) -> Result<SweepResult> {
        let mut lambdas = Vec::new();
        let mut values = Vec::new();
        for row in &self.rows {
            let v = match q {
                Quantity::Entropy => row.entropy,
                Quantity::Variance => row.variance,
                Quantity::Remainder(f) => {
                    let name = f.name();
                    row.reports.iter().find(|r| r.functional == name).map(|r| r.remainder)
                }
            };
            if let Some(v) = v {
                lambdas.push(row.lambda);
                values.push(v);
            }
        }
        SweepResult::new(lambdas, values, q.tag(), descriptor)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let funcs: Vec<String> = self
            .rows
            .first()
            .map(|r| r.reports.iter().map(|t| t.functional.clone()).collect())
            .unwrap_or_default();
        write!(w, "lambda,n,S,variance,hs_cross_direct")?;
        for f in &funcs {
            write!(w, ",trace_f[{f}],weyl[{f}],remainder[{f}]")?;
        }
        writeln!(w)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.17e}"));
        for row in &self.rows {
            write!(w, "{},{},{},{},{}", row.lambda, row.n, opt(row.entropy), opt(row.variance), opt(row.hs_cross_direct))?;
            for r in &row.reports {
                write!(w, ",{:.17e},{:.17e},{:.17e}", r.trace_f, r.weyl_term, r.remainder)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn run_one(exp: &Experiment, lambda: f64) -> Result<SweepRow> {
    let op = assemble(&exp.region, &exp.symbol, lambda, &exp.assembly)?;
    let spec = spectral::eigenvalues(&op)?;
    let projection = spec.projection;
    let reports = exp
        .functionals
        .iter()
        .map(|f| spectral::szego_remainder(&op, &spec, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        lambda,
        n: spec.n,
        entropy: projection.then(|| spectral::entropy(&spec)).transpose()?,
        variance: projection.then(|| spectral::variance(&spec)).transpose()?,
        hs_cross_direct: projection.then(|| op.matrix.trace() - op.matrix.frobenius_sq()),
        reports,
        clamp: spec.clamp,
    })
}

fn validate_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::domain("lambdas", "empty grid"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 2.0 && l.is_finite())) {
        return Err(Error::domain("lambdas", format!("every lambda must be finite and >= 2, got {l}")));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("lambdas", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Runs the spectral pipeline for every λ of the experiment, on a pool of
/// `parallelism` workers. Individual failures are recorded; more than 20%
/// failures abort the sweep with the first error.
pub fn sweep(exp: &Experiment) -> Result<SweepRun> {
    validate_grid(&exp.lambdas)?;
    let work = || -> Vec<(f64, Result<SweepRow>)> {
        exp.lambdas.par_iter().map(|&l| (l, run_one(exp, l))).collect()
    };
    let outcomes = if exp.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(exp.parallelism)
            .build()
            .map_err(|e| Error::domain("parallelism", e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let total = outcomes.len();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (lambda, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                failures.push(SweepFailure {
                    lambda,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(first_error.expect("failures are non-empty"));
    }
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(SweepRun { rows, failures })
}

/// Particle-number variance `‖P A_λ (I - P)‖²` per λ through the
/// quadrature route, without assembling any matrix.
pub fn variance_integral_sweep(region: &RegionSpec, symbol: &StepSymbol, lambdas: &[f64], descriptor: &str) -> Result<SweepResult> {
    validate_grid(lambdas)?;
    let values = lambdas
        .par_iter()
        .map(|&l| hs_cross_norm_integral(region, symbol, l))
        .collect::<Result<Vec<_>>>()?;
    SweepResult::new(lambdas.to_vec(), values, "variance".into(), descriptor)
}

/// One scalar per λ.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub quantity: String,
    pub descriptor: String,
}

impl SweepResult {
    pub fn new(lambdas: Vec<f64>, values: Vec<f64>, quantity: String, descriptor: &str) -> Result<Self> {
        if lambdas.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                got: values.len(),
            });
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("lambdas", "grid must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("values", format!("non-finite value {v}")));
        }
        Ok(Self {
            lambdas,
            values,
            quantity,
            descriptor: descriptor.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn value_at(&self, lambda: f64) -> Option<f64> {
        self.lambdas.iter().position(|&l| l == lambda).map(|k| self.values[k])
    }

    /// Local exponents `log(y_{k+1}/y_k) / log(λ_{k+1}/λ_k)`.
    pub fn successive_slopes(&self) -> Vec<f64> {
        self.lambdas
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(l, v)| (v[1] / v[0]).ln() / (l[1] / l[0]).ln())
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,{}", self.quantity)?;
        for (l, v) in self.lambdas.iter().zip(&self.values) {
            writeln!(w, "{l},{v:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    PurePower,
    PowerLog,
}

/// `y ≈ a λ^p log₂λ + b λ^p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub exponent: f64,
    /// Half-range of the successive local exponents (free exponent only).
    pub exponent_uncertainty: Option<f64>,
    pub coeff_a: f64,
    pub coeff_b: f64,
    /// Root-mean-square residual relative to `max |y|`.
    pub rms_residual: f64,
    pub points: usize,
}

/// Least squares for two basis columns by modified Gram–Schmidt.
fn least_squares_2(c0: &[f64], c1: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n0 = dot(c0, c0).sqrt();
    if n0 == 0.0 {
        return Err(Error::Fit("first basis column vanishes".into()));
    }
    let q0: Vec<f64> = c0.iter().map(|x| x / n0).collect();
    let r01 = dot(&q0, c1);
    let v1: Vec<f64> = c1.iter().zip(&q0).map(|(x, q)| x - r01 * q).collect();
    let n1 = dot(&v1, &v1).sqrt();
    if n1 <= 1e-12 * dot(c1, c1).sqrt() {
        return Err(Error::Fit("singular design: basis columns are dependent".into()));
    }
    let q1: Vec<f64> = v1.iter().map(|x| x / n1).collect();
    let (z0, z1) = (dot(&q0, y), dot(&q1, y));
    let b = z1 / n1;
    let a = (z0 - r01 * b) / n0;
    Ok((a, b))
}

/// Fits `a λ^p log₂λ + b λ^p`. With `p_fixed` this is a linear least-squares
/// fit; otherwise `p` is the log-log regression slope (pure power model)
/// and the basis fit is then performed at that `p`.
pub fn fit_power_log(sweep: &SweepResult, p_fixed: Option<f64>) -> Result<ScalingFit> {
    let k = sweep.len();
    if k < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {k}")));
    }
    let (p, model, uncertainty) = match p_fixed {
        Some(p) => (p, FitModel::PowerLog, None),
        None => {
            if sweep.values.iter().any(|&v| v <= 0.0) {
                return Err(Error::Fit("a free exponent needs positive values".into()));
            }
            let lx: Vec<f64> = sweep.lambdas.iter().map(|l| l.ln()).collect();
            let ly: Vec<f64> = sweep.values.iter().map(|v| v.ln()).collect();
            let p = crate::fourier::ols_slope(&lx, &ly);
            let slopes = sweep.successive_slopes();
            let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
            (p, FitModel::PurePower, Some(0.5 * (hi - lo)))
        }
    };
    let c0: Vec<f64> = sweep.lambdas.iter().map(|l| l.powf(p) * l.log2()).collect();
    let c1: Vec<f64> = sweep.lambdas.iter().map(|l| l.powf(p)).collect();
    let (a, b) = least_squares_2(&c0, &c1, &sweep.values)?;
    let scale = sweep.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let ss: f64 = (0..k).map(|i| ((a * c0[i] + b * c1[i] - sweep.values[i]) / scale).powi(2)).sum();
    Ok(ScalingFit {
        model,
        exponent: p,
        exponent_uncertainty: uncertainty,
        coeff_a: a,
        coeff_b: b,
        rms_residual: (ss / k as f64).sqrt(),
        points: k,
    })
}

/// Contribution of one pair of parallel faces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FacePair {
    pub axis: usize,
    /// Coordinate of the face of `∂Ω` along `axis`.
    pub omega_face: f64,
    /// Coordinate of the face of `∂Γ` along `axis`.
    pub gamma_face: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WidomCoefficient {
    pub value: f64,
    pub face_pairs: Vec<FacePair>,
}

/// Enumerating more face pairs than this is refused.
pub const MAX_FACE_PAIRS: usize = 1 << 20;

/// `(1/12)(2π)^{1-d} ∫_{∂Ω} ∫_{∂Γ} |n_x · n_ξ|` for products of interval
/// unions. Only parallel faces contribute, each pair with the product of the
/// two face areas.
pub fn widom_coefficient(omega: &RegionSpec, gamma: &RegionSpec) -> Result<WidomCoefficient> {
    if omega.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            got: gamma.dim(),
        });
    }
    let d = omega.dim();
    let norm = TAU.powi(1 - d as i32) / 12.0;
    let faces = |r: &RegionSpec, j: usize| -> (Vec<f64>, f64) {
        let coords = r.factors()[j].intervals().iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
        let area = (0..d).filter(|&i| i != j).map(|i| r.factors()[i].measure()).product();
        (coords, area)
    };
    let count: usize = (0..d)
        .map(|j| 4 * omega.factors()[j].len() * gamma.factors()[j].len())
        .sum();
    if count > MAX_FACE_PAIRS {
        return Err(Error::Unsupported(format!("{count} face pairs exceed the enumeration cap {MAX_FACE_PAIRS}")));
    }
    let mut face_pairs = Vec::with_capacity(count);
    for j in 0..d {
        let (of, oa) = faces(omega, j);
        let (gf, ga) = faces(gamma, j);
        for &x in &of {
            for &xi in &gf {
                face_pairs.push(FacePair {
                    axis: j,
                    omega_face: x,
                    gamma_face: xi,
                    contribution: norm * oa * ga,
                });
            }
        }
    }
    Ok(WidomCoefficient {
        value: face_pairs.iter().map(|p| p.contribution).sum(),
        face_pairs,
    })
}

fn check_grids(a: &SweepResult, b: &SweepResult) -> Result<()> {
    if a.lambdas.len() != b.lambdas.len()
        || a.lambdas.iter().zip(&b.lambdas).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs())
    {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.lambdas, b.lambdas)));
    }
    Ok(())
}

/// Prefactor convention for the cube sandwich bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SandwichNormalization {
    /// `(λ mes(Γ₁) / 2π)^{d-1}`: the Weyl particle count of one line of
    /// the cube, `mes(Γ₁)` the measure of one side of `Γ` in radians.
    ParticleCount { gamma_side: f64 },
    /// `(λ / 2π)^{d-1}`, which coincides with the particle count when the
    /// side of `Γ` has unit measure.
    Bare,
}

impl SandwichNormalization {
    fn prefactor(self, lambda: f64, d: usize) -> f64 {
        let base = match self {
            SandwichNormalization::ParticleCount { gamma_side } => lambda * gamma_side / TAU,
            SandwichNormalization::Bare => lambda / TAU,
        };
        base.powi(d as i32 - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichRow {
    pub lambda: f64,
    pub s_d: f64,
    pub s_1: f64,
    pub lower: f64,
    pub upper: f64,
    pub bare_lower: f64,
    pub bare_upper: f64,
    /// False below the λ gate, where the row is reported but not judged.
    pub judged: bool,
    pub pass: bool,
    pub bare_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub d: usize,
    pub normalization: SandwichNormalization,
    pub slack: f64,
    pub min_lambda: f64,
    pub rows: Vec<SandwichRow>,
    pub pass_fraction: f64,
    pub pass: bool,
}

/// `½ N S₁ ≤ S_d ≤ d N S₁` per λ, with `N` from `normalization`, the
/// declared slack and the λ gate. The bare `(λ/2π)^{d-1}` bounds are
/// reported alongside.
pub fn check_sandwich(
    sweep_d: &SweepResult,
    sweep_1: &SweepResult,
    d: usize,
    normalization: SandwichNormalization,
) -> Result<SandwichReport> {
    check_grids(sweep_d, sweep_1)?;
    if d == 0 {
        return Err(Error::domain("d", "dimension must be positive"));
    }
    let within = |lo: f64, hi: f64, s: f64| s >= lo * (1.0 - ASYMPTOTIC_SLACK) && s <= hi * (1.0 + ASYMPTOTIC_SLACK) + 1e-12;
    let rows: Vec<SandwichRow> = sweep_d
        .lambdas
        .iter()
        .zip(sweep_d.values.iter().zip(&sweep_1.values))
        .map(|(&lambda, (&s_d, &s_1))| {
            let n = normalization.prefactor(lambda, d);
            let nb = SandwichNormalization::Bare.prefactor(lambda, d);
            let (lower, upper) = (0.5 * n * s_1, d as f64 * n * s_1);
            let (bare_lower, bare_upper) = (0.5 * nb * s_1, d as f64 * nb * s_1);
            SandwichRow {
                lambda,
                s_d,
                s_1,
                lower,
                upper,
                bare_lower,
                bare_upper,
                judged: lambda >= MIN_GATED_LAMBDA,
                pass: within(lower, upper, s_d),
                bare_pass: within(bare_lower, bare_upper, s_d),
            }
        })
        .collect();
    let judged: Vec<&SandwichRow> = rows.iter().filter(|r| r.judged).collect();
    let passed = judged.iter().filter(|r| r.pass).count();
    let pass_fraction = if judged.is_empty() { 1.0 } else { passed as f64 / judged.len() as f64 };
    Ok(SandwichReport {
        d,
        normalization,
        slack: ASYMPTOTIC_SLACK,
        min_lambda: MIN_GATED_LAMBDA,
        pass: passed == judged.len(),
        pass_fraction,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyVarianceRow {
    pub lambda: f64,
    pub entropy: f64,
    pub variance: f64,
    pub lower_holds: bool,
    /// `S / (log₂λ · (ΔN)²)`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyVarianceReport {
    pub rows: Vec<EntropyVarianceRow>,
    pub lower_bound_holds: bool,
    /// Smallest `C` with `S ≤ C log₂λ (ΔN)²` over the rows with `λ ≥ 4`.
    pub fitted_c: Option<f64>,
    /// Rounding allowance on `S ≥ 4 (ΔN)²`, relative to `max(S, 1)`.
    pub rounding_tolerance: f64,
}

/// Rounding allowance for sums of `h(e_k)` and `4 e_k (1 - e_k)`.
pub const ENTROPY_VARIANCE_ROUNDING: f64 = 1e-11;

/// `4 (ΔN)² ≤ S` pointwise in λ (exact up to summation rounding) and the
/// smallest `C` with `S ≤ C log₂λ (ΔN)²`.
pub fn check_entropy_variance(entropy: &SweepResult, variance: &SweepResult) -> Result<EntropyVarianceReport> {
    check_grids(entropy, variance)?;
    let rows: Vec<EntropyVarianceRow> = entropy
        .lambdas
        .iter()
        .zip(entropy.values.iter().zip(&variance.values))
        .map(|(&lambda, (&s, &v))| EntropyVarianceRow {
            lambda,
            entropy: s,
            variance: v,
            lower_holds: s >= 4.0 * v - ENTROPY_VARIANCE_ROUNDING * s.max(1.0),
            ratio: (lambda >= 4.0 && v > 0.0).then(|| s / (lambda.log2() * v)),
        })
        .collect();
    let fitted_c = rows.iter().filter_map(|r| r.ratio).reduce(f64::max);
    Ok(EntropyVarianceReport {
        lower_bound_holds: rows.iter().all(|r| r.lower_holds),
        fitted_c,
        rounding_tolerance: ENTROPY_VARIANCE_ROUNDING,
        rows,
    })
}
