//! Dense Hermitian realisations of the compression `P A_λ P` for symbols
//! that depend on momentum only, plus the two routes to the Hilbert–Schmidt
//! cross norm `‖P A_λ (I - P)‖²`.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{oscillation_rule, psi_for_symbol, Indicator};
use crate::quad;
use crate::setlib::{phase, set_difference_measure, AngularUnit, IntervalUnion, Mode, RegionSpec, SetFactor};

/// Default cap on the number of matrix entries (8192²).
pub const DEFAULT_MEMORY_BUDGET: usize = 8192 * 8192;

/// A real symbol `σ(ξ) = Σ_cells v_c Π_j χ_{piece_{j,c_j}}(ξ_j)`, piecewise
/// constant on a product partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSymbol {
    pieces: Vec<Vec<SetFactor>>,
    values: Vec<f64>,
    sup_norm: f64,
}

impl StepSymbol {
    /// `pieces[j]` are the disjoint pieces along dimension `j`; `values` is
    /// row-major over the cells of the product partition.
    pub fn new(pieces: Vec<Vec<SetFactor>>, values: Vec<f64>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::domain("pieces", "a symbol needs at least one dimension"));
        }
        if let Some(j) = pieces.iter().position(Vec::is_empty) {
            return Err(Error::domain("pieces", format!("dimension {j} has no pieces")));
        }
        let cells: usize = pieces.iter().map(Vec::len).product();
        if values.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("values", format!("non-finite symbol value {v}")));
        }
        for (j, dim) in pieces.iter().enumerate() {
            for a in 0..dim.len() {
                for b in 0..a {
                    if pieces_overlap(&dim[a], &dim[b])? {
                        return Err(Error::domain("pieces", format!("pieces {b} and {a} of dimension {j} overlap")));
                    }
                }
            }
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self {
            pieces,
            values,
            sup_norm,
        })
    }

    /// The indicator `χ_{Γ_1 × ... × Γ_d}`.
    pub fn indicator(factors: Vec<SetFactor>) -> Result<Self> {
        Self::new(factors.into_iter().map(|f| vec![f]).collect(), vec![1.0])
    }

    /// Indicator of the cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        let side = SetFactor::Intervals(IntervalUnion::interval(lo, hi)?);
        Self::indicator(vec![side; d])
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= c);
        self.sup_norm *= c.abs();
        self
    }

    pub fn dim(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[Vec<SetFactor>] {
        &self.pieces
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sup |σ|`, which bounds `‖A_λ‖` for momentum-only symbols.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Cells with a nonzero value, as (piece index per dimension, value).
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims: Vec<usize> = self.pieces.iter().map(Vec::len).collect();
        self.values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(flat, &v)| {
            let mut idx = vec![0; dims.len()];
            let mut rest = flat;
            for j in (0..dims.len()).rev() {
                idx[j] = rest % dims[j];
                rest /= dims[j];
            }
            (idx, v)
        })
    }

    pub fn cell_measure(&self, idx: &[usize]) -> f64 {
        idx.iter().enumerate().map(|(j, &c)| self.pieces[j][c].measure()).product()
    }

    /// True when every value is 0 or 1, so that `A_λ` is an orthogonal
    /// projection.
    pub fn is_projection(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// `∫ σ²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.cells().map(|(idx, v)| v * v * self.cell_measure(&idx)).sum()
    }

    /// Hull of all pieces along dimension `j`.
    pub fn hull(&self, j: usize) -> Option<(f64, f64)> {
        self.pieces[j].iter().filter_map(SetFactor::hull).fold(None, |acc, (lo, hi)| match acc {
            None => Some((lo, hi)),
            Some((a, b)) => Some((a.min(lo), b.max(hi))),
        })
    }
}

fn pieces_overlap(a: &SetFactor, b: &SetFactor) -> Result<bool> {
    let (Some((alo, ahi)), Some((blo, bhi))) = (a.hull(), b.hull()) else {
        return Ok(false);
    };
    if ahi <= blo || bhi <= alo {
        return Ok(false);
    }
    match (a, b) {
        (SetFactor::Intervals(x), SetFactor::Intervals(y)) => Ok(x.overlap_measure(y, 0.0) > 0.0),
        _ => Ok(true),
    }
}

/// One-dimensional kernel factor `(s/2π) ∫_{piece - c} e^{i s ξ t} dξ`,
/// with the exact diagonal value `(s/2π) mes(piece)` at `t = 0`.
fn factor_kernel(piece: &SetFactor, scale: f64, centre: f64, t: f64) -> Complex64 {
    let pref = scale / TAU;
    if t == 0.0 {
        return Complex64::new(pref * piece.measure(), 0.0);
    }
    piece.fourier(-scale * t) * phase(scale * centre * t) * pref
}

fn scale_for(mode: Mode, lambda: f64, unit: AngularUnit) -> f64 {
    match mode {
        Mode::Nystrom => lambda,
        Mode::Lattice => unit.to_radians(),
    }
}

/// Kernel `K(x, y)` of `A_λ` (continuum) or of the Fermi projection on
/// `Z^d` (lattice, where `x`, `y` are sites and `λ` does not enter).
pub fn kernel_value(
    symbol: &StepSymbol,
    lambda: f64,
    x: &[f64],
    y: &[f64],
    mode: Mode,
    unit: AngularUnit,
) -> Result<Complex64> {
    if x.len() != symbol.dim() || y.len() != symbol.dim() {
        return Err(Error::DimensionMismatch {
            expected: symbol.dim(),
            got: x.len().min(y.len()),
        });
    }
    let scale = scale_for(mode, lambda, unit);
    Ok(symbol
        .cells()
        .map(|(idx, v)| {
            idx.iter()
                .enumerate()
                .map(|(j, &c)| factor_kernel(&symbol.pieces[j][c], scale, 0.0, x[j] - y[j]))
                .product::<Complex64>()
                * v
        })
        .sum())
}

/// Quadrature rule behind the continuum nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRule {
    /// Composite 16-point Gauss–Legendre panels.
    #[default]
    GaussLegendre,
    /// Uniform trapezoid per interval. Its O(h²) endpoint error shows up at
    /// the percent level in `Tr M - Tr M²`.
    Trapezoid,
}

/// Node placement for [`assemble`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssemblyOptions {
    pub rule: NodeRule,
    /// Nyström nodes per unit length. `None` picks the coarsest admissible
    /// grid, spacing `π / (4 λ ξ_max)`.
    pub resolution: Option<usize>,
    /// Multiplies the automatic node density.
    pub oversample: f64,
    /// Maximum number of matrix entries.
    pub memory_budget: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            rule: NodeRule::GaussLegendre,
            resolution: None,
            oversample: 1.0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

/// Nodes and weights along one dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Equally spaced with a single step, so kernel tables are Toeplitz.
    pub uniform: bool,
}

impl Axis {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn lattice_axis(factor: &IntervalUnion, lambda: f64) -> Axis {
    let mut nodes = Vec::new();
    for &(lo, hi) in factor.intervals() {
        // half-open [λ lo, λ hi)
        let first = (lambda * lo).ceil() as i64;
        let last = (lambda * hi).ceil() as i64;
        nodes.extend((first..last).map(|n| n as f64));
    }
    nodes.dedup();
    let uniform = nodes.windows(2).all(|w| w[1] - w[0] == 1.0);
    let weights = vec![1.0; nodes.len()];
    Axis {
        nodes,
        weights,
        uniform,
    }
}

// Positive half of the 16-point Gauss–Legendre rule on [-1, 1].
const GL16: [(f64, f64); 8] = [
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

fn gauss_axis(factor: &IntervalUnion, spacing: f64) -> Axis {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &(lo, hi) in factor.intervals() {
        let panels = ((hi - lo) / (16.0 * spacing)).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + width * (p as f64 + 0.5);
            let half = 0.5 * width;
            for &(x, w) in GL16.iter().rev() {
                nodes.push(mid - half * x);
                weights.push(half * w);
            }
            for &(x, w) in &GL16 {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
    }
    Axis {
        nodes,
        weights,
        uniform: false,
    }
}

fn trapezoid_axis(factor: &IntervalUnion, spacing: f64) -> Axis {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for &(lo, hi) in factor.intervals() {
        let len = hi - lo;
        let m = ((len / spacing).ceil() as usize).max(1);
        let step = len / m as f64;
        for i in 0..=m {
            nodes.push(if i == m { hi } else { lo + step * i as f64 });
            weights.push(if i == 0 || i == m { 0.5 * step } else { step });
        }
    }
    let uniform = factor.len() == 1;
    Axis {
        nodes,
        weights,
        uniform,
    }
}

/// Storage for a dense Hermitian matrix.
#[derive(Clone, Debug)]
pub enum DenseHermitian {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl DenseHermitian {
    pub fn n(&self) -> usize {
        match self {
            DenseHermitian::Real(m) => m.nrows(),
            DenseHermitian::Complex(m) => m.nrows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, DenseHermitian::Real(_))
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            DenseHermitian::Real(m) => Complex64::new(m[(i, j)], 0.0),
            DenseHermitian::Complex(m) => m[(i, j)],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.entry(i, i).re).sum()
    }

    /// `Σ |M_ij|²`, which equals `Tr M²` for Hermitian `M`.
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            DenseHermitian::Real(m) => m.col_iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum(),
            DenseHermitian::Complex(m) => m.col_iter().map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>()).sum(),
        }
    }

    /// `max |M_ij - conj(M_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in j..n {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Adds `delta` to a single entry, breaking Hermiticity. Test hook for
    /// the verification suite.
    #[doc(hidden)]
    pub fn perturb_entry(&mut self, i: usize, j: usize, delta: f64) {
        match self {
            DenseHermitian::Real(m) => m[(i, j)] += delta,
            DenseHermitian::Complex(m) => m[(i, j)] += delta,
        }
    }
}

/// The assembled operator `w^{1/2} K w^{1/2}` together with its
/// discretisation data.
#[derive(Clone, Debug)]
pub struct OverlapOperator {
    pub matrix: DenseHermitian,
    pub lambda: f64,
    pub region: RegionSpec,
    pub symbol: StepSymbol,
    pub mode: Mode,
    /// Per-dimension node axes; the nodes are their Cartesian product in
    /// row-major order.
    pub axes: Vec<Axis>,
    /// Momentum-frame shift applied per dimension (the symbol is centred on
    /// its hull before assembly; this is a unitary change that leaves the
    /// spectrum unchanged).
    pub frame_shift: Vec<f64>,
}

impl OverlapOperator {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Product quadrature weight of node `a` (1 on the lattice).
    pub fn weight(&self, a: usize) -> f64 {
        self.multi_index(a).iter().zip(&self.axes).map(|(&i, ax)| ax.weights[i]).product()
    }

    pub fn node(&self, a: usize) -> Vec<f64> {
        self.multi_index(a).iter().zip(&self.axes).map(|(&i, ax)| ax.nodes[i]).collect()
    }

    fn multi_index(&self, mut a: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for j in (0..self.axes.len()).rev() {
            idx[j] = a % self.axes[j].len();
            a /= self.axes[j].len();
        }
        idx
    }

    pub fn is_projection(&self) -> bool {
        self.symbol.is_projection()
    }
}

enum Table {
    Toeplitz(Vec<Complex64>),
    Dense { n: usize, data: Vec<Complex64> },
}

impl Table {
    fn build(axis: &Axis, f: impl Fn(f64) -> Complex64 + Sync) -> Self {
        let n = axis.len();
        if axis.uniform && n > 1 {
            let step = axis.nodes[1] - axis.nodes[0];
            Table::Toeplitz((0..n).into_par_iter().map(|k| f(step * k as f64)).collect())
        } else {
            let mut data = vec![Complex64::new(0.0, 0.0); n * n];
            let upper: Vec<Vec<Complex64>> = (0..n)
                .into_par_iter()
                .map(|a| (a..n).map(|b| f(axis.nodes[a] - axis.nodes[b])).collect())
                .collect();
            for (a, row) in upper.into_iter().enumerate() {
                for (off, v) in row.into_iter().enumerate() {
                    let b = a + off;
                    data[a * n + b] = v;
                    data[b * n + a] = v.conj();
                }
            }
            Table::Dense { n, data }
        }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> Complex64 {
        match self {
            Table::Toeplitz(v) => {
                if a >= b {
                    v[a - b]
                } else {
                    v[b - a].conj()
                }
            }
            Table::Dense { n, data } => data[a * n + b],
        }
    }

    fn max_parts(&self) -> (f64, f64) {
        let vals: &[Complex64] = match self {
            Table::Toeplitz(v) => v,
            Table::Dense { data, .. } => data,
        };
        vals.iter().fold((0.0f64, 0.0f64), |(re, im), z| (re.max(z.re.abs()), im.max(z.im.abs())))
    }
}

/// Assembles the compression of `A_λ` to `λΩ` (lattice: exactly, on the
/// sites of `λΩ ∩ Z^d`; continuum: symmetric Nyström on a trapezoidal grid).
pub fn assemble(
    region: &RegionSpec,
    symbol: &StepSymbol,
    lambda: f64,
    options: &AssemblyOptions,
) -> Result<OverlapOperator> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("lambda", format!("must be positive, got {lambda}")));
    }
    if region.dim() != symbol.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.dim(),
            got: symbol.dim(),
        });
    }
    let d = region.dim();
    let mode = region.mode();
    let unit = region.angular_unit();
    let frame_shift: Vec<f64> = (0..d)
        .map(|j| symbol.hull(j).map_or(0.0, |(lo, hi)| 0.5 * (lo + hi)))
        .collect();
    if mode == Mode::Lattice {
        let half_period = PI / unit.to_radians();
        for j in 0..d {
            if let Some((lo, hi)) = symbol.hull(j) {
                if lo < -half_period * (1.0 + 1e-12) || hi > half_period * (1.0 + 1e-12) {
                    return Err(Error::domain(
                        "symbol",
                        format!("lattice momenta must lie in one Brillouin zone, dimension {j} spans [{lo}, {hi}]"),
                    ));
                }
            }
        }
    }

    let axes: Vec<Axis> = match mode {
        Mode::Lattice => region.factors().iter().map(|f| lattice_axis(f, lambda)).collect(),
        Mode::Nystrom => {
            let mut axes = Vec::with_capacity(d);
            for (j, f) in region.factors().iter().enumerate() {
                let xi_max = symbol.hull(j).map_or(0.0, |(lo, hi)| 0.5 * (hi - lo));
                let required = 4.0 * lambda * xi_max / PI;
                let density = match options.resolution {
                    Some(r) if (r as f64) < required * (1.0 - 1e-12) => {
                        return Err(Error::domain(
                            "resolution",
                            format!("{r} nodes per unit length under-resolves the kernel; need at least {required:.1}"),
                        ));
                    }
                    Some(r) => r as f64,
                    None => required * options.oversample.max(1.0),
                };
                let spacing = if density > 0.0 { 1.0 / density } else { f.diameter().max(1.0) };
                axes.push(match options.rule {
                    NodeRule::GaussLegendre => gauss_axis(f, spacing),
                    NodeRule::Trapezoid => trapezoid_axis(f, spacing),
                });
            }
            axes
        }
    };
    let n: usize = axes.iter().map(Axis::len).product();
    if n == 0 {
        return Err(Error::domain("region", format!("no sites of lambda*Omega for lambda = {lambda}")));
    }
    if n.saturating_mul(n) > options.memory_budget {
        let ratio = (options.memory_budget as f64).sqrt() / n as f64;
        return Err(Error::Size {
            n,
            budget: options.memory_budget,
            suggested_lambda: lambda * ratio.powf(1.0 / d as f64),
        });
    }

    let scale = scale_for(mode, lambda, unit);
    let cells: Vec<(Vec<usize>, f64)> = symbol.cells().collect();
    // tables[j][p]: kernel factor of piece p along dimension j
    let tables: Vec<Vec<Table>> = (0..d)
        .map(|j| {
            symbol.pieces()[j]
                .iter()
                .map(|piece| Table::build(&axes[j], |t| factor_kernel(piece, scale, frame_shift[j], t)))
                .collect()
        })
        .collect();
    let (max_re, max_im) = tables
        .iter()
        .flatten()
        .map(Table::max_parts)
        .fold((0.0f64, 0.0f64), |(a, b), (c, e)| (a.max(c), b.max(e)));
    let real = max_im <= 1e-14 * max_re.max(f64::MIN_POSITIVE);

    let dims: Vec<usize> = axes.iter().map(Axis::len).collect();
    let split = |mut a: usize| {
        let mut idx = vec![0; d];
        for j in (0..d).rev() {
            idx[j] = a % dims[j];
            a /= dims[j];
        }
        idx
    };
    let sqrt_w: Vec<f64> = (0..n)
        .map(|a| split(a).iter().zip(&axes).map(|(&i, ax)| ax.weights[i]).product::<f64>().sqrt())
        .collect();
    let multi: Vec<Vec<usize>> = (0..n).map(split).collect();
    let entry = |a: usize, b: usize| -> Complex64 {
        let (ia, ib) = (&multi[a], &multi[b]);
        let k: Complex64 = cells
            .iter()
            .map(|(idx, v)| {
                let mut prod = Complex64::new(*v, 0.0);
                for j in 0..d {
                    prod *= tables[j][idx[j]].get(ia[j], ib[j]);
                }
                prod
            })
            .sum();
        k * (sqrt_w[a] * sqrt_w[b])
    };

    // column-major; column `b` holds conj of row `b`, i.e. M[a][b] for all a
    let matrix = if real {
        let mut data = vec![0.0f64; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(b, col)| {
            for (a, slot) in col.iter_mut().enumerate() {
                *slot = entry(a, b).re;
            }
        });
        DenseHermitian::Real(Mat::from_fn(n, n, |i, j| data[j * n + i]))
    } else {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(b, col)| {
            for (a, slot) in col.iter_mut().enumerate() {
                *slot = entry(a, b);
            }
        });
        DenseHermitian::Complex(Mat::from_fn(n, n, |i, j| data[j * n + i]))
    };

    Ok(OverlapOperator {
        matrix,
        lambda,
        region: region.clone(),
        symbol: symbol.clone(),
        mode,
        axes,
        frame_shift,
    })
}

/// `Tr PQP - Tr (PQP)²` from the assembled matrix: the particle-number
/// variance, and the squared Hilbert–Schmidt norm of the off-diagonal block
/// `P A_λ (I - P)`.
pub fn hs_cross_norm_direct(op: &OverlapOperator) -> Result<f64> {
    if !op.is_projection() {
        return Err(Error::Unsupported(
            "the cross norm identity needs a projection symbol (values in {0, 1})".into(),
        ));
    }
    Ok(op.matrix.trace() - op.matrix.frobenius_sq())
}

/// Integrals `∫ ψ(λt) D(t) dt` and `∫ ψ(λt) C(t) dt` along one dimension,
/// where `C(t) = mes(Ω ∩ (Ω + t))` and `D = mes(Ω) - C`.
fn cross_factor_integrals(
    omega: &IntervalUnion,
    psi: &(dyn Fn(f64) -> f64 + Sync),
    psi_total: f64,
    psi_diameter: f64,
    lambda: f64,
) -> Result<(f64, f64)> {
    let m = omega.measure();
    let reach = lambda * omega.diameter();
    let mut points: Vec<f64> = if omega.len() <= 64 {
        omega.autocorrelation_breakpoints().into_iter().map(|t| lambda * t).filter(|&u| u < reach).collect()
    } else {
        Vec::new()
    };
    points.push(reach);
    let d_of = |u: f64| 0.5 * crate::setlib::modulus_sq(omega, u / lambda);
    let mut rule = oscillation_rule(psi_diameter);
    rule.abs_floor = psi_total * m;
    let heads = quad::cumulative(
        |u| {
            let p = psi(u);
            let dd = d_of(u);
            [p * dd, p * (m - dd), p]
        },
        0.0,
        &points,
        rule,
    )?;
    let head = heads.last().expect("at least one point");
    // beyond the reach D = m and C = 0
    let tail = (psi_total - 2.0 * head[2]).max(0.0);
    let j_d = (2.0 * head[0] + m * tail) / lambda;
    let j_c = 2.0 * head[1] / lambda;
    Ok((j_d, j_c))
}

/// `‖P A_λ (I - P)‖²` through the kernel-side identity
/// `(λ/2π)^{2d} ∫∫ ψ(λ(x - y)) χ_Ω(x) (1 - χ_Ω(y)) dx dy`, which for a
/// projection symbol holds with equality. Along each dimension the inner
/// integral is `mes(Ω_j \ (Ω_j + t)) = ½ ω₂[χ_{Ω_j}](t)²`; products are
/// combined by the telescoping form of the product-set difference.
pub fn hs_cross_norm_integral(omega: &RegionSpec, gamma: &StepSymbol, lambda: f64) -> Result<f64> {
    if omega.mode() != Mode::Nystrom {
        return Err(Error::Unsupported("the integral route is implemented for continuum regions".into()));
    }
    if !gamma.is_projection() {
        return Err(Error::Unsupported("the integral identity needs a projection symbol".into()));
    }
    if omega.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            got: gamma.dim(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain("lambda", format!("must be positive, got {lambda}")));
    }
    let d = omega.dim();
    let cells: Vec<_> = gamma.cells().collect();
    if cells.is_empty() {
        return Ok(0.0);
    }
    let pref = (lambda / TAU).powi(2 * d as i32);
    if d == 1 {
        let psi = |u: f64| psi_for_symbol(gamma, &[u]).expect("one-dimensional symbol");
        let diam = gamma.hull(0).map_or(1.0, |(lo, hi)| hi - lo);
        let (j_d, _) = cross_factor_integrals(&omega.factors()[0], &psi, TAU * gamma.l2_norm_sq(), diam, lambda)?;
        return Ok(pref * j_d);
    }
    if cells.len() != 1 {
        return Err(Error::Unsupported(
            "multi-dimensional integral route needs a single product cell".into(),
        ));
    }
    let idx = &cells[0].0;
    let mut factors = Vec::with_capacity(d);
    for j in 0..d {
        let piece = &gamma.pieces()[j][idx[j]];
        let psi = |u: f64| crate::fourier::chi_hat_sq(piece, u);
        let (j_d, j_c) = cross_factor_integrals(&omega.factors()[j], &psi, TAU * piece.measure(), piece.diameter(), lambda)?;
        let full = omega.factors()[j].measure() * TAU * piece.measure() / lambda;
        factors.push((j_d, j_c, full));
    }
    let mut total = 0.0;
    for k in 0..d {
        let mut term = factors[k].0;
        for (j, f) in factors.iter().enumerate() {
            if j < k {
                term *= f.1;
            } else if j > k {
                term *= f.2;
            }
        }
        total += term;
    }
    Ok(pref * total)
}

/// `mes(Ω \ (Ω + t))`, exposed for callers assembling their own integrands.
pub fn escape_measure(omega: &IntervalUnion, t: f64) -> f64 {
    set_difference_measure(omega, -t)
}

const DUMP_MAGIC: &[u8; 8] = b"SZGOPv1\0";

/// Header of a binary matrix dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub n: u64,
    pub lambda: f64,
    pub mode: Mode,
    pub complex: bool,
}

/// Writes `magic | n: u64 | λ: f64 | mode: u8 | complex: u8 | 6 pad bytes`
/// followed by the matrix in row-major order as little-endian IEEE-754
/// doubles (complex entries as `re, im` pairs).
pub fn write_matrix<W: Write>(op: &OverlapOperator, mut w: W) -> Result<()> {
    let n = op.n();
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(n as u64).to_le_bytes())?;
    w.write_all(&op.lambda.to_le_bytes())?;
    let mode = match op.mode {
        Mode::Lattice => 0u8,
        Mode::Nystrom => 1u8,
    };
    w.write_all(&[mode, u8::from(!op.matrix.is_real()), 0, 0, 0, 0, 0, 0])?;
    for i in 0..n {
        for j in 0..n {
            let z = op.matrix.entry(i, j);
            w.write_all(&z.re.to_le_bytes())?;
            if !op.matrix.is_real() {
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<(DumpHeader, DenseHermitian)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::domain("dump", "bad magic"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let lambda = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let mode = match b8[0] {
        0 => Mode::Lattice,
        1 => Mode::Nystrom,
        other => return Err(Error::domain("dump", format!("unknown mode byte {other}"))),
    };
    let complex = b8[1] != 0;
    let n_us = n as usize;
    let mut read_f64 = || -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let matrix = if complex {
        let mut data = Vec::with_capacity(n_us * n_us);
        for _ in 0..n_us * n_us {
            let re = read_f64()?;
            data.push(Complex64::new(re, read_f64()?));
        }
        DenseHermitian::Complex(Mat::from_fn(n_us, n_us, |i, j| data[i * n_us + j]))
    } else {
        let mut data = Vec::with_capacity(n_us * n_us);
        for _ in 0..n_us * n_us {
            data.push(read_f64()?);
        }
        DenseHermitian::Real(Mat::from_fn(n_us, n_us, |i, j| data[i * n_us + j]))
    };
    Ok((
        DumpHeader {
            n,
            lambda,
            mode,
            complex,
        },
        matrix,
    ))
}
