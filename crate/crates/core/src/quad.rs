//! Composite Gauss–Kronrod (7/15) quadrature on fixed-width panels with
//! global refinement, used for the oscillatory Fourier-side integrals.

use rayon::prelude::*;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Refinement policy for [`cumulative`].
#[derive(Clone, Copy, Debug)]
pub struct PanelRule {
    /// Initial panel width; every breakpoint also starts a new panel.
    pub width: f64,
    /// Accept when the summed Kronrod error estimate is below
    /// `rel_tol · max(|total|, abs_floor)` for every component.
    pub rel_tol: f64,
    pub abs_floor: f64,
    /// Number of times the panel width may be halved.
    pub max_refinements: u32,
}

impl PanelRule {
    pub fn new(width: f64) -> Self {
        Self {
            width,
            rel_tol: 1e-9,
            abs_floor: 0.0,
            max_refinements: 6,
        }
    }
}

fn gk15<const K: usize>(f: &impl Fn(f64) -> [f64; K], a: f64, b: f64) -> ([f64; K], [f64; K]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kr = [0.0; K];
    let mut ga = [0.0; K];
    for k in 0..K {
        kr[k] = WGK[7] * fc[k];
        ga[k] = WG[3] * fc[k];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        for k in 0..K {
            let s = f1[k] + f2[k];
            kr[k] += WGK[i] * s;
            if i % 2 == 1 {
                ga[k] += WG[i / 2] * s;
            }
        }
    }
    let mut err = [0.0; K];
    for k in 0..K {
        kr[k] *= h;
        err[k] = (kr[k] - ga[k] * h).abs();
    }
    (kr, err)
}

fn panels(start: f64, points: &[f64], width: f64) -> (Vec<(f64, f64)>, Vec<usize>) {
    let mut out = Vec::new();
    let mut ends = Vec::with_capacity(points.len());
    let mut left = start;
    for &p in points {
        if p > left {
            let n = ((p - left) / width).ceil().max(1.0) as usize;
            let step = (p - left) / n as f64;
            for i in 0..n {
                let a = left + step * i as f64;
                let b = if i + 1 == n { p } else { left + step * (i + 1) as f64 };
                out.push((a, b));
            }
            left = p;
        }
        ends.push(out.len());
    }
    (out, ends)
}

/// Integrals `∫_start^{p} f` for each of the increasing `points`.
///
/// Each point is also a panel boundary, so kinks of the integrand placed at
/// points are integrated exactly by the rule.
pub fn cumulative<const K: usize, F>(f: F, start: f64, points: &[f64], rule: PanelRule) -> Result<Vec<[f64; K]>>
where
    F: Fn(f64) -> [f64; K] + Sync,
{
    if points.windows(2).any(|w| w[1] < w[0]) || points.first().is_some_and(|&p| p < start) {
        return Err(Error::domain("points", "quadrature points must be increasing and >= start"));
    }
    if !(rule.width > 0.0) {
        return Err(Error::domain("width", format!("panel width must be positive, got {}", rule.width)));
    }
    let mut width = rule.width;
    let mut last_ratio = f64::INFINITY;
    for _ in 0..=rule.max_refinements {
        let (cells, ends) = panels(start, points, width);
        let per_cell: Vec<([f64; K], [f64; K])> = cells.par_iter().map(|&(a, b)| gk15(&f, a, b)).collect();
        let mut total = [0.0; K];
        let mut err = [0.0; K];
        for (v, e) in &per_cell {
            for k in 0..K {
                total[k] += v[k];
                err[k] += e[k];
            }
        }
        let ratio = (0..K)
            .map(|k| err[k] / total[k].abs().max(rule.abs_floor).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if ratio <= rule.rel_tol {
            let mut out = Vec::with_capacity(points.len());
            let mut acc = [0.0; K];
            let mut cell = 0;
            for &end in &ends {
                while cell < end {
                    for k in 0..K {
                        acc[k] += per_cell[cell].0[k];
                    }
                    cell += 1;
                }
                out.push(acc);
            }
            return Ok(out);
        }
        last_ratio = ratio;
        width *= 0.5;
    }
    Err(Error::Numerical {
        reason: format!(
            "panel quadrature did not reach relative tolerance {:e} after {} refinements",
            rule.rel_tol, rule.max_refinements
        ),
        achieved: last_ratio,
    })
}

/// `∫_a^b f` with the same panel rule.
pub fn integrate<F>(f: F, a: f64, b: f64, rule: PanelRule) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    Ok(cumulative(|x| [f(x)], a, &[b], rule)?[0][0])
}
