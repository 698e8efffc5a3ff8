//! The three subcommands. Each writes its artifacts into the output
//! directory and returns a JSON summary that is also written to disk.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use szego_core::fourier::{fit_tail_exponent, TailProfile};
use szego_core::kernels::{assemble, hs_cross_norm_direct, hs_cross_norm_integral, StepSymbol};
use szego_core::scaling::{
    self, check_entropy_variance, check_sandwich, fit_power_log, sweep, widom_coefficient, Experiment, Quantity,
    SandwichNormalization, SweepResult,
};
use szego_core::setlib::{build_cantor_omega, cantor_shift_grid, modulus_window, CantorSet};
use szego_core::spectral::{self, eigen_residual, Functional, TraceReport};
use szego_core::{Error, IntervalUnion, Mode, RegionSpec, SetFactor};

use crate::config::{cantor_from, CantorConfig, ConfigError, ExperimentConfig, Suite};
use crate::plot;

/// Failure of a subcommand, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::DimensionMismatch { .. } | Error::Unsupported(_) | Error::GridMismatch(_) => {
                CliError::Config(ConfigError(e.to_string()))
            }
            Error::Io(io) => CliError::Io(io),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn write(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json(out: &Path, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serialises");
    text.push('\n');
    write(out, name, text)
}

fn slug(f: &Functional) -> String {
    f.name().chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect::<String>().trim_matches('_').to_string()
}

fn fit_json(s: &SweepResult, p: Option<f64>) -> Value {
    match fit_power_log(s, p) {
        Ok(fit) => json!(fit),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn emit_series(out: &Path, s: &SweepResult, svg: bool, files: &mut Vec<String>) -> Result<(), CliError> {
    let name = format!("{}.dat", s.quantity);
    write(out, &name, plot::two_column("lambda", &s.quantity, &s.lambdas, &s.values))?;
    files.push(name);
    if svg {
        let name = format!("{}.svg", s.quantity);
        write(out, &name, plot::svg_line_plot(&format!("{} vs lambda", s.quantity), "lambda", &s.quantity, &s.lambdas, &s.values, true))?;
        files.push(name);
    }
    Ok(())
}

/// The momentum box of a single-cell symbol made of plain intervals.
fn gamma_region(symbol: &StepSymbol) -> Option<RegionSpec> {
    if symbol.values().len() != 1 {
        return None;
    }
    let factors = symbol
        .pieces()
        .iter()
        .map(|p| match &p[0] {
            SetFactor::Intervals(u) if !u.is_empty() => Some(u.clone()),
            _ => None,
        })
        .collect::<Option<Vec<IntervalUnion>>>()?;
    RegionSpec::new(factors, Mode::Nystrom).ok()
}

fn is_cube(region: &RegionSpec, symbol: &StepSymbol) -> bool {
    let r0 = &region.factors()[0];
    let s0 = &symbol.pieces()[0];
    symbol.values().len() == 1
        && region.factors().iter().all(|f| f == r0)
        && symbol.pieces().iter().all(|p| p == s0)
        && matches!(s0[0], SetFactor::Intervals(_))
}

/// `sweep`: the spectral pipeline over the λ grid, with fits and bound
/// checks.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let region = cfg.region_spec()?;
    let symbol = cfg.step_symbol()?;
    let lambdas = cfg.lambdas()?;
    if region.dim() != symbol.dim() {
        return Err(ConfigError(format!(
            "invalid `symbol.factors`: {} factors for a {}-dimensional region",
            symbol.dim(),
            region.dim()
        ))
        .into());
    }
    fs::create_dir_all(out)?;
    let d = region.dim();
    let mut exp = Experiment::new(region.clone(), symbol.clone(), lambdas);
    exp.assembly = cfg.assembly_options();
    exp.functionals = cfg.functionals.clone();
    exp.parallelism = cfg.parallelism;
    let run = sweep(&exp)?;

    let mut files = Vec::new();
    let mut csv = Vec::new();
    run.write_csv(&mut csv)?;
    write(out, "sweep.csv", csv)?;
    files.push("sweep.csv".to_string());
    for f in &cfg.functionals {
        let mut text = format!("{}\n", TraceReport::CSV_HEADER);
        for row in &run.rows {
            if let Some(r) = row.reports.iter().find(|r| r.functional == f.name()) {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
        }
        let name = format!("trace_{}.csv", slug(f));
        write(out, &name, text)?;
        files.push(name);
    }

    let mut summary = json!({
        "subcommand": "sweep",
        "config": cfg,
        "dimension": d,
        "lambdas": run.rows.iter().map(|r| r.lambda).collect::<Vec<_>>(),
        "matrix_sizes": run.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        "failures": run.failures,
        "clamped_eigenvalues": run.rows.iter().map(|r| r.clamp.count).sum::<usize>(),
    });
    for f in &cfg.functionals {
        let s = run.series(&Quantity::Remainder(f.clone()), "")?;
        summary["remainders"][f.name()] = json!({ "lambdas": s.lambdas, "values": s.values });
    }

    if symbol.is_projection() {
        let entropy = run.series(&Quantity::Entropy, "")?;
        let variance = run.series(&Quantity::Variance, "")?;
        emit_series(out, &entropy, cfg.plots.svg, &mut files)?;
        emit_series(out, &variance, cfg.plots.svg, &mut files)?;
        let p_entropy = cfg.fit.entropy_exponent.unwrap_or((d - 1) as f64);
        let steps: Vec<Value> = entropy
            .lambdas
            .windows(2)
            .zip(entropy.values.windows(2))
            .map(|(l, v)| json!({ "from": l[0], "to": l[1], "difference": v[1] - v[0] }))
            .collect();
        summary["fits"] = json!({
            "entropy": fit_json(&entropy, Some(p_entropy)),
            "variance": fit_json(&variance, cfg.fit.variance_exponent),
        });
        summary["entropy_steps"] = json!(steps);
        if let Some(gamma) = gamma_region(&symbol) {
            let w = widom_coefficient(&region, &gamma)?;
            summary["widom_coefficient"] = json!(w.value);
        }
        let mut checks = json!({});
        if cfg.checks.entropy_variance {
            checks["entropy_variance"] = json!(check_entropy_variance(&entropy, &variance)?);
        }
        if cfg.checks.sandwich && d >= 2 {
            if !is_cube(&region, &symbol) {
                return Err(ConfigError("invalid `checks.sandwich`: needs a cube region and a cube symbol".into()).into());
            }
            let r1 = RegionSpec::new(vec![region.factors()[0].clone()], region.mode())?.with_angular_unit(region.angular_unit());
            let s1 = StepSymbol::indicator(vec![symbol.pieces()[0][0].clone()])?;
            let mut exp1 = Experiment::new(r1, s1, entropy.lambdas.clone());
            exp1.assembly = cfg.assembly_options();
            exp1.parallelism = cfg.parallelism;
            let one = sweep(&exp1)?.series(&Quantity::Entropy, "d=1")?;
            let side = symbol.pieces()[0][0].measure()
                * match region.mode() {
                    Mode::Lattice => region.angular_unit().to_radians(),
                    Mode::Nystrom => 1.0,
                };
            checks["sandwich"] = json!(check_sandwich(&entropy, &one, d, SandwichNormalization::ParticleCount { gamma_side: side })?);
        }
        summary["checks"] = checks;
    }
    summary["tolerances"] = json!({
        "asymptotic_slack": scaling::ASYMPTOTIC_SLACK,
        "min_gated_lambda": scaling::MIN_GATED_LAMBDA,
        "entropy_variance_rounding": scaling::ENTROPY_VARIANCE_ROUNDING,
        "clamp_eps": spectral::CLAMP_EPS,
    });
    files.push("summary.json".into());
    summary["outputs"] = json!(files);
    write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

fn beta_tag(beta: f64) -> String {
    format!("{beta}")
}

/// `fractal`: Cantor-like sets, their modulus windows and tail exponents.
/// Interval lists longer than this are cut short in `cantor_beta*.json`;
/// `interval_count` always gives the full length.
const MAX_WRITTEN_INTERVALS: usize = 4096;

pub fn run_fractal(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let fr = cfg
        .fractal
        .as_ref()
        .ok_or_else(|| ConfigError("invalid `fractal`: required for this subcommand".into()))?;
    if fr.betas.is_empty() {
        return Err(ConfigError("invalid `fractal.betas`: empty list".into()).into());
    }
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut per_beta = Vec::new();
    for (k, &beta) in fr.betas.iter().enumerate() {
        let set: CantorSet = cantor_from(
            &format!("fractal.betas[{k}]"),
            &CantorConfig {
                beta,
                depth: fr.depth,
            },
        )?;
        let params = *set.params();
        let tag = beta_tag(beta);
        // Near β = 1 the copy scales exceed double precision; the analysis
        // then runs on the unit-scale copy alone.
        let (union, union_error) = match set.to_union() {
            Ok(u) => (u, None),
            Err(Error::Truncation(msg)) => (build_cantor_omega(&params, 1.0)?, Some(msg)),
            Err(e) => return Err(e.into()),
        };
        let set_json = json!({
            "params": params,
            "copies": set.copies(),
            "analysed": if union_error.is_some() { "base_copy" } else { "union" },
            "union_error": union_error,
            "measure": union.measure(),
            "interval_count": union.len(),
            "intervals": &union.intervals()[..union.len().min(MAX_WRITTEN_INTERVALS)],
        });
        let name = format!("cantor_beta{tag}.json");
        write_json(out, &name, &set_json)?;
        files.push(name);

        let shifts = cantor_shift_grid(&params);
        let window = if shifts.len() >= 2 {
            Some(modulus_window(&union, beta, &shifts)?)
        } else {
            None
        };
        if let Some(window) = &window {
            let mut text = String::from("h,modulus_sq,ratio\n");
            for (h, r) in window.shifts.iter().zip(&window.ratios) {
                text.push_str(&format!("{h:e},{:.17e},{r:.17e}\n", r * h.powf(beta)));
            }
            let name = format!("modulus_beta{tag}.csv");
            write(out, &name, text)?;
            files.push(name);
        }

        let rho_window = (fr.tail_window[0], fr.tail_window[1]);
        let tail: TailProfile = if union_error.is_some() {
            fit_tail_exponent(&union, rho_window, fr.tail_points)?
        } else {
            fit_tail_exponent(&set, rho_window, fr.tail_points)?
        };
        let mut buf = Vec::new();
        tail.write_csv(&mut buf)?;
        let name = format!("tail_beta{tag}.csv");
        write(out, &name, buf)?;
        files.push(name);
        if cfg.plots.svg {
            if let Some(window) = &window {
                let name = format!("modulus_beta{tag}.svg");
                write(out, &name, plot::svg_line_plot(&format!("modulus_sq(h)/h^{beta}"), "h", "ratio", &window.shifts, &window.ratios, true))?;
                files.push(name);
            }
            let logs: Vec<f64> = tail.tail_values.iter().map(|t| t.log2()).collect();
            let name = format!("tail_beta{tag}.svg");
            write(out, &name, plot::svg_line_plot(&format!("tail integral, beta = {beta}"), "rho", "log2 T(rho)", &tail.rho_grid, &logs, true))?;
            files.push(name);
        }
        per_beta.push(json!({
            "beta": beta,
            "depth": params.depth(),
            "copies": params.n_copies() + 1,
            "analysed": if union_error.is_some() { "base_copy" } else { "union" },
            "c_lower": window.as_ref().map(|w| w.c_lower),
            "c_upper": window.as_ref().map(|w| w.c_upper),
            "spread": window.as_ref().map(|w| w.spread()),
            "decades": window.as_ref().map(|w| w.decades()),
            "window_pass": window.as_ref().map(|w| w.spread() <= fr.max_spread),
            "tail_exponent": tail.fitted_exponent,
            "tail_target": -beta,
            "tail_pass": (tail.fitted_exponent + beta).abs() <= 0.1,
        }));
    }
    files.push("summary.json".into());
    let summary = json!({
        "subcommand": "fractal",
        "config": cfg,
        "sets": per_beta,
        "outputs": files,
    });
    write_json(out, "summary.json", &summary)?;
    Ok(summary)
}

struct Case {
    name: String,
    region: RegionSpec,
    symbol: StepSymbol,
    lambda: f64,
}

fn builtin_cases() -> Vec<Case> {
    let half = |d| StepSymbol::cube(-PI / 2.0, PI / 2.0, d).expect("valid cube");
    let unit = |d, mode| RegionSpec::cube(0.0, 1.0, d, mode).expect("valid cube");
    let union = RegionSpec::new(vec![IntervalUnion::new([(0.0, 1.0), (1.5, 2.0)]).expect("valid union")], Mode::Nystrom).expect("valid region");
    let cantor = StepSymbol::indicator(vec![CantorSet::from_beta(0.5).expect("valid beta").into()]).expect("valid symbol");
    vec![
        Case { name: "lattice d=1 half filling".into(), region: unit(1, Mode::Lattice), symbol: half(1), lambda: 64.0 },
        Case { name: "lattice d=2 half filling".into(), region: unit(2, Mode::Lattice), symbol: half(2), lambda: 16.0 },
        Case { name: "nystrom interval".into(), region: unit(1, Mode::Nystrom), symbol: StepSymbol::cube(-1.0, 1.0, 1).expect("valid cube"), lambda: 32.0 },
        Case { name: "nystrom union".into(), region: union, symbol: StepSymbol::cube(-1.0, 0.5, 1).expect("valid cube"), lambda: 32.0 },
        Case { name: "nystrom cantor beta=0.5".into(), region: unit(1, Mode::Nystrom), symbol: cantor, lambda: 16.0 },
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `verify`: exact identities and the two cross-norm routes on a fixed
/// suite plus the configured case, if any.
pub fn run_verify(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let mut cases = builtin_cases();
    if cfg.region.is_some() && cfg.symbol.is_some() && cfg.lambda.is_some() {
        let region = cfg.region_spec()?;
        let symbol = cfg.step_symbol()?;
        for l in cfg.lambdas()? {
            cases.push(Case { name: format!("config lambda={l}"), region: region.clone(), symbol: symbol.clone(), lambda: l });
        }
    }
    fs::create_dir_all(out)?;
    let tol = &cfg.tolerances;
    let mut skipped = Vec::new();
    let mut checks = Vec::new();
    let mut injected = false;
    for case in &cases {
        if cfg.verify.suite == Suite::LatticeOnly && case.region.mode() == Mode::Nystrom {
            skipped.push(json!({ "case": case.name, "reason": "lattice-only suite skips Nystrom comparisons" }));
            continue;
        }
        let mut record = |check: &str, value: f64, tolerance: f64, pass: bool| {
            checks.push(json!({ "case": case.name, "check": check, "value": value, "tolerance": tolerance, "pass": pass }));
        };
        let mut op = assemble(&case.region, &case.symbol, case.lambda, &cfg.assembly_options())?;
        if cfg.verify.inject_asymmetry && !injected && op.n() > 1 {
            let scale = op.matrix.entry(0, 0).norm().max(1.0);
            op.matrix.perturb_entry(0, 1, 1e-6 * scale);
            injected = true;
        }
        let max_entry = (0..op.n()).map(|i| op.matrix.entry(i, i).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let herm = op.matrix.hermiticity_defect() / max_entry;
        record("hermiticity", herm, tol.hermiticity_rel, herm <= tol.hermiticity_rel);
        if herm > tol.hermiticity_rel {
            continue;
        }
        let weyl = spectral::weyl_term(&case.region, &case.symbol, case.lambda, &Functional::Power(1))?;
        let e = rel(op.matrix.trace(), weyl);
        record("weyl_trace", e, tol.weyl_rel, e <= tol.weyl_rel);
        let spec = spectral::eigenvalues(&op)?;
        let residual = eigen_residual(&op.matrix, 5)?;
        record("eigen_residual", residual, tol.residual_rel, residual <= tol.residual_rel);
        if !case.symbol.is_projection() {
            continue;
        }
        let v = spectral::variance(&spec)?;
        let s = spectral::entropy(&spec)?;
        let direct = hs_cross_norm_direct(&op)?;
        let e = rel(direct, v);
        record("variance_vs_cross_norm", e, tol.identity_rel, e <= tol.identity_rel);
        let z2 = spectral::szego_remainder(&op, &spec, &Functional::Power(2))?;
        let e = rel(-z2.remainder, v);
        record("z_squared_remainder", e, tol.identity_rel, e <= tol.identity_rel);
        let margin = s - 4.0 * v;
        record(
            "entropy_variance_lower",
            margin,
            scaling::ENTROPY_VARIANCE_ROUNDING,
            margin >= -scaling::ENTROPY_VARIANCE_ROUNDING * s.max(1.0),
        );
        if case.region.mode() == Mode::Nystrom {
            let integral = hs_cross_norm_integral(&case.region, &case.symbol, case.lambda)?;
            let e = rel(direct, integral);
            record("cross_norm_direct_vs_integral", e, tol.cross_norm_rel, e <= tol.cross_norm_rel);
        }
    }
    let failed = checks.iter().filter(|c| c["pass"] == json!(false)).count();
    let summary = json!({
        "subcommand": "verify",
        "config": cfg,
        "suite": cfg.verify.suite,
        "checks": checks,
        "skipped": skipped,
        "failed": failed,
        "pass": failed == 0,
    });
    write_json(out, "verify.json", &summary)?;
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} verification checks failed; see verify.json")));
    }
    Ok(summary)
}
