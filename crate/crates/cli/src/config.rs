//! JSON experiment configuration. Unknown keys are rejected and every
//! value is validated before any computation starts.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use szego_core::kernels::{AssemblyOptions, NodeRule, StepSymbol, DEFAULT_MEMORY_BUDGET};
use szego_core::scaling::octave_grid;
use szego_core::setlib::{cantor_params_from_beta, CantorSet};
use szego_core::{AngularUnit, Functional, IntervalUnion, Mode, RegionSpec, SetFactor};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem, naming the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: impl AsRef<str>, reason: impl AsRef<str>) -> ConfigError {
    ConfigError(format!("invalid `{}`: {}", field.as_ref(), reason.as_ref()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub region: Option<RegionConfig>,
    #[serde(default)]
    pub symbol: Option<SymbolConfig>,
    #[serde(default)]
    pub lambda: Option<LambdaConfig>,
    #[serde(default)]
    pub functionals: Vec<Functional>,
    #[serde(default)]
    pub assembly: AssemblyConfig,
    /// Worker threads for sweeps; 0 lets the runtime decide.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub plots: PlotConfig,
    #[serde(default)]
    pub fractal: Option<FractalConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub mode: Mode,
    #[serde(default)]
    pub angular_unit: AngularUnit,
    /// One interval list per dimension.
    pub factors: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorConfig {
    pub beta: f64,
    #[serde(default)]
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorConfig {
    Intervals(Vec<[f64; 2]>),
    Cantor(CantorConfig),
    /// `[-π/2, π/2]` in the region's angular unit.
    HalfFilling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub factors: Vec<FactorConfig>,
    /// Value of the symbol on the product set (1 gives a projection).
    #[serde(default = "one")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default = "one_usize")]
    pub points_per_octave: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblyConfig {
    #[serde(default)]
    pub rule: NodeRule,
    /// Continuum nodes per unit length; automatic when absent.
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default = "one")]
    pub oversample: f64,
    #[serde(default = "default_budget")]
    pub memory_budget: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            rule: NodeRule::default(),
            resolution: None,
            oversample: 1.0,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Fixed exponent for the entropy fit; defaults to `d - 1`.
    #[serde(default)]
    pub entropy_exponent: Option<f64>,
    /// Fixed exponent for the variance fit; free when absent.
    #[serde(default)]
    pub variance_exponent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Compare against the one-dimensional sweep (cubes only).
    #[serde(default)]
    pub sandwich: bool,
    #[serde(default = "yes")]
    pub entropy_variance: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            sandwich: false,
            entropy_variance: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    #[serde(default)]
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalConfig {
    pub betas: Vec<f64>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default = "default_tail_window")]
    pub tail_window: [f64; 2],
    #[serde(default = "default_tail_points")]
    pub tail_points: usize,
    /// Largest accepted `c_upper / c_lower` of the modulus window.
    #[serde(default = "default_max_spread")]
    pub max_spread: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[default]
    Default,
    LatticeOnly,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub suite: Suite,
    /// Test hook: perturbs one matrix entry so the Hermiticity check fails.
    #[serde(default)]
    pub inject_asymmetry: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_identity")]
    pub identity_rel: f64,
    #[serde(default = "tol_weyl")]
    pub weyl_rel: f64,
    #[serde(default = "tol_cross")]
    pub cross_norm_rel: f64,
    #[serde(default = "tol_herm")]
    pub hermiticity_rel: f64,
    #[serde(default = "tol_identity")]
    pub residual_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity_rel: tol_identity(),
            weyl_rel: tol_weyl(),
            cross_norm_rel: tol_cross(),
            hermiticity_rel: tol_herm(),
            residual_rel: tol_identity(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_budget() -> usize {
    DEFAULT_MEMORY_BUDGET
}
fn default_tail_window() -> [f64; 2] {
    [10.0, 1e4]
}
fn default_tail_points() -> usize {
    25
}
fn default_max_spread() -> f64 {
    50.0
}
fn tol_identity() -> f64 {
    1e-10
}
fn tol_weyl() -> f64 {
    1e-12
}
fn tol_cross() -> f64 {
    0.02
}
fn tol_herm() -> f64 {
    1e-13
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(bad(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
            ));
        }
        cfg.validate_common()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn validate_common(&self) -> Result<(), ConfigError> {
        if let Some(l) = &self.lambda {
            l.grid()?;
        }
        if let Some(s) = &self.symbol {
            for (j, f) in s.factors.iter().enumerate() {
                if let FactorConfig::Cantor(c) = f {
                    check_beta(&format!("symbol.factors[{j}].cantor.beta"), c.beta)?;
                }
            }
            if !s.value.is_finite() {
                return Err(bad("symbol.value", "must be finite"));
            }
        }
        if let Some(fr) = &self.fractal {
            for (k, &b) in fr.betas.iter().enumerate() {
                check_beta(&format!("fractal.betas[{k}]"), b)?;
            }
            let [lo, hi] = fr.tail_window;
            if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
                return Err(bad("fractal.tail_window", format!("need 1 <= lo < hi, got [{lo}, {hi}]")));
            }
            if fr.tail_points < 4 {
                return Err(bad("fractal.tail_points", "need at least 4"));
            }
        }
        for (k, f) in self.functionals.iter().enumerate() {
            if let Functional::Table(points) = f {
                Functional::table(points.clone()).map_err(|e| bad(format!("functionals[{k}]"), e.to_string()))?;
            }
        }
        if !(self.assembly.oversample >= 1.0 && self.assembly.oversample.is_finite()) {
            return Err(bad("assembly.oversample", "must be >= 1"));
        }
        if self.assembly.memory_budget == 0 {
            return Err(bad("assembly.memory_budget", "must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.identity_rel", t.identity_rel),
            ("tolerances.weyl_rel", t.weyl_rel),
            ("tolerances.cross_norm_rel", t.cross_norm_rel),
            ("tolerances.hermiticity_rel", t.hermiticity_rel),
            ("tolerances.residual_rel", t.residual_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            rule: self.assembly.rule,
            resolution: self.assembly.resolution,
            oversample: self.assembly.oversample,
            memory_budget: self.assembly.memory_budget,
        }
    }

    pub fn region_spec(&self) -> Result<RegionSpec, ConfigError> {
        let r = self.region.as_ref().ok_or_else(|| bad("region", "required for this subcommand"))?;
        if r.factors.is_empty() {
            return Err(bad("region.factors", "needs at least one dimension"));
        }
        let factors = r
            .factors
            .iter()
            .enumerate()
            .map(|(j, f)| union_from(&format!("region.factors[{j}]"), f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RegionSpec::new(factors, r.mode)
            .map_err(|e| bad("region", e.to_string()))?
            .with_angular_unit(r.angular_unit))
    }

    pub fn step_symbol(&self) -> Result<StepSymbol, ConfigError> {
        let s = self.symbol.as_ref().ok_or_else(|| bad("symbol", "required for this subcommand"))?;
        let unit = self.region.as_ref().map_or(AngularUnit::Radians, |r| r.angular_unit);
        let factors = s
            .factors
            .iter()
            .enumerate()
            .map(|(j, f)| factor_from(j, f, unit))
            .collect::<Result<Vec<_>, _>>()?;
        let sym = StepSymbol::indicator(factors).map_err(|e| bad("symbol", e.to_string()))?;
        Ok(if s.value == 1.0 { sym } else { sym.scaled(s.value) })
    }

    pub fn lambdas(&self) -> Result<Vec<f64>, ConfigError> {
        self.lambda.as_ref().ok_or_else(|| bad("lambda", "required for this subcommand"))?.grid()
    }
}

fn check_beta(field: &str, beta: f64) -> Result<(), ConfigError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(bad(field, format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

fn union_from(field: &str, list: &[[f64; 2]]) -> Result<IntervalUnion, ConfigError> {
    IntervalUnion::new(list.iter().map(|[a, b]| (*a, *b))).map_err(|e| bad(field, e.to_string()))
}

pub fn cantor_from(field: &str, c: &CantorConfig) -> Result<CantorSet, ConfigError> {
    check_beta(&format!("{field}.beta"), c.beta)?;
    let mut params = cantor_params_from_beta(c.beta).map_err(|e| bad(field, e.to_string()))?;
    if let Some(d) = c.depth {
        params = params.with_depth(d);
    }
    CantorSet::new(params).map_err(|e| bad(format!("{field}.depth"), e.to_string()))
}

fn factor_from(j: usize, f: &FactorConfig, unit: AngularUnit) -> Result<SetFactor, ConfigError> {
    let field = format!("symbol.factors[{j}]");
    Ok(match f {
        FactorConfig::Intervals(list) => SetFactor::Intervals(union_from(&field, list)?),
        FactorConfig::Cantor(c) => SetFactor::Cantor(cantor_from(&format!("{field}.cantor"), c)?),
        FactorConfig::HalfFilling => {
            let h = 0.5 * PI / unit.to_radians();
            SetFactor::Intervals(IntervalUnion::interval(-h, h).map_err(|e| bad(field, e.to_string()))?)
        }
    })
}

impl LambdaConfig {
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = match (&self.values, self.min, self.max) {
            (Some(v), None, None) => v.clone(),
            (None, Some(lo), Some(hi)) => {
                if !(lo >= 2.0 && lo.is_finite()) {
                    return Err(bad("lambda.min", format!("must be >= 2, got {lo}")));
                }
                if !(hi >= lo && hi.is_finite()) {
                    return Err(bad("lambda.max", format!("must be >= lambda.min, got {hi}")));
                }
                if self.points_per_octave == 0 {
                    return Err(bad("lambda.points_per_octave", "must be positive"));
                }
                octave_grid(lo, hi, self.points_per_octave)
            }
            _ => return Err(bad("lambda", "give either `values` or both `min` and `max`")),
        };
        if grid.is_empty() {
            return Err(bad("lambda.values", "empty grid"));
        }
        if let Some(l) = grid.iter().find(|l| !(**l >= 2.0 && l.is_finite())) {
            return Err(bad("lambda", format!("every lambda must be >= 2, got {l}")));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("lambda.values", "must be strictly increasing"));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema_version": 1,
                "region": {"mode": "lattice", "factors": [[[0, 1]]]},
                "symbol": {"factors": ["half_filling"]},
                "lambda": {"min": 16, "max": 128}}"#,
        )
        .unwrap();
        assert_eq!(cfg.lambdas().unwrap(), vec![16.0, 32.0, 64.0, 128.0]);
        assert!(cfg.step_symbol().unwrap().is_projection());
        assert_eq!(cfg.region_spec().unwrap().mode(), Mode::Lattice);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let e = ExperimentConfig::from_json(r#"{"schema_version": 1, "lamda": {}}"#).unwrap_err();
        assert!(e.0.contains("lamda"), "{e}");
        let e = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "symbol": {"factors": [{"cantor": {"beta": 1.5}}]}}"#,
        )
        .unwrap_err();
        assert!(e.0.contains("symbol.factors[0].cantor.beta"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"schema_version": 1, "lambda": {"min": 1, "max": 8}}"#).unwrap_err();
        assert!(e.0.contains("lambda.min"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"schema_version": 2}"#).unwrap_err();
        assert!(e.0.contains("schema_version"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"schema_version": 1, "region": {"mode": "grid", "factors": []}}"#).unwrap_err();
        assert!(e.0.contains("grid"), "{e}");
    }

    #[test]
    fn functionals_parse() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "functionals": ["entropy_h", {"power": 2}, {"table": [[0, 0], [1, 1]]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.functionals[1], Functional::Power(2));
    }
}
