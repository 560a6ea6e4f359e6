//! Experiment configuration: a flat key/value document with dotted paths.
//!
//! ```text
//! # lines are `key: value` or `key = value`
//! scenario: sphere_map_meridian
//! resolution: 200x400
//! a_schedule.a0: 100
//! a_schedule.factor: 2
//! a_schedule.steps: 12
//! R: 1
//! tolerance: 0.02
//! seed: 0
//! output_dir: out
//! ```

use serde::Serialize;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SphereGeodesicEquator,
    SphereGeodesicMeridian,
    SphereMapEquator,
    SphereMapMeridian,
    GaussianProduct,
    FiniteAtoms,
    TruncationInvariance,
    IsometryInvariance,
    RatioLimitBaseline,
    PositiveMeasureRecovery,
}

pub const ALL_SCENARIOS: [Scenario; 10] = [
    Scenario::SphereGeodesicEquator,
    Scenario::SphereGeodesicMeridian,
    Scenario::SphereMapEquator,
    Scenario::SphereMapMeridian,
    Scenario::GaussianProduct,
    Scenario::FiniteAtoms,
    Scenario::TruncationInvariance,
    Scenario::IsometryInvariance,
    Scenario::RatioLimitBaseline,
    Scenario::PositiveMeasureRecovery,
];

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SphereGeodesicEquator => "sphere_geodesic_equator",
            Scenario::SphereGeodesicMeridian => "sphere_geodesic_meridian",
            Scenario::SphereMapEquator => "sphere_map_equator",
            Scenario::SphereMapMeridian => "sphere_map_meridian",
            Scenario::GaussianProduct => "gaussian_product",
            Scenario::FiniteAtoms => "finite_atoms",
            Scenario::TruncationInvariance => "truncation_invariance",
            Scenario::IsometryInvariance => "isometry_invariance",
            Scenario::RatioLimitBaseline => "ratio_limit_baseline",
            Scenario::PositiveMeasureRecovery => "positive_measure_recovery",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::SphereGeodesicEquator => {
                "uniform sphere, geodesic metric, conditioning on the equator; limit density 1/(2pi) per radian"
            }
            Scenario::SphereGeodesicMeridian => {
                "uniform sphere, geodesic metric, conditioning on the pole-to-pole circle; limit density 1/(2pi)"
            }
            Scenario::SphereMapEquator => {
                "uniform sphere, flat map-projection metric, equator; limit density stays uniform 1/(2pi)"
            }
            Scenario::SphereMapMeridian => {
                "uniform sphere, flat map-projection metric, pole-to-pole circle; limit density cos(phi)/4 per branch"
            }
            Scenario::GaussianProduct => {
                "correlated 2-D Gaussian, conditioning on the row y = 0.5; recovers the density-ratio posterior (mean 0.4, variance 0.36)"
            }
            Scenario::FiniteAtoms => {
                "four-atom prior conditioned on two atoms through the dual solver; closed form (1/3, 2/3, 0, 0)"
            }
            Scenario::TruncationInvariance => {
                "map-metric meridian run at truncation radii 1 and 2; the limits must coincide"
            }
            Scenario::IsometryInvariance => {
                "geodesic equator pushed through a whole-cell rotation; exact permutation symmetry"
            }
            Scenario::RatioLimitBaseline => {
                "ratio-of-enlargements baseline on the map-metric meridian against the tilting limit"
            }
            Scenario::PositiveMeasureRecovery => {
                "hemisphere conditioning; the annealed limit must match classical conditional probability"
            }
        }
    }

    fn is_sphere(self) -> bool {
        !matches!(self, Scenario::GaussianProduct | Scenario::FiniteAtoms)
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        ALL_SCENARIOS
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let choices: Vec<&str> = ALL_SCENARIOS.iter().map(|s| s.name()).collect();
                ConfigError(format!(
                    "unknown scenario '{s}'; choices: {}",
                    choices.join(", ")
                ))
            })
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub resolution: Vec<usize>,
    pub a0: f64,
    pub factor: f64,
    /// Largest exponent of the schedule `a_k = a0 * factor^k`, k = 0..=steps.
    pub steps: u32,
    pub r: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub output_dir: String,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn schedule(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| self.a0 * self.factor.powi(k as i32))
            .collect()
    }
}

fn default_resolution(scenario: Scenario) -> Vec<usize> {
    match scenario {
        Scenario::GaussianProduct => vec![210, 210],
        Scenario::FiniteAtoms => vec![],
        _ => vec![200, 400],
    }
}

/// Parse a key/value document and apply `overrides` (same `key=value`
/// syntax) on top.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .or_else(|| line.split_once('='))
            .ok_or_else(|| {
                ConfigError(format!("line {}: expected 'key: value', got '{raw}'", lineno + 1))
            })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    for o in overrides {
        let (key, value) = o.split_once('=').or_else(|| o.split_once(':')).ok_or_else(|| {
            ConfigError(format!("override '{o}' must look like key=value"))
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }

    let mut scenario: Option<Scenario> = None;
    let mut resolution: Option<Vec<usize>> = None;
    let mut a0 = 100.0;
    let mut factor = 2.0;
    let mut steps = 12u32;
    let mut r = 1.0;
    let mut tolerance = 0.02;
    let mut seed = 0u64;
    let mut output_dir: Option<String> = None;
    let mut warnings = Vec::new();

    let parse_f64 = |key: &str, v: &str| -> Result<f64, ConfigError> {
        v.parse::<f64>()
            .map_err(|_| ConfigError(format!("{key}: expected a number, got '{v}'")))
    };
    for (key, value) in &entries {
        match key.as_str() {
            "scenario" => scenario = Some(value.parse()?),
            "resolution" => {
                let parts: Result<Vec<usize>, _> = value
                    .split(['x', 'X', ','])
                    .map(|p| p.trim().parse::<usize>())
                    .collect();
                resolution = Some(parts.map_err(|_| {
                    ConfigError(format!("resolution: expected axis counts like 200x400, got '{value}'"))
                })?);
            }
            "a_schedule.a0" => a0 = parse_f64(key, value)?,
            "a_schedule.factor" => factor = parse_f64(key, value)?,
            "a_schedule.steps" => {
                steps = value
                    .parse::<u32>()
                    .map_err(|_| ConfigError(format!("a_schedule.steps: expected an integer, got '{value}'")))?;
            }
            "R" | "r" => r = parse_f64(key, value)?,
            "tolerance" => tolerance = parse_f64(key, value)?,
            "seed" => {
                seed = value
                    .parse::<u64>()
                    .map_err(|_| ConfigError(format!("seed: expected an integer, got '{value}'")))?;
            }
            "output_dir" => output_dir = Some(value.clone()),
            other => return Err(ConfigError(format!("unknown key '{other}'"))),
        }
    }

    let scenario = scenario.ok_or_else(|| ConfigError("missing required key 'scenario'".into()))?;
    if factor <= 1.0 {
        return Err(ConfigError(format!("a_schedule.factor must exceed 1, got {factor}")));
    }
    if steps < 4 {
        return Err(ConfigError(format!("a_schedule.steps must be at least 4, got {steps}")));
    }
    if a0 <= 0.0 {
        return Err(ConfigError(format!("a_schedule.a0 must be positive, got {a0}")));
    }
    if r <= 0.0 {
        return Err(ConfigError(format!("R must be positive, got {r}")));
    }
    if tolerance <= 0.0 {
        return Err(ConfigError(format!("tolerance must be positive, got {tolerance}")));
    }

    let resolution = match (scenario, resolution) {
        (Scenario::FiniteAtoms, Some(_)) => {
            warnings.push("resolution is irrelevant for atom scenarios; ignored".into());
            vec![]
        }
        (Scenario::FiniteAtoms, None) => vec![],
        (sc, Some(res)) => {
            if res.len() != 2 {
                return Err(ConfigError(format!(
                    "resolution: scenario {} needs two axis counts",
                    sc.name()
                )));
            }
            if sc.is_sphere() && res.iter().any(|&n| n < 50) {
                return Err(ConfigError(
                    "resolution: sphere scenarios need at least 50 cells per axis \
                     (the boundary layer is unresolvable below that)"
                        .into(),
                ));
            }
            if sc == Scenario::GaussianProduct && res[1] % 12 != 6 {
                return Err(ConfigError(format!(
                    "resolution: the observed row y = 0.5 must be a grid row, \
                     which needs the y-axis count congruent to 6 mod 12 (got {})",
                    res[1]
                )));
            }
            res
        }
        (sc, None) => default_resolution(sc),
    };

    Ok(ExperimentConfig {
        scenario,
        resolution,
        a0,
        factor,
        steps,
        r,
        tolerance,
        seed,
        output_dir: output_dir.unwrap_or_else(|| "maxpost-out".into()),
        warnings,
    })
}
