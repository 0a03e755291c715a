//! Configuration files of the three commands.
//!
//! All configs are JSON objects; unknown fields are rejected so that typos surface as
//! errors instead of silently falling back to defaults.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

pub type MatrixRows = Vec<Vec<f64>>;

/// Parses `text`, reporting the field path and position of the first problem.
pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let full = inner.to_string();
        let msg = full.strip_suffix(&format!(" at line {line} column {column}")).unwrap_or(&full);
        CliError::Config(format!("{origin}: line {line}, column {column}: field `{path}`: {msg}"))
    })
}

fn default_samples() -> usize {
    256
}

fn default_match_tolerance() -> f64 {
    1e-4
}

fn default_modes() -> usize {
    8
}

fn default_unit_tol() -> f64 {
    1e-3
}

fn default_fd_step() -> f64 {
    1e-6
}

fn default_epsilon() -> f64 {
    1e-10
}

fn one() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.3
}

fn default_a0() -> f64 {
    8.0
}

fn default_b() -> f64 {
    -101.0
}

fn default_theta() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub system: SystemSpec,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_match_tolerance")]
    pub match_tolerance: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `z' = (alpha + beta cos(2 pi s / period)) z`.
    ScalarCosine {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
        #[serde(default = "one")]
        period: f64,
    },
    /// `z'(t) = -(pi/2) z(t - 1)` with period 1.
    #[serde(rename = "delay_pi_over_2")]
    DelayPiOver2 {},
    /// `z' = (a0 + a1 cos 2 pi s) z + b int exp(-(s - t)/theta) z(t) dt` with period 1.
    ExpKernel {
        #[serde(default = "default_a0")]
        a0: f64,
        #[serde(default = "one")]
        a1: f64,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// `z'' + (delta + epsilon cos s) z = 0` as a first-order system with period `2 pi`.
    Mathieu { delta: f64, epsilon: f64 },
    Custom {
        dimension: usize,
        period: f64,
        #[serde(default)]
        memory_depth: Option<f64>,
        coefficient: MatrixSpec,
        #[serde(default)]
        delay_taps: Vec<TapSpec>,
        #[serde(default)]
        kernel: Option<KernelSpec>,
    },
}

/// A periodic matrix function of `s`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Constant(MatrixRows),
    /// Samples at `j * period / len`, interpolated periodically.
    Table(Vec<MatrixRows>),
    /// `mean + sum_k cos[k-1] cos(2 pi k s / T) + sin[k-1] sin(2 pi k s / T)`.
    Fourier {
        mean: MatrixRows,
        #[serde(default)]
        cos: Vec<MatrixRows>,
        #[serde(default)]
        sin: Vec<MatrixRows>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapSpec {
    pub delay: f64,
    pub coefficient: MatrixSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `K(s, t) = matrix * exp(-(s - t) / decay_time)`, truncated where the tail drops below `epsilon`.
    Exponential {
        matrix: MatrixRows,
        decay_time: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub system: FieldSpec,
    /// CSV with columns `t, y1, ..., yn`, relative to the config file. Without it the
    /// builtin's own cycle is used.
    #[serde(default)]
    pub cycle_file: Option<PathBuf>,
    /// Intervals of the builtin cycle.
    #[serde(default = "default_samples")]
    pub cycle_samples: usize,
    /// Samples per period of the variational system; defaults to the cycle intervals.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Defaults to the builtin's own setting.
    #[serde(default)]
    pub autonomous: Option<bool>,
    #[serde(default = "default_unit_tol")]
    pub unit_tol: f64,
    #[serde(default = "default_match_tolerance")]
    pub match_tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `y1' = y2, y2' = mu (1 - y1^2) y2 - y1`.
    VanDerPol {
        #[serde(default = "one")]
        mu: f64,
    },
    /// `y' = A(t) y` with a damped rotation `A`, period 1 and the cycle `y = 0`.
    LinearStable {},
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    pub potential: PotentialSpec,
    pub energies: EnergyRange,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_unit_tol")]
    pub unit_tol: f64,
    /// Bisection tolerance for band edges; edges are skipped when absent.
    #[serde(default)]
    pub edge_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Free {
        #[serde(default = "one")]
        lattice: f64,
    },
    /// Delta comb with `cos(ka) = cos(qa) + P sin(qa)/(qa)`.
    KronigPenney {
        strength: f64,
        #[serde(default = "one")]
        lattice: f64,
    },
    /// `W(x, x') = gamma w(x) w(x')` for `|x - x'| <= range`, `w = 1 + modulation cos(2 pi x / a)`.
    SeparableNonlocal {
        #[serde(default = "one")]
        lattice: f64,
        gamma: f64,
        range: f64,
        #[serde(default)]
        modulation: f64,
    },
    /// Local potential sampled at `j * lattice / len`, with an optional delta comb and separable kernel.
    Table {
        #[serde(default = "one")]
        lattice: f64,
        values: Vec<f64>,
        #[serde(default)]
        delta_strength: f64,
        #[serde(default)]
        separable: Option<SeparableSpec>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableSpec {
    pub gamma: f64,
    pub range: f64,
    #[serde(default)]
    pub modulation: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_defaults_fill_in() {
        let c: AnalyzeConfig = parse(r#"{"system": {"kind": "scalar_cosine"}}"#, "t").unwrap();
        assert_eq!(c.samples, 256);
        match c.system {
            SystemSpec::ScalarCosine { alpha, beta, period } => assert_eq!((alpha, beta, period), (0.3, 1.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected_with_path() {
        let err =
            parse::<AnalyzeConfig>("{\"system\": {\"kind\": \"scalar_cosine\",\n \"alpa\": 1}}", "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpa") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn custom_system_parses() {
        let text = r#"{"system": {"kind": "custom", "dimension": 1, "period": 1,
            "coefficient": {"fourier": {"mean": [[0.3]], "cos": [[[1.0]]]}},
            "delay_taps": [{"delay": 0.5, "coefficient": {"constant": [[-1]]}}],
            "kernel": {"exponential": {"matrix": [[0.5]], "decay_time": 0.2}}}}"#;
        let c: AnalyzeConfig = parse(text, "t").unwrap();
        assert!(matches!(c.system, SystemSpec::Custom { dimension: 1, .. }));
    }

    #[test]
    fn wrong_type_names_the_field() {
        let err = parse::<BandsConfig>(
            r#"{"potential": {"kind": "free"}, "energies": {"min": "low", "max": 2, "count": 3}}"#,
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("energies.min"), "{err}");
    }
}
