//! Experiment configuration.
//!
//! Configs are strict JSON: unknown keys anywhere are rejected and every
//! omitted key takes the default documented on its field. A minimal config
//! is `{}`; the `map` and `noise` sections are shared, and each experiment
//! reads only its own section.
//!
//! ```json
//! {
//!   "map": {"base": [2, 1, 1, 1], "center": [0.0, 0.0], "radius": 0.12, "strength": 0.2},
//!   "noise": {"epsilon": 0.01, "seed": 7, "streams": 100},
//!   "rnue": {"n_steps": 10000}
//! }
//! ```

use std::fmt;
use std::str::FromStr;

use nuh_core::DAParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The named pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyMap,
    PlissDemo,
    HypTimes,
    Rnue,
    Frequency,
    Ulam,
    Stability,
    Basins,
    Contraction,
    Distortion,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::VerifyMap,
        Experiment::PlissDemo,
        Experiment::HypTimes,
        Experiment::Rnue,
        Experiment::Frequency,
        Experiment::Ulam,
        Experiment::Stability,
        Experiment::Basins,
        Experiment::Contraction,
        Experiment::Distortion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyMap => "verify-map",
            Experiment::PlissDemo => "pliss-demo",
            Experiment::HypTimes => "hyp-times",
            Experiment::Rnue => "rnue",
            Experiment::Frequency => "frequency",
            Experiment::Ulam => "ulam",
            Experiment::Stability => "stability",
            Experiment::Basins => "basins",
            Experiment::Contraction => "contraction",
            Experiment::Distortion => "distortion",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Noise radius ε. Default 0.01.
    pub epsilon: f64,
    /// Master seed; stream `i` drives orbit `i`. Default 0.
    pub seed: u64,
    /// Number of independent streams (orbits) in ensembles. Default 100.
    pub streams: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { epsilon: 0.01, seed: 0, streams: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyMapSettings {
    /// Cone width `a`. Default 0.2.
    pub cone_width: f64,
    /// Grid resolution. Default 256.
    pub grid_n: usize,
    /// Domination target λ. Default 0.5.
    pub lambda_target: f64,
    /// Random (point, noise) samples for the cone-invariance scan at
    /// `noise.epsilon`. Default 100000.
    pub cone_samples: usize,
}

impl Default for VerifyMapSettings {
    fn default() -> Self {
        VerifyMapSettings { cone_width: 0.2, grid_n: 256, lambda_target: 0.5, cone_samples: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlissDemoSettings {
    /// The sequence `a_1, …, a_N`. Default `[2, 2, -1, 2, 2]`.
    pub values: Vec<f64>,
    /// Default 0.5.
    pub c1: f64,
    /// Default 1.0.
    pub c2: f64,
    /// Upper bound on the values. Default 2.0.
    #[serde(rename = "H")]
    pub h: f64,
}

impl Default for PlissDemoSettings {
    fn default() -> Self {
        PlissDemoSettings { values: vec![2.0, 2.0, -1.0, 2.0, 2.0], c1: 0.5, c2: 1.0, h: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypTimesSettings {
    /// Counted steps per orbit. Default 10000.
    pub n_steps: usize,
    /// Fixed α; `null` picks `exp(−c/4)` from each orbit's mean expansion.
    pub alpha: Option<f64>,
}

impl Default for HypTimesSettings {
    fn default() -> Self {
        HypTimesSettings { n_steps: 10_000, alpha: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RnueSettings {
    /// Orbit length. Default 10000.
    pub n_steps: usize,
    /// Required upper bound on the 5th percentile of the averages. Default −0.05.
    pub p05_bound: f64,
}

impl Default for RnueSettings {
    fn default() -> Self {
        RnueSettings { n_steps: 10_000, p05_bound: -0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencySettings {
    /// Radius of the bad region around the map center; `null` uses `map.radius`.
    pub radius: Option<f64>,
    /// Orbit lengths. Default `[100, 1000, 10000]`.
    pub ladder: Vec<usize>,
    /// Tolerance of the Lebesgue occupancy check on unperturbed maps. Default 0.01.
    pub lebesgue_tolerance: f64,
}

impl Default for FrequencySettings {
    fn default() -> Self {
        FrequencySettings { radius: None, ladder: vec![100, 1000, 10_000], lebesgue_tolerance: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UlamSettings {
    /// Grid size. Default 32.
    pub grid_n: usize,
    /// Default 256.
    pub samples_per_cell: usize,
    /// Power-iteration tolerance. Default 1e-12.
    pub tol: f64,
    /// Default 100000.
    pub max_iters: usize,
    /// Steps per orbit of the empirical comparison (`0` skips it). Default 10000.
    pub empirical_steps: usize,
    /// Default 1000.
    pub burn_in: usize,
    /// Bound on L1(Ulam, empirical). Default 0.1.
    pub agreement_bound: f64,
    /// Bound on L1(Ulam, uniform) when the map is unperturbed. Default 0.01.
    pub uniform_bound: f64,
    /// Also write the sparse matrix as triplets. Default false.
    pub write_matrix: bool,
}

impl Default for UlamSettings {
    fn default() -> Self {
        UlamSettings {
            grid_n: 32,
            samples_per_cell: 256,
            tol: 1e-12,
            max_iters: 100_000,
            empirical_steps: 10_000,
            burn_in: 1000,
            agreement_bound: 0.1,
            uniform_bound: 0.01,
            write_matrix: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySettings {
    /// Strictly descending noise ladder. Default `[0.1, 0.05, 0.02, 0.01]`.
    pub epsilons: Vec<f64>,
    /// Default 32.
    pub grid_n: usize,
    /// Counted steps per orbit at each ε. Default 100000.
    pub steps: usize,
    /// Default 1000.
    pub burn_in: usize,
    /// Starts of the ε = 0 reference. Default 200.
    pub reference_orbits: usize,
    /// Counted steps per reference orbit. Default 100000.
    pub reference_steps: usize,
    /// Allowed increase between consecutive levels. Default 0.02.
    pub band: f64,
    /// Flatness bound on unperturbed maps. Default 0.05.
    pub flat_bound: f64,
    /// Also solve the Ulam route with this many samples per cell.
    pub ulam_samples: Option<usize>,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        StabilitySettings {
            epsilons: vec![0.1, 0.05, 0.02, 0.01],
            grid_n: 32,
            steps: 100_000,
            burn_in: 1000,
            reference_orbits: 200,
            reference_steps: 100_000,
            band: 0.02,
            flat_bound: 0.05,
            ulam_samples: None,
        }
    }
}

/// System whose basins are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasinSystem {
    /// The configured torus map.
    Map,
    /// Synthetic map with two attracting fixed points.
    TwoAttractor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasinSettings {
    /// Default `map`.
    pub system: BasinSystem,
    /// Steps per orbit. Default 20000.
    pub n_steps: usize,
    /// Fourier frequencies per coordinate. Default 2.
    pub modes: u32,
    /// Single-linkage threshold (max norm). Default 0.1.
    pub threshold: f64,
    /// If set, the cluster count must equal it.
    pub expected: Option<usize>,
}

impl Default for BasinSettings {
    fn default() -> Self {
        BasinSettings { system: BasinSystem::Map, n_steps: 20_000, modes: 2, threshold: 0.1, expected: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionSettings {
    /// Counted steps per orbit. Default 1000.
    pub n_steps: usize,
    /// Orbits, overriding `noise.streams`. Default 20.
    pub orbits: usize,
    /// Check every `stride`-th hyperbolic time. Default 10.
    pub stride: usize,
    /// Fixed α; `null` picks it per orbit.
    pub alpha: Option<f64>,
    /// Cone width. Default 0.2.
    pub cone_width: f64,
    /// Vertices on each side of the initial segment. Default 100.
    pub half_count: usize,
    /// Default 0.05.
    pub delta1: f64,
    /// Discretization allowance on `α^{k/2}`. Default 0.05.
    pub tolerance: f64,
    /// Minimum number of checked hyperbolic times. Default 100.
    pub min_times: usize,
}

impl Default for ContractionSettings {
    fn default() -> Self {
        ContractionSettings {
            n_steps: 1000,
            orbits: 20,
            stride: 10,
            alpha: None,
            cone_width: 0.2,
            half_count: 100,
            delta1: 0.05,
            tolerance: 0.05,
            min_times: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionSettings {
    /// Calibration orbits. Default 4000.
    pub calibration_orbits: usize,
    /// Calibration uses each orbit's first hyperbolic time at or after this. Default 50.
    pub calibration_time: usize,
    /// Counted steps of the test orbits. Default 10000.
    pub n_steps: usize,
    /// Test orbits, overriding `noise.streams`. Default 20.
    pub orbits: usize,
    /// Minimum gap between sampled hyperbolic times. Default 100.
    pub stride: usize,
    /// Allowed growth over the calibrated value. Default 1.1.
    pub growth_factor: f64,
    /// Arclength bins of the push-forward density check. Default 16.
    pub grid_1d: usize,
    /// Cone width. Default 0.2.
    pub cone_width: f64,
    /// Default 100.
    pub half_count: usize,
    /// Default 0.05.
    pub delta1: f64,
}

impl Default for DistortionSettings {
    fn default() -> Self {
        DistortionSettings {
            calibration_orbits: 4000,
            calibration_time: 50,
            n_steps: 10_000,
            orbits: 20,
            stride: 100,
            growth_factor: 1.1,
            grid_1d: 16,
            cone_width: 0.2,
            half_count: 100,
            delta1: 0.05,
        }
    }
}

/// A complete experiment configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Optional; must agree with the command line when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub map: DAParams,
    pub noise: NoiseConfig,
    pub verify_map: VerifyMapSettings,
    pub pliss_demo: PlissDemoSettings,
    pub hyp_times: HypTimesSettings,
    pub rnue: RnueSettings,
    pub frequency: FrequencySettings,
    pub ulam: UlamSettings,
    pub stability: StabilitySettings,
    pub basins: BasinSettings,
    pub contraction: ContractionSettings,
    pub distortion: DistortionSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// The effective config of one experiment: shared sections plus its own.
    pub fn effective(&self, experiment: Experiment) -> serde_json::Value {
        let section = match experiment {
            Experiment::VerifyMap => serde_json::to_value(&self.verify_map),
            Experiment::PlissDemo => serde_json::to_value(&self.pliss_demo),
            Experiment::HypTimes => serde_json::to_value(&self.hyp_times),
            Experiment::Rnue => serde_json::to_value(&self.rnue),
            Experiment::Frequency => serde_json::to_value(&self.frequency),
            Experiment::Ulam => serde_json::to_value(&self.ulam),
            Experiment::Stability => serde_json::to_value(&self.stability),
            Experiment::Basins => serde_json::to_value(&self.basins),
            Experiment::Contraction => serde_json::to_value(&self.contraction),
            Experiment::Distortion => serde_json::to_value(&self.distortion),
        }
        .expect("settings serialize");
        let key = experiment.name().replace('-', "_");
        serde_json::json!({
            "experiment": experiment.name(),
            "map": self.map,
            "noise": self.noise,
            key: section,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.map, DAParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"mapp": {}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"noise": {"eps": 0.1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"rnue": {"n": 10}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "walk"}"#).is_err());
    }

    #[test]
    fn pliss_h_key() {
        let c = ExperimentConfig::from_json(r#"{"pliss_demo": {"values": [1.0], "H": 3.0}}"#).unwrap();
        assert_eq!(c.pliss_demo.h, 3.0);
        assert_eq!(c.pliss_demo.c1, 0.5);
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(serde_json::to_value(e).unwrap(), e.name());
        }
    }

    #[test]
    fn effective_config_echoes_defaults() {
        let v = ExperimentConfig::default().effective(Experiment::Ulam);
        assert_eq!(v["ulam"]["samples_per_cell"], 256);
        assert_eq!(v["noise"]["streams"], 100);
        assert_eq!(v["map"]["strength"], 0.2);
        assert!(v.get("rnue").is_none());
    }
}
