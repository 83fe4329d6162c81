//! JSON experiment configuration. Every field is optional; missing fields
//! take the default experiment (17-tap sparse plant, AR(1) input with unit
//! power, mu = 0.01, lambda = 0.01, 500 runs).

use std::path::Path;

use serde::{Deserialize, Serialize};
use zalms::filter::AlgoParams;
use zalms::harness::JointRequest;
use zalms::signals::{Innovation, InputModel, PlantSpec, RegressorLayout};
use zalms::theory::ModelKind;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantConfig,
    pub input: InputConfig,
    pub algo: AlgoConfig,
    pub run: RunConfig,
    pub models: Vec<ModelChoice>,
    pub joint_dumps: Vec<JointDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub w_star: Vec<f64>,
    pub noise_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub ar_coeff: f64,
    pub innovation_var: f64,
    pub innovation: InnovationChoice,
    pub layout: LayoutChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationChoice {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutChoice {
    TapDelay,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoConfig {
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iters: usize,
    pub runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Exact,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDump {
    pub i: usize,
    pub j: usize,
    pub at_iter: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    5000
}

pub fn default_w_star() -> Vec<f64> {
    let mut w = vec![0.8, 0.5, 0.3, 0.1, 0.05];
    w.extend([0.0; 7]);
    w.extend([-0.05, -0.1, -0.3, -0.5, -0.8]);
    w
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            plant: PlantConfig::default(),
            input: InputConfig::default(),
            algo: AlgoConfig::default(),
            run: RunConfig::default(),
            models: vec![ModelChoice::Exact, ModelChoice::Baseline],
            joint_dumps: vec![JointDump {
                i: 2,
                j: 7,
                at_iter: 800,
                samples: default_samples(),
            }],
        }
    }
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            w_star: default_w_star(),
            noise_var: 0.01,
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            ar_coeff: 0.6,
            innovation_var: 0.64,
            innovation: InnovationChoice::Gaussian,
            layout: LayoutChoice::TapDelay,
        }
    }
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            mu: 0.01,
            lambda: 0.01,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iters: 2000,
            runs: 500,
            master_seed: 1,
        }
    }
}

impl ModelChoice {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelChoice::Exact => ModelKind::Exact,
            ModelChoice::Baseline => ModelKind::Baseline,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let len = self.plant.w_star.len();
        if len == 0 {
            return Err(invalid("plant.w_star", "must have at least one tap"));
        }
        if let Some(k) = self.plant.w_star.iter().position(|w| !w.is_finite()) {
            return Err(invalid(&format!("plant.w_star[{k}]"), "must be finite"));
        }
        if !(self.plant.noise_var >= 0.0 && self.plant.noise_var.is_finite()) {
            return Err(invalid("plant.noise_var", "must be a finite value >= 0"));
        }
        if self.input.ar_coeff.is_nan() || self.input.ar_coeff.abs() >= 1.0 {
            return Err(invalid(
                "input.ar_coeff",
                format!(
                    "{} gives a nonstationary input; need |a| < 1",
                    self.input.ar_coeff
                ),
            ));
        }
        if !(self.input.innovation_var > 0.0 && self.input.innovation_var.is_finite()) {
            return Err(invalid("input.innovation_var", "must be positive"));
        }
        if !(self.algo.mu > 0.0 && self.algo.mu.is_finite()) {
            return Err(invalid("algo.mu", "must be positive"));
        }
        if !(self.algo.lambda >= 0.0 && self.algo.lambda.is_finite()) {
            return Err(invalid("algo.lambda", "must be >= 0"));
        }
        if self.run.iters == 0 {
            return Err(invalid("run.iters", "must be at least 1"));
        }
        if self.run.runs == 0 {
            return Err(invalid("run.runs", "must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(invalid("models", "select at least one of exact, baseline"));
        }
        for (k, m) in self.models.iter().enumerate() {
            if self.models[..k].contains(m) {
                return Err(invalid(&format!("models[{k}]"), "listed twice"));
            }
        }
        for (k, d) in self.joint_dumps.iter().enumerate() {
            for (name, idx) in [("i", d.i), ("j", d.j)] {
                if idx >= len {
                    return Err(invalid(
                        &format!("joint_dumps[{k}].{name}"),
                        format!("index {idx} out of range for {len} taps"),
                    ));
                }
            }
            if d.samples == 0 {
                return Err(invalid(
                    &format!("joint_dumps[{k}].samples"),
                    "must be at least 1",
                ));
            }
        }
        Ok(())
    }

    pub fn plant(&self) -> Result<PlantSpec, CliError> {
        PlantSpec::new(self.plant.w_star.clone(), self.plant.noise_var)
            .map_err(|e| invalid("plant", e.to_string()))
    }

    pub fn input_model(&self) -> Result<InputModel, CliError> {
        let mut m = InputModel::gaussian(self.input.ar_coeff, self.input.innovation_var)
            .map_err(|e| invalid("input", e.to_string()))?;
        m.innovation = match self.input.innovation {
            InnovationChoice::Gaussian => Innovation::Gaussian,
            InnovationChoice::Uniform => Innovation::Uniform,
        };
        m.layout = match self.input.layout {
            LayoutChoice::TapDelay => RegressorLayout::TapDelay,
            LayoutChoice::Independent => RegressorLayout::Independent,
        };
        Ok(m)
    }

    pub fn algo_params(&self) -> Result<AlgoParams, CliError> {
        AlgoParams::new(self.algo.mu, self.algo.lambda).map_err(|e| invalid("algo", e.to_string()))
    }

    pub fn joint_requests(&self) -> Vec<JointRequest> {
        self.joint_dumps
            .iter()
            .map(|d| JointRequest {
                i: d.i,
                j: d.j,
                at_iter: d.at_iter,
            })
            .collect()
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ExperimentConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.plant.w_star.len(), 17);
        assert_eq!((cfg.algo.mu, cfg.algo.lambda), (0.01, 0.01));
        assert_eq!((cfg.input.ar_coeff, cfg.input.innovation_var), (0.6, 0.64));
        assert_eq!((cfg.plant.noise_var, cfg.run.runs), (0.01, 500));
    }

    #[test]
    fn single_field_override() {
        let cfg = ExperimentConfig::from_json(r#"{"algo":{"lambda":0.001}}"#).unwrap();
        let mut expect = ExperimentConfig::default();
        expect.algo.lambda = 0.001;
        assert_eq!(cfg, expect);
    }

    #[test]
    fn nonstationary_input_rejected() {
        let err = ExperimentConfig::from_json(r#"{"input":{"ar_coeff":1.2}}"#).unwrap_err();
        assert!(err.to_string().contains("input.ar_coeff"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ExperimentConfig::from_json(r#"{"algo":{"mu":0.01,"gamma":1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("algo") && msg.contains("gamma"), "{msg}");
        assert!(ExperimentConfig::from_json(r#"{"extra":1}"#).is_err());
    }

    #[test]
    fn bad_joint_index() {
        let err = ExperimentConfig::from_json(r#"{"joint_dumps":[{"i":0,"j":17,"at_iter":5}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("joint_dumps[0].j"), "{err}");
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
