//! Experiment configuration files (TOML, or JSON by extension).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ordinal_core::adversarial::PolicySpec;
use ordinal_core::populations::PopulationModel;
use serde::Deserialize;

use crate::error::{core_at, CliError};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Population models by name.
    pub models: BTreeMap<String, PopulationModel>,
    pub policy: PolicySpec,
    pub run: RunBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    /// Model names, in arm order.
    pub truth: Vec<String>,
    pub delta: f64,
    pub replications: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub policy: PolicySpec,
    pub truth: Vec<PopulationModel>,
    pub delta: f64,
    pub replications: u64,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self, CliError> {
        let value: serde_json::Value = if json {
            serde_json::from_str(text).map_err(|e| CliError::validation(None, format!("malformed JSON: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| CliError::validation(None, format!("malformed TOML: {e}")))?
        };
        serde_path_to_error::deserialize(value).map_err(|e| CliError::from_path_error("", e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Other(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json)
    }

    /// Resolves model names and runs every module-level validation.
    pub fn resolve(self) -> Result<Experiment, CliError> {
        for (name, model) in &self.models {
            model.validate().map_err(|e| core_at(&format!("models.{name}"), e))?;
        }
        let truth = self
            .run
            .truth
            .iter()
            .enumerate()
            .map(|(i, name)| {
                self.models.get(name).cloned().ok_or_else(|| {
                    CliError::validation(Some(format!("run.truth.{i}")), format!("no model named `{name}`"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let exp = Experiment {
            policy: self.policy,
            truth,
            delta: self.run.delta,
            replications: self.run.replications,
            seed: self.run.seed,
            out: self.run.out,
        };
        exp.validate("run.")?;
        Ok(exp)
    }
}

impl Experiment {
    /// `run_prefix` locates delta, replications and truth in error paths.
    pub fn validate(&self, run_prefix: &str) -> Result<(), CliError> {
        if self.truth.is_empty() {
            return Err(CliError::validation(Some(format!("{run_prefix}truth")), "needs at least one model".into()));
        }
        if self.replications == 0 {
            return Err(CliError::validation(
                Some(format!("{run_prefix}replications")),
                "must be at least 1".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::validation(
                Some(format!("{run_prefix}delta")),
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        self.policy.validate(self.truth.len(), self.delta).map_err(|e| match e {
            ordinal_core::Error::ParameterDomain { ref field, .. } if field == "truth" => {
                core_at(run_prefix.trim_end_matches('.'), e)
            }
            e => core_at("policy", e),
        })?;
        let means: Vec<f64> = self.truth.iter().map(|m| m.mean()).collect();
        use ordinal_core::adversarial::Policy;
        ordinal_core::selectors::best_index(&means, self.policy.objective())
            .map_err(|e| CliError::validation(Some(format!("{run_prefix}truth")), e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOEFFDING: &str = r#"
[models.low]
variant = "bernoulli"
q = 0.3

[models.high]
variant = "bernoulli"
q = 0.5

[policy]
policy = "hoeffding"
epsilon = 0.2
b = 1.0

[run]
truth = ["low", "high", "high"]
delta = 0.1
replications = 10
"#;

    fn field_of(r: Result<Experiment, CliError>) -> String {
        let e = r.expect_err("expected a validation error");
        assert_eq!(e.exit_code(), crate::error::EXIT_VALIDATION);
        e.report()["field"].as_str().unwrap_or_default().to_string()
    }

    #[test]
    fn parses_and_resolves() {
        let exp = ExperimentConfig::parse(HOEFFDING, false).unwrap().resolve().unwrap();
        assert_eq!(exp.truth.len(), 3);
        assert_eq!(exp.policy.name(), "hoeffding");
    }

    #[test]
    fn json_is_accepted() {
        let cfg = ExperimentConfig::parse(HOEFFDING, false).unwrap();
        let json = serde_json::json!({
            "models": {"a": {"variant": "bernoulli", "q": 0.3}, "b": {"variant": "bernoulli", "q": 0.6}},
            "policy": {"policy": "hoeffding", "epsilon": 0.2, "b": 1.0},
            "run": {"truth": ["a", "b"], "delta": 0.1, "replications": 5, "seed": 3}
        });
        let parsed = ExperimentConfig::parse(&json.to_string(), true).unwrap();
        assert_eq!(parsed.run.seed, Some(3));
        assert_eq!(cfg.run.seed, None);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = HOEFFDING.replace("replications = 10", "replications = 0");
        assert_eq!(field_of(ExperimentConfig::parse(&bad, false).unwrap().resolve()), "run.replications");
        let bad = HOEFFDING.replace("q = 0.3", "q = 1.3");
        assert_eq!(field_of(ExperimentConfig::parse(&bad, false).unwrap().resolve()), "models.low.q");
        let bad = HOEFFDING.replace("\"low\", \"high\"", "\"low\", \"mid\"");
        assert_eq!(field_of(ExperimentConfig::parse(&bad, false).unwrap().resolve()), "run.truth.1");
        let bad = HOEFFDING.replace("epsilon = 0.2", "epsilon = -0.2");
        assert_eq!(field_of(ExperimentConfig::parse(&bad, false).unwrap().resolve()), "policy.epsilon");
        let bad = HOEFFDING.replace("delta = 0.1", "delta = \"x\"");
        assert!(matches!(ExperimentConfig::parse(&bad, false), Err(CliError::Validation { .. })));
    }

    #[test]
    fn shipped_configs_resolve() {
        for text in [include_str!("../configs/hoeffding.toml"), include_str!("../configs/heavy-elimination.toml")] {
            ExperimentConfig::parse(text, false).unwrap().resolve().unwrap();
        }
    }
}
