//! Run configuration: scenarios and the knobs shared across them.

use std::collections::BTreeMap;
use std::path::Path;

use gridseg::ccg::CcgLimits;
use gridseg::{AdversaryParams, GridCase};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Multiplier on every bus's base load.
    pub load_scale: f64,
    /// Capacity factor per generator class; unlisted classes keep their value.
    pub availability: BTreeMap<String, f64>,
    pub adversary: AdversaryParams,
    /// Allowed worst-case overloads.
    pub k: u32,
    /// Multiplier on branch ratings (PATL and thresholds).
    pub rating_scale: f64,
    /// When set, the overload threshold becomes this multiple of the scaled PATL.
    pub overload_margin: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "base".into(),
            load_scale: 1.0,
            availability: BTreeMap::new(),
            adversary: AdversaryParams::default(),
            k: 1,
            rating_scale: 1.0,
            overload_margin: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::parse(format!("scenario '{}': {m}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and free of path separators".into());
        }
        if !(self.load_scale > 0.0) || !(self.rating_scale > 0.0) {
            return bad("load_scale and rating_scale must be positive".into());
        }
        if self.overload_margin.is_some_and(|m| !(m > 0.0)) {
            return bad("overload_margin must be positive".into());
        }
        if let Some((class, v)) = self.availability.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return bad(format!("availability for '{class}' is {v}, expected [0, 1]"));
        }
        self.adversary
            .validate()
            .map_err(|e| CliError::parse(format!("scenario '{}': {e}", self.name)))
    }

    /// The grid as seen by this scenario.
    pub fn apply(&self, grid: &GridCase) -> gridseg::Result<GridCase> {
        grid.map_elements(
            |b| b.base_load *= self.load_scale,
            |br| {
                br.rating_patl *= self.rating_scale;
                br.overload_threshold = match self.overload_margin {
                    Some(m) => br.rating_patl * m,
                    None => br.overload_threshold * self.rating_scale,
                };
            },
            |g| {
                if let Some(v) = g.class.as_ref().and_then(|c| self.availability.get(c)) {
                    g.availability = *v;
                }
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Denominator D of the assignment grid.
    pub discretization: u32,
    /// Keep only the N largest operators hackable.
    pub top_n: Option<usize>,
    pub limits: CcgLimits,
    pub scenarios: Vec<ScenarioConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            discretization: 2,
            top_n: None,
            limits: CcgLimits::default(),
            scenarios: vec![ScenarioConfig::default()],
        }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::parse(format!("config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| CliError::parse(format!("config: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.discretization == 0 {
            return Err(CliError::parse("config: discretization must be at least 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(CliError::parse("config: at least one scenario is required".into()));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !names.insert(&s.name) {
                return Err(CliError::parse(format!("config: duplicate scenario '{}'", s.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            discretization = 3
            [[scenarios]]
            name = "stress"
            rating_scale = 0.65
            k = 1
            [scenarios.adversary]
            hack_budget = 3
        "#;
        let json_text = r#"{"discretization": 3, "scenarios": [{"name": "stress", "rating_scale": 0.65, "k": 1, "adversary": {"hack_budget": 3}}]}"#;
        let a = RunConfig::parse(toml_text).unwrap();
        let b = RunConfig::parse(json_text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.scenarios[0].adversary.hack_budget, 3);
        assert_eq!(a.scenarios[0].adversary.epsilon, 1e-3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("discretization = 0").is_err());
        assert!(RunConfig::parse("[[scenarios]]\nname = \"a\"\nload_scale = -1").is_err());
        assert!(RunConfig::parse("[[scenarios]]\nname = \"a\"\n[[scenarios]]\nname = \"a\"").is_err());
        assert!(RunConfig::parse("bogus = 1").is_err());
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }
}
