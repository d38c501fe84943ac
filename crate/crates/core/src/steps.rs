//! The five wizard steps and their didactic texts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_STEPS: &str = include_str!("../content/steps.csv");

pub const STEPS_HEADER: [&str; 5] = [
    "step_id",
    "ordinal",
    "title",
    "description",
    "required_fields",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    ProjectData,
    Optimization,
    Transformers,
    Estimators,
    Review,
}

impl StepId {
    pub const ALL: [StepId; 5] = [
        StepId::ProjectData,
        StepId::Optimization,
        StepId::Transformers,
        StepId::Estimators,
        StepId::Review,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepId::ProjectData => "project_data",
            StepId::Optimization => "optimization",
            StepId::Transformers => "transformers",
            StepId::Estimators => "estimators",
            StepId::Review => "review",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown step `{0}`")]
pub struct UnknownStep(pub String);

impl FromStr for StepId {
    type Err = UnknownStep;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StepId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| UnknownStep(s.to_string()))
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    #[default]
    Empty,
    Partial,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepDefinition {
    pub step_id: StepId,
    pub ordinal: u32,
    pub title: String,
    pub description: String,
    /// Project paths that must be set; `elements.estimator` means at least
    /// one estimator.
    pub required_fields: Vec<String>,
}

#[derive(Debug, Error)]
pub enum StepsError {
    #[error("{file} row {row}: {message}")]
    Invalid {
        file: String,
        row: u64,
        message: String,
    },
    #[error("{file}: steps table must define exactly the five steps in order")]
    Incomplete { file: String },
}

/// The ordered step table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Steps(Vec<StepDefinition>);

impl Steps {
    pub fn bundled() -> Self {
        Self::from_csv("steps.csv", BUNDLED_STEPS).expect("bundled steps table is valid")
    }

    pub fn from_csv(file: &str, text: &str) -> Result<Self, StepsError> {
        let invalid = |row: u64, message: String| StepsError::Invalid {
            file: file.to_string(),
            row,
            message,
        };
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| invalid(1, e.to_string()))?;
        if header.iter().map(str::trim).ne(STEPS_HEADER) {
            return Err(invalid(
                1,
                format!("header must be exactly `{}`", STEPS_HEADER.join(",")),
            ));
        }
        let mut defs = Vec::new();
        for rec in reader.records() {
            let rec =
                rec.map_err(|e| invalid(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let row = rec.position().map_or(0, |p| p.line());
            let step_id: StepId = rec[0]
                .trim()
                .parse()
                .map_err(|e: UnknownStep| invalid(row, e.to_string()))?;
            let ordinal = rec[1]
                .trim()
                .parse()
                .map_err(|_| invalid(row, format!("bad ordinal `{}`", &rec[1])))?;
            defs.push(StepDefinition {
                step_id,
                ordinal,
                title: rec[2].trim().to_string(),
                description: rec[3].trim().to_string(),
                required_fields: rec[4]
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            });
        }
        defs.sort_by_key(|d| d.ordinal);
        if defs.iter().map(|d| d.step_id).ne(StepId::ALL) {
            return Err(StepsError::Incomplete {
                file: file.to_string(),
            });
        }
        Ok(Steps(defs))
    }

    pub fn get(&self, id: StepId) -> &StepDefinition {
        &self.0[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &StepDefinition> {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_steps_are_in_order() {
        let steps = Steps::bundled();
        let ids: Vec<_> = steps.iter().map(|s| s.step_id).collect();
        assert_eq!(ids, StepId::ALL);
        assert!(steps
            .get(StepId::Optimization)
            .title
            .contains("optimization"));
        assert!(steps.iter().all(|s| !s.description.is_empty()));
    }

    #[test]
    fn step_ids_parse() {
        assert_eq!("review".parse::<StepId>().unwrap(), StepId::Review);
        assert!("nope".parse::<StepId>().is_err());
    }

    #[test]
    fn missing_step_is_rejected() {
        let text = "step_id,ordinal,title,description,required_fields\nproject_data,1,a,b,\n";
        assert!(matches!(
            Steps::from_csv("s.csv", text),
            Err(StepsError::Incomplete { .. })
        ));
    }
}
