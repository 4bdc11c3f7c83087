// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON concept datasets: one record per concept with its stimuli.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic_json;
use crate::dictionary::{normalize_stimulus, Concept};
use crate::error::{Error, Result};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptDataset {
    pub version: u32,
    pub records: Vec<Concept>,
}

impl ConceptDataset {
    pub fn new(records: Vec<Concept>) -> Result<Self> {
        let ds = Self {
            version: DATASET_VERSION,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != DATASET_VERSION {
            return Err(Error::SchemaViolation(format!(
                "dataset version {} is not {DATASET_VERSION}",
                self.version
            )));
        }
        let mut names = HashSet::new();
        for rec in &self.records {
            if rec.name.trim().is_empty() {
                return Err(Error::SchemaViolation("empty concept name".into()));
            }
            if !names.insert(rec.name.as_str()) {
                return Err(Error::SchemaViolation(format!(
                    "duplicate concept {:?}",
                    rec.name
                )));
            }
            let mut seen = HashSet::new();
            for s in &rec.stimuli {
                let norm = normalize_stimulus(s);
                if norm.is_empty() {
                    return Err(Error::SchemaViolation(format!(
                        "empty stimulus under {:?}",
                        rec.name
                    )));
                }
                if !seen.insert(norm) {
                    return Err(Error::SchemaViolation(format!(
                        "duplicate stimulus {s:?} under {:?}",
                        rec.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Concept> {
        self.records.iter().find(|c| c.name == name)
    }

    pub fn stimulus_count(&self) -> usize {
        self.records.iter().map(|c| c.stimuli.len()).sum()
    }
}

pub fn write_dataset(ds: &ConceptDataset, path: impl AsRef<Path>) -> Result<()> {
    ds.validate()?;
    write_atomic_json(path.as_ref(), ds)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<ConceptDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<ConceptDataset> {
    let ds: ConceptDataset =
        serde_json::from_str(text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_concept_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.json");
        let ds = ConceptDataset::new(vec![Concept::new("dog", ["Dogs bark."]).unwrap()]).unwrap();
        write_dataset(&ds, &path).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn duplicate_names_violate_schema() {
        let text = r#"{"version":1,"records":[
            {"concept":"dog","stimuli":["a"]},
            {"concept":"dog","stimuli":["b"]}]}"#;
        assert!(matches!(parse_dataset(text), Err(Error::SchemaViolation(_))));
    }

    #[test]
    fn other_schema_violations() {
        for text in [
            r#"{"version":2,"records":[]}"#,
            r#"{"version":1,"records":[{"concept":" ","stimuli":["a"]}]}"#,
            r#"{"version":1,"records":[{"concept":"x","stimuli":["a b","a  b"]}]}"#,
            r#"{"version":1,"records":[{"concept":"x","stimuli":[""]}]}"#,
            r#"{"version":1,"records":[{"concept":"x"}]}"#,
            r#"{"version":1,"records":[],"extra":0}"#,
            "not json",
        ] {
            assert!(matches!(parse_dataset(text), Err(Error::SchemaViolation(_))), "{text}");
        }
    }
}
