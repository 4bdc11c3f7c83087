// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration, layered as flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::{LatentSpaceTag, ReadMethod};
use crate::error::{Error, Result};
use crate::mining::ClientConfig;
use crate::solver::SolverConfig;
use crate::transplant::DEFAULT_REPORT_K;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Plain,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "plain" | "text" => Ok(Self::Plain),
            other => Err(Error::InvalidConfig(format!("unknown output format {other:?}"))),
        }
    }
}

/// Which encoder turns stimuli into vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// An HTTP sidecar speaking the embeddings API.
    #[default]
    Http,
    /// The built-in deterministic bag-of-words encoder.
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSettings {
    pub encoder: EncoderKind,
    /// Width of the hashing encoder.
    pub hashing_dim: usize,
    #[serde(flatten)]
    pub client: ClientConfig,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Http,
            hashing_dim: 64,
            client: ClientConfig {
                endpoint_url: "http://127.0.0.1:8090/v1/embeddings".into(),
                model_name: "clip-vit-l-14-text".into(),
                api_key_env: String::new(),
                ..ClientConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathSettings {
    pub dataset: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub matrices_dir: Option<PathBuf>,
    /// Recorded chat exchanges; when set, mining runs offline against them.
    pub replay_fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: OutputFormat,
    pub report_k: usize,
    pub read_method: ReadMethod,
    pub normalize: bool,
    pub solver: SolverConfig,
    /// Latent space of new dictionaries; inferred from the encoder width when absent.
    pub space: Option<LatentSpaceTag>,
    /// Vision-language model used to parse and rewrite tasks.
    pub vlm: ClientConfig,
    /// Language model used to write stimuli.
    pub llm: ClientConfig,
    pub embedding: EmbeddingSettings,
    pub paths: PathSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: OutputFormat::Json,
            report_k: DEFAULT_REPORT_K,
            read_method: ReadMethod::Avg,
            normalize: false,
            solver: SolverConfig::default(),
            space: None,
            vlm: ClientConfig::default(),
            llm: ClientConfig::default(),
            embedding: EmbeddingSettings::default(),
            paths: PathSettings::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the layer below intact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub output: Option<OutputFormat>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub report_k: Option<usize>,
    pub read_method: Option<ReadMethod>,
    pub normalize: Option<bool>,
    pub cache_dir: Option<PathBuf>,
    pub replay_fixture: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Defaults, then `path` if given, then `overrides`; validated.
    pub fn layered(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        if let Some(v) = o.output {
            self.output = v;
        }
        if let Some(v) = o.lambda {
            self.solver.lambda = v;
        }
        if let Some(v) = o.rho {
            self.solver.rho = v;
        }
        if let Some(v) = o.report_k {
            self.report_k = v;
        }
        if let Some(v) = o.read_method {
            self.read_method = v;
        }
        if let Some(v) = o.normalize {
            self.normalize = v;
        }
        if let Some(v) = &o.cache_dir {
            self.paths.cache_dir = Some(v.clone());
        }
        if let Some(v) = &o.replay_fixture {
            self.paths.replay_fixture = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.report_k == 0 {
            return Err(Error::InvalidConfig("report_k must be >= 1".into()));
        }
        if let Some(space) = &self.space {
            space.validate()?;
        }
        if self.embedding.hashing_dim == 0 {
            return Err(Error::InvalidConfig("hashing_dim must be >= 1".into()));
        }
        self.vlm.validate()?;
        self.llm.validate()?;
        self.embedding.client.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.solver.lambda, 0.01);
        assert_eq!(cfg.solver.rho, 1.0);
        assert_eq!(cfg.report_k, 10);
        assert_eq!(cfg.output, OutputFormat::Json);
        cfg.validate().unwrap();
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lancet.toml");
        std::fs::write(
            &path,
            "report_k = 5\noutput = \"csv\"\n[solver]\nlambda = 0.1\nrho = 0.5\n[embedding]\nencoder = \"hashing\"\n",
        )
        .unwrap();
        let from_file = RunConfig::layered(Some(&path), &ConfigOverrides::default()).unwrap();
        assert_eq!(from_file.solver.lambda, 0.1);
        assert_eq!(from_file.solver.rho, 0.5);
        assert_eq!(from_file.report_k, 5);
        assert_eq!(from_file.output, OutputFormat::Csv);
        assert_eq!(from_file.embedding.encoder, EncoderKind::Hashing);
        assert_eq!(from_file.solver.max_sweeps, SolverConfig::default().max_sweeps);

        let flags = ConfigOverrides {
            lambda: Some(0.02),
            report_k: Some(3),
            ..ConfigOverrides::default()
        };
        let layered = RunConfig::layered(Some(&path), &flags).unwrap();
        assert_eq!(layered.solver.lambda, 0.02);
        assert_eq!(layered.solver.rho, 0.5);
        assert_eq!(layered.report_k, 3);
    }

    #[test]
    fn round_trip_and_rejections() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::InvalidConfig(_))));
        let bad = ConfigOverrides {
            lambda: Some(-1.0),
            ..ConfigOverrides::default()
        };
        assert!(RunConfig::layered(None, &bad).is_err());
    }
}
