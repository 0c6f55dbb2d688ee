//! Run configuration: a single JSON document, with flag overrides.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Effective configuration of a diagnostic run. Serialized into every
/// report together with its hash, so results are traceable to their inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub model: String,
    #[serde(default)]
    pub truncation: Option<usize>,
    /// One of `cesaro`, `backward-cesaro`, `abel`, `time`.
    #[serde(default = "default_scheme")]
    pub scheme: String,
    /// Largest Cesaro index; the grid is dyadic up to this value.
    #[serde(default)]
    pub n_max: Option<u64>,
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Requested diagnostics; empty means the full applicable set.
    #[serde(default)]
    pub diagnostics: Vec<String>,
    /// Plateau tolerance override.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Treat inconclusive certifications as acceptable (exit 0).
    #[serde(default)]
    pub allow_inconclusive: bool,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_scheme() -> String {
    "cesaro".into()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            model: String::new(),
            truncation: None,
            scheme: default_scheme(),
            n_max: None,
            r_grid: None,
            t_grid: None,
            diagnostics: Vec::new(),
            tol: None,
            seed: 0,
            allow_inconclusive: false,
        }
    }
}

pub const KNOWN_DIAGNOSTICS: &[&str] = &[
    "as1",
    "as3",
    "hull",
    "projection",
    "e-property",
    "beta0",
    "tightness",
    "equivalences",
];

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).context("parsing config JSON")?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported config schema version {}", self.schema_version);
        }
        if self.model.is_empty() {
            bail!("no model selected (use --model or a config file)");
        }
        match self.scheme.as_str() {
            "cesaro" | "backward-cesaro" | "abel" | "time" => {}
            other => bail!("unknown scheme `{other}`"),
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                bail!("tolerance must be positive");
            }
        }
        if let Some(n) = self.n_max {
            if n == 0 {
                bail!("n-max must be at least 1");
            }
        }
        for d in &self.diagnostics {
            if !KNOWN_DIAGNOSTICS.contains(&d.as_str()) {
                bail!(
                    "unknown diagnostic `{d}` (known: {})",
                    KNOWN_DIAGNOSTICS.join(", ")
                );
            }
        }
        Ok(())
    }

    /// Hash of the canonical JSON encoding.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
