use std::path::{Path, PathBuf};

use helmplan::experiments::{AdaptiveOptions, RhoSource, SourceKind, SweepConfig};
use helmplan::{build_two_wall_scene, Scene};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where a scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    #[default]
    TwoWall,
    TwoWallShifted,
    /// Scene JSON as written by `Scene::to_json`.
    Path(PathBuf),
}

impl SceneSource {
    pub fn load(&self) -> Result<Scene, CliError> {
        match self {
            SceneSource::TwoWall => Ok(build_two_wall_scene(false)),
            SceneSource::TwoWallShifted => Ok(build_two_wall_scene(true)),
            SceneSource::Path(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read scene {}: {e}", p.display())))?;
                Scene::from_json(&text).map_err(|e| CliError::Config(format!("scene {}: {e}", p.display())))
            }
        }
    }
}

/// Adaptive loop run: scene, beam source and loop options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveRun {
    #[serde(default)]
    pub scene: SceneSource,
    pub source: SourceKind,
    pub options: AdaptiveOptions,
}

/// Configuration file of `experiment run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Regime sweep over the two-wall scenes.
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveRun>,
    /// Default output directory when `--out` is not given.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Recorded for provenance; every pipeline stage is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sweep.is_none() && self.adaptive.is_none() {
            return Err(CliError::Config("config needs a `sweep` or an `adaptive` section".into()));
        }
        if let Some(s) = &self.sweep {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(a) = &self.adaptive {
            let o = &a.options;
            if !(o.tol > 0.0) || o.max_iters == 0 || !(o.k > 0.0) || o.p == 0 {
                return Err(CliError::Config("adaptive options need tol > 0, max_iters >= 1, k > 0 and p >= 1".into()));
            }
            if let RhoSource::Power { exponent } = o.rho {
                if exponent < 1.0 {
                    return Err(CliError::Config("rho exponent must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown_keys() {
        let c: RunConfig = serde_json::from_str(r#"{"sweep": {"regimes": ["U1"], "ns": [2], "sources": ["in"]}}"#).unwrap();
        assert!(c.validate().is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sweep": null, "colour": 1}"#).is_err());
        let empty: RunConfig = serde_json::from_str("{}").unwrap();
        assert!(empty.validate().is_err());
        let a: RunConfig = serde_json::from_str(
            r#"{"adaptive": {"scene": {"path": "s.json"}, "source": "out", "options": {"k": 8, "p": 2, "target": "I", "tol": 0.5, "max_iters": 2, "rho": {"type": "conjectured"}, "initial_hk": 1.5, "hk_cap": 4, "grading": 0.3}}}"#,
        )
        .unwrap();
        assert_eq!(a.adaptive.unwrap().scene, SceneSource::Path("s.json".into()));
    }
}
