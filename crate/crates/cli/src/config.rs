use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thermosig_core::regression::DEFAULT_MODE_FILTER;
use thermosig_core::{
    BuildOptions, ColumnMap, GridSpec, HvacMode, ModeRule, Scenario, StationConstants,
};

use crate::error::CliError;

/// Everything a command needs besides its input files.
///
/// Only `constants` is required; `scenario` is only needed by `simulate`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub constants: StationConstants,
    #[serde(default)]
    pub schema: ColumnMap,
    #[serde(default)]
    pub mode_rule: ModeRule,
    #[serde(default)]
    pub grid: GridSpec,
    /// Frames in these modes enter the regression.
    #[serde(default = "default_mode_filter")]
    pub mode_filter: Vec<HvacMode>,
    /// Longest sensor gap (in steps) that is interpolated over.
    #[serde(default = "default_max_gap")]
    pub max_gap: usize,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    /// Relative paths are taken from the config file's directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_mode_filter() -> Vec<HvacMode> {
    DEFAULT_MODE_FILTER.to_vec()
}

fn default_max_gap() -> usize {
    BuildOptions::default().max_gap
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = config.output_dir.as_mut() {
            if dir.is_relative() {
                *dir = path.parent().unwrap_or(Path::new("")).join(&*dir);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.constants
            .validate()
            .map_err(|e| CliError::Config(format!("constants: {e}")))?;
        self.grid.validate()?;
        if self.mode_filter.is_empty() {
            return Err(CliError::Config("mode_filter: no modes selected".into()));
        }
        Ok(())
    }

    /// The config's scenario with the config's station constants. A
    /// scenario that carries its own, different constants is rejected.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut scenario = self.scenario.clone().ok_or_else(|| {
            CliError::Config("missing field `scenario` (required by simulate)".into())
        })?;
        if scenario.constants != Scenario::default().constants
            && scenario.constants != self.constants
        {
            return Err(CliError::Config(
                "scenario.constants differs from constants; set them once at the top level".into(),
            ));
        }
        scenario.constants = self.constants;
        Ok(scenario)
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            max_gap: self.max_gap,
        }
    }

    /// `--out` wins over the config's `output_dir`; the working directory is
    /// the fallback.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"constants": {"m_z": 1000}}"#;

    #[test]
    fn minimal_config_gives_defaults() {
        let c: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.mode_filter, vec![HvacMode::Refrigerator]);
        assert_eq!(c.grid, GridSpec::default());
        assert!(c.scenario.is_none());
        assert!(c.validate().is_ok());
        assert_eq!(c.scenario().unwrap_err().exit_code(), 2);
        assert!(serde_json::from_str::<RunConfig>("{}").is_err());
    }

    #[test]
    fn scenario_takes_top_level_constants() {
        let c: RunConfig = serde_json::from_str(
            r#"{"constants": {"m_z": 500, "beta_v": 0.25}, "scenario": {"seed": 3}}"#,
        )
        .unwrap();
        let s = c.scenario().unwrap();
        assert_eq!(s.constants, StationConstants::new(500.0, 0.25));
        assert_eq!(s.seed, 3);

        let clash: RunConfig = serde_json::from_str(
            r#"{"constants": {"m_z": 500}, "scenario": {"constants": {"m_z": 700}}}"#,
        )
        .unwrap();
        assert_eq!(clash.scenario().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"constants": {"m_z": 1}, "gird": {}}"#).is_err()
        );
    }

    #[test]
    fn bad_constants_are_config_errors() {
        let c: RunConfig =
            serde_json::from_str(r#"{"constants": {"m_z": 1000, "beta_v": 0.5, "t_p": 50}}"#)
                .unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn output_dir_precedence() {
        let mut c: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(c.output_dir(None), PathBuf::from("."));
        c.output_dir = Some("cfg".into());
        assert_eq!(c.output_dir(None), PathBuf::from("cfg"));
        assert_eq!(c.output_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
    }
}
