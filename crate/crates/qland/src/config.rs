//! Config files and output locations.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{CliError, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "QLAND_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "qland-out";

/// Reads a TOML file into `T`, or returns `T::default()` without a path.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// `--out` if given, else `<root>/<name>`.
pub fn resolve_output_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| output_root().join(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qland_core::landscape::{ConnectivityKind, LandscapeConfig};

    #[test]
    fn toml_fills_missing_fields_from_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "connectivity = \"sym6\"\nsteps = 40\n").unwrap();
        let cfg: LandscapeConfig = load_or_default(Some(&path)).unwrap();
        assert_eq!(cfg.connectivity, ConnectivityKind::Sym6);
        assert_eq!(cfg.steps, 40);
        assert_eq!(cfg.hot_population, 0.4);
        let none: LandscapeConfig = load_or_default(None).unwrap();
        assert_eq!(none, LandscapeConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "stepz = 4\n").unwrap();
        let err = load_or_default::<LandscapeConfig>(Some(&path)).unwrap_err();
        assert!(matches!(err, CliError::ConfigFile { .. }));
    }
}
