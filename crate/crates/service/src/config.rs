use std::collections::BTreeMap;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};

use ballotmap_core::RegionLevel;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Environment variable that, when set, replaces the config path given on
/// the command line.
pub const CONFIG_ENV: &str = "BALLOTMAP_CONFIG";

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}

/// Service configuration (TOML). Relative paths are resolved against the
/// directory of the config file.
///
/// ```toml
/// data_root = "data"
/// bind_address = "127.0.0.1:8080"
/// palette_overrides = "colors.toml"
///
/// [geometry_paths]
/// province = "geometry/provinces.geojson"
/// census_division = "geometry/lcd_000b16a_e.shp"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub data_root: PathBuf,
    #[serde(default)]
    pub geometry_paths: BTreeMap<RegionLevel, PathBuf>,
    #[serde(default = "default_bind")]
    pub bind_address: String,
    #[serde(default)]
    pub palette_overrides: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ServiceError> {
        let mut cfg: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config {
            path: base_dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.data_root);
        cfg.geometry_paths.values_mut().for_each(resolve);
        if let Some(p) = cfg.palette_overrides.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ServiceError::Config { message, .. } => ServiceError::Config { path: path.to_path_buf(), message },
            other => other,
        })
    }

    /// The config file to use: `$BALLOTMAP_CONFIG` when set, else `cli`.
    pub fn config_path(cli: Option<&Path>) -> Option<PathBuf> {
        std::env::var_os(CONFIG_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| cli.map(Path::to_path_buf))
    }

    pub fn socket_addr(&self) -> Result<SocketAddr, ServiceError> {
        self.bind_address
            .to_socket_addrs()
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| ServiceError::InvalidBindAddress(self.bind_address.clone()))
    }

    /// Startup checks: every configured path exists and the bind address
    /// resolves.
    pub fn validate(&self) -> Result<SocketAddr, ServiceError> {
        let must_exist = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(ServiceError::StartupValidation { path: p.to_path_buf(), reason: format!("{what} does not exist") })
            }
        };
        must_exist(&self.data_root, "data_root")?;
        for (level, p) in &self.geometry_paths {
            must_exist(p, &format!("{level} geometry"))?;
        }
        if let Some(p) = &self.palette_overrides {
            must_exist(p, "palette_overrides")?;
        }
        self.socket_addr()
    }
}
