use std::collections::BTreeMap;
use std::path::Path;

use ballotmap_core::datastore::{build_catalog, ElectionCatalog};
use ballotmap_core::geometry::{from_geojson, parse_shapefile, FeatureSet};
use ballotmap_core::render::{parse_overrides, Color};
use ballotmap_core::RegionLevel;
use tracing::info;

use crate::{ServiceConfig, ServiceError};

/// Everything a request can see. Never mutated; a reload builds a new one.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub version: u64,
    pub catalog: ElectionCatalog,
    pub geometry: BTreeMap<RegionLevel, FeatureSet<f64>>,
    pub overrides: BTreeMap<String, Color>,
}

fn invalid(path: &Path, reason: impl ToString) -> ServiceError {
    ServiceError::StartupValidation { path: path.to_path_buf(), reason: reason.to_string() }
}

/// Reads a boundary file: GeoJSON by default, an ESRI shapefile (with its
/// sibling `.dbf`) when the extension is `.shp`.
pub fn load_geometry(path: &Path, level: RegionLevel) -> Result<FeatureSet<f64>, ServiceError> {
    let is_shp = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("shp"));
    let fs = if is_shp {
        let shp = std::fs::read(path).map_err(|e| invalid(path, e))?;
        let dbf_path = ["dbf", "DBF"]
            .iter()
            .map(|ext| path.with_extension(ext))
            .find(|p| p.exists())
            .ok_or_else(|| invalid(path, "no .dbf next to the .shp"))?;
        let dbf = std::fs::read(&dbf_path).map_err(|e| invalid(&dbf_path, e))?;
        parse_shapefile(&shp, &dbf, level.id_property(), level.name_property()).map_err(|e| invalid(path, e))?
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(path, e))?;
        from_geojson(&text).map_err(|e| invalid(path, e))?
    };
    if fs.level() != level {
        return Err(invalid(path, format!("configured as {level} geometry but holds {} features", fs.level())));
    }
    Ok(fs)
}

impl Snapshot {
    pub fn load(config: &ServiceConfig, version: u64) -> Result<Self, ServiceError> {
        config.validate()?;
        let catalog = build_catalog(&config.data_root).map_err(|e| invalid(&config.data_root, e))?;
        let mut geometry = BTreeMap::new();
        for (level, path) in &config.geometry_paths {
            geometry.insert(*level, load_geometry(path, *level)?);
        }
        let overrides = match &config.palette_overrides {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| invalid(p, e))?;
                parse_overrides(&text).map_err(|e| invalid(p, e))?
            }
            None => BTreeMap::new(),
        };
        info!(version, elections = catalog.len(), geometry_levels = geometry.len(), "snapshot loaded");
        Ok(Snapshot { version, catalog, geometry, overrides })
    }
}
