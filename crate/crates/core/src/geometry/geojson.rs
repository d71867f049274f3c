//! RFC 7946 FeatureCollection output and input. Coordinates are written with
//! six decimal places; properties carry `PRUID`/`PRNAME` or `CDUID`/`CDNAME`
//! depending on the set's level.

use std::fmt::Write as _;

use serde_json::Value;

use super::{FeatureSet, GeometryError, Polygon, RegionFeature, Ring};
use crate::model::RegionLevel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoJsonError {
    #[error("malformed GeoJSON: {0}")]
    JsonMalformed(String),
    #[error("feature {feature} has no PRUID, PRID or CDUID property")]
    MissingIdProperty { feature: usize },
    #[error("feature {feature}: id {value} is not a positive integer")]
    BadId { feature: usize, value: String },
    #[error("feature {feature} is keyed at {found} level but earlier features at {expected}")]
    MixedLevels { feature: usize, expected: RegionLevel, found: RegionLevel },
    #[error("feature {feature}: {source}")]
    Geometry {
        feature: usize,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Set(#[from] GeometryError),
}

fn write_ring<T: Scalar>(out: &mut String, ring: &Ring<T>) {
    out.push('[');
    for (i, p) in ring.points().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "[{:.6},{:.6}]", p[0].to_f64_lossy(), p[1].to_f64_lossy());
    }
    out.push(']');
}

fn write_polygon<T: Scalar>(out: &mut String, polygon: &Polygon<T>) {
    out.push('[');
    for (i, ring) in polygon.rings().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_ring(out, ring);
    }
    out.push(']');
}

/// Serializes a feature set; one feature per line. Single-polygon regions
/// become `Polygon`, the rest `MultiPolygon`.
pub fn to_geojson<T: Scalar>(fs: &FeatureSet<T>) -> String {
    let level = fs.level();
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, f) in fs.features().iter().enumerate() {
        out.push_str(if i > 0 { ",\n" } else { "\n" });
        let name = Value::String(f.region_name.clone());
        let _ = write!(
            out,
            "{{\"type\":\"Feature\",\"properties\":{{\"{}\":{},\"{}\":{}}},\"geometry\":",
            level.id_property(),
            f.region_id,
            level.name_property(),
            name
        );
        match f.polygons() {
            [single] => {
                out.push_str("{\"type\":\"Polygon\",\"coordinates\":");
                write_polygon(&mut out, single);
            }
            many => {
                out.push_str("{\"type\":\"MultiPolygon\",\"coordinates\":[");
                for (k, p) in many.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    write_polygon(&mut out, p);
                }
                out.push(']');
            }
        }
        out.push_str("}}");
    }
    out.push_str("\n]}\n");
    out
}

fn malformed(msg: impl Into<String>) -> GeoJsonError {
    GeoJsonError::JsonMalformed(msg.into())
}

fn position<T: Scalar>(v: &Value) -> Result<[T; 2], GeoJsonError> {
    match v.as_array().map(Vec::as_slice) {
        Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => Ok([T::from_f64_lossy(x), T::from_f64_lossy(y)]),
            _ => Err(malformed("non-numeric coordinate")),
        },
        _ => Err(malformed("position must have at least two numbers")),
    }
}

fn ring<T: Scalar>(v: &Value, feature: usize) -> Result<Ring<T>, GeoJsonError> {
    let pts = v
        .as_array()
        .ok_or_else(|| malformed("ring must be an array of positions"))?
        .iter()
        .map(position)
        .collect::<Result<Vec<_>, _>>()?;
    Ring::new(pts).map_err(|source| GeoJsonError::Geometry { feature, source })
}

fn polygon<T: Scalar>(v: &Value, feature: usize) -> Result<Polygon<T>, GeoJsonError> {
    let mut rings = v
        .as_array()
        .ok_or_else(|| malformed("polygon must be an array of rings"))?
        .iter()
        .map(|r| ring(r, feature))
        .collect::<Result<Vec<_>, _>>()?;
    if rings.is_empty() {
        return Err(GeoJsonError::Geometry { feature, source: GeometryError::EmptyFeature });
    }
    let exterior = rings.remove(0);
    Ok(Polygon::new(exterior, rings))
}

fn id_property(props: &serde_json::Map<String, Value>) -> Option<(RegionLevel, &Value)> {
    for (key, level) in [
        ("PRUID", RegionLevel::Province),
        ("PRID", RegionLevel::Province),
        ("CDUID", RegionLevel::CensusDivision),
    ] {
        if let Some((_, v)) = props.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)) {
            return Some((level, v));
        }
    }
    None
}

fn parse_id(v: &Value) -> Option<u32> {
    let id = match v {
        Value::Number(n) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }?;
    (id > 0).then_some(id)
}

/// Parses a FeatureCollection keyed by PRUID (or PRID) or CDUID.
pub fn from_geojson<T: Scalar>(text: &str) -> Result<FeatureSet<T>, GeoJsonError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(malformed("top-level object is not a FeatureCollection"));
    }
    let items = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("FeatureCollection has no features array"))?;

    let mut level: Option<RegionLevel> = None;
    let mut features = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let props = item
            .get("properties")
            .and_then(Value::as_object)
            .ok_or(GeoJsonError::MissingIdProperty { feature: i })?;
        let (this_level, raw_id) = id_property(props).ok_or(GeoJsonError::MissingIdProperty { feature: i })?;
        match level {
            None => level = Some(this_level),
            Some(expected) if expected != this_level => {
                return Err(GeoJsonError::MixedLevels { feature: i, expected, found: this_level })
            }
            _ => {}
        }
        let region_id = parse_id(raw_id).ok_or_else(|| GeoJsonError::BadId { feature: i, value: raw_id.to_string() })?;
        let name = [this_level.name_property(), "name", "NAME"]
            .iter()
            .find_map(|k| props.get(*k).and_then(Value::as_str))
            .unwrap_or_default();

        let geometry = item.get("geometry").filter(|g| !g.is_null()).ok_or_else(|| malformed(format!("feature {i} has no geometry")))?;
        let coords = geometry.get("coordinates").ok_or_else(|| malformed(format!("feature {i} geometry has no coordinates")))?;
        let polygons = match geometry.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![polygon(coords, i)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| malformed("MultiPolygon coordinates must be an array"))?
                .iter()
                .map(|p| polygon(p, i))
                .collect::<Result<Vec<_>, _>>()?,
            other => return Err(malformed(format!("feature {i}: unsupported geometry type {other:?}"))),
        };
        let feature = RegionFeature::new(region_id, name, polygons).map_err(|source| GeoJsonError::Geometry { feature: i, source })?;
        features.push(feature);
    }
    Ok(FeatureSet::new(level.unwrap_or(RegionLevel::Province), features)?)
}
