//! Reader for ESRI Polygon shapefiles (`.shp`) and their dBASE attribute
//! tables (`.dbf`).
//!
//! The `.shp` main header is mixed-endian: file code and length are
//! big-endian, version, shape type and bounding box little-endian. Record
//! headers are big-endian, record contents little-endian. Only shape type 5
//! (Polygon) is accepted, and only Character/Numeric dBASE fields are
//! decoded.

use std::io::Cursor;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt};

use super::{BBox, FeatureSet, GeometryError, Polygon, RegionFeature, Ring};
use crate::model::RegionLevel;
use crate::scalar::Scalar;

const FILE_CODE: i32 = 9994;
const VERSION: i32 = 1000;
const SHAPE_NULL: i32 = 0;
const SHAPE_POLYGON: i32 = 5;
const SHP_HEADER_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapefileError {
    #[error("not a shapefile: file code {0}, expected 9994")]
    BadMagic(i32),
    #[error("unsupported shapefile version {0}, expected 1000")]
    BadVersion(i32),
    #[error("unsupported shape type {0}; only Polygon (5) is handled")]
    UnsupportedShapeType(i32),
    #[error("{shp} shape records but {dbf} attribute records")]
    RecordCountMismatch { shp: usize, dbf: usize },
    #[error("attribute field {0:?} not found")]
    FieldNotFound(String),
    #[error("attribute field {field:?} has unsupported type {kind:?}")]
    UnsupportedFieldType { field: String, kind: char },
    #[error("truncated {what} at byte {offset}")]
    Truncated { what: &'static str, offset: usize },
    #[error("record {record}: {reason}")]
    BadRecord { record: usize, reason: String },
    #[error("record {record}: region id {value:?} is not a positive integer")]
    BadRegionId { record: usize, value: String },
    #[error("record {record}: declared bounding box does not enclose its points")]
    BboxMismatch { record: usize },
    #[error("record {record}: {source}")]
    Geometry {
        record: usize,
        #[source]
        source: GeometryError,
    },
    #[error("invalid dbf: {0}")]
    BadDbf(String),
    #[error("region id {0} appears in more than one record")]
    DuplicateRegionId(u32),
}

type Result<T> = std::result::Result<T, ShapefileError>;

fn truncated(what: &'static str, offset: usize) -> impl Fn(std::io::Error) -> ShapefileError {
    move |_| ShapefileError::Truncated { what, offset }
}

struct ShpRecord {
    bbox: [f64; 4],
    rings: Vec<Vec<[f64; 2]>>,
}

fn read_shp(shp: &[u8]) -> Result<Vec<ShpRecord>> {
    if shp.len() < SHP_HEADER_LEN {
        return Err(ShapefileError::Truncated { what: "main header", offset: shp.len() });
    }
    let mut c = Cursor::new(shp);
    let code = c.read_i32::<BigEndian>().map_err(truncated("main header", 0))?;
    if code != FILE_CODE {
        return Err(ShapefileError::BadMagic(code));
    }
    c.set_position(24);
    let length_words = c.read_i32::<BigEndian>().map_err(truncated("main header", 24))?;
    let version = c.read_i32::<LittleEndian>().map_err(truncated("main header", 28))?;
    if version != VERSION {
        return Err(ShapefileError::BadVersion(version));
    }
    let shape_type = c.read_i32::<LittleEndian>().map_err(truncated("main header", 32))?;
    if shape_type != SHAPE_POLYGON {
        return Err(ShapefileError::UnsupportedShapeType(shape_type));
    }
    let declared = usize::try_from(length_words)
        .ok()
        .and_then(|w| w.checked_mul(2))
        .filter(|&n| n >= SHP_HEADER_LEN)
        .ok_or_else(|| ShapefileError::BadRecord { record: 0, reason: format!("file length {length_words} words") })?;
    if declared > shp.len() {
        return Err(ShapefileError::Truncated { what: "file", offset: shp.len() });
    }
    let body = &shp[..declared];

    let mut records = Vec::new();
    let mut offset = SHP_HEADER_LEN;
    while offset < body.len() {
        let record = records.len();
        let mut h = Cursor::new(&body[offset..]);
        let _number = h.read_i32::<BigEndian>().map_err(truncated("record header", offset))?;
        let words = h.read_i32::<BigEndian>().map_err(truncated("record header", offset))?;
        let len = usize::try_from(words)
            .ok()
            .and_then(|w| w.checked_mul(2))
            .ok_or_else(|| ShapefileError::BadRecord { record, reason: format!("content length {words}") })?;
        let start = offset + 8;
        let end = start.checked_add(len).filter(|&e| e <= body.len()).ok_or(ShapefileError::Truncated {
            what: "record content",
            offset: start,
        })?;
        records.push(read_polygon(&body[start..end], record, start)?);
        offset = end;
    }
    Ok(records)
}

fn read_polygon(content: &[u8], record: usize, base: usize) -> Result<ShpRecord> {
    let bad = |reason: String| ShapefileError::BadRecord { record, reason };
    let mut c = Cursor::new(content);
    let t = c.read_i32::<LittleEndian>().map_err(truncated("shape type", base))?;
    match t {
        SHAPE_POLYGON => {}
        SHAPE_NULL => return Err(bad("null shape".into())),
        other => return Err(ShapefileError::UnsupportedShapeType(other)),
    }
    let mut bbox = [0.0; 4];
    for v in &mut bbox {
        *v = c.read_f64::<LittleEndian>().map_err(truncated("record bbox", base))?;
    }
    let num_parts = c.read_i32::<LittleEndian>().map_err(truncated("part count", base))?;
    let num_points = c.read_i32::<LittleEndian>().map_err(truncated("point count", base))?;
    let (Ok(num_parts), Ok(num_points)) = (usize::try_from(num_parts), usize::try_from(num_points)) else {
        return Err(bad(format!("negative counts ({num_parts} parts, {num_points} points)")));
    };
    if num_parts == 0 {
        return Err(bad("polygon without parts".into()));
    }
    let needed = num_parts
        .checked_mul(4)
        .and_then(|p| num_points.checked_mul(16).and_then(|q| q.checked_add(p)))
        .and_then(|n| n.checked_add(44));
    if needed.is_none_or(|n| n > content.len()) {
        return Err(ShapefileError::Truncated { what: "polygon arrays", offset: base });
    }

    let mut parts = Vec::with_capacity(num_parts);
    for _ in 0..num_parts {
        let p = c.read_i32::<LittleEndian>().map_err(truncated("parts", base))?;
        parts.push(usize::try_from(p).map_err(|_| bad(format!("negative part index {p}")))?);
    }
    if parts[0] != 0 || parts.windows(2).any(|w| w[0] >= w[1]) || parts[num_parts - 1] >= num_points {
        return Err(bad(format!("part indices {parts:?} invalid for {num_points} points")));
    }
    let mut points = Vec::with_capacity(num_points);
    for _ in 0..num_points {
        let x = c.read_f64::<LittleEndian>().map_err(truncated("points", base))?;
        let y = c.read_f64::<LittleEndian>().map_err(truncated("points", base))?;
        points.push([x, y]);
    }
    let rings = parts
        .iter()
        .zip(parts.iter().skip(1).chain(std::iter::once(&num_points)))
        .map(|(&a, &b)| points[a..b].to_vec())
        .collect();
    Ok(ShpRecord { bbox, rings })
}

/// Groups rings into polygons by orientation: clockwise rings (ESRI
/// exteriors) start a polygon, counter-clockwise rings are holes of the
/// polygon whose exterior contains them. A leading counter-clockwise ring is
/// taken as an exterior.
fn group_rings<T: Scalar>(rings: Vec<Ring<T>>) -> Vec<Polygon<T>> {
    let mut polygons: Vec<Polygon<T>> = Vec::new();
    for ring in rings {
        let is_hole = ring.signed_area() > T::zero() && !polygons.is_empty();
        if is_hole {
            let probe = ring.points()[0];
            let owner = polygons
                .iter()
                .rposition(|p| p.exterior.contains_point(&probe))
                .unwrap_or(polygons.len() - 1);
            polygons[owner].holes.push(ring);
        } else {
            polygons.push(Polygon::new(ring, Vec::new()));
        }
    }
    polygons
}

#[derive(Debug, Clone)]
struct DbfField {
    name: String,
    kind: u8,
    offset: usize,
    len: usize,
}

struct Dbf<'a> {
    bytes: &'a [u8],
    records: usize,
    header_len: usize,
    record_len: usize,
    fields: Vec<DbfField>,
}

impl<'a> Dbf<'a> {
    fn parse(bytes: &'a [u8]) -> Result<Self> {
        if bytes.len() < 32 {
            return Err(ShapefileError::Truncated { what: "dbf header", offset: bytes.len() });
        }
        let mut c = Cursor::new(bytes);
        c.set_position(4);
        let records = c.read_u32::<LittleEndian>().map_err(truncated("dbf header", 4))? as usize;
        let header_len = c.read_u16::<LittleEndian>().map_err(truncated("dbf header", 8))? as usize;
        let record_len = c.read_u16::<LittleEndian>().map_err(truncated("dbf header", 10))? as usize;
        if header_len < 33 || header_len > bytes.len() {
            return Err(ShapefileError::BadDbf(format!("header length {header_len}")));
        }
        let mut fields = Vec::new();
        let mut pos = 32;
        let mut offset = 1; // deletion flag
        while pos + 32 <= header_len && bytes[pos] != 0x0D {
            let d = &bytes[pos..pos + 32];
            let name_end = d[..11].iter().position(|&b| b == 0).unwrap_or(11);
            let name = String::from_utf8_lossy(&d[..name_end]).trim().to_string();
            let len = d[16] as usize;
            fields.push(DbfField { name, kind: d[11], offset, len });
            offset += len;
            pos += 32;
        }
        if offset != record_len {
            return Err(ShapefileError::BadDbf(format!(
                "field widths sum to {offset} bytes but records are {record_len}"
            )));
        }
        let needed = records.checked_mul(record_len).and_then(|n| n.checked_add(header_len));
        if needed.is_none_or(|n| n > bytes.len()) {
            return Err(ShapefileError::Truncated { what: "dbf records", offset: bytes.len() });
        }
        Ok(Dbf { bytes, records, header_len, record_len, fields })
    }

    fn field(&self, name: &str) -> Result<&DbfField> {
        let aliases: &[&str] = match name.to_ascii_uppercase().as_str() {
            "PRUID" | "PRID" => &["PRUID", "PRID"],
            _ => &[],
        };
        let field = self
            .fields
            .iter()
            .find(|f| f.name.eq_ignore_ascii_case(name))
            .or_else(|| self.fields.iter().find(|f| aliases.iter().any(|a| f.name.eq_ignore_ascii_case(a))))
            .ok_or_else(|| ShapefileError::FieldNotFound(name.to_string()))?;
        match field.kind {
            b'C' | b'N' => Ok(field),
            other => Err(ShapefileError::UnsupportedFieldType { field: field.name.clone(), kind: other as char }),
        }
    }

    fn text(&self, record: usize, field: &DbfField) -> String {
        let start = self.header_len + record * self.record_len + field.offset;
        let raw = &self.bytes[start..start + field.len];
        let text = match std::str::from_utf8(raw) {
            Ok(s) => s.to_string(),
            // dBASE files from older tools are usually Latin-1
            Err(_) => raw.iter().map(|&b| b as char).collect(),
        };
        text.trim_matches(|c: char| c.is_whitespace() || c == '\0').to_string()
    }
}

fn parse_id(raw: &str) -> Option<u32> {
    let id = raw.parse::<u32>().ok().or_else(|| {
        let v: f64 = raw.parse().ok()?;
        (v.fract() == 0.0 && v >= 1.0 && v <= f64::from(u32::MAX)).then_some(v as u32)
    })?;
    (id > 0).then_some(id)
}

/// Parses a Polygon shapefile and its attribute table into a feature set.
/// The level is census division when `id_field` is a CDUID-style field,
/// province otherwise; `PRID` and `PRUID` are interchangeable.
pub fn parse_shapefile<T: Scalar>(shp: &[u8], dbf: &[u8], id_field: &str, name_field: &str) -> Result<FeatureSet<T>> {
    let records = read_shp(shp)?;
    let table = Dbf::parse(dbf)?;
    if table.records != records.len() {
        return Err(ShapefileError::RecordCountMismatch { shp: records.len(), dbf: table.records });
    }
    let id_col = table.field(id_field)?.clone();
    let name_col = table.field(name_field)?.clone();
    let level = if id_field.to_ascii_uppercase().starts_with("CD") {
        RegionLevel::CensusDivision
    } else {
        RegionLevel::Province
    };

    let mut features = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let raw_id = table.text(i, &id_col);
        let region_id = parse_id(&raw_id).ok_or(ShapefileError::BadRegionId { record: i, value: raw_id })?;
        let geometry = |source| ShapefileError::Geometry { record: i, source };
        let rings = rec
            .rings
            .into_iter()
            .map(|pts| {
                Ring::new(pts.into_iter().map(|[x, y]| [T::from_f64_lossy(x), T::from_f64_lossy(y)]).collect())
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(geometry)?;
        let feature = RegionFeature::new(region_id, table.text(i, &name_col), group_rings(rings)).map_err(geometry)?;
        let [xmin, ymin, xmax, ymax] = rec.bbox.map(T::from_f64_lossy);
        let feature = feature
            .with_declared_bbox(BBox { xmin, ymin, xmax, ymax })
            .ok_or(ShapefileError::BboxMismatch { record: i })?;
        features.push(feature);
    }
    FeatureSet::new(level, features).map_err(|e| match e {
        GeometryError::DuplicateRegionId(id) => ShapefileError::DuplicateRegionId(id),
        other => ShapefileError::Geometry { record: 0, source: other },
    })
}
