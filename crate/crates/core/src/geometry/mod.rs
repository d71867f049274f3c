//! Region boundaries: closed rings grouped into polygons, one feature per
//! PRUID/CDUID, plus the shapefile reader, the simplifier and GeoJSON I/O.

mod geojson;
mod shapefile;
mod simplify;

use std::collections::HashSet;

use crate::model::RegionLevel;
use crate::scalar::Scalar;

pub use self::geojson::{from_geojson, to_geojson, GeoJsonError};
pub use self::shapefile::{parse_shapefile, ShapefileError};
pub use self::simplify::{effective_area, simplify, simplify_ring};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("ring has {0} points, need at least 4 including closure")]
    RingTooShort(usize),
    #[error("ring is not closed")]
    RingNotClosed,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("polygon has no rings")]
    EmptyFeature,
    #[error("region id must be positive")]
    ZeroRegionId,
    #[error("region id {0} appears more than once")]
    DuplicateRegionId(u32),
    #[error("retain fraction {0} is outside (0, 1]")]
    InvalidRetain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox<T> {
    pub xmin: T,
    pub ymin: T,
    pub xmax: T,
    pub ymax: T,
}

impl<T: Scalar> BBox<T> {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a [T; 2]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BBox { xmin: first[0], ymin: first[1], xmax: first[0], ymax: first[1] };
        for p in it {
            bb.xmin = bb.xmin.min(p[0]);
            bb.ymin = bb.ymin.min(p[1]);
            bb.xmax = bb.xmax.max(p[0]);
            bb.ymax = bb.ymax.max(p[1]);
        }
        Some(bb)
    }

    pub fn union(&self, other: &Self) -> Self {
        BBox {
            xmin: self.xmin.min(other.xmin),
            ymin: self.ymin.min(other.ymin),
            xmax: self.xmax.max(other.xmax),
            ymax: self.ymax.max(other.ymax),
        }
    }

    pub fn contains(&self, p: &[T; 2]) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    pub fn encloses(&self, other: &Self) -> bool {
        self.contains(&[other.xmin, other.ymin]) && self.contains(&[other.xmax, other.ymax])
    }

    pub fn width(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> T {
        self.ymax - self.ymin
    }
}

/// A closed ring: first point equals last, at least four points.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring<T> {
    points: Vec<[T; 2]>,
}

impl<T: Scalar> Ring<T> {
    pub fn new(points: Vec<[T; 2]>) -> Result<Self, GeometryError> {
        if points.len() < 4 {
            return Err(GeometryError::RingTooShort(points.len()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if points.first() != points.last() {
            return Err(GeometryError::RingNotClosed);
        }
        Ok(Ring { points })
    }

    /// Closes the ring if the last point differs from the first.
    pub fn closing(mut points: Vec<[T; 2]>) -> Result<Self, GeometryError> {
        if let (Some(first), Some(last)) = (points.first().copied(), points.last()) {
            if first != *last {
                points.push(first);
            }
        }
        Self::new(points)
    }

    pub fn from_tuples(points: &[(T, T)]) -> Result<Self, GeometryError> {
        Self::new(points.iter().map(|&(x, y)| [x, y]).collect())
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    /// Distinct vertices: the point count without the closing repeat.
    pub fn vertex_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn bbox(&self) -> BBox<T> {
        BBox::of_points(&self.points).expect("ring is non-empty")
    }

    /// Shoelace signed area; positive for counter-clockwise rings in a y-up
    /// frame.
    pub fn signed_area(&self) -> T {
        let twice = self
            .points
            .windows(2)
            .fold(T::zero(), |acc, w| acc + (w[0][0] * w[1][1] - w[1][0] * w[0][1]));
        twice / T::two()
    }

    /// Even-odd point-in-ring test.
    pub fn contains_point(&self, p: &[T; 2]) -> bool {
        let mut inside = false;
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn cast<U: Scalar>(&self) -> Ring<U> {
        Ring {
            points: self
                .points
                .iter()
                .map(|p| [U::from_f64_lossy(p[0].to_f64_lossy()), U::from_f64_lossy(p[1].to_f64_lossy())])
                .collect(),
        }
    }
}

/// An exterior ring plus zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T> {
    pub exterior: Ring<T>,
    pub holes: Vec<Ring<T>>,
}

impl<T: Scalar> Polygon<T> {
    pub fn new(exterior: Ring<T>, holes: Vec<Ring<T>>) -> Self {
        Polygon { exterior, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        std::iter::once(&self.exterior).chain(&self.holes)
    }
}

/// One region: numeric id, display name and its polygons. The bounding box
/// always encloses every ring point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeature<T> {
    pub region_id: u32,
    pub region_name: String,
    polygons: Vec<Polygon<T>>,
    bbox: BBox<T>,
}

impl<T: Scalar> RegionFeature<T> {
    pub fn new(region_id: u32, region_name: impl Into<String>, polygons: Vec<Polygon<T>>) -> Result<Self, GeometryError> {
        if region_id == 0 {
            return Err(GeometryError::ZeroRegionId);
        }
        let bbox = polygons
            .iter()
            .flat_map(|p| p.rings())
            .map(Ring::bbox)
            .reduce(|a, b| a.union(&b))
            .ok_or(GeometryError::EmptyFeature)?;
        Ok(RegionFeature { region_id, region_name: region_name.into(), polygons, bbox })
    }

    /// Single-polygon feature from rings, exterior first.
    pub fn from_rings(region_id: u32, region_name: impl Into<String>, mut rings: Vec<Ring<T>>) -> Result<Self, GeometryError> {
        if rings.is_empty() {
            return Err(GeometryError::EmptyFeature);
        }
        let exterior = rings.remove(0);
        Self::new(region_id, region_name, vec![Polygon::new(exterior, rings)])
    }

    /// Uses `bbox` (e.g. from a file header) provided it encloses the points.
    pub(crate) fn with_declared_bbox(mut self, bbox: BBox<T>) -> Option<Self> {
        if bbox.encloses(&self.bbox) {
            self.bbox = bbox;
            Some(self)
        } else {
            None
        }
    }

    pub fn polygons(&self) -> &[Polygon<T>] {
        &self.polygons
    }

    /// All rings, each polygon's exterior followed by its holes.
    pub fn rings(&self) -> impl Iterator<Item = &Ring<T>> {
        self.polygons.iter().flat_map(Polygon::rings)
    }

    pub fn ring_count(&self) -> usize {
        self.rings().count()
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Ring::vertex_count).sum()
    }

    pub fn bbox(&self) -> BBox<T> {
        self.bbox
    }

    pub fn map_polygons(&self, f: impl Fn(&Polygon<T>) -> Polygon<T>) -> Self {
        let polygons: Vec<_> = self.polygons.iter().map(f).collect();
        Self::new(self.region_id, self.region_name.clone(), polygons).expect("polygon count unchanged")
    }

    pub fn cast<U: Scalar>(&self) -> RegionFeature<U> {
        let polygons = self
            .polygons
            .iter()
            .map(|p| Polygon::new(p.exterior.cast(), p.holes.iter().map(Ring::cast).collect()))
            .collect();
        RegionFeature::new(self.region_id, self.region_name.clone(), polygons).expect("same shape")
    }
}

/// Features of one level with unique region ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet<T> {
    level: RegionLevel,
    features: Vec<RegionFeature<T>>,
}

impl<T: Scalar> FeatureSet<T> {
    pub fn new(level: RegionLevel, features: Vec<RegionFeature<T>>) -> Result<Self, GeometryError> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.region_id) {
                return Err(GeometryError::DuplicateRegionId(f.region_id));
            }
        }
        Ok(FeatureSet { level, features })
    }

    pub fn level(&self) -> RegionLevel {
        self.level
    }

    pub fn features(&self) -> &[RegionFeature<T>] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, region_id: u32) -> Option<&RegionFeature<T>> {
        self.features.iter().find(|f| f.region_id == region_id)
    }

    pub fn vertex_count(&self) -> usize {
        self.features.iter().map(RegionFeature::vertex_count).sum()
    }

    pub fn bbox(&self) -> Option<BBox<T>> {
        self.features.iter().map(RegionFeature::bbox).reduce(|a, b| a.union(&b))
    }

    pub fn cast<U: Scalar>(&self) -> FeatureSet<U> {
        FeatureSet { level: self.level, features: self.features.iter().map(RegionFeature::cast).collect() }
    }
}
