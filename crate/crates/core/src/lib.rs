//! Election result pipeline: scrape result tables, persist them as CSV,
//! parse and simplify census boundary geometry, join results to regions on
//! numeric ids, render choropleth maps and compute trend analytics.
//!
//! Geometry and regression code is generic over the coordinate scalar
//! ([`Scalar`], implemented for `f32` and `f64`). The aliases at the crate
//! root fix the scalar to `f64`, which is what the file formats and the HTTP
//! service use; the `*F32` aliases are there for memory-constrained callers.

pub mod analytics;
pub mod datastore;
pub mod geometry;
pub mod ingest;
pub mod join;
pub mod model;
pub mod render;
pub mod scalar;

pub use model::{ElectionResultRow, ElectionType, RegionLevel};
pub use scalar::Scalar;

pub type BBox = geometry::BBox<f64>;
pub type Ring = geometry::Ring<f64>;
pub type Polygon = geometry::Polygon<f64>;
pub type RegionFeature = geometry::RegionFeature<f64>;
pub type FeatureSet = geometry::FeatureSet<f64>;
pub type JoinedRegion = join::JoinedRegion<f64>;
pub type TrendModel = analytics::TrendModel<f64>;

pub type RingF32 = geometry::Ring<f32>;
pub type FeatureSetF32 = geometry::FeatureSet<f32>;
pub type TrendModelF32 = analytics::TrendModel<f32>;
