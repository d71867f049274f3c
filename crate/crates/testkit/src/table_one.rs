//! The province-level provincial election table (latest election per
//! province as of 2019) and a synthetic boundary set keyed by the same PRUIDs.

use crate::shapefile::{DbfFieldSpec, ShapefileFixture};

/// `(PRUID, Province, Party)` exactly as printed.
pub const ROWS: [(u32, &str, &str); 13] = [
    (48, "Alberta (Apr 16, '19)", "United Conservative Party"),
    (59, "British Columbia (May 9, '17)", "British Columbia Liberal Party"),
    (46, "Manitoba (Apr 19, '16)", "Progressive Conservative Party of Manitoba"),
    (13, "New Brunswick (Sep 24, '18)", "Progressive Conservative Party of New Brunswick"),
    (10, "Newfoundland and Labrador (May 16, '19)", "Liberal Party of Newfoundland and Labrador"),
    (12, "Nova Scotia (May 30, '17)", "Nova Scotia Liberal Party"),
    (62, "Nunavut (Oct 30, '17)", "Nunavut Independent"),
    (61, "Northwest Territories (Oct 3, '11)", "Sans Nom/ No Name"),
    (35, "Ontario (Jun 7, '18)", "Progressive Conservative Party of Ontario"),
    (11, "Prince Edward Island (Apr 23, '19)", "Progressive Conservative Party of Prince Edward Island"),
    (24, "Quebec (Oct 1, '18)", "Coalition Avenir Québec - L'équipe François Legault"),
    (47, "Saskatchewan (Apr 4, '16)", "Saskatchewan Party"),
    (60, "Yukon (Oct 1, '11)", "Yukon Party"),
];

/// Boundary-file style names (no election date suffix).
pub const PROVINCE_NAMES: [(u32, &str); 13] = [
    (48, "Alberta"),
    (59, "British Columbia (BC)"),
    (46, "Manitoba"),
    (13, "New Brunswick"),
    (10, "Newfoundland and Labrador"),
    (12, "Nova Scotia"),
    (62, "Nunavut"),
    (61, "Northwest Territories"),
    (35, "Ontario"),
    (11, "Prince Edward Island"),
    (24, "Quebec"),
    (47, "Saskatchewan"),
    (60, "Yukon"),
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A results page with navigation chrome around a `table.results`.
pub fn html_page() -> String {
    let mut html = String::from(
        "<!DOCTYPE html>\n<html><head><title>Provincial elections</title></head><body>\n\
         <nav><table class=\"menu\"><tr><td>Home</td><td>Elections</td></tr></table></nav>\n\
         <table class=\"results\">\n<thead><tr><th>PRUID</th><th>Province</th><th>Party</th></tr></thead>\n<tbody>\n",
    );
    for (id, province, party) in ROWS {
        html.push_str(&format!(
            "  <tr>\n    <td>{id}</td>\n    <td> {} </td>\n    <td>{}</td>\n  </tr>\n",
            escape(province),
            escape(party)
        ));
    }
    html.push_str("</tbody></table>\n</body></html>\n");
    html
}

/// Square (closed, counter-clockwise) for province `index` on a 5-wide grid
/// of 10×10 cells with unit gaps, in a projected metre-like frame.
pub fn province_square(index: usize) -> Vec<(f64, f64)> {
    let x0 = 1_000_000.0 + 11.0 * (index % 5) as f64;
    let y0 = 2_000_000.0 + 11.0 * (index / 5) as f64;
    vec![(x0, y0), (x0 + 10.0, y0), (x0 + 10.0, y0 + 10.0), (x0, y0 + 10.0), (x0, y0)]
}

/// Irregular ring with `n` distinct vertices (closed), used where vertex
/// counts matter.
pub fn province_blob(index: usize, n: usize) -> Vec<(f64, f64)> {
    let cx = 100.0 * (index % 5) as f64;
    let cy = 100.0 * (index / 5) as f64;
    let mut pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / n as f64;
            let r = 30.0 + 8.0 * ((k * 7 + index * 3) % 11) as f64 / 11.0;
            let x = ((cx + r * t.cos()) * 1e6).round() / 1e6;
            let y = ((cy + r * t.sin()) * 1e6).round() / 1e6;
            (x, y)
        })
        .collect();
    pts.push(pts[0]);
    pts
}

/// 13 province records (one irregular polygon each, `vertices` distinct
/// vertices) with `PRUID` and `PRNAME` attributes.
pub fn province_shapefile(vertices: usize) -> ShapefileFixture {
    let mut fx = ShapefileFixture::new(vec![
        DbfFieldSpec::numeric("PRUID", 2),
        DbfFieldSpec::character("PRNAME", 60),
    ]);
    for (i, (id, name)) in PROVINCE_NAMES.iter().enumerate() {
        // ESRI exteriors are clockwise
        let mut ring = province_blob(i, vertices);
        ring.reverse();
        fx.push_record(vec![ring], vec![id.to_string(), name.to_string()]);
    }
    fx
}

/// GeoJSON FeatureCollection of the 13 grid squares, coordinates at six
/// decimals.
pub fn provinces_geojson() -> String {
    let features: Vec<String> = PROVINCE_NAMES
        .iter()
        .enumerate()
        .map(|(i, (id, name))| {
            let coords: Vec<String> = province_square(i)
                .iter()
                .map(|(x, y)| format!("[{x:.6},{y:.6}]"))
                .collect();
            format!(
                "{{\"type\":\"Feature\",\"properties\":{{\"PRUID\":\"{id}\",\"PRNAME\":\"{name}\"}},\
                 \"geometry\":{{\"type\":\"Polygon\",\"coordinates\":[[{}]]}}}}",
                coords.join(",")
            )
        })
        .collect();
    format!("{{\"type\":\"FeatureCollection\",\"features\":[{}]}}\n", features.join(","))
}
