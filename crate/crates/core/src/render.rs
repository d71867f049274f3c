//! Choropleth maps as standalone SVG 1.1 documents.
//!
//! Regions are painted with their winning party's colour; a legend lists the
//! parties alphabetically. Output is a pure function of its inputs, so two
//! renders of the same data are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::geometry::{BBox, FeatureSet, RegionFeature};
use crate::join::JoinedRegion;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("nothing to render")]
    EmptyInput,
    #[error("map size {width}x{height} is below the 64x64 minimum")]
    TooSmall { width: u32, height: u32 },
    #[error("no parties to colour")]
    NoParties,
    #[error("override colour {color} is pinned to both {first:?} and {second:?}")]
    DuplicateOverrideColor { color: Color, first: String, second: String },
    #[error("invalid colour {0:?}, expected #RRGGBB")]
    InvalidColor(String),
    #[error("party {0:?} has no colour in the palette")]
    UnknownParty(String),
    #[error("overrides file: {0}")]
    Overrides(String),
}

/// An sRGB colour, written as lowercase `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Color(pub [u8; 3]);

impl Color {
    pub const fn rgb(hex: u32) -> Self {
        Color([(hex >> 16) as u8, (hex >> 8) as u8, hex as u8])
    }

    fn mix(self, toward: [u8; 3], f: f64) -> Self {
        let c = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * f).round() as u8;
        Color([c(self.0[0], toward[0]), c(self.0[1], toward[1]), c(self.0[2], toward[2])])
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Color {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.trim().strip_prefix('#').filter(|h| h.len() == 6 && h.bytes().all(|b| b.is_ascii_hexdigit()));
        hex.and_then(|h| u32::from_str_radix(h, 16).ok())
            .map(Color::rgb)
            .ok_or_else(|| RenderError::InvalidColor(s.to_string()))
    }
}

impl serde::Serialize for Color {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Fixed 20-colour categorical cycle.
pub const CATEGORICAL: [Color; 20] = [
    Color::rgb(0x1f77b4),
    Color::rgb(0xff7f0e),
    Color::rgb(0x2ca02c),
    Color::rgb(0xd62728),
    Color::rgb(0x9467bd),
    Color::rgb(0x8c564b),
    Color::rgb(0xe377c2),
    Color::rgb(0x7f7f7f),
    Color::rgb(0xbcbd22),
    Color::rgb(0x17becf),
    Color::rgb(0xaec7e8),
    Color::rgb(0xffbb78),
    Color::rgb(0x98df8a),
    Color::rgb(0xff9896),
    Color::rgb(0xc5b0d5),
    Color::rgb(0xc49c94),
    Color::rgb(0xf7b6d2),
    Color::rgb(0xc7c7c7),
    Color::rgb(0xdbdb8d),
    Color::rgb(0x9edae5),
];

/// Fill for regions drawn without results.
pub const NEUTRAL: Color = Color::rgb(0xd9d9d9);

/// Colour for cycle slot `k`: the base colour on the first pass, then
/// alternately lightened and darkened by growing amounts.
fn cycle_color(k: usize) -> Color {
    let base = CATEGORICAL[k % CATEGORICAL.len()];
    let wrap = k / CATEGORICAL.len();
    if wrap == 0 {
        return base;
    }
    let step = wrap.div_ceil(2) as f64;
    let f = 1.0 - 0.7f64.powf(step);
    if wrap % 2 == 1 {
        base.mix([255, 255, 255], f * 0.8)
    } else {
        base.mix([0, 0, 0], f * 0.8)
    }
}

/// Case-insensitive alphabetical order, exact string as tiebreak.
pub fn canonical_party_order<'a>(parties: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let set: BTreeSet<&str> = parties.into_iter().collect();
    let mut v: Vec<&str> = set.into_iter().collect();
    v.sort_by(|a, b| a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b)));
    v
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Palette {
    assignments: BTreeMap<String, Color>,
    overrides: BTreeMap<String, Color>,
}

impl Palette {
    pub fn get(&self, party: &str) -> Option<Color> {
        self.assignments.get(party).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, Color> {
        &self.assignments
    }

    pub fn overrides(&self) -> &BTreeMap<String, Color> {
        &self.overrides
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Parses an overrides file: a TOML table of `"Party name" = "#RRGGBB"`.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, Color>, RenderError> {
    let table: BTreeMap<String, String> = toml::from_str(text).map_err(|e| RenderError::Overrides(e.to_string()))?;
    table.into_iter().map(|(party, hex)| Ok((party, hex.parse()?))).collect()
}

/// Gives every party a distinct colour. Overrides win; the rest take cycle
/// colours in canonical (case-insensitive alphabetical) order, skipping any
/// colour already taken.
pub fn assign_party_colors<S: AsRef<str>>(
    parties: &[S],
    overrides: &BTreeMap<String, Color>,
) -> Result<Palette, RenderError> {
    let mut owner: BTreeMap<Color, &str> = BTreeMap::new();
    for (party, color) in overrides {
        if let Some(first) = owner.insert(*color, party) {
            return Err(RenderError::DuplicateOverrideColor {
                color: *color,
                first: first.to_string(),
                second: party.clone(),
            });
        }
    }
    let order = canonical_party_order(parties.iter().map(AsRef::as_ref));
    if order.is_empty() {
        return Err(RenderError::NoParties);
    }

    let mut used: BTreeSet<Color> = overrides.values().copied().collect();
    let mut assignments = BTreeMap::new();
    let mut slot = 0usize;
    for party in order {
        let color = match overrides.get(party) {
            Some(c) => *c,
            None => {
                let mut c = cycle_color(slot);
                slot += 1;
                let mut guard = 0;
                while used.contains(&c) {
                    c = if guard < 400 { cycle_color(slot) } else { Color::rgb(0x01_01_01 * (guard as u32 % 255)) };
                    slot += 1;
                    guard += 1;
                    if guard > 400 + 255 {
                        // every remaining colour would be a collision; walk the
                        // 24-bit space instead
                        c = (0..=0xff_ffffu32).map(Color::rgb).find(|c| !used.contains(c)).expect("colour space exhausted");
                    }
                }
                c
            }
        };
        used.insert(color);
        assignments.insert(party.to_string(), color);
    }
    Ok(Palette { assignments, overrides: overrides.clone() })
}

pub const MIN_SIZE: u32 = 64;
const MARGIN: f64 = 0.02;

/// Maps data coordinates (y up) into a pixel rectangle (y down), fitting the
/// bounding box grown by a 2% margin on each side and preserving aspect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapFrame {
    x0: f64,
    y1: f64,
    scale: f64,
    ox: f64,
    oy: f64,
}

impl MapFrame {
    pub fn fit(bbox: BBox<f64>, area_width: f64, area_height: f64) -> Self {
        let dx = bbox.width();
        let dy = bbox.height();
        let pad_x = if dx > 0.0 { dx * MARGIN } else { dy.max(1.0) * MARGIN };
        let pad_y = if dy > 0.0 { dy * MARGIN } else { dx.max(1.0) * MARGIN };
        let (x0, x1) = (bbox.xmin - pad_x, bbox.xmax + pad_x);
        let (y0, y1) = (bbox.ymin - pad_y, bbox.ymax + pad_y);
        let scale = (area_width / (x1 - x0)).min(area_height / (y1 - y0));
        MapFrame {
            x0,
            y1,
            scale,
            ox: (area_width - scale * (x1 - x0)) / 2.0,
            oy: (area_height - scale * (y1 - y0)) / 2.0,
        }
    }

    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        [self.ox + (p[0] - self.x0) * self.scale, self.oy + (self.y1 - p[1]) * self.scale]
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Width of the legend column for a map of `width` pixels.
pub fn legend_width(width: u32) -> f64 {
    (f64::from(width) * 0.3).round()
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn path_data<T: Scalar>(feature: &RegionFeature<T>, frame: &MapFrame) -> String {
    let mut d = String::new();
    for ring in feature.rings() {
        let pts = ring.points();
        for (i, p) in pts[..pts.len() - 1].iter().enumerate() {
            let [x, y] = frame.project([p[0].to_f64_lossy(), p[1].to_f64_lossy()]);
            let _ = write!(d, "{}{x:.2} {y:.2}", if i == 0 { "M" } else { " L" });
        }
        d.push_str(" Z ");
    }
    d.truncate(d.trim_end().len());
    d
}

struct Shape<'a, T> {
    feature: &'a RegionFeature<T>,
    winner: Option<(&'a str, Color)>,
}

fn render_shapes<T: Scalar>(shapes: &[Shape<'_, T>], legend: &[(&str, Color)], width: u32, height: u32) -> Result<String, RenderError> {
    if shapes.is_empty() {
        return Err(RenderError::EmptyInput);
    }
    if width < MIN_SIZE || height < MIN_SIZE {
        return Err(RenderError::TooSmall { width, height });
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let legend_w = if legend.is_empty() { 0.0 } else { legend_width(width) };
    let bbox = shapes
        .iter()
        .map(|s| s.feature.bbox())
        .reduce(|a, b| a.union(&b))
        .expect("non-empty");
    let bbox = BBox {
        xmin: bbox.xmin.to_f64_lossy(),
        ymin: bbox.ymin.to_f64_lossy(),
        xmax: bbox.xmax.to_f64_lossy(),
        ymax: bbox.ymax.to_f64_lossy(),
    };
    let frame = MapFrame::fit(bbox, w - legend_w, h);

    let mut svg = String::new();
    let _ = writeln!(svg, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(svg, "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>");
    let _ = writeln!(svg, "<g class=\"regions\" stroke=\"#ffffff\" stroke-width=\"0.5\" fill-rule=\"evenodd\">");
    for s in shapes {
        let f = s.feature;
        let d = path_data(f, &frame);
        match s.winner {
            Some((party, color)) => {
                let _ = writeln!(
                    svg,
                    "<path class=\"region\" d=\"{d}\" fill=\"{color}\" data-region-id=\"{}\" data-winner=\"{}\" data-name=\"{}\"><title>{} \u{2014} {}</title></path>",
                    f.region_id,
                    escape(party),
                    escape(&f.region_name),
                    escape(&f.region_name),
                    escape(party)
                );
            }
            None => {
                let _ = writeln!(
                    svg,
                    "<path class=\"region\" d=\"{d}\" fill=\"{NEUTRAL}\" data-region-id=\"{}\" data-name=\"{}\"><title>{}</title></path>",
                    f.region_id,
                    escape(&f.region_name),
                    escape(&f.region_name)
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");

    if !legend.is_empty() {
        let pad = (legend_w * 0.05).min(8.0);
        let x = w - legend_w + pad;
        let row_h = ((h - 16.0) / legend.len() as f64).min(20.0);
        let swatch = (row_h * 0.7).min(legend_w * 0.3);
        let font = (row_h * 0.6).max(1.0);
        let _ = writeln!(svg, "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"{font:.2}\">");
        for (i, (party, color)) in legend.iter().enumerate() {
            let y = 8.0 + i as f64 * row_h;
            let _ = writeln!(
                svg,
                "<g class=\"legend-entry\" data-party=\"{p}\"><rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{swatch:.2}\" height=\"{swatch:.2}\" fill=\"{color}\"/><text x=\"{tx:.2}\" y=\"{ty:.2}\">{p}</text></g>",
                p = escape(party),
                tx = x + swatch + pad,
                ty = y + swatch * 0.85,
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Colours each joined region by its winner and adds an alphabetical legend.
pub fn render_choropleth<T: Scalar>(
    regions: &[JoinedRegion<T>],
    palette: &Palette,
    width_px: u32,
    height_px: u32,
) -> Result<String, RenderError> {
    render_map(regions, &[], palette, width_px, height_px)
}

/// Like [`render_choropleth`], with `unmatched` regions drawn in neutral grey
/// underneath so the map keeps its full outline.
pub fn render_map<T: Scalar>(
    regions: &[JoinedRegion<T>],
    unmatched: &[RegionFeature<T>],
    palette: &Palette,
    width_px: u32,
    height_px: u32,
) -> Result<String, RenderError> {
    let mut shapes: Vec<Shape<'_, T>> = unmatched.iter().map(|f| Shape { feature: f, winner: None }).collect();
    for r in regions {
        let color = palette.get(&r.winner_party).ok_or_else(|| RenderError::UnknownParty(r.winner_party.clone()))?;
        shapes.push(Shape { feature: &r.feature, winner: Some((&r.winner_party, color)) });
    }
    let legend: Vec<(&str, Color)> = canonical_party_order(regions.iter().map(|r| r.winner_party.as_str()))
        .into_iter()
        .map(|p| (p, palette.get(p).expect("checked above")))
        .collect();
    render_shapes(&shapes, &legend, width_px, height_px)
}

/// Every region in neutral grey, no legend.
pub fn render_uncolored<T: Scalar>(fs: &FeatureSet<T>, width_px: u32, height_px: u32) -> Result<String, RenderError> {
    let shapes: Vec<Shape<'_, T>> = fs.features().iter().map(|f| Shape { feature: f, winner: None }).collect();
    render_shapes(&shapes, &[], width_px, height_px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ring;
    use crate::join::WinnerMetrics;
    use crate::model::RegionLevel;

    fn joined(id: u32, name: &str, party: &str, x: f64) -> JoinedRegion<f64> {
        let ring = Ring::from_tuples(&[(x, 0.0), (x + 1.0, 0.0), (x + 1.0, 1.0), (x, 1.0), (x, 0.0)]).unwrap();
        JoinedRegion {
            feature: RegionFeature::from_rings(id, name, vec![ring]).unwrap(),
            winner_party: party.into(),
            metrics: WinnerMetrics::default(),
        }
    }

    #[test]
    fn colors_parse_and_print() {
        assert_eq!("#1F77B4".parse::<Color>().unwrap(), CATEGORICAL[0]);
        assert_eq!(CATEGORICAL[0].to_string(), "#1f77b4");
        assert!("1f77b4".parse::<Color>().is_err());
        assert!("#12345".parse::<Color>().is_err());
        assert!("#12345g".parse::<Color>().is_err());
    }

    #[test]
    fn single_party_takes_first_cycle_color() {
        let p = assign_party_colors(&["A"], &BTreeMap::new()).unwrap();
        assert_eq!(p.get("A"), Some(CATEGORICAL[0]));
        assert_eq!(assign_party_colors::<&str>(&[], &BTreeMap::new()), Err(RenderError::NoParties));
    }

    #[test]
    fn overrides_first_and_never_reused() {
        let mut o = BTreeMap::new();
        o.insert("Liberal".to_string(), CATEGORICAL[0]);
        let p = assign_party_colors(&["Conservative", "Liberal"], &o).unwrap();
        assert_eq!(p.get("Liberal"), Some(CATEGORICAL[0]));
        assert_eq!(p.get("Conservative"), Some(CATEGORICAL[1]));
        o.insert("NDP".to_string(), CATEGORICAL[0]);
        assert!(matches!(assign_party_colors(&["NDP"], &o), Err(RenderError::DuplicateOverrideColor { .. })));
    }

    #[test]
    fn many_parties_stay_distinct() {
        let parties: Vec<String> = (0..150).map(|i| format!("Party {i:03}")).collect();
        let p = assign_party_colors(&parties, &BTreeMap::new()).unwrap();
        let distinct: BTreeSet<Color> = p.assignments().values().copied().collect();
        assert_eq!(distinct.len(), 150);
    }

    #[test]
    fn order_is_canonicalized() {
        let a = assign_party_colors(&["b", "A", "c"], &BTreeMap::new()).unwrap();
        let b = assign_party_colors(&["c", "b", "A", "b"], &BTreeMap::new()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get("A"), Some(CATEGORICAL[0]));
    }

    #[test]
    fn overrides_file() {
        let o = parse_overrides("\"Liberal Party\" = \"#D71920\"\nNDP = \"#f37021\"\n").unwrap();
        assert_eq!(o["Liberal Party"], Color::rgb(0xd71920));
        assert!(parse_overrides("x = \"red\"").is_err());
        assert!(parse_overrides("x = ").is_err());
    }

    #[test]
    fn unit_square_fills_the_map_area() {
        let regions = vec![joined(48, "Alberta", "UCP", 0.0)];
        let palette = assign_party_colors(&["UCP"], &BTreeMap::new()).unwrap();
        let svg = render_choropleth(&regions, &palette, 400, 300).unwrap();
        assert_eq!(svg.matches("<path").count(), 1);
        // map area is 280x300; a 1.04-wide box scales to 280/1.04
        let s = 280.0 / 1.04;
        let ox = 0.0;
        let oy = (300.0 - s * 1.04) / 2.0;
        let expect = |x: f64, y: f64| format!("{:.2} {:.2}", ox + (x + 0.02) * s, oy + (1.02 - y) * s);
        let d = format!(
            "M{} L{} L{} L{} Z",
            expect(0.0, 0.0),
            expect(1.0, 0.0),
            expect(1.0, 1.0),
            expect(0.0, 1.0)
        );
        assert!(svg.contains(&format!("d=\"{d}\"")), "{svg}");
        assert!(svg.contains("data-region-id=\"48\" data-winner=\"UCP\""));
        assert!(svg.contains("<title>Alberta \u{2014} UCP</title>"));
    }

    #[test]
    fn legend_and_escaping() {
        let regions = vec![
            joined(24, "Quebec", "Coalition Avenir Québec - L'équipe", 0.0),
            joined(35, "Ontario", "PC & co", 2.0),
            joined(46, "Manitoba", "PC & co", 4.0),
        ];
        let parties: Vec<&str> = regions.iter().map(|r| r.winner_party.as_str()).collect();
        let palette = assign_party_colors(&parties, &BTreeMap::new()).unwrap();
        let svg = render_choropleth(&regions, &palette, 640, 480).unwrap();
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        assert!(svg.contains("L&apos;équipe"));
        assert!(svg.contains("PC &amp; co"));
        let first = svg.find("data-party=\"Coalition").unwrap();
        let second = svg.find("data-party=\"PC").unwrap();
        assert!(first < second);
    }

    #[test]
    fn errors() {
        let palette = assign_party_colors(&["A"], &BTreeMap::new()).unwrap();
        assert_eq!(render_choropleth::<f64>(&[], &palette, 640, 480), Err(RenderError::EmptyInput));
        let r = vec![joined(48, "Alberta", "A", 0.0)];
        assert_eq!(render_choropleth(&r, &palette, 63, 480), Err(RenderError::TooSmall { width: 63, height: 480 }));
        let r = vec![joined(48, "Alberta", "B", 0.0)];
        assert_eq!(render_choropleth(&r, &palette, 640, 480), Err(RenderError::UnknownParty("B".into())));
    }

    #[test]
    fn uncolored_mode() {
        let fs = FeatureSet::new(
            RegionLevel::Province,
            vec![joined(48, "Alberta", "A", 0.0).feature, joined(59, "BC", "A", 2.0).feature],
        )
        .unwrap();
        let svg = render_uncolored(&fs, 200, 100).unwrap();
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches(&format!("fill=\"{NEUTRAL}\"")).count(), 2);
        assert!(!svg.contains("legend"));
    }
}
