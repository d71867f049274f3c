//! Writes ESRI Polygon shapefiles and dBASE III tables byte by byte.

#[derive(Debug, Clone)]
pub struct DbfFieldSpec {
    pub name: String,
    pub kind: u8,
    pub len: u8,
}

impl DbfFieldSpec {
    pub fn numeric(name: &str, len: u8) -> Self {
        DbfFieldSpec { name: name.to_string(), kind: b'N', len }
    }

    pub fn character(name: &str, len: u8) -> Self {
        DbfFieldSpec { name: name.to_string(), kind: b'C', len }
    }
}

#[derive(Debug, Clone)]
pub struct FixtureRecord {
    pub rings: Vec<Vec<(f64, f64)>>,
    pub values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ShapefileFixture {
    pub shape_type: i32,
    pub fields: Vec<DbfFieldSpec>,
    pub records: Vec<FixtureRecord>,
    /// Replaces every record's bounding box when set.
    pub bbox_override: Option<[f64; 4]>,
}

fn bbox_of(rings: &[Vec<(f64, f64)>]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for &(x, y) in rings.iter().flatten() {
        b[0] = b[0].min(x);
        b[1] = b[1].min(y);
        b[2] = b[2].max(x);
        b[3] = b[3].max(y);
    }
    b
}

impl ShapefileFixture {
    pub fn new(fields: Vec<DbfFieldSpec>) -> Self {
        ShapefileFixture { shape_type: 5, fields, records: Vec::new(), bbox_override: None }
    }

    pub fn push_record(&mut self, rings: Vec<Vec<(f64, f64)>>, values: Vec<String>) {
        assert_eq!(values.len(), self.fields.len(), "one value per field");
        self.records.push(FixtureRecord { rings, values });
    }

    pub fn record_bbox(&self, i: usize) -> [f64; 4] {
        self.bbox_override.unwrap_or_else(|| bbox_of(&self.records[i].rings))
    }

    /// `(shp, dbf)` bytes.
    pub fn to_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        (self.shp_bytes(), self.dbf_bytes())
    }

    pub fn shp_bytes(&self) -> Vec<u8> {
        let mut body = Vec::new();
        for (i, rec) in self.records.iter().enumerate() {
            let npoints: usize = rec.rings.iter().map(Vec::len).sum();
            let content_len = 4 + 32 + 4 + 4 + 4 * rec.rings.len() + 16 * npoints;
            body.extend_from_slice(&(i as i32 + 1).to_be_bytes());
            body.extend_from_slice(&((content_len / 2) as i32).to_be_bytes());
            body.extend_from_slice(&self.shape_type.to_le_bytes());
            for v in self.record_bbox(i) {
                body.extend_from_slice(&v.to_le_bytes());
            }
            body.extend_from_slice(&(rec.rings.len() as i32).to_le_bytes());
            body.extend_from_slice(&(npoints as i32).to_le_bytes());
            let mut start = 0i32;
            for ring in &rec.rings {
                body.extend_from_slice(&start.to_le_bytes());
                start += ring.len() as i32;
            }
            for &(x, y) in rec.rings.iter().flatten() {
                body.extend_from_slice(&x.to_le_bytes());
                body.extend_from_slice(&y.to_le_bytes());
            }
        }

        let all: Vec<Vec<(f64, f64)>> = self.records.iter().flat_map(|r| r.rings.clone()).collect();
        let file_bbox = if all.is_empty() { [0.0; 4] } else { bbox_of(&all) };
        let mut out = Vec::with_capacity(100 + body.len());
        out.extend_from_slice(&9994i32.to_be_bytes());
        out.extend_from_slice(&[0u8; 20]);
        out.extend_from_slice(&(((100 + body.len()) / 2) as i32).to_be_bytes());
        out.extend_from_slice(&1000i32.to_le_bytes());
        out.extend_from_slice(&self.shape_type.to_le_bytes());
        for v in file_bbox {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&[0u8; 32]); // z and m ranges
        assert_eq!(out.len(), 100);
        out.extend_from_slice(&body);
        out
    }

    pub fn dbf_bytes(&self) -> Vec<u8> {
        let record_len: usize = 1 + self.fields.iter().map(|f| f.len as usize).sum::<usize>();
        let header_len = 32 + 32 * self.fields.len() + 1;
        let mut out = Vec::new();
        out.push(0x03);
        out.extend_from_slice(&[124, 1, 1]);
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        out.extend_from_slice(&(header_len as u16).to_le_bytes());
        out.extend_from_slice(&(record_len as u16).to_le_bytes());
        out.extend_from_slice(&[0u8; 20]);
        for f in &self.fields {
            let mut name = [0u8; 11];
            name[..f.name.len()].copy_from_slice(f.name.as_bytes());
            out.extend_from_slice(&name);
            out.push(f.kind);
            out.extend_from_slice(&[0u8; 4]);
            out.push(f.len);
            out.push(0);
            out.extend_from_slice(&[0u8; 14]);
        }
        out.push(0x0D);
        for rec in &self.records {
            out.push(b' ');
            for (f, v) in self.fields.iter().zip(&rec.values) {
                let bytes = v.as_bytes();
                assert!(bytes.len() <= f.len as usize, "value {v:?} wider than field {}", f.name);
                let pad = f.len as usize - bytes.len();
                if f.kind == b'N' {
                    out.extend(std::iter::repeat_n(b' ', pad));
                    out.extend_from_slice(bytes);
                } else {
                    out.extend_from_slice(bytes);
                    out.extend(std::iter::repeat_n(b' ', pad));
                }
            }
        }
        out.push(0x1A);
        out
    }
}
