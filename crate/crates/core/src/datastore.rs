//! CSV persistence for election rows and the catalog that indexes the files.
//!
//! Files are named `<election-type>_<year>.csv`, with a `_cd` suffix for
//! census-division level results, and carry the fixed header
//! [`CSV_HEADER`]. Absent numeric fields are written as empty cells.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;
use tracing::warn;

use crate::model::{ElectionResultRow, ElectionType, RegionLevel};

pub const CSV_HEADER: [&str; 9] = [
    "region_id",
    "region_name",
    "party",
    "votes",
    "vote_share_pct",
    "seats",
    "seat_share_pct",
    "candidates",
    "is_winner",
];

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to write an empty result set to {0}")]
    RefusedEmpty(PathBuf),
    #[error("{path}: header {found:?} does not match the expected column layout")]
    HeaderMismatch { path: PathBuf, found: Vec<String> },
    #[error("{path}:{line}: {message}")]
    RowParse { path: PathBuf, line: u64, message: String },
    #[error("{} and {} both hold {election_type} {year} ({level})", first.display(), second.display())]
    DuplicateEntry {
        election_type: ElectionType,
        year: i32,
        level: RegionLevel,
        first: PathBuf,
        second: PathBuf,
    },
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

pub fn file_name(election_type: ElectionType, year: i32, level: RegionLevel) -> String {
    match level {
        RegionLevel::Province => format!("{election_type}_{year}.csv"),
        RegionLevel::CensusDivision => format!("{election_type}_{year}_cd.csv"),
    }
}

/// Inverse of [`file_name`]. Election type matching is case-insensitive; the
/// year must be four digits.
pub fn parse_file_name(name: &str) -> Option<(ElectionType, i32, RegionLevel)> {
    let stem = name.strip_suffix(".csv")?;
    let (stem, level) = match stem.strip_suffix("_cd") {
        Some(s) => (s, RegionLevel::CensusDivision),
        None => (stem, RegionLevel::Province),
    };
    let (kind, year) = stem.rsplit_once('_')?;
    if year.len() != 4 || !year.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((kind.parse().ok()?, year.parse().ok()?, level))
}

fn file_lock(path: &Path) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<PathBuf, Arc<Mutex<()>>>>> = OnceLock::new();
    LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(path.to_path_buf())
        .or_default()
        .clone()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn encode(rows: &[ElectionResultRow]) -> std::result::Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.region_id.to_string(),
            r.region_name.clone(),
            r.party.clone(),
            opt(&r.votes),
            opt(&r.vote_share_pct),
            opt(&r.seats),
            opt(&r.seat_share_pct),
            opt(&r.candidates),
            r.is_winner.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Writes `rows` to `<root>/<type>_<year>[_cd].csv` and returns the path.
/// The file is replaced atomically; concurrent writers of the same file in
/// this process are serialized.
pub fn write_election_csv(
    rows: &[ElectionResultRow],
    election_type: ElectionType,
    year: i32,
    level: RegionLevel,
    root: &Path,
    allow_empty: bool,
) -> Result<PathBuf> {
    let path = root.join(file_name(election_type, year, level));
    if rows.is_empty() && !allow_empty {
        return Err(StoreError::RefusedEmpty(path));
    }
    let bytes = encode(rows).map_err(|e| StoreError::Io { path: path.clone(), source: e.into() })?;

    let lock = file_lock(&path);
    let _guard = lock.lock().unwrap();
    fs::create_dir_all(root).map_err(io_err(root))?;
    let tmp = path.with_extension("csv.tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(&bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    path: &Path,
    line: u64,
) -> Result<Option<T>> {
    let raw = &rec[idx];
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| StoreError::RowParse {
        path: path.to_path_buf(),
        line,
        message: format!("{}: cannot parse {raw:?}", CSV_HEADER[idx]),
    })
}

/// Reads a file written by [`write_election_csv`].
pub fn read_election_csv(path: &Path) -> Result<Vec<ElectionResultRow>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode(&bytes, path)
}

fn decode(bytes: &[u8], path: &Path) -> Result<Vec<ElectionResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = rdr.headers().map_err(|e| StoreError::RowParse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(StoreError::HeaderMismatch {
            path: path.to_path_buf(),
            found: header.iter().map(String::from).collect(),
        });
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| StoreError::RowParse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| StoreError::RowParse { path: path.to_path_buf(), line, message };
        let region_id = field::<u32>(&rec, 0, path, line)?
            .filter(|&id| id > 0)
            .ok_or_else(|| bad("region_id must be a positive integer".into()))?;
        let is_winner = match &rec[8] {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("is_winner: expected true/false, got {other:?}"))),
        };
        let row = ElectionResultRow {
            region_id,
            region_name: rec[1].to_string(),
            party: rec[2].to_string(),
            votes: field(&rec, 3, path, line)?,
            vote_share_pct: field(&rec, 4, path, line)?,
            seats: field(&rec, 5, path, line)?,
            seat_share_pct: field(&rec, 6, path, line)?,
            candidates: field(&rec, 7, path, line)?,
            is_winner,
        };
        row.validate().map_err(|e| bad(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub election_type: ElectionType,
    pub year: i32,
    pub region_level: RegionLevel,
    pub path: PathBuf,
    pub row_count: usize,
    #[serde(skip)]
    pub rows: Arc<Vec<ElectionResultRow>>,
}

impl CatalogEntry {
    pub fn new(
        election_type: ElectionType,
        year: i32,
        region_level: RegionLevel,
        rows: Vec<ElectionResultRow>,
    ) -> Self {
        CatalogEntry {
            election_type,
            year,
            region_level,
            path: PathBuf::from(file_name(election_type, year, region_level)),
            row_count: rows.len(),
            rows: Arc::new(rows),
        }
    }

    pub fn key(&self) -> (ElectionType, i32, RegionLevel) {
        (self.election_type, self.year, self.region_level)
    }
}

/// Index of every stored election. Entries hold their parsed rows, so a
/// catalog is an immutable snapshot of the data directory.
#[derive(Debug, Clone, Default, Serialize)]
#[serde(transparent)]
pub struct ElectionCatalog {
    entries: Vec<CatalogEntry>,
}

impl ElectionCatalog {
    /// Builds a catalog from in-memory entries, enforcing key uniqueness and
    /// the (type, year, level) ordering.
    pub fn from_entries(entries: Vec<CatalogEntry>) -> Result<Self> {
        let mut by_key: BTreeMap<(ElectionType, i32, RegionLevel), CatalogEntry> = BTreeMap::new();
        for e in entries {
            if let Some(prev) = by_key.get(&e.key()) {
                return Err(StoreError::DuplicateEntry {
                    election_type: e.election_type,
                    year: e.year,
                    level: e.region_level,
                    first: prev.path.clone(),
                    second: e.path.clone(),
                });
            }
            by_key.insert(e.key(), e);
        }
        Ok(ElectionCatalog { entries: by_key.into_values().collect() })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, election_type: ElectionType, year: i32, level: RegionLevel) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.key() == (election_type, year, level))
    }

    /// The entry used for national analytics of one election: province level
    /// when stored, otherwise census-division level.
    pub fn primary(&self, election_type: ElectionType, year: i32) -> Option<&CatalogEntry> {
        self.get(election_type, year, RegionLevel::Province)
            .or_else(|| self.get(election_type, year, RegionLevel::CensusDivision))
    }

    /// One entry per election year of `election_type` (see [`Self::primary`]),
    /// ascending by year.
    pub fn elections(&self, election_type: ElectionType) -> Vec<&CatalogEntry> {
        let mut years: Vec<i32> = self
            .entries
            .iter()
            .filter(|e| e.election_type == election_type)
            .map(|e| e.year)
            .collect();
        years.dedup();
        years.into_iter().filter_map(|y| self.primary(election_type, y)).collect()
    }
}

/// Scans `root` for files following the naming convention and parses each.
/// Other files are skipped with a warning.
pub fn build_catalog(root: &Path) -> Result<ElectionCatalog> {
    let mut names: Vec<(String, PathBuf)> = Vec::new();
    for item in fs::read_dir(root).map_err(io_err(root))? {
        let item = item.map_err(io_err(root))?;
        let path = item.path();
        if !path.is_file() {
            continue;
        }
        names.push((item.file_name().to_string_lossy().into_owned(), path));
    }
    names.sort();

    let mut entries = Vec::new();
    for (name, path) in names {
        let Some((election_type, year, level)) = parse_file_name(&name.to_ascii_lowercase()) else {
            warn!(file = %path.display(), "ignoring file that does not follow <type>_<year>[_cd].csv");
            continue;
        };
        let rows = read_election_csv(&path)?;
        entries.push(CatalogEntry {
            election_type,
            year,
            region_level: level,
            path,
            row_count: rows.len(),
            rows: Arc::new(rows),
        });
    }
    ElectionCatalog::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ElectionResultRow> {
        let mut a = ElectionResultRow::new(24, "Quebec (Oct 1, '18)", "Coalition Avenir Québec, L'équipe \"CAQ\"");
        a.votes = Some(1_509_455);
        a.vote_share_pct = Some(37.42);
        a.seats = Some(74);
        a.is_winner = true;
        let b = ElectionResultRow::new(35, "Ontario", "Progressive Conservative Party of Ontario");
        vec![a, b]
    }

    #[test]
    fn names() {
        assert_eq!(file_name(ElectionType::Provincial, 2019, RegionLevel::Province), "provincial_2019.csv");
        assert_eq!(file_name(ElectionType::Federal, 1963, RegionLevel::CensusDivision), "federal_1963_cd.csv");
        assert_eq!(parse_file_name("federal_1963_cd.csv"), Some((ElectionType::Federal, 1963, RegionLevel::CensusDivision)));
        assert_eq!(parse_file_name("federal_63.csv"), None);
        assert_eq!(parse_file_name("notes.txt"), None);
        assert_eq!(parse_file_name("municipal_2019.csv"), None);
    }

    #[test]
    fn exact_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_election_csv(&sample(), ElectionType::Provincial, 2018, RegionLevel::Province, dir.path(), false).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(
            text,
            "region_id,region_name,party,votes,vote_share_pct,seats,seat_share_pct,candidates,is_winner\r\n\
             24,\"Quebec (Oct 1, '18)\",\"Coalition Avenir Québec, L'équipe \"\"CAQ\"\"\",1509455,37.42,74,,,true\r\n\
             35,Ontario,Progressive Conservative Party of Ontario,,,,,,false\r\n"
        );
    }

    #[test]
    fn round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample();
        let p = write_election_csv(&rows, ElectionType::Provincial, 2018, RegionLevel::Province, dir.path(), false).unwrap();
        assert_eq!(read_election_csv(&p).unwrap(), rows);

        let err = write_election_csv(&[], ElectionType::Federal, 1867, RegionLevel::Province, dir.path(), false);
        assert!(matches!(err, Err(StoreError::RefusedEmpty(_))));
        let p = write_election_csv(&[], ElectionType::Federal, 1867, RegionLevel::Province, dir.path(), true).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);
        assert!(read_election_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn shuffled_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("federal_1963.csv");
        fs::write(&p, "region_name,region_id,party,votes,vote_share_pct,seats,seat_share_pct,candidates,is_winner\n").unwrap();
        assert!(matches!(read_election_csv(&p), Err(StoreError::HeaderMismatch { .. })));
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("federal_1963.csv");
        let header = CSV_HEADER.join(",");
        fs::write(&p, format!("{header}\n10,A,P,,,,,,true\n11,B,Q,12x,,,,,false\n")).unwrap();
        match read_election_csv(&p) {
            Err(StoreError::RowParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, format!("{header}\n10,A,P,,,,,,maybe\n")).unwrap();
        assert!(matches!(read_election_csv(&p), Err(StoreError::RowParse { line: 2, .. })));
        fs::write(&p, format!("{header}\n10,A,P,,101,,,,true\n")).unwrap();
        assert!(matches!(read_election_csv(&p), Err(StoreError::RowParse { .. })));
    }

    #[test]
    fn catalog_listing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(build_catalog(dir.path()).unwrap().is_empty());
        let rows = sample();
        for (t, y) in [(ElectionType::Provincial, 2019), (ElectionType::Federal, 1963), (ElectionType::Federal, 1867)] {
            write_election_csv(&rows, t, y, RegionLevel::Province, dir.path(), false).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "hello").unwrap();
        let cat = build_catalog(dir.path()).unwrap();
        let keys: Vec<_> = cat.entries().iter().map(|e| (e.election_type, e.year)).collect();
        assert_eq!(
            keys,
            [(ElectionType::Federal, 1867), (ElectionType::Federal, 1963), (ElectionType::Provincial, 2019)]
        );
        assert!(cat.entries().iter().all(|e| e.row_count == 2));
    }

    #[test]
    fn catalog_duplicates_name_both_paths() {
        let dir = tempfile::tempdir().unwrap();
        let rows = sample();
        write_election_csv(&rows, ElectionType::Federal, 1963, RegionLevel::Province, dir.path(), false).unwrap();
        fs::copy(dir.path().join("federal_1963.csv"), dir.path().join("Federal_1963.csv")).unwrap();
        match build_catalog(dir.path()) {
            Err(StoreError::DuplicateEntry { first, second, .. }) => {
                let names = [first, second].map(|p| p.file_name().unwrap().to_string_lossy().into_owned());
                assert!(names.contains(&"federal_1963.csv".to_string()));
                assert!(names.contains(&"Federal_1963.csv".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn primary_prefers_province_level() {
        let rows = sample();
        let cat = ElectionCatalog::from_entries(vec![
            CatalogEntry::new(ElectionType::Federal, 1963, RegionLevel::CensusDivision, rows.clone()),
            CatalogEntry::new(ElectionType::Federal, 1963, RegionLevel::Province, rows.clone()),
            CatalogEntry::new(ElectionType::Federal, 1965, RegionLevel::CensusDivision, rows),
        ])
        .unwrap();
        let picked: Vec<_> = cat.elections(ElectionType::Federal).iter().map(|e| (e.year, e.region_level)).collect();
        assert_eq!(picked, [(1963, RegionLevel::Province), (1965, RegionLevel::CensusDivision)]);
    }
}
