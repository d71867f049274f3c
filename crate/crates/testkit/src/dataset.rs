//! A small on-disk dataset: three stored elections plus province boundaries,
//! written without going through the crate under test.

use std::path::{Path, PathBuf};

use crate::table_one::{self, PROVINCE_NAMES};

pub const CSV_HEADER: &str =
    "region_id,region_name,party,votes,vote_share_pct,seats,seat_share_pct,candidates,is_winner";

/// RFC 4180 field quoting.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureRow {
    pub region_id: u32,
    pub region_name: String,
    pub party: String,
    pub votes: Option<u64>,
    pub seats: Option<u32>,
    pub candidates: Option<u32>,
    pub is_winner: bool,
}

pub fn csv_text(rows: &[FixtureRow]) -> String {
    let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = format!("{CSV_HEADER}\r\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},,{},,{},{}\r\n",
            r.region_id,
            csv_field(&r.region_name),
            csv_field(&r.party),
            opt(r.votes),
            opt(r.seats.map(u64::from)),
            opt(r.candidates.map(u64::from)),
            r.is_winner
        ));
    }
    out
}

/// Province-level rows for the 2019 provincial table: one winner per province.
pub fn provincial_2019() -> Vec<FixtureRow> {
    table_one::ROWS
        .iter()
        .map(|&(id, name, party)| FixtureRow {
            region_id: id,
            region_name: name.to_string(),
            party: party.to_string(),
            votes: None,
            seats: None,
            candidates: None,
            is_winner: true,
        })
        .collect()
}

/// Synthetic province-level federal results. `parties` lists
/// `(name, base share)`; seats, votes and candidates follow from a fixed
/// formula so every test sees the same numbers.
pub fn federal(provinces: &[u32], parties: &[(&str, u64)], seats_per_province: u32, salt: u64) -> Vec<FixtureRow> {
    let mut rows = Vec::new();
    for (pi, &pruid) in provinces.iter().enumerate() {
        let name = PROVINCE_NAMES.iter().find(|(id, _)| *id == pruid).map_or("Unknown", |(_, n)| n);
        let votes: Vec<u64> = parties
            .iter()
            .enumerate()
            .map(|(k, &(_, base))| base * 1000 + ((pi as u64 * 37 + k as u64 * 101 + salt * 13) % 400) * 25)
            .collect();
        let total: u64 = votes.iter().sum();
        let mut seats: Vec<u32> = votes
            .iter()
            .map(|v| (v * u64::from(seats_per_province) / total) as u32)
            .collect();
        let top = (0..votes.len()).max_by_key(|&k| (votes[k], std::cmp::Reverse(k))).unwrap();
        let assigned: u32 = seats.iter().sum();
        seats[top] += seats_per_province - assigned;
        for (k, &(party, _)) in parties.iter().enumerate() {
            rows.push(FixtureRow {
                region_id: pruid,
                region_name: name.to_string(),
                party: party.to_string(),
                votes: Some(votes[k]),
                seats: Some(seats[k]),
                candidates: Some(seats_per_province),
                is_winner: k == top,
            });
        }
    }
    rows
}

pub fn federal_1867() -> Vec<FixtureRow> {
    federal(&[35, 24, 12, 13], &[("Conservative", 60), ("Liberal", 45), ("Anti-Confederation", 10)], 12, 1)
}

pub fn federal_1963() -> Vec<FixtureRow> {
    federal(
        &[10, 11, 12, 13, 24, 35, 46, 47, 48, 59, 60, 61],
        &[("Liberal", 55), ("Progressive Conservative", 50), ("Social Credit", 15), ("New Democratic Party", 20)],
        22,
        2,
    )
}

pub struct FixtureDataset {
    pub data_dir: PathBuf,
    pub provinces_geojson: PathBuf,
}

/// Writes `data/{federal_1867,federal_1963,provincial_2019}.csv` and
/// `geometry/provinces.geojson` under `root`.
pub fn write_fixture_dataset(root: &Path) -> std::io::Result<FixtureDataset> {
    let data_dir = root.join("data");
    let geom_dir = root.join("geometry");
    std::fs::create_dir_all(&data_dir)?;
    std::fs::create_dir_all(&geom_dir)?;
    std::fs::write(data_dir.join("federal_1867.csv"), csv_text(&federal_1867()))?;
    std::fs::write(data_dir.join("federal_1963.csv"), csv_text(&federal_1963()))?;
    std::fs::write(data_dir.join("provincial_2019.csv"), csv_text(&provincial_2019()))?;
    let provinces_geojson = geom_dir.join("provinces.geojson");
    std::fs::write(&provinces_geojson, table_one::provinces_geojson())?;
    Ok(FixtureDataset { data_dir, provinces_geojson })
}
