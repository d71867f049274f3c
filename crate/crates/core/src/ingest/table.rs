use std::collections::HashMap;

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{IngestError, Result};
use crate::model::ElectionResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    ProvinceLevel,
    DistrictLevel,
    PartySummary,
}

/// Which element on a page holds the results table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSelector {
    #[serde(default = "default_element")]
    pub element: String,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(default)]
    pub id: Option<String>,
}

fn default_element() -> String {
    "table".to_string()
}

impl Default for TableSelector {
    fn default() -> Self {
        TableSelector { element: default_element(), class: None, id: None }
    }
}

impl TableSelector {
    pub fn with_class(class: &str) -> Self {
        TableSelector { class: Some(class.to_string()), ..Default::default() }
    }

    pub fn css(&self) -> String {
        let mut css = self.element.clone();
        if let Some(id) = &self.id {
            css.push('#');
            css.push_str(id);
        }
        if let Some(class) = &self.class {
            for c in class.split_whitespace() {
                css.push('.');
                css.push_str(c);
            }
        }
        css
    }

    fn compile(&self) -> Result<Selector> {
        let css = self.css();
        Selector::parse(&css).map_err(|_| IngestError::BadSelector(css.clone()))
    }
}

/// A results table lifted out of a page: header plus string cells, every row
/// exactly as wide as the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub kind: TableKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub source_url: String,
}

impl RawTable {
    /// Builds a table, padding short rows and truncating long ones to the
    /// header width.
    pub fn new(kind: TableKind, header: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        let width = header.len();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                if row.len() < width {
                    warn!(row = i, cells = row.len(), width, "padding short table row");
                    row.resize(width, String::new());
                } else if row.len() > width {
                    warn!(row = i, cells = row.len(), width, "truncating long table row");
                    row.truncate(width);
                }
                row
            })
            .collect();
        RawTable { kind, header, rows, source_url: String::new() }
    }

    pub fn with_source(mut self, url: impl Into<String>) -> Self {
        self.source_url = url.into();
        self
    }
}

fn cell_text(cell: ElementRef<'_>) -> String {
    let text: String = cell.text().collect();
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Direct `td`/`th` children of a row, with a flag telling whether all of them
/// were `th`.
fn row_cells(row: ElementRef<'_>) -> (Vec<String>, bool) {
    let mut all_th = true;
    let cells = row
        .children()
        .filter_map(ElementRef::wrap)
        .filter(|c| {
            let name = c.value().name();
            all_th &= name == "th";
            name == "td" || name == "th"
        })
        .map(cell_text)
        .collect();
    (cells, all_th)
}

/// Rows of `table` that belong to it rather than to a nested table.
fn own_rows(table: ElementRef<'_>) -> Vec<ElementRef<'_>> {
    let mut out = Vec::new();
    for child in table.children().filter_map(ElementRef::wrap) {
        match child.value().name() {
            "tr" => out.push(child),
            "thead" | "tbody" | "tfoot" => out.extend(
                child
                    .children()
                    .filter_map(ElementRef::wrap)
                    .filter(|r| r.value().name() == "tr"),
            ),
            _ => {}
        }
    }
    out
}

/// Finds the first table matching `selector` and splits it into header and
/// data rows. Cell text is trimmed and internal whitespace collapsed.
pub fn parse_results_table(
    document: &str,
    kind: TableKind,
    selector: &TableSelector,
) -> Result<RawTable> {
    let compiled = selector.compile()?;
    let html = Html::parse_document(document);
    let table = html
        .select(&compiled)
        .next()
        .ok_or_else(|| IngestError::NoTableFound { selector: selector.css() })?;

    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for tr in own_rows(table) {
        let (cells, all_th) = row_cells(tr);
        if cells.is_empty() {
            continue;
        }
        match &header {
            None => header = Some(cells),
            Some(_) if all_th && rows.is_empty() => {
                // Multi-row header: keep the last one.
                header = Some(cells)
            }
            Some(_) => rows.push(cells),
        }
    }
    let header = header.ok_or_else(|| IngestError::NoTableFound { selector: selector.css() })?;
    Ok(RawTable::new(kind, header, rows))
}

/// Byte-level entry point for transports that hand over undecoded bodies.
pub fn parse_results_bytes(
    document: &[u8],
    kind: TableKind,
    selector: &TableSelector,
) -> Result<RawTable> {
    let text = std::str::from_utf8(document).map_err(|e| {
        IngestError::MalformedDocument(format!("body is not UTF-8 ({e})"))
    })?;
    parse_results_table(text, kind, selector)
}

/// Converts a JSON data-endpoint response into a table. The body is either an
/// array of objects or an object holding one; `columns` maps JSON keys to
/// header names, in header order.
pub fn json_fragment_table(
    body: &str,
    kind: TableKind,
    columns: &[(String, String)],
) -> Result<RawTable> {
    if columns.is_empty() {
        return Err(IngestError::JsonFragment("no key→column mapping configured".into()));
    }
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| IngestError::JsonFragment(e.to_string()))?;
    let records = match &value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(map) => map
            .values()
            .find_map(|v| match v {
                serde_json::Value::Array(items) if items.iter().all(|i| i.is_object()) => {
                    Some(items)
                }
                _ => None,
            })
            .ok_or_else(|| IngestError::JsonFragment("no array of records found".into()))?,
        _ => return Err(IngestError::JsonFragment("expected an array or object".into())),
    };
    let header = columns.iter().map(|(_, col)| col.clone()).collect();
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let obj = rec
            .as_object()
            .ok_or_else(|| IngestError::JsonFragment(format!("record {i} is not an object")))?;
        rows.push(
            columns
                .iter()
                .map(|(key, _)| match obj.get(key) {
                    None | Some(serde_json::Value::Null) => String::new(),
                    Some(serde_json::Value::String(s)) => s.trim().to_string(),
                    Some(other) => other.to_string(),
                })
                .collect(),
        );
    }
    Ok(RawTable::new(kind, header, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Column {
    Id,
    Name,
    Party,
    Votes,
    VoteShare,
    Seats,
    SeatShare,
    Candidates,
    Winner,
}

fn normalize_header(h: &str) -> String {
    h.to_lowercase()
        .replace('%', "pct")
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect()
}

fn classify_header(h: &str) -> Option<Column> {
    let col = match normalize_header(h).as_str() {
        "pruid" | "prid" | "cduid" | "regionid" | "id" | "geoid" => Column::Id,
        "province" | "provinceterritory" | "region" | "regionname" | "prname" | "cdname"
        | "censusdivision" | "district" | "name" => Column::Name,
        "party" | "partyname" | "politicalparty" => Column::Party,
        "votes" | "validvotes" | "totalvotes" | "votesobtained" => Column::Votes,
        "voteshare" | "votesharepct" | "votespct" | "pctvotes" | "pctofvotes" | "popularvote"
        | "popularvotepct" => Column::VoteShare,
        "seats" | "seatswon" | "elected" | "seatsallocated" => Column::Seats,
        "seatshare" | "seatsharepct" | "seatspct" | "pctseats" | "pctofseats" => Column::SeatShare,
        "candidates" | "numberofcandidates" | "nbcandidates" | "candidatesnumber" => {
            Column::Candidates
        }
        "winner" | "iswinner" | "won" => Column::Winner,
        _ => return None,
    };
    Some(col)
}

fn clean_number(cell: &str) -> Option<String> {
    let cleaned: String = cell
        .chars()
        .filter(|c| !matches!(c, ',' | ' ' | '\u{a0}' | '\u{202f}' | '%'))
        .collect();
    if cleaned.is_empty() || cleaned.chars().all(|c| c == '-' || c == '—' || c == '–') {
        None
    } else {
        Some(cleaned)
    }
}

fn parse_count<N: std::str::FromStr>(cell: &str) -> Option<N> {
    clean_number(cell)?.parse().ok()
}

fn parse_share(cell: &str, column: &str, row: usize) -> Option<f64> {
    let v: f64 = clean_number(cell)?.parse().ok()?;
    if (0.0..=100.0).contains(&v) {
        Some(v)
    } else {
        warn!(row, column, value = v, "share outside [0, 100] dropped");
        None
    }
}

fn parse_flag(cell: &str) -> bool {
    matches!(
        cell.trim().to_lowercase().as_str(),
        "yes" | "y" | "true" | "1" | "x" | "✓" | "✔" | "winner" | "elected" | "won"
    )
}

/// Types the cells of a province- or district-level table. Party summary
/// tables (one national row per party) may omit the id column; their rows get
/// the national geographic code 1, "Canada".
///
/// When the table has no winner column, a row is flagged as the winner exactly
/// when its region appears once in the table (a list of winners per region).
pub fn rows_from_table(table: &RawTable) -> Result<Vec<ElectionResultRow>> {
    let mut columns: HashMap<Column, usize> = HashMap::new();
    for (i, h) in table.header.iter().enumerate() {
        if let Some(col) = classify_header(h) {
            columns.entry(col).or_insert(i);
        }
    }
    let id_col = columns.get(&Column::Id).copied();
    if id_col.is_none() && table.kind != super::TableKind::PartySummary {
        return Err(IngestError::MissingKeyColumn { header: table.header.clone() });
    }
    let party_col = *columns
        .get(&Column::Party)
        .ok_or_else(|| IngestError::MissingPartyColumn { header: table.header.clone() })?;
    let cell = |row: &[String], col: Column| -> Option<String> {
        columns.get(&col).map(|&i| row[i].clone())
    };

    let mut out = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let region_id = match id_col {
            Some(c) => {
                let raw = &row[c];
                match parse_count::<u32>(raw) {
                    Some(id) if id > 0 => id,
                    _ => return Err(IngestError::BadRegionId { row: i, value: raw.clone() }),
                }
            }
            None => 1,
        };
        let region_name = match cell(row, Column::Name) {
            Some(name) => name.trim().to_string(),
            None if id_col.is_none() => "Canada".to_string(),
            None => String::new(),
        };
        let party = row[party_col].trim().to_string();
        if party.is_empty() {
            return Err(IngestError::EmptyParty { row: i });
        }
        out.push(ElectionResultRow {
            region_id,
            region_name,
            party,
            votes: cell(row, Column::Votes).and_then(|c| parse_count(&c)),
            vote_share_pct: cell(row, Column::VoteShare)
                .and_then(|c| parse_share(&c, "vote_share_pct", i)),
            seats: cell(row, Column::Seats).and_then(|c| parse_count(&c)),
            seat_share_pct: cell(row, Column::SeatShare)
                .and_then(|c| parse_share(&c, "seat_share_pct", i)),
            candidates: cell(row, Column::Candidates).and_then(|c| parse_count(&c)),
            is_winner: cell(row, Column::Winner).map(|c| parse_flag(&c)).unwrap_or(false),
        });
    }

    if !columns.contains_key(&Column::Winner) {
        let mut seen: HashMap<u32, usize> = HashMap::new();
        for r in &out {
            *seen.entry(r.region_id).or_default() += 1;
        }
        for r in &mut out {
            r.is_winner = seen[&r.region_id] == 1;
        }
    }
    Ok(out)
}
