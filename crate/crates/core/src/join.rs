//! Attaches each region's winning result row to its boundary feature.
//!
//! The join key is the numeric region id and nothing else. Region names are
//! unreliable across sources (bilingual suffixes, election dates, stray
//! whitespace); [`normalize_region_name`] exists only to make diagnostics
//! readable.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use tracing::warn;

use crate::geometry::{FeatureSet, RegionFeature};
use crate::model::{ElectionResultRow, RegionLevel};
use crate::scalar::Scalar;

/// The winning row's optional numbers.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WinnerMetrics {
    pub votes: Option<u64>,
    pub vote_share_pct: Option<f64>,
    pub seats: Option<u32>,
    pub seat_share_pct: Option<f64>,
    pub candidates: Option<u32>,
}

impl From<&ElectionResultRow> for WinnerMetrics {
    fn from(r: &ElectionResultRow) -> Self {
        WinnerMetrics {
            votes: r.votes,
            vote_share_pct: r.vote_share_pct,
            seats: r.seats,
            seat_share_pct: r.seat_share_pct,
            candidates: r.candidates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRegion<T> {
    pub feature: RegionFeature<T>,
    pub winner_party: String,
    pub metrics: WinnerMetrics,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    pub matched: usize,
    pub unmatched_geometry_ids: Vec<u32>,
    pub unmatched_result_ids: Vec<u32>,
    /// Regions whose winner was settled by the party-name tiebreak.
    pub tied_region_ids: Vec<u32>,
}

impl JoinReport {
    pub fn is_complete(&self) -> bool {
        self.unmatched_geometry_ids.is_empty() && self.unmatched_result_ids.is_empty()
    }

    /// TOML rendering for CI inspection.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report is plain data")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JoinError {
    #[error(
        "join incomplete: {} regions without results {:?}, {} result ids without geometry {:?}",
        .0.unmatched_geometry_ids.len(), .0.unmatched_geometry_ids,
        .0.unmatched_result_ids.len(), .0.unmatched_result_ids
    )]
    StrictJoinFailure(JoinReport),
    #[error("results look {rows} level but the geometry is {geometry} level")]
    LevelMismatch { rows: RegionLevel, geometry: RegionLevel },
}

/// Rank key: flagged winners first, then seats, then votes.
fn strength(r: &ElectionResultRow) -> (bool, u32, u64) {
    (r.is_winner, r.seats.unwrap_or(0), r.votes.unwrap_or(0))
}

/// Picks a region's winner: `is_winner`, else most seats, else most votes;
/// remaining ties go to the lexicographically smallest party name. The flag
/// is true when that tiebreak decided.
pub fn pick_winner<'a>(rows: &[&'a ElectionResultRow]) -> Option<(&'a ElectionResultRow, bool)> {
    let best = rows.iter().map(|r| strength(r)).max()?;
    let mut top: Vec<&ElectionResultRow> = rows.iter().copied().filter(|r| strength(r) == best).collect();
    top.sort_by(|a, b| a.party.cmp(&b.party));
    let tied = top.iter().any(|r| r.party != top[0].party);
    Some((top[0], tied))
}

fn implied_level(rows: &[ElectionResultRow]) -> Option<RegionLevel> {
    let mut levels = rows.iter().map(|r| RegionLevel::classify_id(r.region_id));
    let first = levels.next()??;
    levels.all(|l| l == Some(first)).then_some(first)
}

/// Joins rows to features on region id. In strict mode any id present on only
/// one side is an error, since a region without results would leave a hole in
/// the rendered map.
pub fn merge_results_with_geometry<T: Scalar>(
    rows: &[ElectionResultRow],
    fs: &FeatureSet<T>,
    strict: bool,
) -> Result<(Vec<JoinedRegion<T>>, JoinReport), JoinError> {
    if let Some(level) = implied_level(rows) {
        if level != fs.level() {
            return Err(JoinError::LevelMismatch { rows: level, geometry: fs.level() });
        }
    }

    let mut by_id: BTreeMap<u32, Vec<&ElectionResultRow>> = BTreeMap::new();
    for r in rows {
        by_id.entry(r.region_id).or_default().push(r);
    }

    let mut report = JoinReport::default();
    let mut joined = Vec::with_capacity(fs.len());
    let feature_ids: BTreeSet<u32> = fs.features().iter().map(|f| f.region_id).collect();
    for feature in fs.features() {
        let Some((winner, tied)) = by_id.get(&feature.region_id).and_then(|rs| pick_winner(rs)) else {
            report.unmatched_geometry_ids.push(feature.region_id);
            continue;
        };
        if tied {
            warn!(
                region_id = feature.region_id,
                region = normalize_region_name(&feature.region_name),
                party = winner.party,
                "tied result, winner chosen by party name"
            );
            report.tied_region_ids.push(feature.region_id);
        }
        report.matched += 1;
        joined.push(JoinedRegion {
            feature: feature.clone(),
            winner_party: winner.party.clone(),
            metrics: winner.into(),
        });
    }
    report.unmatched_result_ids = by_id.keys().copied().filter(|id| !feature_ids.contains(id)).collect();
    report.unmatched_geometry_ids.sort_unstable();
    report.tied_region_ids.sort_unstable();

    for id in &report.unmatched_result_ids {
        let name = by_id[id].first().map(|r| normalize_region_name(&r.region_name)).unwrap_or_default();
        warn!(region_id = id, region = name, "result rows without a boundary");
    }
    if strict && !report.is_complete() {
        return Err(JoinError::StrictJoinFailure(report));
    }
    Ok((joined, report))
}

/// Human-facing form of a region name: drops a `/`-separated alternate
/// (bilingual) name, a trailing parenthesized date such as `(Apr 16, '19)`,
/// and redundant whitespace. Parenthesized text without digits, like `(BC)`,
/// is kept.
pub fn normalize_region_name(name: &str) -> String {
    let mut s = name.split('/').next().unwrap_or_default().trim();
    if let Some(open) = s.rfind('(') {
        let tail = &s[open..];
        if tail.ends_with(')') && tail.chars().any(|c| c.is_ascii_digit()) {
            s = s[..open].trim_end();
        }
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ring;

    fn feature(id: u32, name: &str, x: f64) -> RegionFeature<f64> {
        let ring = Ring::from_tuples(&[(x, 0.0), (x + 1.0, 0.0), (x + 1.0, 1.0), (x, 1.0), (x, 0.0)]).unwrap();
        RegionFeature::from_rings(id, name, vec![ring]).unwrap()
    }

    fn set(ids: &[(u32, &str)]) -> FeatureSet<f64> {
        let fs = ids.iter().enumerate().map(|(i, (id, n))| feature(*id, n, i as f64 * 2.0)).collect();
        FeatureSet::new(RegionLevel::Province, fs).unwrap()
    }

    fn row(id: u32, party: &str) -> ElectionResultRow {
        ElectionResultRow::new(id, "x", party)
    }

    #[test]
    fn normalizes_names() {
        assert_eq!(normalize_region_name("Alberta "), "Alberta");
        assert_eq!(normalize_region_name("Alberta (Apr 16, '19)"), "Alberta");
        assert_eq!(normalize_region_name("British Columbia (BC)/Colombie britannique"), "British Columbia (BC)");
        assert_eq!(normalize_region_name("  Prince   Edward Island "), "Prince Edward Island");
        assert_eq!(normalize_region_name(""), "");
    }

    #[test]
    fn partial_join_reports_both_sides() {
        let fs = set(&[(48, "Alberta"), (59, "British Columbia (BC)")]);
        let rows = vec![row(48, "UCP"), row(35, "PC")];
        let (joined, report) = merge_results_with_geometry(&rows, &fs, false).unwrap();
        assert_eq!(joined.len(), 1);
        assert_eq!(report.matched, 1);
        assert_eq!(report.unmatched_geometry_ids, [59]);
        assert_eq!(report.unmatched_result_ids, [35]);
        match merge_results_with_geometry(&rows, &fs, true) {
            Err(JoinError::StrictJoinFailure(r)) => assert_eq!(r, report),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn names_never_participate() {
        let fs = set(&[(59, "British Columbia (BC)")]);
        let mut r = row(59, "BC Liberal");
        r.region_name = "British Columbia (BC)/Colombie britannique".into();
        let (joined, report) = merge_results_with_geometry(&[r], &fs, true).unwrap();
        assert_eq!(joined[0].winner_party, "BC Liberal");
        assert!(report.is_complete());
    }

    #[test]
    fn winner_precedence() {
        let fs = set(&[(48, "Alberta")]);
        let mut a = row(48, "A");
        let mut b = row(48, "B");
        let mut c = row(48, "C");
        a.votes = Some(900);
        b.seats = Some(3);
        b.votes = Some(100);
        c.seats = Some(3);
        c.votes = Some(200);
        let (j, report) = merge_results_with_geometry(&[a.clone(), b.clone(), c.clone()], &fs, true).unwrap();
        assert_eq!(j[0].winner_party, "C");
        assert_eq!(j[0].metrics.votes, Some(200));
        assert!(report.tied_region_ids.is_empty());

        a.is_winner = true;
        let (j, _) = merge_results_with_geometry(&[a, b.clone(), c], &fs, true).unwrap();
        assert_eq!(j[0].winner_party, "A");

        let mut b2 = b.clone();
        b2.party = "Aardvark".into();
        let (j, report) = merge_results_with_geometry(&[b, b2], &fs, true).unwrap();
        assert_eq!(j[0].winner_party, "Aardvark");
        assert_eq!(report.tied_region_ids, [48]);
    }

    #[test]
    fn level_mismatch() {
        let fs = set(&[(48, "Alberta")]);
        let rows = vec![row(4801, "A"), row(4802, "B")];
        assert_eq!(
            merge_results_with_geometry(&rows, &fs, false).unwrap_err(),
            JoinError::LevelMismatch { rows: RegionLevel::CensusDivision, geometry: RegionLevel::Province }
        );
    }

    #[test]
    fn report_toml() {
        let report = JoinReport {
            matched: 12,
            unmatched_geometry_ids: vec![62],
            unmatched_result_ids: vec![],
            tied_region_ids: vec![],
        };
        let text = report.to_toml();
        assert!(text.contains("matched = 12"));
        assert!(text.contains("unmatched_geometry_ids = [62]"));
    }
}
