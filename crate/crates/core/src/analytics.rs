//! Chart data: per-election party summaries, the candidate-count trend with
//! a least-squares prediction, the national winner heat map and per-party
//! metric series with their own regression lines.
//!
//! Year series serialize as `[[year, value], ...]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::datastore::ElectionCatalog;
use crate::join::pick_winner;
use crate::model::{ElectionResultRow, ElectionType};
use crate::render::canonical_party_order;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("all x values are equal")]
    DegenerateX,
    #[error("non-finite input value")]
    NonFinite,
    #[error("{election_type} analytics need at least 2 elections, catalog has {found}")]
    InsufficientData { election_type: ElectionType, found: usize },
    #[error("{election_type} {year} has no seats or votes to pick a winner from")]
    NoWinner { election_type: ElectionType, year: i32 },
}

pub type Result<T, E = AnalyticsError> = std::result::Result<T, E>;

/// A fitted least-squares line plus summary statistics of the responses.
///
/// The fit is done on centred x, and `x_mean` is kept so predictions far from
/// zero (calendar years) stay accurate in `f32`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendModel<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub mean: T,
    pub median: T,
    pub n: usize,
    pub x_mean: T,
}

impl<T: Scalar> TrendModel<T> {
    pub fn predict(&self, x: T) -> T {
        predict(self, x)
    }
}

/// Median with the two middle values averaged for even counts.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / T::two() })
}

/// Ordinary least squares on `(x, y)` points.
pub fn fit_ols<T: Scalar>(points: &[(T, T)]) -> Result<TrendModel<T>> {
    let n = points.len();
    if n < 2 {
        return Err(AnalyticsError::TooFewPoints(n));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(AnalyticsError::NonFinite);
    }
    if points.iter().all(|p| p.0 == points[0].0) {
        return Err(AnalyticsError::DegenerateX);
    }
    let nt = T::from_usize_lossy(n);
    let x_mean = points.iter().fold(T::zero(), |s, p| s + p.0) / nt;
    let y_mean = points.iter().fold(T::zero(), |s, p| s + p.1) / nt;

    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &(x, y) in points {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if sxx == T::zero() {
        return Err(AnalyticsError::DegenerateX);
    }
    let slope = sxy / sxx;
    let ss_res = points.iter().fold(T::zero(), |s, &(x, y)| {
        let r = y - (y_mean + slope * (x - x_mean));
        s + r * r
    });
    let r2 = if syy == T::zero() {
        T::one()
    } else {
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    };
    let ys: Vec<T> = points.iter().map(|p| p.1).collect();
    Ok(TrendModel {
        slope,
        intercept: y_mean - slope * x_mean,
        r2,
        mean: y_mean,
        median: median(&ys).expect("n >= 2"),
        n,
        x_mean,
    })
}

/// Value of the fitted line at `x`, unclamped.
pub fn predict<T: Scalar>(model: &TrendModel<T>, x: T) -> T {
    model.mean + model.slope * (x - model.x_mean)
}

fn fit_series(series: &[(i32, f64)]) -> Result<TrendModel<f64>> {
    let pts: Vec<(f64, f64)> = series.iter().map(|&(y, v)| (f64::from(y), v)).collect();
    fit_ols(&pts)
}

fn require_elections(catalog: &ElectionCatalog, election_type: ElectionType) -> Result<usize> {
    let found = catalog.elections(election_type).len();
    if found < 2 {
        return Err(AnalyticsError::InsufficientData { election_type, found });
    }
    Ok(found)
}

/// Candidate total of one election and whether any count was estimated.
/// Rows without a count contribute one candidate per distinct
/// (party, region) pair.
pub fn candidate_total(rows: &[ElectionResultRow]) -> (u64, bool) {
    let mut total = 0u64;
    let mut missing: BTreeSet<(&str, u32)> = BTreeSet::new();
    for r in rows {
        match r.candidates {
            Some(c) => total += u64::from(c),
            None => {
                missing.insert((&r.party, r.region_id));
            }
        }
    }
    (total + missing.len() as u64, !missing.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTrend {
    pub series: Vec<(i32, f64)>,
    /// Years whose totals include row-count estimates.
    pub estimated: Vec<i32>,
    pub model: TrendModel<f64>,
}

pub fn candidate_trend(catalog: &ElectionCatalog, election_type: ElectionType) -> Result<CandidateTrend> {
    require_elections(catalog, election_type)?;
    let mut series = Vec::new();
    let mut estimated = Vec::new();
    for e in catalog.elections(election_type) {
        let (total, est) = candidate_total(&e.rows);
        series.push((e.year, total as f64));
        if est {
            estimated.push(e.year);
        }
    }
    let model = fit_series(&series)?;
    Ok(CandidateTrend { series, estimated, model })
}

/// One party's aggregate in a single election.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartySummary {
    pub party: String,
    pub votes: Option<u64>,
    pub vote_share_pct: Option<f64>,
    pub seats: u32,
    pub seat_share_pct: Option<f64>,
    pub candidates: u64,
    pub candidates_estimated: bool,
}

/// Aggregates one election's rows by party. A row without a seat count
/// counts as one seat when it is flagged as the region's winner. Reported
/// shares are used for parties with a single row; otherwise shares are
/// recomputed from the election totals. Sorted by seats, then votes
/// (both descending), then party name.
pub fn election_summary(rows: &[ElectionResultRow]) -> Vec<PartySummary> {
    let mut by_party: BTreeMap<&str, Vec<&ElectionResultRow>> = BTreeMap::new();
    for r in rows {
        by_party.entry(&r.party).or_default().push(r);
    }
    let seats_of = |r: &ElectionResultRow| r.seats.unwrap_or(u32::from(r.is_winner));
    let total_votes: u64 = rows.iter().filter_map(|r| r.votes).sum();
    let total_seats: u64 = rows.iter().map(|r| u64::from(seats_of(r))).sum();

    let mut out: Vec<PartySummary> = by_party
        .into_iter()
        .map(|(party, rs)| {
            let votes = rs.iter().any(|r| r.votes.is_some()).then(|| rs.iter().filter_map(|r| r.votes).sum::<u64>());
            let seats: u32 = rs.iter().map(|r| seats_of(r)).sum();
            let single = |f: fn(&ElectionResultRow) -> Option<f64>| if rs.len() == 1 { f(rs[0]) } else { None };
            let vote_share_pct = single(|r| r.vote_share_pct)
                .or_else(|| votes.filter(|_| total_votes > 0).map(|v| 100.0 * v as f64 / total_votes as f64));
            let seat_share_pct = single(|r| r.seat_share_pct)
                .or_else(|| (total_seats > 0).then(|| 100.0 * f64::from(seats) / total_seats as f64));
            let owned: Vec<ElectionResultRow> = rs.iter().map(|r| (*r).clone()).collect();
            let (candidates, candidates_estimated) = candidate_total(&owned);
            PartySummary {
                party: party.to_string(),
                votes,
                vote_share_pct,
                seats,
                seat_share_pct,
                candidates,
                candidates_estimated,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.seats
            .cmp(&a.seats)
            .then(b.votes.unwrap_or(0).cmp(&a.votes.unwrap_or(0)))
            .then_with(|| a.party.cmp(&b.party))
    });
    out
}

/// National winner of one election: the top of [`election_summary`].
pub fn national_winner(rows: &[ElectionResultRow]) -> Option<String> {
    let summary = election_summary(rows);
    let top = summary.first()?;
    if top.seats == 0 && top.votes.unwrap_or(0) == 0 {
        return None;
    }
    if let Some(second) = summary.get(1) {
        if second.seats == top.seats && second.votes == top.votes {
            warn!(winner = top.party, runner_up = second.party, "national tie, winner chosen by party name");
        }
    }
    Some(top.party.clone())
}

/// Which party won each election. Rows are parties that won at least once,
/// ordered by win count (descending) then name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinnerMatrix {
    pub parties: Vec<String>,
    pub years: Vec<i32>,
    pub wins: Vec<Vec<u8>>,
}

impl WinnerMatrix {
    pub fn column_sums(&self) -> Vec<u32> {
        (0..self.years.len())
            .map(|j| self.wins.iter().map(|row| u32::from(row[j])).sum())
            .collect()
    }
}

pub fn winner_heatmap(catalog: &ElectionCatalog, election_type: ElectionType) -> Result<WinnerMatrix> {
    let mut years = Vec::new();
    let mut winners = Vec::new();
    for e in catalog.elections(election_type) {
        let w = national_winner(&e.rows).ok_or(AnalyticsError::NoWinner { election_type, year: e.year })?;
        years.push(e.year);
        winners.push(w);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in &winners {
        *counts.entry(w).or_default() += 1;
    }
    let mut parties: Vec<(&str, usize)> = counts.into_iter().collect();
    parties.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let wins = parties
        .iter()
        .map(|(p, _)| winners.iter().map(|w| u8::from(w == p)).collect())
        .collect();
    Ok(WinnerMatrix {
        parties: parties.into_iter().map(|(p, _)| p.to_string()).collect(),
        years,
        wins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    SeatsWon,
    SeatSharePct,
    VoteSharePct,
    Candidates,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::SeatsWon, Metric::SeatSharePct, Metric::VoteSharePct, Metric::Candidates];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SeatsWon => "seats_won",
            Metric::SeatSharePct => "seat_share_pct",
            Metric::VoteSharePct => "vote_share_pct",
            Metric::Candidates => "candidates",
        }
    }

    fn value(self, s: &PartySummary) -> Option<f64> {
        match self {
            Metric::SeatsWon => Some(f64::from(s.seats)),
            Metric::SeatSharePct => s.seat_share_pct,
            Metric::VoteSharePct => s.vote_share_pct,
            Metric::Candidates => Some(s.candidates as f64),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric {0:?}")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "seatswon" | "seats" => Ok(Metric::SeatsWon),
            "seatsharepct" | "seatshare" | "seatpct" => Ok(Metric::SeatSharePct),
            "votesharepct" | "voteshare" | "votepct" => Ok(Metric::VoteSharePct),
            "candidates" => Ok(Metric::Candidates),
            _ => Err(UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartySeries {
    pub party: String,
    pub metric: Metric,
    pub points: Vec<(i32, f64)>,
    /// Absent when the party has fewer than two points.
    pub model: Option<TrendModel<f64>>,
}

/// One series per party over every election of `election_type`, each with
/// its own regression line. Parties are in case-insensitive name order.
pub fn party_metric_series(
    catalog: &ElectionCatalog,
    election_type: ElectionType,
    metric: Metric,
) -> Result<Vec<PartySeries>> {
    require_elections(catalog, election_type)?;
    let mut points: BTreeMap<String, Vec<(i32, f64)>> = BTreeMap::new();
    for e in catalog.elections(election_type) {
        for s in election_summary(&e.rows) {
            if let Some(v) = metric.value(&s) {
                points.entry(s.party).or_default().push((e.year, v));
            }
        }
    }
    canonical_party_order(points.keys().map(String::as_str))
        .into_iter()
        .map(|party| {
            let pts = points[party].clone();
            let model = if pts.len() >= 2 { Some(fit_series(&pts)?) } else { None };
            Ok(PartySeries { party: party.to_string(), metric, points: pts, model })
        })
        .collect()
}

/// Career totals per party. Which of these measures "led" an election
/// history is a matter of interpretation, so both are given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartyTotal {
    pub party: String,
    pub total_votes: u64,
    /// Regions won, summed over elections.
    pub region_wins: u32,
    pub elections_contested: u32,
}

/// Sorted by total votes (descending), then name.
pub fn party_totals(catalog: &ElectionCatalog, election_type: ElectionType) -> Vec<PartyTotal> {
    let mut acc: BTreeMap<String, PartyTotal> = BTreeMap::new();
    for e in catalog.elections(election_type) {
        let mut by_region: BTreeMap<u32, Vec<&ElectionResultRow>> = BTreeMap::new();
        let mut contested: BTreeSet<&str> = BTreeSet::new();
        for r in e.rows.iter() {
            by_region.entry(r.region_id).or_default().push(r);
            contested.insert(&r.party);
            let t = acc.entry(r.party.clone()).or_insert_with(|| PartyTotal {
                party: r.party.clone(),
                total_votes: 0,
                region_wins: 0,
                elections_contested: 0,
            });
            t.total_votes += r.votes.unwrap_or(0);
        }
        for p in contested {
            acc.get_mut(p).expect("inserted").elections_contested += 1;
        }
        for rows in by_region.values() {
            if let Some((w, _)) = pick_winner(rows) {
                acc.get_mut(&w.party).expect("inserted").region_wins += 1;
            }
        }
    }
    let mut out: Vec<PartyTotal> = acc.into_values().collect();
    out.sort_by(|a, b| b.total_votes.cmp(&a.total_votes).then_with(|| a.party.cmp(&b.party)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::CatalogEntry;
    use crate::model::RegionLevel;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + b.abs())
    }

    #[test]
    fn exact_lines() {
        let m = fit_ols(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert!(close(m.slope, 1.0) && close(m.intercept, 0.0) && close(m.r2, 1.0));
        let m = fit_ols(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!(close(m.slope, 2.0) && close(m.intercept, 1.0));
        assert_eq!(m.median, 3.0);
        assert_eq!(m.n, 3);
    }

    #[test]
    fn predictions() {
        let m = fit_ols(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(close(predict(&m, 7.0), 7.0));
        let m = fit_ols(&[(2015.0, 300.0), (2011.0, 280.0)]).unwrap();
        assert!(close(m.predict(2019.0), 320.0));
        let m = fit_ols(&[(2015.0f32, 300.0f32), (2011.0, 280.0)]).unwrap();
        assert!((m.predict(2019.0) - 320.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(fit_ols(&[(1.0, 2.0)]), Err(AnalyticsError::TooFewPoints(1)));
        assert_eq!(fit_ols(&[(1.0, 2.0), (1.0, 3.0)]), Err(AnalyticsError::DegenerateX));
        assert_eq!(fit_ols(&[(1.0, f64::NAN), (2.0, 3.0)]), Err(AnalyticsError::NonFinite));
        let flat = fit_ols(&[(1.0, 5.0), (2.0, 5.0), (4.0, 5.0)]).unwrap();
        assert_eq!((flat.slope, flat.r2), (0.0, 1.0));
    }

    #[test]
    fn even_median_averages() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median::<f64>(&[]), None);
    }

    fn entry(year: i32, rows: Vec<ElectionResultRow>) -> CatalogEntry {
        CatalogEntry::new(ElectionType::Federal, year, RegionLevel::Province, rows)
    }

    fn seats(id: u32, party: &str, seats: u32, votes: u64) -> ElectionResultRow {
        let mut r = ElectionResultRow::new(id, "x", party);
        r.seats = Some(seats);
        r.votes = Some(votes);
        r
    }

    #[test]
    fn two_election_candidate_trend() {
        let mut a = seats(35, "A", 1, 1);
        a.candidates = Some(10);
        let mut b = seats(35, "A", 1, 1);
        b.candidates = Some(12);
        let cat = ElectionCatalog::from_entries(vec![entry(1867, vec![a]), entry(1872, vec![b])]).unwrap();
        let t = candidate_trend(&cat, ElectionType::Federal).unwrap();
        assert_eq!(t.series, vec![(1867, 10.0), (1872, 12.0)]);
        assert!(close(t.model.slope, 0.4));
        assert!(t.estimated.is_empty());
        let one = ElectionCatalog::from_entries(vec![entry(1867, vec![seats(35, "A", 1, 1)])]).unwrap();
        assert_eq!(
            candidate_trend(&one, ElectionType::Federal).unwrap_err(),
            AnalyticsError::InsufficientData { election_type: ElectionType::Federal, found: 1 }
        );
    }

    #[test]
    fn missing_candidates_are_estimated() {
        let mut a = seats(35, "A", 1, 1);
        a.candidates = Some(10);
        let rows = vec![seats(35, "A", 1, 1), seats(35, "B", 0, 1), seats(24, "A", 1, 1)];
        let cat = ElectionCatalog::from_entries(vec![entry(1867, vec![a]), entry(1872, rows)]).unwrap();
        let t = candidate_trend(&cat, ElectionType::Federal).unwrap();
        assert_eq!(t.series[1], (1872, 3.0));
        assert_eq!(t.estimated, [1872]);
    }

    #[test]
    fn summary_shares_and_order() {
        let s = election_summary(&[seats(35, "B", 0, 40), seats(35, "A", 0, 60)]);
        assert_eq!(s[0].party, "A");
        assert!(close(s[0].vote_share_pct.unwrap(), 60.0));
        assert!(close(s[1].vote_share_pct.unwrap(), 40.0));

        let mut flagged = ElectionResultRow::new(48, "Alberta", "UCP");
        flagged.is_winner = true;
        let s = election_summary(&[flagged]);
        assert_eq!(s[0].seats, 1);
        assert_eq!(s[0].votes, None);
    }

    #[test]
    fn heatmap_rows() {
        let cat = ElectionCatalog::from_entries(vec![
            entry(1867, vec![seats(35, "A", 5, 1), seats(35, "B", 2, 1)]),
            entry(1872, vec![seats(35, "A", 1, 1), seats(35, "B", 2, 1)]),
            entry(1874, vec![seats(35, "A", 3, 1), seats(35, "B", 2, 1)]),
        ])
        .unwrap();
        let m = winner_heatmap(&cat, ElectionType::Federal).unwrap();
        assert_eq!(m.parties, ["A", "B"]);
        assert_eq!(m.wins, vec![vec![1, 0, 1], vec![0, 1, 0]]);
        assert_eq!(m.column_sums(), [1, 1, 1]);
    }

    #[test]
    fn heatmap_ties_alphabetical() {
        let cat = ElectionCatalog::from_entries(vec![
            entry(1867, vec![seats(35, "Zed", 5, 1), seats(35, "Ace", 2, 1)]),
            entry(1872, vec![seats(35, "Zed", 1, 1), seats(35, "Ace", 2, 1)]),
        ])
        .unwrap();
        assert_eq!(winner_heatmap(&cat, ElectionType::Federal).unwrap().parties, ["Ace", "Zed"]);
        let empty = ElectionCatalog::from_entries(vec![entry(1867, vec![ElectionResultRow::new(35, "x", "A")])]).unwrap();
        assert!(matches!(winner_heatmap(&empty, ElectionType::Federal), Err(AnalyticsError::NoWinner { year: 1867, .. })));
    }

    #[test]
    fn series_models() {
        let share = |y, v: f64| {
            let mut r = seats(35, "A", 1, 1);
            r.vote_share_pct = Some(v);
            entry(y, vec![r])
        };
        let mut cat_entries = vec![share(1867, 50.0), share(1872, 40.0), share(1874, 30.0)];
        let mut once = seats(24, "B", 0, 1);
        once.vote_share_pct = Some(10.0);
        let e = cat_entries.pop().unwrap();
        let mut rows = (*e.rows).clone();
        rows.push(once);
        cat_entries.push(entry(1874, rows));
        let cat = ElectionCatalog::from_entries(cat_entries).unwrap();
        let series = party_metric_series(&cat, ElectionType::Federal, Metric::VoteSharePct).unwrap();
        assert_eq!(series.len(), 2);
        assert!(series[0].model.unwrap().slope < 0.0);
        assert!(series[1].model.is_none());
        let direct = fit_ols(&[(1867.0, 50.0), (1872.0, 40.0), (1874.0, 30.0)]).unwrap();
        assert_eq!(series[0].model.unwrap(), direct);
    }

    #[test]
    fn metric_names() {
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("Vote-Share".parse::<Metric>().unwrap(), Metric::VoteSharePct);
        assert!("turnout".parse::<Metric>().is_err());
    }

    #[test]
    fn totals_expose_both_readings() {
        let cat = ElectionCatalog::from_entries(vec![
            entry(1867, vec![seats(35, "A", 1, 10), seats(35, "B", 0, 9), seats(24, "B", 1, 100), seats(24, "A", 0, 1)]),
            entry(1872, vec![seats(35, "A", 1, 10), seats(24, "A", 1, 1)]),
        ])
        .unwrap();
        let t = party_totals(&cat, ElectionType::Federal);
        assert_eq!(t[0].party, "B");
        assert_eq!((t[0].total_votes, t[0].region_wins, t[0].elections_contested), (109, 1, 1));
        assert_eq!((t[1].total_votes, t[1].region_wins, t[1].elections_contested), (22, 3, 2));
    }
}
