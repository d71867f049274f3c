use ballotmap_core::analytics::{
    candidate_trend, election_summary, fit_ols, party_metric_series, predict, winner_heatmap, Metric,
};
use ballotmap_core::datastore::{build_catalog, CatalogEntry, ElectionCatalog};
use ballotmap_core::{ElectionResultRow, ElectionType, RegionLevel};
use ballotmap_testkit::{dataset, oracle};
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((1867i32..2030, -1e3f64..1e3), 2..200)
        .prop_map(|v| v.into_iter().map(|(x, y)| (f64::from(x), y)).collect::<Vec<_>>())
        .prop_filter("distinct x", |v| v.iter().any(|p| p.0 != v[0].0))
}

proptest! {
    #[test]
    fn ols_matches_normal_equations(pts in points()) {
        let m = fit_ols(&pts).unwrap();
        let (slope, intercept) = oracle::normal_equations_fit(&pts);
        prop_assert!(rel_close(m.slope, slope, 1e-9), "{} vs {}", m.slope, slope);
        // the oracle's intercept is extrapolated to year 0, so compare at the data
        for &(x, _) in &pts {
            prop_assert!(rel_close(predict(&m, x), intercept + slope * x, 1e-9));
        }
        prop_assert!((0.0..=1.0).contains(&m.r2));
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        prop_assert_eq!(m.median, oracle::median(&ys));
    }

    #[test]
    fn residuals_are_orthogonal(pts in points()) {
        let m = fit_ols(&pts).unwrap();
        let scale = pts.iter().map(|p| p.1.abs()).fold(1.0, f64::max)
            * pts.iter().map(|p| p.0.abs()).fold(1.0, f64::max)
            * pts.len() as f64;
        let r: Vec<f64> = pts.iter().map(|&(x, y)| y - predict(&m, x)).collect();
        let s0: f64 = r.iter().sum();
        let s1: f64 = r.iter().zip(&pts).map(|(r, p)| r * p.0).sum();
        prop_assert!(s0.abs() <= 1e-8 * scale, "{s0}");
        prop_assert!(s1.abs() <= 1e-8 * scale, "{s1}");
    }

    #[test]
    fn shifting_x_only_moves_the_intercept(pts in points(), probe in 1800f64..2100.0) {
        let a = fit_ols(&pts).unwrap();
        let shifted: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x - 1867.0, y)).collect();
        let b = fit_ols(&shifted).unwrap();
        prop_assert!(rel_close(predict(&a, probe), predict(&b, probe - 1867.0), 1e-9));
    }

    #[test]
    fn exact_lines_fit_perfectly(slope in -50i32..50, intercept in -1000i32..1000, n in 2usize..30) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (i as f64, f64::from(intercept) + f64::from(slope) * i as f64)).collect();
        let m = fit_ols(&pts).unwrap();
        prop_assert!(rel_close(m.slope, f64::from(slope), 1e-9));
        prop_assert!(rel_close(m.intercept, f64::from(intercept), 1e-9));
        prop_assert!((m.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recomputed_shares_sum_to_100(votes in proptest::collection::vec(1u64..1_000_000, 1..12)) {
        let rows: Vec<ElectionResultRow> = votes.iter().enumerate().map(|(i, &v)| {
            let mut r = ElectionResultRow::new(35 + (i as u32 % 2), "x", format!("P{}", i / 2));
            r.votes = Some(v);
            r
        }).collect();
        let total: f64 = election_summary(&rows).iter().filter_map(|s| s.vote_share_pct).sum();
        prop_assert!((total - 100.0).abs() <= 0.5);
    }

    #[test]
    fn heatmap_columns_sum_to_one(elections in proptest::collection::vec(proptest::collection::vec(0u32..30, 3), 1..25)) {
        let parties = ["Liberal", "Conservative", "Reform"];
        let entries = elections.iter().enumerate().map(|(i, seats)| {
            let rows = seats.iter().zip(parties).map(|(&s, p)| {
                let mut r = ElectionResultRow::new(35, "Ontario", p);
                r.seats = Some(s);
                r.votes = Some(u64::from(s) * 1000 + 1);
                r
            }).collect();
            CatalogEntry::new(ElectionType::Federal, 1867 + 4 * i as i32, RegionLevel::Province, rows)
        }).collect();
        let cat = ElectionCatalog::from_entries(entries).unwrap();
        let m = winner_heatmap(&cat, ElectionType::Federal).unwrap();
        prop_assert!(m.column_sums().iter().all(|&s| s == 1));
        let wins: Vec<u32> = m.wins.iter().map(|row| row.iter().map(|&v| u32::from(v)).sum()).collect();
        for k in 1..m.parties.len() {
            prop_assert!(wins[k - 1] > wins[k] || (wins[k - 1] == wins[k] && m.parties[k - 1] < m.parties[k]));
        }
    }
}

#[test]
fn fixture_dataset_analytics() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset::write_fixture_dataset(dir.path()).unwrap();
    let cat = build_catalog(&ds.data_dir).unwrap();

    let trend = candidate_trend(&cat, ElectionType::Federal).unwrap();
    // every fixture row carries the per-province seat count as its candidates
    let total = |rows: &[dataset::FixtureRow]| rows.iter().map(|r| f64::from(r.candidates.unwrap())).sum::<f64>();
    assert_eq!(trend.series, vec![(1867, total(&dataset::federal_1867())), (1963, total(&dataset::federal_1963()))]);
    assert!(trend.estimated.is_empty());

    let provincial = cat.primary(ElectionType::Provincial, 2019).unwrap();
    let summary = election_summary(&provincial.rows);
    assert_eq!(summary.len(), 13);
    assert!(summary.iter().all(|s| s.seats == 1));

    let heat = winner_heatmap(&cat, ElectionType::Federal).unwrap();
    assert_eq!(heat.years, [1867, 1963]);
    assert_eq!(heat.column_sums(), [1, 1]);

    let series = party_metric_series(&cat, ElectionType::Federal, Metric::SeatsWon).unwrap();
    for s in &series {
        match s.points.len() {
            1 => assert!(s.model.is_none()),
            _ => {
                let pts: Vec<(f64, f64)> = s.points.iter().map(|&(y, v)| (f64::from(y), v)).collect();
                assert_eq!(s.model.unwrap(), fit_ols(&pts).unwrap());
            }
        }
    }
}

#[test]
fn reported_and_recomputed_shares_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset::write_fixture_dataset(dir.path()).unwrap();
    let cat = build_catalog(&ds.data_dir).unwrap();
    let rows = &cat.primary(ElectionType::Federal, 1963).unwrap().rows;
    let total: u64 = rows.iter().filter_map(|r| r.votes).sum();
    for s in election_summary(rows) {
        let direct = 100.0 * s.votes.unwrap() as f64 / total as f64;
        assert!((s.vote_share_pct.unwrap() - direct).abs() < 0.1);
    }
}
