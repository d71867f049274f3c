use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::info;

use super::table::{json_fragment_table, parse_results_table, rows_from_table, TableKind, TableSelector};
use super::{fetch_with_retry, FetchPolicy, IngestError, Result, Transport};
use crate::model::{ElectionResultRow, ElectionType, RegionLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageFormat {
    #[default]
    Html,
    Json,
}

/// One page (or data endpoint) of an election's results. `{type}` and
/// `{year}` in the URL are substituted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSource {
    pub url: String,
    pub kind: TableKind,
    #[serde(default)]
    pub format: PageFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionSource {
    #[serde(rename = "type")]
    pub election_type: ElectionType,
    #[serde(default)]
    pub year: Option<i32>,
    /// Shorthand for several years sharing one URL template.
    #[serde(default)]
    pub years: Vec<i32>,
    #[serde(default = "default_level")]
    pub level: RegionLevel,
    #[serde(default)]
    pub pages: Vec<PageSource>,
}

fn default_level() -> RegionLevel {
    RegionLevel::Province
}

impl ElectionSource {
    fn covers(&self, election_type: ElectionType, year: i32) -> bool {
        self.election_type == election_type
            && (self.year == Some(year) || self.years.contains(&year))
    }
}

/// Site configuration file (TOML): table selectors per kind, the JSON
/// key→column map for data endpoints and the page list per election.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SiteConfig {
    #[serde(default)]
    pub json_columns: Vec<(String, String)>,
    #[serde(default)]
    pub selectors: HashMap<TableKind, TableSelector>,
    #[serde(default)]
    pub elections: Vec<ElectionSource>,
}

impl SiteConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SiteConfig = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        let mut seen = HashMap::new();
        for (i, src) in cfg.elections.iter().enumerate() {
            for year in src.year.iter().chain(&src.years) {
                if let Some(prev) = seen.insert((src.election_type, *year), i) {
                    return Err(IngestError::Config(format!(
                        "{} {year} configured twice (entries {prev} and {i})",
                        src.election_type
                    )));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            IngestError::Config(m) => IngestError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn source_for(&self, election_type: ElectionType, year: i32) -> Option<&ElectionSource> {
        self.elections.iter().find(|s| s.covers(election_type, year))
    }

    pub fn selector(&self, kind: TableKind) -> TableSelector {
        self.selectors.get(&kind).cloned().unwrap_or_default()
    }

    pub fn page_urls(&self, election_type: ElectionType, year: i32) -> Vec<String> {
        self.source_for(election_type, year)
            .map(|s| s.pages.iter().map(|p| expand(&p.url, election_type, year)).collect())
            .unwrap_or_default()
    }
}

fn expand(template: &str, election_type: ElectionType, year: i32) -> String {
    template
        .replace("{type}", election_type.as_str())
        .replace("{year}", &year.to_string())
}

/// Latest calendar year (UTC) according to the system clock.
pub(crate) fn current_year() -> i32 {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let days = (secs / 86_400) as i64;
    // civil-from-days, proleptic Gregorian
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    (yoe + era * 400 + i64::from(month <= 2)) as i32
}

/// Fetches and parses every configured page of one election, in page order.
/// Errors carry the URL of the page that failed.
pub fn scrape_election(
    election_type: ElectionType,
    year: i32,
    site: &SiteConfig,
    policy: &FetchPolicy,
    transport: &dyn Transport,
) -> Result<Vec<ElectionResultRow>> {
    let latest = current_year();
    if !(1867..=latest).contains(&year) {
        return Err(IngestError::InvalidYear { year, latest });
    }
    policy.validate()?;
    let source = site.source_for(election_type, year).ok_or_else(|| IngestError::UnknownElection {
        election_type: election_type.to_string(),
        year,
    })?;

    let mut rows = Vec::new();
    for page in &source.pages {
        let url = expand(&page.url, election_type, year);
        let at = |e: IngestError| IngestError::AtUrl { url: url.clone(), source: Box::new(e) };
        let body = fetch_with_retry(&url, policy, transport).map_err(at)?;
        let table = match page.format {
            PageFormat::Html => parse_results_table(&body, page.kind, &site.selector(page.kind)),
            PageFormat::Json => json_fragment_table(&body, page.kind, &site.json_columns),
        }
        .map_err(at)?
        .with_source(url.clone());
        let page_rows = rows_from_table(&table).map_err(at)?;
        info!(url, rows = page_rows.len(), "parsed page");
        rows.extend(page_rows);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ScriptStep, ScriptedTransport};

    const CONFIG: &str = r#"
json_columns = [["id", "PRUID"], ["party", "Party"]]

[selectors.province_level]
class = "results"

[[elections]]
type = "federal"
years = [1963, 1965]
pages = [
  { url = "https://ex.org/{type}/{year}/1.html", kind = "province_level" },
  { url = "https://ex.org/{type}/{year}/data.json", kind = "province_level", format = "json" },
]

[[elections]]
type = "provincial"
year = 2019
pages = []
"#;

    #[test]
    fn config_parses_and_expands_templates() {
        let cfg = SiteConfig::from_toml(CONFIG).unwrap();
        assert_eq!(
            cfg.page_urls(ElectionType::Federal, 1965),
            ["https://ex.org/federal/1965/1.html", "https://ex.org/federal/1965/data.json"]
        );
        assert_eq!(cfg.selector(TableKind::ProvinceLevel).css(), "table.results");
        assert_eq!(cfg.selector(TableKind::DistrictLevel).css(), "table");
        assert!(cfg.source_for(ElectionType::Federal, 1964).is_none());
    }

    #[test]
    fn duplicate_election_keys_rejected() {
        let dup = format!("{CONFIG}\n[[elections]]\ntype = \"federal\"\nyear = 1963\n");
        assert!(matches!(SiteConfig::from_toml(&dup), Err(IngestError::Config(_))));
    }

    #[test]
    fn html_and_json_pages_concatenate_in_order() {
        let cfg = SiteConfig::from_toml(CONFIG).unwrap();
        let html = "<table class=results><tr><th>PRUID</th><th>Party</th></tr><tr><td>10</td><td>A</td></tr></table>";
        let json = r#"[{"id": 11, "party": "B"}, {"id": 12, "party": "C"}]"#;
        let t = ScriptedTransport::new([
            ScriptStep::Body(html.into()),
            ScriptStep::Timeout,
            ScriptStep::Body(json.into()),
        ]);
        let rows = scrape_election(ElectionType::Federal, 1963, &cfg, &FetchPolicy::default(), &t)
            .unwrap();
        let ids: Vec<u32> = rows.iter().map(|r| r.region_id).collect();
        assert_eq!(ids, [10, 11, 12]);
        assert_eq!(t.calls()[2].0, "https://ex.org/federal/1963/data.json");
    }

    #[test]
    fn zero_pages_is_empty() {
        let cfg = SiteConfig::from_toml(CONFIG).unwrap();
        let t = ScriptedTransport::always_timeout();
        let rows =
            scrape_election(ElectionType::Provincial, 2019, &cfg, &FetchPolicy::default(), &t)
                .unwrap();
        assert!(rows.is_empty());
        assert!(t.calls().is_empty());
    }

    #[test]
    fn errors_name_the_failing_url() {
        let cfg = SiteConfig::from_toml(CONFIG).unwrap();
        let t = ScriptedTransport::new([ScriptStep::Body("<p>no table</p>".into())]);
        let err = scrape_election(ElectionType::Federal, 1963, &cfg, &FetchPolicy::default(), &t)
            .unwrap_err();
        match &err {
            IngestError::AtUrl { url, .. } => assert_eq!(url, "https://ex.org/federal/1963/1.html"),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(err.root(), IngestError::NoTableFound { .. }));
    }

    #[test]
    fn year_bounds() {
        let cfg = SiteConfig::from_toml(CONFIG).unwrap();
        let t = ScriptedTransport::always_timeout();
        let p = FetchPolicy::default();
        assert!(matches!(
            scrape_election(ElectionType::Federal, 1866, &cfg, &p, &t),
            Err(IngestError::InvalidYear { .. })
        ));
        assert!(matches!(
            scrape_election(ElectionType::Federal, current_year() + 1, &cfg, &p, &t),
            Err(IngestError::InvalidYear { .. })
        ));
        assert!(matches!(
            scrape_election(ElectionType::Federal, 1970, &cfg, &p, &t),
            Err(IngestError::UnknownElection { .. })
        ));
    }

    #[test]
    fn current_year_is_plausible() {
        let y = current_year();
        assert!((2024..2200).contains(&y), "{y}");
    }
}
