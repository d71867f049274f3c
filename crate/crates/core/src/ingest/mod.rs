//! Fetching election result pages and turning their tables into typed rows.
//!
//! The pipeline is `fetch_with_retry` → `parse_results_table` (or
//! [`json_fragment_table`] for data endpoints) → `rows_from_table`;
//! [`scrape_election`] composes the three over a [`SiteConfig`].

mod fetch;
mod site;
mod table;

pub use fetch::{
    fetch_with_retry, FetchFailure, FetchPolicy, FixtureTransport, HostPacer, HttpTransport,
    ScriptStep, ScriptedTransport, Transport,
};
pub use site::{scrape_election, ElectionSource, PageFormat, PageSource, SiteConfig};
pub use table::{
    json_fragment_table, parse_results_bytes, parse_results_table, rows_from_table, RawTable,
    TableKind, TableSelector,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("no table matched selector `{selector}`")]
    NoTableFound { selector: String },
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("invalid table selector `{0}`")]
    BadSelector(String),
    #[error("table has no recognizable region id column (header: {header:?})")]
    MissingKeyColumn { header: Vec<String> },
    #[error("table has no recognizable party column (header: {header:?})")]
    MissingPartyColumn { header: Vec<String> },
    #[error("row {row}: unparseable region id {value:?}")]
    BadRegionId { row: usize, value: String },
    #[error("row {row}: empty party name")]
    EmptyParty { row: usize },
    #[error("gave up on {url} after {attempts} timed-out attempts")]
    RetriesExhausted { url: String, attempts: u32 },
    #[error("transport error fetching {url}: {message}")]
    Transport { url: String, message: String },
    #[error("invalid fetch policy: {0}")]
    InvalidPolicy(String),
    #[error("year {year} is outside 1867..={latest}")]
    InvalidYear { year: i32, latest: i32 },
    #[error("no source configured for {election_type} {year}")]
    UnknownElection { election_type: String, year: i32 },
    #[error("site config: {0}")]
    Config(String),
    #[error("json fragment: {0}")]
    JsonFragment(String),
    #[error("{url}: {source}")]
    AtUrl {
        url: String,
        #[source]
        source: Box<IngestError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// The error with any URL annotation peeled off.
    pub fn root(&self) -> &IngestError {
        match self {
            IngestError::AtUrl { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;
