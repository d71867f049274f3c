//! Domain records shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElectionType {
    Federal,
    Provincial,
}

impl ElectionType {
    pub const ALL: [ElectionType; 2] = [ElectionType::Federal, ElectionType::Provincial];

    pub fn as_str(self) -> &'static str {
        match self {
            ElectionType::Federal => "federal",
            ElectionType::Provincial => "provincial",
        }
    }
}

impl fmt::Display for ElectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownElectionType(pub String);

impl fmt::Display for UnknownElectionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown election type {:?} (expected federal or provincial)", self.0)
    }
}

impl std::error::Error for UnknownElectionType {}

impl FromStr for ElectionType {
    type Err = UnknownElectionType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "federal" => Ok(ElectionType::Federal),
            "provincial" => Ok(ElectionType::Provincial),
            _ => Err(UnknownElectionType(s.to_string())),
        }
    }
}

/// Geographic level a set of results or boundaries is keyed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLevel {
    /// Provinces and territories, keyed by PRUID.
    Province,
    /// Census divisions, keyed by CDUID.
    CensusDivision,
}

impl RegionLevel {
    pub fn id_property(self) -> &'static str {
        match self {
            RegionLevel::Province => "PRUID",
            RegionLevel::CensusDivision => "CDUID",
        }
    }

    pub fn name_property(self) -> &'static str {
        match self {
            RegionLevel::Province => "PRNAME",
            RegionLevel::CensusDivision => "CDNAME",
        }
    }

    /// Level implied by the shape of a Statistics Canada identifier: two-digit
    /// PRUIDs, four-digit CDUIDs. `None` for ids that fit neither.
    pub fn classify_id(id: u32) -> Option<RegionLevel> {
        match id {
            10..=99 => Some(RegionLevel::Province),
            1000..=9999 => Some(RegionLevel::CensusDivision),
            _ => None,
        }
    }
}

impl fmt::Display for RegionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionLevel::Province => "province",
            RegionLevel::CensusDivision => "census_division",
        })
    }
}

/// One party's outcome in one region for one election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionResultRow {
    /// PRUID for provinces, CDUID for census divisions.
    pub region_id: u32,
    pub region_name: String,
    pub party: String,
    pub votes: Option<u64>,
    pub vote_share_pct: Option<f64>,
    pub seats: Option<u32>,
    pub seat_share_pct: Option<f64>,
    pub candidates: Option<u32>,
    pub is_winner: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RowInvariantError {
    #[error("region_id must be positive")]
    ZeroRegionId,
    #[error("party name is empty")]
    EmptyParty,
    #[error("{field} = {value} is outside [0, 100]")]
    ShareOutOfRange { field: &'static str, value: f64 },
}

impl ElectionResultRow {
    pub fn new(region_id: u32, region_name: impl Into<String>, party: impl Into<String>) -> Self {
        ElectionResultRow {
            region_id,
            region_name: region_name.into(),
            party: party.into(),
            votes: None,
            vote_share_pct: None,
            seats: None,
            seat_share_pct: None,
            candidates: None,
            is_winner: false,
        }
    }

    pub fn validate(&self) -> Result<(), RowInvariantError> {
        if self.region_id == 0 {
            return Err(RowInvariantError::ZeroRegionId);
        }
        if self.party.trim().is_empty() {
            return Err(RowInvariantError::EmptyParty);
        }
        for (field, value) in [
            ("vote_share_pct", self.vote_share_pct),
            ("seat_share_pct", self.seat_share_pct),
        ] {
            if let Some(v) = value {
                if !(0.0..=100.0).contains(&v) {
                    return Err(RowInvariantError::ShareOutOfRange { field, value: v });
                }
            }
        }
        Ok(())
    }
}
