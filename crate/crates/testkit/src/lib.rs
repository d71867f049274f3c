//! Test-only fixtures and numerical oracles. Nothing here depends on
//! `ballotmap-core`, so the oracles stay independent of the code they check.

pub mod dataset;
pub mod oracle;
pub mod shapefile;
pub mod table_one;
