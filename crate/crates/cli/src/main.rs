use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ballotmap_core::analytics::{candidate_trend, predict};
use ballotmap_core::datastore::{build_catalog, parse_file_name, read_election_csv, write_election_csv};
use ballotmap_core::geometry::{from_geojson, parse_shapefile, simplify, to_geojson, FeatureSet, RegionFeature};
use ballotmap_core::ingest::{
    scrape_election, FetchPolicy, FixtureTransport, HttpTransport, SiteConfig, Transport,
};
use ballotmap_core::join::{merge_results_with_geometry, JoinError};
use ballotmap_core::render::{assign_party_colors, parse_overrides, render_map, render_uncolored};
use ballotmap_core::{ElectionType, RegionLevel};
use ballotmap_service::ServiceConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ballotmap", version, about = "Canadian election results: scrape, map and analyse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch one election's result pages and store them as CSV.
    Scrape {
        #[arg(long = "type")]
        election_type: ElectionType,
        #[arg(long)]
        year: i32,
        /// Site configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Read pages from a directory of saved responses instead of the network.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_attempts: u32,
        /// Write a header-only file when the pages hold no rows.
        #[arg(long)]
        allow_empty: bool,
    },
    /// Simplify every ring of a GeoJSON file, keeping a fraction of vertices.
    Simplify {
        #[arg(long)]
        retain: f64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Convert an ESRI shapefile (.shp + .dbf) to GeoJSON.
    Convert {
        shp: PathBuf,
        dbf: PathBuf,
        #[arg(long, default_value = "PRUID")]
        id: String,
        #[arg(long, default_value = "PRNAME")]
        name: String,
        output: PathBuf,
    },
    /// Render a choropleth SVG for one stored election, or the bare outline
    /// when no election is given.
    Render {
        /// Stored election such as `provincial_2019` or `federal_1963_cd`.
        #[arg(long)]
        election: Option<String>,
        #[arg(long)]
        geom: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value_t = 960)]
        width: u32,
        #[arg(long, default_value_t = 600)]
        height: u32,
        /// TOML table of `"party" = "#rrggbb"` colour overrides.
        #[arg(long)]
        palette: Option<PathBuf>,
        /// Fail when results and geometry ids do not match one to one.
        #[arg(long)]
        strict: bool,
    },
    /// Print the join report between a stored election and a geometry file.
    JoinReport {
        #[arg(long)]
        election: String,
        #[arg(long)]
        geom: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
    },
    /// Candidate-count trend with an optional prediction, as JSON.
    Trend {
        #[arg(long = "type")]
        election_type: ElectionType,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long)]
        predict: Option<f64>,
    },
    /// Run the HTTP API.
    Serve {
        /// Service configuration (TOML); `BALLOTMAP_CONFIG` takes precedence.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn read_geometry(path: &Path) -> Result<FeatureSet<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_geojson(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stored_election(data: &Path, name: &str) -> Result<PathBuf> {
    let file = if name.ends_with(".csv") { name.to_string() } else { format!("{name}.csv") };
    if parse_file_name(&file.to_ascii_lowercase()).is_none() {
        bail!("{name:?} is not an election name like provincial_2019 or federal_1963_cd");
    }
    Ok(data.join(file))
}

fn scrape(
    election_type: ElectionType,
    year: i32,
    config: &Path,
    fixtures: Option<&Path>,
    out: &Path,
    max_attempts: u32,
    allow_empty: bool,
) -> Result<()> {
    let site = SiteConfig::load(config)?;
    let policy = FetchPolicy { max_attempts, ..FetchPolicy::default() };
    let transport: Box<dyn Transport> = match fixtures {
        Some(dir) => Box::new(FixtureTransport::open(dir)?),
        None => Box::new(HttpTransport::new(&policy)),
    };
    let rows = scrape_election(election_type, year, &site, &policy, transport.as_ref())?;
    let level = site.source_for(election_type, year).map_or(RegionLevel::Province, |s| s.level);
    let path = write_election_csv(&rows, election_type, year, level, out, allow_empty)?;
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn render(
    election: Option<&str>,
    geom: &Path,
    out: &Path,
    data: &Path,
    (width, height): (u32, u32),
    palette: Option<&Path>,
    strict: bool,
) -> Result<()> {
    let fs = read_geometry(geom)?;
    let svg = match election {
        None => render_uncolored(&fs, width, height)?,
        Some(name) => {
            let rows = read_election_csv(&stored_election(data, name)?)?;
            let (joined, report) = merge_results_with_geometry(&rows, &fs, strict)?;
            if !report.is_complete() {
                eprintln!("warning: incomplete join\n{}", report.to_toml());
            }
            let overrides = match palette {
                Some(p) => parse_overrides(&std::fs::read_to_string(p)?)?,
                None => BTreeMap::new(),
            };
            let parties: Vec<&str> = joined.iter().map(|j| j.winner_party.as_str()).collect();
            let palette = assign_party_colors(&parties, &overrides)?;
            let unmatched: Vec<RegionFeature<f64>> =
                report.unmatched_geometry_ids.iter().filter_map(|id| fs.get(*id).cloned()).collect();
            render_map(&joined, &unmatched, &palette, width, height)?
        }
    };
    write_text(out, &svg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Scrape { election_type, year, config, fixtures, out, max_attempts, allow_empty } => {
            scrape(election_type, year, &config, fixtures.as_deref(), &out, max_attempts, allow_empty)?;
        }
        Command::Simplify { retain, input, output } => {
            let fs = read_geometry(&input)?;
            let simplified = simplify(&fs, retain)?;
            eprintln!("{} -> {} vertices", fs.vertex_count(), simplified.vertex_count());
            write_text(&output, &to_geojson(&simplified))?;
        }
        Command::Convert { shp, dbf, id, name, output } => {
            let shp_bytes = std::fs::read(&shp).with_context(|| format!("reading {}", shp.display()))?;
            let dbf_bytes = std::fs::read(&dbf).with_context(|| format!("reading {}", dbf.display()))?;
            let fs = parse_shapefile::<f64>(&shp_bytes, &dbf_bytes, &id, &name)?;
            eprintln!("{} features, {} vertices", fs.len(), fs.vertex_count());
            write_text(&output, &to_geojson(&fs))?;
        }
        Command::Render { election, geom, out, data, width, height, palette, strict } => {
            render(election.as_deref(), &geom, &out, &data, (width, height), palette.as_deref(), strict)?;
        }
        Command::JoinReport { election, geom, data } => {
            let rows = read_election_csv(&stored_election(&data, &election)?)?;
            let fs = read_geometry(&geom)?;
            match merge_results_with_geometry(&rows, &fs, true) {
                Ok((_, report)) => print!("{}", report.to_toml()),
                Err(JoinError::StrictJoinFailure(report)) => {
                    print!("{}", report.to_toml());
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Trend { election_type, data, predict: at } => {
            let catalog = build_catalog(&data)?;
            let trend = candidate_trend(&catalog, election_type)?;
            let mut body = serde_json::to_value(&trend)?;
            if let Some(x) = at {
                body["prediction"] = serde_json::json!({ "year": x, "value": predict(&trend.model, x) });
            }
            println!("{}", serde_json::to_string_pretty(&body)?);
        }
        Command::Serve { config } => {
            let Some(path) = ServiceConfig::config_path(config.as_deref()) else {
                bail!("no config: pass --config or set {}", ballotmap_service::CONFIG_ENV);
            };
            ballotmap_service::serve_blocking(ServiceConfig::load(&path)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
