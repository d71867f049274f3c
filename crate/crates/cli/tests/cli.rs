use std::path::Path;
use std::process::{Command, Output};

use ballotmap_core::ingest::FixtureTransport;
use ballotmap_testkit::{dataset, table_one};

fn ballotmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ballotmap"))
        .args(args)
        .current_dir(dir)
        .env_remove("BALLOTMAP_CONFIG")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn scrape_from_saved_pages() {
    let dir = tempfile::tempdir().unwrap();
    let url = "https://results.example/provincial/2019.html";
    std::fs::create_dir(dir.path().join("pages")).unwrap();
    std::fs::write(dir.path().join("pages").join(FixtureTransport::file_name_for(url)), table_one::html_page()).unwrap();
    std::fs::write(
        dir.path().join("site.cfg"),
        "[selectors.province_level]\nclass = \"results\"\n\n[[elections]]\ntype = \"provincial\"\nyear = 2019\n\
         pages = [{ url = \"https://results.example/{type}/{year}.html\", kind = \"province_level\" }]\n",
    )
    .unwrap();
    let out = ballotmap(
        dir.path(),
        &["scrape", "--type", "provincial", "--year", "2019", "--config", "site.cfg", "--fixtures", "pages", "--out", "data"],
    );
    assert!(ok(&out).starts_with("13 rows"));
    let csv = std::fs::read_to_string(dir.path().join("data/provincial_2019.csv")).unwrap();
    assert_eq!(csv.lines().count(), 14);
    assert!(csv.contains("48,\"Alberta (Apr 16, '19)\",United Conservative Party,,,,,,true\r\n"));

    let missing = ballotmap(
        dir.path(),
        &["scrape", "--type", "federal", "--year", "1963", "--config", "site.cfg", "--fixtures", "pages"],
    );
    assert!(!missing.status.success());
}

#[test]
fn convert_simplify_render_and_report() {
    let dir = tempfile::tempdir().unwrap();
    dataset::write_fixture_dataset(dir.path()).unwrap();
    let (shp, dbf) = table_one::province_shapefile(50).to_bytes();
    std::fs::write(dir.path().join("pr.shp"), shp).unwrap();
    std::fs::write(dir.path().join("pr.dbf"), dbf).unwrap();

    ok(&ballotmap(dir.path(), &["convert", "pr.shp", "pr.dbf", "--id", "PRUID", "--name", "PRNAME", "provinces.geojson"]));
    let geojson = std::fs::read_to_string(dir.path().join("provinces.geojson")).unwrap();
    assert_eq!(geojson.matches("\"type\":\"Feature\"").count(), 13);

    let out = ballotmap(dir.path(), &["simplify", "--retain", "0.1", "provinces.geojson", "small.geojson"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("650 -> 65 vertices"));

    ok(&ballotmap(
        dir.path(),
        &["render", "--election", "provincial_2019", "--geom", "small.geojson", "--out", "map.svg", "--strict"],
    ));
    let svg = std::fs::read_to_string(dir.path().join("map.svg")).unwrap();
    assert_eq!(svg.matches("<path").count(), 13);

    ok(&ballotmap(dir.path(), &["render", "--geom", "small.geojson", "--out", "outline.svg"]));
    let outline = std::fs::read_to_string(dir.path().join("outline.svg")).unwrap();
    assert_eq!(outline.matches("fill=\"#d9d9d9\"").count(), 13);

    let report = ok(&ballotmap(dir.path(), &["join-report", "--election", "provincial_2019", "--geom", "small.geojson"]));
    assert!(report.contains("matched = 13"));
    let partial = ballotmap(dir.path(), &["join-report", "--election", "federal_1963", "--geom", "small.geojson"]);
    assert_eq!(partial.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&partial.stdout).contains("unmatched_geometry_ids = [62]"));

    let strict = ballotmap(
        dir.path(),
        &["render", "--election", "federal_1963", "--geom", "small.geojson", "--out", "x.svg", "--strict"],
    );
    assert!(!strict.status.success());
}

#[test]
fn trend_prints_model_and_prediction() {
    let dir = tempfile::tempdir().unwrap();
    dataset::write_fixture_dataset(dir.path()).unwrap();
    let out = ok(&ballotmap(dir.path(), &["trend", "--type", "federal", "--predict", "2019"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["series"].as_array().unwrap().len(), 2);
    assert!(v["prediction"]["value"].is_number());
}

#[test]
fn serve_rejects_bad_config_fast() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("svc.cfg"), "data_root = \"missing\"\n").unwrap();
    let out = ballotmap(dir.path(), &["serve", "--config", "svc.cfg"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
    let out = ballotmap(dir.path(), &["serve"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("BALLOTMAP_CONFIG"));
}
