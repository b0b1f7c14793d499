use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use h2atlas::service::pipeline::{layer_csv, LAYER_CSV_HEADER};
use h2atlas::service::Store;

const BIN: &str = env!("CARGO_BIN_EXE_h2atlas");

fn cli(store: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("ATLAS_STORE")
        .env_remove("ATLAS_PORT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(tmp: &Path, corrupt: bool) -> PathBuf {
    let dir = tmp.join("fx");
    let mut args = vec!["fixture", dir.to_str().unwrap()];
    if corrupt {
        args.push("--corrupt-region");
    }
    let o = cli(&tmp.join("unused"), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    PathBuf::from(stdout(&o).trim())
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["--bogus"][..], &["run"], &["export", "--format", "xml", "--layer", "lcoh"], &["frobnicate"]] {
        let o = cli(tmp.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with("error:"), "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty());
    }
    assert!(stderr(&cli(tmp.path(), &["--bogus"])).contains("Usage"));
    let o = cli(tmp.path(), &["eligibility", "BEN.10_1", "--buffer", "1=-4"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(cli(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = cli(tmp.path(), &["run", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: "));

    let o = cli(tmp.path(), &["curve", "BEN.10_1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cli(tmp.path(), &["export", "--layer", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = fixture(tmp.path(), false);
    let o = cli(tmp.path(), &["water", "rcp45_medium_2030", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = cli(tmp.path(), &["water", "rcp85_medium_2050", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("files in total"), "{}", stderr(&o));
}

#[test]
fn run_twice_prints_cached_and_exports_match_store() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), false);
    let store = tmp.path().join("store");
    let first = cli(&store, &["--threads", "2", "run", cfg.to_str().unwrap()]);
    assert!(first.status.success(), "{}", stderr(&first));
    let line = stdout(&first);
    let id = line.split_whitespace().next().unwrap().to_string();
    assert_eq!(id.len(), 16);
    assert!(line.contains("completed regions=3 failed=0"), "{line}");

    let second = cli(&store, &["run", cfg.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout(&second).trim(), format!("{id} cached regions=3 failed=0"));

    let st = Store::open(&store).unwrap();
    for layer in ["eligibility", "lcoh", "socio_composite"] {
        let o = cli(&store, &["export", "--layer", layer, "--format", "csv"]);
        assert!(o.status.success());
        let text = stdout(&o);
        assert_eq!(text, layer_csv(&st, &id, layer).unwrap());
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LAYER_CSV_HEADER);
        assert_eq!(lines.count(), 3, "one row per region");
    }
    let out = tmp.path().join("lcoh.geojson");
    let o = cli(&store, &["export", "--layer", "lcoh", "-o", out.to_str().unwrap(), "--run", &id]);
    assert!(o.status.success());
    let fc: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(fc["features"].as_array().unwrap().len(), 3);

    let o = cli(&store, &["curve", "BEN.10_2"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("step,demand_t,lcoh,share_pv,share_wind,share_hydro,share_ely,share_batt,share_water\n"));

    let base = cli(&store, &["eligibility", "BEN.10_1", "--tech", "pv"]);
    assert!(base.status.success());
    let base: Value = serde_json::from_str(&stdout(&base)).unwrap();
    assert_eq!(base["eligible_fraction"], base["baseline_fraction"]);
    let more = cli(&store, &["eligibility", "BEN.10_1", "--tech", "pv", "--buffer", "1=900", "--buffer", "4=600"]);
    assert!(more.status.success(), "{}", stderr(&more));
    let more: Value = serde_json::from_str(&stdout(&more)).unwrap();
    assert!(more["eligible_fraction"].as_f64().unwrap() <= base["eligible_fraction"].as_f64().unwrap());
    assert_eq!(more["overrides"]["1"], 900.0);
}

#[test]
fn failed_region_is_reported_without_failing_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), true);
    let o = cli(&tmp.path().join("store"), &["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("regions=4 failed=1"));
    assert!(stderr(&o).contains("BEN.99_1"));
}

#[test]
fn water_summary_lists_every_region() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture(tmp.path(), false);
    let mut by_case = Vec::new();
    for case in ["conservative", "medium", "extreme"] {
        let o = cli(tmp.path(), &["water", &format!("rcp26_{case}_2030"), "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap(), vec!["gid", "sy_mean_mm", "groundwater_m3"]);
        let rows: Vec<(String, f64)> = rdr
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[0].to_string(), r[2].parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 3);
        by_case.push(rows);
    }
    // less water reserved for the environment leaves more to withdraw
    for k in 0..3 {
        assert!(by_case[0][k].1 <= by_case[1][k].1 && by_case[1][k].1 <= by_case[2][k].1, "{:?}", by_case);
    }
}
