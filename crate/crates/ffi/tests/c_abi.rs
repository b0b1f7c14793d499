use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use h2atlas::h2opt::{NodeModel, ResSource};
use h2atlas::service::fixture::{write_fixture, FixtureOptions};
use h2atlas::tech::Tech;
use h2atlas_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = h2a_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    h2a_string_free(p);
    s
}

#[test]
fn pure_functions_and_errors() {
    let mut gw = 0.0;
    assert_eq!(unsafe { h2a_pv_capacity_from_area(318.0, 20.0, &mut gw) }, H2aStatus::Ok);
    assert_eq!(gw, 15.9);
    assert!(h2a_last_error().is_null());

    assert_eq!(unsafe { h2a_pv_capacity_from_area(-1.0, 20.0, &mut gw) }, H2aStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { h2a_pv_capacity_from_area(1.0, 20.0, ptr::null_mut()) }, H2aStatus::NullPointer);
    assert!(last_error().contains("out_gw"));

    let v = unsafe { CStr::from_ptr(h2a_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));

    // null handles are rejected, frees accept null
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { h2a_curve_csv(ptr::null(), c("x").as_ptr(), c("y").as_ptr(), &mut out) }, H2aStatus::NullPointer);
    assert!(out.is_null());
    unsafe {
        h2a_store_free(ptr::null_mut());
        h2a_node_free(ptr::null_mut());
        h2a_eligibility_free(ptr::null_mut());
        h2a_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    let mut gw = 0.0;
    assert_eq!(unsafe { h2a_pv_capacity_from_area(0.0, 0.0, &mut gw) }, H2aStatus::InvalidArgument);
    std::thread::spawn(|| assert!(h2a_last_error().is_null())).join().unwrap();
    assert!(!last_error().is_empty());
}

#[test]
fn node_model_round_trip() {
    let mut model = NodeModel::new("n", 2030);
    model.sources.push(ResSource {
        tech: Tech::Pv,
        potential_mw: 1e4,
        cf_series: vec![0.25; 8760],
        lcoe: None,
    });
    model.water.groundwater_m3 = 1e8;
    let json = c(&serde_json::to_string(&model).unwrap());
    let mut node = ptr::null_mut();
    assert_eq!(unsafe { h2a_node_from_json(json.as_ptr(), &mut node) }, H2aStatus::Ok);

    let (mut lcoh, mut cost) = (0.0, 0.0);
    assert_eq!(unsafe { h2a_node_solve(node, 1000.0, 4, &mut lcoh, &mut cost) }, H2aStatus::Ok);
    assert!(lcoh > 0.0 && (cost / 1e6 - lcoh).abs() < 1e-9);

    assert_eq!(unsafe { h2a_node_solve(node, 1e9, 4, &mut lcoh, ptr::null_mut()) }, H2aStatus::Infeasible);

    let mut out = ptr::null_mut();
    let cfg = c(r#"{"max_steps": 3}"#);
    assert_eq!(unsafe { h2a_node_curve_json(node, cfg.as_ptr(), &mut out) }, H2aStatus::Ok);
    let curve: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(curve["points"].as_array().unwrap().len(), 3);

    let bad = c(r#"{"max_steps": "many"}"#);
    assert_eq!(unsafe { h2a_node_curve_json(node, bad.as_ptr(), &mut out) }, H2aStatus::InvalidArgument);
    assert!(out.is_null());
    unsafe { h2a_node_free(node) };

    let mut node = ptr::null_mut();
    assert_eq!(unsafe { h2a_node_from_json(c("{}").as_ptr(), &mut node) }, H2aStatus::InvalidArgument);
    assert!(node.is_null());
}

#[test]
fn store_run_and_queries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(&tmp.path().join("fx"), FixtureOptions::default()).unwrap();
    let root = c(tmp.path().join("store").to_str().unwrap());
    let mut store = ptr::null_mut();
    assert_eq!(unsafe { h2a_store_open(root.as_ptr(), &mut store) }, H2aStatus::Ok);

    let cfg = c(cfg.to_str().unwrap());
    let mut buf = [0 as c_char; 17];
    let mut cached = true;
    let st = unsafe { h2a_run(store, cfg.as_ptr(), 2, buf.as_mut_ptr(), buf.len(), &mut cached) };
    assert_eq!(st, H2aStatus::Ok, "{}", last_error());
    assert!(!cached);
    let run_id = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_owned();
    assert_eq!(run_id.as_bytes().len(), 16);

    let mut small = [0 as c_char; 8];
    let st = unsafe { h2a_run(store, cfg.as_ptr(), 0, small.as_mut_ptr(), small.len(), &mut cached) };
    assert_eq!(st, H2aStatus::BufferTooSmall);
    let st = unsafe { h2a_run(store, cfg.as_ptr(), 0, buf.as_mut_ptr(), buf.len(), &mut cached) };
    assert_eq!(st, H2aStatus::Ok);
    assert!(cached);

    let missing = c(tmp.path().join("nope.json").to_str().unwrap());
    let st = unsafe { h2a_run(store, missing.as_ptr(), 0, buf.as_mut_ptr(), buf.len(), &mut cached) };
    assert_eq!(st, H2aStatus::Io);

    let mut out = ptr::null_mut();
    let gid = c("BEN.10_1");
    assert_eq!(unsafe { h2a_curve_csv(store, run_id.as_ptr(), gid.as_ptr(), &mut out) }, H2aStatus::Ok);
    let curve = unsafe { take(out) };
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/curve_BEN.10_1.csv")).unwrap();
    assert_eq!(curve.lines().next(), golden.lines().next());
    assert_eq!(curve.lines().count(), golden.lines().count());

    assert_eq!(unsafe { h2a_layer_export(store, run_id.as_ptr(), c("lcoh").as_ptr(), true, &mut out) }, H2aStatus::Ok);
    assert_eq!(unsafe { take(out) }.lines().count(), 4);
    assert_eq!(unsafe { h2a_layer_export(store, run_id.as_ptr(), c("lcoh").as_ptr(), false, &mut out) }, H2aStatus::Ok);
    let fc: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(fc["type"], "FeatureCollection");
    let st = unsafe { h2a_layer_export(store, c("0000000000000000").as_ptr(), c("lcoh").as_ptr(), true, &mut out) };
    assert_eq!(st, H2aStatus::NotFound);

    let mut elig = ptr::null_mut();
    let st = unsafe { h2a_eligibility_open(store, run_id.as_ptr(), gid.as_ptr(), c("pv").as_ptr(), &mut elig) };
    assert_eq!(st, H2aStatus::Ok, "{}", last_error());
    let (mut base, mut same, mut less) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(h2a_eligibility_fraction(elig, &mut base), H2aStatus::Ok);
        assert_eq!(h2a_eligibility_whatif(elig, ptr::null(), ptr::null(), 0, &mut same), H2aStatus::Ok);
        let (ids, m) = ([1u8, 4], [900.0, 600.0]);
        assert_eq!(h2a_eligibility_whatif(elig, ids.as_ptr(), m.as_ptr(), 2, &mut less), H2aStatus::Ok);
        assert_eq!(h2a_eligibility_whatif(elig, ids.as_ptr(), m.as_ptr(), 2, ptr::null_mut()), H2aStatus::NullPointer);
        h2a_eligibility_free(elig);
    }
    assert_eq!(base, same);
    assert!(less <= base);
    let st = unsafe { h2a_eligibility_open(store, run_id.as_ptr(), gid.as_ptr(), c("hydro").as_ptr(), &mut elig) };
    assert_eq!(st, H2aStatus::InvalidArgument);

    unsafe { h2a_store_free(store) };
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/h2atlas.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["h2a_store_open", "h2a_run", "h2a_eligibility_whatif", "h2a_node_curve_json", "H2A_STATUS_PANIC"] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(cc.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"h2atlas.h\"\nint main(void) { H2aStore *s = 0; H2aStatus st = h2a_store_open(\"x\", &s); (void)st; h2a_store_free(s); return 0; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
