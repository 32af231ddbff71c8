use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zonecut::geo::{rect_taz, write_taz_geojson, LonLat, Taz, TazId};
use zonecut::ingest::{write_flow_csv, FlowMatrix, TRIP_HEADER};
use zonecut::metrics::adjusted_rand_index;
use zonecut::partition::{read_partition_csv, Partition};
use zonecut::quality::QualityConfig;
use zonecut::zoning::ZonePlan;

fn zonecut(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonecut")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sample() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample")
}

fn grid(rows: usize, cols: usize) -> Vec<Taz> {
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (118.0 + c as f64 * 0.01, 32.0 + r as f64 * 0.01);
            let id = (r * cols + c + 1) as u64;
            out.push(rect_taz(id, LonLat::new(x, y), LonLat::new(x + 0.01, y + 0.01), 1e6, 100.0, 0.0).unwrap());
        }
    }
    out
}

/// Writes a TAZ layer and a flow CSV into `dir`.
fn write_case(dir: &Path, tazs: &[Taz], cells: &[(u64, u64, u64)]) {
    write_taz_geojson(tazs, std::fs::File::create(dir.join("tazs.geojson")).unwrap()).unwrap();
    let mut m = FlowMatrix::new();
    for &(o, d, t) in cells {
        m.add(TazId(o), TazId(d), t);
    }
    write_flow_csv(&m, std::fs::File::create(dir.join("flows.csv")).unwrap()).unwrap();
}

fn read_partition(path: &Path, n: u64) -> Partition {
    let ids: Vec<TazId> = (1..=n).map(TazId).collect();
    read_partition_csv(std::fs::File::open(path).unwrap(), &ids).unwrap()
}

#[test]
fn synth_writes_exact_trip_count_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let o = zonecut(dir.path(), &["--out", "c", "synth", "--rows", "2", "--cols", "2", "--trips", "100"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let trips = std::fs::read_to_string(dir.path().join("c/trips.csv")).unwrap();
    assert_eq!(trips.lines().count(), 101);
    assert_eq!(trips.lines().next().unwrap(), TRIP_HEADER.join(","));
    let truth = read_partition(&dir.path().join("c/truth.csv"), 4);
    assert_eq!(truth.zone_count(), 4);
    assert!(dir.path().join("c/synth.manifest.json").exists());
}

#[test]
fn synth_rejects_invalid_spec() {
    let dir = tempfile::tempdir().unwrap();
    let o = zonecut(dir.path(), &["--out", "c", "synth", "--rows", "2", "--block-rows", "3"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("c").exists());
}

#[test]
fn ingest_shipped_sample() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample();
    let tazs = s.join("tazs.geojson");
    let trips = s.join("trips.csv");
    let o = zonecut(dir.path(), &["--out", "o", "ingest", "--tazs", tazs.to_str().unwrap(), "--trips", trips.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{o:?}");
    let flows = zonecut::ingest::read_flow_csv(std::fs::File::open(dir.path().join("o/flows.csv")).unwrap()).unwrap();
    let rows = std::fs::read_to_string(&trips).unwrap().lines().count() as u64 - 1;
    assert_eq!(flows.total_trips(), rows);
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["matched"], rows);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/ingest.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn ingest_empty_trips_and_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let tazs = sample().join("tazs.geojson");
    std::fs::write(dir.path().join("empty.csv"), format!("{}\n", TRIP_HEADER.join(","))).unwrap();
    let o = zonecut(dir.path(), &["--out", "o", "ingest", "--tazs", tazs.to_str().unwrap(), "--trips", "ffbs=empty.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let flows = std::fs::read_to_string(dir.path().join("o/flows.csv")).unwrap();
    assert_eq!(flows.lines().count(), 1);
    std::fs::write(dir.path().join("bad.csv"), "who,when\n1,2\n").unwrap();
    let o = zonecut(dir.path(), &["--out", "p", "ingest", "--tazs", tazs.to_str().unwrap(), "--trips", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("p").exists());
}

#[test]
fn detect_recovers_planted_city_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let o = zonecut(d, args);
        assert_eq!(code(&o), 0, "{o:?}");
    };
    run(&["--out", "c", "synth", "--beta", "1", "--trips", "100000"]);
    run(&["--out", "i", "ingest", "--tazs", "c/tazs.geojson", "--trips", "c/trips.csv"]);
    let detect = ["detect", "--tazs", "c/tazs.geojson", "--flows", "i/flows.csv", "--reference", "c/truth.csv"];
    for out in ["a", "b"] {
        let mut args = vec!["--m-convention", "deflated", "--out", out];
        args.extend(detect);
        run(&args);
    }
    let found = read_partition(&d.join("a/partition.csv"), 400);
    let truth = read_partition(&d.join("c/truth.csv"), 400);
    assert_eq!(found.zone_count(), 4);
    assert!(adjusted_rand_index(&found, &truth) >= 0.9);
    for f in ["partition.csv", "plan.json", "quality_trace.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let cmp: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a/comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["delta_zone_count"], 0);
}

#[test]
fn detect_without_flows_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_case(dir.path(), &grid(1, 1), &[]);
    let o = zonecut(dir.path(), &["--out", "o", "detect", "--tazs", "tazs.geojson", "--flows", "flows.csv"]);
    assert_eq!(code(&o), 3, "{o:?}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn metro_edge_triggers_repair() {
    let dir = tempfile::tempdir().unwrap();
    let mut cells = vec![];
    for i in 1..=25u64 {
        if i % 5 != 0 {
            cells.push((i, i + 1, 10));
        }
        if i <= 20 {
            cells.push((i, i + 5, 10));
        }
    }
    cells.push((1, 25, 2000));
    write_case(dir.path(), &grid(5, 5), &cells);
    let o = zonecut(dir.path(), &["--out", "o", "--quality", "standard", "detect", "--tazs", "tazs.geojson", "--flows", "flows.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let raw = read_partition(&dir.path().join("o/raw_partition.csv"), 25);
    assert_eq!(raw.zone_of(0), raw.zone_of(24));
    let log = std::fs::read_to_string(dir.path().join("o/repair_log.jsonl")).unwrap();
    assert!(!log.is_empty());
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(first["rule"].as_u64().unwrap() >= 1);
}

#[test]
fn merge_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // two 1x2 islands a degree apart
    let mut tazs = grid(1, 2);
    for t in grid(1, 2) {
        let b = t.bbox();
        let shift = |p: LonLat| LonLat::new(p.lon + 1.0, p.lat);
        tazs.push(rect_taz(t.id.0 + 2, shift(b.min), shift(b.max), 1e6, 100.0, 0.0).unwrap());
    }
    write_case(d, &tazs, &[(1, 2, 5), (3, 4, 5), (1, 3, 1)]);
    std::fs::write(d.join("p.csv"), "taz_id,zone_id\n1,0\n2,1\n3,2\n4,3\n").unwrap();
    let merge = |k: &str, out: &str| {
        zonecut(d, &["--out", out, "--merge-k", k, "merge", "--tazs", "tazs.geojson", "--flows", "flows.csv", "--partition", "p.csv"])
    };
    let o = merge("4", "same");
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(read_partition(&d.join("same/merged_partition.csv"), 4), read_partition(&d.join("p.csv"), 4));
    assert_eq!(code(&merge("2", "two")), 0);
    assert_eq!(read_partition(&d.join("two/merged_partition.csv"), 4).assignment(), &[0, 0, 1, 1]);
    assert_eq!(code(&merge("1", "one")), 4);
    assert_eq!(code(&merge("0", "zero")), 1);
    assert_eq!(code(&merge("5", "five")), 1);
    let o = zonecut(d, &["--out", "x", "--merge-k", "2", "merge", "--tazs", "tazs.geojson", "--flows", "flows.csv"]);
    assert_eq!(code(&o), 1);
    for out in ["one", "zero", "five", "x"] {
        assert!(!d.join(out).exists());
    }
}

/// A two-zone plan whose totals reproduce a published cut-off share.
fn arithmetic_plan(dir: &Path, name: &str, intra: u64, total: u64) -> PathBuf {
    let tazs = grid(1, 2);
    let case_dir = dir.join(name);
    std::fs::create_dir_all(&case_dir).unwrap();
    write_case(&case_dir, &tazs, &[(1, 1, intra), (1, 2, total - intra)]);
    let flows = zonecut::ingest::read_flow_csv(std::fs::File::open(case_dir.join("flows.csv")).unwrap()).unwrap();
    let dist = zonecut::geo::build_distance_matrix(&tazs, None, Default::default()).unwrap();
    let net = zonecut::network::build_network(&flows, &dist, 1.0).unwrap().with_attributes(&tazs).unwrap();
    let plan = ZonePlan::new(&Partition::new(vec![0, 1]).unwrap(), &net, &QualityConfig::default()).unwrap();
    let path = case_dir.join("plan.json");
    std::fs::write(&path, serde_json::to_vec(&plan).unwrap()).unwrap();
    path
}

#[test]
fn report_prints_published_totals() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sum_row = arithmetic_plan(d, "t3", 9_139_790, 16_701_097);
    let merged = arithmetic_plan(d, "t5", 12_553_319, 16_701_097);
    let o = zonecut(d, &["report", "--plan", sum_row.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("total cut-off: 45.3%"), "{text}");
    assert!(text.lines().any(|l| l.trim_start().starts_with("Sum") && l.ends_with("45.3")), "{text}");
    assert!(text.contains("modularity: ") && text.contains("geographic modularity"));
    let o = zonecut(d, &["report", "--plan", merged.to_str().unwrap(), "--reference", sum_row.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(text.contains("total cut-off: 24.8%"), "{text}");
    assert!(text.contains("cut-off +20.4 points"), "{text}");
}

#[test]
fn report_rejects_missing_and_empty_plans() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&zonecut(d, &["report", "--plan", "nope.json"])), 2);
    let path = arithmetic_plan(d, "p", 5, 10);
    let mut plan: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    plan["zone_count"] = 0.into();
    plan["zones"] = serde_json::json!([]);
    plan["assignment"] = serde_json::json!([]);
    std::fs::write(d.join("empty.json"), plan.to_string()).unwrap();
    assert_eq!(code(&zonecut(d, &["report", "--plan", "empty.json"])), 1);
    std::fs::write(d.join("junk.json"), "{}").unwrap();
    assert_eq!(code(&zonecut(d, &["report", "--plan", "junk.json"])), 2);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "seed = 3\nout = \"from_config\"\n[synth]\nrows = 4\ncols = 4\ntrips = 50\n[quality]\nalpha = 2.0\n",
    )
    .unwrap();
    let o = zonecut(d, &["--config", "run.toml", "--seed", "8", "synth"]);
    assert_eq!(code(&o), 0, "{o:?}");
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("from_config/synth.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 8);
    assert_eq!(manifest["config"]["synth"]["seed"], 8);
    assert_eq!(manifest["config"]["synth"]["rows"], 4);
    assert_eq!(manifest["config"]["quality"]["alpha"], 2.0);
    std::fs::write(d.join("bad.toml"), "sede = 1\n").unwrap();
    assert_eq!(code(&zonecut(d, &["--config", "bad.toml", "synth"])), 2);
    assert_eq!(code(&zonecut(d, &["--quality", "fancy", "synth"])), 1);
}
