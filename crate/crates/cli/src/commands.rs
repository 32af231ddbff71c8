use std::path::{Path, PathBuf};

use serde::Serialize;
use zonecut::contiguity::write_repair_log;
use zonecut::geo::{build_adjacency, build_distance_matrix, read_distance_csv, read_taz_geojson, write_taz_geojson, AdjacencyGraph, DistanceOptions, Taz, TazId};
use zonecut::ingest::{ingest_parsed, parse_trips, read_flow_csv, write_flow_csv, write_trips, CleaningRules, IngestSummary, Mode};
use zonecut::network::{build_network, NetworkSummary, SpatialNetwork};
use zonecut::partition::{read_partition_csv, write_partition_csv, Partition};
use zonecut::pipeline::detect_zones;
use zonecut::synth::generate;
use zonecut::zoning::{compare_to_reference, merge_to_k, write_plan_csv, write_plan_geojson, MergeStep, ZonePlan};

use crate::args::{IngestArgs, NetworkArgs, SynthArgs};
use crate::artifacts::Artifacts;
use crate::config::{split_trip_arg, RunConfig};
use crate::error::CliError;

fn required(flag: Option<&PathBuf>, config: Option<&PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    flag.or(config).cloned().ok_or_else(|| CliError::usage(format!("missing --{name} (or inputs.{name} in the config)")))
}

fn read_tazs(art: &mut Artifacts, path: &Path) -> Result<Vec<Taz>, CliError> {
    let bytes = art.read_input(path)?;
    read_taz_geojson(bytes.as_slice()).map_err(|e| CliError::from(e).context(path.display()))
}

fn write_plan_files(art: &mut Artifacts, stem: &str, plan: &ZonePlan, tazs: &[Taz]) -> Result<(), CliError> {
    art.add_json(&format!("{stem}.json"), plan)?;
    art.add_with(&format!("{stem}.csv"), |w| write_plan_csv(plan, w))?;
    art.add_with(&format!("{stem}.geojson"), |w| write_plan_geojson(plan, tazs, w))
}

fn partition_csv(art: &mut Artifacts, name: &str, ids: &[TazId], p: &Partition) -> Result<(), CliError> {
    art.add_with(name, |w| write_partition_csv(ids, p, w))
}

pub fn synth(cfg: &mut RunConfig, args: &SynthArgs) -> Result<Artifacts, CliError> {
    let s = &mut cfg.synth;
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { s.$f = v; })* };
    }
    set!(rows, cols, block_rows, block_cols, cell_km, beta, intra_multiplier, trips, self_trips);
    let (city, trips) = generate(s)?;
    let mut art = Artifacts::default();
    art.add_with("tazs.geojson", |w| write_taz_geojson(&city.tazs, w))?;
    art.add_with("trips.csv", |w| write_trips(&trips, w))?;
    let ids: Vec<TazId> = city.tazs.iter().map(|t| t.id).collect();
    partition_csv(&mut art, "truth.csv", &ids, &city.truth)?;
    println!(
        "synthetic city: {} TAZs, {} trips, {} planted zones",
        city.tazs.len(),
        trips.len(),
        city.truth.zone_count()
    );
    Ok(art)
}

#[derive(Serialize)]
struct MalformedEntry {
    file: String,
    line: u64,
    reason: String,
}

#[derive(Serialize)]
struct IngestReport<'a> {
    summary: &'a IngestSummary,
    by_mode: Vec<(&'static str, u64)>,
    malformed: Vec<MalformedEntry>,
}

pub fn ingest(cfg: &mut RunConfig, args: &IngestArgs) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let taz_path = required(args.tazs.as_ref(), cfg.inputs.tazs.as_ref(), "tazs")?;
    if !args.trips.is_empty() {
        cfg.inputs.trips = args.trips.clone();
    }
    if cfg.inputs.trips.is_empty() {
        return Err(CliError::usage("missing --trips (or inputs.trips in the config)"));
    }
    cfg.inputs.tazs = Some(taz_path.clone());
    let tazs = read_tazs(&mut art, &taz_path)?;
    let mut batches = Vec::new();
    let mut malformed = Vec::new();
    for arg in &cfg.inputs.trips {
        let (mode, path) = split_trip_arg(arg);
        let mode = mode.map(|m| m.parse::<Mode>().map_err(CliError::usage)).transpose()?;
        let bytes = art.read_input(Path::new(path))?;
        let parsed = parse_trips(bytes.as_slice(), mode).map_err(|e| CliError::from(e).context(path))?;
        malformed.extend(parsed.malformed.iter().map(|r| MalformedEntry {
            file: path.to_string(),
            line: r.line,
            reason: r.reason.clone(),
        }));
        batches.push(parsed);
    }
    let (flows, summary) = ingest_parsed(batches, &tazs, &CleaningRules::default());
    debug_assert!(summary.conserves(&flows));
    let report = IngestReport {
        summary: &summary,
        by_mode: flows.by_mode().iter().map(|(m, &n)| (m.as_str(), n)).collect(),
        malformed,
    };
    art.add_with("flows.csv", |w| write_flow_csv(&flows, w))?;
    art.add_json("ingest_report.json", &report)?;
    let c = &summary.cleaning;
    println!(
        "rows {}: parsed {}, malformed {}; cleaned {}, dropped {} (duplicate {}, null {}, bounds {}, speed {}, duration {}, unmatched {}); flow total {}",
        summary.rows,
        summary.parsed,
        summary.malformed,
        c.output,
        c.dropped(),
        c.duplicate,
        c.null_field,
        c.out_of_bounds,
        c.speed_anomaly,
        c.duration_anomaly,
        c.unmatched_endpoint,
        flows.total_trips()
    );
    Ok(art)
}

struct Loaded {
    tazs: Vec<Taz>,
    net: SpatialNetwork,
    adj: AdjacencyGraph,
}

fn load_network(cfg: &mut RunConfig, args: &NetworkArgs, art: &mut Artifacts) -> Result<Loaded, CliError> {
    let taz_path = required(args.tazs.as_ref(), cfg.inputs.tazs.as_ref(), "tazs")?;
    let flow_path = required(args.flows.as_ref(), cfg.inputs.flows.as_ref(), "flows")?;
    let dist_path = args.distances.as_ref().or(cfg.inputs.distances.as_ref()).cloned();
    cfg.inputs.tazs = Some(taz_path.clone());
    cfg.inputs.flows = Some(flow_path.clone());
    cfg.inputs.distances = dist_path.clone();
    let tazs = read_tazs(art, &taz_path)?;
    let bytes = art.read_input(&flow_path)?;
    let mut flows = read_flow_csv(bytes.as_slice()).map_err(|e| CliError::from(e).context(flow_path.display()))?;
    if cfg.contiguity.drop_self_loops {
        flows = flows.without_self_loops();
    }
    let user = match &dist_path {
        Some(p) => {
            let bytes = art.read_input(p)?;
            Some(read_distance_csv(bytes.as_slice()).map_err(|e| CliError::from(e).context(p.display()))?)
        }
        None => None,
    };
    let dist = build_distance_matrix(&tazs, user.as_ref(), DistanceOptions::default())?;
    let net = build_network(&flows, &dist, cfg.quality.alpha)?.with_attributes(&tazs)?;
    let adj = build_adjacency(&tazs, cfg.contiguity.snap_tol_m)?;
    Ok(Loaded { tazs, net, adj })
}

fn read_partition(art: &mut Artifacts, path: &Path, ids: &[TazId]) -> Result<Partition, CliError> {
    let bytes = art.read_input(path)?;
    read_partition_csv(bytes.as_slice(), ids).map_err(|e| CliError::from(e).context(path.display()))
}

#[derive(Serialize)]
struct DetectSummary<'a> {
    network: NetworkSummary,
    zones_detected: usize,
    zones_final: usize,
    split_zones: usize,
    repairs: usize,
    islands: &'a [Vec<TazId>],
    quality: f64,
    total_cutoff_pct: f64,
}

pub fn detect(cfg: &mut RunConfig, args: &NetworkArgs) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let Loaded { tazs, net, adj } = load_network(cfg, args, &mut art)?;
    let d = detect_zones(&net, &adj, &cfg.leiden(), cfg.contiguity.min_zone_km2)?;
    let ids = net.ids();
    partition_csv(&mut art, "partition.csv", ids, &d.repair.partition)?;
    partition_csv(&mut art, "raw_partition.csv", ids, &d.detection.partition)?;
    art.add_json("quality_trace.json", &d.detection)?;
    art.add_with("repair_log.jsonl", |w| write_repair_log(&d.repair.log, w))?;
    write_plan_files(&mut art, "plan", &d.plan, &tazs)?;
    let quality = zonecut::quality::quality(&net, &d.repair.partition, &cfg.quality())?;
    art.add_json(
        "detect_summary.json",
        &DetectSummary {
            network: net.summary(),
            zones_detected: d.detection.partition.zone_count(),
            zones_final: d.plan.zone_count,
            split_zones: d.repair.split_zones,
            repairs: d.repair.log.len(),
            islands: &d.repair.islands,
            quality,
            total_cutoff_pct: d.plan.stats.total_cutoff_pct,
        },
    )?;
    if let Some(path) = args.reference.as_ref().or(cfg.inputs.reference.as_ref()).cloned() {
        let reference = read_partition(&mut art, &path, ids)?;
        let cmp = compare_to_reference(&d.repair.partition, &reference, &net, &cfg.quality())?;
        art.add_json("comparison.json", &cmp)?;
        println!("reference cut-off {:.1}%, delta {:+.1} points", cmp.reference.stats.total_cutoff_pct, cmp.delta_cutoff_pct);
        cfg.inputs.reference = Some(path);
    }
    println!(
        "{} zones detected, {} after repair ({} repairs, {} islands); quality {:.4}; cut-off {:.1}%",
        d.detection.partition.zone_count(),
        d.plan.zone_count,
        d.repair.log.len(),
        d.repair.islands.len(),
        quality,
        d.plan.stats.total_cutoff_pct
    );
    Ok(art)
}

#[derive(Serialize)]
struct MergeLog<'a> {
    objective: f64,
    steps: &'a [MergeStep],
}

pub fn merge(cfg: &mut RunConfig, args: &NetworkArgs) -> Result<Artifacts, CliError> {
    let obj = cfg.merge_objective()?;
    let part_path = required(args.partition.as_ref(), cfg.inputs.partition.as_ref(), "partition")?;
    let mut art = Artifacts::default();
    let Loaded { tazs, net, adj } = load_network(cfg, args, &mut art)?;
    let input = read_partition(&mut art, &part_path, net.ids())?;
    cfg.inputs.partition = Some(part_path);
    if obj.k_target > input.zone_count() {
        return Err(CliError::usage(format!(
            "--merge-k {} exceeds the {} zones of the input plan",
            obj.k_target,
            input.zone_count()
        )));
    }
    let out = merge_to_k(&input, &adj, &net, &obj)?;
    let q = cfg.quality();
    let plan = ZonePlan::new(&out.partition, &net, &q)?;
    partition_csv(&mut art, "merged_partition.csv", net.ids(), &out.partition)?;
    write_plan_files(&mut art, "merged_plan", &plan, &tazs)?;
    art.add_json("merge_steps.json", &MergeLog { objective: out.objective, steps: &out.steps })?;
    let cmp = compare_to_reference(&out.partition, &input, &net, &q)?;
    art.add_json("comparison.json", &cmp)?;
    println!(
        "{} zones merged into {}; cut-off {:.1}% (input plan {:.1}%); objective {:.4}",
        input.zone_count(),
        plan.zone_count,
        plan.stats.total_cutoff_pct,
        cmp.reference.stats.total_cutoff_pct,
        out.objective
    );
    Ok(art)
}
