use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use zonecut::quality::{MConvention, QualityKind};

#[derive(Debug, Parser)]
#[command(name = "zonecut", version, about = "Delineate contiguous control zones from trip flows")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_kind)]
    pub quality: Option<QualityKind>,
    /// Distance decay exponent.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_parser = parse_convention)]
    pub m_convention: Option<MConvention>,
    /// Zones smaller than this are merged into a neighbor during repair.
    #[arg(long, global = true)]
    pub min_zone_km2: Option<f64>,
    #[arg(long, global = true)]
    pub merge_k: Option<usize>,
    #[arg(long, global = true)]
    pub lambda_pop: Option<f64>,
    #[arg(long, global = true)]
    pub lambda_area: Option<f64>,
    /// Exhaustive merge search (at most 16 input zones).
    #[arg(long, global = true)]
    pub merge_exact: bool,
    /// Ignore trips that start and end in the same TAZ.
    #[arg(long, global = true)]
    pub drop_self_loops: bool,
}

fn parse_kind(s: &str) -> Result<QualityKind, String> {
    match s {
        "standard" => Ok(QualityKind::Standard),
        "geographic" => Ok(QualityKind::Geographic),
        _ => Err("expected `standard` or `geographic`".into()),
    }
}

fn parse_convention(s: &str) -> Result<MConvention, String> {
    match s {
        "raw" => Ok(MConvention::RawWeight),
        "deflated" => Ok(MConvention::DeflatedWeight),
        _ => Err("expected `raw` or `deflated`".into()),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city: TAZ layer, trip CSV and planted zones.
    Synth(SynthArgs),
    /// Trip CSVs to a TAZ flow matrix.
    Ingest(IngestArgs),
    /// Detect zones, repair contiguity and write the zone plan.
    Detect(NetworkArgs),
    /// Merge a zone plan into `--merge-k` macro-zones.
    Merge(NetworkArgs),
    /// Print zone plan tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub block_rows: Option<usize>,
    #[arg(long)]
    pub block_cols: Option<usize>,
    #[arg(long)]
    pub cell_km: Option<f64>,
    /// Gravity decay exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub intra_multiplier: Option<f64>,
    #[arg(long)]
    pub trips: Option<u64>,
    #[arg(long)]
    pub self_trips: Option<bool>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// TAZ GeoJSON.
    #[arg(long)]
    pub tazs: Option<PathBuf>,
    /// Trip CSV, optionally `MODE=PATH`; repeatable.
    #[arg(long = "trips")]
    pub trips: Vec<String>,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[arg(long)]
    pub tazs: Option<PathBuf>,
    /// Flow CSV written by `ingest`.
    #[arg(long)]
    pub flows: Option<PathBuf>,
    /// Optional `origin_id,dest_id,km` matrix replacing centroid distances.
    #[arg(long)]
    pub distances: Option<PathBuf>,
    /// Input partition CSV (required by `merge`).
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Reference partition CSV to compare against, e.g. administrative districts.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Zone plan JSON.
    #[arg(long)]
    pub plan: PathBuf,
    /// Reference plan JSON printed alongside, with deltas.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}
