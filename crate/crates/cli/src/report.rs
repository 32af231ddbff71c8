use std::fmt::Write;
use std::path::Path;

use zonecut::quality::{MConvention, QualityKind};
use zonecut::zoning::ZonePlan;

use crate::args::ReportArgs;
use crate::error::CliError;

fn load(path: &Path) -> Result<ZonePlan, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let plan: ZonePlan =
        serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if plan.zone_count == 0 || plan.assignment.is_empty() {
        return Err(CliError::usage(format!("{}: plan has no zones", path.display())));
    }
    Ok(plan)
}

fn fmt_q(q: Option<f64>) -> String {
    q.map_or_else(|| "n/a (no trips)".into(), |v| format!("{v:.4}"))
}

/// Per-zone table with a Sum row, then the plan-level figures.
pub fn plan_table(title: &str, plan: &ZonePlan) -> String {
    let mut s = String::new();
    let taz_count: usize = plan.stats.zones.iter().map(|z| z.taz_count).sum();
    let _ = writeln!(s, "{title}: {} zones, {taz_count} TAZs", plan.zone_count);
    let _ = writeln!(
        s,
        "{:>5} {:>6} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "zone", "TAZs", "area_km2", "population", "intra", "total", "cut-off%"
    );
    for z in &plan.stats.zones {
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>12.2} {:>12.0} {:>12} {:>12} {:>9.1}",
            z.zone, z.taz_count, z.area_km2, z.population, z.intra_trips, z.total_trips, z.cutoff_pct
        );
    }
    let area: f64 = plan.stats.zones.iter().map(|z| z.area_km2).sum();
    let pop: f64 = plan.stats.zones.iter().map(|z| z.population).sum();
    let _ = writeln!(
        s,
        "{:>5} {:>6} {:>12.2} {:>12.0} {:>12} {:>12} {:>9.1}",
        "Sum", taz_count, area, pop, plan.stats.intra_total, plan.stats.grand_total, plan.stats.total_cutoff_pct
    );
    let q = &plan.quality;
    let kind = match q.kind {
        QualityKind::Standard => "standard".to_string(),
        QualityKind::Geographic => format!("geographic, alpha {}, {} m", q.alpha, match q.m_convention { MConvention::RawWeight => "raw", MConvention::DeflatedWeight => "deflated" }),
    };
    let _ = writeln!(s, "total cut-off: {:.1}% ({} of {} trips)", plan.stats.total_cutoff_pct, plan.stats.cut_trips, plan.stats.grand_total);
    let _ = writeln!(s, "modularity: {}", fmt_q(plan.modularity));
    let _ = writeln!(s, "geographic modularity ({kind}): {}", fmt_q(plan.geo_modularity));
    s
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let plan = load(&args.plan)?;
    let mut out = plan_table("plan", &plan);
    if let Some(path) = &args.reference {
        let reference = load(path)?;
        out.push('\n');
        out.push_str(&plan_table("reference", &reference));
        let _ = writeln!(
            out,
            "\nreference minus plan: cut-off {:+.1} points, intra trips {:+}, zones {:+}",
            reference.stats.total_cutoff_pct - plan.stats.total_cutoff_pct,
            reference.stats.intra_total as i64 - plan.stats.intra_total as i64,
            reference.zone_count as i64 - plan.zone_count as i64
        );
    }
    print!("{out}");
    Ok(())
}
