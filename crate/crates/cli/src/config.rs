use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zonecut::leiden::LeidenParams;
use zonecut::quality::{MConvention, QualityConfig, QualityKind};
use zonecut::synth::SyntheticCitySpec;
use zonecut::zoning::MergeObjective;

use crate::args::GlobalArgs;
use crate::error::CliError;

/// Everything a run depends on. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub inputs: Inputs,
    pub quality: QualitySection,
    pub leiden: LeidenSection,
    pub contiguity: ContiguitySection,
    pub merge: MergeSection,
    pub synth: SyntheticCitySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            inputs: Inputs::default(),
            quality: QualitySection::default(),
            leiden: LeidenSection::default(),
            contiguity: ContiguitySection::default(),
            merge: MergeSection::default(),
            synth: SyntheticCitySpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub tazs: Option<PathBuf>,
    /// Trip CSVs, each optionally prefixed `mode=` to fill empty mode cells.
    pub trips: Vec<String>,
    pub flows: Option<PathBuf>,
    pub distances: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualitySection {
    pub kind: QualityKind,
    pub alpha: f64,
    pub m_convention: MConvention,
}

impl Default for QualitySection {
    fn default() -> Self {
        let q = QualityConfig::default();
        Self { kind: q.kind, alpha: q.alpha, m_convention: q.m_convention }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeidenSection {
    pub max_outer_iters: usize,
    pub theta: f64,
    pub min_gain: f64,
}

impl Default for LeidenSection {
    fn default() -> Self {
        let p = LeidenParams::default();
        Self { max_outer_iters: p.max_outer_iters, theta: p.theta, min_gain: p.min_gain }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContiguitySection {
    pub min_zone_km2: f64,
    pub snap_tol_m: f64,
    pub drop_self_loops: bool,
}

impl Default for ContiguitySection {
    fn default() -> Self {
        Self { min_zone_km2: 0.0, snap_tol_m: 1.0, drop_self_loops: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSection {
    pub k: Option<usize>,
    pub lambda_pop: f64,
    pub lambda_area: f64,
    pub exact: bool,
}

impl Default for MergeSection {
    fn default() -> Self {
        Self { k: None, lambda_pop: 1.0, lambda_area: 1.0, exact: false }
    }
}

impl RunConfig {
    /// Reads `path` (if any) and applies the global flags on top.
    pub fn load(path: Option<&Path>, flags: &GlobalArgs) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                let mut cfg: RunConfig =
                    toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                cfg.resolve_paths(p.parent().unwrap_or(Path::new("")));
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(flags);
        Ok(cfg)
    }

    /// Input paths in a config file are relative to the file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.tazs, &mut i.flows, &mut i.distances, &mut i.partition, &mut i.reference] {
            fix(p);
        }
        for t in i.trips.iter_mut() {
            let (mode, path) = split_trip_arg(t);
            if Path::new(path).is_relative() {
                let joined = base.join(path).display().to_string();
                *t = match mode {
                    Some(m) => format!("{m}={joined}"),
                    None => joined,
                };
            }
        }
        if self.out.is_relative() {
            self.out = base.join(&self.out);
        }
    }

    fn apply(&mut self, f: &GlobalArgs) {
        if let Some(s) = f.seed {
            self.seed = s;
        }
        if let Some(o) = &f.out {
            self.out = o.clone();
        }
        if let Some(q) = f.quality {
            self.quality.kind = q;
        }
        if let Some(a) = f.alpha {
            self.quality.alpha = a;
        }
        if let Some(m) = f.m_convention {
            self.quality.m_convention = m;
        }
        if let Some(v) = f.min_zone_km2 {
            self.contiguity.min_zone_km2 = v;
        }
        if let Some(k) = f.merge_k {
            self.merge.k = Some(k);
        }
        if let Some(v) = f.lambda_pop {
            self.merge.lambda_pop = v;
        }
        if let Some(v) = f.lambda_area {
            self.merge.lambda_area = v;
        }
        self.merge.exact |= f.merge_exact;
        self.contiguity.drop_self_loops |= f.drop_self_loops;
        self.synth.seed = self.seed;
    }

    pub fn quality(&self) -> QualityConfig {
        QualityConfig { kind: self.quality.kind, alpha: self.quality.alpha, m_convention: self.quality.m_convention }
    }

    pub fn leiden(&self) -> LeidenParams {
        LeidenParams {
            seed: self.seed,
            max_outer_iters: self.leiden.max_outer_iters,
            theta: self.leiden.theta,
            quality: self.quality(),
            min_gain: self.leiden.min_gain,
        }
    }

    pub fn merge_objective(&self) -> Result<MergeObjective, CliError> {
        match self.merge.k {
            None => Err(CliError::usage("merge needs a target zone count (--merge-k)")),
            Some(0) => Err(CliError::usage("--merge-k must be at least 1")),
            Some(k) => Ok(MergeObjective::new(k)
                .with_lambdas(self.merge.lambda_pop, self.merge.lambda_area)
                .exact(self.merge.exact)),
        }
    }
}

/// `mode=path` or plain `path`.
pub fn split_trip_arg(s: &str) -> (Option<&str>, &str) {
    match s.split_once('=') {
        Some((m, p)) if !m.is_empty() && !m.contains(['/', '\\', '.']) => (Some(m), p),
        _ => (None, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trip_args() {
        assert_eq!(split_trip_arg("ffbs=a/b.csv"), (Some("ffbs"), "a/b.csv"));
        assert_eq!(split_trip_arg("a/b=c.csv"), (None, "a/b=c.csv"));
        assert_eq!(split_trip_arg("trips.csv"), (None, "trips.csv"));
    }

    #[test]
    fn toml_sections_and_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\n[quality]\nkind = \"standard\"\n[merge]\nk = 3\n[synth]\nrows = 4\ncols = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.quality.kind, QualityKind::Standard);
        assert_eq!(cfg.quality.alpha, 1.0);
        assert_eq!(cfg.merge.k, Some(3));
        assert_eq!(cfg.synth.rows, 4);
        assert_eq!(cfg.synth.trips, SyntheticCitySpec::default().trips);
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }
}
