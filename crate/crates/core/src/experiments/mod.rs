// SPDX-License-Identifier: Apache-2.0

//! Dataset generation, persistence, evaluation and reporting.
//!
//! A dataset directory holds `manifest.json`, `circuit.bench` (the base
//! netlist), `instances/NNNNN.json` (one record per locked instance with
//! its attack labels) and `attacks.log.jsonl`.

mod metrics;
mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{sat_attack, AttackConfig, AttackError, AttackLogLine, AttackStatus, LabelKind};
use crate::icnet::{GraphInput, IcnetError, ModelConfig, Sample};
use crate::netlist::{emit_bench, parse_bench, Circuit, NetlistError};
use crate::obfuscate::{random_obfuscate, InstanceRecord, ObfuscationError, ObfuscationInstance, ObfuscationKind};

pub use metrics::{
    attention_report, evaluate, linear_slope, mse, pearson, spearman, AttentionReport, MetricsReport,
};
pub use synthetic::synthetic_samples;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CIRCUIT_FILE: &str = "circuit.bench";
pub const INSTANCE_DIR: &str = "instances";
pub const ATTACK_LOG_FILE: &str = "attacks.log.jsonl";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Obfuscation(#[from] ObfuscationError),
    #[error("instance {id}: {source}")]
    Instance {
        id: usize,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error(transparent)]
    Cnf(#[from] crate::cnf::CnfError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Icnet(#[from] IcnetError),
    #[error("{0}")]
    Invalid(String),
    #[error("statistic undefined: {0}")]
    Undefined(String),
}

pub(crate) fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ExperimentError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn from_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ExperimentError> {
    serde_json::from_str(text).map_err(|e| ExperimentError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Per-instance seed derived from the master seed (SplitMix64 step).
pub fn instance_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub wall_seconds: f64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub iterations: usize,
    pub status: AttackStatus,
    pub censored: bool,
}

impl Labels {
    pub fn value(&self, kind: LabelKind) -> f64 {
        crate::attack::label_value(self.wall_seconds, self.conflicts, kind)
    }

    /// Log-scale regression target: `ln(1 + v)` of the raw wall time or
    /// conflict count.
    pub fn target(&self, kind: LabelKind) -> f64 {
        match kind {
            LabelKind::WallSeconds | LabelKind::Log1pSeconds => self.wall_seconds.ln_1p(),
            LabelKind::Conflicts | LabelKind::Log1pConflicts => (self.conflicts as f64).ln_1p(),
        }
    }
}

/// Label value on `kind`'s scale recovered from a log-scale target.
pub fn label_from_target(target: f64, kind: LabelKind) -> f64 {
    match kind {
        LabelKind::Log1pSeconds | LabelKind::Log1pConflicts => target,
        LabelKind::WallSeconds | LabelKind::Conflicts => target.exp_m1(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: usize,
    pub n_locations: usize,
    #[serde(flatten)]
    pub instance: InstanceRecord,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub bench_file: String,
    pub location_range: (usize, usize),
    pub count: usize,
    pub kind: ObfuscationKind,
    pub seed: u64,
    pub attack: AttackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub circuit_file: String,
    pub gen: GenConfig,
    pub default_label: LabelKind,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub base: Arc<Circuit>,
    pub records: Vec<DatasetRecord>,
}

/// Parses `"lo:hi"` or `"n"`.
pub fn parse_range(text: &str) -> Result<(usize, usize), ExperimentError> {
    let bad = || ExperimentError::Invalid(format!("bad location range `{text}`"));
    let (lo, hi) = match text.split_once(':') {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let v = text.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn attack_one(base: &Arc<Circuit>, cfg: &GenConfig, id: usize) -> Result<(DatasetRecord, AttackLogLine), ExperimentError> {
    let seed = instance_seed(cfg.seed, id as u64);
    let (lo, hi) = cfg.location_range;
    let n_locations = ChaCha8Rng::seed_from_u64(seed).random_range(lo..=hi);
    let inst = random_obfuscate(base.clone(), n_locations, cfg.kind, seed)?;
    let r = sat_attack(&inst, &cfg.attack)?;
    if r.verified == Some(false) {
        return Err(ExperimentError::Invalid("recovered key failed verification".into()));
    }
    let labels = Labels {
        wall_seconds: r.wall_seconds,
        conflicts: r.total_stats.conflicts,
        decisions: r.total_stats.decisions,
        propagations: r.total_stats.propagations,
        iterations: r.iterations,
        status: r.status,
        censored: r.status == AttackStatus::Timeout,
    };
    let record = DatasetRecord {
        id,
        n_locations,
        instance: inst.to_record(&cfg.bench_file),
        labels,
    };
    Ok((record, AttackLogLine::new(id, n_locations, &r)))
}

/// Locks and attacks `cfg.count` instances of `base` in parallel. Each
/// instance draws from its own seed, so the result does not depend on the
/// number of worker threads.
pub fn generate_dataset(base: Arc<Circuit>, cfg: &GenConfig) -> Result<(Dataset, Vec<AttackLogLine>), ExperimentError> {
    let (lo, hi) = cfg.location_range;
    let eligible = crate::obfuscate::eligible_gates(&base, cfg.kind).len();
    if lo == 0 || lo > hi || hi > eligible {
        return Err(ExperimentError::Invalid(format!(
            "location range {lo}:{hi} outside 1:{eligible}"
        )));
    }
    let results: Vec<_> = (0..cfg.count)
        .into_par_iter()
        .map(|id| {
            attack_one(&base, cfg, id).map_err(|e| ExperimentError::Instance {
                id,
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let (records, log): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let dataset = Dataset {
        manifest: Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            circuit_file: CIRCUIT_FILE.to_string(),
            gen: cfg.clone(),
            default_label: LabelKind::Log1pSeconds,
        },
        base,
        records,
    };
    Ok((dataset, log))
}

impl Dataset {
    pub fn save(&self, dir: &Path, log: &[AttackLogLine]) -> Result<(), ExperimentError> {
        write(
            &dir.join(MANIFEST_FILE),
            &(serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"),
        )?;
        write(&dir.join(CIRCUIT_FILE), &emit_bench(&self.base))?;
        for r in &self.records {
            let path = dir.join(INSTANCE_DIR).join(format!("{:05}.json", r.id));
            write(&path, &(serde_json::to_string_pretty(r).expect("record serializes") + "\n"))?;
        }
        let mut lines = String::new();
        for l in log {
            lines.push_str(&serde_json::to_string(l).expect("log line serializes"));
            lines.push('\n');
        }
        write(&dir.join(ATTACK_LOG_FILE), &lines)
    }

    pub fn load(dir: &Path) -> Result<Dataset, ExperimentError> {
        let mpath = dir.join(MANIFEST_FILE);
        let manifest: Manifest = from_json(&mpath, &read(&mpath)?)?;
        let base = Arc::new(parse_bench(&read(&dir.join(&manifest.circuit_file))?)?);
        let idir = dir.join(INSTANCE_DIR);
        let entries = fs::read_dir(&idir).map_err(|source| ExperimentError::Io {
            path: idir.clone(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut records = Vec::with_capacity(paths.len());
        for p in paths {
            let r: DatasetRecord = from_json(&p, &read(&p)?)?;
            records.push(r);
        }
        records.sort_by_key(|r| r.id);
        Ok(Dataset {
            manifest,
            base,
            records,
        })
    }

    pub fn instance(&self, record: &DatasetRecord) -> Result<ObfuscationInstance, ExperimentError> {
        ObfuscationInstance::from_record(self.base.clone(), &record.instance).map_err(|e| ExperimentError::Instance {
            id: record.id,
            source: Box::new(e.into()),
        })
    }

    /// Model inputs for every record, targets on the log scale of `label`.
    pub fn samples(&self, config: &ModelConfig, label: LabelKind) -> Result<Vec<Sample>, ExperimentError> {
        self.records
            .iter()
            .map(|r| {
                let inst = self.instance(r)?;
                Ok(Sample {
                    id: r.id,
                    input: GraphInput::from_instance(&inst, config)?,
                    target: r.labels.target(label),
                    censored: r.labels.censored,
                })
            })
            .collect()
    }
}
