//! Ablation sweeps: a grid of independent runs over batch sizes or bias
//! ratios, each with its own run directory, collected into `sweep.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::cache::{self, DigitSource, Sidecar};
use crate::data::{generate, DatasetConfig, GrayDigits, Variant};
use crate::par::Execution;
use crate::trainer::{Method, TrainConfig};
use crate::{Error, Result};

use super::{run_experiment, Experiment};

pub const BATCH_SIZES: [usize; 5] = [32, 64, 128, 256, 512];
pub const LEFT_RATIOS: [f64; 4] = [0.995, 0.99, 0.98, 0.95];
pub const RIGHT_RATIO: f64 = 0.95;
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_HEADER: &str =
    "tag,method,seed,batch_size,ratio_left,ratio_right,unbiased,acc_cc,worst_group,eo_gap_mean,disc_acc_left,disc_acc_right";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    BatchSize,
    Ratio,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch-size" | "batch_size" => Ok(Axis::BatchSize),
            "ratio" => Ok(Axis::Ratio),
            _ => Err(Error::Config(format!("unknown sweep axis `{s}` (expected batch-size or ratio)"))),
        }
    }
}

/// One run of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub tag: String,
    pub method: Method,
    pub seed: u64,
    pub batch_size: usize,
    pub ratios: Vec<f64>,
}

fn ratio_tag(ratios: &[f64]) -> String {
    ratios.iter().map(|r| format!("{r}")).collect::<Vec<_>>().join("-")
}

/// Every (axis value, method, seed) combination, axis-major.
pub fn expand(axis: Axis, base_train: &TrainConfig, base_data: &DatasetConfig, methods: &[Method], seeds: &[u64]) -> Vec<SweepPoint> {
    let values: Vec<(usize, Vec<f64>)> = match axis {
        Axis::BatchSize => BATCH_SIZES.iter().map(|&b| (b, base_data.ratios.clone())).collect(),
        Axis::Ratio => LEFT_RATIOS
            .iter()
            .map(|&l| {
                let ratios = match base_data.variant {
                    Variant::MultiColor => vec![l, RIGHT_RATIO],
                    _ => vec![l],
                };
                (base_train.batch_size, ratios)
            })
            .collect(),
    };
    let mut points = Vec::new();
    for (batch_size, ratios) in values {
        for &method in methods {
            for &seed in seeds {
                points.push(SweepPoint {
                    tag: format!("{}-bs{batch_size}-r{}-s{seed}", method.name(), ratio_tag(&ratios)),
                    method,
                    seed,
                    batch_size,
                    ratios: ratios.clone(),
                });
            }
        }
    }
    points
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub axis: Axis,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub base_train: TrainConfig,
    pub base_data: DatasetConfig,
    pub out_dir: PathBuf,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub point: SweepPoint,
    pub summary: super::Summary,
}

/// Generates one dataset per distinct ratio setting under `out_dir/data/`,
/// then runs every point under `out_dir/runs/<tag>/` and writes
/// `out_dir/sweep.csv`. Runs fan out over the pool when `exec` is parallel.
pub fn run_sweep(sweep: &Sweep, train_src: &GrayDigits, test_src: &GrayDigits, source: DigitSource) -> Result<Vec<SweepResult>> {
    if sweep.methods.is_empty() || sweep.seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one method and one seed".into()));
    }
    let points = expand(sweep.axis, &sweep.base_train, &sweep.base_data, &sweep.methods, &sweep.seeds);
    let mut ratio_sets: Vec<Vec<f64>> = Vec::new();
    for p in &points {
        if !ratio_sets.contains(&p.ratios) {
            ratio_sets.push(p.ratios.clone());
        }
    }
    let data_root = sweep.out_dir.join("data");
    for ratios in &ratio_sets {
        let config = DatasetConfig {
            ratios: ratios.clone(),
            ..sweep.base_data.clone()
        };
        let pair = generate(train_src, test_src, &config)?;
        let sidecar = Sidecar::describe(&pair, &config, source);
        cache::save_pair(&data_root.join(ratio_tag(ratios)), &pair, &sidecar)?;
    }

    let runs_root = sweep.out_dir.join("runs");
    let results = sweep.exec.map(points, |point| {
        let exp = Experiment {
            name: point.tag.clone(),
            train: TrainConfig {
                method: point.method,
                seed: point.seed,
                batch_size: point.batch_size,
                ..sweep.base_train.clone()
            },
            data_dir: data_root.join(ratio_tag(&point.ratios)),
            out_dir: runs_root.join(&point.tag),
            classifier_ckpt: None,
            exec: sweep.exec,
        };
        run_experiment(&exp).map(|r| SweepResult {
            point,
            summary: r.summary,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_table(&sweep.out_dir.join(SWEEP_FILE), &results)?;
    Ok(results)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn write_table(path: &Path, results: &[SweepResult]) -> Result<()> {
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in results {
        let m = &r.summary.final_metrics;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.tag,
            r.point.method,
            r.point.seed,
            r.point.batch_size,
            r.point.ratios[0],
            opt(r.point.ratios.get(1).copied()),
            m.unbiased,
            opt(m.acc_cc),
            m.worst_group,
            opt(m.eo_gap_mean),
            opt(m.disc_acc_left),
            opt(m.disc_acc_right)
        );
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
