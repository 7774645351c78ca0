//! Experiment runs on disk: a run directory holds `manifest.json`,
//! `metrics.csv`, `summary.json` and `checkpoints/`.

pub mod csv;
pub mod plot;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::cache::{self, DigitSource, Sidecar};
use crate::data::{DatasetConfig, DatasetPair};
use crate::metrics::MetricsRecord;
use crate::model::{load_checkpoint, save_checkpoint, HeadKind};
use crate::par::Execution;
use crate::trainer::{self, Method, StepCounters, TrainConfig, TrainState};
use crate::{Error, Result};

use self::csv::MetricsWriter;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CLASSIFIER_CKPT: &str = "classifier.dban";
pub const DISCOVERER_CKPT: &str = "discoverer.dban";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce a run. Written when the run starts and
/// rewritten with `ended_at` when it finishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub tool_version: String,
    pub seed: u64,
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
    pub dataset_source: DigitSource,
    /// SHA-256 over the train and test cache files, in that order.
    pub dataset_sha256: String,
    pub data_dir: String,
    pub classifier_ckpt: Option<String>,
    pub classifier_ckpt_sha256: Option<String>,
    pub started_at: String,
    pub ended_at: Option<String>,
}

#[derive(Serialize)]
struct ReproductionKey<'a> {
    tool_version: &'a str,
    train: &'a TrainConfig,
    dataset: &'a DatasetConfig,
    dataset_source: DigitSource,
    dataset_sha256: &'a str,
    classifier_ckpt_sha256: Option<&'a str>,
}

impl Manifest {
    /// Hex SHA-256 of the fields that determine the run's results. Names,
    /// paths and timestamps are excluded.
    pub fn digest(&self) -> String {
        let key = ReproductionKey {
            tool_version: &self.tool_version,
            train: &self.train,
            dataset: &self.dataset,
            dataset_source: self.dataset_source,
            dataset_sha256: &self.dataset_sha256,
            classifier_ckpt_sha256: self.classifier_ckpt_sha256.as_deref(),
        };
        let json = serde_json::to_vec(&key).expect("manifest key serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, "manifest", e.to_string()))
    }

    fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

/// Final state of a run. Contains no timestamps or paths, so reruns of the
/// same configuration produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub method: Method,
    pub epochs: usize,
    pub iterations: u64,
    pub manifest_digest: String,
    pub counters: StepCounters,
    pub final_metrics: MetricsRecord,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("value serializes");
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn sha256_files(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// A training run to execute.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub train: TrainConfig,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Pretrained classifier, required by discover-only.
    pub classifier_ckpt: Option<PathBuf>,
    pub exec: Execution,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub summary: Summary,
    pub records: Vec<MetricsRecord>,
}

/// Loads the dataset cache in `data_dir` and trains, streaming metrics to
/// `out_dir/metrics.csv`.
pub fn run_experiment(exp: &Experiment) -> Result<RunReport> {
    exp.train.validate()?;
    let (pair, sidecar) = cache::load_pair(&exp.data_dir)?;
    run_on(exp, &pair, &sidecar)
}

/// As [`run_experiment`] with the dataset already in memory; `sidecar` must
/// describe `pair` and the cache files in `exp.data_dir`.
pub fn run_on(exp: &Experiment, pair: &DatasetPair, sidecar: &Sidecar) -> Result<RunReport> {
    exp.train.validate()?;
    let classifier = match &exp.classifier_ckpt {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    let ckpt_dir = exp.out_dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;

    let mut manifest = Manifest {
        name: exp.name.clone(),
        tool_version: TOOL_VERSION.to_string(),
        seed: exp.train.seed,
        train: exp.train.clone(),
        dataset: sidecar.config.clone(),
        dataset_source: sidecar.source,
        dataset_sha256: sha256_files(&[
            exp.data_dir.join(cache::TRAIN_FILE),
            exp.data_dir.join(cache::TEST_FILE),
        ])?,
        data_dir: exp.data_dir.display().to_string(),
        classifier_ckpt: exp.classifier_ckpt.as_ref().map(|p| p.display().to_string()),
        classifier_ckpt_sha256: match &exp.classifier_ckpt {
            Some(p) => Some(sha256_files(std::slice::from_ref(p))?),
            None => None,
        },
        started_at: now(),
        ended_at: None,
    };
    let manifest_path = exp.out_dir.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;

    let mut writer = MetricsWriter::create(&exp.out_dir.join(METRICS_FILE))?;
    let every = exp.train.checkpoint_every;
    let mut observer = |rec: &MetricsRecord, state: &TrainState| -> Result<()> {
        writer.append(rec)?;
        if every > 0 && rec.epoch > 0 && rec.epoch.is_multiple_of(every) {
            save_networks(state, &ckpt_dir, &format!("epoch_{:04}_", rec.epoch))?;
        }
        Ok(())
    };
    let out = trainer::run(&exp.train, pair, classifier, exp.exec, &mut observer)?;
    save_networks(&out.state, &ckpt_dir, "")?;

    let final_metrics = out.records.last().cloned().expect("run emits at least one record");
    let summary = Summary {
        method: exp.train.method,
        epochs: out.state.epoch,
        iterations: out.state.iteration,
        manifest_digest: manifest.digest(),
        counters: out.state.counters,
        final_metrics,
    };
    write_json(&exp.out_dir.join(SUMMARY_FILE), &summary)?;
    manifest.ended_at = Some(now());
    manifest.write(&manifest_path)?;
    Ok(RunReport {
        manifest,
        summary,
        records: out.records,
    })
}

fn save_networks(state: &TrainState, dir: &Path, prefix: &str) -> Result<()> {
    save_checkpoint(&state.classifier, &dir.join(format!("{prefix}{CLASSIFIER_CKPT}")))?;
    if let Some(d) = &state.discoverer {
        save_checkpoint(d, &dir.join(format!("{prefix}{DISCOVERER_CKPT}")))?;
    }
    Ok(())
}

/// The manifest of the run a checkpoint was saved by, if it sits in the
/// usual `<run>/checkpoints/` layout.
pub fn manifest_for_checkpoint(ckpt: &Path) -> Option<PathBuf> {
    let run = ckpt.parent()?.parent()?;
    let path = run.join(MANIFEST_FILE);
    path.is_file().then_some(path)
}

/// Evaluates saved networks on the test split in `data_dir`. When the
/// checkpoint's run manifest records a different dataset configuration than
/// the cache's sidecar, this refuses unless `allow_mismatch` is set.
pub fn evaluate_checkpoint(
    ckpt: &Path,
    discoverer_ckpt: Option<&Path>,
    data_dir: &Path,
    allow_mismatch: bool,
    exec: Execution,
) -> Result<MetricsRecord> {
    let sidecar = cache::read_sidecar(data_dir)?;
    let manifest = match manifest_for_checkpoint(ckpt) {
        Some(p) => Some(Manifest::read(&p)?),
        None => None,
    };
    if let Some(m) = &manifest {
        if m.dataset != sidecar.config && !allow_mismatch {
            return Err(Error::Mismatch(format!(
                "checkpoint was trained on {} (seed {}, ratios {:?}) but {} holds seed {}, ratios {:?}; pass --allow-mismatch to evaluate anyway",
                m.data_dir,
                m.dataset.seed,
                m.dataset.ratios,
                data_dir.display(),
                sidecar.config.seed,
                sidecar.config.ratios
            )));
        }
    }
    let classifier = load_checkpoint(ckpt)?;
    if classifier.head != HeadKind::Softmax {
        return Err(Error::Mismatch(format!(
            "{} holds a {:?} head, not a classifier",
            ckpt.display(),
            classifier.head
        )));
    }
    let discoverer = match discoverer_ckpt {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    let test = cache::read_dataset(&data_dir.join(cache::TEST_FILE))?;
    let method = manifest.as_ref().map_or(Method::Vanilla, |m| m.train.method);
    let mut rec = trainer::evaluate_networks(method, &classifier, discoverer.as_ref(), &test, exec)?;
    rec.epoch = manifest.as_ref().map_or(0, |m| m.train.epochs);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, synthesize_glyphs};

    fn dataset_dir(dir: &Path, seed: u64) {
        let mut cfg = DatasetConfig::multi_color(0.99, 0.95, seed);
        cfg.train_count = 600;
        cfg.test_count = 400;
        let (tr, te) = synthesize_glyphs(&DatasetConfig::glyphs(600, 200, seed)).unwrap();
        let pair = generate(&tr, &te, &cfg).unwrap();
        let sidecar = Sidecar::describe(&pair, &cfg, DigitSource::SyntheticGlyph);
        cache::save_pair(dir, &pair, &sidecar).unwrap();
    }

    fn experiment(data: &Path, out: &Path, method: Method) -> Experiment {
        Experiment {
            name: "t".into(),
            train: TrainConfig {
                epochs: 2,
                batch_size: 128,
                hidden: vec![16, 16, 16],
                checkpoint_every: 1,
                ..TrainConfig::new(method, 5)
            },
            data_dir: data.to_path_buf(),
            out_dir: out.to_path_buf(),
            classifier_ckpt: None,
            exec: Execution::Parallel,
        }
    }

    #[test]
    fn run_directory_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        dataset_dir(&data, 1);
        let out = tmp.path().join("run");
        let report = run_experiment(&experiment(&data, &out, Method::Debian)).unwrap();
        for f in [MANIFEST_FILE, METRICS_FILE, SUMMARY_FILE] {
            assert!(out.join(f).is_file(), "{f}");
        }
        let ck = out.join(CHECKPOINT_DIR);
        for f in ["epoch_0001_classifier.dban", "epoch_0002_discoverer.dban", CLASSIFIER_CKPT, DISCOVERER_CKPT] {
            assert!(ck.join(f).is_file(), "{f}");
        }
        let m = Manifest::read(&out.join(MANIFEST_FILE)).unwrap();
        assert!(m.ended_at.is_some());
        assert_eq!(m.digest(), report.summary.manifest_digest);
        assert_eq!(report.records.len(), 3);
    }

    #[test]
    fn digest_ignores_names_and_times() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        dataset_dir(&data, 1);
        let a = run_experiment(&experiment(&data, &tmp.path().join("a"), Method::Vanilla)).unwrap();
        let mut exp = experiment(&data, &tmp.path().join("b"), Method::Vanilla);
        exp.name = "other".into();
        let b = run_experiment(&exp).unwrap();
        assert_eq!(a.manifest.digest(), b.manifest.digest());
        let read = |d: &str, f: &str| fs::read(tmp.path().join(d).join(f)).unwrap();
        assert_eq!(read("a", SUMMARY_FILE), read("b", SUMMARY_FILE));
        assert_eq!(read("a", METRICS_FILE), read("b", METRICS_FILE));
        let mut changed = a.manifest.clone();
        changed.train.seed += 1;
        assert_ne!(changed.digest(), a.manifest.digest());
    }

    #[test]
    fn eval_reproduces_final_metrics_and_guards_data() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let other = tmp.path().join("other");
        dataset_dir(&data, 1);
        dataset_dir(&other, 2);
        let out = tmp.path().join("run");
        let report = run_experiment(&experiment(&data, &out, Method::Debian)).unwrap();
        let ck = out.join(CHECKPOINT_DIR);
        let disc = ck.join(DISCOVERER_CKPT);
        let rec = evaluate_checkpoint(&ck.join(CLASSIFIER_CKPT), Some(&disc), &data, false, Execution::Sequential)
            .unwrap();
        let mut expected = report.summary.final_metrics.clone();
        expected.loss_c = None;
        expected.loss_d = None;
        assert_eq!(rec, expected);

        let err = evaluate_checkpoint(&ck.join(CLASSIFIER_CKPT), None, &other, false, Execution::Parallel);
        assert!(matches!(err, Err(Error::Mismatch(_))));
        assert!(evaluate_checkpoint(&ck.join(CLASSIFIER_CKPT), None, &other, true, Execution::Parallel).is_ok());
        let wrong_head = evaluate_checkpoint(&disc, None, &data, false, Execution::Parallel);
        assert!(matches!(wrong_head, Err(Error::Mismatch(_))));
    }

    #[test]
    fn discover_only_records_classifier_hash() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        dataset_dir(&data, 1);
        let base = tmp.path().join("base");
        run_experiment(&experiment(&data, &base, Method::Vanilla)).unwrap();
        let mut exp = experiment(&data, &tmp.path().join("disc"), Method::DiscoverOnly);
        exp.classifier_ckpt = Some(base.join(CHECKPOINT_DIR).join(CLASSIFIER_CKPT));
        let report = run_experiment(&exp).unwrap();
        assert_eq!(report.manifest.classifier_ckpt_sha256.as_ref().map(String::len), Some(64));
        let missing = run_experiment(&experiment(&data, &tmp.path().join("x"), Method::DiscoverOnly));
        assert!(missing.is_err());
    }
}
