//! Training loops: bias discovery, alternating mitigation and the baselines.
//!
//! The classifier `C` and the discoverer `D` are trained in turns. Whichever
//! network is frozen in a phase is evaluated outside the graph, so its
//! parameters can never be touched by that phase's update.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::coloring::stream;
use crate::data::{split_by_class, ClassBatch, Dataset, DatasetPair, EpochSampler};
use crate::losses::{self, GroupStats};
use crate::metrics::{self, MetricsRecord};
use crate::model::{classifier_forward, HeadKind, Mlp, DEFAULT_HIDDEN};
use crate::par::Execution;
use crate::tensor::{Adam, AdamConfig, Graph, Tensor, Var};
use crate::{Error, Result, NUM_CLASSES};

const STREAM_INIT_C: u64 = 10;
const STREAM_INIT_D: u64 = 11;
const STREAM_SAMPLER_C: u64 = 12;
const STREAM_SAMPLER_D: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vanilla,
    Focal,
    GceBiased,
    Debian,
    DebianNoUa,
    DebianMinmax,
    DiscoverOnly,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Vanilla,
        Method::Focal,
        Method::GceBiased,
        Method::Debian,
        Method::DebianNoUa,
        Method::DebianMinmax,
        Method::DiscoverOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Focal => "focal",
            Method::GceBiased => "gce-biased",
            Method::Debian => "debian",
            Method::DebianNoUa => "debian-no-ua",
            Method::DebianMinmax => "debian-minmax",
            Method::DiscoverOnly => "discover-only",
        }
    }

    pub fn uses_discoverer(self) -> bool {
        matches!(
            self,
            Method::Debian | Method::DebianNoUa | Method::DebianMinmax | Method::DiscoverOnly
        )
    }

    pub fn trains_classifier(self) -> bool {
        self != Method::DiscoverOnly
    }

    /// Whether the discoverer objective includes the unbalanced-assignment penalty.
    pub fn uses_ua(self) -> bool {
        self != Method::DebianNoUa
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method `{s}` (expected one of {})", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub eval_every: usize,
    /// Save checkpoints every this many epochs; 0 keeps only the final ones.
    pub checkpoint_every: usize,
    pub hidden: Vec<usize>,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    pub gce_q: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Debian,
            epochs: 100,
            batch_size: 256,
            optimizer: AdamConfig::default(),
            seed: 0,
            eval_every: 1,
            checkpoint_every: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            gce_q: 0.7,
        }
    }
}

impl TrainConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be positive".into());
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return fail(format!("lr {} must be positive", o.lr));
        }
        if !(o.beta1 > 0.0 && o.beta1 < 1.0 && o.beta2 > 0.0 && o.beta2 < 1.0) {
            return fail("Adam betas must lie in (0, 1)".into());
        }
        if o.eps.is_nan() || o.eps <= 0.0 {
            return fail("Adam eps must be positive".into());
        }
        if self.hidden.len() != 3 || self.hidden.contains(&0) {
            return fail(format!("expected three positive hidden widths, got {:?}", self.hidden));
        }
        if !(self.gce_q > 0.0 && self.gce_q <= 1.0) {
            return fail(format!("gce q {} outside (0, 1]", self.gce_q));
        }
        if !(self.focal_alpha > 0.0 && self.focal_gamma >= 0.0) {
            return fail("focal alpha must be positive and gamma nonnegative".into());
        }
        Ok(())
    }
}

/// Bookkeeping for the per-class averaging rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounters {
    /// Updates skipped because no class was present.
    pub skipped_steps: u64,
    /// Class sub-batches holding a single sample.
    pub degenerate_class_batches: u64,
    /// Classes absent from a sampled batch, summed over updates.
    pub absent_classes: u64,
}

impl StepCounters {
    fn record(&mut self, parts: &[ClassBatch]) {
        self.absent_classes += (NUM_CLASSES - parts.len()) as u64;
        self.degenerate_class_batches += parts.iter().filter(|p| p.len() == 1).count() as u64;
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub classifier: Mlp<f32>,
    pub opt_c: Adam<f32>,
    pub discoverer: Option<Mlp<f32>>,
    pub opt_d: Option<Adam<f32>>,
    pub epoch: usize,
    pub iteration: u64,
    pub counters: StepCounters,
    sampler_c: EpochSampler,
    sampler_d: EpochSampler,
}

fn mean_of(g: &mut Graph<f32>, terms: &[Var]) -> Result<Var> {
    let mut total = terms[0];
    for &t in &terms[1..] {
        total = g.add(total, t)?;
    }
    Ok(g.scale(total, 1.0 / terms.len() as f64)?)
}

fn scalar(g: &Graph<f32>, v: Var) -> f64 {
    f64::from(g.value(v).data()[0])
}

impl TrainState {
    /// Fresh networks from the seed. `classifier` replaces the seeded
    /// classifier (required for discover-only).
    pub fn new(config: &TrainConfig, train_len: usize, classifier: Option<Mlp<f32>>) -> Result<Self> {
        config.validate()?;
        if train_len == 0 {
            return Err(Error::Config("training set is empty".into()));
        }
        let classifier = match (classifier, config.method) {
            (Some(c), _) => {
                if c.head != HeadKind::Softmax || c.output_width() != NUM_CLASSES {
                    return Err(Error::Mismatch(format!(
                        "classifier checkpoint has a {:?} head with {} outputs",
                        c.head,
                        c.output_width()
                    )));
                }
                c
            }
            (None, Method::DiscoverOnly) => {
                return Err(Error::Config("discover-only needs a trained classifier".into()))
            }
            (None, _) => Mlp::classifier(&config.hidden, &mut stream(config.seed, STREAM_INIT_C)),
        };
        let discoverer = config
            .method
            .uses_discoverer()
            .then(|| Mlp::discoverer(&config.hidden, &mut stream(config.seed, STREAM_INIT_D)));
        Ok(Self {
            classifier,
            opt_c: Adam::new(config.optimizer),
            opt_d: discoverer.as_ref().map(|_| Adam::new(config.optimizer)),
            discoverer,
            epoch: 0,
            iteration: 0,
            counters: StepCounters::default(),
            sampler_c: EpochSampler::new(train_len, config.batch_size, stream(config.seed, STREAM_SAMPLER_C)),
            sampler_d: EpochSampler::new(train_len, config.batch_size, stream(config.seed, STREAM_SAMPLER_D)),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.sampler_c.batches_per_epoch()
    }

    fn discoverer_parts(&mut self) -> Result<(&mut Mlp<f32>, &mut Adam<f32>)> {
        match (self.discoverer.as_mut(), self.opt_d.as_mut()) {
            (Some(d), Some(o)) => Ok((d, o)),
            _ => Err(Error::Config("method has no discoverer".into())),
        }
    }

    /// One baseline update of the classifier on a whole batch.
    pub fn classifier_step(&mut self, config: &TrainConfig, ds: &Dataset, batch: &[usize]) -> Result<f64> {
        let mut g = Graph::new();
        let x = g.constant(ds.batch_tensor(batch));
        let bound = self.classifier.bind(&mut g, true);
        let probs = classifier_forward(&mut g, &self.classifier, &bound, x)?;
        let targets: Vec<usize> = batch.iter().map(|&i| ds.target(i)).collect();
        let p_t = g.pick_columns(probs, &targets)?;
        let loss = match config.method {
            Method::Vanilla => losses::ce_loss(&mut g, p_t)?,
            Method::Focal => losses::focal_loss(&mut g, p_t, config.focal_alpha, config.focal_gamma)?,
            Method::GceBiased => losses::gce_weighted_ce_loss(&mut g, p_t, config.gce_q)?,
            m => return Err(Error::Config(format!("{m} is not a single-network baseline"))),
        };
        g.backward(loss)?;
        self.classifier.absorb_grads(&g, &bound);
        self.opt_c.step(&mut self.classifier.params_mut())?;
        Ok(scalar(&g, loss))
    }

    /// Discoverer update with the classifier frozen: per present class the
    /// EOV loss (plus the UA penalty when `use_ua`), averaged over classes.
    pub fn discover_step(&mut self, ds: &Dataset, batch: &[usize], use_ua: bool) -> Result<Option<f64>> {
        let parts = split_by_class(ds, batch);
        if parts.is_empty() {
            self.counters.skipped_steps += 1;
            return Ok(None);
        }
        self.counters.record(&parts);
        let images = ds.batch_tensor::<f32>(batch);
        let probs_c = self.classifier.predict(images.data(), batch.len());
        let (d, opt) = self.discoverer_parts()?;
        let mut g = Graph::new();
        let x = g.constant(images);
        let bound = d.bind(&mut g, true);
        let z = d.logits(&mut g, &bound, x)?;
        let mut terms = Vec::with_capacity(parts.len());
        for part in &parts {
            let col = if d.head == HeadKind::SigmoidGlobal { 0 } else { part.class };
            let zk = g.gather_rows(z, &part.rows)?;
            let picked = g.pick_columns(zk, &vec![col; part.len()])?;
            let p_b1 = g.sigmoid(picked)?;
            let p_t: Vec<f32> = part.rows.iter().map(|&r| probs_c[r * NUM_CLASSES + part.class]).collect();
            let p_t = g.constant(Tensor::from_slice(&p_t));
            let stats = losses::group_stats(&mut g, p_t, p_b1)?;
            let mut term = losses::eov_loss(&mut g, &stats)?;
            if use_ua {
                let ua = losses::ua_penalty(&mut g, p_b1)?;
                term = g.add(term, ua)?;
            }
            terms.push(term);
        }
        let loss = mean_of(&mut g, &terms)?;
        g.backward(loss)?;
        d.absorb_grads(&g, &bound);
        opt.step(&mut d.params_mut())?;
        Ok(Some(scalar(&g, loss)))
    }

    /// Classifier update with the discoverer frozen: reweighted cross-entropy,
    /// or the minmax objective, averaged over present classes.
    pub fn debias_classifier_step(&mut self, ds: &Dataset, batch: &[usize], minmax: bool) -> Result<Option<f64>> {
        let parts = split_by_class(ds, batch);
        if parts.is_empty() {
            self.counters.skipped_steps += 1;
            return Ok(None);
        }
        self.counters.record(&parts);
        let d = self
            .discoverer
            .as_ref()
            .ok_or_else(|| Error::Config("method has no discoverer".into()))?;
        let images = ds.batch_tensor::<f32>(batch);
        let width = d.output_width();
        let probs_d = d.predict(images.data(), batch.len());
        let global = d.head == HeadKind::SigmoidGlobal;
        let mut g = Graph::new();
        let x = g.constant(images);
        let bound = self.classifier.bind(&mut g, true);
        let probs = classifier_forward(&mut g, &self.classifier, &bound, x)?;
        let mut terms = Vec::with_capacity(parts.len());
        for part in &parts {
            let col = if global { 0 } else { part.class };
            let rows = g.gather_rows(probs, &part.rows)?;
            let p_t = g.pick_columns(rows, &vec![part.class; part.len()])?;
            let p_b1: Vec<f32> = part.rows.iter().map(|&r| probs_d[r * width + col]).collect();
            let p_b1 = g.constant(Tensor::from_slice(&p_b1));
            let term = if minmax {
                let stats = losses::group_stats(&mut g, p_t, p_b1)?;
                losses::minmax_classifier_loss(&mut g, &stats, p_t)?
            } else {
                let to64 = |v: Var, g: &Graph<f32>| g.value(v).data().iter().map(|&p| f64::from(p)).collect::<Vec<_>>();
                let stats = GroupStats::from_probs(&to64(p_t, &g), &to64(p_b1, &g))?;
                let w = losses::rce_weights(&mut g, &stats, p_b1);
                losses::rce_loss(&mut g, p_t, w)?
            };
            terms.push(term);
        }
        let loss = mean_of(&mut g, &terms)?;
        g.backward(loss)?;
        self.classifier.absorb_grads(&g, &bound);
        self.opt_c.step(&mut self.classifier.params_mut())?;
        Ok(Some(scalar(&g, loss)))
    }

    /// One alternating iteration: classifier first (on `batch_c`, discoverer
    /// frozen), then discoverer (on `batch_d`, classifier frozen).
    pub fn mitigate_step(
        &mut self,
        method: Method,
        ds: &Dataset,
        batch_c: &[usize],
        batch_d: &[usize],
    ) -> Result<(Option<f64>, Option<f64>)> {
        let loss_c = self.debias_classifier_step(ds, batch_c, method == Method::DebianMinmax)?;
        let loss_d = self.discover_step(ds, batch_d, method.uses_ua())?;
        Ok((loss_c, loss_d))
    }

    /// Runs one epoch; returns the mean classifier and discoverer losses.
    pub fn train_epoch(&mut self, config: &TrainConfig, ds: &Dataset) -> Result<(Option<f64>, Option<f64>)> {
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        let mut add = |slot: usize, v: Option<f64>| {
            if let Some(v) = v {
                sums[slot] += v;
                counts[slot] += 1;
            }
        };
        for _ in 0..self.batches_per_epoch() {
            match config.method {
                Method::Vanilla | Method::Focal | Method::GceBiased => {
                    let batch = self.sampler_c.next_batch();
                    let loss = self.classifier_step(config, ds, &batch)?;
                    add(0, Some(loss));
                }
                Method::DiscoverOnly => {
                    let batch = self.sampler_d.next_batch();
                    let loss = self.discover_step(ds, &batch, true)?;
                    add(1, loss);
                }
                m => {
                    let batch_c = self.sampler_c.next_batch();
                    let batch_d = self.sampler_d.next_batch();
                    let (lc, ld) = self.mitigate_step(m, ds, &batch_c, &batch_d)?;
                    add(0, lc);
                    add(1, ld);
                }
            }
            self.iteration += 1;
        }
        self.epoch += 1;
        let mean = |i: usize| (counts[i] > 0).then(|| sums[i] / counts[i] as f64);
        Ok((mean(0), mean(1)))
    }

    /// Test-set metrics for the current networks.
    pub fn evaluate(&self, method: Method, test: &Dataset, exec: Execution) -> Result<MetricsRecord> {
        let mut rec = evaluate_networks(method, &self.classifier, self.discoverer.as_ref(), test, exec)?;
        rec.epoch = self.epoch;
        Ok(rec)
    }
}

/// Metrics for a classifier and optional discoverer trained with `method`.
/// For the GCE-biased model the discovery columns hold its prediction-based
/// discovery accuracy.
pub fn evaluate_networks(
    method: Method,
    classifier: &Mlp<f32>,
    discoverer: Option<&Mlp<f32>>,
    test: &Dataset,
    exec: Execution,
) -> Result<MetricsRecord> {
    let mut rec = metrics::evaluate(classifier, discoverer, test, exec)?;
    if method == Method::GceBiased && test.attributes > 0 {
        let probs = metrics::predict_dataset(classifier, test, exec);
        let predicted = metrics::argmax_rows(&probs, NUM_CLASSES);
        rec.disc_acc_left = Some(metrics::lff_style_discovery_accuracy(&predicted, test, 0));
        if test.attributes > 1 {
            rec.disc_acc_right = Some(metrics::lff_style_discovery_accuracy(&predicted, test, 1));
        }
    }
    Ok(rec)
}

/// Receives every evaluation row as it is produced.
pub trait Observer {
    fn on_record(&mut self, record: &MetricsRecord, state: &TrainState) -> Result<()>;
}

impl<F: FnMut(&MetricsRecord, &TrainState) -> Result<()>> Observer for F {
    fn on_record(&mut self, record: &MetricsRecord, state: &TrainState) -> Result<()> {
        self(record, state)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: TrainState,
    pub records: Vec<MetricsRecord>,
}

/// Trains for `config.epochs` epochs, evaluating on the test split at epoch 0,
/// every `eval_every` epochs and at the end.
pub fn run(
    config: &TrainConfig,
    data: &DatasetPair,
    classifier: Option<Mlp<f32>>,
    exec: Execution,
    observer: &mut dyn Observer,
) -> Result<RunOutput> {
    let mut state = TrainState::new(config, data.train.len(), classifier)?;
    let mut records = Vec::new();
    let mut emit = |rec: MetricsRecord, state: &TrainState| -> Result<()> {
        observer.on_record(&rec, state)?;
        records.push(rec);
        Ok(())
    };
    emit(state.evaluate(config.method, &data.test, exec)?, &state)?;
    for epoch in 1..=config.epochs {
        let (loss_c, loss_d) = state.train_epoch(config, &data.train)?;
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let mut rec = state.evaluate(config.method, &data.test, exec)?;
            rec.loss_c = loss_c;
            rec.loss_d = loss_d;
            emit(rec, &state)?;
        }
    }
    Ok(RunOutput { state, records })
}
