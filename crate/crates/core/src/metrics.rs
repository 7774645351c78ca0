//! Evaluation: the aligned/conflicting accuracy grid, group accuracies, the
//! Equal-Opportunity gap and bias-discovery accuracy.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, IMAGE_LEN};
use crate::losses::GroupStats;
use crate::model::{HeadKind, Mlp};
use crate::par::Execution;
use crate::{Error, Result, NUM_CLASSES};

/// Samples per forward chunk during evaluation.
pub const EVAL_CHUNK: usize = 500;
/// Probability at or above which a mapped discoverer output counts as aligned.
pub const DISCOVERY_THRESHOLD: f64 = 0.5;

/// One evaluation snapshot. Grid cells use two letters, left then right
/// attribute, `a` = aligned and `c` = conflicting. Single-attribute datasets
/// fill `acc_aa` (aligned) and `acc_cc` (conflicting) only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub acc_aa: Option<f64>,
    pub acc_ac: Option<f64>,
    pub acc_ca: Option<f64>,
    pub acc_cc: Option<f64>,
    pub unbiased: f64,
    pub avg_group: f64,
    pub worst_group: f64,
    pub eo_gap_max: Option<f64>,
    pub eo_gap_mean: Option<f64>,
    pub disc_acc_left: Option<f64>,
    pub disc_acc_right: Option<f64>,
    pub loss_c: Option<f64>,
    pub loss_d: Option<f64>,
    /// Plain accuracy over the whole evaluation set.
    pub accuracy: f64,
    /// Mean over classes of `|Σ p_b1 − Σ p_b0| / n_k` for the discoverer.
    pub assignment_imbalance: Option<f64>,
}

impl MetricsRecord {
    /// Combination accuracies in grid order, absent cells skipped.
    pub fn grid(&self) -> Vec<f64> {
        [self.acc_aa, self.acc_ac, self.acc_ca, self.acc_cc]
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Network outputs for a whole dataset, `n × width`, row-major.
pub fn predict_dataset(mlp: &Mlp<f32>, ds: &Dataset, exec: Execution) -> Vec<f32> {
    let chunks = exec.map_chunks(ds.len(), EVAL_CHUNK, |range| {
        let idx: Vec<usize> = range.collect();
        let x = ds.batch_tensor::<f32>(&idx);
        mlp.predict(x.data(), idx.len())
    });
    debug_assert!(mlp.input_width() == IMAGE_LEN);
    chunks.concat()
}

pub fn argmax_rows(probs: &[f32], width: usize) -> Vec<usize> {
    probs
        .chunks(width)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// `p_t`: probability of each sample's ground-truth class.
pub fn target_probs(probs: &[f32], width: usize, ds: &Dataset) -> Vec<f64> {
    (0..ds.len())
        .map(|i| f64::from(probs[i * width + ds.target(i)]))
        .collect()
}

/// `p(b̂ = 1 | I)` read from the head matching each sample's target class.
pub fn discoverer_probs(outputs: &[f32], head: HeadKind, ds: &Dataset) -> Vec<f64> {
    let width = head.width(NUM_CLASSES);
    (0..ds.len())
        .map(|i| {
            let col = if head == HeadKind::SigmoidGlobal { 0 } else { ds.target(i) };
            f64::from(outputs[i * width + col])
        })
        .collect()
}

/// Accuracy of each aligned/conflicting combination plus their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Indexed by the conflicting bits, first attribute most significant.
    pub cells: Vec<f64>,
    pub counts: Vec<usize>,
    pub unbiased: f64,
}

fn combination(ds: &Dataset, i: usize) -> usize {
    (0..ds.attributes).fold(0, |acc, a| acc * 2 + usize::from(!ds.is_aligned(i, a)))
}

pub fn group_accuracy_grid(ds: &Dataset, predicted: &[usize]) -> Result<Grid> {
    let cells = 1usize << ds.attributes;
    let mut hits = vec![0usize; cells];
    let mut counts = vec![0usize; cells];
    for (i, &p) in predicted.iter().enumerate() {
        let c = combination(ds, i);
        counts[c] += 1;
        hits[c] += usize::from(p == ds.target(i));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Eval(format!("accuracy grid cell {c} is empty")));
    }
    let cells: Vec<f64> = hits.iter().zip(&counts).map(|(&h, &n)| h as f64 / n as f64).collect();
    let unbiased = cells.iter().sum::<f64>() / cells.len() as f64;
    Ok(Grid { cells, counts, unbiased })
}

/// Mean and minimum of a list of group accuracies.
pub fn avg_worst(groups: &[f64]) -> (f64, f64) {
    let avg = groups.iter().sum::<f64>() / groups.len() as f64;
    let worst = groups.iter().copied().fold(f64::INFINITY, f64::min);
    (avg, worst)
}

/// Groups are (target class × aligned/conflicting combination); returns the
/// unweighted average and the worst group accuracy.
pub fn avg_worst_group(ds: &Dataset, predicted: &[usize]) -> Result<(f64, f64)> {
    let combos = 1usize << ds.attributes;
    let mut hits = vec![0usize; NUM_CLASSES * combos];
    let mut counts = vec![0usize; NUM_CLASSES * combos];
    for (i, &p) in predicted.iter().enumerate() {
        let g = ds.target(i) * combos + combination(ds, i);
        counts[g] += 1;
        hits[g] += usize::from(p == ds.target(i));
    }
    if let Some(g) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Eval(format!(
            "group {g} (class {}, combination {}) is empty",
            g / combos,
            g % combos
        )));
    }
    let acc: Vec<f64> = hits.iter().zip(&counts).map(|(&h, &n)| h as f64 / n as f64).collect();
    Ok(avg_worst(&acc))
}

/// Per-class true-positive-rate gaps between aligned and conflicting samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EoGap {
    /// `per_attribute[a][k]`, `None` when class `k` lacks one of the groups.
    pub per_attribute: Vec<Vec<Option<f64>>>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
}

pub fn eo_gap(ds: &Dataset, predicted: &[usize]) -> EoGap {
    let per_attribute: Vec<Vec<Option<f64>>> = (0..ds.attributes)
        .map(|a| {
            let mut hits = [[0usize; 2]; NUM_CLASSES];
            let mut counts = [[0usize; 2]; NUM_CLASSES];
            for (i, &p) in predicted.iter().enumerate() {
                let k = ds.target(i);
                let b = usize::from(ds.is_aligned(i, a));
                counts[k][b] += 1;
                hits[k][b] += usize::from(p == k);
            }
            (0..NUM_CLASSES)
                .map(|k| {
                    (counts[k][0] > 0 && counts[k][1] > 0).then(|| {
                        let tpr0 = hits[k][0] as f64 / counts[k][0] as f64;
                        let tpr1 = hits[k][1] as f64 / counts[k][1] as f64;
                        (tpr0 - tpr1).abs()
                    })
                })
                .collect()
        })
        .collect();
    let defined: Vec<f64> = per_attribute.iter().flatten().flatten().copied().collect();
    let (max, mean) = if defined.is_empty() {
        (None, None)
    } else {
        let (mean, _) = avg_worst(&defined);
        (Some(defined.iter().copied().fold(0.0, f64::max)), Some(mean))
    };
    EoGap {
        per_attribute,
        max,
        mean,
    }
}

/// Bias-aligned probability per sample: the discoverer's output re-oriented so
/// that the group with the higher weighted target probability is "aligned".
/// Orientation is decided per target class for per-class heads and once over
/// the whole set for a global head.
pub fn aligned_probability(p_b1: &[f64], p_t: &[f64], head: HeadKind, ds: &Dataset) -> Vec<f64> {
    let classes: Vec<Vec<usize>> = if head == HeadKind::SigmoidGlobal {
        vec![(0..ds.len()).collect()]
    } else {
        let mut by_class = vec![Vec::new(); NUM_CLASSES];
        for i in 0..ds.len() {
            by_class[ds.target(i)].push(i);
        }
        by_class
    };
    let mut out = vec![0.0; ds.len()];
    for members in classes.iter().filter(|m| !m.is_empty()) {
        let t: Vec<f64> = members.iter().map(|&i| p_t[i]).collect();
        let b: Vec<f64> = members.iter().map(|&i| p_b1[i]).collect();
        let stats = GroupStats::from_probs(&t, &b).expect("matching nonempty slices");
        for &i in members {
            out[i] = if stats.orientation() { p_b1[i] } else { 1.0 - p_b1[i] };
        }
    }
    out
}

/// Fraction of samples whose thresholded aligned probability matches the
/// ground-truth aligned flag of attribute `attr`.
pub fn discovery_accuracy(p_b1: &[f64], p_t: &[f64], head: HeadKind, ds: &Dataset, attr: usize) -> f64 {
    let aligned = aligned_probability(p_b1, p_t, head, ds);
    let hits = aligned
        .iter()
        .enumerate()
        .filter(|&(i, &p)| (p >= DISCOVERY_THRESHOLD) == ds.is_aligned(i, attr))
        .count();
    hits as f64 / ds.len().max(1) as f64
}

/// Discovery accuracy of a biased classifier: a prediction equal to the
/// ground-truth class counts as "bias-aligned".
pub fn lff_style_discovery_accuracy(predicted: &[usize], ds: &Dataset, attr: usize) -> f64 {
    let hits = predicted
        .iter()
        .enumerate()
        .filter(|&(i, &p)| (p == ds.target(i)) == ds.is_aligned(i, attr))
        .count();
    hits as f64 / ds.len().max(1) as f64
}

/// Mean over classes of `|Σ (p_b1 − p_b0)| / n_k`: 0 for a balanced split, 1
/// when every sample of each class lands in one group.
pub fn assignment_imbalance(p_b1: &[f64], ds: &Dataset) -> f64 {
    let mut sums = [0.0f64; NUM_CLASSES];
    let mut counts = [0usize; NUM_CLASSES];
    for (i, &p) in p_b1.iter().enumerate() {
        sums[ds.target(i)] += 2.0 * p - 1.0;
        counts[ds.target(i)] += 1;
    }
    let per_class: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s.abs() / n as f64)
        .collect();
    per_class.iter().sum::<f64>() / per_class.len().max(1) as f64
}

/// Full evaluation of a classifier (and optionally a discoverer) on `ds`.
/// Epoch and loss fields are left for the caller.
pub fn evaluate(
    classifier: &Mlp<f32>,
    discoverer: Option<&Mlp<f32>>,
    ds: &Dataset,
    exec: Execution,
) -> Result<MetricsRecord> {
    if classifier.head != HeadKind::Softmax {
        return Err(Error::Mismatch(format!("classifier has a {:?} head", classifier.head)));
    }
    let width = classifier.output_width();
    let probs = predict_dataset(classifier, ds, exec);
    let predicted = argmax_rows(&probs, width);
    let mut rec = MetricsRecord {
        accuracy: predicted
            .iter()
            .enumerate()
            .filter(|&(i, &p)| p == ds.target(i))
            .count() as f64
            / ds.len().max(1) as f64,
        ..MetricsRecord::default()
    };
    if ds.attributes == 0 {
        rec.unbiased = rec.accuracy;
        (rec.avg_group, rec.worst_group) = (rec.accuracy, rec.accuracy);
        return Ok(rec);
    }
    let grid = group_accuracy_grid(ds, &predicted)?;
    if ds.attributes == 2 {
        rec.acc_aa = Some(grid.cells[0]);
        rec.acc_ac = Some(grid.cells[1]);
        rec.acc_ca = Some(grid.cells[2]);
        rec.acc_cc = Some(grid.cells[3]);
    } else {
        rec.acc_aa = Some(grid.cells[0]);
        rec.acc_cc = Some(grid.cells[1]);
    }
    rec.unbiased = grid.unbiased;
    (rec.avg_group, rec.worst_group) = avg_worst_group(ds, &predicted)?;
    let gap = eo_gap(ds, &predicted);
    rec.eo_gap_max = gap.max;
    rec.eo_gap_mean = gap.mean;
    if let Some(d) = discoverer {
        if d.head == HeadKind::Softmax {
            return Err(Error::Mismatch("discoverer checkpoint has a softmax head".into()));
        }
        let p_t = target_probs(&probs, width, ds);
        let p_b1 = discoverer_probs(&predict_dataset(d, ds, exec), d.head, ds);
        rec.disc_acc_left = Some(discovery_accuracy(&p_b1, &p_t, d.head, ds, 0));
        if ds.attributes > 1 {
            rec.disc_acc_right = Some(discovery_accuracy(&p_b1, &p_t, d.head, ds, 1));
        }
        rec.assignment_imbalance = Some(assignment_imbalance(&p_b1, ds));
    }
    Ok(rec)
}
