//! Objectives for the discoverer and the classifier, plus the baselines.
//!
//! Every loss takes per-sample probabilities as graph nodes, so the same code
//! serves `f32` training and `f64` gradient checks. Which inputs carry a
//! gradient is decided by the caller: the trainer detaches the classifier's
//! `p_t` when updating the discoverer, and detaches the discoverer's outputs
//! (and therefore the weights) when updating the classifier.

use serde::{Deserialize, Serialize};

use crate::tensor::{Graph, Real, Result, Tensor, TensorError, Var};

/// Added to both group-probability denominators.
pub const GROUP_EPS: f64 = 1e-6;

/// Weighted average target probability in the two soft bias groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub p_bar_pos: f64,
    pub p_bar_neg: f64,
}

impl GroupStats {
    /// Plain evaluation over probability slices.
    pub fn from_probs(p_t: &[f64], p_b1: &[f64]) -> std::result::Result<Self, TensorError> {
        if p_t.len() != p_b1.len() || p_t.is_empty() {
            return Err(TensorError::Shape {
                op: "group_stats",
                detail: format!("{} target probs vs {} group probs", p_t.len(), p_b1.len()),
            });
        }
        let (mut num_pos, mut den_pos, mut num_neg, mut den_neg) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &b) in p_t.iter().zip(p_b1) {
            num_pos += b * t;
            den_pos += b;
            num_neg += (1.0 - b) * t;
            den_neg += 1.0 - b;
        }
        Ok(Self {
            p_bar_pos: num_pos / (den_pos + GROUP_EPS),
            p_bar_neg: num_neg / (den_neg + GROUP_EPS),
        })
    }

    /// True when the positive group is the better-performed one (ties count as positive).
    pub fn orientation(&self) -> bool {
        self.p_bar_pos >= self.p_bar_neg
    }

    pub fn gap(&self) -> f64 {
        (self.p_bar_pos - self.p_bar_neg).abs()
    }
}

/// [`GroupStats`] as nodes of a graph.
#[derive(Debug, Clone, Copy)]
pub struct GroupStatVars {
    pub pos: Var,
    pub neg: Var,
}

impl GroupStatVars {
    pub fn values<T: Real>(&self, g: &Graph<T>) -> GroupStats {
        let get = |v: Var| g.value(v).data()[0].to_f64().unwrap_or(f64::NAN);
        GroupStats {
            p_bar_pos: get(self.pos),
            p_bar_neg: get(self.neg),
        }
    }
}

fn check_len<T: Real>(g: &Graph<T>, op: &'static str, a: Var, b: Var) -> Result<()> {
    let (la, lb) = (g.value(a).numel(), g.value(b).numel());
    if la != lb {
        return Err(TensorError::Shape {
            op,
            detail: format!("{la} vs {lb}"),
        });
    }
    Ok(())
}

pub fn group_stats<T: Real>(g: &mut Graph<T>, p_t: Var, p_b1: Var) -> Result<GroupStatVars> {
    check_len(g, "group_stats", p_t, p_b1)?;
    let p_b0 = g.one_minus(p_b1)?;

    let weighted_pos = g.mul(p_b1, p_t)?;
    let num_pos = g.sum(weighted_pos)?;
    let mass_pos = g.sum(p_b1)?;
    let den_pos = g.add_scalar(mass_pos, GROUP_EPS)?;
    let pos = g.div(num_pos, den_pos)?;

    let weighted_neg = g.mul(p_b0, p_t)?;
    let num_neg = g.sum(weighted_neg)?;
    let mass_neg = g.sum(p_b0)?;
    let den_neg = g.add_scalar(mass_neg, GROUP_EPS)?;
    let neg = g.div(num_neg, den_neg)?;

    Ok(GroupStatVars { pos, neg })
}

/// `-log |P̄+ − P̄−|`, minimized by the discoverer.
pub fn eov_loss<T: Real>(g: &mut Graph<T>, stats: &GroupStatVars) -> Result<Var> {
    let diff = g.sub(stats.pos, stats.neg)?;
    let gap = g.abs(diff)?;
    let log = g.log(gap)?;
    g.scale(log, -1.0)
}

/// `-log(1 − |Σ(p_b1 − p_b0)| / n)`: penalizes assigning everything to one group.
pub fn ua_penalty<T: Real>(g: &mut Graph<T>, p_b1: Var) -> Result<Var> {
    let n = g.value(p_b1).numel() as f64;
    let signed = g.affine(p_b1, 2.0, -1.0)?;
    let total = g.sum(signed)?;
    let imbalance = g.abs(total)?;
    let frac = g.scale(imbalance, 1.0 / n)?;
    let balance = g.one_minus(frac)?;
    let log = g.log(balance)?;
    g.scale(log, -1.0)
}

/// Per-image weights up-weighting the worse-performed group. Always a constant node.
pub fn rce_weights<T: Real>(g: &mut Graph<T>, stats: &GroupStats, p_b1: Var) -> Var {
    let probs = g.value(p_b1);
    let weights: Vec<T> = if stats.orientation() {
        probs.data().iter().map(|&p| T::one() - p).collect()
    } else {
        probs.data().to_vec()
    };
    let shape = probs.shape().to_vec();
    g.constant(Tensor::new(shape, weights).expect("shape copied from p_b1"))
}

/// `−(1/n) Σ (1 + W_i) log p_t`.
pub fn rce_loss<T: Real>(g: &mut Graph<T>, p_t: Var, weights: Var) -> Result<Var> {
    check_len(g, "rce_loss", p_t, weights)?;
    let scale = g.add_scalar(weights, 1.0)?;
    let log = g.log(p_t)?;
    let weighted = g.mul(scale, log)?;
    let mean = g.mean(weighted)?;
    g.scale(mean, -1.0)
}

/// Mean cross-entropy `−(1/n) Σ log p_t`.
pub fn ce_loss<T: Real>(g: &mut Graph<T>, p_t: Var) -> Result<Var> {
    let log = g.log(p_t)?;
    let mean = g.mean(log)?;
    g.scale(mean, -1.0)
}

/// Focal loss `−(1/n) Σ α (1 − p_t)^γ log p_t`.
pub fn focal_loss<T: Real>(g: &mut Graph<T>, p_t: Var, alpha: f64, gamma: f64) -> Result<Var> {
    let miss = g.one_minus(p_t)?;
    let modulator = g.powf(miss, gamma)?;
    let log = g.log(p_t)?;
    let term = g.mul(modulator, log)?;
    let mean = g.mean(term)?;
    g.scale(mean, -alpha)
}

/// Generalized cross-entropy in the form `−(1/n) Σ p_t^q log p_t`.
pub fn gce_loss<T: Real>(g: &mut Graph<T>, p_t: Var, q: f64) -> Result<Var> {
    let weight = g.powf(p_t, q)?;
    let log = g.log(p_t)?;
    let term = g.mul(weight, log)?;
    let mean = g.mean(term)?;
    g.scale(mean, -1.0)
}

/// The same value as [`gce_loss`], with `p_t^q` treated as a constant weight
/// on the cross-entropy. Its gradient is `p_t^q` times the cross-entropy
/// gradient, which emphasizes easy samples; differentiating through the
/// weight instead makes the loss also vanish as `p_t -> 0` and lets training
/// drive every sample to the wrong class.
pub fn gce_weighted_ce_loss<T: Real>(g: &mut Graph<T>, p_t: Var, q: f64) -> Result<Var> {
    let weight = g.powf(p_t, q)?;
    let weight = g.detach(weight);
    let log = g.log(p_t)?;
    let term = g.mul(weight, log)?;
    let mean = g.mean(term)?;
    g.scale(mean, -1.0)
}

/// Classifier objective of the minmax variant: `−log(1 − |P̄+ − P̄−|) + CE`.
pub fn minmax_classifier_loss<T: Real>(g: &mut Graph<T>, stats: &GroupStatVars, p_t: Var) -> Result<Var> {
    let diff = g.sub(stats.pos, stats.neg)?;
    let gap = g.abs(diff)?;
    let keep = g.one_minus(gap)?;
    let log = g.log(keep)?;
    let fairness = g.scale(log, -1.0)?;
    let ce = ce_loss(g, p_t)?;
    g.add(fairness, ce)
}
