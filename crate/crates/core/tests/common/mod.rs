#![allow(dead_code)]

//! Shared helpers for the integration suites: a plain-arithmetic loss
//! evaluator that does not touch the graph, thin wrappers running the library
//! losses on an `f64` graph, and a central-difference gradient checker.

use std::path::PathBuf;

use debias_core::losses::{self, GroupStatVars};
use debias_core::tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line `f64` evaluation of the objectives, one loop per formula.
pub mod oracle {
    pub const EPS: f64 = 1e-6;
    pub const LOG_FLOOR: f64 = 1e-12;

    pub fn log(x: f64) -> f64 {
        if x < LOG_FLOOR {
            LOG_FLOOR.ln()
        } else {
            x.ln()
        }
    }

    pub fn group_stats(p_t: &[f64], p_b1: &[f64]) -> (f64, f64) {
        let mut num_pos = 0.0;
        let mut den_pos = 0.0;
        let mut num_neg = 0.0;
        let mut den_neg = 0.0;
        for i in 0..p_t.len() {
            num_pos += p_b1[i] * p_t[i];
            den_pos += p_b1[i];
            num_neg += (1.0 - p_b1[i]) * p_t[i];
            den_neg += 1.0 - p_b1[i];
        }
        (num_pos / (den_pos + EPS), num_neg / (den_neg + EPS))
    }

    pub fn eov_from_stats(pos: f64, neg: f64) -> f64 {
        -log((pos - neg).abs())
    }

    pub fn eov(p_t: &[f64], p_b1: &[f64]) -> f64 {
        let (pos, neg) = group_stats(p_t, p_b1);
        eov_from_stats(pos, neg)
    }

    pub fn ua(p_b1: &[f64]) -> f64 {
        let mut signed = 0.0;
        for &p in p_b1 {
            signed += p - (1.0 - p);
        }
        -log(1.0 - signed.abs() / p_b1.len() as f64)
    }

    pub fn rce_weights(p_t: &[f64], p_b1: &[f64]) -> Vec<f64> {
        let (pos, neg) = group_stats(p_t, p_b1);
        let mut w = Vec::new();
        for &p in p_b1 {
            if pos >= neg {
                w.push(1.0 - p);
            } else {
                w.push(p);
            }
        }
        w
    }

    pub fn rce(p_t: &[f64], w: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..p_t.len() {
            total += (1.0 + w[i]) * log(p_t[i]);
        }
        -total / p_t.len() as f64
    }

    pub fn ce(p_t: &[f64]) -> f64 {
        let mut total = 0.0;
        for &p in p_t {
            total += log(p);
        }
        -total / p_t.len() as f64
    }

    pub fn focal(p_t: &[f64], alpha: f64, gamma: f64) -> f64 {
        let mut total = 0.0;
        for &p in p_t {
            total += alpha * (1.0 - p).powf(gamma) * log(p);
        }
        -total / p_t.len() as f64
    }

    pub fn gce(p_t: &[f64], q: f64) -> f64 {
        let mut total = 0.0;
        for &p in p_t {
            total += p.powf(q) * log(p);
        }
        -total / p_t.len() as f64
    }

    pub fn minmax_from_stats(pos: f64, neg: f64, p_t: &[f64]) -> f64 {
        -log(1.0 - (pos - neg).abs()) + ce(p_t)
    }

    pub fn minmax(p_t: &[f64], p_b1: &[f64]) -> f64 {
        let (pos, neg) = group_stats(p_t, p_b1);
        minmax_from_stats(pos, neg, p_t)
    }
}

/// The library losses evaluated on a fresh `f64` graph.
pub mod lib {
    use super::*;

    fn scalar(g: &Graph<f64>, v: Var) -> f64 {
        g.value(v).item().expect("scalar loss")
    }

    fn consts(g: &mut Graph<f64>, values: &[&[f64]]) -> Vec<Var> {
        values.iter().map(|v| g.constant(Tensor::from_slice(v))).collect()
    }

    pub fn group_stats(p_t: &[f64], p_b1: &[f64]) -> (f64, f64) {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t, p_b1]);
        let s = losses::group_stats(&mut g, v[0], v[1]).unwrap().values(&g);
        (s.p_bar_pos, s.p_bar_neg)
    }

    pub fn eov(p_t: &[f64], p_b1: &[f64]) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t, p_b1]);
        let stats = losses::group_stats(&mut g, v[0], v[1]).unwrap();
        let l = losses::eov_loss(&mut g, &stats).unwrap();
        scalar(&g, l)
    }

    pub fn eov_from_stats(pos: f64, neg: f64) -> f64 {
        let mut g = Graph::new();
        let stats = GroupStatVars {
            pos: g.constant(Tensor::scalar(pos)),
            neg: g.constant(Tensor::scalar(neg)),
        };
        let l = losses::eov_loss(&mut g, &stats).unwrap();
        scalar(&g, l)
    }

    pub fn ua(p_b1: &[f64]) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_b1]);
        let l = losses::ua_penalty(&mut g, v[0]).unwrap();
        scalar(&g, l)
    }

    pub fn rce_weights(p_t: &[f64], p_b1: &[f64]) -> Vec<f64> {
        let stats = losses::GroupStats::from_probs(p_t, p_b1).unwrap();
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_b1]);
        let w = losses::rce_weights(&mut g, &stats, v[0]);
        g.value(w).data().to_vec()
    }

    pub fn rce(p_t: &[f64], w: &[f64]) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t, w]);
        let l = losses::rce_loss(&mut g, v[0], v[1]).unwrap();
        scalar(&g, l)
    }

    pub fn ce(p_t: &[f64]) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t]);
        let l = losses::ce_loss(&mut g, v[0]).unwrap();
        scalar(&g, l)
    }

    pub fn focal(p_t: &[f64], alpha: f64, gamma: f64) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t]);
        let l = losses::focal_loss(&mut g, v[0], alpha, gamma).unwrap();
        scalar(&g, l)
    }

    pub fn gce(p_t: &[f64], q: f64) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t]);
        let l = losses::gce_loss(&mut g, v[0], q).unwrap();
        scalar(&g, l)
    }

    pub fn minmax_from_stats(pos: f64, neg: f64, p_t: &[f64]) -> f64 {
        let mut g = Graph::new();
        let stats = GroupStatVars {
            pos: g.constant(Tensor::scalar(pos)),
            neg: g.constant(Tensor::scalar(neg)),
        };
        let v = consts(&mut g, &[p_t]);
        let l = losses::minmax_classifier_loss(&mut g, &stats, v[0]).unwrap();
        scalar(&g, l)
    }

    pub fn minmax(p_t: &[f64], p_b1: &[f64]) -> f64 {
        let mut g = Graph::new();
        let v = consts(&mut g, &[p_t, p_b1]);
        let stats = losses::group_stats(&mut g, v[0], v[1]).unwrap();
        let l = losses::minmax_classifier_loss(&mut g, &stats, v[0]).unwrap();
        scalar(&g, l)
    }
}

/// Every library-vs-oracle comparison on the worked examples, as
/// `(name, library, oracle)`.
pub fn oracle_cases() -> Vec<(&'static str, f64, f64)> {
    let mut cases = Vec::new();
    let (t, b) = ([0.9, 0.8, 0.2, 0.1], [1.0, 1.0, 0.0, 0.0]);
    let (lp, ln) = lib::group_stats(&t, &b);
    let (op, on) = oracle::group_stats(&t, &b);
    cases.push(("p_bar_pos hard split", lp, op));
    cases.push(("p_bar_neg hard split", ln, on));
    cases.push(("eov gap 0.7 from stats", lib::eov_from_stats(0.8, 0.1), oracle::eov_from_stats(0.8, 0.1)));
    let (t, b) = ([0.85, 0.15], [1.0, 0.0]);
    cases.push(("eov gap 0.7 from probs", lib::eov(&t, &b), oracle::eov(&t, &b)));
    let (t, b) = ([0.5, 0.5], [1.0, 0.0]);
    cases.push(("eov gap 0", lib::eov(&t, &b), oracle::eov(&t, &b)));
    cases.push(("ua [1,1,1,0]", lib::ua(&[1.0, 1.0, 1.0, 0.0]), oracle::ua(&[1.0, 1.0, 1.0, 0.0])));
    cases.push(("ua all ones", lib::ua(&[1.0; 4]), oracle::ua(&[1.0; 4])));
    cases.push(("rce p 0.5 w 0.4", lib::rce(&[0.5], &[0.4]), oracle::rce(&[0.5], &[0.4])));
    let (t, b) = ([0.9, 0.8, 0.2, 0.1], [0.9, 0.7, 0.2, 0.4]);
    for (i, (l, o)) in lib::rce_weights(&t, &b).into_iter().zip(oracle::rce_weights(&t, &b)).enumerate() {
        cases.push((["weight 0 (P+ ahead)", "weight 1", "weight 2", "weight 3"][i], l, o));
    }
    let b_flip = [0.1, 0.3, 0.8, 0.6];
    for (i, (l, o)) in lib::rce_weights(&t, &b_flip)
        .into_iter()
        .zip(oracle::rce_weights(&t, &b_flip))
        .enumerate()
    {
        cases.push((["weight 0 (P- ahead)", "weight 1", "weight 2", "weight 3"][i], l, o));
    }
    let half = [0.5; 4];
    cases.push(("rce with uniform 0.5 weights", lib::rce(&t, &half), oracle::rce(&t, &half)));
    cases.push(("focal p 0.9", lib::focal(&[0.9], 0.25, 2.0), oracle::focal(&[0.9], 0.25, 2.0)));
    cases.push(("gce q 1e-6", lib::gce(&[0.3], 1e-6), oracle::gce(&[0.3], 1e-6)));
    cases.push(("gce q 0.7", lib::gce(&[0.3, 0.8], 0.7), oracle::gce(&[0.3, 0.8], 0.7)));
    cases.push(("ce", lib::ce(&[0.3, 0.8]), oracle::ce(&[0.3, 0.8])));
    cases.push((
        "minmax gap 0.5 p_t 1",
        lib::minmax_from_stats(0.75, 0.25, &[1.0]),
        oracle::minmax_from_stats(0.75, 0.25, &[1.0]),
    ));
    let (t, b) = ([0.9, 0.6, 0.3], [0.8, 0.5, 0.1]);
    cases.push(("minmax from probs", lib::minmax(&t, &b), oracle::minmax(&t, &b)));
    cases
}

/// Finite-difference step and acceptance bound for the gradient suite.
pub const FD_STEP: f64 = 1e-4;
pub const FD_MAX_REL_ERR: f64 = 1e-3;
/// Denominator floor of the relative error, so exact zeros compare absolutely.
pub const FD_REL_FLOOR: f64 = 1e-8;
/// Batch sizes every loss is checked at, and random instances per size.
pub const FD_SIZES: [usize; 4] = [1, 2, 8, 64];
pub const FD_INSTANCES: usize = 100;
/// Inputs whose `|x|` argument would reach zero within this many finite
/// difference steps (extrapolating linearly) are redrawn.
pub const FD_KINK_STEPS: f64 = 20.0;

/// A loss as a function of its differentiable inputs on an `f64` graph.
pub type LossBuilder = fn(&mut Graph<f64>, &[Var]) -> Var;

/// Signed argument of a loss's absolute value, as a function of its inputs.
pub type KinkArg = fn(&[Vec<f64>]) -> f64;

/// One loss under test: how many input vectors it takes, and the signed
/// argument of its absolute value (`None` for smooth losses).
pub struct GradCase {
    pub name: &'static str,
    pub inputs: usize,
    pub build: LossBuilder,
    pub kink: Option<KinkArg>,
}

fn stats_diff(x: &[Vec<f64>]) -> f64 {
    let (pos, neg) = oracle::group_stats(&x[0], &x[1]);
    pos - neg
}

fn ua_sum(x: &[Vec<f64>]) -> f64 {
    x[0].iter().map(|p| 2.0 * p - 1.0).sum::<f64>() / x[0].len() as f64
}

/// Distance of `x` from the kink, in finite-difference steps: the kink
/// argument divided by its largest change under a single `±h` probe.
pub fn kink_steps(kink: KinkArg, x: &[Vec<f64>]) -> f64 {
    let base = kink(x);
    let mut probe = x.to_vec();
    let mut largest = 0.0f64;
    for k in 0..x.len() {
        for i in 0..x[k].len() {
            for sign in [1.0, -1.0] {
                probe[k][i] = x[k][i] + sign * FD_STEP;
                largest = largest.max((kink(&probe) - base).abs());
            }
            probe[k][i] = x[k][i];
        }
    }
    if largest == 0.0 {
        f64::INFINITY
    } else {
        base.abs() / largest
    }
}

pub fn grad_cases() -> Vec<GradCase> {
    vec![
        GradCase {
            name: "eov_loss",
            inputs: 2,
            build: |g, v| {
                let s = losses::group_stats(g, v[0], v[1]).unwrap();
                losses::eov_loss(g, &s).unwrap()
            },
            kink: Some(stats_diff),
        },
        GradCase {
            name: "ua_penalty",
            inputs: 1,
            build: |g, v| losses::ua_penalty(g, v[0]).unwrap(),
            kink: Some(ua_sum),
        },
        GradCase {
            name: "rce_loss",
            inputs: 2,
            build: |g, v| losses::rce_loss(g, v[0], v[1]).unwrap(),
            kink: None,
        },
        GradCase {
            name: "focal_loss",
            inputs: 1,
            build: |g, v| losses::focal_loss(g, v[0], 0.25, 2.0).unwrap(),
            kink: None,
        },
        GradCase {
            name: "gce_loss",
            inputs: 1,
            build: |g, v| losses::gce_loss(g, v[0], 0.7).unwrap(),
            kink: None,
        },
        GradCase {
            name: "minmax_classifier_loss",
            inputs: 2,
            build: |g, v| {
                let s = losses::group_stats(g, v[0], v[1]).unwrap();
                losses::minmax_classifier_loss(g, &s, v[0]).unwrap()
            },
            kink: Some(stats_diff),
        },
    ]
}

fn loss_value(build: LossBuilder, inputs: &[Vec<f64>]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.constant(Tensor::from_slice(x))).collect();
    let l = build(&mut g, &vars);
    g.value(l).item().unwrap()
}

/// Largest relative error between backprop and central differences over all
/// coordinates of one input.
pub fn max_rel_error(build: LossBuilder, inputs: &[Vec<f64>]) -> f64 {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.param(Tensor::from_slice(x))).collect();
    let l = build(&mut g, &vars);
    g.backward(l).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; x.len()]))
        .collect();
    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for k in 0..inputs.len() {
        for i in 0..inputs[k].len() {
            let x0 = inputs[k][i];
            probe[k][i] = x0 + FD_STEP;
            let up = loss_value(build, &probe);
            probe[k][i] = x0 - FD_STEP;
            let down = loss_value(build, &probe);
            probe[k][i] = x0;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_REL_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Per-loss summary of the gradient suite.
pub struct GradReport {
    pub name: &'static str,
    pub instances: usize,
    pub resampled: usize,
    pub max_rel_err: f64,
}

/// Checks every loss on `FD_INSTANCES` random inputs at every size in
/// `FD_SIZES`. Every input is drawn from [0.02, 0.98]; draws near a kink
/// are redrawn.
pub fn run_gradient_suite(seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    grad_cases()
        .into_iter()
        .map(|case| {
            let mut report = GradReport {
                name: case.name,
                instances: 0,
                resampled: 0,
                max_rel_err: 0.0,
            };
            for &n in &FD_SIZES {
                for _ in 0..FD_INSTANCES {
                    let inputs = loop {
                        let draw: Vec<Vec<f64>> = (0..case.inputs)
                            .map(|_| (0..n).map(|_| rng.random_range(0.02..0.98)).collect())
                            .collect();
                        if case.kink.is_none_or(|k| kink_steps(k, &draw) > FD_KINK_STEPS) {
                            break draw;
                        }
                        report.resampled += 1;
                    };
                    report.max_rel_err = report.max_rel_err.max(max_rel_error(case.build, &inputs));
                    report.instances += 1;
                }
            }
            report
        })
        .collect()
}

/// Directory holding the MNIST IDX files: `DEBIAS_DATA_DIR`, else `data/mnist`
/// at the workspace root. `None` when the files are not there.
pub fn mnist_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("DEBIAS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    dir.join("t10k-labels-idx1-ubyte").is_file().then_some(dir)
}
