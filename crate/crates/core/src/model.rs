//! Three-hidden-layer perceptron used for both the classifier and the discoverer.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::IMAGE_LEN;
use crate::tensor::{Graph, Param, Real, Result as TResult, Tensor, TensorError, Var};
use crate::{Error, Result, NUM_CLASSES};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DBAN";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: [usize; 3] = [100, 100, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// Softmax over the target classes (classifier).
    Softmax,
    /// One sigmoid unit shared by every class.
    SigmoidGlobal,
    /// One sigmoid unit per target class.
    SigmoidPerClass,
}

impl HeadKind {
    pub fn code(self) -> u8 {
        match self {
            HeadKind::Softmax => 0,
            HeadKind::SigmoidGlobal => 1,
            HeadKind::SigmoidPerClass => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => HeadKind::Softmax,
            1 => HeadKind::SigmoidGlobal,
            2 => HeadKind::SigmoidPerClass,
            _ => return None,
        })
    }

    /// Discoverer head for a task with `classes` targets.
    pub fn discoverer_for(classes: usize) -> Self {
        if classes == 2 {
            HeadKind::SigmoidGlobal
        } else {
            HeadKind::SigmoidPerClass
        }
    }

    pub fn width(self, classes: usize) -> usize {
        match self {
            HeadKind::SigmoidGlobal => 1,
            HeadKind::Softmax | HeadKind::SigmoidPerClass => classes,
        }
    }
}

/// Dense layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Real> Linear<T> {
    pub fn inputs(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub head: HeadKind,
    pub layers: Vec<Linear<T>>,
}

/// An [`Mlp`]'s parameters as leaves of one graph.
#[derive(Debug, Clone)]
pub struct Bound {
    layers: Vec<(Var, Var)>,
}

impl<T: Real> Mlp<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(head: HeadKind, input: usize, hidden: &[usize], classes: usize, rng: &mut impl Rng) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(head.width(classes));
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                let data = (0..fan_in * fan_out).map(|_| T::of(dist.sample(rng))).collect();
                Linear {
                    weight: Param::new(Tensor::new(vec![fan_in, fan_out], data).expect("sized")),
                    bias: Param::new(Tensor::zeros(vec![fan_out])),
                }
            })
            .collect();
        Self { head, layers }
    }

    pub fn classifier(hidden: &[usize], rng: &mut impl Rng) -> Self {
        Self::new(HeadKind::Softmax, IMAGE_LEN, hidden, NUM_CLASSES, rng)
    }

    pub fn discoverer(hidden: &[usize], rng: &mut impl Rng) -> Self {
        Self::new(HeadKind::discoverer_for(NUM_CLASSES), IMAGE_LEN, hidden, NUM_CLASSES, rng)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[1..].iter().map(Linear::inputs).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.value.numel() + l.bias.value.numel())
            .sum()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    /// Copies the parameters into `g`; frozen copies are constants and never
    /// receive a gradient.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Bound {
        let leaf = |g: &mut Graph<T>, p: &Param<T>| {
            if trainable {
                g.param(p.value.clone())
            } else {
                g.constant(p.value.clone())
            }
        };
        Bound {
            layers: self
                .layers
                .iter()
                .map(|l| (leaf(g, &l.weight), leaf(g, &l.bias)))
                .collect(),
        }
    }

    /// Pre-activation outputs, `batch × output_width`.
    pub fn logits(&self, g: &mut Graph<T>, bound: &Bound, x: Var) -> TResult<Var> {
        let mut h = x;
        for (i, &(w, b)) in bound.layers.iter().enumerate() {
            let z = g.matmul(h, w)?;
            h = g.add_row(z, b)?;
            if i + 1 < bound.layers.len() {
                h = g.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Moves the gradients of the last backward pass into the parameters.
    /// Parameters off the loss path receive zeros.
    pub fn absorb_grads(&mut self, g: &Graph<T>, bound: &Bound) {
        for (layer, &(w, b)) in self.layers.iter_mut().zip(&bound.layers) {
            for (p, v) in [(&mut layer.weight, w), (&mut layer.bias, b)] {
                p.grad = Some(match g.grad(v) {
                    Some(grad) => grad.to_vec(),
                    None => vec![T::zero(); p.value.numel()],
                });
            }
        }
    }

    /// Head outputs without a graph: softmax rows for the classifier, sigmoid
    /// units for the discoverer. `x` is `n × input_width`, row-major.
    pub fn predict(&self, x: &[T], n: usize) -> Vec<T> {
        let mut h = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let (k, m) = (layer.inputs(), layer.outputs());
            let mut out = Vec::with_capacity(n * m);
            for _ in 0..n {
                out.extend_from_slice(layer.bias.value.data());
            }
            T::gemm(n, k, m, &h, false, layer.weight.value.data(), false, T::one(), &mut out);
            if i + 1 < self.layers.len() {
                out.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            h = out;
        }
        match self.head {
            HeadKind::Softmax => {
                for row in h.chunks_mut(self.output_width()) {
                    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                    row.iter_mut().for_each(|v| *v = (*v - max).exp());
                    let total: T = row.iter().copied().sum();
                    row.iter_mut().for_each(|v| *v = *v / total);
                }
            }
            HeadKind::SigmoidGlobal | HeadKind::SigmoidPerClass => {
                h.iter_mut().for_each(|v| *v = stable_sigmoid(*v));
            }
        }
        h
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            head: self.head,
            layers: self
                .layers
                .iter()
                .map(|l| Linear {
                    weight: Param::new(l.weight.value.cast()),
                    bias: Param::new(l.bias.value.cast()),
                })
                .collect(),
        }
    }
}

fn stable_sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Class probabilities `p(ŷ|I)`, `batch × K`, for a softmax-headed network.
pub fn classifier_forward<T: Real>(g: &mut Graph<T>, mlp: &Mlp<T>, bound: &Bound, images: Var) -> TResult<Var> {
    if mlp.head != HeadKind::Softmax {
        return Err(TensorError::Contract(format!("classifier with {:?} head", mlp.head)));
    }
    let z = mlp.logits(g, bound, images)?;
    g.softmax_rows(z)
}

/// `p(b̂ = 1 | I)` for every image, read from the head of `class_id` (the
/// global head ignores it).
pub fn discoverer_forward<T: Real>(
    g: &mut Graph<T>,
    mlp: &Mlp<T>,
    bound: &Bound,
    images: Var,
    class_id: usize,
) -> TResult<Var> {
    let column = match mlp.head {
        HeadKind::SigmoidGlobal => 0,
        HeadKind::SigmoidPerClass if class_id < mlp.output_width() => class_id,
        HeadKind::SigmoidPerClass => {
            return Err(TensorError::Contract(format!(
                "class {class_id} outside the {} discoverer heads",
                mlp.output_width()
            )))
        }
        HeadKind::Softmax => {
            return Err(TensorError::Contract("discoverer with a softmax head".into()))
        }
    };
    let z = mlp.logits(g, bound, images)?;
    let n = g.value(z).rows();
    let picked = g.pick_columns(z, &vec![column; n])?;
    g.sigmoid(picked)
}

pub fn encode_checkpoint<T: Real>(mlp: &Mlp<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * mlp.parameter_count() + 8 * mlp.layers.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(mlp.head.code());
    out.extend_from_slice(&(mlp.layers.len() as u32).to_le_bytes());
    for layer in &mlp.layers {
        out.extend_from_slice(&(layer.inputs() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.outputs() as u32).to_le_bytes());
        for p in [&layer.weight, &layer.bias] {
            for v in p.value.data() {
                out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Mlp<f32>> {
    let bad = |detail: String| Error::format(path, "checkpoint", detail);
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let chunk = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad(format!("truncated at byte {pos}")))?;
        pos += n;
        Ok(chunk)
    };
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(bad("bad magic (expected DBAN)".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let version = u32_at(take(4)?);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let code = take(1)?[0];
    let head = HeadKind::from_code(code).ok_or_else(|| bad(format!("unknown head kind {code}")))?;
    let count = u32_at(take(4)?) as usize;
    if count == 0 || count > 64 {
        return Err(bad(format!("implausible layer count {count}")));
    }
    let mut layers: Vec<Linear<f32>> = Vec::with_capacity(count);
    for l in 0..count {
        let rows = u32_at(take(4)?) as usize;
        let cols = u32_at(take(4)?) as usize;
        if rows == 0 || cols == 0 {
            return Err(bad(format!("layer {l} has an empty dimension")));
        }
        if let Some(prev) = layers.last() {
            if prev.outputs() != rows {
                return Err(bad(format!("layer {l} takes {rows} inputs after {} outputs", prev.outputs())));
            }
        }
        let mut floats = |n: usize| -> Result<Vec<f32>> {
            let raw = take(n.checked_mul(4).ok_or_else(|| bad("size overflow".into()))?)?;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect())
        };
        let weight = floats(rows * cols)?;
        let bias = floats(cols)?;
        layers.push(Linear {
            weight: Param::new(Tensor::new(vec![rows, cols], weight)?),
            bias: Param::new(Tensor::new(vec![cols], bias)?),
        });
    }
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok(Mlp { head, layers })
}

pub fn save_checkpoint<T: Real>(mlp: &Mlp<T>, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(mlp)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
