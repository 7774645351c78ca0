use super::{Real, Result, Tensor, TensorError};

/// Lower clamp applied to every `log` argument.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddRow(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    SoftmaxRows(usize),
    Log(usize),
    Exp(usize),
    Abs(usize),
    Powf(usize, f64),
    Affine(usize, f64),
    Sum(usize),
    Mean(usize),
    GatherRows(usize, Vec<usize>),
    PickColumns(usize, Vec<usize>),
    SelectFlat(usize, Vec<usize>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph. Not shared across threads; build one per step.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` call w.r.t. `v`, if it was on the path.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op, inputs: &[usize]) -> Result<Var> {
        if value.data().iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::Shape {
                op,
                detail: format!("{sa:?} vs {sb:?}"),
            });
        }
        Ok(())
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(T) -> T) -> Result<Var> {
        let src = self.value(a);
        let data = src.data().iter().map(|&x| f(x)).collect();
        let value = Tensor {
            shape: src.shape().to_vec(),
            data,
        };
        self.push(name, value, op, &[a.0])
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(T, T) -> T) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor {
            shape: va.shape().to_vec(),
            data,
        };
        self.push(name, value, op, &[a.0, b.0])
    }

    /// `a` viewed as rows×cols times a 2-D `b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() < 2 || vb.shape().len() != 2 || va.cols() != vb.rows() {
            return Err(TensorError::Shape {
                op: "matmul",
                detail: format!("{:?} x {:?}", va.shape(), vb.shape()),
            });
        }
        let (m, k, n) = (va.rows(), va.cols(), vb.cols());
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, va.data(), false, vb.data(), false, T::zero(), &mut out);
        let value = Tensor {
            shape: vec![m, n],
            data: out,
        };
        self.push("matmul", value, Op::MatMul(a.0, b.0), &[a.0, b.0])
    }

    /// Adds a bias vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if va.shape().len() != 2 || vb.numel() != va.cols() {
            return Err(TensorError::Shape {
                op: "add_row",
                detail: format!("{:?} + {:?}", va.shape(), vb.shape()),
            });
        }
        let cols = va.cols();
        let data = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vb.data()[i % cols])
            .collect();
        let value = Tensor {
            shape: va.shape().to_vec(),
            data,
        };
        self.push("add_row", value, Op::AddRow(a.0, bias.0), &[a.0, bias.0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("add", a, b, Op::Add(a.0, b.0), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("sub", a, b, Op::Sub(a.0, b.0), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("mul", a, b, Op::Mul(a.0, b.0), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip("div", a, b, Op::Div(a.0, b.0), |x, y| x / y)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map("relu", a, Op::Relu(a.0), |x| if x > T::zero() { x } else { T::zero() })
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.map("sigmoid", a, Op::Sigmoid(a.0), |x| {
            if x >= T::zero() {
                T::one() / (T::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (T::one() + e)
            }
        })
    }

    /// Row-wise softmax of a 2-D tensor.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.shape().len() != 2 {
            return Err(TensorError::Shape {
                op: "softmax_rows",
                detail: format!("expected 2-D, got {:?}", va.shape()),
            });
        }
        let cols = va.cols();
        let mut data = Vec::with_capacity(va.numel());
        for row in va.data().chunks(cols) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let start = data.len();
            data.extend(row.iter().map(|&x| (x - max).exp()));
            let total: T = data[start..].iter().copied().sum();
            data[start..].iter_mut().for_each(|e| *e = *e / total);
        }
        let value = Tensor {
            shape: va.shape().to_vec(),
            data,
        };
        self.push("softmax_rows", value, Op::SoftmaxRows(a.0), &[a.0])
    }

    /// Natural log with the argument clamped below at [`LOG_CLAMP`].
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let floor = T::of(LOG_CLAMP);
        self.map("log", a, Op::Log(a.0), |x| x.max(floor).ln())
    }

    /// Natural log without the clamp; nonpositive arguments are a domain error.
    pub fn log_strict(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|x| **x <= T::zero()) {
            return Err(TensorError::Domain {
                op: "log",
                detail: format!("nonpositive argument {bad:?}"),
            });
        }
        self.log(a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.map("exp", a, Op::Exp(a.0), |x| x.exp())
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.map("abs", a, Op::Abs(a.0), |x| x.abs())
    }

    /// `a^p` for nonnegative `a`.
    pub fn powf(&mut self, a: Var, p: f64) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|x| **x < T::zero()) {
            return Err(TensorError::Domain {
                op: "powf",
                detail: format!("negative base {bad:?}"),
            });
        }
        let pt = T::of(p);
        self.map("powf", a, Op::Powf(a.0, p), |x| x.powf(pt))
    }

    /// `mul·a + add`, elementwise.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Result<Var> {
        let (m, c) = (T::of(mul), T::of(add));
        self.map("affine", a, Op::Affine(a.0, mul), |x| m * x + c)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.affine(a, c, 0.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.affine(a, 1.0, c)
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        self.affine(a, -1.0, 1.0)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total: T = self.value(a).data().iter().copied().sum();
        self.push("sum", Tensor::scalar(total), Op::Sum(a.0), &[a.0])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let total: T = va.data().iter().copied().sum();
        let n = T::of(va.numel() as f64);
        self.push("mean", Tensor::scalar(total / n), Op::Mean(a.0), &[a.0])
    }

    /// Stop-gradient: a constant copy of `a`'s value.
    pub fn detach(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.constant(value)
    }

    /// Rows of `a` at `rows`, in order.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let va = self.value(a);
        if rows.is_empty() || rows.iter().any(|&r| r >= va.rows()) {
            return Err(TensorError::Contract(format!(
                "gather_rows: {} rows requested from {:?}",
                rows.len(),
                va.shape()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * va.cols());
        for &r in rows {
            data.extend_from_slice(va.row(r));
        }
        let mut shape = va.shape().to_vec();
        shape[0] = rows.len();
        self.push("gather_rows", Tensor { shape, data }, Op::GatherRows(a.0, rows.to_vec()), &[a.0])
    }

    /// Element `a[i, cols[i]]` for every row `i` of a 2-D tensor.
    pub fn pick_columns(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let va = self.value(a);
        if va.shape().len() != 2 || cols.len() != va.rows() || cols.iter().any(|&c| c >= va.cols()) {
            return Err(TensorError::Shape {
                op: "pick_columns",
                detail: format!("{} picks from {:?}", cols.len(), va.shape()),
            });
        }
        let width = va.cols();
        let data = cols
            .iter()
            .enumerate()
            .map(|(i, &c)| va.data()[i * width + c])
            .collect();
        self.push(
            "pick_columns",
            Tensor {
                shape: vec![cols.len()],
                data,
            },
            Op::PickColumns(a.0, cols.to_vec()),
            &[a.0],
        )
    }

    /// Flattened elements of `a` where `mask` is true.
    pub fn select_mask(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let va = self.value(a);
        if mask.len() != va.numel() {
            return Err(TensorError::Shape {
                op: "select_mask",
                detail: format!("mask of {} over {:?}", mask.len(), va.shape()),
            });
        }
        let kept: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        if kept.is_empty() {
            return Err(TensorError::Contract("select_mask selected nothing".into()));
        }
        let data = kept.iter().map(|&i| va.data()[i]).collect();
        self.push(
            "select_mask",
            Tensor {
                shape: vec![kept.len()],
                data,
            },
            Op::SelectFlat(a.0, kept),
            &[a.0],
        )
    }

    /// Reverse pass from a scalar loss. Replaces gradients from any earlier call.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward on non-scalar of shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<T>>> = vec![None; n];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        // Only nodes that can carry a gradient keep one.
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        let nodes = &self.nodes;
        let mut acc = |j: usize, f: &mut dyn FnMut(&mut [T])| {
            if !nodes[j].requires_grad {
                return;
            }
            let buf = grads[j].get_or_insert_with(|| vec![T::zero(); nodes[j].value.numel()]);
            f(buf);
        };
        let val = |j: usize| nodes[j].value.data();
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&nodes[a].value, &nodes[b].value);
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                acc(a, &mut |ga| T::gemm(m, n, k, g, false, vb.data(), true, T::one(), ga));
                acc(b, &mut |gb| T::gemm(k, m, n, va.data(), true, g, false, T::one(), gb));
            }
            Op::AddRow(a, b) => {
                let cols = nodes[a].value.cols();
                acc(a, &mut |ga| add_into(ga, g));
                acc(b, &mut |gb| {
                    for row in g.chunks(cols) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Add(a, b) => {
                acc(a, &mut |ga| add_into(ga, g));
                acc(b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(a, &mut |ga| add_into(ga, g));
                acc(b, &mut |gb| gb.iter_mut().zip(g).for_each(|(d, &x)| *d = *d - x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(a), val(b));
                acc(a, &mut |ga| {
                    for ((d, &x), &y) in ga.iter_mut().zip(g).zip(vb) {
                        *d = *d + x * y;
                    }
                });
                acc(b, &mut |gb| {
                    for ((d, &x), &y) in gb.iter_mut().zip(g).zip(va) {
                        *d = *d + x * y;
                    }
                });
            }
            Op::Div(a, b) => {
                let vb = val(b);
                acc(a, &mut |ga| {
                    for ((d, &x), &y) in ga.iter_mut().zip(g).zip(vb) {
                        *d = *d + x / y;
                    }
                });
                // d(a/b)/db = -out/b
                acc(b, &mut |gb| {
                    for (((d, &x), &y), &o) in gb.iter_mut().zip(g).zip(vb).zip(out) {
                        *d = *d - x * o / y;
                    }
                });
            }
            Op::Relu(a) => acc(a, &mut |ga| {
                for ((d, &x), &o) in ga.iter_mut().zip(g).zip(out) {
                    if o > T::zero() {
                        *d = *d + x;
                    }
                }
            }),
            Op::Sigmoid(a) => acc(a, &mut |ga| {
                for ((d, &x), &o) in ga.iter_mut().zip(g).zip(out) {
                    *d = *d + x * o * (T::one() - o);
                }
            }),
            Op::SoftmaxRows(a) => {
                let cols = nodes[a].value.cols();
                acc(a, &mut |ga| {
                    for ((gd, gr), sr) in ga.chunks_mut(cols).zip(g.chunks(cols)).zip(out.chunks(cols)) {
                        let dot: T = gr.iter().zip(sr).map(|(&x, &s)| x * s).sum();
                        for ((d, &x), &s) in gd.iter_mut().zip(gr).zip(sr) {
                            *d = *d + s * (x - dot);
                        }
                    }
                });
            }
            Op::Log(a) => {
                let floor = T::of(LOG_CLAMP);
                let va = val(a);
                acc(a, &mut |ga| {
                    for ((d, &x), &v) in ga.iter_mut().zip(g).zip(va) {
                        if v > floor {
                            *d = *d + x / v;
                        }
                    }
                });
            }
            Op::Exp(a) => acc(a, &mut |ga| {
                for ((d, &x), &o) in ga.iter_mut().zip(g).zip(out) {
                    *d = *d + x * o;
                }
            }),
            Op::Abs(a) => {
                let va = val(a);
                acc(a, &mut |ga| {
                    for ((d, &x), &v) in ga.iter_mut().zip(g).zip(va) {
                        // subgradient 0 at v == 0
                        if v > T::zero() {
                            *d = *d + x;
                        } else if v < T::zero() {
                            *d = *d - x;
                        }
                    }
                });
            }
            Op::Powf(a, p) => {
                let va = val(a);
                let pt = T::of(p);
                acc(a, &mut |ga| {
                    for ((d, &x), &v) in ga.iter_mut().zip(g).zip(va) {
                        let slope = if v > T::zero() {
                            pt * v.powf(pt - T::one())
                        } else if p == 1.0 {
                            T::one()
                        } else {
                            T::zero()
                        };
                        *d = *d + x * slope;
                    }
                });
            }
            Op::Affine(a, mul) => {
                let m = T::of(mul);
                acc(a, &mut |ga| {
                    for (d, &x) in ga.iter_mut().zip(g) {
                        *d = *d + m * x;
                    }
                });
            }
            Op::Sum(a) => acc(a, &mut |ga| ga.iter_mut().for_each(|d| *d = *d + g[0])),
            Op::Mean(a) => {
                let scaled = g[0] / T::of(nodes[a].value.numel() as f64);
                acc(a, &mut |ga| ga.iter_mut().for_each(|d| *d = *d + scaled));
            }
            Op::GatherRows(a, ref rows) => {
                let cols = nodes[a].value.cols();
                acc(a, &mut |ga| {
                    for (gr, &r) in g.chunks(cols).zip(rows) {
                        add_into(&mut ga[r * cols..(r + 1) * cols], gr);
                    }
                });
            }
            Op::PickColumns(a, ref cols) => {
                let width = nodes[a].value.cols();
                acc(a, &mut |ga| {
                    for (i, (&c, &x)) in cols.iter().zip(g).enumerate() {
                        ga[i * width + c] = ga[i * width + c] + x;
                    }
                });
            }
            Op::SelectFlat(a, ref kept) => acc(a, &mut |ga| {
                for (&k, &x) in kept.iter().zip(g) {
                    ga[k] = ga[k] + x;
                }
            }),
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}
