//! Reverse-mode automatic differentiation over a Wengert tape.
//!
//! Operations are appended to a [`Tape`] in execution order, so the tape is
//! topologically sorted by construction. [`Tape::backward`] walks it once in
//! reverse, accumulating adjoints additively across fan-out.

use std::sync::atomic::{AtomicU32, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{strides, Tensor};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    idx: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx as usize
    }
}

/// Everything a backward rule may read.
pub(crate) struct BackwardCtx<'a, T> {
    pub grad: &'a Tensor<T>,
    pub inputs: Vec<&'a Tensor<T>>,
    pub output: &'a Tensor<T>,
    pub needs: Vec<bool>,
}

/// Maps the output adjoint to one optional adjoint per input.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&BackwardCtx<'_, T>) -> Vec<Option<Tensor<T>>>>;

struct Node<T> {
    value: Tensor<T>,
    inputs: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

/// Single-threaded recording of a computation.
pub struct Tape<T> {
    id: u32,
    nodes: Vec<Node<T>>,
}

/// Adjoints of the leaves reached by one backward pass.
pub struct Gradients<T> {
    tape: u32,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index()).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get_mut(v.index()).and_then(|g| g.take())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Neg,
    Abs,
    Log,
    Exp,
    Sqrt,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    L1Norm,
    FrobeniusNorm,
    /// Population standard deviation (divides by N).
    Std,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.push(Node {
            value,
            inputs: Vec::new(),
            backward: None,
            requires_grad,
        })
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[self.check(v)].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[self.check(v)].requires_grad
    }

    fn push(&mut self, node: Node<T>) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(node);
        Var { tape: self.id, idx }
    }

    fn check(&self, v: Var) -> usize {
        assert_eq!(v.tape, self.id, "variable recorded on a different tape");
        v.index()
    }

    /// Appends an operation. The backward rule is dropped when no input is
    /// differentiable.
    pub(crate) fn record(&mut self, value: Tensor<T>, inputs: &[Var], backward: BackwardFn<T>) -> Var {
        let inputs: Vec<usize> = inputs.iter().map(|&v| self.check(v)).collect();
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.push(Node {
            value,
            inputs,
            backward: requires_grad.then_some(backward),
            requires_grad,
        })
    }

    /// Propagates d(root)/d(leaf) to every differentiable leaf reachable from
    /// `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        if root.tape != self.id || root.index() >= self.nodes.len() {
            return Err(Error::DetachedRoot);
        }
        let r = root.index();
        let root_node = &self.nodes[r];
        if root_node.value.numel() != 1 {
            return Err(Error::NotScalarRoot(root_node.value.shape().to_vec()));
        }
        if !root_node.requires_grad {
            return Err(Error::DetachedRoot);
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[r] = Some(Tensor::ones(root_node.value.shape().to_vec()));
        for i in (0..=r).rev() {
            let node = &self.nodes[i];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(g) = grads[i].take() else {
                continue;
            };
            let ctx = BackwardCtx {
                grad: &g,
                inputs: node.inputs.iter().map(|&j| &self.nodes[j].value).collect(),
                output: &node.value,
                needs: node
                    .inputs
                    .iter()
                    .map(|&j| self.nodes[j].requires_grad)
                    .collect(),
            };
            let input_grads = backward(&ctx);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for (&j, ig) in node.inputs.iter().zip(input_grads) {
                if !self.nodes[j].requires_grad {
                    continue;
                }
                let Some(ig) = ig else { continue };
                debug_assert_eq!(ig.shape(), self.nodes[j].value.shape());
                match &mut grads[j] {
                    Some(acc) => acc.add_assign(&ig),
                    slot => *slot = Some(ig),
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }

    // ----------------------------------------------------------------
    // element-wise
    // ----------------------------------------------------------------

    pub fn unary(&mut self, op: Unary, a: Var) -> Result<Var> {
        let x = self.value(a);
        match op {
            Unary::Log if x.data().iter().any(|&v| v <= T::zero()) => {
                return Err(Error::DomainError("log of non-positive value"))
            }
            Unary::Sqrt if x.data().iter().any(|&v| v < T::zero()) => {
                return Err(Error::DomainError("sqrt of negative value"))
            }
            _ => {}
        }
        let slope = match op {
            Unary::LeakyRelu(s) => T::of(s),
            _ => T::zero(),
        };
        let f: fn(T, T) -> T = match op {
            Unary::Neg => |v, _| -v,
            Unary::Abs => |v, _| v.abs(),
            Unary::Log => |v, _| v.ln(),
            Unary::Exp => |v, _| v.exp(),
            Unary::Sqrt => |v, _| v.sqrt(),
            Unary::Sigmoid => |v, _| sigmoid(v),
            Unary::Tanh => |v, _| v.tanh(),
            Unary::Relu => |v, _| if v > T::zero() { v } else { T::zero() },
            Unary::LeakyRelu(_) => |v, s| if v > T::zero() { v } else { s * v },
        };
        let value = x.map(|v| f(v, slope));
        // d(out)/d(in) expressed through input x and output y.
        let df: fn(T, T, T) -> T = match op {
            Unary::Neg => |_, _, _| -T::one(),
            Unary::Abs => |x, _, _| sign(x),
            Unary::Log => |x, _, _| x.recip(),
            Unary::Exp => |_, y, _| y,
            Unary::Sqrt => |_, y, _| {
                if y > T::zero() {
                    T::of(0.5) / y
                } else {
                    T::zero()
                }
            },
            Unary::Sigmoid => |_, y, _| y * (T::one() - y),
            Unary::Tanh => |_, y, _| T::one() - y * y,
            Unary::Relu => |x, _, _| if x > T::zero() { T::one() } else { T::zero() },
            Unary::LeakyRelu(_) => |x, _, s| if x > T::zero() { T::one() } else { s },
        };
        Ok(self.record(
            value,
            &[a],
            Box::new(move |ctx| {
                let (x, y, g) = (ctx.inputs[0].data(), ctx.output.data(), ctx.grad.data());
                let data = (0..g.len()).map(|i| g[i] * df(x[i], y[i], slope)).collect();
                vec![Some(Tensor::new(ctx.grad.shape().to_vec(), data).unwrap())]
            }),
        ))
    }

    pub fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (xa, xb) = (self.value(a), self.value(b));
        let out_shape = broadcast_shape(xa.shape(), xb.shape())
            .ok_or_else(|| Error::shape("elementwise", xa.shape(), xb.shape()))?;
        let f: fn(T, T) -> T = match op {
            Binary::Add => |p, q| p + q,
            Binary::Sub => |p, q| p - q,
            Binary::Mul => |p, q| p * q,
            Binary::Div => |p, q| p / q,
        };
        let value = if xa.shape() == xb.shape() {
            xa.zip_map(xb, f)?
        } else {
            let oa = broadcast_offsets(xa.shape(), &out_shape);
            let ob = broadcast_offsets(xb.shape(), &out_shape);
            let (da, db) = (xa.data(), xb.data());
            let data = oa.iter().zip(&ob).map(|(&i, &j)| f(da[i], db[j])).collect();
            Tensor::new(out_shape.clone(), data)?
        };
        Ok(self.record(
            value,
            &[a, b],
            Box::new(move |ctx| {
                let (xa, xb, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad);
                let same = xa.shape() == xb.shape();
                let expand = |t: &Tensor<T>| -> Vec<T> {
                    if t.shape() == g.shape() {
                        t.data().to_vec()
                    } else {
                        let d = t.data();
                        broadcast_offsets(t.shape(), g.shape()).iter().map(|&i| d[i]).collect()
                    }
                };
                let (ea, eb) = if same {
                    (xa.data().to_vec(), xb.data().to_vec())
                } else {
                    (expand(xa), expand(xb))
                };
                let gd = g.data();
                let (ga, gb): (Vec<T>, Vec<T>) = match op {
                    Binary::Add => (gd.to_vec(), gd.to_vec()),
                    Binary::Sub => (gd.to_vec(), gd.iter().map(|&v| -v).collect()),
                    Binary::Mul => (
                        gd.iter().zip(&eb).map(|(&g, &b)| g * b).collect(),
                        gd.iter().zip(&ea).map(|(&g, &a)| g * a).collect(),
                    ),
                    Binary::Div => (
                        gd.iter().zip(&eb).map(|(&g, &b)| g / b).collect(),
                        gd.iter()
                            .zip(ea.iter().zip(&eb))
                            .map(|(&g, (&a, &b))| -g * a / (b * b))
                            .collect(),
                    ),
                };
                let full = |d: Vec<T>| Tensor::new(g.shape().to_vec(), d).unwrap();
                vec![
                    ctx.needs[0].then(|| sum_to_shape(&full(ga), xa.shape())),
                    ctx.needs[1].then(|| sum_to_shape(&full(gb), xb.shape())),
                ]
            }),
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }
    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(Unary::Neg, a).expect("neg is total")
    }
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(Unary::Abs, a).expect("abs is total")
    }
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Log, a)
    }
    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a).expect("exp is total")
    }
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(Unary::Sqrt, a)
    }
    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a).expect("sigmoid is total")
    }
    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a).expect("tanh is total")
    }
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a).expect("relu is total")
    }
    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(Unary::LeakyRelu(slope), a).expect("leaky_relu is total")
    }

    /// `a * mul + add` with constant coefficients.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let (m, c) = (T::of(mul), T::of(add));
        let value = self.value(a).map(|v| v * m + c);
        self.record(
            value,
            &[a],
            Box::new(move |ctx| vec![Some(ctx.grad.map(|g| g * m))]),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(a, c, 0.0)
    }

    // ----------------------------------------------------------------
    // reductions
    // ----------------------------------------------------------------

    /// Reduces over `axes` (all axes when `None`). Reduced axes are removed;
    /// a full reduction yields shape `[1]`.
    pub fn reduce(&mut self, op: Reduce, a: Var, axes: Option<&[usize]>) -> Result<Var> {
        let x = self.value(a);
        let plan = ReducePlan::new(x.shape(), axes)?;
        let n = T::of(plan.group as f64);
        let xd = x.data();
        let mut out = vec![T::zero(); plan.out_len];
        let mut mean = Vec::new();
        match op {
            Reduce::Sum | Reduce::Mean => {
                for (&o, &v) in plan.offsets.iter().zip(xd) {
                    out[o] += v;
                }
                if op == Reduce::Mean {
                    out.iter_mut().for_each(|v| *v /= n);
                }
            }
            Reduce::L1Norm => {
                for (&o, &v) in plan.offsets.iter().zip(xd) {
                    out[o] += v.abs();
                }
            }
            Reduce::FrobeniusNorm => {
                for (&o, &v) in plan.offsets.iter().zip(xd) {
                    out[o] += v * v;
                }
                out.iter_mut().for_each(|v| *v = v.sqrt());
            }
            Reduce::Std => {
                mean = vec![T::zero(); plan.out_len];
                for (&o, &v) in plan.offsets.iter().zip(xd) {
                    mean[o] += v;
                }
                mean.iter_mut().for_each(|v| *v /= n);
                for (&o, &v) in plan.offsets.iter().zip(xd) {
                    let d = v - mean[o];
                    out[o] += d * d;
                }
                out.iter_mut().for_each(|v| *v = (*v / n).sqrt());
            }
        }
        let value = Tensor::new(plan.out_shape.clone(), out)?;
        Ok(self.record(
            value,
            &[a],
            Box::new(move |ctx| {
                let (x, y, g) = (ctx.inputs[0].data(), ctx.output.data(), ctx.grad.data());
                let offs = &plan.offsets;
                let data: Vec<T> = match op {
                    Reduce::Sum => offs.iter().map(|&o| g[o]).collect(),
                    Reduce::Mean => offs.iter().map(|&o| g[o] / n).collect(),
                    Reduce::L1Norm => offs.iter().zip(x).map(|(&o, &v)| g[o] * sign(v)).collect(),
                    Reduce::FrobeniusNorm => offs
                        .iter()
                        .zip(x)
                        .map(|(&o, &v)| if y[o] > T::zero() { g[o] * v / y[o] } else { T::zero() })
                        .collect(),
                    Reduce::Std => offs
                        .iter()
                        .zip(x)
                        .map(|(&o, &v)| {
                            if y[o] > T::zero() {
                                g[o] * (v - mean[o]) / (n * y[o])
                            } else {
                                T::zero()
                            }
                        })
                        .collect(),
                };
                vec![Some(Tensor::new(ctx.inputs[0].shape().to_vec(), data).unwrap())]
            }),
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.reduce(Reduce::Sum, a, None).expect("sum over non-empty tensor")
    }

    pub fn mean(&mut self, a: Var) -> Var {
        self.reduce(Reduce::Mean, a, None).expect("mean over non-empty tensor")
    }

    // ----------------------------------------------------------------
    // linear algebra and shape manipulation
    // ----------------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (xa, xb) = (self.value(a), self.value(b));
        if xa.rank() != 2 || xb.rank() != 2 || xa.dim(1) != xb.dim(0) {
            return Err(Error::shape("matmul", xa.shape(), xb.shape()));
        }
        let (m, k, n) = (xa.dim(0), xa.dim(1), xb.dim(1));
        let value = Tensor::new([m, n], matmul_raw(xa.data(), xb.data(), m, k, n))?;
        Ok(self.record(
            value,
            &[a, b],
            Box::new(move |ctx| {
                let (xa, xb, g) = (ctx.inputs[0].data(), ctx.inputs[1].data(), ctx.grad.data());
                // dA = G · Bᵀ, dB = Aᵀ · G
                let ga = ctx.needs[0].then(|| {
                    let mut d = vec![T::zero(); m * k];
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                d[i * k + p] += gij * xb[p * n + j];
                            }
                        }
                    }
                    Tensor::new([m, k], d).unwrap()
                });
                let gb = ctx.needs[1].then(|| {
                    let mut d = vec![T::zero(); k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = xa[i * k + p];
                            for j in 0..n {
                                d[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                    Tensor::new([k, n], d).unwrap()
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape.to_vec())?;
        Ok(self.record(
            value,
            &[a],
            Box::new(|ctx| {
                vec![Some(
                    ctx.grad.clone().reshape(ctx.inputs[0].shape().to_vec()).unwrap(),
                )]
            }),
        ))
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rank() != 2 {
            return Err(Error::shape("transpose", x.shape(), &[2]));
        }
        let value = transpose_raw(x);
        Ok(self.record(
            value,
            &[a],
            Box::new(|ctx| vec![Some(transpose_raw(ctx.grad))]),
        ))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if axis >= x.rank() {
            return Err(Error::InvalidAxis { axis, rank: x.rank() });
        }
        if start + len > x.dim(axis) {
            return Err(Error::shape("slice", x.shape(), &[start, len]));
        }
        let shape = x.shape().to_vec();
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let full = shape[axis];
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * full * inner + start * inner;
            data.extend_from_slice(&x.data()[base..base + len * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(
            value,
            &[a],
            Box::new(move |ctx| {
                let mut d = vec![T::zero(); outer * full * inner];
                let g = ctx.grad.data();
                for o in 0..outer {
                    let base = o * full * inner + start * inner;
                    d[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(Tensor::new(shape.clone(), d).unwrap())]
            }),
        ))
    }

    /// Concatenates tensors along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self.value(parts[0]).shape().to_vec();
        if axis >= first.len() {
            return Err(Error::InvalidAxis { axis, rank: first.len() });
        }
        let mut sizes = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (x, y))| i != axis && x != y)
            {
                return Err(Error::shape("concat", &first, s));
            }
            sizes.push(s[axis]);
        }
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let total: usize = sizes.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&p, &sz) in parts.iter().zip(&sizes) {
                let d = self.value(p).data();
                data.extend_from_slice(&d[o * sz * inner..(o + 1) * sz * inner]);
            }
        }
        let mut out_shape = first.clone();
        out_shape[axis] = total;
        let value = Tensor::new(out_shape, data)?;
        Ok(self.record(
            value,
            parts,
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let mut offset = 0;
                let mut grads = Vec::with_capacity(sizes.len());
                for (k, &sz) in sizes.iter().enumerate() {
                    let mut d = Vec::with_capacity(outer * sz * inner);
                    for o in 0..outer {
                        let base = o * total * inner + offset * inner;
                        d.extend_from_slice(&g[base..base + sz * inner]);
                    }
                    offset += sz;
                    grads.push(
                        ctx.needs[k]
                            .then(|| Tensor::new(ctx.inputs[k].shape().to_vec(), d).unwrap()),
                    );
                }
                grads
            }),
        ))
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            for (cv, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv += aip * bv;
            }
        }
    }
    c
}

fn transpose_raw<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (r, c) = (x.dim(0), x.dim(1));
    let d = x.data();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = d[i * c + j];
        }
    }
    Tensor::new([c, r], out).unwrap()
}

/// Right-aligned broadcast of two shapes; each dimension must agree or be 1.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let da = if i + a.len() >= r { a[i + a.len() - r] } else { 1 };
        let db = if i + b.len() >= r { b[i + b.len() - r] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// For each element of `out_shape` (row-major), the offset of the element of
/// an `in_shape` tensor that broadcasts onto it.
pub(crate) fn broadcast_offsets(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let r = out_shape.len();
    let pad = r - in_shape.len();
    let in_strides = strides(in_shape);
    let mut bstr = vec![0usize; r];
    for i in 0..in_shape.len() {
        if in_shape[i] != 1 {
            bstr[pad + i] = in_strides[i];
        }
    }
    let n: usize = out_shape.iter().product();
    let mut offsets = Vec::with_capacity(n);
    let mut idx = vec![0usize; r];
    let mut off = 0usize;
    for _ in 0..n {
        offsets.push(off);
        for d in (0..r).rev() {
            idx[d] += 1;
            off += bstr[d];
            if idx[d] < out_shape[d] {
                break;
            }
            off -= bstr[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    offsets
}

/// Sums `g` down to `shape` (the adjoint of broadcasting).
pub(crate) fn sum_to_shape<T: Scalar>(g: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = vec![T::zero(); shape.iter().product()];
    for (&o, &v) in broadcast_offsets(shape, g.shape()).iter().zip(g.data()) {
        out[o] += v;
    }
    Tensor::new(shape.to_vec(), out).unwrap()
}

struct ReducePlan {
    out_shape: Vec<usize>,
    out_len: usize,
    offsets: Vec<usize>,
    group: usize,
}

impl ReducePlan {
    fn new(shape: &[usize], axes: Option<&[usize]>) -> Result<Self> {
        let rank = shape.len();
        let axes: Vec<usize> = match axes {
            Some(a) => a.to_vec(),
            None => (0..rank).collect(),
        };
        if let Some(&axis) = axes.iter().find(|&&a| a >= rank) {
            return Err(Error::InvalidAxis { axis, rank });
        }
        let n: usize = shape.iter().product();
        if n == 0 || axes.is_empty() {
            return Err(Error::EmptyReduction);
        }
        let keep: Vec<usize> = shape
            .iter()
            .enumerate()
            .map(|(i, &d)| if axes.contains(&i) { 1 } else { d })
            .collect();
        let mut out_shape: Vec<usize> = shape
            .iter()
            .enumerate()
            .filter(|(i, _)| !axes.contains(i))
            .map(|(_, &d)| d)
            .collect();
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let out_len = keep.iter().product();
        Ok(Self {
            offsets: broadcast_offsets(&keep, shape),
            group: n / out_len,
            out_len,
            out_shape,
        })
    }
}
