//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] owns every value produced during a forward pass. Each
//! operation appends one node, so node ids are already a topological order
//! and backward is a single reverse sweep.

use super::kernels::{self, ConvParams, NormStats};
use super::{Real, Tensor, TensorError};

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that made it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d { x: Var, w: Var, b: Option<Var>, params: ConvParams },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, stats: NormStats<T> },
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    PixelShuffle(Var, usize),
    PixelUnshuffle(Var, usize),
    Concat(Var, Var),
    DivPerHead { x: Var, alpha: Var },
    Sum(Var),
    Mean(Var),
    L1(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Tensor<T>>,
    op: Op<T>,
}

/// Recording of one forward pass.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<T: Real>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn zip_map<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Drops every accumulated leaf gradient.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced by {op:?}");
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        // Nothing downstream can ask for gradients through a constant subgraph.
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node { value, requires_grad, grad: None, op });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, requires_grad: true, grad: None, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that is treated as a constant.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value, requires_grad: false, grad: None, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, params: ConvParams) -> Result<Var, TensorError> {
        let out = kernels::conv2d(self.value(x), self.value(w), b.map(|b| self.value(b)), params)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(out, Op::Conv2d { x, w, b, params }, &inputs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(kernels::sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    /// Exact GELU, `x·Φ(x)`.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(kernels::gelu);
        self.push(out, Op::Gelu(a), &[a])
    }

    pub fn softmax_lastdim(&mut self, a: Var) -> Var {
        let out = kernels::softmax_lastdim(self.value(a));
        self.push(out, Op::Softmax(a), &[a])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Result<Var, TensorError> {
        let (out, stats) = kernels::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, stats }, &[x, gamma, beta]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn transpose_last2(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = kernels::transpose_last2(self.value(a))?;
        Ok(self.push(out, Op::Transpose(a), &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    pub fn pixel_shuffle(&mut self, a: Var, r: usize) -> Result<Var, TensorError> {
        let out = kernels::pixel_shuffle(self.value(a), r)?;
        Ok(self.push(out, Op::PixelShuffle(a, r), &[a]))
    }

    pub fn pixel_unshuffle(&mut self, a: Var, r: usize) -> Result<Var, TensorError> {
        let out = kernels::pixel_unshuffle(self.value(a), r)?;
        Ok(self.push(out, Op::PixelUnshuffle(a, r), &[a]))
    }

    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = kernels::concat_channels(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Concat(a, b), &[a, b]))
    }

    /// Divides each head's block of a `[n, heads, r, c]` tensor by that
    /// head's entry of the rank-1 `alpha`.
    pub fn div_per_head(&mut self, x: Var, alpha: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let av = self.value(alpha);
        let (_, heads, r, c) = xv.dims4()?;
        if av.shape() != [heads] {
            return Err(TensorError::shape(
                "div_per_head",
                format!("alpha shape {:?} for {heads} heads", av.shape()),
            ));
        }
        let block = r * c;
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v / av.data()[(i / block) % heads])
            .collect();
        let out = Tensor::from_parts(xv.shape().to_vec(), data);
        Ok(self.push(out, Op::DivPerHead { x, alpha }, &[x, alpha]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Tensor::scalar(v.sum() / T::lit(v.numel() as f64));
        self.push(out, Op::Mean(a), &[a])
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        same_shape("l1_loss", self.value(pred), self.value(target))?;
        let (p, t) = (self.value(pred), self.value(target));
        let total: T = p.data().iter().zip(t.data()).map(|(&a, &b)| (a - b).abs()).sum();
        let out = Tensor::scalar(total / T::lit(p.numel() as f64));
        Ok(self.push(out, Op::L1(pred, target), &[pred, target]))
    }

    /// Reverse sweep from a single-element `loss`, adding `∂loss/∂leaf`
    /// into the gradient of every leaf that requires one.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.value(loss).numel() != 1 {
            return Err(TensorError::NotScalar { shape: self.value(loss).shape().to_vec() });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_parts(self.value(loss).shape().to_vec(), vec![T::one()]));
        for id in (0..=loss.0).rev() {
            let Some(gy) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            debug_assert!(gy.is_finite(), "non-finite gradient at node {id}");
            let contributions = self.node_backward(id, &gy)?;
            if contributions.is_empty() {
                let node = &mut self.nodes[id];
                match &mut node.grad {
                    Some(acc) => acc.data_mut().iter_mut().zip(gy.data()).for_each(|(a, &g)| *a += g),
                    None => node.grad = Some(gy),
                }
                continue;
            }
            for (input, g) in contributions {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, &v)| *a += v),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn node_backward(&self, id: usize, gy: &Tensor<T>) -> Result<Vec<(Var, Tensor<T>)>, TensorError> {
        let val = |v: Var| &self.nodes[v.0].value;
        let rg = |v: Var| self.nodes[v.0].requires_grad;
        let out = &self.nodes[id].value;
        Ok(match &self.nodes[id].op {
            Op::Leaf => Vec::new(),
            Op::Conv2d { x, w, b, params } => {
                let need = [rg(*x), rg(*w), b.is_some_and(rg)];
                let (gx, gw, gb) = kernels::conv2d_backward(val(*x), val(*w), gy, *params, need)?;
                let mut v = Vec::new();
                v.extend(gx.map(|g| (*x, g)));
                v.extend(gw.map(|g| (*w, g)));
                if let (Some(b), Some(g)) = (b, gb) {
                    v.push((*b, g));
                }
                v
            }
            Op::Add(a, b) => vec![(*a, gy.clone()), (*b, gy.clone())],
            Op::Sub(a, b) => vec![(*a, gy.clone()), (*b, gy.map(|g| -g))],
            Op::Mul(a, b) => vec![
                (*a, zip_map(gy, val(*b), |g, y| g * y)),
                (*b, zip_map(gy, val(*a), |g, x| g * x)),
            ],
            Op::Scale(a, f) => {
                let f = *f;
                vec![(*a, gy.map(|g| g * f))]
            }
            Op::Sigmoid(a) => vec![(*a, zip_map(gy, out, |g, s| g * s * (T::one() - s)))],
            Op::Gelu(a) => vec![(*a, zip_map(gy, val(*a), |g, x| g * kernels::gelu_grad(x)))],
            Op::Softmax(a) => vec![(*a, kernels::softmax_lastdim_backward(out, gy))],
            Op::LayerNorm { x, gamma, beta, stats } => {
                let (gx, gg, gb) = kernels::layer_norm_backward(val(*x), val(*gamma), stats, gy);
                vec![(*x, gx), (*gamma, gg), (*beta, gb)]
            }
            Op::MatMul(a, b) => {
                let (ga, gb) = kernels::matmul_backward(val(*a), val(*b), gy);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Transpose(a) => vec![(*a, kernels::transpose_last2(gy)?)],
            Op::Reshape(a) => vec![(*a, gy.clone().reshape(val(*a).shape())?)],
            Op::PixelShuffle(a, r) => vec![(*a, kernels::pixel_unshuffle(gy, *r)?)],
            Op::PixelUnshuffle(a, r) => vec![(*a, kernels::pixel_shuffle(gy, *r)?)],
            Op::Concat(a, b) => {
                let (ga, gb) = kernels::split_channels(gy, val(*a).shape()[1]);
                vec![(*a, ga), (*b, gb)]
            }
            Op::DivPerHead { x, alpha } => {
                let xv = val(*x);
                let av = val(*alpha).data();
                let (_, heads, r, c) = xv.dims4()?;
                let block = r * c;
                let mut gx = vec![T::zero(); xv.numel()];
                let mut ga = vec![T::zero(); heads];
                for (i, (&g, &xi)) in gy.data().iter().zip(xv.data()).enumerate() {
                    let h = (i / block) % heads;
                    gx[i] = g / av[h];
                    ga[h] -= g * xi / (av[h] * av[h]);
                }
                vec![
                    (*x, Tensor::from_parts(xv.shape().to_vec(), gx)),
                    (*alpha, Tensor::from_parts(vec![heads], ga)),
                ]
            }
            Op::Sum(a) => vec![(*a, Tensor::full(val(*a).shape(), gy.data()[0]))],
            Op::Mean(a) => {
                let n = T::lit(val(*a).numel() as f64);
                vec![(*a, Tensor::full(val(*a).shape(), gy.data()[0] / n))]
            }
            Op::L1(p, t) => {
                let scale = gy.data()[0] / T::lit(val(*p).numel() as f64);
                let gp = zip_map(val(*p), val(*t), |a, b| {
                    let d = a - b;
                    if d > T::zero() {
                        scale
                    } else if d < T::zero() {
                        -scale
                    } else {
                        T::zero()
                    }
                });
                let gt = gp.map(|g| -g);
                vec![(*p, gp), (*t, gt)]
            }
        })
    }
}
