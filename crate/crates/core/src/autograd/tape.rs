use super::backward::{
    conv2d_backward, gelu_backward, pixel_norm_backward, pixel_shuffle_backward,
};
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::nn_ops::{self, ConvSpec};
use crate::tensor::{Real, Tensor};

/// The layer operations a network is written against.
///
/// [`Eager`] evaluates them directly; [`Tape`] evaluates and records them for
/// a backward pass. Parameters are referenced by name.
pub trait Graph<T: Real> {
    type Value: Clone;

    fn tensor<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T>;

    fn conv2d(
        &mut self,
        x: &Self::Value,
        spec: &ConvSpec,
        weight: &str,
        bias: Option<&str>,
    ) -> Result<Self::Value>;

    fn gelu(&mut self, x: &Self::Value) -> Result<Self::Value>;

    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    fn pixel_norm(
        &mut self,
        x: &Self::Value,
        gamma: &str,
        beta: &str,
        epsilon: f64,
    ) -> Result<Self::Value>;

    fn pixel_shuffle(&mut self, x: &Self::Value, r: usize) -> Result<Self::Value>;
}

fn bias_slice<'a, T: Real>(params: &'a ParamStore<T>, bias: Option<&str>) -> Result<Option<&'a [T]>> {
    bias.map(|b| params.get(b).map(Tensor::data)).transpose()
}

/// Direct evaluation with no recording.
pub struct Eager<'p, T: Real> {
    params: &'p ParamStore<T>,
}

impl<'p, T: Real> Eager<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self { params }
    }
}

impl<T: Real> Graph<T> for Eager<'_, T> {
    type Value = Tensor<T>;

    fn tensor<'a>(&'a self, v: &'a Tensor<T>) -> &'a Tensor<T> {
        v
    }

    fn conv2d(
        &mut self,
        x: &Tensor<T>,
        spec: &ConvSpec,
        weight: &str,
        bias: Option<&str>,
    ) -> Result<Tensor<T>> {
        let w = self.params.get(weight)?;
        nn_ops::conv2d(x, spec, w, bias_slice(self.params, bias)?)
    }

    fn gelu(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(nn_ops::gelu(x))
    }

    fn mul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.mul(b)
    }

    fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.add(b)
    }

    fn pixel_norm(&mut self, x: &Tensor<T>, gamma: &str, beta: &str, epsilon: f64) -> Result<Tensor<T>> {
        let g = self.params.get(gamma)?.data();
        let b = self.params.get(beta)?.data();
        Ok(nn_ops::pixel_norm_forward(x, g, b, epsilon)?.output)
    }

    fn pixel_shuffle(&mut self, x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
        nn_ops::pixel_shuffle(x, r)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Conv,
    Gelu,
    Mul,
    Add,
    PixelNorm,
    PixelShuffle,
}

enum Op {
    Leaf,
    Conv {
        x: Var,
        spec: ConvSpec,
        weight: String,
        bias: Option<String>,
    },
    Gelu(Var),
    Mul(Var, Var),
    Add(Var, Var),
    PixelNorm {
        gamma: String,
        beta: String,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    PixelShuffle(Var, usize),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Conv { .. } => OpKind::Conv,
            Op::Gelu(_) => OpKind::Gelu,
            Op::Mul(..) => OpKind::Mul,
            Op::Add(..) => OpKind::Add,
            Op::PixelNorm { .. } => OpKind::PixelNorm,
            Op::PixelShuffle(..) => OpKind::PixelShuffle,
        }
    }
}

struct Node<T: Real> {
    op: Op,
    /// Primary input, used by ops that do not store it in `op`.
    parent: Option<Var>,
    value: Tensor<T>,
}

/// Wengert list of one forward pass.
///
/// Nodes are appended in evaluation order; [`Tape::backward`] walks them in
/// exact reverse. A tape can be replayed backward once.
pub struct Tape<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    consumed: bool,
}

/// Output of a backward pass.
pub struct Gradients<T: Real> {
    /// One entry per parameter in the store, zero for parameters the pass did not touch.
    pub params: ParamStore<T>,
    nodes: Vec<Option<Tensor<T>>>,
    /// Node ids in the order the backward pass visited them.
    pub visit_order: Vec<usize>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to a leaf value, if any flowed into it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, None, t)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kinds(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.nodes.iter().map(|n| n.op.kind())
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.kinds().filter(|k| *k == kind).count()
    }

    fn push(&mut self, op: Op, parent: Option<Var>, value: Tensor<T>) -> Var {
        self.nodes.push(Node { op, parent, value });
        Var(self.nodes.len() - 1)
    }

    /// Reverse-mode sweep from `output`, seeded with `seed = dL/d(output)`.
    pub fn backward(&mut self, output: Var, seed: Tensor<T>) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::Autograd(
                "tape already replayed; run a new forward pass first".into(),
            ));
        }
        if output.0 >= self.nodes.len() {
            return Err(Error::Autograd(format!("unknown value id {}", output.0)));
        }
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape(format!(
                "seed {:?} does not match output {:?}",
                seed.shape(),
                self.value(output).shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut pgrads = self.params.zeros_like();
        grads[output.0] = Some(seed);
        let mut visit_order = Vec::with_capacity(self.nodes.len());

        for id in (0..self.nodes.len()).rev() {
            visit_order.push(id);
            let Some(gy) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(gy);
                    continue;
                }
                Op::Conv {
                    x,
                    spec,
                    weight,
                    bias,
                } => {
                    let w = self.params.get(weight)?;
                    let g = conv2d_backward(self.value(*x), spec, w, &gy)?;
                    accumulate(pgrads.get_mut(weight)?, &g.weight)?;
                    if let (Some(name), Some(gb)) = (bias, g.bias) {
                        let t = pgrads.get_mut(name)?;
                        let gb = Tensor::from_values(t.shape(), gb)?;
                        accumulate(t, &gb)?;
                    }
                    send(&mut grads, *x, g.input)?;
                }
                Op::Gelu(x) => {
                    let gx = gelu_backward(self.value(*x), &gy)?;
                    send(&mut grads, *x, gx)?;
                }
                Op::Mul(a, b) => {
                    let ga = gy.mul(self.value(*b))?;
                    let gb = gy.mul(self.value(*a))?;
                    send(&mut grads, *a, ga)?;
                    send(&mut grads, *b, gb)?;
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, gy.clone())?;
                    send(&mut grads, *b, gy)?;
                }
                Op::PixelNorm {
                    gamma,
                    beta,
                    normalized,
                    inv_std,
                } => {
                    let gam = self.params.get(gamma)?;
                    let g = pixel_norm_backward(&gy, normalized, inv_std, gam.data())?;
                    let t = pgrads.get_mut(gamma)?;
                    let gg = Tensor::from_values(t.shape(), g.gamma)?;
                    accumulate(t, &gg)?;
                    let t = pgrads.get_mut(beta)?;
                    let gb = Tensor::from_values(t.shape(), g.beta)?;
                    accumulate(t, &gb)?;
                    let x = node.parent.expect("pixel norm node records its input");
                    send(&mut grads, x, g.input)?;
                }
                Op::PixelShuffle(x, r) => {
                    let gx = pixel_shuffle_backward(&gy, *r)?;
                    send(&mut grads, *x, gx)?;
                }
            }
        }

        Ok(Gradients {
            params: pgrads,
            nodes: grads,
            visit_order,
        })
    }
}

fn accumulate<T: Real>(dst: &mut Tensor<T>, g: &Tensor<T>) -> Result<()> {
    if dst.shape() != g.shape() {
        return Err(Error::shape(format!(
            "gradient {:?} for parameter {:?}",
            g.shape(),
            dst.shape()
        )));
    }
    for (d, v) in dst.data_mut().iter_mut().zip(g.data()) {
        *d = *d + *v;
    }
    Ok(())
}

fn send<T: Real>(grads: &mut [Option<Tensor<T>>], to: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[to.0] {
        Some(existing) => accumulate(existing, &g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

impl<T: Real> Graph<T> for Tape<'_, T> {
    type Value = Var;

    fn tensor<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        self.value(*v)
    }

    fn conv2d(&mut self, x: &Var, spec: &ConvSpec, weight: &str, bias: Option<&str>) -> Result<Var> {
        let w = self.params.get(weight)?;
        let y = nn_ops::conv2d(self.value(*x), spec, w, bias_slice(self.params, bias)?)?;
        let op = Op::Conv {
            x: *x,
            spec: *spec,
            weight: weight.to_owned(),
            bias: bias.map(str::to_owned),
        };
        Ok(self.push(op, Some(*x), y))
    }

    fn gelu(&mut self, x: &Var) -> Result<Var> {
        let y = nn_ops::gelu(self.value(*x));
        Ok(self.push(Op::Gelu(*x), Some(*x), y))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.value(*a).mul(self.value(*b))?;
        Ok(self.push(Op::Mul(*a, *b), None, y))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.value(*a).add(self.value(*b))?;
        Ok(self.push(Op::Add(*a, *b), None, y))
    }

    fn pixel_norm(&mut self, x: &Var, gamma: &str, beta: &str, epsilon: f64) -> Result<Var> {
        let g = self.params.get(gamma)?.data();
        let b = self.params.get(beta)?.data();
        let out = nn_ops::pixel_norm_forward(self.value(*x), g, b, epsilon)?;
        let op = Op::PixelNorm {
            gamma: gamma.to_owned(),
            beta: beta.to_owned(),
            normalized: out.normalized,
            inv_std: out.inv_std,
        };
        Ok(self.push(op, Some(*x), out.output))
    }

    fn pixel_shuffle(&mut self, x: &Var, r: usize) -> Result<Var> {
        let y = nn_ops::pixel_shuffle(self.value(*x), r)?;
        Ok(self.push(Op::PixelShuffle(*x, r), Some(*x), y))
    }
}
