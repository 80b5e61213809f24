//! Reverse-mode automatic differentiation over dense real tensors.
//!
//! A [`Graph`] is a tape: every primitive appends one node holding its
//! forward value and a record of its inputs. Node ids are assigned in
//! creation order, so walking ids in reverse visits the graph in reverse
//! topological order. [`Graph::backward`] returns a [`GradientMap`] and never
//! touches the recorded values.
//!
//! Complex images travel through the graph as two real channels
//! (`[batch, 2, height, width]`, real part first).
//!
//! ```
//! use agbrecon::autodiff::Graph;
//!
//! let mut g = Graph::<f64>::new();
//! let x = g.param(vec![3.0], &[1]);
//! let zero = g.constant(vec![0.0], &[1]);
//! let loss = g.mse(x, zero).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &[6.0]);
//! ```

mod adam;
mod conv;
mod gradcheck;
mod ops;
mod params;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::real::Real;

pub use adam::{adam_step, AdamConfig, AdamState, Direction};
pub use gradcheck::{grad_check, relative_error};
pub use ops::{BatchNormMode, RunningStats, SamePadding};
pub use params::{clip_params, Param, ParamSet};

pub type NodeId = usize;

/// Handle to a node of a [`Graph`]. Values and shapes live in the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tensor {
    id: NodeId,
}

impl Tensor {
    pub fn id(self) -> NodeId {
        self.id
    }
}

pub(crate) struct Node<T> {
    value: Vec<T>,
    shape: Vec<usize>,
    requires_grad: bool,
    op: Op<T>,
}

pub(crate) enum Op<T> {
    Leaf,
    Conv2d {
        input: Tensor,
        kernel: Tensor,
        bias: Tensor,
        stride: usize,
        pad: SamePadding,
    },
    LeakyRelu {
        input: Tensor,
        slope: T,
    },
    BatchNorm {
        input: Tensor,
        gamma: Tensor,
        beta: Tensor,
        normalized: Vec<T>,
        inv_std: Vec<T>,
        batch_stats: bool,
    },
    Linear {
        input: Tensor,
        weight: Tensor,
        bias: Tensor,
    },
    Concat {
        inputs: Vec<Tensor>,
    },
    Mse {
        pred: Tensor,
        target: Tensor,
    },
    Add {
        a: Tensor,
        b: Tensor,
    },
    Sub {
        a: Tensor,
        b: Tensor,
    },
    ScaleBy {
        input: Tensor,
        scalar: Tensor,
    },
    MulConst {
        input: Tensor,
        factor: T,
    },
    MulElem {
        input: Tensor,
        factors: Vec<T>,
    },
    AddConst {
        input: Tensor,
    },
    ComplexMul {
        input: Tensor,
        field: Vec<T>,
        conjugate: bool,
    },
    Fourier {
        input: Tensor,
        inverse: bool,
    },
    Magnitude {
        input: Tensor,
    },
    Sum {
        input: Tensor,
    },
    Mean {
        input: Tensor,
    },
    Reshape {
        input: Tensor,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::LeakyRelu { .. } => "leaky_relu",
            Op::BatchNorm { .. } => "batch_norm2d",
            Op::Linear { .. } => "linear",
            Op::Concat { .. } => "concat_channels",
            Op::Mse { .. } => "mse",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::ScaleBy { .. } => "scale_by",
            Op::MulConst { .. } => "mul_const",
            Op::MulElem { .. } => "mul_elem",
            Op::AddConst { .. } => "add_const",
            Op::ComplexMul { .. } => "complex_mul",
            Op::Fourier { inverse: false, .. } => "fft2",
            Op::Fourier { inverse: true, .. } => "ifft2",
            Op::Magnitude { .. } => "magnitude",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
            Op::Reshape { .. } => "reshape",
        }
    }

    fn parents(&self) -> Vec<Tensor> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Conv2d {
                input, kernel, bias, ..
            } => vec![*input, *kernel, *bias],
            Op::BatchNorm { input, gamma, beta, .. } => vec![*input, *gamma, *beta],
            Op::Linear { input, weight, bias } => vec![*input, *weight, *bias],
            Op::Concat { inputs } => inputs.clone(),
            Op::Mse { pred, target } => vec![*pred, *target],
            Op::Add { a, b } | Op::Sub { a, b } => vec![*a, *b],
            Op::ScaleBy { input, scalar } => vec![*input, *scalar],
            Op::LeakyRelu { input, .. }
            | Op::MulConst { input, .. }
            | Op::MulElem { input, .. }
            | Op::AddConst { input }
            | Op::ComplexMul { input, .. }
            | Op::Fourier { input, .. }
            | Op::Magnitude { input }
            | Op::Sum { input }
            | Op::Mean { input }
            | Op::Reshape { input } => vec![*input],
        }
    }
}

/// Gradients keyed by node id. Every entry has the shape of the tensor it keys.
#[derive(Clone, Debug, Default)]
pub struct GradientMap<T> {
    entries: BTreeMap<NodeId, Vec<T>>,
}

impl<T> GradientMap<T> {
    pub fn get(&self, t: Tensor) -> Option<&[T]> {
        self.entries.get(&t.id).map(Vec::as_slice)
    }

    pub fn contains(&self, t: Tensor) -> bool {
        self.entries.contains_key(&t.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &[T])> {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }
}

/// The tape.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
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

    /// Leaf that participates in differentiation.
    pub fn param(&mut self, value: Vec<T>, shape: &[usize]) -> Tensor {
        self.leaf(value, shape, true)
    }

    /// Leaf treated as a constant by `backward`.
    pub fn constant(&mut self, value: Vec<T>, shape: &[usize]) -> Tensor {
        self.leaf(value, shape, false)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        self.constant(vec![T::zero(); n], shape)
    }

    pub fn leaf(&mut self, value: Vec<T>, shape: &[usize], requires_grad: bool) -> Tensor {
        assert_eq!(
            value.len(),
            shape.iter().product::<usize>(),
            "leaf value length does not match shape {shape:?}"
        );
        self.push(value, shape.to_vec(), requires_grad, Op::Leaf)
    }

    pub fn value(&self, t: Tensor) -> &[T] {
        &self.nodes[t.id].value
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[t.id].shape
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.id].requires_grad
    }

    /// Name of the primitive that produced `t` (`"leaf"` for leaves).
    pub fn op_name(&self, t: Tensor) -> &'static str {
        self.nodes[t.id].op.name()
    }

    /// Direct inputs of `t`, in argument order.
    pub fn parents(&self, t: Tensor) -> Vec<Tensor> {
        self.nodes[t.id].op.parents()
    }

    /// Value of a single-element tensor.
    pub fn scalar(&self, t: Tensor) -> T {
        let v = self.value(t);
        assert_eq!(v.len(), 1, "tensor is not a scalar");
        v[0]
    }

    pub(crate) fn push(&mut self, value: Vec<T>, shape: Vec<usize>, requires_grad: bool, op: Op<T>) -> Tensor {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            shape,
            requires_grad,
            op,
        });
        Tensor { id }
    }

    /// Gradient of a scalar `root` with respect to every reachable node that
    /// requires gradients.
    pub fn backward(&self, root: Tensor) -> Result<GradientMap<T>> {
        let shape = self.shape(root);
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarRoot(shape.to_vec()));
        }
        self.backward_from(root, vec![T::one()])
    }

    /// Vector-Jacobian product: propagates `seed` (shaped like `root`) back
    /// through the graph.
    pub fn backward_from(&self, root: Tensor, seed: Vec<T>) -> Result<GradientMap<T>> {
        if seed.len() != self.value(root).len() {
            return Err(Error::shape(
                "backward",
                format!("seed has {} elements, root has {}", seed.len(), self.value(root).len()),
            ));
        }
        let mut map = GradientMap::default();
        if !self.requires_grad(root) {
            return Ok(map);
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::new();
        grads.resize_with(root.id + 1, || None);
        grads[root.id] = Some(seed);
        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            self.propagate(&node.op, Tensor { id }, &g, &mut grads);
            map.entries.insert(id, g);
        }
        Ok(map)
    }

    /// Lazily allocated gradient slot for `t`; `None` when `t` is constant.
    pub(crate) fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], t: Tensor) -> Option<&'g mut Vec<T>> {
        let node = &self.nodes[t.id];
        if !node.requires_grad {
            return None;
        }
        Some(grads[t.id].get_or_insert_with(|| vec![T::zero(); node.value.len()]))
    }
}
