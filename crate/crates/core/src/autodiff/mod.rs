//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Operations on [`Var`]s are appended to a [`Tape`] in execution order, so
//! node ids are already a topological order. Every backward rule is itself
//! written in terms of tape operations, which means a gradient can be
//! recorded onto the tape (`create_graph = true`) and differentiated again.
//! The gradient penalty relies on this: it differentiates the norm of an
//! input gradient with respect to the critic parameters.
//!
//! ```
//! use waveforge::autodiff::Tape;
//! use waveforge::Tensor;
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0, 3.0]).unwrap().with_requires_grad(true));
//! let y = x.mul(&x).unwrap().sum().unwrap();
//! y.backward().unwrap();
//! assert_eq!(x.grad().unwrap().data(), &[2.0, 4.0, 6.0]);
//! ```

mod backward;
pub(crate) mod kernels;
mod ops;

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use kernels::AxisMatrix;

/// Stride and zero padding of a 2-D convolution, per (height, width) axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvGeom {
    pub fn new(stride: (usize, usize), padding: (usize, usize)) -> Self {
        ConvGeom { stride, padding }
    }

    pub fn unit() -> Self {
        ConvGeom::new((1, 1), (0, 0))
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Mul,
    AddScalar,
    MulScalar(f64),
    Exp,
    Ln,
    Sqrt,
    Recip,
    LeakyRelu(f64),
    SumAll,
    SumTo,
    BroadcastTo,
    Reshape,
    Transpose,
    MatMul,
    Conv2d(ConvGeom),
    ConvInputGrad(ConvGeom),
    ConvWeightGrad(ConvGeom),
    AxisMap {
        axis: usize,
        map: Rc<AxisMatrix>,
        transposed: bool,
    },
    Crop(Vec<usize>),
    Pad(Vec<usize>),
    GatherRows(Rc<Vec<usize>>),
    ScatterRows(Rc<Vec<usize>>),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    inputs: Vec<usize>,
    requires_grad: bool,
    grad: Option<Tensor>,
}

struct TapeInner {
    nodes: Vec<Node>,
    grad_enabled: bool,
    consumed: bool,
}

/// Recorded computation graph. Cheap to clone; clones share the same graph.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    id: usize,
    value: Rc<Tensor>,
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.value.shape())
            .finish()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                grad_enabled: true,
                consumed: false,
            })),
        }
    }

    /// Records an input. It takes part in differentiation iff
    /// `tensor.requires_grad()`.
    pub fn leaf(&self, tensor: Tensor) -> Var {
        let requires_grad = tensor.requires_grad();
        self.push_node(tensor, Op::Leaf, Vec::new(), requires_grad)
    }

    /// Records a value that is never differentiated.
    pub fn constant(&self, tensor: Tensor) -> Var {
        self.push_node(tensor, Op::Constant, Vec::new(), false)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_consumed(&self) -> bool {
        self.inner.borrow().consumed
    }

    pub fn grad_enabled(&self) -> bool {
        self.inner.borrow().grad_enabled
    }

    /// Toggles recording of derivative edges. Returns the previous setting.
    pub fn set_grad_enabled(&self, enabled: bool) -> bool {
        std::mem::replace(&mut self.inner.borrow_mut().grad_enabled, enabled)
    }

    fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    fn push_node(&self, value: Tensor, op: Op, inputs: Vec<usize>, requires_grad: bool) -> Var {
        let value = Rc::new(value);
        let mut inner = self.inner.borrow_mut();
        let id = inner.nodes.len();
        inner.nodes.push(Node {
            value: value.clone(),
            op,
            inputs,
            requires_grad,
            grad: None,
        });
        Var {
            tape: self.clone(),
            id,
            value,
        }
    }

    /// Records the result of an operation on `inputs`.
    pub(crate) fn record(&self, value: Tensor, op: Op, inputs: &[&Var]) -> Var {
        let enabled = self.grad_enabled();
        let requires_grad = enabled && inputs.iter().any(|v| v.requires_grad());
        if requires_grad {
            let ids = inputs.iter().map(|v| v.id).collect();
            self.push_node(value, op, ids, true)
        } else {
            self.push_node(value, Op::Constant, Vec::new(), false)
        }
    }

    fn var_at(&self, id: usize) -> Var {
        let value = self.inner.borrow().nodes[id].value.clone();
        Var {
            tape: self.clone(),
            id,
            value,
        }
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// With `create_graph` the returned gradients are themselves recorded on
    /// the tape and can be differentiated again. Inputs that `output` does
    /// not depend on receive zeros.
    pub fn grad(&self, output: &Var, wrt: &[&Var], create_graph: bool) -> Result<Vec<Var>> {
        for v in std::iter::once(output).chain(wrt.iter().copied()) {
            if !self.same(&v.tape) {
                return Err(Error::ForeignVar);
            }
        }
        if self.is_consumed() {
            return Err(Error::TapeConsumed);
        }
        if !output.value.is_scalar() {
            return Err(Error::NotScalar {
                op: "backward",
                shape: output.shape().to_vec(),
            });
        }
        let previous = self.set_grad_enabled(create_graph);
        let result = self.propagate(output);
        self.set_grad_enabled(previous);
        let grads = result?;
        wrt.iter()
            .map(|v| match grads.get(v.id).and_then(|g| g.clone()) {
                Some(g) => Ok(g),
                None => Ok(self.constant(Tensor::zeros_like(&v.value))),
            })
            .collect()
    }

    fn propagate(&self, output: &Var) -> Result<Vec<Option<Var>>> {
        let n = output.id + 1;
        let mut grads: Vec<Option<Var>> = vec![None; n];
        if !output.requires_grad() {
            return Ok(grads);
        }
        grads[output.id] = Some(self.constant(Tensor::ones(output.shape())?));
        for id in (0..n).rev() {
            let Some(g) = grads[id].clone() else { continue };
            let (op, inputs) = {
                let inner = self.inner.borrow();
                let node = &inner.nodes[id];
                if !node.requires_grad || node.inputs.is_empty() {
                    continue;
                }
                (node.op.clone(), node.inputs.clone())
            };
            let input_vars: Vec<Var> = inputs.iter().map(|&i| self.var_at(i)).collect();
            let out = self.var_at(id);
            let input_grads = backward::rule(&op, &input_vars, &out, &g)?;
            for (var, ig) in input_vars.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !var.requires_grad() {
                    continue;
                }
                grads[var.id] = Some(match grads[var.id].take() {
                    Some(acc) => acc.add(&ig)?,
                    None => ig,
                });
            }
        }
        Ok(grads)
    }
}

impl Var {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn item(&self) -> Result<f64> {
        self.value.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.id].requires_grad
    }

    /// Runs backpropagation from this scalar and stores the gradient of every
    /// `requires_grad` leaf recorded before it. The tape is consumed: a second
    /// call fails with [`Error::TapeConsumed`].
    pub fn backward(&self) -> Result<()> {
        let leaves: Vec<Var> = {
            let inner = self.tape.inner.borrow();
            inner.nodes[..=self.id]
                .iter()
                .enumerate()
                .filter(|(_, n)| n.requires_grad && matches!(n.op, Op::Leaf))
                .map(|(i, n)| Var {
                    tape: self.tape.clone(),
                    id: i,
                    value: n.value.clone(),
                })
                .collect()
        };
        let refs: Vec<&Var> = leaves.iter().collect();
        let grads = self.tape.grad(self, &refs, false)?;
        let mut inner = self.tape.inner.borrow_mut();
        for (leaf, g) in leaves.iter().zip(grads) {
            inner.nodes[leaf.id].grad = Some((*g.value).clone());
        }
        inner.consumed = true;
        Ok(())
    }

    /// Gradient stored by the last [`Var::backward`], for leaves only.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape.inner.borrow().nodes[self.id].grad.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(tape: &Tape, shape: &[usize], data: &[f64]) -> Var {
        tape.leaf(
            Tensor::new(shape.to_vec(), data.to_vec())
                .unwrap()
                .with_requires_grad(true),
        )
    }

    #[test]
    fn sum_gives_ones() {
        let tape = Tape::new();
        let x = leaf(&tape, &[2, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]);
        x.sum().unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn double_backward_is_rejected() {
        let tape = Tape::new();
        let x = leaf(&tape, &[2], &[1.0, 2.0]);
        let y = x.mul(&x).unwrap().sum().unwrap();
        y.backward().unwrap();
        assert!(matches!(y.backward(), Err(Error::TapeConsumed)));
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let tape = Tape::new();
        let x = leaf(&tape, &[2], &[1.0, 2.0]);
        assert!(matches!(
            x.mul_scalar(2.0).unwrap().backward(),
            Err(Error::NotScalar { .. })
        ));
    }

    #[test]
    fn annihilation_gives_zero_grad() {
        let tape = Tape::new();
        let x = leaf(&tape, &[3], &[1.0, 2.0, 3.0]);
        let z = tape.constant(Tensor::zeros(&[3]).unwrap());
        let y = x.mul(&z).unwrap();
        assert_eq!(y.data(), &[0.0; 3]);
        y.sum().unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn shared_leaf_accumulates() {
        let tape = Tape::new();
        let x = leaf(&tape, &[1], &[3.0]);
        // y = x*x + 2x  -> dy/dx = 2x + 2 = 8
        let y = x
            .mul(&x)
            .unwrap()
            .add(&x.mul_scalar(2.0).unwrap())
            .unwrap()
            .sum()
            .unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap().data(), &[8.0]);
    }

    #[test]
    fn second_order_through_create_graph() {
        // f(x) = x^3, f'(x) = 3x^2, d/dx f'(x) = 6x
        let tape = Tape::new();
        let x = leaf(&tape, &[1], &[2.0]);
        let y = x.mul(&x).unwrap().mul(&x).unwrap().sum().unwrap();
        let g = tape.grad(&y, &[&x], true).unwrap().remove(0);
        assert_eq!(g.data(), &[12.0]);
        g.sum().unwrap().backward().unwrap();
        assert_eq!(x.grad().unwrap().data(), &[12.0]);
    }

    #[test]
    fn unconnected_input_gets_zeros() {
        let tape = Tape::new();
        let x = leaf(&tape, &[2], &[1.0, 2.0]);
        let w = leaf(&tape, &[2], &[5.0, 5.0]);
        let y = x.sum().unwrap();
        let g = tape.grad(&y, &[&w], false).unwrap();
        assert_eq!(g[0].data(), &[0.0, 0.0]);
    }
}
