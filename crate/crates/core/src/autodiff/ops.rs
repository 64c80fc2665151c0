use std::rc::Rc;

use super::kernels::{self, AxisMatrix};
use super::{ConvGeom, Op, Var};
use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

fn shape4(op: &'static str, s: &[usize]) -> Result<[usize; 4]> {
    <[usize; 4]>::try_from(s).map_err(|_| Error::InvalidShape {
        shape: s.to_vec(),
        reason: format!("{op} expects a rank-4 tensor"),
    })
}

enum Broadcast {
    Same,
    Left,
    Right,
}

fn broadcast_kind(op: &'static str, a: &[usize], b: &[usize]) -> Result<Broadcast> {
    if a == b {
        Ok(Broadcast::Same)
    } else if numel(a) == 1 {
        Ok(Broadcast::Left)
    } else if numel(b) == 1 {
        Ok(Broadcast::Right)
    } else {
        Err(Error::shape(op, a, b))
    }
}

impl Var {
    fn check_tape(&self, other: &Var) -> Result<()> {
        if self.tape.same(&other.tape) {
            Ok(())
        } else {
            Err(Error::ForeignVar)
        }
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let data = self.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_parts(self.shape().to_vec(), data);
        self.tape.record(value, op, &[self])
    }

    fn binary(
        &self,
        other: &Var,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        self.check_tape(other)?;
        let (a, b) = (self.data(), other.data());
        let (shape, data): (Vec<usize>, Vec<f64>) =
            match broadcast_kind(name, self.shape(), other.shape())? {
                Broadcast::Same => (
                    self.shape().to_vec(),
                    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(),
                ),
                Broadcast::Left => (
                    other.shape().to_vec(),
                    b.iter().map(|&y| f(a[0], y)).collect(),
                ),
                Broadcast::Right => (
                    self.shape().to_vec(),
                    a.iter().map(|&x| f(x, b[0])).collect(),
                ),
            };
        Ok(self
            .tape
            .record(Tensor::from_parts(shape, data), op, &[self, other]))
    }

    /// Elementwise sum. Shapes must match, or one side must hold a single value.
    pub fn add(&self, other: &Var) -> Result<Var> {
        self.binary(other, "add", Op::Add, |a, b| a + b)
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.binary(other, "sub", Op::Sub, |a, b| a - b)
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.binary(other, "mul", Op::Mul, |a, b| a * b)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Var> {
        Ok(self.unary(Op::AddScalar, |v| v + c))
    }

    pub fn mul_scalar(&self, c: f64) -> Result<Var> {
        Ok(self.unary(Op::MulScalar(c), |v| v * c))
    }

    pub fn neg(&self) -> Result<Var> {
        self.mul_scalar(-1.0)
    }

    pub fn square(&self) -> Result<Var> {
        self.mul(self)
    }

    pub fn exp(&self) -> Result<Var> {
        Ok(self.unary(Op::Exp, f64::exp))
    }

    pub fn ln(&self) -> Result<Var> {
        Ok(self.unary(Op::Ln, f64::ln))
    }

    pub fn sqrt(&self) -> Result<Var> {
        Ok(self.unary(Op::Sqrt, f64::sqrt))
    }

    pub fn recip(&self) -> Result<Var> {
        Ok(self.unary(Op::Recip, |v| 1.0 / v))
    }

    pub fn leaky_relu(&self, slope: f64) -> Result<Var> {
        Ok(self.unary(
            Op::LeakyRelu(slope),
            |v| if v > 0.0 { v } else { slope * v },
        ))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Result<Var> {
        let s = self.data().iter().sum();
        Ok(self.tape.record(Tensor::scalar(s), Op::SumAll, &[self]))
    }

    pub fn mean(&self) -> Result<Var> {
        let n = self.value.numel() as f64;
        self.sum()?.mul_scalar(1.0 / n)
    }

    /// Sums over every axis where `target` has extent 1 (keeping the rank).
    pub fn sum_to(&self, target: &[usize]) -> Result<Var> {
        let shape = self.shape();
        if target.len() != shape.len() || target.iter().zip(shape).any(|(t, s)| *t != 1 && t != s) {
            return Err(Error::shape("sum_to", shape, target));
        }
        if target == shape {
            return Ok(self.clone());
        }
        let data = kernels::sum_to(self.data(), shape, target);
        Ok(self.tape.record(
            Tensor::from_parts(target.to_vec(), data),
            Op::SumTo,
            &[self],
        ))
    }

    /// Repeats along axes of extent 1. Ranks must agree.
    pub fn broadcast_to(&self, target: &[usize]) -> Result<Var> {
        let shape = self.shape();
        if target.len() != shape.len() || target.iter().zip(shape).any(|(t, s)| *s != 1 && t != s) {
            return Err(Error::shape("broadcast_to", shape, target));
        }
        if target == shape {
            return Ok(self.clone());
        }
        let data = kernels::broadcast_to(self.data(), shape, target);
        Ok(self.tape.record(
            Tensor::from_parts(target.to_vec(), data),
            Op::BroadcastTo,
            &[self],
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var> {
        if shape == self.shape() {
            return Ok(self.clone());
        }
        let value = self.value.reshaped(shape)?;
        Ok(self.tape.record(value, Op::Reshape, &[self]))
    }

    pub fn transpose(&self) -> Result<Var> {
        let [r, c] = <[usize; 2]>::try_from(self.shape()).map_err(|_| Error::InvalidShape {
            shape: self.shape().to_vec(),
            reason: "transpose expects a matrix".into(),
        })?;
        let data = kernels::transpose(self.data(), r, c);
        Ok(self
            .tape
            .record(Tensor::from_parts(vec![c, r], data), Op::Transpose, &[self]))
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.check_tape(other)?;
        let (a, b) = (self.shape(), other.shape());
        match (a, b) {
            ([m, k], [k2, n]) if k == k2 => {
                let data = kernels::matmul(self.data(), other.data(), *m, *k, *n);
                Ok(self.tape.record(
                    Tensor::from_parts(vec![*m, *n], data),
                    Op::MatMul,
                    &[self, other],
                ))
            }
            _ => Err(Error::shape("matmul", a, b)),
        }
    }

    /// Cross-correlation of `[N, C, H, W]` input with an `[F, C, kh, kw]`
    /// kernel.
    pub fn conv2d(&self, kernel: &Var, geom: ConvGeom) -> Result<Var> {
        self.check_tape(kernel)?;
        let xs = shape4("conv2d", self.shape())?;
        let ws = shape4("conv2d", kernel.shape())?;
        if xs[1] != ws[1] {
            return Err(Error::shape("conv2d", &xs, &ws));
        }
        if geom.stride.0 == 0 || geom.stride.1 == 0 {
            return Err(Error::invalid("conv2d stride must be >= 1"));
        }
        if kernels::conv_out_len(xs[2], ws[2], geom.stride.0, geom.padding.0).is_none()
            || kernels::conv_out_len(xs[3], ws[3], geom.stride.1, geom.padding.1).is_none()
        {
            return Err(Error::InvalidArgument(format!(
                "conv2d kernel {:?} larger than padded input {:?} (padding {:?})",
                &ws[2..],
                &xs[2..],
                geom.padding
            )));
        }
        let (y, ys) = kernels::conv2d(self.data(), xs, kernel.data(), ws, geom);
        Ok(self.tape.record(
            Tensor::from_parts(ys.to_vec(), y),
            Op::Conv2d(geom),
            &[self, kernel],
        ))
    }

    /// Adjoint of `conv2d(·, kernel, geom)` applied to `self`, producing a
    /// tensor with spatial extent `in_hw`.
    pub(crate) fn conv_input_grad(
        &self,
        kernel: &Var,
        in_hw: (usize, usize),
        geom: ConvGeom,
    ) -> Result<Var> {
        self.check_tape(kernel)?;
        let gs = shape4("conv_input_grad", self.shape())?;
        let ws = shape4("conv_input_grad", kernel.shape())?;
        let expect_h = kernels::conv_out_len(in_hw.0, ws[2], geom.stride.0, geom.padding.0);
        let expect_w = kernels::conv_out_len(in_hw.1, ws[3], geom.stride.1, geom.padding.1);
        if gs[1] != ws[0] || expect_h != Some(gs[2]) || expect_w != Some(gs[3]) {
            return Err(Error::shape("conv_input_grad", &gs, &ws));
        }
        let (y, ys) = kernels::conv_input_grad(self.data(), gs, kernel.data(), ws, in_hw, geom);
        Ok(self.tape.record(
            Tensor::from_parts(ys.to_vec(), y),
            Op::ConvInputGrad(geom),
            &[self, kernel],
        ))
    }

    /// Kernel gradient of a convolution of `self` whose output gradient is
    /// `grad_out`.
    pub(crate) fn conv_weight_grad(
        &self,
        grad_out: &Var,
        k_hw: (usize, usize),
        geom: ConvGeom,
    ) -> Result<Var> {
        self.check_tape(grad_out)?;
        let xs = shape4("conv_weight_grad", self.shape())?;
        let gs = shape4("conv_weight_grad", grad_out.shape())?;
        let expect_h = kernels::conv_out_len(xs[2], k_hw.0, geom.stride.0, geom.padding.0);
        let expect_w = kernels::conv_out_len(xs[3], k_hw.1, geom.stride.1, geom.padding.1);
        if xs[0] != gs[0] || expect_h != Some(gs[2]) || expect_w != Some(gs[3]) {
            return Err(Error::shape("conv_weight_grad", &xs, &gs));
        }
        let (y, ys) = kernels::conv_weight_grad(self.data(), xs, grad_out.data(), gs, k_hw, geom);
        Ok(self.tape.record(
            Tensor::from_parts(ys.to_vec(), y),
            Op::ConvWeightGrad(geom),
            &[self, grad_out],
        ))
    }

    /// Transposed convolution ("deconvolution") of `[N, C_in, H, W]` input
    /// with a `[C_in, C_out, kh, kw]` kernel.
    ///
    /// Equivalent to inserting `stride - 1` zeros between neighbouring input
    /// values and running a stride-1 convolution with the flipped kernel.
    /// Output extent per axis is `(in - 1) * stride - 2 * padding + k +
    /// output_padding`.
    pub fn transposed_conv2d(
        &self,
        kernel: &Var,
        geom: ConvGeom,
        output_padding: (usize, usize),
    ) -> Result<Var> {
        let xs = shape4("transposed_conv2d", self.shape())?;
        let ws = shape4("transposed_conv2d", kernel.shape())?;
        let (sh, sw) = geom.stride;
        if sh == 0 || sw == 0 {
            return Err(Error::invalid("transposed_conv2d stride must be >= 1"));
        }
        if output_padding.0 >= sh || output_padding.1 >= sw {
            return Err(Error::invalid("output_padding must be smaller than stride"));
        }
        if xs[1] != ws[0] {
            return Err(Error::shape("transposed_conv2d", &xs, &ws));
        }
        let out = |n: usize, k: usize, s: usize, p: usize, op: usize| -> Result<usize> {
            ((n - 1) * s + k + op)
                .checked_sub(2 * p)
                .filter(|v| *v > 0)
                .ok_or_else(|| Error::invalid("transposed_conv2d padding exceeds output"))
        };
        let ho = out(xs[2], ws[2], sh, geom.padding.0, output_padding.0)?;
        let wo = out(xs[3], ws[3], sw, geom.padding.1, output_padding.1)?;
        self.conv_input_grad(kernel, (ho, wo), geom)
    }

    pub fn axis_map(&self, axis: usize, map: Rc<AxisMatrix>, transposed: bool) -> Result<Var> {
        let shape = self.shape();
        let in_len = if transposed { map.rows } else { map.cols };
        if axis >= shape.len() || shape[axis] != in_len {
            return Err(Error::shape("axis_map", shape, &[map.rows, map.cols]));
        }
        let (y, ys) = kernels::axis_map(self.data(), shape, axis, &map, transposed);
        Ok(self.tape.record(
            Tensor::from_parts(ys, y),
            Op::AxisMap {
                axis,
                map,
                transposed,
            },
            &[self],
        ))
    }

    /// Copies the window starting at `offsets` with extent `target`.
    pub fn crop(&self, offsets: &[usize], target: &[usize]) -> Result<Var> {
        let shape = self.shape();
        if offsets.len() != shape.len()
            || target.len() != shape.len()
            || (0..shape.len()).any(|d| target[d] == 0 || offsets[d] + target[d] > shape[d])
        {
            return Err(Error::shape("crop", shape, target));
        }
        let y = kernels::crop(self.data(), shape, offsets, target);
        Ok(self.tape.record(
            Tensor::from_parts(target.to_vec(), y),
            Op::Crop(offsets.to_vec()),
            &[self],
        ))
    }

    /// Places `self` at `offsets` inside zeros of shape `full`.
    pub fn pad(&self, offsets: &[usize], full: &[usize]) -> Result<Var> {
        let shape = self.shape();
        if offsets.len() != shape.len()
            || full.len() != shape.len()
            || (0..shape.len()).any(|d| offsets[d] + shape[d] > full[d])
        {
            return Err(Error::shape("pad", shape, full));
        }
        let y = kernels::pad(self.data(), shape, offsets, full);
        Ok(self.tape.record(
            Tensor::from_parts(full.to_vec(), y),
            Op::Pad(offsets.to_vec()),
            &[self],
        ))
    }

    /// Row lookup in a `[rows, width]` table.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Var> {
        let [rows, width] =
            <[usize; 2]>::try_from(self.shape()).map_err(|_| Error::InvalidShape {
                shape: self.shape().to_vec(),
                reason: "gather_rows expects a matrix".into(),
            })?;
        if idx.is_empty() {
            return Err(Error::invalid("gather_rows needs at least one index"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                num_classes: rows,
            });
        }
        let y = kernels::gather_rows(self.data(), width, idx);
        Ok(self.tape.record(
            Tensor::from_parts(vec![idx.len(), width], y),
            Op::GatherRows(Rc::new(idx.to_vec())),
            &[self],
        ))
    }

    pub(crate) fn scatter_rows(&self, idx: Rc<Vec<usize>>, rows: usize) -> Result<Var> {
        let [n, width] = <[usize; 2]>::try_from(self.shape()).map_err(|_| Error::InvalidShape {
            shape: self.shape().to_vec(),
            reason: "scatter_rows expects a matrix".into(),
        })?;
        if n != idx.len() || idx.iter().any(|&i| i >= rows) {
            return Err(Error::shape(
                "scatter_rows",
                self.shape(),
                &[idx.len(), rows],
            ));
        }
        let y = kernels::scatter_rows(self.data(), width, &idx, rows);
        Ok(self.tape.record(
            Tensor::from_parts(vec![rows, width], y),
            Op::ScatterRows(idx),
            &[self],
        ))
    }
}
