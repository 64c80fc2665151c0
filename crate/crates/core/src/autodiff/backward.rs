//! Vector-Jacobian products, one per [`Op`]. Each rule is expressed with tape
//! operations so that it can itself be recorded and differentiated.

use super::{Op, Var};
use crate::error::Result;
use crate::tensor::{numel, Tensor};

/// Reduces a broadcast gradient back to the operand shape.
fn unbroadcast(g: Var, shape: &[usize]) -> Result<Var> {
    if g.shape() == shape {
        Ok(g)
    } else {
        debug_assert_eq!(numel(shape), 1);
        g.sum()?.reshape(shape)
    }
}

pub(super) fn rule(op: &Op, inputs: &[Var], out: &Var, g: &Var) -> Result<Vec<Option<Var>>> {
    let a = &inputs[0];
    let grads = match op {
        Op::Leaf | Op::Constant => vec![],
        Op::Add => {
            let b = &inputs[1];
            vec![
                Some(unbroadcast(g.clone(), a.shape())?),
                Some(unbroadcast(g.clone(), b.shape())?),
            ]
        }
        Op::Sub => {
            let b = &inputs[1];
            vec![
                Some(unbroadcast(g.clone(), a.shape())?),
                Some(unbroadcast(g.neg()?, b.shape())?),
            ]
        }
        Op::Mul => {
            let b = &inputs[1];
            vec![
                a.requires_grad()
                    .then(|| unbroadcast(g.mul(b)?, a.shape()))
                    .transpose()?,
                b.requires_grad()
                    .then(|| unbroadcast(g.mul(a)?, b.shape()))
                    .transpose()?,
            ]
        }
        Op::AddScalar => vec![Some(g.clone())],
        Op::MulScalar(c) => vec![Some(g.mul_scalar(*c)?)],
        Op::Exp => vec![Some(g.mul(out)?)],
        Op::Ln => vec![Some(g.mul(&a.recip()?)?)],
        Op::Sqrt => vec![Some(g.mul(&out.recip()?)?.mul_scalar(0.5)?)],
        Op::Recip => vec![Some(g.mul(&out.square()?)?.neg()?)],
        Op::LeakyRelu(slope) => {
            let mask: Vec<f64> = a
                .data()
                .iter()
                .map(|&v| if v > 0.0 { 1.0 } else { *slope })
                .collect();
            let mask = a
                .tape()
                .constant(Tensor::from_parts(a.shape().to_vec(), mask));
            vec![Some(g.mul(&mask)?)]
        }
        Op::SumAll => {
            let ones = vec![1; a.shape().len()];
            vec![Some(g.reshape(&ones)?.broadcast_to(a.shape())?)]
        }
        Op::SumTo => vec![Some(g.broadcast_to(a.shape())?)],
        Op::BroadcastTo => vec![Some(g.sum_to(a.shape())?)],
        Op::Reshape => vec![Some(g.reshape(a.shape())?)],
        Op::Transpose => vec![Some(g.transpose()?)],
        Op::MatMul => {
            let b = &inputs[1];
            vec![
                a.requires_grad()
                    .then(|| g.matmul(&b.transpose()?))
                    .transpose()?,
                b.requires_grad()
                    .then(|| a.transpose()?.matmul(g))
                    .transpose()?,
            ]
        }
        Op::Conv2d(geom) => {
            let w = &inputs[1];
            let (ws, xs) = (w.shape(), a.shape());
            vec![
                a.requires_grad()
                    .then(|| g.conv_input_grad(w, (xs[2], xs[3]), *geom))
                    .transpose()?,
                w.requires_grad()
                    .then(|| a.conv_weight_grad(g, (ws[2], ws[3]), *geom))
                    .transpose()?,
            ]
        }
        Op::ConvInputGrad(geom) => {
            // out = A_w^T gy, linear in both gy (= a) and w.
            let w = &inputs[1];
            let ws = w.shape();
            vec![
                a.requires_grad().then(|| g.conv2d(w, *geom)).transpose()?,
                w.requires_grad()
                    .then(|| g.conv_weight_grad(a, (ws[2], ws[3]), *geom))
                    .transpose()?,
            ]
        }
        Op::ConvWeightGrad(geom) => {
            // out[f,c,ki,kj] = sum x[n,c,..] gy[n,f,..], bilinear in x (= a) and gy.
            let gy = &inputs[1];
            let xs = a.shape();
            vec![
                a.requires_grad()
                    .then(|| gy.conv_input_grad(g, (xs[2], xs[3]), *geom))
                    .transpose()?,
                gy.requires_grad().then(|| a.conv2d(g, *geom)).transpose()?,
            ]
        }
        Op::AxisMap {
            axis,
            map,
            transposed,
        } => vec![Some(g.axis_map(*axis, map.clone(), !transposed)?)],
        Op::Crop(offsets) => vec![Some(g.pad(offsets, a.shape())?)],
        Op::Pad(offsets) => vec![Some(g.crop(offsets, a.shape())?)],
        Op::GatherRows(idx) => vec![Some(g.scatter_rows(idx.clone(), a.shape()[0])?)],
        Op::ScatterRows(idx) => vec![Some(g.gather_rows(idx)?)],
    };
    Ok(grads)
}
