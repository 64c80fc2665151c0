//! Upsampling primitives: deconvolution kernel sizing, bilinear kernel
//! initialization, and nearest / bicubic interpolation.

use std::rc::Rc;

use crate::autodiff::{AxisMatrix, Var};
use crate::error::{Error, Result};

/// Kernel length for a stride-`stride` deconvolution whose overlaps stay
/// even: `2 * stride - stride % 2`.
pub fn deconv_kernel_size(stride: usize) -> Result<usize> {
    if stride < 1 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    Ok(2 * stride - stride % 2)
}

/// Zero padding that makes a deconvolution with [`deconv_kernel_size`] map
/// length `n` to exactly `n * stride`.
pub fn deconv_padding(stride: usize) -> Result<usize> {
    Ok((deconv_kernel_size(stride)? - stride) / 2)
}

/// Triangular (linear-interpolation) deconvolution kernel.
///
/// The centre weight is 1 and the weight at distance `d` from the centre is
/// `1 - |d| / stride`. For even strides the centre falls between two taps,
/// at half-sample distance from each.
pub fn bilinear_init_weights(stride: usize) -> Result<Vec<f64>> {
    let k = deconv_kernel_size(stride)?;
    let s = stride as f64;
    let center = (k as f64 - 1.0) / 2.0;
    Ok((0..k)
        .map(|i| 1.0 - (i as f64 - center).abs() / s)
        .collect())
}

/// Outer product of the per-axis bilinear kernels, row-major `[kh, kw]`.
pub fn bilinear_kernel_2d(stride: (usize, usize)) -> Result<(Vec<f64>, (usize, usize))> {
    let rows = bilinear_init_weights(stride.0)?;
    let cols = bilinear_init_weights(stride.1)?;
    let data = rows
        .iter()
        .flat_map(|r| cols.iter().map(move |c| r * c))
        .collect();
    Ok((data, (rows.len(), cols.len())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InterpMethod {
    Nearest,
    Bicubic,
}

/// Catmull-Rom parameter of the bicubic kernel.
pub const BICUBIC_A: f64 = -0.5;

pub fn cubic_kernel(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Source coordinate of output sample `o` when upsampling by `factor`, with
/// sample centres aligned (half-pixel convention).
pub fn source_coordinate(o: usize, factor: usize) -> f64 {
    (o as f64 + 0.5) / factor as f64 - 0.5
}

/// `[in_len * factor, in_len]` matrix performing 1-D interpolation with
/// clamp-to-edge boundary handling.
pub fn interpolation_matrix(
    in_len: usize,
    factor: usize,
    method: InterpMethod,
) -> Result<AxisMatrix> {
    if factor < 1 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    if in_len < 1 {
        return Err(Error::invalid("cannot upsample an empty axis"));
    }
    let out_len = in_len * factor;
    let mut data = vec![0.0; out_len * in_len];
    for o in 0..out_len {
        let row = &mut data[o * in_len..(o + 1) * in_len];
        match method {
            InterpMethod::Nearest => row[o / factor] = 1.0,
            InterpMethod::Bicubic => {
                let src = source_coordinate(o, factor);
                let base = src.floor();
                let t = src - base;
                for (tap, dist) in [(-1, 1.0 + t), (0, t), (1, 1.0 - t), (2, 2.0 - t)] {
                    let idx = (base as isize + tap).clamp(0, in_len as isize - 1) as usize;
                    row[idx] += cubic_kernel(dist);
                }
            }
        }
    }
    Ok(AxisMatrix {
        rows: out_len,
        cols: in_len,
        data,
    })
}

/// Interpolating upsample of the two trailing (spatial) axes of an
/// `[N, C, H, W]` tensor by integer factors.
pub fn upsample_interpolate(x: &Var, factor: (usize, usize), method: InterpMethod) -> Result<Var> {
    let shape = x.shape();
    if shape.len() != 4 {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "upsampling expects [N, C, H, W]".into(),
        });
    }
    if factor.0 < 1 || factor.1 < 1 {
        return Err(Error::invalid("upsampling factor must be >= 1"));
    }
    let mut y = x.clone();
    for (axis, f) in [(2, factor.0), (3, factor.1)] {
        if f > 1 {
            let m = interpolation_matrix(shape[axis], f, method)?;
            y = y.axis_map(axis, Rc::new(m), false)?;
        }
    }
    Ok(y)
}
