//! Raw numeric loops behind the tape operations. Shapes are validated by the
//! callers in `ops.rs`; everything here assumes consistent input.

use super::ConvGeom;

/// Output positions `o` in `[0, out_len)` for which `o * stride + k - pad`
/// lands inside `[0, in_len)`.
#[inline]
fn valid_range(
    out_len: usize,
    in_len: usize,
    stride: usize,
    pad: usize,
    k: usize,
) -> (usize, usize) {
    let shift = k as isize - pad as isize;
    let s = stride as isize;
    // o * s + shift >= 0
    let lo = if shift >= 0 {
        0
    } else {
        ((-shift) + s - 1) / s
    };
    // o * s + shift <= in_len - 1
    let top = in_len as isize - 1 - shift;
    let hi = if top < 0 { 0 } else { top / s + 1 };
    let lo = lo.max(0) as usize;
    let hi = (hi.max(0) as usize).min(out_len);
    (lo, hi.max(lo))
}

pub(crate) fn conv_out_len(in_len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = in_len + 2 * pad;
    if k > padded || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

/// `c[m,n] = beta c + a[m,k] b[k,n]` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: callers pass slices covering every index implied by the
    // dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// Unfolds one `[c, h, w]` image into `[c*kh*kw, ho*wo]` patch columns,
/// zero where the window hangs over the padding.
fn im2col(
    xb: &[f64],
    c: usize,
    (h, wd): (usize, usize),
    (kh, kw): (usize, usize),
    (ho, wo): (usize, usize),
    g: ConvGeom,
    cols: &mut [f64],
) {
    let (sh, sw) = g.stride;
    let (ph, pw) = g.padding;
    for ci in 0..c {
        let xc = &xb[ci * h * wd..(ci + 1) * h * wd];
        for ki in 0..kh {
            let (oi0, oi1) = valid_range(ho, h, sh, ph, ki);
            for kj in 0..kw {
                let (oj0, oj1) = valid_range(wo, wd, sw, pw, kj);
                let row = ((ci * kh + ki) * kw + kj) * ho * wo;
                let block = &mut cols[row..row + ho * wo];
                block[..oi0 * wo].fill(0.0);
                block[oi1 * wo..].fill(0.0);
                for oi in oi0..oi1 {
                    let xrow = &xc[(oi * sh + ki - ph) * wd..];
                    let dst = &mut block[oi * wo..(oi + 1) * wo];
                    dst[..oj0].fill(0.0);
                    dst[oj1..].fill(0.0);
                    if sw == 1 {
                        let s0 = oj0 + kj - pw;
                        dst[oj0..oj1].copy_from_slice(&xrow[s0..s0 + oj1 - oj0]);
                    } else {
                        for oj in oj0..oj1 {
                            dst[oj] = xrow[oj * sw + kj - pw];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch columns back into the image.
fn col2im(
    cols: &[f64],
    c: usize,
    (h, wd): (usize, usize),
    (kh, kw): (usize, usize),
    (ho, wo): (usize, usize),
    g: ConvGeom,
    xb: &mut [f64],
) {
    let (sh, sw) = g.stride;
    let (ph, pw) = g.padding;
    for ci in 0..c {
        let xc = &mut xb[ci * h * wd..(ci + 1) * h * wd];
        for ki in 0..kh {
            let (oi0, oi1) = valid_range(ho, h, sh, ph, ki);
            for kj in 0..kw {
                let (oj0, oj1) = valid_range(wo, wd, sw, pw, kj);
                let row = ((ci * kh + ki) * kw + kj) * ho * wo;
                for oi in oi0..oi1 {
                    let i = oi * sh + ki - ph;
                    let src = &cols[row + oi * wo..row + (oi + 1) * wo];
                    let xrow = &mut xc[i * wd..(i + 1) * wd];
                    for oj in oj0..oj1 {
                        xrow[oj * sw + kj - pw] += src[oj];
                    }
                }
            }
        }
    }
}

/// `y[n,f,oi,oj] = sum_{c,ki,kj} x[n,c,oi*sh+ki-ph, oj*sw+kj-pw] * w[f,c,ki,kj]`
pub(crate) fn conv2d(
    x: &[f64],
    xs: [usize; 4],
    w: &[f64],
    ws: [usize; 4],
    g: ConvGeom,
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, wd] = xs;
    let [f, _, kh, kw] = ws;
    let ho = conv_out_len(h, kh, g.stride.0, g.padding.0).expect("validated");
    let wo = conv_out_len(wd, kw, g.stride.1, g.padding.1).expect("validated");
    let (ckk, p) = (c * kh * kw, ho * wo);
    let mut y = vec![0.0; n * f * p];
    let mut cols = vec![0.0; ckk * p];
    for b in 0..n {
        im2col(
            &x[b * c * h * wd..(b + 1) * c * h * wd],
            c,
            (h, wd),
            (kh, kw),
            (ho, wo),
            g,
            &mut cols,
        );
        let yb = &mut y[b * f * p..(b + 1) * f * p];
        gemm(
            f,
            ckk,
            p,
            w,
            (ckk as isize, 1),
            &cols,
            (p as isize, 1),
            0.0,
            yb,
            (p as isize, 1),
        );
    }
    (y, [n, f, ho, wo])
}

/// Adjoint of [`conv2d`] with respect to its input: scatters `gy` back through
/// the kernel into an `[n, c, h, w]` buffer. This is also the forward pass of
/// a transposed convolution.
pub(crate) fn conv_input_grad(
    gy: &[f64],
    gys: [usize; 4],
    w: &[f64],
    ws: [usize; 4],
    in_hw: (usize, usize),
    g: ConvGeom,
) -> (Vec<f64>, [usize; 4]) {
    let [n, f, ho, wo] = gys;
    let [_, c, kh, kw] = ws;
    let (h, wd) = in_hw;
    let (ckk, p) = (c * kh * kw, ho * wo);
    let mut gx = vec![0.0; n * c * h * wd];
    let mut cols = vec![0.0; ckk * p];
    for b in 0..n {
        // cols = w^T gy_b
        let gb = &gy[b * f * p..(b + 1) * f * p];
        gemm(
            ckk,
            f,
            p,
            w,
            (1, ckk as isize),
            gb,
            (p as isize, 1),
            0.0,
            &mut cols,
            (p as isize, 1),
        );
        col2im(
            &cols,
            c,
            (h, wd),
            (kh, kw),
            (ho, wo),
            g,
            &mut gx[b * c * h * wd..(b + 1) * c * h * wd],
        );
    }
    (gx, [n, c, h, wd])
}

/// Gradient of [`conv2d`] with respect to its kernel.
pub(crate) fn conv_weight_grad(
    x: &[f64],
    xs: [usize; 4],
    gy: &[f64],
    gys: [usize; 4],
    k_hw: (usize, usize),
    g: ConvGeom,
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, wd] = xs;
    let [_, f, ho, wo] = gys;
    let (kh, kw) = k_hw;
    let (ckk, p) = (c * kh * kw, ho * wo);
    let mut gw = vec![0.0; f * ckk];
    let mut cols = vec![0.0; ckk * p];
    for b in 0..n {
        im2col(
            &x[b * c * h * wd..(b + 1) * c * h * wd],
            c,
            (h, wd),
            (kh, kw),
            (ho, wo),
            g,
            &mut cols,
        );
        // gw += gy_b cols^T
        let gb = &gy[b * f * p..(b + 1) * f * p];
        gemm(
            f,
            p,
            ckk,
            gb,
            (p as isize, 1),
            &cols,
            (1, p as isize),
            1.0,
            &mut gw,
            (ckk as isize, 1),
        );
    }
    (gw, [f, c, kh, kw])
}

pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(
        m,
        k,
        n,
        a,
        (k as isize, 1),
        b,
        (n as isize, 1),
        0.0,
        &mut c,
        (n as isize, 1),
    );
    c
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

/// Dense linear map applied along one axis of a tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl AxisMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Applies `m` (or its transpose) along `axis`.
pub(crate) fn axis_map(
    x: &[f64],
    shape: &[usize],
    axis: usize,
    m: &AxisMatrix,
    transposed: bool,
) -> (Vec<f64>, Vec<usize>) {
    let (out_len, in_len) = if transposed {
        (m.cols, m.rows)
    } else {
        (m.rows, m.cols)
    };
    debug_assert_eq!(shape[axis], in_len);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut y = vec![0.0; outer * out_len * inner];
    for o in 0..outer {
        let xb = &x[o * in_len * inner..(o + 1) * in_len * inner];
        let yb = &mut y[o * out_len * inner..(o + 1) * out_len * inner];
        for r in 0..out_len {
            let yrow = &mut yb[r * inner..(r + 1) * inner];
            for c in 0..in_len {
                let wv = if transposed { m.get(c, r) } else { m.get(r, c) };
                if wv == 0.0 {
                    continue;
                }
                let xrow = &xb[c * inner..(c + 1) * inner];
                for (yv, xv) in yrow.iter_mut().zip(xrow) {
                    *yv += wv * xv;
                }
            }
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = out_len;
    (y, out_shape)
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Visits every multi-index of `shape` in row-major order, together with the
/// flat offset into a tensor of shape `shape` and the flat offset into a
/// second tensor addressed through `other_strides` after adding `offsets`.
fn for_each_index(
    shape: &[usize],
    other_strides: &[usize],
    offsets: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let total: usize = shape.iter().product();
    if total == 0 {
        return;
    }
    let base: usize = offsets.iter().zip(other_strides).map(|(o, s)| o * s).sum();
    // Drop unit axes and fuse neighbours that stay contiguous on both sides.
    let mut dims: Vec<(usize, usize)> = Vec::with_capacity(shape.len());
    for (&n, &st) in shape.iter().zip(other_strides) {
        if n == 1 {
            continue;
        }
        match dims.last_mut() {
            Some((pn, ps)) if *ps == st * n => {
                *pn *= n;
                *ps = st;
            }
            _ => dims.push((n, st)),
        }
    }
    let (inner, inner_stride) = dims.pop().unwrap_or((1, 0));
    let rank = dims.len();
    let mut idx = vec![0usize; rank];
    let mut other = base;
    let mut flat = 0;
    while flat < total {
        let mut o = other;
        for j in 0..inner {
            f(flat + j, o);
            o += inner_stride;
        }
        flat += inner;
        let mut d = rank;
        while d > 0 {
            d -= 1;
            idx[d] += 1;
            other += dims[d].1;
            if idx[d] < dims[d].0 {
                break;
            }
            other -= dims[d].1 * dims[d].0;
            idx[d] = 0;
        }
    }
}

/// Copies the window `[offsets, offsets + target)` out of `x`.
pub(crate) fn crop(x: &[f64], shape: &[usize], offsets: &[usize], target: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; target.iter().product()];
    let st = strides(shape);
    for_each_index(target, &st, offsets, |flat, src| y[flat] = x[src]);
    y
}

/// Embeds `x` at `offsets` inside a zero tensor of shape `full`.
pub(crate) fn pad(x: &[f64], shape: &[usize], offsets: &[usize], full: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; full.iter().product()];
    let st = strides(full);
    for_each_index(shape, &st, offsets, |flat, dst| y[dst] = x[flat]);
    y
}

/// Sums over every axis where `target[d] == 1` and `shape[d] > 1`.
pub(crate) fn sum_to(x: &[f64], shape: &[usize], target: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; target.iter().product()];
    let tst = strides(target);
    let reduced: Vec<usize> = tst
        .iter()
        .zip(target)
        .map(|(s, t)| if *t == 1 { 0 } else { *s })
        .collect();
    let zero = vec![0; shape.len()];
    for_each_index(shape, &reduced, &zero, |flat, dst| y[dst] += x[flat]);
    y
}

pub(crate) fn broadcast_to(x: &[f64], shape: &[usize], target: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; target.iter().product()];
    let st = strides(shape);
    let src_strides: Vec<usize> = st
        .iter()
        .zip(shape)
        .map(|(s, d)| if *d == 1 { 0 } else { *s })
        .collect();
    let zero = vec![0; shape.len()];
    for_each_index(target, &src_strides, &zero, |flat, src| y[flat] = x[src]);
    y
}

pub(crate) fn gather_rows(table: &[f64], width: usize, idx: &[usize]) -> Vec<f64> {
    let mut y = Vec::with_capacity(idx.len() * width);
    for &r in idx {
        y.extend_from_slice(&table[r * width..(r + 1) * width]);
    }
    y
}

pub(crate) fn scatter_rows(x: &[f64], width: usize, idx: &[usize], rows: usize) -> Vec<f64> {
    let mut y = vec![0.0; rows * width];
    for (i, &r) in idx.iter().enumerate() {
        for (d, s) in y[r * width..(r + 1) * width]
            .iter_mut()
            .zip(&x[i * width..(i + 1) * width])
        {
            *d += s;
        }
    }
    y
}
