//! Forward and backward kernels on plain [`Tensor`] values.
//!
//! The graph in `graph.rs` records which of these ran and replays the
//! matching backward kernel; nothing here knows about the tape.

use super::real::{gemm, MatRef};
use super::{Real, Tensor, TensorError};

/// Stride, zero padding and channel grouping of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvParams {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvParams {
    /// Stride 1 with `(k - 1) / 2` padding, the shape-preserving setting.
    pub fn same(k: usize, groups: usize) -> Self {
        Self { stride: 1, padding: (k - 1) / 2, groups }
    }
}

impl Default for ConvParams {
    fn default() -> Self {
        Self { stride: 1, padding: 0, groups: 1 }
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    cin_g: usize,
    cout_g: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
    groups: usize,
}

impl ConvGeom {
    fn depthwise(&self) -> bool {
        self.cin_g == 1 && self.cout_g == 1
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn col_rows(&self) -> usize {
        self.cin_g * self.kh * self.kw
    }
}

fn conv_geom<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    p: ConvParams,
) -> Result<ConvGeom, TensorError> {
    let (n, cin, h, w) = x.dims4()?;
    let (cout, cin_g, kh, kw) = weight.dims4()?;
    let groups = p.groups;
    if groups == 0 || p.stride == 0 {
        return Err(TensorError::InvalidArgument(format!(
            "conv2d: stride {} and groups {} must be positive",
            p.stride, p.groups
        )));
    }
    if cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g {
        return Err(TensorError::shape(
            "conv2d",
            format!(
                "input has {cin} channels in {groups} groups but weight {:?} expects {} per group \
                 (output channels {cout})",
                weight.shape(),
                cin_g
            ),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(TensorError::shape(
                "conv2d",
                format!("bias shape {:?} does not match {cout} output channels", b.shape()),
            ));
        }
    }
    if h + 2 * p.padding < kh || w + 2 * p.padding < kw {
        return Err(TensorError::shape(
            "conv2d",
            format!("{kh}x{kw} kernel larger than padded {h}x{w} input"),
        ));
    }
    let ho = (h + 2 * p.padding - kh) / p.stride + 1;
    let wo = (w + 2 * p.padding - kw) / p.stride + 1;
    Ok(ConvGeom {
        n,
        cin,
        h,
        w,
        cout,
        cin_g,
        cout_g: cout / groups,
        kh,
        kw,
        ho,
        wo,
        stride: p.stride,
        pad: p.padding,
        groups,
    })
}

/// Range of output columns `o` for which `o * stride + k - pad` lands in `0..len`.
#[inline]
fn valid_range(len: usize, out_len: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    // o*stride + k >= pad  and  o*stride + k - pad <= len - 1
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi_num = len as isize - 1 + pad as isize - k as isize;
    if hi_num < 0 {
        return (0, 0);
    }
    let hi = (hi_num as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

fn im2col<T: Real>(src: &[T], g: &ConvGeom, col: &mut [T]) {
    let plane = g.ho * g.wo;
    for c in 0..g.cin_g {
        let chan = &src[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (oy_lo, oy_hi) = valid_range(g.h, g.ho, ky, g.stride, g.pad);
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                dst.fill(T::zero());
                let (ox_lo, ox_hi) = valid_range(g.w, g.wo, kx, g.stride, g.pad);
                for oy in oy_lo..oy_hi {
                    let iy = oy * g.stride + ky - g.pad;
                    let src_row = &chan[iy * g.w..(iy + 1) * g.w];
                    let dst_row = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if g.stride == 1 {
                        let ix0 = ox_lo + kx - g.pad;
                        dst_row[ox_lo..ox_hi].copy_from_slice(&src_row[ix0..ix0 + (ox_hi - ox_lo)]);
                    } else {
                        for ox in ox_lo..ox_hi {
                            dst_row[ox] = src_row[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Real>(col: &[T], g: &ConvGeom, dst: &mut [T]) {
    let plane = g.ho * g.wo;
    for c in 0..g.cin_g {
        let chan = &mut dst[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (oy_lo, oy_hi) = valid_range(g.h, g.ho, ky, g.stride, g.pad);
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &col[row * plane..(row + 1) * plane];
                let (ox_lo, ox_hi) = valid_range(g.w, g.wo, kx, g.stride, g.pad);
                for oy in oy_lo..oy_hi {
                    let iy = oy * g.stride + ky - g.pad;
                    let dst_row = &mut chan[iy * g.w..(iy + 1) * g.w];
                    let src_row = &src[oy * g.wo..(oy + 1) * g.wo];
                    for ox in ox_lo..ox_hi {
                        dst_row[ox * g.stride + kx - g.pad] += src_row[ox];
                    }
                }
            }
        }
    }
}

/// Dot product with eight independent partial sums.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut part = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: T = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (xa, xb) in ca.zip(cb) {
        for i in 0..8 {
            part[i] += xa[i] * xb[i];
        }
    }
    part.iter().fold(tail, |s, &v| s + v)
}

/// Direct depthwise accumulation `out += weight ⋆ src` for one channel.
fn depthwise_forward_channel<T: Real>(src: &[T], kernel: &[T], g: &ConvGeom, out: &mut [T]) {
    for ky in 0..g.kh {
        let (oy_lo, oy_hi) = valid_range(g.h, g.ho, ky, g.stride, g.pad);
        for kx in 0..g.kw {
            let wv = kernel[ky * g.kw + kx];
            let (ox_lo, ox_hi) = valid_range(g.w, g.wo, kx, g.stride, g.pad);
            for oy in oy_lo..oy_hi {
                let iy = oy * g.stride + ky - g.pad;
                let src_row = &src[iy * g.w..(iy + 1) * g.w];
                let out_row = &mut out[oy * g.wo..(oy + 1) * g.wo];
                if g.stride == 1 {
                    let ix0 = ox_lo + kx - g.pad;
                    let src_seg = &src_row[ix0..ix0 + (ox_hi - ox_lo)];
                    for (o, &v) in out_row[ox_lo..ox_hi].iter_mut().zip(src_seg) {
                        *o += wv * v;
                    }
                } else {
                    for ox in ox_lo..ox_hi {
                        out_row[ox] += wv * src_row[ox * g.stride + kx - g.pad];
                    }
                }
            }
        }
    }
}

fn depthwise_backward_channel<T: Real>(
    src: &[T],
    kernel: &[T],
    gy: &[T],
    g: &ConvGeom,
    gx: Option<&mut [T]>,
    gk: Option<&mut [T]>,
) {
    let mut gx = gx;
    let mut gk = gk;
    for ky in 0..g.kh {
        let (oy_lo, oy_hi) = valid_range(g.h, g.ho, ky, g.stride, g.pad);
        for kx in 0..g.kw {
            let wv = kernel[ky * g.kw + kx];
            let (ox_lo, ox_hi) = valid_range(g.w, g.wo, kx, g.stride, g.pad);
            let mut acc = T::zero();
            for oy in oy_lo..oy_hi {
                let iy = oy * g.stride + ky - g.pad;
                let gy_row = &gy[oy * g.wo..(oy + 1) * g.wo];
                if g.stride == 1 {
                    let ix0 = ox_lo + kx - g.pad;
                    let len = ox_hi - ox_lo;
                    let gy_seg = &gy_row[ox_lo..ox_hi];
                    if let Some(gx) = gx.as_deref_mut() {
                        let gx_seg = &mut gx[iy * g.w + ix0..iy * g.w + ix0 + len];
                        for (d, &v) in gx_seg.iter_mut().zip(gy_seg) {
                            *d += wv * v;
                        }
                    }
                    if gk.is_some() {
                        acc += dot(gy_seg, &src[iy * g.w + ix0..iy * g.w + ix0 + len]);
                    }
                    continue;
                }
                if let Some(gx) = gx.as_deref_mut() {
                    let gx_row = &mut gx[iy * g.w..(iy + 1) * g.w];
                    for ox in ox_lo..ox_hi {
                        gx_row[ox * g.stride + kx - g.pad] += wv * gy_row[ox];
                    }
                }
                if gk.is_some() {
                    let src_row = &src[iy * g.w..(iy + 1) * g.w];
                    for ox in ox_lo..ox_hi {
                        acc += gy_row[ox] * src_row[ox * g.stride + kx - g.pad];
                    }
                }
            }
            if let Some(gk) = gk.as_deref_mut() {
                gk[ky * g.kw + kx] += acc;
            }
        }
    }
}

/// 2-D cross-correlation over an NCHW batch with optional per-channel bias.
pub fn conv2d<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    p: ConvParams,
) -> Result<Tensor<T>, TensorError> {
    let g = conv_geom(x, weight, bias, p)?;
    let plane_in = g.h * g.w;
    let plane_out = g.ho * g.wo;
    let mut out = vec![T::zero(); g.n * g.cout * plane_out];
    let xd = x.data();
    let wd = weight.data();
    let krows = g.col_rows();
    let mut col = if g.depthwise() || g.pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); krows * plane_out]
    };
    for n in 0..g.n {
        for grp in 0..g.groups {
            let src = &xd[(n * g.cin + grp * g.cin_g) * plane_in..][..g.cin_g * plane_in];
            let dst = &mut out[(n * g.cout + grp * g.cout_g) * plane_out..][..g.cout_g * plane_out];
            let wg = &wd[grp * g.cout_g * krows..][..g.cout_g * krows];
            if g.depthwise() {
                depthwise_forward_channel(src, wg, &g, dst);
            } else if g.pointwise() {
                gemm(MatRef::new(wg, g.cout_g, krows), MatRef::new(src, krows, plane_out), T::zero(), dst);
            } else {
                im2col(src, &g, &mut col);
                gemm(MatRef::new(wg, g.cout_g, krows), MatRef::new(&col, krows, plane_out), T::zero(), dst);
            }
        }
    }
    if let Some(b) = bias {
        for n in 0..g.n {
            for (co, &bv) in b.data().iter().enumerate() {
                for v in &mut out[(n * g.cout + co) * plane_out..][..plane_out] {
                    *v += bv;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![g.n, g.cout, g.ho, g.wo], out))
}

/// Gradients of [`conv2d`] with respect to input, weight and bias.
/// Entries whose flag is false come back as `None`.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    gy: &Tensor<T>,
    p: ConvParams,
    need: [bool; 3],
) -> Result<(Option<Tensor<T>>, Option<Tensor<T>>, Option<Tensor<T>>), TensorError> {
    let g = conv_geom(x, weight, None, p)?;
    if gy.shape() != [g.n, g.cout, g.ho, g.wo] {
        return Err(TensorError::shape("conv2d_backward", format!("grad shape {:?}", gy.shape())));
    }
    let [need_x, need_w, need_b] = need;
    let plane_in = g.h * g.w;
    let plane_out = g.ho * g.wo;
    let krows = g.col_rows();
    let xd = x.data();
    let wd = weight.data();
    let gyd = gy.data();
    let mut gx = need_x.then(|| vec![T::zero(); xd.len()]);
    let mut gw = need_w.then(|| vec![T::zero(); wd.len()]);
    let gb = need_b.then(|| {
        let mut gb = vec![T::zero(); g.cout];
        for n in 0..g.n {
            for (co, slot) in gb.iter_mut().enumerate() {
                *slot += gyd[(n * g.cout + co) * plane_out..][..plane_out].iter().copied().sum::<T>();
            }
        }
        gb
    });
    let use_col = !(g.depthwise() || g.pointwise());
    let mut col = if use_col { vec![T::zero(); krows * plane_out] } else { Vec::new() };
    for n in 0..g.n {
        for grp in 0..g.groups {
            let xoff = (n * g.cin + grp * g.cin_g) * plane_in;
            let src = &xd[xoff..][..g.cin_g * plane_in];
            let gyg = &gyd[(n * g.cout + grp * g.cout_g) * plane_out..][..g.cout_g * plane_out];
            let woff = grp * g.cout_g * krows;
            let wg = &wd[woff..][..g.cout_g * krows];
            if g.depthwise() {
                depthwise_backward_channel(
                    src,
                    wg,
                    gyg,
                    &g,
                    gx.as_mut().map(|v| &mut v[xoff..xoff + plane_in]),
                    gw.as_mut().map(|v| &mut v[woff..woff + krows]),
                );
                continue;
            }
            if let Some(gw) = gw.as_mut() {
                let colref = if g.pointwise() {
                    MatRef::transposed(src, plane_out, krows)
                } else {
                    im2col(src, &g, &mut col);
                    MatRef::transposed(&col, plane_out, krows)
                };
                gemm(MatRef::new(gyg, g.cout_g, plane_out), colref, T::one(), &mut gw[woff..woff + g.cout_g * krows]);
            }
            if let Some(gx) = gx.as_mut() {
                let wt = MatRef::transposed(wg, krows, g.cout_g);
                let gyref = MatRef::new(gyg, g.cout_g, plane_out);
                if g.pointwise() {
                    gemm(wt, gyref, T::one(), &mut gx[xoff..xoff + g.cin_g * plane_in]);
                } else {
                    gemm(wt, gyref, T::zero(), &mut col);
                    col2im_add(&col, &g, &mut gx[xoff..xoff + g.cin_g * plane_in]);
                }
            }
        }
    }
    Ok((
        gx.map(|d| Tensor::from_parts(x.shape().to_vec(), d)),
        gw.map(|d| Tensor::from_parts(weight.shape().to_vec(), d)),
        gb.map(|d| Tensor::from_parts(vec![g.cout], d)),
    ))
}

/// Per-position statistics kept from the layer-norm forward pass.
#[derive(Clone, Debug)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub rstd: Vec<T>,
}

/// Standardizes the channel vector at every (n, h, w) position, then applies
/// the per-channel affine `gamma * x̂ + beta`.
pub fn layer_norm<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, NormStats<T>), TensorError> {
    let (n, c, h, w) = x.dims4()?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(TensorError::shape(
            "layer_norm",
            format!("affine shapes {:?}/{:?} for {c} channels", gamma.shape(), beta.shape()),
        ));
    }
    let plane = h * w;
    let inv_c = T::one() / T::lit(c as f64);
    let xd = x.data();
    let mut out = vec![T::zero(); xd.len()];
    let mut mean = vec![T::zero(); n * plane];
    let mut rstd = vec![T::zero(); n * plane];
    for b in 0..n {
        let base = b * c * plane;
        let m = &mut mean[b * plane..(b + 1) * plane];
        for ch in 0..c {
            for (acc, &v) in m.iter_mut().zip(&xd[base + ch * plane..][..plane]) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v *= inv_c);
        let r = &mut rstd[b * plane..(b + 1) * plane];
        for ch in 0..c {
            for ((acc, &v), &mu) in r.iter_mut().zip(&xd[base + ch * plane..][..plane]).zip(m.iter()) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        r.iter_mut().for_each(|v| *v = T::one() / (*v * inv_c + eps).sqrt());
        for ch in 0..c {
            let (gm, bt) = (gamma.data()[ch], beta.data()[ch]);
            let src = &xd[base + ch * plane..][..plane];
            let dst = &mut out[base + ch * plane..][..plane];
            for i in 0..plane {
                dst[i] = (src[i] - m[i]) * r[i] * gm + bt;
            }
        }
    }
    Ok((Tensor::from_parts(x.shape().to_vec(), out), NormStats { mean, rstd }))
}

pub fn layer_norm_backward<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    stats: &NormStats<T>,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (n, c, h, w) = x.dims4().expect("layer_norm input rank");
    let plane = h * w;
    let inv_c = T::one() / T::lit(c as f64);
    let (xd, gyd) = (x.data(), gy.data());
    let mut gx = vec![T::zero(); xd.len()];
    let mut gg = vec![T::zero(); c];
    let mut gb = vec![T::zero(); c];
    let mut sum_d = vec![T::zero(); plane];
    let mut sum_dx = vec![T::zero(); plane];
    for b in 0..n {
        let base = b * c * plane;
        let m = &stats.mean[b * plane..(b + 1) * plane];
        let r = &stats.rstd[b * plane..(b + 1) * plane];
        sum_d.fill(T::zero());
        sum_dx.fill(T::zero());
        for ch in 0..c {
            let gm = gamma.data()[ch];
            let src = &xd[base + ch * plane..][..plane];
            let g = &gyd[base + ch * plane..][..plane];
            let (mut acc_g, mut acc_b) = (T::zero(), T::zero());
            for i in 0..plane {
                let xhat = (src[i] - m[i]) * r[i];
                acc_g += g[i] * xhat;
                acc_b += g[i];
                let dxhat = g[i] * gm;
                sum_d[i] += dxhat;
                sum_dx[i] += dxhat * xhat;
            }
            gg[ch] += acc_g;
            gb[ch] += acc_b;
        }
        for ch in 0..c {
            let gm = gamma.data()[ch];
            let src = &xd[base + ch * plane..][..plane];
            let g = &gyd[base + ch * plane..][..plane];
            let dst = &mut gx[base + ch * plane..][..plane];
            for i in 0..plane {
                let xhat = (src[i] - m[i]) * r[i];
                dst[i] = r[i] * (g[i] * gm - sum_d[i] * inv_c - xhat * sum_dx[i] * inv_c);
            }
        }
    }
    (
        Tensor::from_parts(x.shape().to_vec(), gx),
        Tensor::from_parts(vec![c], gg),
        Tensor::from_parts(vec![c], gb),
    )
}

/// Softmax over the last axis with max subtraction.
pub fn softmax_lastdim<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let len = *x.shape().last().expect("non-empty shape");
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(len) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - mx).exp();
            total += *v;
        }
        let inv = T::one() / total;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub fn softmax_lastdim_backward<T: Real>(y: &Tensor<T>, gy: &Tensor<T>) -> Tensor<T> {
    let len = *y.shape().last().expect("non-empty shape");
    let mut gx = vec![T::zero(); y.numel()];
    for ((dst, yr), gr) in gx.chunks_mut(len).zip(y.data().chunks(len)).zip(gy.data().chunks(len)) {
        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for i in 0..len {
            dst[i] = yr[i] * (gr[i] - dot);
        }
    }
    Tensor::from_parts(y.shape().to_vec(), gx)
}

fn split_batch(shape: &[usize]) -> Result<(usize, usize, usize), TensorError> {
    if shape.len() < 2 {
        return Err(TensorError::shape("matmul", format!("rank-{} operand", shape.len())));
    }
    let r = shape.len();
    Ok((shape[..r - 2].iter().product(), shape[r - 2], shape[r - 1]))
}

/// Batched matrix product over the last two axes; leading axes must agree.
pub fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (ba, m, k) = split_batch(a.shape())?;
    let (bb, k2, p) = split_batch(b.shape())?;
    let ra = a.rank();
    if a.rank() != b.rank() || a.shape()[..ra - 2] != b.shape()[..ra - 2] || k != k2 {
        return Err(TensorError::shape(
            "matmul",
            format!("cannot multiply {:?} by {:?}", a.shape(), b.shape()),
        ));
    }
    debug_assert_eq!(ba, bb);
    let mut out = vec![T::zero(); ba * m * p];
    for i in 0..ba {
        gemm(
            MatRef::new(&a.data()[i * m * k..][..m * k], m, k),
            MatRef::new(&b.data()[i * k * p..][..k * p], k, p),
            T::zero(),
            &mut out[i * m * p..][..m * p],
        );
    }
    let mut shape = a.shape().to_vec();
    shape[ra - 1] = p;
    Ok(Tensor::from_parts(shape, out))
}

pub fn matmul_backward<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    gy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let (batch, m, k) = split_batch(a.shape()).expect("matmul lhs");
    let (_, _, p) = split_batch(b.shape()).expect("matmul rhs");
    let mut ga = vec![T::zero(); a.numel()];
    let mut gb = vec![T::zero(); b.numel()];
    for i in 0..batch {
        let ad = &a.data()[i * m * k..][..m * k];
        let bd = &b.data()[i * k * p..][..k * p];
        let gd = &gy.data()[i * m * p..][..m * p];
        gemm(MatRef::new(gd, m, p), MatRef::transposed(bd, p, k), T::zero(), &mut ga[i * m * k..][..m * k]);
        gemm(MatRef::transposed(ad, k, m), MatRef::new(gd, m, p), T::zero(), &mut gb[i * k * p..][..k * p]);
    }
    (
        Tensor::from_parts(a.shape().to_vec(), ga),
        Tensor::from_parts(b.shape().to_vec(), gb),
    )
}

/// Swaps the last two axes.
pub fn transpose_last2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (batch, m, k) = split_batch(x.shape())?;
    let mut out = vec![T::zero(); x.numel()];
    for b in 0..batch {
        let src = &x.data()[b * m * k..][..m * k];
        let dst = &mut out[b * m * k..][..m * k];
        for i in 0..m {
            for j in 0..k {
                dst[j * m + i] = src[i * k + j];
            }
        }
    }
    let mut shape = x.shape().to_vec();
    let r = shape.len();
    shape.swap(r - 1, r - 2);
    Ok(Tensor::from_parts(shape, out))
}

/// `(n, c·r², h, w) → (n, c, r·h, r·w)` with
/// `out[n, c, r·h + i, r·w + j] = in[n, c·r² + i·r + j, h, w]`.
pub fn pixel_shuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>, TensorError> {
    let (n, c_in, h, w) = x.dims4()?;
    if r == 0 || c_in % (r * r) != 0 {
        return Err(TensorError::shape(
            "pixel_shuffle",
            format!("{c_in} channels not divisible by {r}²"),
        ));
    }
    let c = c_in / (r * r);
    let mut out = vec![T::zero(); x.numel()];
    let xd = x.data();
    let (ho, wo) = (h * r, w * r);
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src = &xd[((b * c_in + ch * r * r + i * r + j) * h) * w..][..h * w];
                    for y in 0..h {
                        let dst_row = ((b * c + ch) * ho + y * r + i) * wo;
                        for xx in 0..w {
                            out[dst_row + xx * r + j] = src[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, c, ho, wo], out))
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>, TensorError> {
    let (n, c, ho, wo) = x.dims4()?;
    if r == 0 || ho % r != 0 || wo % r != 0 {
        return Err(TensorError::shape(
            "pixel_unshuffle",
            format!("{ho}x{wo} extent not divisible by {r}"),
        ));
    }
    let (h, w) = (ho / r, wo / r);
    let c_out = c * r * r;
    let mut out = vec![T::zero(); x.numel()];
    let xd = x.data();
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let dst = &mut out[((b * c_out + ch * r * r + i * r + j) * h) * w..][..h * w];
                    for y in 0..h {
                        let src_row = ((b * c + ch) * ho + y * r + i) * wo;
                        for xx in 0..w {
                            dst[y * w + xx] = xd[src_row + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![n, c_out, h, w], out))
}

/// Concatenates rank-4 tensors along the channel axis.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let (n, ca, h, w) = a.dims4()?;
    let (n2, cb, h2, w2) = b.dims4()?;
    if (n, h, w) != (n2, h2, w2) {
        return Err(TensorError::shape(
            "concat_channels",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(a.numel() + b.numel());
    for i in 0..n {
        out.extend_from_slice(&a.data()[i * ca * plane..(i + 1) * ca * plane]);
        out.extend_from_slice(&b.data()[i * cb * plane..(i + 1) * cb * plane]);
    }
    Ok(Tensor::from_parts(vec![n, ca + cb, h, w], out))
}

/// Splits a channel-concatenated gradient back into its two parts.
pub fn split_channels<T: Real>(g: &Tensor<T>, ca: usize) -> (Tensor<T>, Tensor<T>) {
    let (n, c, h, w) = g.dims4().expect("rank-4 gradient");
    let cb = c - ca;
    let plane = h * w;
    let mut ga = Vec::with_capacity(n * ca * plane);
    let mut gb = Vec::with_capacity(n * cb * plane);
    for i in 0..n {
        let chunk = &g.data()[i * c * plane..(i + 1) * c * plane];
        ga.extend_from_slice(&chunk[..ca * plane]);
        gb.extend_from_slice(&chunk[ca * plane..]);
    }
    (
        Tensor::from_parts(vec![n, ca, h, w], ga),
        Tensor::from_parts(vec![n, cb, h, w], gb),
    )
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

/// Standard normal density.
pub fn normal_pdf<T: Real>(x: T) -> T {
    T::lit(0.398_942_280_401_432_7) * (-T::lit(0.5) * x * x).exp()
}

pub fn gelu<T: Real>(x: T) -> T {
    x * normal_cdf(x)
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
