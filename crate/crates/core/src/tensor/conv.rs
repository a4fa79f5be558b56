//! 2-D convolution and its transpose, lowered to im2col + matmul.
//!
//! `conv_transpose2d` is the exact adjoint of `conv2d` under tied weights
//! and matching stride/padding; the integration tests pin that identity.

use super::matmul::{mm, mm_at, mm_bt};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadKind {
    Zero,
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadSpec {
    pub kind: PadKind,
    pub amount: usize,
}

impl PadSpec {
    pub fn zero(amount: usize) -> Self {
        PadSpec {
            kind: PadKind::Zero,
            amount,
        }
    }

    pub fn reflection(amount: usize) -> Self {
        PadSpec {
            kind: PadKind::Reflection,
            amount,
        }
    }
}

fn reflect_index(i: isize, n: usize) -> usize {
    // single fold; callers guarantee amount <= n-1
    let n = n as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    debug_assert!(j >= 0 && j < n);
    j as usize
}

/// Pad one [C,H,W] slab to [C,H+2p,W+2p].
fn pad_slab<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, pad: &PadSpec) -> Vec<T> {
    let p = pad.amount;
    if p == 0 {
        return x.to_vec();
    }
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = vec![T::zero(); c * hp * wp];
    match pad.kind {
        PadKind::Zero => {
            for ci in 0..c {
                for i in 0..h {
                    let src = ci * h * w + i * w;
                    let dst = ci * hp * wp + (i + p) * wp + p;
                    out[dst..dst + w].copy_from_slice(&x[src..src + w]);
                }
            }
        }
        PadKind::Reflection => {
            for ci in 0..c {
                for ip in 0..hp {
                    let si = reflect_index(ip as isize - p as isize, h);
                    for jp in 0..wp {
                        let sj = reflect_index(jp as isize - p as isize, w);
                        out[ci * hp * wp + ip * wp + jp] = x[ci * h * w + si * w + sj];
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of `pad_slab`: fold the padded gradient back onto [C,H,W].
fn unpad_accumulate<T: Scalar>(
    gxp: &[T],
    gx: &mut [T],
    c: usize,
    h: usize,
    w: usize,
    pad: &PadSpec,
) {
    let p = pad.amount;
    if p == 0 {
        for (d, s) in gx.iter_mut().zip(gxp) {
            *d += *s;
        }
        return;
    }
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    match pad.kind {
        PadKind::Zero => {
            for ci in 0..c {
                for i in 0..h {
                    let src = ci * hp * wp + (i + p) * wp + p;
                    let dst = ci * h * w + i * w;
                    for j in 0..w {
                        gx[dst + j] += gxp[src + j];
                    }
                }
            }
        }
        PadKind::Reflection => {
            for ci in 0..c {
                for ip in 0..hp {
                    let si = reflect_index(ip as isize - p as isize, h);
                    for jp in 0..wp {
                        let sj = reflect_index(jp as isize - p as isize, w);
                        gx[ci * h * w + si * w + sj] += gxp[ci * hp * wp + ip * wp + jp];
                    }
                }
            }
        }
    }
}

/// Gather a padded [C,Hp,Wp] slab into columns [C*kh*kw, oh*ow].
fn im2col<T: Scalar>(
    xp: &[T],
    c: usize,
    hp: usize,
    wp: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    oh: usize,
    ow: usize,
) -> Vec<T> {
    let l = oh * ow;
    let mut cols = vec![T::zero(); c * kh * kw * l];
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ci * kh + ki) * kw + kj) * l;
                for oi in 0..oh {
                    let src = ci * hp * wp + (oi * stride + ki) * wp + kj;
                    let dst = row + oi * ow;
                    if stride == 1 {
                        cols[dst..dst + ow].copy_from_slice(&xp[src..src + ow]);
                    } else {
                        for oj in 0..ow {
                            cols[dst + oj] = xp[src + oj * stride];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add columns back onto a padded [C,Hp,Wp] slab (adjoint of im2col).
fn col2im<T: Scalar>(
    cols: &[T],
    xp: &mut [T],
    c: usize,
    hp: usize,
    wp: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    oh: usize,
    ow: usize,
) {
    let l = oh * ow;
    for ci in 0..c {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ci * kh + ki) * kw + kj) * l;
                for oi in 0..oh {
                    let dst = ci * hp * wp + (oi * stride + ki) * wp + kj;
                    let src = row + oi * ow;
                    for oj in 0..ow {
                        xp[dst + oj * stride] += cols[src + oj];
                    }
                }
            }
        }
    }
}

struct ConvDims {
    b: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
}

fn check_conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    transposed: bool,
) -> Result<ConvDims> {
    let xs = input.shape();
    let ws = weight.shape();
    if xs.len() != 4 || ws.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "conv expects 4-D input and weight, got {:?} and {:?}",
            xs, ws
        )));
    }
    if xs.iter().any(|&e| e == 0) {
        return Err(Error::InvalidArgument(format!(
            "zero-extent input {:?}",
            xs
        )));
    }
    if stride < 1 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    // conv weight: [Cout,Cin,kH,kW]; transposed weight: [Cin,Cout,kH,kW]
    let (cin_w, cout) = if transposed {
        (ws[0], ws[1])
    } else {
        (ws[1], ws[0])
    };
    if xs[1] != cin_w {
        return Err(Error::ShapeMismatch(format!(
            "input channels {} do not match weight channels {} (weight {:?})",
            xs[1], cin_w, ws
        )));
    }
    if let Some(bt) = bias {
        if bt.shape() != [cout] {
            return Err(Error::ShapeMismatch(format!(
                "bias shape {:?} does not match {} output channels",
                bt.shape(),
                cout
            )));
        }
    }
    Ok(ConvDims {
        b: xs[0],
        cin: xs[1],
        h: xs[2],
        w: xs[3],
        cout,
        kh: ws[2],
        kw: ws[3],
    })
}

/// 2-D convolution with zero or reflection padding.
///
/// Output spatial size: `floor((H + 2*pad - kH)/stride) + 1`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: PadSpec,
) -> Result<Tensor<T>> {
    let d = check_conv_shapes(input, weight, bias, stride, false)?;
    let p = pad.amount;
    if pad.kind == PadKind::Reflection && (p >= d.h || p >= d.w) {
        return Err(Error::InvalidArgument(format!(
            "reflection pad {} requires input extents > pad, got {}x{}",
            p, d.h, d.w
        )));
    }
    let (hp, wp) = (d.h + 2 * p, d.w + 2 * p);
    if hp < d.kh || wp < d.kw {
        return Err(Error::ShapeMismatch(format!(
            "kernel {}x{} does not fit padded input {}x{}",
            d.kh, d.kw, hp, wp
        )));
    }
    let oh = (hp - d.kh) / stride + 1;
    let ow = (wp - d.kw) / stride + 1;
    let l = oh * ow;
    let k = d.cin * d.kh * d.kw;

    let xdata = input.data();
    let wdata = weight.to_vec();
    let bdata = bias.map(|b| b.to_vec());

    let slab = d.cin * hp * wp;
    let mut xp = Vec::with_capacity(d.b * slab);
    for bi in 0..d.b {
        xp.extend(pad_slab(
            &xdata[bi * d.cin * d.h * d.w..(bi + 1) * d.cin * d.h * d.w],
            d.cin,
            d.h,
            d.w,
            &pad,
        ));
    }
    drop(xdata);

    let mut out = vec![T::zero(); d.b * d.cout * l];
    for bi in 0..d.b {
        let cols = im2col(&xp[bi * slab..(bi + 1) * slab], d.cin, hp, wp, d.kh, d.kw, stride, oh, ow);
        let yb = &mut out[bi * d.cout * l..(bi + 1) * d.cout * l];
        if let Some(bv) = &bdata {
            for co in 0..d.cout {
                yb[co * l..(co + 1) * l].fill(bv[co]);
            }
        }
        mm(&wdata, &cols, yb, d.cout, k, l);
    }

    let mut parents = vec![input.clone(), weight.clone()];
    if let Some(bt) = bias {
        parents.push(bt.clone());
    }
    let dims = (d.b, d.cin, d.h, d.w, d.cout, d.kh, d.kw);
    let shape = vec![d.b, d.cout, oh, ow];
    Ok(Tensor::from_op(
        shape,
        out,
        parents,
        Box::new(move |gy, slots| {
            let (b, cin, h, w, cout, kh, kw) = dims;
            let kdim = cin * kh * kw;
            let l = oh * ow;
            for bi in 0..b {
                let gyb = &gy[bi * cout * l..(bi + 1) * cout * l];
                let xpb = &xp[bi * slab..(bi + 1) * slab];
                if slots[1].is_some() {
                    let cols = im2col(xpb, cin, hp, wp, kh, kw, stride, oh, ow);
                    let gw = slots[1].as_mut().unwrap();
                    mm_bt(gyb, &cols, gw, cout, l, kdim);
                }
                if slots[0].is_some() {
                    let mut gcols = vec![T::zero(); kdim * l];
                    mm_at(&wdata, gyb, &mut gcols, cout, kdim, l);
                    let mut gxp = vec![T::zero(); slab];
                    col2im(&gcols, &mut gxp, cin, hp, wp, kh, kw, stride, oh, ow);
                    let gx = slots[0].as_mut().unwrap();
                    unpad_accumulate(&gxp, &mut gx[bi * cin * h * w..(bi + 1) * cin * h * w], cin, h, w, &pad);
                }
                if slots.len() > 2 {
                    if let Some(gb) = slots[2].as_mut() {
                        for co in 0..cout {
                            let mut acc = T::zero();
                            for v in &gyb[co * l..(co + 1) * l] {
                                acc += *v;
                            }
                            gb[co] += acc;
                        }
                    }
                }
            }
        }),
    ))
}

/// Transposed 2-D convolution (zero padding only).
///
/// Output spatial size: `(H-1)*stride - 2*pad + kH + output_padding`.
pub fn conv_transpose2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Result<Tensor<T>> {
    let d = check_conv_shapes(input, weight, bias, stride, true)?;
    if output_padding >= stride {
        return Err(Error::InvalidArgument(format!(
            "output_padding {} must be < stride {}",
            output_padding, stride
        )));
    }
    let hfull = (d.h - 1) * stride + d.kh + output_padding;
    let wfull = (d.w - 1) * stride + d.kw + output_padding;
    if hfull < 2 * pad + 1 || wfull < 2 * pad + 1 {
        return Err(Error::ShapeMismatch(format!(
            "padding {} leaves no output for input {}x{}",
            pad, d.h, d.w
        )));
    }
    let oh = hfull - 2 * pad;
    let ow = wfull - 2 * pad;
    let l_in = d.h * d.w;
    let k2 = d.cout * d.kh * d.kw;

    let xdata = input.to_vec();
    let wdata = weight.to_vec();
    let bdata = bias.map(|b| b.to_vec());

    let mut out = vec![T::zero(); d.b * d.cout * oh * ow];
    for bi in 0..d.b {
        let xb = &xdata[bi * d.cin * l_in..(bi + 1) * d.cin * l_in];
        let mut cols = vec![T::zero(); k2 * l_in];
        mm_at(&wdata, xb, &mut cols, d.cin, k2, l_in);
        let mut buf = vec![T::zero(); d.cout * hfull * wfull];
        col2im(&cols, &mut buf, d.cout, hfull, wfull, d.kh, d.kw, stride, d.h, d.w);
        let yb = &mut out[bi * d.cout * oh * ow..(bi + 1) * d.cout * oh * ow];
        for co in 0..d.cout {
            for i in 0..oh {
                let src = co * hfull * wfull + (i + pad) * wfull + pad;
                let dst = co * oh * ow + i * ow;
                yb[dst..dst + ow].copy_from_slice(&buf[src..src + ow]);
            }
        }
        if let Some(bv) = &bdata {
            for co in 0..d.cout {
                for v in &mut yb[co * oh * ow..(co + 1) * oh * ow] {
                    *v += bv[co];
                }
            }
        }
    }

    let mut parents = vec![input.clone(), weight.clone()];
    if let Some(bt) = bias {
        parents.push(bt.clone());
    }
    let dims = (d.b, d.cin, d.h, d.w, d.cout, d.kh, d.kw);
    let shape = vec![d.b, d.cout, oh, ow];
    Ok(Tensor::from_op(
        shape,
        out,
        parents,
        Box::new(move |gy, slots| {
            let (b, cin, h, w, cout, kh, kw) = dims;
            let k2 = cout * kh * kw;
            let l_in = h * w;
            let l_out = oh * ow;
            for bi in 0..b {
                let gyb = &gy[bi * cout * l_out..(bi + 1) * cout * l_out];
                // pad the output gradient back to the full scatter extent
                let mut gyp = vec![T::zero(); cout * hfull * wfull];
                for co in 0..cout {
                    for i in 0..oh {
                        let dst = co * hfull * wfull + (i + pad) * wfull + pad;
                        let src = co * l_out + i * ow;
                        gyp[dst..dst + ow].copy_from_slice(&gyb[src..src + ow]);
                    }
                }
                let cols_g = im2col(&gyp, cout, hfull, wfull, kh, kw, stride, h, w);
                if let Some(gx) = slots[0].as_mut() {
                    mm(
                        &wdata,
                        &cols_g,
                        &mut gx[bi * cin * l_in..(bi + 1) * cin * l_in],
                        cin,
                        k2,
                        l_in,
                    );
                }
                if let Some(gw) = slots[1].as_mut() {
                    let xb = &xdata[bi * cin * l_in..(bi + 1) * cin * l_in];
                    mm_bt(xb, &cols_g, gw, cin, l_in, k2);
                }
                if slots.len() > 2 {
                    if let Some(gb) = slots[2].as_mut() {
                        for co in 0..cout {
                            let mut acc = T::zero();
                            for v in &gyb[co * l_out..(co + 1) * l_out] {
                                acc += *v;
                            }
                            gb[co] += acc;
                        }
                    }
                }
            }
        }),
    ))
}
