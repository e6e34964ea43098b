//! Numeric kernels over raw row-major buffers shared by tensor values and
//! the tape's forward/backward rules.

use crate::error::{shape_err, Result};
use crate::tensor::{Shape, Tensor};
use crate::Scalar;

/// Strides of `src` viewed inside the broadcast shape `out` (0 on
/// broadcast axes).
fn broadcast_strides(src: &Shape, out: &Shape) -> Vec<usize> {
    let strides = src.strides();
    src.dims()
        .iter()
        .zip(out.dims())
        .zip(strides)
        .map(|((&s, &o), st)| if s == 1 && o != 1 { 0 } else { st })
        .collect()
}

/// Visits every output offset together with the matching offsets of two
/// broadcast operands.
fn for_each_broadcast(out: &Shape, sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let dims = out.dims();
    let rank = dims.len();
    let inner = dims[rank - 1];
    let (ia, ib) = (sa[rank - 1], sb[rank - 1]);
    let outer: usize = dims[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank - 1];
    let mut o = 0;
    for _ in 0..outer {
        let mut oa: usize = idx.iter().zip(sa).map(|(i, s)| i * s).sum();
        let mut ob: usize = idx.iter().zip(sb).map(|(i, s)| i * s).sum();
        for _ in 0..inner {
            f(o, oa, ob);
            o += 1;
            oa += ia;
            ob += ib;
        }
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

pub fn broadcast_binary<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Tensor::from_parts(a.shape().clone(), data));
    }
    let out = Shape::broadcast(a.shape(), b.shape())?;
    let (sa, sb) = (broadcast_strides(a.shape(), &out), broadcast_strides(b.shape(), &out));
    let mut data = vec![T::zero(); out.numel()];
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(&out, &sa, &sb, |o, ia, ib| data[o] = f(ad[ia], bd[ib]));
    Ok(Tensor::from_parts(out, data))
}

/// Sums a gradient of the broadcast shape back onto `target`.
pub fn reduce_to_shape<T: Scalar>(grad: &Tensor<T>, target: &Shape) -> Tensor<T> {
    if grad.shape() == target {
        return grad.clone();
    }
    let st = broadcast_strides(target, grad.shape());
    let mut data = vec![T::zero(); target.numel()];
    let g = grad.data();
    for_each_broadcast(grad.shape(), &st, &st, |o, it, _| data[it] += g[o]);
    Tensor::from_parts(target.clone(), data)
}

/// Like [`reduce_to_shape`] but first maps each gradient element together
/// with the operand values at the same broadcast position.
pub fn reduce_product<T: Scalar>(
    grad: &Tensor<T>,
    target: &Shape,
    other: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    let out = grad.shape();
    let st = broadcast_strides(target, out);
    let so = broadcast_strides(other.shape(), out);
    let mut data = vec![T::zero(); target.numel()];
    let (g, od) = (grad.data(), other.data());
    for_each_broadcast(out, &st, &so, |o, it, io| data[it] += f(g[o], od[io]));
    Tensor::from_parts(target.clone(), data)
}

pub fn permute<T: Scalar>(shape: &Shape, data: &[T], axes: &[usize]) -> (Shape, Vec<T>) {
    let in_strides = shape.strides();
    let out_dims: Vec<usize> = axes.iter().map(|&a| shape.dims()[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let out_shape = Shape::new(out_dims).expect("permuted dims are valid");
    let mut out = vec![T::zero(); data.len()];
    for_each_broadcast(&out_shape, &src_strides, &src_strides, |o, i, _| out[o] = data[i]);
    (out_shape, out)
}

/// (outer, axis, inner) extents for axis-wise concat/slice.
pub fn split_extent(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    (outer, dims[axis], inner)
}

pub fn concat<T: Scalar>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts[0].dims();
    if axis >= first.len() {
        return Err(shape_err!("concat axis {axis} out of range for {first:?}"));
    }
    let mut total = 0;
    for p in parts {
        let d = p.dims();
        if d.len() != first.len() || d.iter().enumerate().any(|(i, &x)| i != axis && x != first[i]) {
            return Err(shape_err!("concat along {axis}: {first:?} vs {d:?}"));
        }
        total += d[axis];
    }
    let mut dims = first.to_vec();
    dims[axis] = total;
    let (outer, _, inner) = split_extent(&dims, axis);
    let mut out = Vec::with_capacity(dims.iter().product());
    for o in 0..outer {
        for p in parts {
            let n = p.dims()[axis] * inner;
            out.extend_from_slice(&p.data()[o * n..(o + 1) * n]);
        }
    }
    Ok(Tensor::from_parts(Shape::new(dims)?, out))
}

pub fn slice<T: Scalar>(x: &Tensor<T>, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
    let d = x.dims();
    if axis >= d.len() || len == 0 || start + len > d[axis] {
        return Err(shape_err!("slice {start}..{} of axis {axis} out of range for {d:?}", start + len));
    }
    let (outer, n, inner) = split_extent(d, axis);
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * n * inner;
        out.extend_from_slice(&x.data()[base + start * inner..base + (start + len) * inner]);
    }
    let mut dims = d.to_vec();
    dims[axis] = len;
    Ok(Tensor::from_parts(Shape::new(dims)?, out))
}

/// Inverse of [`slice`]: scatter `g` into a zero tensor of `full` shape.
pub fn unslice<T: Scalar>(g: &Tensor<T>, full: &Shape, axis: usize, start: usize) -> Tensor<T> {
    let (outer, n, inner) = split_extent(full.dims(), axis);
    let len = g.dims()[axis];
    let mut out = vec![T::zero(); full.numel()];
    for o in 0..outer {
        let base = o * n * inner;
        out[base + start * inner..base + (start + len) * inner]
            .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
    }
    Tensor::from_parts(full.clone(), out)
}

/// Logical (rows, cols) of a rank-3 operand after optional transposition.
fn mat_dims(d: &[usize], t: bool) -> (usize, usize) {
    if t {
        (d[2], d[1])
    } else {
        (d[1], d[2])
    }
}

/// Batched real matmul over rank-3 tensors. A batch extent of 1 broadcasts.
pub fn batched_matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, ta: bool, tb: bool) -> Result<Tensor<T>> {
    let (da, db) = (a.dims(), b.dims());
    if da.len() != 3 || db.len() != 3 {
        return Err(shape_err!("matmul needs rank-3 operands, got {da:?} and {db:?}"));
    }
    let (m, k) = mat_dims(da, ta);
    let (k2, n) = mat_dims(db, tb);
    if k != k2 {
        return Err(shape_err!("matmul inner dimensions differ: {da:?} x {db:?}"));
    }
    let batch = match (da[0], db[0]) {
        (x, y) if x == y => x,
        (1, y) => y,
        (x, 1) => x,
        _ => return Err(shape_err!("matmul batch mismatch {da:?} x {db:?}")),
    };
    let mut out = vec![T::zero(); batch * m * n];
    let (sa, sb) = (da[1] * da[2], db[1] * db[2]);
    let (rsa, csa) = if ta { (1, da[2] as isize) } else { (da[2] as isize, 1) };
    let (rsb, csb) = if tb { (1, db[2] as isize) } else { (db[2] as isize, 1) };
    for bi in 0..batch {
        let ab = &a.data()[if da[0] == 1 { 0 } else { bi * sa }..][..sa];
        let bb = &b.data()[if db[0] == 1 { 0 } else { bi * sb }..][..sb];
        let cb = &mut out[bi * m * n..(bi + 1) * m * n];
        T::gemm(m, k, n, T::one(), ab, rsa, csa, bb, rsb, csb, T::zero(), cb, n as isize, 1);
    }
    Ok(Tensor::from_parts(Shape::new([batch, m, n])?, out))
}

pub fn softmax_last<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let n = *x.dims().last().unwrap();
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::from_parts(x.shape().clone(), out)
}

/// Sliding-window geometry of a 2-D cross-correlation over a `(c, h, w)`
/// image producing `(oh, ow)` positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
    pub oh: usize,
    pub ow: usize,
}

/// `floor((d + 2p - k) / s) + 1`, or `None` if the kernel does not fit.
pub fn conv_out_len(d: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    (d + 2 * p).checked_sub(k).map(|r| r / s + 1)
}

impl ConvGeom {
    pub fn new(c: usize, h: usize, w: usize, k: (usize, usize), s: (usize, usize), p: (usize, usize)) -> Result<Self> {
        if k.0 == 0 || k.1 == 0 || s.0 == 0 || s.1 == 0 {
            return Err(shape_err!("kernel {k:?} and stride {s:?} must be positive"));
        }
        let oh = conv_out_len(h, k.0, s.0, p.0);
        let ow = conv_out_len(w, k.1, s.1, p.1);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(Self { c, h, w, kh: k.0, kw: k.1, sh: s.0, sw: s.1, ph: p.0, pw: p.1, oh, ow }),
            _ => Err(shape_err!("kernel {k:?} larger than padded input {h}x{w} (padding {p:?})")),
        }
    }

    pub fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn cols(&self) -> usize {
        self.oh * self.ow
    }

    pub fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let n = self.cols();
        for c in 0..self.c {
            let img = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let r = (c * self.kh + ki) * self.kw + kj;
                    let row = &mut cols[r * n..(r + 1) * n];
                    for oy in 0..self.oh {
                        let iy = (oy * self.sh + ki) as isize - self.ph as isize;
                        let dst = &mut row[oy * self.ow..(oy + 1) * self.ow];
                        if iy < 0 || iy >= self.h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &img[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.sw + kj) as isize - self.pw as isize;
                            *d = if ix < 0 || ix >= self.w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): accumulates columns into `x`.
    pub fn col2im<T: Scalar>(&self, cols: &[T], x: &mut [T]) {
        let n = self.cols();
        for c in 0..self.c {
            let img = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let r = (c * self.kh + ki) * self.kw + kj;
                    let row = &cols[r * n..(r + 1) * n];
                    for oy in 0..self.oh {
                        let iy = (oy * self.sh + ki) as isize - self.ph as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut img[iy as usize * self.w..(iy as usize + 1) * self.w];
                        for (ox, &v) in row[oy * self.ow..(oy + 1) * self.ow].iter().enumerate() {
                            let ix = (ox * self.sw + kj) as isize - self.pw as isize;
                            if ix >= 0 && (ix as usize) < self.w {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Hyperparameters of a (possibly transposed) 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

/// Real cross-correlation: x `(B,Cin,H,W)`, w `(Cout,Cin,kh,kw)`.
pub fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, spec: ConvSpec) -> Result<Tensor<T>> {
    let (xd, wd) = (x.dims(), w.dims());
    if xd.len() != 4 || wd.len() != 4 || xd[1] != wd[1] {
        return Err(shape_err!("conv2d input {xd:?} incompatible with kernel {wd:?}"));
    }
    let g = ConvGeom::new(xd[1], xd[2], xd[3], (wd[2], wd[3]), spec.stride, spec.padding)?;
    let (b, cout) = (xd[0], wd[0]);
    let (rows, n) = (g.rows(), g.cols());
    let mut cols = vec![T::zero(); rows * n];
    let mut out = vec![T::zero(); b * cout * n];
    let img = g.c * g.h * g.w;
    for bi in 0..b {
        g.im2col(&x.data()[bi * img..(bi + 1) * img], &mut cols);
        let ob = &mut out[bi * cout * n..(bi + 1) * cout * n];
        T::gemm(cout, rows, n, T::one(), w.data(), rows as isize, 1, &cols, n as isize, 1, T::zero(), ob, n as isize, 1);
    }
    Tensor::from_vec([b, cout, g.oh, g.ow], out)
}

pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    gout: &Tensor<T>,
    spec: ConvSpec,
    need_x: bool,
    need_w: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let (xd, wd) = (x.dims(), w.dims());
    let g = ConvGeom::new(xd[1], xd[2], xd[3], (wd[2], wd[3]), spec.stride, spec.padding).unwrap();
    let (b, cout) = (xd[0], wd[0]);
    let (rows, n) = (g.rows(), g.cols());
    let img = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut dx = need_x.then(|| vec![T::zero(); x.numel()]);
    let mut dw = need_w.then(|| vec![T::zero(); w.numel()]);
    for bi in 0..b {
        let gb = &gout.data()[bi * cout * n..(bi + 1) * cout * n];
        if let Some(dw) = dw.as_mut() {
            g.im2col(&x.data()[bi * img..(bi + 1) * img], &mut cols);
            // dW += gout_b (cout x n) * cols^T (n x rows)
            T::gemm(cout, n, rows, T::one(), gb, n as isize, 1, &cols, 1, n as isize, T::one(), dw, rows as isize, 1);
        }
        if let Some(dx) = dx.as_mut() {
            // dcols = W^T (rows x cout) * gout_b (cout x n)
            T::gemm(rows, cout, n, T::one(), w.data(), 1, rows as isize, gb, n as isize, 1, T::zero(), &mut cols, n as isize, 1);
            g.col2im(&cols, &mut dx[bi * img..(bi + 1) * img]);
        }
    }
    (
        dx.map(|d| Tensor::from_parts(x.shape().clone(), d)),
        dw.map(|d| Tensor::from_parts(w.shape().clone(), d)),
    )
}

/// Output extent of a transposed convolution.
pub fn conv_t_out_len(d: usize, k: usize, s: usize, p: usize, output_padding: usize) -> Option<usize> {
    ((d - 1) * s + k + output_padding).checked_sub(2 * p).filter(|&v| v > 0)
}

/// Geometry of the forward convolution whose adjoint is the transposed
/// convolution from `(hi, wi)` to `out_hw`.
fn conv_t_geom(cout: usize, hi: usize, wi: usize, k: (usize, usize), spec: ConvSpec, out_hw: (usize, usize)) -> Result<ConvGeom> {
    let g = ConvGeom::new(cout, out_hw.0, out_hw.1, k, spec.stride, spec.padding)?;
    if g.oh != hi || g.ow != wi {
        return Err(shape_err!(
            "transposed conv cannot map {hi}x{wi} to {}x{} with kernel {k:?} stride {:?}",
            out_hw.0,
            out_hw.1,
            spec.stride
        ));
    }
    Ok(g)
}

/// Transposed convolution (adjoint of [`conv2d`]): x `(B,Cin,Hi,Wi)`, w
/// `(Cin,Cout,kh,kw)`, explicit output extent `out_hw`.
pub fn conv_transpose2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, spec: ConvSpec, out_hw: (usize, usize)) -> Result<Tensor<T>> {
    let (xd, wd) = (x.dims(), w.dims());
    if xd.len() != 4 || wd.len() != 4 || xd[1] != wd[0] {
        return Err(shape_err!("conv_transpose2d input {xd:?} incompatible with kernel {wd:?}"));
    }
    let (b, cin, cout) = (xd[0], xd[1], wd[1]);
    let g = conv_t_geom(cout, xd[2], xd[3], (wd[2], wd[3]), spec, out_hw)?;
    let (rows, n) = (g.rows(), g.cols());
    let img = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut out = vec![T::zero(); b * img];
    for bi in 0..b {
        let xb = &x.data()[bi * cin * n..(bi + 1) * cin * n];
        // cols = Wm^T (rows x cin) * x_b (cin x n), Wm is (cin x rows)
        T::gemm(rows, cin, n, T::one(), w.data(), 1, rows as isize, xb, n as isize, 1, T::zero(), &mut cols, n as isize, 1);
        g.col2im(&cols, &mut out[bi * img..(bi + 1) * img]);
    }
    Tensor::from_vec([b, cout, g.h, g.w], out)
}

pub fn conv_transpose2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    gout: &Tensor<T>,
    spec: ConvSpec,
    need_x: bool,
    need_w: bool,
) -> (Option<Tensor<T>>, Option<Tensor<T>>) {
    let (xd, wd, od) = (x.dims(), w.dims(), gout.dims());
    let (b, cin, cout) = (xd[0], xd[1], wd[1]);
    let g = conv_t_geom(cout, xd[2], xd[3], (wd[2], wd[3]), spec, (od[2], od[3])).unwrap();
    let (rows, n) = (g.rows(), g.cols());
    let img = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); rows * n];
    let mut dx = need_x.then(|| vec![T::zero(); x.numel()]);
    let mut dw = need_w.then(|| vec![T::zero(); w.numel()]);
    for bi in 0..b {
        g.im2col(&gout.data()[bi * img..(bi + 1) * img], &mut cols);
        if let Some(dx) = dx.as_mut() {
            let db = &mut dx[bi * cin * n..(bi + 1) * cin * n];
            T::gemm(cin, rows, n, T::one(), w.data(), rows as isize, 1, &cols, n as isize, 1, T::zero(), db, n as isize, 1);
        }
        if let Some(dw) = dw.as_mut() {
            let xb = &x.data()[bi * cin * n..(bi + 1) * cin * n];
            T::gemm(cin, n, rows, T::one(), xb, n as isize, 1, &cols, 1, n as isize, T::one(), dw, rows as isize, 1);
        }
    }
    (
        dx.map(|d| Tensor::from_parts(x.shape().clone(), d)),
        dw.map(|d| Tensor::from_parts(w.shape().clone(), d)),
    )
}
