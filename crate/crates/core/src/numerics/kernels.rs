//! Slice-level compute kernels. Shapes are validated by the graph layer; these
//! functions only assert the buffer lengths they index.

use super::parallel::{for_each_chunk, map_indexed};
use super::Real;

/// Convolution geometry, square kernels only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub batch: usize,
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvDims {
    fn col_rows(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_item(&self) -> usize {
        self.in_ch * self.in_h * self.in_w
    }

    fn out_item(&self) -> usize {
        self.out_ch * self.out_plane()
    }
}

/// Unfold one `[C, H, W]` item into `[C·k·k, out_h·out_w]` patch columns.
fn im2col<T: Real>(x: &[T], d: &ConvDims, col: &mut [T]) {
    let plane = d.out_plane();
    let k = d.kernel;
    for c in 0..d.in_ch {
        let xc = &x[c * d.in_h * d.in_w..(c + 1) * d.in_h * d.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..d.out_h {
                    let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                    let drow = &mut dst[oy * d.out_w..(oy + 1) * d.out_w];
                    if iy < 0 || iy >= d.in_h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let src = &xc[iy as usize * d.in_w..(iy as usize + 1) * d.in_w];
                    for (ox, v) in drow.iter_mut().enumerate() {
                        let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                        *v = if ix < 0 || ix >= d.in_w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-add patch columns back onto a `[C, H, W]` item.
fn col2im<T: Real>(col: &[T], d: &ConvDims, x: &mut [T]) {
    let plane = d.out_plane();
    let k = d.kernel;
    x.fill(T::zero());
    for c in 0..d.in_ch {
        let xc = &mut x[c * d.in_h * d.in_w..(c + 1) * d.in_h * d.in_w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let src = &col[row * plane..(row + 1) * plane];
                for oy in 0..d.out_h {
                    let iy = (oy * d.stride + ki) as isize - d.pad as isize;
                    if iy < 0 || iy >= d.in_h as isize {
                        continue;
                    }
                    let dst = &mut xc[iy as usize * d.in_w..(iy as usize + 1) * d.in_w];
                    for ox in 0..d.out_w {
                        let ix = (ox * d.stride + kj) as isize - d.pad as isize;
                        if ix >= 0 && ix < d.in_w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * d.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn is_pointwise(d: &ConvDims) -> bool {
    d.kernel == 1 && d.stride == 1 && d.pad == 0
}

/// `y[n] = W · im2col(x[n])`, parallel over batch items.
pub fn conv2d<T: Real>(x: &[T], w: &[T], d: &ConvDims) -> Vec<T> {
    assert_eq!(x.len(), d.batch * d.in_item());
    assert_eq!(w.len(), d.out_ch * d.col_rows());
    let mut y = vec![T::zero(); d.batch * d.out_item()];
    let (rows, plane) = (d.col_rows(), d.out_plane());
    for_each_chunk(&mut y, d.out_item(), |n, yn| {
        let xn = &x[n * d.in_item()..(n + 1) * d.in_item()];
        if is_pointwise(d) {
            T::gemm(
                d.out_ch,
                rows,
                plane,
                w,
                (rows as isize, 1),
                xn,
                (plane as isize, 1),
                T::zero(),
                yn,
            );
        } else {
            let mut col = vec![T::zero(); rows * plane];
            im2col(xn, d, &mut col);
            T::gemm(
                d.out_ch,
                rows,
                plane,
                w,
                (rows as isize, 1),
                &col,
                (plane as isize, 1),
                T::zero(),
                yn,
            );
        }
    });
    y
}

/// Gradient of `<gy, conv2d(x, w)>` with respect to `x` (a transposed convolution).
pub fn conv2d_input_grad<T: Real>(gy: &[T], w: &[T], d: &ConvDims) -> Vec<T> {
    assert_eq!(gy.len(), d.batch * d.out_item());
    assert_eq!(w.len(), d.out_ch * d.col_rows());
    let mut dx = vec![T::zero(); d.batch * d.in_item()];
    let (rows, plane) = (d.col_rows(), d.out_plane());
    for_each_chunk(&mut dx, d.in_item(), |n, dxn| {
        let gyn = &gy[n * d.out_item()..(n + 1) * d.out_item()];
        // Wᵀ is read through swapped strides.
        if is_pointwise(d) {
            T::gemm(
                rows,
                d.out_ch,
                plane,
                w,
                (1, rows as isize),
                gyn,
                (plane as isize, 1),
                T::zero(),
                dxn,
            );
        } else {
            let mut col = vec![T::zero(); rows * plane];
            T::gemm(
                rows,
                d.out_ch,
                plane,
                w,
                (1, rows as isize),
                gyn,
                (plane as isize, 1),
                T::zero(),
                &mut col,
            );
            col2im(&col, d, dxn);
        }
    });
    dx
}

/// Gradient of `<gy, conv2d(x, w)>` with respect to `w`. Per-item partials are
/// computed in parallel and summed in batch order.
pub fn conv2d_weight_grad<T: Real>(x: &[T], gy: &[T], d: &ConvDims) -> Vec<T> {
    assert_eq!(x.len(), d.batch * d.in_item());
    assert_eq!(gy.len(), d.batch * d.out_item());
    let (rows, plane) = (d.col_rows(), d.out_plane());
    let partials = map_indexed(d.batch, |n| {
        let xn = &x[n * d.in_item()..(n + 1) * d.in_item()];
        let gyn = &gy[n * d.out_item()..(n + 1) * d.out_item()];
        let mut dw = vec![T::zero(); d.out_ch * rows];
        if is_pointwise(d) {
            T::gemm(
                d.out_ch,
                plane,
                rows,
                gyn,
                (plane as isize, 1),
                xn,
                (1, plane as isize),
                T::zero(),
                &mut dw,
            );
        } else {
            let mut col = vec![T::zero(); rows * plane];
            im2col(xn, d, &mut col);
            T::gemm(
                d.out_ch,
                plane,
                rows,
                gyn,
                (plane as isize, 1),
                &col,
                (1, plane as isize),
                T::zero(),
                &mut dw,
            );
        }
        dw
    });
    let mut acc = vec![T::zero(); d.out_ch * rows];
    for p in partials {
        for (a, v) in acc.iter_mut().zip(p) {
            *a = *a + v;
        }
    }
    acc
}

/// `[m, k] · [k, n]`. Row `i` of the result depends only on row `i` of `a`, with
/// a fixed summation order, so results are independent of the batch size.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * n];
    for_each_chunk(&mut c, n, |i, ci| {
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == T::zero() {
                continue;
            }
            for (cv, &bv) in ci.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv = *cv + aip * bv;
            }
        }
    });
    c
}

pub fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); a.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

/// Nearest-neighbour 2× upsampling of `planes` H×W planes.
pub fn upsample2x<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let mut y = vec![T::zero(); planes * 4 * h * w];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut y[p * 4 * h * w..(p + 1) * 4 * h * w];
        for i in 0..2 * h {
            for j in 0..2 * w {
                dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
            }
        }
    }
    y
}

/// Sum of each 2×2 block; adjoint of [`upsample2x`]. `h`, `w` are output dims.
pub fn sum_pool2x<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let mut y = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let src = &x[p * 4 * h * w..(p + 1) * 4 * h * w];
        let dst = &mut y[p * h * w..(p + 1) * h * w];
        for i in 0..h {
            for j in 0..w {
                let r0 = 2 * i * 2 * w + 2 * j;
                let r1 = r0 + 2 * w;
                dst[i * w + j] = src[r0] + src[r0 + 1] + src[r1] + src[r1 + 1];
            }
        }
    }
    y
}

/// `[outer, mid, inner] -> [outer, 1, inner]` by summing the middle axis.
pub fn sum_middle<T: Real>(x: &[T], outer: usize, mid: usize, inner: usize) -> Vec<T> {
    let mut y = vec![T::zero(); outer * inner];
    for o in 0..outer {
        let dst = &mut y[o * inner..(o + 1) * inner];
        for m in 0..mid {
            let src = &x[(o * mid + m) * inner..(o * mid + m + 1) * inner];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = *d + s;
            }
        }
    }
    y
}

/// `[outer, 1, inner] -> [outer, mid, inner]` by repetition.
pub fn broadcast_middle<T: Real>(x: &[T], outer: usize, mid: usize, inner: usize) -> Vec<T> {
    let mut y = Vec::with_capacity(outer * mid * inner);
    for o in 0..outer {
        let src = &x[o * inner..(o + 1) * inner];
        for _ in 0..mid {
            y.extend_from_slice(src);
        }
    }
    y
}
