//! Per-sample compute kernels shared by the tensor-level layer functions and
//! the network. Feature maps are `(channels, height, width)` row-major slices.

use super::tensor::Scalar;
use crate::par;

/// Work (multiply-adds) above which a single GEMM splits its output rows
/// across threads.
const PAR_GEMM_WORK: usize = 1 << 22;

/// Eight-lane dot product; independent accumulators let the compiler
/// vectorize without reassociating a single running sum.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Unfolds `k x k` same-padded patches: `col[(c*k*k + ky*k + kx) * hw + p]`.
pub fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut Vec<T>) {
    let hw = h * w;
    let pad = (k / 2) as isize;
    col.clear();
    col.resize(c * k * k * hw, T::zero());
    for ci in 0..c {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    if x0 < x1 {
                        let s0 = (x0 as isize + dx) as usize;
                        dst[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                    }
                }
            }
        }
    }
}

/// Scatters patch gradients back onto the input plane (adjoint of `im2col`).
pub fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, out: &mut [T]) {
    let hw = h * w;
    let pad = (k / 2) as isize;
    out.iter_mut().for_each(|v| *v = T::zero());
    for ci in 0..c {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for x in x0..x1 {
                        let sx = (x as isize + dx) as usize;
                        plane[sy as usize * w + sx] += row[y * w + x];
                    }
                }
            }
        }
    }
}

/// `out[o, p] = bias[o] + sum_k weights[o, k] * col[k, p]`.
pub fn conv_gemm<T: Scalar>(weights: &[T], bias: &[T], col: &[T], kdim: usize, hw: usize, out: &mut [T]) {
    let out_c = bias.len();
    let row = |o: usize, dst: &mut [T]| {
        dst.iter_mut().for_each(|v| *v = bias[o]);
        let wrow = &weights[o * kdim..(o + 1) * kdim];
        for (kk, &wv) in wrow.iter().enumerate() {
            if wv != T::zero() {
                axpy(wv, &col[kk * hw..(kk + 1) * hw], dst);
            }
        }
    };
    if out_c * kdim * hw >= PAR_GEMM_WORK {
        par::for_each_chunk_mut(&mut out[..out_c * hw], hw, |o, dst| row(o, dst));
    } else {
        for (o, dst) in out[..out_c * hw].chunks_mut(hw).enumerate() {
            row(o, dst);
        }
    }
}

/// Accumulates filter and bias gradients; optionally forms patch gradients.
pub fn conv_gemm_backward<T: Scalar>(
    weights: &[T],
    col: &[T],
    dout: &[T],
    kdim: usize,
    hw: usize,
    dweights: &mut [T],
    dbias: &mut [T],
    dcol: Option<&mut Vec<T>>,
) {
    let out_c = dbias.len();
    for o in 0..out_c {
        let g = &dout[o * hw..(o + 1) * hw];
        dbias[o] += g.iter().copied().sum::<T>();
        let drow = &mut dweights[o * kdim..(o + 1) * kdim];
        for (kk, dw) in drow.iter_mut().enumerate() {
            *dw += dot(g, &col[kk * hw..(kk + 1) * hw]);
        }
    }
    if let Some(dcol) = dcol {
        dcol.clear();
        dcol.resize(kdim * hw, T::zero());
        let fill = |kk: usize, dst: &mut [T]| {
            for o in 0..out_c {
                let wv = weights[o * kdim + kk];
                if wv != T::zero() {
                    axpy(wv, &dout[o * hw..(o + 1) * hw], dst);
                }
            }
        };
        if out_c * kdim * hw >= PAR_GEMM_WORK {
            par::for_each_chunk_mut(dcol, hw, |kk, dst| fill(kk, dst));
        } else {
            for (kk, dst) in dcol.chunks_mut(hw).enumerate() {
                fill(kk, dst);
            }
        }
    }
}

/// 2x2 stride-2 max pooling; records the flat argmax of every window.
pub fn maxpool<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, out: &mut [T], argmax: &mut [u32]) {
    let (oh, ow) = (h / 2, w / 2);
    for ci in 0..c {
        let base = ci * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let i0 = base + 2 * y * w + 2 * x;
                let cands = [i0, i0 + 1, i0 + w, i0 + w + 1];
                let mut best = cands[0];
                for &i in &cands[1..] {
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                let o = (ci * oh + y) * ow + x;
                out[o] = input[best];
                argmax[o] = best as u32;
            }
        }
    }
}

pub fn maxpool_backward<T: Scalar>(dout: &[T], argmax: &[u32], dinput: &mut [T]) {
    dinput.iter_mut().for_each(|v| *v = T::zero());
    for (g, &i) in dout.iter().zip(argmax) {
        dinput[i as usize] += *g;
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
