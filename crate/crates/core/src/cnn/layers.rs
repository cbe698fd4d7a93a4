//! Batch-level layer operations on [`Tensor`]s. The network uses the same
//! per-sample kernels directly; these wrappers expose each layer on its own.

use super::kernels;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Same-padded, stride-1 cross-correlation. `filters` is `(out, in, k, k)`
/// with odd `k`; `bias` has one entry per output channel.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (b, c, h, w) = input.dims4()?;
    let (o, fc, k, k2) = filters.dims4()?;
    if fc != c || k != k2 || k % 2 == 0 || bias.len() != o {
        return Err(Error::ShapeMismatch(format!(
            "conv input {:?} vs filters {:?}, bias {}",
            input.shape(),
            filters.shape(),
            bias.len()
        )));
    }
    let hw = h * w;
    let mut out = Tensor::zeros(vec![b, o, h, w]);
    let mut col = Vec::new();
    for (x, y) in input.samples().zip(out.data_mut().chunks_mut(o * hw)) {
        kernels::im2col(x, c, h, w, k, &mut col);
        kernels::conv_gemm(filters.data(), bias, &col, c * k * k, hw, y);
    }
    Ok(out)
}

pub struct ConvGradients<T> {
    pub input: Tensor<T>,
    pub filters: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Scalar>(input: &Tensor<T>, filters: &Tensor<T>, dout: &Tensor<T>) -> Result<ConvGradients<T>> {
    let (b, c, h, w) = input.dims4()?;
    let (o, _, k, _) = filters.dims4()?;
    if dout.shape() != [b, o, h, w] {
        return Err(Error::ShapeMismatch(format!(
            "conv output gradient {:?}, expected {:?}",
            dout.shape(),
            [b, o, h, w]
        )));
    }
    let hw = h * w;
    let kdim = c * k * k;
    let mut dinput = Tensor::zeros(vec![b, c, h, w]);
    let mut dfilters = Tensor::zeros(filters.shape().to_vec());
    let mut dbias = vec![T::zero(); o];
    let (mut col, mut dcol) = (Vec::new(), Vec::new());
    for ((x, g), dx) in input
        .samples()
        .zip(dout.samples())
        .zip(dinput.data_mut().chunks_mut(c * hw))
    {
        kernels::im2col(x, c, h, w, k, &mut col);
        kernels::conv_gemm_backward(
            filters.data(),
            &col,
            g,
            kdim,
            hw,
            dfilters.data_mut(),
            &mut dbias,
            Some(&mut dcol),
        );
        kernels::col2im(&dcol, c, h, w, k, dx);
    }
    Ok(ConvGradients {
        input: dinput,
        filters: dfilters,
        bias: dbias,
    })
}

/// 2x2 stride-2 max pooling. Returns the pooled tensor and the flat
/// (per-sample) argmax index of every window.
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let (b, c, h, w) = input.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddDimension { height: h, width: w });
    }
    let per_out = c * (h / 2) * (w / 2);
    let mut out = Tensor::zeros(vec![b, c, h / 2, w / 2]);
    let mut argmax = vec![0u32; b * per_out];
    for ((x, y), a) in input
        .samples()
        .zip(out.data_mut().chunks_mut(per_out))
        .zip(argmax.chunks_mut(per_out))
    {
        kernels::maxpool(x, c, h, w, y, a);
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(input_shape: &[usize], dout: &Tensor<T>, argmax: &[u32]) -> Result<Tensor<T>> {
    let mut dinput = Tensor::zeros(input_shape.to_vec());
    let b = input_shape.first().copied().unwrap_or(0).max(1);
    let per_in = dinput.data().len() / b;
    let per_out = dout.data().len() / b;
    if argmax.len() != dout.data().len() {
        return Err(Error::ShapeMismatch("argmax does not match pooled output".into()));
    }
    for ((g, a), dx) in dout
        .data()
        .chunks(per_out)
        .zip(argmax.chunks(per_out))
        .zip(dinput.data_mut().chunks_mut(per_in))
    {
        kernels::maxpool_backward(g, a, dx);
    }
    Ok(dinput)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| v.max(T::zero()))
}

pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(kernels::sigmoid)
}

/// `(1/M) sum_i sum_j (y_o - y_l)^2` and its gradient `2 (y_o - y_l) / M`.
pub fn mse_loss<T: Scalar>(output: &Tensor<T>, labels: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if output.shape() != labels.shape() || output.shape().len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "output {:?} vs labels {:?}",
            output.shape(),
            labels.shape()
        )));
    }
    let m = output.shape()[0].max(1) as f64;
    let mut loss = 0.0;
    let grad = output
        .data()
        .iter()
        .zip(labels.data())
        .map(|(&o, &l)| {
            let d = (o - l).as_f64();
            loss += d * d;
            T::lit(2.0 * d / m)
        })
        .collect();
    Ok((loss / m, Tensor::new(output.shape().to_vec(), grad)?))
}
