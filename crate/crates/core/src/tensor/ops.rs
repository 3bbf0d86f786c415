//! Eager forward operations. The tape records the same functions, so a taped
//! forward pass and an eager one agree bit for bit.

use super::kernels::{self, ConvGeom, Exec};
use super::Tensor;
use crate::error::{Error, Result};

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match t.shape() {
        [m, n] => Ok((*m, *n)),
        s => Err(Error::Shape(format!("{what}: expected a matrix, got {s:?}"))),
    }
}

fn dims4(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    match t.shape() {
        [a, b, c, d] => Ok([*a, *b, *c, *d]),
        s => Err(Error::Shape(format!("{what}: expected rank 4, got {s:?}"))),
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = dims2(a, "matmul lhs")?;
    let (k2, n) = dims2(b, "matmul rhs")?;
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul inner dimensions differ: [{m}x{k}] · [{k2}x{n}]"
        )));
    }
    let data = kernels::matmul(a.data(), b.data(), m, k, n, Exec::auto(m * k * n));
    Tensor::new(vec![m, n], data)
}

fn zip_with(a: &Tensor, b: &Tensor, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    a.same_shape(b, what)?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "add", |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "sub", |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with(a, b, "mul", |x, y| x * y)
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data = a.data().iter().map(|v| v * c).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

pub fn sum(a: &Tensor) -> Tensor {
    Tensor::scalar(a.data().iter().sum())
}

/// `x[m×n] + bias[n]` broadcast over rows; the only broadcasting op.
pub fn add_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, n) = dims2(x, "add_bias input")?;
    if bias.shape() != [n] {
        return Err(Error::Shape(format!(
            "bias {:?} does not match {n} columns",
            bias.shape()
        )));
    }
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(n) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(out)
}

/// `x[b×c×h×w] + bias[c]` broadcast over batch and space.
pub fn add_channel_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let [_, c, h, w] = dims4(x, "channel bias input")?;
    if bias.shape() != [c] {
        return Err(Error::Shape(format!(
            "bias {:?} does not match {c} channels",
            bias.shape()
        )));
    }
    let mut out = x.clone();
    for (i, plane) in out.data_mut().chunks_mut(h * w).enumerate() {
        let b = bias.data()[i % c];
        plane.iter_mut().for_each(|v| *v += b);
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

pub(crate) fn conv_geom(input: &Tensor, kernel: &Tensor, stride: usize, padding: usize) -> Result<ConvGeom> {
    let [batch, cin, h, w] = dims4(input, "conv2d input")?;
    let [cout, kcin, kh, kw] = dims4(kernel, "conv2d kernel")?;
    if kcin != cin {
        return Err(Error::Shape(format!(
            "conv2d kernel expects {kcin} input channels, input has {cin}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("conv2d stride must be at least 1".into()));
    }
    if kh > h + 2 * padding || kw > w + 2 * padding {
        return Err(Error::Shape(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }
    Ok(ConvGeom {
        batch,
        cin,
        h,
        w,
        cout,
        kh,
        kw,
        stride,
        padding,
    })
}

/// Zero-padded valid cross-correlation.
pub fn conv2d(input: &Tensor, kernel: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let g = conv_geom(input, kernel, stride, padding)?;
    let data = kernels::conv2d(input.data(), kernel.data(), &g, Exec::auto(g.work()));
    Tensor::new(vec![g.batch, g.cout, g.out_h(), g.out_w()], data)
}

/// Non-overlapping 2×2 mean pooling; odd trailing rows/columns are dropped.
pub fn mean_pool2(x: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = dims4(x, "mean_pool2 input")?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::Shape(format!("mean_pool2 needs at least 2x2, got {h}x{w}")));
    }
    let src = x.data();
    let mut out = vec![0.0; b * c * oh * ow];
    for (p, plane) in out.chunks_mut(oh * ow).enumerate() {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i = base + 2 * oy * w + 2 * ox;
                plane[oy * ow + ox] = 0.25 * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
            }
        }
    }
    Tensor::new(vec![b, c, oh, ow], out)
}

/// Mean cross-entropy of softmax(logits) against integer labels, together with
/// the row-wise softmax probabilities.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (m, c) = dims2(logits, "softmax_cross_entropy logits")?;
    if labels.len() != m {
        return Err(Error::Shape(format!(
            "{} labels for {m} logit rows",
            labels.len()
        )));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Label { label, classes: c });
    }
    let mut probs = logits.clone();
    let mut total = 0.0;
    for (row, &label) in probs.data_mut().chunks_mut(c).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted_label = row[label] - max;
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        total += z.ln() - shifted_label;
        row.iter_mut().for_each(|v| *v /= z);
    }
    Ok((total / m as f64, probs))
}

/// Row-wise argmax; ties resolve to the smallest class index.
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    let (_, c) = dims2(logits, "argmax input")?;
    Ok(logits
        .data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matmul_identity_and_hand_values() {
        let i2 = Tensor::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let b = Tensor::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        assert_eq!(matmul(&i2, &b).unwrap(), b);
        let a = Tensor::from_rows(&[&[1.0, 2.0]]).unwrap();
        let c = Tensor::from_rows(&[&[3.0], &[4.0]]).unwrap();
        assert_eq!(matmul(&a, &c).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch() {
        let a = Tensor::zeros(&[2, 3]).unwrap();
        assert!(matches!(matmul(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn conv_identity_kernel() {
        let x = Tensor::randn(&[2, 3, 4, 4], 5, 1.0).unwrap();
        let mut k = Tensor::zeros(&[3, 3, 1, 1]).unwrap();
        for c in 0..3 {
            k.data_mut()[c * 3 + c] = 1.0;
        }
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap(), x);
    }

    #[test]
    fn conv_hand_value_and_shapes() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 0).unwrap().data(), &[5.0]);

        let x = Tensor::zeros(&[1, 1, 4, 4]).unwrap();
        let k = Tensor::zeros(&[1, 1, 3, 3]).unwrap();
        assert_eq!(conv2d(&x, &k, 1, 1).unwrap().shape(), &[1, 1, 4, 4]);
        assert_eq!(conv2d(&x, &k, 2, 1).unwrap().shape(), &[1, 1, 2, 2]);

        let big = Tensor::zeros(&[1, 1, 5, 5]).unwrap();
        assert!(matches!(conv2d(&x, &big, 1, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_cases() {
        let uniform = Tensor::zeros(&[3, 10]).unwrap();
        let (loss, _) = softmax_cross_entropy(&uniform, &[0, 4, 9]).unwrap();
        assert_relative_eq!(loss, 10f64.ln(), max_relative = 1e-14);

        let extreme = Tensor::from_rows(&[&[1000.0, 0.0]]).unwrap();
        let (loss, probs) = softmax_cross_entropy(&extreme, &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(probs.all_finite());

        let row = Tensor::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let (loss, _) = softmax_cross_entropy(&row, &[2]).unwrap();
        let e = std::f64::consts::E;
        let expected = -(e.powi(3) / (e + e * e + e.powi(3))).ln();
        assert_relative_eq!(loss, expected, max_relative = 1e-14);
        assert_relative_eq!(loss, 0.40761, epsilon = 1e-5);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let x = Tensor::zeros(&[1, 3]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&x, &[3]),
            Err(Error::Label { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn relu_and_argmax() {
        let x = Tensor::from_rows(&[&[-1.0, 2.0, 2.0], &[0.0, -3.0, -3.0]]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(argmax_rows(&x).unwrap(), vec![1, 0]);
    }

    #[test]
    fn pooling_averages_quads() {
        let x = Tensor::new(vec![1, 1, 2, 4], (1..=8).map(f64::from).collect()).unwrap();
        assert_eq!(mean_pool2(&x).unwrap().data(), &[3.5, 5.5]);
    }
}
