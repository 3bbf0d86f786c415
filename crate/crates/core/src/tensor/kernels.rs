//! Numeric kernels shared by the eager ops and the tape.
//!
//! Every kernel partitions its output into independent rows and computes each
//! output element with the same fixed summation order, so the sequential and
//! the rayon-backed paths produce bit-identical results. Small workloads stay
//! sequential under [`Exec::auto`].

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Work below this many multiply-adds is not worth handing to the pool.
pub const PARALLEL_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Exec {
    pub fn auto(work: usize) -> Exec {
        #[cfg(feature = "parallel")]
        {
            if work >= PARALLEL_THRESHOLD {
                return Exec::Parallel;
            }
        }
        let _ = work;
        Exec::Sequential
    }
}

fn for_each_row<F>(out: &mut [f64], row_len: usize, exec: Exec, f: F)
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    if row_len == 0 {
        return;
    }
    match exec {
        Exec::Sequential => out
            .chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
        #[cfg(feature = "parallel")]
        Exec::Parallel => out
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out[m×n] = a[m×k] · b[k×n]`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for_each_row(&mut out, n, exec, |i, row| {
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av != 0.0 {
                axpy(av, &b[p * n..(p + 1) * n], row);
            }
        }
    });
    out
}

/// `out[k×n] = aᵀ · b` for `a[m×k]`, `b[m×n]`.
pub fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for_each_row(&mut out, n, exec, |p, row| {
        for i in 0..m {
            let av = a[i * k + p];
            if av != 0.0 {
                axpy(av, &b[i * n..(i + 1) * n], row);
            }
        }
    });
    out
}

/// `out[m×k] = a · bᵀ` for `a[m×n]`, `b[k×n]`.
pub fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, exec: Exec) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for_each_row(&mut out, k, exec, |i, row| {
        let a_row = &a[i * n..(i + 1) * n];
        for (p, o) in row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            *o = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
        }
    });
    out
}

/// Geometry of a 2-D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.padding - self.kh) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.padding - self.kw) / self.stride + 1
    }

    pub fn work(&self) -> usize {
        self.batch * self.cout * self.out_h() * self.out_w() * self.cin * self.kh * self.kw
    }

    /// Input coordinate for output position `o` and kernel offset `k`, if it
    /// falls inside the unpadded input.
    #[inline]
    fn src(&self, o: usize, k: usize, size: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }
}

pub fn conv2d(input: &[f64], kernel: &[f64], g: &ConvGeom, exec: Exec) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let per_sample = g.cout * oh * ow;
    let mut out = vec![0.0; g.batch * per_sample];
    for_each_row(&mut out, per_sample, exec, |b, sample| {
        let x = &input[b * g.cin * g.h * g.w..(b + 1) * g.cin * g.h * g.w];
        for co in 0..g.cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..g.cin {
                        for ky in 0..g.kh {
                            let Some(iy) = g.src(oy, ky, g.h) else { continue };
                            for kx in 0..g.kw {
                                let Some(ix) = g.src(ox, kx, g.w) else { continue };
                                acc += x[(ci * g.h + iy) * g.w + ix]
                                    * kernel[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                            }
                        }
                    }
                    sample[(co * oh + oy) * ow + ox] = acc;
                }
            }
        }
    });
    out
}

/// Gradient of the conv output with respect to its input.
pub fn conv2d_grad_input(grad_out: &[f64], kernel: &[f64], g: &ConvGeom, exec: Exec) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let per_sample = g.cin * g.h * g.w;
    let mut out = vec![0.0; g.batch * per_sample];
    for_each_row(&mut out, per_sample, exec, |b, gx| {
        let gy = &grad_out[b * g.cout * oh * ow..(b + 1) * g.cout * oh * ow];
        for co in 0..g.cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let gv = gy[(co * oh + oy) * ow + ox];
                    if gv == 0.0 {
                        continue;
                    }
                    for ci in 0..g.cin {
                        for ky in 0..g.kh {
                            let Some(iy) = g.src(oy, ky, g.h) else { continue };
                            for kx in 0..g.kw {
                                let Some(ix) = g.src(ox, kx, g.w) else { continue };
                                gx[(ci * g.h + iy) * g.w + ix] +=
                                    gv * kernel[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

/// Gradient of the conv output with respect to the kernel, one output channel
/// per row.
pub fn conv2d_grad_kernel(grad_out: &[f64], input: &[f64], g: &ConvGeom, exec: Exec) -> Vec<f64> {
    let (oh, ow) = (g.out_h(), g.out_w());
    let per_cout = g.cin * g.kh * g.kw;
    let mut out = vec![0.0; g.cout * per_cout];
    for_each_row(&mut out, per_cout, exec, |co, gk| {
        for b in 0..g.batch {
            let x = &input[b * g.cin * g.h * g.w..(b + 1) * g.cin * g.h * g.w];
            let gy = &grad_out[(b * g.cout + co) * oh * ow..(b * g.cout + co + 1) * oh * ow];
            for oy in 0..oh {
                for ox in 0..ow {
                    let gv = gy[oy * ow + ox];
                    if gv == 0.0 {
                        continue;
                    }
                    for ci in 0..g.cin {
                        for ky in 0..g.kh {
                            let Some(iy) = g.src(oy, ky, g.h) else { continue };
                            for kx in 0..g.kw {
                                let Some(ix) = g.src(ox, kx, g.w) else { continue };
                                gk[(ci * g.kh + ky) * g.kw + kx] +=
                                    gv * x[(ci * g.h + iy) * g.w + ix];
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        out
    }

    fn transpose(a: &[f64], r: usize, c: usize) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = a[i * c + j];
            }
        }
        t
    }

    proptest! {
        // Small-integer entries keep every partial sum exact, so the three
        // routes must agree bit for bit.
        #[test]
        fn transposed_variants_agree(m in 1usize..6, k in 1usize..6, n in 1usize..6, seed in 0u64..1000) {
            let a: Vec<f64> = (0..m * k).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
            let b: Vec<f64> = (0..k * n).map(|i| ((i as u64 * 7 + seed) % 13) as f64 - 6.0).collect();
            let c = naive_matmul(&a, &b, m, k, n);
            prop_assert_eq!(&matmul(&a, &b, m, k, n, Exec::Sequential), &c);
            let at = transpose(&a, m, k);
            prop_assert_eq!(&matmul_tn(&at, &b, k, m, n, Exec::Sequential), &c);
            let bt = transpose(&b, k, n);
            prop_assert_eq!(&matmul_nt(&a, &bt, m, k, n, Exec::Sequential), &c);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_paths_are_bit_identical() {
        let (m, k, n) = (37, 53, 29);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        assert_eq!(
            matmul(&a, &b, m, k, n, Exec::Sequential),
            matmul(&a, &b, m, k, n, Exec::Parallel)
        );
        assert_eq!(
            matmul_tn(&a, &a, m, k, k, Exec::Sequential),
            matmul_tn(&a, &a, m, k, k, Exec::Parallel)
        );
        let g = ConvGeom {
            batch: 3,
            cin: 2,
            h: 7,
            w: 6,
            cout: 4,
            kh: 3,
            kw: 3,
            stride: 1,
            padding: 1,
        };
        let x: Vec<f64> = (0..3 * 2 * 7 * 6).map(|i| (i as f64 * 0.3).sin()).collect();
        let w: Vec<f64> = (0..4 * 2 * 9).map(|i| (i as f64 * 0.7).cos()).collect();
        let y = conv2d(&x, &w, &g, Exec::Sequential);
        assert_eq!(y, conv2d(&x, &w, &g, Exec::Parallel));
        assert_eq!(
            conv2d_grad_input(&y, &w, &g, Exec::Sequential),
            conv2d_grad_input(&y, &w, &g, Exec::Parallel)
        );
        assert_eq!(
            conv2d_grad_kernel(&y, &x, &g, Exec::Sequential),
            conv2d_grad_kernel(&y, &x, &g, Exec::Parallel)
        );
    }
}
