//! Sequential vs rayon kernels. `cargo bench -p anytime-prune` compares both
//! paths directly; the `train_step` group measures whichever build is active,
//! so run it once more with `--no-default-features` for the sequential baseline.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use anytime_prune::models::{Model, ModelSpec};
use anytime_prune::tensor::kernels::{self, ConvGeom, Exec};
use anytime_prune::tensor::Tensor;

fn paths() -> Vec<(&'static str, Exec)> {
    #[allow(unused_mut)]
    let mut v = vec![("seq", Exec::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("par", Exec::Parallel));
    v
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for &(m, k, n) in &[(32, 784, 256), (256, 256, 128)] {
        let a = Tensor::randn(&[m, k], 1, 1.0).unwrap();
        let b = Tensor::randn(&[k, n], 2, 1.0).unwrap();
        for (name, exec) in paths() {
            group.bench_with_input(BenchmarkId::new(name, format!("{m}x{k}x{n}")), &exec, |bench, &e| {
                bench.iter(|| kernels::matmul(black_box(a.data()), black_box(b.data()), m, k, n, e))
            });
        }
    }
    group.finish();
}

fn conv(c: &mut Criterion) {
    let g = ConvGeom {
        batch: 32,
        cin: 8,
        h: 14,
        w: 14,
        cout: 16,
        kh: 3,
        kw: 3,
        stride: 1,
        padding: 1,
    };
    let input = Tensor::randn(&[g.batch * g.cin * g.h * g.w], 3, 1.0).unwrap();
    let kernel = Tensor::randn(&[g.cout * g.cin * g.kh * g.kw], 4, 1.0).unwrap();
    let mut group = c.benchmark_group("conv2d");
    for (name, exec) in paths() {
        group.bench_function(name, |bench| {
            bench.iter(|| kernels::conv2d(black_box(input.data()), black_box(kernel.data()), &g, exec))
        });
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let model = Model::build(ModelSpec::mlp(vec![784, 256, 128, 10], 10), 0).unwrap();
    let x = Tensor::randn(&[32, 784], 5, 1.0).unwrap();
    let y: Vec<usize> = (0..32).map(|i| i % 10).collect();
    let label = if cfg!(feature = "parallel") { "auto" } else { "seq" };
    c.bench_function(&format!("train_step/mlp/{label}"), |bench| {
        bench.iter(|| model.loss_and_grad(black_box(&x), &y).unwrap())
    });
}

criterion_group!(benches, matmul, conv, train_step);
criterion_main!(benches);
