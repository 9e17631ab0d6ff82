//! Per-iteration cost of the NMF samplers at the default batch size and
//! rank, mirroring the overhead table the CLI bench command produces.

use corv::nmf::{measure_step_seconds, NmfSamplerKind, TrainConfig};
use corv::transforms::{Transform, TransformKind};
use corv_bench::bench_dataset;
use criterion::{criterion_group, criterion_main, Criterion};

fn config(sampler: NmfSamplerKind) -> TrainConfig {
    TrainConfig {
        sampler,
        rank: 20,
        lambda_w: 1.0,
        lambda_h: 1.0,
        batch_size: 2000,
        n_iters: 1,
        stepsize: 1e-5,
        eval_interval: 1,
        burn_in: 0,
        seed: 7,
    }
}

fn nmf_iterations(c: &mut Criterion) {
    let dataset = bench_dataset();
    let mut group = c.benchmark_group("nmf_iteration");
    group.sample_size(20);

    let samplers = [
        ("mirror", NmfSamplerKind::Mirror),
        ("corv_exp", NmfSamplerKind::Corv(Transform::new(TransformKind::Exp))),
        ("corv_softplus", NmfSamplerKind::Corv(Transform::new(TransformKind::Softplus))),
        ("corv_icll", NmfSamplerKind::Corv(Transform::new(TransformKind::Icll))),
    ];
    for (name, sampler) in samplers {
        group.bench_function(name, |b| {
            b.iter_custom(|iters| {
                let secs =
                    measure_step_seconds(&dataset, &config(sampler), 10, iters as usize).unwrap();
                std::time::Duration::from_secs_f64(secs * iters as f64)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, nmf_iterations);
criterion_main!(benches);
