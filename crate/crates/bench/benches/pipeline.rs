use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opuc::cmv::string_residuals_integral;
use opuc::{
    fourier_v, levinson, solve_support, symbol_delta, trig_moments, verblunsky, OrthonormalBasis, Potential,
    ToeplitzSymbol,
};
use opuc_bench::gww2_case;

fn moments_and_levinson(c: &mut Criterion) {
    let mut group = c.benchmark_group("verblunsky");
    group.sample_size(10);
    for n in [20, 40, 80] {
        let case = gww2_case(n);
        group.bench_with_input(BenchmarkId::new("trig_moments", n), &case, |b, case| {
            b.iter(|| trig_moments(&case.potential, case.n, case.kmax, case.precision).unwrap())
        });
        let mt = trig_moments(&case.potential, case.n, case.kmax, case.precision).unwrap();
        group.bench_with_input(BenchmarkId::new("levinson", n), &mt, |b, mt| {
            b.iter(|| levinson(mt, case.kmax, case.precision).unwrap())
        });
    }
    group.finish();
}

fn equilibrium(c: &mut Criterion) {
    let p = Potential::gww(2.0);
    c.bench_function("solve_support/gww2", |b| b.iter(|| solve_support(black_box(&p)).unwrap()));
    let q = Potential::new(vec![-2.0, -0.4]).unwrap();
    c.bench_function("solve_support/cubic", |b| b.iter(|| solve_support(black_box(&q)).unwrap()));
}

fn asymptotics(c: &mut Criterion) {
    let p = Potential::quartic(-1.0, 0.5);
    c.bench_function("fourier_v/quartic", |b| b.iter(|| fourier_v(&p, 1.2, 208)));
    let em = solve_support(&Potential::gww(2.0)).unwrap();
    c.bench_function("toeplitz_symbol/gww2", |b| {
        b.iter(|| ToeplitzSymbol::sample(|phi| symbol_delta(&em, phi), 256).unwrap())
    });
}

fn string_equation(c: &mut Criterion) {
    let mut group = c.benchmark_group("string_integral");
    group.sample_size(10);
    for n in [20, 40] {
        let case = gww2_case(n);
        let vs = verblunsky(&case.potential, n, case.kmax).unwrap();
        let basis = OrthonormalBasis::new(&case.potential, &vs);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| string_residuals_integral(&basis, &vs, case.kmax).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("kernel_density", n), &n, |b, &n| {
            b.iter(|| basis.kernel_density(n, black_box(PI / 5.0)))
        });
    }
    group.finish();
}

criterion_group!(benches, moments_and_levinson, equilibrium, asymptotics, string_equation);
criterion_main!(benches);
