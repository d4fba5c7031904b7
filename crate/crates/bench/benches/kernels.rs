use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spinphase::dynamics::{rotating_hamiltonian, run_cycle, step_propagator, RunOptions};
use spinphase::entangle::{entangling_cycle, EntangleOptions};
use spinphase::hamiltonian::{energy_derivatives, labeled_spectrum};
use spinphase::linalg::{expm_hermitian, jacobi_eigen};
use spinphase::nonadiabatic::{magic_lambda, transverse_second_order, transverse_second_order_aux};
use spinphase::{berry_phase_adiabatic, CycleSchedule, Integrator, SpinRep};

const MAGIC_CYCLE: &str = "[start]\nlambda = 0.838\n\n[[segment]]\nkind = \"rotate\"\nduration = 200.0\nalpha_half_turns = 2\n";

fn spectra(c: &mut Criterion) {
    let rep = SpinRep::new(8).unwrap();
    let h = rep.sigma_z() + rep.sigma_x_squared() * 0.7;
    c.bench_function("jacobi S=4", |b| b.iter(|| jacobi_eigen(black_box(&h)).unwrap()));
    c.bench_function("labeled spectrum S=4", |b| b.iter(|| labeled_spectrum(&rep, black_box(0.7), 0.05).unwrap()));
    c.bench_function("energy derivatives S=4", |b| b.iter(|| energy_derivatives(&rep, 0.0, black_box(0.7)).unwrap()));
}

fn phases(c: &mut Criterion) {
    let rep = SpinRep::new(4).unwrap();
    let schedule = CycleSchedule::from_toml_str(MAGIC_CYCLE).unwrap();
    c.bench_function("berry quadrature S=2", |b| b.iter(|| berry_phase_adiabatic(&rep, 0.0, &schedule, 2001).unwrap()));
    c.bench_function("magic lambda S=2", |b| b.iter(|| magic_lambda(&rep, black_box(0.3)).unwrap()));
    c.bench_function("transverse sum over states S=2", |b| {
        b.iter(|| transverse_second_order(&rep, 1.0, black_box(1.3)).unwrap())
    });
    c.bench_function("transverse auxiliary S=2", |b| {
        b.iter(|| transverse_second_order_aux(&rep, 1.0, black_box(1.3)).unwrap())
    });
}

fn propagation(c: &mut Criterion) {
    let rep = SpinRep::new(4).unwrap();
    let schedule = CycleSchedule::from_toml_str(MAGIC_CYCLE).unwrap();
    let h = |t: f64| rotating_hamiltonian(&rep, &schedule.at(t));
    let h0 = h(10.0);
    c.bench_function("expm S=2", |b| b.iter(|| expm_hermitian(black_box(&h0), 0.005).unwrap()));
    for integrator in [Integrator::Midpoint, Integrator::Magnus4] {
        c.bench_function(&format!("step {integrator:?}"), |b| {
            b.iter(|| step_propagator(&h, black_box(10.0), 0.005, integrator).unwrap())
        });
    }
    let mut group = c.benchmark_group("cycles");
    group.sample_size(10);
    let opts = RunOptions { steps_per_unit: 50.0, ..RunOptions::default() };
    group.bench_function("magic cycle S=2", |b| b.iter(|| run_cycle(&rep, 0.0, &schedule, &opts).unwrap()));
    let opts = EntangleOptions { steps_per_unit: 50.0, ..EntangleOptions::default() };
    group.bench_function("entangling cycle T=25", |b| b.iter(|| entangling_cycle(-0.9699, 25.0, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, spectra, phases, propagation);
criterion_main!(benches);
