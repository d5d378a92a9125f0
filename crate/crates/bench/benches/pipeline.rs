use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use helmplan::billiards::{fill_survival, sample_phase_space};
use helmplan::experiments::k_n;
use helmplan::fem::{assemble, generate_mesh, solve, FeSpace, Medium};
use helmplan::geometry::TwoWallParams;
use helmplan::graph_paths::{certify_bound, WeightedDigraph};
use helmplan::planner::{mesh_budgets, size_field, Regime, RegimeSpec};
use helmplan::pml::{Formulation, PmlProfile};
use helmplan::{build_two_wall_scene, Complex64, Vec2};

fn graphs(c: &mut Criterion) {
    let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| 0.05 + 0.01 * ((i * 7 + j * 3) % 5) as f64).collect()).collect();
    let g = WeightedDigraph::new(rows).unwrap();
    c.bench_function("certify_bound n=6", |b| b.iter(|| certify_bound(black_box(&g), 200).unwrap()));
}

fn rays(c: &mut Criterion) {
    let scene = build_two_wall_scene(false);
    let grid = sample_phase_space(&scene, TwoWallParams::default().l_gap() / 10.0, 256).unwrap();
    c.bench_function("fill_survival 256 directions", |b| b.iter(|| fill_survival(&scene, grid.clone(), 100.0).unwrap()));
}

fn meshing_and_solve(c: &mut Criterion) {
    let scene = build_two_wall_scene(false);
    let k = k_n(6);
    let budget = mesh_budgets(&RegimeSpec::new(Regime::QO, 2, 200.0), k, k * k).unwrap();
    let field = size_field(&scene, &budget, 0.3).unwrap();
    let mut group = c.benchmark_group("fem");
    group.sample_size(10);
    group.bench_function("generate_mesh QO n=6", |b| b.iter(|| generate_mesh(&scene, &|x| field.eval(x)).unwrap()));
    let mesh = Arc::new(generate_mesh(&scene, &|x| field.eval(x)).unwrap());
    let space = FeSpace::new(mesh, 2).unwrap();
    let medium = Medium::Pml(PmlProfile::new(scene.r_pml_minus, scene.r_tr, Formulation::DivergenceForm).unwrap());
    let f = |x: Vec2| Complex64::new((-(x.norm2()) * 4.0).exp(), 0.0);
    group.bench_function("assemble P2", |b| b.iter(|| assemble(&space, &medium, k, &f, None).unwrap()));
    let sys = assemble(&space, &medium, k, &f, None).unwrap();
    group.bench_function("solve P2", |b| b.iter(|| solve(&sys).unwrap()));
    group.finish();
}

criterion_group!(benches, graphs, rays, meshing_and_solve);
criterion_main!(benches);
