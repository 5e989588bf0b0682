use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eigenfem::assembly::{assemble_with, element_data};
use eigenfem::coefficients::catalog;
use eigenfem::conditions::analyze;
use eigenfem::{Execution, SimplicialMesh, StructuredKind};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_assembly(c: &mut Criterion) {
    let coeffs = catalog("ex5_2").unwrap();
    let mut group = c.benchmark_group("assembly");
    group.sample_size(20);
    for j in [81, 161] {
        let mesh = SimplicialMesh::generate_structured(StructuredKind::Mesh45, j).unwrap();
        for (label, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(format!("element_data/{label}"), j), &mesh, |b, m| {
                b.iter(|| element_data(m, &coeffs, exec).unwrap())
            });
            let data = element_data(&mesh, &coeffs, exec).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("assemble/{label}"), j), &mesh, |b, m| {
                b.iter(|| assemble_with(m, &coeffs, &data, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("analyze/{label}"), j), &mesh, |b, m| {
                b.iter(|| analyze(m, &data, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_assembly);
criterion_main!(benches);
