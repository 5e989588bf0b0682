use std::fmt::Write as _;

use eigenfem::assembly::{assemble_with, element_data, AssembledSystem, ElementData};
use eigenfem::conditions::{analyze, entry_bound_report, ConditionReport, Level};
use eigenfem::eigen::{convergence_on_meshes, property_suite, solve_smallest, SolverOptions, DEFAULT_SEED};
use eigenfem::matrix_analysis::m_matrix_certificate;
use eigenfem::vtk::{interior_to_vertex_field, to_vtk};
use eigenfem::{Error, Execution, SimplicialMesh};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_csv, write_json, write_text};
use crate::CliError;

const EXEC: Execution = Execution::Parallel;

#[derive(Serialize)]
struct MeshSummary {
    dim: usize,
    n_vertices: usize,
    n_elements: usize,
    n_interior: usize,
}

impl MeshSummary {
    fn of(mesh: &SimplicialMesh) -> Self {
        Self { dim: mesh.dim(), n_vertices: mesh.n_vertices(), n_elements: mesh.n_elements(), n_interior: mesh.n_interior() }
    }
}

#[derive(Serialize)]
struct ElementRow {
    element: usize,
    alpha_max: f64,
    bound_argument: f64,
    bound: Option<f64>,
    pass_strict: bool,
    pass_weak: bool,
    reason: String,
}

#[derive(Serialize)]
struct EdgeRow {
    v0: usize,
    v1: usize,
    element_k: usize,
    element_k_prime: usize,
    alpha_k: f64,
    alpha_k_prime: f64,
    theta: f64,
    lhs: f64,
    lhs_unperturbed: f64,
    interior: bool,
    pass_strict: bool,
    pass_weak: bool,
}

fn core(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

struct Prepared {
    data: Vec<ElementData>,
    report: ConditionReport,
    system: AssembledSystem,
}

fn prepare(config: &RunConfig, mesh: &SimplicialMesh) -> Result<Prepared, CliError> {
    let coeffs = config.coefficients()?;
    let data = element_data(mesh, &coeffs, EXEC).map_err(core)?;
    let report = analyze(mesh, &data, EXEC).map_err(core)?;
    let system = assemble_with(mesh, &coeffs, &data, EXEC).map_err(core)?;
    Ok(Prepared { data, report, system })
}

fn single_mesh(config: &RunConfig) -> Result<SimplicialMesh, CliError> {
    let mut meshes = config.meshes()?;
    Ok(meshes.remove(0).1)
}

fn ensure_dir(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", config.output_dir.display())))
}

fn write_matrices(config: &RunConfig, system: &AssembledSystem) -> Result<(), CliError> {
    let dir = &config.output_dir;
    write_text(dir, "A.mtx", &system.a.to_matrix_market())?;
    write_text(dir, "B.mtx", &system.b.to_matrix_market())?;
    write_text(dir, "B_lumped.mtx", &eigenfem::linalg::SparseMatrix::from_diagonal(&system.b_lumped).to_matrix_market())
}

/// Exit code of `analyze`: 0 strict, 2 weak, 3 fail.
pub fn level_exit_code(level: Level) -> i32 {
    match level {
        Level::Strict => 0,
        Level::Weak => 2,
        Level::Fail => 3,
    }
}

pub fn cmd_analyze(config: &RunConfig, matrix_market: bool) -> Result<i32, CliError> {
    let mesh = single_mesh(config)?;
    let Prepared { data, report, system } = prepare(config, &mesh)?;
    let certificate = m_matrix_certificate(&system.a).map_err(core)?;
    let bounds = entry_bound_report(&mesh, &data, &system).map_err(core)?;
    ensure_dir(config)?;
    let dir = &config.output_dir;

    #[derive(Serialize)]
    struct Report<'a> {
        mesh: MeshSummary,
        level: Level,
        aggregates: &'a eigenfem::conditions::Aggregates,
        verdicts: &'a eigenfem::conditions::Verdicts,
        certificate: &'a eigenfem::matrix_analysis::MatrixCertificate,
        certificate_passes: bool,
        entry_bound_violations: usize,
    }
    let level = report.level();
    write_json(
        dir,
        "report.json",
        config,
        &Report {
            mesh: MeshSummary::of(&mesh),
            level,
            aggregates: &report.aggregates,
            verdicts: &report.verdicts,
            certificate: &certificate,
            certificate_passes: certificate.passes(),
            entry_bound_violations: bounds.iter().filter(|b| b.violated).count(),
        },
    )?;
    let elements: Vec<ElementRow> = report
        .per_element
        .iter()
        .map(|e| ElementRow {
            element: e.element,
            alpha_max: e.alpha_max,
            bound_argument: e.bound_argument,
            bound: e.bound,
            pass_strict: e.pass_strict,
            pass_weak: e.pass_weak,
            reason: e.reason.clone().unwrap_or_default(),
        })
        .collect();
    write_csv(dir, "per_element.csv", config, &elements, &[])?;
    let edges: Vec<EdgeRow> = report
        .per_edge
        .iter()
        .map(|e| EdgeRow {
            v0: e.vertices.0,
            v1: e.vertices.1,
            element_k: e.elements.0,
            element_k_prime: e.elements.1,
            alpha_k: e.alpha_k,
            alpha_k_prime: e.alpha_k_prime,
            theta: e.theta,
            lhs: e.lhs,
            lhs_unperturbed: e.lhs_unperturbed,
            interior: e.interior,
            pass_strict: e.pass_strict,
            pass_weak: e.pass_weak,
        })
        .collect();
    write_csv(dir, "per_edge.csv", config, &edges, &[])?;
    if matrix_market {
        write_matrices(config, &system)?;
    }

    let a = &report.aggregates;
    println!("alpha_max = {:.4} pi", a.alpha_max_over_pi);
    match a.alpha_sum_over_pi {
        Some(s) => println!("alpha_sum = {s:.4} pi"),
        None => println!("alpha_sum = n/a"),
    }
    println!("conditions = {}", level_name(level));
    println!("certificate = {}", if certificate.passes() { "irreducible M-matrix" } else { "not certified" });
    Ok(level_exit_code(level))
}

fn level_name(level: Level) -> &'static str {
    match level {
        Level::Strict => "strict",
        Level::Weak => "weak",
        Level::Fail => "fail",
    }
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions { k: config.k, mass: config.mass, tol: config.tol, ..SolverOptions::default() }
}

/// Input problems are configuration errors; anything raised inside the
/// iteration is a solver failure.
fn solver_error(e: Error) -> CliError {
    match e {
        Error::InvalidInput(_) | Error::InvalidParameter(_) => CliError::Config(e.to_string()),
        _ => CliError::Solver(e.to_string()),
    }
}

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    re: f64,
    im: f64,
    modulus: f64,
    residual: f64,
    converged: bool,
}

pub fn cmd_solve(config: &RunConfig, matrix_market: bool) -> Result<i32, CliError> {
    let mesh = single_mesh(config)?;
    let Prepared { report, system, .. } = prepare(config, &mesh)?;
    let certificate = m_matrix_certificate(&system.a).map_err(core)?;
    let solution = solve_smallest(&system, &solver_options(config)).map_err(solver_error)?;
    let properties = property_suite(&solution, &system, Some(&certificate), DEFAULT_SEED).map_err(solver_error)?;
    ensure_dir(config)?;
    let dir = &config.output_dir;

    let rows: Vec<EigenRow> = solution
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| EigenRow {
            index: i + 1,
            re: l.re,
            im: l.im,
            modulus: l.norm(),
            residual: solution.ritz_residuals[i],
            converged: solution.residual_contract[i],
        })
        .collect();
    write_csv(dir, "eigenvalues.csv", config, &rows, &[])?;

    #[derive(Serialize)]
    struct Solver {
        k_requested: usize,
        k_converged: usize,
        converged: bool,
        restarts: usize,
        krylov_dim: usize,
        operator_applications: usize,
        balanced: bool,
        max_residual: f64,
    }
    #[derive(Serialize)]
    struct Properties<'a> {
        mesh: MeshSummary,
        condition_level: Level,
        properties: &'a eigenfem::eigen::PropertyReport,
        certificate: &'a eigenfem::matrix_analysis::MatrixCertificate,
        solver: Solver,
    }
    write_json(
        dir,
        "properties.json",
        config,
        &Properties {
            mesh: MeshSummary::of(&mesh),
            condition_level: report.level(),
            properties: &properties,
            certificate: &certificate,
            solver: Solver {
                k_requested: solution.k_requested,
                k_converged: solution.k_converged,
                converged: solution.converged,
                restarts: solution.restarts,
                krylov_dim: solution.krylov_dim,
                operator_applications: solution.operator_applications,
                balanced: solution.balanced,
                max_residual: solution.max_residual(),
            },
        },
    )?;

    let v1 = &solution.eigenvectors[0];
    let re = interior_to_vertex_field(&mesh, &v1.re).map_err(core)?;
    let mut fields: Vec<(&str, &[f64])> = vec![("principal", &re)];
    let im;
    if !v1.im.is_empty() {
        im = interior_to_vertex_field(&mesh, &v1.im).map_err(core)?;
        fields.push(("principal_imag", &im));
    }
    let title = format!("principal eigenvector {} {}", system.problem_label, system.mesh_label);
    write_text(dir, "principal.vtk", &to_vtk(&mesh, &title, &fields).map_err(core)?)?;
    if matrix_market {
        write_matrices(config, &system)?;
    }

    print!("{}", solve_summary(&solution, &properties, certificate.passes()));
    if solution.k_converged == 0 || !solution.residual_contract[0] {
        return Err(CliError::Solver(format!(
            "principal eigenpair not converged (residual {:e})",
            solution.ritz_residuals[0]
        )));
    }
    Ok(0)
}

/// The five summary lines: eigenvalue, gap, undershoot, certificate, residual.
pub fn solve_summary(
    solution: &eigenfem::eigen::EigenSolution,
    p: &eigenfem::eigen::PropertyReport,
    certified: bool,
) -> String {
    let l1 = solution.lambda1();
    let mut s = String::new();
    if p.principal_real {
        let _ = writeln!(s, "lambda_1    = {:.10} (real)", l1.re);
    } else {
        let _ = writeln!(s, "lambda_1    = {:.10} {:+.10}i (complex)", l1.re, l1.im);
    }
    match (p.relative_gap, p.principal_simple) {
        (Some(g), Some(simple)) => {
            let _ = writeln!(s, "gap         = {g:.6e} ({})", if simple { "simple" } else { "not simple" });
        }
        _ => {
            let _ = writeln!(s, "gap         = n/a (k < 2)");
        }
    }
    match p.undershoot {
        Some(u) => {
            let _ = writeln!(s, "undershoot  = {u:.6e} ({})", if p.sign_preserving { "one-signed" } else { "sign change" });
        }
        None => {
            let _ = writeln!(s, "undershoot  = n/a (complex principal pair)");
        }
    }
    let _ = writeln!(s, "certificate = {}", if certified { "irreducible M-matrix" } else { "not certified" });
    let _ = writeln!(
        s,
        "residual    = {:.3e} ({}/{} pairs converged)",
        solution.max_residual(),
        solution.k_converged,
        solution.eigenvalues.len()
    );
    s
}

#[derive(Serialize)]
struct ConvergenceRow {
    j: usize,
    n_interior: usize,
    lambda1_re: f64,
    lambda1_im: f64,
    error: f64,
    undershoot: Option<f64>,
}

pub fn cmd_converge(config: &RunConfig) -> Result<i32, CliError> {
    let coeffs = config.coefficients()?;
    let reference = config.reference.or(coeffs.reference_eigenvalue).ok_or_else(|| {
        CliError::Config(format!("problem `{}` has no reference eigenvalue; pass --ref", config.problem))
    })?;
    let meshes = config.meshes()?;
    let table = convergence_on_meshes(&coeffs, &meshes, reference, &solver_options(config), EXEC).map_err(solver_error)?;
    ensure_dir(config)?;
    let rows: Vec<ConvergenceRow> = table
        .rows
        .iter()
        .map(|r| ConvergenceRow {
            j: r.j,
            n_interior: r.n_interior,
            lambda1_re: r.lambda1_re,
            lambda1_im: r.lambda1_im,
            error: r.error,
            undershoot: r.undershoot,
        })
        .collect();
    let trailer = vec![format!("reference: {reference:?}"), format!("slope: {:?}", table.slope), format!("observed_order: {:?}", table.observed_order)];
    write_csv(&config.output_dir, "convergence.csv", config, &rows, &trailer)?;
    for r in &table.rows {
        let u = r.undershoot.map_or("n/a".to_string(), |u| format!("{u:.3e}"));
        println!("J = {:4}  lambda_1 = {:.8}  error = {:.3e}  undershoot = {u}", r.j, r.lambda1_re, r.error);
    }
    println!("observed order = {:.3}", table.observed_order);
    Ok(0)
}
