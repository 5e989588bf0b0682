use std::path::Path;
use std::process::{Command, Output};

use eigenfem::{SimplicialMesh, StructuredKind};
use serde_json::Value;

fn eigenfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenfem")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    eigenfem(&all)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn analyze_exit_codes_follow_the_conditions() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["analyze", "--problem", "ex5_1", "--mesh", "mesh45", "--J", "41"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&t.path().join("report.json"));
    let sum = r["aggregates"]["alpha_sum_over_pi"].as_f64().unwrap();
    assert!((sum - 0.86).abs() < 5e-3, "{sum}");
    assert_eq!(r["config"]["problem"], "ex5_1");
    assert!(t.path().join("per_edge.csv").exists() && t.path().join("per_element.csv").exists());

    let o = run_in(t.path(), &["analyze", "--problem", "ex5_1", "--mesh", "mesh135", "--J", "41"]);
    assert_eq!(o.status.code(), Some(3));

    let o = run_in(t.path(), &["analyze", "--problem", "laplace", "--mesh", "mesh45", "--J", "3"]);
    assert_eq!(o.status.code(), Some(0));
}

fn disjoint_squares() -> (String, String) {
    // two J = 5 squares, the second shifted by 2 in x
    let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 5).unwrap();
    let nv = m.n_vertices();
    let mut node = format!("{} 2 0 1\n", 2 * nv);
    for shift in [0.0, 2.0] {
        for v in 0..nv {
            let x = m.vertex(v);
            let id = v + if shift > 0.0 { nv } else { 0 };
            node.push_str(&format!("{id} {:?} {:?} {}\n", x[0] + shift, x[1], u8::from(m.is_boundary(v))));
        }
    }
    let ne = m.n_elements();
    let mut ele = format!("{} 3 0\n", 2 * ne);
    for copy in 0..2 {
        for k in 0..ne {
            let e = m.element(k);
            let o = copy * nv;
            ele.push_str(&format!("{} {} {} {}\n", k + copy * ne, e[0] + o, e[1] + o, e[2] + o));
        }
    }
    (node, ele)
}

#[test]
fn disconnected_interior_is_only_weak() {
    let t = tempfile::tempdir().unwrap();
    let (node, ele) = disjoint_squares();
    let (np, ep) = (t.path().join("m.node"), t.path().join("m.ele"));
    std::fs::write(&np, node).unwrap();
    std::fs::write(&ep, ele).unwrap();
    let out = t.path().join("out");
    let o = run_in(
        &out,
        &["analyze", "--problem", "laplace", "--mesh", "import", "--node", np.to_str().unwrap(), "--ele", ep.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out.join("report.json"));
    assert_eq!(r["verdicts"]["interior_components"], 2);
}

#[test]
fn imported_mesh_matches_generated_mesh() {
    let t = tempfile::tempdir().unwrap();
    let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 9).unwrap();
    let (np, ep) = (t.path().join("m.node"), t.path().join("m.ele"));
    std::fs::write(&np, m.to_node_text()).unwrap();
    std::fs::write(&ep, m.to_ele_text()).unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    let o1 = run_in(&a, &["solve", "--problem", "ex5_1", "--mesh", "mesh45", "--J", "9"]);
    let o2 = run_in(
        &b,
        &["solve", "--problem", "ex5_1", "--mesh", "import", "--node", np.to_str().unwrap(), "--ele", ep.to_str().unwrap()],
    );
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o2.status.code(), Some(0), "{}", String::from_utf8_lossy(&o2.stderr));
    let l1 = json(&a.join("properties.json"))["properties"]["lambda1_re"].as_f64().unwrap();
    let l2 = json(&b.join("properties.json"))["properties"]["lambda1_re"].as_f64().unwrap();
    assert!((l1 - l2).abs() <= 1e-10 * l1, "{l1} {l2}");
}

#[test]
fn solve_laplace_and_summary() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["solve", "--problem", "laplace", "--mesh", "mesh45", "--J", "21", "--k", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5, "{text}");
    for (line, key) in lines.iter().zip(["lambda_1", "gap", "undershoot", "certificate", "residual"]) {
        assert!(line.starts_with(key), "{line}");
    }
    let p = json(&t.path().join("properties.json"));
    let l1 = p["properties"]["lambda1_re"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((l1 - exact).abs() < 0.01 * exact, "{l1}");
    let vtk = std::fs::read_to_string(t.path().join("principal.vtk")).unwrap();
    assert!(vtk.contains("POINT_DATA 441\nSCALARS principal double 1"));
}

#[test]
fn ex5_2_spectra() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    let o = run_in(&a, &["solve", "--problem", "ex5_2", "--mesh", "mesh135", "--J", "41", "--k", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = json(&a.join("properties.json"));
    assert_eq!(p["properties"]["principal_real"], false);
    let vtk = std::fs::read_to_string(a.join("principal.vtk")).unwrap();
    assert!(vtk.contains("SCALARS principal_imag double 1"));

    let b = t.path().join("b");
    let o = run_in(&b, &["solve", "--problem", "ex5_2", "--mesh", "mesh45", "--J", "81", "--k", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let p = json(&b.join("properties.json"));
    assert_eq!(p["properties"]["principal_real"], true);
    assert!(p["properties"]["re_at_least_lambda1"].is_boolean());
    let csv = std::fs::read_to_string(b.join("eigenvalues.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn converge_laplace_is_second_order() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["converge", "--problem", "laplace", "--mesh", "mesh45", "--J", "11,21,41,81"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(t.path().join("convergence.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[5], "undershoot");
    assert_eq!(rdr.records().count(), 4);
    let order: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# observed_order: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((order - 2.0).abs() <= 0.2, "{order}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let t = tempfile::tempdir().unwrap();
    let args = ["solve", "--problem", "ex5_3", "--mesh", "mesh135", "--J", "17", "--k", "6"];
    let first: Vec<Vec<u8>> = {
        assert_eq!(run_in(t.path(), &args).status.code(), Some(0));
        ["eigenvalues.csv", "properties.json", "principal.vtk"]
            .iter()
            .map(|f| std::fs::read(t.path().join(f)).unwrap())
            .collect()
    };
    let o = Command::new(env!("CARGO_BIN_EXE_eigenfem"))
        .args(args)
        .args(["--out", t.path().to_str().unwrap()])
        .env("EIGENFEM_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for (f, bytes) in ["eigenvalues.csv", "properties.json", "principal.vtk"].iter().zip(first) {
        assert_eq!(std::fs::read(t.path().join(f)).unwrap(), bytes, "{f} differs");
    }
}

#[test]
fn configuration_errors_exit_1() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_in(t.path(), &["solve", "--problem", "nope", "--J", "9"]).status.code(), Some(1));
    assert_eq!(run_in(t.path(), &["solve", "--problem", "laplace"]).status.code(), Some(1));
    assert_eq!(run_in(t.path(), &["solve", "--problem", "laplace", "--J", "9", "--mass", "x"]).status.code(), Some(1));
    assert_eq!(run_in(t.path(), &["converge", "--problem", "laplace", "--J", "9,17"]).status.code(), Some(1));
    assert_eq!(
        run_in(t.path(), &["solve", "--problem", "laplace", "--mesh", "import", "--node", "/nonexistent.node", "--ele", "/x.ele"])
            .status
            .code(),
        Some(1)
    );
    let o = Command::new(env!("CARGO_BIN_EXE_eigenfem"))
        .args(["solve", "--problem", "laplace", "--J", "9", "--out", t.path().to_str().unwrap()])
        .env("EIGENFEM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn json_problem_descriptor() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path().join("p.json");
    std::fs::write(&p, r#"{"label": "iso", "diffusion": [[1, 0], [0, 1]]}"#).unwrap();
    let o = run_in(t.path(), &["solve", "--problem", p.to_str().unwrap(), "--J", "21", "--k", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    // identical to the laplace catalog entry
    let l1 = json(&t.path().join("properties.json"))["properties"]["lambda1_re"].as_f64().unwrap();
    assert!((l1 - 19.8611045826).abs() < 1e-8, "{l1}");
}

#[test]
fn unreachable_tolerance_is_a_solver_failure() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["solve", "--problem", "laplace", "--J", "21", "--k", "1", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
}

#[test]
fn matrix_market_export_round_trips() {
    let t = tempfile::tempdir().unwrap();
    let o = run_in(t.path(), &["analyze", "--problem", "ex5_2", "--J", "9", "--matrix-market"]);
    assert!(matches!(o.status.code(), Some(0 | 2 | 3)));
    let a = eigenfem::linalg::SparseMatrix::from_matrix_market(&std::fs::read_to_string(t.path().join("A.mtx")).unwrap())
        .unwrap();
    assert_eq!(a.n_rows(), 49);
}
