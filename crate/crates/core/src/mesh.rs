//! Simplicial meshes: storage, structured unit-square generators,
//! Triangle-format and JSON I/O, and interior connectivity.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates closer than this (max-norm) are treated as the same vertex on import.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;
/// Tolerance for the analytic unit-square boundary test of generated meshes.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// A conforming simplicial mesh in 2 or 3 dimensions.
///
/// Elements are stored with positive signed volume. Interior vertices carry a
/// dense ordinal `0..n_interior()` in vertex-id order; these are the unknowns
/// of the Dirichlet problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    interior_index: Vec<Option<usize>>,
    interior_vertices: Vec<usize>,
}

/// Which way each square of the structured grid is cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructuredKind {
    /// Cut along the southwest–northeast diagonal.
    Mesh45,
    /// Cut along the southeast–northwest diagonal.
    Mesh135,
}

impl FromStr for StructuredKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mesh45" | "45" => Ok(StructuredKind::Mesh45),
            "mesh135" | "135" => Ok(StructuredKind::Mesh135),
            _ => Err(Error::InvalidParameter(format!("unknown structured mesh kind `{s}`"))),
        }
    }
}

impl std::fmt::Display for StructuredKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StructuredKind::Mesh45 => "mesh45",
            StructuredKind::Mesh135 => "mesh135",
        })
    }
}

/// A mesh edge with the elements that contain it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgePatch {
    /// Vertex ids, smaller first.
    pub vertices: (usize, usize),
    pub elements: Vec<usize>,
}

/// Connectivity of the graph of interior vertices joined by interior edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteriorConnectivity {
    pub connected: bool,
    /// Vertex ids of each component, sorted; components ordered by smallest id.
    pub components: Vec<Vec<usize>>,
    /// Set when the mesh has no interior vertices (connected vacuously).
    pub no_interior_vertices: bool,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    boundary: Vec<bool>,
}

impl SimplicialMesh {
    /// Validates and builds a mesh. Element orientation is normalized to
    /// positive signed volume.
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>, elements: Vec<Vec<usize>>, boundary: Vec<bool>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParameter(format!("dimension {dim} not supported (2 or 3)")));
        }
        if boundary.len() != vertices.len() {
            return Err(Error::Ingestion(format!(
                "{} boundary flags for {} vertices",
                boundary.len(),
                vertices.len()
            )));
        }
        let mut coords = Vec::with_capacity(dim * vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Ingestion(format!("vertex {i} has {} coordinates, expected {dim}", v.len())));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Ingestion(format!("vertex {i} has a non-finite coordinate")));
            }
            coords.extend_from_slice(v);
        }
        let nv = vertices.len();
        let mut cells = Vec::with_capacity((dim + 1) * elements.len());
        for (k, el) in elements.iter().enumerate() {
            if el.len() != dim + 1 {
                return Err(Error::Ingestion(format!("element {k} has {} vertices, expected {}", el.len(), dim + 1)));
            }
            if let Some(&bad) = el.iter().find(|&&v| v >= nv) {
                return Err(Error::Ingestion(format!("element {k} references vertex {bad} (only {nv} vertices)")));
            }
            for a in 0..el.len() {
                if el[a + 1..].contains(&el[a]) {
                    return Err(Error::Ingestion(format!("element {k} repeats vertex {}", el[a])));
                }
            }
            cells.extend_from_slice(el);
        }
        let mut mesh = Self {
            dim,
            coords,
            cells,
            boundary,
            interior_index: Vec::new(),
            interior_vertices: Vec::new(),
        };
        for k in 0..mesh.n_elements() {
            let vol = mesh.signed_volume(k);
            let h = mesh.element_diameter(k);
            if vol.abs() <= 1e-14 * h.powi(dim as i32) || vol == 0.0 {
                return Err(Error::Ingestion(format!("element {k} is degenerate (volume {vol:e})")));
            }
            if vol < 0.0 {
                let base = k * (dim + 1);
                mesh.cells.swap(base + dim - 1, base + dim);
            }
        }
        mesh.number_interior();
        Ok(mesh)
    }

    fn number_interior(&mut self) {
        self.interior_index = vec![None; self.n_vertices()];
        self.interior_vertices.clear();
        for v in 0..self.n_vertices() {
            if !self.boundary[v] {
                self.interior_index[v] = Some(self.interior_vertices.len());
                self.interior_vertices.push(v);
            }
        }
    }

    /// Structured triangulation of the unit square with `j` points per axis.
    pub fn generate_structured(kind: StructuredKind, j: usize) -> Result<Self> {
        if j < 2 {
            return Err(Error::InvalidParameter(format!("J = {j} but at least 2 points per axis are needed")));
        }
        let h = 1.0 / (j - 1) as f64;
        let mut vertices = Vec::with_capacity(j * j);
        let mut boundary = Vec::with_capacity(j * j);
        for iy in 0..j {
            for ix in 0..j {
                let (x, y) = (ix as f64 * h, iy as f64 * h);
                let (x, y) = (if ix == j - 1 { 1.0 } else { x }, if iy == j - 1 { 1.0 } else { y });
                let on_boundary = x.abs() <= BOUNDARY_TOLERANCE
                    || (1.0 - x).abs() <= BOUNDARY_TOLERANCE
                    || y.abs() <= BOUNDARY_TOLERANCE
                    || (1.0 - y).abs() <= BOUNDARY_TOLERANCE;
                vertices.push(vec![x, y]);
                boundary.push(on_boundary);
            }
        }
        let id = |ix: usize, iy: usize| iy * j + ix;
        let mut elements = Vec::with_capacity(2 * (j - 1) * (j - 1));
        for iy in 0..j - 1 {
            for ix in 0..j - 1 {
                let (sw, se, ne, nw) = (id(ix, iy), id(ix + 1, iy), id(ix + 1, iy + 1), id(ix, iy + 1));
                match kind {
                    StructuredKind::Mesh45 => {
                        elements.push(vec![sw, se, ne]);
                        elements.push(vec![sw, ne, nw]);
                    }
                    StructuredKind::Mesh135 => {
                        elements.push(vec![sw, se, nw]);
                        elements.push(vec![se, ne, nw]);
                    }
                }
            }
        }
        Self::new(2, vertices, elements, boundary)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    /// Number of interior vertices (unknowns).
    pub fn n_interior(&self) -> usize {
        self.interior_vertices.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn element(&self, k: usize) -> &[usize] {
        &self.cells[k * (self.dim + 1)..(k + 1) * (self.dim + 1)]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Interior ordinal of vertex `v`, or `None` for boundary vertices.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    /// Vertex ids of the interior vertices, indexed by interior ordinal.
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }

    /// Element vertex coordinates.
    pub fn element_points(&self, k: usize) -> Vec<&[f64]> {
        self.element(k).iter().map(|&v| self.vertex(v)).collect()
    }

    /// Signed volume of element `k` (positive after construction).
    pub fn signed_volume(&self, k: usize) -> f64 {
        let p = self.element_points(k);
        match self.dim {
            2 => 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])),
            _ => {
                let e: Vec<[f64; 3]> = (1..4)
                    .map(|i| [p[i][0] - p[0][0], p[i][1] - p[0][1], p[i][2] - p[0][2]])
                    .collect();
                let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
                    - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
                    + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
                det / 6.0
            }
        }
    }

    pub fn element_volume(&self, k: usize) -> f64 {
        self.signed_volume(k).abs()
    }

    /// Largest Euclidean edge length of element `k`.
    pub fn element_diameter(&self, k: usize) -> f64 {
        let p = self.element_points(k);
        let mut h = 0.0_f64;
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                let d2: f64 = p[a].iter().zip(p[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                h = h.max(d2.sqrt());
            }
        }
        h
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements()).map(|k| self.element_volume(k)).sum()
    }

    /// All edges with their incident elements, sorted by vertex pair.
    pub fn edges(&self) -> Vec<EdgePatch> {
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for k in 0..self.n_elements() {
            let el = self.element(k);
            for a in 0..el.len() {
                for b in a + 1..el.len() {
                    let key = (el[a].min(el[b]), el[a].max(el[b]));
                    map.entry(key).or_default().push(k);
                }
            }
        }
        map.into_iter().map(|(vertices, elements)| EdgePatch { vertices, elements }).collect()
    }

    /// Edges whose endpoints are both interior vertices.
    pub fn interior_edges(&self) -> Vec<EdgePatch> {
        self.edges()
            .into_iter()
            .filter(|e| !self.boundary[e.vertices.0] && !self.boundary[e.vertices.1])
            .collect()
    }

    /// Connectivity of interior vertices through interior edges.
    pub fn interior_connectivity(&self) -> InteriorConnectivity {
        let nv = self.n_vertices();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for e in self.interior_edges() {
            adj[e.vertices.0].push(e.vertices.1);
            adj[e.vertices.1].push(e.vertices.0);
        }
        let mut seen = vec![false; nv];
        let mut components = Vec::new();
        for &start in &self.interior_vertices {
            if seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        InteriorConnectivity {
            connected: components.len() <= 1,
            no_interior_vertices: components.is_empty(),
            components,
        }
    }

    /// Parses Triangle `.node`/`.ele` text. Boundary markers are required.
    pub fn import_triangle(node_text: &str, ele_text: &str) -> Result<Self> {
        let mut node_lines = data_lines(node_text);
        let header = node_lines.next().ok_or_else(|| Error::Ingestion("empty .node file".into()))?;
        let h = parse_numbers::<usize>(header, "node header")?;
        if h.len() < 4 {
            return Err(Error::Ingestion(format!(
                ".node header `{header}` must give vertex count, dimension, attributes and markers"
            )));
        }
        let (nv, dim, nattr, nmark) = (h[0], h[1], h[2], h[3]);
        if nattr != 0 {
            return Err(Error::Ingestion("vertex attributes are not supported".into()));
        }
        if nmark == 0 {
            return Err(Error::Ingestion("boundary markers are required in the .node file".into()));
        }
        if dim != 2 && dim != 3 {
            return Err(Error::Ingestion(format!("dimension {dim} not supported")));
        }
        let mut ids = Vec::with_capacity(nv);
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = node_lines.next().ok_or_else(|| Error::Ingestion("truncated .node file".into()))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 1 + dim + 1 {
                return Err(Error::Ingestion(format!("vertex line `{line}` lacks coordinates or marker")));
            }
            let id: usize = t[0].parse().map_err(|_| Error::Ingestion(format!("bad vertex id in `{line}`")))?;
            let xs = t[1..=dim]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Ingestion(format!("bad coordinate in `{line}`"))))
                .collect::<Result<Vec<_>>>()?;
            let marker: i64 =
                t[1 + dim].parse().map_err(|_| Error::Ingestion(format!("bad boundary marker in `{line}`")))?;
            ids.push(id);
            vertices.push(xs);
            boundary.push(marker != 0);
        }
        let base = *ids.first().unwrap_or(&0);
        if base > 1 || ids.iter().enumerate().any(|(i, &id)| id != i + base) {
            return Err(Error::Ingestion("vertex ids must be consecutive from 0 or 1".into()));
        }
        check_duplicates(&vertices)?;

        let mut ele_lines = data_lines(ele_text);
        let header = ele_lines.next().ok_or_else(|| Error::Ingestion("empty .ele file".into()))?;
        let h = parse_numbers::<usize>(header, "ele header")?;
        if h.len() < 2 {
            return Err(Error::Ingestion(format!(".ele header `{header}` is incomplete")));
        }
        let (ne, per) = (h[0], h[1]);
        if per != dim + 1 {
            return Err(Error::Ingestion(format!("{per} nodes per element; only linear simplices are supported")));
        }
        let mut elements = Vec::with_capacity(ne);
        for _ in 0..ne {
            let line = ele_lines.next().ok_or_else(|| Error::Ingestion("truncated .ele file".into()))?;
            let t = parse_numbers::<usize>(line, "element line")?;
            if t.len() < 1 + per {
                return Err(Error::Ingestion(format!("element line `{line}` is incomplete")));
            }
            let el = t[1..=per]
                .iter()
                .map(|&v| v.checked_sub(base).ok_or_else(|| Error::Ingestion(format!("vertex id {v} below base"))))
                .collect::<Result<Vec<_>>>()?;
            elements.push(el);
        }
        Self::new(dim, vertices, elements, boundary)
    }

    /// Triangle `.node` text (0-based, one boundary marker, no attributes).
    pub fn to_node_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} 0 1", self.n_vertices(), self.dim);
        for v in 0..self.n_vertices() {
            let _ = write!(s, "{v}");
            for c in self.vertex(v) {
                let _ = write!(s, " {c:?}");
            }
            let _ = writeln!(s, " {}", u8::from(self.boundary[v]));
        }
        s
    }

    /// Triangle `.ele` text (0-based).
    pub fn to_ele_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} 0", self.n_elements(), self.dim + 1);
        for k in 0..self.n_elements() {
            let _ = write!(s, "{k}");
            for v in self.element(k) {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    /// JSON export with fields `dim`, `vertices`, `elements`, `boundary`.
    pub fn to_json(&self) -> String {
        let m = MeshJson {
            dim: self.dim,
            vertices: (0..self.n_vertices()).map(|v| self.vertex(v).to_vec()).collect(),
            elements: (0..self.n_elements()).map(|k| self.element(k).to_vec()).collect(),
            boundary: self.boundary.clone(),
        };
        serde_json::to_string_pretty(&m).expect("mesh serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MeshJson = serde_json::from_str(text)?;
        Self::new(m.dim, m.vertices, m.elements, m.boundary)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

fn parse_numbers<T: FromStr>(line: &str, what: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| Error::Ingestion(format!("bad {what} `{line}`"))))
        .collect()
}

fn check_duplicates(vertices: &[Vec<f64>]) -> Result<()> {
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a][0].total_cmp(&vertices[b][0]));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if vertices[b][0] - vertices[a][0] > DUPLICATE_TOLERANCE {
                break;
            }
            let close = vertices[a].iter().zip(&vertices[b]).all(|(x, y)| (x - y).abs() <= DUPLICATE_TOLERANCE);
            if close {
                return Err(Error::Ingestion(format!(
                    "vertices {} and {} coincide within {DUPLICATE_TOLERANCE:e}",
                    a.min(b),
                    a.max(b)
                )));
            }
        }
    }
    Ok(())
}
