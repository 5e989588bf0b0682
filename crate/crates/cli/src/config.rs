//! Validated run configuration, echoed into every output file.

use std::path::{Path, PathBuf};

use eigenfem::assembly::MassKind;
use eigenfem::coefficients::{catalog, ProblemCoefficients};
use eigenfem::{SimplicialMesh, StructuredKind};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeshSource {
    Structured { generator: String, j: Vec<usize> },
    Import { node: PathBuf, ele: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    /// Catalog name or path of a JSON descriptor.
    pub problem: String,
    pub mesh: MeshSource,
    pub k: usize,
    pub mass: MassKind,
    pub tol: f64,
    pub reference: Option<f64>,
    pub output_dir: PathBuf,
}

/// Raw flag values before validation.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub command: String,
    pub problem: String,
    pub mesh: String,
    pub j: Option<String>,
    pub node: Option<PathBuf>,
    pub ele: Option<PathBuf>,
    pub k: usize,
    pub mass: String,
    pub tol: f64,
    pub reference: Option<f64>,
    pub out: PathBuf,
}

fn parse_j_list(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("--J expects integers, got `{}`", t.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn validate(raw: RawConfig) -> Result<Self, CliError> {
        let mass: MassKind = raw.mass.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        if !(raw.tol > 0.0 && raw.tol < 1.0) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1), got {}", raw.tol)));
        }
        if raw.k == 0 {
            return Err(CliError::Config("--k must be at least 1".into()));
        }
        if raw.reference.is_some_and(|r| !r.is_finite()) {
            return Err(CliError::Config("--ref must be finite".into()));
        }
        let mesh = match raw.mesh.as_str() {
            "import" => {
                let (Some(node), Some(ele)) = (raw.node, raw.ele) else {
                    return Err(CliError::Config("--mesh import needs --node and --ele".into()));
                };
                if raw.command == "converge" {
                    return Err(CliError::Config("converge needs a structured mesh family".into()));
                }
                MeshSource::Import { node, ele }
            }
            kind => {
                let generator: StructuredKind = kind.parse().map_err(|e| CliError::Config(format!("{e}")))?;
                let j = parse_j_list(raw.j.as_deref().ok_or_else(|| CliError::Config("--J is required".into()))?)?;
                if let Some(&bad) = j.iter().find(|&&j| j < 2) {
                    return Err(CliError::Config(format!("--J must be at least 2, got {bad}")));
                }
                if raw.command == "converge" {
                    if j.len() < 3 {
                        return Err(CliError::Config("converge needs at least three J values".into()));
                    }
                    if j.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(CliError::Config("J values must be strictly increasing".into()));
                    }
                } else if j.len() != 1 {
                    return Err(CliError::Config(format!("{} takes a single J", raw.command)));
                }
                MeshSource::Structured { generator: generator.to_string(), j }
            }
        };
        let config = Self {
            command: raw.command,
            problem: raw.problem,
            mesh,
            k: raw.k,
            mass,
            tol: raw.tol,
            reference: raw.reference,
            output_dir: raw.out,
        };
        // fail early on an unknown problem
        config.coefficients()?;
        Ok(config)
    }

    pub fn coefficients(&self) -> Result<ProblemCoefficients, CliError> {
        let path = Path::new(&self.problem);
        if path.extension().is_some_and(|e| e == "json") || path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read problem file {}: {e}", path.display())))?;
            return ProblemCoefficients::from_json(&text).map_err(|e| CliError::Config(format!("{e}")));
        }
        catalog(&self.problem).map_err(|e| CliError::Config(format!("{e}")))
    }

    /// Meshes in `J` order (one for analyze/solve).
    pub fn meshes(&self) -> Result<Vec<(usize, SimplicialMesh)>, CliError> {
        match &self.mesh {
            MeshSource::Structured { generator, j } => {
                let kind: StructuredKind = generator.parse().map_err(|e| CliError::Config(format!("{e}")))?;
                j.iter()
                    .map(|&j| {
                        SimplicialMesh::generate_structured(kind, j)
                            .map(|m| (j, m))
                            .map_err(|e| CliError::Config(format!("{e}")))
                    })
                    .collect()
            }
            MeshSource::Import { node, ele } => {
                let read = |p: &Path| {
                    std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))
                };
                let mesh = SimplicialMesh::import_triangle(&read(node)?, &read(ele)?)
                    .map_err(|e| CliError::Config(format!("{e}")))?;
                Ok(vec![(0, mesh)])
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
