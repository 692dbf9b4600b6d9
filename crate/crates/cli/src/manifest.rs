//! The JSON record written at the end of every run.

use mimetic_swe::mesh::io::write_native;
use mimetic_swe::output::write_atomic;
use mimetic_swe::scenarios::{Metric, ScenarioConfig};
use mimetic_swe::Mesh;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct MeshRecord {
    pub name: String,
    pub vertices: usize,
    pub edges: usize,
    pub cells: usize,
    /// SHA-256 of the mesh in the native text format.
    pub sha256: String,
}

impl MeshRecord {
    pub fn new(name: impl Into<String>, mesh: &Mesh) -> Self {
        Self {
            name: name.into(),
            vertices: mesh.n_vertices(),
            edges: mesh.n_edges(),
            cells: mesh.n_cells(),
            sha256: checksum(write_native(mesh).as_bytes()),
        }
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct MetricRecord {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub parameters: String,
    pub meshes: Vec<MeshRecord>,
    pub code_version: String,
    pub threads: usize,
    pub metrics: Vec<MetricRecord>,
    pub failed: Vec<String>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command_line: std::env::args().collect(),
            command: command.into(),
            config: BTreeMap::new(),
            parameters: String::new(),
            meshes: Vec::new(),
            code_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            threads: rayon::current_num_threads(),
            metrics: Vec::new(),
            failed: Vec::new(),
            passed: true,
        }
    }

    pub fn set_config(&mut self, c: &ScenarioConfig) {
        self.config = c.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    }

    pub fn add_metrics(&mut self, metrics: &[Metric]) {
        for m in metrics {
            let passed = m.passed();
            if !passed {
                self.failed.push(m.name.clone());
                self.passed = false;
            }
            self.metrics.push(MetricRecord { name: m.name.clone(), value: m.value, threshold: m.threshold.to_string(), passed });
        }
    }

    /// Serialises the manifest and renames it into place.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        write_atomic(path, text.as_bytes()).map_err(std::io::Error::other)
    }
}
