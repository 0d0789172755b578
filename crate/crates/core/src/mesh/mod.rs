//! Hexahedral meshes, benchmark geometries and topology queries.

mod generate;
mod topology;

pub use generate::{build_box, build_plate_with_hole, build_u_shape, plate_divisions};
pub use topology::Adjacency;

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::fem::shape::{gauss_hex, jacobian, shape_eval, NODE_XI};

pub type Hex = [usize; 8];

/// Unstructured 8-node hexahedral mesh in the reference configuration (mm).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Vector3<f64>>,
    elements: Vec<Hex>,
    node_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Validates connectivity and corner Jacobians.
    pub fn new(
        nodes: Vec<Vector3<f64>>,
        elements: Vec<Hex>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let mesh = Mesh {
            nodes,
            elements,
            node_sets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (e, hex) in self.elements.iter().enumerate() {
            for (i, &a) in hex.iter().enumerate() {
                if a >= n {
                    return Err(Error::Geometry(format!(
                        "element {e} references node {a} (only {n} nodes)"
                    )));
                }
                if hex[..i].contains(&a) {
                    return Err(Error::Geometry(format!(
                        "element {e} references node {a} twice"
                    )));
                }
            }
            let det = self.min_corner_jacobian(e);
            if det <= 0.0 {
                return Err(Error::Geometry(format!(
                    "element {e} has non-positive corner Jacobian {det:.3e}"
                )));
            }
        }
        for (name, set) in &self.node_sets {
            if let Some(&bad) = set.iter().find(|&&a| a >= n) {
                return Err(Error::Geometry(format!(
                    "node set `{name}` references node {bad}"
                )));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Hex] {
        &self.elements
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_sets(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.node_sets
    }

    pub fn node_set(&self, name: &str) -> Option<&[usize]> {
        self.node_sets.get(name).map(Vec::as_slice)
    }

    pub fn element_coords(&self, e: usize) -> [Vector3<f64>; 8] {
        let hex = &self.elements[e];
        std::array::from_fn(|a| self.nodes[hex[a]])
    }

    /// Jacobian determinants of the trilinear map at the eight corners.
    pub fn corner_jacobians(&self, e: usize) -> [f64; 8] {
        let coords = self.element_coords(e);
        std::array::from_fn(|k| {
            let s = shape_eval(Vector3::from(NODE_XI[k]));
            jacobian(&coords, &s.gradients).determinant()
        })
    }

    pub fn min_corner_jacobian(&self, e: usize) -> f64 {
        self.corner_jacobians(e)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Reference volume of one element by 2x2x2 Gauss quadrature.
    pub fn element_volume(&self, e: usize) -> f64 {
        let coords = self.element_coords(e);
        gauss_hex(2)
            .into_iter()
            .map(|(xi, w)| w * jacobian(&coords, &shape_eval(xi).gradients).determinant())
            .sum()
    }

    pub fn element_volumes(&self) -> Vec<f64> {
        (0..self.element_count())
            .map(|e| self.element_volume(e))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.element_volumes().iter().sum()
    }

    /// Centre of the trilinear map: the mean of the eight corners.
    pub fn centroid(&self, e: usize) -> Vector3<f64> {
        self.element_coords(e).iter().sum::<Vector3<f64>>() / 8.0
    }

    pub fn centroids(&self) -> Vec<Vector3<f64>> {
        (0..self.element_count()).map(|e| self.centroid(e)).collect()
    }

    /// Rigid translation of all nodes.
    pub fn translated(&self, offset: Vector3<f64>) -> Mesh {
        let mut out = self.clone();
        for p in &mut out.nodes {
            *p += offset;
        }
        out
    }

    /// Moves single nodes, keeping topology. Fails if an element inverts.
    pub fn with_node_positions(&self, nodes: Vec<Vector3<f64>>) -> Result<Mesh> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::validation("nodes", "node count mismatch"));
        }
        Mesh::new(nodes, self.elements.clone(), self.node_sets.clone())
    }

    /// Nodes of `a` that are also in `b`.
    pub fn node_set_intersection(&self, a: &str, b: &str) -> Option<Vec<usize>> {
        let sa = self.node_sets.get(a)?;
        let sb = self.node_sets.get(b)?;
        Some(sa.iter().copied().filter(|n| sb.contains(n)).collect())
    }
}
