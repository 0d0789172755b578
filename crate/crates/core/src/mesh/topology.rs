use std::collections::HashMap;

use super::Mesh;
use crate::fem::shape::FACES;

/// Element-to-element connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    face_neighbors: Vec<[Option<usize>; 6]>,
    node_neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn build(mesh: &Mesh) -> Adjacency {
        let n_el = mesh.element_count();
        let mut faces: HashMap<[usize; 4], (usize, usize)> = HashMap::with_capacity(3 * n_el);
        let mut face_neighbors = vec![[None; 6]; n_el];
        for (e, hex) in mesh.elements().iter().enumerate() {
            for (lf, local) in FACES.iter().enumerate() {
                let mut key = local.map(|a| hex[a]);
                key.sort_unstable();
                if let Some((other, of)) = faces.remove(&key) {
                    face_neighbors[e][lf] = Some(other);
                    face_neighbors[other][of] = Some(e);
                } else {
                    faces.insert(key, (e, lf));
                }
            }
        }

        let mut node_elements = vec![Vec::new(); mesh.node_count()];
        for (e, hex) in mesh.elements().iter().enumerate() {
            for &a in hex {
                node_elements[a].push(e);
            }
        }
        let node_neighbors = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, hex)| {
                let mut list: Vec<usize> = hex
                    .iter()
                    .flat_map(|&a| node_elements[a].iter().copied())
                    .filter(|&k| k != e)
                    .collect();
                list.sort_unstable();
                list.dedup();
                list
            })
            .collect();
        Adjacency {
            face_neighbors,
            node_neighbors,
        }
    }

    pub fn element_count(&self) -> usize {
        self.face_neighbors.len()
    }

    /// Neighbour across each local face, `None` on the boundary.
    pub fn face_neighbors(&self, e: usize) -> &[Option<usize>; 6] {
        &self.face_neighbors[e]
    }

    /// All elements sharing at least one node with `e`, ascending.
    pub fn node_neighbors(&self, e: usize) -> &[usize] {
        &self.node_neighbors[e]
    }

    pub fn boundary_faces(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.face_neighbors[e]
            .iter()
            .enumerate()
            .filter_map(|(f, n)| n.is_none().then_some(f))
    }
}
