//! Global degree-of-freedom numbering, sparse pattern and assembly.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::element::{body_force_vector, element_response, ElementGeometry, ElementVector};
use super::shape::{gauss_1d, shape_eval, FACES, NODE_XI};
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::mesh::Mesh;

/// Sentinel for a constrained dof in index tables.
const FIXED: usize = usize::MAX;

/// Three displacement dofs per node, `3 * node + direction`, split into free
/// and constrained sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free_index: Vec<usize>,
    free: Vec<usize>,
    constrained: Vec<usize>,
}

impl DofMap {
    pub fn new(node_count: usize, constrained: &[usize]) -> Result<Self> {
        let n = 3 * node_count;
        let mut is_fixed = vec![false; n];
        for &d in constrained {
            if d >= n {
                return Err(Error::validation("constrained dof", format!("{d} out of range")));
            }
            is_fixed[d] = true;
        }
        let mut free_index = vec![FIXED; n];
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        for d in 0..n {
            if is_fixed[d] {
                fixed.push(d);
            } else {
                free_index[d] = free.len();
                free.push(d);
            }
        }
        Ok(DofMap {
            free_index,
            free,
            constrained: fixed,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.free_index.len()
    }

    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    /// Position among the free dofs, `None` if constrained.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.free_index[dof];
        (i != FIXED).then_some(i)
    }
}

pub fn element_dofs(nodes: &[usize; 8]) -> [usize; 24] {
    std::array::from_fn(|i| 3 * nodes[i / 3] + i % 3)
}

/// Compressed-column pattern of the free-free block, full symmetric storage,
/// with a per-element scatter table into the value array.
#[derive(Debug, Clone)]
pub struct SparsePattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    scatter: Vec<[usize; 576]>,
}

impl SparsePattern {
    pub fn new(mesh: &Mesh, dofs: &DofMap) -> Self {
        let n = dofs.free_count();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for el in mesh.elements() {
            let free: Vec<usize> = element_dofs(el)
                .iter()
                .filter_map(|&d| dofs.free_index(d))
                .collect();
            for &j in &free {
                cols[j].extend_from_slice(&free);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in &mut cols {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let scatter = mesh
            .elements()
            .par_iter()
            .map(|el| {
                let local = element_dofs(el).map(|d| dofs.free_index(d));
                let mut table = [FIXED; 576];
                for (j, cj) in local.iter().enumerate() {
                    let Some(cj) = cj else { continue };
                    let rows = &row_idx[col_ptr[*cj]..col_ptr[cj + 1]];
                    for (i, ri) in local.iter().enumerate() {
                        if let Some(ri) = ri {
                            let pos = rows.binary_search(ri).expect("row in pattern");
                            table[24 * j + i] = col_ptr[*cj] + pos;
                        }
                    }
                }
                table
            })
            .collect();
        SparsePattern {
            n,
            col_ptr,
            row_idx,
            scatter,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Value of entry `(row, col)` of a matrix stored on this pattern.
    pub fn entry(&self, values: &[f64], row: usize, col: usize) -> f64 {
        let rows = &self.row_idx[self.col_ptr[col]..self.col_ptr[col + 1]];
        match rows.binary_search(&row) {
            Ok(p) => values[self.col_ptr[col] + p],
            Err(_) => 0.0,
        }
    }

    /// `y = K x` for a matrix stored on this pattern.
    pub fn mul_vec(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += values[p] * x[j];
            }
        }
        y
    }
}

/// Per-element state entering the assembly.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyInput<'a> {
    pub mesh: &'a Mesh,
    pub geometry: &'a [ElementGeometry],
    pub params: &'a MaterialParams,
    pub damage: &'a [f64],
    pub eroded: &'a [bool],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    /// Internal force for every dof (`3 * node_count`).
    pub internal: Vec<f64>,
    /// Free-free tangent values on the pattern, if requested.
    pub stiffness: Option<Vec<f64>>,
    /// `K_fc Δu_c` on the free dofs, if a constrained increment was given.
    pub lifted: Option<Vec<f64>>,
}

pub fn node_displacements(u: &[f64], nodes: &[usize; 8]) -> [Vector3<f64>; 8] {
    nodes.map(|n| Vector3::new(u[3 * n], u[3 * n + 1], u[3 * n + 2]))
}

/// Assemble internal forces and optionally the tangent at displacement `u`.
///
/// `constrained_increment` (full-length, zero on free dofs) adds the coupling
/// `K_fc Δu_c` needed for a consistent predictor.
pub fn assemble(
    input: &AssemblyInput<'_>,
    dofs: &DofMap,
    pattern: Option<&SparsePattern>,
    u: &[f64],
    constrained_increment: Option<&[f64]>,
) -> Result<Assembled> {
    let mesh = input.mesh;
    let need_k = pattern.is_some() || constrained_increment.is_some();
    let responses = (0..mesh.element_count())
        .into_par_iter()
        .map(|e| {
            let nodes = &mesh.elements()[e];
            element_response(
                &input.geometry[e],
                &node_displacements(u, nodes),
                input.damage[e],
                input.eroded[e],
                input.params,
                need_k,
            )
            .map_err(|err| err.in_element(e))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut internal = vec![0.0; dofs.dof_count()];
    let mut values = pattern.map(|p| vec![0.0; p.nnz()]);
    let mut lifted = constrained_increment.map(|_| vec![0.0; dofs.free_count()]);
    for (e, r) in responses.iter().enumerate() {
        let ed = element_dofs(&mesh.elements()[e]);
        for (i, d) in ed.iter().enumerate() {
            internal[*d] += r.residual[i];
        }
        let Some(k) = r.stiffness.as_ref() else { continue };
        if let (Some(p), Some(vals)) = (pattern, values.as_mut()) {
            let table = &p.scatter[e];
            for j in 0..24 {
                for i in 0..24 {
                    let pos = table[24 * j + i];
                    if pos != FIXED {
                        vals[pos] += k[(i, j)];
                    }
                }
            }
        }
        if let (Some(du), Some(out)) = (constrained_increment, lifted.as_mut()) {
            for (j, dj) in ed.iter().enumerate() {
                if dofs.free_index(*dj).is_some() || du[*dj] == 0.0 {
                    continue;
                }
                for (i, di) in ed.iter().enumerate() {
                    if let Some(fi) = dofs.free_index(*di) {
                        out[fi] += k[(i, j)] * du[*dj];
                    }
                }
            }
        }
    }
    Ok(Assembled {
        internal,
        stiffness: values,
        lifted,
    })
}

/// Nodal loads of a unit body force per reference volume.
pub fn body_force_load(mesh: &Mesh, geometry: &[ElementGeometry], b: &Vector3<f64>) -> Vec<f64> {
    let mut out = vec![0.0; 3 * mesh.node_count()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let v: ElementVector = body_force_vector(&geometry[e], b);
        for (i, d) in element_dofs(el).iter().enumerate() {
            out[*d] += v[i];
        }
    }
    out
}

/// Nodal loads of a dead traction `t` (force per reference area) on every
/// element face whose four nodes belong to `node_set`.
pub fn traction_load(mesh: &Mesh, node_set: &str, t: &Vector3<f64>) -> Result<Vec<f64>> {
    let set = mesh
        .node_set(node_set)
        .ok_or_else(|| Error::validation("traction node set", format!("unknown set `{node_set}`")))?;
    let mut member = vec![false; mesh.node_count()];
    for &n in set {
        member[n] = true;
    }
    let (pts, wts) = gauss_1d(2);
    let mut out = vec![0.0; 3 * mesh.node_count()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let coords = mesh.element_coords(e);
        for face in FACES {
            if !face.iter().all(|&a| member[el[a]]) {
                continue;
            }
            // the face lies on a constant natural coordinate; find which
            let axis = (0..3)
                .find(|&k| face.iter().all(|&a| NODE_XI[a][k] == NODE_XI[face[0]][k]))
                .expect("hex face has a fixed coordinate");
            let fixed = NODE_XI[face[0]][axis];
            let (s_ax, t_ax) = ((axis + 1) % 3, (axis + 2) % 3);
            for (p, wp) in pts.iter().zip(&wts) {
                for (q, wq) in pts.iter().zip(&wts) {
                    let mut xi = Vector3::zeros();
                    xi[axis] = fixed;
                    xi[s_ax] = *p;
                    xi[t_ax] = *q;
                    let s = shape_eval(xi);
                    let mut ds = Vector3::zeros();
                    let mut dt = Vector3::zeros();
                    for a in 0..8 {
                        ds += coords[a] * s.gradients[a][s_ax];
                        dt += coords[a] * s.gradients[a][t_ax];
                    }
                    let area = ds.cross(&dt).norm() * wp * wq;
                    for &a in &face {
                        for d in 0..3 {
                            out[3 * el[a] + d] += s.values[a] * t[d] * area;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `Σ_n R[3n + direction]` over a node set.
pub fn reaction_force(residual: &[f64], nodes: &[usize], direction: usize) -> f64 {
    nodes.iter().map(|&n| residual[3 * n + direction]).sum()
}
