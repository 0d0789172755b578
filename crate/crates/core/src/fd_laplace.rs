//! Finite-difference Laplacian on element centroids of an unstructured hex mesh.
//!
//! For every element a second-order Taylor expansion around its centroid is
//! written for each stencil point, `Δf_k = A_k · ∂f` with the derivative vector
//! ordered `(∂X, ∂Y, ∂Z, ∂X∂Y, ∂Y∂Z, ∂X∂Z, ∂X², ∂Y², ∂Z²)`. Inverting the
//! increment matrix once gives the weight vector `ℓ = aᵀ A⁻¹`,
//! `a = (0,0,0,0,0,0,1,1,1)`, so that `Δf ≈ ℓ · (f_k - f_e)`.
//!
//! Missing face neighbours are replaced by ghost points, the centroid mirrored
//! across the boundary face. A ghost always carries the owner's value, so its
//! increment vanishes and the zero normal gradient holds discretely.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::shape::FACES;
use crate::mesh::{Adjacency, Mesh};

/// Stencil points per element in the default mode; also the number of
/// unknown derivatives.
pub const STENCIL_SIZE: usize = 9;

/// Reciprocal condition number below which a stencil is rejected.
pub const MIN_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilMode {
    /// Six face neighbours plus the three closest diagonal neighbours.
    #[default]
    NinePoint,
    /// All node-sharing neighbours, least-squares weights.
    AllNeighbors,
}

/// Plane through a boundary face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    pub fn reflect(&self, p: &Vector3<f64>) -> Vector3<f64> {
        p - self.normal * (2.0 * self.signed_distance(p))
    }
}

/// Best-fit plane of a local face of element `e`.
pub fn face_plane(mesh: &Mesh, e: usize, face: usize) -> Result<Plane> {
    let coords = mesh.element_coords(e);
    let p = FACES[face].map(|a| coords[a]);
    let normal = (p[2] - p[0]).cross(&(p[3] - p[1]));
    let scale = (p[2] - p[0]).norm() * (p[3] - p[1]).norm();
    if !(normal.norm() > 1e-12 * scale) || scale == 0.0 {
        return Err(Error::Geometry(format!(
            "degenerate normal on face {face} of element {e}"
        )));
    }
    Ok(Plane {
        point: (p[0] + p[1] + p[2] + p[3]) / 4.0,
        normal: normal.normalize(),
    })
}

/// Reflection of a centroid across a boundary face plane.
pub fn mirror_ghost(centroid: &Vector3<f64>, plane: &Plane) -> Vector3<f64> {
    plane.reflect(centroid)
}

/// Virtual stencil point outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Ghost {
    pub position: Vector3<f64>,
    /// Element whose centroid was mirrored (the owner or one of its neighbours).
    pub source: usize,
    /// Local boundary faces of the owner used for the reflection, in order.
    pub faces: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StencilEntry {
    Element(usize),
    Ghost(Ghost),
}

impl StencilEntry {
    pub fn position(&self, centroids: &[Vector3<f64>]) -> Vector3<f64> {
        match self {
            StencilEntry::Element(k) => centroids[*k],
            StencilEntry::Ghost(g) => g.position,
        }
    }

    pub fn is_ghost(&self) -> bool {
        matches!(self, StencilEntry::Ghost(_))
    }
}

/// Monomial row `(ΔX, ΔY, ΔZ, ΔXΔY, ΔYΔZ, ΔXΔZ, ½ΔX², ½ΔY², ½ΔZ²)`.
pub fn increment_row(d: &Vector3<f64>) -> [f64; 9] {
    [
        d.x,
        d.y,
        d.z,
        d.x * d.y,
        d.y * d.z,
        d.x * d.z,
        0.5 * d.x * d.x,
        0.5 * d.y * d.y,
        0.5 * d.z * d.z,
    ]
}

/// Increment matrix, one row per stencil point relative to `center`.
pub fn assemble_increments(center: &Vector3<f64>, points: &[Vector3<f64>]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(points.len(), 9);
    for (k, p) in points.iter().enumerate() {
        let row = increment_row(&(p - center));
        for (j, v) in row.iter().enumerate() {
            a[(k, j)] = *v;
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("increment matrix is singular (reciprocal condition {rcond:.3e})")]
pub struct SingularStencil {
    pub rcond: f64,
}

/// Column scaling that brings mm and mm² columns to unit size.
fn column_scales(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect()
}

/// Numerical rank of the column-equilibrated matrix.
pub fn increment_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 {
        return 0;
    }
    let scales = column_scales(a);
    let mut s = a.clone();
    for (j, sc) in scales.iter().enumerate() {
        s.column_mut(j).unscale_mut(*sc);
    }
    let sv = s.singular_values();
    let max = sv.max();
    sv.iter().filter(|&&v| v > max * 1e-10).count()
}

/// Laplacian weights `ℓ = aᵀ A⁻¹` for a square increment matrix, or with the
/// least-squares pseudo-inverse when there are more than nine points.
/// Returns the weights and the reciprocal condition number.
pub fn laplace_weights(a: &DMatrix<f64>) -> std::result::Result<(Vec<f64>, f64), SingularStencil> {
    if a.nrows() < 9 || a.ncols() != 9 {
        return Err(SingularStencil { rcond: 0.0 });
    }
    let scales = column_scales(a);
    let mut scaled = a.clone();
    for (j, sc) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*sc);
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let rcond = sv.min() / sv.max();
    if !(rcond >= MIN_RCOND) {
        return Err(SingularStencil { rcond });
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    // ℓᵀ = a_sᵀ V Σ⁻¹ Uᵀ with a_s = D⁻¹ a.
    let mut a_scaled = DVector::zeros(9);
    for j in 6..9 {
        a_scaled[j] = 1.0 / scales[j];
    }
    let mut t = v_t * a_scaled;
    for (k, s) in sv.iter().enumerate() {
        t[k] /= s;
    }
    let weights = u * t;
    Ok((weights.iter().copied().collect(), rcond))
}

/// Cached per-element stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStencil {
    pub element: usize,
    pub entries: Vec<StencilEntry>,
    pub increments: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub rcond: f64,
}

impl NeighborStencil {
    /// Real neighbour ids referenced by this stencil.
    pub fn real_neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().filter_map(|s| match s {
            StencilEntry::Element(k) => Some(*k),
            StencilEntry::Ghost(_) => None,
        })
    }

    pub fn ghost_count(&self) -> usize {
        self.entries.iter().filter(|s| s.is_ghost()).count()
    }

    /// `ℓ · (f_k - f_e)` with ghosts carrying `f_e`.
    pub fn laplacian(&self, f: &[f64]) -> f64 {
        let fe = f[self.element];
        self.entries
            .iter()
            .zip(&self.weights)
            .map(|(entry, w)| match entry {
                StencilEntry::Element(k) => w * (f[*k] - fe),
                StencilEntry::Ghost(_) => 0.0,
            })
            .sum()
    }

    /// `ℓ · (q(x_k) - q(x_e))` for an analytic field, ghosts evaluated at
    /// their own positions instead of mirroring.
    pub fn laplacian_of(&self, centroids: &[Vector3<f64>], q: impl Fn(&Vector3<f64>) -> f64) -> f64 {
        let qe = q(&centroids[self.element]);
        self.entries
            .iter()
            .zip(&self.weights)
            .map(|(entry, w)| w * (q(&entry.position(centroids)) - qe))
            .sum()
    }

    /// `ℓ · 1`.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

struct Candidate {
    entry: StencilEntry,
    position: Vector3<f64>,
    distance: f64,
    order: usize,
}

/// Incremental orthonormal basis used to reject candidate rows that would
/// leave the increment matrix rank deficient.
struct RowBasis {
    scale: f64,
    basis: Vec<DVector<f64>>,
}

impl RowBasis {
    fn scaled_row(&self, d: &Vector3<f64>) -> DVector<f64> {
        let h = self.scale;
        let row = increment_row(&(d / h));
        DVector::from_row_slice(&row)
    }

    /// Relative norm of the part of the row outside the current span.
    fn novelty(&self, d: &Vector3<f64>) -> (f64, DVector<f64>) {
        let v = self.scaled_row(d);
        let norm = v.norm();
        let mut r = v.clone();
        for q in &self.basis {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
        let rel = if norm > 0.0 { r.norm() / norm } else { 0.0 };
        (rel, r)
    }

    fn push(&mut self, residual: DVector<f64>) {
        let n = residual.norm();
        if n > 0.0 {
            self.basis.push(residual / n);
        }
    }
}

fn ghost_candidates(
    e: usize,
    mesh: &Mesh,
    adjacency: &Adjacency,
    centroids: &[Vector3<f64>],
    planes: &[(usize, Plane)],
) -> Vec<(Ghost, Vector3<f64>)> {
    let ce = centroids[e];
    let mut out = Vec::new();
    // double reflections of the owner across two non-parallel boundary faces
    for (i, (fa, pa)) in planes.iter().enumerate() {
        for (fb, pb) in planes.iter().skip(i + 1) {
            if fa / 2 == fb / 2 {
                continue;
            }
            let pos = pb.reflect(&pa.reflect(&ce));
            out.push((
                Ghost {
                    position: pos,
                    source: e,
                    faces: vec![*fa, *fb],
                },
                pos,
            ));
        }
    }
    // reflections of real neighbours across the owner's boundary faces
    for (fa, pa) in planes {
        for k in adjacency.face_neighbors(e).iter().flatten() {
            let pos = pa.reflect(&centroids[*k]);
            out.push((
                Ghost {
                    position: pos,
                    source: *k,
                    faces: vec![*fa],
                },
                pos,
            ));
        }
    }
    let _ = mesh;
    out
}

/// Choose the stencil entries of element `e`.
pub fn select_neighborhood(
    e: usize,
    mesh: &Mesh,
    adjacency: &Adjacency,
    centroids: &[Vector3<f64>],
    mode: StencilMode,
) -> Result<Vec<StencilEntry>> {
    let ce = centroids[e];
    let mut planes = Vec::new();
    let mut entries = Vec::with_capacity(STENCIL_SIZE);
    for (face, neighbor) in adjacency.face_neighbors(e).iter().enumerate() {
        match neighbor {
            Some(k) => entries.push(StencilEntry::Element(*k)),
            None => {
                let plane = face_plane(mesh, e, face)?;
                planes.push((face, plane));
                entries.push(StencilEntry::Ghost(Ghost {
                    position: mirror_ghost(&ce, &plane),
                    source: e,
                    faces: vec![face],
                }));
            }
        }
    }
    let scale = entries
        .iter()
        .map(|s| (s.position(centroids) - ce).norm())
        .sum::<f64>()
        / entries.len() as f64;
    let mut basis = RowBasis {
        scale,
        basis: Vec::new(),
    };
    for s in &entries {
        let (_, r) = basis.novelty(&(s.position(centroids) - ce));
        basis.push(r);
    }

    let face_set: Vec<usize> = adjacency.face_neighbors(e).iter().flatten().copied().collect();
    let mut real: Vec<Candidate> = adjacency
        .node_neighbors(e)
        .iter()
        .filter(|k| !face_set.contains(k))
        .map(|&k| Candidate {
            entry: StencilEntry::Element(k),
            position: centroids[k],
            distance: (centroids[k] - ce).norm(),
            order: k,
        })
        .collect();
    real.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.order.cmp(&b.order)));
    let mut ghosts: Vec<Candidate> = ghost_candidates(e, mesh, adjacency, centroids, &planes)
        .into_iter()
        .enumerate()
        .map(|(i, (g, pos))| Candidate {
            entry: StencilEntry::Ghost(g),
            position: pos,
            distance: (pos - ce).norm(),
            order: i,
        })
        .collect();
    ghosts.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.order.cmp(&b.order)));

    match mode {
        StencilMode::NinePoint => {
            // Closest diagonals first, skipping any that add no new direction;
            // ghosts only fill what real neighbours cannot.
            for tol in [0.1, 1e-6] {
                let mut trial = RowBasis {
                    scale,
                    basis: basis.basis.clone(),
                };
                let mut chosen = Vec::new();
                for cand in real.iter().chain(ghosts.iter()) {
                    if chosen.len() == STENCIL_SIZE - 6 {
                        break;
                    }
                    let (rel, r) = trial.novelty(&(cand.position - ce));
                    if rel >= tol {
                        trial.push(r);
                        chosen.push(cand.entry.clone());
                    }
                }
                if chosen.len() == STENCIL_SIZE - 6 {
                    entries.extend(chosen);
                    return Ok(entries);
                }
            }
            Err(Error::Stencil {
                element: e,
                reason: "fewer than three independent diagonal neighbours".into(),
            })
        }
        StencilMode::AllNeighbors => {
            for cand in &real {
                let (_, r) = basis.novelty(&(cand.position - ce));
                basis.push(r);
                entries.push(cand.entry.clone());
            }
            for cand in &ghosts {
                if basis.basis.len() >= 9 {
                    break;
                }
                let (rel, r) = basis.novelty(&(cand.position - ce));
                if rel >= 1e-6 {
                    basis.push(r);
                    entries.push(cand.entry.clone());
                }
            }
            Ok(entries)
        }
    }
}

impl NeighborStencil {
    pub fn build(
        e: usize,
        mesh: &Mesh,
        adjacency: &Adjacency,
        centroids: &[Vector3<f64>],
        mode: StencilMode,
    ) -> Result<Self> {
        let entries = select_neighborhood(e, mesh, adjacency, centroids, mode)?;
        let points: Vec<_> = entries.iter().map(|s| s.position(centroids)).collect();
        let increments = assemble_increments(&centroids[e], &points);
        let (weights, rcond) = laplace_weights(&increments).map_err(|err| Error::Stencil {
            element: e,
            reason: err.to_string(),
        })?;
        Ok(NeighborStencil {
            element: e,
            entries,
            increments,
            weights,
            rcond,
        })
    }
}

/// Stencils of every element plus the reverse map used to find which
/// indicators a change of `f^k` affects.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSet {
    stencils: Vec<NeighborStencil>,
    dependents: Vec<Vec<usize>>,
}

impl StencilSet {
    pub fn build(mesh: &Mesh, adjacency: &Adjacency, mode: StencilMode) -> Result<Self> {
        let centroids = mesh.centroids();
        let stencils = (0..mesh.element_count())
            .into_par_iter()
            .map(|e| NeighborStencil::build(e, mesh, adjacency, &centroids, mode))
            .collect::<Result<Vec<_>>>()?;
        let mut dependents = vec![Vec::new(); stencils.len()];
        for s in &stencils {
            for k in s.real_neighbors() {
                dependents[k].push(s.element);
            }
        }
        for d in &mut dependents {
            d.sort_unstable();
            d.dedup();
        }
        Ok(StencilSet {
            stencils,
            dependents,
        })
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    pub fn get(&self, e: usize) -> &NeighborStencil {
        &self.stencils[e]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NeighborStencil> {
        self.stencils.iter()
    }

    /// Elements whose stencil references `k` as a real neighbour.
    pub fn dependents(&self, k: usize) -> &[usize] {
        &self.dependents[k]
    }

    pub fn laplacian(&self, e: usize, f: &[f64]) -> f64 {
        self.stencils[e].laplacian(f)
    }
}
