//! Total-Lagrangian hexahedron: internal forces, consistent tangent and
//! volume averages at frozen damage.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::shape::{gauss_hex, jacobian, shape_eval};
use crate::error::{Error, Result};
use crate::material::{material_tangent, pk2_stress, psi0, DeformationMeasures, MaterialParams, VOIGT};
use crate::mesh::Mesh;

pub type ElementVector = SVector<f64, 24>;
pub type ElementMatrix = SMatrix<f64, 24, 24>;

/// Reference-configuration data at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub values: [f64; 8],
    /// `∂N_a/∂X`.
    pub grads: [Vector3<f64>; 8],
    /// `det J · w`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub points: Vec<QuadPoint>,
    pub volume: f64,
}

impl ElementGeometry {
    pub fn new(coords: &[Vector3<f64>; 8], order: usize) -> Result<Self> {
        let mut points = Vec::with_capacity(order * order * order);
        for (xi, w) in gauss_hex(order) {
            let s = shape_eval(xi);
            let jac = jacobian(coords, &s.gradients);
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(Error::Geometry(format!(
                    "non-positive reference Jacobian {det:.3e}"
                )));
            }
            let inv_t = jac.try_inverse().expect("positive determinant").transpose();
            let grads = s.gradients.map(|g| inv_t * g);
            points.push(QuadPoint {
                values: s.values,
                grads,
                weight: det * w,
            });
        }
        let volume = points.iter().map(|p| p.weight).sum();
        Ok(ElementGeometry { points, volume })
    }
}

/// Quadrature data for every element of the mesh (2×2×2 Gauss).
pub fn mesh_geometry(mesh: &Mesh) -> Result<Vec<ElementGeometry>> {
    use rayon::prelude::*;
    (0..mesh.element_count())
        .into_par_iter()
        .map(|e| {
            ElementGeometry::new(&mesh.element_coords(e), 2).map_err(|err| match err {
                Error::Geometry(msg) => Error::Geometry(format!("element {e}: {msg}")),
                other => other,
            })
        })
        .collect()
}

/// `F = I + Σ u_a ⊗ ∇N_a`.
pub fn deformation_gradient(qp: &QuadPoint, u: &[Vector3<f64>; 8]) -> Matrix3<f64> {
    let mut f = Matrix3::identity();
    for a in 0..8 {
        f += u[a] * qp.grads[a].transpose();
    }
    f
}

/// Strain-displacement operator `δE = B δu` (engineering shear in Voigt order).
fn b_matrix(qp: &QuadPoint, f: &Matrix3<f64>) -> SMatrix<f64, 6, 24> {
    let mut b = SMatrix::<f64, 6, 24>::zeros();
    for a in 0..8 {
        let g = &qp.grads[a];
        for k in 0..3 {
            let col = 3 * a + k;
            for (p, &(i, j)) in VOIGT.iter().enumerate() {
                b[(p, col)] = if i == j {
                    f[(k, i)] * g[i]
                } else {
                    f[(k, i)] * g[j] + f[(k, j)] * g[i]
                };
            }
        }
    }
    b
}

fn stress_voigt(s: &Matrix3<f64>) -> SVector<f64, 6> {
    SVector::<f64, 6>::from_fn(|p, _| {
        let (i, j) = VOIGT[p];
        s[(i, j)]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementResponse {
    /// Internal force vector, node-major `(a, direction)`.
    pub residual: ElementVector,
    pub stiffness: Option<Box<ElementMatrix>>,
}

/// Internal forces and, if requested, the consistent tangent of one element
/// at damage function value `f`.
///
/// An eroded element carries no stress and only the diagonal stiffness
/// `s_crit`; a non-positive `det F` anywhere else is an error.
pub fn element_response(
    geo: &ElementGeometry,
    u: &[Vector3<f64>; 8],
    f: f64,
    eroded: bool,
    params: &MaterialParams,
    with_stiffness: bool,
) -> Result<ElementResponse> {
    if eroded {
        return Ok(ElementResponse {
            residual: ElementVector::zeros(),
            stiffness: with_stiffness
                .then(|| Box::new(ElementMatrix::identity() * params.critical_stiffness)),
        });
    }
    let mut residual = ElementVector::zeros();
    let mut k = with_stiffness.then(|| Box::new(ElementMatrix::zeros()));
    for qp in &geo.points {
        let fmat = deformation_gradient(qp, u);
        let m = DeformationMeasures::from_deformation_gradient(fmat);
        let s = pk2_stress(&m, f, params)?;
        let b = b_matrix(qp, &fmat);
        residual += b.transpose() * stress_voigt(&s) * qp.weight;
        if let Some(k) = k.as_mut() {
            let c = material_tangent(&m, f, params)?;
            let cb = c.0 * b;
            **k += b.transpose() * cb * qp.weight;
            for a in 0..8 {
                let sa = s * qp.grads[a];
                for bn in 0..8 {
                    let g = sa.dot(&qp.grads[bn]) * qp.weight;
                    for d in 0..3 {
                        k[(3 * a + d, 3 * bn + d)] += g;
                    }
                }
            }
        }
    }
    Ok(ElementResponse {
        residual,
        stiffness: k,
    })
}

/// `∫ N_a b dV` for a constant body force per unit reference volume.
pub fn body_force_vector(geo: &ElementGeometry, b: &Vector3<f64>) -> ElementVector {
    let mut out = ElementVector::zeros();
    for qp in &geo.points {
        for a in 0..8 {
            for d in 0..3 {
                out[3 * a + d] += qp.values[a] * b[d] * qp.weight;
            }
        }
    }
    out
}

/// Volume-averaged deformation gradient and energy density of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementAverages {
    pub f_bar: Matrix3<f64>,
    pub det_f_bar: f64,
    /// `Ψ̄₀`, left at zero for eroded elements.
    pub psi_bar: f64,
}

pub fn element_averages(
    geo: &ElementGeometry,
    u: &[Vector3<f64>; 8],
    eroded: bool,
    params: &MaterialParams,
) -> Result<ElementAverages> {
    let mut f_bar = Matrix3::zeros();
    let mut psi_bar = 0.0;
    for qp in &geo.points {
        let fmat = deformation_gradient(qp, u);
        f_bar += fmat * qp.weight;
        if !eroded {
            let m = DeformationMeasures::from_deformation_gradient(fmat);
            psi_bar += psi0(&m, params)? * qp.weight;
        }
    }
    f_bar /= geo.volume;
    psi_bar /= geo.volume;
    Ok(ElementAverages {
        f_bar,
        det_f_bar: f_bar.determinant(),
        psi_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box;

    fn unit_geometry() -> ElementGeometry {
        let mesh = build_box([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        ElementGeometry::new(&mesh.element_coords(0), 2).unwrap()
    }

    fn affine(coords: &[Vector3<f64>; 8], g: &Matrix3<f64>) -> [Vector3<f64>; 8] {
        coords.map(|x| g * x)
    }

    fn params() -> MaterialParams {
        MaterialParams::plate_with_hole(100.0)
    }

    #[test]
    fn geometry_volume_of_unit_cube() {
        let g = unit_geometry();
        assert!((g.volume - 1.0).abs() < 1e-14);
        assert_eq!(g.points.len(), 8);
    }

    #[test]
    fn rigid_translation_is_stress_free() {
        let g = unit_geometry();
        let u = [Vector3::new(0.3, -0.2, 1.1); 8];
        let r = element_response(&g, &u, 1.0, false, &params(), false).unwrap();
        assert!(r.residual.norm() < 1e-12);
    }

    #[test]
    fn rigid_rotation_is_stress_free() {
        let mesh = build_box([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let coords = mesh.element_coords(0);
        let g = ElementGeometry::new(&coords, 2).unwrap();
        let rot = nalgebra::Rotation3::from_euler_angles(0.4, -0.3, 1.2).into_inner();
        let u = affine(&coords, &(rot - Matrix3::identity()));
        let r = element_response(&g, &u, 1.0, false, &params(), false).unwrap();
        assert!(r.residual.norm() < 1e-10);
        let avg = element_averages(&g, &u, false, &params()).unwrap();
        assert!(avg.psi_bar.abs() < 1e-12);
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let mesh = build_box([1.0, 2.0, 1.5], [1, 1, 1]).unwrap();
        let coords = mesh.element_coords(0);
        let g = ElementGeometry::new(&coords, 2).unwrap();
        let p = params();
        let mut u = [Vector3::zeros(); 8];
        for (a, x) in coords.iter().enumerate() {
            u[a] = Vector3::new(0.1 * x.y + 0.05 * a as f64 * 0.1, -0.07 * x.z, 0.12 * x.x * x.y);
        }
        let base = element_response(&g, &u, 0.7, false, &p, true).unwrap();
        let k = base.stiffness.unwrap();
        let h = 1e-6;
        let mut max_err: f64 = 0.0;
        for col in 0..24 {
            let mut up = u;
            let mut um = u;
            up[col / 3][col % 3] += h;
            um[col / 3][col % 3] -= h;
            let rp = element_response(&g, &up, 0.7, false, &p, false).unwrap().residual;
            let rm = element_response(&g, &um, 0.7, false, &p, false).unwrap().residual;
            let fd = (rp - rm) / (2.0 * h);
            max_err = max_err.max((fd - k.column(col)).amax());
        }
        assert!(max_err < 1e-5 * k.amax(), "tangent error {max_err}");
        assert!((*k - k.transpose()).amax() < 1e-9 * k.amax());
    }

    #[test]
    fn eroded_element_has_penalty_stiffness_only() {
        let g = unit_geometry();
        let p = params();
        let u = [Vector3::new(0.0, 0.0, -5.0); 8];
        let r = element_response(&g, &u, 0.05, true, &p, true).unwrap();
        assert_eq!(r.residual, ElementVector::zeros());
        assert_eq!(*r.stiffness.unwrap(), ElementMatrix::identity() * 1e-8);
    }

    #[test]
    fn inverted_element_is_reported() {
        let mesh = build_box([1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let coords = mesh.element_coords(0);
        let g = ElementGeometry::new(&coords, 2).unwrap();
        let u = affine(&coords, &Matrix3::from_diagonal(&Vector3::new(-2.0, 0.0, 0.0)));
        let err = element_response(&g, &u, 1.0, false, &params(), false).unwrap_err();
        assert_eq!(err.tag(), "inverted_element");
    }

    #[test]
    fn averages_of_homogeneous_stretch() {
        let mesh = build_box([2.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let coords = mesh.element_coords(0);
        let g = ElementGeometry::new(&coords, 2).unwrap();
        let grad = Matrix3::from_diagonal(&Vector3::new(0.1, 0.0, 0.0));
        let u = affine(&coords, &grad);
        let avg = element_averages(&g, &u, false, &params()).unwrap();
        let f = Matrix3::identity() + grad;
        assert!((avg.f_bar - f).amax() < 1e-14);
        assert!((avg.det_f_bar - 1.1).abs() < 1e-14);
        let m = DeformationMeasures::from_deformation_gradient(f);
        assert!((avg.psi_bar - psi0(&m, &params()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn body_force_totals_match_volume() {
        let mesh = build_box([2.0, 3.0, 0.5], [1, 1, 1]).unwrap();
        let g = ElementGeometry::new(&mesh.element_coords(0), 2).unwrap();
        let v = body_force_vector(&g, &Vector3::new(0.0, 0.0, -2.0));
        let total: f64 = (0..8).map(|a| v[3 * a + 2]).sum();
        assert!((total + 6.0).abs() < 1e-12);
    }
}
