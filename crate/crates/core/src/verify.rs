//! Built-in verification suites, run by `gedamage verify`.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::damage::{update_damage, DamageField, ElementLoading, JacobiConfig};
use crate::error::Result;
use crate::fd_laplace::{StencilMode, StencilSet};
use crate::fem::{mesh_geometry, newton_solve, AssemblyInput, DofMap, LinearSolver, NewtonConfig, NewtonSystem, SparsePattern};
use crate::material::{material_tangent, pk2_stress, psi0, DeformationMeasures, EnergyVariant, MaterialParams};
use crate::mesh::{build_box, build_plate_with_hole, Adjacency, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Worst observed error.
    pub error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn jitter_interior(mesh: &Mesh, amplitude: f64, seed: u64) -> Result<Mesh> {
    let mut boundary = vec![false; mesh.node_count()];
    for set in ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"] {
        for &n in mesh.node_set(set).unwrap_or(&[]) {
            boundary[n] = true;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = mesh
        .nodes()
        .iter()
        .zip(&boundary)
        .map(|(p, &b)| {
            let d = Vector3::from_fn(|_, _| rng.random_range(-amplitude..amplitude));
            if b {
                *p
            } else {
                p + d
            }
        })
        .collect();
    mesh.with_node_positions(nodes)
}

/// Stencils reproduce the Laplacian of random quadratics.
pub fn quadratic_laplacian() -> Result<CheckResult> {
    let meshes = [
        jitter_interior(&build_box([5.0; 3], [5, 5, 5])?, 0.2, 11)?,
        build_plate_with_hole(100.0, 50.0, 10.0, 1)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for mesh in &meshes {
        let stencils = StencilSet::build(mesh, &Adjacency::build(mesh), StencilMode::NinePoint)?;
        let centroids = mesh.centroids();
        for _ in 0..4 {
            let c: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let q = |x: &Vector3<f64>| {
                c[0] + c[1] * x.x + c[2] * x.y + c[3] * x.z
                    + c[4] * x.x * x.x + c[5] * x.y * x.y + c[6] * x.z * x.z
                    + c[7] * x.x * x.y + c[8] * x.y * x.z + c[9] * x.x * x.z
            };
            let exact = 2.0 * (c[4] + c[5] + c[6]);
            for s in stencils.iter() {
                let got = s.laplacian_of(&centroids, q);
                worst = worst.max((got - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    Ok(CheckResult {
        name: "quadratic-laplacian",
        error: worst,
        tolerance: 1e-8,
    })
}

fn sym_unit(i: usize, j: usize) -> Matrix3<f64> {
    let mut e = Matrix3::zeros();
    e[(i, j)] = 0.5;
    e[(j, i)] += 0.5;
    e
}

fn random_stretch(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.3..0.3))
}

/// `S` against central differences of `Ψ` in `C`, and `ℂ` against
/// central differences of `S`.
pub fn stress_finite_difference() -> Result<[CheckResult; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let (mut s_err, mut c_err): (f64, f64) = (0.0, 0.0);
    for variant in [EnergyVariant::StressFreeLogCoefficient, EnergyVariant::PaperLogCoefficient] {
        let params = MaterialParams::new(500.0, 0.3, 5.0, 100.0, 0.95, 1e-8, variant)?;
        for _ in 0..20 {
            let f_mat = random_stretch(&mut rng);
            if f_mat.determinant() < 0.3 {
                continue;
            }
            let f = rng.random_range(0.1..1.0);
            let c = f_mat.transpose() * f_mat;
            let m = DeformationMeasures::from_right_cauchy_green(c);
            let s = pk2_stress(&m, f, &params)?;
            let tangent = material_tangent(&m, f, &params)?;
            let at = |dc: Matrix3<f64>| DeformationMeasures::from_right_cauchy_green(c + dc);
            let s_scale = s.abs().max().max(1.0);
            let mut c_scale: f64 = 1.0;
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            c_scale = c_scale.max(tangent.get(i, j, k, l).abs());
                        }
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let e = sym_unit(i, j) * h;
                    let dpsi = f * (psi0(&at(e), &params)? - psi0(&at(-e), &params)?) / (2.0 * h);
                    s_err = s_err.max((2.0 * dpsi - s[(i, j)]).abs() / s_scale);
                    let ds = (pk2_stress(&at(e), f, &params)? - pk2_stress(&at(-e), f, &params)?) / (2.0 * h);
                    for k in 0..3 {
                        for l in 0..3 {
                            let fd = 2.0 * ds[(k, l)];
                            c_err = c_err.max((fd - tangent.get(k, l, i, j)).abs() / c_scale);
                        }
                    }
                }
            }
        }
    }
    Ok([
        CheckResult {
            name: "stress-fd",
            error: s_err,
            tolerance: 1e-6,
        },
        CheckResult {
            name: "tangent-fd",
            error: c_err,
            tolerance: 1e-5,
        },
    ])
}

/// Affine boundary displacement on a distorted mesh gives the affine field
/// at the interior nodes.
pub fn patch_test() -> Result<CheckResult> {
    let mesh = jitter_interior(&build_box([2.0; 3], [4, 4, 4])?, 0.1, 7)?;
    let params = MaterialParams::plate_with_hole(0.0);
    let g = Matrix3::new(0.04, 0.01, -0.02, 0.015, -0.03, 0.01, 0.0, 0.02, 0.05);
    let affine = |x: &Vector3<f64>| g * x;

    let mut constrained = Vec::new();
    let mut on_boundary = vec![false; mesh.node_count()];
    for set in ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"] {
        for &n in mesh.node_set(set).unwrap_or(&[]) {
            on_boundary[n] = true;
        }
    }
    for (n, &b) in on_boundary.iter().enumerate() {
        if b {
            constrained.extend([3 * n, 3 * n + 1, 3 * n + 2]);
        }
    }
    let dofs = DofMap::new(mesh.node_count(), &constrained)?;
    let pattern = SparsePattern::new(&mesh, &dofs);
    let geometry = mesh_geometry(&mesh)?;
    let damage = vec![1.0; mesh.element_count()];
    let eroded = vec![false; mesh.element_count()];
    let system = NewtonSystem {
        input: AssemblyInput {
            mesh: &mesh,
            geometry: &geometry,
            params: &params,
            damage: &damage,
            eroded: &eroded,
        },
        dofs: &dofs,
        pattern: &pattern,
        external: None,
    };
    let mut prescribed = vec![0.0; 3 * mesh.node_count()];
    for (n, x) in mesh.nodes().iter().enumerate() {
        let v = affine(x);
        prescribed[3 * n..3 * n + 3].copy_from_slice(v.as_slice());
    }
    let mut u = vec![0.0; prescribed.len()];
    let mut solver = LinearSolver::new(&pattern)?;
    newton_solve(&system, &mut u, &prescribed, &NewtonConfig::default(), &mut solver)?;
    let scale = prescribed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = u
        .iter()
        .zip(&prescribed)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / scale;
    Ok(CheckResult {
        name: "patch-test",
        error: err,
        tolerance: 1e-8,
    })
}

/// A uniform energy field on a box reaches `f = r/Ψ̄` everywhere.
pub fn homogeneous_damage() -> Result<CheckResult> {
    let mesh = build_box([3.0; 3], [3, 3, 3])?;
    let stencils = StencilSet::build(&mesh, &Adjacency::build(&mesh), StencilMode::NinePoint)?;
    let n = mesh.element_count();
    let det = vec![1.05; n];
    let mut worst: f64 = 0.0;
    for psi in [7.5, 20.0, 60.0] {
        let params = MaterialParams::plate_with_hole(0.0);
        let exact = (params.dissipation / psi).max(params.min_damage_function());
        let psi_field = vec![psi; n];
        let mut field = DamageField::undamaged(n);
        update_damage(
            &mut field,
            &ElementLoading {
                psi_bar: &psi_field,
                det_f_bar: &det,
            },
            &stencils,
            &params,
            &JacobiConfig::default(),
        )?;
        for f in &field.f {
            worst = worst.max((f - exact).abs());
        }
    }
    Ok(CheckResult {
        name: "homogeneous-damage",
        error: worst,
        tolerance: 1e-12,
    })
}

/// Every suite in order.
pub fn run_all() -> Result<Vec<CheckResult>> {
    let mut out = vec![quadratic_laplacian()?];
    out.extend(stress_finite_difference()?);
    out.push(patch_test()?);
    out.push(homogeneous_damage()?);
    Ok(out)
}
