//! Newton-Raphson equilibrium iteration at frozen damage.

use serde::{Deserialize, Serialize};

use super::assembly::{assemble, AssemblyInput, DofMap, SparsePattern};
use super::solver::LinearSolver;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    /// Backtrack when a full step increases the residual norm.
    pub line_search: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            max_iter: 25,
            line_search: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    /// Number of linear solves.
    pub iterations: usize,
    /// Norm of the first right-hand side, including the predictor term.
    pub initial_residual: f64,
    pub residual_norm: f64,
    /// `F_int - F_ext` on every dof at the converged state.
    pub residual: Vec<f64>,
}

/// Everything the iteration needs besides the displacement vector.
pub struct NewtonSystem<'a> {
    pub input: AssemblyInput<'a>,
    pub dofs: &'a DofMap,
    pub pattern: &'a SparsePattern,
    /// External nodal loads on every dof at the current load level.
    pub external: Option<&'a [f64]>,
}

impl NewtonSystem<'_> {
    fn free_residual(&self, internal: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let full: Vec<f64> = match self.external {
            Some(ext) => internal.iter().zip(ext).map(|(a, b)| a - b).collect(),
            None => internal.to_vec(),
        };
        let free = self.dofs.free_dofs().iter().map(|&d| full[d]).collect();
        (free, full)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Number of step halvings tried when an iterate inverts an element.
const MAX_BACKTRACK: usize = 8;

/// Solve `R(u) = 0` on the free dofs with the constrained dofs moved to
/// `prescribed` (full-length vector; only constrained entries are read).
pub fn newton_solve(
    system: &NewtonSystem<'_>,
    u: &mut [f64],
    prescribed: &[f64],
    cfg: &NewtonConfig,
    solver: &mut LinearSolver,
) -> Result<NewtonOutcome> {
    let dofs = system.dofs;
    let mut du_c = vec![0.0; dofs.dof_count()];
    let mut any_increment = false;
    for &d in dofs.constrained_dofs() {
        du_c[d] = prescribed[d] - u[d];
        any_increment |= du_c[d] != 0.0;
    }

    // Predictor: linearise about the previous state with the new constraint values.
    let first = assemble(
        &system.input,
        dofs,
        Some(system.pattern),
        u,
        any_increment.then_some(&du_c[..]),
    )?;
    let (r_free, _) = system.free_residual(&first.internal);
    let mut rhs: Vec<f64> = match &first.lifted {
        Some(l) => r_free.iter().zip(l).map(|(r, k)| -(r + k)).collect(),
        None => r_free.iter().map(|r| -r).collect(),
    };
    let r0 = norm(&rhs);
    let tol = cfg.tol_abs.max(cfg.tol_rel * r0);
    for &d in dofs.constrained_dofs() {
        u[d] = prescribed[d];
    }
    if !r0.is_finite() {
        return Err(Error::NewtonDiverged {
            step: 0,
            iterations: 0,
            residual: r0,
        });
    }
    if r0 <= cfg.tol_abs {
        let state = assemble(&system.input, dofs, None, u, None)?;
        let (free, full) = system.free_residual(&state.internal);
        let rn = norm(&free);
        if rn <= tol {
            return Ok(NewtonOutcome {
                iterations: 0,
                initial_residual: r0,
                residual_norm: rn,
                residual: full,
            });
        }
        rhs = free.iter().map(|r| -r).collect();
    }

    let mut values = first.stiffness.expect("pattern given");
    let mut iterations = 0;
    let mut current_norm = r0;
    loop {
        let delta = solver.solve(&values, &rhs)?;
        iterations += 1;
        let base: Vec<f64> = dofs.free_dofs().iter().map(|&d| u[d]).collect();
        let mut alpha = 1.0;
        let mut tries = 0;
        let state = loop {
            for (k, &d) in dofs.free_dofs().iter().enumerate() {
                u[d] = base[k] + alpha * delta[k];
            }
            match assemble(&system.input, dofs, Some(system.pattern), u, None) {
                Ok(s) => {
                    let (free, _) = system.free_residual(&s.internal);
                    let rn = norm(&free);
                    let worse = !(rn.is_finite()) || (cfg.line_search && rn > current_norm);
                    if worse && tries < MAX_BACKTRACK && iterations > 1 {
                        alpha *= 0.5;
                        tries += 1;
                        continue;
                    }
                    break s;
                }
                Err(err @ Error::InvertedElement { .. }) => {
                    if tries >= MAX_BACKTRACK {
                        return Err(err);
                    }
                    alpha *= 0.5;
                    tries += 1;
                }
                Err(other) => return Err(other),
            }
        };
        let (free, full) = system.free_residual(&state.internal);
        current_norm = norm(&free);
        log::trace!("newton iteration {iterations}: |R| = {current_norm:.3e}");
        if current_norm <= tol {
            return Ok(NewtonOutcome {
                iterations,
                initial_residual: r0,
                residual_norm: current_norm,
                residual: full,
            });
        }
        if iterations >= cfg.max_iter || !current_norm.is_finite() {
            return Err(Error::NewtonDiverged {
                step: 0,
                iterations,
                residual: current_norm,
            });
        }
        values = state.stiffness.expect("pattern given");
        rhs = free.iter().map(|r| -r).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::element::mesh_geometry;
    use crate::material::MaterialParams;
    use crate::mesh::build_box;

    fn run(stretch: f64, beta_f: f64) -> (NewtonOutcome, Vec<f64>, crate::mesh::Mesh) {
        let mesh = build_box([2.0, 1.0, 1.0], [2, 1, 1]).unwrap();
        let geo = mesh_geometry(&mesh).unwrap();
        let params = MaterialParams::plate_with_hole(0.0);
        let f = vec![beta_f; mesh.element_count()];
        let er = vec![false; mesh.element_count()];
        let mut fixed = Vec::new();
        for &n in mesh.node_set("xmin").unwrap() {
            fixed.push(3 * n);
        }
        for &n in mesh.node_set("xmax").unwrap() {
            fixed.push(3 * n);
        }
        for &n in mesh.node_set("ymin").unwrap() {
            fixed.push(3 * n + 1);
        }
        for &n in mesh.node_set("zmin").unwrap() {
            fixed.push(3 * n + 2);
        }
        fixed.sort_unstable();
        fixed.dedup();
        let dofs = DofMap::new(mesh.node_count(), &fixed).unwrap();
        let pattern = SparsePattern::new(&mesh, &dofs);
        let mut solver = LinearSolver::new(&pattern).unwrap();
        let system = NewtonSystem {
            input: AssemblyInput {
                mesh: &mesh,
                geometry: &geo,
                params: &params,
                damage: &f,
                eroded: &er,
            },
            dofs: &dofs,
            pattern: &pattern,
            external: None,
        };
        let mut u = vec![0.0; dofs.dof_count()];
        let mut target = vec![0.0; dofs.dof_count()];
        for &n in mesh.node_set("xmax").unwrap() {
            target[3 * n] = stretch * 2.0;
        }
        let out = newton_solve(&system, &mut u, &target, &NewtonConfig::default(), &mut solver).unwrap();
        (out, u, mesh)
    }

    #[test]
    fn zero_load_needs_no_iteration() {
        let (out, u, _) = run(0.0, 1.0);
        assert_eq!(out.iterations, 0);
        assert!(u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniaxial_stretch_converges_quadratically() {
        let (out, u, mesh) = run(0.1, 1.0);
        assert!(out.iterations <= 8, "{} iterations", out.iterations);
        assert!(out.residual_norm <= 1e-8 * out.initial_residual + 1e-10);
        // homogeneous state: lateral contraction is uniform
        let p = &mesh.nodes()[mesh.node_set("xmax").unwrap()[0]];
        let _ = p;
        let lateral: Vec<f64> = mesh
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, x)| (x.y - 1.0).abs() < 1e-12)
            .map(|(n, _)| u[3 * n + 1])
            .collect();
        for v in &lateral {
            assert!((v - lateral[0]).abs() < 1e-9);
        }
        assert!(lateral[0] < 0.0);
    }

    #[test]
    fn damage_scales_reaction_linearly() {
        let (a, _, mesh) = run(0.05, 1.0);
        let (b, _, _) = run(0.05, 0.5);
        let set = mesh.node_set("xmax").unwrap();
        let ra = crate::fem::assembly::reaction_force(&a.residual, set, 0);
        let rb = crate::fem::assembly::reaction_force(&b.residual, set, 0);
        assert!(ra > 0.0);
        assert!((rb - 0.5 * ra).abs() < 1e-8 * ra);
    }
}
