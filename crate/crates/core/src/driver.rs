//! Staggered load stepping: equilibrium at frozen damage, then the damage
//! update at frozen displacements.

use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::damage::{update_damage, DamageField, ElementLoading, JacobiConfig};
use crate::error::{Error, Result};
use crate::fd_laplace::{StencilMode, StencilSet};
use crate::fem::assembly::{body_force_load, node_displacements, traction_load};
use crate::fem::{
    element_averages, mesh_geometry, newton_solve, reaction_force, AssemblyInput, DofMap, ElementGeometry,
    LinearSolver, NewtonConfig, NewtonSystem, SparsePattern,
};
use crate::material::MaterialParams;
use crate::mesh::{Adjacency, Mesh};

/// Dirichlet condition on the intersection of one or more node sets:
/// `u_direction = scale · u*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub node_sets: Vec<String>,
    pub direction: usize,
    pub scale: f64,
}

impl Constraint {
    pub fn fixed(set: &str, direction: usize) -> Self {
        Constraint {
            node_sets: vec![set.to_string()],
            direction,
            scale: 0.0,
        }
    }

    pub fn driven(set: &str, direction: usize) -> Self {
        Constraint {
            node_sets: vec![set.to_string()],
            direction,
            scale: 1.0,
        }
    }

    pub fn nodes(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        let mut names = self.node_sets.iter();
        let first = names
            .next()
            .ok_or_else(|| Error::validation("constraint", "no node set given"))?;
        let mut nodes = mesh
            .node_set(first)
            .ok_or_else(|| Error::validation("constraint", format!("unknown node set `{first}`")))?
            .to_vec();
        for name in names {
            let other = mesh
                .node_set(name)
                .ok_or_else(|| Error::validation("constraint", format!("unknown node set `{name}`")))?;
            nodes.retain(|n| other.contains(n));
        }
        Ok(nodes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub constraints: Vec<Constraint>,
    pub reaction_set: String,
    pub reaction_direction: usize,
}

impl BoundaryConditions {
    /// Quarter plate: symmetry planes, top edge pulled in Y, one line fixed in Z.
    pub fn plate_with_hole() -> Self {
        BoundaryConditions {
            constraints: vec![
                Constraint::fixed("symmetry_x", 0),
                Constraint::fixed("symmetry_y", 1),
                Constraint::fixed("load_top", 0),
                Constraint::driven("load_top", 1),
                Constraint {
                    node_sets: vec!["load_top".into(), "zmin".into()],
                    direction: 2,
                    scale: 0.0,
                },
            ],
            reaction_set: "load_top".into(),
            reaction_direction: 1,
        }
    }

    /// Half U-strip: symmetry plane at the bend, free leg edge driven in X.
    pub fn u_shape() -> Self {
        BoundaryConditions {
            constraints: vec![
                Constraint::fixed("symmetry_x", 0),
                Constraint::driven("load_edge", 0),
                Constraint::fixed("load_edge", 1),
                Constraint::fixed("load_edge", 2),
            ],
            reaction_set: "load_edge".into(),
            reaction_direction: 0,
        }
    }

    /// Box in uniaxial tension along X with three symmetry planes.
    pub fn box_tension() -> Self {
        BoundaryConditions {
            constraints: vec![
                Constraint::fixed("xmin", 0),
                Constraint::fixed("ymin", 1),
                Constraint::fixed("zmin", 2),
                Constraint::driven("xmax", 0),
            ],
            reaction_set: "xmax".into(),
            reaction_direction: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traction {
    pub node_set: String,
    /// Dead load per reference area at full load (MPa).
    pub vector: [f64; 3],
}

/// Uniform incremental loading up to `target`, with an optional final
/// partial increment and extra steps held at the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProgram {
    /// Final prescribed displacement (mm).
    pub target: f64,
    /// Displacement increment per step (mm).
    pub increment: f64,
    /// Body force at full load (N/mm³).
    #[serde(default)]
    pub body_force: [f64; 3],
    #[serde(default)]
    pub traction: Option<Traction>,
    /// Steps appended at the target displacement.
    #[serde(default)]
    pub hold_steps: usize,
}

impl LoadProgram {
    pub fn new(target: f64, increment: f64) -> Result<Self> {
        let p = LoadProgram {
            target,
            increment,
            body_force: [0.0; 3],
            traction: None,
            hold_steps: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.increment > 0.0 && self.increment.is_finite()) {
            return Err(Error::validation("load.increment", format!("must be > 0, got {}", self.increment)));
        }
        if !(self.target >= 0.0 && self.target.is_finite()) {
            return Err(Error::validation("load.target", format!("must be >= 0, got {}", self.target)));
        }
        Ok(())
    }

    /// Steps needed to reach the target, not counting hold steps.
    pub fn ramp_steps(&self) -> usize {
        let n = self.target / self.increment;
        let r = n.round();
        if (n - r).abs() <= 1e-9 * n.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }

    pub fn step_count(&self) -> usize {
        self.ramp_steps() + self.hold_steps
    }

    /// Prescribed displacement after step `n` (1-based).
    pub fn displacement(&self, n: usize) -> f64 {
        if n >= self.ramp_steps() {
            self.target
        } else {
            n as f64 * self.increment
        }
    }

    /// Ramp factor for body forces and tractions.
    pub fn load_factor(&self, n: usize) -> f64 {
        if self.target > 0.0 {
            self.displacement(n) / self.target
        } else {
            1.0
        }
    }
}

/// Summary of one load step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub u_star: f64,
    pub reaction: f64,
    pub max_damage: f64,
    pub eroded_count: usize,
    pub newton_iterations: usize,
    pub jacobi_sweeps: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub newton: NewtonConfig,
    pub jacobi: JacobiConfig,
    pub stencil_mode: StencilMode,
    /// Snapshot every k-th step (0 disables periodic snapshots); the final
    /// step always gets one.
    pub snapshot_every: usize,
    /// False runs the elastic reference with the damage update switched off.
    pub damage_enabled: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            newton: NewtonConfig::default(),
            jacobi: JacobiConfig::default(),
            stencil_mode: StencilMode::NinePoint,
            snapshot_every: 10,
            damage_enabled: true,
        }
    }
}

/// State handed to the observer after each converged step.
pub struct StepView<'a> {
    pub record: &'a StepRecord,
    pub mesh: &'a Mesh,
    /// Nodal displacements, `3 * node + direction`.
    pub displacement: &'a [f64],
    /// Damage state after this step's update.
    pub damage: &'a DamageField,
    /// Damage function used in this step's equilibrium solve.
    pub damage_used: &'a [f64],
    pub eroded_used: &'a [bool],
    /// Dissipated energy of the step (N mm).
    pub dissipation: f64,
    pub snapshot: bool,
    pub last: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub records: Vec<StepRecord>,
    pub dissipation: Vec<f64>,
    pub displacement: Vec<f64>,
    pub damage: DamageField,
    /// Steps where the sweep cap stopped the damage update.
    pub capped_steps: Vec<usize>,
}

impl SimulationResult {
    /// `Σ r Δα Ω` over all steps (N mm).
    pub fn total_dissipation(&self) -> f64 {
        self.dissipation.iter().sum()
    }

    /// Work of the reaction force along the prescribed displacement,
    /// trapezoidal rule starting from the unloaded state (N mm).
    pub fn external_work(&self) -> f64 {
        external_work(&self.records)
    }
}

pub fn external_work(records: &[StepRecord]) -> f64 {
    let mut work = 0.0;
    let (mut u0, mut f0) = (0.0, 0.0);
    for r in records {
        work += 0.5 * (r.reaction + f0) * (r.u_star - u0);
        u0 = r.u_star;
        f0 = r.reaction;
    }
    work
}

/// Elastic energy `Σ f Ψ̄₀ Ω` stored in the non-eroded elements (N mm).
pub fn stored_energy(prepared: &Prepared<'_>, displacement: &[f64], damage: &DamageField) -> Result<f64> {
    let mesh = &prepared.problem.mesh;
    let mut total = 0.0;
    for e in 0..mesh.element_count() {
        if damage.eroded[e] {
            continue;
        }
        let avg = element_averages(
            &prepared.geometry[e],
            &node_displacements(displacement, &mesh.elements()[e]),
            false,
            &prepared.problem.params,
        )
        .map_err(|err| err.in_element(e))?;
        total += damage.f[e] * avg.psi_bar * prepared.geometry[e].volume;
    }
    Ok(total)
}

/// Mesh, material and boundary conditions of one analysis.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub bcs: BoundaryConditions,
}

/// Precomputed data reused across steps and runs on the same problem.
pub struct Prepared<'a> {
    pub problem: &'a Problem,
    pub geometry: Vec<ElementGeometry>,
    pub stencils: StencilSet,
    dofs: DofMap,
    pattern: SparsePattern,
    constraints: Vec<(usize, f64)>,
    reaction_nodes: Vec<usize>,
}

impl<'a> Prepared<'a> {
    pub fn new(problem: &'a Problem, mode: StencilMode) -> Result<Self> {
        let mesh = &problem.mesh;
        let geometry = mesh_geometry(mesh)?;
        let stencils = StencilSet::build(mesh, &Adjacency::build(mesh), mode)?;
        let mut scale = vec![None; 3 * mesh.node_count()];
        for c in &problem.bcs.constraints {
            if c.direction > 2 {
                return Err(Error::validation("constraint.direction", format!("{} is not 0, 1 or 2", c.direction)));
            }
            for n in c.nodes(mesh)? {
                scale[3 * n + c.direction] = Some(c.scale);
            }
        }
        let constraints: Vec<(usize, f64)> = scale
            .iter()
            .enumerate()
            .filter_map(|(d, s)| s.map(|s| (d, s)))
            .collect();
        let fixed: Vec<usize> = constraints.iter().map(|c| c.0).collect();
        let dofs = DofMap::new(mesh.node_count(), &fixed)?;
        let pattern = SparsePattern::new(mesh, &dofs);
        let reaction_nodes = mesh
            .node_set(&problem.bcs.reaction_set)
            .ok_or_else(|| {
                Error::validation("reaction set", format!("unknown node set `{}`", problem.bcs.reaction_set))
            })?
            .to_vec();
        Ok(Prepared {
            problem,
            geometry,
            stencils,
            dofs,
            pattern,
            constraints,
            reaction_nodes,
        })
    }

    pub fn free_dof_count(&self) -> usize {
        self.dofs.free_count()
    }
}

/// Run the damage simulation.
pub fn run_simulation(
    prepared: &Prepared<'_>,
    program: &LoadProgram,
    options: &RunOptions,
    observer: &mut dyn FnMut(&StepView<'_>) -> Result<()>,
) -> Result<SimulationResult> {
    program.validate()?;
    let problem = prepared.problem;
    let mesh = &problem.mesh;
    let params = &problem.params;
    let n_el = mesh.element_count();

    let unit_body = body_force_load(mesh, &prepared.geometry, &Vector3::from(program.body_force));
    let unit_traction = match &program.traction {
        Some(t) => Some(traction_load(mesh, &t.node_set, &Vector3::from(t.vector))?),
        None => None,
    };
    let has_external = program.body_force != [0.0; 3] || unit_traction.is_some();

    let mut solver = LinearSolver::new(&prepared.pattern)?;
    let mut u = vec![0.0; 3 * mesh.node_count()];
    let mut damage = DamageField::undamaged(n_el);
    let mut records = Vec::new();
    let mut dissipation = Vec::new();
    let mut capped_steps = Vec::new();
    let total = program.step_count();

    for step in 1..=total {
        let start = Instant::now();
        let u_star = program.displacement(step);
        let mut prescribed = vec![0.0; u.len()];
        for &(d, s) in &prepared.constraints {
            prescribed[d] = s * u_star;
        }
        let external = has_external.then(|| {
            let lf = program.load_factor(step);
            let mut ext: Vec<f64> = unit_body.iter().map(|v| v * lf).collect();
            if let Some(t) = &unit_traction {
                for (e, v) in ext.iter_mut().zip(t) {
                    *e += v * lf;
                }
            }
            ext
        });

        let f_used = damage.f.clone();
        let eroded_used = damage.eroded.clone();
        let system = NewtonSystem {
            input: AssemblyInput {
                mesh,
                geometry: &prepared.geometry,
                params,
                damage: &f_used,
                eroded: &eroded_used,
            },
            dofs: &prepared.dofs,
            pattern: &prepared.pattern,
            external: external.as_deref(),
        };
        let outcome = newton_solve(&system, &mut u, &prescribed, &options.newton, &mut solver).map_err(|e| {
            match e {
                Error::NewtonDiverged { iterations, residual, .. } => Error::NewtonDiverged {
                    step,
                    iterations,
                    residual,
                },
                other => other.at_step(step),
            }
        })?;
        let reaction = reaction_force(&outcome.residual, &prepared.reaction_nodes, problem.bcs.reaction_direction);

        // element averages feed the damage update
        let averages = {
            use rayon::prelude::*;
            (0..n_el)
                .into_par_iter()
                .map(|e| {
                    element_averages(
                        &prepared.geometry[e],
                        &node_displacements(&u, &mesh.elements()[e]),
                        eroded_used[e],
                        params,
                    )
                    .map_err(|err| err.in_element(e).at_step(step))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let mut sweeps = 0;
        let mut step_dissipation = 0.0;
        if options.damage_enabled {
            let psi: Vec<f64> = averages.iter().map(|a| a.psi_bar).collect();
            let det: Vec<f64> = averages.iter().map(|a| a.det_f_bar).collect();
            let alpha_old: Vec<f64> = (0..n_el).map(|e| damage.alpha(e)).collect();
            let out = update_damage(
                &mut damage,
                &ElementLoading {
                    psi_bar: &psi,
                    det_f_bar: &det,
                },
                &prepared.stencils,
                params,
                &options.jacobi,
            )?;
            sweeps = out.sweeps;
            if out.capped {
                capped_steps.push(step);
            }
            step_dissipation = (0..n_el)
                .map(|e| params.dissipation * (damage.alpha(e) - alpha_old[e]) * prepared.geometry[e].volume)
                .sum();
        }

        let record = StepRecord {
            step,
            u_star,
            reaction,
            max_damage: damage.max_damage(),
            eroded_count: damage.eroded_count(),
            newton_iterations: outcome.iterations,
            jacobi_sweeps: sweeps,
            wall_time: start.elapsed().as_secs_f64(),
        };
        log::debug!(
            "step {step}: u* = {u_star:.4} F = {reaction:.6e} max D = {:.4} eroded = {} newton = {} sweeps = {sweeps}",
            record.max_damage,
            record.eroded_count,
            record.newton_iterations
        );
        let last = step == total;
        let snapshot = last || (options.snapshot_every > 0 && step % options.snapshot_every == 0);
        observer(&StepView {
            record: &record,
            mesh,
            displacement: &u,
            damage: &damage,
            damage_used: &f_used,
            eroded_used: &eroded_used,
            dissipation: step_dissipation,
            snapshot,
            last,
        })?;
        records.push(record);
        dissipation.push(step_dissipation);
    }

    Ok(SimulationResult {
        records,
        dissipation,
        displacement: u,
        damage,
        capped_steps,
    })
}

/// Same pipeline with the damage update switched off.
pub fn run_elastic_reference(
    prepared: &Prepared<'_>,
    program: &LoadProgram,
    options: &RunOptions,
    observer: &mut dyn FnMut(&StepView<'_>) -> Result<()>,
) -> Result<SimulationResult> {
    let opts = RunOptions {
        damage_enabled: false,
        ..options.clone()
    };
    run_simulation(prepared, program, &opts, observer)
}

/// Observer that ignores every step.
pub fn no_observer(_: &StepView<'_>) -> Result<()> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box;

    fn box_problem(beta: f64) -> Problem {
        Problem {
            mesh: build_box([4.0, 2.0, 2.0], [4, 2, 2]).unwrap(),
            params: MaterialParams::plate_with_hole(beta),
            bcs: BoundaryConditions::box_tension(),
        }
    }

    #[test]
    fn load_program_steps() {
        let p = LoadProgram::new(25.0, 0.025).unwrap();
        assert_eq!(p.step_count(), 1000);
        assert_eq!(p.displacement(1000), 25.0);
        let q = LoadProgram::new(1.0, 0.3).unwrap();
        assert_eq!(q.step_count(), 4);
        assert!((q.displacement(3) - 0.9).abs() < 1e-15);
        assert_eq!(q.displacement(4), 1.0);
        assert!(LoadProgram::new(1.0, 0.0).is_err());
    }

    #[test]
    fn below_onset_matches_elastic_run_exactly() {
        let problem = box_problem(100.0);
        let prep = Prepared::new(&problem, StencilMode::NinePoint).unwrap();
        let program = LoadProgram::new(0.1, 0.02).unwrap();
        let opts = RunOptions::default();
        let a = run_simulation(&prep, &program, &opts, &mut no_observer).unwrap();
        let b = run_elastic_reference(&prep, &program, &opts, &mut no_observer).unwrap();
        assert!(a.damage.f.iter().all(|f| *f == 1.0));
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.reaction, y.reaction);
        }
    }

    #[test]
    fn damaged_run_is_deterministic_and_dissipative() {
        let problem = box_problem(10.0);
        let prep = Prepared::new(&problem, StencilMode::NinePoint).unwrap();
        let program = LoadProgram::new(2.0, 0.1).unwrap();
        let opts = RunOptions::default();
        let mut f_prev = vec![1.0; problem.mesh.element_count()];
        let mut obs = |v: &StepView<'_>| {
            assert!(v.dissipation >= 0.0);
            for (a, b) in v.damage.f.iter().zip(&f_prev) {
                assert!(a <= b);
            }
            f_prev = v.damage.f.clone();
            Ok(())
        };
        let a = run_simulation(&prep, &program, &opts, &mut obs).unwrap();
        let b = run_simulation(&prep, &program, &opts, &mut no_observer).unwrap();
        assert!(a.damage.max_damage() > 0.0);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.reaction, x.max_damage), (y.reaction, y.max_damage));
        }
    }

    #[test]
    fn elastic_work_equals_stored_energy() {
        let problem = box_problem(10.0);
        let prep = Prepared::new(&problem, StencilMode::NinePoint).unwrap();
        let program = LoadProgram::new(0.2, 0.005).unwrap();
        let r = run_elastic_reference(&prep, &program, &RunOptions::default(), &mut no_observer).unwrap();
        let stored = stored_energy(&prep, &r.displacement, &r.damage).unwrap();
        assert!((r.external_work() - stored).abs() < 1e-3 * stored);
    }

    #[test]
    fn hold_steps_repeat_state() {
        let problem = box_problem(10.0);
        let prep = Prepared::new(&problem, StencilMode::NinePoint).unwrap();
        let mut program = LoadProgram::new(1.0, 0.25).unwrap();
        program.hold_steps = 2;
        let r = run_simulation(&prep, &program, &RunOptions::default(), &mut no_observer).unwrap();
        assert_eq!(r.records.len(), 6);
        let last = &r.records[5];
        let prev = &r.records[4];
        assert_eq!(last.u_star, prev.u_star);
        assert_eq!(last.max_damage, prev.max_damage);
        assert_eq!(last.jacobi_sweeps, 1);
        assert!((last.reaction - prev.reaction).abs() <= 1e-9 * prev.reaction.abs().max(1.0));
    }

    #[test]
    fn unknown_sets_are_rejected() {
        let mut problem = box_problem(10.0);
        problem.bcs.reaction_set = "nowhere".into();
        assert!(Prepared::new(&problem, StencilMode::NinePoint).is_err());
    }
}
