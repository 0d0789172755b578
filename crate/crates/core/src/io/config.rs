//! JSON run configuration. Units are mm, N and MPa throughout; `beta` is in N.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::damage::JacobiConfig;
use crate::driver::{BoundaryConditions, LoadProgram, Problem, RunOptions};
use crate::error::{Error, Result};
use crate::fd_laplace::StencilMode;
use crate::fem::NewtonConfig;
use crate::material::{EnergyVariant, MaterialParams};
use crate::mesh::{build_box, build_plate_with_hole, build_u_shape, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Box {
        dimensions: [f64; 3],
        divisions: [usize; 3],
    },
    PlateWithHole {
        #[serde(default = "plate_length")]
        length: f64,
        #[serde(default = "plate_radius")]
        radius: f64,
        #[serde(default = "ten")]
        thickness: f64,
        #[serde(default = "one")]
        refinement: usize,
    },
    UShape {
        #[serde(default = "plate_radius")]
        radius: f64,
        #[serde(default = "ten")]
        width: f64,
        #[serde(default = "ten")]
        thickness: f64,
        #[serde(default = "plate_radius")]
        leg_length: f64,
        #[serde(default = "one")]
        refinement: usize,
    },
}

fn plate_length() -> f64 {
    100.0
}
fn plate_radius() -> f64 {
    50.0
}
fn ten() -> f64 {
    10.0
}
fn one() -> usize {
    1
}
fn critical_stiffness() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub dissipation: f64,
    pub beta: f64,
    pub critical_damage: f64,
    #[serde(default = "critical_stiffness")]
    pub critical_stiffness: f64,
    #[serde(default)]
    pub energy_variant: EnergyVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub newton_tol_abs: f64,
    pub newton_tol_rel: f64,
    pub newton_max_iter: usize,
    pub line_search: bool,
    pub jacobi_tolerance: f64,
    pub jacobi_max_sweeps: usize,
    pub jacobi_in_place: bool,
    pub stencil_mode: StencilMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let n = NewtonConfig::default();
        let j = JacobiConfig::default();
        SolverConfig {
            newton_tol_abs: n.tol_abs,
            newton_tol_rel: n.tol_rel,
            newton_max_iter: n.max_iter,
            line_search: n.line_search,
            jacobi_tolerance: j.tolerance,
            jacobi_max_sweeps: j.max_sweeps,
            jacobi_in_place: j.in_place,
            stencil_mode: StencilMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "output".into(),
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub load: LoadProgram,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Run with the damage update disabled.
    #[serde(default)]
    pub elastic_reference: bool,
}

/// Allowed keys of an object and whether each is required.
type Schema = &'static [(&'static str, bool)];

const TOP: Schema = &[
    ("geometry", true),
    ("material", true),
    ("load", true),
    ("solver", false),
    ("output", false),
    ("elastic_reference", false),
];
const BOX: Schema = &[("kind", true), ("dimensions", true), ("divisions", true)];
const PLATE: Schema = &[
    ("kind", true),
    ("length", false),
    ("radius", false),
    ("thickness", false),
    ("refinement", false),
];
const USHAPE: Schema = &[
    ("kind", true),
    ("radius", false),
    ("width", false),
    ("thickness", false),
    ("leg_length", false),
    ("refinement", false),
];
const MATERIAL: Schema = &[
    ("youngs_modulus", true),
    ("poisson_ratio", true),
    ("dissipation", true),
    ("beta", true),
    ("critical_damage", true),
    ("critical_stiffness", false),
    ("energy_variant", false),
];
const LOAD: Schema = &[
    ("target", true),
    ("increment", true),
    ("body_force", false),
    ("traction", false),
    ("hold_steps", false),
];
const TRACTION: Schema = &[("node_set", true), ("vector", true)];
const SOLVER: Schema = &[
    ("newton_tol_abs", false),
    ("newton_tol_rel", false),
    ("newton_max_iter", false),
    ("line_search", false),
    ("jacobi_tolerance", false),
    ("jacobi_max_sweeps", false),
    ("jacobi_in_place", false),
    ("stencil_mode", false),
];
const OUTPUT: Schema = &[("directory", false), ("snapshot_every", false)];

fn config_error(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

struct SchemaCheck {
    missing: Vec<String>,
}

impl SchemaCheck {
    fn object<'a>(&mut self, value: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
        value
            .as_object()
            .ok_or_else(|| config_error(path_or_root(path), "expected an object"))
    }

    fn check(&mut self, obj: &Map<String, Value>, schema: Schema, path: &str) -> Result<()> {
        for key in obj.keys() {
            if !schema.iter().any(|(k, _)| k == key) {
                return Err(config_error(join(path, key), "unknown key"));
            }
        }
        for (key, required) in schema {
            if *required && !obj.contains_key(*key) {
                self.missing.push(join(path, key));
            }
        }
        Ok(())
    }

    /// Required leaves of a whole missing section.
    fn missing_section(&mut self, schema: Schema, path: &str) {
        for (key, required) in schema {
            if *required {
                self.missing.push(join(path, key));
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn path_or_root(path: &str) -> String {
    if path.is_empty() {
        "<root>".into()
    } else {
        path.into()
    }
}

fn structural_check(root: &Value) -> Result<()> {
    let mut c = SchemaCheck { missing: Vec::new() };
    let top = c.object(root, "")?;
    c.check(top, TOP, "")?;
    match top.get("geometry") {
        Some(g) => {
            let g = c.object(g, "geometry")?;
            let schema = match g.get("kind").and_then(Value::as_str) {
                Some("box") => BOX,
                Some("plate_with_hole") => PLATE,
                Some("u_shape") => USHAPE,
                Some(other) => {
                    return Err(config_error(
                        "geometry.kind",
                        format!("unknown geometry `{other}` (expected box, plate_with_hole or u_shape)"),
                    ))
                }
                None if g.contains_key("kind") => return Err(config_error("geometry.kind", "expected a string")),
                None => &[("kind", true)],
            };
            // without a kind only the kind itself can be reported
            if schema.len() == 1 {
                c.missing.push("geometry.kind".into());
            } else {
                c.check(g, schema, "geometry")?;
            }
        }
        None => c.missing_section(&[("kind", true)], "geometry"),
    }
    match top.get("material") {
        Some(m) => {
            let m = c.object(m, "material")?;
            c.check(m, MATERIAL, "material")?;
        }
        None => c.missing_section(MATERIAL, "material"),
    }
    match top.get("load") {
        Some(l) => {
            let l = c.object(l, "load")?;
            c.check(l, LOAD, "load")?;
            if let Some(t) = l.get("traction").filter(|t| !t.is_null()) {
                let t = c.object(t, "load.traction")?;
                c.check(t, TRACTION, "load.traction")?;
            }
        }
        None => c.missing_section(LOAD, "load"),
    }
    if let Some(s) = top.get("solver") {
        let s = c.object(s, "solver")?;
        c.check(s, SOLVER, "solver")?;
    }
    if let Some(o) = top.get("output") {
        let o = c.object(o, "output")?;
        c.check(o, OUTPUT, "output")?;
    }
    if c.missing.is_empty() {
        Ok(())
    } else {
        Err(config_error(
            c.missing.join(", "),
            format!("missing required field{}", if c.missing.len() > 1 { "s" } else { "" }),
        ))
    }
}

fn require(ok: bool, path: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(config_error(path, reason))
    }
}

fn positive(v: f64, path: &str) -> Result<()> {
    require(v > 0.0 && v.is_finite(), path, format!("must be > 0, got {v}"))
}

impl RunConfig {
    /// Range checks on every parameter.
    pub fn validate(&self) -> Result<()> {
        match &self.geometry {
            GeometryConfig::Box { dimensions, divisions } => {
                for (k, d) in dimensions.iter().enumerate() {
                    positive(*d, &format!("geometry.dimensions[{k}]"))?;
                }
                for (k, d) in divisions.iter().enumerate() {
                    require(*d >= 1, &format!("geometry.divisions[{k}]"), "must be >= 1")?;
                }
            }
            GeometryConfig::PlateWithHole {
                length,
                radius,
                thickness,
                refinement,
            } => {
                positive(*length, "geometry.length")?;
                positive(*radius, "geometry.radius")?;
                positive(*thickness, "geometry.thickness")?;
                require(radius < length, "geometry.radius", "must be smaller than geometry.length")?;
                require(*refinement >= 1, "geometry.refinement", "must be >= 1")?;
            }
            GeometryConfig::UShape {
                radius,
                width,
                thickness,
                leg_length,
                refinement,
            } => {
                positive(*radius, "geometry.radius")?;
                positive(*width, "geometry.width")?;
                positive(*thickness, "geometry.thickness")?;
                positive(*leg_length, "geometry.leg_length")?;
                require(width < radius, "geometry.width", "must be smaller than geometry.radius")?;
                require(*refinement >= 1, "geometry.refinement", "must be >= 1")?;
            }
        }
        let m = &self.material;
        positive(m.youngs_modulus, "material.youngs_modulus")?;
        require(
            m.poisson_ratio >= 0.0 && m.poisson_ratio < 0.5,
            "material.poisson_ratio",
            format!("must lie in [0, 0.5), got {}", m.poisson_ratio),
        )?;
        positive(m.dissipation, "material.dissipation")?;
        require(
            m.beta >= 0.0 && m.beta.is_finite(),
            "material.beta",
            format!("must be >= 0, got {}", m.beta),
        )?;
        require(
            m.critical_damage > 0.0 && m.critical_damage < 1.0,
            "material.critical_damage",
            format!("must lie in (0, 1), got {}", m.critical_damage),
        )?;
        positive(m.critical_stiffness, "material.critical_stiffness")?;
        positive(self.load.increment, "load.increment")?;
        require(
            self.load.target >= 0.0 && self.load.target.is_finite(),
            "load.target",
            format!("must be >= 0, got {}", self.load.target),
        )?;
        let s = &self.solver;
        positive(s.newton_tol_abs, "solver.newton_tol_abs")?;
        positive(s.newton_tol_rel, "solver.newton_tol_rel")?;
        require(s.newton_max_iter >= 1, "solver.newton_max_iter", "must be >= 1")?;
        positive(s.jacobi_tolerance, "solver.jacobi_tolerance")?;
        require(s.jacobi_max_sweeps >= 1, "solver.jacobi_max_sweeps", "must be >= 1")?;
        require(!self.output.directory.is_empty(), "output.directory", "must not be empty")?;
        Ok(())
    }

    pub fn material_params(&self) -> Result<MaterialParams> {
        let m = &self.material;
        MaterialParams::new(
            m.youngs_modulus,
            m.poisson_ratio,
            m.dissipation,
            m.beta,
            m.critical_damage,
            m.critical_stiffness,
            m.energy_variant,
        )
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.geometry {
            GeometryConfig::Box { dimensions, divisions } => build_box(*dimensions, *divisions),
            GeometryConfig::PlateWithHole {
                length,
                radius,
                thickness,
                refinement,
            } => build_plate_with_hole(*length, *radius, *thickness, *refinement),
            GeometryConfig::UShape {
                radius,
                width,
                thickness,
                leg_length,
                refinement,
            } => build_u_shape(*radius, *width, *thickness, *leg_length, *refinement),
        }
    }

    pub fn boundary_conditions(&self) -> BoundaryConditions {
        match self.geometry {
            GeometryConfig::Box { .. } => BoundaryConditions::box_tension(),
            GeometryConfig::PlateWithHole { .. } => BoundaryConditions::plate_with_hole(),
            GeometryConfig::UShape { .. } => BoundaryConditions::u_shape(),
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        Ok(Problem {
            mesh: self.build_mesh()?,
            params: self.material_params()?,
            bcs: self.boundary_conditions(),
        })
    }

    pub fn run_options(&self) -> RunOptions {
        let s = &self.solver;
        RunOptions {
            newton: NewtonConfig {
                tol_abs: s.newton_tol_abs,
                tol_rel: s.newton_tol_rel,
                max_iter: s.newton_max_iter,
                line_search: s.line_search,
            },
            jacobi: JacobiConfig {
                tolerance: s.jacobi_tolerance,
                max_sweeps: s.jacobi_max_sweeps,
                in_place: s.jacobi_in_place,
            },
            stencil_mode: s.stencil_mode,
            snapshot_every: self.output.snapshot_every,
            damage_enabled: !self.elastic_reference,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| config_error("<root>", format!("invalid JSON: {e}")))?;
    structural_check(&root)?;
    let cfg: RunConfig =
        serde_json::from_value(root).map_err(|e| config_error("<root>", format!("invalid value: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
