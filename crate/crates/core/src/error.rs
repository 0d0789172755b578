use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("material error: {0}")]
    Material(String),

    #[error("inverted element{} (det F = {det_f:.3e}){}", element_suffix(*.element), step_suffix(*.step))]
    InvertedElement {
        element: Option<usize>,
        det_f: f64,
        step: Option<usize>,
    },

    #[error("stencil construction failed for element {element}: {reason}")]
    Stencil { element: usize, reason: String },

    #[error("damage update failed for element {element}: {reason}")]
    DamageUpdate { element: usize, reason: String },

    #[error("Newton solve did not converge at step {step} after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn element_suffix(element: Option<usize>) -> String {
    match element {
        Some(e) => format!(" {e}"),
        None => String::new(),
    }
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at load step {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-parsable tag, one per variant.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "validation",
            Error::Geometry(_) => "geometry",
            Error::Material(_) => "material",
            Error::InvertedElement { .. } => "inverted_element",
            Error::Stencil { .. } => "stencil",
            Error::DamageUpdate { .. } => "damage_update",
            Error::NewtonDiverged { .. } => "newton_diverged",
            Error::LinearSolve(_) => "linear_solve",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    /// Attach a load step to an inverted-element error raised below the driver.
    pub fn at_step(self, load_step: usize) -> Self {
        match self {
            Error::InvertedElement { element, det_f, .. } => Error::InvertedElement {
                element,
                det_f,
                step: Some(load_step),
            },
            other => other,
        }
    }

    /// Attach an element id to an inverted-element error raised by the material.
    pub fn in_element(self, e: usize) -> Self {
        match self {
            Error::InvertedElement { det_f, step, .. } => Error::InvertedElement {
                element: Some(e),
                det_f,
                step,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
