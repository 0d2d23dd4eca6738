//! Planar Timoshenko-beam model of a monopile structure on Winkler springs.

pub mod assembly;
pub mod element;
pub mod modal;
pub mod template;

use thiserror::Error;

pub use assembly::{build_system, mesh, AssembledSystem, DEFAULT_ELEMENTS, MIN_ELEMENTS};
pub use modal::{cantilever_estimate, first_frequency, frequencies, solve_modes, ModalResult};
pub use template::{
    nrel5mw, nrel5mw_tower, wavetank, AddedMassModel, BaseFixity, BeamSegment, FoundationModel, ScourModel, Section,
    SoilSupport, SpringLayout, StructureTemplate, DEFAULT_SEAWATER_DENSITY, FRESHWATER_DENSITY,
};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid foundation: {0}")]
    Foundation(String),
    #[error("need at least {min} elements, got {got}")]
    TooFewElements { min: usize, got: usize },
    #[error("requested {requested} modes but the model has {available} free DOFs")]
    ModeCount { requested: usize, available: usize },
    #[error("mass matrix is not positive definite on the free DOFs")]
    MassNotPositiveDefinite,
    #[error("symmetric eigen-solver did not converge")]
    NoConvergence,
    #[error("structure is a mechanism (eigenvalue {0:e}); it needs lateral support")]
    Mechanism(f64),
    #[error("inputs must be positive: {0:?}")]
    NonPositiveInput(Vec<f64>),
    #[error("unknown built-in template '{0}'")]
    UnknownTemplate(String),
}

/// Seawater density appropriate for a template: fresh water for the tank model.
pub fn default_water_density(template: &StructureTemplate) -> f64 {
    if template.name.starts_with("wavetank") {
        FRESHWATER_DENSITY
    } else {
        DEFAULT_SEAWATER_DENSITY
    }
}
