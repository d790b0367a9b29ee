//! Numerical laboratory for effective stability of nearly integrable
//! symplectic maps: exponentially weighted Fourier algebra, implicitly
//! generated maps, resonant normal forms with certified remainder bounds,
//! resonance-zone geometry, and long-time drift experiments for symplectic
//! integrators.

pub mod domain;
pub mod error;
pub mod fourier;
pub mod genmap;
pub mod geometry;
pub mod lattice;
pub mod normalform;
pub mod poly;
pub mod presets;
pub mod stability;

pub use domain::{ActionAngleState, DomainSpec, FrequencyMap, TAU};
pub use error::{Error, Result};
pub use fourier::{FourierGenFunction, InequalityReport, ModeKey};
pub use genmap::{ImplicitMap, NearIdentityTransform};
pub use geometry::{BlockLabel, ResonanceGeometry, Schedule};
pub use lattice::Lattice;
pub use normalform::{NormalFormParams, NormalFormResult};
pub use poly::{ChebFit, MultiIndex, PolyCoeff};
pub use stability::{
    DriftRecord, DriftRun, IntegrableSystem, Method, ScalingFit, StabilityBounds,
};
