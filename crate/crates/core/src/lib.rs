//! Conserved quantities, configuration-space form calculus, spectral gaps,
//! norm inequalities and the decomposition of shift-invariant closed forms
//! for interacting particle systems on finite locales and on Z^d.

pub mod error;
pub mod forms;
pub mod configspace;
pub mod interaction;
mod linalg;
pub mod locale;
pub mod measure;
pub mod spectral;
pub mod varadhan;

pub use error::{Error, Result};
