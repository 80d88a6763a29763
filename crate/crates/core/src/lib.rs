//! Generate CycloneDX SBOMs for Python projects from every metadata surface
//! a project can carry: pyproject.toml, requirements files and the Poetry,
//! Pipenv and PDM lockfiles.

pub mod corpus;
pub mod cyclonedx;
pub mod diagnostics;
pub mod model;
pub mod parsers;
pub mod pipeline;
pub mod purl;
pub mod requirement;
pub mod resolver;
pub mod version;

pub use diagnostics::{Code, Diagnostic, Severity};
pub use model::*;
pub use version::{Version, VersionSpec};
