//! Parse, resolve and emit in one call.

use std::path::Path;

use crate::cyclonedx::{self, BomMetadata, DiagFormat, EmitError};
use crate::diagnostics::{self, Diagnostic};
use crate::parsers::{build_project_model, ParseOptions, ProjectModel, ScanError};
use crate::resolver::{resolve_project, IndexClient, ResolutionPolicy, ResolvedProject};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Emit(#[from] EmitError),
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub model: ProjectModel,
    pub resolved: ResolvedProject,
    /// Parser and resolver diagnostics, sorted.
    pub diagnostics: Vec<Diagnostic>,
    pub sbom: Vec<u8>,
    pub diagnostics_json: Vec<u8>,
}

pub fn generate(
    root: &Path,
    parse: &ParseOptions,
    policy: &ResolutionPolicy,
    client: &dyn IndexClient,
    deterministic: bool,
) -> Result<Generated, PipelineError> {
    let model = build_project_model(root, parse)?;
    let resolved = resolve_project(&model, policy, client);
    let mut diags = model.diagnostics.clone();
    diags.extend(resolved.diagnostics.iter().cloned());
    diagnostics::normalize(&mut diags);

    let root_name = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "project".to_string());
    let metadata = BomMetadata::new(root_name);
    let sbom = cyclonedx::emit(&resolved.components, &resolved.edges, &diags, &metadata, deterministic)?;
    let diagnostics_json = cyclonedx::emit_diagnostics(&diags, DiagFormat::Json);
    Ok(Generated {
        model,
        resolved,
        diagnostics: diags,
        sbom,
        diagnostics_json,
    })
}
