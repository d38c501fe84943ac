//! Core of pipegen: the project model, the element registry, script
//! emission, the form binding layer and the wizard engine.
//!
//! ```
//! use pipegen_core::{fixtures, render_project, Registry};
//!
//! let script = render_project(&fixtures::golden_project(), &Registry::bundled()).unwrap();
//! assert!(script.ends_with("my_pipe.fit(X, y)\n"));
//! ```

pub mod batch;
pub mod binding;
pub mod codegen;
pub mod fixtures;
pub mod literal;
pub mod model;
pub mod registry;
pub mod steps;
pub mod template;
pub mod wizard;

pub use binding::{
    bind_form, to_form_pairs, BindingError, BindingErrorKind, BindingPath, BindingSet,
    PathSyntaxError,
};
pub use codegen::{
    build_document, diff_documents, diff_scripts, CodegenError, ScriptDiff, SectionOwner,
    SourceDocument,
};
pub use literal::{HyperparamSpace, Literal, ParamValue, ValueType};
pub use model::{
    context_tags, validate_project, AnalysisType, CvConfig, ElementInstance, Project, TagContext,
    TagPolicy, ValidationReport,
};
pub use registry::{default_fold_count, Category, ContentFile, LoadError, Registry};
pub use steps::{StepId, StepStatus, Steps};
pub use wizard::{Engine, StepResult, WizardError};

/// Validates and renders a project in one go.
pub fn render_project(project: &Project, registry: &Registry) -> Result<String, RenderError> {
    let report = validate_project(project, registry);
    if report.has_errors() {
        return Err(RenderError::Invalid(report));
    }
    Ok(build_document(project, registry)?.render())
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("project has {} validation error(s)", .0.error_count())]
    Invalid(ValidationReport),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
}
