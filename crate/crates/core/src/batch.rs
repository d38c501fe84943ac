//! Rendering many projects at once, e.g. for sweeps or bulk export.
//!
//! With the `parallel` feature (on by default) projects are rendered on the
//! rayon pool; without it, in order on the calling thread. Both produce the
//! same output in the same order.

use crate::codegen::{build_document, CodegenError};
use crate::model::Project;
use crate::registry::Registry;

pub fn render_one(project: &Project, registry: &Registry) -> Result<String, CodegenError> {
    build_document(project, registry).map(|doc| doc.render())
}

pub fn render_sequential(
    projects: &[Project],
    registry: &Registry,
) -> Vec<Result<String, CodegenError>> {
    projects.iter().map(|p| render_one(p, registry)).collect()
}

#[cfg(feature = "parallel")]
pub fn render_parallel(
    projects: &[Project],
    registry: &Registry,
) -> Vec<Result<String, CodegenError>> {
    use rayon::prelude::*;
    projects
        .par_iter()
        .map(|p| render_one(p, registry))
        .collect()
}

pub fn render_many(projects: &[Project], registry: &Registry) -> Vec<Result<String, CodegenError>> {
    #[cfg(feature = "parallel")]
    {
        render_parallel(projects, registry)
    }
    #[cfg(not(feature = "parallel"))]
    {
        render_sequential(projects, registry)
    }
}
