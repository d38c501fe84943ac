//! Deployable surface of pipegen: document store, project service, HTTP API
//! and the pieces of the `pipegen` command line tool.

pub mod http;
pub mod service;
pub mod store;

use std::path::Path;

use anyhow::Context;
use pipegen_core::{Engine, Project, Registry, Steps};

pub use service::{ProjectService, ServiceError};
pub use store::{DocumentStore, FileStore, MemoryStore, StoredDocument};

/// Engine over the bundled content, or over `content_dir` when given. A
/// `steps.csv` in that directory replaces the bundled step texts.
pub fn load_engine(content_dir: Option<&Path>) -> anyhow::Result<Engine> {
    let Some(dir) = content_dir else {
        return Ok(Engine::bundled());
    };
    let registry = Registry::load_dir(dir)
        .with_context(|| format!("loading registry from {}", dir.display()))?;
    let steps_file = dir.join("steps.csv");
    let steps = if steps_file.exists() {
        let text = std::fs::read_to_string(&steps_file)?;
        Steps::from_csv(&steps_file.display().to_string(), &text)?
    } else {
        Steps::bundled()
    };
    Ok(Engine::new(registry, steps))
}

/// Headless emission of a stored project document.
pub fn generate(project_file: &Path, engine: &Engine) -> anyhow::Result<String> {
    let text = std::fs::read_to_string(project_file)
        .with_context(|| format!("reading {}", project_file.display()))?;
    let project =
        Project::from_json(&text).with_context(|| format!("parsing {}", project_file.display()))?;
    match pipegen_core::render_project(&project, &engine.registry) {
        Ok(script) => Ok(script),
        Err(pipegen_core::RenderError::Invalid(report)) => {
            let lines: Vec<String> = report
                .errors()
                .map(|i| format!("  {}: {}", i.path, i.message))
                .collect();
            anyhow::bail!("project is not valid:\n{}", lines.join("\n"))
        }
        Err(e) => Err(e.into()),
    }
}
