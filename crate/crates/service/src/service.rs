//! Project operations on top of the wizard engine and a document store.

use std::sync::Arc;

use chrono::Utc;
use pipegen_core::binding::PathSyntaxError;
use pipegen_core::model::{Issue, Severity};
use pipegen_core::{
    bind_form, AnalysisType, Engine, Project, StepId, StepResult, StepStatus, ValidationReport,
    WizardError,
};
use serde::Serialize;
use thiserror::Error;

use crate::store::{DocumentStore, StoreError, StoredDocument};

pub const PROJECTS: &str = "projects";
/// Last error-free script per project, keyed like the project.
pub const SCRIPTS: &str = "scripts";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("project `{0}` not found")]
    NotFound(String),
    #[error("revision conflict: current revision is {current}")]
    RevisionConflict { current: u64 },
    #[error("submission rejected with {} error(s)", .0.error_count())]
    ValidationFailed(ValidationReport),
    #[error(transparent)]
    PathSyntax(#[from] PathSyntaxError),
    #[error("{0}")]
    BadRequest(String),
    #[error("project `{0}` has no error-free script yet")]
    NoScript(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectSummary {
    pub id: String,
    pub name: String,
    pub analysis_type: AnalysisType,
    pub revision: u64,
    pub updated_at: chrono::DateTime<Utc>,
    pub step_progress: std::collections::BTreeMap<StepId, StepStatus>,
}

#[derive(Clone)]
pub struct ProjectService {
    engine: Arc<Engine>,
    store: Arc<dyn DocumentStore>,
}

fn report_from(issues: impl IntoIterator<Item = (String, String)>) -> ValidationReport {
    ValidationReport {
        issues: issues
            .into_iter()
            .map(|(path, message)| Issue {
                path,
                severity: Severity::Error,
                message,
            })
            .collect(),
    }
}

impl ProjectService {
    pub fn new(engine: Arc<Engine>, store: Arc<dyn DocumentStore>) -> Self {
        Self { engine, store }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn load(&self, id: &str) -> Result<Project, ServiceError> {
        let doc = match self.store.get(PROJECTS, id) {
            Ok(Some(doc)) => doc,
            Ok(None) | Err(StoreError::InvalidId(_)) => {
                return Err(ServiceError::NotFound(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        Project::from_json(&doc.body).map_err(|e| {
            StoreError::Corrupt {
                path: format!("{PROJECTS}/{id}").into(),
                message: e.to_string(),
            }
            .into()
        })
    }

    fn document(collection: &str, id: &str, revision: u64, body: String) -> StoredDocument {
        StoredDocument {
            collection: collection.into(),
            id: id.into(),
            revision,
            body,
            updated_at: Utc::now(),
        }
    }

    pub fn create(&self, name: &str, analysis_type: AnalysisType) -> Result<Project, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let project = self.engine.create(id.clone(), name, analysis_type);
        let doc = Self::document(PROJECTS, &id, project.revision, project.to_canonical_json());
        self.store.put_if_revision(&doc, None)?;
        Ok(project)
    }

    pub fn get(&self, id: &str) -> Result<Project, ServiceError> {
        self.load(id)
    }

    pub fn list(&self) -> Result<Vec<ProjectSummary>, ServiceError> {
        let mut out = Vec::new();
        for doc in self.store.scan(PROJECTS)? {
            let Ok(p) = Project::from_json(&doc.body) else {
                continue;
            };
            out.push(ProjectSummary {
                id: p.id,
                name: p.name,
                analysis_type: p.analysis_type,
                revision: p.revision,
                updated_at: doc.updated_at,
                step_progress: p.step_progress,
            });
        }
        Ok(out)
    }

    pub fn delete(&self, id: &str) -> Result<(), ServiceError> {
        let removed = match self.store.delete(PROJECTS, id) {
            Ok(removed) => removed,
            Err(StoreError::InvalidId(_)) => false,
            Err(e) => return Err(e.into()),
        };
        if !removed {
            return Err(ServiceError::NotFound(id.to_string()));
        }
        self.store.delete(SCRIPTS, id)?;
        Ok(())
    }

    fn last_script(&self, id: &str) -> Result<Option<String>, ServiceError> {
        Ok(self.store.get(SCRIPTS, id)?.map(|d| d.body))
    }

    /// Applies one step's form pairs at `revision`.
    pub fn update(
        &self,
        id: &str,
        revision: u64,
        step: StepId,
        pairs: &[(String, String)],
    ) -> Result<StepResult, ServiceError> {
        let bindings = bind_form(pairs)?;
        let project = self.load(id)?;
        if project.revision != revision {
            return Err(ServiceError::RevisionConflict {
                current: project.revision,
            });
        }
        let previous = self.last_script(id)?;
        let result = self
            .engine
            .apply_step_input(&project, step, &bindings, previous.as_deref())
            .map_err(|e| self.wizard_error(e))?;
        self.commit(&project, &result, previous.as_deref())?;
        Ok(result)
    }

    pub fn reorder(
        &self,
        id: &str,
        revision: u64,
        from: usize,
        to: usize,
    ) -> Result<StepResult, ServiceError> {
        let project = self.load(id)?;
        if project.revision != revision {
            return Err(ServiceError::RevisionConflict {
                current: project.revision,
            });
        }
        let previous = self.last_script(id)?;
        let result = self
            .engine
            .reorder_element(&project, from, to, previous.as_deref())
            .map_err(|e| self.wizard_error(e))?;
        self.commit(&project, &result, previous.as_deref())?;
        Ok(result)
    }

    fn wizard_error(&self, e: WizardError) -> ServiceError {
        match e {
            WizardError::Binding(errors) => ServiceError::ValidationFailed(report_from(
                errors.into_iter().map(|e| (e.path, e.message)),
            )),
            other => ServiceError::ValidationFailed(report_from([(
                "elements".to_string(),
                other.to_string(),
            )])),
        }
    }

    fn commit(
        &self,
        before: &Project,
        result: &StepResult,
        previous: Option<&str>,
    ) -> Result<(), ServiceError> {
        let after = &result.project;
        if after.revision == before.revision {
            return Ok(());
        }
        let doc = Self::document(
            PROJECTS,
            &after.id,
            after.revision,
            after.to_canonical_json(),
        );
        match self.store.put_if_revision(&doc, Some(before.revision)) {
            Ok(()) => {}
            Err(StoreError::Conflict { current }) => {
                return Err(ServiceError::RevisionConflict {
                    current: current.unwrap_or(0),
                })
            }
            Err(e) => return Err(e.into()),
        }
        if !result.script.is_empty() && previous != Some(result.script.as_str()) {
            let stored = self.store.get(SCRIPTS, &after.id)?;
            let script = Self::document(SCRIPTS, &after.id, after.revision, result.script.clone());
            // a racing writer may have stored a newer script; keep whichever is later
            if stored.as_ref().is_none_or(|s| s.revision < after.revision) {
                let _ = self
                    .store
                    .put_if_revision(&script, stored.map(|s| s.revision));
            }
        }
        Ok(())
    }

    /// Script for download: the current render if the project is error-free,
    /// else the last error-free one.
    pub fn script(&self, id: &str) -> Result<(Project, String), ServiceError> {
        let project = self.load(id)?;
        if let Ok(script) = pipegen_core::render_project(&project, &self.engine.registry) {
            return Ok((project, script));
        }
        match self.last_script(id)? {
            Some(s) => Ok((project, s)),
            None => Err(ServiceError::NoScript(id.to_string())),
        }
    }
}
