//! The stepwise design flow.
//!
//! Every accepted submission re-derives the defaults the user has not
//! overridden, re-validates and re-renders, and reports the script diff.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::binding::{apply_bindings, flags, BindingError, BindingSet, Scope};
use crate::codegen::{
    build_document, diff_documents, diff_scripts, DiffOp, ScriptDiff, SourceDocument,
};
use crate::literal::{Literal, ParamValue};
use crate::model::{
    context_tags_with, validate_project, AnalysisType, CvConfig, CvLoop, ElementInstance, Project,
    TagContext, TagPolicy, ValidationReport,
};
use crate::registry::{default_fold_count, Category, ParamKind, Registry};
use crate::steps::{StepId, StepStatus, Steps};

#[derive(Debug, Clone, Serialize)]
pub struct StepResult {
    pub project: Project,
    pub report: ValidationReport,
    /// Last error-free render; empty if the project never rendered.
    pub script: String,
    pub diff: ScriptDiff,
    pub step_status: BTreeMap<StepId, StepStatus>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WizardError {
    #[error("{} invalid field(s)", .0.len())]
    Binding(Vec<BindingError>),
    #[error("position {position} is out of range (project has {len} elements)")]
    OutOfRange { position: usize, len: usize },
    #[error("cannot move a {from} into the {to} zone")]
    CategoryBoundaryViolation { from: Category, to: Category },
}

/// Registry, step table and tag thresholds shared by all projects.
#[derive(Debug, Clone)]
pub struct Engine {
    pub registry: Registry,
    pub steps: Steps,
    pub policy: TagPolicy,
}

impl Engine {
    pub fn new(registry: Registry, steps: Steps) -> Self {
        Self {
            registry,
            steps,
            policy: TagPolicy::default(),
        }
    }

    pub fn bundled() -> Self {
        Self::new(Registry::bundled(), Steps::bundled())
    }

    pub fn context(&self, project: &Project) -> TagContext {
        context_tags_with(project, &self.policy)
    }

    /// A fresh project at revision 1 with every step empty.
    pub fn create(
        &self,
        id: impl Into<String>,
        name: impl Into<String>,
        analysis_type: AnalysisType,
    ) -> Project {
        Project::new(id, name, analysis_type)
    }

    /// Applies one step's submission. `previous_script` is the script the
    /// caller last showed for this project; it is kept when the updated
    /// project has validation errors.
    pub fn apply_step_input(
        &self,
        project: &Project,
        step: StepId,
        bindings: &BindingSet,
        previous_script: Option<&str>,
    ) -> Result<StepResult, WizardError> {
        let mut next = project.clone();
        apply_bindings(&mut next, bindings, &self.registry, Scope::Step(step))
            .map_err(WizardError::Binding)?;
        self.refresh_defaults(&mut next);
        if next.step_progress.get(&step).copied().unwrap_or_default() == StepStatus::Empty {
            next.step_progress.insert(step, StepStatus::Partial);
        }
        Ok(self.finish(project, next, previous_script))
    }

    /// Moves an element within its category's zone.
    pub fn reorder_element(
        &self,
        project: &Project,
        from: usize,
        to: usize,
        previous_script: Option<&str>,
    ) -> Result<StepResult, WizardError> {
        let len = project.elements.len();
        for position in [from, to] {
            if position >= len {
                return Err(WizardError::OutOfRange { position, len });
            }
        }
        let category = |i: usize| {
            self.registry
                .element(&project.elements[i].element_id)
                .map_or(Category::Transformer, |d| d.category)
        };
        let (a, b) = (category(from), category(to));
        if a != b {
            return Err(WizardError::CategoryBoundaryViolation { from: a, to: b });
        }
        let mut next = project.clone();
        let moved = next.elements.remove(from);
        next.elements.insert(to, moved);
        next.renumber();
        Ok(self.finish(project, next, previous_script))
    }

    fn finish(
        &self,
        before: &Project,
        mut next: Project,
        previous_script: Option<&str>,
    ) -> StepResult {
        let status = self.step_status(&next);
        next.step_progress = status.clone();
        next.revision = before.revision;
        if next != *before {
            next.revision += 1;
        }

        let report = validate_project(&next, &self.registry);
        let previous = previous_script
            .map(str::to_string)
            .or_else(|| self.render_valid(before).map(|(_, s)| s));
        let (script, diff) = match self.render_valid(&next) {
            Some((doc, script)) => {
                let diff = match (self.render_valid(before), &previous) {
                    (Some((old_doc, old)), Some(prev)) if old == *prev => {
                        diff_documents(&old_doc, &doc)
                    }
                    (_, prev) => {
                        attributed(diff_scripts(prev.as_deref().unwrap_or(""), &script), &doc)
                    }
                };
                (script, diff)
            }
            None => (previous.unwrap_or_default(), ScriptDiff::default()),
        };
        StepResult {
            project: next,
            report,
            script,
            diff,
            step_status: status,
        }
    }

    fn render_valid(&self, project: &Project) -> Option<(SourceDocument, String)> {
        if validate_project(project, &self.registry).has_errors() {
            return None;
        }
        let doc = build_document(project, &self.registry).ok()?;
        let text = doc.render();
        Some((doc, text))
    }

    /// Re-derives every default the user has not set explicitly.
    pub fn refresh_defaults(&self, project: &mut Project) {
        let ctx = self.context(project);
        let reg = &self.registry;
        let first = |category: Category| {
            reg.query_elements(category, &ctx)
                .first()
                .map(|e| e.element_id.clone())
        };

        if !project.user_set.contains(flags::OPTIMIZER) {
            let want = first(Category::Optimizer);
            if project.training.optimizer.as_ref().map(|o| &o.element_id) != want.as_ref() {
                project.training.optimizer = want.map(ElementInstance::new);
            }
        }
        if let Some(opt) = project.training.optimizer.as_mut() {
            self.refresh_instance(opt, &ctx);
        }

        let n_samples = project.data.n_samples;
        for which in [CvLoop::Outer, CvLoop::Inner] {
            let flag = match which {
                CvLoop::Outer => flags::OUTER_STRATEGY,
                CvLoop::Inner => flags::INNER_STRATEGY,
            };
            let slot = project.training.cv_mut(which);
            if !project.user_set.contains(flag) {
                let want = first(Category::CvStrategy);
                if slot.as_ref().map(|c| &c.strategy) != want.as_ref() {
                    *slot = want.map(CvConfig::new);
                }
            }
            if let Some(cv) = slot.as_mut() {
                self.refresh_cv(cv, &ctx, n_samples);
            }
        }

        if !project.user_set.contains(flags::METRICS) {
            project.training.metrics = reg
                .query_elements(Category::Metric, &ctx)
                .iter()
                .map(|e| e.element_id.clone())
                .collect();
        }
        if !project.user_set.contains(flags::BEST_METRIC) {
            project.training.best_config_metric = project.training.metrics.first().cloned();
        }

        for e in &mut project.elements {
            self.refresh_instance(e, &ctx);
        }
    }

    fn refresh_instance(&self, e: &mut ElementInstance, ctx: &TagContext) {
        let Ok(defaults) = self.registry.resolve_defaults(&e.element_id, ctx) else {
            return;
        };
        e.fixed_params
            .retain(|k, _| e.user_set.contains(k) || defaults.contains_key(k));
        e.hyperparams
            .retain(|k, _| e.user_set.contains(k) || defaults.contains_key(k));
        for (name, value) in defaults {
            if e.user_set.contains(&name) {
                continue;
            }
            let kind = self.registry.param(&e.element_id, &name).map(|r| r.kind);
            match (kind, value) {
                (Some(ParamKind::Hyperparameter), ParamValue::Space(s)) => {
                    e.hyperparams.insert(name, s);
                }
                (Some(ParamKind::Fixed), ParamValue::Fixed(l)) => {
                    e.fixed_params.insert(name, l);
                }
                _ => {}
            }
        }
    }

    fn refresh_cv(&self, cv: &mut CvConfig, ctx: &TagContext, n_samples: Option<u64>) {
        let Ok(defaults) = self.registry.resolve_defaults(&cv.strategy, ctx) else {
            return;
        };
        cv.params
            .retain(|k, _| cv.user_set.contains(k) || defaults.contains_key(k));
        for (name, value) in defaults {
            if cv.user_set.contains(&name) {
                continue;
            }
            let ParamValue::Fixed(mut lit) = value else {
                continue;
            };
            if name == "n_splits" {
                if let Some(n) = n_samples {
                    lit = Literal::Int(default_fold_count(n) as i64);
                }
            }
            cv.params.insert(name, lit);
        }
    }

    /// Completion state of every step, in step order.
    pub fn step_status(&self, project: &Project) -> BTreeMap<StepId, StepStatus> {
        let report = validate_project(project, &self.registry);
        let mut out = BTreeMap::new();
        let mut all_complete = true;
        for def in self.steps.iter() {
            let step = def.step_id;
            let status = if step == StepId::Review {
                if all_complete {
                    StepStatus::Complete
                } else {
                    StepStatus::Empty
                }
            } else {
                let set: Vec<bool> = def
                    .required_fields
                    .iter()
                    .map(|f| self.field_is_set(project, f))
                    .collect();
                let zone = self.zone(project, step);
                let touched = project
                    .step_progress
                    .get(&step)
                    .is_some_and(|s| *s != StepStatus::Empty)
                    || !zone.is_empty()
                    || def
                        .required_fields
                        .iter()
                        .zip(&set)
                        .any(|(f, s)| *s && f != "name" && f != "analysis_type");
                let local_errors = step_prefixes(step, &zone)
                    .iter()
                    .any(|p| report.has_errors_under(p));
                if !touched {
                    StepStatus::Empty
                } else if set.iter().all(|s| *s) && !local_errors {
                    StepStatus::Complete
                } else {
                    StepStatus::Partial
                }
            };
            all_complete &= status == StepStatus::Complete;
            out.insert(step, status);
        }
        out
    }

    /// Element indices that belong to an element step.
    fn zone(&self, project: &Project, step: StepId) -> Vec<usize> {
        let want = match step {
            StepId::Transformers => Category::Transformer,
            StepId::Estimators => Category::Estimator,
            _ => return Vec::new(),
        };
        project
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                self.registry
                    .element(&e.element_id)
                    .is_some_and(|d| d.category == want)
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn field_is_set(&self, p: &Project, field: &str) -> bool {
        let t = &p.training;
        match field {
            "name" => !p.name.trim().is_empty(),
            "analysis_type" => true,
            "data.file_path" => !p.data.file_path.trim().is_empty(),
            "data.feature_columns" => !p.data.feature_columns.is_empty(),
            "data.target_column" => !p.data.target_column.is_empty(),
            "data.n_samples" => p.data.n_samples.is_some(),
            "training.optimizer" => t.optimizer.is_some(),
            "training.outer_cv" => t.outer_cv.is_some(),
            "training.inner_cv" => t.inner_cv.is_some(),
            "training.metrics" => !t.metrics.is_empty(),
            "training.best_config_metric" => t.best_config_metric.is_some(),
            "elements.estimator" => p.estimator_count(&self.registry) > 0,
            _ => false,
        }
    }
}

fn step_prefixes(step: StepId, zone: &[usize]) -> Vec<String> {
    match step {
        StepId::ProjectData => vec!["name".into(), "analysis_type".into(), "data".into()],
        StepId::Optimization => vec!["training".into()],
        StepId::Transformers | StepId::Estimators => {
            zone.iter().map(|i| format!("elements[{i}]")).collect()
        }
        StepId::Review => Vec::new(),
    }
}

/// Steps shown with a warning flag: everything after the first step that is
/// not complete. Navigation to them stays possible.
pub fn flagged_steps(status: &BTreeMap<StepId, StepStatus>) -> BTreeSet<StepId> {
    let mut flagged = BTreeSet::new();
    let mut blocked = false;
    for step in StepId::ALL {
        if blocked {
            flagged.insert(step);
        }
        if status.get(&step).copied().unwrap_or_default() != StepStatus::Complete {
            blocked = true;
        }
    }
    flagged
}

fn attributed(mut diff: ScriptDiff, doc: &SourceDocument) -> ScriptDiff {
    let owners = doc.line_owners();
    for h in &mut diff.hunks {
        let at = match h.op {
            DiffOp::Delete => h.new_range.start.min(owners.len().saturating_sub(1)),
            _ => h.new_range.start,
        };
        h.owner = owners.get(at).copied();
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binding::bind_form;
    use crate::fixtures;

    fn submit(engine: &Engine, p: &Project, step: StepId, pairs: &[(&str, &str)]) -> StepResult {
        engine
            .apply_step_input(p, step, &bind_form(pairs).unwrap(), None)
            .unwrap()
    }

    #[test]
    fn new_project_is_all_empty() {
        let engine = Engine::bundled();
        let p = engine.create("p", "demo", AnalysisType::Classification);
        assert_eq!(p.revision, 1);
        assert!(engine
            .step_status(&p)
            .values()
            .all(|s| *s == StepStatus::Empty));
    }

    #[test]
    fn golden_is_complete_and_stable() {
        let engine = Engine::bundled();
        let p = fixtures::golden_project();
        assert!(engine
            .step_status(&p)
            .values()
            .all(|s| *s == StepStatus::Complete));
        let r = submit(&engine, &p, StepId::Optimization, &[]);
        assert_eq!(r.project.revision, p.revision);
        assert!(r.diff.is_empty());
        assert_eq!(r.script, fixtures::GOLDEN_SCRIPT);
    }

    #[test]
    fn missing_estimator_leaves_estimators_partial() {
        let engine = Engine::bundled();
        let mut p = fixtures::golden_project();
        p.elements.pop();
        let status = engine.step_status(&p);
        assert_eq!(status[&StepId::Estimators], StepStatus::Partial);
        assert_eq!(status[&StepId::Review], StepStatus::Empty);
        assert_eq!(flagged_steps(&status), [StepId::Review].into());
    }

    #[test]
    fn reorder_rotates_within_zone() {
        let engine = Engine::bundled();
        let mut p = fixtures::golden_project();
        p.elements.insert(
            2,
            ElementInstance::new("SimpleImputer")
                .with_fixed("strategy", Literal::Str("mean".into())),
        );
        p.renumber();
        let r = engine.reorder_element(&p, 0, 2, None).unwrap();
        let ids: Vec<_> = r
            .project
            .elements
            .iter()
            .map(|e| e.element_id.as_str())
            .collect();
        assert_eq!(ids, ["PCA", "SimpleImputer", "StandardScaler", "SVC"]);
        assert_eq!(r.project.revision, p.revision + 1);
        assert!(matches!(
            engine.reorder_element(&p, 0, 3, None),
            Err(WizardError::CategoryBoundaryViolation { .. })
        ));
        assert!(matches!(
            engine.reorder_element(&p, 0, 9, None),
            Err(WizardError::OutOfRange { .. })
        ));
    }

    #[test]
    fn binding_errors_reject_the_whole_batch() {
        let engine = Engine::bundled();
        let p = fixtures::golden_project();
        let b = bind_form(&[
            ("training.optimizer", "random_search"),
            ("training.metrics", "nope"),
        ])
        .unwrap();
        let err = engine
            .apply_step_input(&p, StepId::Optimization, &b, None)
            .unwrap_err();
        assert!(matches!(err, WizardError::Binding(ref e) if e.len() == 1));
    }

    #[test]
    fn validation_errors_keep_last_good_script() {
        let engine = Engine::bundled();
        let p = fixtures::golden_project();
        let r = submit(&engine, &p, StepId::ProjectData, &[("data.file_path", "")]);
        assert!(r.report.has_errors());
        assert_eq!(r.project.revision, p.revision + 1);
        assert_eq!(r.script, fixtures::GOLDEN_SCRIPT);
        assert!(r.diff.is_empty());
    }
}
