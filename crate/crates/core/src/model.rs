//! The project document and its structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::literal::{HyperparamSpace, Literal};
use crate::registry::{Category, ParamKind, Registry};
use crate::steps::{StepId, StepStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisType {
    Classification,
    Regression,
}

impl AnalysisType {
    pub fn as_str(self) -> &'static str {
        match self {
            AnalysisType::Classification => "classification",
            AnalysisType::Regression => "regression",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classification" => Some(Self::Classification),
            "regression" => Some(Self::Regression),
            _ => None,
        }
    }
}

impl fmt::Display for AnalysisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSourceConfig {
    pub file_path: String,
    pub feature_columns: Vec<String>,
    pub target_column: String,
    pub n_samples: Option<u64>,
}

/// A chosen registry element with its parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementInstance {
    pub element_id: String,
    #[serde(default)]
    pub position: usize,
    #[serde(default)]
    pub fixed_params: BTreeMap<String, Literal>,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, HyperparamSpace>,
    /// Parameters the user set explicitly; the rest follow defaults.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub user_set: BTreeSet<String>,
}

impl ElementInstance {
    pub fn new(element_id: impl Into<String>) -> Self {
        Self {
            element_id: element_id.into(),
            position: 0,
            fixed_params: BTreeMap::new(),
            hyperparams: BTreeMap::new(),
            user_set: BTreeSet::new(),
        }
    }

    pub fn with_fixed(mut self, name: &str, value: Literal) -> Self {
        self.fixed_params.insert(name.to_string(), value);
        self
    }

    pub fn with_hyperparam(mut self, name: &str, space: HyperparamSpace) -> Self {
        self.hyperparams.insert(name.to_string(), space);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub strategy: String,
    #[serde(default)]
    pub params: BTreeMap<String, Literal>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub user_set: BTreeSet<String>,
}

impl CvConfig {
    pub fn new(strategy: impl Into<String>) -> Self {
        Self {
            strategy: strategy.into(),
            params: BTreeMap::new(),
            user_set: BTreeSet::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: Literal) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub optimizer: Option<ElementInstance>,
    pub outer_cv: Option<CvConfig>,
    pub inner_cv: Option<CvConfig>,
    pub metrics: Vec<String>,
    pub best_config_metric: Option<String>,
}

/// Which of the two cross-validation loops a path refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvLoop {
    Outer,
    Inner,
}

impl CvLoop {
    pub fn field(self) -> &'static str {
        match self {
            CvLoop::Outer => "outer_cv",
            CvLoop::Inner => "inner_cv",
        }
    }
}

impl TrainingConfig {
    pub fn cv(&self, which: CvLoop) -> Option<&CvConfig> {
        match which {
            CvLoop::Outer => self.outer_cv.as_ref(),
            CvLoop::Inner => self.inner_cv.as_ref(),
        }
    }

    pub fn cv_mut(&mut self, which: CvLoop) -> &mut Option<CvConfig> {
        match which {
            CvLoop::Outer => &mut self.outer_cv,
            CvLoop::Inner => &mut self.inner_cv,
        }
    }
}

/// A complete user-authored analysis.
///
/// Serialized as JSON with a fixed key order; that text is both the stored
/// document and the API payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub revision: u64,
    pub name: String,
    pub analysis_type: AnalysisType,
    #[serde(default)]
    pub data: DataSourceConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub elements: Vec<ElementInstance>,
    #[serde(default)]
    pub step_progress: BTreeMap<StepId, StepStatus>,
    /// Project-level paths the user set explicitly (e.g. `training.metrics`).
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub user_set: BTreeSet<String>,
}

impl Project {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        analysis_type: AnalysisType,
    ) -> Self {
        Self {
            id: id.into(),
            revision: 1,
            name: name.into(),
            analysis_type,
            data: DataSourceConfig::default(),
            training: TrainingConfig::default(),
            elements: Vec::new(),
            step_progress: StepId::ALL
                .iter()
                .map(|s| (*s, StepStatus::Empty))
                .collect(),
            user_set: BTreeSet::new(),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("project serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Renumbers positions to `0..n`.
    pub fn renumber(&mut self) {
        for (i, e) in self.elements.iter_mut().enumerate() {
            e.position = i;
        }
    }

    /// Equality ignoring revision, step progress and user-set flags.
    pub fn same_content(&self, other: &Project) -> bool {
        fn strip(p: &Project) -> Project {
            let mut p = p.clone();
            p.revision = 0;
            p.step_progress.clear();
            p.user_set.clear();
            for e in p.elements.iter_mut().chain(p.training.optimizer.as_mut()) {
                e.user_set.clear();
            }
            for cv in [&mut p.training.outer_cv, &mut p.training.inner_cv]
                .into_iter()
                .flatten()
            {
                cv.user_set.clear();
            }
            p
        }
        strip(self) == strip(other)
    }

    pub fn estimator_count(&self, registry: &Registry) -> usize {
        self.elements
            .iter()
            .filter(|e| {
                registry
                    .element(&e.element_id)
                    .is_some_and(|r| r.category == Category::Estimator)
            })
            .count()
    }
}

/// Context tags derived from the project state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TagContext(BTreeSet<String>);

impl TagContext {
    pub fn contains(&self, tag: &str) -> bool {
        self.0.contains(tag)
    }

    pub fn insert(&mut self, tag: impl Into<String>) {
        self.0.insert(tag.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<&'a str> for TagContext {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        TagContext(iter.into_iter().map(str::to_string).collect())
    }
}

impl FromIterator<String> for TagContext {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TagContext(iter.into_iter().collect())
    }
}

/// Sample-size thresholds behind the `small_sample` / `tiny_sample` tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagPolicy {
    pub small_sample_below: u64,
    pub tiny_sample_below: u64,
}

impl Default for TagPolicy {
    fn default() -> Self {
        Self {
            small_sample_below: 100,
            tiny_sample_below: 30,
        }
    }
}

pub const SMALL_SAMPLE: &str = "small_sample";
pub const TINY_SAMPLE: &str = "tiny_sample";

pub fn context_tags(project: &Project) -> TagContext {
    context_tags_with(project, &TagPolicy::default())
}

pub fn context_tags_with(project: &Project, policy: &TagPolicy) -> TagContext {
    let mut ctx = TagContext::default();
    ctx.insert(project.analysis_type.as_str());
    if let Some(n) = project.data.n_samples {
        if n < policy.small_sample_below {
            ctx.insert(SMALL_SAMPLE);
        }
        if n < policy.tiny_sample_below {
            ctx.insert(TINY_SAMPLE);
        }
    }
    ctx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    /// Whether any error sits at `prefix` or below it.
    pub fn has_errors_under(&self, prefix: &str) -> bool {
        self.errors().any(|i| path_under(&i.path, prefix))
    }
}

pub(crate) fn path_under(path: &str, prefix: &str) -> bool {
    path == prefix
        || path
            .strip_prefix(prefix)
            .is_some_and(|rest| rest.starts_with('.') || rest.starts_with('['))
}

/// More grid points than this under grid search draws a warning.
pub const GRID_WARNING_POINTS: u64 = 10;

/// Checks a project against the registry. Errors mark projects that cannot
/// be emitted; warnings are advisory.
pub fn validate_project(project: &Project, registry: &Registry) -> ValidationReport {
    let mut report = ValidationReport::default();
    let ctx = context_tags(project);

    if project.name.trim().is_empty() {
        report.error("name", "project name must not be empty");
    }
    validate_data(&project.data, &mut report);

    let mut seen_estimator = false;
    for (i, e) in project.elements.iter().enumerate() {
        let path = format!("elements[{i}]");
        if e.position != i {
            report.error(
                format!("{path}.position"),
                format!("position {} should be {i}", e.position),
            );
        }
        let Some(def) = registry.element(&e.element_id) else {
            report.error(
                format!("{path}.element_id"),
                format!("unknown element `{}`", e.element_id),
            );
            continue;
        };
        match def.category {
            Category::Transformer if seen_estimator => report.error(
                &path,
                format!(
                    "transformer `{}` must come before all estimators",
                    e.element_id
                ),
            ),
            Category::Transformer => {}
            Category::Estimator => seen_estimator = true,
            other => {
                report.error(
                    format!("{path}.element_id"),
                    format!("`{}` is a {other}, not a pipeline step", e.element_id),
                );
                continue;
            }
        }
        check_available(
            registry,
            &e.element_id,
            &ctx,
            project,
            format!("{path}.element_id"),
            &mut report,
        );
        check_instance(registry, e, &path, &mut report);
    }
    if !seen_estimator {
        report.error("elements", "at least one estimator is required");
    }

    let training = &project.training;
    match &training.optimizer {
        None => report.error("training.optimizer", "no hyperparameter optimizer chosen"),
        Some(opt) => {
            let path = "training.optimizer";
            match registry.element(&opt.element_id) {
                None => report.error(path, format!("unknown element `{}`", opt.element_id)),
                Some(def) if def.category != Category::Optimizer => report.error(
                    path,
                    format!(
                        "`{}` is a {}, not an optimizer",
                        opt.element_id, def.category
                    ),
                ),
                Some(_) => {
                    check_available(
                        registry,
                        &opt.element_id,
                        &ctx,
                        project,
                        path.to_string(),
                        &mut report,
                    );
                    check_instance(registry, opt, path, &mut report);
                }
            }
        }
    }
    for which in [CvLoop::Outer, CvLoop::Inner] {
        let path = format!("training.{}", which.field());
        match training.cv(which) {
            None => report.error(&path, "no cross-validation strategy chosen"),
            Some(cv) => validate_cv(registry, cv, &path, project, &ctx, &mut report),
        }
    }

    if training.metrics.is_empty() {
        report.error("training.metrics", "at least one metric is required");
    }
    let mut seen = BTreeSet::new();
    for (i, m) in training.metrics.iter().enumerate() {
        let path = format!("training.metrics[{i}]");
        if !seen.insert(m) {
            report.warning(&path, format!("metric `{m}` is listed twice"));
        }
        match registry.element(m) {
            None => report.error(&path, format!("unknown metric `{m}`")),
            Some(def) if def.category != Category::Metric => {
                report.error(&path, format!("`{m}` is a {}, not a metric", def.category))
            }
            Some(_) => check_available(registry, m, &ctx, project, path, &mut report),
        }
    }
    match &training.best_config_metric {
        None => report.error(
            "training.best_config_metric",
            "no metric chosen to select the best configuration",
        ),
        Some(best) if !training.metrics.contains(best) => report.error(
            "training.best_config_metric",
            format!("`{best}` must be one of the chosen metrics"),
        ),
        Some(_) => {}
    }

    if let Some(opt) = &training.optimizer {
        if opt.element_id == "grid_search" {
            let points = grid_points(project, registry);
            if points > GRID_WARNING_POINTS {
                report.warning(
                    "training.optimizer",
                    format!(
                        "grid search will evaluate {points} configurations; consider random search"
                    ),
                );
            }
        }
    }

    report
}

fn validate_data(data: &DataSourceConfig, report: &mut ValidationReport) {
    if data.file_path.trim().is_empty() {
        report.error("data.file_path", "missing data source");
    }
    if data.feature_columns.is_empty() {
        report.error(
            "data.feature_columns",
            "at least one feature column is required",
        );
    }
    let mut seen = BTreeSet::new();
    for (i, c) in data.feature_columns.iter().enumerate() {
        if c.is_empty() {
            report.error(
                format!("data.feature_columns[{i}]"),
                "column name must not be empty",
            );
        } else if !seen.insert(c) {
            report.error(
                format!("data.feature_columns[{i}]"),
                format!("column `{c}` is listed twice"),
            );
        }
    }
    if data.target_column.is_empty() {
        report.error("data.target_column", "missing target column");
    } else if data.feature_columns.contains(&data.target_column) {
        report.error(
            "data.target_column",
            "the target column cannot also be a feature",
        );
    }
    match data.n_samples {
        None => report.error("data.n_samples", "number of samples is unknown"),
        Some(n) if n < 2 => report.error("data.n_samples", "at least two samples are required"),
        Some(_) => {}
    }
}

fn check_available(
    registry: &Registry,
    element_id: &str,
    ctx: &TagContext,
    project: &Project,
    path: String,
    report: &mut ValidationReport,
) {
    if !registry.is_available(element_id, ctx) {
        let def = registry.element(element_id).expect("checked by caller");
        let missing: Vec<&str> = def
            .tags
            .iter()
            .map(String::as_str)
            .filter(|t| !ctx.contains(t))
            .collect();
        report.error(
            path,
            format!(
                "`{element_id}` does not apply to this {} project (needs {})",
                project.analysis_type,
                missing.join(", ")
            ),
        );
    }
}

fn check_instance(
    registry: &Registry,
    e: &ElementInstance,
    path: &str,
    report: &mut ValidationReport,
) {
    for (name, value) in &e.fixed_params {
        let p = format!("{path}.fixed_params.{name}");
        match registry.param(&e.element_id, name) {
            None => report.error(p, format!("`{}` has no parameter `{name}`", e.element_id)),
            Some(row) if row.kind != ParamKind::Fixed => report.error(
                p,
                format!("`{name}` is a hyperparameter of `{}`", e.element_id),
            ),
            Some(row) if !value.type_checks(row.value_type) => {
                report.error(p, format!("`{value}` is not a valid {}", row.value_type))
            }
            Some(_) => {}
        }
    }
    for (name, space) in &e.hyperparams {
        let p = format!("{path}.hyperparams.{name}");
        match registry.param(&e.element_id, name) {
            None => report.error(p, format!("`{}` has no parameter `{name}`", e.element_id)),
            Some(row) if row.kind != ParamKind::Hyperparameter => report.error(
                p,
                format!("`{name}` is a fixed parameter of `{}`", e.element_id),
            ),
            Some(row) => {
                if let Err(msg) = space.check() {
                    report.error(&p, msg);
                } else if !space.type_checks(row.value_type) {
                    report.error(
                        &p,
                        format!("`{space}` does not hold {} values", row.value_type),
                    );
                }
            }
        }
    }
    check_placeholders(
        registry,
        &e.element_id,
        &e.fixed_params,
        path,
        "fixed_params",
        report,
    );
}

fn check_placeholders(
    registry: &Registry,
    element_id: &str,
    params: &BTreeMap<String, Literal>,
    path: &str,
    field: &str,
    report: &mut ValidationReport,
) {
    let Some(def) = registry.element(element_id) else {
        return;
    };
    for name in def.template().placeholders() {
        if name != "element_id" && !params.contains_key(name) {
            report.error(
                format!("{path}.{field}.{name}"),
                format!("`{name}` must be set for `{element_id}`"),
            );
        }
    }
}

fn validate_cv(
    registry: &Registry,
    cv: &CvConfig,
    path: &str,
    project: &Project,
    ctx: &TagContext,
    report: &mut ValidationReport,
) {
    let spath = format!("{path}.strategy");
    match registry.element(&cv.strategy) {
        None => {
            report.error(
                spath,
                format!("unknown cross-validation strategy `{}`", cv.strategy),
            );
            return;
        }
        Some(def) if def.category != Category::CvStrategy => {
            report.error(
                spath,
                format!(
                    "`{}` is a {}, not a cross-validation strategy",
                    cv.strategy, def.category
                ),
            );
            return;
        }
        Some(_) => check_available(registry, &cv.strategy, ctx, project, spath, report),
    }
    for (name, value) in &cv.params {
        let p = format!("{path}.params.{name}");
        match registry.param(&cv.strategy, name) {
            None => report.error(p, format!("`{}` has no parameter `{name}`", cv.strategy)),
            Some(row) if !value.type_checks(row.value_type) => {
                report.error(p, format!("`{value}` is not a valid {}", row.value_type))
            }
            Some(_) => {
                if name == "n_splits" {
                    if let Literal::Int(k) = value {
                        if *k < 2 {
                            report.error(p, "n_splits must be at least 2");
                        } else if project.data.n_samples.is_some_and(|n| *k as u64 > n) {
                            report.error(p, "n_splits exceeds n_samples");
                        }
                    }
                }
            }
        }
    }
    check_placeholders(registry, &cv.strategy, &cv.params, path, "params", report);
}

/// Configurations a grid search would evaluate: transformer grids multiply,
/// alternative estimators add up.
pub fn grid_points(project: &Project, registry: &Registry) -> u64 {
    let size = |e: &ElementInstance| -> u64 {
        e.hyperparams
            .values()
            .map(HyperparamSpace::grid_points)
            .fold(1u64, u64::saturating_mul)
    };
    let mut transformers = 1u64;
    let mut estimators = 0u64;
    for e in &project.elements {
        match registry.element(&e.element_id).map(|d| d.category) {
            Some(Category::Estimator) => estimators = estimators.saturating_add(size(e)),
            _ => transformers = transformers.saturating_mul(size(e)),
        }
    }
    transformers.saturating_mul(estimators.max(1))
}
