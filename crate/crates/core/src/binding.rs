//! Form binding: parses submitted key/value pairs into typed project paths
//! and applies them to a project.
//!
//! Keys follow `path := segment ('.' segment)*` with
//! `segment := name | name '[' index ']'`. Values stay raw strings until
//! they are applied, where they are coerced against the registry's declared
//! parameter types.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::literal::{parse_literal, parse_space, Literal, ValueType};
use crate::model::{AnalysisType, CvConfig, CvLoop, ElementInstance, Project};
use crate::registry::{Category, ParamKind, Registry};
use crate::steps::StepId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSegment {
    pub name: String,
    pub index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingPath(pub Vec<PathSegment>);

impl fmt::Display for BindingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(&seg.name)?;
            if let Some(idx) = seg.index {
                write!(f, "[{idx}]")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid binding key `{key}` at offset {offset}: {message}")]
pub struct PathSyntaxError {
    pub key: String,
    pub offset: usize,
    pub message: String,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl BindingPath {
    pub fn parse(key: &str) -> Result<Self, PathSyntaxError> {
        let err = |offset: usize, message: &str| PathSyntaxError {
            key: key.to_string(),
            offset,
            message: message.to_string(),
        };
        let bytes = key.as_bytes();
        let mut segments = Vec::new();
        let mut pos = 0;
        loop {
            let start = pos;
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            let name = &key[start..pos];
            if name.is_empty() {
                return Err(err(start, "expected a name"));
            }
            if !is_identifier(name) {
                return Err(err(start, "names cannot start with a digit"));
            }
            let mut index = None;
            if pos < bytes.len() && bytes[pos] == b'[' {
                pos += 1;
                let istart = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                if pos == istart {
                    return Err(err(istart, "index must be a non-negative integer"));
                }
                let value = key[istart..pos]
                    .parse::<usize>()
                    .map_err(|_| err(istart, "index out of range"))?;
                if pos >= bytes.len() || bytes[pos] != b']' {
                    return Err(err(pos, "expected `]`"));
                }
                pos += 1;
                index = Some(value);
            }
            segments.push(PathSegment {
                name: name.to_string(),
                index,
            });
            if pos == bytes.len() {
                return Ok(BindingPath(segments));
            }
            if bytes[pos] != b'.' {
                return Err(err(pos, "expected `.` or end of key"));
            }
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub path: BindingPath,
    pub value: String,
}

/// Parsed form submission, in submission order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BindingSet {
    pub bindings: Vec<Binding>,
}

impl BindingSet {
    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }
}

/// Parses form key/value pairs. Values are kept as submitted.
pub fn bind_form<K: AsRef<str>, V: AsRef<str>>(
    pairs: &[(K, V)],
) -> Result<BindingSet, PathSyntaxError> {
    let bindings = pairs
        .iter()
        .map(|(k, v)| {
            Ok(Binding {
                path: BindingPath::parse(k.as_ref())?,
                value: v.as_ref().to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(BindingSet { bindings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingErrorKind {
    UnknownPath,
    TypeMismatch,
    UnknownElement,
    OutOfRange,
    OrderViolation,
    NotInStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{path}: {message}")]
pub struct BindingError {
    pub path: String,
    pub kind: BindingErrorKind,
    pub message: String,
}

/// Which bindings a submission may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Any,
    Step(StepId),
}

/// Project-level paths whose values the wizard otherwise defaults.
pub mod flags {
    pub const OPTIMIZER: &str = "training.optimizer";
    pub const METRICS: &str = "training.metrics";
    pub const BEST_METRIC: &str = "training.best_config_metric";
    pub const OUTER_STRATEGY: &str = "training.outer_cv.strategy";
    pub const INNER_STRATEGY: &str = "training.inner_cv.strategy";
}

fn strategy_flag(which: CvLoop) -> &'static str {
    match which {
        CvLoop::Outer => flags::OUTER_STRATEGY,
        CvLoop::Inner => flags::INNER_STRATEGY,
    }
}

/// Applies every binding in order. Element indices refer to positions at
/// the start of the submission; an index past the end adds an element,
/// which is placed at the end of its category's zone. An empty
/// `element_id` removes the element, and an empty parameter value hands
/// the parameter back to the defaults.
///
/// On any error the project may be partially modified; callers wanting
/// all-or-nothing semantics apply to a clone.
pub fn apply_bindings(
    project: &mut Project,
    bindings: &BindingSet,
    registry: &Registry,
    scope: Scope,
) -> Result<(), Vec<BindingError>> {
    let mut keys: Vec<usize> = (0..project.elements.len()).collect();
    let original_len = keys.len();
    let mut errors = Vec::new();
    for b in &bindings.bindings {
        let mut applier = Applier {
            project,
            registry,
            keys: &mut keys,
            original_len,
            scope,
            path: &b.path,
        };
        if let Err(e) = applier.apply(&b.value) {
            errors.push(e);
        }
    }
    project.renumber();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

struct Applier<'a> {
    project: &'a mut Project,
    registry: &'a Registry,
    keys: &'a mut Vec<usize>,
    original_len: usize,
    scope: Scope,
    path: &'a BindingPath,
}

impl Applier<'_> {
    fn error(&self, kind: BindingErrorKind, message: impl Into<String>) -> BindingError {
        BindingError {
            path: self.path.to_string(),
            kind,
            message: message.into(),
        }
    }

    fn unknown(&self) -> BindingError {
        self.error(BindingErrorKind::UnknownPath, "no such field")
    }

    fn require_step(&self, step: StepId) -> Result<(), BindingError> {
        match self.scope {
            Scope::Step(s) if s != step => Err(self.error(
                BindingErrorKind::NotInStep,
                format!("field belongs to step `{step}`, not `{s}`"),
            )),
            _ => Ok(()),
        }
    }

    fn apply(&mut self, raw: &str) -> Result<(), BindingError> {
        let segs = &self.path.0;
        let names: Vec<&str> = segs.iter().map(|s| s.name.as_str()).collect();
        let only_first_indexed = segs.iter().skip(1).all(|s| s.index.is_none());
        if !only_first_indexed || (segs[0].index.is_some() && names[0] != "elements") {
            return Err(self.unknown());
        }
        match names.as_slice() {
            ["name"] => {
                self.require_step(StepId::ProjectData)?;
                self.project.name = raw.to_string();
            }
            ["analysis_type"] => {
                self.require_step(StepId::ProjectData)?;
                self.project.analysis_type = AnalysisType::parse(raw.trim()).ok_or_else(|| {
                    self.error(
                        BindingErrorKind::TypeMismatch,
                        "expected `classification` or `regression`",
                    )
                })?;
            }
            ["data", field] => {
                self.require_step(StepId::ProjectData)?;
                match *field {
                    "file_path" => self.project.data.file_path = raw.to_string(),
                    "target_column" => self.project.data.target_column = raw.to_string(),
                    "feature_columns" => {
                        self.project.data.feature_columns = self.string_list(raw)?
                    }
                    "n_samples" => {
                        let n = raw.trim().parse::<u64>().map_err(|_| {
                            self.error(
                                BindingErrorKind::TypeMismatch,
                                "expected a non-negative integer",
                            )
                        })?;
                        self.project.data.n_samples = Some(n);
                    }
                    _ => return Err(self.unknown()),
                }
            }
            ["training", rest @ ..] => {
                self.require_step(StepId::Optimization)?;
                self.apply_training(rest, raw)?;
            }
            ["elements", rest @ ..] => {
                let Some(index) = segs[0].index else {
                    return Err(self.unknown());
                };
                self.apply_element(index, rest, raw)?;
            }
            _ => return Err(self.unknown()),
        }
        Ok(())
    }

    fn string_list(&self, raw: &str) -> Result<Vec<String>, BindingError> {
        let trimmed = raw.trim();
        if trimmed.starts_with('[') {
            let mismatch =
                || self.error(BindingErrorKind::TypeMismatch, "expected a list of strings");
            match parse_literal(trimmed) {
                Ok(Literal::List(items)) => items
                    .into_iter()
                    .map(|l| match l {
                        Literal::Str(s) => Ok(s),
                        _ => Err(mismatch()),
                    })
                    .collect(),
                _ => Err(mismatch()),
            }
        } else {
            Ok(trimmed
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect())
        }
    }

    fn element_of(&self, raw: &str, category: Category) -> Result<String, BindingError> {
        let id = raw.trim();
        match self.registry.element(id) {
            None => Err(self.error(
                BindingErrorKind::UnknownElement,
                format!("unknown element `{id}`"),
            )),
            Some(def) if def.category != category => Err(self.error(
                BindingErrorKind::TypeMismatch,
                format!("`{id}` is a {}, expected a {category}", def.category),
            )),
            Some(_) => Ok(id.to_string()),
        }
    }

    fn apply_training(&mut self, rest: &[&str], raw: &str) -> Result<(), BindingError> {
        match rest {
            ["optimizer"] => {
                if raw.trim().is_empty() {
                    self.project.user_set.remove(flags::OPTIMIZER);
                    return Ok(());
                }
                let id = self.element_of(raw, Category::Optimizer)?;
                let training = &mut self.project.training;
                if training
                    .optimizer
                    .as_ref()
                    .is_none_or(|o| o.element_id != id)
                {
                    training.optimizer = Some(ElementInstance::new(id));
                }
                self.project.user_set.insert(flags::OPTIMIZER.into());
            }
            ["optimizer", "fixed_params", param] => {
                let Some(opt) = self.project.training.optimizer.as_ref() else {
                    return Err(self.error(BindingErrorKind::UnknownPath, "no optimizer chosen"));
                };
                let ty = self.fixed_type(&opt.element_id, param)?;
                let value = self.coerce_literal(raw, ty)?;
                let opt = self
                    .project
                    .training
                    .optimizer
                    .as_mut()
                    .expect("checked above");
                set_param(&mut opt.fixed_params, &mut opt.user_set, param, value);
            }
            [cv @ ("outer_cv" | "inner_cv"), "strategy"] => {
                let which = if *cv == "outer_cv" {
                    CvLoop::Outer
                } else {
                    CvLoop::Inner
                };
                if raw.trim().is_empty() {
                    self.project.user_set.remove(strategy_flag(which));
                    return Ok(());
                }
                let id = self.element_of(raw, Category::CvStrategy)?;
                let slot = self.project.training.cv_mut(which);
                if slot.as_ref().is_none_or(|c| c.strategy != id) {
                    *slot = Some(CvConfig::new(id));
                }
                self.project.user_set.insert(strategy_flag(which).into());
            }
            [cv @ ("outer_cv" | "inner_cv"), "params", param] => {
                let which = if *cv == "outer_cv" {
                    CvLoop::Outer
                } else {
                    CvLoop::Inner
                };
                let Some(strategy) = self.project.training.cv(which).map(|c| c.strategy.clone())
                else {
                    return Err(self.error(
                        BindingErrorKind::UnknownPath,
                        "no cross-validation strategy chosen",
                    ));
                };
                let ty = self.fixed_type(&strategy, param)?;
                let value = self.coerce_literal(raw, ty)?;
                let cv = self
                    .project
                    .training
                    .cv_mut(which)
                    .as_mut()
                    .expect("checked above");
                set_param(&mut cv.params, &mut cv.user_set, param, value);
            }
            ["metrics"] => {
                let ids = self.string_list(raw)?;
                for id in &ids {
                    self.element_of(id, Category::Metric)?;
                }
                if ids.is_empty() {
                    self.project.user_set.remove(flags::METRICS);
                } else {
                    self.project.training.metrics = ids;
                    self.project.user_set.insert(flags::METRICS.into());
                }
            }
            ["best_config_metric"] => {
                if raw.trim().is_empty() {
                    self.project.user_set.remove(flags::BEST_METRIC);
                    return Ok(());
                }
                let id = self.element_of(raw, Category::Metric)?;
                self.project.training.best_config_metric = Some(id);
                self.project.user_set.insert(flags::BEST_METRIC.into());
            }
            _ => return Err(self.unknown()),
        }
        Ok(())
    }

    fn fixed_type(&self, element_id: &str, param: &str) -> Result<Option<ValueType>, BindingError> {
        match self.registry.param(element_id, param) {
            Some(row) if row.kind == ParamKind::Fixed => Ok(Some(row.value_type)),
            _ => Err(self.error(
                BindingErrorKind::UnknownPath,
                format!("`{element_id}` has no fixed parameter `{param}`"),
            )),
        }
    }

    /// `None` when the raw value is empty, meaning "back to the default".
    fn coerce_literal(
        &self,
        raw: &str,
        ty: Option<ValueType>,
    ) -> Result<Option<Literal>, BindingError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Ok(None);
        }
        let ty = ty.expect("callers pass a declared type");
        let parsed = parse_literal(trimmed);
        let value = match (ty, parsed) {
            (ValueType::String, Ok(Literal::Str(s))) if trimmed.starts_with(['\'', '"']) => {
                Literal::Str(s)
            }
            (ValueType::String, _) => Literal::Str(raw.to_string()),
            (_, Ok(lit)) if lit.type_checks(ty) => lit,
            _ => {
                return Err(self.error(
                    BindingErrorKind::TypeMismatch,
                    format!("`{trimmed}` is not a valid {ty}"),
                ))
            }
        };
        Ok(Some(value))
    }

    fn resolve_key(&self, index: usize) -> Option<usize> {
        self.keys.iter().position(|k| *k == index)
    }

    fn category_of(&self, element_id: &str) -> Option<Category> {
        self.registry.element(element_id).map(|d| d.category)
    }

    fn require_element_step(&self, category: Category) -> Result<(), BindingError> {
        match category {
            Category::Estimator => self.require_step(StepId::Estimators),
            _ => self.require_step(StepId::Transformers),
        }
    }

    fn apply_element(
        &mut self,
        index: usize,
        rest: &[&str],
        raw: &str,
    ) -> Result<(), BindingError> {
        let current = self.resolve_key(index);
        match rest {
            ["element_id"] => {
                let id = raw.trim();
                if id.is_empty() {
                    let Some(at) = current else {
                        return Err(self.error(
                            BindingErrorKind::OutOfRange,
                            format!("no element at index {index}"),
                        ));
                    };
                    let category = self.category_of(&self.project.elements[at].element_id);
                    self.require_element_step(category.unwrap_or(Category::Transformer))?;
                    self.project.elements.remove(at);
                    self.keys.remove(at);
                    return Ok(());
                }
                let category = match self.category_of(id) {
                    None => {
                        return Err(self.error(
                            BindingErrorKind::UnknownElement,
                            format!("unknown element `{id}`"),
                        ))
                    }
                    Some(c @ (Category::Transformer | Category::Estimator)) => c,
                    Some(c) => {
                        return Err(self.error(
                            BindingErrorKind::TypeMismatch,
                            format!("`{id}` is a {c}, not a pipeline step"),
                        ))
                    }
                };
                self.require_element_step(category)?;
                match current {
                    Some(at) => {
                        if self.project.elements[at].element_id == id {
                            return Ok(());
                        }
                        if let Some(old) = self.category_of(&self.project.elements[at].element_id) {
                            if old != category {
                                return Err(self.error(
                                    BindingErrorKind::OrderViolation,
                                    format!("cannot replace a {old} with a {category} in place"),
                                ));
                            }
                        }
                        self.project.elements[at] = ElementInstance::new(id);
                    }
                    None => {
                        if index < self.original_len {
                            return Err(self.error(
                                BindingErrorKind::OutOfRange,
                                format!("element {index} was removed earlier in this submission"),
                            ));
                        }
                        let at = match category {
                            Category::Transformer => self
                                .project
                                .elements
                                .iter()
                                .position(|e| {
                                    self.category_of(&e.element_id) == Some(Category::Estimator)
                                })
                                .unwrap_or(self.project.elements.len()),
                            _ => self.project.elements.len(),
                        };
                        self.project.elements.insert(at, ElementInstance::new(id));
                        self.keys.insert(at, index);
                    }
                }
            }
            [field @ ("fixed_params" | "hyperparams"), param] => {
                let Some(at) = current else {
                    return Err(self.error(
                        BindingErrorKind::OutOfRange,
                        format!("no element at index {index}"),
                    ));
                };
                let element_id = self.project.elements[at].element_id.clone();
                let category = self
                    .category_of(&element_id)
                    .unwrap_or(Category::Transformer);
                self.require_element_step(category)?;
                let want = if *field == "fixed_params" {
                    ParamKind::Fixed
                } else {
                    ParamKind::Hyperparameter
                };
                let row = match self.registry.param(&element_id, param) {
                    Some(row) if row.kind == want => row,
                    _ => {
                        return Err(self.error(
                            BindingErrorKind::UnknownPath,
                            format!(
                                "`{element_id}` has no {} `{param}`",
                                field.trim_end_matches('s').replace('_', " ")
                            ),
                        ))
                    }
                };
                if want == ParamKind::Fixed {
                    let value = self.coerce_literal(raw, Some(row.value_type))?;
                    let e = &mut self.project.elements[at];
                    set_param(&mut e.fixed_params, &mut e.user_set, param, value);
                } else {
                    let trimmed = raw.trim();
                    let value = if trimmed.is_empty() {
                        None
                    } else {
                        let space = parse_space(trimmed)
                            .map_err(|e| self.error(BindingErrorKind::TypeMismatch, e.message))?;
                        space
                            .check()
                            .map_err(|m| self.error(BindingErrorKind::TypeMismatch, m))?;
                        if !space.type_checks(row.value_type) {
                            return Err(self.error(
                                BindingErrorKind::TypeMismatch,
                                format!("`{trimmed}` does not hold {} values", row.value_type),
                            ));
                        }
                        Some(space)
                    };
                    let e = &mut self.project.elements[at];
                    set_param(&mut e.hyperparams, &mut e.user_set, param, value);
                }
            }
            _ => return Err(self.unknown()),
        }
        Ok(())
    }
}

fn set_param<V>(
    values: &mut std::collections::BTreeMap<String, V>,
    user_set: &mut std::collections::BTreeSet<String>,
    name: &str,
    value: Option<V>,
) {
    match value {
        Some(v) => {
            values.insert(name.to_string(), v);
            user_set.insert(name.to_string());
        }
        None => {
            values.remove(name);
            user_set.remove(name);
        }
    }
}

/// Writes a project as form pairs that [`bind_form`] and
/// [`apply_bindings`] turn back into the same content.
pub fn to_form_pairs(project: &Project) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut push = |k: String, v: String| pairs.push((k, v));
    let strings = |items: &[String]| {
        Literal::List(items.iter().cloned().map(Literal::Str).collect()).canonical()
    };

    push("name".into(), project.name.clone());
    push(
        "analysis_type".into(),
        project.analysis_type.as_str().into(),
    );
    let data = &project.data;
    push("data.file_path".into(), data.file_path.clone());
    push(
        "data.feature_columns".into(),
        strings(&data.feature_columns),
    );
    push("data.target_column".into(), data.target_column.clone());
    if let Some(n) = data.n_samples {
        push("data.n_samples".into(), n.to_string());
    }
    let training = &project.training;
    if let Some(opt) = &training.optimizer {
        push("training.optimizer".into(), opt.element_id.clone());
        for (name, value) in &opt.fixed_params {
            push(
                format!("training.optimizer.fixed_params.{name}"),
                value.canonical(),
            );
        }
    }
    for which in [CvLoop::Outer, CvLoop::Inner] {
        if let Some(cv) = training.cv(which) {
            push(
                format!("training.{}.strategy", which.field()),
                cv.strategy.clone(),
            );
            for (name, value) in &cv.params {
                push(
                    format!("training.{}.params.{name}", which.field()),
                    value.canonical(),
                );
            }
        }
    }
    if !training.metrics.is_empty() {
        push("training.metrics".into(), strings(&training.metrics));
    }
    if let Some(best) = &training.best_config_metric {
        push("training.best_config_metric".into(), best.clone());
    }
    for (i, e) in project.elements.iter().enumerate() {
        push(format!("elements[{i}].element_id"), e.element_id.clone());
        for (name, value) in &e.fixed_params {
            push(
                format!("elements[{i}].fixed_params.{name}"),
                value.canonical(),
            );
        }
        for (name, space) in &e.hyperparams {
            push(
                format!("elements[{i}].hyperparams.{name}"),
                space.canonical(),
            );
        }
    }
    pairs
}
