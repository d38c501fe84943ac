//! Script emission.
//!
//! A [`SourceDocument`] is built from a project and the registry, then
//! rendered to text. Everything element-specific comes from registry
//! templates; this module only knows the fixed scaffold (data loading,
//! `Hyperpipe` header, switch wrapper, fit call) and literal forms.

mod diff;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{
    diff_documents, diff_lines, diff_scripts, split_lines, DiffHunk, DiffOp, ScriptDiff,
};

use crate::literal::{quote, HyperparamSpace, Literal};
use crate::model::{CvConfig, ElementInstance, Project};
use crate::registry::{Category, Registry, RegistryElement};
use crate::template::TemplateError;

pub const PANDAS_IMPORT: &str = "import pandas as pd";
pub const SCAFFOLD_IMPORT: &str = "from photonai.base import Hyperpipe, PipelineElement";
pub const SWITCH_IMPORT: &str = "from photonai.base import Switch";

const PIPE: &str = "my_pipe";
const SWITCH: &str = "estimator_switch";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "position", rename_all = "snake_case")]
pub enum SectionOwner {
    Imports,
    DataLoading,
    PipelineHeader,
    Element(usize),
    /// Holds every estimator when there is more than one.
    EstimatorSwitch,
    FitCall,
}

impl fmt::Display for SectionOwner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionOwner::Imports => f.write_str("imports"),
            SectionOwner::DataLoading => f.write_str("data_loading"),
            SectionOwner::PipelineHeader => f.write_str("pipeline_header"),
            SectionOwner::Element(p) => write!(f, "element({p})"),
            SectionOwner::EstimatorSwitch => f.write_str("estimator_switch"),
            SectionOwner::FitCall => f.write_str("fit_call"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub owner: SectionOwner,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceDocument {
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("template of `{element_id}`: {source}")]
    Template {
        element_id: String,
        #[source]
        source: TemplateError,
    },
}

impl SourceDocument {
    pub fn section(&self, owner: SectionOwner) -> Option<&Section> {
        self.sections.iter().find(|s| s.owner == owner)
    }

    /// Sections joined by one blank line, lines by `\n`, with a trailing
    /// newline.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, section) in self
            .sections
            .iter()
            .filter(|s| !s.lines.is_empty())
            .enumerate()
        {
            if i > 0 {
                out.push('\n');
            }
            for line in &section.lines {
                out.push_str(line);
                out.push('\n');
            }
        }
        out
    }

    /// Owner of every rendered line. A separating blank line belongs to the
    /// section that follows it.
    pub fn line_owners(&self) -> Vec<SectionOwner> {
        let mut owners = Vec::new();
        for (i, section) in self
            .sections
            .iter()
            .filter(|s| !s.lines.is_empty())
            .enumerate()
        {
            if i > 0 {
                owners.push(section.owner);
            }
            owners.extend(std::iter::repeat_n(section.owner, section.lines.len()));
        }
        owners
    }

    /// First rendered line index of each section.
    pub fn section_starts(&self) -> Vec<(SectionOwner, usize)> {
        let mut starts = Vec::new();
        let mut line = 0;
        for (i, section) in self
            .sections
            .iter()
            .filter(|s| !s.lines.is_empty())
            .enumerate()
        {
            if i > 0 {
                line += 1;
            }
            starts.push((section.owner, line));
            line += section.lines.len();
        }
        starts
    }
}

/// Renders a document to script text.
pub fn render(document: &SourceDocument) -> String {
    document.render()
}

/// Builds the script document for a project that validated without errors.
pub fn build_document(
    project: &Project,
    registry: &Registry,
) -> Result<SourceDocument, CodegenError> {
    let lookup = |id: &str| {
        registry
            .element(id)
            .ok_or_else(|| CodegenError::UnknownElement(id.to_string()))
    };

    let mut imports: BTreeSet<String> =
        [PANDAS_IMPORT.to_string(), SCAFFOLD_IMPORT.to_string()].into();
    let mut add_imports = |def: &RegistryElement| imports.extend(def.imports.iter().cloned());

    let mut transformers = Vec::new();
    let mut estimators = Vec::new();
    let mut range_imports = BTreeSet::new();
    for (i, e) in project.elements.iter().enumerate() {
        let def = lookup(&e.element_id)?;
        add_imports(def);
        range_imports.extend(
            e.hyperparams
                .values()
                .filter_map(HyperparamSpace::required_import),
        );
        let expr = element_expr(registry, def, &e.fixed_params, Some(e))?;
        if def.category == Category::Estimator {
            estimators.push((i, expr));
        } else {
            transformers.push((i, expr));
        }
    }

    let optimizer = match &project.training.optimizer {
        Some(opt) => {
            let def = lookup(&opt.element_id)?;
            add_imports(def);
            Some((
                element_expr(registry, def, &opt.fixed_params, None)?,
                optimizer_params(registry, opt),
            ))
        }
        None => None,
    };
    let mut cv_exprs = Vec::new();
    for cv in [&project.training.outer_cv, &project.training.inner_cv] {
        cv_exprs.push(match cv {
            Some(cv) => {
                let def = lookup(&cv.strategy)?;
                add_imports(def);
                Some(cv_expr(registry, def, cv)?)
            }
            None => None,
        });
    }
    let mut metric_expr = |id: &str| -> Result<String, CodegenError> {
        let def = lookup(id)?;
        add_imports(def);
        element_expr(registry, def, &BTreeMap::new(), None)
    };
    let metrics = project
        .training
        .metrics
        .iter()
        .map(|m| metric_expr(m))
        .collect::<Result<Vec<_>, _>>()?;
    let best = project
        .training
        .best_config_metric
        .as_deref()
        .map(&mut metric_expr)
        .transpose()?;

    imports.extend(range_imports.into_iter().map(str::to_string));
    if estimators.len() > 1 {
        imports.insert(SWITCH_IMPORT.to_string());
    }

    let mut sections = vec![
        Section {
            owner: SectionOwner::Imports,
            lines: sort_imports(imports),
        },
        Section {
            owner: SectionOwner::DataLoading,
            lines: data_loading(project),
        },
        Section {
            owner: SectionOwner::PipelineHeader,
            lines: header(project, optimizer, &metrics, best, &cv_exprs),
        },
    ];
    for (i, expr) in transformers {
        sections.push(Section {
            owner: SectionOwner::Element(i),
            lines: vec![format!("{PIPE} += {expr}")],
        });
    }
    match estimators.as_slice() {
        [] => {}
        [(i, expr)] => sections.push(Section {
            owner: SectionOwner::Element(*i),
            lines: vec![format!("{PIPE} += {expr}")],
        }),
        many => {
            let mut lines = vec![format!("{SWITCH} = Switch({})", quote(SWITCH))];
            lines.extend(many.iter().map(|(_, expr)| format!("{SWITCH} += {expr}")));
            lines.push(format!("{PIPE} += {SWITCH}"));
            sections.push(Section {
                owner: SectionOwner::EstimatorSwitch,
                lines,
            });
        }
    }
    sections.push(Section {
        owner: SectionOwner::FitCall,
        lines: vec![format!("{PIPE}.fit(X, y)")],
    });
    Ok(SourceDocument { sections })
}

/// Plain `import` lines first, then `from` imports, each group sorted.
fn sort_imports(imports: BTreeSet<String>) -> Vec<String> {
    let mut lines: Vec<String> = imports.into_iter().collect();
    lines.sort_by(|a, b| (a.starts_with("from "), a).cmp(&(b.starts_with("from "), b)));
    lines
}

fn data_loading(project: &Project) -> Vec<String> {
    let data = &project.data;
    let columns = Literal::List(
        data.feature_columns
            .iter()
            .cloned()
            .map(Literal::Str)
            .collect(),
    );
    vec![
        format!("df = pd.read_csv({})", quote(&data.file_path)),
        format!("X = df[{columns}].values"),
        format!("y = df[{}].values", quote(&data.target_column)),
    ]
}

fn header(
    project: &Project,
    optimizer: Option<(String, String)>,
    metrics: &[String],
    best: Option<String>,
    cv: &[Option<String>],
) -> Vec<String> {
    let opening = format!("{PIPE} = Hyperpipe(");
    let indent = " ".repeat(opening.len());
    let (opt, opt_params) = optimizer.unwrap_or_else(|| ("None".into(), "{}".into()));
    let args = [
        format!("optimizer={opt}"),
        format!("optimizer_params={opt_params}"),
        format!("metrics=[{}]", metrics.join(", ")),
        format!(
            "best_config_metric={}",
            best.unwrap_or_else(|| "None".into())
        ),
        format!("outer_cv={}", cv[0].as_deref().unwrap_or("None")),
        format!("inner_cv={}", cv[1].as_deref().unwrap_or("None")),
    ];
    let mut lines = vec![format!("{opening}{},", quote(&project.name))];
    let last = args.len() - 1;
    for (i, arg) in args.into_iter().enumerate() {
        let end = if i == last { ")" } else { "," };
        lines.push(format!("{indent}{arg}{end}"));
    }
    lines
}

fn optimizer_params(registry: &Registry, opt: &ElementInstance) -> String {
    let entries: Vec<String> = ordered(registry, &opt.element_id, &opt.fixed_params)
        .map(|(name, value)| format!("{}: {value}", quote(name)))
        .collect();
    format!("{{{}}}", entries.join(", "))
}

fn cv_expr(
    registry: &Registry,
    def: &RegistryElement,
    cv: &CvConfig,
) -> Result<String, CodegenError> {
    element_expr(registry, def, &cv.params, None)
}

/// Map entries in the registry's declaration order, then any the registry
/// does not know about.
fn ordered<'a, V>(
    registry: &'a Registry,
    element_id: &str,
    values: &'a BTreeMap<String, V>,
) -> impl Iterator<Item = (&'a str, &'a V)> {
    let declared = registry.param_names(element_id);
    let known: Vec<(&str, &V)> = declared
        .iter()
        .filter_map(|n| values.get_key_value(*n))
        .map(|(k, v)| (k.as_str(), v))
        .collect();
    let unknown = values
        .iter()
        .filter(move |(k, _)| !declared.contains(&k.as_str()))
        .map(|(k, v)| (k.as_str(), v));
    known.into_iter().chain(unknown)
}

/// Instantiates an element's template. For call templates, hyperparameters
/// and fixed parameters not consumed by a placeholder are appended as
/// keyword arguments.
fn element_expr(
    registry: &Registry,
    def: &RegistryElement,
    fixed: &BTreeMap<String, Literal>,
    step: Option<&ElementInstance>,
) -> Result<String, CodegenError> {
    let template = def.template();
    let placeholders = template.placeholders();
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("element_id", def.element_id.clone());
    for (name, value) in fixed {
        if placeholders.contains(&name.as_str()) {
            values.insert(name, value.canonical());
        }
    }
    let filled = template
        .render(&values)
        .map_err(|source| CodegenError::Template {
            element_id: def.element_id.clone(),
            source,
        })?;
    if !matches!(
        def.category,
        Category::Transformer | Category::Estimator | Category::CvStrategy
    ) {
        return Ok(filled);
    }

    let mut extra = Vec::new();
    if let Some(step) = step {
        if !step.hyperparams.is_empty() {
            let entries: Vec<String> = ordered(registry, &def.element_id, &step.hyperparams)
                .map(|(name, space)| format!("{}: {space}", quote(name)))
                .collect();
            extra.push(format!("hyperparameters={{{}}}", entries.join(", ")));
        }
    }
    for (name, value) in ordered(registry, &def.element_id, fixed) {
        if !placeholders.contains(&name) {
            extra.push(format!("{name}={value}"));
        }
    }
    if extra.is_empty() {
        return Ok(filled);
    }
    let head = filled.strip_suffix(')').unwrap_or(&filled);
    let sep = if head.ends_with('(') { "" } else { ", " };
    Ok(format!("{head}{sep}{})", extra.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::validate_project;

    fn doc(sections: &[(SectionOwner, &[&str])]) -> SourceDocument {
        SourceDocument {
            sections: sections
                .iter()
                .map(|(o, l)| Section {
                    owner: *o,
                    lines: l.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn render_joins_sections() {
        let d = doc(&[
            (SectionOwner::Imports, &["a"]),
            (SectionOwner::FitCall, &["b"]),
        ]);
        assert_eq!(render(&d), "a\n\nb\n");
        assert_eq!(
            d.line_owners(),
            [
                SectionOwner::Imports,
                SectionOwner::FitCall,
                SectionOwner::FitCall
            ]
        );
        assert_eq!(render(&SourceDocument::default()), "");
    }

    /// The golden script written out by instantiating each bundled template
    /// by hand and joining sections in the fixed order.
    fn hand_instantiated_golden() -> String {
        let imports = [
            "import pandas as pd",
            "from photonai.base import Hyperpipe, PipelineElement",
            "from sklearn.model_selection import KFold",
        ];
        let data = [
            "df = pd.read_csv('breast_cancer.csv')",
            "X = df[['mean_radius', 'mean_texture']].values",
            "y = df['diagnosis'].values",
        ];
        let pad = " ".repeat("my_pipe = Hyperpipe(".len());
        let header = [
            "my_pipe = Hyperpipe('demo_project',".to_string(),
            format!("{pad}optimizer='grid_search',"),
            format!("{pad}optimizer_params={{}},"),
            format!("{pad}metrics=['accuracy', 'balanced_accuracy'],"),
            format!("{pad}best_config_metric='accuracy',"),
            format!("{pad}outer_cv=KFold(n_splits=5),"),
            format!("{pad}inner_cv=KFold(n_splits=5))"),
        ];
        let sections = [
            imports.join("\n"),
            data.join("\n"),
            header.join("\n"),
            "my_pipe += PipelineElement('StandardScaler')".into(),
            "my_pipe += PipelineElement('PCA', hyperparameters={'n_components': [5, 10]})".into(),
            "my_pipe += PipelineElement('SVC', hyperparameters={'C': [0.1, 1, 10]})".into(),
            "my_pipe.fit(X, y)".into(),
        ];
        format!("{}\n", sections.join("\n\n"))
    }

    #[test]
    fn golden_matches_hand_instantiation_and_frozen_file() {
        let reg = Registry::bundled();
        let project = fixtures::golden_project();
        let script = render(&build_document(&project, &reg).unwrap());
        assert_eq!(script, hand_instantiated_golden());
        assert_eq!(script, fixtures::GOLDEN_SCRIPT);
    }

    #[test]
    fn no_transformers() {
        let reg = Registry::bundled();
        let mut project = fixtures::golden_project();
        project.elements.drain(..2);
        project.renumber();
        let d = build_document(&project, &reg).unwrap();
        let owners: Vec<_> = d.sections.iter().map(|s| s.owner).collect();
        assert_eq!(
            owners,
            [
                SectionOwner::Imports,
                SectionOwner::DataLoading,
                SectionOwner::PipelineHeader,
                SectionOwner::Element(0),
                SectionOwner::FitCall
            ]
        );
    }

    #[test]
    fn two_estimators_share_one_switch_section() {
        let reg = Registry::bundled();
        let mut project = fixtures::golden_project();
        project.elements.push(
            ElementInstance::new("RandomForestClassifier")
                .with_fixed("n_estimators", Literal::Int(100)),
        );
        project.renumber();
        assert!(!validate_project(&project, &reg).has_errors());
        let d = build_document(&project, &reg).unwrap();
        let switch: Vec<_> = d
            .sections
            .iter()
            .filter(|s| s.owner == SectionOwner::EstimatorSwitch)
            .collect();
        assert_eq!(switch.len(), 1);
        assert_eq!(
            switch[0].lines,
            [
                "estimator_switch = Switch('estimator_switch')",
                "estimator_switch += PipelineElement('SVC', hyperparameters={'C': [0.1, 1, 10]})",
                "estimator_switch += PipelineElement('RandomForestClassifier', n_estimators=100)",
                "my_pipe += estimator_switch",
            ]
        );
        assert!(d.section(SectionOwner::Element(2)).is_none());
        assert!(d
            .section(SectionOwner::Imports)
            .unwrap()
            .lines
            .contains(&SWITCH_IMPORT.to_string()));
    }

    #[test]
    fn kwargs_and_ranges() {
        let reg = Registry::bundled();
        let mut project = fixtures::golden_project();
        project.elements[2] = ElementInstance::new("RandomForestClassifier")
            .with_fixed("n_estimators", Literal::Int(50))
            .with_hyperparam(
                "max_depth",
                HyperparamSpace::IntRange {
                    min: 2,
                    max: 8,
                    step: 2,
                },
            );
        project.training.optimizer = Some(
            ElementInstance::new("random_search").with_fixed("n_configurations", Literal::Int(30)),
        );
        project.training.inner_cv = Some(
            CvConfig::new("ShuffleSplit")
                .with_param("n_splits", Literal::Int(3))
                .with_param("test_size", Literal::Float(0.25)),
        );
        project.renumber();
        let script = render(&build_document(&project, &reg).unwrap());
        assert!(script.contains(
            "my_pipe += PipelineElement('RandomForestClassifier', hyperparameters={'max_depth': IntegerRange(2, 8, step=2)}, n_estimators=50)"
        ));
        assert!(script.contains("optimizer_params={'n_configurations': 30},"));
        assert!(script.contains("inner_cv=ShuffleSplit(n_splits=3, test_size=0.25))"));
        assert!(script.starts_with(
            "import pandas as pd\nfrom photonai.base import Hyperpipe, PipelineElement\nfrom photonai.optimization import IntegerRange\nfrom sklearn.model_selection import KFold\nfrom sklearn.model_selection import ShuffleSplit\n\n"
        ));
    }

    #[test]
    fn unknown_element_is_an_error() {
        let reg = Registry::bundled();
        let mut project = fixtures::golden_project();
        project.elements[0].element_id = "Nope".into();
        assert_eq!(
            build_document(&project, &reg),
            Err(CodegenError::UnknownElement("Nope".into()))
        );
    }

    #[test]
    fn section_starts_follow_owners() {
        let reg = Registry::bundled();
        let d = build_document(&fixtures::golden_project(), &reg).unwrap();
        let owners = d.line_owners();
        for (owner, start) in d.section_starts() {
            assert_eq!(owners[start], owner);
        }
        assert_eq!(owners.len(), d.render().lines().count());
    }
}
