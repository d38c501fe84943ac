//! Catalogue of selectable building blocks, loaded from CSV content files.
//!
//! Two tables make up a content pack:
//!
//! * `elements.csv`:
//!   `element_id,category,display_name,tags,imports,construct_template,tooltip,doc_url`
//! * `parameters.csv`:
//!   `element_id,param_name,kind,value_type,default_literal,applies_tags,tooltip,doc_url`
//!
//! `tags`, `imports` and `applies_tags` hold `;`-separated lists. A content
//! directory may carry extra `*.elements.csv` / `*.parameters.csv` files which
//! are appended after the main tables in file-name order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::literal::{parse_literal, parse_space, ParamValue, ValueType};
use crate::model::TagContext;
use crate::template::Template;

pub const ELEMENTS_HEADER: [&str; 8] = [
    "element_id",
    "category",
    "display_name",
    "tags",
    "imports",
    "construct_template",
    "tooltip",
    "doc_url",
];

pub const PARAMETERS_HEADER: [&str; 8] = [
    "element_id",
    "param_name",
    "kind",
    "value_type",
    "default_literal",
    "applies_tags",
    "tooltip",
    "doc_url",
];

const BUNDLED_ELEMENTS: &str = include_str!("../content/elements.csv");
const BUNDLED_PARAMETERS: &str = include_str!("../content/parameters.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Transformer,
    Estimator,
    Optimizer,
    CvStrategy,
    Metric,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Transformer,
        Category::Estimator,
        Category::Optimizer,
        Category::CvStrategy,
        Category::Metric,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "transformer" => Self::Transformer,
            "estimator" => Self::Estimator,
            "optimizer" => Self::Optimizer,
            "cv_strategy" => Self::CvStrategy,
            "metric" => Self::Metric,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Transformer => "transformer",
            Self::Estimator => "estimator",
            Self::Optimizer => "optimizer",
            Self::CvStrategy => "cv_strategy",
            Self::Metric => "metric",
        }
    }

    /// Pipeline steps, the only categories that may have hyperparameters.
    pub fn is_pipeline_step(self) -> bool {
        matches!(self, Self::Transformer | Self::Estimator)
    }

    /// Categories whose template is a call that takes keyword arguments.
    fn takes_kwargs(self) -> bool {
        matches!(self, Self::Transformer | Self::Estimator | Self::CvStrategy)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegistryElement {
    pub element_id: String,
    pub category: Category,
    pub display_name: String,
    pub tags: BTreeSet<String>,
    pub imports: Vec<String>,
    pub construct_template: String,
    pub tooltip: String,
    pub doc_url: String,
    #[serde(skip)]
    pub(crate) template: Template,
}

impl RegistryElement {
    pub fn template(&self) -> &Template {
        &self.template
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Fixed,
    Hyperparameter,
}

impl ParamKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(Self::Fixed),
            "hyperparameter" => Some(Self::Hyperparameter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterRow {
    pub element_id: String,
    pub param_name: String,
    pub kind: ParamKind,
    pub value_type: ValueType,
    pub default_literal: ParamValue,
    pub applies_tags: BTreeSet<String>,
    pub tooltip: String,
    pub doc_url: String,
}

/// File, 1-based line number and column of a content problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub row: u64,
    pub column: String,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} row {}, column `{}`",
            self.file, self.row, self.column
        )
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{at}: duplicate id `{id}`")]
    DuplicateId { at: Location, id: String },
    #[error("{at}: unknown element `{id}`")]
    UnknownElementRef { at: Location, id: String },
    #[error("{at}: malformed literal: {message}")]
    MalformedLiteral { at: Location, message: String },
    #[error("{at}: missing column")]
    MissingColumn { at: Location },
    #[error("{at}: {message}")]
    InvalidValue { at: Location, message: String },
    #[error("{file} row {row}: {message}")]
    Csv {
        file: String,
        row: u64,
        message: String,
    },
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LoadError {
    pub fn location(&self) -> Option<&Location> {
        match self {
            LoadError::DuplicateId { at, .. }
            | LoadError::UnknownElementRef { at, .. }
            | LoadError::MalformedLiteral { at, .. }
            | LoadError::MissingColumn { at }
            | LoadError::InvalidValue { at, .. } => Some(at),
            LoadError::Csv { .. } | LoadError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("no default of `{param}` for `{element_id}` applies in this context")]
    NoApplicableDefault { element_id: String, param: String },
}

/// One named CSV table.
#[derive(Debug, Clone)]
pub struct ContentFile {
    pub name: String,
    pub text: String,
}

impl ContentFile {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, LoadError> {
        let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(Self { name, text })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TagIndex {
    bits: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TagMask(Vec<u64>);

impl TagMask {
    fn with_bits(bits: impl IntoIterator<Item = usize>, width: usize) -> Self {
        let mut words = vec![0u64; width.div_ceil(64).max(1)];
        for b in bits {
            words[b / 64] |= 1 << (b % 64);
        }
        TagMask(words)
    }

    fn subset_of(&self, other: &TagMask) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

/// Immutable after loading; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    elements: IndexMap<String, RegistryElement>,
    parameters: IndexMap<String, Vec<ParameterRow>>,
    tag_index: TagIndex,
    masks: HashMap<String, TagMask>,
}

/// Loads a registry from one elements table and one parameters table.
pub fn load_registry(
    elements: &ContentFile,
    parameters: &ContentFile,
) -> Result<Registry, LoadError> {
    Registry::load(
        std::slice::from_ref(elements),
        std::slice::from_ref(parameters),
    )
}

impl Registry {
    pub fn empty() -> Self {
        Self::build(IndexMap::new(), IndexMap::new())
    }

    /// The content pack compiled into the crate.
    pub fn bundled() -> Self {
        load_registry(
            &ContentFile::new("elements.csv", BUNDLED_ELEMENTS),
            &ContentFile::new("parameters.csv", BUNDLED_PARAMETERS),
        )
        .expect("bundled content pack is valid")
    }

    /// Loads `elements.csv`, `parameters.csv` and any `*.elements.csv` /
    /// `*.parameters.csv` drop-in files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, LoadError> {
        let mut extra_elements = Vec::new();
        let mut extra_parameters = Vec::new();
        let entries = fs::read_dir(dir).map_err(|source| LoadError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| LoadError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".elements.csv") {
                extra_elements.push(entry.path());
            } else if name.ends_with(".parameters.csv") {
                extra_parameters.push(entry.path());
            }
        }
        extra_elements.sort();
        extra_parameters.sort();

        let mut elements = vec![ContentFile::read(&dir.join("elements.csv"))?];
        for p in &extra_elements {
            elements.push(ContentFile::read(p)?);
        }
        let mut parameters = vec![ContentFile::read(&dir.join("parameters.csv"))?];
        for p in &extra_parameters {
            parameters.push(ContentFile::read(p)?);
        }
        Self::load(&elements, &parameters)
    }

    /// Loads and validates several element and parameter tables, in order.
    pub fn load(elements: &[ContentFile], parameters: &[ContentFile]) -> Result<Self, LoadError> {
        let mut by_id: IndexMap<String, RegistryElement> = IndexMap::new();
        // where each element's template came from, for placeholder errors
        let mut template_at: HashMap<String, Location> = HashMap::new();

        for file in elements {
            for (row, rec) in read_table(file, &ELEMENTS_HEADER)? {
                let at = |column: &str| Location {
                    file: file.name.clone(),
                    row,
                    column: column.to_string(),
                };
                let element_id = rec[0].trim().to_string();
                if element_id.is_empty() {
                    return Err(invalid(at("element_id"), "element_id must not be empty"));
                }
                if by_id.contains_key(&element_id) {
                    return Err(LoadError::DuplicateId {
                        at: at("element_id"),
                        id: element_id,
                    });
                }
                let category = Category::parse(rec[1].trim()).ok_or_else(|| {
                    invalid(
                        at("category"),
                        format!("unknown category `{}`", rec[1].trim()),
                    )
                })?;
                let tooltip = rec[6].trim().to_string();
                if tooltip.is_empty() {
                    return Err(invalid(at("tooltip"), "tooltip must not be empty"));
                }
                let doc_url = rec[7].trim().to_string();
                if doc_url.is_empty() {
                    return Err(invalid(at("doc_url"), "doc_url must not be empty"));
                }
                let construct_template = rec[5].trim().to_string();
                let template = Template::parse(&construct_template)
                    .map_err(|e| invalid(at("construct_template"), e.to_string()))?;
                if construct_template.is_empty() {
                    return Err(invalid(
                        at("construct_template"),
                        "template must not be empty",
                    ));
                }
                if category.takes_kwargs() && !construct_template.ends_with(')') {
                    return Err(invalid(
                        at("construct_template"),
                        format!("a {category} template must be a call ending in `)`"),
                    ));
                }
                let display_name = match rec[2].trim() {
                    "" => element_id.clone(),
                    name => name.to_string(),
                };
                template_at.insert(element_id.clone(), at("construct_template"));
                by_id.insert(
                    element_id.clone(),
                    RegistryElement {
                        element_id,
                        category,
                        display_name,
                        tags: split_list(&rec[3]).collect(),
                        imports: split_list(&rec[4]).collect(),
                        construct_template,
                        tooltip,
                        doc_url,
                        template,
                    },
                );
            }
        }

        let mut params: IndexMap<String, Vec<ParameterRow>> = IndexMap::new();
        for file in parameters {
            for (row, rec) in read_table(file, &PARAMETERS_HEADER)? {
                let at = |column: &str| Location {
                    file: file.name.clone(),
                    row,
                    column: column.to_string(),
                };
                let element_id = rec[0].trim().to_string();
                let Some(element) = by_id.get(&element_id) else {
                    return Err(LoadError::UnknownElementRef {
                        at: at("element_id"),
                        id: element_id,
                    });
                };
                let param_name = rec[1].trim().to_string();
                if param_name == "element_id" || !crate::binding::is_identifier(&param_name) {
                    return Err(invalid(
                        at("param_name"),
                        format!("invalid parameter name `{param_name}`"),
                    ));
                }
                let kind = ParamKind::parse(rec[2].trim()).ok_or_else(|| {
                    invalid(at("kind"), format!("unknown kind `{}`", rec[2].trim()))
                })?;
                if kind == ParamKind::Hyperparameter && !element.category.is_pipeline_step() {
                    return Err(invalid(
                        at("kind"),
                        format!("a {} cannot declare hyperparameters", element.category),
                    ));
                }
                let value_type = ValueType::parse(rec[3].trim()).ok_or_else(|| {
                    invalid(
                        at("value_type"),
                        format!("unknown value type `{}`", rec[3].trim()),
                    )
                })?;
                let raw_default = rec[4].trim();
                let default_literal = match kind {
                    ParamKind::Fixed => {
                        let lit = parse_literal(raw_default).map_err(|e| {
                            LoadError::MalformedLiteral {
                                at: at("default_literal"),
                                message: e.to_string(),
                            }
                        })?;
                        if !lit.type_checks(value_type) {
                            return Err(LoadError::MalformedLiteral {
                                at: at("default_literal"),
                                message: format!("`{raw_default}` is not a valid {value_type}"),
                            });
                        }
                        ParamValue::Fixed(lit)
                    }
                    ParamKind::Hyperparameter => {
                        let space =
                            parse_space(raw_default).map_err(|e| LoadError::MalformedLiteral {
                                at: at("default_literal"),
                                message: e.to_string(),
                            })?;
                        if let Err(message) = space.check() {
                            return Err(LoadError::MalformedLiteral {
                                at: at("default_literal"),
                                message,
                            });
                        }
                        if !space.type_checks(value_type) {
                            return Err(LoadError::MalformedLiteral {
                                at: at("default_literal"),
                                message: format!(
                                    "`{raw_default}` does not hold {value_type} values"
                                ),
                            });
                        }
                        ParamValue::Space(space)
                    }
                };
                let applies_tags: BTreeSet<String> = split_list(&rec[5]).collect();
                let tooltip = rec[6].trim().to_string();
                if tooltip.is_empty() {
                    return Err(invalid(at("tooltip"), "tooltip must not be empty"));
                }
                let rows = params.entry(element_id.clone()).or_default();
                for other in rows.iter().filter(|r| r.param_name == param_name) {
                    if other.applies_tags == applies_tags {
                        return Err(LoadError::DuplicateId {
                            at: at("applies_tags"),
                            id: format!("{element_id}.{param_name}"),
                        });
                    }
                    if other.kind != kind {
                        return Err(invalid(
                            at("kind"),
                            format!("`{param_name}` declared with differing kinds"),
                        ));
                    }
                    if other.value_type != value_type {
                        return Err(invalid(
                            at("value_type"),
                            format!("`{param_name}` declared with differing value types"),
                        ));
                    }
                }
                rows.push(ParameterRow {
                    element_id,
                    param_name,
                    kind,
                    value_type,
                    default_literal,
                    applies_tags,
                    tooltip,
                    doc_url: rec[7].trim().to_string(),
                });
            }
        }

        for (id, element) in &by_id {
            let rows = params.get(id).map(Vec::as_slice).unwrap_or(&[]);
            for name in element.template.placeholders() {
                if name == "element_id" {
                    continue;
                }
                match rows.iter().find(|r| r.param_name == name) {
                    None => {
                        return Err(invalid(
                            template_at[id].clone(),
                            format!("placeholder `{name}` is not a declared parameter of `{id}`"),
                        ))
                    }
                    Some(r) if r.kind != ParamKind::Fixed => {
                        return Err(invalid(
                            template_at[id].clone(),
                            format!("placeholder `{name}` refers to a hyperparameter"),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }

        Ok(Self::build(by_id, params))
    }

    fn build(
        elements: IndexMap<String, RegistryElement>,
        parameters: IndexMap<String, Vec<ParameterRow>>,
    ) -> Self {
        let mut bits = HashMap::new();
        for e in elements.values() {
            for t in &e.tags {
                let next = bits.len();
                bits.entry(t.clone()).or_insert(next);
            }
        }
        let width = bits.len();
        let masks = elements
            .values()
            .map(|e| {
                let mask = TagMask::with_bits(e.tags.iter().map(|t| bits[t]), width);
                (e.element_id.clone(), mask)
            })
            .collect();
        Self {
            elements,
            parameters,
            tag_index: TagIndex { bits },
            masks,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, id: &str) -> Option<&RegistryElement> {
        self.elements.get(id)
    }

    /// All elements in content-file row order.
    pub fn elements(&self) -> impl Iterator<Item = &RegistryElement> {
        self.elements.values()
    }

    pub fn elements_in(&self, category: Category) -> impl Iterator<Item = &RegistryElement> {
        self.elements
            .values()
            .filter(move |e| e.category == category)
    }

    /// Every parameter row declared for `element_id`, in row order.
    pub fn parameters(&self, element_id: &str) -> &[ParameterRow] {
        self.parameters
            .get(element_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Distinct parameter names of an element in order of first declaration.
    pub fn param_names(&self, element_id: &str) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for r in self.parameters(element_id) {
            if !names.contains(&r.param_name.as_str()) {
                names.push(&r.param_name);
            }
        }
        names
    }

    /// First declaration row of a parameter; kind and value type agree
    /// across rows.
    pub fn param(&self, element_id: &str, param_name: &str) -> Option<&ParameterRow> {
        self.parameters(element_id)
            .iter()
            .find(|r| r.param_name == param_name)
    }

    /// Tags carried by any element of `category`.
    pub fn discriminating_tags(&self, category: Category) -> BTreeSet<&str> {
        self.elements_in(category)
            .flat_map(|e| e.tags.iter().map(String::as_str))
            .collect()
    }

    /// Every tag used on elements or parameter rows.
    pub fn all_tags(&self) -> BTreeSet<&str> {
        let mut tags: BTreeSet<&str> = self
            .elements
            .values()
            .flat_map(|e| e.tags.iter().map(String::as_str))
            .collect();
        for rows in self.parameters.values() {
            for r in rows {
                tags.extend(r.applies_tags.iter().map(String::as_str));
            }
        }
        tags
    }

    /// Elements of `category` available in `context`, in row order.
    ///
    /// An element is available when its tags that discriminate within the
    /// category are all in the context, so untagged elements are always
    /// available.
    pub fn query_elements(
        &self,
        category: Category,
        context: &TagContext,
    ) -> Vec<&RegistryElement> {
        let ctx = TagMask::with_bits(
            context
                .iter()
                .filter_map(|t| self.tag_index.bits.get(t).copied()),
            self.tag_index.bits.len(),
        );
        self.elements
            .values()
            .filter(|e| e.category == category && self.masks[&e.element_id].subset_of(&ctx))
            .collect()
    }

    pub fn is_available(&self, element_id: &str, context: &TagContext) -> bool {
        self.element(element_id)
            .is_some_and(|e| e.tags.iter().all(|t| context.contains(t)))
    }

    /// Context-sensitive defaults for every parameter of `element_id`.
    ///
    /// Per parameter, the applicable row (`applies_tags ⊆ context`) with the
    /// most tags wins; among equally specific rows the later one wins.
    pub fn resolve_defaults(
        &self,
        element_id: &str,
        context: &TagContext,
    ) -> Result<IndexMap<String, ParamValue>, ResolveError> {
        if !self.elements.contains_key(element_id) {
            return Err(ResolveError::UnknownElement(element_id.to_string()));
        }
        let rows = self.parameters(element_id);
        let mut out = IndexMap::new();
        for name in self.param_names(element_id) {
            let mut best: Option<&ParameterRow> = None;
            for row in rows.iter().filter(|r| r.param_name == name) {
                if !row.applies_tags.iter().all(|t| context.contains(t)) {
                    continue;
                }
                if best.is_none_or(|b| row.applies_tags.len() >= b.applies_tags.len()) {
                    best = Some(row);
                }
            }
            match best {
                Some(row) => {
                    out.insert(name.to_string(), row.default_literal.clone());
                }
                None => {
                    return Err(ResolveError::NoApplicableDefault {
                        element_id: element_id.to_string(),
                        param: name.to_string(),
                    })
                }
            }
        }
        Ok(out)
    }

    /// Default for a single parameter; see [`Registry::resolve_defaults`].
    pub fn resolve_default(
        &self,
        element_id: &str,
        param: &str,
        context: &TagContext,
    ) -> Option<ParamValue> {
        self.parameters(element_id)
            .iter()
            .filter(|r| r.param_name == param && r.applies_tags.iter().all(|t| context.contains(t)))
            .fold(None::<&ParameterRow>, |best, row| match best {
                Some(b) if row.applies_tags.len() < b.applies_tags.len() => Some(b),
                _ => Some(row),
            })
            .map(|r| r.default_literal.clone())
    }
}

/// Suggested number of cross-validation folds for a data set size.
///
/// Fewer than 10 samples gives leave-one-out; then 3, 5 and 10 folds from
/// 10, 30 and 200 samples on.
pub fn default_fold_count(n_samples: u64) -> u64 {
    match n_samples {
        n if n < 10 => n,
        n if n < 30 => 3,
        n if n < 200 => 5,
        _ => 10,
    }
}

fn invalid(at: Location, message: impl Into<String>) -> LoadError {
    LoadError::InvalidValue {
        at,
        message: message.into(),
    }
}

fn split_list(cell: &str) -> impl Iterator<Item = String> + '_ {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

/// Reads a table with an exact header, returning `(line, record)` pairs.
fn read_table(
    file: &ContentFile,
    header: &[&str; 8],
) -> Result<Vec<(u64, csv::StringRecord)>, LoadError> {
    if file.text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file.text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| LoadError::Csv {
            file: file.name.clone(),
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    for column in header {
        if !found.contains(column) {
            return Err(LoadError::MissingColumn {
                at: Location {
                    file: file.name.clone(),
                    row: 1,
                    column: column.to_string(),
                },
            });
        }
    }
    if found.as_slice() != header.as_slice() {
        let column = found
            .iter()
            .zip(header.iter())
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.to_string())
            .or_else(|| found.get(header.len()).map(|s| s.to_string()))
            .unwrap_or_default();
        return Err(invalid(
            Location {
                file: file.name.clone(),
                row: 1,
                column,
            },
            format!("header must be exactly `{}`", header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| LoadError::Csv {
            file: file.name.clone(),
            row: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(rows)
}
