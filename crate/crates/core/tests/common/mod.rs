// Independent oracles shared by the integration tests and the acceptance
// suite. Nothing here calls the code paths it checks when a brute-force
// alternative exists.
#![allow(dead_code)]

use std::collections::BTreeSet;

use pipegen_core::binding::{apply_bindings, Scope};
use pipegen_core::codegen::{build_document, diff_documents, SectionOwner};
use pipegen_core::fixtures::{random_project, random_space};
use pipegen_core::literal::{quote, HyperparamSpace, Literal};
use pipegen_core::registry::ParamKind;
use pipegen_core::{
    bind_form, to_form_pairs, Category, ContentFile, Project, Registry, TagContext,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_projects(seed: u64, n: usize, registry: &Registry) -> Vec<Project> {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_project(&mut rng, registry, &format!("p{i}")))
        .collect()
}

pub fn render(project: &Project, registry: &Registry) -> String {
    build_document(project, registry).expect("renders").render()
}

// ---- filter oracle ----

fn power_set<'a>(tags: &[&'a str]) -> Vec<Vec<&'a str>> {
    (0..1u32 << tags.len())
        .map(|bits| {
            tags.iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, t)| *t)
                .collect()
        })
        .collect()
}

/// Runs every (category, context) pair over the power set of the
/// category's discriminating tags; returns (contexts checked, mismatches).
pub fn filter_oracle(registry: &Registry) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for category in Category::ALL {
        let tags: Vec<&str> = registry.discriminating_tags(category).into_iter().collect();
        for subset in power_set(&tags) {
            checked += 1;
            let ctx: TagContext = subset.iter().copied().collect();
            let got: Vec<&str> = registry
                .query_elements(category, &ctx)
                .iter()
                .map(|e| e.element_id.as_str())
                .collect();
            let want: Vec<&str> = registry
                .elements()
                .filter(|e| {
                    e.category == category && e.tags.iter().all(|t| subset.contains(&t.as_str()))
                })
                .map(|e| e.element_id.as_str())
                .collect();
            if got != want {
                mismatches.push(format!("{category} {subset:?}: got {got:?}, want {want:?}"));
            }
        }
    }
    (checked, mismatches)
}

// ---- default resolution ----

pub const ADVERSARIAL_ELEMENTS: &str =
    "element_id,category,display_name,tags,imports,construct_template,tooltip,doc_url
E,transformer,E,,,PipelineElement('{element_id}'),tip,url
";

pub const ADVERSARIAL_PARAMETERS: &str =
    "element_id,param_name,kind,value_type,default_literal,applies_tags,tooltip,doc_url
E,p,fixed,int,1,,tip,url
E,p,fixed,int,2,a,tip,url
E,p,fixed,int,3,b,tip,url
E,p,fixed,int,4,a;b,tip,url
E,p,fixed,int,5,c,tip,url
E,p,fixed,int,6,a;c,tip,url
E,q,fixed,int,10,a,tip,url
E,q,fixed,int,20,b,tip,url
E,r,hyperparameter,int,[1],,tip,url
E,r,hyperparameter,int,[2],a;b;c,tip,url
";

/// Hand-computed selections: (context, p, q, r).
pub const ADVERSARIAL_EXPECTED: &[(&[&str], &str, Option<&str>, &str)] = &[
    (&[], "1", None, "[1]"),
    (&["a"], "2", Some("10"), "[1]"),
    (&["b"], "3", Some("20"), "[1]"),
    (&["a", "b"], "4", Some("20"), "[1]"),
    (&["c"], "5", None, "[1]"),
    (&["a", "c"], "6", Some("10"), "[1]"),
    (&["b", "c"], "5", Some("20"), "[1]"),
    (&["a", "b", "c"], "6", Some("20"), "[2]"),
    (&["d"], "1", None, "[1]"),
];

pub fn default_resolution_mismatches() -> Vec<String> {
    let reg = Registry::load(
        &[ContentFile::new("elements.csv", ADVERSARIAL_ELEMENTS)],
        &[ContentFile::new("parameters.csv", ADVERSARIAL_PARAMETERS)],
    )
    .expect("fixture loads");
    assert_eq!(reg.parameters("E").len(), 10);
    let mut out = Vec::new();
    for (tags, p, q, r) in ADVERSARIAL_EXPECTED {
        let ctx: TagContext = tags.iter().copied().collect();
        for (param, want) in [("p", Some(*p)), ("q", *q), ("r", Some(*r))] {
            let got = reg.resolve_default("E", param, &ctx).map(|v| v.canonical());
            if got.as_deref() != want {
                out.push(format!("{tags:?} {param}: got {got:?}, want {want:?}"));
            }
        }
    }
    out
}

/// (n_samples, folds) straight from the threshold table.
pub const FOLD_TABLE: &[(u64, u64)] = &[
    (2, 2),
    (9, 9),
    (10, 3),
    (29, 3),
    (30, 5),
    (199, 5),
    (200, 10),
];

pub fn fold_mismatches() -> Vec<String> {
    FOLD_TABLE
        .iter()
        .filter(|(n, k)| pipegen_core::default_fold_count(*n) != *k)
        .map(|(n, k)| {
            format!(
                "n={n}: got {}, want {k}",
                pipegen_core::default_fold_count(*n)
            )
        })
        .collect()
}

// ---- transparency ----

fn count_lines(script: &str, line: &str) -> usize {
    script.lines().filter(|l| *l == line).count()
}

/// Every user-set value must show up in canonical form and every needed
/// import must appear exactly once.
pub fn transparency_violations(
    project: &Project,
    registry: &Registry,
    script: &str,
) -> Vec<String> {
    let mut v = Vec::new();
    let mut expect = |needle: String, what: &str| {
        if !script.contains(&needle) {
            v.push(format!("{}: {what} `{needle}` missing", project.id));
        }
    };
    expect(quote(&project.name), "name");
    expect(quote(&project.data.file_path), "file path");
    expect(quote(&project.data.target_column), "target");
    for c in &project.data.feature_columns {
        expect(quote(c), "feature column");
    }
    for m in &project.training.metrics {
        expect(quote(m), "metric");
    }
    if let Some(opt) = &project.training.optimizer {
        expect(quote(&opt.element_id), "optimizer");
        for (name, value) in &opt.fixed_params {
            expect(
                format!("{}: {}", quote(name), value.canonical()),
                "optimizer param",
            );
        }
    }
    for cv in [&project.training.outer_cv, &project.training.inner_cv]
        .into_iter()
        .flatten()
    {
        for (name, value) in &cv.params {
            expect(format!("{name}={}", value.canonical()), "cv param");
        }
    }
    for e in &project.elements {
        expect(quote(&e.element_id), "element");
        for (name, value) in &e.fixed_params {
            expect(format!("{name}={}", value.canonical()), "fixed param");
        }
        for (name, space) in &e.hyperparams {
            expect(
                format!("{}: {}", quote(name), space.canonical()),
                "hyperparameter",
            );
        }
    }

    let mut imports: BTreeSet<String> = [
        "import pandas as pd",
        "from photonai.base import Hyperpipe, PipelineElement",
    ]
    .map(String::from)
    .into();
    let mut referenced: Vec<&str> = project
        .elements
        .iter()
        .map(|e| e.element_id.as_str())
        .collect();
    referenced.extend(
        project
            .training
            .optimizer
            .iter()
            .map(|o| o.element_id.as_str()),
    );
    referenced.extend(
        [&project.training.outer_cv, &project.training.inner_cv]
            .into_iter()
            .flatten()
            .map(|c| c.strategy.as_str()),
    );
    referenced.extend(project.training.metrics.iter().map(String::as_str));
    for id in referenced {
        imports.extend(registry.element(id).expect("known").imports.iter().cloned());
    }
    for space in project.elements.iter().flat_map(|e| e.hyperparams.values()) {
        match space {
            HyperparamSpace::IntRange { .. } => {
                imports.insert("from photonai.optimization import IntegerRange".into())
            }
            HyperparamSpace::FloatRange { .. } => {
                imports.insert("from photonai.optimization import FloatRange".into())
            }
            HyperparamSpace::CategoricalList { .. } => false,
        };
    }
    for line in &imports {
        let n = count_lines(script, line);
        if n != 1 {
            v.push(format!("{}: import `{line}` appears {n} times", project.id));
        }
    }
    let import_lines = script
        .lines()
        .filter(|l| l.starts_with("import ") || l.starts_with("from "))
        .count();
    let switch = usize::from(project.estimator_count(registry) > 1);
    if import_lines != imports.len() + switch {
        v.push(format!(
            "{}: {import_lines} import lines, expected {}",
            project.id,
            imports.len() + switch
        ));
    }
    v
}

// ---- diff locality ----

/// Picks an element that has parameters and changes one of them to a new
/// value of the same kind (list stays list, range stays range). Returns the
/// element's position.
pub fn mutate_one_param<R: Rng>(
    rng: &mut R,
    project: &mut Project,
    registry: &Registry,
) -> Option<usize> {
    let candidates: Vec<usize> = (0..project.elements.len())
        .filter(|i| {
            !registry
                .param_names(&project.elements[*i].element_id)
                .is_empty()
        })
        .collect();
    let at = *candidates.choose(rng)?;
    let e = &mut project.elements[at];
    let name = registry.param_names(&e.element_id).choose(rng)?.to_string();
    let row = registry.param(&e.element_id, &name)?;
    loop {
        match row.kind {
            ParamKind::Hyperparameter => {
                let old = e.hyperparams.get(&name).cloned();
                let is_range = old
                    .as_ref()
                    .map(|s| !matches!(s, HyperparamSpace::CategoricalList { .. }));
                let new = random_space(rng, row.value_type, is_range);
                if old.as_ref() != Some(&new) {
                    e.hyperparams.insert(name, new);
                    break;
                }
            }
            ParamKind::Fixed => {
                let old = e.fixed_params.get(&name).cloned();
                let new = match &old {
                    Some(Literal::Int(i)) => Literal::Int(i + rng.gen_range(1..50)),
                    Some(Literal::Float(f)) => {
                        Literal::Float(f + rng.gen_range(1..50) as f64 / 8.0)
                    }
                    Some(Literal::Bool(b)) => Literal::Bool(!b),
                    Some(Literal::Str(s)) => Literal::Str(format!("{s}_{}", rng.gen_range(0..99))),
                    _ => return None,
                };
                e.fixed_params.insert(name, new);
                break;
            }
        }
    }
    Some(at)
}

/// Every changed line of the diff must lie in the section that owns the
/// mutated element (the switch section for estimators behind a switch).
pub fn locality_violations(
    before: &Project,
    after: &Project,
    position: usize,
    registry: &Registry,
) -> Vec<String> {
    let old = build_document(before, registry).expect("renders");
    let new = build_document(after, registry).expect("renders");
    let is_switch = registry
        .element(&after.elements[position].element_id)
        .map(|d| d.category)
        == Some(Category::Estimator)
        && after.estimator_count(registry) > 1;
    let owner = if is_switch {
        SectionOwner::EstimatorSwitch
    } else {
        SectionOwner::Element(position)
    };
    let diff = diff_documents(&old, &new);
    let mut v = Vec::new();
    if diff.is_empty() {
        v.push(format!("{}: mutation produced no diff", after.id));
    }
    let (old_owners, new_owners) = (old.line_owners(), new.line_owners());
    for h in &diff.hunks {
        let touched = old_owners[h.old_range.clone()]
            .iter()
            .chain(&new_owners[h.new_range.clone()]);
        for o in touched {
            if *o != owner {
                v.push(format!(
                    "{}: hunk {:?} touches {o}, expected {owner}",
                    after.id, h.old_range
                ));
            }
        }
    }
    v
}

// ---- binding round trip ----

pub fn binding_round_trip(project: &Project, registry: &Registry) -> Result<(), String> {
    let pairs = to_form_pairs(project);
    let set = bind_form(&pairs).map_err(|e| e.to_string())?;
    let mut fresh = Project::new(project.id.clone(), "", project.analysis_type);
    apply_bindings(&mut fresh, &set, registry, Scope::Any).map_err(|e| format!("{e:?}"))?;
    if fresh.same_content(project) {
        Ok(())
    } else {
        Err(format!(
            "{}: round trip differs\n{}\n{}",
            project.id,
            project.to_canonical_json(),
            fresh.to_canonical_json()
        ))
    }
}

pub const MALFORMED_KEYS: [&str; 20] = [
    "elements[x].y",
    "",
    ".",
    "a.",
    ".a",
    "a..b",
    "a[",
    "a[1",
    "a[]",
    "a[-1]",
    "a[1.5]",
    "1a",
    "a b",
    "a[1]b",
    "a]",
    "a.[0]",
    "a[0][1]",
    "a-b",
    "training.metrics.",
    "ä",
];
