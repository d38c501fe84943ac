//! Reference project, its expected script, and a generator of random valid
//! projects for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::literal::{HyperparamSpace, Literal, ValueType};
use crate::model::{context_tags, AnalysisType, CvConfig, ElementInstance, Project};
use crate::registry::{Category, ParamKind, ParameterRow, Registry};

pub const GOLDEN_PROJECT_JSON: &str = include_str!("../fixtures/golden_project.json");
pub const GOLDEN_SCRIPT: &str = include_str!("../fixtures/golden_script.py");

pub fn golden_project() -> Project {
    Project::from_json(GOLDEN_PROJECT_JSON).expect("golden project parses")
}

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "it's", "a\\b", "x_1", "median", "mean",
];

fn word<R: Rng>(rng: &mut R) -> String {
    (*WORDS.choose(rng).unwrap()).to_string()
}

fn float<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(1..1000) as f64 / 100.0
}

fn scalar<R: Rng>(rng: &mut R, ty: ValueType) -> Literal {
    match ty {
        ValueType::Int => Literal::Int(rng.gen_range(1..200)),
        ValueType::Float => Literal::Float(float(rng)),
        ValueType::Bool => Literal::Bool(rng.gen()),
        ValueType::String => Literal::Str(word(rng)),
        ValueType::List => Literal::List(
            (0..rng.gen_range(1..4))
                .map(|_| Literal::Int(rng.gen_range(0..9)))
                .collect(),
        ),
    }
}

/// A random space of the declared type. `keep_range` forces a range
/// (`Some(true)`) or a list (`Some(false)`).
pub fn random_space<R: Rng>(
    rng: &mut R,
    ty: ValueType,
    keep_range: Option<bool>,
) -> HyperparamSpace {
    let range = keep_range.unwrap_or_else(|| rng.gen_bool(0.3))
        && matches!(ty, ValueType::Int | ValueType::Float);
    if range {
        if ty == ValueType::Int {
            let min = rng.gen_range(1..20);
            let step = rng.gen_range(1..5);
            return HyperparamSpace::IntRange {
                min,
                max: min + step * rng.gen_range(1..6),
                step,
            };
        }
        let min = float(rng);
        return HyperparamSpace::FloatRange {
            min,
            max: min + float(rng),
            step: rng.gen_range(1..50) as f64 / 100.0,
        };
    }
    let n = rng.gen_range(1..5);
    HyperparamSpace::CategoricalList {
        values: (0..n).map(|_| scalar(rng, ty)).collect(),
    }
}

fn fixed_value<R: Rng>(rng: &mut R, row: &ParameterRow, n_samples: u64) -> Literal {
    match row.param_name.as_str() {
        "n_splits" => Literal::Int(rng.gen_range(2..=n_samples.min(10)) as i64),
        "test_size" => Literal::Float(rng.gen_range(5..50) as f64 / 100.0),
        _ => scalar(rng, row.value_type),
    }
}

/// Fills every declared parameter with a random value and marks it user-set.
pub fn randomize_params<R: Rng>(
    rng: &mut R,
    registry: &Registry,
    e: &mut ElementInstance,
    n_samples: u64,
) {
    for name in registry.param_names(&e.element_id) {
        let row = registry.param(&e.element_id, name).expect("declared");
        match row.kind {
            ParamKind::Fixed => {
                e.fixed_params
                    .insert(name.to_string(), fixed_value(rng, row, n_samples));
            }
            ParamKind::Hyperparameter => {
                e.hyperparams
                    .insert(name.to_string(), random_space(rng, row.value_type, None));
            }
        }
        e.user_set.insert(name.to_string());
    }
}

fn ids(registry: &Registry, category: Category, project: &Project) -> Vec<String> {
    registry
        .query_elements(category, &context_tags(project))
        .iter()
        .map(|e| e.element_id.clone())
        .collect()
}

/// A project that validates without errors against `registry`, which must
/// offer at least one element of every category for both analysis types.
pub fn random_project<R: Rng>(rng: &mut R, registry: &Registry, id: &str) -> Project {
    let analysis = if rng.gen() {
        AnalysisType::Classification
    } else {
        AnalysisType::Regression
    };
    let mut p = Project::new(
        id,
        format!("{}_{}", word(rng), rng.gen_range(0..1000)),
        analysis,
    );
    let n = rng.gen_range(10..2000u64);
    p.data.n_samples = Some(n);
    p.data.file_path = format!("{}.csv", word(rng));
    p.data.feature_columns = (0..rng.gen_range(1..5))
        .map(|i| format!("f{i}_{}", word(rng)))
        .collect();
    p.data.target_column = "target".into();

    let transformers = ids(registry, Category::Transformer, &p);
    let estimators = ids(registry, Category::Estimator, &p);
    for _ in 0..rng.gen_range(0..4) {
        p.elements.push(ElementInstance::new(
            transformers.choose(rng).unwrap().clone(),
        ));
    }
    for _ in 0..rng.gen_range(1..4) {
        p.elements.push(ElementInstance::new(
            estimators.choose(rng).unwrap().clone(),
        ));
    }
    for e in &mut p.elements {
        randomize_params(rng, registry, e, n);
    }
    p.renumber();

    let mut opt = ElementInstance::new(
        ids(registry, Category::Optimizer, &p)
            .choose(rng)
            .unwrap()
            .clone(),
    );
    randomize_params(rng, registry, &mut opt, n);
    p.training.optimizer = Some(opt);
    let cvs = ids(registry, Category::CvStrategy, &p);
    for slot in [&mut p.training.outer_cv, &mut p.training.inner_cv] {
        let mut holder = ElementInstance::new(cvs.choose(rng).unwrap().clone());
        randomize_params(rng, registry, &mut holder, n);
        let mut cv = CvConfig::new(holder.element_id);
        cv.params = holder.fixed_params;
        cv.user_set = holder.user_set;
        *slot = Some(cv);
    }
    let mut metrics = ids(registry, Category::Metric, &p);
    metrics.shuffle(rng);
    metrics.truncate(rng.gen_range(1..=metrics.len()));
    p.training.best_config_metric = metrics.choose(rng).cloned();
    p.training.metrics = metrics;
    p.user_set = [
        "training.optimizer",
        "training.outer_cv.strategy",
        "training.inner_cv.strategy",
        "training.metrics",
        "training.best_config_metric",
    ]
    .map(String::from)
    .into();
    p
}
