// Service-level scenarios shared by the integration tests and the
// acceptance suite. Each returns a list of problems; empty means pass.
#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, Barrier};

use pipegen_core::{AnalysisType, Engine, StepId};
use pipegen_service::service::{PROJECTS, SCRIPTS};
use pipegen_service::{DocumentStore, FileStore, ProjectService, ServiceError};

pub fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
    items
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub const GOLDEN_STEPS: &[(StepId, &[(&str, &str)])] = &[
    (
        StepId::ProjectData,
        &[
            ("name", "demo_project"),
            ("data.file_path", "breast_cancer.csv"),
            ("data.feature_columns", "mean_radius, mean_texture"),
            ("data.target_column", "diagnosis"),
            ("data.n_samples", "150"),
        ],
    ),
    (
        StepId::Optimization,
        &[("training.metrics", "accuracy, balanced_accuracy")],
    ),
    (
        StepId::Transformers,
        &[
            ("elements[0].element_id", "StandardScaler"),
            ("elements[1].element_id", "PCA"),
        ],
    ),
    (StepId::Estimators, &[("elements[2].element_id", "SVC")]),
];

pub fn file_service(dir: &Path) -> (ProjectService, Arc<FileStore>) {
    let store = Arc::new(FileStore::open(dir).unwrap());
    (
        ProjectService::new(Arc::new(Engine::bundled()), store.clone()),
        store,
    )
}

/// create → four step submissions → get → list → script → delete.
pub fn crud_happy_path(service: &ProjectService) -> Vec<String> {
    let mut problems = Vec::new();
    let p = match service.create("demo", AnalysisType::Classification) {
        Ok(p) => p,
        Err(e) => return vec![format!("create failed: {e}")],
    };
    if p.revision != 1
        || p.step_progress
            .values()
            .any(|s| *s != pipegen_core::StepStatus::Empty)
    {
        problems.push("new project is not at revision 1 with empty steps".into());
    }
    let mut revision = p.revision;
    let mut last = None;
    for (step, items) in GOLDEN_STEPS {
        match service.update(&p.id, revision, *step, &pairs(items)) {
            Ok(r) => {
                revision = r.project.revision;
                last = Some(r);
            }
            Err(e) => problems.push(format!("update {step} failed: {e}")),
        }
    }
    let Some(last) = last else { return problems };
    match service.get(&p.id) {
        Ok(stored) if stored == last.project => {}
        Ok(_) => problems.push("get after update differs from the returned project".into()),
        Err(e) => problems.push(format!("get failed: {e}")),
    }
    if last.script != pipegen_core::fixtures::GOLDEN_SCRIPT {
        problems.push(format!(
            "wizard-built script differs from the golden script:\n{}",
            last.script
        ));
    }
    if !last
        .step_status
        .values()
        .all(|s| *s == pipegen_core::StepStatus::Complete)
    {
        problems.push(format!("steps not complete: {:?}", last.step_status));
    }
    match service.script(&p.id) {
        Ok((_, s)) if s == last.script => {}
        Ok(_) => problems.push("downloaded script differs".into()),
        Err(e) => problems.push(format!("script failed: {e}")),
    }
    match service.list() {
        Ok(list) if list.iter().any(|s| s.id == p.id && s.revision == revision) => {}
        Ok(_) => problems.push("list does not show the project".into()),
        Err(e) => problems.push(format!("list failed: {e}")),
    }
    if let Err(e) = service.delete(&p.id) {
        problems.push(format!("delete failed: {e}"));
    }
    if !matches!(service.get(&p.id), Err(ServiceError::NotFound(_))) {
        problems.push("project still readable after delete".into());
    }
    problems
}

/// `n` threads submit different names from the same revision at once.
/// Returns (successes, conflicts, other errors).
pub fn concurrent_updates(service: &ProjectService, n: usize) -> (usize, usize, Vec<String>) {
    let p = service
        .create("race", AnalysisType::Classification)
        .unwrap();
    let barrier = Barrier::new(n);
    let results: Vec<Result<u64, ServiceError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|i| {
                let (barrier, id) = (&barrier, p.id.clone());
                scope.spawn(move || {
                    let name = format!("writer_{i}");
                    barrier.wait();
                    service
                        .update(&id, 1, StepId::ProjectData, &pairs(&[("name", &name)]))
                        .map(|r| r.project.revision)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let ok = results.iter().filter(|r| r.is_ok()).count();
    let conflicts = results
        .iter()
        .filter(|r| matches!(r, Err(ServiceError::RevisionConflict { current: 2 })))
        .count();
    let other = results
        .iter()
        .filter_map(|r| match r {
            Err(ServiceError::RevisionConflict { current: 2 }) | Ok(2) => None,
            Ok(rev) => Some(format!("success at unexpected revision {rev}")),
            Err(e) => Some(e.to_string()),
        })
        .collect();
    (ok, conflicts, other)
}

/// Commits several projects, reopens the store from disk and compares.
pub fn restart_durability(dir: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    let mut before = Vec::new();
    {
        let (service, store) = file_service(dir);
        for i in 0..5 {
            let p = service
                .create(&format!("durable_{i}"), AnalysisType::Regression)
                .unwrap();
            let mut rev = p.revision;
            for (step, items) in &GOLDEN_STEPS[..=i.min(3)] {
                if let Ok(r) = service.update(&p.id, rev, *step, &pairs(items)) {
                    rev = r.project.revision;
                }
            }
        }
        for collection in [PROJECTS, SCRIPTS] {
            for doc in store.scan(collection).unwrap() {
                let raw = std::fs::read(store.path_of(collection, &doc.id)).unwrap();
                before.push((collection, doc, raw));
            }
        }
    }
    let (service, store) = file_service(dir);
    for (collection, doc, raw) in &before {
        match store.get(collection, &doc.id) {
            Ok(Some(after)) if after == *doc => {}
            other => problems.push(format!(
                "{collection}/{} changed across restart: {other:?}",
                doc.id
            )),
        }
        if std::fs::read(store.path_of(collection, &doc.id))
            .ok()
            .as_ref()
            != Some(raw)
        {
            problems.push(format!("{collection}/{} bytes changed", doc.id));
        }
        if *collection == PROJECTS {
            match service.get(&doc.id) {
                Ok(p) if p.to_canonical_json() == doc.body => {}
                _ => problems.push(format!("project {} does not reload byte-exactly", doc.id)),
            }
        }
    }
    if before.iter().filter(|(c, _, _)| *c == PROJECTS).count() != 5 {
        problems.push("expected 5 committed projects".into());
    }
    problems
}
