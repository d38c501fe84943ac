mod support;

use std::sync::Arc;

use pipegen_core::Engine;
use pipegen_service::{MemoryStore, ProjectService};

#[test]
fn crud_happy_path_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let (service, _) = support::file_service(dir.path());
    let problems = support::crud_happy_path(&service);
    assert!(problems.is_empty(), "{problems:#?}");
}

#[test]
fn crud_happy_path_in_memory() {
    let service = ProjectService::new(Arc::new(Engine::bundled()), Arc::new(MemoryStore::new()));
    let problems = support::crud_happy_path(&service);
    assert!(problems.is_empty(), "{problems:#?}");
}

#[test]
fn sixteen_concurrent_updates_one_wins() {
    let dir = tempfile::tempdir().unwrap();
    let (service, _) = support::file_service(dir.path());
    let (ok, conflicts, other) = support::concurrent_updates(&service, 16);
    assert_eq!((ok, conflicts), (1, 15), "{other:?}");
    assert!(other.is_empty());
}

#[test]
fn documents_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let problems = support::restart_durability(dir.path());
    assert!(problems.is_empty(), "{problems:#?}");
}
