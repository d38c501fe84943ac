mod common;

use pipegen_core::codegen::{diff_documents, SectionOwner};
use pipegen_core::fixtures::{golden_project, GOLDEN_SCRIPT};
use pipegen_core::{build_document, render_project, Registry};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn golden_script_is_byte_exact() {
    let script = render_project(&golden_project(), &Registry::bundled()).unwrap();
    assert_eq!(script, GOLDEN_SCRIPT);
}

#[test]
fn renders_are_deterministic() {
    let reg = Registry::bundled();
    for p in common::random_projects(1, 100, &reg) {
        let reparsed = pipegen_core::Project::from_json(&p.to_canonical_json()).unwrap();
        assert_eq!(
            common::render(&p, &reg),
            common::render(&reparsed, &reg),
            "{}",
            p.id
        );
    }
}

#[test]
fn scripts_are_transparent() {
    let reg = Registry::bundled();
    let mut all = Vec::new();
    for p in common::random_projects(2, 100, &reg) {
        all.extend(common::transparency_violations(
            &p,
            &reg,
            &common::render(&p, &reg),
        ));
    }
    assert!(all.is_empty(), "{all:#?}");
}

#[test]
fn single_param_mutations_stay_in_their_section() {
    let reg = Registry::bundled();
    let mut rng = StdRng::seed_from_u64(4);
    let mut all = Vec::new();
    for before in common::random_projects(3, 200, &reg) {
        let mut after = before.clone();
        let pos = common::mutate_one_param(&mut rng, &mut after, &reg)
            .expect("every project has an estimator");
        all.extend(common::locality_violations(&before, &after, pos, &reg));
    }
    assert!(all.is_empty(), "{all:#?}");
}

#[test]
fn unchanged_project_has_empty_diff() {
    let reg = Registry::bundled();
    let doc = build_document(&golden_project(), &reg).unwrap();
    assert!(diff_documents(&doc, &doc).is_empty());
}

#[test]
fn swapping_transformers_swaps_their_lines() {
    let reg = Registry::bundled();
    let mut p = golden_project();
    p.elements.swap(0, 1);
    p.renumber();
    let script = render_project(&p, &reg).unwrap();
    let expected = GOLDEN_SCRIPT
        .replace("my_pipe += PipelineElement('StandardScaler')", "@@")
        .replace(
            "my_pipe += PipelineElement('PCA', hyperparameters={'n_components': [5, 10]})",
            "my_pipe += PipelineElement('StandardScaler')",
        )
        .replace(
            "@@",
            "my_pipe += PipelineElement('PCA', hyperparameters={'n_components': [5, 10]})",
        );
    assert_eq!(script, expected);
    let diff = diff_documents(
        &build_document(&golden_project(), &reg).unwrap(),
        &build_document(&p, &reg).unwrap(),
    );
    assert!(diff
        .hunks
        .iter()
        .all(|h| matches!(h.owner, Some(SectionOwner::Element(_)))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_seed_renders_deterministically(seed in any::<u64>()) {
        let reg = Registry::bundled();
        let p = &common::random_projects(seed, 1, &reg)[0];
        prop_assert_eq!(common::render(p, &reg), common::render(&p.clone(), &reg));
        prop_assert!(common::transparency_violations(p, &reg, &common::render(p, &reg)).is_empty());
    }
}
