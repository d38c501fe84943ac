mod common;

use pipegen_core::Registry;

#[test]
fn query_matches_brute_force_over_power_set() {
    let reg = Registry::bundled();
    let (checked, mismatches) = common::filter_oracle(&reg);
    assert!(checked >= 5);
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn adversarial_defaults_match_hand_computed_table() {
    let m = common::default_resolution_mismatches();
    assert!(m.is_empty(), "{m:#?}");
}

#[test]
fn fold_count_boundaries() {
    let m = common::fold_mismatches();
    assert!(m.is_empty(), "{m:#?}");
}

#[test]
fn bundled_content_loads_from_disk_too() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/content");
    let from_disk = Registry::load_dir(std::path::Path::new(dir)).unwrap();
    assert_eq!(from_disk.len(), Registry::bundled().len());
}
