#![allow(dead_code)]

use std::collections::BTreeMap;

use eisenhart::systems::{self, CatalogEntry, CustomSpec};

/// Two-dimensional custom entry: conformally flat `h`, a uniform magnetic
/// `A` in symmetric gauge and linear action damping. Rotations and `u`
/// translations are symmetries.
pub const CUSTOM_JSON: &str = r#"{
    "h": [["1 + 0.1*(x1^2 + x2^2)", "0"], ["0", "1 + 0.1*(x1^2 + x2^2)"]],
    "a": ["-0.5*b*x2", "0.5*b*x1"],
    "v": "0.5*(x1^2 + x2^2) + k*w",
    "generators": [
        {"name": "rotation", "dx": ["-x2", "x1"]},
        {"name": "du", "dx": ["0", "0"], "du": "1"}
    ]
}"#;

pub fn custom_entry() -> CatalogEntry {
    let spec: CustomSpec = serde_json::from_str(CUSTOM_JSON).unwrap();
    let params: BTreeMap<String, f64> = [("b".to_string(), 0.6), ("k".to_string(), 0.1)].into();
    systems::custom_system(&spec, &params).unwrap()
}

/// One entry per catalog name, at the parameters used throughout the tests.
pub fn catalog() -> Vec<(&'static str, CatalogEntry)> {
    vec![
        ("free", systems::free_particle(2).unwrap()),
        ("harmonic", systems::harmonic_oscillator(1.3).unwrap()),
        (
            "damped-time",
            systems::damped_time_dependent(0.2, systems::DEFAULT_POTENTIAL).unwrap(),
        ),
        (
            "damped-action",
            systems::damped_action_dependent(0.2, systems::DEFAULT_POTENTIAL).unwrap(),
        ),
        ("custom", custom_entry()),
    ]
}
