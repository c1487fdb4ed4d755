#![allow(dead_code)]

use std::path::PathBuf;

use gmwf_core::format::parse_spec;
use gmwf_core::Gmawfp;
use gmwf_workbench::sim::Script;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn spec_path(name: &str) -> PathBuf {
    repo_root().join("specs").join(format!("{name}.json"))
}

pub fn script_path(name: &str) -> PathBuf {
    repo_root().join("scenarios").join(format!("{name}.json"))
}

pub fn load_spec(name: &str) -> Gmawfp {
    parse_spec(&std::fs::read_to_string(spec_path(name)).unwrap()).unwrap()
}

pub fn load_script(name: &str) -> Script {
    serde_json::from_str(&std::fs::read_to_string(script_path(name)).unwrap()).unwrap()
}
