#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use chrono::NaiveDate;
use commflow::workspace::Workspace;
use commflow_core::cohort::{Milestone, Outcome, PatientRecord, Sex};
use commflow_core::network::fixtures::g1_events;
use commflow_core::synthetic::{generate_synthetic, SyntheticConfig};
use serde_json::Value;

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn patient(id: &str, outcome: Outcome) -> PatientRecord {
    PatientRecord {
        patient_id: id.into(),
        age: 61,
        sex: Sex::Female,
        cancer_type: "lung".into(),
        stage: "2".into(),
        payer: "Medicare".into(),
        outcome,
        diagnosis_date: date("1970-01-01"),
        last_contact_date: date("1971-06-01"),
        death_date: None,
        milestones: vec![Milestone {
            date: date("1970-01-01"),
            label: "Diagnosis".into(),
        }],
    }
}

/// Workspace holding the single-patient fixture G1 as patient `P1`.
pub fn g1_workspace(dir: &Path) -> Workspace {
    Workspace::write_inputs(dir, &[patient("P1", Outcome::Alive)], &g1_events(), None).unwrap();
    Workspace::open(dir).unwrap()
}

/// Default seeded synthetic cohort, written once per test binary.
pub fn synthetic_dir() -> &'static PathBuf {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("synthetic-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let c = generate_synthetic(&SyntheticConfig::default()).unwrap();
        Workspace::write_inputs(&dir, &c.patients, &c.events, None).unwrap();
        dir
    })
}

pub fn synthetic_workspace() -> Arc<Workspace> {
    static WS: OnceLock<Arc<Workspace>> = OnceLock::new();
    WS.get_or_init(|| Arc::new(Workspace::open(synthetic_dir()).unwrap())).clone()
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

const SCHEMA_BASE: &str = "https://commflow.local/schemas/";

/// Validates `instance` against `<name>.schema.json`, returning every error.
pub fn schema_errors(name: &str, instance: &Value) -> Vec<String> {
    let load = |n: &str| -> Value {
        let text = std::fs::read_to_string(schema_dir().join(format!("{n}.schema.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    };
    let registry = jsonschema::Registry::new()
        .add(format!("{SCHEMA_BASE}common.schema.json"), load("common"))
        .unwrap()
        .prepare()
        .unwrap();
    let validator = jsonschema::options().with_registry(&registry).build(&load(name)).unwrap();
    validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}
