//! On-disk cohort workspace and its memoized computations.
//!
//! A workspace directory holds `patients.csv` and `access_log.csv`, plus
//! optional `groups.json` (extra cohort groups) and `settings.json`
//! (policy and computation settings). A group named `all` always exists.
//! Metric models are additionally persisted under `.cache/`, keyed by the
//! content hash of those files and the metric settings.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use commflow_core::cohort::{
    apply_policy, parse_access_log_with, parse_patients, write_access_log, write_patients, AccessEvent,
    AdminDropList, CohortCriteria, CohortGroup, FilterPolicy, Outcome, PatientRecord, select_group,
};
use commflow_core::measures::{measure_vector, MeasureConfig, NetworkMeasureVector};
use commflow_core::metric::{compose_metric, MetricConfig, MetricModel};
use commflow_core::network::build_networks;
use commflow_core::temporal::FlowOptions;
use commflow_core::CommNetwork;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AppError;

pub const PATIENTS_FILE: &str = "patients.csv";
pub const EVENTS_FILE: &str = "access_log.csv";
pub const GROUPS_FILE: &str = "groups.json";
pub const SETTINGS_FILE: &str = "settings.json";
pub const CACHE_DIR: &str = ".cache";
pub const ALL_GROUP: &str = "all";
/// Environment variable naming the default workspace root.
pub const DATA_ENV: &str = "COMMFLOW_DATA";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub policy: FilterPolicy,
    pub drop_actions: AdminDropList,
    pub measures: MeasureConfig,
    pub metric: MetricConfig,
    pub flow: FlowOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDef {
    pub group_id: String,
    #[serde(default)]
    pub criteria: CohortCriteria,
}

/// Measure vectors of a group's members, in patient id order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupVectors {
    pub vectors: Vec<NetworkMeasureVector>,
    pub outcomes: Vec<Outcome>,
    /// Members without a complete measure vector, with the reason.
    pub excluded: Vec<(String, String)>,
}

type Slot<V> = Arc<OnceLock<Result<Arc<V>, AppError>>>;

/// Per-key memo whose computation runs at most once, even under
/// concurrent requests for the same key.
struct Memo<V> {
    slots: Mutex<HashMap<String, Slot<V>>>,
}

impl<V> Default for Memo<V> {
    fn default() -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
        }
    }
}

impl<V> Memo<V> {
    fn get_or_compute(&self, key: String, f: impl FnOnce() -> Result<V, AppError>) -> Result<Arc<V>, AppError> {
        let slot = self.slots.lock().expect("memo lock").entry(key).or_default().clone();
        slot.get_or_init(|| f().map(Arc::new)).clone()
    }
}

/// Immutable snapshot of a workspace directory.
pub struct Workspace {
    root: PathBuf,
    content_hash: String,
    settings: Settings,
    patients: BTreeMap<String, PatientRecord>,
    /// Patients removed by the inclusion policy.
    excluded: Vec<String>,
    networks: BTreeMap<String, CommNetwork>,
    groups: BTreeMap<String, CohortGroup>,
    vectors: Memo<GroupVectors>,
    metrics: Memo<MetricModel>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> AppError {
    AppError::Internal(format!("{}: {e}", path.display()))
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>, AppError> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path, e)),
    }
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, AppError> {
        let root = root.into();
        let mut raw = Vec::new();
        for name in [PATIENTS_FILE, EVENTS_FILE, GROUPS_FILE, SETTINGS_FILE] {
            raw.push(read_optional(&root.join(name))?);
        }
        for (i, name) in [PATIENTS_FILE, EVENTS_FILE].iter().enumerate() {
            if raw[i].is_none() {
                return Err(AppError::Internal(format!(
                    "{} has no {name}; run `ingest` or `generate` first",
                    root.display()
                )));
            }
        }
        let parts: Vec<&[u8]> = raw.iter().map(|r| r.as_deref().unwrap_or(b"\0absent")).collect();
        let content_hash = sha256_hex(&parts);

        let settings: Settings = match &raw[3] {
            Some(b) => serde_json::from_slice(b).map_err(|e| io_err(&root.join(SETTINGS_FILE), e))?,
            None => Settings::default(),
        };
        settings.metric.validate().map_err(|e| io_err(&root.join(SETTINGS_FILE), e))?;
        let all_patients = parse_patients(raw[0].as_deref().unwrap()).map_err(|e| io_err(&root.join(PATIENTS_FILE), e))?;
        let events = parse_access_log_with(raw[1].as_deref().unwrap(), &settings.drop_actions)
            .map_err(|e| io_err(&root.join(EVENTS_FILE), e))?;
        let (kept, events) = apply_policy(&all_patients, &events, &settings.policy)?;
        let excluded = all_patients
            .iter()
            .filter(|p| !kept.iter().any(|k| k.patient_id == p.patient_id))
            .map(|p| p.patient_id.clone())
            .collect();
        let networks = build_networks(&events)?;

        let mut defs = vec![GroupDef {
            group_id: ALL_GROUP.into(),
            criteria: CohortCriteria::default(),
        }];
        if let Some(b) = &raw[2] {
            let extra: Vec<GroupDef> = serde_json::from_slice(b).map_err(|e| io_err(&root.join(GROUPS_FILE), e))?;
            defs.extend(extra.into_iter().filter(|d| d.group_id != ALL_GROUP));
        }
        let mut groups = BTreeMap::new();
        for d in defs {
            let g = select_group(d.group_id.clone(), &kept, &d.criteria)
                .map_err(|e| io_err(&root.join(GROUPS_FILE), format!("group `{}`: {e}", d.group_id)))?;
            groups.insert(d.group_id, g);
        }
        Ok(Self {
            root,
            content_hash,
            settings,
            patients: kept.into_iter().map(|p| (p.patient_id.clone(), p)).collect(),
            excluded,
            networks,
            groups,
            vectors: Memo::default(),
            metrics: Memo::default(),
        })
    }

    /// Writes validated inputs into `root`, creating it if needed.
    pub fn write_inputs(
        root: &Path,
        patients: &[PatientRecord],
        events: &[AccessEvent],
        groups: Option<&[GroupDef]>,
    ) -> Result<(), AppError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let p = root.join(PATIENTS_FILE);
        write_patients(fs::File::create(&p).map_err(|e| io_err(&p, e))?, patients)?;
        let e = root.join(EVENTS_FILE);
        write_access_log(fs::File::create(&e).map_err(|err| io_err(&e, err))?, events)?;
        if let Some(g) = groups {
            let path = root.join(GROUPS_FILE);
            let text = serde_json::to_string_pretty(g).map_err(|err| io_err(&path, err))?;
            fs::write(&path, text + "\n").map_err(|err| io_err(&path, err))?;
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn excluded_patients(&self) -> &[String] {
        &self.excluded
    }

    pub fn groups(&self) -> impl Iterator<Item = &CohortGroup> {
        self.groups.values()
    }

    pub fn group(&self, id: &str) -> Result<&CohortGroup, AppError> {
        self.groups.get(id).ok_or_else(|| AppError::NotFound {
            what: "group",
            id: id.to_string(),
        })
    }

    pub fn patient(&self, id: &str) -> Result<&PatientRecord, AppError> {
        self.patients.get(id).ok_or_else(|| AppError::NotFound {
            what: "patient",
            id: id.to_string(),
        })
    }

    /// The patient's network, or a 404 when the patient is unknown or has
    /// no retained accesses.
    pub fn network(&self, id: &str) -> Result<&CommNetwork, AppError> {
        self.patient(id)?;
        self.networks.get(id).ok_or_else(|| AppError::NotFound {
            what: "network of patient",
            id: id.to_string(),
        })
    }

    fn config_key(&self, group: &str, config: &impl Serialize) -> String {
        let cfg = serde_json::to_vec(config).expect("settings serialize");
        format!("{group}-{}", &sha256_hex(&[self.content_hash.as_bytes(), &cfg])[..16])
    }

    pub fn group_vectors(&self, group: &str) -> Result<Arc<GroupVectors>, AppError> {
        let g = self.group(group)?;
        let cfg = self.settings.measures;
        self.vectors.get_or_compute(self.config_key(group, &cfg), || {
            use rayon::prelude::*;
            let rows: Vec<(String, Result<NetworkMeasureVector, String>)> = g
                .member_ids
                .par_iter()
                .map(|id| {
                    let v = match self.networks.get(id) {
                        Some(net) => measure_vector(net, &cfg).map_err(|e| e.to_string()),
                        None => Err("no accesses in the observation window".to_string()),
                    };
                    (id.clone(), v)
                })
                .collect();
            let mut out = GroupVectors {
                vectors: Vec::new(),
                outcomes: Vec::new(),
                excluded: Vec::new(),
            };
            for (id, v) in rows {
                match v {
                    Ok(v) => {
                        out.outcomes.push(self.patients[&id].outcome);
                        out.vectors.push(v);
                    }
                    Err(reason) => out.excluded.push((id, reason)),
                }
            }
            Ok(out)
        })
    }

    /// Metric model of a group under the workspace settings, or under
    /// `config` when given.
    pub fn metric(&self, group: &str, config: Option<&MetricConfig>) -> Result<Arc<MetricModel>, AppError> {
        self.group(group)?;
        let cfg = config.unwrap_or(&self.settings.metric);
        cfg.validate().map_err(|e| AppError::from_core(e, "config"))?;
        let key = self.config_key(group, &(&self.settings.measures, cfg));
        let path = self.root.join(CACHE_DIR).join(format!("metric-{key}.json"));
        self.metrics.get_or_compute(key, || {
            if let Ok(bytes) = fs::read(&path) {
                if let Ok(m) = serde_json::from_slice::<MetricModel>(&bytes) {
                    return Ok(m);
                }
            }
            let gv = self.group_vectors(group)?;
            let mut model = compose_metric(&gv.vectors, &gv.outcomes, cfg).map_err(|e| match AppError::from(e) {
                AppError::BadParam { message, .. } => AppError::Unprocessable(format!("group `{group}`: {message}")),
                other => other,
            })?;
            for (id, reason) in &gv.excluded {
                model.warnings.push(format!("patient {id} excluded: {reason}"));
            }
            if let Ok(text) = serde_json::to_vec(&model) {
                if fs::create_dir_all(path.parent().expect("cache dir")).is_ok() && fs::write(&path, text).is_err() {
                    tracing::warn!("could not persist {}", path.display());
                }
            }
            Ok(model)
        })
    }
}
