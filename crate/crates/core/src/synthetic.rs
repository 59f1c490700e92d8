//! Seeded synthetic cohorts with a planted outcome-associated structural
//! signal.
//!
//! Every patient first receives a baseline network: notes written by random
//! HCPs and read later by others. The spread of the planted measure over
//! these baselines sets the unit of the effect size. Survivors' networks
//! are then edited (edges rewired, or nodes/edges added for size and
//! density measures) until the planted measure sits `effect_size` baseline
//! standard deviations above its baseline value.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{AccessEvent, FilterPolicy, HcpTitle, Milestone, Outcome, PatientRecord, Sex};
use crate::error::{Error, Result};
use crate::measures::{measure_value, MeasureConfig, MeasureId};
use crate::network::{CommNetwork, NodeRef};
use crate::time::{TimeWindow, Timestamp, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneSpec {
    /// Days after diagnosis (negative for before).
    pub offset_days: i64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_patients: usize,
    /// Inclusive range of HCPs per patient.
    pub n_hcps_range: (usize, usize),
    /// Inclusive range of notes per patient.
    pub n_notes_range: (usize, usize),
    pub survival_fraction: f64,
    pub planted_measure: MeasureId,
    /// Survivor shift of the planted measure in baseline standard deviations.
    pub planted_effect_size: f64,
    /// Inclusive range of reads per note.
    pub reads_per_note: (usize, usize),
    /// Longest delay between a note's writing and a read, in days.
    pub max_read_delay_days: i64,
    /// First possible diagnosis date.
    pub start_date: NaiveDate,
    /// Diagnosis dates are spread uniformly over this many days.
    pub diagnosis_spread_days: u64,
    pub milestones: Vec<MilestoneSpec>,
    pub cancer_types: Vec<String>,
    pub stages: Vec<String>,
    pub payers: Vec<String>,
    pub age_range: (u32, u32),
    /// Edit rounds per survivor while planting the signal.
    pub max_iterations: usize,
    /// Candidate edits scored per round.
    pub candidates_per_iteration: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            seed: 7,
            n_patients: 40,
            n_hcps_range: (4, 9),
            n_notes_range: (6, 14),
            survival_fraction: 0.6,
            planted_measure: MeasureId::AvgDistance,
            planted_effect_size: 1.5,
            reads_per_note: (1, 3),
            max_read_delay_days: 14,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date"),
            diagnosis_spread_days: 365,
            milestones: vec![
                MilestoneSpec {
                    offset_days: 0,
                    label: "Diagnosis".into(),
                },
                MilestoneSpec {
                    offset_days: 28,
                    label: "Surgery".into(),
                },
                MilestoneSpec {
                    offset_days: 70,
                    label: "Chemotherapy".into(),
                },
                MilestoneSpec {
                    offset_days: 200,
                    label: "Follow-up".into(),
                },
            ],
            cancer_types: s(&["lung", "breast", "colorectal"]),
            stages: s(&["1", "2", "3", "4"]),
            payers: s(&["Medicare", "Medicaid", "Private"]),
            age_range: (40, 85),
            max_iterations: 200,
            candidates_per_iteration: 16,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.n_patients < 2 {
            return bad(format!("need at least 2 patients, got {}", self.n_patients));
        }
        for (name, (lo, hi)) in [("n_hcps_range", self.n_hcps_range), ("n_notes_range", self.n_notes_range)] {
            if lo < 2 || lo > hi {
                return bad(format!("{name} must satisfy 2 <= min <= max, got ({lo}, {hi})"));
            }
        }
        if self.reads_per_note.0 > self.reads_per_note.1 {
            return bad("reads_per_note range is inverted".into());
        }
        if self.age_range.0 > self.age_range.1 {
            return bad("age_range is inverted".into());
        }
        let alive = self.alive_count();
        if alive == 0 || alive == self.n_patients {
            return bad(format!(
                "survival_fraction {} leaves one outcome class empty",
                self.survival_fraction
            ));
        }
        if !self.planted_effect_size.is_finite() || self.planted_effect_size < 0.0 {
            return bad("planted_effect_size must be finite and non-negative".into());
        }
        if self.max_read_delay_days < 1 {
            return bad("max_read_delay_days must be at least 1".into());
        }
        if self.cancer_types.is_empty() || self.stages.is_empty() || self.payers.is_empty() {
            return bad("demographic category lists must not be empty".into());
        }
        if self.candidates_per_iteration == 0 {
            return bad("candidates_per_iteration must be positive".into());
        }
        let policy = FilterPolicy::default();
        for m in &self.milestones {
            if m.offset_days < -(policy.days_before as i64) || m.offset_days > policy.days_after as i64 {
                return bad(format!("milestone `{}` falls outside the observation window", m.label));
            }
        }
        Ok(())
    }

    fn alive_count(&self) -> usize {
        (self.survival_fraction * self.n_patients as f64).round().clamp(0.0, self.n_patients as f64) as usize
    }
}

type EdgeList = BTreeMap<(NodeRef, NodeRef), Vec<Timestamp>>;

struct Draft {
    record: PatientRecord,
    titles: HashMap<String, HcpTitle>,
    edges: EdgeList,
    window: (Timestamp, Timestamp),
    rng: ChaCha8Rng,
}

impl Draft {
    fn network(&self) -> CommNetwork {
        to_network(&self.record.patient_id, self.window, &self.edges)
    }
}

fn to_network(id: &str, window: (Timestamp, Timestamp), edges: &EdgeList) -> CommNetwork {
    CommNetwork::from_edges(
        id,
        TimeWindow {
            start: window.0,
            end: window.1,
        },
        edges.iter().map(|((s, d), ts)| (s.clone(), d.clone(), ts.clone())),
    )
    .expect("generated edges are bipartite with timestamps")
}

fn patient_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draft_patient(cfg: &SyntheticConfig, index: usize, outcome: Outcome) -> Draft {
    let mut rng = patient_rng(cfg.seed, index as u64 + 1);
    let policy = FilterPolicy::default();
    let patient_id = format!("P{:03}", index + 1);
    let dx = cfg.start_date + Days::new(rng.random_range(0..=cfg.diagnosis_spread_days));
    let (last_contact_date, death_date) = match outcome {
        Outcome::Alive => (dx + Days::new(policy.days_after + rng.random_range(1..=200)), None),
        Outcome::Dead => {
            let d = dx + Days::new(policy.days_after + rng.random_range(1..=300));
            (d, Some(d))
        }
    };
    let milestones = cfg
        .milestones
        .iter()
        .map(|m| Milestone {
            date: dx.checked_add_signed(chrono::Duration::days(m.offset_days)).expect("date in range"),
            label: m.label.clone(),
        })
        .collect();
    let sex = if rng.random_bool(0.5) { Sex::Female } else { Sex::Male };
    let record = PatientRecord {
        patient_id: patient_id.clone(),
        age: rng.random_range(cfg.age_range.0..=cfg.age_range.1),
        sex,
        cancer_type: cfg.cancer_types.choose(&mut rng).expect("non-empty").clone(),
        stage: cfg.stages.choose(&mut rng).expect("non-empty").clone(),
        payer: cfg.payers.choose(&mut rng).expect("non-empty").clone(),
        outcome,
        diagnosis_date: dx,
        last_contact_date,
        death_date,
        milestones,
    };
    let w = record.observation_window(&policy);
    let window = (w.start, w.end);

    let n1 = rng.random_range(cfg.n_hcps_range.0..=cfg.n_hcps_range.1);
    let n2 = rng.random_range(cfg.n_notes_range.0..=cfg.n_notes_range.1);
    let hcps: Vec<NodeRef> = (1..=n1).map(|k| NodeRef::hcp(format!("{patient_id}-H{k}"))).collect();
    let notes: Vec<NodeRef> = (1..=n2).map(|k| NodeRef::note(format!("{patient_id}-N{k}"))).collect();
    let titles = hcps
        .iter()
        .map(|h| (h.id.clone(), *HcpTitle::CORE.choose(&mut rng).expect("non-empty")))
        .collect();

    let delay_max = cfg.max_read_delay_days * SECONDS_PER_DAY;
    let mut edges: EdgeList = BTreeMap::new();
    let mut write_time = Vec::with_capacity(n2);
    for (k, note) in notes.iter().enumerate() {
        let author = if k < n1 { &hcps[k] } else { hcps.choose(&mut rng).expect("non-empty") };
        let t = rng.random_range(window.0..=window.1 - delay_max);
        write_time.push(t);
        edges.entry((author.clone(), note.clone())).or_default().push(t);
        let reads = rng.random_range(cfg.reads_per_note.0..=cfg.reads_per_note.1);
        for _ in 0..reads {
            let reader = hcps.choose(&mut rng).expect("non-empty");
            let r = t + rng.random_range(60..=delay_max);
            edges.entry((note.clone(), reader.clone())).or_default().push(r);
        }
    }
    // HCPs that authored nothing read at least one note
    for h in hcps.iter().skip(n2) {
        let k = rng.random_range(0..n2);
        let r = write_time[k] + rng.random_range(60..=delay_max);
        edges.entry((notes[k].clone(), h.clone())).or_default().push(r);
    }
    Draft {
        record,
        titles,
        edges,
        window,
        rng,
    }
}

fn degree(edges: &EdgeList, n: &NodeRef) -> usize {
    edges.keys().filter(|(s, d)| s == n || d == n).count()
}

fn nodes_of(edges: &EdgeList) -> (Vec<NodeRef>, Vec<NodeRef>) {
    let all: BTreeSet<&NodeRef> = edges.keys().flat_map(|(s, d)| [s, d]).collect();
    let (h, n): (Vec<&NodeRef>, Vec<&NodeRef>) = all.into_iter().partition(|x| x.is_hcp());
    (h.into_iter().cloned().collect(), n.into_iter().cloned().collect())
}

fn random_pair(rng: &mut ChaCha8Rng, hcps: &[NodeRef], notes: &[NodeRef]) -> (NodeRef, NodeRef) {
    let h = hcps.choose(rng).expect("non-empty").clone();
    let n = notes.choose(rng).expect("non-empty").clone();
    if rng.random_bool(0.5) {
        (h, n)
    } else {
        (n, h)
    }
}

/// One random structural edit, or `None` when the draw is not applicable.
fn propose(patient_id: &str, edges: &EdgeList, measure: MeasureId, window: (Timestamp, Timestamp), rng: &mut ChaCha8Rng, fresh: usize) -> Option<EdgeList> {
    let (hcps, notes) = nodes_of(edges);
    let mut next = edges.clone();
    match measure {
        MeasureId::HcpSize | MeasureId::NoteSize => {
            let t = rng.random_range(window.0..=window.1);
            let (anchor, new) = if measure == MeasureId::HcpSize {
                let id = format!("{}-HX{fresh}", patient_id);
                (notes.choose(rng)?.clone(), NodeRef::hcp(id))
            } else {
                let id = format!("{}-NX{fresh}", patient_id);
                (hcps.choose(rng)?.clone(), NodeRef::note(id))
            };
            let pair = if rng.random_bool(0.5) { (anchor, new) } else { (new, anchor) };
            next.insert(pair, vec![t]);
        }
        MeasureId::Density => {
            let pair = random_pair(rng, &hcps, &notes);
            if next.contains_key(&pair) {
                return None;
            }
            next.insert(pair, vec![rng.random_range(window.0..=window.1)]);
        }
        _ => {
            let keys: Vec<&(NodeRef, NodeRef)> = edges.keys().collect();
            let old = (*keys.choose(rng)?).clone();
            if degree(edges, &old.0) < 2 || degree(edges, &old.1) < 2 {
                return None;
            }
            let pair = random_pair(rng, &hcps, &notes);
            if edges.contains_key(&pair) {
                return None;
            }
            let ts = next.remove(&old).expect("chosen key");
            next.insert(pair, ts);
        }
    }
    Some(next)
}

fn plant(draft: &mut Draft, cfg: &SyntheticConfig, target: f64, tolerance: f64, mcfg: &MeasureConfig) {
    let m = cfg.planted_measure;
    let eval = |edges: &EdgeList, id: &str, w| measure_value(&to_network(id, w, edges), m, mcfg);
    let id = draft.record.patient_id.clone();
    let Some(mut current) = eval(&draft.edges, &id, draft.window) else {
        return;
    };
    let mut fresh = 0;
    for _ in 0..cfg.max_iterations {
        if (current - target).abs() <= tolerance {
            break;
        }
        let mut best: Option<(f64, EdgeList)> = None;
        for _ in 0..cfg.candidates_per_iteration {
            fresh += 1;
            let Some(cand) = propose(&id, &draft.edges, m, draft.window, &mut draft.rng, fresh) else {
                continue;
            };
            let Some(v) = eval(&cand, &id, draft.window) else {
                continue;
            };
            if best.as_ref().is_none_or(|(b, _)| (v - target).abs() < (b - target).abs()) {
                best = Some((v, cand));
            }
        }
        match best {
            Some((v, cand)) if (v - target).abs() < (current - target).abs() => {
                current = v;
                draft.edges = cand;
            }
            _ => {
                if matches!(m, MeasureId::HcpSize | MeasureId::NoteSize | MeasureId::Density) {
                    break;
                }
            }
        }
    }
}

/// Generated cohort plus the baseline spread used to scale the effect.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub patients: Vec<PatientRecord>,
    pub events: Vec<AccessEvent>,
    pub baseline_sd: f64,
}

/// Builds a seeded cohort. Identical configurations give identical output.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticCohort> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..cfg.n_patients).collect();
    order.shuffle(&mut patient_rng(cfg.seed, 0));
    let alive: BTreeSet<usize> = order[..cfg.alive_count()].iter().copied().collect();
    let mcfg = MeasureConfig::default();

    let mut drafts: Vec<Draft> = (0..cfg.n_patients)
        .into_par_iter()
        .map(|i| draft_patient(cfg, i, if alive.contains(&i) { Outcome::Alive } else { Outcome::Dead }))
        .collect();
    let baseline: Vec<f64> = drafts
        .par_iter()
        .map(|d| measure_value(&d.network(), cfg.planted_measure, &mcfg).unwrap_or(0.0))
        .collect();
    let n = baseline.len() as f64;
    let mean = baseline.iter().sum::<f64>() / n;
    let sd = (baseline.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if cfg.planted_effect_size > 0.0 {
        if sd == 0.0 {
            return Err(Error::Infeasible(format!(
                "{} does not vary across baseline networks; no effect can be scaled",
                cfg.planted_measure
            )));
        }
        drafts
            .par_iter_mut()
            .zip(&baseline)
            .filter(|(d, _)| d.record.outcome == Outcome::Alive)
            .for_each(|(d, &b)| plant(d, cfg, b + cfg.planted_effect_size * sd, 0.05 * sd, &mcfg));
    }

    let mut patients = Vec::with_capacity(drafts.len());
    let mut events = Vec::new();
    for d in &drafts {
        events.extend(d.network().to_events(&d.titles));
        patients.push(d.record.clone());
    }
    Ok(SyntheticCohort {
        patients,
        events,
        baseline_sd: sd,
    })
}
