//! Case/event data model, CSV ingest, filtering policies and cohort groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{self, Timestamp, TimeWindow};

pub const ACCESS_LOG_HEADER: [&str; 6] =
    ["patient_id", "hcp_id", "hcp_title", "note_id", "action", "timestamp"];

pub const PATIENT_HEADER: [&str; 11] = [
    "patient_id",
    "age",
    "sex",
    "cancer_type",
    "stage",
    "payer",
    "outcome",
    "diagnosis_date",
    "last_contact_date",
    "death_date",
    "milestones",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HcpTitle {
    MD,
    RN,
    ARNP,
    PA,
    Pharmacist,
    CaseManager,
    Other,
}

impl HcpTitle {
    pub const CORE: [HcpTitle; 6] = [
        HcpTitle::MD,
        HcpTitle::RN,
        HcpTitle::ARNP,
        HcpTitle::PA,
        HcpTitle::Pharmacist,
        HcpTitle::CaseManager,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HcpTitle::MD => "MD",
            HcpTitle::RN => "RN",
            HcpTitle::ARNP => "ARNP",
            HcpTitle::PA => "PA",
            HcpTitle::Pharmacist => "Pharmacist",
            HcpTitle::CaseManager => "CaseManager",
            HcpTitle::Other => "Other",
        }
    }

    /// Unknown titles map to `Other` so that raw logs ingest losslessly
    /// before the title filter runs.
    pub fn parse_lossy(s: &str) -> Self {
        let norm: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "md" => HcpTitle::MD,
            "rn" => HcpTitle::RN,
            "arnp" => HcpTitle::ARNP,
            "pa" => HcpTitle::PA,
            "pharmacist" => HcpTitle::Pharmacist,
            "casemanager" => HcpTitle::CaseManager,
            _ => HcpTitle::Other,
        }
    }
}

impl fmt::Display for HcpTitle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Write,
    Read,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Write => "write",
            Action::Read => "read",
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "write" => Ok(Action::Write),
            "read" => Ok(Action::Read),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessEvent {
    pub patient_id: String,
    pub hcp_id: String,
    pub hcp_title: HcpTitle,
    pub note_id: String,
    pub action: Action,
    #[serde(with = "time::rfc3339")]
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    Female,
    Male,
    Unknown,
}

impl FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" => Ok(Sex::Female),
            "m" | "male" => Ok(Sex::Male),
            "" | "u" | "unknown" | "other" => Ok(Sex::Unknown),
            other => Err(format!("unknown sex `{other}`")),
        }
    }
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "Female",
            Sex::Male => "Male",
            Sex::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Alive,
    Dead,
}

impl Outcome {
    /// Survival coding used throughout the metric: Alive = 1, Dead = 0.
    pub fn indicator(self) -> f64 {
        match self {
            Outcome::Alive => 1.0,
            Outcome::Dead => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Alive => "Alive",
            Outcome::Dead => "Dead",
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alive" => Ok(Outcome::Alive),
            "dead" => Ok(Outcome::Dead),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub date: NaiveDate,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub age: u32,
    pub sex: Sex,
    pub cancer_type: String,
    pub stage: String,
    pub payer: String,
    pub outcome: Outcome,
    pub diagnosis_date: NaiveDate,
    pub last_contact_date: NaiveDate,
    pub death_date: Option<NaiveDate>,
    pub milestones: Vec<Milestone>,
}

impl PatientRecord {
    /// Observation window under `policy`: whole days from
    /// `diagnosis − days_before` through `diagnosis + days_after`.
    pub fn observation_window(&self, policy: &FilterPolicy) -> TimeWindow {
        let start = self.diagnosis_date - Days::new(policy.days_before);
        let end = self.diagnosis_date + Days::new(policy.days_after);
        TimeWindow {
            start: time::day_start(start),
            end: time::day_end(end),
        }
    }

    /// True when the patient died within `days_after` of diagnosis (or is
    /// recorded dead without a date).
    pub fn is_early_death(&self, policy: &FilterPolicy) -> bool {
        match (self.outcome, self.death_date) {
            (Outcome::Alive, _) => false,
            (Outcome::Dead, None) => true,
            (Outcome::Dead, Some(d)) => d <= self.diagnosis_date + Days::new(policy.days_after),
        }
    }
}

/// Inclusion policy applied before network construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub core_titles: BTreeSet<HcpTitle>,
    pub days_before: u64,
    pub days_after: u64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            core_titles: HcpTitle::CORE.into_iter().collect(),
            days_before: 90,
            days_after: 365,
        }
    }
}

/// Action strings that are silently discarded at ingest (administrative
/// categories such as billing). Anything not listed and not `write`/`read`
/// is rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminDropList {
    pub actions: BTreeSet<String>,
}

impl AdminDropList {
    pub fn new<I, S>(actions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            actions: actions
                .into_iter()
                .map(|a| a.as_ref().trim().to_ascii_lowercase())
                .collect(),
        }
    }

    fn drops(&self, action: &str) -> bool {
        self.actions.contains(&action.trim().to_ascii_lowercase())
    }
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            column: "header".into(),
            message: format!("expected `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, header: &[&str], line: u64) -> Result<&'a str> {
    rec.get(idx).map(str::trim).ok_or_else(|| Error::Parse {
        line,
        column: header[idx].to_string(),
        message: "missing field".into(),
    })
}

fn non_empty(v: &str, column: &str, line: u64) -> Result<String> {
    if v.is_empty() {
        return Err(Error::Parse {
            line,
            column: column.into(),
            message: "empty value".into(),
        });
    }
    Ok(v.to_string())
}

fn parse_err(line: u64, column: &str, message: impl fmt::Display) -> Error {
    Error::Parse {
        line,
        column: column.into(),
        message: message.to_string(),
    }
}

/// Parses an access-log CSV. Rows keep their input order.
pub fn parse_access_log<R: Read>(reader: R) -> Result<Vec<AccessEvent>> {
    parse_access_log_with(reader, &AdminDropList::default())
}

pub fn parse_access_log_with<R: Read>(reader: R, drop: &AdminDropList) -> Result<Vec<AccessEvent>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    check_header(rdr.headers()?, &ACCESS_LOG_HEADER)?;
    let h = &ACCESS_LOG_HEADER;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != h.len() {
            return Err(parse_err(
                line,
                h[rec.len().min(h.len() - 1)],
                format!("expected {} fields, found {}", h.len(), rec.len()),
            ));
        }
        let action_raw = field(&rec, 4, h, line)?;
        if drop.drops(action_raw) {
            continue;
        }
        let action = action_raw
            .parse::<Action>()
            .map_err(|e| parse_err(line, "action", e))?;
        let ts_raw = field(&rec, 5, h, line)?;
        let timestamp = time::parse_timestamp(ts_raw).map_err(|e| parse_err(line, "timestamp", e))?;
        out.push(AccessEvent {
            patient_id: non_empty(field(&rec, 0, h, line)?, "patient_id", line)?,
            hcp_id: non_empty(field(&rec, 1, h, line)?, "hcp_id", line)?,
            hcp_title: HcpTitle::parse_lossy(field(&rec, 2, h, line)?),
            note_id: non_empty(field(&rec, 3, h, line)?, "note_id", line)?,
            action,
            timestamp,
        });
    }
    Ok(out)
}

pub fn write_access_log<W: Write>(writer: W, events: &[AccessEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ACCESS_LOG_HEADER)?;
    for e in events {
        w.write_record([
            e.patient_id.as_str(),
            e.hcp_id.as_str(),
            e.hcp_title.as_str(),
            e.note_id.as_str(),
            e.action.as_str(),
            time::format_timestamp(e.timestamp).as_str(),
        ])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

pub fn parse_patients<R: Read>(reader: R) -> Result<Vec<PatientRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    check_header(rdr.headers()?, &PATIENT_HEADER)?;
    let h = &PATIENT_HEADER;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != h.len() {
            return Err(parse_err(
                line,
                h[rec.len().min(h.len() - 1)],
                format!("expected {} fields, found {}", h.len(), rec.len()),
            ));
        }
        let get = |i: usize| field(&rec, i, h, line);
        let date = |i: usize| time::parse_date(get(i)?).map_err(|e| parse_err(line, h[i], e));
        let death_raw = get(9)?;
        let death_date = if death_raw.is_empty() { None } else { Some(date(9)?) };
        let milestones_raw = get(10)?;
        let milestones: Vec<Milestone> = if milestones_raw.is_empty() {
            Vec::new()
        } else {
            serde_json::from_str(milestones_raw).map_err(|e| parse_err(line, "milestones", e))?
        };
        out.push(PatientRecord {
            patient_id: non_empty(get(0)?, "patient_id", line)?,
            age: get(1)?.parse().map_err(|e| parse_err(line, "age", e))?,
            sex: get(2)?.parse().map_err(|e| parse_err(line, "sex", e))?,
            cancer_type: get(3)?.to_string(),
            stage: get(4)?.to_string(),
            payer: get(5)?.to_string(),
            outcome: get(6)?.parse().map_err(|e| parse_err(line, "outcome", e))?,
            diagnosis_date: date(7)?,
            last_contact_date: date(8)?,
            death_date,
            milestones,
        });
    }
    Ok(out)
}

pub fn write_patients<W: Write>(writer: W, patients: &[PatientRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PATIENT_HEADER)?;
    for p in patients {
        let milestones = serde_json::to_string(&p.milestones)?;
        w.write_record([
            p.patient_id.clone(),
            p.age.to_string(),
            p.sex.as_str().to_string(),
            p.cancer_type.clone(),
            p.stage.clone(),
            p.payer.clone(),
            p.outcome.as_str().to_string(),
            p.diagnosis_date.to_string(),
            p.last_contact_date.to_string(),
            p.death_date.map(|d| d.to_string()).unwrap_or_default(),
            milestones,
        ])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

/// Keeps events with a core title whose timestamp lies inside the
/// per-patient observation window.
pub fn filter_events(
    events: &[AccessEvent],
    patients: &[PatientRecord],
    policy: &FilterPolicy,
) -> Result<Vec<AccessEvent>> {
    let windows: BTreeMap<&str, TimeWindow> = patients
        .iter()
        .map(|p| (p.patient_id.as_str(), p.observation_window(policy)))
        .collect();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let window = windows
            .get(e.patient_id.as_str())
            .ok_or_else(|| Error::UnknownPatient(e.patient_id.clone()))?;
        if policy.core_titles.contains(&e.hcp_title) && window.contains(e.timestamp) {
            out.push(e.clone());
        }
    }
    Ok(out)
}

/// Drops patients who died within the follow-up year, then filters the
/// remaining patients' events. Events of dropped patients are discarded.
pub fn apply_policy(
    patients: &[PatientRecord],
    events: &[AccessEvent],
    policy: &FilterPolicy,
) -> Result<(Vec<PatientRecord>, Vec<AccessEvent>)> {
    let known: BTreeSet<&str> = patients.iter().map(|p| p.patient_id.as_str()).collect();
    if let Some(e) = events.iter().find(|e| !known.contains(e.patient_id.as_str())) {
        return Err(Error::UnknownPatient(e.patient_id.clone()));
    }
    let kept: Vec<PatientRecord> = patients
        .iter()
        .filter(|p| !p.is_early_death(policy))
        .cloned()
        .collect();
    let kept_ids: BTreeSet<&str> = kept.iter().map(|p| p.patient_id.as_str()).collect();
    let candidate: Vec<AccessEvent> = events
        .iter()
        .filter(|e| kept_ids.contains(e.patient_id.as_str()))
        .cloned()
        .collect();
    let filtered = filter_events(&candidate, &kept, policy)?;
    Ok((kept, filtered))
}

/// Demographic predicate; `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortCriteria {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cancer_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<Sex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payer: Option<String>,
}

impl CohortCriteria {
    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.age_min, self.age_max) {
            if lo > hi {
                return Err(Error::InvalidInput(format!("age range [{lo}, {hi}] is inverted")));
            }
        }
        Ok(())
    }

    pub fn matches(&self, p: &PatientRecord) -> bool {
        fn eq(want: &Option<String>, got: &str) -> bool {
            want.as_deref().is_none_or(|w| w.eq_ignore_ascii_case(got))
        }
        eq(&self.cancer_type, &p.cancer_type)
            && eq(&self.stage, &p.stage)
            && eq(&self.payer, &p.payer)
            && self.sex.is_none_or(|s| s == p.sex)
            && self.age_min.is_none_or(|lo| p.age >= lo)
            && self.age_max.is_none_or(|hi| p.age <= hi)
    }

    /// Conjunction of two predicates. `None` when they can never both hold.
    pub fn and(&self, other: &CohortCriteria) -> Option<CohortCriteria> {
        fn both(a: &Option<String>, b: &Option<String>) -> Option<Option<String>> {
            match (a, b) {
                (Some(x), Some(y)) if !x.eq_ignore_ascii_case(y) => None,
                (Some(x), _) => Some(Some(x.clone())),
                (None, y) => Some(y.clone()),
            }
        }
        let sex = match (self.sex, other.sex) {
            (Some(a), Some(b)) if a != b => return None,
            (a, b) => a.or(b),
        };
        let age_min = match (self.age_min, other.age_min) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let age_max = match (self.age_max, other.age_max) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let (Some(lo), Some(hi)) = (age_min, age_max) {
            if lo > hi {
                return None;
            }
        }
        Some(CohortCriteria {
            cancer_type: both(&self.cancer_type, &other.cancer_type)?,
            stage: both(&self.stage, &other.stage)?,
            payer: both(&self.payer, &other.payer)?,
            sex,
            age_min,
            age_max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortGroup {
    pub group_id: String,
    pub criteria: CohortCriteria,
    pub member_ids: BTreeSet<String>,
}

pub fn select_group(
    group_id: impl Into<String>,
    patients: &[PatientRecord],
    criteria: &CohortCriteria,
) -> Result<CohortGroup> {
    criteria.validate()?;
    Ok(CohortGroup {
        group_id: group_id.into(),
        criteria: criteria.clone(),
        member_ids: patients
            .iter()
            .filter(|p| criteria.matches(p))
            .map(|p| p.patient_id.clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "patient_id,hcp_id,hcp_title,note_id,action,timestamp\n";

    fn patient(id: &str, dx: &str) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            age: 70,
            sex: Sex::Female,
            cancer_type: "Lung".into(),
            stage: "3".into(),
            payer: "Medicare".into(),
            outcome: Outcome::Alive,
            diagnosis_date: time::parse_date(dx).unwrap(),
            last_contact_date: time::parse_date(dx).unwrap() + Days::new(400),
            death_date: None,
            milestones: vec![],
        }
    }

    fn event(p: &str, h: &str, title: HcpTitle, n: &str, a: Action, ts: &str) -> AccessEvent {
        AccessEvent {
            patient_id: p.into(),
            hcp_id: h.into(),
            hcp_title: title,
            note_id: n.into(),
            action: a,
            timestamp: time::parse_timestamp(ts).unwrap(),
        }
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_access_log(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn single_row() {
        let csv = format!("{HEADER}P1,H1,MD,N1,write,2021-01-01T00:00:01Z\n");
        let ev = parse_access_log(csv.as_bytes()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].action, Action::Write);
        assert_eq!(ev[0].hcp_title, HcpTitle::MD);
    }

    #[test]
    fn unknown_action_names_row_and_column() {
        let csv = format!(
            "{HEADER}P1,H1,MD,N1,read,2021-01-01T00:00:01Z\nP1,H1,MD,N1,bill,2021-01-01T00:00:02Z\n"
        );
        match parse_access_log(csv.as_bytes()) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "action");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn drop_list_skips_admin_actions() {
        let csv = format!(
            "{HEADER}P1,H1,MD,N1,bill,2021-01-01T00:00:01Z\nP1,H1,MD,N1,read,2021-01-01T00:00:02Z\n"
        );
        let ev = parse_access_log_with(csv.as_bytes(), &AdminDropList::new(["Bill"])).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].action, Action::Read);
    }

    #[test]
    fn malformed_timestamp_and_short_row() {
        let csv = format!("{HEADER}P1,H1,MD,N1,write,yesterday\n");
        assert!(matches!(
            parse_access_log(csv.as_bytes()),
            Err(Error::Parse { line: 2, ref column, .. }) if column == "timestamp"
        ));
        let csv = format!("{HEADER}P1,H1,MD,N1\n");
        assert!(matches!(parse_access_log(csv.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn unknown_title_maps_to_other() {
        assert_eq!(HcpTitle::parse_lossy("Social Worker"), HcpTitle::Other);
        assert_eq!(HcpTitle::parse_lossy("case manager"), HcpTitle::CaseManager);
    }

    #[test]
    fn filter_drops_other_titles_and_out_of_window() {
        let p = patient("P1", "2021-04-01");
        let inside = event("P1", "H1", HcpTitle::RN, "N1", Action::Read, "2021-04-02T10:00:00Z");
        let other = event("P1", "H2", HcpTitle::Other, "N1", Action::Read, "2021-04-02T10:00:00Z");
        // 91 days before diagnosis
        let early = event("P1", "H1", HcpTitle::MD, "N1", Action::Write, "2020-12-31T23:59:59Z");
        // exactly 90 days before
        let edge = event("P1", "H1", HcpTitle::MD, "N1", Action::Write, "2021-01-01T00:00:00Z");
        let late = event("P1", "H1", HcpTitle::MD, "N1", Action::Write, "2022-04-02T00:00:00Z");
        let last = event("P1", "H1", HcpTitle::MD, "N1", Action::Write, "2022-04-01T23:59:59Z");
        let out = filter_events(
            &[inside.clone(), other, early, edge.clone(), late, last.clone()],
            &[p],
            &FilterPolicy::default(),
        )
        .unwrap();
        assert_eq!(out, vec![inside, edge, last]);
    }

    #[test]
    fn filter_identity_on_compliant_input() {
        let p = patient("P1", "2021-04-01");
        let evs = vec![
            event("P1", "H1", HcpTitle::MD, "N1", Action::Write, "2021-04-02T10:00:00Z"),
            event("P1", "H2", HcpTitle::Pharmacist, "N1", Action::Read, "2021-04-03T10:00:00Z"),
        ];
        assert_eq!(filter_events(&evs, &[p], &FilterPolicy::default()).unwrap(), evs);
    }

    #[test]
    fn filter_unknown_patient_errors() {
        let evs = vec![event("P9", "H1", HcpTitle::MD, "N1", Action::Write, "2021-04-02T10:00:00Z")];
        assert!(matches!(
            filter_events(&evs, &[], &FilterPolicy::default()),
            Err(Error::UnknownPatient(_))
        ));
    }

    #[test]
    fn early_deaths_are_excluded() {
        let policy = FilterPolicy::default();
        let mut dead = patient("P2", "2021-01-01");
        dead.outcome = Outcome::Dead;
        dead.death_date = Some(time::parse_date("2021-12-01").unwrap());
        assert!(dead.is_early_death(&policy));
        dead.death_date = Some(time::parse_date("2022-01-02").unwrap());
        assert!(!dead.is_early_death(&policy));
        let mut early = dead.clone();
        early.patient_id = "P3".into();
        early.death_date = Some(time::parse_date("2021-06-01").unwrap());
        let evs = vec![event("P3", "H1", HcpTitle::MD, "N1", Action::Write, "2021-02-01T00:00:00Z")];
        let (kept, ev) = apply_policy(&[dead, early], &evs, &policy).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(ev.is_empty());
    }

    #[test]
    fn patients_round_trip_with_milestones() {
        let mut p = patient("P1", "2021-04-01");
        p.milestones = vec![Milestone {
            date: p.diagnosis_date,
            label: "Diagnosis, \"initial\"".into(),
        }];
        p.outcome = Outcome::Dead;
        p.death_date = Some(time::parse_date("2022-06-01").unwrap());
        let mut buf = Vec::new();
        write_patients(&mut buf, &[p.clone(), patient("P2", "2020-02-29")]).unwrap();
        let back = parse_patients(buf.as_slice()).unwrap();
        assert_eq!(back[0], p);
        assert_eq!(back.len(), 2);
    }

    #[test]
    fn select_group_wildcard_and_ranges() {
        let mut ps = Vec::new();
        for i in 0..41 {
            let mut p = patient(&format!("M{i}"), "2021-01-01");
            p.age = 65 + (i % 11) as u32;
            ps.push(p);
        }
        for i in 0..10 {
            let mut p = patient(&format!("X{i}"), "2021-01-01");
            match i % 3 {
                0 => p.age = 80,
                1 => p.stage = "2".into(),
                _ => p.cancer_type = "Breast".into(),
            }
            ps.push(p);
        }
        let all = select_group("all", &ps, &CohortCriteria::default()).unwrap();
        assert_eq!(all.member_ids.len(), 51);
        let crit = CohortCriteria {
            cancer_type: Some("Lung".into()),
            stage: Some("3".into()),
            age_min: Some(65),
            age_max: Some(75),
            ..Default::default()
        };
        let g = select_group("A", &ps, &crit).unwrap();
        let oracle = ps
            .iter()
            .filter(|p| p.cancer_type == "Lung" && p.stage == "3" && (65..=75).contains(&p.age))
            .count();
        assert_eq!(oracle, 41);
        assert_eq!(g.member_ids.len(), 41);
        let bad = CohortCriteria {
            age_min: Some(80),
            age_max: Some(70),
            ..Default::default()
        };
        assert!(select_group("bad", &ps, &bad).is_err());
    }

    fn arb_event() -> impl Strategy<Value = AccessEvent> {
        (
            "P[0-9]{1,2}",
            "H[0-9]{1,3}",
            prop::sample::select(vec![
                HcpTitle::MD,
                HcpTitle::RN,
                HcpTitle::ARNP,
                HcpTitle::PA,
                HcpTitle::Pharmacist,
                HcpTitle::CaseManager,
                HcpTitle::Other,
            ]),
            "N[a-z0-9]{1,4}",
            prop::bool::ANY,
            0i64..2_000_000_000,
        )
            .prop_map(|(p, h, t, n, w, ts)| AccessEvent {
                patient_id: p,
                hcp_id: h,
                hcp_title: t,
                note_id: n,
                action: if w { Action::Write } else { Action::Read },
                timestamp: ts,
            })
    }

    fn arb_patient() -> impl Strategy<Value = PatientRecord> {
        (
            "P[0-9]{1,2}",
            0u32..100,
            prop::sample::select(vec![Sex::Female, Sex::Male]),
            prop::sample::select(vec!["Lung", "Breast"]),
            prop::sample::select(vec!["2", "3"]),
            prop::sample::select(vec!["Medicare", "Private"]),
        )
            .prop_map(|(id, age, sex, c, s, pay)| {
                let mut p = patient(&id, "2021-01-01");
                p.age = age;
                p.sex = sex;
                p.cancer_type = c.into();
                p.stage = s.into();
                p.payer = pay.into();
                p
            })
    }

    fn arb_criteria() -> impl Strategy<Value = CohortCriteria> {
        (
            prop::option::of(prop::sample::select(vec!["Lung", "Breast"])),
            prop::option::of(prop::sample::select(vec!["2", "3"])),
            prop::option::of(0u32..60),
            prop::option::of(40u32..100),
            prop::option::of(prop::sample::select(vec![Sex::Female, Sex::Male])),
        )
            .prop_map(|(c, s, lo, hi, sex)| CohortCriteria {
                cancer_type: c.map(String::from),
                stage: s.map(String::from),
                age_min: lo,
                age_max: hi,
                sex,
                payer: None,
            })
    }

    proptest! {
        #[test]
        fn access_log_round_trip(events in prop::collection::vec(arb_event(), 0..30)) {
            let mut buf = Vec::new();
            write_access_log(&mut buf, &events).unwrap();
            prop_assert_eq!(parse_access_log(buf.as_slice()).unwrap(), events);
        }

        #[test]
        fn filter_is_idempotent(events in prop::collection::vec(arb_event(), 0..30)) {
            let ids: BTreeSet<String> = events.iter().map(|e| e.patient_id.clone()).collect();
            let patients: Vec<PatientRecord> =
                ids.iter().map(|id| patient(id, "2001-09-09")).collect();
            let policy = FilterPolicy::default();
            let once = filter_events(&events, &patients, &policy).unwrap();
            let twice = filter_events(&once, &patients, &policy).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn group_selection_composes(
            ps in prop::collection::vec(arb_patient(), 0..40).prop_map(|mut v| {
                for (i, p) in v.iter_mut().enumerate() {
                    p.patient_id = format!("P{i}");
                }
                v
            }),
            c1 in arb_criteria(),
            c2 in arb_criteria(),
        ) {
            prop_assume!(c1.validate().is_ok() && c2.validate().is_ok());
            let first = select_group("g1", &ps, &c1).unwrap();
            let members: Vec<PatientRecord> = ps
                .iter()
                .filter(|p| first.member_ids.contains(&p.patient_id))
                .cloned()
                .collect();
            let nested = select_group("g2", &members, &c2).unwrap().member_ids;
            let joint = match c1.and(&c2) {
                Some(c) => select_group("g", &ps, &c).unwrap().member_ids,
                None => BTreeSet::new(),
            };
            prop_assert_eq!(nested, joint);
        }
    }
}
