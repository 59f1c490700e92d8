//! Batch command line: `generate`, `ingest`, `measures`, `metric`, `reach`
//! and `serve`. Usage errors exit with status 2, failed computations with 1.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commflow_core::cohort::{parse_access_log_with, parse_patients, AdminDropList};
use commflow_core::synthetic::{generate_synthetic, SyntheticConfig};
use commflow_core::temporal::FlowDirection;
use commflow_core::MeasureId;
use serde::Serialize;

use crate::error::AppError;
use crate::views::{self, ReachQuery};
use crate::workspace::{GroupDef, Settings, Workspace, ALL_GROUP, DATA_ENV, SETTINGS_FILE};

#[derive(Debug, Parser)]
#[command(name = "commflow", version, about = "Communication network analytics over clinical access logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic cohort as a workspace.
    Generate(GenerateArgs),
    /// Validate patient and access-log CSVs and store them in a workspace.
    Ingest(IngestArgs),
    /// Print the measure table of a group.
    Measures(MeasuresArgs),
    /// Fit the effectiveness metric of a group and print the model.
    Metric(MetricArgs),
    /// Print the reviewed or disseminated subnetwork of an ego.
    Reach(ReachArgs),
    /// Serve the JSON API over a workspace.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataArg {
    /// Workspace directory.
    #[arg(long, env = DATA_ENV)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON synthetic configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patients: Option<usize>,
    /// Planted effect in baseline standard deviations.
    #[arg(long)]
    pub effect: Option<f64>,
    /// Measure carrying the planted effect.
    #[arg(long, value_parser = parse_measure_arg)]
    pub measure: Option<MeasureId>,
    /// Output workspace directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Patient table CSV.
    #[arg(long)]
    pub patients: PathBuf,
    /// Access log CSV.
    #[arg(long)]
    pub events: PathBuf,
    /// JSON list of `{group_id, criteria}`.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// JSON workspace settings (policy, drop list, computation options).
    #[arg(long)]
    pub settings: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArg,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct MeasuresArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long, default_value = ALL_GROUP)]
    pub group: String,
    #[arg(long, value_enum, default_value_t)]
    pub format: TableFormat,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long, default_value = ALL_GROUP)]
    pub group: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Permutations for the p-values (at least 1000).
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long)]
    pub patient: String,
    /// `hcp:<id>`, `note:<id>` or an unambiguous bare id.
    #[arg(long)]
    pub ego: String,
    #[arg(long, value_parser = parse_direction_arg)]
    pub direction: FlowDirection,
    /// Cutoff as RFC 3339 or epoch seconds; defaults to the last access.
    #[arg(long)]
    pub until: Option<String>,
    #[arg(long, value_enum)]
    pub order: Option<OrderArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub max_paths: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Strict,
    NonDecreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Maximal,
    AllSimple,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DataArg,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

fn parse_measure_arg(s: &str) -> Result<MeasureId, String> {
    s.parse().map_err(|e: commflow_core::Error| e.to_string())
}

fn parse_direction_arg(s: &str) -> Result<FlowDirection, String> {
    s.parse().map_err(|e: commflow_core::Error| e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, AppError> {
    let bytes = fs::read(path).map_err(|e| AppError::Internal(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Internal(format!("{}: {e}", path.display())))
}

fn open_file(path: &Path) -> Result<fs::File, AppError> {
    fs::File::open(path).map_err(|e| AppError::Internal(format!("{}: {e}", path.display())))
}

fn emit(out: &OutArg, text: &str, stdout: &mut dyn Write) -> Result<(), AppError> {
    match &out.out {
        Some(p) => fs::write(p, text).map_err(|e| AppError::Internal(format!("{}: {e}", p.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| AppError::Internal(format!("stdout: {e}"))),
    }
}

#[derive(Serialize)]
struct GenerateSummary {
    patients: usize,
    events: usize,
    baseline_sd: f64,
    planted_measure: MeasureId,
    planted_effect_size: f64,
}

#[derive(Serialize)]
struct IngestSummary {
    patients: usize,
    events: usize,
    retained_patients: usize,
    excluded_patients: Vec<String>,
    groups: Vec<views::GroupSummary>,
    content_hash: String,
}

fn generate(a: &GenerateArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let mut cfg: SyntheticConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SyntheticConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.patients {
        cfg.n_patients = n;
    }
    if let Some(e) = a.effect {
        cfg.planted_effect_size = e;
    }
    if let Some(m) = a.measure {
        cfg.planted_measure = m;
    }
    let cohort = generate_synthetic(&cfg)?;
    Workspace::write_inputs(&a.out, &cohort.patients, &cohort.events, None)?;
    let summary = GenerateSummary {
        patients: cohort.patients.len(),
        events: cohort.events.len(),
        baseline_sd: cohort.baseline_sd,
        planted_measure: cfg.planted_measure,
        planted_effect_size: cfg.planted_effect_size,
    };
    stdout
        .write_all(views::to_json(&summary).as_bytes())
        .map_err(|e| AppError::Internal(e.to_string()))
}

fn ingest(a: &IngestArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let settings: Option<Settings> = a.settings.as_deref().map(read_json).transpose()?;
    let drop = settings.as_ref().map_or_else(AdminDropList::default, |s| s.drop_actions.clone());
    let patients = parse_patients(open_file(&a.patients)?)
        .map_err(|e| AppError::Unprocessable(format!("{}: {e}", a.patients.display())))?;
    let events = parse_access_log_with(open_file(&a.events)?, &drop)
        .map_err(|e| AppError::Unprocessable(format!("{}: {e}", a.events.display())))?;
    let groups: Option<Vec<GroupDef>> = a.groups.as_deref().map(read_json).transpose()?;
    let root = &a.data.data;
    Workspace::write_inputs(root, &patients, &events, groups.as_deref())?;
    if let Some(s) = &settings {
        let path = root.join(SETTINGS_FILE);
        fs::write(&path, views::to_json(s)).map_err(|e| AppError::Internal(format!("{}: {e}", path.display())))?;
    }
    let ws = Workspace::open(root)?;
    let summary = IngestSummary {
        patients: patients.len(),
        events: events.len(),
        retained_patients: patients.len() - ws.excluded_patients().len(),
        excluded_patients: ws.excluded_patients().to_vec(),
        groups: views::groups(&ws),
        content_hash: ws.content_hash().to_string(),
    };
    stdout
        .write_all(views::to_json(&summary).as_bytes())
        .map_err(|e| AppError::Internal(e.to_string()))
}

fn measures(a: &MeasuresArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let ws = Workspace::open(&a.data.data)?;
    let rows = views::measure_table(&ws, &a.group)?;
    let text = match a.format {
        TableFormat::Json => views::to_json(&rows),
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["patient_id".to_string(), "outcome".to_string()];
            header.extend(MeasureId::ALL.iter().map(|m| m.to_string()));
            let io = |e: csv::Error| AppError::Internal(e.to_string());
            w.write_record(&header).map_err(io)?;
            for r in &rows {
                let mut rec = vec![r.patient_id.clone(), r.outcome.as_str().to_string()];
                rec.extend(r.measures.values().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
                w.write_record(&rec).map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| AppError::Internal(e.to_string()))?).expect("utf-8 csv")
        }
    };
    emit(&a.out, &text, stdout)
}

fn metric(a: &MetricArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let ws = Workspace::open(&a.data.data)?;
    let mut cfg = ws.settings().metric.clone();
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_perm {
        cfg.n_perm = n;
    }
    let model = ws.metric(&a.group, Some(&cfg))?;
    emit(&a.out, &views::to_json(&*model), stdout)
}

fn reach(a: &ReachArgs, stdout: &mut dyn Write) -> Result<(), AppError> {
    let ws = Workspace::open(&a.data.data)?;
    let q = ReachQuery {
        ego: Some(a.ego.clone()),
        direction: Some(match a.direction {
            FlowDirection::Reviewed => "reviewed".into(),
            FlowDirection::Disseminated => "disseminated".into(),
        }),
        until: a.until.clone(),
        order: a.order.map(|o| {
            match o {
                OrderArg::Strict => "strict",
                OrderArg::NonDecreasing => "non_decreasing",
            }
            .to_string()
        }),
        mode: a.mode.map(|m| {
            match m {
                ModeArg::Maximal => "maximal",
                ModeArg::AllSimple => "all_simple",
            }
            .to_string()
        }),
        max_depth: a.max_depth.map(|d| d.to_string()),
        max_paths: a.max_paths.map(|d| d.to_string()),
    };
    let view = views::reach(&ws, &a.patient, &q, None)?;
    emit(&a.out, &views::to_json(&view), stdout)
}

fn serve(a: &ServeArgs) -> Result<(), AppError> {
    let ws = Arc::new(Workspace::open(&a.data.data)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Internal(e.to_string()))?;
    rt.block_on(crate::api::serve(ws, a.addr))
        .map_err(|e| AppError::Internal(format!("cannot serve on {}: {e}", a.addr)))
}

/// Runs one command and returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a, stdout),
        Command::Ingest(a) => ingest(a, stdout),
        Command::Measures(a) => measures(a, stdout),
        Command::Metric(a) => metric(a, stdout),
        Command::Reach(a) => reach(a, stdout),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reach_options_match_core_names() {
        use commflow_core::temporal::{FlowOptions, PathMode, TemporalOrder};
        let o: FlowOptions = serde_json::from_str(r#"{"order": "non_decreasing", "mode": "all_simple"}"#).unwrap();
        assert_eq!(o.order, TemporalOrder::NonDecreasing);
        assert_eq!(o.mode, PathMode::AllSimple);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
