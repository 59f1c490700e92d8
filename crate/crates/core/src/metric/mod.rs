//! Outcome-associated effectiveness metric for a patient group: a neural
//! classifier of survival, a linear proxy of its survival probability over
//! the standardized measures, a separating threshold and rank statistics.

mod mlp;
mod proxy;
mod standardize;
mod stats;

use serde::{Deserialize, Serialize};

use crate::cohort::Outcome;
use crate::error::{Error, Result};
use crate::measures::{MeasureId, NetworkMeasureVector};

pub use mlp::{train_classifier, Mlp, MlpConfig};
pub use proxy::{fit_linear_proxy, ProxyFit, ProxyMode};
pub use standardize::{standardize, StandardizedMatrix, Standardizer};
pub use stats::{
    accuracies_at, average_ranks, find_threshold, pearson, quantile_sorted, spearman, spearman_pvalue,
    threshold_candidates, Threshold,
};
pub use stats::extended_real;

/// Classes smaller than this trigger a small-sample warning.
pub const SMALL_CLASS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub seed: u64,
    /// Search space, in scoring order.
    pub measures: Vec<MeasureId>,
    pub standardize: bool,
    pub mlp: MlpConfig,
    pub proxy_mode: ProxyMode,
    pub n_perm: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            measures: MeasureId::ALL.to_vec(),
            standardize: true,
            mlp: MlpConfig::default(),
            proxy_mode: ProxyMode::Ols,
            n_perm: 10_000,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::InvalidInput("measures must not be empty".into()));
        }
        let mut seen = self.measures.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.measures.len() {
            return Err(Error::InvalidInput("measures contain duplicates".into()));
        }
        if self.mlp.hidden.contains(&0) || self.mlp.epochs == 0 || !self.mlp.learning_rate.is_finite() || self.mlp.learning_rate <= 0.0 {
            return Err(Error::InvalidInput("mlp needs positive widths, epochs and learning rate".into()));
        }
        if self.n_perm < 1000 {
            return Err(Error::InvalidInput(format!("n_perm must be at least 1000, got {}", self.n_perm)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientScore {
    pub patient_id: String,
    pub outcome: Outcome,
    pub score: f64,
    pub p_survive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricModel {
    /// Proxy weight per measure on z-scored values, in search-space order.
    #[serde(with = "ordered_weights")]
    pub weights: Vec<(MeasureId, f64)>,
    /// Measures by decreasing `|weight|`.
    pub rank: Vec<MeasureId>,
    #[serde(with = "stats::extended_real")]
    pub threshold: f64,
    /// Spearman correlation between metric scores and the classifier's
    /// survival probabilities.
    pub spearman_rho: f64,
    pub p_value: f64,
    /// Spearman correlation between metric scores and the survival
    /// indicator (Alive = 1).
    pub outcome_rho: f64,
    pub outcome_p_value: f64,
    pub accuracy_survived: f64,
    pub accuracy_dead: f64,
    pub intercept: f64,
    pub rank_deficient: bool,
    pub standardization: Standardizer,
    pub patients: Vec<PatientScore>,
    pub warnings: Vec<String>,
    pub config: MetricConfig,
}

impl MetricModel {
    pub fn weight(&self, m: MeasureId) -> Option<f64> {
        self.weights.iter().find(|(k, _)| *k == m).map(|(_, w)| *w)
    }

    pub fn position(&self, m: MeasureId) -> Option<usize> {
        self.rank.iter().position(|&k| k == m)
    }

    pub fn accuracy_product(&self) -> f64 {
        self.accuracy_survived * self.accuracy_dead
    }
}

fn select(v: &NetworkMeasureVector, measures: &[MeasureId]) -> Result<Vec<f64>> {
    measures
        .iter()
        .map(|&m| {
            let x = v.get(m);
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::MissingMeasure(format!("{m} for patient {}", v.patient_id)))
            }
        })
        .collect()
}

/// Measures ordered by decreasing `|weight|`, ties kept in input order.
pub fn rank_by_weight(weights: &[(MeasureId, f64)]) -> Vec<MeasureId> {
    let mut order: Vec<&(MeasureId, f64)> = weights.iter().collect();
    order.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    order.into_iter().map(|(m, _)| *m).collect()
}

fn rho_and_p(x: &[f64], y: &[f64], cfg: &MetricConfig, what: &str, warnings: &mut Vec<String>) -> Result<(f64, f64)> {
    match spearman(x, y) {
        Ok(r) => Ok((r, spearman_pvalue(x, y, cfg.n_perm, cfg.seed)?)),
        Err(Error::ZeroVariance) => {
            warnings.push(format!("{what}: zero rank variance, correlation reported as 0"));
            Ok((0.0, 1.0))
        }
        Err(e) => Err(e),
    }
}

/// Learns the metric of one group: standardize, classify, fit the linear
/// proxy, score, threshold and correlate.
pub fn compose_metric(vectors: &[NetworkMeasureVector], outcomes: &[Outcome], cfg: &MetricConfig) -> Result<MetricModel> {
    cfg.validate()?;
    if vectors.len() != outcomes.len() {
        return Err(Error::InvalidInput("measure vectors and outcomes differ in length".into()));
    }
    let raw = vectors
        .iter()
        .map(|v| select(v, &cfg.measures))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = vectors.iter().map(|v| v.patient_id.clone()).collect();
    let matrix = if cfg.standardize {
        standardize(ids, &raw)?
    } else {
        if raw.len() < 2 {
            return Err(Error::InvalidInput("metric needs at least 2 patients".into()));
        }
        let d = cfg.measures.len();
        StandardizedMatrix {
            patient_ids: ids,
            rows: raw.clone(),
            transform: Standardizer {
                means: vec![0.0; d],
                stds: vec![1.0; d],
                constant: vec![false; d],
            },
        }
    };
    let labels: Vec<bool> = outcomes.iter().map(|&o| o == Outcome::Alive).collect();
    let mut warnings = Vec::new();
    let alive = labels.iter().filter(|&&a| a).count();
    let dead = labels.len() - alive;
    if alive < SMALL_CLASS || dead < SMALL_CLASS {
        warnings.push(format!(
            "small sample: {alive} alive and {dead} dead patients (fewer than {SMALL_CLASS} in a class)"
        ));
    }
    for (m, &c) in cfg.measures.iter().zip(&matrix.transform.constant) {
        if c {
            warnings.push(format!("{m} is constant across the group and contributes nothing"));
        }
    }

    let classifier = train_classifier(&matrix.rows, &labels, &cfg.mlp, cfg.seed)?;
    let probs = classifier.predict(&matrix.rows);
    let fit = fit_linear_proxy(&matrix.rows, &probs, cfg.proxy_mode)?;
    if fit.rank_deficient {
        warnings.push(format!(
            "design matrix has rank {} of {}; minimum-norm weights reported",
            fit.rank,
            cfg.measures.len() + 1
        ));
    }
    let scores: Vec<f64> = matrix
        .rows
        .iter()
        .map(|z| z.iter().zip(&fit.weights).map(|(a, b)| a * b).sum())
        .collect();
    let cut = find_threshold(&scores, &labels)?;
    let (spearman_rho, p_value) = rho_and_p(&scores, &probs, cfg, "scores vs survival probability", &mut warnings)?;
    let indicator: Vec<f64> = outcomes.iter().map(|o| o.indicator()).collect();
    let (outcome_rho, outcome_p_value) = rho_and_p(&scores, &indicator, cfg, "scores vs outcome", &mut warnings)?;

    let weights: Vec<(MeasureId, f64)> = cfg.measures.iter().copied().zip(fit.weights.iter().copied()).collect();
    let patients = matrix
        .patient_ids
        .iter()
        .zip(outcomes)
        .zip(scores.iter().zip(&probs))
        .map(|((id, &outcome), (&score, &p))| PatientScore {
            patient_id: id.clone(),
            outcome,
            score,
            p_survive: p,
        })
        .collect();
    Ok(MetricModel {
        rank: rank_by_weight(&weights),
        weights,
        threshold: cut.threshold,
        spearman_rho,
        p_value,
        outcome_rho,
        outcome_p_value,
        accuracy_survived: cut.accuracy_survived,
        accuracy_dead: cut.accuracy_dead,
        intercept: fit.intercept,
        rank_deficient: fit.rank_deficient,
        standardization: matrix.transform,
        patients,
        warnings,
        config: cfg.clone(),
    })
}

/// Metric score of one patient under a fitted model.
pub fn score_patient(vector: &NetworkMeasureVector, model: &MetricModel) -> Result<f64> {
    let raw = select(vector, &model.config.measures)?;
    let z = model.standardization.apply(&raw);
    Ok(z.iter().zip(&model.weights).map(|(a, (_, w))| a * w).sum())
}

mod ordered_weights {
    use std::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    use crate::measures::MeasureId;

    pub fn serialize<S: Serializer>(w: &[(MeasureId, f64)], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(w.len()))?;
        for (m, x) in w {
            map.serialize_entry(m.as_str(), x)?;
        }
        map.end()
    }

    struct Ordered;

    impl<'de> Visitor<'de> for Ordered {
        type Value = Vec<(MeasureId, f64)>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from measure name to weight")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((k, v)) = access.next_entry::<MeasureId, f64>()? {
                out.push((k, v));
            }
            Ok(out)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(MeasureId, f64)>, D::Error> {
        d.deserialize_map(Ordered)
    }
}
