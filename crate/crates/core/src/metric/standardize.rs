use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column z-score transform learned from a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
    /// Columns with zero variance; they map to 0.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "standardization needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("rows differ in length".into()));
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        let mut constant = vec![false; d];
        for j in 0..d {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            stds[j] = var.sqrt();
            constant[j] = rows.iter().all(|r| r[j] == rows[0][j]) || stds[j] <= f64::EPSILON * mean.abs();
        }
        Ok(Self { means, stds, constant })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.constant[j] {
                    0.0
                } else {
                    (x - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }

    /// Maps a z-scored row back to raw values; constant columns return the
    /// column mean.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    self.means[j]
                } else {
                    v * self.stds[j] + self.means[j]
                }
            })
            .collect()
    }
}

/// Z-scored group matrix with its transform.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    pub patient_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub transform: Standardizer,
}

pub fn standardize(patient_ids: Vec<String>, raw: &[Vec<f64>]) -> Result<StandardizedMatrix> {
    if patient_ids.len() != raw.len() {
        return Err(Error::InvalidInput("patient ids and rows differ in length".into()));
    }
    let transform = Standardizer::fit(raw)?;
    let rows = raw.iter().map(|r| transform.apply(r)).collect();
    Ok(StandardizedMatrix {
        patient_ids,
        rows,
        transform,
    })
}
