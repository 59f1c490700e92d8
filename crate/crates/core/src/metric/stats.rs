use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "spearman needs two equal-length samples of at least 2 (got {} and {})",
            x.len(),
            y.len()
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

const PERMUTATION_BATCH: usize = 1000;

/// Two-sided permutation p-value of Spearman's rho with `+1` smoothing.
/// Permutations run in seeded batches of 1000, one ChaCha stream per batch.
pub fn spearman_pvalue(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    if n_perm < PERMUTATION_BATCH {
        return Err(Error::InvalidInput(format!(
            "n_perm must be at least {PERMUTATION_BATCH}, got {n_perm}"
        )));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let observed = spearman(x, y)?.abs();
    let tol = 1e-12;
    let batches = n_perm.div_ceil(PERMUTATION_BATCH);
    let hits: usize = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = PERMUTATION_BATCH.min(n_perm - b * PERMUTATION_BATCH);
            let mut perm = ry.clone();
            (0..count)
                .filter(|_| {
                    perm.shuffle(&mut rng);
                    pearson(&rx, &perm).map_or(0.0, f64::abs) >= observed - tol
                })
                .count()
        })
        .sum();
    Ok((hits + 1) as f64 / (n_perm + 1) as f64)
}

/// Metric cut-off separating predicted survivors (`score ≥ threshold`)
/// from predicted deaths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub accuracy_survived: f64,
    pub accuracy_dead: f64,
}

impl Threshold {
    pub fn product(&self) -> f64 {
        self.accuracy_survived * self.accuracy_dead
    }
}

/// Per-class accuracies of the cut at `t`.
pub fn accuracies_at(scores: &[f64], alive: &[bool], t: f64) -> (f64, f64) {
    let (mut sa, mut na, mut sd, mut nd) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &a) in scores.iter().zip(alive) {
        if a {
            na += 1;
            sa += usize::from(s >= t);
        } else {
            nd += 1;
            sd += usize::from(s < t);
        }
    }
    let frac = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    (frac(sa, na), frac(sd, nd))
}

/// Midpoints between consecutive distinct scores, bracketed by `−∞` and
/// `+∞`.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut c = vec![f64::NEG_INFINITY];
    c.extend(s.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    c.push(f64::INFINITY);
    c
}

/// Cut maximizing the product of per-class accuracies; ties go to the cut
/// farthest from its nearest score, then to the lower cut.
pub fn find_threshold(scores: &[f64], alive: &[bool]) -> Result<Threshold> {
    if scores.len() != alive.len() {
        return Err(Error::InvalidInput("scores and outcomes differ in length".into()));
    }
    if !alive.iter().any(|&a| a) || alive.iter().all(|&a| a) {
        return Err(Error::SingleClass);
    }
    let margin = |t: f64| scores.iter().map(|s| (s - t).abs()).fold(f64::INFINITY, f64::min);
    let mut best: Option<(Threshold, f64)> = None;
    for t in threshold_candidates(scores) {
        let (a, d) = accuracies_at(scores, alive, t);
        let cand = Threshold {
            threshold: t,
            accuracy_survived: a,
            accuracy_dead: d,
        };
        let m = margin(t);
        let better = match &best {
            None => true,
            Some((b, bm)) => cand.product() > b.product() || (cand.product() == b.product() && m > *bm),
        };
        if better {
            best = Some((cand, m));
        }
    }
    Ok(best.expect("at least two candidates").0)
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Serializes `±∞` as the strings `"Infinity"` and `"-Infinity"`.
pub mod extended_real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("Infinity")
        } else {
            s.serialize_str("-Infinity")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Num(f64),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Num(v) => Ok(v),
            Wire::Text(t) if t == "Infinity" => Ok(f64::INFINITY),
            Wire::Text(t) if t == "-Infinity" => Ok(f64::NEG_INFINITY),
            Wire::Text(t) => Err(D::Error::custom(format!("not a number: {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap(), -1.0);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pvalue_examples() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let p = spearman_pvalue(&x, &x, 10_000, 1).unwrap();
        assert!(p <= 0.001, "{p}");
        assert_eq!(spearman_pvalue(&[1.0, 2.0], &[3.0, 4.0], 1000, 1).unwrap(), 1.0);
        let noise = [0.3, 0.9, 0.1, 0.5, 0.7, 0.2, 0.8, 0.4, 0.6, 0.0];
        let p1 = spearman_pvalue(&x, &noise, 2000, 9).unwrap();
        assert!(p1 > 0.05, "{p1}");
        assert_eq!(p1, spearman_pvalue(&x, &noise, 2000, 9).unwrap());
        assert!(spearman_pvalue(&x, &x, 999, 1).is_err());
    }

    #[test]
    fn threshold_examples() {
        let t = find_threshold(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
        assert!((t.threshold - 0.5).abs() < 1e-12);
        assert_eq!((t.accuracy_survived, t.accuracy_dead), (1.0, 1.0));
        let t = find_threshold(&[1.0, 1.0, 1.0], &[true, false, true]).unwrap();
        assert!(t.threshold.is_infinite());
        assert_eq!(t.product(), 0.0);
    }

    #[test]
    fn infinite_threshold_round_trips() {
        let t = Threshold {
            threshold: f64::NEG_INFINITY,
            accuracy_survived: 1.0,
            accuracy_dead: 0.0,
        };
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"-Infinity\""));
        assert_eq!(serde_json::from_str::<Threshold>(&s).unwrap(), t);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.75);
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
    }

    proptest! {
        #[test]
        fn spearman_ignores_monotone_transforms(v in prop::collection::vec((-50i32..50, -50i32..50), 3..20)) {
            let x: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            if let Ok(r) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|a| (a / 10.0).exp()).collect();
                let ty: Vec<f64> = y.iter().map(|b| b.powi(3) - 7.0).collect();
                prop_assert!((spearman(&tx, &ty).unwrap() - r).abs() < 1e-9);
            }
        }
    }
}
