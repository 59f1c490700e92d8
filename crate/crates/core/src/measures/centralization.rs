use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{CommNetwork, GraphIndex};

use super::node::{betweenness_raw, closeness_values};
use super::{BetweennessNorm, Direction, MeasureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityBase {
    Degree,
    Betweenness,
    Closeness,
}

/// Largest sum of degree differences from the HCP star in a two-star of
/// shape `(n1, n2)`.
pub fn degree_diff_v1(n1: usize, n2: usize) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    (n2 - 1.0).powi(2) + (n2 - 1.0) * (n1 - 1.0) + (n2 - n1)
}

/// Note-set counterpart of [`degree_diff_v1`].
pub fn degree_diff_v2(n1: usize, n2: usize) -> f64 {
    degree_diff_v1(n2, n1)
}

/// Betweenness denominators `(n1 − 1, n2 − 1)`.
pub fn betweenness_denominators(n1: usize, n2: usize) -> (f64, f64) {
    (n1 as f64 - 1.0, n2 as f64 - 1.0)
}

/// Closeness of a non-star node in a two-star, for a node in the set of
/// size `own` when the other set has size `other`.
pub fn closeness_nonstar_value(own: usize, other: usize) -> f64 {
    let (o, m) = (own as f64, other as f64);
    (2.0 * (o - 1.0) + m) / (2.0 * (o - 1.0) + 3.0 * (m - 1.0) + 1.0)
}

/// Closeness denominators `((n1 − 1)(1 − M_V1), (n2 − 1)(1 − M_V2))` with
/// `M` the non-star closeness of each set.
pub fn closeness_denominators(n1: usize, n2: usize) -> (f64, f64) {
    (
        (n1 as f64 - 1.0) * (1.0 - closeness_nonstar_value(n1, n2)),
        (n2 as f64 - 1.0) * (1.0 - closeness_nonstar_value(n2, n1)),
    )
}

fn set_term(values: &[f64], denom: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| max - v).sum::<f64>() / denom
}

/// Directed bipartite centralization: the HCP-set and note-set sums of
/// differences from each set's maximum, each over its own denominator.
/// Betweenness ignores `direction`.
pub fn centralization(
    net: &CommNetwork,
    base: CentralityBase,
    direction: Direction,
    cfg: &MeasureConfig,
) -> Result<f64> {
    let g = GraphIndex::new(net);
    let n1 = g.n_hcp;
    let n2 = g.n_note();
    if n1 < 2 || n2 < 2 {
        return Err(Error::DegenerateShape { n1, n2 });
    }
    let (values, (d1, d2)) = match base {
        CentralityBase::Degree => {
            let adj = match direction {
                Direction::In => &g.inc,
                Direction::Out => &g.out,
            };
            let vals = adj.iter().map(|a| a.len() as f64).collect::<Vec<_>>();
            (vals, (degree_diff_v1(n1, n2), degree_diff_v2(n1, n2)))
        }
        CentralityBase::Betweenness => {
            let mut vals = betweenness_raw(&g, cfg.order);
            if cfg.betweenness_norm == BetweennessNorm::BipartiteMax {
                let m1 = super::bipartite_betweenness_max(n1, n2);
                let m2 = super::bipartite_betweenness_max(n2, n1);
                for (i, v) in vals.iter_mut().enumerate() {
                    *v /= if g.is_hcp(i) { m1 } else { m2 };
                }
            }
            (vals, betweenness_denominators(n1, n2))
        }
        CentralityBase::Closeness => (closeness_values(&g, direction), closeness_denominators(n1, n2)),
    };
    let (hcp, note) = values.split_at(n1);
    Ok(set_term(hcp, d1) + set_term(note, d2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::temporal::TemporalOrder;

    const TOL: f64 = 1e-12;

    fn cent(net: &CommNetwork, base: CentralityBase, dir: Direction) -> f64 {
        centralization(net, base, dir, &MeasureConfig::default()).unwrap()
    }

    #[test]
    fn g2_examples() {
        assert_eq!(degree_diff_v1(3, 3), 8.0);
        assert!((cent(&g2(), CentralityBase::Degree, Direction::Out) - 1.0).abs() < TOL);
        assert!((cent(&g2(), CentralityBase::Closeness, Direction::Out) - 2.0).abs() < TOL);
    }

    #[test]
    fn nonstar_closeness_matches_shortest_paths() {
        assert!((closeness_nonstar_value(3, 3) - 7.0 / 11.0).abs() < TOL);
    }

    #[test]
    fn balanced_two_stars_have_unit_out_degree_centralization() {
        for n in 3..=6 {
            let c = cent(&two_star(n, n, 1), CentralityBase::Degree, Direction::Out);
            assert!((c - 1.0).abs() < TOL, "n = {n}: {c}");
        }
    }

    #[test]
    fn two_star_closeness_centralization_is_two() {
        for n1 in 2..=6 {
            for n2 in 2..=6 {
                for dir in [Direction::In, Direction::Out] {
                    let c = cent(&two_star(n1, n2, 1), CentralityBase::Closeness, dir);
                    assert!((c - 2.0).abs() < TOL, "({n1},{n2}) {dir:?}: {c}");
                }
            }
        }
    }

    #[test]
    fn uniform_networks_have_zero_centralization() {
        let k = complete(3, 3, 1);
        for base in [CentralityBase::Degree, CentralityBase::Betweenness, CentralityBase::Closeness] {
            for dir in [Direction::In, Direction::Out] {
                assert_eq!(cent(&k, base, dir), 0.0, "{base:?} {dir:?}");
            }
        }
        let cfg = MeasureConfig {
            order: TemporalOrder::NonDecreasing,
            ..Default::default()
        };
        let c = centralization(&k, CentralityBase::Betweenness, Direction::Out, &cfg).unwrap();
        assert!(c.abs() < TOL);
    }

    #[test]
    fn unbalanced_two_star_degree_term_is_verbatim() {
        // HCP term: (n1−1)(n2−1) over DD_V1; note term: (n2−1)(n1−1) over DD_V2
        let (n1, n2) = (2, 4);
        let num = ((n1 - 1) * (n2 - 1)) as f64;
        let expect = num / degree_diff_v1(n1, n2) + num / degree_diff_v2(n1, n2);
        let c = cent(&two_star(n1, n2, 1), CentralityBase::Degree, Direction::Out);
        assert!((c - expect).abs() < TOL);
        assert!((c - 1.0).abs() > 0.1);
    }

    #[test]
    fn degenerate_shapes_error() {
        let star = two_star(1, 3, 1);
        for base in [CentralityBase::Degree, CentralityBase::Betweenness, CentralityBase::Closeness] {
            assert!(matches!(
                centralization(&star, base, Direction::Out, &MeasureConfig::default()),
                Err(Error::DegenerateShape { n1: 1, n2: 3 })
            ));
        }
    }
}
