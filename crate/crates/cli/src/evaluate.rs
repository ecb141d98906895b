//! Scoring a cone map against simulator truth.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use conetrack_core::vision::ConeColor;

use crate::formats::{MapDocument, TruthDocument};

/// Greedy one-to-one nearest-neighbour matching within `gate`.
///
/// Pairs are taken in order of distance. Exact ties are broken by the
/// coordinates themselves, so the result does not depend on input order.
/// Returns `(index in a, index in b, distance)`.
pub fn match_points(a: &[[f64; 2]], b: &[[f64; 2]], gate: f64) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            if d <= gate {
                pairs.push((i, j, d));
            }
        }
    }
    let lex = |x: &[f64; 2], y: &[f64; 2]| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1]));
    pairs.sort_by(|x, y| {
        x.2.total_cmp(&y.2)
            .then_with(|| lex(&a[x.0], &a[y.0]))
            .then_with(|| lex(&b[x.1], &b[y.1]))
            .then(Ordering::Equal)
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (i, j, d) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub landmarks: usize,
    /// Truth cones seen during the run.
    pub observed: usize,
    pub matched: usize,
    /// Matched landmarks over all landmarks; 1 for an empty map.
    pub precision: f64,
    /// Matched observed cones over observed cones.
    pub recall: f64,
    /// Root mean square landmark error over matched pairs (m).
    pub rmse: f64,
    pub color_accuracy: f64,
    /// Counts by truth colour, then mapped colour.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Matches landmarks to all truth cones. Recall only counts cones the
/// vehicle could have seen.
pub fn evaluate_map(map: &MapDocument, truth: &TruthDocument, gate: f64) -> MapMetrics {
    let mapped: Vec<[f64; 2]> = map.landmarks.iter().map(|l| l.position).collect();
    let cones: Vec<[f64; 2]> = truth.landmarks.iter().map(|c| c.position).collect();
    let pairs = match_points(&mapped, &cones, gate);

    let observed_ids: std::collections::BTreeSet<usize> = truth.observed.iter().copied().collect();
    let matched_observed = pairs.iter().filter(|(_, j, _)| observed_ids.contains(&truth.landmarks[*j].id)).count();
    let sq: f64 = pairs.iter().map(|(_, _, d)| d * d).sum();
    let rmse = if pairs.is_empty() { 0.0 } else { (sq / pairs.len() as f64).sqrt() };

    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut correct = 0;
    for &(i, j, _) in &pairs {
        let (t, m) = (truth.landmarks[j].color, map.landmarks[i].color);
        correct += (t == m) as usize;
        *confusion.entry(t.as_str().to_owned()).or_default().entry(m.as_str().to_owned()).or_default() += 1;
    }
    MapMetrics {
        landmarks: map.landmarks.len(),
        observed: observed_ids.len(),
        matched: pairs.len(),
        precision: ratio(pairs.len(), mapped.len()),
        recall: ratio(matched_observed, observed_ids.len()),
        rmse,
        color_accuracy: ratio(correct, pairs.len()),
        confusion,
    }
}

/// Colour agreement over matched pairs.
pub fn color_hits(pairs: &[(usize, usize, f64)], a: &[ConeColor], b: &[ConeColor]) -> usize {
    pairs.iter().filter(|(i, j, _)| a[*i] == b[*j]).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use conetrack_core::mapping::Landmark;
    use conetrack_sim::TruthCone;

    fn truth(n: usize) -> TruthDocument {
        let landmarks = (0..n)
            .map(|id| TruthCone {
                id,
                position: [5.0 * id as f64, if id % 2 == 0 { 2.0 } else { -2.0 }],
                color: if id % 2 == 0 { ConeColor::Red } else { ConeColor::Blue },
            })
            .collect();
        TruthDocument {
            config_hash: String::new(),
            landmarks,
            objects: vec![],
            trajectory: vec![],
            scans: vec![],
            observed: (0..n).collect(),
        }
    }

    fn map_of(t: &TruthDocument, offset: f64) -> MapDocument {
        let landmarks = t
            .landmarks
            .iter()
            .map(|c| Landmark { position: [c.position[0] + offset, c.position[1]], color: c.color, count: 3, votes: [0; 4] })
            .collect();
        MapDocument { config_hash: String::new(), landmarks, trajectory: vec![] }
    }

    #[test]
    fn identical_map_scores_perfectly() {
        let t = truth(20);
        let m = evaluate_map(&map_of(&t, 0.0), &t, 1.0);
        assert_eq!((m.precision, m.recall, m.rmse, m.color_accuracy), (1.0, 1.0, 0.0, 1.0));
        assert_eq!(m.confusion["red"]["red"], 10);
    }

    #[test]
    fn one_missing_cone_of_twenty() {
        let t = truth(20);
        let mut map = map_of(&t, 0.0);
        map.landmarks.remove(7);
        let m = evaluate_map(&map, &t, 1.0);
        assert_eq!(m.recall, 0.95);
        assert_eq!(m.precision, 1.0);
    }

    #[test]
    fn rmse_of_uniform_offset() {
        let t = truth(6);
        let m = evaluate_map(&map_of(&t, 0.3), &t, 1.0);
        assert!((m.rmse - 0.3).abs() < 1e-12);
        // beyond the gate nothing matches
        let far = evaluate_map(&map_of(&t, 1.5), &t, 1.0);
        assert_eq!((far.matched, far.precision, far.recall), (0, 0.0, 0.0));
    }

    #[test]
    fn permuted_landmarks_give_identical_report() {
        let t = truth(12);
        let mut map = map_of(&t, 0.2);
        // a duplicate competes for the same cone
        map.landmarks.push(Landmark { position: [0.4, 2.0], color: ConeColor::Blue, count: 1, votes: [0; 4] });
        let base = evaluate_map(&map, &t, 1.0);
        for shift in 1..map.landmarks.len() {
            let mut m = map.clone();
            m.landmarks.rotate_left(shift);
            m.landmarks.reverse();
            assert_eq!(evaluate_map(&m, &t, 1.0), base);
        }
    }

    #[test]
    fn unobserved_cones_do_not_count_against_recall() {
        let mut t = truth(10);
        t.observed = vec![0, 1, 2, 3];
        let mut map = map_of(&t, 0.0);
        map.landmarks.truncate(4);
        let m = evaluate_map(&map, &t, 1.0);
        assert_eq!((m.recall, m.precision, m.observed), (1.0, 1.0, 4));
    }

    #[test]
    fn greedy_matching_prefers_the_closer_pair() {
        let a = [[0.0, 0.0], [0.9, 0.0]];
        let b = [[1.0, 0.0]];
        let m: Vec<(usize, usize)> = match_points(&a, &b, 2.0).iter().map(|p| (p.0, p.1)).collect();
        assert_eq!(m, vec![(1, 0)]);
    }
}
