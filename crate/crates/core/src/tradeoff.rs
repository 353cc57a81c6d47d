//! Two-objective OWA scoring of methods over (efficiency, faithfulness).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clique::CliqueMethod;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TradeoffError {
    #[error("OWA weight must be in [0, 1], got {0}")]
    WeightOutOfRange(f64),
    #[error("invalid weight sweep {0:?}; expected start:end:step")]
    BadSweep(String),
    #[error("no objective points to select from")]
    NoPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub method: CliqueMethod,
    pub efficiency_raw: f64,
    pub faithfulness_raw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub faithfulness_norm: Option<f64>,
}

impl ObjectivePoint {
    pub fn new(method: CliqueMethod, efficiency_raw: f64, faithfulness_raw: f64) -> Self {
        Self { method, efficiency_raw, faithfulness_raw, efficiency_norm: None, faithfulness_norm: None }
    }
}

/// Weight on the larger of the two sorted values; `1 - w` goes to the smaller.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct OwaWeights {
    w: f64,
}

impl OwaWeights {
    pub fn new(w: f64) -> Result<Self, TradeoffError> {
        if (0.0..=1.0).contains(&w) {
            Ok(Self { w })
        } else {
            Err(TradeoffError::WeightOutOfRange(w))
        }
    }

    pub fn w(self) -> f64 {
        self.w
    }
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    move |x| if hi > lo { (x - lo) / (hi - lo) } else { 1.0 }
}

/// Min-max normalizes each objective across points; an objective on which
/// every point ties normalizes to 1.0.
pub fn normalize_objectives(points: &[ObjectivePoint]) -> Vec<ObjectivePoint> {
    let eff = min_max(points.iter().map(|p| p.efficiency_raw));
    let faith = min_max(points.iter().map(|p| p.faithfulness_raw));
    points
        .iter()
        .map(|p| ObjectivePoint {
            efficiency_norm: Some(eff(p.efficiency_raw)),
            faithfulness_norm: Some(faith(p.faithfulness_raw)),
            ..p.clone()
        })
        .collect()
}

pub fn owa_score(x: f64, y: f64, weights: OwaWeights) -> f64 {
    let (s1, s2) = if x >= y { (x, y) } else { (y, x) };
    weights.w * s1 + (1.0 - weights.w) * s2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub weight: f64,
    pub method: CliqueMethod,
    pub scores: BTreeMap<CliqueMethod, f64>,
}

/// Scores closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Highest OWA score wins; ties go to the lexicographically smallest tag.
/// Points lacking normalized values are normalized among themselves first.
pub fn select_method(points: &[ObjectivePoint], weights: OwaWeights) -> Result<Selection, TradeoffError> {
    if points.is_empty() {
        return Err(TradeoffError::NoPoints);
    }
    let normalized;
    let points = if points.iter().all(|p| p.efficiency_norm.is_some() && p.faithfulness_norm.is_some()) {
        points
    } else {
        normalized = normalize_objectives(points);
        &normalized
    };
    let mut scores = BTreeMap::new();
    for p in points {
        let s = owa_score(p.efficiency_norm.expect("normalized"), p.faithfulness_norm.expect("normalized"), weights);
        scores.insert(p.method, s);
    }
    let mut best: Option<(CliqueMethod, f64)> = None;
    for (&m, &s) in &scores {
        if best.map_or(true, |(_, bs)| s > bs + TIE_TOLERANCE) {
            best = Some((m, s));
        }
    }
    Ok(Selection { weight: weights.w, method: best.expect("non-empty").0, scores })
}

/// Parses `start:end:step` into the inclusive grid of weights, e.g.
/// `0.0:1.0:0.1` gives 11 weights.
pub fn parse_weight_sweep(input: &str) -> Result<Vec<f64>, TradeoffError> {
    let bad = || TradeoffError::BadSweep(input.to_string());
    let parts: Vec<f64> =
        input.split(':').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let (start, end, step) = match parts.as_slice() {
        [w] => (*w, *w, 1.0),
        [a, b, s] => (*a, *b, *s),
        _ => return Err(bad()),
    };
    if !(step > 0.0) || end < start || !start.is_finite() || !end.is_finite() {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    let weights: Vec<f64> = (0..=n).map(|i| round_weight(start + i as f64 * step)).collect();
    for &w in &weights {
        OwaWeights::new(w)?;
    }
    Ok(weights)
}

/// Rounds grid points to 12 decimals so `0.1 * 3` reports as 0.3.
fn round_weight(w: f64) -> f64 {
    (w * 1e12).round() / 1e12
}

pub fn weight_sweep(points: &[ObjectivePoint], weights: &[f64]) -> Result<Vec<Selection>, TradeoffError> {
    let normalized = normalize_objectives(points);
    weights.iter().map(|&w| select_method(&normalized, OwaWeights::new(w)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use CliqueMethod::*;

    fn w(x: f64) -> OwaWeights {
        OwaWeights::new(x).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let pts = vec![ObjectivePoint::new(Random, 2.0, 5.0), ObjectivePoint::new(Concept, 4.0, 5.0)];
        let n = normalize_objectives(&pts);
        assert_eq!(n[0].efficiency_norm, Some(0.0));
        assert_eq!(n[1].efficiency_norm, Some(1.0));
        assert_eq!(n[0].faithfulness_norm, Some(1.0));
        assert_eq!(n[1].faithfulness_norm, Some(1.0));
    }

    #[test]
    fn owa_examples() {
        assert_eq!(owa_score(0.5, 0.5, w(0.3)), 0.5);
        assert!((owa_score(1.0, 0.0, w(0.7)) - 0.7).abs() < 1e-12);
        assert_eq!(owa_score(0.2, 0.9, w(0.4)), owa_score(0.9, 0.2, w(0.4)));
        assert!(OwaWeights::new(1.1).is_err());
        assert!(OwaWeights::new(-0.1).is_err());
    }

    #[test]
    fn dominance_and_ties() {
        let pts = vec![
            ObjectivePoint::new(Separate, 2.0, 2.0),
            ObjectivePoint::new(Random, 5.0, 3.0),
            ObjectivePoint::new(AverageLength, 3.0, 2.5),
        ];
        for s in weight_sweep(&pts, &parse_weight_sweep("0.0:1.0:0.1").unwrap()).unwrap() {
            assert_eq!(s.method, Random);
        }
        let swapped = vec![ObjectivePoint::new(Random, 1.0, 0.0), ObjectivePoint::new(Concept, 0.0, 1.0)];
        for x in [0.0, 0.3, 1.0] {
            let s = select_method(&swapped, w(x)).unwrap();
            assert_eq!(s.scores[&Random], s.scores[&Concept]);
            assert_eq!(s.method, Concept);
        }
    }

    #[test]
    fn sweep_parsing() {
        let ws = parse_weight_sweep("0.0:1.0:0.1").unwrap();
        assert_eq!(ws.len(), 11);
        assert_eq!(ws[3], 0.3);
        assert_eq!(ws[10], 1.0);
        assert_eq!(parse_weight_sweep("0.5").unwrap(), vec![0.5]);
        assert!(parse_weight_sweep("0:1").is_err());
        assert!(parse_weight_sweep("0:2:0.5").is_err());
        assert!(parse_weight_sweep("0:1:0").is_err());
        assert!(parse_weight_sweep("a:b:c").is_err());
    }

    #[test]
    fn empty_selection() {
        assert_eq!(select_method(&[], w(0.5)), Err(TradeoffError::NoPoints));
    }
}
