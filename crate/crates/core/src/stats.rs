//! Pearson correlation, trend classification over effect levels, and correlation summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too few points: {0}")]
    TooShort(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("non-finite input")]
    NonFinite,
    #[error("tolerance must be finite and >= 0, got {0}")]
    Tolerance(f64),
}

pub type Result<T> = std::result::Result<T, StatsError>;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Sample Pearson product-moment correlation, computed about the means.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooShort(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendClass {
    MonotonicUp,
    MonotonicDown,
    Peaked,
    Dipped,
    Flat,
}

impl TrendClass {
    pub const ALL: [TrendClass; 5] = [
        TrendClass::MonotonicUp,
        TrendClass::MonotonicDown,
        TrendClass::Peaked,
        TrendClass::Dipped,
        TrendClass::Flat,
    ];

    /// Table cell: only monotone trends get an arrow.
    pub fn symbol(self) -> &'static str {
        match self {
            TrendClass::MonotonicUp => "↑",
            TrendClass::MonotonicDown => "↓",
            _ => "-",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrendClass::MonotonicUp => "monotonic_up",
            TrendClass::MonotonicDown => "monotonic_down",
            TrendClass::Peaked => "peaked",
            TrendClass::Dipped => "dipped",
            TrendClass::Flat => "flat",
        }
    }

    pub fn flipped(self) -> TrendClass {
        match self {
            TrendClass::MonotonicUp => TrendClass::MonotonicDown,
            TrendClass::MonotonicDown => TrendClass::MonotonicUp,
            TrendClass::Peaked => TrendClass::Dipped,
            TrendClass::Dipped => TrendClass::Peaked,
            TrendClass::Flat => TrendClass::Flat,
        }
    }
}

pub const TREND_LEGEND: &str = "↑ = Monotonic up, ↓ = Monotonic down, - = flat or inconsistent";

/// Classifies (low, mid, high) deltas. Monotone classes win over peaked/dipped.
pub fn classify_trend(deltas: [f64; 3], tolerance: f64) -> Result<TrendClass> {
    classify_sequence(&deltas, tolerance)
}

/// Trend over deltas ordered by ascending level. Every step must stay within `tolerance`
/// of non-decreasing (non-increasing) and the net change must exceed it for a monotone
/// class. Otherwise an interior extreme beyond both endpoints gives peaked/dipped; a
/// sequence with both is inconsistent and reported flat.
pub fn classify_sequence(deltas: &[f64], tolerance: f64) -> Result<TrendClass> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(StatsError::Tolerance(tolerance));
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if deltas.len() < 2 {
        return Err(StatsError::TooShort(deltas.len()));
    }
    let e = tolerance;
    let (first, last) = (deltas[0], deltas[deltas.len() - 1]);
    let rising = deltas.windows(2).all(|w| w[1] >= w[0] - e);
    let falling = deltas.windows(2).all(|w| w[1] <= w[0] + e);
    if rising && last - first > e {
        return Ok(TrendClass::MonotonicUp);
    }
    if falling && first - last > e {
        return Ok(TrendClass::MonotonicDown);
    }
    let interior = &deltas[1..deltas.len() - 1];
    let peaked = interior.iter().any(|&m| m > first.max(last) + e);
    let dipped = interior.iter().any(|&m| m < first.min(last) - e);
    Ok(match (peaked, dipped) {
        (true, false) => TrendClass::Peaked,
        (false, true) => TrendClass::Dipped,
        _ => TrendClass::Flat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub positive_count: usize,
    pub negative_count: usize,
    pub defined_count: usize,
    pub undefined_count: usize,
    /// Mean of the defined correlations; `None` when there are none.
    pub mean_r: Option<f64>,
}

/// Counts signs and averages the defined correlations; `None` entries are tallied separately.
pub fn summarize_correlations<L>(rs: &[(L, Option<f64>)]) -> CorrelationSummary {
    let defined: Vec<f64> = rs.iter().filter_map(|(_, r)| *r).collect();
    CorrelationSummary {
        positive_count: defined.iter().filter(|&&r| r > 0.0).count(),
        negative_count: defined.iter().filter(|&&r| r < 0.0).count(),
        defined_count: defined.len(),
        undefined_count: rs.len() - defined.len(),
        mean_r: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // cov 4.0 over sqrt(5 * 5)
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(StatsError::LengthMismatch(2, 3)));
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooShort(2)));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson(&[1.0, f64::NAN, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn trend_examples() {
        let e = DEFAULT_TOLERANCE;
        assert_eq!(classify_trend([0.01, 0.02, 0.03], e).unwrap(), TrendClass::MonotonicUp);
        assert_eq!(classify_trend([0.03, 0.02, 0.01], e).unwrap(), TrendClass::MonotonicDown);
        let peaked = classify_trend([0.01, 0.05, 0.02], e).unwrap();
        assert_eq!(peaked, TrendClass::Peaked);
        assert_eq!(peaked.symbol(), "-");
        assert_eq!(classify_trend([0.0, 0.0, 0.0], e).unwrap(), TrendClass::Flat);
        assert_eq!(classify_trend([0.05, 0.01, 0.04], e).unwrap(), TrendClass::Dipped);
        // within tolerance everywhere: flat
        assert_eq!(classify_trend([0.0, 0.00005, 0.00009], e).unwrap(), TrendClass::Flat);
        assert!(classify_trend([0.0, f64::INFINITY, 0.0], e).is_err());
        assert!(classify_trend([0.0, 0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn sequences_of_other_lengths() {
        let e = DEFAULT_TOLERANCE;
        assert_eq!(classify_sequence(&[0.0, 0.1], e).unwrap(), TrendClass::MonotonicUp);
        assert_eq!(classify_sequence(&[0.0, 0.1, 0.2, 0.3, 0.4], e).unwrap(), TrendClass::MonotonicUp);
        assert_eq!(classify_sequence(&[0.0, 0.3, 0.1, 0.0], e).unwrap(), TrendClass::Peaked);
        assert_eq!(classify_sequence(&[0.0, 0.3, -0.3, 0.0], e).unwrap(), TrendClass::Flat);
        assert!(classify_sequence(&[0.0], e).is_err());
    }

    #[test]
    fn tolerance_slack_prefers_monotone() {
        // mid exceeds high by less than tolerance: still monotonic up
        assert_eq!(classify_trend([0.0, 0.10005, 0.1], 1e-4).unwrap(), TrendClass::MonotonicUp);
    }

    #[test]
    fn summary_examples() {
        let s = summarize_correlations(&[("a", Some(0.5)), ("b", Some(-0.5))]);
        assert_eq!((s.positive_count, s.negative_count, s.mean_r), (1, 1, Some(0.0)));
        let ones: Vec<_> = (0..5).map(|i| (i, Some(1.0))).collect();
        let s = summarize_correlations(&ones);
        assert_eq!((s.positive_count, s.mean_r), (5, Some(1.0)));
        let s = summarize_correlations(&[("a", None), ("b", Some(0.2))]);
        assert_eq!((s.undefined_count, s.defined_count, s.mean_r), (1, 1, Some(0.2)));
        let s = summarize_correlations(&[("a", None::<f64>)]);
        assert_eq!(s.mean_r, None);
    }

    #[test]
    fn sixteen_with_twelve_positive() {
        let rs: Vec<_> = (0..16)
            .map(|i| (format!("d{i}"), Some(if i < 12 { 0.1 + i as f64 * 0.01 } else { -0.2 })))
            .collect();
        let s = summarize_correlations(&rs);
        assert_eq!(s.positive_count, 12);
        assert_eq!(s.defined_count, 16);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            (x, y) in (3usize..40).prop_flat_map(|n| (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )),
            a in 0.01f64..50.0,
            b in -100.0f64..100.0,
        ) {
            let r = match pearson(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let xn: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
            prop_assert!((pearson(&xt, &y).unwrap() - r).abs() < 1e-9);
            prop_assert!((pearson(&xn, &y).unwrap() + r).abs() < 1e-9);
            prop_assert!((pearson(&y, &xt).unwrap() - r).abs() < 1e-9);
        }

        #[test]
        fn trend_symmetry(d in prop::array::uniform3(-1.0f64..1.0), e in 0.0f64..0.05) {
            let up = classify_trend(d, e).unwrap();
            let down = classify_trend(d.map(|v| -v), e).unwrap();
            prop_assert_eq!(down, up.flipped());
        }
    }
}
