//! Brute-force margin check for labelled points in the plane.

use crate::dual::{Label, LabeledPoint};
use crate::error::{Error, Result};

pub const ORACLE_ANGLES: usize = 10_000;
pub const ORACLE_OFFSETS: usize = 2_000;
/// Relative inflation of the requested margin, absorbing grid resolution.
pub const ORACLE_MARGIN_INFLATION: f64 = 1e-6;
pub const ORACLE_MAX_POINTS: usize = 500;

/// True iff some grid halfspace `h = (cos a, sin a)`, `d` in `[-1, 1]`
/// achieves `y (<x, h> + d) >= gamma (1 + 1e-6)` on every point.
///
/// Sound up to the grid: a `true` answer exhibits a separator, a `false`
/// answer may miss separators that fall between grid points.
pub fn oracle_separable_2d(points: &[LabeledPoint], gamma: f64) -> Result<bool> {
    Ok(oracle_witness_2d(points, gamma)?.is_some())
}

/// Like [`oracle_separable_2d`], returning the separating `(angle, offset)`.
pub fn oracle_witness_2d(points: &[LabeledPoint], gamma: f64) -> Result<Option<(f64, f64)>> {
    if let Some(p) = points.iter().find(|p| p.encoding.len() != 2) {
        return Err(Error::Input(format!("oracle needs 2-dimensional points, found {}", p.encoding.len())));
    }
    if points.len() > ORACLE_MAX_POINTS {
        return Err(Error::Input(format!("oracle is limited to {ORACLE_MAX_POINTS} points")));
    }
    let g = gamma * (1.0 + ORACLE_MARGIN_INFLATION);
    let step = 2.0 / (ORACLE_OFFSETS - 1) as f64;
    for k in 0..ORACLE_ANGLES {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / ORACLE_ANGLES as f64;
        let (s, c) = angle.sin_cos();
        // positives need d >= g - p, negatives need d <= -g - p
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for p in points {
            let proj = c * p.encoding[0] + s * p.encoding[1];
            match p.label {
                Label::Positive => lo = lo.max(g - proj),
                Label::Negative => hi = hi.min(-g - proj),
            }
        }
        if lo > hi {
            continue;
        }
        let first = ((lo + 1.0) / step).ceil().max(0.0) as usize;
        for idx in first..ORACLE_OFFSETS {
            let d = -1.0 + idx as f64 * step;
            if d > hi {
                break;
            }
            if d >= lo {
                // re-check exactly at the grid point
                let ok = points.iter().all(|p| p.label.sign() * (c * p.encoding[0] + s * p.encoding[1] + d) >= g);
                if ok {
                    return Ok(Some((angle, d)));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: f64, b: f64) -> Vec<LabeledPoint> {
        vec![LabeledPoint::positive(vec![a, 0.0]), LabeledPoint::negative(vec![b, 0.0])]
    }

    #[test]
    fn examples() {
        assert!(oracle_separable_2d(&pair(0.5, -0.5), 0.2).unwrap());
        assert!(!oracle_separable_2d(&pair(0.3, 0.3), 0.2).unwrap());
        assert!(!oracle_separable_2d(&pair(0.05, -0.05), 0.2).unwrap());
    }

    #[test]
    fn margin_threshold() {
        // best margin for the pair is 0.3
        assert!(oracle_separable_2d(&pair(0.3, -0.3), 0.29).unwrap());
        assert!(!oracle_separable_2d(&pair(0.3, -0.3), 0.31).unwrap());
    }

    #[test]
    fn witness_separates() {
        let pts = vec![
            LabeledPoint::positive(vec![0.6, 0.6]),
            LabeledPoint::positive(vec![0.7, 0.2]),
            LabeledPoint::negative(vec![-0.4, -0.1]),
        ];
        let (a, d) = oracle_witness_2d(&pts, 0.2).unwrap().unwrap();
        for p in &pts {
            assert!(p.label.sign() * (a.cos() * p.encoding[0] + a.sin() * p.encoding[1] + d) >= 0.2);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        let pts = vec![LabeledPoint::positive(vec![0.1, 0.2, 0.3])];
        assert!(matches!(oracle_separable_2d(&pts, 0.1), Err(Error::Input(_))));
    }
}
