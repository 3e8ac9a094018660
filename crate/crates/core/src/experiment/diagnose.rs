use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::FitThresholds;
use super::curve::CurvePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    OverFitting,
    UnderFitting,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::OverFitting => "over-fitting",
            Verdict::UnderFitting => "under-fitting",
        })
    }
}

/// Classify a run from its final evaluation point.
pub fn diagnose_fit(curve: &[CurvePoint], t: &FitThresholds) -> Result<Verdict> {
    if curve.len() < 3 {
        return Err(Error::contract(format!("need at least 3 evaluation points, got {}", curve.len())));
    }
    let last = curve[curve.len() - 1];
    if last.train_acc - last.test_acc > t.overfit_gap && last.train_acc > t.overfit_train {
        Ok(Verdict::OverFitting)
    } else if last.train_acc < t.underfit_train {
        Ok(Verdict::UnderFitting)
    } else {
        Ok(Verdict::Converged)
    }
}

/// Test accuracy over the last three evaluations varies by less than
/// `t.stable_range`.
pub fn stable_tail(curve: &[CurvePoint], t: &FitThresholds) -> bool {
    if curve.len() < 3 {
        return false;
    }
    let tail = &curve[curve.len() - 3..];
    let lo = tail.iter().map(|p| p.test_acc).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|p| p.test_acc).fold(f64::NEG_INFINITY, f64::max);
    hi - lo < t.stable_range
}
