//! Truncation sweeps: how the closeness sum, the operator spectrum, and the
//! residual tail behave as the level grows toward the full family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certification::Thresholds;
use crate::criteria::{generalized_sum, plateau_at_level};
use crate::error::{Error, Result};
use crate::hilbert::{check_consistent, BasisFamily, DualFamily, PerturbedFamily};
use crate::linalg::singular_extremes;
use crate::operators::{build_bundle, operator_gap};

/// Per-level diagnostics, all vectors indexed in step with `levels`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    #[serde(rename = "dims")]
    pub levels: Vec<usize>,
    /// Weighted double sum restricted to the leading block at each level.
    #[serde(rename = "partial_S")]
    pub partial_s: Vec<f64>,
    /// Smallest singular value of the leading block of the level operator.
    pub sigma_min_per_level: Vec<f64>,
    /// Norm of the update the remaining indices would still add.
    pub gap_to_full: Vec<f64>,
    /// Whether the sum has stopped moving relative to the half level.
    #[serde(rename = "plateau_flag")]
    pub plateau: Vec<bool>,
}

/// Powers of two below `count`, then `count` itself.
pub fn default_levels(count: usize) -> Vec<usize> {
    let mut levels = Vec::new();
    let mut p = 1;
    while p < count {
        levels.push(p);
        p *= 2;
    }
    levels.push(count);
    levels
}

/// Runs the sweep at the given levels. Levels must be strictly increasing
/// and lie in `1..=count`. Per-level work is parallel; the report ordering
/// and every value in it are independent of the thread count.
pub fn sweep(
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
    levels: &[usize],
    thresholds: &Thresholds,
) -> Result<SweepReport> {
    check_consistent(basis, dual, perturbed)?;
    let n = basis.count();
    if levels.is_empty() {
        return Err(Error::InvalidInput("level list is empty".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "levels must be strictly increasing".into(),
        ));
    }
    for &level in levels {
        if level == 0 || level > n {
            return Err(Error::BadLevel { level, count: n });
        }
    }

    let closeness = generalized_sum(basis, dual, perturbed)?;
    let partial_s: Vec<f64> = levels
        .iter()
        .map(|&level| closeness.partial_sums[level - 1])
        .collect();
    let plateau: Vec<bool> = levels
        .iter()
        .map(|&level| plateau_at_level(&closeness.partial_sums, level, thresholds.plateau_tol))
        .collect::<Result<_>>()?;

    let spectra: Vec<(f64, f64)> = levels
        .par_iter()
        .map(|&level| -> Result<(f64, f64)> {
            let bundle = build_bundle(basis, dual, perturbed, level)?;
            let block = bundle.a().view((0, 0), (level, level)).into_owned();
            let (_, sigma_min) = singular_extremes(&block);
            let gap = if level == n {
                0.0
            } else {
                operator_gap(basis, dual, perturbed, level, n)?
            };
            Ok((sigma_min, gap))
        })
        .collect::<Result<Vec<_>>>()?;

    let (sigma_min_per_level, gap_to_full) = spectra.into_iter().unzip();
    Ok(SweepReport {
        levels: levels.to_vec(),
        partial_s,
        sigma_min_per_level,
        gap_to_full,
        plateau,
    })
}
