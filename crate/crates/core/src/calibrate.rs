//! Calibration of the Laplace scale to a target privacy level.
//!
//! Given a design, a set of adjacent pairs, and a fixed epsilon, find the
//! smallest noise scale `b` whose worst-case delta over all pairs and both
//! orientations is at or below `delta_target`.  The search first checks
//! whether the noiseless release already meets the target, then brackets the
//! scale by geometric doubling and narrows the bracket by bisection.

use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{atom_distribution, support_bounds, AdjacentPair, AtomicDistribution};
use crate::laplace_profile::{delta_discrete, delta_laplace, LaplaceMixture};

/// Largest scale the bracketing search will try before giving up.
pub const MAX_SCALE: f64 = 1e9;

/// Relative bracket width at which the bisection over scales stops.
pub const SCALE_REL_TOL: f64 = 1e-6;

/// Slack allowed before two successive probes count as non-monotone.
const MONOTONE_SLACK: f64 = 1e-12;

/// Outcome of a scale calibration.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    /// Smallest scale found whose worst-case delta meets the target.
    pub b: f64,
    /// Worst-case delta actually achieved at `b`.
    pub delta_at_b: f64,
    /// Whether delta was non-increasing across the probed scales.  The map
    /// from scale to delta is not monotone for every design, so a violation
    /// is reported rather than treated as an error; the returned `b` still
    /// satisfies the target.
    pub monotone: bool,
}

/// Worst-case delta at scale `b` over all pairs, both orientations each.
fn worst_delta(
    atoms: &[(AtomicDistribution, AtomicDistribution)],
    b: f64,
    eps: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (ax, axp) in atoms {
        let (fwd, rev) = if b == 0.0 {
            (delta_discrete(ax, axp, eps), delta_discrete(axp, ax, eps))
        } else {
            let mx = LaplaceMixture::new(ax.clone(), b)?;
            let mxp = LaplaceMixture::new(axp.clone(), b)?;
            (delta_laplace(&mx, &mxp, eps)?, delta_laplace(&mxp, &mx, eps)?)
        };
        worst = worst.max(fwd).max(rev);
    }
    Ok(worst)
}

/// Find the smallest Laplace scale meeting `delta_target` at `eps`.
///
/// Returns scale zero when the noiseless release already satisfies the
/// target.  Otherwise brackets the answer by doubling from a scale
/// proportional to the estimator's support span and bisects to a relative
/// width of [`SCALE_REL_TOL`].  Fails with [`Error::Infeasible`] when no
/// scale at or below [`MAX_SCALE`] meets the target.
pub fn calibrate_b(
    d: &Design,
    pairs: &[AdjacentPair],
    eps: f64,
    delta_target: f64,
) -> Result<Calibration> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidEpsilon { eps });
    }
    if !delta_target.is_finite() || !(0.0..1.0).contains(&delta_target) {
        return Err(Error::InvalidDelta {
            delta: delta_target,
        });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyPairList);
    }

    let atoms: Vec<(AtomicDistribution, AtomicDistribution)> = pairs
        .iter()
        .map(|p| Ok((atom_distribution(d, p.x())?, atom_distribution(d, p.x_prime())?)))
        .collect::<Result<_>>()?;

    let delta_noiseless = worst_delta(&atoms, 0.0, eps)?;
    if delta_noiseless <= delta_target {
        return Ok(Calibration {
            b: 0.0,
            delta_at_b: delta_noiseless,
            monotone: true,
        });
    }

    let endpoints: Vec<&crate::estimator::Dataset> = pairs
        .iter()
        .flat_map(|p| [p.x(), p.x_prime()])
        .collect();
    let (span_lo, span_hi) = support_bounds(d, &endpoints)?;

    let mut lo = 0.0f64;
    let mut hi = 1e-6 * (span_hi - span_lo + 1.0);
    let mut prev = delta_noiseless;
    let mut monotone = true;
    loop {
        if hi > MAX_SCALE {
            return Err(Error::Infeasible { cap: MAX_SCALE });
        }
        let delta_hi = worst_delta(&atoms, hi, eps)?;
        if delta_hi > prev + MONOTONE_SLACK {
            monotone = false;
        }
        if delta_hi <= delta_target {
            break;
        }
        lo = hi;
        prev = delta_hi;
        hi *= 2.0;
    }

    while hi - lo > SCALE_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if worst_delta(&atoms, mid, eps)? <= delta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let delta_at_b = worst_delta(&atoms, hi, eps)?;
    Ok(Calibration {
        b: hi,
        delta_at_b,
        monotone,
    })
}
