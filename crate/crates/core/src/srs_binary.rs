//! Closed forms for simple random sampling on binary data.
//!
//! Under SRS(N, n) with x ∈ {0,1}^N, the noiseless estimator given a total
//! t(x) = t is (N/n)·Y with Y hypergeometric; everything depends on x only
//! through t. The privacy quantities therefore reduce to scans over the
//! adjacent total pairs (t, t+1), which costs O(N²) instead of enumerating
//! the C(N, n) samples.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::estimator::AtomicDistribution;
use crate::laplace_profile::delta_discrete;

/// SRS(N, n) over binary data with the total constrained to [mt, Mt].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrsBinaryConfig {
    pub n_pop: u64,
    pub n: u64,
    pub min_total: u64,
    pub max_total: u64,
}

impl SrsBinaryConfig {
    pub fn new(n_pop: u64, n: u64, min_total: u64, max_total: u64) -> Result<SrsBinaryConfig> {
        if n == 0 || n > n_pop {
            return Err(Error::InvalidSampleSize {
                n: n as usize,
                n_pop: n_pop as usize,
            });
        }
        if min_total >= max_total || max_total > n_pop {
            return Err(Error::InvalidBounds {
                lo: min_total as f64,
                hi: max_total as f64,
            });
        }
        Ok(SrsBinaryConfig {
            n_pop,
            n,
            min_total,
            max_total,
        })
    }
}

/// ln C(a, b) for 0 ≤ b ≤ a via log-gamma.
fn ln_choose(a: u64, b: u64) -> f64 {
    debug_assert!(b <= a);
    ln_gamma(a as f64 + 1.0) - ln_gamma(b as f64 + 1.0) - ln_gamma((a - b) as f64 + 1.0)
}

/// The law of the estimator given a total of `t` ones: atoms at (N/n)·y for
/// y in the hypergeometric support, masses renormalized to sum exactly 1.
pub fn hypergeom_atoms(cfg: &SrsBinaryConfig, t: u64) -> Result<AtomicDistribution> {
    if t < cfg.min_total || t > cfg.max_total {
        return Err(Error::TotalOutOfRange {
            total: t as f64,
            lo: cfg.min_total as f64,
            hi: cfg.max_total as f64,
        });
    }
    let (n_pop, n) = (cfg.n_pop, cfg.n);
    let y_lo = (n + t).saturating_sub(n_pop);
    let y_hi = t.min(n);
    let ln_denom = ln_choose(n_pop, n);
    let scale = n_pop as f64 / n as f64;

    let mut points = Vec::with_capacity((y_hi - y_lo + 1) as usize);
    let mut sum = 0.0;
    for y in y_lo..=y_hi {
        let ln_mass = ln_choose(t, y) + ln_choose(n_pop - t, n - y) - ln_denom;
        let mass = ln_mass.exp();
        sum += mass;
        points.push((scale * y as f64, mass));
    }
    for p in &mut points {
        p.1 /= sum;
    }
    Ok(AtomicDistribution::from_weighted_points(points))
}

/// δ(ε) of the noiseless release: max over all adjacent total pairs
/// (t, t+1), both orientations, of the truncated hypergeometric difference.
pub fn delta_srs_b0(cfg: &SrsBinaryConfig, eps: f64) -> f64 {
    assert!(eps >= 0.0, "eps must be >= 0");
    (cfg.min_total..cfg.max_total)
        .into_par_iter()
        .map(|t| {
            let lo = hypergeom_atoms(cfg, t).expect("t within bounds by construction");
            let hi = hypergeom_atoms(cfg, t + 1).expect("t+1 within bounds by construction");
            f64::max(
                delta_discrete(&lo, &hi, eps),
                delta_discrete(&hi, &lo, eps),
            )
        })
        .reduce(|| 0.0, f64::max)
}

/// ε at δ = 0 for the noiseless release: +∞ when min{mt, N−Mt} < n, else
/// ln of the larger of the two boundary likelihood ratios.
pub fn epsilon_srs_b0_delta0(cfg: &SrsBinaryConfig) -> f64 {
    let (n_pop, n) = (cfg.n_pop, cfg.n);
    if cfg.min_total.min(n_pop - cfg.max_total) < n {
        return f64::INFINITY;
    }
    let a = n_pop - cfg.max_total + 1;
    let b = cfg.min_total + 1;
    let ratio_hi = a as f64 / (a - n) as f64;
    let ratio_lo = b as f64 / (b - n) as f64;
    ratio_hi.max(ratio_lo).ln()
}

/// ε(δ_target) = inf{ε ≥ 0: δ(ε) ≤ δ_target} for the noiseless release,
/// by bisection on [`delta_srs_b0`]. Returns +∞ when δ(ε) floors above the
/// target (unmatched support mass).
pub fn epsilon_srs_b0(cfg: &SrsBinaryConfig, delta_target: f64) -> Result<f64> {
    if !(delta_target > 0.0 && delta_target <= 1.0) {
        return Err(Error::InvalidDelta {
            delta: delta_target,
        });
    }
    if delta_srs_b0(cfg, 0.0) <= delta_target {
        return Ok(0.0);
    }
    let mut hi = {
        let closed = epsilon_srs_b0_delta0(cfg);
        if closed.is_finite() {
            closed
        } else {
            let mut probe = 1.0;
            while delta_srs_b0(cfg, probe) > delta_target {
                probe *= 2.0;
                if probe > 1e9 {
                    return Ok(f64::INFINITY);
                }
            }
            probe
        }
    };
    let mut lo = 0.0;
    while hi - lo > crate::laplace_profile::EPSILON_TOL {
        let mid = 0.5 * (lo + hi);
        if delta_srs_b0(cfg, mid) <= delta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
