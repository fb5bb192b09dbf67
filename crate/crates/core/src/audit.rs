//! Monte Carlo audit of a delta value.
//!
//! Draws the released value Z from the x side of an adjacent pair and
//! averages the excess (1 − e^ε·f_x′(Z)/f_x(Z))₊, an unbiased estimator of
//! δ(ε) for that orientation.  The audit exists to cross-check the exact
//! integrator on sampled configurations, so it shares no code with it
//! beyond the mixture density.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{atom_distribution, ht_value, AdjacentPair};
use crate::laplace_profile::LaplaceMixture;

/// Fewest trials accepted; below this the standard error is too loose to
/// certify anything.
pub const MIN_TRIALS: u64 = 10_000;

/// Trials per RNG block.  Each block draws from its own counter stream of
/// the same seed, so the estimate is a fixed function of (seed, trials) no
/// matter how blocks are scheduled across threads.
const BLOCK: u64 = 1 << 16;

/// A Monte Carlo delta estimate and its standard error.
#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub delta_hat: f64,
    pub se: f64,
}

/// Uniform draw in the open interval (0,1): 53 random bits, rejecting 0.
fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u > 0.0 {
            return u;
        }
    }
}

/// Inverse CDF of Laplace(0,1) at `u` ∈ (0,1).
fn laplace_unit(u: f64) -> f64 {
    let c = u - 0.5;
    -c.signum() * (-2.0 * c.abs()).ln_1p()
}

/// Estimate δ(ε) for the pair's stated orientation by simple Monte Carlo.
///
/// Each trial draws a sample from the design, adds `b`-scaled Laplace noise
/// to its estimator value, and scores the privacy-loss excess at that point.
/// With `b = 0` the densities are atom masses and a point outside the x′
/// support scores a full unit.  Fixed `seed` and `trials` reproduce the
/// estimate bit for bit.
pub fn mc_delta(
    d: &Design,
    pair: &AdjacentPair,
    b: f64,
    eps: f64,
    trials: u64,
    seed: u64,
) -> Result<McEstimate> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidEpsilon { eps });
    }
    if b < 0.0 || !b.is_finite() {
        return Err(Error::NegativeScale { b });
    }
    if trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            trials,
            min: MIN_TRIALS,
        });
    }

    let mx = LaplaceMixture::new(atom_distribution(d, pair.x())?, b)?;
    let mxp = LaplaceMixture::new(atom_distribution(d, pair.x_prime())?, b)?;

    // Sample draws use the per-sample estimator values directly rather than
    // the merged atoms, so near-equal atoms cannot bias selection.
    let pi = d.inclusion_probabilities(1);
    let mut values = Vec::with_capacity(d.support_size());
    let mut cum = Vec::with_capacity(d.support_size());
    let mut acc = 0.0;
    for ws in d.samples() {
        values.push(ht_value(pair.x(), &ws.units, &pi)?);
        acc += ws.p;
        cum.push(acc);
    }

    let n_blocks = trials.div_ceil(BLOCK);
    let stats: Vec<(f64, f64)> = (0..n_blocks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let lo = k * BLOCK;
            let hi = (lo + BLOCK).min(trials);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in lo..hi {
                let u_sample = unit_open(&mut rng);
                let u_noise = unit_open(&mut rng);
                let idx = cum
                    .partition_point(|&c| c < u_sample)
                    .min(cum.len() - 1);
                let z = values[idx] + b * laplace_unit(u_noise);
                let log_ratio = eps + mxp.log_density(z) - mx.log_density(z);
                let term = (1.0 - log_ratio.exp()).max(0.0);
                sum += term;
                sumsq += term * term;
            }
            (sum, sumsq)
        })
        .collect();

    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for (s, q) in stats {
        sum += s;
        sumsq += q;
    }
    let n = trials as f64;
    let delta_hat = sum / n;
    let var = ((sumsq - n * delta_hat * delta_hat) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        delta_hat,
        se: (var / n).sqrt(),
    })
}
