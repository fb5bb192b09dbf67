//! Conditional-on-selection moments of the estimator.
//!
//! For a unit `i`, these are the mean and variance of the estimator's
//! remainder t̂_{−i} = Σ_{j ∈ s, j≠i} x_j/π_j, conditioned on `i` being in
//! or out of the sample.  They are the building blocks for analyses that
//! add Gaussian rather than Laplace noise; this module stops at the
//! moments themselves.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::design::{Design, InclusionProbs, PairMatrix};
use crate::error::{Error, Result};
use crate::estimator::Dataset;

/// Inclusion probabilities this close to one are treated as one.
const CENSUS_TOL: f64 = 1e-12;

/// Negative variances above this floor are rounding noise and clamp to zero.
const VARIANCE_FLOOR: f64 = -1e-10;

/// The four conditional moments of t̂_{−i} at one unit.
///
/// None of the four depends on x_i: the sums run over the other units only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    /// E[t̂_{−i} | i ∈ s].
    pub t_minus_i_given_i: f64,
    /// E[t̂_{−i} | i ∉ s].
    pub t_minus_i_given_not_i: f64,
    /// Var[t̂_{−i} | i ∈ s].
    pub var_given_i: f64,
    /// Var[t̂_{−i} | i ∉ s].
    pub var_given_not_i: f64,
}

/// Computes conditional moments against one design, caching the third-order
/// inclusion probabilities it needs per conditioning unit.
///
/// The cache takes O(N²) per distinct unit, so repeated queries at the same
/// unit (different datasets, say) pay the enumeration cost once.  Reads may
/// run concurrently; insertion takes the write lock.
pub struct MomentEngine<'a> {
    design: &'a Design,
    pi: InclusionProbs,
    slices: RwLock<HashMap<usize, Arc<PairMatrix>>>,
}

impl<'a> MomentEngine<'a> {
    pub fn new(design: &'a Design) -> MomentEngine<'a> {
        MomentEngine {
            design,
            pi: design.inclusion_probabilities(2),
            slices: RwLock::new(HashMap::new()),
        }
    }

    /// Pairwise probabilities restricted to samples containing `i`.
    fn slice(&self, i: usize) -> Arc<PairMatrix> {
        if let Some(m) = self.slices.read().unwrap().get(&i) {
            return Arc::clone(m);
        }
        let mut w = self.slices.write().unwrap();
        Arc::clone(
            w.entry(i)
                .or_insert_with(|| Arc::new(self.design.third_order_slice(i))),
        )
    }

    /// Conditional mean and variance of t̂_{−i} given i ∈ s and given i ∉ s.
    ///
    /// Requires 0 < π_i < 1.  When π_i = 1 the out-of-sample condition has
    /// probability zero; with `allow_census` the in-sample moments are
    /// returned for both conditions, otherwise the call fails.  π_i = 0
    /// always fails: conditioning on selection is empty.
    pub fn conditional_moments(
        &self,
        x: &Dataset,
        i: usize,
        allow_census: bool,
    ) -> Result<ConditionalMoments> {
        let n = self.design.n_pop();
        if x.len() != n {
            return Err(Error::DimensionMismatch { len: x.len(), n_pop: n });
        }
        x.validate()?;
        if i >= n {
            return Err(Error::UnitOutOfRange { unit: i, n_pop: n });
        }
        let pi_i = self.pi.first(i);
        if pi_i <= 0.0 {
            return Err(Error::DegenerateInclusion { unit: i, pi: pi_i });
        }
        let census = pi_i > 1.0 - CENSUS_TOL;
        if census && !allow_census {
            return Err(Error::DegenerateInclusion { unit: i, pi: pi_i });
        }

        // Units with π_j = 0 never enter a sample and contribute nothing.
        let mut units: Vec<(usize, f64)> = Vec::with_capacity(n.saturating_sub(1));
        for j in 0..n {
            if j != i {
                let pj = self.pi.first(j);
                if pj > 0.0 {
                    units.push((j, x.x[j] / pj));
                }
            }
        }

        let slice = self.slice(i);
        let cond_in: Vec<f64> = units
            .iter()
            .map(|&(j, _)| self.pi.pair(i, j) / pi_i)
            .collect();
        let (mean_in, var_in) = moments_from_conditionals(&units, &cond_in, |j, l| {
            slice.get(j, l) / pi_i
        });

        let (mean_out, var_out) = if census {
            (mean_in, var_in)
        } else {
            let cond_out: Vec<f64> = units
                .iter()
                .map(|&(j, _)| (self.pi.first(j) - self.pi.pair(i, j)) / (1.0 - pi_i))
                .collect();
            moments_from_conditionals(&units, &cond_out, |j, l| {
                (self.pi.pair(j, l) - slice.get(j, l)) / (1.0 - pi_i)
            })
        };

        Ok(ConditionalMoments {
            t_minus_i_given_i: mean_in,
            t_minus_i_given_not_i: mean_out,
            var_given_i: var_in,
            var_given_not_i: var_out,
        })
    }
}

/// Mean and variance of Σ_j y_j 1{j ∈ s} under the given conditional
/// inclusion probabilities, iterating ordered pairs with the diagonal
/// convention π_{j,j|·} = π_{j|·}.
fn moments_from_conditionals(
    units: &[(usize, f64)],
    cond: &[f64],
    pair_cond: impl Fn(usize, usize) -> f64,
) -> (f64, f64) {
    let mut mean = 0.0;
    for (a, &(_, y)) in units.iter().enumerate() {
        mean += y * cond[a];
    }
    let mut var = 0.0;
    for (a, &(j, yj)) in units.iter().enumerate() {
        for (b, &(l, yl)) in units.iter().enumerate() {
            let pjl = if j == l { cond[a] } else { pair_cond(j, l) };
            var += yj * yl * (pjl - cond[a] * cond[b]);
        }
    }
    if (VARIANCE_FLOOR..0.0).contains(&var) {
        var = 0.0;
    }
    (mean, var)
}

/// One-shot form of [`MomentEngine::conditional_moments`].
pub fn conditional_moments(
    d: &Design,
    x: &Dataset,
    i: usize,
    allow_census: bool,
) -> Result<ConditionalMoments> {
    MomentEngine::new(d).conditional_moments(x, i, allow_census)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{make_explicit_design, make_srs_design, WeightedSample};
    use approx::assert_relative_eq;

    fn wide_dataset(x: Vec<f64>) -> Dataset {
        let n = x.len() as f64;
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min).min(-4.0);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(4.0);
        Dataset::new(x, lo, hi, n * lo, n * hi).unwrap()
    }

    /// Conditional moments by direct enumeration over the design's samples.
    fn enumerated(d: &Design, x: &Dataset, i: usize) -> ConditionalMoments {
        let pi = d.inclusion_probabilities(1);
        let (mut p_in, mut m_in, mut q_in) = (0.0, 0.0, 0.0);
        let (mut p_out, mut m_out, mut q_out) = (0.0, 0.0, 0.0);
        for ws in d.samples() {
            let v: f64 = ws
                .units
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| x.x[j] / pi.first(j))
                .sum();
            if ws.units.contains(&i) {
                p_in += ws.p;
                m_in += ws.p * v;
                q_in += ws.p * v * v;
            } else {
                p_out += ws.p;
                m_out += ws.p * v;
                q_out += ws.p * v * v;
            }
        }
        let mean_in = m_in / p_in;
        let mean_out = if p_out > 0.0 { m_out / p_out } else { mean_in };
        ConditionalMoments {
            t_minus_i_given_i: mean_in,
            t_minus_i_given_not_i: mean_out,
            var_given_i: (q_in / p_in - mean_in * mean_in).max(0.0),
            var_given_not_i: if p_out > 0.0 {
                (q_out / p_out - mean_out * mean_out).max(0.0)
            } else {
                (q_in / p_in - mean_in * mean_in).max(0.0)
            },
        }
    }

    fn uneven_design() -> Design {
        make_explicit_design(
            vec![
                WeightedSample { units: vec![0, 1], p: 0.3 },
                WeightedSample { units: vec![1, 2], p: 0.25 },
                WeightedSample { units: vec![2, 3], p: 0.25 },
                WeightedSample { units: vec![0, 3], p: 0.1 },
                WeightedSample { units: vec![0, 2], p: 0.1 },
            ],
            Some(4),
        )
        .unwrap()
    }

    #[test]
    fn srs32_mean_and_degenerate_variance() {
        let d = make_srs_design(3, 2).unwrap();
        let x = wide_dataset(vec![1.0, 1.0, 1.0]);
        let m = conditional_moments(&d, &x, 0, false).unwrap();
        // Every sample containing unit 0 holds exactly one other unit, each
        // contributing 1/(2/3), so the conditional mean is 3/2 with no
        // spread.
        assert_relative_eq!(m.t_minus_i_given_i, 1.5, max_relative = 1e-12);
        assert!(m.var_given_i.abs() <= 1e-12);
    }

    #[test]
    fn srs21_disjoint_samples() {
        let d = make_srs_design(2, 1).unwrap();
        let x = wide_dataset(vec![1.0, 1.0]);
        let m = conditional_moments(&d, &x, 0, false).unwrap();
        assert_eq!(m.t_minus_i_given_i, 0.0);
        assert_eq!(m.t_minus_i_given_not_i, 2.0);
        assert_eq!(m.var_given_i, 0.0);
        assert_eq!(m.var_given_not_i, 0.0);
    }

    #[test]
    fn census_needs_flag_and_is_deterministic() {
        let d = make_explicit_design(
            vec![WeightedSample { units: vec![0, 1, 2], p: 1.0 }],
            Some(3),
        )
        .unwrap();
        let x = wide_dataset(vec![2.0, 3.0, 4.0]);
        let err = conditional_moments(&d, &x, 1, false).unwrap_err();
        assert!(matches!(err, Error::DegenerateInclusion { unit: 1, .. }));

        let m = conditional_moments(&d, &x, 1, true).unwrap();
        assert_relative_eq!(m.t_minus_i_given_i, 6.0, max_relative = 1e-12);
        assert_eq!(m.t_minus_i_given_not_i, m.t_minus_i_given_i);
        assert_eq!(m.var_given_i, 0.0);
        assert_eq!(m.var_given_not_i, 0.0);
    }

    #[test]
    fn never_selected_unit_is_degenerate() {
        let d = make_explicit_design(
            vec![WeightedSample { units: vec![0, 1], p: 1.0 }],
            Some(3),
        )
        .unwrap();
        let x = wide_dataset(vec![1.0, 2.0, 3.0]);
        let err = conditional_moments(&d, &x, 2, true).unwrap_err();
        assert!(matches!(err, Error::DegenerateInclusion { unit: 2, .. }));

        // Unit 2 never enters a sample, so it is also skipped in the sums
        // for other units.
        let m = conditional_moments(&d, &x, 0, true).unwrap();
        assert_relative_eq!(m.t_minus_i_given_i, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn matches_enumeration_on_uneven_design() {
        let d = uneven_design();
        let x = wide_dataset(vec![1.5, -2.0, 3.25, 0.5]);
        let engine = MomentEngine::new(&d);
        for i in 0..4 {
            let m = engine.conditional_moments(&x, i, false).unwrap();
            let o = enumerated(&d, &x, i);
            assert_relative_eq!(m.t_minus_i_given_i, o.t_minus_i_given_i, epsilon = 1e-10);
            assert_relative_eq!(
                m.t_minus_i_given_not_i,
                o.t_minus_i_given_not_i,
                epsilon = 1e-10
            );
            assert_relative_eq!(m.var_given_i, o.var_given_i, epsilon = 1e-10);
            assert_relative_eq!(m.var_given_not_i, o.var_given_not_i, epsilon = 1e-10);
        }
    }

    #[test]
    fn law_of_total_expectation() {
        for (d, x) in [
            (make_srs_design(5, 2).unwrap(), wide_dataset(vec![0.5, 2.0, -1.0, 3.0, 1.25])),
            (uneven_design(), wide_dataset(vec![1.5, -2.0, 3.25, 0.5])),
        ] {
            let pi = d.inclusion_probabilities(1);
            let engine = MomentEngine::new(&d);
            for i in 0..x.len() {
                let pi_i = pi.first(i);
                let m = engine.conditional_moments(&x, i, false).unwrap();
                let expected_total = pi_i * (x.x[i] / pi_i + m.t_minus_i_given_i)
                    + (1.0 - pi_i) * m.t_minus_i_given_not_i;
                assert_relative_eq!(expected_total, x.total(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn outputs_ignore_x_i() {
        let d = uneven_design();
        let a = wide_dataset(vec![1.5, -2.0, 3.25, 0.5]);
        let b = wide_dataset(vec![-3.0, -2.0, 3.25, 0.5]);
        let ma = conditional_moments(&d, &a, 0, false).unwrap();
        let mb = conditional_moments(&d, &b, 0, false).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn engine_matches_one_shot_calls() {
        let d = uneven_design();
        let x = wide_dataset(vec![1.0, 2.0, 3.0, 4.0]);
        let engine = MomentEngine::new(&d);
        for i in 0..4 {
            let once = conditional_moments(&d, &x, i, false).unwrap();
            let cached = engine.conditional_moments(&x, i, false).unwrap();
            assert_eq!(once, cached);
        }
        // Second pass hits the cache and must agree with the first.
        for i in 0..4 {
            let once = conditional_moments(&d, &x, i, false).unwrap();
            let cached = engine.conditional_moments(&x, i, false).unwrap();
            assert_eq!(once, cached);
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let d = make_srs_design(3, 2).unwrap();
        let x = wide_dataset(vec![1.0, 1.0]);
        assert!(matches!(
            conditional_moments(&d, &x, 0, false).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }
}
