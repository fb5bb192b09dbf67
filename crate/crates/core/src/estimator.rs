//! Horvitz-Thompson values and the exact discrete law of the noiseless
//! estimator given a dataset.
//!
//! The estimator of the total is t̂(x, s) = Σ_{i∈s} x_i/π_i. Over an
//! enumerable design its law given X = x is purely atomic; this module
//! builds that [`AtomicDistribution`] with a relative merge tolerance so
//! that equal values reached through different float paths coalesce into a
//! single atom.

use serde::{Deserialize, Serialize};

use crate::design::{Design, InclusionProbs};
use crate::error::{Error, Result};

/// Relative tolerance under which two estimator values count as one atom.
pub const MERGE_TOL: f64 = 1e-9;

/// True when `a` and `b` are within `MERGE_TOL · max(1, |a|, |b|)`.
pub fn values_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// A population characteristic vector with its domain constraints: values in
/// [mx, Mx] and total in [mt, Mt].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    #[serde(rename = "mx")]
    pub min_value: f64,
    #[serde(rename = "Mx")]
    pub max_value: f64,
    #[serde(rename = "mt")]
    pub min_total: f64,
    #[serde(rename = "Mt")]
    pub max_total: f64,
}

impl Dataset {
    pub fn new(x: Vec<f64>, min_value: f64, max_value: f64, min_total: f64, max_total: f64) -> Result<Dataset> {
        let d = Dataset {
            x,
            min_value,
            max_value,
            min_total,
            max_total,
        };
        d.validate()?;
        Ok(d)
    }

    /// Parse and validate a dataset from its JSON form.
    pub fn from_json(text: &str) -> Result<Dataset> {
        let d: Dataset = serde_json::from_str(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The population total t(x) = Σ x_i.
    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }

    /// Check every domain constraint. The total check carries a relative
    /// slack of 1e-9 because the total is a float sum.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.len() as f64;
        if self.min_value > self.max_value
            || !self.min_value.is_finite()
            || !self.max_value.is_finite()
        {
            return Err(Error::InvalidBounds {
                lo: self.min_value,
                hi: self.max_value,
            });
        }
        if self.min_total >= self.max_total
            || !self.min_total.is_finite()
            || !self.max_total.is_finite()
        {
            return Err(Error::InvalidBounds {
                lo: self.min_total,
                hi: self.max_total,
            });
        }
        if n * self.min_value > self.min_total {
            return Err(Error::InvalidBounds {
                lo: n * self.min_value,
                hi: self.min_total,
            });
        }
        if self.max_total > n * self.max_value {
            return Err(Error::InvalidBounds {
                lo: self.max_total,
                hi: n * self.max_value,
            });
        }
        for (index, &value) in self.x.iter().enumerate() {
            if !value.is_finite() || value < self.min_value || value > self.max_value {
                return Err(Error::ValueOutOfBounds {
                    index,
                    value,
                    lo: self.min_value,
                    hi: self.max_value,
                });
            }
        }
        let total = self.total();
        let slack = 1e-9 * self.min_total.abs().max(self.max_total.abs()).max(1.0);
        if total < self.min_total - slack || total > self.max_total + slack {
            return Err(Error::TotalOutOfRange {
                total,
                lo: self.min_total,
                hi: self.max_total,
            });
        }
        Ok(())
    }
}

/// Two datasets in the same domain differing only at unit `i`.
///
/// Both endpoints must satisfy all dataset constraints; pairs whose flipped
/// endpoint leaves [mt, Mt] are rejected rather than clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentPair {
    x: Dataset,
    x_prime: Dataset,
    i: usize,
}

impl AdjacentPair {
    pub fn new(x: Dataset, x_prime: Dataset, i: usize) -> Result<AdjacentPair> {
        x.validate()?;
        x_prime.validate()?;
        if x.len() != x_prime.len() {
            return Err(Error::NotAdjacent {
                i,
                detail: format!("lengths differ: {} vs {}", x.len(), x_prime.len()),
            });
        }
        if i >= x.len() {
            return Err(Error::UnitOutOfRange {
                unit: i,
                n_pop: x.len(),
            });
        }
        let same_bounds = x.min_value == x_prime.min_value
            && x.max_value == x_prime.max_value
            && x.min_total == x_prime.min_total
            && x.max_total == x_prime.max_total;
        if !same_bounds {
            return Err(Error::NotAdjacent {
                i,
                detail: "domain bounds differ between the endpoints".to_owned(),
            });
        }
        for j in 0..x.len() {
            if j != i && x.x[j] != x_prime.x[j] {
                return Err(Error::NotAdjacent {
                    i,
                    detail: format!("values differ at unit {j}"),
                });
            }
        }
        Ok(AdjacentPair { x, x_prime, i })
    }

    pub fn x(&self) -> &Dataset {
        &self.x
    }

    pub fn x_prime(&self) -> &Dataset {
        &self.x_prime
    }

    /// The unit at which the two datasets differ.
    pub fn i(&self) -> usize {
        self.i
    }

    /// The same pair with the roles of x and x′ exchanged.
    pub fn swapped(&self) -> AdjacentPair {
        AdjacentPair {
            x: self.x_prime.clone(),
            x_prime: self.x.clone(),
            i: self.i,
        }
    }
}

/// On-disk form of one adjacent pair: the two value vectors plus the shared
/// domain bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjacentPairSpec {
    pub x: Vec<f64>,
    pub xp: Vec<f64>,
    pub i: usize,
    #[serde(rename = "mx")]
    pub min_value: f64,
    #[serde(rename = "Mx")]
    pub max_value: f64,
    #[serde(rename = "mt")]
    pub min_total: f64,
    #[serde(rename = "Mt")]
    pub max_total: f64,
}

impl AdjacentPairSpec {
    pub fn build(&self) -> Result<AdjacentPair> {
        let x = Dataset {
            x: self.x.clone(),
            min_value: self.min_value,
            max_value: self.max_value,
            min_total: self.min_total,
            max_total: self.max_total,
        };
        let xp = Dataset {
            x: self.xp.clone(),
            min_value: self.min_value,
            max_value: self.max_value,
            min_total: self.min_total,
            max_total: self.max_total,
        };
        AdjacentPair::new(x, xp, self.i)
    }

    pub fn from_pair(pair: &AdjacentPair) -> AdjacentPairSpec {
        AdjacentPairSpec {
            x: pair.x().x.clone(),
            xp: pair.x_prime().x.clone(),
            i: pair.i(),
            min_value: pair.x().min_value,
            max_value: pair.x().max_value,
            min_total: pair.x().min_total,
            max_total: pair.x().max_total,
        }
    }
}

/// Parse a pair file holding either one pair object or an array of them.
pub fn pairs_from_json(text: &str) -> Result<Vec<AdjacentPair>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<AdjacentPairSpec>),
        One(AdjacentPairSpec),
    }
    let parsed: OneOrMany = serde_json::from_str(text)?;
    let specs = match parsed {
        OneOrMany::Many(v) => v,
        OneOrMany::One(s) => vec![s],
    };
    if specs.is_empty() {
        return Err(Error::EmptyPairList);
    }
    specs.iter().map(AdjacentPairSpec::build).collect()
}

/// A purely atomic distribution on the real line: sorted distinct values
/// with positive masses summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDistribution {
    values: Vec<f64>,
    masses: Vec<f64>,
}

impl AtomicDistribution {
    /// Sort, merge values within [`MERGE_TOL`], and drop zero-mass points.
    /// Each merged atom sits at the mass-weighted mean of its group.
    pub fn from_weighted_points(mut points: Vec<(f64, f64)>) -> AtomicDistribution {
        points.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(points.len());
        let mut masses: Vec<f64> = Vec::with_capacity(points.len());
        for (v, m) in points {
            if m <= 0.0 {
                continue;
            }
            match (values.last_mut(), masses.last_mut()) {
                (Some(lv), Some(lm)) if values_match(*lv, v) => {
                    let total = *lm + m;
                    *lv = (*lv * *lm + v * m) / total;
                    *lm = total;
                }
                _ => {
                    values.push(v);
                    masses.push(m);
                }
            }
        }
        AtomicDistribution { values, masses }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .copied()
            .zip(self.masses.iter().copied())
    }

    /// Mass at `z`, matching atoms within the merge tolerance. Returns 0
    /// when no atom matches.
    pub fn mass_at(&self, z: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v < z);
        for k in [idx.wrapping_sub(1), idx] {
            if let (Some(&v), Some(&m)) = (self.values.get(k), self.masses.get(k)) {
                if values_match(v, z) {
                    return m;
                }
            }
        }
        0.0
    }

    pub fn min_value(&self) -> f64 {
        *self.values.first().expect("empty distribution")
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("empty distribution")
    }
}

/// Horvitz-Thompson value t̂(x, s) = Σ_{i∈s} x_i/π_i. Empty samples give 0.
pub fn ht_value(x: &Dataset, sample: &[usize], pi: &InclusionProbs) -> Result<f64> {
    let mut acc = 0.0;
    for &u in sample {
        if u >= x.len() {
            return Err(Error::UnitOutOfRange {
                unit: u,
                n_pop: x.len(),
            });
        }
        let p = pi.first(u);
        if p <= 0.0 {
            return Err(Error::ZeroInclusionProbabilityInSample { unit: u });
        }
        acc += x.x[u] / p;
    }
    Ok(acc)
}

/// The exact law of the noiseless estimator given X = x: one atom per
/// distinct estimator value over the design's support.
pub fn atom_distribution(d: &Design, x: &Dataset) -> Result<AtomicDistribution> {
    x.validate()?;
    if x.len() != d.n_pop() {
        return Err(Error::DimensionMismatch {
            len: x.len(),
            n_pop: d.n_pop(),
        });
    }
    let pi = d.inclusion_probabilities(1);
    let mut points = Vec::with_capacity(d.support_size());
    for ws in d.samples() {
        let value = ht_value(x, &ws.units, &pi)?;
        points.push((value, ws.p));
    }
    Ok(AtomicDistribution::from_weighted_points(points))
}

/// Smallest and largest estimator atom across all given datasets.
pub fn support_bounds(d: &Design, datasets: &[&Dataset]) -> Result<(f64, f64)> {
    assert!(!datasets.is_empty(), "support_bounds needs at least one dataset");
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in datasets {
        let atoms = atom_distribution(d, x)?;
        lo = lo.min(atoms.min_value());
        hi = hi.max(atoms.max_value());
    }
    Ok((lo, hi))
}
