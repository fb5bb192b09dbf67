//! Enumerable without-replacement sampling designs.
//!
//! A [`Design`] is a finite support of samples (subsets of the population)
//! with probabilities, canonically ordered so that every derived quantity is
//! deterministic across runs. First, second and third order inclusion
//! probabilities are exact sums over the support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Construction tolerance on the probability sum of a support.
pub const PROB_SUM_TOL: f64 = 1e-9;
/// Post-construction guarantee on the probability sum (renormalized if the
/// input sum is inside `PROB_SUM_TOL` but outside this).
pub const PROB_SUM_GUARANTEE: f64 = 1e-12;
/// Default cap on the number of enumerated samples.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

/// One support point: a sample (set of unit ids) and its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    /// Unit ids, kept sorted ascending.
    #[serde(rename = "s")]
    pub units: Vec<usize>,
    #[serde(rename = "p")]
    pub p: f64,
}

/// On-disk form of a design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DesignSpec {
    Explicit {
        #[serde(rename = "N")]
        n_pop: usize,
        samples: Vec<WeightedSample>,
    },
    Srs {
        #[serde(rename = "N")]
        n_pop: usize,
        n: usize,
    },
}

/// An enumerable without-replacement sampling design.
///
/// Invariants held after construction: probabilities are positive and sum to
/// 1 within `PROB_SUM_GUARANTEE`, samples are distinct sorted sets, and the
/// support is sorted by sample size then lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_pop: usize,
    samples: Vec<WeightedSample>,
}

impl Design {
    /// Population size N.
    pub fn n_pop(&self) -> usize {
        self.n_pop
    }

    /// The canonical support.
    pub fn samples(&self) -> &[WeightedSample] {
        &self.samples
    }

    /// Number of support points.
    pub fn support_size(&self) -> usize {
        self.samples.len()
    }

    /// Parse a design from its JSON form (explicit or srs).
    pub fn from_json(text: &str) -> Result<Design> {
        let spec: DesignSpec = serde_json::from_str(text)?;
        Design::from_spec(spec)
    }

    /// Build a design from its on-disk form.
    pub fn from_spec(spec: DesignSpec) -> Result<Design> {
        match spec {
            DesignSpec::Explicit { n_pop, samples } => {
                make_explicit_design(samples, Some(n_pop))
            }
            DesignSpec::Srs { n_pop, n } => make_srs_design(n_pop, n),
        }
    }

    /// Serialize to the explicit JSON form. Round-trips bit-exactly.
    pub fn to_json(&self) -> String {
        let spec = DesignSpec::Explicit {
            n_pop: self.n_pop,
            samples: self.samples.clone(),
        };
        serde_json::to_string(&spec).expect("design serialization cannot fail")
    }

    /// Exact inclusion probabilities up to the requested order (1, 2 or 3).
    pub fn inclusion_probabilities(&self, order: u8) -> InclusionProbs {
        assert!((1..=3).contains(&order), "order must be 1, 2 or 3");
        let n = self.n_pop;
        let mut first = vec![0.0; n];
        for ws in &self.samples {
            for &u in &ws.units {
                first[u] += ws.p;
            }
        }
        for pi in &mut first {
            *pi = pi.min(1.0);
        }

        let second = (order >= 2).then(|| self.second_order(&first));
        let third = (order >= 3).then(|| self.third_order());
        InclusionProbs {
            first,
            second,
            third,
        }
    }

    fn second_order(&self, first: &[f64]) -> PairMatrix {
        let n = self.n_pop;
        let mut m = PairMatrix::zeros(n);
        for ws in &self.samples {
            for (k, &a) in ws.units.iter().enumerate() {
                for &b in &ws.units[k + 1..] {
                    m.add(a, b, ws.p);
                    m.add(b, a, ws.p);
                }
            }
        }
        for (i, &pi) in first.iter().enumerate() {
            m.set(i, i, pi);
        }
        m
    }

    fn third_order(&self) -> TripleProbs {
        let mut t = TripleProbs::zeros(self.n_pop);
        for ws in &self.samples {
            let u = &ws.units;
            for a in 0..u.len() {
                for b in a + 1..u.len() {
                    for c in b + 1..u.len() {
                        t.add(u[a], u[b], u[c], ws.p);
                    }
                }
            }
        }
        t
    }

    /// Pairwise probabilities restricted to samples containing `i`: entry
    /// (j, l) is pi_{i,j,l} for j ≠ l and pi_{i,j} on the diagonal. This is
    /// the slice the conditional-moment formulas consume.
    pub fn third_order_slice(&self, i: usize) -> PairMatrix {
        let n = self.n_pop;
        let mut m = PairMatrix::zeros(n);
        for ws in &self.samples {
            if ws.units.binary_search(&i).is_err() {
                continue;
            }
            for (k, &a) in ws.units.iter().enumerate() {
                m.add(a, a, ws.p);
                for &b in &ws.units[k + 1..] {
                    m.add(a, b, ws.p);
                    m.add(b, a, ws.p);
                }
            }
        }
        m
    }
}

/// Build a design from an explicit support list.
///
/// `n_pop` may be given or inferred as one past the largest unit id. The
/// support is validated, zero-probability samples are dropped, and the rest
/// is sorted canonically (size, then lexicographic).
pub fn make_explicit_design(
    samples: Vec<WeightedSample>,
    n_pop: Option<usize>,
) -> Result<Design> {
    let inferred = samples
        .iter()
        .flat_map(|ws| ws.units.iter().copied())
        .max()
        .map(|m| m + 1);
    let n_pop = n_pop.or(inferred).unwrap_or(0);
    if n_pop == 0 {
        return Err(Error::EmptyPopulation);
    }

    let mut kept: Vec<WeightedSample> = Vec::with_capacity(samples.len());
    for (index, mut ws) in samples.into_iter().enumerate() {
        if ws.p.is_nan() || ws.p < 0.0 {
            return Err(Error::NegativeProbability { index, p: ws.p });
        }
        ws.units.sort_unstable();
        for w in ws.units.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateUnitInSample { unit: w[0] });
            }
        }
        if let Some(&last) = ws.units.last() {
            if last >= n_pop {
                return Err(Error::UnitOutOfRange {
                    unit: last,
                    n_pop,
                });
            }
        }
        if ws.p > 0.0 {
            kept.push(ws);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySupport);
    }

    kept.sort_by(|a, b| {
        a.units
            .len()
            .cmp(&b.units.len())
            .then_with(|| a.units.cmp(&b.units))
    });
    for w in kept.windows(2) {
        if w[0].units == w[1].units {
            return Err(Error::DuplicateSample {
                units: w[0].units.clone(),
            });
        }
    }

    let sum: f64 = kept.iter().map(|ws| ws.p).sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::ProbabilitiesDoNotSumToOne { sum });
    }
    if (sum - 1.0).abs() > PROB_SUM_GUARANTEE {
        for ws in &mut kept {
            ws.p /= sum;
        }
    }

    Ok(Design {
        n_pop,
        samples: kept,
    })
}

/// Simple random sampling without replacement: all size-`n` subsets of
/// `{0, …, n_pop−1}`, each with probability 1/C(N, n).
pub fn make_srs_design(n_pop: usize, n: usize) -> Result<Design> {
    make_srs_design_capped(n_pop, n, DEFAULT_ENUMERATION_CAP)
}

/// As [`make_srs_design`] with an explicit enumeration cap.
pub fn make_srs_design_capped(n_pop: usize, n: usize, cap: u64) -> Result<Design> {
    if n_pop == 0 {
        return Err(Error::EmptyPopulation);
    }
    if n > n_pop {
        return Err(Error::InvalidSampleSize { n, n_pop });
    }
    let count = binomial_capped(n_pop as u128, n as u128, cap as u128)
        .ok_or(Error::EnumerationTooLarge {
            required: binomial_lower_bound(n_pop as u128, n as u128, cap as u128),
            cap,
        })?;
    let p = 1.0 / count as f64;

    let mut samples = Vec::with_capacity(count as usize);
    let mut comb: Vec<usize> = (0..n).collect();
    loop {
        samples.push(WeightedSample {
            units: comb.clone(),
            p,
        });
        // Advance to the next combination in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(Design {
                    n_pop,
                    samples,
                });
            }
            k -= 1;
            if comb[k] < n_pop - (n - k) {
                comb[k] += 1;
                for j in k + 1..n {
                    comb[j] = comb[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// C(n, k) if it is ≤ cap, else None. Exact integer arithmetic.
fn binomial_capped(n: u128, k: u128, cap: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for step in 1..=k {
        c = c * (n - k + step) / step;
        if c > cap {
            return None;
        }
    }
    Some(c)
}

/// A value ≥ cap+1 that lower-bounds C(n, k), for error reporting.
fn binomial_lower_bound(n: u128, k: u128, cap: u128) -> u128 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for step in 1..=k {
        c = c * (n - k + step) / step;
        if c > cap {
            return c;
        }
    }
    c
}

/// Inclusion probabilities of a design, up to the requested order.
///
/// `second` and `third` are present only when the corresponding order was
/// requested. Pairwise entries use the convention `pair(i, i) = first[i]`.
#[derive(Debug, Clone)]
pub struct InclusionProbs {
    pub first: Vec<f64>,
    pub second: Option<PairMatrix>,
    pub third: Option<TripleProbs>,
}

impl InclusionProbs {
    pub fn first(&self, i: usize) -> f64 {
        self.first[i]
    }

    /// pi_{i,j} for i ≠ j, pi_i on the diagonal. Panics if order < 2.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.second
            .as_ref()
            .expect("second-order probabilities were not requested")
            .get(i, j)
    }

    /// pi_{i,j,l} for distinct i, j, l. Panics if order < 3 or ids collide.
    pub fn triple(&self, i: usize, j: usize, l: usize) -> f64 {
        self.third
            .as_ref()
            .expect("third-order probabilities were not requested")
            .get(i, j, l)
    }
}

/// Dense symmetric matrix of pairwise probabilities.
#[derive(Debug, Clone)]
pub struct PairMatrix {
    n: usize,
    a: Vec<f64>,
}

impl PairMatrix {
    fn zeros(n: usize) -> PairMatrix {
        PairMatrix {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }
}

/// Third-order probabilities, stored per sorted triple i < j < l.
#[derive(Debug, Clone)]
pub struct TripleProbs {
    n: usize,
    a: Vec<f64>,
}

impl TripleProbs {
    fn zeros(n: usize) -> TripleProbs {
        let len = if n >= 3 { n * (n - 1) * (n - 2) / 6 } else { 0 };
        TripleProbs { n, a: vec![0.0; len] }
    }

    fn rank(&self, i: usize, j: usize, l: usize) -> usize {
        debug_assert!(i < j && j < l && l < self.n);
        // Combinatorial number system of degree 3.
        l * (l - 1) * (l - 2) / 6 + j * (j - 1) / 2 + i
    }

    fn add(&mut self, i: usize, j: usize, l: usize, v: f64) {
        let r = self.rank(i, j, l);
        self.a[r] += v;
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        let mut t = [i, j, l];
        t.sort_unstable();
        assert!(t[0] < t[1] && t[1] < t[2], "triple ids must be distinct");
        self.a[self.rank(t[0], t[1], t[2])]
    }
}
