//! Exact (ε, δ) computations for the released value Z_b = t̂ + b·Laplace(0,1).
//!
//! Given X = x the law of Z_b is a finite mixture of Laplace distributions
//! centered at the estimator atoms (or the atomic law itself when b = 0).
//! For two mixtures with a common scale, δ(ε) = ∫ (f_x − e^ε f_x′)₊ has a
//! closed form: between consecutive knots (the merged atom values) the
//! integrand is C·e^{z/b} + D·e^{−z/b} with at most one sign change, and the
//! two tails are single exponentials. All coefficient accumulation happens
//! in log space so that |value|/b far beyond 700 cannot overflow, and every
//! exponent actually exponentiated is provably ≤ 0.

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{
    atom_distribution, values_match, AdjacentPair, AtomicDistribution, Dataset,
};

/// δ values below this are reported as 0 (quadrature-level noise floor).
pub const DELTA_FLOOR: f64 = 1e-15;

/// Absolute bisection tolerance on ε in [`epsilon_at_delta`].
pub const EPSILON_TOL: f64 = 1e-9;

/// An [`AtomicDistribution`] convolved with Laplace(0, b); b = 0 means the
/// atomic law itself.
#[derive(Debug, Clone)]
pub struct LaplaceMixture {
    pub atoms: AtomicDistribution,
    pub b: f64,
}

impl LaplaceMixture {
    pub fn new(atoms: AtomicDistribution, b: f64) -> Result<LaplaceMixture> {
        if b < 0.0 || !b.is_finite() {
            return Err(Error::NegativeScale { b });
        }
        assert!(!atoms.is_empty(), "a mixture needs at least one atom");
        Ok(LaplaceMixture { atoms, b })
    }

    /// Density at `z`: w.r.t. Lebesgue measure for b > 0, w.r.t. the
    /// counting measure (atom mass at z) for b = 0.
    pub fn density(&self, z: f64) -> f64 {
        if self.b == 0.0 {
            return self.atoms.mass_at(z);
        }
        self.log_density(z).exp()
    }

    /// Natural log of [`Self::density`]; −∞ where the mass is 0.
    pub fn log_density(&self, z: f64) -> f64 {
        if self.b == 0.0 {
            return self.atoms.mass_at(z).ln();
        }
        let mut acc = f64::NEG_INFINITY;
        for (v, m) in self.atoms.iter() {
            acc = lse2(acc, m.ln() - (z - v).abs() / self.b);
        }
        acc - (2.0 * self.b).ln()
    }
}

/// Density of the mixture at `z`; free-function form of
/// [`LaplaceMixture::density`].
pub fn mixture_density(m: &LaplaceMixture, z: f64) -> f64 {
    m.density(z)
}

/// The merged, sorted, distinct atom values of two distributions: the points
/// where the mixture densities are non-differentiable.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSet {
    pub knots: Vec<f64>,
}

impl KnotSet {
    pub fn merged(fx: &AtomicDistribution, fxp: &AtomicDistribution) -> KnotSet {
        KnotSet {
            knots: align(fx, fxp).z,
        }
    }
}

/// log(e^a + e^b) without intermediate overflow.
fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// sign · e^ln representation of e^a − e^b.
#[derive(Debug, Clone, Copy)]
struct SignedLog {
    sign: i8,
    ln: f64,
}

fn log_diff(a: f64, b: f64) -> SignedLog {
    if a == b {
        return SignedLog {
            sign: 0,
            ln: f64::NEG_INFINITY,
        };
    }
    if a > b {
        SignedLog {
            sign: 1,
            ln: a + (-((b - a).exp())).ln_1p(),
        }
    } else {
        SignedLog {
            sign: -1,
            ln: b + (-((a - b).exp())).ln_1p(),
        }
    }
}

/// The two atom lists aligned on a common knot grid. `mass_x[k]` and
/// `mass_xp[k]` hold the mass each side carries at knot `z[k]`, 0 where a
/// side has no atom there.
struct Aligned {
    z: Vec<f64>,
    mass_x: Vec<f64>,
    mass_xp: Vec<f64>,
}

fn align(fx: &AtomicDistribution, fxp: &AtomicDistribution) -> Aligned {
    let mut z = Vec::with_capacity(fx.len() + fxp.len());
    let mut mass_x = Vec::with_capacity(z.capacity());
    let mut mass_xp = Vec::with_capacity(z.capacity());

    let (vx, wx) = (fx.values(), fx.masses());
    let (vp, wp) = (fxp.values(), fxp.masses());
    let (mut i, mut j) = (0usize, 0usize);
    while i < vx.len() || j < vp.len() {
        let take_x = match (vx.get(i), vp.get(j)) {
            (Some(&a), Some(&b)) => a <= b,
            (Some(_), None) => true,
            (None, _) => false,
        };
        let rep = if take_x { vx[i] } else { vp[j] };
        let mut mx = 0.0;
        let mut mxp = 0.0;
        while i < vx.len() && values_match(rep, vx[i]) {
            mx += wx[i];
            i += 1;
        }
        while j < vp.len() && values_match(rep, vp[j]) {
            mxp += wp[j];
            j += 1;
        }
        z.push(rep);
        mass_x.push(mx);
        mass_xp.push(mxp);
    }

    Aligned {
        z,
        mass_x,
        mass_xp,
    }
}

/// Precomputed log-space prefix/suffix sums for one ordered pair of
/// mixtures at a fixed scale b > 0, reusable across ε values.
///
/// With knots z_0 < … < z_{J−1}, on the open segment (z_m, z_{m+1}) each
/// density is e^{−t/b}·e^{d[m+1]} + e^{t/b}·e^{c[m+1]} (divided by 2b) where
/// d[m] = lse_{k<m}(l_k + z_k/b) and c[m] = lse_{k≥m}(l_k − z_k/b).
struct PreparedDelta {
    b: f64,
    z: Vec<f64>,
    d_x: Vec<f64>,
    d_xp: Vec<f64>,
    c_x: Vec<f64>,
    c_xp: Vec<f64>,
}

impl PreparedDelta {
    fn new(fx: &AtomicDistribution, fxp: &AtomicDistribution, b: f64) -> PreparedDelta {
        debug_assert!(b > 0.0);
        let a = align(fx, fxp);
        let j = a.z.len();
        let mut d_x = vec![f64::NEG_INFINITY; j + 1];
        let mut d_xp = vec![f64::NEG_INFINITY; j + 1];
        let mut c_x = vec![f64::NEG_INFINITY; j + 1];
        let mut c_xp = vec![f64::NEG_INFINITY; j + 1];
        for k in 0..j {
            d_x[k + 1] = lse2(d_x[k], a.mass_x[k].ln() + a.z[k] / b);
            d_xp[k + 1] = lse2(d_xp[k], a.mass_xp[k].ln() + a.z[k] / b);
        }
        for k in (0..j).rev() {
            c_x[k] = lse2(c_x[k + 1], a.mass_x[k].ln() - a.z[k] / b);
            c_xp[k] = lse2(c_xp[k + 1], a.mass_xp[k].ln() - a.z[k] / b);
        }
        PreparedDelta {
            b,
            z: a.z,
            d_x,
            d_xp,
            c_x,
            c_xp,
        }
    }

    /// ∫ (f_x − e^ε f_x′)₊ over the positive part, exactly.
    fn delta(&self, eps: f64) -> f64 {
        let b = self.b;
        let j = self.z.len();
        let mut acc = 0.0;

        // Left tail: integrand is e^{t/b}·(C_all) below the first knot.
        let c_all = log_diff(self.c_x[0], eps + self.c_xp[0]);
        if c_all.sign > 0 {
            acc += 0.5 * (c_all.ln + self.z[0] / b).exp();
        }
        // Right tail: e^{−t/b}·(D_all) above the last knot.
        let d_all = log_diff(self.d_x[j], eps + self.d_xp[j]);
        if d_all.sign > 0 {
            acc += 0.5 * (d_all.ln - self.z[j - 1] / b).exp();
        }

        for m in 0..j.saturating_sub(1) {
            let l = self.z[m];
            let r = self.z[m + 1];
            let c = log_diff(self.c_x[m + 1], eps + self.c_xp[m + 1]);
            let d = log_diff(self.d_x[m + 1], eps + self.d_xp[m + 1]);
            if c.sign >= 0 && d.sign >= 0 {
                if c.sign + d.sign > 0 {
                    acc += self.segment(c, d, l, r);
                }
            } else if c.sign > 0 {
                // Increasing through its single root: keep [root, r].
                let root = 0.5 * b * (d.ln - c.ln);
                let a0 = root.clamp(l, r);
                acc += self.segment(c, d, a0, r);
            } else if d.sign > 0 {
                // Decreasing: keep [l, root].
                let root = 0.5 * b * (d.ln - c.ln);
                let c0 = root.clamp(l, r);
                acc += self.segment(c, d, l, c0);
            }
        }

        let delta = acc.clamp(0.0, 1.0);
        if delta < DELTA_FLOOR {
            0.0
        } else {
            delta
        }
    }

    /// ∫_a^c (C·e^{t/b} + D·e^{−t/b}) dt / (2b) on a stretch where the
    /// integrand is non-negative. Every exponent is ≤ 0 there: positive
    /// coefficients are dominated by the f_x mass alone, and a negative
    /// coefficient only appears beyond a root where the opposing term
    /// bounds it.
    fn segment(&self, c: SignedLog, d: SignedLog, a0: f64, c0: f64) -> f64 {
        if c0 <= a0 {
            return 0.0;
        }
        let b = self.b;
        let c_part = match c.sign {
            0 => 0.0,
            s => s as f64 * ((c.ln + c0 / b).exp() - (c.ln + a0 / b).exp()),
        };
        let d_part = match d.sign {
            0 => 0.0,
            s => s as f64 * ((d.ln - a0 / b).exp() - (d.ln - c0 / b).exp()),
        };
        0.5 * (c_part + d_part)
    }

    /// ln f_x(z_m) − ln f_x′(z_m) at knot index m (the ln(2b) terms cancel).
    fn log_ratio_at_knot(&self, m: usize) -> f64 {
        let zm = self.z[m];
        let lfx = lse2(self.d_x[m + 1] - zm / self.b, self.c_x[m + 1] + zm / self.b);
        let lfxp = lse2(self.d_xp[m + 1] - zm / self.b, self.c_xp[m + 1] + zm / self.b);
        lfx - lfxp
    }
}

/// δ(ε) between two atomic laws (b = 0): Σ over shared support of
/// (f_x − e^ε f_x′)₊, clamped to [0,1].
pub fn delta_discrete(fx: &AtomicDistribution, fxp: &AtomicDistribution, eps: f64) -> f64 {
    assert!(eps >= 0.0 && eps.is_finite(), "eps must be finite and >= 0");
    let a = align(fx, fxp);
    // exp can hit +inf for eps > ~709.8; the mass_xp == 0 case must still
    // contribute its full mass rather than an inf·0 NaN.
    let scale = eps.exp();
    let mut acc = 0.0;
    for k in 0..a.z.len() {
        let diff = if a.mass_xp[k] == 0.0 {
            a.mass_x[k]
        } else {
            a.mass_x[k] - scale * a.mass_xp[k]
        };
        if diff > 0.0 {
            acc += diff;
        }
    }
    let delta = acc.clamp(0.0, 1.0);
    if delta < DELTA_FLOOR {
        0.0
    } else {
        delta
    }
}

/// δ(ε) between two Laplace mixtures with a common scale b > 0.
pub fn delta_laplace(mx: &LaplaceMixture, mxp: &LaplaceMixture, eps: f64) -> Result<f64> {
    assert!(eps >= 0.0 && eps.is_finite(), "eps must be finite and >= 0");
    if mx.b != mxp.b {
        return Err(Error::MismatchedScales {
            b_left: mx.b,
            b_right: mxp.b,
        });
    }
    if mx.b == 0.0 {
        return Err(Error::ZeroScale);
    }
    Ok(PreparedDelta::new(&mx.atoms, &mxp.atoms, mx.b).delta(eps))
}

/// δ(ε, x, x′) for the released Z_b, dispatching on b.
pub fn delta(d: &Design, pair: &AdjacentPair, b: f64, eps: f64) -> Result<f64> {
    if b < 0.0 || !b.is_finite() {
        return Err(Error::NegativeScale { b });
    }
    if eps < 0.0 || !eps.is_finite() {
        return Err(Error::InvalidEpsilon { eps });
    }
    let fx = atom_distribution(d, pair.x())?;
    let fxp = atom_distribution(d, pair.x_prime())?;
    if b == 0.0 {
        Ok(delta_discrete(&fx, &fxp, eps))
    } else {
        delta_laplace(
            &LaplaceMixture::new(fx, b)?,
            &LaplaceMixture::new(fxp, b)?,
            eps,
        )
    }
}

/// ln of [`density_ratio_sup`]; +∞ exactly when the sup is infinite.
pub fn log_density_ratio_sup(mx: &LaplaceMixture, mxp: &LaplaceMixture) -> Result<f64> {
    if mx.b != mxp.b {
        return Err(Error::MismatchedScales {
            b_left: mx.b,
            b_right: mxp.b,
        });
    }
    if mx.b == 0.0 {
        let mut sup = f64::NEG_INFINITY;
        for (v, m) in mx.atoms.iter() {
            let mp = mxp.atoms.mass_at(v);
            if mp == 0.0 {
                return Ok(f64::INFINITY);
            }
            sup = sup.max(m.ln() - mp.ln());
        }
        return Ok(sup);
    }
    // b > 0: the sup over all of ℝ is attained at a knot; the two tail
    // limits equal the ratio at the extreme knots.
    let prep = PreparedDelta::new(&mx.atoms, &mxp.atoms, mx.b);
    let mut sup = f64::NEG_INFINITY;
    for m in 0..prep.z.len() {
        sup = sup.max(prep.log_ratio_at_knot(m));
    }
    Ok(sup)
}

/// sup_z f_x(z)/f_x′(z); +∞ for b = 0 when the support of f_x is not
/// contained in the support of f_x′.
pub fn density_ratio_sup(mx: &LaplaceMixture, mxp: &LaplaceMixture) -> Result<f64> {
    Ok(log_density_ratio_sup(mx, mxp)?.exp())
}

/// ε(δ_target) = inf{ε ≥ 0: δ(ε) ≤ δ_target}, found by bisection over
/// [0, eps_hi]. Returns 0 when δ(0) ≤ δ_target already and +∞ when even
/// δ(eps_hi) stays above the target.
pub fn epsilon_at_delta(
    mx: &LaplaceMixture,
    mxp: &LaplaceMixture,
    delta_target: f64,
    eps_hi: f64,
) -> Result<f64> {
    if !(delta_target > 0.0 && delta_target <= 1.0) {
        return Err(Error::InvalidDelta {
            delta: delta_target,
        });
    }
    if eps_hi < 0.0 || !eps_hi.is_finite() {
        return Err(Error::InvalidEpsilon { eps: eps_hi });
    }
    if mx.b != mxp.b {
        return Err(Error::MismatchedScales {
            b_left: mx.b,
            b_right: mxp.b,
        });
    }

    let eval: Box<dyn Fn(f64) -> f64> = if mx.b == 0.0 {
        let fx = mx.atoms.clone();
        let fxp = mxp.atoms.clone();
        Box::new(move |eps| delta_discrete(&fx, &fxp, eps))
    } else {
        let prep = PreparedDelta::new(&mx.atoms, &mxp.atoms, mx.b);
        Box::new(move |eps| prep.delta(eps))
    };

    if eval(0.0) <= delta_target {
        return Ok(0.0);
    }
    if eval(eps_hi) > delta_target {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi = eps_hi;
    while hi - lo > EPSILON_TOL {
        let mid = 0.5 * (lo + hi);
        if eval(mid) <= delta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Orientation of a witnessing pair: whether x or x′ played the numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    #[serde(rename = "x->xp")]
    XToXp,
    #[serde(rename = "xp->x")]
    XpToX,
}

/// The adjacent pair (and orientation) attaining the max δ at a grid point.
#[derive(Debug, Clone)]
pub struct Witness {
    pub pair: AdjacentPair,
    pub dir: Direction,
}

impl Serialize for Witness {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Witness", 2)?;
        s.serialize_field("i", &self.pair.i())?;
        s.serialize_field("dir", &self.dir)?;
        s.end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub eps: f64,
    pub delta: f64,
    pub witness: Witness,
}

/// A monotone (ε, δ) curve with the witnessing pair per point.
#[derive(Debug, Clone, Serialize)]
pub struct PrivacyProfile {
    pub b: f64,
    pub points: Vec<ProfilePoint>,
}

impl PrivacyProfile {
    /// CSV form: header `eps,delta,witness_i`, one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,delta,witness_i\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.eps, p.delta, p.witness.pair.i()));
        }
        out
    }
}

/// δ over an ε grid, maximized over the supplied pairs in both
/// orientations. Cells are evaluated in parallel but reduced in a fixed
/// order, so the result is identical for any worker count.
pub fn profile(
    d: &Design,
    pairs: &[AdjacentPair],
    b: f64,
    eps_grid: &[f64],
) -> Result<PrivacyProfile> {
    if pairs.is_empty() {
        return Err(Error::EmptyPairList);
    }
    if b < 0.0 || !b.is_finite() {
        return Err(Error::NegativeScale { b });
    }
    if eps_grid.is_empty() {
        return Err(Error::BadGrid {
            detail: "empty epsilon grid".to_owned(),
        });
    }
    for &e in eps_grid {
        if e < 0.0 || !e.is_finite() {
            return Err(Error::InvalidEpsilon { eps: e });
        }
    }
    for w in eps_grid.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::BadGrid {
                detail: "grid must be strictly ascending".to_owned(),
            });
        }
    }

    // One cell per (pair, orientation), in deterministic order.
    let atoms: Vec<(AtomicDistribution, AtomicDistribution)> = pairs
        .iter()
        .map(|p| {
            Ok((
                atom_distribution(d, p.x())?,
                atom_distribution(d, p.x_prime())?,
            ))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, Direction)> = (0..pairs.len())
        .flat_map(|ci| [(ci, Direction::XToXp), (ci, Direction::XpToX)])
        .collect();

    let per_cell: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(ci, dir)| {
            let (fx, fxp) = match dir {
                Direction::XToXp => (&atoms[ci].0, &atoms[ci].1),
                Direction::XpToX => (&atoms[ci].1, &atoms[ci].0),
            };
            if b == 0.0 {
                eps_grid
                    .iter()
                    .map(|&eps| delta_discrete(fx, fxp, eps))
                    .collect()
            } else {
                let prep = PreparedDelta::new(fx, fxp, b);
                eps_grid.iter().map(|&eps| prep.delta(eps)).collect()
            }
        })
        .collect();

    let mut points = Vec::with_capacity(eps_grid.len());
    for (gi, &eps) in eps_grid.iter().enumerate() {
        let mut best_cell = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (cell_idx, deltas) in per_cell.iter().enumerate() {
            if deltas[gi] > best {
                best = deltas[gi];
                best_cell = cell_idx;
            }
        }
        let (ci, dir) = cells[best_cell];
        let pair = match dir {
            Direction::XToXp => pairs[ci].clone(),
            Direction::XpToX => pairs[ci].swapped(),
        };
        points.push(ProfilePoint {
            eps,
            delta: best,
            witness: Witness { pair, dir },
        });
    }

    // Stitch float noise so the published curve is monotone; anything past
    // the noise band would be a real defect.
    for k in 1..points.len() {
        let prev = points[k - 1].delta;
        if points[k].delta > prev {
            debug_assert!(points[k].delta - prev <= 1e-12, "delta rose along the grid");
            points[k].delta = prev;
        }
    }

    Ok(PrivacyProfile {
        b,
        points,
    })
}

/// Candidate worst-case pairs at unit `i`: both endpoints constant at one of
/// the value bounds away from `i`, with x_i flipped from m_x to M_x.
/// Candidates violating the total bounds are dropped.
pub fn extremal_pair_heuristic(
    d: &Design,
    min_value: f64,
    max_value: f64,
    min_total: f64,
    max_total: f64,
    i: usize,
) -> Result<Vec<AdjacentPair>> {
    let n = d.n_pop();
    if i >= n {
        return Err(Error::UnitOutOfRange { unit: i, n_pop: n });
    }
    let mut out: Vec<AdjacentPair> = Vec::new();
    for anchor in [min_value, max_value] {
        let mut x = vec![anchor; n];
        x[i] = min_value;
        let mut xp = vec![anchor; n];
        xp[i] = max_value;
        let lo = Dataset {
            x,
            min_value,
            max_value,
            min_total,
            max_total,
        };
        let hi = Dataset {
            x: xp,
            min_value,
            max_value,
            min_total,
            max_total,
        };
        if let Ok(pair) = AdjacentPair::new(lo, hi, i) {
            if pair.x() != pair.x_prime() && !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoFeasiblePair);
    }
    Ok(out)
}

/// [`extremal_pair_heuristic`] collected over every unit, deduplicated.
pub fn extremal_pairs_all_units(
    d: &Design,
    min_value: f64,
    max_value: f64,
    min_total: f64,
    max_total: f64,
) -> Result<Vec<AdjacentPair>> {
    let mut out: Vec<AdjacentPair> = Vec::new();
    for i in 0..d.n_pop() {
        if let Ok(mut pairs) =
            extremal_pair_heuristic(d, min_value, max_value, min_total, max_total, i)
        {
            for p in pairs.drain(..) {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoFeasiblePair);
    }
    Ok(out)
}
