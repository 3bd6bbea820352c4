//! Rotation-side dynamical partitions: closest-return lengths from the exact
//! beta recurrence, materialized partitions of {-j theta mod 1}, interval
//! kinds, and the combinatorial substitution rule that lets deep levels be
//! handled without materializing astronomically many points.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::cf::{rat_to_f64, ContinuedFraction, RatInterval};
use crate::error::{Error, Result};

/// Closest-return lengths beta_k = |q_k theta - p_k| as certified rational
/// intervals, beta_0 = theta.
#[derive(Debug, Clone)]
pub struct ReturnLengths {
    pub beta: Vec<RatInterval>,
}

impl ReturnLengths {
    /// beta_k as a certified interval.
    pub fn beta(&self, k: usize) -> &RatInterval {
        &self.beta[k]
    }

    pub fn beta_f64(&self, k: usize) -> f64 {
        self.beta[k].to_f64()
    }

    /// The distance of the time-q_k closest return. For k = 0 this is
    /// min(theta, 1 - theta): the nearest integer to theta wins, not p_0 = 0.
    pub fn closest_return_length(&self, k: usize) -> BigRational {
        let b = self.beta[k].midpoint();
        if k == 0 {
            let one_minus = BigRational::one() - &b;
            if one_minus < b {
                return one_minus;
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// beta_k for k = 0..=n via the exact recurrence
/// beta_k = beta_{k-2} - a_k beta_{k-1}, seeded with beta_{-1} = 1,
/// beta_0 = theta. Checks 1/(2 q_{k+1}^2) <= beta_k <= 1/q_{k+1} for every
/// k with q_{k+1} available.
pub fn closest_return_lengths(cf: &ContinuedFraction, n: usize) -> Result<ReturnLengths> {
    if n + 1 > cf.len() {
        return Err(Error::PrecisionExhausted(format!(
            "need at least {} partial quotients for beta_0..beta_{}",
            n + 1,
            n
        )));
    }
    let theta = cf.value_bounds().clone();
    // beta_k(theta) = (-1)^k (q_k theta - p_k) is linear in theta, so the
    // interval endpoints map to endpoints.
    let mut beta = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (p, q) = (cf.p(k), cf.q(k));
        let sign_pos = k % 2 == 0;
        let at = |t: &BigRational| -> BigRational {
            let v = BigRational::from_integer(q.clone()) * t
                - BigRational::from_integer(p.clone());
            if sign_pos {
                v
            } else {
                -v
            }
        };
        let (a, b) = (at(&theta.lo), at(&theta.hi));
        let iv = if a <= b {
            RatInterval::new(a, b)
        } else {
            RatInterval::new(b, a)
        };
        if iv.lo <= BigRational::zero() {
            return Err(Error::PrecisionExhausted(format!(
                "beta_{k} not certifiably positive; extend the expansion"
            )));
        }
        beta.push(iv);
    }
    // Strict decrease.
    for k in 1..=n {
        if beta[k].hi >= beta[k - 1].lo {
            return Err(Error::InvariantViolation(format!(
                "beta_{k} not certifiably below beta_{}",
                k - 1
            )));
        }
    }
    // Two-sided bounds against q_{k+1}.
    for k in 0..=n {
        if k + 1 > cf.len() {
            break;
        }
        let q_next = cf.q(k + 1);
        let upper = BigRational::new(BigInt::one(), q_next.clone());
        let lower = BigRational::new(BigInt::one(), 2 * q_next * q_next);
        if beta[k].hi > upper || beta[k].lo < lower {
            return Err(Error::InvariantViolation(format!(
                "beta_{k} violates the closest-return bounds"
            )));
        }
    }
    Ok(ReturnLengths { beta })
}

/// The two interval kinds of the modified partition at level n: a single
/// closest return of time q_{n-1} (length beta_{n-1}), or the union of an
/// n-return and an (n-1)-return (length beta_n + beta_{n-1}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IntervalKind {
    Single,
    Union,
}

impl IntervalKind {
    /// Interval length at level n in units where beta_{n-1} is known.
    pub fn length(self, beta_nm1: f64, beta_n: f64) -> f64 {
        match self {
            IntervalKind::Single => beta_nm1,
            IntervalKind::Union => beta_n + beta_nm1,
        }
    }
}

/// Left-to-right layout of the level-(n+1) children of a level-n interval:
/// exactly one union child at one end, singles elsewhere. The union child
/// sits at the left end when n is even, the right end when n is odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChildPattern {
    pub union_at_left: bool,
    pub singles: u128,
}

impl ChildPattern {
    pub fn k(&self) -> u128 {
        self.singles + 1
    }

    pub fn kind_at(&self, i: u128) -> IntervalKind {
        let union_pos = if self.union_at_left { 0 } else { self.k() - 1 };
        if i == union_pos {
            IntervalKind::Union
        } else {
            IntervalKind::Single
        }
    }

    pub fn leftmost(&self) -> IntervalKind {
        self.kind_at(0)
    }

    pub fn rightmost(&self) -> IntervalKind {
        self.kind_at(self.k() - 1)
    }

    /// Child lengths left to right, in absolute units.
    pub fn lengths(&self, beta_n: f64, beta_np1: f64) -> Vec<f64> {
        (0..self.k())
            .map(|i| match self.kind_at(i) {
                IntervalKind::Single => beta_n,
                IntervalKind::Union => beta_n + beta_np1,
            })
            .collect()
    }
}

/// Subdivision layout of a level-n interval of the given kind into level
/// n+1. `a_next` is a_{n+1}. Singles split into a_{n+1} pieces, unions into
/// a_{n+1} + 1.
pub fn child_pattern(kind: IntervalKind, level: usize, a_next: u128) -> ChildPattern {
    let singles = match kind {
        IntervalKind::Single => a_next - 1,
        IntervalKind::Union => a_next,
    };
    ChildPattern { union_at_left: level % 2 == 0, singles }
}

/// A materialized rotation partition: the q_n points {-j theta mod 1} in
/// circle order with certified enclosures, plus per-interval kinds.
#[derive(Debug, Clone)]
pub struct RotationPartition {
    pub level: usize,
    /// Sorted by position; `orbit_index[i]` is the j with point = -j theta.
    pub points: Vec<RatInterval>,
    pub orbit_index: Vec<u64>,
    /// kind of the interval [points[i], points[i+1]] (wrapping).
    pub kinds: Vec<IntervalKind>,
}

impl RotationPartition {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Length of interval i as a certified interval.
    pub fn interval_length(&self, i: usize) -> RatInterval {
        let n = self.points.len();
        if i + 1 < n {
            RatInterval::new(
                &self.points[i + 1].lo - &self.points[i].hi,
                &self.points[i + 1].hi - &self.points[i].lo,
            )
        } else {
            let one = BigRational::one();
            RatInterval::new(
                &one + &self.points[0].lo - &self.points[n - 1].hi,
                &one + &self.points[0].hi - &self.points[n - 1].lo,
            )
        }
    }

    /// Positions as f64 midpoints (for geometry consumers).
    pub fn positions_f64(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.to_f64()).collect()
    }
}

/// Build the level-n rotation partition by exact mod-1 arithmetic on the
/// theta enclosure. Requires q_n <= cap (points are materialized) and enough
/// partial quotients to certify distinctness.
pub fn partition_rotation(cf: &ContinuedFraction, n: usize, cap: u128) -> Result<RotationPartition> {
    if n + 1 > cf.len() {
        return Err(Error::PrecisionExhausted(format!(
            "level {n} needs at least {} partial quotients",
            n + 1
        )));
    }
    let q_n = cf
        .q(n)
        .to_u128()
        .filter(|&q| q <= cap)
        .ok_or_else(|| Error::PrecisionExhausted(format!("q_{n} exceeds the materialization cap {cap}")))? as u64;
    let theta = cf.value_bounds();
    // Put both theta bounds over one common denominator d; every partition
    // point -j theta mod 1 is then an integer numerator over d, so the whole
    // construction is integer multiply/divide with no per-point gcd. The
    // resulting rationals are stored unreduced (new_raw); BigRational's
    // comparison operators are exact regardless of reduction.
    let dl = theta.lo.denom();
    let dh = theta.hi.denom();
    let d: BigInt = dl * dh;
    let a: BigInt = theta.lo.numer() * dh;
    let b: BigInt = theta.hi.numer() * dl;
    let mut pts: Vec<(BigInt, BigInt, u64)> = Vec::with_capacity(q_n as usize);
    for j in 0..q_n {
        let jb = BigInt::from(j);
        // -j theta in [-j b, -j a] / d; reduce mod d with a floored remainder.
        let lo_full = -(&jb * &b);
        let mut r_lo = &lo_full % &d;
        if r_lo.is_negative() {
            r_lo += &d;
        }
        let f = (&lo_full - &r_lo) / &d;
        let r_hi = -(&jb * &a) - &f * &d;
        if r_hi < r_lo || r_hi >= d {
            return Err(Error::PrecisionExhausted(format!(
                "floor of -{j} theta straddles an integer; extend the expansion"
            )));
        }
        pts.push((r_lo, r_hi, j));
    }
    pts.sort_by(|x, y| x.0.cmp(&y.0));
    for w in pts.windows(2) {
        if w[0].1 >= w[1].0 {
            return Err(Error::PrecisionExhausted(
                "two partition points are not certifiably distinct".into(),
            ));
        }
    }
    let mut points = Vec::with_capacity(pts.len());
    let mut orbit_index = Vec::with_capacity(pts.len());
    for (r_lo, r_hi, j) in pts {
        points.push(RatInterval::new(
            BigRational::new_raw(r_lo, d.clone()),
            BigRational::new_raw(r_hi, d.clone()),
        ));
        orbit_index.push(j);
    }
    let part = RotationPartition { level: n, points, orbit_index, kinds: Vec::new() };
    let kinds = if n >= 1 {
        assign_kinds(cf, &part, n)?
    } else {
        vec![IntervalKind::Union]
    };
    Ok(RotationPartition { kinds, ..part })
}

fn assign_kinds(
    cf: &ContinuedFraction,
    part: &RotationPartition,
    n: usize,
) -> Result<Vec<IntervalKind>> {
    let beta = closest_return_lengths(cf, n)?;
    let single = beta.beta(n - 1);
    let union = RatInterval::new(
        &beta.beta(n).lo + &beta.beta(n - 1).lo,
        &beta.beta(n).hi + &beta.beta(n - 1).hi,
    );
    let m = part.points.len();
    let mut kinds = Vec::with_capacity(m);
    // Fast path: partition_rotation stores every point over one shared
    // denominator d, so interval lengths are integer numerator differences
    // and the enclosure tests are cross-multiplications against bounds
    // scaled by d once per level.
    let d = part.points[0].lo.denom();
    let shared = part.points.iter().all(|p| p.lo.denom() == d && p.hi.denom() == d);
    if shared {
        let scale = |r: &BigRational| (r.numer() * d, r.denom().clone());
        let (s_lo_n, s_lo_d) = scale(&single.lo);
        let (s_hi_n, s_hi_d) = scale(&single.hi);
        let (u_lo_n, u_lo_d) = scale(&union.lo);
        let (u_hi_n, u_hi_d) = scale(&union.hi);
        for i in 0..m {
            // len in [len_lo, len_hi] / d, wrapping at the last interval.
            let (len_lo, len_hi) = if i + 1 < m {
                (
                    part.points[i + 1].lo.numer() - part.points[i].hi.numer(),
                    part.points[i + 1].hi.numer() - part.points[i].lo.numer(),
                )
            } else {
                (
                    d + part.points[0].lo.numer() - part.points[i].hi.numer(),
                    d + part.points[0].hi.numer() - part.points[i].lo.numer(),
                )
            };
            let hits_single = &len_hi * &s_lo_d >= s_lo_n && &len_lo * &s_hi_d <= s_hi_n;
            let hits_union = &len_hi * &u_lo_d >= u_lo_n && &len_lo * &u_hi_d <= u_hi_n;
            match (hits_single, hits_union) {
                (true, false) => kinds.push(IntervalKind::Single),
                (false, true) => kinds.push(IntervalKind::Union),
                _ => {
                    return Err(Error::InvariantViolation(format!(
                        "interval {i} at level {n} has length outside both admissible values",
                    )))
                }
            }
        }
        return Ok(kinds);
    }
    for i in 0..m {
        let len = part.interval_length(i);
        let hits_single = len.hi >= single.lo && len.lo <= single.hi;
        let hits_union = len.hi >= union.lo && len.lo <= union.hi;
        match (hits_single, hits_union) {
            (true, false) => kinds.push(IntervalKind::Single),
            (false, true) => kinds.push(IntervalKind::Union),
            _ => {
                return Err(Error::InvariantViolation(format!(
                    "interval {i} at level {n} has length {} outside both admissible values",
                    rat_to_f64(&len.midpoint())
                )))
            }
        }
    }
    Ok(kinds)
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationBoundsRow {
    pub level: usize,
    pub beta_n: f64,
    pub min_len: f64,
    pub max_len: f64,
    /// beta_n * 2 q_{n+1}^2 (>= 1 when the lower bound holds).
    pub lower_slack: f64,
    /// (2 / q_n) / max_len (>= 1 when the upper bound holds).
    pub upper_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationBoundsReport {
    pub rows: Vec<RotationBoundsRow>,
    pub pass: bool,
}

/// Check 1/(2 q_{n+1}^2) <= beta_n = |I'_n| <= |I| <= 2/q_n for every level
/// up to n_max, with exact rational comparisons. Needs no materialization,
/// so it works at any depth the expansion supports.
pub fn verify_rotation_bounds(cf: &ContinuedFraction, n_max: usize) -> Result<RotationBoundsReport> {
    if n_max + 1 > cf.len() {
        return Err(Error::PrecisionExhausted(format!(
            "n_max {n_max} needs at least {} partial quotients",
            n_max + 1
        )));
    }
    let beta = closest_return_lengths(cf, n_max)?;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        // Interval lengths at level n are beta_{n-1} (min) and
        // beta_n + beta_{n-1} (max).
        let min_len = beta.beta(n - 1).clone();
        let max_len = RatInterval::new(
            &beta.beta(n).lo + &beta.beta(n - 1).lo,
            &beta.beta(n).hi + &beta.beta(n - 1).hi,
        );
        let q_n = cf.q(n);
        let q_np1 = cf.q(n + 1);
        let lower = BigRational::new(BigInt::one(), 2 * q_np1 * q_np1);
        let upper = BigRational::new(BigInt::from(2), q_n.clone());
        if beta.beta(n).lo < lower {
            return Err(Error::InvariantViolation(format!(
                "level {n}: beta_n below 1/(2 q_{{n+1}}^2)"
            )));
        }
        if max_len.hi > upper {
            return Err(Error::InvariantViolation(format!(
                "level {n}: max interval length above 2/q_n"
            )));
        }
        rows.push(RotationBoundsRow {
            level: n,
            beta_n: beta.beta_f64(n),
            min_len: min_len.to_f64(),
            max_len: max_len.to_f64(),
            lower_slack: rat_to_f64(&(&beta.beta(n).lo / &lower)),
            upper_slack: rat_to_f64(&(&upper / &max_len.hi)),
        });
    }
    Ok(RotationBoundsReport { rows, pass: true })
}

#[derive(Debug, Clone, Serialize)]
pub struct SubdivisionReport {
    pub parent_index: usize,
    pub k: usize,
    /// Points t'_0..t'_k of the parent in the level-(n+1) partition.
    pub points: Vec<f64>,
    /// (t'_j - t'_{j-1}) * k / (t'_k - t'_0) for j = 1..k.
    pub uniformity_ratios: Vec<f64>,
}

/// Subdivision points of one level-n parent interval inside the level-(n+1)
/// partition, with the uniformity ratios of the rotation lemma. Errors with
/// `InvariantViolation` if any ratio leaves [1/2, 2].
pub fn subdivision_points(
    cf: &ContinuedFraction,
    parent: &RotationPartition,
    child: &RotationPartition,
    parent_index: usize,
) -> Result<SubdivisionReport> {
    if child.level != parent.level + 1 {
        return Err(Error::IndexMismatch("child partition must be one level deeper".into()));
    }
    let n = parent.n_points();
    let left = parent.points[parent_index].to_f64();
    let right = if parent_index + 1 < n {
        parent.points[parent_index + 1].to_f64()
    } else {
        parent.points[0].to_f64() + 1.0
    };
    let mut pts: Vec<f64> = Vec::new();
    for p in &child.points {
        for shift in [0.0, 1.0] {
            let x = p.to_f64() + shift;
            if x >= left - 1e-15 && x <= right + 1e-15 {
                pts.push(x);
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = pts.len() - 1;
    let a_next = cf.a(parent.level + 1) as usize;
    if k != a_next && k != a_next + 1 {
        return Err(Error::InvariantViolation(format!(
            "parent {parent_index} split into {k} pieces, expected {} or {}",
            a_next,
            a_next + 1
        )));
    }
    let total = pts[k] - pts[0];
    let mut ratios = Vec::with_capacity(k);
    for j in 1..=k {
        let r = (pts[j] - pts[j - 1]) * k as f64 / total;
        if !(0.5..=2.0).contains(&r) {
            return Err(Error::InvariantViolation(format!(
                "uniformity ratio {r} outside [1/2, 2] at parent {parent_index}, j = {j}"
            )));
        }
        ratios.push(r);
    }
    Ok(SubdivisionReport { parent_index, k, points: pts, uniformity_ratios: ratios })
}

/// Context class of a level-n interval: its own kind plus the kinds of its
/// left and right neighbors. Cell geometry at deep levels is a function of
/// the class alone (plus the beta ratios), so tracking class counts replaces
/// materializing q_n points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct KindClass {
    pub own: IntervalKind,
    pub left: IntervalKind,
    pub right: IntervalKind,
}

pub const ALL_CLASSES: [KindClass; 8] = {
    use IntervalKind::{Single, Union};
    [
        KindClass { own: Single, left: Single, right: Single },
        KindClass { own: Single, left: Single, right: Union },
        KindClass { own: Single, left: Union, right: Single },
        KindClass { own: Single, left: Union, right: Union },
        KindClass { own: Union, left: Single, right: Single },
        KindClass { own: Union, left: Single, right: Union },
        KindClass { own: Union, left: Union, right: Single },
        KindClass { own: Union, left: Union, right: Union },
    ]
};

pub fn class_index(c: KindClass) -> usize {
    ALL_CLASSES.iter().position(|&x| x == c).unwrap()
}

/// Class counts per level computed by the substitution dynamics, as f64
/// (counts reach q_n, far beyond u64 for wild sequences).
#[derive(Debug, Clone)]
pub struct ClassCounts {
    /// counts[n][ci] = number of level-n intervals in class ALL_CLASSES[ci].
    pub counts: Vec<[f64; 8]>,
}

/// Evolve class counts from level 1 to n_max. Level 1 has q_1 = a_1
/// intervals; for a_1 >= 2 they are a_1 - 1 singles and one union (the level
/// 0 -> 1 subdivision of the single interval [0, 1)), for a_1 = 1 a single
/// union covering the circle.
pub fn class_counts(cf: &ContinuedFraction, n_max: usize) -> Result<ClassCounts> {
    if n_max + 1 > cf.len() {
        return Err(Error::PrecisionExhausted(format!(
            "class counts to level {n_max} need {} partial quotients",
            n_max + 1
        )));
    }
    let mut counts: Vec<[f64; 8]> = vec![[0.0; 8]; n_max + 1];
    // Level-1 layout around the circle: the level-0 circle has length
    // beta_{-1} = 1 and subdivides like a single into q_1 = a_1 children.
    let p0 = child_pattern(IntervalKind::Single, 0, cf.a(1));
    let k = p0.k() as usize;
    for i in 0..k {
        let own = p0.kind_at(i as u128);
        let left = p0.kind_at(((i + k - 1) % k) as u128);
        let right = p0.kind_at(((i + 1) % k) as u128);
        counts[1][class_index(KindClass { own, left, right })] += 1.0;
    }
    for n in 1..n_max {
        let a_next = cf.a(n + 1);
        let mut next = [0.0; 8];
        for (ci, &c) in counts[n].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let class = ALL_CLASSES[ci];
            let pat = child_pattern(class.own, n, a_next);
            let left_pat = child_pattern(class.left, n, a_next);
            let right_pat = child_pattern(class.right, n, a_next);
            let kk = pat.k();
            // Enumerate child positions; for huge a_{n+1} the interior
            // singles all share one class, so collapse the middle run.
            let interesting: Vec<u128> = if kk <= 6 {
                (0..kk).collect()
            } else {
                vec![0, 1, 2, kk - 3, kk - 2, kk - 1]
            };
            let mut bulk = kk as f64 - interesting.len() as f64;
            for &i in &interesting {
                let own = pat.kind_at(i);
                let left = if i == 0 { left_pat.rightmost() } else { pat.kind_at(i - 1) };
                let right = if i == kk - 1 { right_pat.leftmost() } else { pat.kind_at(i + 1) };
                next[class_index(KindClass { own, left, right })] += c;
            }
            if bulk > 0.0 {
                // Interior bulk: single with single neighbors on both sides
                // except possibly adjacent to the union end, already covered
                // by the explicit positions above.
                use IntervalKind::Single;
                next[class_index(KindClass { own: Single, left: Single, right: Single })] +=
                    c * bulk;
                bulk = 0.0;
            }
            let _ = bulk;
        }
        counts[n + 1] = next;
    }
    Ok(ClassCounts { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::ContinuedFraction;

    fn golden(n: usize) -> ContinuedFraction {
        ContinuedFraction::from_terms(&vec![1u128; n])
    }

    fn silver(n: usize) -> ContinuedFraction {
        ContinuedFraction::from_terms(&vec![2u128; n])
    }

    #[test]
    fn golden_beta_closed_form() {
        // beta_k = g^{k+1} with g = (sqrt 5 - 1)/2.
        let cf = golden(40);
        let beta = closest_return_lengths(&cf, 10).unwrap();
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for k in 0..=10 {
            assert!(
                (beta.beta_f64(k) - g.powi(k as i32 + 1)).abs() < 1e-12,
                "beta_{k}"
            );
        }
        assert!((beta.beta_f64(2) - 0.2360679).abs() < 1e-6);
    }

    #[test]
    fn silver_beta_closed_form() {
        let cf = silver(30);
        let beta = closest_return_lengths(&cf, 8).unwrap();
        // beta_1 = 1 - 2(sqrt 2 - 1) = 3 - 2 sqrt 2.
        assert!((beta.beta_f64(1) - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let s = 2f64.sqrt() - 1.0;
        for k in 0..=8 {
            assert!((beta.beta_f64(k) - s.powi(k as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_zero_closest_return_convention() {
        // a_1 >= 2: closest return at time 1 is theta itself.
        let cf = silver(20);
        let beta = closest_return_lengths(&cf, 3).unwrap();
        let theta = cf.value_bounds().to_f64();
        assert!((rat_to_f64(&beta.closest_return_length(0)) - theta).abs() < 1e-12);
        // a_1 = 1: theta > 1/2, so the closest return at time 1 is 1 - theta.
        let cf = golden(20);
        let beta = closest_return_lengths(&cf, 3).unwrap();
        let theta = cf.value_bounds().to_f64();
        assert!((rat_to_f64(&beta.closest_return_length(0)) - (1.0 - theta)).abs() < 1e-12);
    }

    #[test]
    fn golden_level2_points() {
        let cf = golden(30);
        let part = partition_rotation(&cf, 2, 1 << 20).unwrap();
        assert_eq!(part.n_points(), 2);
        let xs = part.positions_f64();
        assert!(xs[0].abs() < 1e-12);
        assert!((xs[1] - (1.0 - 0.6180339887498949)).abs() < 1e-10);
    }

    #[test]
    fn cardinality_contract() {
        let cf = ContinuedFraction::from_terms(&[3, 1, 2, 1, 1, 4, 1, 2]);
        for n in 1..=5 {
            let part = partition_rotation(&cf, n, 1 << 20).unwrap();
            assert_eq!(
                BigInt::from(part.n_points()),
                cf.q(n).clone(),
                "level {n}"
            );
        }
    }

    #[test]
    fn silver_level2_two_length_values() {
        let cf = silver(30);
        let part = partition_rotation(&cf, 2, 1 << 20).unwrap();
        assert_eq!(part.n_points(), 5);
        let beta = closest_return_lengths(&cf, 2).unwrap();
        let b1 = beta.beta_f64(1);
        let b2 = beta.beta_f64(2);
        for i in 0..5 {
            let len = rat_to_f64(&part.interval_length(i).midpoint());
            let ok = (len - b1).abs() < 1e-12 || (len - (b1 + b2)).abs() < 1e-12;
            assert!(ok, "interval {i} has length {len}");
        }
    }

    #[test]
    fn rotation_bounds_golden_silver() {
        assert!(verify_rotation_bounds(&golden(40), 15).unwrap().pass);
        assert!(verify_rotation_bounds(&silver(40), 15).unwrap().pass);
        let cf = ContinuedFraction::from_terms(&[2]);
        // Single level sanity: upper bound 2/q_1 = 1 covers everything.
        assert!(closest_return_lengths(&cf, 0).is_ok());
    }

    #[test]
    fn subdivision_ratios_golden() {
        let cf = golden(30);
        let parent = partition_rotation(&cf, 3, 1 << 20).unwrap();
        let child = partition_rotation(&cf, 4, 1 << 20).unwrap();
        for i in 0..parent.n_points() {
            let rep = subdivision_points(&cf, &parent, &child, i).unwrap();
            assert!(rep.k == 1 || rep.k == 2);
            if rep.k == 1 {
                assert!((rep.uniformity_ratios[0] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subdivision_ratios_five() {
        let cf = ContinuedFraction::from_terms(&vec![5u128; 10]);
        let parent = partition_rotation(&cf, 2, 1 << 20).unwrap();
        let child = partition_rotation(&cf, 3, 1 << 20).unwrap();
        for i in 0..parent.n_points() {
            let rep = subdivision_points(&cf, &parent, &child, i).unwrap();
            assert!(rep.k == 5 || rep.k == 6);
        }
    }

    #[test]
    fn refinement_property() {
        let cf = ContinuedFraction::from_terms(&[2, 3, 1, 2, 1, 1, 2, 5]);
        for n in 1..=4 {
            let coarse = partition_rotation(&cf, n, 1 << 20).unwrap();
            let fine = partition_rotation(&cf, n + 1, 1 << 20).unwrap();
            for j in &coarse.orbit_index {
                assert!(fine.orbit_index.contains(j));
            }
        }
    }

    /// The substitution rule (union child at the left end for even levels,
    /// right end for odd) must reproduce the kinds of materialized
    /// partitions exactly.
    #[test]
    fn child_pattern_matches_materialized_partitions() {
        for terms in [
            vec![1u128; 14],
            vec![2u128; 10],
            vec![3, 1, 2, 1, 1, 4, 1, 2, 2, 3],
            vec![5, 5, 5, 5, 5, 2],
        ] {
            let cf = ContinuedFraction::from_terms(&terms);
            let max_n = cf.deepest_level_with_q_below(3000).min(cf.len() - 3);
            for n in 1..max_n {
                let parent = partition_rotation(&cf, n, 1 << 20).unwrap();
                let child = partition_rotation(&cf, n + 1, 1 << 20).unwrap();
                // Map each child interval to its parent and check the layout.
                for pi in 0..parent.n_points() {
                    let rep = subdivision_points(&cf, &parent, &child, pi).unwrap();
                    let pat = child_pattern(parent.kinds[pi], n, cf.a(n + 1));
                    assert_eq!(rep.k as u128, pat.k(), "level {n} parent {pi}");
                    // Child kinds left to right by matching positions.
                    for (ci, w) in rep.points.windows(2).enumerate() {
                        let len = w[1] - w[0];
                        let beta = closest_return_lengths(&cf, n + 1).unwrap();
                        let b_n = beta.beta_f64(n);
                        let b_np1 = beta.beta_f64(n + 1);
                        let expected = pat.kind_at(ci as u128);
                        let exp_len = expected.length(b_n, b_np1);
                        assert!(
                            (len - exp_len).abs() < 1e-9 * (1.0 + exp_len),
                            "level {n} parent {pi} child {ci}: len {len} vs {exp_len}"
                        );
                    }
                }
            }
        }
    }

    /// Class counts from the substitution dynamics must match direct counts
    /// on materialized partitions.
    #[test]
    fn class_counts_match_materialized() {
        for terms in [vec![1u128; 14], vec![3, 1, 2, 1, 1, 4, 1, 2, 2, 3]] {
            let cf = ContinuedFraction::from_terms(&terms);
            let n_max = cf.deepest_level_with_q_below(2000).min(cf.len() - 3);
            let cc = class_counts(&cf, n_max).unwrap();
            for n in 1..=n_max {
                let part = partition_rotation(&cf, n, 1 << 20).unwrap();
                let m = part.n_points();
                let mut direct = [0.0f64; 8];
                for i in 0..m {
                    let own = part.kinds[i];
                    let left = part.kinds[(i + m - 1) % m];
                    let right = part.kinds[(i + 1) % m];
                    direct[class_index(KindClass { own, left, right })] += 1.0;
                }
                assert_eq!(direct, cc.counts[n], "level {n} for {terms:?}");
            }
        }
    }

    #[test]
    fn class_counts_sum_to_qn() {
        let cf = ContinuedFraction::from_terms(&[7, 3, 1, 1, 2, 9, 1, 4]);
        let cc = class_counts(&cf, 6).unwrap();
        for n in 1..=6 {
            let total: f64 = cc.counts[n].iter().sum();
            assert_eq!(total, rat_to_f64(&BigRational::from_integer(cf.q(n).clone())));
        }
    }
}
