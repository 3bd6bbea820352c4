//! The critical circle map engine: F_t(x) = x + t - sin(2 pi x)/(2 pi) in
//! 256-bit (configurable) arithmetic, parameter tuning against a continued
//! fraction target by nested sign conditions, dynamical partitions, and the
//! real a-priori / almost-parabolic diagnostics.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::error::{Error, Result};
use crate::rotation::{partition_rotation, IntervalKind, RotationPartition};

const RM: RoundingMode = RoundingMode::ToEven;

/// Iteration depth policy: tuning and partitions refuse levels whose return
/// time exceeds this many iterations.
pub const MAX_RETURN_TIME: u128 = 100_000;

/// Convert f64 to a BigFloat of precision `p` bits.
pub fn bf_from_f64(v: f64, p: usize) -> BigFloat {
    BigFloat::from_f64(v, p)
}

/// Convert a BigFloat to the nearest f64, from the raw mantissa words.
pub fn bf_to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    let (words, _n, sign, exp, _) = x.as_raw_parts().expect("finite value has raw parts");
    let len = words.len();
    let mut frac = words[len - 1] as f64 / 2f64.powi(64);
    if len >= 2 {
        frac += words[len - 2] as f64 / 2f64.powi(128);
    }
    let v = frac * 2f64.powi(exp);
    if sign == Sign::Neg {
        -v
    } else {
        v
    }
}

/// The critical circle map F_t(x) = x + t - sin(2 pi x)/(2 pi) at a fixed
/// parameter, carrying its own precision and constants cache.
pub struct CriticalMap {
    pub t: BigFloat,
    pub t_f64: f64,
    pub precision: usize,
    two_pi: BigFloat,
    cc: RefCell<Consts>,
}

impl CriticalMap {
    pub fn new(t: BigFloat, precision: usize) -> Result<Self> {
        let mut cc = Consts::new()
            .map_err(|e| Error::PrecisionExhausted(format!("constants cache: {e:?}")))?;
        let two_pi = cc.pi(precision, RM).mul(&bf_from_f64(2.0, precision), precision, RM);
        let t_f64 = bf_to_f64(&t);
        Ok(CriticalMap { t, t_f64, precision, two_pi, cc: RefCell::new(cc) })
    }

    pub fn from_f64(t: f64, precision: usize) -> Result<Self> {
        Self::new(bf_from_f64(t, precision), precision)
    }

    /// One application of the lift F_t.
    pub fn evaluate(&self, x: &BigFloat) -> BigFloat {
        let p = self.precision;
        let mut cc = self.cc.borrow_mut();
        let s = x.mul(&self.two_pi, p, RM).sin(p, RM, &mut cc);
        x.add(&self.t, p, RM).sub(&s.div(&self.two_pi, p, RM), p, RM)
    }

    pub fn evaluate_f64(&self, x: f64) -> f64 {
        x + self.t_f64 - (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI)
    }

    /// F_t'(x) = 1 - cos(2 pi x); vanishes exactly at the critical point 0.
    pub fn derivative(&self, x: &BigFloat) -> BigFloat {
        let p = self.precision;
        let mut cc = self.cc.borrow_mut();
        let c = x.mul(&self.two_pi, p, RM).cos(p, RM, &mut cc);
        bf_from_f64(1.0, p).sub(&c, p, RM)
    }

    pub fn derivative_f64(&self, x: f64) -> f64 {
        1.0 - (2.0 * std::f64::consts::PI * x).cos()
    }

    fn reduce(&self, x: &BigFloat) -> (BigFloat, i64) {
        let f = x.floor();
        let n = bf_to_f64(&f).round() as i64;
        (x.sub(&f, self.precision, RM), n)
    }

    /// The forward orbit of the critical point reduced mod 1: F^i(0) for
    /// i in 0..count, with the accumulated integer part of the lift.
    pub fn orbit(&self, count: u64) -> (Vec<BigFloat>, i64) {
        let mut pts = Vec::with_capacity(count as usize);
        let mut x = bf_from_f64(0.0, self.precision);
        let mut wraps = 0i64;
        for _ in 0..count {
            pts.push(x.clone());
            let y = self.evaluate(&x);
            let (r, w) = self.reduce(&y);
            x = r;
            wraps += w;
        }
        (pts, wraps)
    }

    /// The signed return g_n = F^{q_n}(0) - p_n of the lift.
    pub fn signed_return(&self, q: u64, p_num: i64) -> BigFloat {
        let mut x = bf_from_f64(0.0, self.precision);
        let mut wraps = 0i64;
        for _ in 0..q {
            let y = self.evaluate(&x);
            let (r, w) = self.reduce(&y);
            x = r;
            wraps += w;
        }
        x.add(&bf_from_f64((wraps - p_num) as f64, self.precision), self.precision, RM)
    }

    fn signed_return_f64(&self, q: u64, p_num: i64) -> f64 {
        let mut x = 0.0f64;
        let mut wraps = 0i64;
        for _ in 0..q {
            let y = self.evaluate_f64(x);
            let f = y.floor();
            x = y - f;
            wraps += f as i64;
        }
        x + (wraps - p_num) as f64
    }

    /// Elementary enclosure of the rotation number from m iterations:
    /// [(F^m(0) - 1)/m, (F^m(0) + 1)/m].
    pub fn rotation_number_estimate(&self, m: u64) -> (f64, f64) {
        let mut x = bf_from_f64(0.0, self.precision);
        let mut wraps = 0i64;
        for _ in 0..m {
            let y = self.evaluate(&x);
            let (r, w) = self.reduce(&y);
            x = r;
            wraps += w;
        }
        let lift = bf_to_f64(&x) + wraps as f64;
        ((lift - 1.0) / m as f64, (lift + 1.0) / m as f64)
    }

    /// Backward orbit of the critical point: points y_i with
    /// F(y_{i+1}) = y_i (mod 1), y_0 = 0, each bracketed by bisection to a
    /// certified radius <= tau = 2^{-precision/2}.
    pub fn inverse_orbit(&self, steps: usize) -> Result<Vec<InversePoint>> {
        let p = self.precision;
        let tau = 2f64.powi(-(p as i32) / 2);
        let mut out = Vec::with_capacity(steps);
        let mut target = bf_from_f64(0.0, p);
        for _ in 0..steps {
            // Solve F(z) = target + k on [0, 1): F maps [0,1] onto [t, 1+t].
            let k = if bf_to_f64(&target) >= self.t_f64 { 0.0 } else { 1.0 };
            let goal = target.add(&bf_from_f64(k, p), p, RM);
            let mut lo = bf_from_f64(0.0, p);
            let mut hi = bf_from_f64(1.0, p);
            let mut width = 1.0f64;
            let mut iter = 0usize;
            while width > tau && iter < p + 8 {
                iter += 1;
                let mid = lo.add(&hi, p, RM).mul(&bf_from_f64(0.5, p), p, RM);
                let val = self.evaluate(&mid);
                match val.cmp(&goal) {
                    Some(c) if c < 0 => lo = mid,
                    Some(_) => hi = mid,
                    None => return Err(Error::RootBracketFailure("NaN in bisection".into())),
                }
                width *= 0.5;
            }
            if width > tau {
                return Err(Error::PrecisionExhausted(format!(
                    "inverse bisection stalled at width {width:e}"
                )));
            }
            let mid = lo.add(&hi, p, RM).mul(&bf_from_f64(0.5, p), p, RM);
            out.push(InversePoint { x: bf_to_f64(&mid), radius: width / 2.0 });
            target = mid;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InversePoint {
    pub x: f64,
    /// Radius of the certifying bracket.
    pub radius: f64,
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    /// Rotation number provably below the target.
    Low,
    /// Provably above.
    High,
    /// All sign conditions up to the requested depth hold.
    Locked,
}

fn qp_u64(cf: &ContinuedFraction, n: usize) -> Result<(u64, i64)> {
    let q = cf
        .q(n)
        .to_u64()
        .ok_or_else(|| Error::PrecisionExhausted("q_n exceeds u64".into()))?;
    let p = cf
        .p(n)
        .to_i64()
        .ok_or_else(|| Error::PrecisionExhausted("p_n exceeds i64".into()))?;
    Ok((q, p))
}

/// Sign conditions: the tuned parameter satisfies
/// sign(F^{q_n}(0) - p_n) = (-1)^n for n = 1..=depth.
fn classify_f64(t: f64, cf: &ContinuedFraction, depth: usize, precision: usize) -> Result<Verdict> {
    let map = CriticalMap::from_f64(t, precision)?;
    classify_with(&cf_signs(cf, depth)?, |q, p| map.signed_return_f64(q, p).signum() as i8)
}

fn classify_bf(map: &CriticalMap, cf: &ContinuedFraction, depth: usize) -> Result<Verdict> {
    classify_with(&cf_signs(cf, depth)?, |q, p| {
        let g = map.signed_return(q, p);
        if g.is_zero() {
            0
        } else if g.is_negative() {
            -1
        } else {
            1
        }
    })
}

fn cf_signs(cf: &ContinuedFraction, depth: usize) -> Result<Vec<(u64, i64, i8)>> {
    (1..=depth)
        .map(|n| {
            let (q, p) = qp_u64(cf, n)?;
            let want: i8 = if n % 2 == 0 { 1 } else { -1 };
            Ok((q, p, want))
        })
        .collect()
}

fn classify_with(signs: &[(u64, i64, i8)], mut g_sign: impl FnMut(u64, i64) -> i8) -> Result<Verdict> {
    for &(q, p, want) in signs {
        let got = g_sign(q, p);
        if got != want {
            // Wrong side of the convergent p/q: g <= 0 forces rho <= p/q and
            // g >= 0 forces rho >= p/q; convergents alternate around theta.
            return Ok(if want > 0 { Verdict::Low } else { Verdict::High });
        }
    }
    Ok(Verdict::Locked)
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneDiagnostics {
    pub depth: usize,
    pub f64_iterations: usize,
    pub bigfloat_iterations: usize,
    pub bracket_width: f64,
}

/// Tune the parameter so the rotation number of F_t has the first `depth`
/// partial quotients of `cf`: nested bisection on the alternating sign
/// conditions, f64 first, then the full working precision.
pub fn tune_parameter(
    cf: &ContinuedFraction,
    depth: usize,
    precision: usize,
) -> Result<(CriticalMap, TuneDiagnostics)> {
    if depth == 0 || depth >= cf.len() {
        return Err(Error::TuneDepthUnreachable {
            depth,
            msg: format!("only {} partial quotients available", cf.len()),
        });
    }
    if cf.deepest_level_with_q_below(MAX_RETURN_TIME) < depth {
        return Err(Error::TuneDepthUnreachable {
            depth,
            msg: format!("return time q_{depth} exceeds the {MAX_RETURN_TIME} iteration policy"),
        });
    }
    // Phase 1: f64 bisection.
    let (mut lo_f, mut hi_f) = (0.0f64, 1.0f64);
    let mut f64_iters = 0usize;
    let mut candidate: Option<f64> = None;
    for _ in 0..200 {
        f64_iters += 1;
        let mid = 0.5 * (lo_f + hi_f);
        match classify_f64(mid, cf, depth, 64)? {
            Verdict::Low => lo_f = mid,
            Verdict::High => hi_f = mid,
            Verdict::Locked => {
                candidate = Some(mid);
                break;
            }
        }
        if hi_f - lo_f < 1e-14 {
            break;
        }
    }
    if let Some(t) = candidate {
        let map = CriticalMap::from_f64(t, precision)?;
        if classify_bf(&map, cf, depth)? == Verdict::Locked {
            return Ok((
                map,
                TuneDiagnostics {
                    depth,
                    f64_iterations: f64_iters,
                    bigfloat_iterations: 0,
                    bracket_width: hi_f - lo_f,
                },
            ));
        }
    }
    // Phase 2: high-precision bisection from a slightly widened bracket.
    let pad = 64.0 * f64::EPSILON * (1.0 + hi_f.abs());
    let mut lo = bf_from_f64((lo_f - pad).max(0.0), precision);
    let mut hi = bf_from_f64((hi_f + pad).min(1.0), precision);
    // Re-validate the endpoints; fall back to the full interval if the f64
    // phase was misled by roundoff.
    {
        let lo_map = CriticalMap::new(lo.clone(), precision)?;
        let hi_map = CriticalMap::new(hi.clone(), precision)?;
        if classify_bf(&lo_map, cf, depth)? != Verdict::Low
            || classify_bf(&hi_map, cf, depth)? != Verdict::High
        {
            lo = bf_from_f64(0.0, precision);
            hi = bf_from_f64(1.0, precision);
        }
    }
    let mut width = bf_to_f64(&hi.sub(&lo, precision, RM));
    for iter in 0..precision + 16 {
        let mid = lo.add(&hi, precision, RM).mul(&bf_from_f64(0.5, precision), precision, RM);
        let map = CriticalMap::new(mid.clone(), precision)?;
        match classify_bf(&map, cf, depth)? {
            Verdict::Low => lo = mid,
            Verdict::High => hi = mid,
            Verdict::Locked => {
                return Ok((
                    map,
                    TuneDiagnostics {
                        depth,
                        f64_iterations: f64_iters,
                        bigfloat_iterations: iter + 1,
                        bracket_width: width,
                    },
                ));
            }
        }
        width *= 0.5;
    }
    Err(Error::TuneDepthUnreachable {
        depth,
        msg: format!("bisection exhausted {} bits without locking", precision + 16),
    })
}

// ---------------------------------------------------------------------------
// Partitions and diagnostics
// ---------------------------------------------------------------------------

/// The level-n dynamical partition of the tuned map: the q_n orbit points
/// F^j(0) mod 1 in circle order, with interval kinds inherited from the
/// rotation side through the cyclic-order isomorphism.
#[derive(Debug, Clone)]
pub struct CriticalPartition {
    pub level: usize,
    pub points: Vec<f64>,
    pub orbit_index: Vec<u64>,
    pub kinds: Vec<IntervalKind>,
}

impl CriticalPartition {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn interval_length(&self, i: usize) -> f64 {
        if i + 1 < self.points.len() {
            self.points[i + 1] - self.points[i]
        } else {
            1.0 + self.points[0] - self.points[self.points.len() - 1]
        }
    }
}

/// Check that the critical orbit visits the circle in the order of the
/// rotation orbit: F^j(0) sorted ascending must carry the same index
/// sequence as the points j*theta, i.e. the reflected order of the
/// rotation-partition points -j*theta.
pub fn verify_cyclic_order(critical: &CriticalPartition, rotation: &RotationPartition) -> bool {
    let n = critical.n_points();
    if n != rotation.n_points() {
        return false;
    }
    // Reflect: ascending order of {j theta} = reversed ascending order of
    // {-j theta}.
    let mut reflected: Vec<u64> = rotation.orbit_index.iter().rev().copied().collect();
    let z = match reflected.iter().position(|&j| j == 0) {
        Some(z) => z,
        None => return false,
    };
    reflected.rotate_left(z);
    let mut crit = critical.orbit_index.clone();
    let z = match crit.iter().position(|&j| j == 0) {
        Some(z) => z,
        None => return false,
    };
    crit.rotate_left(z);
    crit == reflected
}

/// Materialize the level-n partition of the tuned map (q_n <= cap).
pub fn partition_critical(
    map: &CriticalMap,
    cf: &ContinuedFraction,
    n: usize,
    cap: u128,
) -> Result<CriticalPartition> {
    let (q, _) = qp_u64(cf, n)?;
    if q as u128 > cap.min(MAX_RETURN_TIME) {
        return Err(Error::ResolutionInsufficient(format!(
            "q_{n} = {q} exceeds cap"
        )));
    }
    let (pts, _) = map.orbit(q);
    let mut idx: Vec<(f64, u64)> = pts
        .iter()
        .enumerate()
        .map(|(j, x)| (bf_to_f64(x), j as u64))
        .collect();
    idx.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in idx.windows(2) {
        if w[1].0 - w[0].0 <= 0.0 {
            return Err(Error::ResolutionInsufficient(format!(
                "orbit points at level {n} not distinct in f64"
            )));
        }
    }
    let points: Vec<f64> = idx.iter().map(|&(x, _)| x).collect();
    let orbit_index: Vec<u64> = idx.iter().map(|&(_, j)| j).collect();
    // Inherit interval kinds from the rotation side through the reflection
    // j theta <-> -j theta.
    let rp = partition_rotation(cf, n, cap)?;
    let crit = CriticalPartition { level: n, points, orbit_index, kinds: Vec::new() };
    if !verify_cyclic_order(&crit, &rp) {
        return Err(Error::NodeMismatch(format!(
            "critical orbit at level {n} is not in rotation order"
        )));
    }
    let mut pos_of: Vec<usize> = vec![0; rp.n_points()];
    for (i, &j) in rp.orbit_index.iter().enumerate() {
        pos_of[j as usize] = i;
    }
    let mut kinds = Vec::with_capacity(crit.n_points());
    for i in 0..crit.n_points() {
        let j_right = crit.orbit_index[(i + 1) % crit.n_points()];
        // The critical interval [F^{j_i}(0), F^{j_{i+1}}(0)] reflects onto
        // the rotation interval whose left endpoint is -j_{i+1} theta.
        kinds.push(rp.kinds[pos_of[j_right as usize]]);
    }
    Ok(CriticalPartition { kinds, ..crit })
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriRow {
    pub level: usize,
    /// max ratio of adjacent interval lengths at this level.
    pub c_adj: f64,
    /// closest-return distance |F^{q_n}(0) - p_n|.
    pub closest_return: f64,
}

/// Real a-priori diagnostics: adjacent-interval comparability constant,
/// per-level geometric contraction, and the worst level-to-level ratio.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriReport {
    pub rows: Vec<AprioriRow>,
    /// sup over levels of the adjacent-interval ratio.
    pub c_adj: f64,
    /// geometric-mean contraction rate of the closest returns.
    pub eps_hat: f64,
    /// worst level-to-level closest-return ratio (must stay below 1).
    pub sigma_hat: f64,
}

pub fn verify_apriori(
    map: &CriticalMap,
    cf: &ContinuedFraction,
    n_max: usize,
    cap: u128,
) -> Result<AprioriReport> {
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let part = partition_critical(map, cf, n, cap)?;
        let m = part.n_points();
        let mut c_adj = 1.0f64;
        for i in 0..m {
            let a = part.interval_length(i);
            let b = part.interval_length((i + 1) % m);
            c_adj = c_adj.max(a / b).max(b / a);
        }
        let (q, p) = qp_u64(cf, n)?;
        let closest = bf_to_f64(&map.signed_return(q, p)).abs();
        rows.push(AprioriRow { level: n, c_adj, closest_return: closest });
    }
    let c_adj = rows.iter().map(|r| r.c_adj).fold(1.0, f64::max);
    let mut sigma_hat: f64 = 0.0;
    for w in rows.windows(2) {
        sigma_hat = sigma_hat.max(w[1].closest_return / w[0].closest_return);
    }
    let eps_hat = if rows.len() >= 2 {
        (rows[rows.len() - 1].closest_return / rows[0].closest_return)
            .powf(1.0 / (rows.len() - 1) as f64)
    } else {
        f64::NAN
    };
    Ok(AprioriReport { rows, c_adj, eps_hat, sigma_hat })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicRow {
    pub parent_index: usize,
    pub k: usize,
    pub r_min: f64,
    pub r_max: f64,
}

/// Almost-parabolic bridge diagnostics at level n: inside each parent
/// interval subdivided by the level n+1 points t_0 < ... < t_k,
/// r_j = (t_j - t_{j-1}) min{j, k+1-j}^2 / (t_k - t_0) should stay within a
/// uniform band.
#[derive(Debug, Clone, Serialize)]
pub struct ParabolicReport {
    pub level: usize,
    pub rows: Vec<ParabolicRow>,
    pub r_min: f64,
    pub r_max: f64,
}

pub fn verify_almost_parabolic(
    map: &CriticalMap,
    cf: &ContinuedFraction,
    n: usize,
    cap: u128,
) -> Result<ParabolicReport> {
    let parent = partition_critical(map, cf, n, cap)?;
    let child = partition_critical(map, cf, n + 1, cap)?;
    let mut rows = Vec::new();
    let (mut r_min, mut r_max) = (f64::MAX, 0.0f64);
    let m = parent.n_points();
    for i in 0..m {
        let left = parent.points[i];
        let right = if i + 1 < m { parent.points[i + 1] } else { 1.0 + parent.points[0] };
        // Child points inside (unwrap the final interval).
        let mut ts = vec![left];
        for &c in &child.points {
            for cand in [c, c + 1.0] {
                if cand > left + 1e-15 && cand < right - 1e-15 {
                    ts.push(cand);
                }
            }
        }
        ts.push(right);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = ts.len() - 1;
        if k < 2 {
            continue;
        }
        let total = ts[k] - ts[0];
        let mut lo = f64::MAX;
        let mut hi = 0.0f64;
        for j in 1..=k {
            let w = (j.min(k + 1 - j) as f64).powi(2);
            let r = (ts[j] - ts[j - 1]) * w / total;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        r_min = r_min.min(lo);
        r_max = r_max.max(hi);
        rows.push(ParabolicRow { parent_index: i, k, r_min: lo, r_max: hi });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientTail(format!(
            "no parent at level {n} has at least two children"
        )));
    }
    Ok(ParabolicReport { level: n, rows, r_min, r_max })
}
