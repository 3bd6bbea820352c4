//! Continued-fraction arithmetic: partial quotients, convergents, the
//! Fibonacci-adapted sequence `b_k`, arithmetic-class statistics and the
//! example sequence generators.
//!
//! All integer arithmetic is exact big-integer arithmetic; the underlying
//! irrational is only ever represented by an interval of rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Closed rational interval, used as a certified enclosure of a real number.
#[derive(Debug, Clone, PartialEq)]
pub struct RatInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RatInterval {
    pub fn point(x: BigRational) -> Self {
        Self { lo: x.clone(), hi: x }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        assert!(lo <= hi, "interval endpoints out of order");
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(2.into())
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.midpoint())
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    // BigRational::to_f64 loses precision for huge numer/denom pairs, so
    // reduce each side to ~80 bits independently and restore the exponent.
    // A shared shift would zero out a tiny ratio (numer far shorter than
    // denom) long before f64 underflows.
    let n = r.numer();
    let d = r.denom();
    if n.is_zero() {
        return 0.0;
    }
    let nshift = (n.bits() as i64 - 80).max(0);
    let dshift = (d.bits() as i64 - 80).max(0);
    let ns = (n >> nshift).to_f64().unwrap_or(0.0);
    let ds = (d >> dshift).to_f64().unwrap_or(f64::INFINITY);
    if ds == 0.0 {
        return f64::INFINITY * if n.is_negative() { -1.0 } else { 1.0 };
    }
    let exp = nshift - dshift;
    if exp.abs() > i32::MAX as i64 {
        return if exp > 0 { f64::INFINITY } else { 0.0 } * ns.signum();
    }
    (ns / ds) * 2f64.powi(exp as i32)
}

/// A finite continued-fraction expansion `[a_1, ..., a_N]` of a number in
/// (0, 1), together with its convergents and a certified enclosure of every
/// irrational sharing this prefix.
#[derive(Debug, Clone)]
pub struct ContinuedFraction {
    terms: Vec<u128>,
    /// `(p_k, q_k)` for k = 0..N with `(p_0, q_0) = (0, 1)`.
    convergents: Vec<(BigInt, BigInt)>,
    value_bounds: RatInterval,
}

impl ContinuedFraction {
    /// Build from partial quotients `a_1..a_N` (all >= 1).
    pub fn from_terms(terms: &[u128]) -> Self {
        assert!(!terms.is_empty(), "need at least one partial quotient");
        assert!(terms.iter().all(|&a| a >= 1), "partial quotients must be >= 1");
        let mut conv: Vec<(BigInt, BigInt)> = Vec::with_capacity(terms.len() + 1);
        // (p_{-1}, q_{-1}) = (1, 0), (p_0, q_0) = (0, 1)
        let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
        let (mut p, mut q) = (BigInt::zero(), BigInt::one());
        conv.push((p.clone(), q.clone()));
        for &a in terms {
            let ab = BigInt::from(a);
            let p_next = &ab * &p + &p_prev;
            let q_next = &ab * &q + &q_prev;
            p_prev = std::mem::replace(&mut p, p_next);
            q_prev = std::mem::replace(&mut q, q_next);
            conv.push((p.clone(), q.clone()));
        }
        let value_bounds = enclosure_from_convergents(&conv);
        Self { terms: terms.to_vec(), convergents: conv, value_bounds }
    }

    pub fn terms(&self) -> &[u128] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `a_n` with the paper's 1-based indexing.
    pub fn a(&self, n: usize) -> u128 {
        assert!(n >= 1 && n <= self.terms.len());
        self.terms[n - 1]
    }

    /// `q_k` for k = 0..N (`q_0 = 1`).
    pub fn q(&self, k: usize) -> &BigInt {
        &self.convergents[k].1
    }

    pub fn p(&self, k: usize) -> &BigInt {
        &self.convergents[k].0
    }

    /// Convergents `(p_k, q_k)` for k = 1..N.
    pub fn convergents(&self) -> &[(BigInt, BigInt)] {
        &self.convergents[1..]
    }

    /// Largest k such that `q_k <= cap`.
    pub fn deepest_level_with_q_below(&self, cap: u128) -> usize {
        let cap = BigInt::from(cap);
        let mut best = 0;
        for k in 0..=self.len() {
            if *self.q(k) <= cap {
                best = k;
            } else {
                break;
            }
        }
        best
    }

    /// Certified enclosure of every irrational with this expansion prefix.
    pub fn value_bounds(&self) -> &RatInterval {
        &self.value_bounds
    }
}

fn enclosure_from_convergents(conv: &[(BigInt, BigInt)]) -> RatInterval {
    let n = conv.len() - 1;
    let (p_n, q_n) = &conv[n];
    let a = BigRational::new(p_n.clone(), q_n.clone());
    // The other endpoint is [a_1, ..., a_N + 1] = (p_N + p_{N-1})/(q_N + q_{N-1}).
    let (p_m, q_m) = &conv[n - 1];
    let b = BigRational::new(p_n + p_m, q_n + q_m);
    if a <= b {
        RatInterval::new(a, b)
    } else {
        RatInterval::new(b, a)
    }
}

/// Continued-fraction expansion of a certified real in (0, 1) by the interval
/// Euclidean algorithm. Fails with `PrecisionExhausted` as soon as the
/// enclosure straddles a term boundary.
pub fn cf_expand(x: &RatInterval, n_terms: usize) -> Result<ContinuedFraction> {
    assert!(n_terms >= 1);
    if x.lo <= BigRational::zero() || x.hi >= BigRational::one() {
        return Err(Error::PrecisionExhausted(format!(
            "input interval [{}, {}] not inside (0,1)",
            x.lo, x.hi
        )));
    }
    let mut lo = x.lo.clone();
    let mut hi = x.hi.clone();
    let mut terms = Vec::with_capacity(n_terms);
    for k in 0..n_terms {
        if lo.is_zero() || hi.is_zero() {
            return Err(Error::PrecisionExhausted(format!(
                "expansion terminated after {k} terms (rational input)"
            )));
        }
        // 1/x maps [lo, hi] to [1/hi, 1/lo].
        let inv_lo = hi.recip();
        let inv_hi = lo.recip();
        let a_lo = inv_lo.floor();
        let a_hi = inv_hi.floor();
        // An exact endpoint hit (inv_hi integral) still determines the term
        // when the interval is a point; otherwise the floor must agree.
        if a_lo != a_hi && !(inv_lo == inv_hi) {
            return Err(Error::PrecisionExhausted(format!(
                "term {} undetermined: 1/x in [{}, {}]",
                k + 1,
                rat_to_f64(&inv_lo),
                rat_to_f64(&inv_hi)
            )));
        }
        let a = a_lo.to_integer();
        let a_u = a.to_u128().ok_or_else(|| {
            Error::PrecisionExhausted(format!("term {} exceeds u128", k + 1))
        })?;
        if a_u < 1 {
            return Err(Error::PrecisionExhausted("term below 1".into()));
        }
        terms.push(a_u);
        let af = BigRational::from_integer(a);
        let new_lo = &inv_lo - &af;
        let new_hi = &inv_hi - &af;
        lo = new_lo;
        hi = new_hi;
        if lo.is_negative() {
            lo = BigRational::zero();
        }
    }
    Ok(ContinuedFraction::from_terms(&terms))
}

/// Exact enclosure of all irrationals with the given prefix; the interval has
/// width `1/(q_N (q_N + q_{N-1}))`.
pub fn theta_from_cf(cf: &ContinuedFraction) -> RatInterval {
    cf.value_bounds().clone()
}

/// The Fibonacci-adapted sequence: `b_k = a_k` when `a_k != 1`, and within a
/// maximal run of ones of length `l` ending at `k`, `b_k = F_l / F_{l-1}`
/// (with `F_0 = F_1 = 1`).
#[derive(Debug, Clone)]
pub struct AdaptedSequence {
    pub terms: Vec<BigRational>,
}

pub fn adapted_sequence_b(cf: &ContinuedFraction) -> AdaptedSequence {
    let n = cf.len();
    let mut terms = Vec::with_capacity(n);
    // Fibonacci with F_0 = F_1 = 1.
    let mut fib: Vec<BigInt> = vec![BigInt::one(), BigInt::one()];
    let mut run = 0usize;
    for k in 1..=n {
        if cf.a(k) != 1 {
            run = 0;
            terms.push(BigRational::from_integer(BigInt::from(cf.a(k))));
        } else {
            run += 1;
            while fib.len() <= run {
                let f = &fib[fib.len() - 1] + &fib[fib.len() - 2];
                fib.push(f);
            }
            terms.push(BigRational::new(fib[run].clone(), fib[run - 1].clone()));
        }
    }
    AdaptedSequence { terms }
}

#[derive(Debug, Clone, Serialize)]
pub struct QnBoundsRow {
    pub n: usize,
    pub prod_b: String,
    pub q_n: String,
    pub prod_a_plus_1: String,
    /// q_n / prod b_k (>= 1 when the lower bound holds).
    pub lower_tightness: f64,
    /// prod (a_k + 1) / q_n (>= 1 when the upper bound holds).
    pub upper_tightness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QnBoundsReport {
    pub rows: Vec<QnBoundsRow>,
}

/// Check `prod b_k <= q_n <= prod (a_k + 1)` at every level.
pub fn check_qn_bounds(cf: &ContinuedFraction) -> Result<QnBoundsReport> {
    let b = adapted_sequence_b(cf);
    let mut prod_b = BigRational::one();
    let mut prod_a1 = BigInt::one();
    let mut rows = Vec::with_capacity(cf.len());
    for n in 1..=cf.len() {
        prod_b *= &b.terms[n - 1];
        prod_a1 *= BigInt::from(cf.a(n) + 1);
        let qn = BigRational::from_integer(cf.q(n).clone());
        if prod_b > qn {
            return Err(Error::InvariantViolation(format!(
                "prod b_k = {} exceeds q_{} = {}",
                prod_b, n, cf.q(n)
            )));
        }
        if *cf.q(n) > prod_a1 {
            return Err(Error::InvariantViolation(format!(
                "q_{} = {} exceeds prod (a_k + 1) = {}",
                n,
                cf.q(n),
                prod_a1
            )));
        }
        rows.push(QnBoundsRow {
            n,
            prod_b: prod_b.to_string(),
            q_n: cf.q(n).to_string(),
            prod_a_plus_1: prod_a1.to_string(),
            lower_tightness: rat_to_f64(&(&qn / &prod_b)),
            upper_tightness: rat_to_f64(&BigRational::new(prod_a1.clone(), cf.q(n).clone())),
        });
    }
    Ok(QnBoundsReport { rows })
}

/// Arithmetic classes of rotation numbers, ordered by inclusion
/// BT ⊂ PZ ⊂ A ⊂ PZ_{1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ClassId {
    /// Bounded type: sup a_n.
    Bt,
    /// sup log a_n / sqrt(n).
    Pz,
    /// sup log a_n / n^{1/2 + eps}.
    PzEps(f64),
    /// sup log^2 a_{n+1} / sum_{k<=n} log(a_k + 1).
    A,
    /// Strong David side: sup log a_n / sqrt(log n), n >= 2.
    Sd,
    /// Finite distortion with gauge v: sup log^2 a_n / (n v(n)).
    Fd,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassStatistic {
    pub class_id: ClassId,
    /// Finite-data sup of the defining ratio. Class membership is asymptotic,
    /// so this is evidence, never a verdict.
    pub statistic: f64,
    pub witness_index: usize,
    /// Least-squares slope of the ratio over the last half of the data; a
    /// clearly positive slope is heuristic evidence against membership.
    pub trend_slope: f64,
}

/// Finite-data class statistic. For `Fd`, `gauge` must be a positive
/// increasing concave function; it is validated on the sampled points.
pub fn classify(
    cf: &ContinuedFraction,
    class: ClassId,
    gauge: Option<&dyn Fn(f64) -> f64>,
) -> Result<ClassStatistic> {
    let n = cf.len();
    let log_a = |k: usize| (cf.a(k) as f64).ln();
    let mut ratios: Vec<(usize, f64)> = Vec::new();
    match class {
        ClassId::Bt => {
            for k in 1..=n {
                ratios.push((k, cf.a(k) as f64));
            }
        }
        ClassId::Pz => {
            for k in 1..=n {
                ratios.push((k, log_a(k) / (k as f64).sqrt()));
            }
        }
        ClassId::PzEps(eps) => {
            for k in 1..=n {
                ratios.push((k, log_a(k) / (k as f64).powf(0.5 + eps)));
            }
        }
        ClassId::A => {
            let mut denom = 0.0;
            for k in 1..n {
                denom += (cf.a(k) as f64 + 1.0).ln();
                ratios.push((k + 1, log_a(k + 1).powi(2) / denom));
            }
        }
        ClassId::Sd => {
            for k in 2..=n {
                ratios.push((k, log_a(k) / (k as f64).ln().sqrt()));
            }
        }
        ClassId::Fd => {
            let v = gauge.ok_or_else(|| Error::GaugeInvalid("FD needs a gauge v".into()))?;
            validate_gauge(v, n)?;
            for k in 1..=n {
                ratios.push((k, log_a(k).powi(2) / (k as f64 * v(k as f64))));
            }
        }
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientTail("no terms to classify".into()));
    }
    let (witness_index, statistic) = ratios
        .iter()
        .cloned()
        .fold((0usize, f64::NEG_INFINITY), |acc, (k, r)| if r > acc.1 { (k, r) } else { acc });
    let half = &ratios[ratios.len() / 2..];
    let trend_slope = slope(half);
    Ok(ClassStatistic { class_id: class, statistic, witness_index, trend_slope })
}

fn validate_gauge(v: &dyn Fn(f64) -> f64, n: usize) -> Result<()> {
    let xs: Vec<f64> = (1..=n.max(4)).map(|k| k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| v(x)).collect();
    for w in ys.windows(2) {
        if w[1] < w[0] {
            return Err(Error::GaugeInvalid("gauge is decreasing on samples".into()));
        }
    }
    // Concavity: second differences must be <= 0 (up to rounding).
    for w in ys.windows(3) {
        if w[2] - 2.0 * w[1] + w[0] > 1e-9 * (1.0 + w[1].abs()) {
            return Err(Error::GaugeInvalid("gauge fails concavity on samples".into()));
        }
    }
    Ok(())
}

fn slope(points: &[(usize, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let (sx, sy): (f64, f64) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(k, r)| (sx + k as f64, sy + r));
    let (mx, my) = (sx / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(k, r) in points {
        num += (k as f64 - mx) * (r - my);
        den += (k as f64 - mx).powi(2);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Deterministic example sequences from the end-of-section constructions.
#[derive(Debug, Clone, Serialize)]
pub enum SequenceSpec {
    /// a_n = c.
    Constant { c: u128 },
    /// a_n = floor(e^{n^{1/2+eps}}) (>= 1).
    StretchedExp { eps: f64 },
    /// a_n = floor(e^{sqrt(n log n)}) at perfect squares, 1 otherwise.
    SquareSpikes,
    /// All ones with a single spike a_m = size.
    Spike { at: usize, size: u128 },
}

pub fn generate_sequence(spec: &SequenceSpec, n_terms: usize) -> Result<Vec<u128>> {
    let mut out = Vec::with_capacity(n_terms);
    match spec {
        SequenceSpec::Constant { c } => {
            if *c < 1 {
                return Err(Error::InvariantViolation("constant term must be >= 1".into()));
            }
            out.resize(n_terms, *c);
        }
        SequenceSpec::StretchedExp { eps } => {
            if !(0.0..=0.5).contains(eps) {
                return Err(Error::InvariantViolation("eps must be in [0, 1/2]".into()));
            }
            for n in 1..=n_terms {
                let e = (n as f64).powf(0.5 + eps).exp();
                out.push(float_floor_term(e)?);
            }
        }
        SequenceSpec::SquareSpikes => {
            for n in 1..=n_terms {
                let r = (n as f64).sqrt().round() as usize;
                if r * r == n && n > 1 {
                    let e = ((n as f64) * (n as f64).ln()).sqrt().exp();
                    out.push(float_floor_term(e)?);
                } else {
                    out.push(1);
                }
            }
        }
        SequenceSpec::Spike { at, size } => {
            out.resize(n_terms, 1);
            if *at >= 1 && *at <= n_terms {
                out[*at - 1] = (*size).max(1);
            }
        }
    }
    Ok(out)
}

fn float_floor_term(x: f64) -> Result<u128> {
    if !x.is_finite() || x >= u128::MAX as f64 {
        return Err(Error::PrecisionExhausted("generated term exceeds u128".into()));
    }
    Ok((x.floor() as u128).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Independent oracle: Euclidean continued-fraction expansion of an exact
    /// rational p/q, used to freeze [DERIVED] expectations.
    fn euclid_oracle(mut p: i64, mut q: i64) -> Vec<u128> {
        // x = p/q in (0,1): terms of 1/x iterated.
        let mut out = Vec::new();
        loop {
            if p == 0 {
                break;
            }
            let a = q / p;
            out.push(a as u128);
            let r = q - a * p;
            q = p;
            p = r;
        }
        out
    }

    #[test]
    fn expand_golden_mean() {
        // (sqrt(5)-1)/2 enclosed by a tight rational interval.
        let lo = rat(6180339887, 10000000000);
        let hi = rat(6180339888, 10000000000);
        let cf = cf_expand(&RatInterval::new(lo, hi), 5).unwrap();
        assert_eq!(cf.terms(), &[1, 1, 1, 1, 1]);
    }

    #[test]
    fn expand_silver_mean() {
        let lo = rat(4142135623, 10000000000);
        let hi = rat(4142135624, 10000000000);
        let cf = cf_expand(&RatInterval::new(lo, hi), 4).unwrap();
        assert_eq!(cf.terms(), &[2, 2, 2, 2]);
    }

    #[test]
    fn expand_two_sevenths_matches_euclid_oracle() {
        assert_eq!(euclid_oracle(2, 7), vec![3, 2]);
        let cf = cf_expand(&RatInterval::point(rat(2, 7)), 2).unwrap();
        assert_eq!(cf.terms(), &[3, 2]);
    }

    #[test]
    fn expand_rational_exhausts() {
        let err = cf_expand(&RatInterval::point(rat(2, 7)), 3).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted(_)));
    }

    #[test]
    fn convergents_fibonacci() {
        let cf = ContinuedFraction::from_terms(&[1, 1, 1, 1, 1]);
        let qs: Vec<i64> = cf.convergents().iter().map(|(_, q)| q.to_i64().unwrap()).collect();
        assert_eq!(qs, vec![1, 2, 3, 5, 8]);
    }

    #[test]
    fn convergents_silver_exact_rationals() {
        // Oracle: exact rational evaluation of [2], [2,2], [2,2,2].
        let cf = ContinuedFraction::from_terms(&[2, 2, 2]);
        let pq: Vec<(i64, i64)> = cf
            .convergents()
            .iter()
            .map(|(p, q)| (p.to_i64().unwrap(), q.to_i64().unwrap()))
            .collect();
        assert_eq!(pq, vec![(1, 2), (2, 5), (5, 12)]);
    }

    #[test]
    fn convergents_single_term() {
        let cf = ContinuedFraction::from_terms(&[7]);
        assert_eq!(cf.convergents(), &[(BigInt::one(), BigInt::from(7))]);
    }

    #[test]
    fn determinant_identity_holds() {
        let cf = ContinuedFraction::from_terms(&[3, 1, 4, 1, 5, 9, 2, 6]);
        for k in 0..cf.len() {
            let det = cf.p(k + 1) * cf.q(k) - cf.p(k) * cf.q(k + 1);
            assert!(det == BigInt::one() || det == -BigInt::one());
        }
    }

    #[test]
    fn adapted_sequence_runs_of_ones() {
        let cf = ContinuedFraction::from_terms(&[2, 1, 1, 3]);
        let b = adapted_sequence_b(&cf);
        assert_eq!(
            b.terms,
            vec![rat(2, 1), rat(1, 1), rat(2, 1), rat(3, 1)]
        );
    }

    #[test]
    fn adapted_sequence_all_ones_telescopes() {
        let cf = ContinuedFraction::from_terms(&[1, 1, 1, 1]);
        let b = adapted_sequence_b(&cf);
        assert_eq!(b.terms, vec![rat(1, 1), rat(2, 1), rat(3, 2), rat(5, 3)]);
        let prod: BigRational = b.terms.iter().product();
        assert_eq!(prod, rat(5, 1)); // = F_4 = q_4
        assert_eq!(cf.q(4), &BigInt::from(5));
    }

    #[test]
    fn adapted_sequence_no_ones() {
        let cf = ContinuedFraction::from_terms(&[5, 7]);
        let b = adapted_sequence_b(&cf);
        assert_eq!(b.terms, vec![rat(5, 1), rat(7, 1)]);
    }

    #[test]
    fn qn_bounds_examples() {
        let report = check_qn_bounds(&ContinuedFraction::from_terms(&[1, 1, 1, 1])).unwrap();
        let last = report.rows.last().unwrap();
        assert_eq!(last.prod_b, "5");
        assert_eq!(last.q_n, "5");
        assert_eq!(last.prod_a_plus_1, "16");
        assert!((last.lower_tightness - 1.0).abs() < 1e-12);

        let report = check_qn_bounds(&ContinuedFraction::from_terms(&[2, 2, 2])).unwrap();
        let last = report.rows.last().unwrap();
        assert_eq!(last.prod_b, "8");
        assert_eq!(last.q_n, "12");
        assert_eq!(last.prod_a_plus_1, "27");

        let report = check_qn_bounds(&ContinuedFraction::from_terms(&[9])).unwrap();
        assert_eq!(report.rows[0].prod_b, "9");
        assert_eq!(report.rows[0].q_n, "9");
        assert_eq!(report.rows[0].prod_a_plus_1, "10");
    }

    #[test]
    fn classify_constant_ones_bt() {
        let cf = ContinuedFraction::from_terms(&vec![1u128; 50]);
        let s = classify(&cf, ClassId::Bt, None).unwrap();
        assert_eq!(s.statistic, 1.0);
    }

    #[test]
    fn classify_stretched_exp_pz_bounded_by_one() {
        let terms = generate_sequence(&SequenceSpec::StretchedExp { eps: 0.0 }, 60).unwrap();
        let cf = ContinuedFraction::from_terms(&terms);
        let s = classify(&cf, ClassId::Pz, None).unwrap();
        // log floor(e^{sqrt n}) <= sqrt n.
        assert!(s.statistic <= 1.0 + 1e-12, "statistic {}", s.statistic);
        let s = classify(&cf, ClassId::A, None).unwrap();
        assert!(s.statistic < 2.5, "A statistic {}", s.statistic);
    }

    #[test]
    fn generate_examples() {
        let ones = generate_sequence(&SequenceSpec::Constant { c: 1 }, 5).unwrap();
        assert_eq!(ones, vec![1, 1, 1, 1, 1]);
        let se = generate_sequence(&SequenceSpec::StretchedExp { eps: 0.0 }, 4).unwrap();
        assert_eq!(se[3], 7); // floor(e^2)
        let sq = generate_sequence(&SequenceSpec::SquareSpikes, 4).unwrap();
        assert_eq!(sq[2], 1);
        assert_eq!(sq[3], 10); // floor(e^{sqrt(4 ln 4)})
    }

    #[test]
    fn theta_from_cf_enclosures() {
        let cf = ContinuedFraction::from_terms(&vec![1u128; 40]);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let enc = theta_from_cf(&cf);
        assert!((enc.to_f64() - golden).abs() < 1e-10);

        let cf = ContinuedFraction::from_terms(&vec![2u128; 30]);
        let silver = 2f64.sqrt() - 1.0;
        assert!((theta_from_cf(&cf).to_f64() - silver).abs() < 1e-10);

        let cf = ContinuedFraction::from_terms(&[3, 2]);
        let enc = theta_from_cf(&cf);
        // Endpoints are [3,2] = 2/7 and [3,3] = 3/10.
        assert!(enc.contains(&rat(2, 7)));
        assert!(enc.contains(&rat(3, 10)));
        assert_eq!(enc.width(), rat(3, 10) - rat(2, 7));
    }

    #[test]
    fn roundtrip_expand_theta() {
        for terms in [vec![1u128, 2, 3, 4], vec![5, 1, 1, 9, 2], vec![2u128; 12]] {
            let cf = ContinuedFraction::from_terms(&terms);
            let enc = theta_from_cf(&cf);
            let mid = enc.midpoint();
            // Shrink to a point interval strictly inside the enclosure.
            let back = cf_expand(&RatInterval::point(mid), terms.len()).unwrap();
            assert_eq!(back.terms(), &terms[..]);
        }
    }

    #[test]
    fn fd_gauge_validation() {
        let cf = ContinuedFraction::from_terms(&[2, 3, 4]);
        let bad = |x: f64| -x;
        assert!(matches!(
            classify(&cf, ClassId::Fd, Some(&bad)),
            Err(Error::GaugeInvalid(_))
        ));
        let good = |x: f64| 1.0 + x.ln_1p();
        assert!(classify(&cf, ClassId::Fd, Some(&good)).is_ok());
    }
}
