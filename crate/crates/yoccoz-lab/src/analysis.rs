//! Dilatation-field analysis: the synthetic deep tier over the class
//! substitution dynamics, stratified field sampling, Horvitz-Thompson tail
//! areas with confidence radii, David / strong-David / finite-distortion
//! gauge fits, the main-theorem harness, arithmetic-class inclusion reports,
//! and the approximant quasisymmetry experiment.
//!
//! Two experiment tiers are supported: a shallow tier over materialized
//! grids (`sample_field_grids`) and a deep synthetic tier
//! (`synthetic_tier` + `sample_field`) where cells are never enumerated.
//! The synthetic tier exploits two structural facts: at level n every
//! interval has one of two lengths (single / union), and the normalized
//! geometry of a cell depends only on its kind class. Each (level, class)
//! pair therefore contributes a single representative cell pair whose
//! dilatation field is shared by all of its (possibly astronomically many)
//! congruent copies; aggregate areas come from the class counts.

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basemap::{BaseMap, PFast};
use crate::cellmap::{cell_sup_dilatation, yoccoz_cell_map, CellMap, DilatationMode};
use crate::cf::{classify, generate_sequence, ClassId, ClassStatistic, ContinuedFraction,
                SequenceSpec};
use crate::error::{Error, Result};
use crate::extension::strip_shear_dilatation;
use crate::grid::{build_grid, Cell, CellKind, Grid, GridPair, PiecewiseAffine};
use crate::rotation::{child_pattern, class_counts, closest_return_lengths, IntervalKind,
                      KindClass, ALL_CLASSES};

type C64 = Complex64;

// ---------------------------------------------------------------------------
// Almost-parabolic subdivision law
// ---------------------------------------------------------------------------

/// Normalized almost-parabolic child widths w_j proportional to
/// 1/min{j, k+1-j}^2, j = 1..k.
pub fn parabolic_weights(k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=k)
        .map(|j| {
            let m = j.min(k + 1 - j) as f64;
            1.0 / (m * m)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Cumulative nodes of the almost-parabolic subdivision of [0, 1]
/// (length k + 1, endpoints exact).
pub fn parabolic_nodes(k: usize) -> Vec<f64> {
    let w = parabolic_weights(k);
    let mut nodes = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    nodes.push(0.0);
    for &wi in &w {
        acc += wi;
        nodes.push(acc);
    }
    nodes[k] = 1.0;
    nodes
}

// ---------------------------------------------------------------------------
// Synthetic representative cells
// ---------------------------------------------------------------------------

/// Geometry of one side of a representative cell, in units of the parent
/// closest-return length.
struct SideGeom {
    own: f64,
    left: f64,
    right: f64,
    widths: Vec<f64>,
    /// Width of the neighbor child adjacent to each corner.
    left_edge: f64,
    right_edge: f64,
}

fn make_cell(level: usize, g: &SideGeom) -> Cell {
    let k = g.widths.len();
    let mut xs = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    xs.push(0.0);
    for &w in &g.widths {
        acc += w;
        xs.push(acc);
    }
    xs[k] = g.own;
    let mut bottom = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let wl = if j == 0 { g.left_edge } else { g.widths[j - 1] };
        let wr = if j == k { g.right_edge } else { g.widths[j] };
        bottom.push((xs[j], 0.5 * (wl + wr)));
    }
    let y_top = (0.5 * (g.left + g.own), 0.5 * (g.own + g.right));
    let left_flat = (bottom[0].1 - y_top.0).abs() < 1e-13;
    let right_flat = (bottom[k].1 - y_top.1).abs() < 1e-13;
    let kind = match (left_flat, right_flat) {
        (false, false) => CellKind::Quad,
        (true, false) => CellKind::TriangleLeft,
        (false, true) => CellKind::TriangleRight,
        (true, true) => CellKind::Sliver,
    };
    Cell { level, index: 0, t0: 0.0, tk: g.own, bottom, y_top, kind }
}

fn rotation_child_len(kind: IntervalKind, r1: f64, r2: f64) -> f64 {
    match kind {
        IntervalKind::Single => r1,
        IntervalKind::Union => r1 * (1.0 + r2),
    }
}

fn interval_len(kind: IntervalKind, r1: f64) -> f64 {
    match kind {
        IntervalKind::Single => 1.0,
        IntervalKind::Union => 1.0 + r1,
    }
}

/// One (level, class) stratum of the synthetic tier: a representative
/// source cell (almost-parabolic subdivision) and target cell (rotation
/// subdivision), plus the aggregate areas of all congruent copies.
#[derive(Clone, Serialize)]
pub struct Stratum {
    pub class: KindClass,
    pub count: f64,
    pub source: Cell,
    pub target: Cell,
    /// Aggregate unit-square area of the source copies.
    pub area_fwd: f64,
    /// Aggregate unit-square area of the target copies.
    pub area_inv: f64,
}

#[derive(Clone, Serialize)]
pub struct SyntheticLevel {
    pub level: usize,
    pub a_next: u128,
    /// Absolute length unit of the representative cells (beta_{n-1}).
    pub scale: f64,
    pub strata: Vec<Stratum>,
    pub area_fwd: f64,
    pub area_inv: f64,
}

#[derive(Clone, Serialize)]
pub struct SyntheticTier {
    pub depth: usize,
    pub levels: Vec<SyntheticLevel>,
    /// Area below the deepest computed polyline (per direction).
    pub unresolved_fwd: f64,
    pub unresolved_inv: f64,
    /// q_n as f64, for the inverse-side bounds (may overflow to inf).
    pub q: Vec<f64>,
}

fn build_stratum(
    class: KindClass,
    count: f64,
    level: usize,
    a_next: u128,
    r1: f64,
    r2: f64,
    scale: f64,
) -> Stratum {
    let pat = child_pattern(class.own, level, a_next);
    let left_pat = child_pattern(class.left, level, a_next);
    let right_pat = child_pattern(class.right, level, a_next);
    let k = pat.k() as usize;
    let own = interval_len(class.own, r1);
    let left = interval_len(class.left, r1);
    let right = interval_len(class.right, r1);

    let rot_widths: Vec<f64> = (0..k)
        .map(|i| rotation_child_len(pat.kind_at(i as u128), r1, r2))
        .collect();
    let target = make_cell(
        level,
        &SideGeom {
            own,
            left,
            right,
            widths: rot_widths,
            left_edge: rotation_child_len(left_pat.rightmost(), r1, r2),
            right_edge: rotation_child_len(right_pat.leftmost(), r1, r2),
        },
    );

    let par = parabolic_weights(k);
    let par_widths: Vec<f64> = par.iter().map(|w| w * own).collect();
    let wl = parabolic_weights(left_pat.k() as usize);
    let wr = parabolic_weights(right_pat.k() as usize);
    let source = make_cell(
        level,
        &SideGeom {
            own,
            left,
            right,
            widths: par_widths,
            left_edge: left * wl[wl.len() - 1],
            right_edge: right * wr[0],
        },
    );

    let area_fwd = count * scale * scale * source.area();
    let area_inv = count * scale * scale * target.area();
    Stratum { class, count, source, target, area_fwd, area_inv }
}

/// Area under the bottom polyline of a cell (the unresolved band below the
/// deepest computed level), in cell units.
fn under_bottom_area(cell: &Cell) -> f64 {
    cell.bottom
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Build the synthetic deep tier for levels 0..=depth. Needs depth + 2
/// partial quotients.
pub fn synthetic_tier(cf: &ContinuedFraction, depth: usize) -> Result<SyntheticTier> {
    if cf.len() < depth + 2 {
        return Err(Error::PrecisionExhausted(format!(
            "synthetic tier to depth {depth} needs {} partial quotients, got {}",
            depth + 2,
            cf.len()
        )));
    }
    let beta = closest_return_lengths(cf, depth + 1)?;
    let counts = class_counts(cf, depth.max(1))?;
    let mut levels = Vec::with_capacity(depth + 1);
    for n in 0..=depth {
        let a_next = cf.a(n + 1);
        let scale = if n == 0 { 1.0 } else { beta.beta_f64(n - 1) };
        let r1 = if n == 0 {
            beta.beta_f64(0)
        } else {
            beta.beta_f64(n) / beta.beta_f64(n - 1)
        };
        let r2 = beta.beta_f64(n + 1) / beta.beta_f64(n);
        let mut strata = Vec::new();
        if n == 0 {
            // The level-0 circle: one interval whose neighbors wrap onto
            // itself.
            use IntervalKind::Single;
            strata.push(build_stratum(
                KindClass { own: Single, left: Single, right: Single },
                1.0,
                0,
                a_next,
                r1,
                r2,
                scale,
            ));
        } else {
            for (ci, &c) in counts.counts[n].iter().enumerate() {
                if c > 0.0 {
                    strata.push(build_stratum(ALL_CLASSES[ci], c, n, a_next, r1, r2, scale));
                }
            }
        }
        let area_fwd = strata.iter().map(|s| s.area_fwd).sum();
        let area_inv = strata.iter().map(|s| s.area_inv).sum();
        levels.push(SyntheticLevel { level: n, a_next, scale, strata, area_fwd, area_inv });
    }
    let last = &levels[depth];
    let unresolved_fwd = last
        .strata
        .iter()
        .map(|s| s.count * last.scale * last.scale * under_bottom_area(&s.source))
        .sum();
    let unresolved_inv = last
        .strata
        .iter()
        .map(|s| s.count * last.scale * last.scale * under_bottom_area(&s.target))
        .sum();
    let q: Vec<f64> = (0..=depth + 1)
        .map(|k| cf.q(k).to_f64().unwrap_or(f64::INFINITY))
        .collect();
    Ok(SyntheticTier { depth, levels, unresolved_fwd, unresolved_inv, q })
}

// ---------------------------------------------------------------------------
// Field sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// Dilatation of the extension, weighted by source-side area.
    Forward,
    /// Dilatation of the inverse, weighted by target-side area (evaluated
    /// via the inversion symmetry K(f^{-1}, f(z)) = K(f, z)).
    Inverse,
}

#[derive(Debug, Clone, Serialize)]
pub struct DilatationSample {
    /// Coordinates inside the representative cell (cell units for the
    /// synthetic tier, unit-square coordinates for materialized grids).
    pub x: f64,
    pub y: f64,
    pub level: usize,
    pub k_dil: f64,
    /// Unit-square area this sample represents.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSamples {
    pub direction: Direction,
    pub samples: Vec<DilatationSample>,
    /// Total area of the strata that yielded samples; weights sum to this.
    pub sampled_area: f64,
    /// Area below the deepest computed polyline.
    pub unresolved: f64,
    pub seam_skipped: usize,
}

fn stratum_rng(seed: u64, level: usize, index: usize) -> ChaCha8Rng {
    let s = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((level as u64) << 20)
        .wrapping_add(index as u64 + 1);
    ChaCha8Rng::seed_from_u64(s)
}

/// Draw up to `want` dilatation values from one cell map; returns
/// (x, y, K) triples in source-cell coordinates and the seam-skip count.
fn sample_one_map(
    map: &CellMap<'_>,
    direction: Direction,
    want: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<(f64, f64, f64)>, usize) {
    let mut out = Vec::with_capacity(want);
    let mut skipped = 0usize;
    let cell = match direction {
        Direction::Forward => &map.source,
        Direction::Inverse => &map.target,
    };
    let y_lo = cell.bottom.iter().map(|&(_, y)| y).fold(f64::MAX, f64::min);
    let y_hi = cell.y_top.0.max(cell.y_top.1);
    let pad = 1e-7 * (y_hi - y_lo).max(cell.base_len());
    let mut attempts = 0usize;
    let cap = 80 * want + 200;
    while out.len() < want && attempts < cap {
        attempts += 1;
        let x = rng.gen_range(cell.t0..cell.tk);
        let y = rng.gen_range(y_lo..y_hi);
        if y <= cell.g2(x) + pad || y >= cell.g1(x) - pad {
            continue;
        }
        let w = C64::new(x, y);
        let z = match direction {
            Direction::Forward => w,
            Direction::Inverse => match map.apply_inverse(w) {
                Ok(z) if map.source.contains(z.re, z.im) => z,
                _ => {
                    skipped += 1;
                    continue;
                }
            },
        };
        match map.dilatation_at(z, DilatationMode::Analytic) {
            Ok(k) => out.push((w.re, w.im, k.max(1.0))),
            Err(_) => skipped += 1,
        }
    }
    (out, skipped)
}

/// Stratified sampling of the dilatation field of a synthetic tier.
/// Per-level budgets are proportional to strip area with a floor of 10
/// samples per nonempty level (so the budget is a lower bound, not an
/// exact count).
pub fn sample_field(
    tier: &SyntheticTier,
    base: &dyn BaseMap,
    direction: Direction,
    budget: usize,
    seed: u64,
) -> Result<FieldSamples> {
    let area_of = |s: &Stratum| match direction {
        Direction::Forward => s.area_fwd,
        Direction::Inverse => s.area_inv,
    };
    let live_level_areas: Vec<f64> = tier
        .levels
        .iter()
        .map(|lv| {
            lv.strata
                .iter()
                .filter(|s| !s.source.is_empty_cell() && !s.target.is_empty_cell())
                .map(&area_of)
                .filter(|a| a.is_finite())
                .sum()
        })
        .collect();
    let total: f64 = live_level_areas.iter().sum();
    let nonempty = live_level_areas.iter().filter(|&&a| a > 0.0).count();
    if nonempty == 0 {
        return Err(Error::ResolutionInsufficient("no nonempty strata".into()));
    }
    if budget < 10 * nonempty {
        return Err(Error::BudgetTooSmall(format!(
            "budget {budget} cannot give 10 samples to each of {nonempty} levels"
        )));
    }
    let mut samples = Vec::new();
    let mut sampled_area = 0.0;
    let mut seam_skipped = 0usize;
    for (lv, &level_area) in tier.levels.iter().zip(&live_level_areas) {
        if level_area <= 0.0 {
            continue;
        }
        // Hybrid allocation: half the budget proportional to strip area,
        // half split equally across nonempty levels. Pure proportional
        // allocation starves the deep strips that carry the large-K tail;
        // their areas are tiny, so the extra samples barely cost the head.
        let level_budget = ((0.5 * budget as f64 * level_area / total
            + 0.5 * budget as f64 / nonempty as f64)
            as usize)
            .max(10);
        for (si, stratum) in lv.strata.iter().enumerate() {
            if stratum.source.is_empty_cell() || stratum.target.is_empty_cell() {
                continue;
            }
            let a = area_of(stratum);
            if a <= 0.0 {
                continue;
            }
            let want = ((level_budget as f64 * a / level_area) as usize).max(4);
            let map = match yoccoz_cell_map(&stratum.source, &stratum.target, base) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let mut rng = stratum_rng(seed, lv.level, si);
            let (pts, sk) = sample_one_map(&map, direction, want, &mut rng);
            seam_skipped += sk;
            if pts.is_empty() {
                continue;
            }
            let w = a / pts.len() as f64;
            sampled_area += a;
            for (x, y, k) in pts {
                samples.push(DilatationSample { x, y, level: lv.level, k_dil: k, weight: w });
            }
        }
    }
    let unresolved = match direction {
        Direction::Forward => tier.unresolved_fwd,
        Direction::Inverse => tier.unresolved_inv,
    };
    Ok(FieldSamples { direction, samples, sampled_area, unresolved, seam_skipped })
}

/// Stratified sampling over materialized grids (the shallow tier); cells of
/// levels 0..=depth-1 are enumerated, with per-cell budgets proportional to
/// cell area.
pub fn sample_field_grids(
    pair: &GridPair,
    base: &dyn BaseMap,
    direction: Direction,
    depth: usize,
    budget: usize,
    seed: u64,
) -> Result<FieldSamples> {
    let n_levels = depth.min(pair.gamma.n_levels().saturating_sub(2)) + 1;
    if budget < 10 * n_levels {
        return Err(Error::BudgetTooSmall(format!(
            "budget {budget} cannot give 10 samples to each of {n_levels} levels"
        )));
    }
    // Collect cells and areas per level.
    let mut per_level: Vec<Vec<(Cell, Cell, f64)>> = Vec::new();
    for n in 0..n_levels {
        let mut cells = Vec::new();
        for i in 0..pair.gamma.n_cells_at(n) {
            let (src, dst) = pair.correspond(n, i)?;
            if src.is_empty_cell() || dst.is_empty_cell() {
                continue;
            }
            let a = match direction {
                Direction::Forward => src.area(),
                Direction::Inverse => dst.area(),
            };
            cells.push((src, dst, a));
        }
        per_level.push(cells);
    }
    let level_areas: Vec<f64> =
        per_level.iter().map(|cs| cs.iter().map(|c| c.2).sum()).collect();
    let total: f64 = level_areas.iter().sum();
    if total <= 0.0 {
        return Err(Error::ResolutionInsufficient("all cells empty".into()));
    }
    let mut samples = Vec::new();
    let mut sampled_area = 0.0;
    let mut seam_skipped = 0usize;
    let mut unresolved = 0.0;
    for (n, cells) in per_level.iter().enumerate() {
        let level_area = level_areas[n];
        if level_area <= 0.0 {
            continue;
        }
        let level_budget = ((budget as f64 * level_area / total) as usize).max(10);
        for (ci, (src, dst, a)) in cells.iter().enumerate() {
            let want = ((level_budget as f64 * a / level_area) as usize).max(2);
            let map = match yoccoz_cell_map(src, dst, base) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let mut rng = stratum_rng(seed, n, ci);
            let (pts, sk) = sample_one_map(&map, direction, want, &mut rng);
            seam_skipped += sk;
            if pts.is_empty() {
                continue;
            }
            let w = a / pts.len() as f64;
            sampled_area += a;
            for (x, y, k) in pts {
                samples.push(DilatationSample { x, y, level: n, k_dil: k, weight: w });
            }
            if n + 1 == n_levels {
                unresolved += match direction {
                    Direction::Forward => under_bottom_area(src),
                    Direction::Inverse => under_bottom_area(dst),
                };
            }
        }
    }
    Ok(FieldSamples { direction, samples, sampled_area, unresolved, seam_skipped })
}

// ---------------------------------------------------------------------------
// Tail areas
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TailEstimate {
    pub k_grid: Vec<f64>,
    /// Horvitz-Thompson estimates of Area{K >= k_grid[i]}.
    pub area: Vec<f64>,
    /// Confidence radii (binomial, via the effective sample size).
    pub ci: Vec<f64>,
    pub unresolved: f64,
    pub sampled_area: f64,
}

/// Geometric K grid from 1 to just above the sample maximum.
pub fn default_k_grid(samples: &FieldSamples, n_points: usize) -> Vec<f64> {
    let kmax = samples
        .samples
        .iter()
        .map(|s| s.k_dil)
        .fold(1.0f64, f64::max);
    if kmax <= 1.0 + 1e-12 || n_points < 2 {
        return vec![1.0];
    }
    let top = (kmax * 1.001).ln();
    (0..n_points)
        .map(|i| (top * i as f64 / (n_points - 1) as f64).exp())
        .collect()
}

pub fn tail_area(samples: &FieldSamples, k_grid: &[f64]) -> Result<TailEstimate> {
    if samples.samples.is_empty() {
        return Err(Error::InsufficientTail("no samples".into()));
    }
    let w_tot: f64 = samples.samples.iter().map(|s| s.weight).sum();
    // Group samples into their sampling strata (equal weight within a
    // stratum) so the variance is the proper stratified binomial one:
    // Var(Â) = sum_s A_s^2 p_s (1 - p_s) / n_s.
    let mut groups: std::collections::BTreeMap<(usize, u64), Vec<f64>> =
        std::collections::BTreeMap::new();
    for s in &samples.samples {
        groups
            .entry((s.level, s.weight.to_bits()))
            .or_default()
            .push(s.k_dil);
    }
    for ks in groups.values_mut() {
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let mut area = Vec::with_capacity(k_grid.len());
    let mut ci = Vec::with_capacity(k_grid.len());
    for &kh in k_grid {
        let mut a = 0.0;
        let mut var = 0.0;
        for ((_, wb), ks) in &groups {
            let w = f64::from_bits(*wb);
            let n = ks.len();
            let above = n - ks.partition_point(|&k| k < kh);
            a += above as f64 * w;
            let a_s = n as f64 * w;
            // Agresti-Coull style smoothing keeps the variance positive at
            // p in {0, 1}.
            let p = (above as f64 + 0.5) / (n as f64 + 1.0);
            var += a_s * a_s * p * (1.0 - p) / n as f64;
        }
        area.push(a);
        ci.push(1.96 * var.sqrt());
    }
    // Enforce monotonicity against floating-point noise.
    for i in 1..area.len() {
        if area[i] > area[i - 1] {
            area[i] = area[i - 1];
        }
    }
    Ok(TailEstimate {
        k_grid: k_grid.to_vec(),
        area,
        ci,
        unresolved: samples.unresolved,
        sampled_area: w_tot,
    })
}

/// Smallest grid point at which the estimated tail hits zero, if it does
/// (the "bounded dilatation" verdict for bounded-type rotation numbers).
pub fn bounded_at(est: &TailEstimate) -> Option<f64> {
    est.k_grid
        .iter()
        .zip(&est.area)
        .find(|&(_, &a)| a == 0.0)
        .map(|(&k, _)| k)
}

// ---------------------------------------------------------------------------
// Gauge fits
// ---------------------------------------------------------------------------

/// Area-tail gauges of the generalized theorem: the tail law is
/// Area{K >= f(x)} <= A e^{-alpha x} with f = id (David), f = log
/// (strong David) and f(x) = x v(x) (finite distortion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gauge {
    David,
    StrongDavid,
    FiniteDistortion,
}

/// The fit abscissa x = f^{-1}(K) for a gauge.
pub fn gauge_inverse(
    gauge: Gauge,
    k: f64,
    v: Option<&dyn Fn(f64) -> f64>,
) -> Result<f64> {
    match gauge {
        Gauge::David => Ok(k),
        Gauge::StrongDavid => Ok(k.min(700.0).exp()),
        Gauge::FiniteDistortion => {
            let v = v.ok_or_else(|| {
                Error::GaugeInvalid("finite-distortion gauge needs v".into())
            })?;
            let f = |x: f64| x * v(x);
            let mut hi = 1.0;
            while f(hi) < k && hi < 1e12 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < k {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub a: f64,
    pub alpha: f64,
    /// Weighted coefficient of determination of log(area) vs the gauge
    /// abscissa.
    pub goodness: f64,
    /// Relative disagreement of the half-window slopes; a large value flags
    /// systematic curvature that a high R^2 can hide.
    pub slope_drift: f64,
    /// Signed version of the drift: positive means the decay steepens with
    /// K (super-exponential), negative means it flattens (heavier than
    /// exponential).
    pub curvature: f64,
    pub gauge: Gauge,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl TailFit {
    /// Engineering pass rule for "the tail obeys this gauge sharply".
    pub fn passes(&self) -> bool {
        self.alpha > 0.0 && self.goodness >= 0.9 && self.slope_drift <= 0.3
    }
}

fn wls_line(pts: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    // Returns (slope, intercept, weighted R^2).
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx: f64 = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my: f64 = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx < 1e-300 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| p.2 * (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - slope * p.0 - intercept;
            p.2 * r * r
        })
        .sum();
    let r2 = if ss_tot < 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Weighted least squares of log(area) against the gauge abscissa, with the
/// top decile of grid points excluded (sparse-sample noise).
pub fn fit_tail(
    est: &TailEstimate,
    gauge: Gauge,
    v: Option<&dyn Fn(f64) -> f64>,
) -> Result<TailFit> {
    // The exponential law describes the tail: drop head points still inside
    // the bulk of the area (K = O(1) carries most of it and says nothing
    // about the decay).
    let head_cut = 0.2 * est.sampled_area;
    let nonzero: Vec<(f64, f64, f64)> = est
        .k_grid
        .iter()
        .zip(est.area.iter().zip(&est.ci))
        .filter(|&(_, (&a, _))| a > 0.0 && a <= head_cut)
        .map(|(&k, (&a, &c))| (k, a, c))
        .collect();
    if nonzero.len() < 5 {
        return Err(Error::InsufficientTail(format!(
            "{} nonzero tail points (need 5)",
            nonzero.len()
        )));
    }
    let drop = nonzero.len() / 10;
    let kept = &nonzero[..nonzero.len() - drop];
    let mut pts = Vec::with_capacity(kept.len());
    for &(k, a, c) in kept {
        let x = gauge_inverse(gauge, k, v)?;
        // Clamp the precision weights so no single point dominates the fit.
        let w = (a / c.max(1e-300)).powi(2).clamp(1e-9, 1e2);
        pts.push((x, a.ln(), w));
    }
    pts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let (slope, intercept, r2) = wls_line(&pts);
    let half = pts.len() / 2;
    let curvature = if half >= 2 && pts.len() - half >= 2 && slope.abs() > 1e-300 {
        let (s_lo, _, _) = wls_line(&pts[..half]);
        let (s_hi, _, _) = wls_line(&pts[half..]);
        (s_lo - s_hi) / slope.abs()
    } else {
        0.0
    };
    Ok(TailFit {
        a: intercept.exp(),
        alpha: -slope,
        goodness: r2,
        slope_drift: curvature.abs(),
        curvature,
        gauge,
        window: (kept[0].0, kept[kept.len() - 1].0),
        n_points: pts.len(),
    })
}

/// Tail estimate of an exactly prescribed per-level law: level n carries
/// area `areas[n]` entirely at dilatation `ks[n]` (ks strictly increasing).
pub fn prescribed_tail(ks: &[f64], areas: &[f64]) -> TailEstimate {
    let n = ks.len();
    let mut area = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += areas[i];
        area[i] = acc;
    }
    let ci: Vec<f64> = area.iter().map(|&a| 1e-3 * a + 1e-300).collect();
    TailEstimate {
        k_grid: ks.to_vec(),
        area,
        ci,
        unresolved: 0.0,
        sampled_area: acc,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeMatrixRow {
    pub field: String,
    pub gauge: Gauge,
    pub alpha: f64,
    pub goodness: f64,
    pub slope_drift: f64,
    pub pass: bool,
    pub expected: bool,
}

/// The gauge cross-test: three prescribed per-level laws (sharp David,
/// sharp strong-David, sharp finite-distortion with v = sqrt), each fitted
/// under all three gauges. Each law should pass exactly its own gauge.
pub fn gauge_test_suite() -> Result<Vec<GaugeMatrixRow>> {
    let n_max = 400usize;
    let mk = |f: &dyn Fn(f64) -> f64, decay: f64| -> TailEstimate {
        let ks: Vec<f64> = (1..=n_max).map(|n| f(n as f64)).collect();
        let areas: Vec<f64> = (1..=n_max).map(|n| (-decay * n as f64).exp()).collect();
        prescribed_tail(&ks, &areas)
    };
    let sqrt_gauge = |x: f64| x.sqrt();
    let fields: Vec<(String, TailEstimate, Gauge)> = vec![
        ("david-law".into(), mk(&|n| 0.05 * n, 0.4), Gauge::David),
        ("strong-david-law".into(), mk(&|n| (1.0 + n).ln(), 0.05), Gauge::StrongDavid),
        (
            "finite-distortion-law".into(),
            mk(&|n| n * sqrt_gauge(n), 0.1),
            Gauge::FiniteDistortion,
        ),
    ];
    let mut rows = Vec::new();
    for (name, est, own_gauge) in &fields {
        for gauge in [Gauge::David, Gauge::StrongDavid, Gauge::FiniteDistortion] {
            let v: Option<&dyn Fn(f64) -> f64> = if gauge == Gauge::FiniteDistortion {
                Some(&sqrt_gauge)
            } else {
                None
            };
            let (alpha, goodness, drift, pass) = match fit_tail(est, gauge, v) {
                Ok(fit) => (fit.alpha, fit.goodness, fit.slope_drift, fit.passes()),
                Err(_) => (0.0, 0.0, f64::INFINITY, false),
            };
            rows.push(GaugeMatrixRow {
                field: name.clone(),
                gauge,
                alpha,
                goodness,
                slope_drift: drift,
                pass,
                expected: gauge == *own_gauge,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Per-cell distortion law and calibration
// ---------------------------------------------------------------------------

/// A single circle-level cell pair: almost-parabolic source subdivision vs
/// uniform target subdivision with k children.
pub fn parabolic_uniform_pair(k: usize) -> Result<(Cell, Cell)> {
    if k < 2 {
        return Err(Error::SmallK(k));
    }
    let src_pts: Vec<f64> = parabolic_nodes(k)[..k].to_vec();
    let dst_pts: Vec<f64> = (0..k).map(|j| j as f64 / k as f64).collect();
    let gs = build_grid(vec![vec![0.0], src_pts])?;
    let gd = build_grid(vec![vec![0.0], dst_pts])?;
    Ok((gs.cell(0, 0)?, gd.cell(0, 0)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionRow {
    pub a: usize,
    pub k_sup: f64,
    /// Observed sup dilatation divided by log^2 a.
    pub ratio: f64,
    pub stage_k: f64,
    pub threshold: f64,
    pub area_fraction: f64,
}

/// Empirical per-cell distortion law: sup K vs log^2 a over a sweep of
/// subdivision sizes, with the area fraction above log^2 a / c_hat.
pub fn distortion_law_sweep(
    a_values: &[usize],
    samples_per_cell: usize,
    c_hat: f64,
    seed: u64,
) -> Result<Vec<DistortionRow>> {
    let base = PFast::new();
    let mut rows = Vec::new();
    for &a in a_values {
        let (src, dst) = parabolic_uniform_pair(a)?;
        let map = yoccoz_cell_map(&src, &dst, &base)?;
        let log2a = (a as f64).ln().powi(2);
        let threshold = log2a / c_hat;
        let rep = cell_sup_dilatation(&map, seed.wrapping_add(a as u64), samples_per_cell, threshold)?;
        rows.push(DistortionRow {
            a,
            k_sup: rep.k_sup,
            ratio: rep.k_sup / log2a,
            stage_k: map.mobius_stage_dilatation(),
            threshold,
            area_fraction: rep.area_fraction_above,
        });
    }
    Ok(rows)
}

/// Measured calibration constants; the paper's constants are existential,
/// so these are versioned artifacts pinned within bands by the tests.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    /// Threshold constant: per cell, Area{K >= log^2 a / c_hat} has a
    /// definite fraction.
    pub c_hat: f64,
    /// The lower bound for that fraction on the calibration set.
    pub lambda_hat: f64,
    /// Geometric level-area decay rate (filled by the harness).
    pub sigma_hat: f64,
    /// Per-level interval-shrink rate (filled by the harness).
    pub eps_hat: f64,
}

/// Calibrate (c_hat, lambda_hat) on synthetic cells once; sigma and eps are
/// measured per run.
pub fn calibrate_cells(seed: u64) -> Result<Calibration> {
    let base = PFast::new();
    let mut c_hat = 0.0f64;
    let mut per_a = Vec::new();
    for &a in &[16usize, 64, 256] {
        let (src, dst) = parabolic_uniform_pair(a)?;
        let map = yoccoz_cell_map(&src, &dst, &base)?;
        let rep = cell_sup_dilatation(&map, seed.wrapping_add(a as u64), 1500, 1.0)?;
        // Recover the 75th percentile from a second pass: use k_sup-scaled
        // thresholds via the uniform-sample fraction.
        let log2a = (a as f64).ln().powi(2);
        // Bisect the threshold whose area fraction is 0.25.
        let mut lo = 1.0;
        let mut hi = rep.k_sup;
        for _ in 0..25 {
            let mid = 0.5 * (lo + hi);
            let r = cell_sup_dilatation(&map, seed.wrapping_add(a as u64), 1500, mid)?;
            if r.area_fraction_above > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q75 = 0.5 * (lo + hi);
        c_hat = c_hat.max(log2a / q75);
        per_a.push((a, map, log2a));
    }
    let mut lambda_hat = f64::MAX;
    for (a, map, log2a) in &per_a {
        let rep =
            cell_sup_dilatation(map, seed.wrapping_add(*a as u64), 1500, log2a / c_hat)?;
        lambda_hat = lambda_hat.min(rep.area_fraction_above);
    }
    // The observed fraction keeps drifting down slowly for a beyond the
    // calibration set; halve the minimum so lambda_hat is a floor that
    // survives extrapolation, not a point estimate.
    lambda_hat *= 0.5;
    Ok(Calibration { c_hat, lambda_hat, sigma_hat: f64::NAN, eps_hat: f64::NAN })
}

// ---------------------------------------------------------------------------
// Main-theorem harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub level: usize,
    pub a_next: u128,
    /// Forward strip area at this level.
    pub area: f64,
    /// Threshold log^2 a_{n+1} / c_hat.
    pub threshold: f64,
    /// Measured Area{K >= threshold} within the level (forward samples).
    pub area_above: f64,
    pub n_samples: usize,
    /// Smallest nonempty forward cell area at this level.
    pub floor_fwd: f64,
    /// Smallest nonempty inverse cell area at this level.
    pub floor_inv: f64,
    /// floor_inv * q_{n+1}^4 (the inverse cell-area floor statistic).
    pub inv_floor_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    pub depth: usize,
    pub budget: usize,
    pub rows: Vec<LevelRow>,
    pub calibration: Calibration,
    pub fwd_fit: Option<TailFit>,
    pub fwd_bounded_at: Option<f64>,
    pub inv_fit: Option<TailFit>,
    pub inv_bounded_at: Option<f64>,
    pub fwd_estimate: TailEstimate,
    pub inv_estimate: TailEstimate,
    pub pz: ClassStatistic,
    pub a_stat: ClassStatistic,
    /// Measured lower bound for area_above / area over well-sampled levels.
    pub lambda_measured: f64,
    /// max_n [ (alpha / (2 c_hat log(1/eps_hat))) log^2 a_{n+1} - n ]: the
    /// constant in the per-level chain n >= c log^2 a_{n+1} - const.
    pub chain_const: f64,
    pub fwd_verdict: String,
    pub inv_verdict: String,
    pub arithmetic_verdict: String,
    pub consistent: bool,
}

/// Least-squares slope of max K per level against the level: flat for
/// bounded-type rotation numbers, growing like log^2 a_{n+1} otherwise.
pub fn level_k_growth(samples: &FieldSamples) -> f64 {
    let mut per_level: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for s in &samples.samples {
        let e = per_level.entry(s.level).or_insert(1.0);
        *e = e.max(s.k_dil);
    }
    let pts: Vec<(f64, f64, f64)> = per_level
        .iter()
        .map(|(&n, &k)| (n as f64, k, 1.0))
        .collect();
    if pts.len() < 3 {
        return 0.0;
    }
    wls_line(&pts).0
}

/// Classify a measured tail: "bounded" (flat max-K profile across levels),
/// "exponential" (clean fit), "super-exponential" (fit rejected but the
/// decay steepens — still David-consistent), or "heavy" (decay flattens —
/// the David-inconsistent regime). Any finite sample makes the estimated
/// tail hit zero eventually, so `bounded` alone cannot separate bounded
/// from exponential type; the level growth of max K does.
pub fn tail_class(fit: &Option<TailFit>, bounded: Option<f64>, k_growth: f64) -> String {
    if k_growth < 0.05 && bounded.is_some() {
        return "bounded".into();
    }
    match fit {
        Some(f) if f.alpha > 0.0 && f.goodness >= 0.9 => "exponential".into(),
        Some(f) if f.alpha > 0.0 && f.curvature > 0.0 => "super-exponential".into(),
        _ => "heavy".into(),
    }
}

/// Numerical evidence for both directions of the main theorem on one
/// rotation number: forward and inverse tail fits, the per-level
/// area-proportion and cell-area-floor mechanisms, and a consistency
/// verdict against the arithmetic statistics.
pub fn theorem_main_harness(
    cf: &ContinuedFraction,
    depth: usize,
    budget: usize,
    seed: u64,
) -> Result<HarnessReport> {
    let tier = synthetic_tier(cf, depth)?;
    let base = PFast::new();
    let fwd = sample_field(&tier, &base, Direction::Forward, budget, seed)?;
    let inv = sample_field(&tier, &base, Direction::Inverse, budget, seed.wrapping_add(1))?;
    let fwd_grid = default_k_grid(&fwd, 40);
    let inv_grid = default_k_grid(&inv, 40);
    let fwd_est = tail_area(&fwd, &fwd_grid)?;
    let inv_est = tail_area(&inv, &inv_grid)?;
    let fwd_fit = fit_tail(&fwd_est, Gauge::David, None).ok();
    let inv_fit = fit_tail(&inv_est, Gauge::David, None).ok();
    let fwd_bounded = bounded_at(&fwd_est);
    let inv_bounded = bounded_at(&inv_est);

    let mut cal = calibrate_cells(seed.wrapping_add(2))?;

    let mut rows = Vec::new();
    let mut lambda_measured = f64::MAX;
    let mut floors: Vec<(usize, f64)> = Vec::new();
    for lv in &tier.levels {
        let n = lv.level;
        let log2a = (lv.a_next as f64).ln().powi(2);
        let threshold = (log2a / cal.c_hat).max(1.0);
        let lvl_samples: Vec<&DilatationSample> =
            fwd.samples.iter().filter(|s| s.level == n).collect();
        let area_above: f64 = lvl_samples
            .iter()
            .filter(|s| s.k_dil >= threshold)
            .map(|s| s.weight)
            .sum();
        let floor_fwd = lv
            .strata
            .iter()
            .filter(|s| !s.source.is_empty_cell())
            .map(|s| lv.scale * lv.scale * s.source.area())
            .fold(f64::MAX, f64::min);
        let floor_inv = lv
            .strata
            .iter()
            .filter(|s| !s.target.is_empty_cell())
            .map(|s| lv.scale * lv.scale * s.target.area())
            .fold(f64::MAX, f64::min);
        let q_next = tier.q.get(n + 1).copied().unwrap_or(f64::INFINITY);
        let inv_floor_ratio = if floor_inv.is_finite() {
            floor_inv * q_next.powi(4)
        } else {
            f64::INFINITY
        };
        if lvl_samples.len() >= 30 && lv.area_fwd > 0.0 && lv.a_next >= 4 {
            lambda_measured = lambda_measured.min(area_above / lv.area_fwd);
        }
        if floor_fwd.is_finite() && floor_fwd > 0.0 {
            floors.push((n, floor_fwd));
        }
        rows.push(LevelRow {
            level: n,
            a_next: lv.a_next,
            area: lv.area_fwd,
            threshold,
            area_above,
            n_samples: lvl_samples.len(),
            floor_fwd,
            floor_inv,
            inv_floor_ratio,
        });
    }
    if lambda_measured == f64::MAX {
        lambda_measured = 0.0;
    }
    cal.lambda_hat = cal.lambda_hat.min(lambda_measured.max(1e-6));

    // eps_hat from the geometric decay of the cell-area floors:
    // floor_n ~ eps^{2n}.
    let pts: Vec<(f64, f64, f64)> = floors
        .iter()
        .map(|&(n, f)| (n as f64, f.ln(), 1.0))
        .collect();
    let eps_hat = if pts.len() >= 2 {
        let (slope, _, _) = wls_line(&pts);
        (0.5 * slope).exp().min(0.999_999)
    } else {
        0.5
    };
    cal.eps_hat = eps_hat;
    // sigma_hat: geometric decay rate of the forward level areas.
    let area_pts: Vec<(f64, f64, f64)> = tier
        .levels
        .iter()
        .filter(|lv| lv.area_fwd > 0.0)
        .map(|lv| (lv.level as f64, lv.area_fwd.ln(), 1.0))
        .collect();
    cal.sigma_hat = if area_pts.len() >= 2 {
        let (slope, _, _) = wls_line(&area_pts);
        slope.exp().min(0.999_999)
    } else {
        0.5
    };

    let chain_const = match &fwd_fit {
        Some(fit) if fit.alpha > 0.0 && eps_hat < 1.0 => {
            let c = fit.alpha / (2.0 * cal.c_hat * (1.0 / eps_hat).ln());
            tier.levels
                .iter()
                .map(|lv| c * (lv.a_next as f64).ln().powi(2) - lv.level as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        }
        _ => f64::NAN,
    };

    let pz = classify(cf, ClassId::Pz, None)?;
    let a_stat = classify(cf, ClassId::A, None)?;
    let fwd_verdict = tail_class(&fwd_fit, fwd_bounded, level_k_growth(&fwd));
    let inv_verdict = tail_class(&inv_fit, inv_bounded, level_k_growth(&inv));
    let pz_growing = pz.trend_slope > 1e-4;
    let arithmetic_verdict = if pz_growing { "pz-growing" } else { "pz-bounded" }.to_string();
    // PZ-bounded arithmetic must show exponential-or-faster decay in the
    // David gauge (a heavy tail contradicts the theorem). Growing PZ
    // statistics force dilatations growing like log^2 a_{n+1}, so a bounded
    // field contradicts them; any decaying tail shape remains admissible.
    let consistent = if pz_growing {
        fwd_verdict != "bounded"
    } else {
        fwd_verdict != "heavy"
    };

    Ok(HarnessReport {
        depth,
        budget,
        rows,
        calibration: cal,
        fwd_fit,
        fwd_bounded_at: fwd_bounded,
        inv_fit,
        inv_bounded_at: inv_bounded,
        fwd_estimate: fwd_est,
        inv_estimate: inv_est,
        pz,
        a_stat,
        lambda_measured,
        chain_const,
        fwd_verdict,
        inv_verdict,
        arithmetic_verdict,
        consistent,
    })
}

// ---------------------------------------------------------------------------
// Inclusion report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct InclusionRow {
    pub name: String,
    pub pz: ClassStatistic,
    pub pz_eps: ClassStatistic,
    pub a_stat: ClassStatistic,
    /// sum_{k<=n} log(a_k + 1) >= n log 2, the mechanism behind PZ ⊂ A.
    pub sum_log_bound_ok: bool,
}

/// Finite-data statistics for the chain PZ = PZ_0 ⊂ A ⊂ PZ_{1/2} on a
/// family of generated sequences.
pub fn inclusion_report(n_terms: usize) -> Result<Vec<InclusionRow>> {
    let family: Vec<(String, Vec<u128>)> = vec![
        ("ones".into(), generate_sequence(&SequenceSpec::Constant { c: 1 }, n_terms)?),
        ("constant-2".into(), generate_sequence(&SequenceSpec::Constant { c: 2 }, n_terms)?),
        (
            "stretched-exp-0.0".into(),
            generate_sequence(&SequenceSpec::StretchedExp { eps: 0.0 }, n_terms)?,
        ),
        (
            "stretched-exp-0.3".into(),
            generate_sequence(&SequenceSpec::StretchedExp { eps: 0.3 }, n_terms)?,
        ),
        ("square-spikes".into(), generate_sequence(&SequenceSpec::SquareSpikes, n_terms)?),
    ];
    let mut rows = Vec::new();
    for (name, terms) in family {
        let cf = ContinuedFraction::from_terms(&terms);
        let mut acc = 0.0;
        let mut ok = true;
        for (i, &a) in terms.iter().enumerate() {
            acc += (a as f64 + 1.0).ln();
            if acc < (i + 1) as f64 * std::f64::consts::LN_2 - 1e-9 {
                ok = false;
            }
        }
        rows.push(InclusionRow {
            name,
            pz: classify(&cf, ClassId::Pz, None)?,
            pz_eps: classify(&cf, ClassId::PzEps(0.3), None)?,
            a_stat: classify(&cf, ClassId::A, None)?,
            sum_log_bound_ok: ok,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Approximant quasisymmetry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct QsReport {
    /// Level at which the witness was realized.
    pub best_m: usize,
    /// Largest partial quotient up to the tested level.
    pub a_max: u128,
    /// The witness ratio rho = (h(t_a) - h(t)) / (h(t) - h(t_0)).
    pub rho_hat: f64,
    /// rho_hat / a_max.
    pub ratio: f64,
    /// Number of subdivision points in [t_0, t) at the witness.
    pub nu: usize,
}

/// The witness ratio for matched node lists over one interval: nodes span
/// [x_0, x_k], t_a is the middle node, t = (t_0 + t_a)/2.
pub fn qs_witness_rho(src_nodes: &[f64], dst_nodes: &[f64]) -> Result<(f64, usize)> {
    let k = src_nodes.len() - 1;
    if k < 2 {
        return Err(Error::SmallK(k));
    }
    let h = PiecewiseAffine::new(src_nodes.to_vec(), dst_nodes.to_vec())?;
    let a = k / 2;
    let t0 = src_nodes[0];
    let ta = src_nodes[a];
    let t = 0.5 * (t0 + ta);
    let num = h.eval(ta) - h.eval(t);
    let den = h.eval(t) - h.eval(t0);
    if den <= 0.0 {
        return Err(Error::InvariantViolation("degenerate witness interval".into()));
    }
    let nu = src_nodes.iter().filter(|&&x| x > t0 && x < t).count();
    Ok((num / den, nu))
}

/// The quasisymmetry lower-bound experiment: for each level m <= n, build
/// the approximant restricted to one level-(m-1) interval (almost-parabolic
/// source nodes vs rotation target nodes) and evaluate the proof's witness;
/// returns the maximum over m.
pub fn approximant_qs(cf: &ContinuedFraction, n: usize) -> Result<QsReport> {
    if cf.len() < n + 2 {
        return Err(Error::PrecisionExhausted(format!(
            "qs experiment to level {n} needs {} partial quotients",
            n + 2
        )));
    }
    let beta = closest_return_lengths(cf, n)?;
    let mut best: Option<QsReport> = None;
    let mut a_max = 0u128;
    for m in 1..=n {
        let a_m = cf.a(m);
        a_max = a_max.max(a_m);
        // Subdivide a level-(m-1) union interval (the circle itself for
        // m = 1) into its level-m children.
        let pat = if m == 1 {
            child_pattern(IntervalKind::Single, 0, cf.a(1))
        } else {
            child_pattern(IntervalKind::Union, m - 1, a_m)
        };
        let k = pat.k() as usize;
        if k < 2 {
            continue;
        }
        let b_child = beta.beta_f64(m - 1);
        let b_next = beta.beta_f64(m);
        let widths: Vec<f64> = (0..k)
            .map(|i| match pat.kind_at(i as u128) {
                IntervalKind::Single => b_child,
                IntervalKind::Union => b_child + b_next,
            })
            .collect();
        let total: f64 = widths.iter().sum();
        let mut dst = Vec::with_capacity(k + 1);
        let mut acc = 0.0;
        dst.push(0.0);
        for &w in &widths {
            acc += w;
            dst.push(acc / total);
        }
        dst[k] = 1.0;
        // Renormalize the running sum exactly.
        for v in dst.iter_mut().take(k).skip(1) {
            *v *= total / total;
        }
        let src = parabolic_nodes(k);
        let (rho, nu) = qs_witness_rho(&src, &dst)?;
        if best.as_ref().map(|b| rho > b.rho_hat).unwrap_or(true) {
            best = Some(QsReport { best_m: m, a_max: 0, rho_hat: rho, ratio: 0.0, nu });
        }
    }
    let mut rep = best.ok_or_else(|| Error::InsufficientTail("no testable level".into()))?;
    rep.a_max = a_max;
    rep.ratio = rep.rho_hat / a_max as f64;
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Extension comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub spike: u128,
    pub rho_hat: f64,
    /// Lehtinen's Beurling-Ahlfors bound 2 ||g||_qs (lower-bounded by
    /// 2 rho_hat).
    pub ba_bound: f64,
    /// Argument of the Douady-Earle growth function:
    /// min(rho^{3/2}, 2 rho - 1). The growth function itself is not pinned
    /// down, so only the argument is reported.
    pub de_argument: f64,
    /// The constant Mobius-stage dilatation of the corresponding cell
    /// extension (the log^2 a law).
    pub yoccoz_stage: f64,
}

/// Comparison table for single-spike sequences: the measured approximant
/// quasisymmetry bound against the cell extension's Mobius-stage
/// dilatation.
pub fn extension_comparison_report(spikes: &[u128], spike_at: usize) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &s in spikes {
        let terms = generate_sequence(&SequenceSpec::Spike { at: spike_at, size: s }, spike_at + 4)?;
        let cf = ContinuedFraction::from_terms(&terms);
        let rep = approximant_qs(&cf, spike_at + 1)?;
        let rho = rep.rho_hat;
        let half = (((s + 1) / 2).max(2)) as f64;
        rows.push(ComparisonRow {
            spike: s,
            rho_hat: rho,
            ba_bound: 2.0 * rho,
            de_argument: rho.powf(1.5).min(2.0 * rho - 1.0),
            yoccoz_stage: strip_shear_dilatation(half),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Global homeomorphism checks
// ---------------------------------------------------------------------------

/// Materialize a grid with rotation combinatorics but almost-parabolic
/// subdivision geometry (the synthetic critical side), to depth n_max.
pub fn parabolic_grid(cf: &ContinuedFraction, n_max: usize, cap: u128) -> Result<Grid> {
    if cf.len() < n_max + 1 {
        return Err(Error::PrecisionExhausted(format!(
            "parabolic grid to level {n_max} needs {} partial quotients",
            n_max + 1
        )));
    }
    let mut levels: Vec<Vec<f64>> = vec![vec![0.0]];
    // (position, length, kind) of each interval in circle order.
    let mut intervals: Vec<(f64, f64, IntervalKind)> = vec![(0.0, 1.0, IntervalKind::Single)];
    for n in 0..n_max {
        let a_next = cf.a(n + 1);
        let mut next = Vec::new();
        for &(x, len, kind) in &intervals {
            let pat = child_pattern(kind, n, a_next);
            let k = pat.k() as usize;
            let w = parabolic_weights(k);
            let mut acc = x;
            for (i, &wi) in w.iter().enumerate() {
                next.push((acc, wi * len, pat.kind_at(i as u128)));
                acc += wi * len;
            }
        }
        if next.len() as u128 > cap {
            return Err(Error::ResolutionInsufficient(format!(
                "level {} has {} intervals, cap {cap}",
                n + 1,
                next.len()
            )));
        }
        intervals = next;
        levels.push(intervals.iter().map(|&(x, _, _)| x).collect());
    }
    build_grid(levels)
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeCompatReport {
    pub n_vertical_edges: usize,
    pub n_horizontal_edges: usize,
    pub max_mismatch: f64,
}

/// Edge compatibility of the per-cell extensions: shared vertical edges
/// between horizontal neighbors and shared horizontal edges between a cell
/// and its children must map identically under both cell maps.
pub fn edge_compatibility_report(
    pair: &GridPair,
    base: &dyn BaseMap,
    points_per_edge: usize,
    max_edges: usize,
) -> Result<EdgeCompatReport> {
    let mut max_mismatch = 0.0f64;
    let mut n_v = 0usize;
    let mut n_h = 0usize;
    let depth = pair.gamma.n_levels() - 2;
    'outer: for n in 0..=depth {
        let m = pair.gamma.n_cells_at(n);
        for i in 0..m {
            if n_v + n_h >= max_edges {
                break 'outer;
            }
            let (s0, d0) = pair.correspond(n, i)?;
            if s0.is_empty_cell() || d0.is_empty_cell() {
                continue;
            }
            let map0 = yoccoz_cell_map(&s0, &d0, base)?;
            // Vertical edge with the right neighbor.
            if i + 1 < m {
                let (s1, d1) = pair.correspond(n, i + 1)?;
                if !s1.is_empty_cell() && !d1.is_empty_cell() {
                    let map1 = yoccoz_cell_map(&s1, &d1, base)?;
                    let x = s0.tk;
                    let lo = s0.g2(x).max(s1.g2(x));
                    let hi = s0.g1(x).min(s1.g1(x));
                    if hi > lo {
                        for j in 0..=points_per_edge {
                            let y = lo + (hi - lo) * j as f64 / points_per_edge as f64;
                            let z = C64::new(x, y);
                            let a = map0.apply(z)?;
                            let b = map1.apply(z)?;
                            max_mismatch = max_mismatch.max((a - b).norm());
                        }
                        n_v += 1;
                    }
                }
            }
            // Horizontal edges with the children below.
            if n + 1 <= depth {
                let mc = pair.gamma.n_cells_at(n + 1);
                for c in 0..mc {
                    let (sc, dc) = pair.correspond(n + 1, c)?;
                    if sc.t0 < s0.t0 - 1e-12 || sc.tk > s0.tk + 1e-12 {
                        continue;
                    }
                    if sc.is_empty_cell() || dc.is_empty_cell() {
                        continue;
                    }
                    let mapc = yoccoz_cell_map(&sc, &dc, base)?;
                    for j in 1..points_per_edge {
                        let x = sc.t0 + (sc.tk - sc.t0) * j as f64 / points_per_edge as f64;
                        let z = C64::new(x, s0.g2(x));
                        let a = map0.apply(z)?;
                        let b = mapc.apply(z)?;
                        max_mismatch = max_mismatch.max((a - b).norm());
                    }
                    n_h += 1;
                    if n_v + n_h >= max_edges {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(EdgeCompatReport {
        n_vertical_edges: n_v,
        n_horizontal_edges: n_h,
        max_mismatch,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NumericAgreementReport {
    pub n_points: usize,
    pub fraction_within_1pct: f64,
    pub worst_relative_error: f64,
}

/// Analytic vs numeric dilatation agreement over a synthetic tier.
pub fn analytic_numeric_agreement(
    tier: &SyntheticTier,
    base: &dyn BaseMap,
    per_stratum: usize,
    seed: u64,
) -> Result<NumericAgreementReport> {
    let mut n_points = 0usize;
    let mut within = 0usize;
    let mut worst = 0.0f64;
    for lv in &tier.levels {
        for (si, stratum) in lv.strata.iter().enumerate() {
            if stratum.source.is_empty_cell() || stratum.target.is_empty_cell() {
                continue;
            }
            let map = match yoccoz_cell_map(&stratum.source, &stratum.target, base) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let mut rng = stratum_rng(seed, lv.level, si);
            let (pts, _) = sample_one_map(&map, Direction::Forward, per_stratum, &mut rng);
            for (x, y, ka) in pts {
                let z = C64::new(x, y);
                match map.dilatation_at(z, DilatationMode::Numeric) {
                    Ok(kn) => {
                        let rel = (ka - kn).abs() / ka.max(1.0);
                        worst = worst.max(rel);
                        if rel <= 0.01 {
                            within += 1;
                        }
                        n_points += 1;
                    }
                    Err(_) => {}
                }
            }
        }
    }
    if n_points == 0 {
        return Err(Error::ResolutionInsufficient("no comparable points".into()));
    }
    Ok(NumericAgreementReport {
        n_points,
        fraction_within_1pct: within as f64 / n_points as f64,
        worst_relative_error: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::ContinuedFraction;

    fn golden(n: usize) -> ContinuedFraction {
        ContinuedFraction::from_terms(&vec![1u128; n])
    }

    fn stretched(n: usize) -> ContinuedFraction {
        let terms = generate_sequence(&SequenceSpec::StretchedExp { eps: 0.0 }, n).unwrap();
        ContinuedFraction::from_terms(&terms)
    }

    #[test]
    fn parabolic_weights_symmetric_and_normalized() {
        for k in [1usize, 2, 5, 8, 13] {
            let w = parabolic_weights(k);
            assert_eq!(w.len(), k);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..k {
                assert!((w[j] - w[k - 1 - j]).abs() < 1e-14, "k={k} j={j}");
            }
        }
        // Center gap of a large subdivision is ~ (k/2)^{-2} of the edge gap.
        let w = parabolic_weights(100);
        assert!((w[0] / w[49] - 2500.0).abs() < 1.0);
    }

    #[test]
    fn synthetic_tier_bookkeeping() {
        let cf = stretched(12);
        let tier = synthetic_tier(&cf, 8).unwrap();
        assert_eq!(tier.levels.len(), 9);
        let mut prev = f64::MAX;
        for lv in &tier.levels {
            assert!(lv.area_fwd > 0.0, "level {} empty", lv.level);
            assert!(lv.area_fwd < prev * 1.5, "areas should broadly decay");
            prev = lv.area_fwd;
            for s in &lv.strata {
                assert_eq!(s.source.k(), s.target.k());
                assert!(s.source.base_len() > 0.0);
            }
        }
        // The inverse unresolved mass obeys the rotation a priori bound
        // ~ 2 beta_N <= 2 / q_{N+1}.
        assert!(tier.unresolved_inv <= 2.0 / tier.q[9] + 1e-12);
        assert!(tier.unresolved_fwd > 0.0);
    }

    #[test]
    fn tail_area_matches_synthetic_oracle() {
        // Synthetic field K(z) = 1/Im z on the unit square: the tail is
        // exactly Area{1/y >= K} = 1/K.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let samples: Vec<DilatationSample> = (0..n)
            .map(|_| {
                let x = rng.gen_range(0.0..1.0);
                let y: f64 = rng.gen_range(0.0..1.0);
                DilatationSample {
                    x,
                    y,
                    level: 0,
                    k_dil: (1.0 / y).max(1.0),
                    weight: 1.0 / n as f64,
                }
            })
            .collect();
        let fs = FieldSamples {
            direction: Direction::Forward,
            samples,
            sampled_area: 1.0,
            unresolved: 0.0,
            seam_skipped: 0,
        };
        let grid = [2.0, 4.0, 8.0, 16.0, 32.0];
        let est = tail_area(&fs, &grid).unwrap();
        for (i, &k) in grid.iter().enumerate() {
            let exact = 1.0 / k;
            assert!(
                (est.area[i] - exact).abs() <= est.ci[i] + 0.003,
                "K = {k}: {} vs {exact} (ci {})",
                est.area[i],
                est.ci[i]
            );
        }
        // Monotone by construction.
        for w in est.area.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn fit_recovers_exact_exponential_law() {
        // A(K) = 0.3 e^{-2K} sampled on a grid.
        let grid: Vec<f64> = (1..=30).map(|i| 0.2 * i as f64).collect();
        let area: Vec<f64> = grid.iter().map(|&k| 0.3 * (-2.0 * k).exp()).collect();
        let ci: Vec<f64> = area.iter().map(|&a| 1e-3 * a + 1e-300).collect();
        let est = TailEstimate {
            k_grid: grid,
            area,
            ci,
            unresolved: 0.0,
            sampled_area: 1.0,
        };
        let fit = fit_tail(&est, Gauge::David, None).unwrap();
        assert!((fit.alpha - 2.0).abs() < 0.1, "alpha = {}", fit.alpha);
        assert!((fit.a - 0.3).abs() < 0.015, "a = {}", fit.a);
        assert!(fit.goodness > 0.999);
        assert!(fit.slope_drift < 0.01);
    }

    #[test]
    fn gauge_matrix_is_diagonal() {
        let rows = gauge_test_suite().unwrap();
        assert_eq!(rows.len(), 9);
        for r in &rows {
            assert_eq!(
                r.pass, r.expected,
                "{} under {:?}: alpha {} goodness {} drift {}",
                r.field, r.gauge, r.alpha, r.goodness, r.slope_drift
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_and_weighted() {
        let cf = stretched(10);
        let tier = synthetic_tier(&cf, 5).unwrap();
        let base = PFast::new();
        let fs = sample_field(&tier, &base, Direction::Forward, 800, 5).unwrap();
        let fs2 = sample_field(&tier, &base, Direction::Forward, 800, 5).unwrap();
        assert_eq!(fs.samples.len(), fs2.samples.len());
        assert_eq!(fs.samples[0].k_dil, fs2.samples[0].k_dil);
        // Stratification bookkeeping: weights sum to the sampled area.
        let w: f64 = fs.samples.iter().map(|s| s.weight).sum();
        assert!((w - fs.sampled_area).abs() < 1e-9 * fs.sampled_area.max(1.0));
        assert!(fs.samples.iter().all(|s| s.k_dil >= 1.0));
        // Inverse direction also runs and sums.
        let inv = sample_field(&tier, &base, Direction::Inverse, 800, 5).unwrap();
        let wi: f64 = inv.samples.iter().map(|s| s.weight).sum();
        assert!((wi - inv.sampled_area).abs() < 1e-9);
    }

    #[test]
    fn golden_field_is_bounded() {
        let cf = golden(14);
        let tier = synthetic_tier(&cf, 10).unwrap();
        let base = PFast::new();
        let fs = sample_field(&tier, &base, Direction::Forward, 1500, 3).unwrap();
        let kmax = fs.samples.iter().map(|s| s.k_dil).fold(1.0f64, f64::max);
        // Bounded type: small k everywhere, affine fallback, modest K.
        assert!(kmax < 50.0, "golden K_max = {kmax}");
        let grid = default_k_grid(&fs, 30);
        let est = tail_area(&fs, &grid).unwrap();
        // The estimate hits zero at a finite K: the bounded verdict.
        assert!(bounded_at(&est).is_none() || bounded_at(&est).unwrap() <= kmax * 1.01);
        assert!(est.area[0] > 0.0);
    }

    #[test]
    fn distortion_sweep_tracks_log_squared() {
        let rows = distortion_law_sweep(&[16, 64, 256], 500, 6.0, 4).unwrap();
        for r in &rows {
            assert!(r.k_sup >= 1.0);
            assert!(r.area_fraction > 0.0, "a = {}: no area above threshold", r.a);
        }
        // The ratio sup K / log^2 a stays within one fixed band.
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let rmin = ratios.iter().cloned().fold(f64::MAX, f64::min);
        let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(rmax / rmin < 8.0, "ratios {ratios:?}");
    }

    #[test]
    fn qs_witness_scales_linearly_with_spike() {
        let mut rhos = Vec::new();
        for &s in &[10u128, 50, 250] {
            let terms = generate_sequence(&SequenceSpec::Spike { at: 4, size: s }, 8).unwrap();
            let cf = ContinuedFraction::from_terms(&terms);
            let rep = approximant_qs(&cf, 5).unwrap();
            assert_eq!(rep.a_max, s);
            rhos.push((s as f64, rep.rho_hat));
        }
        // Log-log slope close to 1.
        let slope = ((rhos[2].1 / rhos[0].1).ln()) / ((rhos[2].0 / rhos[0].0).ln());
        assert!((slope - 1.0).abs() < 0.15, "slope = {slope}");
        // Symmetric nodes give rho = 1 exactly.
        let sym: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let (rho, _) = qs_witness_rho(&sym, &sym).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        // Golden stays bounded.
        let rep = approximant_qs(&golden(10), 8).unwrap();
        assert!(rep.rho_hat < 10.0);
    }

    #[test]
    fn comparison_table_orders_columns() {
        let rows = extension_comparison_report(&[100, 1000], 4).unwrap();
        for r in &rows {
            assert!(
                r.yoccoz_stage < r.ba_bound,
                "spike {}: stage {} vs BA {}",
                r.spike,
                r.yoccoz_stage,
                r.ba_bound
            );
            assert!(r.de_argument >= r.ba_bound - 1.0 - 1e-9 || r.de_argument <= r.rho_hat.powf(1.5));
        }
    }

    #[test]
    fn edge_compatibility_is_exact_on_synthetic_grids() {
        let cf = ContinuedFraction::from_terms(&[4u128, 3, 4, 3, 4]);
        let par = parabolic_grid(&cf, 3, 10_000).unwrap();
        let rot = crate::grid::grid_from_rotation(&cf, 3, 10_000).unwrap();
        let pair = GridPair::new(par, rot).unwrap();
        let base = PFast::new();
        let rep = edge_compatibility_report(&pair, &base, 6, 60).unwrap();
        assert!(rep.n_vertical_edges + rep.n_horizontal_edges >= 20);
        assert!(rep.max_mismatch < 1e-8, "mismatch {}", rep.max_mismatch);
    }

    #[test]
    fn harness_runs_on_stretched_sequence() {
        let cf = stretched(12);
        let rep = theorem_main_harness(&cf, 8, 3000, 9).unwrap();
        assert_eq!(rep.rows.len(), 9);
        assert!(rep.calibration.c_hat > 0.0);
        assert!(rep.calibration.eps_hat > 0.0 && rep.calibration.eps_hat < 1.0);
        // The PZ statistic for e^{sqrt n} is bounded (ratio ~ 1) and the
        // forward tail should show an exponential-or-better regime.
        assert_eq!(rep.arithmetic_verdict, "pz-bounded");
        assert!(rep.consistent, "fwd verdict: {}", rep.fwd_verdict);
        // Inverse floors clear the 1/q^4 law by a wide margin.
        for row in &rep.rows {
            if row.floor_inv.is_finite() {
                assert!(row.inv_floor_ratio > 1.0, "level {}: {}", row.level, row.inv_floor_ratio);
            }
        }
    }

    #[test]
    fn inclusion_rows_reflect_the_chain() {
        let short = inclusion_report(100).unwrap();
        let rows = inclusion_report(250).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(r.sum_log_bound_ok, "{}", r.name);
        }
        let by_name = |rs: &[InclusionRow], n: &str| {
            rs.iter().find(|r| r.name == n).cloned().unwrap()
        };
        // Constant sequences: all statistics bounded and flat.
        assert!(by_name(&rows, "constant-2").pz.statistic < 2.0);
        // Square spikes: PZ_eps statistic saturates while the A statistic
        // keeps growing with the horizon (the A \ PZ separation).
        let sp_short = by_name(&short, "square-spikes");
        let sp_long = by_name(&rows, "square-spikes");
        assert!(sp_long.a_stat.statistic > sp_short.a_stat.statistic + 0.05);
        assert!((sp_long.pz_eps.statistic - sp_short.pz_eps.statistic).abs() < 1e-9);
        // Stretched-exp 0.3: PZ statistic grows, A statistic saturates
        // (the PZ_{1/2} \ A side of the chain).
        let se_short = by_name(&short, "stretched-exp-0.3");
        let se_long = by_name(&rows, "stretched-exp-0.3");
        assert!(se_long.pz.statistic > se_short.pz.statistic + 0.1);
        assert!((se_long.a_stat.statistic - se_short.a_stat.statistic).abs() < 1e-9);
    }

    #[test]
    fn analytic_and_numeric_dilatations_agree() {
        let cf = stretched(9);
        let tier = synthetic_tier(&cf, 4).unwrap();
        let base = PFast::new();
        let rep = analytic_numeric_agreement(&tier, &base, 6, 13).unwrap();
        assert!(rep.n_points >= 40);
        assert!(
            rep.fraction_within_1pct >= 0.95,
            "only {} within 1% (worst {})",
            rep.fraction_within_1pct,
            rep.worst_relative_error
        );
    }
}
