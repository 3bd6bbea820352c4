//! Grids over dynamical partitions: heights, cells, geometric control
//! checks, areas, correspondence between the two sides, and SVG rendering.
//!
//! A grid is built from nested levels of sorted points in [0, 1); the level-n
//! polyline passes through t + i y_n(t) with y_n(t) half the distance between
//! the two level-n neighbors of t. Cells live between consecutive polylines.

use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::error::{Error, Result};
use crate::rotation::partition_rotation;

/// Nesting / endpoint-matching tolerance for grid construction.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Grid {
    /// Sorted points of each level in [0, 1); level 0 must be a single point.
    pub levels: Vec<Vec<f64>>,
    /// heights[n][i] = y_n(levels[n][i]).
    pub heights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellKind {
    Quad,
    /// Left vertical side degenerate (y_n = y_{n+1} at t_0).
    TriangleLeft,
    /// Right vertical side degenerate.
    TriangleRight,
    /// Both verticals degenerate.
    Sliver,
}

/// One grid cell: base interval [t_0, t_k] of level n, top segment at the
/// level-n heights, bottom polyline through the level-(n+1) vertices.
/// `t_k` may exceed 1 for the wrapping interval.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub level: usize,
    pub index: usize,
    pub t0: f64,
    pub tk: f64,
    /// (x, y) of the level-(n+1) polyline vertices on [t_0, t_k], endpoints
    /// included, left to right.
    pub bottom: Vec<(f64, f64)>,
    /// Heights of the top segment at t_0 and t_k.
    pub y_top: (f64, f64),
    pub kind: CellKind,
}

impl Cell {
    /// Number of bottom segments (the k of the subdivision).
    pub fn k(&self) -> usize {
        self.bottom.len() - 1
    }

    pub fn base_len(&self) -> f64 {
        self.tk - self.t0
    }

    /// Counterclockwise simple polygon: bottom left-to-right, then top
    /// right-to-left. Degenerate verticals contribute no duplicate vertex.
    pub fn polygon(&self) -> Vec<(f64, f64)> {
        let mut poly = self.bottom.clone();
        let tr = (self.tk, self.y_top.1);
        let tl = (self.t0, self.y_top.0);
        if (poly.last().unwrap().1 - tr.1).abs() > 1e-14 {
            poly.push(tr);
        }
        if (poly[0].1 - tl.1).abs() > 1e-14 {
            poly.push(tl);
        }
        poly
    }

    /// Shoelace area of the polygon.
    pub fn area(&self) -> f64 {
        shoelace(&self.polygon())
    }

    /// True when the two bounding polylines coincide over the base (possible
    /// when a_{n+1} = 1 and both endpoints persist with unchanged
    /// neighbors); such cells carry no area and no extension.
    pub fn is_empty_cell(&self) -> bool {
        self.area() < 1e-12 * self.base_len() * self.base_len()
    }

    pub fn diameter(&self) -> f64 {
        let poly = self.polygon();
        let mut d: f64 = 0.0;
        for i in 0..poly.len() {
            for j in i + 1..poly.len() {
                d = d.max(((poly[i].0 - poly[j].0).powi(2) + (poly[i].1 - poly[j].1).powi(2)).sqrt());
            }
        }
        d
    }

    /// Height of the top segment at abscissa x.
    pub fn g1(&self, x: f64) -> f64 {
        let s = (x - self.t0) / (self.tk - self.t0);
        self.y_top.0 + s * (self.y_top.1 - self.y_top.0)
    }

    /// Index of the bottom segment containing abscissa x (clamped; left
    /// segment at interior vertices).
    fn bottom_segment_of(&self, x: f64) -> usize {
        let b = &self.bottom;
        let n = b.len();
        if x <= b[0].0 {
            return 0;
        }
        if x > b[n - 1].0 {
            return n - 2;
        }
        b.partition_point(|&(p, _)| p < x).min(n - 1) - 1
    }

    /// Height of the bottom polyline at abscissa x.
    pub fn g2(&self, x: f64) -> f64 {
        let b = &self.bottom;
        if x <= b[0].0 {
            return b[0].1;
        }
        if x >= b[b.len() - 1].0 {
            return b[b.len() - 1].1;
        }
        let i = self.bottom_segment_of(x);
        let s = (x - b[i].0) / (b[i + 1].0 - b[i].0);
        b[i].1 + s * (b[i + 1].1 - b[i].1)
    }

    /// Slope of the (affine) top segment.
    pub fn g1_slope(&self) -> f64 {
        (self.y_top.1 - self.y_top.0) / (self.tk - self.t0)
    }

    /// Slope of the bottom polyline segment containing abscissa x.
    pub fn g2_slope(&self, x: f64) -> f64 {
        let b = &self.bottom;
        let seg = self.bottom_segment_of(x);
        (b[seg + 1].1 - b[seg].1) / (b[seg + 1].0 - b[seg].0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.t0 - 1e-12
            && x <= self.tk + 1e-12
            && y >= self.g2(x) - 1e-12
            && y <= self.g1(x) + 1e-12
    }

    /// Side of the largest axis-aligned square (centered on the base
    /// midline) that fits in the cell; lower-bounds the inscribed square.
    pub fn inscribed_square_side(&self) -> f64 {
        let xc = 0.5 * (self.t0 + self.tk);
        let w = self.base_len();
        let mut lo = 0.0;
        let mut hi = w.min(self.y_top.0.max(self.y_top.1));
        for _ in 0..40 {
            let s = 0.5 * (lo + hi);
            if self.square_fits(xc, s) {
                lo = s;
            } else {
                hi = s;
            }
        }
        lo
    }

    fn square_fits(&self, xc: f64, s: f64) -> bool {
        let x0 = (xc - s / 2.0).max(self.t0);
        let x1 = (x0 + s).min(self.tk);
        if x1 - x0 < s - 1e-15 {
            return false;
        }
        let mut floor = f64::NEG_INFINITY;
        let mut ceil = f64::INFINITY;
        let m = 16 + 2 * self.bottom.len();
        for i in 0..=m {
            let x = x0 + (x1 - x0) * i as f64 / m as f64;
            floor = floor.max(self.g2(x));
            ceil = ceil.min(self.g1(x));
        }
        ceil - floor >= s
    }
}

pub fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

/// Height y_n at point i of a sorted level (period-1 wrap).
fn level_height(points: &[f64], i: usize) -> f64 {
    let n = points.len();
    let left = if i == 0 { points[n - 1] - 1.0 } else { points[i - 1] };
    let right = if i + 1 == n { points[0] + 1.0 } else { points[i + 1] };
    (right - left) / 2.0
}

/// Build a grid from nested levels of sorted points (level 0 is a single
/// point). Validates sorting, nesting, and positive heights.
pub fn build_grid(levels: Vec<Vec<f64>>) -> Result<Grid> {
    if levels.is_empty() || levels[0].len() != 1 {
        return Err(Error::DegenerateCell("level 0 must hold exactly one point".into()));
    }
    for (n, pts) in levels.iter().enumerate() {
        if pts.is_empty() {
            return Err(Error::DegenerateCell(format!("level {n} is empty")));
        }
        for w in pts.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::DegenerateCell(format!("level {n} points not sorted")));
            }
        }
        if pts[0] < 0.0 || *pts.last().unwrap() >= 1.0 {
            return Err(Error::DegenerateCell(format!("level {n} points leave [0,1)")));
        }
        if n > 0 {
            for &p in &levels[n - 1] {
                if !pts.iter().any(|&q| (q - p).abs() < GRID_TOL) {
                    return Err(Error::DegenerateCell(format!(
                        "level {} point {p} missing from level {n}",
                        n - 1
                    )));
                }
            }
        }
    }
    let heights: Vec<Vec<f64>> = levels
        .iter()
        .map(|pts| (0..pts.len()).map(|i| level_height(pts, i)).collect())
        .collect();
    for (n, hs) in heights.iter().enumerate() {
        if hs.iter().any(|&h| h <= 0.0) {
            return Err(Error::DegenerateCell(format!("non-positive height at level {n}")));
        }
    }
    Ok(Grid { levels, heights })
}

/// Convenience: rotation-side grid for levels 0..=n_max.
pub fn grid_from_rotation(cf: &ContinuedFraction, n_max: usize, cap: u128) -> Result<Grid> {
    let mut levels = Vec::with_capacity(n_max + 1);
    levels.push(vec![0.0]);
    for n in 1..=n_max {
        levels.push(partition_rotation(cf, n, cap)?.positions_f64());
    }
    build_grid(levels)
}

impl Grid {
    /// Number of levels (cells exist for levels 0..n_levels()-1).
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn n_cells_at(&self, level: usize) -> usize {
        self.levels[level].len()
    }

    /// Height y_n(t) for a point t of level n.
    pub fn height_at(&self, level: usize, t: f64) -> Result<f64> {
        let pts = &self.levels[level];
        let i = pts
            .iter()
            .position(|&p| (p - t).abs() < GRID_TOL)
            .ok_or_else(|| Error::IndexMismatch(format!("{t} is not a level-{level} point")))?;
        Ok(self.heights[level][i])
    }

    /// The cell over base interval `index` of `level` (bottom from
    /// `level + 1`).
    pub fn cell(&self, level: usize, index: usize) -> Result<Cell> {
        if level + 1 >= self.levels.len() {
            return Err(Error::IndexMismatch(format!("no level {} below level {level}", level + 1)));
        }
        let pts = &self.levels[level];
        let n = pts.len();
        if index >= n {
            return Err(Error::IndexMismatch(format!("level {level} has {n} intervals")));
        }
        let t0 = pts[index];
        let tk = if index + 1 < n { pts[index + 1] } else { pts[0] + 1.0 };
        let y0 = self.heights[level][index];
        let yk = self.heights[level][(index + 1) % n];
        let fine = &self.levels[level + 1];
        let fh = &self.heights[level + 1];
        let mut bottom: Vec<(f64, f64)> = Vec::new();
        for shift in [0.0, 1.0] {
            for (i, &p) in fine.iter().enumerate() {
                let x = p + shift;
                if x >= t0 - GRID_TOL && x <= tk + GRID_TOL {
                    bottom.push((x, fh[i]));
                }
            }
        }
        bottom.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        bottom.dedup_by(|a, b| (a.0 - b.0).abs() < GRID_TOL);
        if bottom.len() < 2
            || (bottom[0].0 - t0).abs() > GRID_TOL
            || (bottom.last().unwrap().0 - tk).abs() > GRID_TOL
        {
            return Err(Error::DegenerateCell(format!(
                "bottom polyline of cell ({level},{index}) does not span the base"
            )));
        }
        bottom[0].0 = t0;
        bottom.last_mut().unwrap().0 = tk;
        let left_flat = (bottom[0].1 - y0).abs() < 1e-13;
        let right_flat = (bottom.last().unwrap().1 - yk).abs() < 1e-13;
        let kind = match (left_flat, right_flat) {
            (false, false) => CellKind::Quad,
            (true, false) => CellKind::TriangleLeft,
            (false, true) => CellKind::TriangleRight,
            (true, true) => CellKind::Sliver,
        };
        if bottom[0].1 > y0 + 1e-13 || bottom.last().unwrap().1 > yk + 1e-13 {
            return Err(Error::DegenerateCell(format!(
                "bottom above top at cell ({level},{index}): heights must be non-increasing"
            )));
        }
        Ok(Cell { level, index, t0, tk, bottom, y_top: (y0, yk), kind })
    }

    pub fn cells_at(&self, level: usize) -> Result<Vec<Cell>> {
        (0..self.n_cells_at(level)).map(|i| self.cell(level, i)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellGeometryReport {
    pub level: usize,
    pub index: usize,
    pub kind: CellKind,
    pub top_len: f64,
    pub left_len: f64,
    pub right_len: f64,
    /// max/min over the comparable sides (top and non-degenerate verticals).
    pub side_ratio: f64,
    /// Corner angles (radians) at top-left, top-right and along the bottom.
    pub min_angle: f64,
    pub max_angle: f64,
    pub inscribed_square_ratio: f64,
    pub diameter_ratio: f64,
}

fn angle_at(prev: (f64, f64), v: (f64, f64), next: (f64, f64)) -> f64 {
    let a = (prev.0 - v.0, prev.1 - v.1);
    let b = (next.0 - v.0, next.1 - v.1);
    let dot = a.0 * b.0 + a.1 * b.1;
    let na = (a.0 * a.0 + a.1 * a.1).sqrt();
    let nb = (b.0 * b.0 + b.1 * b.1).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

pub fn cell_geometry_report(cell: &Cell) -> CellGeometryReport {
    let top_len = ((cell.tk - cell.t0).powi(2) + (cell.y_top.1 - cell.y_top.0).powi(2)).sqrt();
    let left_len = cell.y_top.0 - cell.bottom[0].1;
    let right_len = cell.y_top.1 - cell.bottom.last().unwrap().1;
    let mut sides = vec![top_len];
    if left_len > 1e-13 {
        sides.push(left_len);
    }
    if right_len > 1e-13 {
        sides.push(right_len);
    }
    let side_ratio = sides.iter().cloned().fold(f64::MIN, f64::max)
        / sides.iter().cloned().fold(f64::MAX, f64::min);
    let poly = cell.polygon();
    let m = poly.len();
    let mut min_angle = f64::MAX;
    let mut max_angle: f64 = 0.0;
    for i in 0..m {
        let ang = angle_at(poly[(i + m - 1) % m], poly[i], poly[(i + 1) % m]);
        min_angle = min_angle.min(ang);
        max_angle = max_angle.max(ang);
    }
    CellGeometryReport {
        level: cell.level,
        index: cell.index,
        kind: cell.kind,
        top_len,
        left_len,
        right_len,
        side_ratio,
        min_angle,
        max_angle,
        inscribed_square_ratio: cell.inscribed_square_side() / cell.base_len(),
        diameter_ratio: cell.diameter() / cell.base_len(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridGeometryReport {
    pub per_level_min_angle: Vec<f64>,
    pub per_level_max_side_ratio: Vec<f64>,
    pub per_level_min_square_ratio: Vec<f64>,
    pub per_level_max_diameter_ratio: Vec<f64>,
}

pub fn grid_geometry_report(grid: &Grid) -> Result<GridGeometryReport> {
    let mut rep = GridGeometryReport {
        per_level_min_angle: Vec::new(),
        per_level_max_side_ratio: Vec::new(),
        per_level_min_square_ratio: Vec::new(),
        per_level_max_diameter_ratio: Vec::new(),
    };
    for level in 0..grid.n_levels() - 1 {
        let mut min_angle = f64::MAX;
        let mut max_ratio: f64 = 0.0;
        let mut min_sq = f64::MAX;
        let mut max_diam: f64 = 0.0;
        for cell in grid.cells_at(level)? {
            if cell.is_empty_cell() {
                continue;
            }
            let r = cell_geometry_report(&cell);
            min_angle = min_angle.min(r.min_angle);
            max_ratio = max_ratio.max(r.side_ratio);
            min_sq = min_sq.min(r.inscribed_square_ratio);
            max_diam = max_diam.max(r.diameter_ratio);
        }
        rep.per_level_min_angle.push(min_angle);
        rep.per_level_max_side_ratio.push(max_ratio);
        rep.per_level_min_square_ratio.push(min_sq);
        rep.per_level_max_diameter_ratio.push(max_diam);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaFloorRow {
    pub level: usize,
    pub min_area: f64,
    pub floor: f64,
    /// min_area / floor; the PASS criterion is a level-independent lower
    /// band on this ratio.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AreaFloorReport {
    pub rows: Vec<AreaFloorRow>,
    pub pass: bool,
}

/// Compare per-level minimal cell areas against supplied floors (one per
/// cell level). PASS iff the ratio min_area/floor never drops below
/// `band` times its own maximum, i.e. no downward trend past the band.
pub fn area_floor_check(grid: &Grid, floors: &[f64], band: f64) -> Result<AreaFloorReport> {
    let n = (grid.n_levels() - 1).min(floors.len());
    let mut rows = Vec::with_capacity(n);
    for level in 0..n {
        let min_area = grid
            .cells_at(level)?
            .iter()
            .filter(|c| !c.is_empty_cell())
            .map(Cell::area)
            .fold(f64::MAX, f64::min);
        if min_area == f64::MAX {
            // Every cell at this level is empty (polylines coincide).
            continue;
        }
        rows.push(AreaFloorRow {
            level,
            min_area,
            floor: floors[level],
            ratio: min_area / floors[level],
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
    Ok(AreaFloorReport { pass: min_ratio >= band * max_ratio, rows })
}

/// Two grids with identical subdivision combinatorics, indexed identically.
#[derive(Debug, Clone)]
pub struct GridPair {
    pub gamma: Grid,
    pub gamma_p: Grid,
}

impl GridPair {
    pub fn new(gamma: Grid, gamma_p: Grid) -> Result<Self> {
        if gamma.n_levels() != gamma_p.n_levels() {
            return Err(Error::IndexMismatch("grids have different depths".into()));
        }
        for n in 0..gamma.n_levels() {
            if gamma.levels[n].len() != gamma_p.levels[n].len() {
                return Err(Error::IndexMismatch(format!(
                    "level {n}: {} vs {} points",
                    gamma.levels[n].len(),
                    gamma_p.levels[n].len()
                )));
            }
        }
        Ok(Self { gamma, gamma_p })
    }

    /// The corresponding cell pair. Errors if the bottom vertex counts
    /// disagree (partition desync).
    pub fn correspond(&self, level: usize, index: usize) -> Result<(Cell, Cell)> {
        let a = self.gamma.cell(level, index)?;
        let b = self.gamma_p.cell(level, index)?;
        if a.k() != b.k() {
            return Err(Error::IndexMismatch(format!(
                "cell ({level},{index}): bottom counts {} vs {}",
                a.k(),
                b.k()
            )));
        }
        Ok((a, b))
    }

    /// Piecewise-affine boundary correspondence on the base of a cell:
    /// maps the level-(n+1) vertices of `a` to those of `b`.
    pub fn base_boundary_map(&self, level: usize, index: usize) -> Result<PiecewiseAffine> {
        let (a, b) = self.correspond(level, index)?;
        let xs: Vec<f64> = a.bottom.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = b.bottom.iter().map(|p| p.0).collect();
        PiecewiseAffine::new(xs, ys)
    }
}

/// Strictly-increasing piecewise-affine map given by matched node lists.
#[derive(Debug, Clone, Serialize)]
pub struct PiecewiseAffine {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PiecewiseAffine {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::NodeMismatch(format!(
                "node lists of lengths {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NodeMismatch("source nodes not increasing".into()));
            }
        }
        for w in ys.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::NodeMismatch("target nodes not increasing".into()));
            }
        }
        Ok(Self { xs, ys })
    }

    /// Index of the segment containing x (clamped to the outer segments;
    /// left-segment convention at interior nodes).
    fn segment_of(&self, x: f64) -> usize {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0;
        }
        if x > self.xs[n - 1] {
            return n - 2;
        }
        // Binary search: smallest i with xs[i] >= x, then segment i - 1.
        self.xs.partition_point(|&p| p < x).min(n - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment_of(x);
        self.ys[i] + (x - self.xs[i]) * self.slope(i)
    }

    pub fn slope(&self, seg: usize) -> f64 {
        (self.ys[seg + 1] - self.ys[seg]) / (self.xs[seg + 1] - self.xs[seg])
    }

    pub fn slopes(&self) -> Vec<f64> {
        (0..self.xs.len() - 1).map(|i| self.slope(i)).collect()
    }

    /// Slope of the segment containing x (left-segment value at nodes).
    pub fn derivative_at(&self, x: f64) -> f64 {
        self.slope(self.segment_of(x))
    }

    pub fn inverse(&self) -> Self {
        Self { xs: self.ys.clone(), ys: self.xs.clone() }
    }

    /// Evaluate the inverse map without materializing it (ys are strictly
    /// increasing by construction).
    pub fn eval_inverse(&self, y: f64) -> f64 {
        let n = self.ys.len();
        let i = if y <= self.ys[0] {
            0
        } else if y > self.ys[n - 1] {
            n - 2
        } else {
            self.ys.partition_point(|&p| p < y).min(n - 1) - 1
        };
        self.xs[i] + (y - self.ys[i]) / self.slope(i)
    }
}

/// Render the grid (levels 0..=depth-1 cells) as a standalone SVG document.
/// `color` maps (level, index) to an SVG fill; `None` draws outlines only.
pub fn render_svg(
    grid: &Grid,
    depth: usize,
    color: Option<&dyn Fn(usize, usize) -> String>,
) -> Result<String> {
    let depth = depth.min(grid.n_levels() - 1);
    let w = 1000.0;
    let h = 1100.0;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" width=\"{w}\" height=\"{h}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // y up to 1 plus margin for the level-0 polyline at height 1.
    let sx = w;
    let sy = h / 1.1;
    for level in 0..depth {
        for (i, cell) in grid.cells_at(level)?.iter().enumerate() {
            let poly = cell.polygon();
            let pts: Vec<String> = poly
                .iter()
                .map(|&(x, y)| format!("{:.3},{:.3}", x * sx, h - y * sy))
                .collect();
            let fill = color.map(|f| f(level, i)).unwrap_or_else(|| "none".into());
            out.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{}\" stroke=\"#333\" stroke-width=\"0.5\"/>\n",
                pts.join(" "),
                fill
            ));
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Default level coloring for `render_svg`.
pub fn level_color(level: usize, _index: usize) -> String {
    let hue = (level * 47) % 360;
    format!("hsl({hue},70%,80%)")
}
