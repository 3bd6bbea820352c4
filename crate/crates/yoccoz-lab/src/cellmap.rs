//! The per-cell Yoccoz extension: the composed map
//! phi'^{-1} o p^{-1} o psi_ext^{-1} o eta_ext o p o phi
//! from a grid cell Q to its partner Q', together with its analytic and
//! numeric dilatation field and stratified sup-dilatation sampling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basemap::BaseMap;
use crate::error::{Error, Result};
use crate::extension::{eta_build, psi_build, EtaCorrection, FiberAffinePhi, Mat2, PiecewiseMobiusPsi};
use crate::grid::{Cell, CellKind, PiecewiseAffine};

pub type C64 = Complex64;

/// Which extension recipe a cell uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtensionKind {
    /// Piecewise Mobius psi with strip-shear half-disk extension (k >= 4,
    /// quadrilateral cells).
    Mobius,
    /// Interpolated affine fallback (small k, triangles, slivers).
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DilatationMode {
    Analytic,
    Numeric,
}

/// The extension of one cell correspondence.
pub struct CellMap<'a> {
    pub source: Cell,
    pub target: Cell,
    pub kind: ExtensionKind,
    pub phi: FiberAffinePhi,
    pub phi_p: FiberAffinePhi,
    /// Base boundary correspondence s_j -> s'_j, extended by the identity.
    pub boundary: PiecewiseAffine,
    pub psi: Option<PiecewiseMobiusPsi>,
    pub eta: Option<EtaCorrection>,
    base: &'a dyn BaseMap,
}

/// Build the extension for a matched pair of cells over a pluggable base map.
pub fn yoccoz_cell_map<'a>(
    source: &Cell,
    target: &Cell,
    base: &'a dyn BaseMap,
) -> Result<CellMap<'a>> {
    if source.is_empty_cell() || target.is_empty_cell() {
        return Err(Error::DegenerateCell(format!(
            "empty cell at level {} index {}",
            source.level, source.index
        )));
    }
    if source.k() != target.k() {
        return Err(Error::IndexMismatch(format!(
            "source k = {} vs target k = {}",
            source.k(),
            target.k()
        )));
    }
    let phi = FiberAffinePhi::new(source.clone());
    let phi_p = FiberAffinePhi::new(target.clone());
    let s_nodes: Vec<f64> = source.bottom.iter().map(|&(x, _)| phi.xi(x)).collect();
    let sp_nodes: Vec<f64> = target.bottom.iter().map(|&(x, _)| phi_p.xi(x)).collect();
    let boundary = PiecewiseAffine::new(s_nodes.clone(), sp_nodes.clone())?;
    let k = source.k();
    let quad = source.kind == CellKind::Quad && target.kind == CellKind::Quad;
    if k >= 4 && quad {
        let a_idx = k / 2;
        let psi = psi_build(k, sp_nodes[a_idx])?;
        let eta = eta_build(&s_nodes, &sp_nodes, &psi)?;
        Ok(CellMap {
            source: source.clone(),
            target: target.clone(),
            kind: ExtensionKind::Mobius,
            phi,
            phi_p,
            boundary,
            psi: Some(psi),
            eta: Some(eta),
            base,
        })
    } else {
        Ok(CellMap {
            source: source.clone(),
            target: target.clone(),
            kind: ExtensionKind::Affine,
            phi,
            phi_p,
            boundary,
            psi: None,
            eta: None,
            base,
        })
    }
}

impl<'a> CellMap<'a> {
    /// The interpolated affine model map on S for the fallback path:
    /// A(xi + i v) = (1 - v/2) w(xi) + (v/2) xi + i v.
    fn affine_model(&self, w: C64) -> C64 {
        let t = 1.0 - 0.5 * w.im;
        C64::new(t * self.boundary.eval(w.re) + (1.0 - t) * w.re, w.im)
    }

    fn affine_model_inverse(&self, w: C64) -> C64 {
        let t = 1.0 - 0.5 * w.im;
        // Piecewise affine in xi with the same nodes: invert exactly.
        let xs = &self.boundary.xs;
        let ys: Vec<f64> = xs
            .iter()
            .zip(self.boundary.ys.iter())
            .map(|(&s, &sp)| t * sp + (1.0 - t) * s)
            .collect();
        let g = PiecewiseAffine { xs: ys, ys: xs.clone() };
        C64::new(g.eval(w.re), w.im)
    }

    fn affine_model_jacobian(&self, w: C64) -> Mat2 {
        let t = 1.0 - 0.5 * w.im;
        let m = self.boundary.derivative_at(w.re);
        Mat2([
            [t * m + (1.0 - t), 0.5 * (w.re - self.boundary.eval(w.re))],
            [0.0, 1.0],
        ])
    }

    /// The model map on S (everything between phi and phi'^{-1}).
    fn model(&self, w: C64) -> Result<C64> {
        // Exact boundary short-cuts: the bottom carries the piecewise-affine
        // boundary map; top and sides carry the identity in S coordinates.
        if w.im < 1e-12 {
            return Ok(C64::new(self.boundary.eval(w.re), 0.0));
        }
        if w.re.abs() >= 1.0 - 1e-12 || w.im >= 2.0 - 1e-12 {
            return Ok(w);
        }
        match self.kind {
            ExtensionKind::Affine => Ok(self.affine_model(w)),
            ExtensionKind::Mobius => {
                let eta = self.eta.as_ref().unwrap();
                let psi = self.psi.as_ref().unwrap();
                let h = self.base.forward(w)?;
                let h = eta.extend(h);
                let h = psi.extend_inverse(h);
                self.base.inverse(h)
            }
        }
    }

    fn model_inverse(&self, w: C64) -> Result<C64> {
        if w.im < 1e-12 {
            return Ok(C64::new(self.boundary.inverse().eval(w.re), 0.0));
        }
        if w.re.abs() >= 1.0 - 1e-12 || w.im >= 2.0 - 1e-12 {
            return Ok(w);
        }
        match self.kind {
            ExtensionKind::Affine => Ok(self.affine_model_inverse(w)),
            ExtensionKind::Mobius => {
                let eta = self.eta.as_ref().unwrap();
                let psi = self.psi.as_ref().unwrap();
                let h = self.base.forward(w)?;
                let h = psi.extend(h);
                let h = eta.extend_inverse(h);
                self.base.inverse(h)
            }
        }
    }

    fn model_jacobian(&self, w: C64) -> Result<Mat2> {
        match self.kind {
            ExtensionKind::Affine => Ok(self.affine_model_jacobian(w)),
            ExtensionKind::Mobius => {
                let eta = self.eta.as_ref().unwrap();
                let psi = self.psi.as_ref().unwrap();
                let j1 = self.base.jacobian(w)?;
                let h1 = self.base.forward(w)?;
                let j2 = eta.extend_jacobian(h1, false);
                let h2 = eta.extend(h1);
                let j3 = psi.extend_jacobian(h2, true);
                let h3 = psi.extend_inverse(h2);
                // Jacobian of p^{-1} at h3: inverse of the forward Jacobian
                // at the preimage.
                let z3 = self.base.inverse(h3)?;
                let j4 = self.base.jacobian(z3)?.inverse()?;
                Ok(j4.mul(&j3).mul(&j2).mul(&j1))
            }
        }
    }

    /// Apply the cell map.
    pub fn apply(&self, z: C64) -> Result<C64> {
        let w = self.phi.eval(z)?;
        let w2 = self.model(w)?;
        self.phi_p.eval_inverse(w2)
    }

    /// Apply the inverse cell map (target cell to source cell).
    pub fn apply_inverse(&self, z: C64) -> Result<C64> {
        let w = self.phi_p.eval(z)?;
        let w2 = self.model_inverse(w)?;
        self.phi.eval_inverse(w2)
    }

    /// Analytic Jacobian of the full chain at an interior point.
    pub fn jacobian(&self, z: C64) -> Result<Mat2> {
        let j1 = self.phi.jacobian(z)?;
        let w = self.phi.eval(z)?;
        let jm = self.model_jacobian(w)?;
        let w2 = self.model(w)?;
        let j3 = self.phi_p.inverse_jacobian(w2)?;
        Ok(j3.mul(&jm).mul(&j1))
    }

    /// Approximate distance from z to the non-smoothness seams of the chain,
    /// in source-cell coordinates (conservative local-scale estimate).
    pub fn seam_distance(&self, z: C64) -> f64 {
        let w = match self.phi.eval(z) {
            Ok(w) => w,
            Err(_) => return 0.0,
        };
        // phi seams: bottom-vertex fibers; measured in S, rescaled to the
        // cell base.
        let scale = 0.5 * self.source.base_len();
        let mut d = self.phi.seam_distance(w) * scale;
        if self.kind == ExtensionKind::Mobius {
            let eta = self.eta.as_ref().unwrap();
            let psi = self.psi.as_ref().unwrap();
            d = d.min(self.base.seam_distance(w) * scale);
            if let Ok(h) = self.base.forward(w) {
                // Normalize half-plane distances by the local conformal
                // scale of p (crudely: by the Jacobian norm).
                let loc = self
                    .base
                    .jacobian(w)
                    .map(|j| {
                        let n = (j.0[0][0].powi(2)
                            + j.0[0][1].powi(2)
                            + j.0[1][0].powi(2)
                            + j.0[1][1].powi(2))
                        .sqrt();
                        n.max(1e-12)
                    })
                    .unwrap_or(1.0);
                d = d.min(eta.seam_distance(h) / loc * scale);
                let h2 = eta.extend(h);
                d = d.min(psi.seam_distance(h2) / loc * scale);
            }
        }
        d
    }

    /// Pointwise dilatation of the cell map.
    pub fn dilatation_at(&self, z: C64, mode: DilatationMode) -> Result<f64> {
        match mode {
            DilatationMode::Analytic => self.jacobian(z)?.dilatation(),
            DilatationMode::Numeric => {
                let seam = self.seam_distance(z);
                let diam = self.source.diameter();
                if seam < 1e-6 * diam {
                    return Err(Error::SeamProximity);
                }
                let border = (z.re - self.source.t0)
                    .min(self.source.tk - z.re)
                    .min(z.im - self.source.g2(z.re))
                    .min(self.source.g1(z.re) - z.im);
                let h = 1e-3 * border.min(seam).max(0.0);
                if h < 1e-14 {
                    return Err(Error::StepUnderflow);
                }
                let j_h = self.fd_jacobian(z, h)?;
                let j_h2 = self.fd_jacobian(z, 0.5 * h)?;
                // Richardson extrapolation of the central differences.
                let mut j = [[0.0; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        j[r][c] = (4.0 * j_h2.0[r][c] - j_h.0[r][c]) / 3.0;
                    }
                }
                Mat2(j).dilatation()
            }
        }
    }

    fn fd_jacobian(&self, z: C64, h: f64) -> Result<Mat2> {
        let fx = (self.apply(z + h)? - self.apply(z - h)?) / (2.0 * h);
        let fy = (self.apply(z + C64::new(0.0, h))? - self.apply(z - C64::new(0.0, h))?)
            / (2.0 * h);
        Ok(Mat2([[fx.re, fy.re], [fx.im, fy.im]]))
    }

    /// The constant sup-dilatation contributed by the Mobius stage alone.
    pub fn mobius_stage_dilatation(&self) -> f64 {
        match &self.psi {
            Some(psi) => psi.left.dilatation().max(psi.right.dilatation()),
            None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSupReport {
    pub k_sup: f64,
    pub k_median: f64,
    /// Fraction of uniform samples with dilatation above the threshold.
    pub area_fraction_above: f64,
    pub threshold: f64,
    pub n_uniform: usize,
    pub n_targeted: usize,
    pub n_seam_skipped: usize,
}

/// Stratified sampling of the dilatation field of one cell map: uniform
/// samples estimate the distribution and the area fraction above the
/// threshold, targeted samples in the pullback of the half-disks sharpen
/// the sup estimate.
pub fn cell_sup_dilatation(
    map: &CellMap<'_>,
    seed: u64,
    budget: usize,
    threshold: f64,
) -> Result<CellSupReport> {
    if budget < 20 {
        return Err(Error::BudgetTooSmall(format!("budget {budget}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = &map.source;
    let y_lo = cell.bottom.iter().map(|&(_, y)| y).fold(f64::MAX, f64::min);
    let y_hi = cell.y_top.0.max(cell.y_top.1);
    let mut ks = Vec::new();
    let mut skipped = 0usize;
    let mut n_uniform = 0usize;
    let n_target_budget = budget / 4;
    let n_uniform_budget = budget - n_target_budget;
    let mut above = 0usize;
    let mut attempts = 0usize;
    while n_uniform < n_uniform_budget && attempts < 50 * n_uniform_budget {
        attempts += 1;
        let x = rng.gen_range(cell.t0..cell.tk);
        let y = rng.gen_range(y_lo..y_hi);
        let g2 = cell.g2(x);
        let g1 = cell.g1(x);
        if y <= g2 + 1e-12 || y >= g1 - 1e-12 {
            continue;
        }
        let z = C64::new(x, y);
        match map.dilatation_at(z, DilatationMode::Analytic) {
            Ok(k) => {
                if k >= threshold {
                    above += 1;
                }
                ks.push(k);
                n_uniform += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    if n_uniform == 0 {
        return Err(Error::ResolutionInsufficient(
            "no uniform samples landed in the cell".into(),
        ));
    }
    let area_fraction = above as f64 / n_uniform as f64;
    // Targeted samples in the pullback of the two half-disks.
    let mut n_targeted = 0usize;
    if let (Some(psi), Some(eta)) = (&map.psi, &map.eta) {
        let mut tries = 0usize;
        while n_targeted < n_target_budget && tries < 50 * n_target_budget {
            tries += 1;
            let (c, r) = if tries % 2 == 0 {
                (psi.left.center(), psi.left.radius())
            } else {
                (psi.right.center(), psi.right.radius())
            };
            let h2 = C64::new(
                c + r * rng.gen_range(-1.0..1.0),
                r * rng.gen_range(1e-3..1.0),
            );
            if !psi.left.contains(h2) && !psi.right.contains(h2) {
                continue;
            }
            let h = eta.extend_inverse(h2);
            let w = match map.base.inverse(h) {
                Ok(w) => w,
                Err(_) => continue,
            };
            if w.re.abs() >= 1.0 - 1e-9 || !(1e-9..2.0 - 1e-9).contains(&w.im) {
                continue;
            }
            let z = match map.phi.eval_inverse(w) {
                Ok(z) => z,
                Err(_) => continue,
            };
            if !cell.contains(z.re, z.im) {
                continue;
            }
            match map.dilatation_at(z, DilatationMode::Analytic) {
                Ok(k) => {
                    ks.push(k);
                    n_targeted += 1;
                }
                Err(_) => skipped += 1,
            }
        }
    }
    let mut sorted = ks.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(CellSupReport {
        k_sup: *sorted.last().unwrap(),
        k_median: sorted[sorted.len() / 2],
        area_fraction_above: area_fraction,
        threshold,
        n_uniform,
        n_targeted,
        n_seam_skipped: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basemap::PFast;
    use crate::grid::build_grid;

    fn synthetic_pair(k: usize, warp: bool) -> (Cell, Cell) {
        let uniform: Vec<f64> = (0..k).map(|j| j as f64 / k as f64).collect();
        let warped: Vec<f64> = (0..k)
            .map(|j| {
                let u = j as f64 / k as f64;
                if warp {
                    u * u * (2.0 - u)
                } else {
                    u
                }
            })
            .collect();
        let g1 = build_grid(vec![vec![0.0], uniform]).unwrap();
        let g2 = build_grid(vec![vec![0.0], warped]).unwrap();
        (g1.cell(0, 0).unwrap(), g2.cell(0, 0).unwrap())
    }

    #[test]
    fn boundary_vertices_correspond() {
        let (src, dst) = synthetic_pair(5, true);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &dst, &base).unwrap();
        assert_eq!(map.kind, ExtensionKind::Mobius);
        for (j, &(x, y)) in src.bottom.iter().enumerate() {
            let img = map.apply(C64::new(x, y)).unwrap();
            let (xp, yp) = dst.bottom[j];
            assert!(
                (img - C64::new(xp, yp)).norm() < 1e-9,
                "vertex {j}: {img} vs ({xp}, {yp})"
            );
        }
        // Top corners.
        let img = map.apply(C64::new(src.t0, src.y_top.0)).unwrap();
        assert!((img - C64::new(dst.t0, dst.y_top.0)).norm() < 1e-9);
    }

    #[test]
    fn interior_maps_into_target_and_inverts() {
        let (src, dst) = synthetic_pair(6, true);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &dst, &base).unwrap();
        for i in 1..8 {
            for j in 1..8 {
                let z = C64::new(
                    src.t0 + src.base_len() * i as f64 / 8.0,
                    0.02 + 0.9 * j as f64 / 8.0,
                );
                if !src.contains(z.re, z.im) {
                    continue;
                }
                let w = map.apply(z).unwrap();
                assert!(
                    dst.contains(w.re, w.im),
                    "z = {z} left the target cell: {w}"
                );
                let back = map.apply_inverse(w).unwrap();
                assert!((back - z).norm() < 1e-6, "z = {z} back = {back}");
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_numeric() {
        let (src, dst) = synthetic_pair(7, true);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &dst, &base).unwrap();
        let pts = [
            C64::new(0.23, 0.41),
            C64::new(0.55, 0.12),
            C64::new(0.81, 0.66),
        ];
        for &z in &pts {
            if map.seam_distance(z) < 1e-3 {
                continue;
            }
            let ka = map.dilatation_at(z, DilatationMode::Analytic).unwrap();
            let kn = map.dilatation_at(z, DilatationMode::Numeric).unwrap();
            assert!(
                (ka - kn).abs() <= 0.01 * ka,
                "z = {z}: analytic {ka} vs numeric {kn}"
            );
        }
    }

    #[test]
    fn identity_pair_fixes_boundary() {
        let (src, _) = synthetic_pair(5, false);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &src, &base).unwrap();
        // Boundary is fixed pointwise.
        for i in 0..=10 {
            let x = src.t0 + src.base_len() * i as f64 / 10.0;
            let img = map.apply(C64::new(x, src.g2(x))).unwrap();
            assert!((img - C64::new(x, src.g2(x))).norm() < 1e-9, "x = {x}");
            let img = map.apply(C64::new(x, src.g1(x))).unwrap();
            assert!((img - C64::new(x, src.g1(x))).norm() < 1e-9);
        }
        // Interior points stay in the cell.
        let z = C64::new(0.37, 0.5);
        let w = map.apply(z).unwrap();
        assert!(src.contains(w.re, w.im));
    }

    #[test]
    fn small_k_uses_affine_fallback() {
        let (src, dst) = synthetic_pair(2, true);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &dst, &base).unwrap();
        assert_eq!(map.kind, ExtensionKind::Affine);
        let z = C64::new(0.3, 0.7);
        assert!(src.contains(z.re, z.im));
        let w = map.apply(z).unwrap();
        assert!(dst.contains(w.re, w.im));
        let back = map.apply_inverse(w).unwrap();
        assert!((back - z).norm() < 1e-10);
        let ka = map.dilatation_at(z, DilatationMode::Analytic).unwrap();
        let kn = map.dilatation_at(z, DilatationMode::Numeric).unwrap();
        assert!((ka - kn).abs() < 0.01 * ka);
        // No Mobius stage: modest dilatation.
        assert!(ka < 10.0);
    }

    #[test]
    fn edge_maps_agree_between_neighbors() {
        // Two adjacent cells at level 1 share a vertical edge; both cell
        // maps restrict to the same correspondence on it.
        let levels_src = vec![
            vec![0.0],
            vec![0.0, 0.25, 0.5, 0.75],
            vec![0.0, 0.1, 0.25, 0.34, 0.5, 0.6, 0.75, 0.9],
        ];
        let levels_dst = vec![
            vec![0.0],
            vec![0.0, 0.3, 0.55, 0.8],
            vec![0.0, 0.12, 0.3, 0.4, 0.55, 0.68, 0.8, 0.93],
        ];
        let gs = build_grid(levels_src).unwrap();
        let gd = build_grid(levels_dst).unwrap();
        let base = PFast::new();
        let left = yoccoz_cell_map(&gs.cell(1, 0).unwrap(), &gd.cell(1, 0).unwrap(), &base)
            .unwrap();
        let right = yoccoz_cell_map(&gs.cell(1, 1).unwrap(), &gd.cell(1, 1).unwrap(), &base)
            .unwrap();
        let x = gs.cell(1, 0).unwrap().tk;
        for j in 0..=6 {
            let y = gs.cell(1, 0).unwrap().g2(x)
                + (gs.cell(1, 0).unwrap().g1(x) - gs.cell(1, 0).unwrap().g2(x)) * j as f64 / 6.0;
            let z = C64::new(x, y);
            let a = left.apply(z).unwrap();
            let b = right.apply(z).unwrap();
            assert!((a - b).norm() < 1e-9, "y = {y}: {a} vs {b}");
        }
    }

    #[test]
    fn sup_dilatation_reflects_mobius_stage() {
        let (src, dst) = synthetic_pair(12, true);
        let base = PFast::new();
        let map = yoccoz_cell_map(&src, &dst, &base).unwrap();
        let stage_k = map.mobius_stage_dilatation();
        let rep = cell_sup_dilatation(&map, 7, 400, stage_k / 4.0).unwrap();
        assert!(rep.k_sup >= stage_k / base.dilatation_bound() / 4.0);
        assert!(rep.n_uniform > 100);
        assert!(rep.area_fraction_above >= 0.0 && rep.area_fraction_above <= 1.0);
        // Deterministic under the seed.
        let rep2 = cell_sup_dilatation(&map, 7, 400, stage_k / 4.0).unwrap();
        assert_eq!(rep.k_sup, rep2.k_sup);
        assert_eq!(rep.n_uniform, rep2.n_uniform);
    }
}
