//! Per-cell extension machinery: the Mobius family zeta_a, the piecewise
//! Mobius interpolation psi with its explicit strip-shear quasiconformal
//! extension on two half-disks, the correction map eta, and the fiber-affine
//! uniformization phi of a cell onto the standard square S = [-1,1] x [0,2].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Cell, PiecewiseAffine};

pub type C64 = Complex64;

/// Real 2x2 matrix as the Jacobian currency of the whole chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Multiplication by a complex scalar as a rotation-scaling.
    pub fn from_complex(c: C64) -> Self {
        Mat2([[c.re, -c.im], [c.im, c.re]])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Result<Mat2> {
        let d = self.det();
        if d.abs() < 1e-300 {
            return Err(Error::StepUnderflow);
        }
        Ok(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }

    /// Quasiconformal dilatation: ratio of singular values. Errors on
    /// orientation reversal.
    pub fn dilatation(&self) -> Result<f64> {
        let d = self.det();
        if d <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "orientation-reversing Jacobian, det = {d}"
            )));
        }
        let a = self.0[0][0];
        let b = self.0[0][1];
        let c = self.0[1][0];
        let e = self.0[1][1];
        // Frobenius norm^2 = s_max^2 + s_min^2, det = s_max s_min.
        let f2 = a * a + b * b + c * c + e * e;
        let t = f2 / (2.0 * d);
        // K = s_max/s_min solves K + 1/K = f2/det.
        Ok(t + (t * t - 1.0).max(0.0).sqrt())
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (
            self.0[0][0] * v.0 + self.0[0][1] * v.1,
            self.0[1][0] * v.0 + self.0[1][1] * v.1,
        )
    }
}

// ---------------------------------------------------------------------------
// zeta_a
// ---------------------------------------------------------------------------

/// zeta_a(x) = x / (a - (a-1) x): fixes 0 and 1 with multipliers 1/a and a.
pub fn zeta_eval(a: f64, x: f64) -> Result<f64> {
    let denom = a - (a - 1.0) * x;
    if denom.abs() < 1e-12 {
        return Err(Error::PoleProximity(denom));
    }
    Ok(x / denom)
}

/// zeta_a'(x) = a / (a - (a-1) x)^2.
pub fn zeta_derivative(a: f64, x: f64) -> Result<f64> {
    let denom = a - (a - 1.0) * x;
    if denom.abs() < 1e-12 {
        return Err(Error::PoleProximity(denom));
    }
    Ok(a / (denom * denom))
}

/// Inverse: zeta_a^{-1}(y) = a y / (1 + (a-1) y) (= zeta_{1/a}).
pub fn zeta_inverse(a: f64, y: f64) -> Result<f64> {
    let denom = 1.0 + (a - 1.0) * y;
    if denom.abs() < 1e-12 {
        return Err(Error::PoleProximity(denom));
    }
    Ok(a * y / denom)
}

#[derive(Debug, Clone, Serialize)]
pub struct ZetaPropertyVerdict {
    pub derivative_ratio: f64,
    pub derivative_upper: f64,
    pub increment: f64,
    pub increment_lower: f64,
    pub pass: bool,
}

/// The two inequality pairs of the Mobius-family proposition:
/// 1 < zeta'(x+eps)/zeta'(x) <= (1 + eps a)^2 and
/// eps^3 a / ((1+eps a)^2 (1-x)^2) <= zeta(x+eps) - zeta(x).
pub fn zeta_property_check(a: f64, x: f64, eps: f64) -> Result<ZetaPropertyVerdict> {
    if !(eps > 0.0 && x >= 0.0 && x + eps <= 1.0) {
        return Err(Error::OutsideDomain(format!("x = {x}, eps = {eps}")));
    }
    let ratio = zeta_derivative(a, x + eps)? / zeta_derivative(a, x)?;
    let upper = (1.0 + eps * a).powi(2);
    let inc = zeta_eval(a, x + eps)? - zeta_eval(a, x)?;
    let lower = if x < 1.0 {
        eps.powi(3) * a / ((1.0 + eps * a).powi(2) * (1.0 - x).powi(2))
    } else {
        0.0
    };
    let pass = ratio > 1.0 && ratio <= upper * (1.0 + 1e-12) && inc + 1e-15 >= lower;
    Ok(ZetaPropertyVerdict {
        derivative_ratio: ratio,
        derivative_upper: upper,
        increment: inc,
        increment_lower: lower,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Strip shear
// ---------------------------------------------------------------------------

/// The constant dilatation of the strip shear with multiplier a: with
/// u = log(a)/pi, K = (sqrt(1+u^2)+u) / (sqrt(1+u^2)-u).
pub fn strip_shear_dilatation(a: f64) -> f64 {
    let u = a.ln() / std::f64::consts::PI;
    let r = (1.0 + u * u).sqrt();
    (r + u.abs()) / (r - u.abs())
}

// ---------------------------------------------------------------------------
// Half-disk branch extension
// ---------------------------------------------------------------------------

/// Real Mobius transformation z -> (a z + b)/(c z + d) with positive
/// determinant (preserves the upper half-plane).
#[derive(Debug, Clone, Copy)]
struct Mobius {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Mobius {
    fn apply(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    fn derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        C64::new(self.a * self.d - self.b * self.c, 0.0) / (den * den)
    }

    fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// One conjugated branch of the psi extension: a half-disk in the upper
/// half-plane with diameter [lo, hi], carried by a Mobius change of
/// coordinates to a quadrant, by log to a strip of height pi/2, sheared
/// there, and brought back. Dilatation is constant on the half-disk.
#[derive(Debug, Clone)]
pub struct HalfDiskBranch {
    pub lo: f64,
    pub hi: f64,
    /// Branch multiplier (the a or b of the split).
    pub mult: f64,
    mobius: Mobius,
    /// True when the diameter maps to the line Im w = pi (right branch).
    diameter_at_pi: bool,
}

impl HalfDiskBranch {
    /// Left branch over [lo, hi]: repelling fixed point at lo.
    pub fn left(lo: f64, hi: f64, mult: f64) -> Self {
        // M(z) = (z - lo)/(hi - z): lo -> 0, hi -> inf, det = hi - lo > 0.
        let mobius = Mobius { a: 1.0, b: -lo, c: -1.0, d: hi };
        HalfDiskBranch { lo, hi, mult, mobius, diameter_at_pi: false }
    }

    /// Right branch over [lo, hi]: repelling fixed point at hi.
    pub fn right(lo: f64, hi: f64, mult: f64) -> Self {
        // M(z) = (z - hi)/(z - lo): hi -> 0, lo -> inf, det = hi - lo > 0.
        let mobius = Mobius { a: 1.0, b: -hi, c: 1.0, d: -lo };
        HalfDiskBranch { lo, hi, mult, mobius, diameter_at_pi: true }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.im >= 0.0 && (z - C64::new(self.center(), 0.0)).norm() < self.radius()
    }

    /// Signed distance to the half-disk boundary circle (negative inside).
    pub fn circle_distance(&self, z: C64) -> f64 {
        (z - C64::new(self.center(), 0.0)).norm() - self.radius()
    }

    fn shear_coeff(&self, log_mult: f64) -> f64 {
        let c = 2.0 / std::f64::consts::PI * log_mult;
        if self.diameter_at_pi {
            c
        } else {
            -c
        }
    }

    fn warp(&self, z: C64, log_mult: f64) -> C64 {
        let w = self.mobius.apply(z).ln();
        let t = if self.diameter_at_pi {
            2.0 * w.im / std::f64::consts::PI - 1.0
        } else {
            1.0 - 2.0 * w.im / std::f64::consts::PI
        };
        let w2 = w + C64::new(t * log_mult, 0.0);
        self.mobius.inverse().apply(w2.exp())
    }

    /// The quasiconformal extension of the branch on its half-disk.
    pub fn extend(&self, z: C64) -> C64 {
        self.warp(z, self.mult.ln())
    }

    /// Inverse extension (shear with the reciprocal multiplier).
    pub fn extend_inverse(&self, z: C64) -> C64 {
        self.warp(z, -self.mult.ln())
    }

    /// Analytic Jacobian of `extend` (or its inverse for `inverse = true`).
    pub fn jacobian(&self, z: C64, inverse: bool) -> Mat2 {
        let log_mult = if inverse { -self.mult.ln() } else { self.mult.ln() };
        let m = self.mobius.apply(z);
        let c1 = self.mobius.derivative(z) / m; // d/dz log M(z)
        let w = m.ln();
        let t = if self.diameter_at_pi {
            2.0 * w.im / std::f64::consts::PI - 1.0
        } else {
            1.0 - 2.0 * w.im / std::f64::consts::PI
        };
        let shear = Mat2([[1.0, self.shear_coeff(log_mult)], [0.0, 1.0]]);
        let w2 = w + C64::new(t * log_mult, 0.0);
        let e = w2.exp();
        let c2 = e * self.mobius.inverse().derivative(e);
        Mat2::from_complex(c2).mul(&shear).mul(&Mat2::from_complex(c1))
    }

    /// The constant dilatation of the extension on this half-disk.
    pub fn dilatation(&self) -> f64 {
        strip_shear_dilatation(self.mult)
    }

    /// The boundary branch map on the diameter.
    pub fn boundary(&self, x: f64) -> f64 {
        self.extend(C64::new(x, 0.0)).re
    }
}

// ---------------------------------------------------------------------------
// psi
// ---------------------------------------------------------------------------

/// Piecewise Mobius interpolation on [-1, 1] with split point s in (-1, 1):
/// conjugated zeta_a on [-1, s] (a = floor(k/2)), conjugated zeta_b on
/// [s, 1] (b = ceil(k/2)), identity outside. The extension is the identity
/// off the two half-disks and the strip-shear conjugation on them.
#[derive(Debug, Clone)]
pub struct PiecewiseMobiusPsi {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub split: f64,
    pub left: HalfDiskBranch,
    pub right: HalfDiskBranch,
}

/// Build psi for a subdivision into k >= 4 pieces with split point `split`.
pub fn psi_build(k: usize, split: f64) -> Result<PiecewiseMobiusPsi> {
    if k <= 3 {
        return Err(Error::SmallK(k));
    }
    if !(-1.0 < split && split < 1.0) {
        return Err(Error::OutsideDomain(format!("split {split} outside (-1,1)")));
    }
    let a = (k / 2) as f64;
    let b = (k - k / 2) as f64;
    Ok(PiecewiseMobiusPsi {
        k,
        a,
        b,
        split,
        left: HalfDiskBranch::left(-1.0, split, a),
        right: HalfDiskBranch::right(split, 1.0, b),
    })
}

impl PiecewiseMobiusPsi {
    /// The boundary map psi(x): identity outside [-1, 1].
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return x;
        }
        let s = self.split;
        if x <= s {
            // s - (1+s) zeta_a((s - x)/(1 + s))
            let u = (s - x) / (1.0 + s);
            s - (1.0 + s) * zeta_eval(self.a, u).unwrap()
        } else {
            let u = (x - s) / (1.0 - s);
            s + (1.0 - s) * zeta_eval(self.b, u).unwrap()
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return 1.0;
        }
        let s = self.split;
        if x <= s {
            zeta_derivative(self.a, (s - x) / (1.0 + s)).unwrap()
        } else {
            zeta_derivative(self.b, (x - s) / (1.0 - s)).unwrap()
        }
    }

    pub fn eval_inverse(&self, y: f64) -> f64 {
        if y <= -1.0 || y >= 1.0 {
            return y;
        }
        let s = self.split;
        if y <= s {
            let u = (s - y) / (1.0 + s);
            s - (1.0 + s) * zeta_inverse(self.a, u).unwrap()
        } else {
            let u = (y - s) / (1.0 - s);
            s + (1.0 - s) * zeta_inverse(self.b, u).unwrap()
        }
    }

    /// Quasiconformal extension to the closed upper half-plane.
    pub fn extend(&self, z: C64) -> C64 {
        if self.left.contains(z) {
            self.left.extend(z)
        } else if self.right.contains(z) {
            self.right.extend(z)
        } else {
            z
        }
    }

    pub fn extend_inverse(&self, z: C64) -> C64 {
        if self.left.contains(z) {
            self.left.extend_inverse(z)
        } else if self.right.contains(z) {
            self.right.extend_inverse(z)
        } else {
            z
        }
    }

    pub fn extend_jacobian(&self, z: C64, inverse: bool) -> Mat2 {
        if self.left.contains(z) {
            self.left.jacobian(z, inverse)
        } else if self.right.contains(z) {
            self.right.jacobian(z, inverse)
        } else {
            Mat2::identity()
        }
    }

    /// Pointwise dilatation of the extension: constant per half-disk, 1
    /// outside.
    pub fn extend_dilatation(&self, z: C64) -> f64 {
        if self.left.contains(z) {
            self.left.dilatation()
        } else if self.right.contains(z) {
            self.right.dilatation()
        } else {
            1.0
        }
    }

    /// Distance to the non-differentiability seams (the two circles).
    pub fn seam_distance(&self, z: C64) -> f64 {
        self.left.circle_distance(z).abs().min(self.right.circle_distance(z).abs())
    }
}

// ---------------------------------------------------------------------------
// eta
// ---------------------------------------------------------------------------

/// The correction map eta = psi o eta2 o eta1 with piecewise-affine
/// eta1: s_j -> psi(s'_j) and eta2: psi(s'_j) -> s'_j; equals the identity
/// outside [-1, 1]. Extended to the half-plane fiberwise:
/// z -> eta(Re z) + i Im z.
#[derive(Debug, Clone)]
pub struct EtaCorrection {
    pub eta1: PiecewiseAffine,
    pub eta2: PiecewiseAffine,
    psi: PiecewiseMobiusPsi,
    pub slope_min: f64,
    pub slope_max: f64,
}

/// Build eta from matched node lists (both strictly increasing, endpoints
/// +-1, equal lengths).
pub fn eta_build(
    s_nodes: &[f64],
    s_prime_nodes: &[f64],
    psi: &PiecewiseMobiusPsi,
) -> Result<EtaCorrection> {
    if s_nodes.len() != s_prime_nodes.len() {
        return Err(Error::NodeMismatch(format!(
            "{} source vs {} target nodes",
            s_nodes.len(),
            s_prime_nodes.len()
        )));
    }
    for nodes in [s_nodes, s_prime_nodes] {
        if nodes.is_empty()
            || (nodes[0] + 1.0).abs() > 1e-9
            || (nodes[nodes.len() - 1] - 1.0).abs() > 1e-9
        {
            return Err(Error::NodeMismatch("node lists must span [-1, 1]".into()));
        }
    }
    let psi_s: Vec<f64> = s_prime_nodes.iter().map(|&s| psi.eval(s)).collect();
    let eta1 = PiecewiseAffine::new(s_nodes.to_vec(), psi_s.clone())?;
    let eta2 = PiecewiseAffine::new(psi_s, s_prime_nodes.to_vec())?;
    let mut eta = EtaCorrection {
        eta1,
        eta2,
        psi: psi.clone(),
        slope_min: f64::MAX,
        slope_max: 0.0,
    };
    // Slope band measured at segment midpoints of eta1 (eta is smooth off
    // the finitely many nodes).
    for seg in 0..eta.eta1.xs.len() - 1 {
        let x = 0.5 * (eta.eta1.xs[seg] + eta.eta1.xs[seg + 1]);
        let m = eta.derivative(x);
        eta.slope_min = eta.slope_min.min(m);
        eta.slope_max = eta.slope_max.max(m);
    }
    Ok(eta)
}

impl EtaCorrection {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return x;
        }
        self.psi.eval(self.eta2.eval(self.eta1.eval(x)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= -1.0 || x >= 1.0 {
            return 1.0;
        }
        let u = self.eta1.eval(x);
        let v = self.eta2.eval(u);
        let m1 = self.eta1.derivative_at(x);
        let m2 = self.eta2.derivative_at(u);
        self.psi.derivative(v) * m2 * m1
    }

    pub fn eval_inverse(&self, y: f64) -> f64 {
        if y <= -1.0 || y >= 1.0 {
            return y;
        }
        let v = self.psi.eval_inverse(y);
        let u = self.eta2.eval_inverse(v);
        self.eta1.eval_inverse(u)
    }

    /// Fiberwise extension.
    pub fn extend(&self, z: C64) -> C64 {
        C64::new(self.eval(z.re), z.im)
    }

    pub fn extend_inverse(&self, z: C64) -> C64 {
        C64::new(self.eval_inverse(z.re), z.im)
    }

    pub fn extend_jacobian(&self, z: C64, inverse: bool) -> Mat2 {
        let m = if inverse {
            1.0 / self.derivative(self.eval_inverse(z.re))
        } else {
            self.derivative(z.re)
        };
        Mat2([[m, 0.0], [0.0, 1.0]])
    }

    /// Distance to the nearest node fiber.
    pub fn seam_distance(&self, z: C64) -> f64 {
        self.eta1
            .xs
            .iter()
            .map(|&s| (z.re - s).abs())
            .fold(f64::MAX, f64::min)
    }
}

// ---------------------------------------------------------------------------
// phi
// ---------------------------------------------------------------------------

/// Fiber-affine uniformization of a cell onto S = [-1,1] x [0,2]:
/// phi(x + iy) = (2x - t_0 - t_k)/(t_k - t_0) + 2i (y - g_2(x))/(g_1(x) - g_2(x)).
#[derive(Debug, Clone)]
pub struct FiberAffinePhi {
    pub cell: Cell,
}

impl FiberAffinePhi {
    pub fn new(cell: Cell) -> Self {
        FiberAffinePhi { cell }
    }

    pub fn xi(&self, x: f64) -> f64 {
        (2.0 * x - self.cell.t0 - self.cell.tk) / (self.cell.tk - self.cell.t0)
    }

    pub fn x_from_xi(&self, xi: f64) -> f64 {
        0.5 * ((1.0 - xi) * self.cell.t0 + (1.0 + xi) * self.cell.tk)
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let c = &self.cell;
        if z.re < c.t0 - 1e-9 || z.re > c.tk + 1e-9 {
            return Err(Error::OutsideDomain(format!("x = {} outside base", z.re)));
        }
        let g1 = c.g1(z.re);
        let g2 = c.g2(z.re);
        let h = g1 - g2;
        if h <= 1e-14 {
            return Err(Error::DegenerateCell(format!("zero fiber height at x = {}", z.re)));
        }
        let v = 2.0 * (z.im - g2) / h;
        if !(-1e-9..=2.0 + 1e-9).contains(&v) {
            return Err(Error::OutsideDomain(format!("y = {} outside fiber", z.im)));
        }
        Ok(C64::new(self.xi(z.re), v.clamp(0.0, 2.0)))
    }

    pub fn eval_inverse(&self, w: C64) -> Result<C64> {
        if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&w.re) || !(-1e-9..=2.0 + 1e-9).contains(&w.im) {
            return Err(Error::OutsideDomain(format!("{w} outside S")));
        }
        let x = self.x_from_xi(w.re.clamp(-1.0, 1.0));
        let g1 = self.cell.g1(x);
        let g2 = self.cell.g2(x);
        Ok(C64::new(x, g2 + 0.5 * w.im.clamp(0.0, 2.0) * (g1 - g2)))
    }

    pub fn jacobian(&self, z: C64) -> Result<Mat2> {
        let c = &self.cell;
        let g1 = c.g1(z.re);
        let g2 = c.g2(z.re);
        let h = g1 - g2;
        if h <= 1e-14 {
            return Err(Error::DegenerateCell("zero fiber height".into()));
        }
        let dg1 = c.g1_slope();
        let dg2 = c.g2_slope(z.re);
        let dxi = 2.0 / (c.tk - c.t0);
        let dv_dy = 2.0 / h;
        let dv_dx = (-2.0 * dg2 * h - 2.0 * (z.im - g2) * (dg1 - dg2)) / (h * h);
        Ok(Mat2([[dxi, 0.0], [dv_dx, dv_dy]]))
    }

    /// Jacobian of the inverse at a point w of S.
    pub fn inverse_jacobian(&self, w: C64) -> Result<Mat2> {
        let z = self.eval_inverse(w)?;
        self.jacobian(z)?.inverse()
    }

    /// Distance of phi-image to the bottom-vertex fibers (phi seams).
    pub fn seam_distance(&self, w: C64) -> f64 {
        self.cell
            .bottom
            .iter()
            .map(|&(x, _)| (w.re - self.xi(x)).abs())
            .fold(f64::MAX, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellKind;

    fn square_cell() -> Cell {
        Cell {
            level: 0,
            index: 0,
            t0: 0.0,
            tk: 1.0,
            bottom: vec![(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)],
            y_top: (1.0, 1.0),
            kind: CellKind::Quad,
        }
    }

    #[test]
    fn zeta_values_and_multipliers() {
        assert!((zeta_eval(2.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for a in [2.0, 5.0, 17.0, 123.0] {
            assert!(zeta_eval(a, 0.0).unwrap().abs() < 1e-15);
            assert!((zeta_eval(a, 1.0).unwrap() - 1.0).abs() < 1e-15);
            assert!((zeta_derivative(a, 0.0).unwrap() - 1.0 / a).abs() < 1e-15);
            assert!((zeta_derivative(a, 1.0).unwrap() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_derivative_increasing_and_inverse() {
        let a = 7.0;
        let mut last = 0.0;
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let d = zeta_derivative(a, x).unwrap();
            assert!(d > last);
            last = d;
            let y = zeta_eval(a, x).unwrap();
            assert!((zeta_inverse(a, y).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn zeta_property_example() {
        // a=2, x=0, eps=1/2: ratio = zeta'(1/2)/zeta'(0) = (8/9)/(1/2) = 16/9.
        let v = zeta_property_check(2.0, 0.0, 0.5).unwrap();
        assert!((v.derivative_ratio - 16.0 / 9.0).abs() < 1e-12);
        assert!((v.derivative_upper - 4.0).abs() < 1e-15);
        assert!(v.pass);
    }

    #[test]
    fn zeta_property_sweep() {
        for a in [2.0, 3.0, 10.0, 100.0, 1000.0] {
            for i in 0..10 {
                for j in 1..10 {
                    let x = i as f64 / 10.0;
                    let eps = (1.0 - x) * j as f64 / 10.0;
                    if eps <= 0.0 {
                        continue;
                    }
                    let v = zeta_property_check(a, x, eps).unwrap();
                    assert!(v.pass, "a={a} x={x} eps={eps}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn strip_shear_k_at_e_pi() {
        let k = strip_shear_dilatation(std::f64::consts::PI.exp());
        assert!((k - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12, "K = {k}");
        assert!((strip_shear_dilatation(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn psi_fixed_points_and_example() {
        let psi = psi_build(4, 0.0).unwrap();
        assert_eq!(psi.a, 2.0);
        assert_eq!(psi.b, 2.0);
        assert!((psi.eval(-1.0) + 1.0).abs() < 1e-15);
        assert!(psi.eval(0.0).abs() < 1e-15);
        assert!((psi.eval(1.0) - 1.0).abs() < 1e-15);
        // psi(-1/2) = -zeta_2(1/2) = -1/3.
        assert!((psi.eval(-0.5) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn psi_monotone_and_inverse() {
        let psi = psi_build(11, 0.3).unwrap();
        let mut last = -1.0;
        for i in 1..100 {
            let x = -1.0 + 2.0 * i as f64 / 100.0;
            let y = psi.eval(x);
            assert!(y > last);
            last = y;
            assert!((psi.eval_inverse(y) - x).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_one_sided_derivative_at_endpoints() {
        let psi = psi_build(10, -0.2).unwrap();
        // Multiplier a at -1, b at 1, 1/a and 1/b at the split.
        let h = 1e-7;
        let d = (psi.eval(-1.0 + h) - psi.eval(-1.0)) / h;
        assert!((d - psi.a).abs() < 1e-4 * psi.a, "d = {d}");
        let d = (psi.eval(1.0) - psi.eval(1.0 - h)) / h;
        assert!((d - psi.b).abs() < 1e-4 * psi.b);
        let d = (psi.eval(psi.split) - psi.eval(psi.split - h)) / h;
        assert!((d - 1.0 / psi.a).abs() < 1e-4);
    }

    #[test]
    fn psi_extension_identity_outside() {
        let psi = psi_build(8, 0.1).unwrap();
        let z = C64::new(0.0, 2.0);
        assert_eq!(psi.extend(z), z);
        assert_eq!(psi.extend_dilatation(z), 1.0);
        // Just above the semicircles but outside both half-disks.
        let z = C64::new(psi.split, 1.0);
        assert_eq!(psi.extend(z), z);
    }

    #[test]
    fn psi_extension_boundary_trace() {
        let psi = psi_build(9, -0.35).unwrap();
        for i in 1..100 {
            let x = -1.0 + 2.0 * i as f64 / 100.0;
            if (x - psi.split).abs() < 1e-9 {
                continue;
            }
            let w = psi.extend(C64::new(x, 0.0));
            assert!(
                (w.re - psi.eval(x)).abs() < 1e-12 && w.im.abs() < 1e-12,
                "x = {x}: {w} vs {}",
                psi.eval(x)
            );
        }
    }

    #[test]
    fn psi_extension_constant_dilatation_inside() {
        let psi = psi_build(20, 0.25).unwrap();
        let expected_left = strip_shear_dilatation(10.0);
        for i in 1..10 {
            for j in 1..8 {
                // Points inside the left half-disk.
                let x = -1.0 + (psi.split + 1.0) * i as f64 / 10.0;
                let r = psi.left.radius();
                let y = r * j as f64 / 10.0;
                let z = C64::new(x, y);
                if !psi.left.contains(z) {
                    continue;
                }
                let k = psi.extend_jacobian(z, false).dilatation().unwrap();
                assert!(
                    (k - expected_left).abs() < 1e-9 * expected_left,
                    "z = {z}: K = {k} vs {expected_left}"
                );
            }
        }
    }

    #[test]
    fn psi_extension_maps_half_disk_into_itself() {
        let psi = psi_build(14, -0.1).unwrap();
        for i in 1..10 {
            for j in 1..10 {
                let c = psi.right.center();
                let r = psi.right.radius();
                let z = C64::new(
                    c + r * 0.9 * (i as f64 / 10.0 - 0.5),
                    r * 0.9 * j as f64 / 10.0,
                );
                if !psi.right.contains(z) {
                    continue;
                }
                let w = psi.right.extend(z);
                assert!(psi.right.circle_distance(w) < 1e-9, "z = {z} w = {w}");
                assert!(w.im > 0.0);
                let back = psi.right.extend_inverse(w);
                assert!((back - z).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn psi_jacobian_matches_finite_differences() {
        let psi = psi_build(17, 0.4).unwrap();
        let pts = [C64::new(-0.5, 0.3), C64::new(0.6, 0.15), C64::new(0.45, 0.4)];
        for &z in &pts {
            let j = psi.extend_jacobian(z, false);
            let h = 1e-6;
            let fx = (psi.extend(z + h) - psi.extend(z - h)) / (2.0 * h);
            let fy = (psi.extend(z + C64::new(0.0, h)) - psi.extend(z - C64::new(0.0, h)))
                / (2.0 * h);
            assert!((j.0[0][0] - fx.re).abs() < 1e-5, "z = {z}");
            assert!((j.0[1][0] - fx.im).abs() < 1e-5);
            assert!((j.0[0][1] - fy.re).abs() < 1e-5);
            assert!((j.0[1][1] - fy.im).abs() < 1e-5);
        }
    }

    #[test]
    fn eta_identity_when_nodes_match() {
        let psi = psi_build(4, 0.0).unwrap();
        let nodes = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        // s_j = psi^{-1}-images make eta1 = psi-nodes; with s = s', eta
        // fixes every node but is not the identity in between. The true
        // identity case: s_j equal to psi(s'_j) images composed back.
        let eta = eta_build(&nodes, &nodes, &psi).unwrap();
        for &x in &nodes {
            assert!((eta.eval(x) - psi.eval(x)).abs() < 1e-12);
        }
        // Extension keeps the imaginary part.
        let z = C64::new(0.3, 0.7);
        assert_eq!(eta.extend(z).im, 0.7);
    }

    #[test]
    fn eta_inverse_roundtrip_and_slopes() {
        let psi = psi_build(8, 0.2).unwrap();
        let s: Vec<f64> = (0..=8).map(|j| -1.0 + 2.0 * j as f64 / 8.0).collect();
        // Unevenly spread targets.
        let sp: Vec<f64> = (0..=8)
            .map(|j| {
                let u = j as f64 / 8.0;
                -1.0 + 2.0 * u * u * (3.0 - 2.0 * u)
            })
            .collect();
        let eta = eta_build(&s, &sp, &psi).unwrap();
        for j in 0..=8 {
            assert!((eta.eval(s[j]) - psi.eval(sp[j])).abs() < 1e-12);
        }
        for i in 1..40 {
            let x = -1.0 + 2.0 * i as f64 / 40.0;
            assert!((eta.eval_inverse(eta.eval(x)) - x).abs() < 1e-9);
        }
        assert!(eta.slope_min > 0.0);
        assert!(eta.slope_max < 50.0);
    }

    #[test]
    fn phi_square_cell_closed_form() {
        let phi = FiberAffinePhi::new(square_cell());
        for i in 0..=10 {
            for j in 0..=10 {
                let z = C64::new(i as f64 / 10.0, j as f64 / 10.0);
                let w = phi.eval(z).unwrap();
                assert!((w.re - (2.0 * z.re - 1.0)).abs() < 1e-14);
                assert!((w.im - 2.0 * z.im).abs() < 1e-14);
                let back = phi.eval_inverse(w).unwrap();
                assert!((back - z).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn phi_endpoint_contract() {
        let mut cell = square_cell();
        cell.bottom = vec![(0.0, 0.2), (0.4, 0.1), (1.0, 0.3)];
        let phi = FiberAffinePhi::new(cell.clone());
        let w = phi.eval(C64::new(0.0, 0.2)).unwrap();
        assert!((w - C64::new(-1.0, 0.0)).norm() < 1e-13);
        let w = phi.eval(C64::new(1.0, 0.3)).unwrap();
        assert!((w - C64::new(1.0, 0.0)).norm() < 1e-13);
        let w = phi.eval(C64::new(0.0, 1.0)).unwrap();
        assert!((w - C64::new(-1.0, 2.0)).norm() < 1e-13);
        // Interior bottom vertex to the base line.
        let w = phi.eval(C64::new(0.4, 0.1)).unwrap();
        assert!(w.im.abs() < 1e-13);
    }

    #[test]
    fn phi_jacobian_matches_finite_differences() {
        let mut cell = square_cell();
        cell.bottom = vec![(0.0, 0.2), (0.4, 0.1), (1.0, 0.3)];
        cell.y_top = (0.9, 1.1);
        let phi = FiberAffinePhi::new(cell);
        let z = C64::new(0.61, 0.55);
        let j = phi.jacobian(z).unwrap();
        let h = 1e-7;
        let fx = (phi.eval(z + h).unwrap() - phi.eval(z - h).unwrap()) / (2.0 * h);
        let fy =
            (phi.eval(z + C64::new(0.0, h)).unwrap() - phi.eval(z - C64::new(0.0, h)).unwrap())
                / (2.0 * h);
        assert!((j.0[0][0] - fx.re).abs() < 1e-6);
        assert!((j.0[1][0] - fx.im).abs() < 1e-6);
        assert!((j.0[0][1] - fy.re).abs() < 1e-6);
        assert!((j.0[1][1] - fy.im).abs() < 1e-6);
    }

    #[test]
    fn mat2_dilatation() {
        assert!((Mat2::identity().dilatation().unwrap() - 1.0).abs() < 1e-15);
        let shear = Mat2([[1.0, 2.0], [0.0, 1.0]]);
        // K + 1/K = (1 + 4 + 1)/1 = 6.
        let k = shear.dilatation().unwrap();
        assert!((k + 1.0 / k - 6.0).abs() < 1e-12);
        let flip = Mat2([[0.0, 1.0], [1.0, 0.0]]);
        assert!(flip.dilatation().is_err());
        let c = Mat2::from_complex(C64::new(0.3, -1.2));
        assert!((c.dilatation().unwrap() - 1.0).abs() < 1e-12);
    }
}
