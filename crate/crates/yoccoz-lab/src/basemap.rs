//! Pluggable base maps p: S -> H, where S = [-1,1] x [0,2] is the standard
//! square and H the upper half-plane, with the identity trace on the base
//! segment [-1, 1].
//!
//! Two implementations:
//!
//! * [`PDefault`] — the conformal rectangle map p1(z) = sn(K z | m) at the
//!   parameter with K'/K = 2, corrected on the boundary by the
//!   Beurling-Ahlfors extension of v = p1|_base^{-1};
//! * [`PFast`] — a closed-form quasiconformal alternative (radial map of S
//!   onto the unit half-disk followed by a conformal strip doubling) with
//!   cheap forward and inverse evaluation for mass sampling.

use num_complex::Complex64;

use crate::elliptic::{asn_complex, cn_dn_complex, complete_k, incomplete_f, parameter_kp_over_k_two, sn_complex};
use crate::error::{Error, Result};
use crate::extension::Mat2;

pub type C64 = Complex64;

/// A base map of the standard square onto the upper half-plane with the
/// identity trace on [-1, 1].
pub trait BaseMap: Send + Sync {
    fn name(&self) -> &'static str;
    /// Forward map at an interior point of S.
    fn forward(&self, z: C64) -> Result<C64>;
    /// Inverse map at an interior point of H (image of S interior).
    fn inverse(&self, w: C64) -> Result<C64>;
    /// Analytic Jacobian of the forward map.
    fn jacobian(&self, z: C64) -> Result<Mat2>;
    /// A recorded (sampled) upper bound on the dilatation.
    fn dilatation_bound(&self) -> f64;
    /// Distance (in S coordinates) to the non-smoothness seams of the map.
    fn seam_distance(&self, z: C64) -> f64;
}

fn check_in_square(z: C64) -> Result<()> {
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&z.re) || !(-1e-9..=2.0 + 1e-9).contains(&z.im) {
        return Err(Error::OutsideDomain(format!("{z} outside S")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage one: the conformal rectangle map.
// ---------------------------------------------------------------------------

/// The conformal map p1(z) = sn(K z | m) from S onto H, where m is the
/// parameter with K'(m)/K(m) = 2 so that S scales to the fundamental
/// rectangle [-K, K] x [0, K'].
#[derive(Debug, Clone, Copy)]
pub struct ConformalStage {
    pub m: f64,
    pub kell: f64,
}

impl ConformalStage {
    pub fn new() -> Self {
        let m = parameter_kp_over_k_two();
        ConformalStage { m, kell: complete_k(m) }
    }

    pub fn forward(&self, z: C64) -> C64 {
        sn_complex(self.kell * z, self.m)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let (cn, dn) = cn_dn_complex(self.kell * z, self.m);
        self.kell * cn * dn
    }

    pub fn inverse(&self, w: C64) -> C64 {
        asn_complex(w, self.m) / self.kell
    }

    /// The base trace tau(x) = sn(K x | m), an increasing homeomorphism of
    /// [-1, 1] fixing the endpoints.
    pub fn trace(&self, x: f64) -> f64 {
        self.forward(C64::new(x, 0.0)).re
    }

    /// v = tau^{-1}: v(u) = F(asin u | m) / K on [-1, 1], identity outside.
    pub fn v(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return u;
        }
        incomplete_f(u.asin(), self.m) / self.kell
    }

    /// v'(u) = 1 / (K sqrt((1-u^2)(1-m u^2))) on (-1, 1), 1 outside.
    pub fn v_prime(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 1.0;
        }
        1.0 / (self.kell * ((1.0 - u * u) * (1.0 - self.m * u * u)).sqrt())
    }

    /// V(u) = int_0^u v, in closed form via integration by parts:
    /// V(u) = u v(u) - I(u)/K with
    /// I(u) = (1/sqrt m)[log(1 + sqrt m) - log(sqrt(m(1-u^2)) + sqrt(1-m u^2))]
    /// on [0, 1]; V is even and V(u) = V(1) + (u^2 - 1)/2 for u >= 1.
    pub fn v_cumulative(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= 1.0 {
            return self.v_cumulative_unit() + 0.5 * (a * a - 1.0);
        }
        let m = self.m;
        let sm = m.sqrt();
        let i = ((1.0 + sm).ln() - ((m * (1.0 - a * a)).sqrt() + (1.0 - m * a * a).sqrt()).ln())
            / sm;
        a * self.v(a) - i / self.kell
    }

    fn v_cumulative_unit(&self) -> f64 {
        // Limit u -> 1 of the closed form: v(1) = 1.
        let m = self.m;
        let sm = m.sqrt();
        1.0 - ((1.0 + sm).ln() - (1.0 - m).sqrt().ln()) / (sm * self.kell)
    }
}

impl Default for ConformalStage {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Beurling-Ahlfors correction and the default base map.
// ---------------------------------------------------------------------------

/// The default base map: Beurling-Ahlfors extension of v composed with the
/// conformal stage.
#[derive(Debug, Clone)]
pub struct PDefault {
    pub stage: ConformalStage,
    bound: f64,
}

impl PDefault {
    pub fn new() -> Self {
        let mut p = PDefault { stage: ConformalStage::new(), bound: 1.0 };
        // Record a sampled dilatation bound over the interior of S.
        let mut sup: f64 = 1.0;
        for i in 1..25 {
            for j in 1..25 {
                let z = C64::new(-1.0 + 2.0 * i as f64 / 25.0, 2.0 * j as f64 / 25.0);
                if let Ok(jac) = p.jacobian(z) {
                    if let Ok(k) = jac.dilatation() {
                        sup = sup.max(k);
                    }
                }
            }
        }
        p.bound = sup * 1.05;
        p
    }

    /// Beurling-Ahlfors extension of v at a point of the open half-plane.
    pub fn ba(&self, w: C64) -> C64 {
        let (u, y) = (w.re, w.im);
        if y < 1e-12 {
            return C64::new(self.stage.v(u), y * self.stage.v_prime(u));
        }
        let s = &self.stage;
        let alpha = (s.v_cumulative(u + y) - s.v_cumulative(u)) / y;
        let beta = (s.v_cumulative(u) - s.v_cumulative(u - y)) / y;
        // Normalized so that the extension of the identity is the identity:
        // real part (alpha + beta)/2, imaginary part (alpha - beta).
        C64::new(0.5 * (alpha + beta), alpha - beta)
    }

    /// Analytic Jacobian of the Beurling-Ahlfors extension.
    pub fn ba_jacobian(&self, w: C64) -> Mat2 {
        let (u, y) = (w.re, w.im);
        let s = &self.stage;
        if y < 1e-9 {
            // Boundary limit: conformal-looking v'(u) scaling.
            let vp = s.v_prime(u);
            return Mat2([[vp, 0.0], [0.0, vp]]);
        }
        let vp = s.v(u + y);
        let vm = s.v(u - y);
        let v0 = s.v(u);
        let alpha = (s.v_cumulative(u + y) - s.v_cumulative(u)) / y;
        let beta = (s.v_cumulative(u) - s.v_cumulative(u - y)) / y;
        let ax = (vp - v0) / y;
        let bx = (v0 - vm) / y;
        let ay = (vp - alpha) / y;
        let by = (vm - beta) / y;
        Mat2([
            [0.5 * (ax + bx), 0.5 * (ay + by)],
            [ax - bx, ay - by],
        ])
    }

    fn ba_inverse(&self, target: C64) -> Result<C64> {
        // Newton iteration from the target itself (the extension is a
        // bounded perturbation of the identity).
        let mut w = C64::new(target.re, target.im.max(1e-12));
        for _ in 0..200 {
            let f = self.ba(w) - target;
            if f.norm() < 1e-12 {
                return Ok(w);
            }
            let j = self.ba_jacobian(w).inverse()?;
            let (dx, dy) = j.apply((f.re, f.im));
            let mut step = C64::new(dx, dy);
            // Keep the iterate in the open half-plane.
            let mut next = w - step;
            let mut halvings = 0;
            while next.im <= 0.0 && halvings < 60 {
                step *= 0.5;
                next = w - step;
                halvings += 1;
            }
            w = next;
        }
        let resid = (self.ba(w) - target).norm();
        if resid < 1e-9 {
            Ok(w)
        } else {
            Err(Error::PrecisionExhausted(format!(
                "Beurling-Ahlfors inverse stalled at residual {resid:.3e}"
            )))
        }
    }
}

impl Default for PDefault {
    fn default() -> Self {
        Self::new()
    }
}

impl BaseMap for PDefault {
    fn name(&self) -> &'static str {
        "default"
    }

    fn forward(&self, z: C64) -> Result<C64> {
        check_in_square(z)?;
        Ok(self.ba(self.stage.forward(z)))
    }

    fn inverse(&self, w: C64) -> Result<C64> {
        if w.im < 0.0 {
            return Err(Error::OutsideDomain(format!("{w} below the real axis")));
        }
        let mid = self.ba_inverse(w)?;
        Ok(self.stage.inverse(mid))
    }

    fn jacobian(&self, z: C64) -> Result<Mat2> {
        check_in_square(z)?;
        let w = self.stage.forward(z);
        let d = self.stage.derivative(z);
        Ok(self.ba_jacobian(w).mul(&Mat2::from_complex(d)))
    }

    fn dilatation_bound(&self) -> f64 {
        self.bound
    }

    fn seam_distance(&self, z: C64) -> f64 {
        // The extension is non-smooth where the averaging window of the
        // Beurling-Ahlfors integral hits an endpoint of [-1, 1]: the lines
        // u +- y = +-1 in the intermediate half-plane.
        let w = self.stage.forward(z);
        let (u, y) = (w.re, w.im);
        [u + y - 1.0, u + y + 1.0, u - y - 1.0, u - y + 1.0]
            .iter()
            .map(|d| d.abs() / 2f64.sqrt())
            .fold(f64::MAX, f64::min)
    }
}

// ---------------------------------------------------------------------------
// The fast closed-form base map.
// ---------------------------------------------------------------------------

/// Closed-form quasiconformal base map: the radial map of S onto the unit
/// half-disk z -> z / R_S(arg z), with R_S(phi) = min(1/|cos phi|, 2/sin phi),
/// followed by the conformal strip doubling
/// w -> tanh((u + 2iv)/2), u + iv = log((1+w)/(1-w)),
/// which fixes [-1, 1] pointwise and doubles the half-disk onto H.
#[derive(Debug, Clone)]
pub struct PFast {
    bound: f64,
}

fn r_s(phi: f64) -> f64 {
    let c = phi.cos().abs();
    let s = phi.sin();
    if s <= 0.0 {
        return 1.0 / c.max(1e-300);
    }
    (1.0 / c.max(1e-300)).min(2.0 / s)
}

fn r_s_prime(phi: f64) -> f64 {
    let c = phi.cos();
    let s = phi.sin();
    if s <= 0.0 || (c.abs() > 1e-300 && 1.0 / c.abs() <= 2.0 / s) {
        // R = 1/|cos|: derivative sign follows the sign of cos.
        if c.abs() < 1e-300 {
            0.0
        } else {
            s / (c * c) * c.signum()
        }
    } else {
        -2.0 * c / (s * s)
    }
}

fn radial_forward(z: C64) -> C64 {
    if z.norm() < 1e-300 {
        return z;
    }
    z / r_s(z.arg())
}

fn radial_inverse(w: C64) -> C64 {
    if w.norm() < 1e-300 {
        return w;
    }
    w * r_s(w.arg())
}

fn radial_jacobian(z: C64) -> Mat2 {
    // H(z) = z g(phi), g = 1/R: Wirtinger derivatives
    // H_z = g + g'/(2i), H_zbar = -(z/zbar) g'/(2i).
    let phi = z.arg();
    let r = r_s(phi);
    let g = 1.0 / r;
    let gp = -r_s_prime(phi) / (r * r);
    let half_i = C64::new(0.0, 0.5);
    let a = C64::new(g, 0.0) - half_i * gp; // g + g'/(2i)
    let b = (z / z.conj()) * half_i * gp; // -(z/zbar) g'/(2i) = +(z/zbar) i g'/2 * (-1)... see below
    // 1/(2i) = -i/2, so g'/(2i) = -i g'/2 and -(z/zbar) g'/(2i) = (z/zbar) i g'/2.
    let apb = a + b;
    let amb = a - b;
    Mat2([[apb.re, -amb.im], [apb.im, amb.re]])
}

fn doubling_forward(w: C64) -> C64 {
    // u + iv = log((1+w)/(1-w)); result tanh((u + 2iv)/2).
    if (w - 1.0).norm() < 1e-15 || (w + 1.0).norm() < 1e-15 {
        return w; // fixed endpoints of the base
    }
    let om = ((1.0 + w) / (1.0 - w)).ln();
    let om2 = C64::new(om.re, 2.0 * om.im);
    (0.5 * om2).tanh()
}

fn doubling_inverse(h: C64) -> C64 {
    if (h - 1.0).norm() < 1e-15 || (h + 1.0).norm() < 1e-15 {
        return h;
    }
    let om2 = ((1.0 + h) / (1.0 - h)).ln();
    let om = C64::new(om2.re, 0.5 * om2.im);
    (0.5 * om).tanh()
}

fn doubling_jacobian(w: C64) -> Mat2 {
    // Conformal, then [[1,0],[0,2]] in strip coordinates, then conformal.
    let d1 = 2.0 / ((1.0 + w) * (1.0 - w)); // d/dw log((1+w)/(1-w))
    let om = ((1.0 + w) / (1.0 - w)).ln();
    let om2 = C64::new(om.re, 2.0 * om.im);
    let t = (0.5 * om2).tanh();
    let d2 = 0.5 * (1.0 - t * t); // d/dom2 tanh(om2/2)
    Mat2::from_complex(d2)
        .mul(&Mat2([[1.0, 0.0], [0.0, 2.0]]))
        .mul(&Mat2::from_complex(d1))
}

impl PFast {
    pub fn new() -> Self {
        let mut p = PFast { bound: 1.0 };
        let mut sup: f64 = 1.0;
        for i in 1..25 {
            for j in 1..25 {
                let z = C64::new(-1.0 + 2.0 * i as f64 / 25.0, 2.0 * j as f64 / 25.0);
                if let Ok(jac) = p.jacobian(z) {
                    if let Ok(k) = jac.dilatation() {
                        sup = sup.max(k);
                    }
                }
            }
        }
        p.bound = sup * 1.05;
        p
    }
}

impl Default for PFast {
    fn default() -> Self {
        Self::new()
    }
}

impl BaseMap for PFast {
    fn name(&self) -> &'static str {
        "fast"
    }

    fn forward(&self, z: C64) -> Result<C64> {
        check_in_square(z)?;
        Ok(doubling_forward(radial_forward(z)))
    }

    fn inverse(&self, w: C64) -> Result<C64> {
        if w.im < 0.0 {
            return Err(Error::OutsideDomain(format!("{w} below the real axis")));
        }
        Ok(radial_inverse(doubling_inverse(w)))
    }

    fn jacobian(&self, z: C64) -> Result<Mat2> {
        check_in_square(z)?;
        let w = radial_forward(z);
        Ok(doubling_jacobian(w).mul(&radial_jacobian(z)))
    }

    fn dilatation_bound(&self) -> f64 {
        self.bound
    }

    fn seam_distance(&self, z: C64) -> f64 {
        // Kinks of R_S along the rays tan(phi) = +-2 and at the origin.
        if z.norm() < 1e-12 {
            return 0.0;
        }
        let phi = z.arg();
        let corner = 2f64.atan2(1.0);
        let d1 = (phi - corner).abs() * z.norm();
        let d2 = (phi - (std::f64::consts::PI - corner)).abs() * z.norm();
        d1.min(d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_grid(n: usize) -> Vec<C64> {
        let mut pts = Vec::new();
        for i in 1..n {
            for j in 1..n {
                pts.push(C64::new(
                    -1.0 + 2.0 * i as f64 / n as f64,
                    2.0 * j as f64 / n as f64,
                ));
            }
        }
        pts
    }

    #[test]
    fn conformal_stage_roundtrip() {
        let s = ConformalStage::new();
        for z in interior_grid(12) {
            if z.re.abs() < 0.05 && z.im > 1.9 {
                continue; // near the pole over the top midpoint
            }
            let w = s.forward(z);
            assert!(w.im > 0.0, "z = {z}, w = {w}");
            let back = s.inverse(w);
            assert!((back - z).norm() < 1e-8, "z = {z}, back = {back}");
        }
    }

    #[test]
    fn conformal_trace_and_v_are_mutually_inverse() {
        let s = ConformalStage::new();
        for i in 0..=20 {
            let x = -1.0 + 2.0 * i as f64 / 20.0;
            let t = s.trace(x);
            assert!((s.v(t) - x).abs() < 1e-10, "x = {x}");
        }
        assert!((s.v(1.0) - 1.0).abs() < 1e-12);
        assert!((s.v(-1.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn v_cumulative_matches_quadrature() {
        // Independent oracle: Simpson quadrature of v against the closed
        // form obtained by integration by parts.
        let s = ConformalStage::new();
        for &u in &[0.1f64, 0.5, 0.9, 0.999, 1.0, 1.7, -0.6] {
            let a = u.abs().min(1.0);
            let n = 20000;
            let h = a / n as f64;
            let mut acc = s.v(0.0) + s.v(a);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * s.v(i as f64 * h);
            }
            let mut quad = acc * h / 3.0;
            if u.abs() > 1.0 {
                quad += 0.5 * (u * u - 1.0);
            }
            let closed = s.v_cumulative(u);
            assert!((closed - quad).abs() < 1e-7, "u = {u}: {closed} vs {quad}");
        }
    }

    #[test]
    fn ba_extends_v_and_stays_in_half_plane() {
        let p = PDefault::new();
        for i in 0..=40 {
            let u = -2.0 + 4.0 * i as f64 / 40.0;
            let w = p.ba(C64::new(u, 0.0));
            assert!((w.re - p.stage.v(u)).abs() < 1e-12, "u = {u}");
        }
        for i in 0..20 {
            for j in 1..20 {
                let w = C64::new(-3.0 + 6.0 * i as f64 / 19.0, 3.0 * j as f64 / 19.0);
                let img = p.ba(w);
                assert!(img.im > 0.0, "w = {w} img = {img}");
            }
        }
        // Identity where the averaging window misses [-1, 1].
        let w = C64::new(3.0, 1.0);
        assert!((p.ba(w) - w).norm() < 1e-12);
    }

    #[test]
    fn ba_jacobian_matches_finite_differences() {
        let p = PDefault::new();
        for &w in &[C64::new(0.2, 0.4), C64::new(-0.9, 1.3), C64::new(1.4, 0.7)] {
            let j = p.ba_jacobian(w);
            let h = 1e-6;
            let fx = (p.ba(w + h) - p.ba(w - h)) / (2.0 * h);
            let fy = (p.ba(w + C64::new(0.0, h)) - p.ba(w - C64::new(0.0, h))) / (2.0 * h);
            assert!((j.0[0][0] - fx.re).abs() < 1e-5, "w = {w}");
            assert!((j.0[1][0] - fx.im).abs() < 1e-5);
            assert!((j.0[0][1] - fy.re).abs() < 1e-5);
            assert!((j.0[1][1] - fy.im).abs() < 1e-5);
        }
    }

    #[test]
    fn p_default_identity_trace_and_roundtrip() {
        let p = PDefault::new();
        for i in 1..20 {
            let x = -1.0 + 2.0 * i as f64 / 20.0;
            let w = p.forward(C64::new(x, 0.0)).unwrap();
            assert!((w.re - x).abs() < 1e-8, "x = {x}, w = {w}");
            assert!(w.im.abs() < 1e-10);
        }
        for z in interior_grid(10) {
            if z.re.abs() < 0.05 && z.im > 1.9 {
                continue;
            }
            let w = p.forward(z).unwrap();
            assert!(w.im > 0.0);
            let back = p.inverse(w).unwrap();
            assert!((back - z).norm() < 1e-7, "z = {z} back = {back}");
        }
    }

    #[test]
    fn p_default_jacobian_and_bound() {
        let p = PDefault::new();
        assert!(p.dilatation_bound() >= 1.0 && p.dilatation_bound() < 100.0);
        let z = C64::new(0.37, 0.61);
        let j = p.jacobian(z).unwrap();
        assert!(j.det() > 0.0);
        let h = 1e-6;
        let fwd = |z: C64| p.forward(z).unwrap();
        let fx = (fwd(z + h) - fwd(z - h)) / (2.0 * h);
        let fy = (fwd(z + C64::new(0.0, h)) - fwd(z - C64::new(0.0, h))) / (2.0 * h);
        assert!((j.0[0][0] - fx.re).abs() < 1e-4);
        assert!((j.0[1][1] - fy.im).abs() < 1e-4);
    }

    #[test]
    fn p_fast_identity_trace_exact() {
        let p = PFast::new();
        for i in 0..=20 {
            let x = -1.0 + 2.0 * i as f64 / 20.0;
            let w = p.forward(C64::new(x, 0.0)).unwrap();
            assert!((w.re - x).abs() < 1e-12, "x = {x}, w = {w}");
            assert!(w.im.abs() < 1e-12);
        }
    }

    #[test]
    fn p_fast_roundtrip_dense() {
        let p = PFast::new();
        for z in interior_grid(50) {
            let w = p.forward(z).unwrap();
            assert!(w.im > -1e-12, "z = {z} w = {w}");
            let back = p.inverse(w).unwrap();
            assert!((back - z).norm() < 1e-8, "z = {z} back = {back}");
        }
    }

    #[test]
    fn p_fast_boundary_goes_outside_unit_interval() {
        let p = PFast::new();
        // Side and top edges of S map into R \ (-1, 1).
        for j in 1..10 {
            let z = C64::new(1.0, 2.0 * j as f64 / 10.0);
            let w = p.forward(z).unwrap();
            assert!(w.im.abs() < 1e-9 && w.re >= 1.0 - 1e-9, "z = {z} w = {w}");
        }
        for i in 1..10 {
            let z = C64::new(-1.0 + 2.0 * i as f64 / 10.0, 2.0);
            if z.re.abs() < 0.05 {
                continue; // the top midpoint maps to infinity
            }
            let w = p.forward(z).unwrap();
            assert!(w.im.abs() < 1e-7, "z = {z} w = {w}");
            assert!(w.re.abs() >= 1.0 - 1e-7, "z = {z} w = {w}");
        }
    }

    #[test]
    fn p_fast_jacobian_matches_finite_differences() {
        let p = PFast::new();
        for &z in &[C64::new(0.3, 0.5), C64::new(-0.6, 1.2), C64::new(0.1, 1.7)] {
            if p.seam_distance(z) < 1e-2 {
                continue;
            }
            let j = p.jacobian(z).unwrap();
            assert!(j.det() > 0.0);
            let h = 1e-6;
            let fwd = |z: C64| p.forward(z).unwrap();
            let fx = (fwd(z + h) - fwd(z - h)) / (2.0 * h);
            let fy = (fwd(z + C64::new(0.0, h)) - fwd(z - C64::new(0.0, h))) / (2.0 * h);
            assert!((j.0[0][0] - fx.re).abs() < 1e-4, "z = {z}");
            assert!((j.0[1][0] - fx.im).abs() < 1e-4, "z = {z}");
            assert!((j.0[0][1] - fy.re).abs() < 1e-4, "z = {z}");
            assert!((j.0[1][1] - fy.im).abs() < 1e-4, "z = {z}");
        }
    }

    #[test]
    fn p_fast_bounded_dilatation() {
        let p = PFast::new();
        let b = p.dilatation_bound();
        assert!(b >= 2.0 && b < 20.0, "bound = {b}");
    }
}
