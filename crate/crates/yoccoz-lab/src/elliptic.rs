//! Elliptic-function helpers for the conformal square-to-half-plane map:
//! complete and incomplete integrals of the first kind, Jacobi sn/cn/dn on
//! the real line (AGM) and in the plane (addition formula), and the inverse
//! sn via Carlson's symmetric integral.
//!
//! Parameter convention: `m` is the *parameter* (square of the modulus k).

use num_complex::Complex64;

/// Complete elliptic integral of the first kind K(m) by the
/// arithmetic-geometric mean: K = pi / (2 agm(1, sqrt(1-m))).
pub fn complete_k(m: f64) -> f64 {
    assert!((0.0..1.0).contains(&m), "parameter out of range");
    let mut a = 1.0f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..40 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    std::f64::consts::PI / (2.0 * a)
}

/// Jacobi elliptic functions (sn, cn, dn)(u | m) for real u via the AGM
/// descending transformation.
pub fn ellipj(u: f64, m: f64) -> (f64, f64, f64) {
    assert!((0.0..=1.0).contains(&m));
    if m < 1e-14 {
        return (u.sin(), u.cos(), 1.0);
    }
    if m > 1.0 - 1e-14 {
        let s = u.tanh();
        let c = 1.0 / u.cosh();
        return (s, c, c);
    }
    let mut a = vec![1.0f64];
    let mut c = vec![m.sqrt()];
    let mut b = (1.0 - m).sqrt();
    while c.last().unwrap().abs() > 1e-16 {
        let an = 0.5 * (a.last().unwrap() + b);
        let cn = 0.5 * (a.last().unwrap() - b);
        b = (a.last().unwrap() * b).sqrt();
        a.push(an);
        c.push(cn);
        if a.len() > 64 {
            break;
        }
    }
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for i in (1..=n).rev() {
        let t = (c[i] / a[i]) * phi.sin();
        phi = 0.5 * (phi + (t.clamp(-1.0, 1.0)).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - m * sn * sn).sqrt();
    (sn, cn, dn)
}

/// Carlson's symmetric integral R_F(x, y, z) for complex arguments off the
/// negative real axis (duplication algorithm).
pub fn carlson_rf(mut x: Complex64, mut y: Complex64, mut z: Complex64) -> Complex64 {
    let third = 1.0 / 3.0;
    let mut mu;
    let mut iter = 0;
    loop {
        iter += 1;
        let sx = x.sqrt();
        let sy = y.sqrt();
        let sz = z.sqrt();
        let lam = sx * sy + sy * sz + sz * sx;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        mu = (x + y + z) * third;
        let eps = [(x - mu) / mu, (y - mu) / mu, (z - mu) / mu]
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max);
        if eps < 1e-12 || iter > 100 {
            break;
        }
    }
    let dx = (mu - x) / mu;
    let dy = (mu - y) / mu;
    let dz = (mu - z) / mu;
    let e2 = dx * dy + dy * dz + dz * dx;
    let e3 = dx * dy * dz;
    (1.0 + (e2 * (-0.1) + e3 / 14.0) + e2 * e2 / 24.0 - e2 * e3 * 3.0 / 44.0) / mu.sqrt()
}

/// Incomplete elliptic integral of the first kind F(phi | m) for
/// phi in [-pi/2, pi/2], via F = sin(phi) R_F(cos^2, 1 - m sin^2, 1).
pub fn incomplete_f(phi: f64, m: f64) -> f64 {
    let s = phi.sin();
    let c2 = Complex64::new(phi.cos().powi(2), 0.0);
    let one = Complex64::new(1.0, 0.0);
    let arg = Complex64::new(1.0 - m * s * s, 0.0);
    (s * carlson_rf(c2, arg, one)).re
}

/// Jacobi sn at a complex point via the addition formula with the
/// complementary parameter on the imaginary part.
pub fn sn_complex(z: Complex64, m: f64) -> Complex64 {
    let (s, c, d) = ellipj(z.re, m);
    let (s1, c1, d1) = ellipj(z.im, 1.0 - m);
    let denom = c1 * c1 + m * (s * s1) * (s * s1);
    Complex64::new(s * d1 / denom, c * d * s1 * c1 / denom)
}

/// cn and dn at a complex point (same addition formulas), used for the
/// derivative sn' = cn * dn.
pub fn cn_dn_complex(z: Complex64, m: f64) -> (Complex64, Complex64) {
    let (s, c, d) = ellipj(z.re, m);
    let (s1, c1, d1) = ellipj(z.im, 1.0 - m);
    let denom = c1 * c1 + m * (s * s1) * (s * s1);
    let cn = Complex64::new(c * c1 / denom, -s * d * s1 * d1 / denom);
    let dn = Complex64::new(d * c1 * d1 / denom, -m * s * c * s1 / denom);
    (cn, dn)
}

/// Inverse of sn: asn(w | m) = w R_F(1 - w^2, 1 - m w^2, 1), principal
/// branch (maps the closed upper half-plane into the fundamental rectangle).
pub fn asn_complex(w: Complex64, m: f64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    w * carlson_rf(one - w * w, one - m * w * w, one)
}

/// The parameter m with K(1-m)/K(m) = 2 (fourth singular value):
/// k = 3 - 2 sqrt 2, m = k^2.
pub fn parameter_kp_over_k_two() -> f64 {
    let k = 3.0 - 2.0 * 2f64.sqrt();
    k * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn complete_k_known_values() {
        assert!((complete_k(0.0) - FRAC_PI_2).abs() < 1e-14);
        // K(m = 1/2) and K(m = 1/4), standard tables.
        assert!((complete_k(0.5) - 1.854074677301372).abs() < 1e-12);
        assert!((complete_k(0.25) - 1.685750354812596).abs() < 1e-12);
    }

    #[test]
    fn ellipj_degenerate_parameters() {
        for &u in &[0.3, 1.1, -0.7] {
            let (s, c, d) = ellipj(u, 0.0);
            assert!((s - u.sin()).abs() < 1e-12);
            assert!((c - u.cos()).abs() < 1e-12);
            assert!((d - 1.0).abs() < 1e-12);
            let (s, c, _) = ellipj(u, 1.0);
            assert!((s - u.tanh()).abs() < 1e-12);
            assert!((c - 1.0 / u.cosh()).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipj_identities() {
        for &m in &[0.1, 0.3, 0.7, 0.95] {
            for i in 0..20 {
                let u = -2.0 + 4.0 * i as f64 / 19.0;
                let (s, c, d) = ellipj(u, m);
                assert!((s * s + c * c - 1.0).abs() < 1e-10, "m={m} u={u}");
                assert!((d * d + m * s * s - 1.0).abs() < 1e-10, "m={m} u={u}");
            }
        }
    }

    #[test]
    fn ellipj_quarter_period() {
        for &m in &[0.2, 0.5, 0.8] {
            let k = complete_k(m);
            let (s, c, d) = ellipj(k, m);
            assert!((s - 1.0).abs() < 1e-10);
            assert!(c.abs() < 1e-8);
            assert!((d - (1.0 - m).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn incomplete_f_matches_complete() {
        for &m in &[0.1, 0.5, 0.9] {
            assert!((incomplete_f(FRAC_PI_2, m) - complete_k(m)).abs() < 1e-10);
            assert!(incomplete_f(0.0, m).abs() < 1e-14);
            // F(phi | 0) = phi.
            assert!((incomplete_f(0.7, 0.0) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn sn_inverts_incomplete_f() {
        for &m in &[0.2, 0.6] {
            for i in 1..10 {
                let phi = -FRAC_PI_2 + PI * i as f64 / 10.0;
                let u = incomplete_f(phi, m);
                let (s, _, _) = ellipj(u, m);
                assert!((s - phi.sin()).abs() < 1e-9, "m={m} phi={phi}");
            }
        }
    }

    #[test]
    fn sn_complex_on_real_axis() {
        for &m in &[0.3, 0.8] {
            for i in 0..10 {
                let u = -1.5 + 3.0 * i as f64 / 9.0;
                let w = sn_complex(Complex64::new(u, 0.0), m);
                let (s, _, _) = ellipj(u, m);
                assert!((w.re - s).abs() < 1e-10 && w.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sn_complex_maps_rectangle_to_upper_half_plane() {
        let m = parameter_kp_over_k_two();
        let k = complete_k(m);
        let kp = complete_k(1.0 - m);
        assert!((kp / k - 2.0).abs() < 1e-10, "K'/K = {}", kp / k);
        // Interior of [-K, K] x (0, K') goes strictly into the upper half.
        for i in 1..8 {
            for j in 1..8 {
                let z = Complex64::new(-k + 2.0 * k * i as f64 / 8.0, kp * j as f64 / 8.0);
                let w = sn_complex(z, m);
                assert!(w.im > 0.0, "z={z} w={w}");
            }
        }
        // Corners go to +-1 and +-1/k on the real axis.
        let w = sn_complex(Complex64::new(k, 0.0), m);
        assert!((w.re - 1.0).abs() < 1e-8 && w.im.abs() < 1e-8);
    }

    #[test]
    fn asn_roundtrip() {
        let m = 0.4;
        for i in 0..6 {
            for j in 1..6 {
                let w = Complex64::new(-2.0 + 4.0 * i as f64 / 5.0, 0.2 + j as f64 / 3.0);
                let z = asn_complex(w, m);
                let back = sn_complex(z, m);
                assert!((back - w).norm() < 1e-8, "w={w} z={z} back={back}");
            }
        }
    }

    #[test]
    fn carlson_rf_degenerate() {
        // R_F(0, 1, 1) = pi/2; R_F(x,x,x) = x^{-1/2}.
        let one = Complex64::new(1.0, 0.0);
        let rf = carlson_rf(Complex64::new(0.0, 0.0), one, one);
        assert!((rf.re - FRAC_PI_2).abs() < 1e-10);
        let x = Complex64::new(4.0, 0.0);
        assert!((carlson_rf(x, x, x).re - 0.5).abs() < 1e-12);
    }
}
