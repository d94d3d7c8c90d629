use crate::isomonodromy::FiberPoint;
use crate::numerics::C;
use crate::spectral::Family;
use crate::{Error, Result};

fn nonzero(d: C, what: &str) -> Result<C> {
    if d.norm() < 1e-13 {
        Err(Error::DenominatorZero(what.into()))
    } else {
        Ok(d)
    }
}

/// Plebański function W(t, H, q, r[, s]), cubic in r.
pub fn plebanski_w(fp: &FiberPoint) -> Result<C> {
    let (t, h, q, p, r) = (fp.base.t, fp.base.h, fp.q, fp.p, fp.r);
    match fp.family() {
        Family::PIII3 => {
            let den = nonzero(6.0 * (h * h - 4.0 * t), "H^2 - 4t")?;
            let poly = t * q + (h + 6.0 * t * q) * r + (6.0 * h + 12.0 * t * q) * r * r + 8.0 * p * p * q * q * r * r * r;
            Ok(p * q / den * poly)
        }
        Family::PII if fp.base.alpha.norm() == 0.0 && fp.s.norm() == 0.0 => {
            let den = nonzero(48.0 * h * (t * t - 8.0 * h), "H(t^2 - 8H)")?;
            let poly = -t * q - 2.0 * r * (2.0 * t * t + 3.0 * q * q * t - 12.0 * h)
                + 12.0 * r * r * q * (-t * t - q * q * t + 4.0 * h)
                - 8.0 * r * r * r * p * p * t;
            Ok(p / den * poly)
        }
        Family::PII => plebanski_w_pii_general(fp),
        Family::PI => {
            let den = nonzero(2.0 * (4.0 * t * t * t + 27.0 * h * h), "4t^3 + 27H^2")?;
            let poly = t - (9.0 * h - 6.0 * t * q) * r
                + (8.0 * t * t - 18.0 * h * q + 12.0 * t * q * q) * r * r
                + 8.0 * t * p * p * r * r * r;
            Ok(p / den * poly)
        }
    }
}

/// PII Plebański function for general (α, s): a polynomial in (r, s) over the α-dependent discriminant.
pub fn plebanski_w_pii_general(fp: &FiberPoint) -> Result<C> {
    if fp.family() != Family::PII {
        return Err(Error::FamilyMismatch("general-alpha W is a PII formula".into()));
    }
    let (t, h, a, q, p, r, s) = (fp.base.t, fp.base.h, fp.base.alpha, fp.q, fp.p, fp.r, fp.s);
    let (a2, t2, h2) = (a * a, t * t, h * h);
    let c1 = -t * t2 + 8.0 * h * t - 18.0 * a2;
    let c2 = -a * (t2 + 24.0 * h);
    let den = nonzero(16.0 * (-27.0 * a2 * a2 - a2 * t * (t2 - 72.0 * h) + 2.0 * h * (t2 - 8.0 * h) * (t2 - 8.0 * h)), "PII discriminant")?;
    let k = 4.0 * h * t2 - 3.0 * a2 * t - 32.0 * h2;
    let p2 = p * p;
    let w = [
        // r⁰: s⁰..s³
        [
            p * (2.0 / 3.0 * c1 * q + 2.0 * c2),
            q * (4.0 * c1 * q * q + 4.0 * c2 * q + 4.0 / 3.0 * (96.0 * h2 + 4.0 * h * t2 - 2.0 * t2 * t2 - 27.0 * a2 * t)),
            8.0 * p * (c1 * q - c2),
            16.0 * q * (c1 / 3.0 * q * q - c2 * q + k),
        ],
        [
            4.0 * p * (c1 * q * q + 2.0 * c2 * q + (-96.0 * h2 + 28.0 * h * t2 - 2.0 * t2 * t2 - 45.0 * a2 * t) / 3.0),
            16.0 * c1 * p2,
            16.0 * p * (c1 * q * q - 2.0 * c2 * q + k),
            C::new(0.0, 0.0),
        ],
        [
            8.0 * p * (c1 * q * q * q + c2 * q * q + q * (-32.0 * h2 + 12.0 * h * t2 - 21.0 * t * a2 - t2 * t2) + a * (27.0 * a2 - 24.0 * h * t + t * t2)),
            16.0 * p2 * (c1 * q - c2),
            C::new(0.0, 0.0),
            C::new(0.0, 0.0),
        ],
        [16.0 * p * p2 / 3.0 * c1, C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)],
    ];
    let mut acc = C::new(0.0, 0.0);
    let mut rk = C::new(1.0, 0.0);
    for row in &w {
        let mut sm = C::new(1.0, 0.0);
        for coef in row {
            acc += coef * rk * sm;
            sm *= s;
        }
        rk *= r;
    }
    Ok(acc / den)
}

/// Integer weights under the Euler scaling: a coordinate of weight k is multiplied by λᵏ, and W
/// picks up λ^w.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EulerWeights {
    pub t: i32,
    pub h: i32,
    pub alpha: i32,
    pub q: i32,
    pub p: i32,
    pub r: i32,
    pub w: i32,
}

pub fn euler_weights(family: Family) -> EulerWeights {
    match family {
        Family::PIII3 => EulerWeights { t: 4, h: 2, alpha: 0, q: -2, p: 3, r: 0, w: -1 },
        Family::PII => EulerWeights { t: 2, h: 4, alpha: 3, q: 1, p: 2, r: -1, w: -3 },
        Family::PI => EulerWeights { t: 4, h: 6, alpha: 0, q: 2, p: 3, r: -2, w: -5 },
    }
}

/// Rescaled point and the factor W is expected to acquire.
pub fn euler_rescale(fp: &FiberPoint, lambda: C) -> (FiberPoint, C) {
    let wt = euler_weights(fp.family());
    let sc = |k: i32| lambda.powi(k);
    let mut out = *fp;
    out.base.t *= sc(wt.t);
    out.base.h *= sc(wt.h);
    out.base.alpha *= sc(wt.alpha);
    out.q *= sc(wt.q);
    out.p *= sc(wt.p);
    out.r *= sc(wt.r);
    (out, sc(wt.w))
}

/// Euler scale per unit root scale: the Euler weights of PII and PI are the integer weights above
/// divided by this number.
pub fn euler_unit(family: Family) -> f64 {
    match family {
        Family::PIII3 => 1.0,
        Family::PII => 3.0,
        Family::PI => 5.0,
    }
}

/// Relative defect of W(λ·x) = λ⁻¹W(x) under the Euler scaling with parameter λ.
pub fn homogeneity_defect(fp: &FiberPoint, lambda: C) -> Result<f64> {
    let root = (lambda.ln() / euler_unit(fp.family())).exp();
    let (scaled, _) = euler_rescale(fp, root);
    let w0 = plebanski_w(fp)?;
    let w1 = plebanski_w(&scaled)?;
    Ok((w1 - w0 / lambda).norm() / w0.norm().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::re;
    use crate::spectral::BasePoint;

    #[test]
    fn piii3_value_at_reference_point() {
        let b = BasePoint::new(Family::PIII3, re(1.0), re(3.0));
        let fp = FiberPoint { base: b, q: re(1.0), p: re(5f64.sqrt()), r: re(0.0), s: re(0.0), epsilon: re(1.0) };
        let w = plebanski_w(&fp).unwrap();
        assert!((w - 5f64.sqrt() / 30.0).norm() < 1e-14);
    }

    #[test]
    fn pii_value_at_reference_point() {
        let b = BasePoint::new(Family::PII, re(1.0), re(1.0));
        let fp = FiberPoint { base: b, q: re(1.0), p: re(2.0), r: re(0.0), s: re(0.0), epsilon: re(1.0) };
        let w = plebanski_w(&fp).unwrap();
        assert!((w - 1.0 / 168.0).norm() < 1e-15);
    }

    #[test]
    fn general_alpha_reduces_to_alpha_zero() {
        let b = BasePoint::new(Family::PII, re(0.7), re(1.3));
        for &(q, r) in &[(0.4, 0.2), (1.1, -0.6), (-0.8, 1.5)] {
            let fp = FiberPoint::on_sheet(b, re(q), 1.0, re(r));
            let a = plebanski_w(&fp).unwrap();
            let g = plebanski_w_pii_general(&fp).unwrap();
            assert!((a - g).norm() < 1e-13 * (1.0 + a.norm()), "{a} vs {g}");
        }
    }

    #[test]
    fn homogeneity_on_unit_circle() {
        for fam in [Family::PIII3, Family::PII, Family::PI] {
            let b = BasePoint::new(fam, re(0.9), re(1.7));
            let fp = FiberPoint::on_sheet(b, re(0.6), 1.0, re(0.3));
            let d = homogeneity_defect(&fp, C::from_polar(1.0, 2.1)).unwrap();
            assert!(d < 1e-12, "{fam:?}: {d}");
        }
    }

    #[test]
    fn singular_denominator_reported() {
        let b = BasePoint::new(Family::PIII3, re(1.0), re(2.0));
        let fp = FiberPoint::on_sheet(b, re(0.5), 1.0, re(0.0));
        assert!(matches!(plebanski_w(&fp), Err(Error::DenominatorZero(_))));
    }
}
