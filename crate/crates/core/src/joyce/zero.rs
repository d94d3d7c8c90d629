use super::kderiv::k_third_derivatives;
use super::pleb::plebanski_w;
use super::theta::theta_inverse_pair;
use crate::isomonodromy::FiberPoint;
use crate::numerics::{least_squares, C};
use crate::spectral::{reduce_to_weierstrass, BasePoint, Family};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// The function S on the base with ∂W/∂θ|_{θ=0} = ∇S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prepotential {
    pub value: C,
    /// (∂S/∂first, ∂S/∂H), first = s for PIII₃ and t otherwise.
    pub gradient: [C; 2],
}

pub fn prepotential_s(base: &BasePoint) -> Result<Prepotential> {
    base.check_regular()?;
    let (t, h) = (base.t, base.h);
    Ok(match base.family {
        Family::PIII3 => {
            let d = h * h - 4.0 * t;
            Prepotential { value: -d.ln() / 24.0, gradient: [t / (6.0 * d), -h / (12.0 * d)] }
        }
        Family::PII => {
            base.check_joyce_regular()?;
            let d = 8.0 * h - t * t;
            Prepotential {
                value: -(h * h * d).ln() / 48.0,
                gradient: [t / (24.0 * d), -(2.0 / h + 8.0 / d) / 48.0],
            }
        }
        Family::PI => {
            let d = 4.0 * t * t * t + 27.0 * h * h;
            Prepotential { value: -d.ln() / 24.0, gradient: [-t * t / (2.0 * d), -9.0 * h / (4.0 * d)] }
        }
    })
}

/// Sampling radius for limits at θ = 0: a fraction of the shortest nonzero lattice vector.
fn sample_radius(base: &BasePoint) -> Result<f64> {
    let ed = reduce_to_weierstrass(base)?.ed;
    let (a, b) = (ed.half_period_1, ed.half_period_2);
    Ok([a, b, a + b, a - b].iter().fold(f64::INFINITY, |m, z| m.min(z.norm())) * 0.25)
}

/// Coefficient c₀ or c₁ of f(τ) = Σ c_k τ^k from samples on (0, τ_max], using the parity of f.
fn parity_limit(f: impl Fn(f64) -> Result<C>, tau_max: f64, odd: bool) -> Result<C> {
    const N: usize = 12;
    const TERMS: usize = 7;
    let mut rows = Vec::with_capacity(N);
    let mut rhs = Vec::with_capacity(N);
    for k in 1..=N {
        let tau = tau_max * k as f64 / N as f64;
        let start = if odd { 1 } else { 0 };
        // scale by τ_max to keep the normal equations conditioned
        let x = tau / tau_max;
        rows.push((0..TERMS).map(|j| C::new(x.powi((start + 2 * j) as i32), 0.0)).collect::<Vec<_>>());
        rhs.push(f(tau)?);
    }
    let coef = least_squares(&rows, &rhs).ok_or(Error::JacobianSingular)?;
    Ok(if odd { coef[0] / tau_max } else { coef[0] })
}

/// ∂W/∂θ at the zero section, extracted from W(θ_inverse(τ·d)) for d = (1, 0) and (1, 1).
/// W is odd in θ, so only odd powers of τ are fitted and no sample sits at θ = 0.
pub fn zero_section_gradient(base: &BasePoint) -> Result<[C; 2]> {
    let radius = sample_radius(base)?;
    let zero = C::new(0.0, 0.0);
    let along = |mu: f64| {
        parity_limit(
            |tau| plebanski_w(&theta_inverse_pair(base, C::new(tau, 0.0), C::new(tau * mu, 0.0), zero)?),
            radius / (1.0 + mu * mu).sqrt(),
            true,
        )
    };
    let g0 = along(0.0)?;
    let g1 = along(1.0)?;
    Ok([g0, g1 - g0])
}

/// Limit of (K_fff, K_ffH, K_fHH, K_HHH) at θ = 0 along the direction (1, μ).
pub fn k_third_at_zero(base: &BasePoint, mu: f64) -> Result<[C; 4]> {
    let radius = sample_radius(base)? / (1.0 + mu * mu).sqrt();
    let zero = C::new(0.0, 0.0);
    let mut out = [zero; 4];
    for (k, o) in out.iter_mut().enumerate() {
        *o = parity_limit(
            |tau| Ok(k_third_derivatives(&theta_inverse_pair(base, C::new(tau, 0.0), C::new(tau * mu, 0.0), zero)?)?.values[k]),
            radius,
            false,
        )?;
    }
    Ok(out)
}

/// Connection induced on the zero section, Γ^c_ab = −Σ η_pc K_abp with η_fH = −1, η_Hf = 1, in the
/// family coordinates and in a flat chart: (s, H) for PIII₃, (t, H − t²/8) for PII.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoyceConnection {
    pub k_third: [C; 4],
    /// christoffel[c][a][b] = Γ^c_ab in (first, H).
    pub christoffel: [[[C; 2]; 2]; 2],
    /// The same symbols in the flat chart.
    pub flat: [[[C; 2]; 2]; 2],
}

impl JoyceConnection {
    pub fn flat_defect(&self) -> f64 {
        self.flat.iter().flatten().flatten().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

pub fn joyce_connection(base: &BasePoint) -> Result<JoyceConnection> {
    if base.family == Family::PI {
        return Err(Error::FamilyMismatch("zero-section connection is computed for PIII3 and PII".into()));
    }
    let k = k_third_at_zero(base, 0.3)?;
    // K_abc with index 0 = first, 1 = H, symmetric
    let kk = |a: usize, b: usize, c: usize| k[a + b + c];
    let zero = C::new(0.0, 0.0);
    let mut g = [[[zero; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            g[0][a][b] = -kk(a, b, 1);
            g[1][a][b] = kk(a, b, 0);
        }
    }
    // u = (first, H) as functions of the flat chart u' = (first, H'); jac[k][a] = ∂u^k/∂u'^a
    let one = C::new(1.0, 0.0);
    let (jac, jac_inv, hess_h) = match base.family {
        Family::PII => {
            let t = base.t;
            ([[one, zero], [t / 4.0, one]], [[one, zero], [-t / 4.0, one]], C::new(0.25, 0.0))
        }
        _ => ([[one, zero], [zero, one]], [[one, zero], [zero, one]], zero),
    };
    let mut flat = [[[zero; 2]; 2]; 2];
    for c in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = zero;
                for kx in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            acc += jac_inv[c][kx] * jac[i][a] * jac[j][b] * g[kx][i][j];
                        }
                    }
                }
                // ∂²u^H/∂first'² is the only nonzero second derivative
                if a == 0 && b == 0 {
                    acc += jac_inv[c][1] * hess_h;
                }
                flat[c][a][b] = acc;
            }
        }
    }
    Ok(JoyceConnection { k_third: k, christoffel: g, flat })
}

/// The PIII₃ fiber involution (q, p, r) ↦ (1/(tq), −tpq², −(r + ½)).
pub fn involution_piii(fp: &FiberPoint) -> Result<FiberPoint> {
    if fp.family() != Family::PIII3 {
        return Err(Error::FamilyMismatch("the fiber involution is a PIII3 symmetry".into()));
    }
    let t = fp.base.t;
    if fp.q.norm() < 1e-300 {
        return Err(Error::DegenerateInput("q = 0".into()));
    }
    Ok(FiberPoint { q: 1.0 / (t * fp.q), p: -t * fp.p * fp.q * fp.q, r: -(fp.r + 0.5), ..*fp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, re};

    #[test]
    fn pii_prepotential_value() {
        let s = prepotential_s(&BasePoint::new(Family::PII, re(0.0), re(1.0))).unwrap();
        assert!((s.value + 8f64.ln() / 48.0).norm() < 1e-15);
    }

    #[test]
    fn zero_section_gradient_matches_prepotential() {
        for b in [
            BasePoint::new(Family::PIII3, c(1.0, 0.1), c(3.0, 0.2)),
            BasePoint::new(Family::PII, c(1.0, -0.1), c(1.0, 0.3)),
            BasePoint::new(Family::PI, c(1.0, 0.2), c(0.5, -0.4)),
        ] {
            let g = zero_section_gradient(&b).unwrap();
            let s = prepotential_s(&b).unwrap().gradient;
            for k in 0..2 {
                assert!((g[k] - s[k]).norm() < 1e-7, "{:?} {k}: {} vs {}", b.family, g[k], s[k]);
            }
        }
    }

    #[test]
    fn pii_connection_flat_after_shift() {
        let b = BasePoint::new(Family::PII, c(0.8, 0.1), c(1.2, -0.2));
        let jc = joyce_connection(&b).unwrap();
        assert!((jc.k_third[0] + 0.25).norm() < 1e-8, "{:?}", jc.k_third);
        assert!(jc.flat_defect() < 1e-8, "{:?}", jc.flat);
    }

    #[test]
    fn piii3_connection_vanishes() {
        let b = BasePoint::new(Family::PIII3, c(1.0, 0.3), c(2.5, 0.1));
        let jc = joyce_connection(&b).unwrap();
        assert!(jc.flat_defect() < 1e-8, "{:?}", jc.christoffel);
    }

    #[test]
    fn involution_is_an_involution() {
        let b = BasePoint::new(Family::PIII3, c(1.3, 0.2), re(2.0));
        let fp = FiberPoint::on_sheet(b, c(0.5, 0.2), 1.0, c(0.1, 0.4));
        let back = involution_piii(&involution_piii(&fp).unwrap()).unwrap();
        assert!((back.q - fp.q).norm() + (back.p - fp.p).norm() + (back.r - fp.r).norm() < 1e-14);
        assert!(involution_piii(&fp).unwrap().sheet_residual().norm() < 1e-12);
    }
}
