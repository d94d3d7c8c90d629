use super::{oper_closed_form, FiberPoint};
use crate::numerics::{solve_linear, C, I};
use crate::spectral::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Finite Laurent polynomial Σ c_k x^k, k ≥ `low`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laurent {
    pub low: i32,
    pub coeffs: Vec<C>,
}

impl Laurent {
    pub fn from_terms(terms: &[(i32, C)]) -> Self {
        let low = terms.iter().map(|t| t.0).min().unwrap_or(0);
        let high = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let mut coeffs = vec![C::new(0.0, 0.0); (high - low + 1) as usize];
        for &(k, c) in terms {
            coeffs[(k - low) as usize] += c;
        }
        Laurent { low, coeffs }
    }

    pub fn eval(&self, x: C) -> C {
        let mut acc = C::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc * x.powi(self.low)
    }

    pub fn deriv(&self) -> Laurent {
        let terms: Vec<(i32, C)> =
            self.coeffs.iter().enumerate().map(|(i, c)| (self.low + i as i32 - 1, c * (self.low + i as i32) as f64)).collect();
        if terms.is_empty() {
            return self.clone();
        }
        Laurent::from_terms(&terms)
    }
}

/// 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2 {
    pub m: [[C; 2]; 2],
}

impl Matrix2 {
    pub fn trace(&self) -> C {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> C {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn mul(&self, o: &Matrix2) -> Matrix2 {
        let mut r = [[C::new(0.0, 0.0); 2]; 2];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Matrix2 { m: r }
    }

    pub fn sub(&self, o: &Matrix2) -> Matrix2 {
        self.zip(o, |a, b| a - b)
    }

    pub fn add(&self, o: &Matrix2) -> Matrix2 {
        self.zip(o, |a, b| a + b)
    }

    pub fn scale(&self, s: C) -> Matrix2 {
        self.zip(self, |a, _| a * s)
    }

    fn zip(&self, o: &Matrix2, f: impl Fn(C, C) -> C) -> Matrix2 {
        let mut r = self.m;
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = f(self.m[i][j], o.m[i][j]);
            }
        }
        Matrix2 { m: r }
    }

    pub fn commutator(&self, o: &Matrix2) -> Matrix2 {
        self.mul(o).sub(&o.mul(self))
    }

    pub fn max_norm(&self) -> f64 {
        self.m.iter().flatten().fold(0.0, |a, v| a.max(v.norm()))
    }
}

/// Matrix with Laurent-polynomial entries in x.
#[derive(Debug, Clone)]
pub struct LaurentMatrix {
    pub e: [[Laurent; 2]; 2],
}

impl LaurentMatrix {
    fn from_entries(a11: Laurent, a12: Laurent, a21: Laurent) -> Self {
        let a22 = Laurent { low: a11.low, coeffs: a11.coeffs.iter().map(|c| -c).collect() };
        LaurentMatrix { e: [[a11, a12], [a21, a22]] }
    }

    pub fn eval(&self, x: C) -> Matrix2 {
        Matrix2 { m: [[self.e[0][0].eval(x), self.e[0][1].eval(x)], [self.e[1][0].eval(x), self.e[1][1].eval(x)]] }
    }

    pub fn deriv(&self) -> LaurentMatrix {
        LaurentMatrix {
            e: [[self.e[0][0].deriv(), self.e[0][1].deriv()], [self.e[1][0].deriv(), self.e[1][1].deriv()]],
        }
    }
}

fn check_x(fp: &FiberPoint, x: C) -> Result<()> {
    if fp.family() == Family::PIII3 && x.norm() < 1e-12 {
        return Err(Error::PoleHit("x = 0".into()));
    }
    Ok(())
}

/// Pencil A_ε = A_∞ + Φ/ε with Laurent entries; `inv_eps` = 1/ε, `with_reference` toggles A_∞.
pub fn pencil_laurent(fp: &FiberPoint, inv_eps: C, with_reference: bool) -> LaurentMatrix {
    let (q, p, t, alpha) = (fp.q, fp.p, fp.base.t, fp.base.alpha);
    let (r, s) = if with_reference { (fp.r, fp.s) } else { (C::new(0.0, 0.0), C::new(-0.5, 0.0)) };
    let ie = inv_eps;
    let one = C::new(1.0, 0.0);
    match fp.family() {
        Family::PIII3 => LaurentMatrix::from_entries(
            Laurent::from_terms(&[(-1, r + ie * p * q)]),
            Laurent::from_terms(&[(-2, -ie * q), (-1, ie)]),
            Laurent::from_terms(&[(-1, -ie / q), (0, ie * t)]),
        ),
        Family::PII => {
            let k = t - 2.0 * p + 2.0 * q * q;
            LaurentMatrix::from_entries(
                Laurent::from_terms(&[(0, ie * (p - q * q) + r), (2, ie)]),
                Laurent::from_terms(&[(0, -ie * q), (1, ie)]),
                Laurent::from_terms(&[
                    (0, ie * (-2.0 * alpha + q * k) - 2.0 * s - one - 2.0 * r * q),
                    (1, ie * k - 2.0 * r),
                ]),
            )
        }
        Family::PI => LaurentMatrix::from_entries(
            Laurent::from_terms(&[(0, ie * p + r)]),
            Laurent::from_terms(&[(0, -ie * q), (1, ie)]),
            Laurent::from_terms(&[(0, ie * (q * q + t)), (1, ie * q), (2, ie)]),
        ),
    }
}

pub fn higgs_matrix(fp: &FiberPoint, x: C) -> Result<Matrix2> {
    check_x(fp, x)?;
    Ok(pencil_laurent(fp, C::new(1.0, 0.0), false).eval(x))
}

pub fn pencil_matrix(fp: &FiberPoint, x: C) -> Result<Matrix2> {
    check_x(fp, x)?;
    Ok(pencil_laurent(fp, 1.0 / fp.epsilon, true).eval(x))
}

pub fn deformation_laurent(fp: &FiberPoint) -> LaurentMatrix {
    let (q, p, r, t) = (fp.q, fp.p, fp.r, fp.base.t);
    let ie = 1.0 / fp.epsilon;
    match fp.family() {
        Family::PIII3 => LaurentMatrix::from_entries(
            Laurent::from_terms(&[(0, (ie * p * q + r) / t)]),
            Laurent::from_terms(&[(0, ie / t)]),
            Laurent::from_terms(&[(1, ie)]),
        ),
        Family::PII => LaurentMatrix::from_entries(
            Laurent::from_terms(&[(0, 0.5 * ie * q), (1, 0.5 * ie)]),
            Laurent::from_terms(&[(0, 0.5 * ie)]),
            Laurent::from_terms(&[(0, -r + 0.5 * ie * (-2.0 * p + 2.0 * q * q + t))]),
        ),
        Family::PI => LaurentMatrix::from_entries(
            Laurent::from_terms(&[(0, C::new(0.0, 0.0))]),
            Laurent::from_terms(&[(0, ie)]),
            Laurent::from_terms(&[(0, 2.0 * ie * q), (1, ie)]),
        ),
    }
}

pub fn deformation_matrix(fp: &FiberPoint, x: C) -> Result<Matrix2> {
    check_x(fp, x)?;
    Ok(deformation_laurent(fp).eval(x))
}

fn oper_from_laurent(a: &LaurentMatrix, x: C) -> Result<C> {
    let a12 = a.e[0][1].eval(x);
    let a11 = a.e[0][0].eval(x);
    let scale = a.e[0][1].coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm())) * (1.0 + x.norm()).powi(2);
    if a12.norm() < 1e-13 * scale.max(1e-300) {
        return Err(Error::GaugeSingular);
    }
    let d1 = a.e[0][1].deriv();
    let l1 = d1.eval(x) / a12;
    let l2 = d1.deriv().eval(x) / a12;
    let det = a.eval(x).det();
    let a11p = a.e[0][0].deriv().eval(x);
    Ok(-det + a11p - a11 * l1 + 0.75 * l1 * l1 - 0.5 * l2)
}

/// Potential of the second-order equation obtained from ∂ₓ − A_ε by the singular gauge transformation.
pub fn oper_potential(fp: &FiberPoint, x: C) -> Result<C> {
    check_x(fp, x)?;
    oper_from_laurent(&pencil_laurent(fp, 1.0 / fp.epsilon, true), x)
}

/// (Q₀, Q₁, Q₂) recovered from the gauge-transformed pencil by an exact quadratic fit in 1/ε.
pub fn oper_potential_parts(fp: &FiberPoint, x: C) -> Result<[C; 3]> {
    check_x(fp, x)?;
    let nodes = [C::new(0.5, 0.0), C::new(1.0, 0.3), C::new(2.0, -0.7)];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for ie in nodes {
        rows.push(vec![ie * ie, ie, C::new(1.0, 0.0)]);
        rhs.push(oper_from_laurent(&pencil_laurent(fp, ie, true), x)?);
    }
    let sol = solve_linear(rows, rhs).ok_or(Error::JacobianSingular)?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Max deviation between the gauge-transformed oper and the closed-form ε⁻²Q₀ + ε⁻¹Q₁ + Q₂.
pub fn oper_closed_form_defect(fp: &FiberPoint, x: C) -> Result<f64> {
    let q = oper_potential(fp, x)?;
    let closed = oper_closed_form(fp, x);
    Ok((q - closed).norm() / (1.0 + closed.norm()))
}

/// Apparent-singularity residuals at x = q. The potential near q has the form
/// 3/4·(x−q)⁻² + A/(x−q) + B + …, and trivial local monodromy requires B = A². Writing
/// A = −P/ε − ρ and B = Q₀(q)/ε² + u/ε + v, this splits into P² = Q₀(q), u = 2Pρ, v = ρ².
/// Returns ((u − 2Pρ) + (Q₀(q) − P²), v − ρ²), with P, ρ, u, v read off the transformed pencil.
pub fn apparent_singularity_residual(fp: &FiberPoint) -> Result<(C, C)> {
    let q = fp.q;
    let radius = match fp.family() {
        Family::PIII3 => 0.3 * q.norm(),
        _ => 0.3 * (1.0 + q.norm()).min(1.0),
    };
    let n = 64;
    let mut coef = [[C::new(0.0, 0.0); 3]; 3]; // [part][order]: order 0 → (x−q)^{-2}, 1 → residue, 2 → constant
    for k in 0..n {
        let w = C::from_polar(radius, 2.0 * PI * k as f64 / n as f64);
        let parts = oper_potential_parts(fp, q + w)?;
        for (j, part) in parts.iter().enumerate() {
            coef[j][0] += part * w * w;
            coef[j][1] += part * w;
            coef[j][2] += *part;
        }
    }
    for row in coef.iter_mut() {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    let _ = I;
    let big_p = -coef[1][1];
    let rho = -coef[2][1];
    let u = coef[1][2];
    let v = coef[2][2];
    let q0q = fp.base.q0(q);
    Ok(((u - 2.0 * big_p * rho) + (q0q - big_p * big_p), v - rho * rho))
}
