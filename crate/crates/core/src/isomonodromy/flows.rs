use super::matrices::{deformation_laurent, pencil_laurent};
use super::FiberPoint;
use crate::numerics::{fd_derivative, Tolerances, C};
use crate::spectral::{BasePoint, Family};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Positions in the flow state vector (t, H, α, q, p, r, s).
pub struct StateIdx;

impl StateIdx {
    pub const T: usize = 0;
    pub const H: usize = 1;
    pub const ALPHA: usize = 2;
    pub const Q: usize = 3;
    pub const P: usize = 4;
    pub const R: usize = 5;
    pub const S: usize = 6;
    pub const LEN: usize = 7;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowId {
    W1,
    W2,
    W3,
}

impl std::str::FromStr for FlowId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w1" => Ok(FlowId::W1),
            "w2" => Ok(FlowId::W2),
            "w3" => Ok(FlowId::W3),
            _ => Err(Error::Config(format!("unknown flow '{s}'"))),
        }
    }
}

/// Conserving keeps H fixed along the t-flow; Painleve uses the classical Hamiltonian time evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Conserving,
    Painleve,
}

impl FiberPoint {
    pub fn to_state(&self) -> [C; StateIdx::LEN] {
        [self.base.t, self.base.h, self.base.alpha, self.q, self.p, self.r, self.s]
    }

    pub fn from_state(family: Family, y: &[C], epsilon: C) -> FiberPoint {
        let base = BasePoint { family, t: y[StateIdx::T], h: y[StateIdx::H], alpha: y[StateIdx::ALPHA] };
        FiberPoint { base, q: y[StateIdx::Q], p: y[StateIdx::P], r: y[StateIdx::R], s: y[StateIdx::S], epsilon }
    }
}

/// Components of a flow on the state (t, H, α, q, p, r, s), with ṗ from differentiating p² = Q₀(q).
/// `inv_eps` is 1/ε; setting it to zero isolates the ε-independent part.
pub fn flow_vector(
    family: Family,
    flow: FlowId,
    norm: Normalization,
    y: &[C],
    inv_eps: C,
) -> Result<[C; StateIdx::LEN]> {
    let (t, alpha, q, p, r, s) = (y[0], y[2], y[3], y[4], y[5], y[6]);
    let _ = s;
    if p.norm() < 1e-14 {
        return Err(Error::SheetSingular(format!("p = 0 at q = {q}")));
    }
    let ie = inv_eps;
    let zero = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    let mut v = [zero; StateIdx::LEN];
    let (it, ih, ia, iq, ir, is) = (StateIdx::T, StateIdx::H, StateIdx::ALPHA, StateIdx::Q, StateIdx::R, StateIdx::S);
    match (family, flow) {
        (Family::PIII3, FlowId::W1) => {
            v[it] = t;
            v[iq] = 2.0 * p * q * q * ie + 2.0 * q * r;
            v[ir] = -ie * (2.0 * r * q * q * t - 2.0 * r + q * q * t) / (2.0 * p * q * q);
            if norm == Normalization::Painleve {
                v[ih] = -q * t;
                v[ir] += ie * t / (2.0 * p);
            }
        }
        (Family::PIII3, FlowId::W2) => {
            v[ih] = one;
            v[ir] = -ie / (2.0 * p * q);
        }
        (Family::PII, FlowId::W1) => {
            let f = 2.0 * q * q * q + t * q - alpha;
            v[it] = one;
            v[iq] = r + ie * p;
            v[ir] = -ie * (s + q * q / (2.0 * p) + r / p * f);
            if norm == Normalization::Painleve {
                v[ih] = -0.5 * q * q;
                v[ir] += 0.5 * q * q * ie / p;
            }
        }
        (Family::PII, FlowId::W2) => {
            v[ih] = one;
            v[ir] = -ie / p;
        }
        (Family::PII, FlowId::W3) => {
            v[ia] = one;
            v[is] = -ie;
            v[ir] = ie * q / p;
        }
        (Family::PI, FlowId::W1) => {
            v[it] = one;
            v[ih] = -q;
            v[iq] = 2.0 * p * ie + 2.0 * r;
            v[ir] = -ie * (3.0 * q * q + t) * r / p;
            if norm == Normalization::Conserving {
                v[ih] = zero;
                v[ir] -= q * ie / (2.0 * p);
            }
        }
        (Family::PI, FlowId::W2) => {
            v[ih] = one;
            v[ir] = -ie / (2.0 * p);
        }
        (f, w) => return Err(Error::FamilyMismatch(format!("flow {w:?} is not defined for {f:?}"))),
    }
    let base = BasePoint { family, t, h: y[ih], alpha };
    let d = base.q0_partials(q);
    v[StateIdx::P] = (d[0] * v[iq] + d[1] * v[it] + d[2] * v[ih] + d[3] * v[ia]) / (2.0 * p);
    Ok(v)
}

/// The flow as a closure on states, for the given ε.
pub fn flow_field(
    family: Family,
    flow: FlowId,
    norm: Normalization,
    epsilon: C,
) -> impl Fn(&[C]) -> Result<[C; StateIdx::LEN]> {
    move |y: &[C]| flow_vector(family, flow, norm, y, 1.0 / epsilon)
}

/// Max-norm of ∂ₜA − ∂ₓB + [A, B] at x, with ∂ₜA taken by finite differences along the t-flow.
pub fn zero_curvature_residual(fp: &FiberPoint, x: C, norm: Normalization, tol: &Tolerances) -> Result<f64> {
    let family = fp.family();
    let y0 = fp.to_state();
    let mut dir = flow_vector(family, FlowId::W1, norm, &y0, 1.0 / fp.epsilon)?;
    let tdot = dir[StateIdx::T];
    for v in dir.iter_mut() {
        *v /= tdot;
    }
    let eps = fp.epsilon;
    let mut at = [[C::new(0.0, 0.0); 2]; 2];
    for (i, row) in at.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let f = |y: &[C]| {
                let p = FiberPoint::from_state(family, y, eps);
                pencil_laurent(&p, 1.0 / eps, true).eval(x).m[i][j]
            };
            *v = fd_derivative(f, &y0, &[dir.to_vec()], tol)?.value;
        }
    }
    let a = pencil_laurent(fp, 1.0 / eps, true).eval(x);
    let bl = deformation_laurent(fp);
    let b = bl.eval(x);
    let bx = bl.deriv().eval(x);
    let at = super::Matrix2 { m: at };
    Ok(at.sub(&bx).add(&a.commutator(&b)).max_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, re};

    #[test]
    fn piii3_w2_components() {
        let b = BasePoint::new(Family::PIII3, c(1.2, 0.1), c(2.5, -0.3));
        let fp = FiberPoint::on_sheet(b, c(0.8, 0.2), 1.0, c(0.1, 0.2));
        let eps = c(0.9, 0.1);
        let v = flow_vector(Family::PIII3, FlowId::W2, Normalization::Conserving, &fp.to_state(), 1.0 / eps).unwrap();
        assert_eq!(v[StateIdx::H], re(1.0));
        assert!((v[StateIdx::R] + 1.0 / (2.0 * eps * fp.p * fp.q)).norm() < 1e-14);
        assert_eq!(v[StateIdx::Q], re(0.0));
    }

    #[test]
    fn pii_w3_kills_shifted_alpha() {
        let b = BasePoint::new(Family::PII, c(1.2, 0.1), c(0.5, -0.3)).with_alpha(c(0.2, 0.0));
        let fp = FiberPoint::on_sheet(b, c(0.8, 0.2), 1.0, c(0.1, 0.2)).with_s(c(0.3, 0.0));
        let eps = c(0.9, 0.1);
        let v = flow_vector(Family::PII, FlowId::W3, Normalization::Conserving, &fp.to_state(), 1.0 / eps).unwrap();
        assert!((v[StateIdx::ALPHA] + eps * v[StateIdx::S]).norm() < 1e-15);
        assert_eq!(v[StateIdx::Q], re(0.0));
    }

    #[test]
    fn zero_curvature_all_families() {
        for fam in [Family::PIII3, Family::PII, Family::PI] {
            let b = BasePoint::new(fam, c(1.1, 0.3), c(0.4, -0.2));
            let fp = FiberPoint::on_sheet(b, c(0.6, 0.5), 1.0, c(0.2, 0.1)).with_epsilon(c(0.8, -0.3));
            for norm in [Normalization::Conserving, Normalization::Painleve] {
                let res = zero_curvature_residual(&fp, c(-0.3, 0.7), norm, &Tolerances::default()).unwrap();
                assert!(res < 1e-7, "{fam:?} {norm:?} {res}");
            }
        }
    }
}
