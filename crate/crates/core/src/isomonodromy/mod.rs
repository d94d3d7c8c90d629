//! Connection pencils, oper potentials, extended isomonodromic flows and pole analysis.

mod flows;
mod matrices;
mod polefit;
mod trajectory;

pub use flows::{flow_field, flow_vector, zero_curvature_residual, FlowId, Normalization, StateIdx};
pub use matrices::{
    apparent_singularity_residual, deformation_matrix, oper_closed_form_defect, higgs_matrix, oper_potential, oper_potential_parts, pencil_matrix,
    Laurent, Matrix2,
};
pub use polefit::{pole_fit, pole_fit_at, pole_fits, scaled_poly_fit, unwrapped_args, PoleFit, PoleParams};
pub use trajectory::{
    flow_commutator_defect, integrate_flow, Detour, FlowControls, Trajectory, TrajectorySample, CHART_DIRECT, CHART_POLE,
    CHART_ZERO,
};

use crate::numerics::C;
use crate::spectral::{BasePoint, Family};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of the total space in isomonodromy coordinates; `p` carries the sheet of the spectral curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint {
    pub base: BasePoint,
    pub q: C,
    pub p: C,
    pub r: C,
    pub s: C,
    pub epsilon: C,
}

impl FiberPoint {
    /// Build a fiber point with p = sheet·√Q₀(q) (principal root).
    pub fn on_sheet(base: BasePoint, q: C, sheet: f64, r: C) -> Self {
        let p = base.q0(q).sqrt() * sheet;
        FiberPoint { base, q, p, r, s: C::new(0.0, 0.0), epsilon: C::new(1.0, 0.0) }
    }

    pub fn new(base: BasePoint, q: C, p: C, r: C) -> Result<Self> {
        let fp = FiberPoint { base, q, p, r, s: C::new(0.0, 0.0), epsilon: C::new(1.0, 0.0) };
        fp.check_sheet(1e-10)?;
        Ok(fp)
    }

    pub fn with_s(mut self, s: C) -> Self {
        self.s = s;
        self
    }

    pub fn with_epsilon(mut self, eps: C) -> Self {
        self.epsilon = eps;
        self
    }

    pub fn family(&self) -> Family {
        self.base.family
    }

    pub fn sheet_residual(&self) -> C {
        self.p * self.p - self.base.q0(self.q)
    }

    pub fn check_sheet(&self, tol: f64) -> Result<()> {
        let res = self.sheet_residual();
        if res.norm() > tol * (1.0 + self.p.norm_sqr()) {
            return Err(Error::OffCurve(res.norm()));
        }
        Ok(())
    }

    /// Painlevé Hamiltonian built from (q, p, t, α); equals H on the sheet.
    pub fn hamiltonian(&self) -> C {
        let (q, p, t, a) = (self.q, self.p, self.base.t, self.base.alpha);
        match self.family() {
            Family::PIII3 => p * p * q * q - t * q - 1.0 / q,
            Family::PII => 0.5 * (p * p - q * q * q * q - t * q * q + 2.0 * a * q),
            Family::PI => p * p - q * q * q - t * q,
        }
    }

    /// Newton-project p back onto p² = Q₀(q), keeping the sheet.
    pub fn project_sheet(&mut self) {
        let target = self.base.q0(self.q);
        for _ in 0..3 {
            if self.p.norm() == 0.0 {
                break;
            }
            self.p -= (self.p * self.p - target) / (2.0 * self.p);
        }
    }
}

/// ε⁻¹ coefficient Q₁(x) of the oper potential.
pub fn q1(fp: &FiberPoint, x: C) -> C {
    let (q, p, r, s) = (fp.q, fp.p, fp.r, fp.s);
    match fp.family() {
        Family::PIII3 => -p * q * q / (x * x * (x - q)) + 2.0 * p * q * r / (x * x),
        Family::PII => -p / (x - q) + 2.0 * p * r - 2.0 * s * (x - q),
        Family::PI => -p / (x - q) + 2.0 * p * r,
    }
}

/// ε⁰ coefficient Q₂(x) of the oper potential.
pub fn q2(fp: &FiberPoint, x: C) -> C {
    let (q, r) = (fp.q, fp.r);
    let d = x - q;
    let dp = 0.75 / (d * d);
    match fp.family() {
        Family::PIII3 => dp - (x + r * q) / (x * x * d) + r * r / (x * x),
        Family::PII | Family::PI => dp - r / d + r * r,
    }
}

/// Closed-form oper potential ε⁻²Q₀ + ε⁻¹Q₁ + Q₂.
pub fn oper_closed_form(fp: &FiberPoint, x: C) -> C {
    let ie = 1.0 / fp.epsilon;
    ie * ie * fp.base.q0(x) + ie * q1(fp, x) + q2(fp, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::re;

    #[test]
    fn hamiltonian_on_sheet() {
        let b = BasePoint::new(Family::PIII3, re(1.0), re(3.0));
        let fp = FiberPoint::on_sheet(b, re(1.0), 1.0, re(0.0));
        assert!((fp.p - re(5f64.sqrt())).norm() < 1e-15);
        assert!((fp.hamiltonian() - re(3.0)).norm() < 1e-14);
        let b2 = BasePoint::new(Family::PII, re(1.0), re(1.0));
        let fp2 = FiberPoint::on_sheet(b2, re(1.0), 1.0, re(0.0));
        assert!((fp2.hamiltonian() - re(1.0)).norm() < 1e-14);
        let b1 = BasePoint::new(Family::PI, re(0.5), re(2.0));
        let fp1 = FiberPoint::on_sheet(b1, re(0.7), -1.0, re(0.0));
        assert!((fp1.hamiltonian() - re(2.0)).norm() < 1e-14);
    }
}
