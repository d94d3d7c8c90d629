use super::theta::uniform_parts;
use crate::isomonodromy::FiberPoint;
use crate::numerics::C;
use crate::spectral::{elliptic_periods, elliptic_periods_near, reduce_to_weierstrass, BasePoint, PeriodData};
use crate::Result;

/// Local chart around a fiber point in coordinates (t, H, q, r, s). Nearby points are continued
/// from the anchor: p on the same sheet, the Abel image and the period basis tracked.
#[derive(Debug, Clone)]
pub(crate) struct FiberChart {
    pub anchor: FiberPoint,
    pub v0: C,
    pub pd0: PeriodData,
}

impl FiberChart {
    pub fn new(fp: &FiberPoint) -> Result<Self> {
        let chart = reduce_to_weierstrass(&fp.base)?;
        let (v0, _, _) = uniform_parts(fp, &chart, None)?;
        Ok(FiberChart { anchor: *fp, v0, pd0: elliptic_periods(&fp.base)? })
    }

    pub fn coords(fp: &FiberPoint) -> [C; 5] {
        [fp.base.t, fp.base.h, fp.q, fp.r, fp.s]
    }

    pub fn base(&self, y: &[C]) -> BasePoint {
        BasePoint { t: y[0], h: y[1], ..self.anchor.base }
    }

    pub fn fiber(&self, y: &[C]) -> FiberPoint {
        let base = self.base(y);
        let mut p = base.q0(y[2]).sqrt();
        if (p - self.anchor.p).norm() > (p + self.anchor.p).norm() {
            p = -p;
        }
        let s = y.get(4).copied().unwrap_or(self.anchor.s);
        FiberPoint { base, q: y[2], p, r: y[3], s, epsilon: self.anchor.epsilon }
    }

    /// (θ_first, θ_H) at y.
    pub fn theta(&self, y: &[C]) -> Result<[C; 2]> {
        let fp = self.fiber(y);
        let chart = reduce_to_weierstrass(&fp.base)?;
        let (v, th, _) = uniform_parts(&fp, &chart, Some(self.v0))?;
        Ok([v, th])
    }

    pub fn periods(&self, y: &[C]) -> Result<PeriodData> {
        elliptic_periods_near(&self.base(y), &self.pd0)
    }
}
