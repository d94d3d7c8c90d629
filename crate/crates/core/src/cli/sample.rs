use crate::isomonodromy::FiberPoint;
use crate::joyce::plebanski_w;
use crate::numerics::C;
use crate::spectral::{BasePoint, Family};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn complex_in(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> C {
    C::new(r.gen_range(lo..hi), r.gen_range(lo..hi))
}

/// Random base point comfortably inside the regular locus (PII with α = 0).
pub fn random_base(r: &mut ChaCha8Rng, family: Family) -> BasePoint {
    loop {
        let t = match family {
            Family::PIII3 => C::new(r.gen_range(0.5..1.5), r.gen_range(-0.5..0.5)),
            _ => complex_in(r, -1.0, 1.0),
        };
        let shift = if family == Family::PIII3 { 2.5 } else { 0.0 };
        let b = BasePoint::new(family, t, complex_in(r, -2.0, 2.0) + shift);
        if b.check_joyce_regular().is_ok() && b.discriminant().norm() > 1e-1 {
            return b;
        }
    }
}

/// Random fiber point with |q| in [0.4, 1.4], random sheet and r, away from ramification.
pub fn random_fiber(r: &mut ChaCha8Rng, family: Family, with_r: bool) -> FiberPoint {
    loop {
        let b = random_base(r, family);
        let q = C::from_polar(r.gen_range(0.4..1.4), r.gen_range(-PI..PI));
        let sheet = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let rr = if with_r { complex_in(r, -0.4, 0.4) } else { C::new(0.0, 0.0) };
        let fp = FiberPoint::on_sheet(b, q, sheet, rr);
        if fp.p.norm() > 0.2 && plebanski_w(&fp).is_ok() {
            return fp;
        }
    }
}
