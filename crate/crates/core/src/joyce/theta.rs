use crate::isomonodromy::FiberPoint;
use crate::numerics::{quad_path, PathSegment, SingularityHint, Tolerances, C, I};
use crate::spectral::{branch_points, elliptic_periods, reduce_to_weierstrass, BasePoint, Family, WeierstrassChart};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaBackend {
    Periods,
    Uniformization,
}

/// Vertical coordinates (θ_s or θ_t, θ_H [, θ_α]) and the lattice they are defined modulo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCoords {
    pub first: C,
    pub h: C,
    pub alpha: Option<C>,
    /// Generators of the ambiguity lattice in the (first, H) plane.
    pub lattice: [[C; 2]; 2],
}

impl ThetaCoords {
    pub fn pair(&self) -> [C; 2] {
        [self.first, self.h]
    }

    pub fn distance_mod_lattice(&self, other: &ThetaCoords) -> f64 {
        lattice_distance([self.first - other.first, self.h - other.h], &self.lattice)
    }
}

/// Distance from d to the nearest point of the real lattice spanned by two vectors of C².
pub fn lattice_distance(d: [C; 2], lattice: &[[C; 2]; 2]) -> f64 {
    let dot = |a: &[C; 2], b: &[C; 2]| (a[0].conj() * b[0] + a[1].conj() * b[1]).re;
    let (l0, l1) = (&lattice[0], &lattice[1]);
    let (g00, g01, g11) = (dot(l0, l0), dot(l0, l1), dot(l1, l1));
    let (r0, r1) = (dot(l0, &d), dot(l1, &d));
    let det = g00 * g11 - g01 * g01;
    let (a, b) = if det.abs() > 0.0 { ((r0 * g11 - r1 * g01) / det, (g00 * r1 - g01 * r0) / det) } else { (0.0, 0.0) };
    let mut best = f64::INFINITY;
    for da in -1..=1 {
        for db in -1..=1 {
            let (m, n) = (a.round() + da as f64, b.round() + db as f64);
            let e0 = d[0] - l0[0] * m - l1[0] * n;
            let e1 = d[1] - l0[1] * m - l1[1] * n;
            best = best.min((e0.norm_sqr() + e1.norm_sqr()).sqrt());
        }
    }
    best
}

/// Lattice generators (2πi/κ)(ω_i, −β_i), κ the bilinear constant of the family.
pub fn theta_lattice(base: &BasePoint) -> Result<[[C; 2]; 2]> {
    let pd = elliptic_periods(base)?;
    let k = 2.0 * PI * I / base.family.pairing_constant();
    Ok([[k * pd.omega[0], -k * pd.beta[0]], [k * pd.omega[1], -k * pd.beta[1]]])
}

/// Abel image v of (q, p) and the vertical coordinates in closed form.
pub(crate) fn uniform_parts(fp: &FiberPoint, chart: &WeierstrassChart, near: Option<C>) -> Result<(C, C, C)> {
    let b = &fp.base;
    if b.family == Family::PII && b.alpha.norm() > 0.0 {
        return Err(Error::Config("uniformization needs alpha = 0".into()));
    }
    let (x, y) = chart.forward(fp.q, fp.p);
    let (v, zeta) = match near {
        Some(n) => {
            let v = chart.ed.abel_map_near(x, y, n)?;
            (v, chart.ed.eval_near(v, n)?.2)
        }
        None => {
            let v = chart.ed.abel_map(x, y)?;
            (v, chart.ed.zeta(v)?)
        }
    };
    let (q, p, r) = (fp.q, fp.p, fp.r);
    let th = match b.family {
        Family::PIII3 => zeta + b.h * v / 3.0 - 2.0 * p * q * r,
        Family::PII => zeta + b.t * v / 12.0 + 0.5 * q - p * r - q * fp.s,
        Family::PI => zeta - 2.0 * p * r,
    };
    Ok((v, th, zeta))
}

fn check_fiber(fp: &FiberPoint) -> Result<()> {
    fp.base.check_regular()?;
    if fp.p.norm() < 1e-12 {
        return Err(Error::SheetSingular(format!("q = {} is a branch point", fp.q)));
    }
    fp.check_sheet(1e-8)
}

pub fn theta_map(fp: &FiberPoint, backend: ThetaBackend, tol: &Tolerances) -> Result<ThetaCoords> {
    check_fiber(fp)?;
    let lattice = theta_lattice(&fp.base)?;
    let (first, h) = match backend {
        ThetaBackend::Uniformization => {
            let chart = reduce_to_weierstrass(&fp.base)?;
            let (v, th, _) = uniform_parts(fp, &chart, None)?;
            (v, th)
        }
        ThetaBackend::Periods => periods_theta(fp, tol)?,
    };
    let alpha = (fp.family() == Family::PII).then(|| 0.5 - fp.s);
    Ok(ThetaCoords { first, h, alpha, lattice })
}

/// Zeros of the polynomial part of Q₀.
fn polynomial_roots(base: &BasePoint) -> Result<Vec<C>> {
    Ok(branch_points(base)?.into_iter().map(|p| p.x).collect())
}

// distance from z to the segment [a, b]
fn segment_distance(z: C, a: C, b: C) -> f64 {
    let d = b - a;
    let s = ((z - a) * d.conj()).re / d.norm_sqr();
    (z - (a + d * s.clamp(0.0, 1.0))).norm()
}

fn clearance(path: &[C], obstacles: &[C]) -> f64 {
    let mut m = f64::INFINITY;
    for w in path.windows(2) {
        for z in obstacles {
            if (z - w[0]).norm() > 1e-12 && (z - w[1]).norm() > 1e-12 {
                m = m.min(segment_distance(*z, w[0], w[1]));
            }
        }
    }
    m
}

/// Branch point whose straight segment to q keeps reasonable clearance, preferring near ones.
fn start_branch_point(pts: &[C], q: C) -> usize {
    let score = |k: usize| {
        let len = (q - pts[k]).norm();
        let c = clearance(&[pts[k], q], pts);
        if c > 0.25 * len { len } else { 1e6 * len / c.max(1e-300) }
    };
    (0..pts.len()).min_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap()
}

/// Continued branch of y on a segment ending at an anchor where y is known:
/// y(x) = y_a · Π √((x − e_k)/(a − e_k)) · (√(x/a))^(−3), the last factor for PIII₃.
struct SegmentBranch<'a> {
    anchor: C,
    y_anchor: C,
    roots: &'a [C],
    cubic_pole: bool,
}

impl SegmentBranch<'_> {
    fn eval(&self, x: C) -> C {
        let mut y = self.y_anchor;
        for e in self.roots {
            y *= ((x - e) / (self.anchor - e)).sqrt();
        }
        if self.cubic_pole {
            y /= (x / self.anchor).sqrt().powi(3);
        }
        y
    }
}

type Form<'a> = &'a dyn Fn(C, C) -> C;

/// ∫ from the branch point e to (q, p) of two forms f(x, y) dx. The straight segment is replaced
/// by a two-segment path when it passes close to another branch point.
fn integrate_from(e: C, q: C, p: C, roots: &[C], cubic_pole: bool, forms: [Form; 2], tol: &Tolerances) -> Result<[C; 2]> {
    let mut obstacles = roots.to_vec();
    if cubic_pole {
        obstacles.push(C::new(0.0, 0.0));
    }
    let len = (q - e).norm();
    let mut path = vec![e, q];
    if clearance(&path, &obstacles) < 0.2 * len {
        let mid = 0.5 * (e + q);
        let normal = (q - e) * I / len;
        let mut best = (path.clone(), clearance(&path, &obstacles));
        for k in 1..=8 {
            for sign in [1.0, -1.0] {
                let cand = vec![e, mid + normal * (sign * 0.25 * k as f64 * len), q];
                let c = clearance(&cand, &obstacles);
                if c > best.1 {
                    best = (cand, c);
                }
            }
        }
        path = best.0;
    }
    let mut out = [C::new(0.0, 0.0); 2];
    let (mut anchor, mut y_anchor) = (q, p);
    for k in (0..path.len() - 1).rev() {
        let br = SegmentBranch { anchor, y_anchor, roots, cubic_pole };
        let hint = if k == 0 { SingularityHint::InverseSqrtAtStart } else { SingularityHint::None };
        let seg = [PathSegment::with_hint(path[k], path[k + 1], hint)];
        for (o, f) in out.iter_mut().zip(forms) {
            *o += quad_path(|x| f(x, br.eval(x)), &seg, tol)?;
        }
        if k > 0 {
            y_anchor = br.eval(path[k]);
            anchor = path[k];
        }
    }
    Ok(out)
}

/// Period-integral backend. Half the anti-invariant integral from (q, −p) to (q, p) is the integral
/// from a branch point to (q, p); the branch point is x = 0 for PIII₃ (the puncture, whose Abel
/// image lies in the θ-lattice) and the point at infinity otherwise, reached from the nearest
/// finite branch point.
fn periods_theta(fp: &FiberPoint, tol: &Tolerances) -> Result<(C, C)> {
    let b = &fp.base;
    let (t, q, p, r, s) = (b.t, fp.q, fp.p, fp.r, fp.s);
    let roots = polynomial_roots(b)?;
    match b.family {
        Family::PIII3 => {
            let om = |x: C, y: C| 1.0 / (2.0 * x * x * y);
            let be = move |x: C, y: C| t / (2.0 * x * y);
            let [a, bb] = integrate_from(C::new(0.0, 0.0), q, p, &roots, true, [&om, &be], tol)?;
            Ok((a, -bb - 2.0 * p * q * r))
        }
        Family::PII => {
            let om = |_x: C, y: C| 1.0 / y;
            let be = |x: C, y: C| x * x / (2.0 * y) - 0.5;
            let e = roots[start_branch_point(&roots, q)];
            let [a, bb] = integrate_from(e, q, p, &roots, false, [&om, &be], tol)?;
            let [ai, bi] = infinity_integrals(b, &roots, e, tol)?;
            Ok((a - ai, -(bb - bi) - (p * r + q * s) - 0.5 * q))
        }
        Family::PI => {
            let om = |_x: C, y: C| 0.5 / y;
            let be = |x: C, y: C| 0.5 * x / y;
            let e = roots[start_branch_point(&roots, q)];
            let [a, bb] = integrate_from(e, q, p, &roots, false, [&om, &be], tol)?;
            let [ai, bi] = infinity_integrals(b, &roots, e, tol)?;
            Ok((a - ai, -(bb - bi) - 2.0 * p * r))
        }
    }
}

/// ∫ from the branch point e to infinity of ω and of the regularised β: for PII, β_t − dx/2 up to
/// ∞₊; for PI, x dx/2y with the divergent √x part dropped. The ray to a far point F is integrated
/// in x, the rest in a local parameter at infinity.
fn infinity_integrals(b: &BasePoint, roots: &[C], e: C, tol: &Tolerances) -> Result<[C; 2]> {
    let (t, h, al) = (b.t, b.h, b.alpha);
    // S(u) → 1 at infinity; u = 1/x for PII and u = x^(-1/2) for PI
    let sq = move |u: C| match b.family {
        Family::PII => (1.0 + t * u * u - 2.0 * al * u * u * u + 2.0 * h * u * u * u * u).sqrt(),
        _ => (1.0 + t * u.powi(4) + h * u.powi(6)).sqrt(),
    };
    let local = |x: C| if b.family == Family::PII { 1.0 / x } else { 1.0 / x.sqrt() };
    let small = |x: C| (sq(local(x)) * sq(local(x)) - 1.0).norm() < 0.25;
    let mut radius = 2.0 * roots.iter().fold(0.0f64, |m, z| m.max(z.norm())) + 2.0;
    while ![1.0, -1.0].iter().all(|&sx| small(C::new(sx * radius, 0.0)) && small(C::new(0.0, sx * radius))) {
        radius *= 2.0;
    }
    let len = radius + e.norm();
    let mut best = (C::new(1.0, 0.0), -1.0);
    for k in 0..16 {
        let d = C::from_polar(1.0, PI * k as f64 / 8.0);
        let c = clearance(&[e, e + d * len], roots);
        if c > best.1 {
            best = (d, c);
        }
    }
    let far = e + best.0 * len;
    let uf = local(far);
    let zero = C::new(0.0, 0.0);
    let tail = [PathSegment::new(zero, uf)];
    let path = [PathSegment::with_hint(e, far, SingularityHint::InverseSqrtAtStart)];
    match b.family {
        Family::PII => {
            let br = SegmentBranch { anchor: far, y_anchor: far * far * sq(uf), roots, cubic_pole: false };
            let a1 = quad_path(|x| 1.0 / br.eval(x), &path, tol)?;
            let b1 = quad_path(|x| x * x / (2.0 * br.eval(x)) - 0.5, &path, tol)?;
            let a2 = quad_path(|u| 1.0 / sq(u), &tail, tol)?;
            let b2 = -quad_path(|u| 0.5 * (t - 2.0 * al * u + 2.0 * h * u * u) / (sq(u) * (1.0 + sq(u))), &tail, tol)?;
            Ok([a1 + a2, b1 + b2])
        }
        _ => {
            let br = SegmentBranch { anchor: far, y_anchor: sq(uf) / uf.powi(3), roots, cubic_pole: false };
            let a1 = quad_path(|x| 0.5 / br.eval(x), &path, tol)?;
            let b1 = quad_path(|x| 0.5 * x / br.eval(x), &path, tol)?;
            let a2 = quad_path(|w| 1.0 / sq(w), &tail, tol)?;
            let b2 = -1.0 / uf - quad_path(|w| (t * w * w + h * w.powi(4)) / (sq(w) * (1.0 + sq(w))), &tail, tol)?;
            Ok([a1 + a2, b1 + b2])
        }
    }
}

/// Uniformizing data (v, w): v the Abel image, w the rescaled reference parameter near the zero section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformizedFiber {
    pub v: C,
    pub w: C,
}

pub fn uniformized_fiber(fp: &FiberPoint) -> Result<UniformizedFiber> {
    check_fiber(fp)?;
    let chart = reduce_to_weierstrass(&fp.base)?;
    let (v, _, _) = uniform_parts(fp, &chart, Some(C::new(0.0, 0.0)))?;
    let w = match fp.family() {
        Family::PIII3 => (1.0 + 2.0 * fp.r) / v,
        Family::PII => (0.5 * v + fp.base.t * v * v * v / 12.0 - fp.r) / (v * v),
        Family::PI => return Err(Error::FamilyMismatch("no (v, w) chart for PI".into())),
    };
    Ok(UniformizedFiber { v, w })
}

/// Fiber point with Abel image v and reference parameter r.
fn fiber_at(chart: &WeierstrassChart, v: C, r_of: impl Fn(C, C, C) -> C) -> Result<FiberPoint> {
    let (xx, yy, zeta) = chart.ed.eval(v)?;
    let (q, p) = chart.inverse(xx, yy);
    let r = r_of(q, p, zeta);
    Ok(FiberPoint { base: chart.base, q, p, r, s: C::new(0.0, 0.0), epsilon: C::new(1.0, 0.0) })
}

pub fn fiber_from_uniformized(base: &BasePoint, uf: UniformizedFiber) -> Result<FiberPoint> {
    let chart = reduce_to_weierstrass(base)?;
    let (v, w, t) = (uf.v, uf.w, base.t);
    match base.family {
        Family::PIII3 => fiber_at(&chart, v, |_, _, _| 0.5 * (w * v - 1.0)),
        Family::PII => fiber_at(&chart, v, |_, _, _| 0.5 * v - w * v * v + t * v * v * v / 12.0),
        Family::PI => Err(Error::FamilyMismatch("no (v, w) chart for PI".into())),
    }
}

/// Fiber point with the given vertical coordinates. θ_first is the Abel image exactly and θ_H is
/// affine in r, so the inverse is explicit. PII takes s from θ_α (default s = 0).
pub fn theta_inverse(base: &BasePoint, theta: &ThetaCoords) -> Result<FiberPoint> {
    theta_inverse_pair(base, theta.first, theta.h, theta.alpha.map(|a| 0.5 - a).unwrap_or_default())
}

pub fn theta_inverse_pair(base: &BasePoint, first: C, th: C, s: C) -> Result<FiberPoint> {
    let chart = reduce_to_weierstrass(base)?;
    let (t, h) = (base.t, base.h);
    let v = first;
    let mut fp = match base.family {
        Family::PIII3 => fiber_at(&chart, v, |q, p, zeta| (zeta + h * v / 3.0 - th) / (2.0 * p * q))?,
        Family::PII => fiber_at(&chart, v, |q, p, zeta| (zeta + t * v / 12.0 + 0.5 * q - q * s - th) / p)?,
        Family::PI => fiber_at(&chart, v, |_, p, zeta| (zeta - th) / (2.0 * p))?,
    };
    fp.s = s;
    if !(fp.q.is_finite() && fp.p.is_finite() && fp.r.is_finite()) {
        return Err(Error::NoConvergence(format!("theta = ({first}, {th}) is on the polar locus")));
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joyce::{involution_piii, plebanski_w};
    use crate::numerics::{c, re};

    fn samples() -> Vec<FiberPoint> {
        vec![
            FiberPoint::on_sheet(BasePoint::new(Family::PIII3, re(1.0), re(3.0)), c(0.7, 0.2), 1.0, c(0.2, -0.1)),
            FiberPoint::on_sheet(BasePoint::new(Family::PIII3, c(0.6, 0.4), c(-1.0, 0.5)), c(-0.3, 0.9), -1.0, re(0.4)),
            FiberPoint::on_sheet(BasePoint::new(Family::PII, re(1.0), re(1.0)), c(0.4, 0.3), 1.0, c(0.1, 0.2)).with_s(c(0.05, 0.0)),
            FiberPoint::on_sheet(BasePoint::new(Family::PII, c(-0.5, 0.3), c(0.7, -0.2)), c(1.3, -0.4), -1.0, re(-0.3)),
            FiberPoint::on_sheet(BasePoint::new(Family::PI, re(1.0), re(0.5)), c(0.2, 0.6), 1.0, c(0.3, 0.1)),
            FiberPoint::on_sheet(BasePoint::new(Family::PI, c(-0.4, 0.9), c(0.3, 0.2)), c(-1.1, -0.3), -1.0, re(0.2)),
        ]
    }

    #[test]
    fn backends_agree_mod_lattice() {
        let tol = Tolerances::default();
        for fp in samples() {
            let a = theta_map(&fp, ThetaBackend::Uniformization, &tol).unwrap();
            let b = theta_map(&fp, ThetaBackend::Periods, &tol).unwrap();
            let d = a.distance_mod_lattice(&b);
            assert!(d < 1e-8, "{:?}: {a:?} vs {b:?} (distance {d})", fp.family());
        }
    }

    #[test]
    fn inverse_round_trip() {
        let tol = Tolerances::default();
        for fp in samples() {
            let th = theta_map(&fp, ThetaBackend::Uniformization, &tol).unwrap();
            let back = theta_inverse(&fp.base, &th).unwrap();
            let err = (back.q - fp.q).norm() + (back.p - fp.p).norm() + (back.r - fp.r).norm() + (back.s - fp.s).norm();
            assert!(err < 1e-9, "{fp:?} -> {back:?}");
        }
    }

    #[test]
    fn involution_preserves_theta_and_w() {
        let tol = Tolerances::default();
        for fp in samples().into_iter().filter(|f| f.family() == Family::PIII3) {
            let inv = involution_piii(&fp).unwrap();
            let a = theta_map(&fp, ThetaBackend::Uniformization, &tol).unwrap();
            let b = theta_map(&inv, ThetaBackend::Uniformization, &tol).unwrap();
            assert!(a.distance_mod_lattice(&b) < 1e-10, "{a:?} vs {b:?}");
            let (wa, wb) = (plebanski_w(&fp).unwrap(), plebanski_w(&inv).unwrap());
            assert!((wa - wb).norm() < 1e-10 * (1.0 + wa.norm()));
        }
    }

    #[test]
    fn uniformized_round_trip() {
        for fp in samples().into_iter().filter(|f| f.family() != Family::PI && f.s.norm() == 0.0) {
            let uf = uniformized_fiber(&fp).unwrap();
            let back = fiber_from_uniformized(&fp.base, uf).unwrap();
            assert!((back.q - fp.q).norm() + (back.r - fp.r).norm() < 1e-9);
        }
    }

    #[test]
    fn lattice_distance_ignores_lattice_shifts() {
        let l = [[c(1.0, 0.2), c(0.3, 0.0)], [c(0.1, 1.1), c(-0.2, 0.5)]];
        let d = [l[0][0] * 3.0 - l[1][0] * 2.0 + 1e-3, l[0][1] * 3.0 - l[1][1] * 2.0];
        assert!((lattice_distance(d, &l) - 1e-3).abs() < 1e-12);
    }
}
