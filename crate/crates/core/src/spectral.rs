//! Quadratic-differential families, spectral curves, cycles and periods.

use crate::elliptic::EllipticData;
use crate::isomonodromy::FiberPoint;
use crate::numerics::{poly_roots, quad_path, PathSegment, Tolerances, C, I};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    PI,
    PII,
    PIII3,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::PI => "pi",
            Family::PII => "pii",
            Family::PIII3 => "piii3",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" | "p1" => Ok(Family::PI),
            "pii" | "p2" => Ok(Family::PII),
            "piii3" | "piii" | "p3" => Ok(Family::PIII3),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

impl Family {
    /// Riemann bilinear constant ⟨ω, β⟩ over the recorded cycle basis.
    pub fn pairing_constant(self) -> C {
        match self {
            Family::PIII3 => 4.0 * PI * I,
            Family::PII | Family::PI => 2.0 * PI * I,
        }
    }

    /// Intersection number ⟨γ₁, γ₂⟩ of the recorded basis.
    pub fn cycle_pairing(self) -> i64 {
        match self {
            Family::PIII3 => 2,
            _ => 1,
        }
    }
}

/// A point (t, H, α) of the base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub family: Family,
    pub t: C,
    pub h: C,
    pub alpha: C,
}

const REGULARITY_TOL: f64 = 1e-10;

impl BasePoint {
    pub fn new(family: Family, t: C, h: C) -> Self {
        BasePoint { family, t, h, alpha: C::new(0.0, 0.0) }
    }

    pub fn with_alpha(mut self, alpha: C) -> Self {
        self.alpha = alpha;
        self
    }

    /// Q₀(x).
    pub fn q0(&self, x: C) -> C {
        let (t, h, a) = (self.t, self.h, self.alpha);
        match self.family {
            Family::PI => x * x * x + t * x + h,
            Family::PII => x * x * x * x + t * x * x - 2.0 * a * x + 2.0 * h,
            Family::PIII3 => t / x + h / (x * x) + 1.0 / (x * x * x),
        }
    }

    /// (∂ₓ, ∂ₜ, ∂_H, ∂_α) of Q₀ at x.
    pub fn q0_partials(&self, x: C) -> [C; 4] {
        let (t, h, a) = (self.t, self.h, self.alpha);
        let zero = C::new(0.0, 0.0);
        match self.family {
            Family::PI => [3.0 * x * x + t, x, C::new(1.0, 0.0), zero],
            Family::PII => [4.0 * x * x * x + 2.0 * t * x - 2.0 * a, x * x, C::new(2.0, 0.0), -2.0 * x],
            Family::PIII3 => {
                let x2 = x * x;
                [-t / x2 - 2.0 * h / (x2 * x) - 3.0 / (x2 * x2), 1.0 / x, 1.0 / x2, zero]
            }
        }
    }

    /// Discriminant-type quantity whose vanishing marks a singular curve.
    pub fn discriminant(&self) -> C {
        let (t, h) = (self.t, self.h);
        match self.family {
            Family::PI => 4.0 * t * t * t + 27.0 * h * h,
            Family::PIII3 => t * (h * h - 4.0 * t),
            Family::PII => {
                let (g2, g3) = self.invariants();
                g2 * g2 * g2 - 27.0 * g3 * g3
            }
        }
    }

    /// Weierstrass invariants of the reduced curve.
    pub fn invariants(&self) -> (C, C) {
        let (t, h, a) = (self.t, self.h, self.alpha);
        match self.family {
            Family::PIII3 => ((4.0 * h * h - 12.0 * t) / 3.0, 4.0 * h / 27.0 * (9.0 * t - 2.0 * h * h)),
            Family::PII => ((24.0 * h + t * t) / 12.0, t * (72.0 * h - t * t) / 216.0 - a * a / 4.0),
            Family::PI => (-4.0 * t, -4.0 * h),
        }
    }

    pub fn check_regular(&self) -> Result<()> {
        let (t, h) = (self.t, self.h);
        let bad = match self.family {
            Family::PIII3 => {
                if t.norm() < REGULARITY_TOL {
                    Some("t = 0".to_string())
                } else if (h * h - 4.0 * t).norm() < REGULARITY_TOL * (h.norm_sqr() + 4.0 * t.norm()) {
                    Some("H^2 - 4t = 0".to_string())
                } else {
                    None
                }
            }
            Family::PI => {
                let d = 4.0 * t * t * t + 27.0 * h * h;
                (d.norm() < REGULARITY_TOL * (4.0 * t.norm().powi(3) + 27.0 * h.norm_sqr()).max(1e-300))
                    .then(|| "4t^3 + 27H^2 = 0".to_string())
            }
            Family::PII => {
                let (g2, g3) = self.invariants();
                let d = g2 * g2 * g2 - 27.0 * g3 * g3;
                (d.norm() < REGULARITY_TOL * (g2.norm().powi(3) + 27.0 * g3.norm_sqr()).max(1e-300))
                    .then(|| "quartic discriminant = 0".to_string())
            }
        };
        match bad {
            Some(why) => Err(Error::SingularCurve(format!("{why} at {self:?}"))),
            None => Ok(()),
        }
    }

    /// Joyce-structure regularity: the PII Plebański denominator H(t² − 8H) must also be nonzero.
    pub fn check_joyce_regular(&self) -> Result<()> {
        self.check_regular()?;
        if self.family == Family::PII {
            if self.alpha.norm() > 0.0 {
                return Err(Error::Config("Joyce-structure operations need alpha = 0".into()));
            }
            let d = self.h * (self.t * self.t - 8.0 * self.h);
            if d.norm() < REGULARITY_TOL {
                return Err(Error::DenominatorZero("H(t^2 - 8H)".into()));
            }
        }
        Ok(())
    }

    pub fn weierstrass(&self) -> Result<WeierstrassChart> {
        reduce_to_weierstrass(self)
    }
}

/// A point on y² = Q₀(x) with an explicit sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: C,
    pub y: C,
}

/// Weierstrass data plus the coordinate maps (x, y) ↔ (X, Y).
#[derive(Debug, Clone, Copy)]
pub struct WeierstrassChart {
    pub base: BasePoint,
    pub ed: EllipticData,
}

impl WeierstrassChart {
    pub fn forward(&self, x: C, y: C) -> (C, C) {
        let (t, h) = (self.base.t, self.base.h);
        match self.base.family {
            Family::PIII3 => (t * x + h / 3.0, 2.0 * t * x * x * y),
            Family::PII => (t / 12.0 + 0.5 * (y + x * x), 0.5 * t * x + x * y + x * x * x),
            Family::PI => (x, 2.0 * y),
        }
    }

    pub fn inverse(&self, xx: C, yy: C) -> (C, C) {
        let (t, h) = (self.base.t, self.base.h);
        match self.base.family {
            Family::PIII3 => {
                let x = (xx - h / 3.0) / t;
                (x, yy / (2.0 * t * x * x))
            }
            Family::PII => {
                let den = 6.0 * xx + t;
                (
                    3.0 * yy / den,
                    (144.0 * xx * xx + 48.0 * xx * t + 72.0 * h - 5.0 * t * t) / (24.0 * den),
                )
            }
            Family::PI => (xx, 0.5 * yy),
        }
    }

    /// ℘-value of the distinguished half-period: X of the branch point x = 0 (PIII₃ only).
    pub fn puncture_root(&self) -> Option<usize> {
        (self.base.family == Family::PIII3).then(|| {
            let target = self.base.h / 3.0;
            (0..3)
                .min_by(|&a, &b| (self.ed.roots[a] - target).norm().total_cmp(&(self.ed.roots[b] - target).norm()))
                .unwrap()
        })
    }
}

pub fn reduce_to_weierstrass(base: &BasePoint) -> Result<WeierstrassChart> {
    base.check_regular()?;
    if base.family == Family::PII && base.alpha.norm() > 0.0 {
        // the coordinate maps are only available at α = 0; invariants still make sense
        let (g2, g3) = base.invariants();
        let ed = EllipticData::new(g2, g3)?;
        return Ok(WeierstrassChart { base: *base, ed });
    }
    let (g2, g3) = base.invariants();
    Ok(WeierstrassChart { base: *base, ed: EllipticData::new(g2, g3)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Lambda,
    Omega,
    /// β_s (PIII₃) or β_t (PII, PI).
    BetaFirst,
    BetaAlpha,
    Theta,
}

/// Either a bare base point or a full fiber point (needed for the θ-form).
#[derive(Debug, Clone, Copy)]
pub enum Context<'a> {
    Base(&'a BasePoint),
    Fiber(&'a FiberPoint),
}

impl Context<'_> {
    pub fn base(&self) -> &BasePoint {
        match self {
            Context::Base(b) => b,
            Context::Fiber(f) => &f.base,
        }
    }
}

/// dx-coefficient of a differential at a curve point, using the point's own sheet.
pub fn differential_eval(form: Form, ctx: Context, pt: CurvePoint) -> Result<C> {
    let b = ctx.base();
    let (x, y) = (pt.x, pt.y);
    let pole = |what: &str| Err(Error::PoleHit(format!("{what} at x = {x}")));
    if matches!(form, Form::Omega | Form::BetaFirst | Form::BetaAlpha | Form::Theta) && y.norm() < 1e-9 {
        return pole("branch point");
    }
    if b.family == Family::PIII3 && x.norm() < 1e-9 {
        return pole("x = 0");
    }
    match (b.family, form) {
        (_, Form::Lambda) => Ok(y),
        (Family::PIII3, Form::Omega) => Ok(1.0 / (2.0 * x * x * y)),
        (Family::PIII3, Form::BetaFirst) => Ok(b.t / (2.0 * x * y)),
        (Family::PII, Form::Omega) => Ok(1.0 / y),
        (Family::PII, Form::BetaFirst) => Ok(x * x / (2.0 * y)),
        (Family::PII, Form::BetaAlpha) => Ok(-x / y),
        (Family::PI, Form::Omega) => Ok(1.0 / (2.0 * y)),
        (Family::PI, Form::BetaFirst) => Ok(x / (2.0 * y)),
        (_, Form::BetaAlpha) => Err(Error::FamilyMismatch("beta_alpha exists only for PII".into())),
        (_, Form::Theta) => match ctx {
            Context::Fiber(fp) => {
                if (x - fp.q).norm() < 1e-9 {
                    return pole("x = q");
                }
                Ok(-crate::isomonodromy::q1(fp, x) / (2.0 * y))
            }
            Context::Base(_) => Err(Error::Config("theta form needs a fiber point".into())),
        },
    }
}

/// Zeros of Q₀ (numerator for PIII₃); PIII₃ also has branch points at 0 and ∞, PI at ∞.
pub fn branch_points(base: &BasePoint) -> Result<Vec<CurvePoint>> {
    base.check_regular()?;
    let (t, h, a) = (base.t, base.h, base.alpha);
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    let coeffs = match base.family {
        Family::PI => vec![h, t, zero, one],
        Family::PII => vec![2.0 * h, -2.0 * a, t, zero, one],
        Family::PIII3 => vec![one, h, t],
    };
    let roots = poly_roots(&coeffs)?;
    Ok(roots.into_iter().map(|x| CurvePoint { x, y: zero }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleLabel {
    Gamma1,
    Gamma2,
    Gamma3,
}

/// A segment of a cycle representative on the double cover; `sheet` multiplies the continued branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetSegment {
    pub segment: PathSegment,
    pub sheet: i8,
}

/// Homology class recorded by its coordinates (m, n) in the full-period basis (2ω₁, 2ω₂) of the
/// reduced Weierstrass lattice (γ₃ of PII is the loop around ∞₊ and has coordinates (0, 0)).
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    pub label: CycleLabel,
    pub coords: (i64, i64),
    pub representative: Vec<SheetSegment>,
}

/// Integer basis coordinates of γ₁, γ₂.
pub fn cycle_coords(chart: &WeierstrassChart) -> [(i64, i64); 2] {
    match chart.puncture_root() {
        None => [(1, 0), (0, 1)],
        Some(0) => [(1, 0), (0, 2)],
        Some(2) => [(0, 1), (-2, 0)],
        Some(_) => [(1, 1), (0, 2)],
    }
}

pub fn pairing(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

/// Continuous branch of y (or Y) along a convex loop around the roots `pair`, given all roots.
struct LoopBranch {
    m: C,
    d: C,
    others: Vec<(C, C)>, // (root, sqrt(m - root))
    lead: C,
}

impl LoopBranch {
    fn new(lead: C, roots: &[C], a: usize, b: usize) -> Self {
        let m = 0.5 * (roots[a] + roots[b]);
        let d = 0.5 * (roots[b] - roots[a]);
        let others = (0..roots.len()).filter(|&k| k != a && k != b).map(|k| (roots[k], (m - roots[k]).sqrt())).collect();
        LoopBranch { m, d, others, lead }
    }

    fn eval(&self, z: C) -> C {
        let w = z - self.m;
        let mut v = w * (1.0 - self.d * self.d / (w * w)).sqrt();
        for (r, s) in &self.others {
            v *= s * ((z - r) / (self.m - r)).sqrt();
        }
        v * self.lead.sqrt()
    }

    /// Counterclockwise hexagon around the segment at distance δ.
    fn contour(&self, roots: &[C], a: usize, b: usize) -> Vec<PathSegment> {
        let len = self.d.norm();
        let dir = self.d / len;
        let mut gap = len;
        for (k, r) in roots.iter().enumerate() {
            if k == a || k == b {
                continue;
            }
            // distance from r to the segment
            let w = (r - self.m) / dir;
            let along = w.re.clamp(-len, len);
            gap = gap.min((w - C::new(along, 0.0)).norm());
        }
        let delta = 0.3 * gap;
        let local = [
            C::new(len + delta, 0.0),
            C::new(len, delta),
            C::new(-len, delta),
            C::new(-len - delta, 0.0),
            C::new(-len, -delta),
            C::new(len, -delta),
        ];
        let pts: Vec<C> = local.iter().map(|w| self.m + dir * w).collect();
        crate::numerics::polygon(&pts)
    }
}

/// Plane in which quadrature runs: roots, leading coefficient and integrands in terms of (z, y).
struct QuadPlane {
    roots: Vec<C>,
    lead: C,
    family: Family,
    base: BasePoint,
}

impl QuadPlane {
    fn new(chart: &WeierstrassChart) -> Result<Self> {
        let base = chart.base;
        Ok(match base.family {
            Family::PII => {
                let roots: Vec<C> = branch_points(&base)?.into_iter().map(|p| p.x).collect();
                QuadPlane { roots, lead: C::new(1.0, 0.0), family: base.family, base }
            }
            _ => QuadPlane { roots: chart.ed.roots.to_vec(), lead: C::new(4.0, 0.0), family: base.family, base },
        })
    }

    // integrand numerator so that the form is num(z, y) dz, y the continued branch of the plane's curve
    fn integrand(&self, form: Form, z: C, y: C) -> C {
        let b = &self.base;
        match (self.family, form) {
            (Family::PIII3, Form::Omega) | (Family::PI, Form::Omega) => 1.0 / y,
            (Family::PIII3, Form::BetaFirst) => (z - b.h / 3.0) / y,
            (Family::PIII3, Form::Lambda) => {
                let s = z - b.h / 3.0;
                y / (2.0 * s * s)
            }
            (Family::PI, Form::BetaFirst) => z / y,
            (Family::PI, Form::Lambda) => 0.5 * y,
            (Family::PII, Form::Omega) => 1.0 / y,
            (Family::PII, Form::BetaFirst) => z * z / (2.0 * y),
            (Family::PII, Form::BetaAlpha) => -z / y,
            (Family::PII, Form::Lambda) => y,
            _ => C::new(f64::NAN, f64::NAN),
        }
    }

    fn loop_integral(&self, form: Form, a: usize, b: usize, tol: &Tolerances) -> Result<(C, Vec<PathSegment>)> {
        let br = LoopBranch::new(self.lead, &self.roots, a, b);
        let contour = br.contour(&self.roots, a, b);
        let v = quad_path(|z| self.integrand(form, z, br.eval(z)), &contour, tol)?;
        Ok((v, contour))
    }
}

/// Quadrature periods over a set of root-pair loops, identified with lattice coordinates via ω.
struct LoopBasis {
    loops: [(usize, usize); 2],
    coords: [(i64, i64); 2],
    contours: [Vec<PathSegment>; 2],
}

fn loop_basis(chart: &WeierstrassChart, plane: &QuadPlane, tol: &Tolerances) -> Result<LoopBasis> {
    let n = plane.roots.len();
    let mut found: Vec<((usize, usize), (i64, i64), Vec<PathSegment>)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let (w, contour) = plane.loop_integral(Form::Omega, a, b, tol)?;
            let (m, k, defect) = chart.ed.lattice_coefficients(w);
            if defect > 1e-6 {
                return Err(Error::NonConvergence(format!("loop period {w} is not a lattice vector (defect {defect:e})")));
            }
            found.push(((a, b), (m, k), contour));
        }
    }
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            if pairing(found[i].1, found[j].1).abs() == 1 {
                return Ok(LoopBasis {
                    loops: [found[i].0, found[j].0],
                    coords: [found[i].1, found[j].1],
                    contours: [found[i].2.clone(), found[j].2.clone()],
                });
            }
        }
    }
    Err(Error::SingularCurve("root-pair loops do not span the period lattice".into()))
}

// integer (a, b) with target = a·c1 + b·c2 when det(c1, c2) = ±1
fn integer_solve(target: (i64, i64), c1: (i64, i64), c2: (i64, i64)) -> (i64, i64) {
    let det = pairing(c1, c2);
    let a = (target.0 * c2.1 - target.1 * c2.0) / det;
    let b = (c1.0 * target.1 - c1.1 * target.0) / det;
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Elliptic,
    Quadrature,
}

/// Clockwise 16-gon of radius R around ∞₊ for PII (the + sheet has y ≈ x²).
fn infinity_loop(base: &BasePoint) -> Result<Vec<PathSegment>> {
    let rmax = branch_points(base)?.iter().fold(0.0f64, |m, p| m.max(p.x.norm()));
    let r = 10.0 * (rmax + 1.0);
    let pts: Vec<C> = (0..16).map(|k| C::from_polar(r, -2.0 * PI * k as f64 / 16.0)).collect();
    Ok(crate::numerics::polygon(&pts))
}

fn infinity_branch(base: &BasePoint, x: C) -> C {
    let (t, h, a) = (base.t, base.h, base.alpha);
    let w = 1.0 / x;
    x * x * (1.0 + t * w * w - 2.0 * a * w * w * w + 2.0 * h * w * w * w * w).sqrt()
}

pub fn cycle_basis(base: &BasePoint) -> Result<Vec<Cycle>> {
    let chart = reduce_to_weierstrass(base)?;
    let plane = QuadPlane::new(&chart)?;
    let lb = loop_basis(&chart, &plane, &Tolerances::default())?;
    let coords = cycle_coords(&chart);
    let mut out = Vec::new();
    for (label, target) in [(CycleLabel::Gamma1, coords[0]), (CycleLabel::Gamma2, coords[1])] {
        let (a, b) = integer_solve(target, lb.coords[0], lb.coords[1]);
        let mut rep = Vec::new();
        for (mult, contour) in [(a, &lb.contours[0]), (b, &lb.contours[1])] {
            let sheet: i8 = if mult >= 0 { 1 } else { -1 };
            for _ in 0..mult.unsigned_abs() {
                rep.extend(contour.iter().map(|s| SheetSegment { segment: *s, sheet }));
            }
        }
        out.push(Cycle { label, coords: target, representative: rep });
    }
    if base.family == Family::PII {
        let rep = infinity_loop(base)?.into_iter().map(|s| SheetSegment { segment: s, sheet: 1 }).collect();
        out.push(Cycle { label: CycleLabel::Gamma3, coords: (0, 0), representative: rep });
    }
    Ok(out)
}

/// Elliptic closed form of a period over a lattice class (m, n).
fn elliptic_period(chart: &WeierstrassChart, form: Form, coords: (i64, i64)) -> Result<C> {
    let b = &chart.base;
    let (m, n) = (coords.0 as f64, coords.1 as f64);
    let (w1, w2) = chart.ed.periods();
    let (e1, e2) = chart.ed.quasi_increments();
    let om = w1 * m + w2 * n;
    let zeta_incr = e1 * m + e2 * n; // ∮ ℘ du = −(ζ increment)
    let beta = |shift: C| -zeta_incr - shift * om;
    let omega = om;
    let first = match b.family {
        Family::PIII3 => beta(b.h / 3.0),
        Family::PII => beta(b.t / 12.0),
        Family::PI => beta(C::new(0.0, 0.0)),
    };
    match form {
        Form::Omega => Ok(omega),
        Form::BetaFirst => Ok(first),
        Form::Lambda => match b.family {
            Family::PIII3 => Ok(4.0 * first + 2.0 * b.h * omega),
            Family::PI => Ok(0.8 * b.t * first + 1.2 * b.h * omega),
            Family::PII if b.alpha.norm() == 0.0 => Ok(2.0 / 3.0 * b.t * first + 4.0 / 3.0 * b.h * omega),
            Family::PII => Err(Error::Config("elliptic lambda periods need alpha = 0; use quadrature".into())),
        },
        Form::BetaAlpha => Err(Error::Config("beta_alpha periods over gamma1/2 are computed by quadrature".into())),
        Form::Theta => Err(Error::Config("theta periods are handled by the joyce module".into())),
    }
}

/// Period of a differential over a cycle.
pub fn period(base: &BasePoint, form: Form, cycle: &Cycle, backend: Backend, tol: &Tolerances) -> Result<C> {
    let chart = reduce_to_weierstrass(base)?;
    if cycle.label == CycleLabel::Gamma3 {
        if base.family != Family::PII {
            return Err(Error::FamilyMismatch("gamma3 exists only for PII".into()));
        }
        return match (form, backend) {
            (Form::Lambda, Backend::Elliptic) => Ok(2.0 * PI * I * base.alpha),
            (Form::BetaAlpha, Backend::Elliptic) => Ok(2.0 * PI * I),
            (Form::Omega | Form::BetaFirst, Backend::Elliptic) => Ok(C::new(0.0, 0.0)),
            _ => {
                let plane = QuadPlane { roots: vec![], lead: C::new(1.0, 0.0), family: Family::PII, base: *base };
                let path = infinity_loop(base)?;
                quad_path(|x| plane.integrand(form, x, infinity_branch(base, x)), &path, tol)
            }
        };
    }
    match backend {
        Backend::Elliptic if !(base.family == Family::PII && base.alpha.norm() > 0.0 && form != Form::Omega) => {
            elliptic_period(&chart, form, cycle.coords)
        }
        _ => {
            let plane = QuadPlane::new(&chart)?;
            let lb = loop_basis(&chart, &plane, tol)?;
            let (a, b) = integer_solve(cycle.coords, lb.coords[0], lb.coords[1]);
            let p1 = plane.loop_integral(form, lb.loops[0].0, lb.loops[0].1, tol)?.0;
            let p2 = plane.loop_integral(form, lb.loops[1].0, lb.loops[1].1, tol)?.0;
            Ok(p1 * a as f64 + p2 * b as f64)
        }
    }
}

/// Periods of ω and β over (γ₁, γ₂), plus z-coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodData {
    pub omega: [C; 2],
    pub beta: [C; 2],
    pub z: [C; 3],
}

impl PeriodData {
    /// ω(γ₁)β(γ₂) − ω(γ₂)β(γ₁).
    pub fn bilinear(&self) -> C {
        self.omega[0] * self.beta[1] - self.omega[1] * self.beta[0]
    }
}

pub fn periods(base: &BasePoint, backend: Backend, tol: &Tolerances) -> Result<PeriodData> {
    let cycles = cycle_basis(base)?;
    let mut pd = PeriodData { omega: [C::new(0.0, 0.0); 2], beta: [C::new(0.0, 0.0); 2], z: [C::new(0.0, 0.0); 3] };
    for k in 0..2 {
        pd.omega[k] = period(base, Form::Omega, &cycles[k], backend, tol)?;
        pd.beta[k] = period(base, Form::BetaFirst, &cycles[k], backend, tol)?;
        pd.z[k] = period(base, Form::Lambda, &cycles[k], backend, tol)?;
    }
    if base.family == Family::PII {
        pd.z[2] = 2.0 * PI * I * base.alpha;
    }
    Ok(pd)
}

/// Elliptic-backend periods over the recorded basis, without building contour representatives.
pub fn elliptic_periods(base: &BasePoint) -> Result<PeriodData> {
    let chart = reduce_to_weierstrass(base)?;
    let coords = cycle_coords(&chart);
    periods_over(&chart, coords)
}

/// Elliptic periods over the lattice classes continuing those of `reference`: each class is the
/// lattice vector nearest to the reference ω-period. Used when a base point is moved slightly.
pub fn elliptic_periods_near(base: &BasePoint, reference: &PeriodData) -> Result<PeriodData> {
    let chart = reduce_to_weierstrass(base)?;
    let mut coords = [(0, 0); 2];
    for (k, c) in coords.iter_mut().enumerate() {
        let (m, n, _) = chart.ed.lattice_coefficients(reference.omega[k]);
        *c = (m, n);
    }
    periods_over(&chart, coords)
}

fn periods_over(chart: &WeierstrassChart, coords: [(i64, i64); 2]) -> Result<PeriodData> {
    let mut pd = PeriodData { omega: [C::new(0.0, 0.0); 2], beta: [C::new(0.0, 0.0); 2], z: [C::new(0.0, 0.0); 3] };
    for k in 0..2 {
        pd.omega[k] = elliptic_period(chart, Form::Omega, coords[k])?;
        pd.beta[k] = elliptic_period(chart, Form::BetaFirst, coords[k])?;
        pd.z[k] = elliptic_period(chart, Form::Lambda, coords[k])?;
    }
    pd.z[2] = 2.0 * PI * I * chart.base.alpha;
    Ok(pd)
}

pub fn bilinear_pairing(base: &BasePoint, backend: Backend, tol: &Tolerances) -> Result<C> {
    periods(base, backend, tol).map(|p| p.bilinear())
}

pub fn z_coords(base: &BasePoint) -> Result<[C; 3]> {
    periods(base, Backend::Elliptic, &Tolerances::default()).map(|p| p.z)
}
