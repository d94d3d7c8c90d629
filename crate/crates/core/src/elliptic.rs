//! Weierstrass elliptic functions for arbitrary complex invariants.

use crate::numerics::{poly_roots, C, I};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const SERIES_TERMS: usize = 16;

/// Period data of the curve Y² = 4X³ − g₂X − g₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticData {
    pub g2: C,
    pub g3: C,
    pub half_period_1: C,
    pub half_period_2: C,
    pub eta_1: C,
    pub eta_2: C,
    /// Roots sorted by descending real part, ties by descending imaginary part.
    /// ℘(ω₁) = e₁, ℘(ω₂) = e₃, ℘(ω₁+ω₂) = e₂.
    pub roots: [C; 3],
    /// Gauss-reduced full-period basis used for cell reduction.
    reduced: [C; 2],
    /// ζ(u + W) − ζ(u) for the reduced basis vectors.
    reduced_incr: [C; 2],
    coeffs: [C; SERIES_TERMS + 2],
}

fn laurent_coeffs(g2: C, g3: C) -> [C; SERIES_TERMS + 2] {
    let mut c = [C::new(0.0, 0.0); SERIES_TERMS + 2];
    c[2] = g2 / 20.0;
    c[3] = g3 / 28.0;
    for k in 4..SERIES_TERMS + 2 {
        let mut s = C::new(0.0, 0.0);
        for m in 2..=k - 2 {
            s += c[m] * c[k - m];
        }
        c[k] = s * (3.0 / ((2 * k + 1) as f64 * (k as f64 - 3.0)));
    }
    c
}

/// Roots of 4x³ − g₂x − g₃ in the documented order.
pub fn cubic_roots(g2: C, g3: C) -> Result<[C; 3]> {
    let disc = g2 * g2 * g2 - 27.0 * g3 * g3;
    let scale = g2.norm().powi(3) + 27.0 * g3.norm_sqr();
    if scale == 0.0 || disc.norm() <= 1e-10 * scale {
        return Err(Error::SingularCurve(format!("g2^3 - 27 g3^2 = {disc} at g2 = {g2}, g3 = {g3}")));
    }
    let r = poly_roots(&[-g3, -g2, C::new(0.0, 0.0), C::new(4.0, 0.0)])?;
    let mut e = [r[0], r[1], r[2]];
    let tie = 1e-12 * scale.powf(1.0 / 6.0).max(1e-300);
    e.sort_by(|a, b| {
        if (a.re - b.re).abs() > tie {
            b.re.total_cmp(&a.re)
        } else {
            b.im.total_cmp(&a.im)
        }
    });
    Ok(e)
}

/// Arithmetic-geometric mean with the optimal branch at every step.
pub fn agm(mut a: C, mut b: C) -> C {
    for _ in 0..100 {
        if (a - b).norm() <= 1e-16 * a.norm() {
            break;
        }
        let an = 0.5 * (a + b);
        let mut bn = (a * b).sqrt();
        if (an - bn).norm() > (an + bn).norm() {
            bn = -bn;
        }
        a = an;
        b = bn;
    }
    a
}

/// Carlson's symmetric integral R_F for complex arguments off the negative real axis.
pub fn carlson_rf(mut x: C, mut y: C, mut z: C) -> C {
    const ERRTOL: f64 = 1e-3;
    for _ in 0..200 {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * sy + sx * sz + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        let ave = (x + y + z) / 3.0;
        let (dx, dy, dz) = ((ave - x) / ave, (ave - y) / ave, (ave - z) / ave);
        if dx.norm().max(dy.norm()).max(dz.norm()) < ERRTOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - e3 * (3.0 / 44.0)) * e2 + e3 / 14.0) / ave.sqrt();
        }
    }
    C::new(f64::NAN, f64::NAN)
}

/// Real coordinates (a, b) with u = a·w1 + b·w2.
fn lattice_coords(u: C, w1: C, w2: C) -> (f64, f64) {
    let det = w1.re * w2.im - w1.im * w2.re;
    let a = (u.re * w2.im - u.im * w2.re) / det;
    let b = (w1.re * u.im - w1.im * u.re) / det;
    (a, b)
}

fn gauss_reduce(mut a: C, mut b: C) -> (C, C) {
    if a.norm() > b.norm() {
        std::mem::swap(&mut a, &mut b);
    }
    for _ in 0..200 {
        let m = (b / a).re.round();
        b -= a * m;
        if b.norm() >= a.norm() {
            break;
        }
        std::mem::swap(&mut a, &mut b);
    }
    if (b / a).im < 0.0 {
        b = -b;
    }
    (a, b)
}

// series for (℘, ℘′, ζ) at small u
fn series(c: &[C; SERIES_TERMS + 2], u: C) -> (C, C, C) {
    let u2 = u * u;
    let mut p = 1.0 / u2;
    let mut dp = -2.0 / (u2 * u);
    let mut z = 1.0 / u;
    let mut pw = C::new(1.0, 0.0); // u^{2k-4}
    for k in 2..SERIES_TERMS + 2 {
        let kf = k as f64;
        let term = c[k] * pw; // c_k u^{2k-4}
        p += term * u2;
        dp += term * u * (2.0 * kf - 2.0);
        z -= term * u2 * u / (2.0 * kf - 1.0);
        pw *= u2;
    }
    (p, dp, z)
}

impl EllipticData {
    pub fn new(g2: C, g3: C) -> Result<Self> {
        let roots = cubic_roots(g2, g3)?;
        let coeffs = laurent_coeffs(g2, g3);
        let mut cands = Vec::new();
        for j in 0..3 {
            let (k, l) = ((j + 1) % 3, (j + 2) % 3);
            for (x, y) in [(k, l), (l, k)] {
                let m = agm((roots[j] - roots[x]).sqrt(), (roots[j] - roots[y]).sqrt());
                cands.push(PI / m);
            }
        }
        // pick the shortest candidate, then the shortest one independent of it
        cands.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let w1 = cands[0];
        let w2 = *cands
            .iter()
            .filter(|w| (*w / w1).im.abs() > 1e-6)
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
            .ok_or_else(|| Error::SingularCurve("period candidates are collinear".into()))?;
        let (mut w1, mut w2) = gauss_reduce(w1, w2);
        let mut data = EllipticData {
            g2,
            g3,
            half_period_1: C::new(0.0, 0.0),
            half_period_2: C::new(0.0, 0.0),
            eta_1: C::new(0.0, 0.0),
            eta_2: C::new(0.0, 0.0),
            roots,
            reduced: [w1, w2],
            reduced_incr: [C::new(0.0, 0.0); 2],
            coeffs,
        };
        // guard against a sublattice: a basis vector whose half is itself a period
        let mut assign = None;
        for _ in 0..8 {
            data.reduced = [w1, w2];
            let halves = [0.5 * w1, 0.5 * w2, 0.5 * (w1 + w2)];
            let vals: Vec<C> = halves.iter().map(|&h| data.raw_eval(h).0).collect();
            let big = roots.iter().fold(0.0f64, |m, e| m.max(e.norm())).max(1e-300);
            if let Some(k) = (0..3).find(|&k| vals[k].norm() > 1e6 * big || !vals[k].re.is_finite()) {
                match k {
                    0 => w1 *= 0.5,
                    1 => w2 *= 0.5,
                    _ => w2 = 0.5 * (w1 + w2),
                }
                let r = gauss_reduce(w1, w2);
                w1 = r.0;
                w2 = r.1;
                continue;
            }
            let matched: Vec<usize> = vals
                .iter()
                .map(|v| (0..3).min_by(|&a, &b| (v - roots[a]).norm().total_cmp(&(v - roots[b]).norm())).unwrap())
                .collect();
            assign = Some((halves, matched));
            break;
        }
        let (halves, matched) = assign.ok_or_else(|| Error::SingularCurve("could not find a period basis".into()))?;
        if matched[0] == matched[1] || matched[1] == matched[2] || matched[0] == matched[2] {
            return Err(Error::SingularCurve("half-period values do not separate the roots".into()));
        }
        data.reduced_incr = [2.0 * data.raw_eval(0.5 * w1).2, 2.0 * data.raw_eval(0.5 * w2).2];
        let pos = |root: usize| matched.iter().position(|&m| m == root).unwrap();
        // lattice coefficients (in units of the reduced basis) of each half-period class
        let coef = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let (a1, b1) = coef[pos(0)];
        let (mut a2, mut b2) = coef[pos(2)];
        let om1 = halves[pos(0)];
        let mut om2 = halves[pos(2)];
        if (om2 / om1).im < 0.0 {
            om2 = -om2;
            a2 = -a2;
            b2 = -b2;
        }
        data.half_period_1 = om1;
        data.half_period_2 = om2;
        data.eta_1 = 0.5 * (data.reduced_incr[0] * a1 + data.reduced_incr[1] * b1);
        data.eta_2 = (data.eta_1 * om2 - 0.5 * PI * I) / om1;
        let _ = (a2, b2);
        Ok(data)
    }

    pub fn discriminant(&self) -> C {
        self.g2 * self.g2 * self.g2 - 27.0 * self.g3 * self.g3
    }

    /// Full periods (2ω₁, 2ω₂).
    pub fn periods(&self) -> (C, C) {
        (2.0 * self.half_period_1, 2.0 * self.half_period_2)
    }

    /// ζ(u + 2ω) − ζ(u) for the full periods (2ω₁, 2ω₂), i.e. (2η₁, 2η₂).
    pub fn quasi_increments(&self) -> (C, C) {
        (2.0 * self.eta_1, 2.0 * self.eta_2)
    }

    fn doublings(&self, u: C) -> i32 {
        let limit = 0.25 * self.reduced[0].norm();
        let mut k = 0;
        let mut r = u.norm();
        while r > limit {
            r *= 0.5;
            k += 1;
        }
        k
    }

    /// Series plus duplication, no lattice reduction.
    fn raw_eval(&self, u: C) -> (C, C, C) {
        self.raw_eval_k(u, self.doublings(u))
    }

    fn raw_eval_k(&self, u: C, k: i32) -> (C, C, C) {
        let (mut x, mut y, mut z) = series(&self.coeffs, u / 2f64.powi(k));
        for _ in 0..k {
            let lam = (12.0 * x * x - self.g2) / (2.0 * y);
            let x2 = 0.25 * lam * lam - 2.0 * x;
            let y2 = -lam * (x2 - x) - y;
            z = 2.0 * z + 0.5 * lam;
            x = x2;
            y = y2;
        }
        (x, y, z)
    }

    /// Write u = v + m·W₁ + n·W₂ with v in the reduced cell; returns (v, m, n) over the reduced basis.
    fn reduce(&self, u: C) -> (C, f64, f64) {
        let [w1, w2] = self.reduced;
        let (a, b) = lattice_coords(u, w1, w2);
        let (m, n) = (a.round(), b.round());
        (u - w1 * m - w2 * n, m, n)
    }

    /// Express a lattice vector in the (2ω₁, 2ω₂) basis, returning rounded integers and the rounding defect.
    pub fn lattice_coefficients(&self, w: C) -> (i64, i64, f64) {
        let (a, b) = lattice_coords(w, 2.0 * self.half_period_1, 2.0 * self.half_period_2);
        let (m, n) = (a.round(), b.round());
        (m as i64, n as i64, (a - m).abs().max((b - n).abs()))
    }

    /// Nearest lattice point to u.
    pub fn nearest_lattice_point(&self, u: C) -> C {
        let (v, _, _) = self.reduce(u);
        let mut best = u - v;
        let [w1, w2] = self.reduced;
        for dm in -1..=1 {
            for dn in -1..=1 {
                let cand = u - v + w1 * dm as f64 + w2 * dn as f64;
                if (u - cand).norm() < (u - best).norm() {
                    best = cand;
                }
            }
        }
        best
    }

    /// (℘(u), ℘′(u), ζ(u)).
    pub fn eval(&self, u: C) -> Result<(C, C, C)> {
        let lp = self.nearest_lattice_point(u);
        let v = u - lp;
        if v.norm() < 1e-9 {
            return Err(Error::LatticePoint);
        }
        let (a, b) = lattice_coords(lp, self.reduced[0], self.reduced[1]);
        let (x, y, z) = self.raw_eval(v);
        Ok((x, y, z + self.reduced_incr[0] * a.round() + self.reduced_incr[1] * b.round()))
    }

    /// (℘, ℘′, ζ) at u with the lattice translate and the duplication depth taken from `near`.
    /// Smooth in u for u close to `near`, which keeps finite differences free of jumps.
    pub fn eval_near(&self, u: C, near: C) -> Result<(C, C, C)> {
        let lp = self.nearest_lattice_point(near);
        let v = u - lp;
        if v.norm() < 1e-9 {
            return Err(Error::LatticePoint);
        }
        let (a, b) = lattice_coords(lp, self.reduced[0], self.reduced[1]);
        let (x, y, z) = self.raw_eval_k(v, self.doublings(near - lp));
        Ok((x, y, z + self.reduced_incr[0] * a.round() + self.reduced_incr[1] * b.round()))
    }

    pub fn wp(&self, u: C) -> Result<C> {
        self.eval(u).map(|e| e.0)
    }

    pub fn zeta(&self, u: C) -> Result<C> {
        self.eval(u).map(|e| e.2)
    }

    pub fn curve_residual(&self, x: C, y: C) -> C {
        y * y - (4.0 * x * x * x - self.g2 * x - self.g3)
    }

    /// u in the reduced cell with ℘(u) = X and ℘′(u) = Y.
    pub fn abel_map(&self, x: C, y: C) -> Result<C> {
        let res = self.curve_residual(x, y);
        let scale = 1.0 + y.norm_sqr() + 4.0 * x.norm().powi(3);
        if res.norm() > 1e-8 * scale {
            return Err(Error::OffCurve(res.norm()));
        }
        let args = |d: C| [(x - self.roots[0]) / d, (x - self.roots[1]) / d, (x - self.roots[2]) / d];
        let mut best = (C::new(1.0, 0.0), -1.0);
        for k in 0..8 {
            let d = C::from_polar(1.0, PI * k as f64 / 4.0);
            let margin = args(d).iter().fold(f64::INFINITY, |m, a| {
                let r = a.norm();
                if r == 0.0 {
                    m
                } else {
                    m.min(PI - a.arg().abs())
                }
            });
            if margin > best.1 {
                best = (d, margin);
            }
        }
        let d = best.0;
        let [a0, a1, a2] = args(d);
        let mut u = carlson_rf(a0, a1, a2) / d.sqrt();
        let (p, dp, _) = self.eval_any(u);
        if (dp + y).norm() < (dp - y).norm() {
            u = -u;
        }
        let _ = p;
        for _ in 0..4 {
            let (p, dp, _) = self.eval_any(u);
            if dp.norm() < 1e-6 * (1.0 + p.norm()) {
                break;
            }
            let step = (p - x) / dp;
            u -= step;
            if step.norm() < 1e-15 * (1.0 + u.norm()) {
                break;
            }
        }
        Ok(self.reduce(u).0)
    }

    /// Abel image chosen as the lattice translate nearest to `near`.
    pub fn abel_map_near(&self, x: C, y: C, near: C) -> Result<C> {
        let u = self.abel_map(x, y)?;
        Ok(u + self.nearest_lattice_point(near - u))
    }

    fn eval_any(&self, u: C) -> (C, C, C) {
        self.eval(u).unwrap_or((C::new(f64::INFINITY, 0.0), C::new(f64::INFINITY, 0.0), C::new(f64::INFINITY, 0.0)))
    }
}

pub fn half_periods(g2: C, g3: C) -> Result<(C, C, C, C)> {
    let e = EllipticData::new(g2, g3)?;
    Ok((e.half_period_1, e.half_period_2, e.eta_1, e.eta_2))
}

pub fn weierstrass_eval(u: C, ed: &EllipticData) -> Result<(C, C, C)> {
    ed.eval(u)
}

pub fn abel_map(x: C, y: C, ed: &EllipticData) -> Result<C> {
    ed.abel_map(x, y)
}
