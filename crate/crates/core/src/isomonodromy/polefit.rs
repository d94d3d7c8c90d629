use super::flows::Normalization;
use super::trajectory::{Detour, Trajectory, CHART_POLE};
use crate::numerics::{least_squares, poly_eval, C};
use crate::spectral::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Parameters left free by the local expansion at a pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleParams {
    pub q0: C,
    /// Slope of r at the pole (PIII₃).
    pub rho: Option<C>,
    /// Quadratic coefficient of r (PII).
    pub c: Option<C>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleFit {
    pub t0: C,
    pub order: i32,
    /// Winding-number estimate of the order before rounding.
    pub order_estimate: f64,
    pub leading: C,
    pub subleading: PoleParams,
    pub h0: C,
    pub residual: f64,
}

const FIT_DEGREE: usize = 12;
const MAX_RESIDUAL: f64 = 1e-5;

/// Continuous branch of arg along a sequence.
pub fn unwrapped_args(vals: &[C]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vals.len());
    let mut prev = 0.0;
    for (i, v) in vals.iter().enumerate() {
        let mut a = v.arg();
        if i > 0 {
            let tau = 2.0 * std::f64::consts::PI;
            a += ((prev - a) / tau).round() * tau;
        }
        out.push(a);
        prev = a;
    }
    out
}

/// Least-squares polynomial in x = (t − centre)/scale; returns ascending coefficients in x and
/// the maximum residual relative to max |y|.
pub fn scaled_poly_fit(ts: &[C], ys: &[C], centre: C, scale: f64, degree: usize) -> Result<(Vec<C>, f64)> {
    let degree = degree.min(ts.len().saturating_sub(2));
    let xs: Vec<C> = ts.iter().map(|t| (t - centre) / scale).collect();
    let rows: Vec<Vec<C>> = xs.iter().map(|x| (0..=degree).map(|m| x.powu(m as u32)).collect()).collect();
    let coef = least_squares(&rows, ys).ok_or(Error::JacobianSingular)?;
    let ymax = ys.iter().fold(0.0f64, |m, y| m.max(y.norm())).max(1e-300);
    let res = xs.iter().zip(ys).fold(0.0f64, |m, (x, y)| m.max((poly_eval(&coef, *x) - y).norm())) / ymax;
    Ok((coef, res))
}

fn newton_root(coef: &[C], mut x: C) -> Result<C> {
    let deriv: Vec<C> = coef.iter().enumerate().skip(1).map(|(m, a)| a * m as f64).collect();
    for _ in 0..50 {
        let d = poly_eval(&deriv, x);
        if d.norm() == 0.0 {
            return Err(Error::NoConvergence("zero derivative in pole location".into()));
        }
        let step = poly_eval(coef, x) / d;
        x -= step;
        if step.norm() < 1e-15 * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence("pole location".into()))
}

/// Fit the local expansion at the first pole of q met by the trajectory.
pub fn pole_fit(traj: &Trajectory) -> Result<PoleFit> {
    let d = traj.detours.iter().find(|d| d.chart == CHART_POLE).ok_or(Error::NoPoleInSpan)?;
    pole_fit_at(traj, d)
}

/// Fits for every pole detour of the trajectory.
pub fn pole_fits(traj: &Trajectory) -> Vec<Result<PoleFit>> {
    traj.detours.iter().filter(|d| d.chart == CHART_POLE).map(|d| pole_fit_at(traj, d)).collect()
}

pub fn pole_fit_at(traj: &Trajectory, d: &Detour) -> Result<PoleFit> {
    let win = &traj.samples[d.first..=d.last];
    let ts: Vec<C> = win.iter().map(|s| s.param).collect();
    let qs: Vec<C> = win.iter().map(|s| s.point.q).collect();
    let arg_q = unwrapped_args(&qs);
    let rel: Vec<C> = ts.iter().map(|t| t - d.center).collect();
    let arg_t = unwrapped_args(&rel);
    let order_estimate = -(arg_q[arg_q.len() - 1] - arg_q[0]) / (arg_t[arg_t.len() - 1] - arg_t[0]);
    let k = order_estimate.round();
    if !(k == 1.0 || k == 2.0) || (order_estimate - k).abs() > 0.25 {
        return Err(Error::FitRejected((order_estimate - k).abs()));
    }
    let order = k as i32;
    // q^(-1/k) is analytic with a simple zero at the pole
    let mut gs: Vec<C> = Vec::with_capacity(qs.len());
    for q in &qs {
        let mut g = if order == 1 { 1.0 / q } else { 1.0 / q.sqrt() };
        if let Some(prev) = gs.last() {
            if (g + prev).norm() < (g - prev).norm() {
                g = -g;
            }
        }
        gs.push(g);
    }
    let scale = d.radius;
    let (gc, _) = scaled_poly_fit(&ts, &gs, d.center, scale, FIT_DEGREE)?;
    let t0 = d.center + scale * newton_root(&gc, C::new(0.0, 0.0))?;

    let ys: Vec<C> = ts.iter().zip(&qs).map(|(t, q)| q * (t - t0).powi(order)).collect();
    let (qc, residual) = scaled_poly_fit(&ts, &ys, t0, scale, FIT_DEGREE)?;
    if residual > MAX_RESIDUAL {
        return Err(Error::FitRejected(residual));
    }
    let coeff = |cs: &[C], m: usize| cs.get(m).copied().unwrap_or_default() / scale.powi(m as i32);
    let leading = coeff(&qc, 0);
    let rs: Vec<C> = win.iter().map(|s| s.point.r).collect();
    let (rc, _) = scaled_poly_fit(&ts, &rs, t0, scale, FIT_DEGREE)?;
    let hs: Vec<C> = win.iter().map(|s| s.point.base.h * (s.param - t0)).collect();
    let (hc, _) = scaled_poly_fit(&ts, &hs, t0, scale, FIT_DEGREE)?;
    let h_regular = coeff(&hc, 1);
    let eps = traj.epsilon;
    let (subleading, h0) = match traj.family {
        Family::PIII3 => {
            let rho = coeff(&rc, 1);
            // the conserved H differs from the pole's base value by 2ε²t₀ρ
            let shift = if traj.normalization == Normalization::Conserving { 2.0 * eps * eps * t0 * rho } else { C::new(0.0, 0.0) };
            (PoleParams { q0: coeff(&qc, 2), rho: Some(rho), c: None }, h_regular - shift)
        }
        Family::PII => (PoleParams { q0: coeff(&qc, 4), rho: None, c: Some(coeff(&rc, 2)) }, h_regular),
        Family::PI => (PoleParams { q0: coeff(&qc, 4), rho: None, c: None }, h_regular),
    };
    Ok(PoleFit { t0, order, order_estimate, leading, subleading, h0, residual })
}
