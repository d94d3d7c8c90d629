use super::chart::FiberChart;
use crate::isomonodromy::{flow_vector, FiberPoint, FlowId, Normalization, StateIdx};
use crate::numerics::{fd_directional_levels, C};
use crate::spectral::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A vertical vector field ∂/∂θ written on (q, r, s) at fixed base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalField {
    pub name: &'static str,
    pub dq: C,
    pub dr: C,
    pub ds: C,
}

impl VerticalField {
    /// Direction in chart coordinates (t, H, q, r, s).
    pub fn chart_direction(&self) -> [C; 5] {
        let z = C::new(0.0, 0.0);
        [z, z, self.dq, self.dr, self.ds]
    }
}

/// Coordinate fields ∂/∂θ_first, ∂/∂θ_H (and ∂/∂θ_α for PII) at fp.
pub fn vertical_fields(fp: &FiberPoint) -> Result<Vec<VerticalField>> {
    let (t, a, q, p, r, s) = (fp.base.t, fp.base.alpha, fp.q, fp.p, fp.r, fp.s);
    if p.norm() < 1e-14 {
        return Err(Error::SheetSingular(format!("p = 0 at q = {q}")));
    }
    let z = C::new(0.0, 0.0);
    let vf = |name, dq, dr, ds| VerticalField { name, dq, dr, ds };
    Ok(match fp.family() {
        Family::PIII3 => vec![
            vf("theta_s", 2.0 * q * q * p, (2.0 * r - 2.0 * t * r * q * q - t * q * q) / (2.0 * p * q * q), z),
            vf("theta_h", z, -1.0 / (2.0 * q * p), z),
        ],
        Family::PII => {
            let f = 2.0 * q * q * q + t * q - a;
            vec![
                vf("theta_t", p, -(r * f / p + s + q * q / (2.0 * p)), z),
                vf("theta_h", z, -1.0 / p, z),
                vf("theta_alpha", z, q / p, C::new(-1.0, 0.0)),
            ]
        }
        Family::PI => vec![
            vf("theta_t", 2.0 * p, -(q + 2.0 * r * (3.0 * q * q + t)) / (2.0 * p), z),
            vf("theta_h", z, -1.0 / (2.0 * p), z),
        ],
    })
}

/// Third derivatives of the Joyce function K along the vertical directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KThird {
    /// (K_fff, K_ffH, K_fHH, K_HHH) with f the first base coordinate.
    pub values: [C; 4],
    /// PII only: (K_αHH, K_αHt, K_αtt, K_ααH, K_ααt).
    pub alpha: Option<[C; 5]>,
}

pub fn k_third_derivatives(fp: &FiberPoint) -> Result<KThird> {
    let (t, h, a, q, p, r, s) = (fp.base.t, fp.base.h, fp.base.alpha, fp.q, fp.p, fp.r, fp.s);
    let z = C::new(0.0, 0.0);
    if p.norm() < 1e-14 {
        return Err(Error::SheetSingular(format!("p = 0 at q = {q}")));
    }
    let p2 = p * p;
    match fp.family() {
        Family::PIII3 => {
            let q2 = q * q;
            let fff = -1.5 * t * t / p2
                + q * t
                + 2.0 * r * t / (p2 * q2) * (3.0 - 3.0 * t * q2 + 2.0 * p2 * q2 * q)
                + 2.0 * r * r / (p2 * q2 * q2) * (-1.0 + 2.0 * h * q + 10.0 * t * q2 + 2.0 * h * t * q2 * q - t * t * q2 * q2);
            let ffh = -t / (p2 * q) + 2.0 * r / (p2 * q2 * q) * (1.0 - t * q2);
            let fhh = -1.0 / (2.0 * q2 * p2);
            Ok(KThird { values: [fff, ffh, fhh, z], alpha: None })
        }
        Family::PII => {
            let f = 2.0 * q * q * q + t * q - a;
            let q2 = q * q;
            let ttt = -0.75 * q2 * q2 / p2 + r * (2.0 * q - 3.0 * q2 * f / p2) + r * r * (6.0 * q2 + t - 3.0 * f * f / p2)
                - 1.5 * s * q2 / p
                - 3.0 * s * r * f / p
                - s * s;
            let tth = -2.0 * r * f / p2 - q2 / p2 - s / p;
            let thh = -1.0 / p2;
            let alpha = [z, q / p2, q2 * q / p2 - r + s * q / p + 2.0 * r * q * f / p2, z, -q2 / p2];
            Ok(KThird { values: [ttt, tth, thh, z], alpha: Some(alpha) })
        }
        Family::PI => Err(Error::FamilyMismatch("closed-form K derivatives are available for PIII3 and PII".into())),
    }
}

/// ε⁰ part of the base lifts of the first-coordinate and H flows, in chart coordinates.
fn base_lifts(fp: &FiberPoint) -> Result<[[C; 5]; 2]> {
    let y = fp.to_state();
    let zero = C::new(0.0, 0.0);
    let pick = |v: [C; StateIdx::LEN]| [v[StateIdx::T], v[StateIdx::H], v[StateIdx::Q], v[StateIdx::R], v[StateIdx::S]];
    let w1 = flow_vector(fp.family(), FlowId::W1, Normalization::Conserving, &y, zero)?;
    let w2 = flow_vector(fp.family(), FlowId::W2, Normalization::Conserving, &y, zero)?;
    Ok([pick(w1), pick(w2)])
}

/// (K_ff, K_fH, K_HH) and the mismatch of the two K_fH estimates, from the derivative of the
/// θ-map along the ε-independent parts of the flows: these move θ by (K_fH, −K_ff) and (K_HH, −K_fH).
fn k_second_in_chart(chart: &FiberChart, y: &[C], h: f64, levels: usize) -> Result<([C; 3], f64)> {
    let fp = chart.fiber(y);
    let lifts = base_lifts(&fp)?;
    let d1 = fd_directional_levels(|x| chart.theta(x).map(|t| t.to_vec()), y, &lifts[0], h, levels)?;
    let d2 = fd_directional_levels(|x| chart.theta(x).map(|t| t.to_vec()), y, &lifts[1], h, levels)?;
    let kfh = 0.5 * (d1[0] - d2[1]);
    Ok(([-d1[1], kfh, d2[0]], (d1[0] + d2[1]).norm()))
}

/// Finite-difference second derivatives of K at fp: (K_ff, K_fH, K_HH) and a consistency defect.
pub fn k_second_derivatives_fd(fp: &FiberPoint, h: f64) -> Result<([C; 3], f64)> {
    let chart = FiberChart::new(fp)?;
    k_second_in_chart(&chart, &FiberChart::coords(fp), h, 1)
}

/// Finite-difference third derivatives: vertical derivatives of the second derivatives, two
/// Richardson levels on each layer. The two estimates of each mixed derivative are averaged;
/// their largest difference is returned too. Steps of a few 1e-2 balance truncation against the
/// ~1e-12 noise of θ under base moves.
pub fn k_third_derivatives_fd(fp: &FiberPoint, h_outer: f64, h_inner: f64) -> Result<([C; 4], f64)> {
    k_third_derivatives_fd_levels(fp, h_outer, h_inner, 2)
}

/// [`k_third_derivatives_fd`] with `levels` Richardson extrapolations on both difference layers.
pub fn k_third_derivatives_fd_levels(fp: &FiberPoint, h_outer: f64, h_inner: f64, levels: usize) -> Result<([C; 4], f64)> {
    let chart = FiberChart::new(fp)?;
    let y = FiberChart::coords(fp);
    let fields = vertical_fields(fp)?;
    let second = |x: &[C]| k_second_in_chart(&chart, x, h_inner, levels).map(|(k, _)| k.to_vec());
    let df = fd_directional_levels(second, &y, &fields[0].chart_direction(), h_outer, levels)?;
    let dh = fd_directional_levels(second, &y, &fields[1].chart_direction(), h_outer, levels)?;
    let sym = (df[1] - dh[0]).norm().max((df[2] - dh[1]).norm());
    Ok(([df[0], 0.5 * (df[1] + dh[0]), 0.5 * (df[2] + dh[1]), dh[2]], sym))
}

/// Step pairs tried by [`k_third_derivatives_fd_ladder`], coarsest first.
pub const K_FD_LADDER: [(f64, f64); 4] = [(3e-2, 2e-2), (2e-2, 1e-2), (1e-2, 5e-3), (5e-3, 3e-3)];

/// [`k_third_derivatives_fd`] over [`K_FD_LADDER`]. Near ramification points the θ-map curves
/// sharply and the coarse steps stop resolving it, so the result is the finer estimate of the
/// consecutive pair that agrees best; that disagreement is returned as an error estimate.
pub fn k_third_derivatives_fd_ladder(fp: &FiberPoint) -> Result<([C; 4], f64)> {
    let mut prev: Option<[C; 4]> = None;
    let mut best: Option<([C; 4], f64)> = None;
    for (ho, hi) in K_FD_LADDER {
        let (k, _) = k_third_derivatives_fd(fp, ho, hi)?;
        if let Some(p) = prev {
            let d = k.iter().zip(&p).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            if best.is_none_or(|(_, e)| d < e) {
                best = Some((k, d));
            }
        }
        prev = Some(k);
    }
    Ok(best.expect("ladder has at least two rungs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, re};
    use crate::spectral::BasePoint;

    fn rel(a: &[C], b: &[C]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).norm())) / scale
    }

    #[test]
    fn piii3_fd_matches_closed_form() {
        let b = BasePoint::new(Family::PIII3, c(1.0, 0.2), c(3.0, -0.1));
        let fp = FiberPoint::on_sheet(b, c(0.8, 0.1), 1.0, c(0.3, 0.05));
        let exact = k_third_derivatives(&fp).unwrap().values;
        let (fd, sym) = k_third_derivatives_fd(&fp, 3e-2, 2e-2).unwrap();
        assert!(rel(&fd, &exact) < 1e-6, "{fd:?} vs {exact:?}");
        assert!(sym < 1e-6);
    }

    #[test]
    fn pii_fd_matches_closed_form() {
        let b = BasePoint::new(Family::PII, c(1.0, 0.1), c(1.0, 0.2));
        let fp = FiberPoint::on_sheet(b, c(0.7, -0.2), 1.0, re(0.4));
        let exact = k_third_derivatives(&fp).unwrap().values;
        let (fd, _) = k_third_derivatives_fd(&fp, 3e-2, 2e-2).unwrap();
        assert!(rel(&fd, &exact) < 1e-6, "{fd:?} vs {exact:?}");
    }

    #[test]
    fn ladder_resolves_points_near_ramification() {
        let b = BasePoint::new(Family::PII, c(-0.737, -0.289), c(0.003, 0.440));
        let fp = FiberPoint::on_sheet(b, c(-0.475, -0.733), 1.0, c(0.288, -0.066));
        let exact = k_third_derivatives(&fp).unwrap().values;
        let (fd, est) = k_third_derivatives_fd_ladder(&fp).unwrap();
        assert!(rel(&fd, &exact) < 1e-6, "{fd:?} vs {exact:?}");
        assert!(est < 1e-3);
    }
}
