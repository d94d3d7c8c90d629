use crate::isomonodromy::{
    flow_vector, integrate_flow, pole_fit_at, scaled_poly_fit, Detour, FiberPoint, FlowControls, FlowId, Normalization,
    StateIdx, Trajectory, CHART_POLE,
};
use crate::numerics::{least_squares, poly_eval, C};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSample {
    pub t: C,
    pub h: C,
    pub log_tau: C,
    pub chart: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRun {
    pub trajectory: Trajectory,
    pub samples: Vec<TauSample>,
}

impl TauRun {
    /// CSV with columns t_re, t_im, h_re, h_im, log_tau_re, log_tau_im, chart.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
        wr.write_record(["t_re", "t_im", "h_re", "h_im", "log_tau_re", "log_tau_im", "chart"]).map_err(io)?;
        for s in &self.samples {
            let row = [s.t.re, s.t.im, s.h.re, s.h.im, s.log_tau.re, s.log_tau.im].map(crate::numerics::fmt17);
            let mut rec: Vec<String> = row.to_vec();
            rec.push(s.chart.to_string());
            wr.write_record(&rec).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Config(format!("csv: {e}")))
    }
}

/// Integrate log τ = ∫ H (d s for PIII₃, d t otherwise) along the Painlevé flow from a point of the
/// r = 0 Lagrangian with ε = 1 and s = 0.
pub fn tau_along_flow(start: &FiberPoint, span: &[C], controls: &FlowControls) -> Result<TauRun> {
    if start.r.norm() > 1e-12 || start.s.norm() > 1e-12 {
        return Err(Error::OffLagrangian);
    }
    if (start.epsilon - 1.0).norm() > 1e-14 {
        return Err(Error::Config("tau runs use epsilon = 1".into()));
    }
    let trajectory = integrate_flow(start, FlowId::W1, Normalization::Painleve, span, controls)?;
    let samples = trajectory
        .samples
        .iter()
        .map(|s| TauSample { t: s.param, h: s.point.base.h, log_tau: s.log_tau, chart: s.chart })
        .collect();
    Ok(TauRun { trajectory, samples })
}

/// d log τ / dt at a trajectory point: H divided by the rate of t in the flow's own time.
pub fn dlogtau_dt(fp: &FiberPoint) -> Result<C> {
    let v = flow_vector(fp.family(), FlowId::W1, Normalization::Painleve, &fp.to_state(), 1.0 / fp.epsilon)?;
    Ok(fp.base.h / v[StateIdx::T])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauZeroMatch {
    /// Singularity of q located from the q samples.
    pub pole: C,
    /// Zero of τ located from the log τ samples.
    pub zero: C,
    pub gap: f64,
    /// Fitted vanishing order of τ at the zero.
    pub order: C,
    pub chart: u8,
}

const FIT_DEGREE: usize = 10;

/// Zero z and order m of τ on a detour arc, from f = d log τ/dt ≈ m/(t − z) + analytic:
/// f·t = z·f + Σ g_j (t − c)^j is linear in (z, g), and m = g(z).
fn tau_zero_on_arc(traj: &Trajectory, d: &Detour) -> Result<(C, C)> {
    let win = &traj.samples[d.first..=d.last];
    let mut rows = Vec::with_capacity(win.len());
    let mut rhs = Vec::with_capacity(win.len());
    let scale = d.radius;
    for s in win {
        let f = dlogtau_dt(&s.point)? * scale;
        let x = (s.param - d.center) / scale;
        let mut row = vec![f];
        row.extend((0..=FIT_DEGREE).map(|j| x.powu(j as u32)));
        rows.push(row);
        rhs.push(f * x);
    }
    let sol = least_squares(&rows, &rhs).ok_or(Error::JacobianSingular)?;
    let zx = sol[0];
    let order = poly_eval(&sol[1..], zx);
    Ok((d.center + zx * scale, order))
}

/// Location of the singularity of q inside a detour: the fitted pole for pole charts, and the
/// zero of the analytic branch of √q (a double zero of q) otherwise.
fn singularity_on_arc(traj: &Trajectory, d: &Detour) -> Result<C> {
    if d.chart == CHART_POLE {
        return pole_fit_at(traj, d).map(|f| f.t0);
    }
    let win = &traj.samples[d.first..=d.last];
    let ts: Vec<C> = win.iter().map(|s| s.param).collect();
    let mut gs: Vec<C> = Vec::with_capacity(win.len());
    for s in win {
        let mut g = s.point.q.sqrt();
        if let Some(prev) = gs.last() {
            if (g + prev).norm() < (g - prev).norm() {
                g = -g;
            }
        }
        gs.push(g);
    }
    let (coef, _) = scaled_poly_fit(&ts, &gs, d.center, d.radius, 12)?;
    let deriv: Vec<C> = coef.iter().enumerate().skip(1).map(|(m, a)| a * m as f64).collect();
    let mut x = C::new(0.0, 0.0);
    for _ in 0..60 {
        let step = poly_eval(&coef, x) / poly_eval(&deriv, x);
        x -= step;
        if step.norm() < 1e-15 {
            break;
        }
    }
    Ok(d.center + x * d.radius)
}

/// Pair every pole of q crossed by the trajectory with the zero of τ fitted on the same detour
/// arc. Zeros of q (PIII₃) are not paired: τ stays regular and nonzero there.
pub fn tau_zero_pole_match(traj: &Trajectory) -> Result<Vec<TauZeroMatch>> {
    tau_fits(traj, true)
}

/// τ fits on every detour, including those around zeros of q.
pub fn tau_detour_fits(traj: &Trajectory) -> Result<Vec<TauZeroMatch>> {
    tau_fits(traj, false)
}

fn tau_fits(traj: &Trajectory, poles_only: bool) -> Result<Vec<TauZeroMatch>> {
    let detours: Vec<&Detour> = traj.detours.iter().filter(|d| !poles_only || d.chart == CHART_POLE).collect();
    if detours.is_empty() {
        return Err(Error::NoPoleInSpan);
    }
    detours
        .into_iter()
        .map(|d| {
            let pole = singularity_on_arc(traj, d)?;
            let (zero, order) = tau_zero_on_arc(traj, d)?;
            Ok(TauZeroMatch { pole, zero, gap: (pole - zero).norm(), order, chart: d.chart })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{re, Tolerances};
    use crate::spectral::{BasePoint, Family};

    fn controls() -> FlowControls {
        FlowControls { tol: Tolerances::default().with_ode(1e-12), ..FlowControls::default() }
    }

    #[test]
    fn log_tau_derivative_is_hamiltonian() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PII, re(0.0), re(0.3)), re(0.4), 1.0, re(0.0));
        let (tc, h) = (0.8, 1e-2);
        let span: Vec<C> = [0.0, tc - 2.0 * h, tc - h, tc, tc + h, tc + 2.0 * h].iter().map(|&x| re(x)).collect();
        let run = tau_along_flow(&fp, &span, &controls()).unwrap();
        let at = |x: f64| run.samples.iter().find(|s| (s.t - x).norm() < 1e-13).unwrap();
        let d = (-at(tc + 2.0 * h).log_tau + 8.0 * at(tc + h).log_tau - 8.0 * at(tc - h).log_tau + at(tc - 2.0 * h).log_tau) / (12.0 * h);
        assert!((d - at(tc).h).norm() < 1e-6, "{d} vs {}", at(tc).h);
    }

    #[test]
    fn reversal_returns_log_tau() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PI, re(0.0), re(0.3)), re(0.4), 1.0, re(0.0));
        let run = tau_along_flow(&fp, &[re(0.0), re(0.7), re(0.0)], &controls()).unwrap();
        assert!(run.samples.last().unwrap().log_tau.norm() < 1e-8);
    }

    #[test]
    fn piii3_tau_vanishes_simply_at_pole() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PIII3, re(1.0), re(0.5)), re(0.8), 1.0, re(0.0));
        let run = tau_along_flow(&fp, &[re(1.0), re(5.0)], &controls()).unwrap();
        let m = tau_zero_pole_match(&run.trajectory).unwrap();
        assert_eq!(m.len(), 1);
        assert!(m[0].gap < 1e-5 && (m[0].order - 1.0).norm() < 1e-2, "{m:?}");
    }

    #[test]
    fn no_pole_reported() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PII, re(0.0), re(0.3)), re(0.4), 1.0, re(0.0));
        let run = tau_along_flow(&fp, &[re(0.0), re(0.5)], &controls()).unwrap();
        assert!(matches!(tau_zero_pole_match(&run.trajectory), Err(Error::NoPoleInSpan)));
    }

    #[test]
    fn off_lagrangian_rejected() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PII, re(0.0), re(0.3)), re(0.4), 1.0, re(0.1));
        assert!(matches!(tau_along_flow(&fp, &[re(0.0), re(0.5)], &controls()), Err(Error::OffLagrangian)));
    }
}
