use super::flows::{flow_vector, FlowId, Normalization, StateIdx};
use super::FiberPoint;
use crate::numerics::{ode_integrate, OdeOptions, Tolerances, C};
use crate::spectral::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Mutex;
use std::f64::consts::PI;
use std::io::Write;

/// Chart flag for samples integrated in the original coordinates.
pub const CHART_DIRECT: u8 = 0;
/// Chart flag for samples on a detour around a pole of q.
pub const CHART_POLE: u8 = 1;
/// Chart flag for samples on a detour around a zero of q (PIII₃ only).
pub const CHART_ZERO: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    /// Value of the flow time (t for w₁, H for w₂, α for w₃).
    pub param: C,
    pub point: FiberPoint,
    /// ∫ H along the flow parameter; zero unless the flow is w₁.
    pub log_tau: C,
    pub chart: u8,
}

/// One excursion around a movable singularity of q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detour {
    /// Centre estimate used to lay out the arc.
    pub center: C,
    pub radius: f64,
    pub chart: u8,
    /// Sample index range `first..=last` lying on the arc.
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub family: Family,
    pub flow: FlowId,
    pub normalization: Normalization,
    pub epsilon: C,
    pub samples: Vec<TrajectorySample>,
    pub detours: Vec<Detour>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowControls {
    pub tol: Tolerances,
    /// |q| (and |1/q| for PIII₃) above which a detour starts.
    pub switch_threshold: f64,
    pub detour_radius: f64,
    /// Chords used to approximate the half circle.
    pub arc_legs: usize,
    /// Side of the path on which detours pass (+1 left, −1 right).
    pub side: f64,
    pub max_radius_halvings: usize,
    pub record_steps: bool,
}

impl Default for FlowControls {
    fn default() -> Self {
        FlowControls {
            tol: Tolerances::default(),
            switch_threshold: 1e4,
            detour_radius: 0.05,
            arc_legs: 30,
            side: 1.0,
            max_radius_halvings: 4,
            record_steps: true,
        }
    }
}

fn time_index(flow: FlowId) -> usize {
    match flow {
        FlowId::W1 => StateIdx::T,
        FlowId::W2 => StateIdx::H,
        FlowId::W3 => StateIdx::ALPHA,
    }
}

/// Order of the singularity of q met along the flows: simple poles for PII, double otherwise.
fn singular_order(family: Family) -> f64 {
    match family {
        Family::PII => 1.0,
        _ => 2.0,
    }
}

fn monitor(family: Family, y: &[C]) -> f64 {
    let q = y[StateIdx::Q].norm();
    if family == Family::PIII3 {
        q.max(1.0 / q)
    } else {
        q
    }
}

struct Integrator<'a> {
    family: Family,
    flow: FlowId,
    norm: Normalization,
    epsilon: C,
    controls: &'a FlowControls,
    failure: Mutex<Option<Error>>,
}

impl Integrator<'_> {
    /// Flow rescaled to unit speed in its time coordinate, extended by d(log τ).
    fn field(&self, y: &[C]) -> Vec<C> {
        match flow_vector(self.family, self.flow, self.norm, &y[..StateIdx::LEN], 1.0 / self.epsilon) {
            Ok(v) => {
                let speed = v[time_index(self.flow)];
                let mut out: Vec<C> = v.iter().map(|x| x / speed).collect();
                let dtau = if self.flow == FlowId::W1 { y[StateIdx::H] / speed } else { C::new(0.0, 0.0) };
                out.push(dtau);
                out
            }
            Err(e) => {
                self.failure.lock().expect("poisoned").get_or_insert(e);
                vec![C::new(f64::NAN, 0.0); StateIdx::LEN + 1]
            }
        }
    }

    fn run(&self, y0: &[C], path: &[C], record: bool) -> Result<Vec<(C, Vec<C>)>> {
        let fam = self.family;
        let mon = move |y: &[C]| monitor(fam, y);
        let opts = OdeOptions {
            ceiling: self.controls.switch_threshold,
            monitor: Some(&mon),
            samples_per_leg: 0,
            record_steps: record,
            max_steps: 200_000,
        };
        *self.failure.lock().expect("poisoned") = None;
        let res = ode_integrate(|_, y: &[C]| self.field(y), y0, path, &self.controls.tol, &opts);
        let failure = self.failure.lock().expect("poisoned").take();
        if let Some(e) = failure {
            if !res.is_ok() {
                return Err(e);
            }
        }
        let sol = res?;
        Ok(sol.samples.into_iter().map(|s| (s.param, s.state)).collect())
    }

    fn project(&self, y: &mut [C]) {
        let mut fp = FiberPoint::from_state(self.family, &y[..StateIdx::LEN], self.epsilon);
        fp.project_sheet();
        y[StateIdx::P] = fp.p;
    }

    fn sample(&self, param: C, y: &[C], chart: u8) -> TrajectorySample {
        TrajectorySample {
            param,
            point: FiberPoint::from_state(self.family, &y[..StateIdx::LEN], self.epsilon),
            log_tau: y[StateIdx::LEN],
            chart,
        }
    }

    /// Centre and chart of the singularity approached at (param, y).
    fn locate(&self, param: C, y: &[C]) -> (C, u8) {
        let v = self.field(y);
        let q = y[StateIdx::Q];
        let dq = v[StateIdx::Q];
        let k = singular_order(self.family);
        if q.norm() >= 1.0 {
            (param + k * q / dq, CHART_POLE)
        } else {
            (param - k * q / dq, CHART_ZERO)
        }
    }
}

/// Integrate a flow along a piecewise-linear path of its time coordinate, passing movable
/// singularities of q on half-circle detours in the complex time plane.
pub fn integrate_flow(
    start: &FiberPoint,
    flow: FlowId,
    norm: Normalization,
    span: &[C],
    controls: &FlowControls,
) -> Result<Trajectory> {
    controls.tol.validate()?;
    if span.len() < 2 {
        return Err(Error::Config("flow span needs at least two points".into()));
    }
    let family = start.family();
    if flow == FlowId::W3 && family != Family::PII {
        return Err(Error::FamilyMismatch(format!("flow w3 is not defined for {family:?}")));
    }
    let it = Integrator { family, flow, norm, epsilon: start.epsilon, controls, failure: Mutex::new(None) };
    let ti = time_index(flow);
    let mut y: Vec<C> = start.to_state().to_vec();
    y.push(C::new(0.0, 0.0));
    if (y[ti] - span[0]).norm() > 1e-12 * (1.0 + span[0].norm()) {
        return Err(Error::Config(format!("span starts at {} but the flow time of the start point is {}", span[0], y[ti])));
    }
    y[ti] = span[0];
    let mut traj = Trajectory { family, flow, normalization: norm, epsilon: start.epsilon, samples: vec![it.sample(span[0], &y, CHART_DIRECT)], detours: vec![] };
    // chunk starts that a detour may restart from: (param, state, number of samples)
    let mut history: Vec<(C, Vec<C>, usize)> = vec![];
    let mut cur = span[0];

    for leg in span.windows(2) {
        let b = leg[1];
        let dir = (b - leg[0]) / (b - leg[0]).norm();
        while (b - cur).norm() > 1e-13 * (1.0 + b.norm()) {
            let step = controls.detour_radius.min((b - cur).norm());
            let next = cur + (b - cur) / (b - cur).norm() * step;
            history.push((cur, y.clone(), traj.samples.len()));
            match it.run(&y, &[cur, next], controls.record_steps) {
                Ok(pts) => {
                    for (pm, st) in pts.iter().skip(1) {
                        traj.samples.push(it.sample(*pm, st, CHART_DIRECT));
                    }
                    y = pts.last().expect("nonempty").1.clone();
                    it.project(&mut y);
                    cur = next;
                }
                Err(Error::Blowup { param, state, .. }) => {
                    let (center, chart) = it.locate(param, &state);
                    let (end, yend) = detour(&it, &mut traj, &mut history, center, chart, dir)?;
                    y = yend;
                    cur = end;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(traj)
}

fn detour(
    it: &Integrator,
    traj: &mut Trajectory,
    history: &mut Vec<(C, Vec<C>, usize)>,
    center: C,
    chart: u8,
    dir: C,
) -> Result<(C, Vec<C>)> {
    let controls = it.controls;
    let mut radius = controls.detour_radius;
    let rot = C::new(0.0, controls.side.signum());
    for _ in 0..=controls.max_radius_halvings {
        let idx = history.iter().rposition(|(p, _, _)| (p - center).norm() >= radius);
        let Some(idx) = idx else {
            radius *= 0.5;
            continue;
        };
        let (p0, y0, nsamp) = history[idx].clone();
        let a = center - dir * radius;
        let b = center + dir * radius;
        let approach = if (a - p0).norm() > 1e-14 { it.run(&y0, &[p0, a], controls.record_steps) } else { Ok(vec![(p0, y0.clone())]) };
        let approach = match approach {
            Ok(v) => v,
            Err(Error::Blowup { .. }) => {
                radius *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        let ya = approach.last().expect("nonempty").1.clone();
        let n = controls.arc_legs.max(4);
        // half circle from a to b on the chosen side of the path
        let arc: Vec<C> = (0..=n)
            .map(|k| {
                let phi = PI * k as f64 / n as f64;
                center - dir * radius * (rot * phi).exp()
            })
            .collect();
        let arc_pts = match it.run(&ya, &arc, false) {
            Ok(v) => v,
            Err(Error::Blowup { .. }) => {
                radius *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        traj.samples.truncate(nsamp);
        // later detours must not restart behind this one
        history.clear();
        for (pm, st) in approach.iter().skip(1) {
            traj.samples.push(it.sample(*pm, st, CHART_DIRECT));
        }
        let first = traj.samples.len();
        for (pm, st) in arc_pts.iter().skip(1) {
            traj.samples.push(it.sample(*pm, st, chart));
        }
        let last = traj.samples.len() - 1;
        traj.detours.push(Detour { center, radius, chart, first: first - 1, last });
        traj.samples[first - 1].chart = chart;
        let mut y = arc_pts.last().expect("nonempty").1.clone();
        it.project(&mut y);
        return Ok((b, y));
    }
    Err(Error::Blowup { param: center, norm: f64::INFINITY, state: vec![] })
}

impl Trajectory {
    pub fn params(&self) -> Vec<C> {
        self.samples.iter().map(|s| s.param).collect()
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory holds its start")
    }

    pub fn max_h_drift(&self) -> f64 {
        let h0 = self.samples[0].point.base.h;
        self.samples.iter().fold(0.0, |m, s| m.max((s.point.base.h - h0).norm()))
    }

    pub fn has_chart_switch(&self) -> bool {
        !self.detours.is_empty()
    }

    /// CSV with columns t_re,t_im,H_re,H_im,q_re,q_im,p_re,p_im,r_re,r_im,s_re,s_im,chart.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Config(format!("csv output: {e}"));
        wr.write_record(["t_re", "t_im", "H_re", "H_im", "q_re", "q_im", "p_re", "p_im", "r_re", "r_im", "s_re", "s_im", "chart"])
            .map_err(io)?;
        for s in &self.samples {
            let fp = &s.point;
            let mut row: Vec<String> = vec![];
            for z in [fp.base.t, fp.base.h, fp.q, fp.p, fp.r, fp.s] {
                row.push(crate::numerics::fmt17(z.re));
                row.push(crate::numerics::fmt17(z.im));
            }
            row.push(s.chart.to_string());
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::Config(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// Endpoint gap between the two orders of one Heun step along each of two raw flows.
/// Vanishes to third order in `h` exactly when the flows commute.
pub fn flow_commutator_defect(
    start: &FiberPoint,
    first: FlowId,
    second: FlowId,
    norm: Normalization,
    h: f64,
) -> Result<f64> {
    let fam = start.family();
    let ie = 1.0 / start.epsilon;
    let heun = |flow: FlowId, y: &[C]| -> Result<Vec<C>> {
        let k1 = flow_vector(fam, flow, norm, y, ie)?;
        let mid: Vec<C> = y.iter().zip(k1.iter()).map(|(a, k)| a + k * h).collect();
        let k2 = flow_vector(fam, flow, norm, &mid, ie)?;
        Ok(y.iter().zip(k1.iter().zip(k2.iter())).map(|(a, (u, v))| a + (u + v) * (0.5 * h)).collect())
    };
    let y0 = start.to_state();
    let ab = heun(second, &heun(first, &y0)?)?;
    let ba = heun(first, &heun(second, &y0)?)?;
    Ok(ab.iter().zip(ba.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, re};
    use crate::spectral::BasePoint;

    #[test]
    fn pii_conserves_h_without_poles() {
        let b = BasePoint::new(Family::PII, re(0.0), c(0.3, 0.1));
        let fp = FiberPoint::on_sheet(b, c(0.2, 0.1), 1.0, c(0.1, 0.0));
        let tr = integrate_flow(&fp, FlowId::W1, Normalization::Conserving, &[re(0.0), re(1.0)], &FlowControls::default()).unwrap();
        assert!(tr.max_h_drift() < 1e-8);
        assert!((tr.last().param - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn flow_commutes_with_itself() {
        // w₁ against itself commutes trivially
        let b = BasePoint::new(Family::PIII3, c(1.0, 0.2), c(0.7, 0.0));
        let fp = FiberPoint::on_sheet(b, c(0.6, 0.1), 1.0, c(0.1, 0.0));
        let d = flow_commutator_defect(&fp, FlowId::W1, FlowId::W1, Normalization::Conserving, 1e-2).unwrap();
        assert!(d < 1e-15);
    }
}
