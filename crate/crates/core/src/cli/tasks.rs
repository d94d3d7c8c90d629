//! Per-grid-point jobs shared by the single commands and `sweep`.

use super::config::{GridPoint, JobConfig};
use super::json::{cjson, cjson_list};
use crate::isomonodromy::{integrate_flow, pole_fits, FiberPoint, FlowId, Normalization, Trajectory, CHART_DIRECT};
use crate::joyce::{
    heavenly_residual, homogeneity_defect, k_third_derivatives, k_third_derivatives_fd_ladder, plebanski_w, plebanski_w_pii_general, theta_inverse,
    theta_map, ThetaBackend, ThetaCoords,
};
use crate::numerics::{C, I};
use crate::spectral::{periods, Family};
use crate::tau::{tau_along_flow, tau_zero_pole_match};
use crate::{Error, Result};
use clap::ValueEnum;
use serde_json::{json, Map, Value};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

// thresholds used for the per-point pass flags
const HEAVENLY_TOL: f64 = 1e-5;
const K_REL_TOL: f64 = 1e-6;
const HOMOGENEITY_TOL: f64 = 1e-10;
const LEADING_REL_TOL: f64 = 1e-3;
const H0_TOL: f64 = 1e-4;
const TAU_GAP_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Periods,
    Theta,
    Pleb,
    Flow,
    Tau,
    PoleScan,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Periods => "periods",
            Task::Theta => "theta",
            Task::Pleb => "pleb",
            Task::Flow => "flow",
            Task::Tau => "tau",
            Task::PoleScan => "pole-scan",
        }
    }

    fn needs_span(self) -> bool {
        matches!(self, Task::Flow | Task::Tau | Task::PoleScan)
    }
}

pub struct Outcome {
    pub value: Value,
    pub pass: bool,
}

/// Fail fast on settings a task cannot run without, so they surface as configuration errors.
pub fn validate(task: Task, job: &JobConfig) -> Result<()> {
    if task.needs_span() {
        job.span()?;
    }
    let fam = job.family()?;
    if task == Task::PoleScan && job.flow != FlowId::W1 {
        return Err(Error::Config("pole-scan follows the w1 flow only".into()));
    }
    if job.flow == FlowId::W3 && fam != Family::PII {
        return Err(Error::Config(format!("flow w3 is not defined for {fam}")));
    }
    if task == Task::Tau && (job.r.norm() > 0.0 || job.s.norm() > 0.0) {
        return Err(Error::Config("tau needs r = 0 and s = 0".into()));
    }
    Ok(())
}

pub fn run_task(task: Task, job: &JobConfig, gp: &GridPoint) -> Outcome {
    let res = match task {
        Task::Periods => periods_task(job, gp),
        Task::Theta => theta_task(job, gp),
        Task::Pleb => pleb_task(job, gp),
        Task::Flow => flow_task(job, gp),
        Task::Tau => tau_task(job, gp),
        Task::PoleScan => pole_scan_task(job, gp),
    };
    let mut head = Map::new();
    head.insert("index".into(), json!(gp.index));
    head.insert("t".into(), cjson(gp.base.t));
    head.insert("h".into(), cjson(gp.base.h));
    head.insert("alpha".into(), cjson(gp.base.alpha));
    match res {
        Ok((Value::Object(body), pass)) => {
            head.extend(body);
            head.insert("pass".into(), json!(pass));
            Outcome { value: Value::Object(head), pass }
        }
        Ok((other, pass)) => {
            head.insert("result".into(), other);
            head.insert("pass".into(), json!(pass));
            Outcome { value: Value::Object(head), pass }
        }
        Err(e) => {
            head.insert("error".into(), json!(e.to_string()));
            head.insert("pass".into(), json!(false));
            Outcome { value: Value::Object(head), pass: false }
        }
    }
}

fn fiber(job: &JobConfig, gp: &GridPoint) -> FiberPoint {
    FiberPoint::on_sheet(gp.base, gp.q, job.sheet, job.r).with_s(job.s)
}

/// Flow path from the start point's flow time through the span vertices (the start is prepended
/// when the span begins elsewhere, so one span serves a whole grid).
fn path(job: &JobConfig, fp: &FiberPoint, flow: FlowId) -> Result<Vec<C>> {
    let start = match flow {
        FlowId::W1 => fp.base.t,
        FlowId::W2 => fp.base.h,
        FlowId::W3 => fp.base.alpha,
    };
    let span = job.span()?;
    let mut out = Vec::with_capacity(span.len() + 1);
    if (span[0] - start).norm() > 1e-14 * (1.0 + start.norm()) {
        out.push(start);
    }
    out.extend_from_slice(span);
    Ok(out)
}

fn fiber_json(fp: &FiberPoint) -> Value {
    json!({"q": cjson(fp.q), "p": cjson(fp.p), "r": cjson(fp.r), "s": cjson(fp.s)})
}

/// CSV target for grid point `index`: the path itself for a single point, `stem-<index>.ext` otherwise.
fn csv_path(job: &JobConfig, index: usize) -> Option<PathBuf> {
    let path = job.csv.as_ref()?;
    if job.grid.len() <= 1 {
        return Some(path.clone());
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    Some(path.with_file_name(format!("{stem}-{index}{ext}")))
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn periods_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let pd = periods(&gp.base, job.backend, &job.tol)?;
    let expected = gp.base.family.pairing_constant();
    let residual = (pd.bilinear() - expected).norm();
    let v = json!({
        "backend": format!("{:?}", job.backend).to_lowercase(),
        "omega": cjson_list(&pd.omega),
        "beta": cjson_list(&pd.beta),
        "z": cjson_list(&pd.z),
        "bilinear": cjson(pd.bilinear()),
        "pairing_constant": cjson(expected),
        "bilinear_residual": residual,
    });
    Ok((v, residual < job.tol.identity_tol))
}

fn theta_json(th: &ThetaCoords) -> Value {
    json!({
        "first": cjson(th.first),
        "h": cjson(th.h),
        "alpha": th.alpha.map(cjson),
        "lattice": [cjson_list(&th.lattice[0]), cjson_list(&th.lattice[1])],
    })
}

fn theta_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let fp = fiber(job, gp);
    let by_periods = theta_map(&fp, ThetaBackend::Periods, &job.tol)?;
    let by_uniform = theta_map(&fp, ThetaBackend::Uniformization, &job.tol)?;
    let distance = by_periods.distance_mod_lattice(&by_uniform);
    let back = theta_inverse(&gp.base, &by_uniform)?;
    let round_trip = [back.q - fp.q, back.p - fp.p, back.r - fp.r].iter().fold(0.0f64, |m, d| m.max(d.norm()));
    let v = json!({
        "fiber": fiber_json(&fp),
        "theta_periods": theta_json(&by_periods),
        "theta_uniformization": theta_json(&by_uniform),
        "backend_distance": distance,
        "round_trip_error": round_trip,
    });
    Ok((v, distance < job.tol.identity_tol && round_trip < job.tol.identity_tol))
}

fn pleb_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let fp = fiber(job, gp);
    let general = fp.family() == Family::PII && (fp.base.alpha.norm() > 0.0 || fp.s.norm() > 0.0);
    let w = if general { plebanski_w_pii_general(&fp)? } else { plebanski_w(&fp)? };
    let mut out = Map::new();
    out.insert("fiber".into(), fiber_json(&fp));
    out.insert("w".into(), cjson(w));
    if general {
        // the heavenly and Euler identities are stated on the α = s = 0 slice
        return Ok((Value::Object(out), true));
    }
    let homogeneity = homogeneity_defect(&fp, I)?;
    let heavenly = heavenly_residual(&fp)?.norm();
    out.insert("homogeneity_defect".into(), json!(homogeneity));
    out.insert("heavenly_residual".into(), json!(heavenly));
    let mut pass = homogeneity < HOMOGENEITY_TOL && heavenly < HEAVENLY_TOL;
    if fp.family() != Family::PI {
        let exact = k_third_derivatives(&fp)?.values;
        let (fd, _) = k_third_derivatives_fd_ladder(&fp)?;
        let scale = exact.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let rel = fd.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale;
        out.insert("k_third".into(), cjson_list(&exact));
        out.insert("k_third_fd_relative_error".into(), json!(rel));
        pass &= rel < K_REL_TOL;
    }
    Ok((Value::Object(out), pass))
}

fn trajectory_summary(tr: &Trajectory) -> Map<String, Value> {
    let mut out = Map::new();
    let first = tr.samples.first().map(|s| s.point.hamiltonian()).unwrap_or_default();
    let drift = tr.samples.iter().fold(0.0f64, |m, s| m.max((s.point.hamiltonian() - first).norm()));
    out.insert("samples".into(), json!(tr.samples.len()));
    out.insert("chart_switch_rows".into(), json!(tr.samples.iter().filter(|s| s.chart != CHART_DIRECT).count()));
    let detours: Vec<Value> = tr
        .detours
        .iter()
        .map(|d| json!({"center": cjson(d.center), "radius": d.radius, "chart": d.chart}))
        .collect();
    out.insert("detours".into(), Value::Array(detours));
    if let Some(end) = tr.samples.last() {
        out.insert(
            "end".into(),
            json!({"param": cjson(end.param), "t": cjson(end.point.base.t), "h": cjson(end.point.base.h), "fiber": fiber_json(&end.point)}),
        );
    }
    if tr.flow == FlowId::W1 && tr.normalization == Normalization::Conserving {
        out.insert("h_drift".into(), json!(drift));
    }
    out
}

fn flow_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let fp = fiber(job, gp).with_epsilon(job.epsilon);
    let tr = integrate_flow(&fp, job.flow, job.normalization, &path(job, &fp, job.flow)?, &job.controls)?;
    let mut out = trajectory_summary(&tr);
    out.insert("fiber".into(), fiber_json(&fp));
    out.insert("flow".into(), json!(job.flow));
    out.insert("normalization".into(), json!(job.normalization));
    out.insert("epsilon".into(), cjson(job.epsilon));
    if let Some(path) = csv_path(job, gp.index) {
        tr.write_csv(create(&path)?)?;
        out.insert("csv".into(), json!(path.display().to_string()));
    }
    Ok((Value::Object(out), true))
}

fn tau_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let fp = fiber(job, gp);
    let run = tau_along_flow(&fp, &path(job, &fp, FlowId::W1)?, &job.controls)?;
    let matches = match tau_zero_pole_match(&run.trajectory) {
        Ok(m) => m,
        Err(Error::NoPoleInSpan) => Vec::new(),
        Err(e) => return Err(e),
    };
    let pass = matches.iter().all(|m| m.gap < TAU_GAP_TOL);
    let mut out = trajectory_summary(&run.trajectory);
    out.insert("fiber".into(), fiber_json(&fp));
    if let Some(end) = run.samples.last() {
        out.insert("log_tau_end".into(), cjson(end.log_tau));
    }
    let list: Vec<Value> = matches
        .iter()
        .map(|m| json!({"pole": cjson(m.pole), "zero": cjson(m.zero), "gap": m.gap, "order": cjson(m.order), "chart": m.chart}))
        .collect();
    out.insert("zeros".into(), Value::Array(list));
    if let Some(path) = csv_path(job, gp.index) {
        run.write_csv(create(&path)?)?;
        out.insert("csv".into(), json!(path.display().to_string()));
    }
    Ok((Value::Object(out), pass))
}

fn pole_scan_task(job: &JobConfig, gp: &GridPoint) -> Result<(Value, bool)> {
    let eps = job.epsilon;
    let fp = fiber(job, gp).with_epsilon(eps);
    let tr = integrate_flow(&fp, FlowId::W1, job.normalization, &path(job, &fp, FlowId::W1)?, &job.controls)?;
    let mut pass = true;
    let mut poles = Vec::new();
    for fit in pole_fits(&tr) {
        let f = match fit {
            Ok(f) => f,
            Err(e) => {
                pass = false;
                poles.push(json!({"error": e.to_string()}));
                continue;
            }
        };
        let expected: Option<C> = match fp.family() {
            Family::PIII3 => Some(f.t0 * eps * eps),
            Family::PII => Some(-eps),
            Family::PI => None,
        };
        let leading_residual = expected.map(|e| ((f.leading - e) / e).norm());
        let h0_residual = (fp.family() == Family::PIII3 && job.normalization == Normalization::Conserving)
            .then(|| (f.h0 - (-3.0 * f.subleading.q0 * f.t0 + eps * eps / 4.0)).norm());
        pass &= leading_residual.is_none_or(|d| d < LEADING_REL_TOL) && h0_residual.is_none_or(|d| d < H0_TOL);
        poles.push(json!({
            "t0": cjson(f.t0),
            "order": f.order,
            "order_estimate": f.order_estimate,
            "leading": cjson(f.leading),
            "leading_relative_residual": leading_residual,
            "q0": cjson(f.subleading.q0),
            "rho": f.subleading.rho.map(cjson),
            "c": f.subleading.c.map(cjson),
            "h0": cjson(f.h0),
            "h0_residual": h0_residual,
            "fit_residual": f.residual,
        }));
    }
    let v = json!({"fiber": fiber_json(&fp), "epsilon": cjson(eps), "poles": poles, "samples": tr.samples.len()});
    Ok((v, pass))
}
