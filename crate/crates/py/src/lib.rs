use num_complex::Complex64 as C;
use painleve_joyce::cli::config::{resolve, ConfigFile, Overrides};
use painleve_joyce::cli::suite::run_checks;
use painleve_joyce::isomonodromy::{integrate_flow, pole_fits, FiberPoint, FlowControls, FlowId, Normalization};
use painleve_joyce::joyce::{heavenly_residual, k_third_derivatives, plebanski_w, theta_map, ThetaBackend};
use painleve_joyce::numerics::Tolerances;
use painleve_joyce::spectral::{periods as spectral_periods, Backend, BasePoint, Family};
use painleve_joyce::tau::tau_along_flow;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: painleve_joyce::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<Family> {
    name.parse().map_err(err)
}

fn backend(name: &str) -> PyResult<Backend> {
    match name {
        "elliptic" => Ok(Backend::Elliptic),
        "quadrature" => Ok(Backend::Quadrature),
        _ => Err(PyValueError::new_err(format!("unknown backend '{name}'"))),
    }
}

fn base(fam: &str, t: C, h: C, alpha: C) -> PyResult<BasePoint> {
    let b = BasePoint::new(family(fam)?, t, h).with_alpha(alpha);
    b.check_regular().map_err(err)?;
    Ok(b)
}

/// A point of the isomonodromy total space, p fixed by the sheet sign.
#[pyclass(name = "Fiber", frozen)]
struct PyFiber {
    inner: FiberPoint,
}

#[pymethods]
impl PyFiber {
    #[new]
    #[pyo3(signature = (family, t, h, q, sheet = 1.0, r = C::new(0.0, 0.0), s = C::new(0.0, 0.0), alpha = C::new(0.0, 0.0)))]
    #[allow(clippy::too_many_arguments)]
    fn new(family: &str, t: C, h: C, q: C, sheet: f64, r: C, s: C, alpha: C) -> PyResult<Self> {
        if sheet != 1.0 && sheet != -1.0 {
            return Err(PyValueError::new_err("sheet must be +1 or -1"));
        }
        let b = base(family, t, h, alpha)?;
        Ok(PyFiber { inner: FiberPoint::on_sheet(b, q, sheet, r).with_s(s) })
    }

    #[getter]
    fn q(&self) -> C {
        self.inner.q
    }

    #[getter]
    fn p(&self) -> C {
        self.inner.p
    }

    #[getter]
    fn r(&self) -> C {
        self.inner.r
    }

    fn hamiltonian(&self) -> C {
        self.inner.hamiltonian()
    }

    /// Plebanski function W.
    fn w(&self) -> PyResult<C> {
        plebanski_w(&self.inner).map_err(err)
    }

    /// (theta_first, theta_H) from the chosen backend: "uniformization" or "periods".
    #[pyo3(signature = (backend = "uniformization"))]
    fn theta(&self, backend: &str) -> PyResult<(C, C)> {
        let b = match backend {
            "uniformization" => ThetaBackend::Uniformization,
            "periods" => ThetaBackend::Periods,
            _ => return Err(PyValueError::new_err(format!("unknown theta backend '{backend}'"))),
        };
        let th = theta_map(&self.inner, b, &Tolerances::default()).map_err(err)?;
        Ok((th.first, th.h))
    }

    /// Third theta-derivatives of K: [K_fff, K_ffH, K_fHH, K_HHH], f the first base coordinate.
    fn k_third(&self) -> PyResult<Vec<C>> {
        Ok(k_third_derivatives(&self.inner).map_err(err)?.values.to_vec())
    }

    fn heavenly_residual(&self) -> PyResult<C> {
        heavenly_residual(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        let f = &self.inner;
        format!("Fiber({}, t={}, h={}, q={}, p={}, r={})", f.family(), f.base.t, f.base.h, f.q, f.p, f.r)
    }
}

/// Periods of omega and beta over the cycle basis, and the z-coordinates.
#[pyfunction]
#[pyo3(signature = (family, t, h, alpha = C::new(0.0, 0.0), backend = "elliptic"))]
fn periods(family: &str, t: C, h: C, alpha: C, backend: &str) -> PyResult<(Vec<C>, Vec<C>, Vec<C>)> {
    let b = base(family, t, h, alpha)?;
    let pd = spectral_periods(&b, self::backend(backend)?, &Tolerances::default()).map_err(err)?;
    Ok((pd.omega.to_vec(), pd.beta.to_vec(), pd.z.to_vec()))
}

/// (t, log tau) samples along the w1 flow from an r = 0 fiber point through the span vertices.
#[pyfunction]
fn tau(fiber: &PyFiber, span: Vec<C>) -> PyResult<Vec<(C, C)>> {
    let run = tau_along_flow(&fiber.inner, &span, &FlowControls::default()).map_err(err)?;
    Ok(run.samples.iter().map(|s| (s.t, s.log_tau)).collect())
}

/// (t0, order, leading coefficient) for each pole of q met along the w1 flow.
#[pyfunction]
#[pyo3(signature = (fiber, span, epsilon = C::new(1.0, 0.0)))]
fn pole_scan(fiber: &PyFiber, span: Vec<C>, epsilon: C) -> PyResult<Vec<(C, i32, C)>> {
    let fp = fiber.inner.with_epsilon(epsilon);
    let tr = integrate_flow(&fp, FlowId::W1, Normalization::Conserving, &span, &FlowControls::default()).map_err(err)?;
    pole_fits(&tr).into_iter().map(|f| f.map(|f| (f.t0, f.order, f.leading)).map_err(err)).collect()
}

/// Invariant suite: (family, name, max_residual, tolerance, pass) per identity.
#[pyfunction]
#[pyo3(signature = (family = None, seed = 0, points = 5))]
fn check(py: Python<'_>, family: Option<&str>, seed: u64, points: usize) -> PyResult<Vec<(String, String, f64, f64, bool)>> {
    let fams = match family {
        Some(f) => vec![self::family(f)?],
        None => vec![Family::PIII3, Family::PII, Family::PI],
    };
    let o = Overrides { seed: Some(seed), points: Some(points), ..Overrides::default() };
    let job = resolve(ConfigFile::default(), o, false).map_err(err)?;
    let records = py.detach(|| run_checks(&job, &fams));
    Ok(records.into_iter().map(|r| (r.family.to_string(), r.name, r.max_residual, r.tolerance, r.pass)).collect())
}

#[pymodule]
fn painleve_joyce_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFiber>()?;
    m.add_function(wrap_pyfunction!(periods, m)?)?;
    m.add_function(wrap_pyfunction!(tau, m)?)?;
    m.add_function(wrap_pyfunction!(pole_scan, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
