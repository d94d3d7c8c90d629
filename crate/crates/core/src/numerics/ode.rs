use super::{Tolerances, C};
use crate::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

#[derive(Clone)]
pub struct OdeOptions<'a> {
    /// Blowup threshold on `monitor(state)` (max-norm by default).
    pub ceiling: f64,
    pub monitor: Option<&'a (dyn Fn(&[C]) -> f64 + Sync)>,
    /// Equispaced dense-output samples per path leg, endpoints excluded.
    pub samples_per_leg: usize,
    pub record_steps: bool,
    pub max_steps: usize,
}

impl Default for OdeOptions<'_> {
    fn default() -> Self {
        OdeOptions { ceiling: 1e8, monitor: None, samples_per_leg: 0, record_steps: false, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    pub param: C,
    pub state: Vec<C>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub samples: Vec<OdeSample>,
    pub accepted: usize,
    pub rejected: usize,
}

impl OdeSolution {
    pub fn last(&self) -> &OdeSample {
        self.samples.last().expect("solution always holds the initial sample")
    }
}

fn max_norm(y: &[C]) -> f64 {
    y.iter().fold(0.0, |m, v| m.max(v.norm()))
}

fn axpy(out: &mut [C], y: &[C], h: f64, terms: &[(f64, &[C])]) {
    for i in 0..y.len() {
        let mut s = C::new(0.0, 0.0);
        for (w, k) in terms {
            if *w != 0.0 {
                s += k[i] * *w;
            }
        }
        out[i] = y[i] + s * h;
    }
}

/// Integrate `dy/dλ = field(λ, y)` along a piecewise-linear path in the complex parameter plane
/// with the Dormand-Prince 5(4) pair and its continuous extension.
pub fn ode_integrate<F>(field: F, y0: &[C], path: &[C], tol: &Tolerances, opts: &OdeOptions) -> Result<OdeSolution>
where
    F: Fn(C, &[C]) -> Vec<C>,
{
    if path.len() < 2 {
        return Err(Error::DegenerateInput("parameter path needs at least two vertices".into()));
    }
    let monitor = |y: &[C]| opts.monitor.map_or_else(|| max_norm(y), |m| m(y));
    let rtol = tol.ode_rel;
    let atol = tol.ode_rel;
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut sol = OdeSolution { samples: vec![OdeSample { param: path[0], state: y.clone() }], accepted: 0, rejected: 0 };
    let mut h_prev: Option<f64> = None;

    for leg in path.windows(2) {
        let (a, b) = (leg[0], leg[1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let u = (b - a) / len;
        let g = |tau: f64, y: &[C]| -> Vec<C> { field(a + u * tau, y).into_iter().map(|v| v * u).collect() };
        let sample_taus: Vec<f64> =
            (1..=opts.samples_per_leg).map(|k| len * k as f64 / (opts.samples_per_leg + 1) as f64).collect();
        let mut next_sample = 0;

        let mut tau = 0.0;
        let mut k1 = g(0.0, &y);
        let mut h = h_prev.unwrap_or_else(|| {
            let d0 = max_norm(&y).max(1e-5);
            let d1 = max_norm(&k1).max(1e-5);
            (0.01 * d0 / d1).min(0.1 * len)
        });
        let mut ytmp = vec![C::new(0.0, 0.0); n];
        let mut ynew = vec![C::new(0.0, 0.0); n];
        let mut reject_streak = false;
        while tau < len {
            if sol.accepted + sol.rejected > opts.max_steps {
                return Err(Error::NonConvergence(format!("ODE step budget exhausted at {}", a + u * tau)));
            }
            let last = tau + h >= len * (1.0 - 1e-14);
            if last {
                h = len - tau;
            }
            if h < 1e-14 * len.max(1.0) {
                return Err(Error::Blowup { param: a + u * tau, norm: monitor(&y), state: y.clone() });
            }
            axpy(&mut ytmp, &y, h, &[(A21, &k1)]);
            let k2 = g(tau + C2 * h, &ytmp);
            axpy(&mut ytmp, &y, h, &[(A31, &k1), (A32, &k2)]);
            let k3 = g(tau + C3 * h, &ytmp);
            axpy(&mut ytmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = g(tau + C4 * h, &ytmp);
            axpy(&mut ytmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = g(tau + C5 * h, &ytmp);
            axpy(&mut ytmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = g(tau + h, &ytmp);
            axpy(&mut ynew, &y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = g(tau + h, &ynew);

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let sk = atol + rtol * y[i].norm().max(ynew[i].norm());
                err += (e.norm() / sk).powi(2);
                finite &= ynew[i].re.is_finite() && ynew[i].im.is_finite() && k7[i].re.is_finite() && k7[i].im.is_finite();
            }
            let err = (err / n as f64).sqrt();
            if !finite || !err.is_finite() {
                sol.rejected += 1;
                h *= 0.2;
                reject_streak = true;
                continue;
            }
            if err > 1.0 {
                sol.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                reject_streak = true;
                continue;
            }
            sol.accepted += 1;
            let tau_new = if last { len } else { tau + h };
            if next_sample < sample_taus.len() && sample_taus[next_sample] <= tau_new {
                let r2: Vec<C> = (0..n).map(|i| ynew[i] - y[i]).collect();
                let r3: Vec<C> = (0..n).map(|i| k1[i] * h - r2[i]).collect();
                let r4: Vec<C> = (0..n).map(|i| r2[i] - k7[i] * h - r3[i]).collect();
                let r5: Vec<C> = (0..n)
                    .map(|i| (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h)
                    .collect();
                while next_sample < sample_taus.len() && sample_taus[next_sample] <= tau_new {
                    let st = sample_taus[next_sample];
                    let th = (st - tau) / h;
                    let th1 = 1.0 - th;
                    let state =
                        (0..n).map(|i| y[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * th1) * th) * th1) * th).collect();
                    sol.samples.push(OdeSample { param: a + u * st, state });
                    next_sample += 1;
                }
            }
            tau = tau_new;
            if monitor(&ynew) > opts.ceiling {
                return Err(Error::Blowup { param: a + u * tau, norm: monitor(&ynew), state: ynew.clone() });
            }
            std::mem::swap(&mut y, &mut ynew);
            k1 = k7;
            if opts.record_steps && !last {
                sol.samples.push(OdeSample { param: a + u * tau, state: y.clone() });
            }
            let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            let fac = if reject_streak { fac.min(1.0) } else { fac };
            reject_streak = false;
            if !last {
                h *= fac;
                h_prev = Some(h);
            }
        }
        sol.samples.push(OdeSample { param: b, state: y.clone() });
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::super::{re, I};
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn exponential_growth() {
        let s = ode_integrate(|_, y: &[C]| vec![y[0]], &[re(1.0)], &[re(0.0), re(1.0)], &Tolerances::default(), &OdeOptions::default())
            .unwrap();
        assert!((s.last().state[0] - re(E)).norm() < 1e-10);
    }

    #[test]
    fn rotation_closes() {
        let s = ode_integrate(|_, y: &[C]| vec![I * y[0]], &[re(1.0)], &[re(0.0), re(2.0 * PI)], &Tolerances::default(), &OdeOptions::default())
            .unwrap();
        assert!((s.last().state[0] - re(1.0)).norm() < 1e-9);
    }

    #[test]
    fn dense_output_matches_exact() {
        let opts = OdeOptions { samples_per_leg: 9, ..Default::default() };
        let s = ode_integrate(|_, y: &[C]| vec![y[0]], &[re(1.0)], &[re(0.0), re(2.0)], &Tolerances::default(), &opts).unwrap();
        assert_eq!(s.samples.len(), 11);
        for smp in &s.samples {
            assert!((smp.state[0] - smp.param.exp()).norm() < 1e-9 * smp.param.exp().norm());
        }
    }

    #[test]
    fn complex_path_integration() {
        // y' = 2λ y along a bent path; exact y = exp(λ²)
        let path = [re(0.0), I, re(1.0) + I];
        let s = ode_integrate(|l, y: &[C]| vec![2.0 * l * y[0]], &[re(1.0)], &path, &Tolerances::default(), &OdeOptions::default())
            .unwrap();
        let exact = (path[2] * path[2]).exp();
        assert!((s.last().state[0] - exact).norm() < 1e-9 * exact.norm());
    }

    #[test]
    fn blowup_reported() {
        // y' = y², y(0)=1 blows up at 1
        let r = ode_integrate(|_, y: &[C]| vec![y[0] * y[0]], &[re(1.0)], &[re(0.0), re(2.0)], &Tolerances::default(), &OdeOptions::default());
        match r {
            Err(Error::Blowup { param, state, .. }) => {
                assert!((param.re - 1.0).abs() < 1e-6);
                // the reported state belongs to the reported parameter
                assert!((1.0 / state[0] - (1.0 - param)).norm() < 1e-9);
            }
            other => panic!("expected blowup, got {other:?}"),
        }
    }
}
