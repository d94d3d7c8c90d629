use super::chart::FiberChart;
use super::kderiv::vertical_fields;
use super::pleb::plebanski_w;
use crate::isomonodromy::FiberPoint;
use crate::numerics::{fd_directional, solve_linear, C};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Second derivatives of W in the canonical coordinates (z₁, z₂, θ₁, θ₂), θ_i = β_iθ_f + ω_iθ_H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalHessian {
    pub theta_theta: [[C; 2]; 2],
    /// Entry [i][j] is ∂²W/∂θ_i∂z_j.
    pub theta_z: [[C; 2]; 2],
    pub kappa: C,
}

impl CanonicalHessian {
    /// W_{θ_i z_j} − W_{θ_j z_i} − Σ η_pq W_{θ_iθ_p} W_{θ_jθ_q}, with η₁₂ = −η₂₁ = κ.
    pub fn residual(&self, i: usize, j: usize) -> C {
        let w = &self.theta_theta;
        self.theta_z[i][j] - self.theta_z[j][i] - self.kappa * (w[i][0] * w[j][1] - w[i][1] * w[j][0])
    }
}

fn inv2(m: [[C; 2]; 2]) -> [[C; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

const H_MAP: f64 = 1e-4;
const H_OUTER: f64 = 5e-3;
const H_INNER: f64 = 5e-4;

fn jacobian_in(chart: &FiberChart, y0: &[C]) -> Result<[[C; 4]; 4]> {
    let canonical = |y: &[C]| -> Result<Vec<C>> {
        let pd = chart.periods(y)?;
        let th = chart.theta(y)?;
        Ok(vec![pd.z[0], pd.z[1], pd.beta[0] * th[0] + pd.omega[0] * th[1], pd.beta[1] * th[0] + pd.omega[1] * th[1]])
    };
    let zero = C::new(0.0, 0.0);
    let mut jac = [[zero; 4]; 4];
    for k in 0..4 {
        let mut e = vec![zero; 4];
        e[k] = C::new(1.0, 0.0);
        let col = fd_directional(canonical, y0, &e, H_MAP)?;
        for (row, v) in jac.iter_mut().zip(col) {
            row[k] = v;
        }
    }
    Ok(jac)
}

/// Jacobian of the canonical coordinates (z₁, z₂, θ₁, θ₂) with respect to (first, H, q, r).
/// For PIII₃ the first column is ∂/∂s = t∂/∂t.
pub fn canonical_jacobian(fp: &FiberPoint) -> Result<[[C; 4]; 4]> {
    let chart = FiberChart::new(fp)?;
    let mut jac = jacobian_in(&chart, &FiberChart::coords(fp)[..4])?;
    if fp.family() == crate::spectral::Family::PIII3 {
        for row in jac.iter_mut() {
            row[0] *= fp.base.t;
        }
    }
    Ok(jac)
}

/// Hessian of W in canonical coordinates at fp, by nested finite differences along the exact
/// vertical fields and along the Jacobian-inverse directions of the canonical map.
pub fn canonical_hessian(fp: &FiberPoint) -> Result<CanonicalHessian> {
    canonical_hessian_steps(fp, H_OUTER, H_INNER)
}

/// [`canonical_hessian`] with explicit outer and inner difference steps.
pub fn canonical_hessian_steps(fp: &FiberPoint, h_outer: f64, h_inner: f64) -> Result<CanonicalHessian> {
    let chart = FiberChart::new(fp)?;
    let y0: Vec<C> = FiberChart::coords(fp)[..4].to_vec();
    let zero = C::new(0.0, 0.0);
    let jac: Vec<Vec<C>> = jacobian_in(&chart, &y0)?.iter().map(|r| r.to_vec()).collect();
    let mut z_dirs = Vec::new();
    for j in 0..2 {
        let mut e = vec![zero; 4];
        e[j] = C::new(1.0, 0.0);
        let d = solve_linear(jac.clone(), e).ok_or(crate::Error::JacobianSingular)?;
        z_dirs.push(d);
    }

    let w_of = |y: &[C]| plebanski_w(&chart.fiber(y)).map(|w| vec![w]);
    let dir4 = |fp: &FiberPoint, a: usize| -> Result<Vec<C>> { Ok(vertical_fields(fp)?[a].chart_direction()[..4].to_vec()) };
    // (V_f W, V_H W) at y
    let first_vertical = |y: &[C]| -> Result<[C; 2]> {
        let fpy = chart.fiber(y);
        let mut out = [zero; 2];
        for (a, o) in out.iter_mut().enumerate() {
            *o = fd_directional(w_of, y, &dir4(&fpy, a)?, h_inner)?[0];
        }
        Ok(out)
    };
    let period_matrix_inv = |y: &[C]| -> Result<[[C; 2]; 2]> {
        let pd = chart.periods(y)?;
        Ok(inv2([[pd.beta[0], pd.omega[0]], [pd.beta[1], pd.omega[1]]]))
    };
    let pinv = period_matrix_inv(&y0)?;
    let mut wab = [[zero; 2]; 2];
    for a in 0..2 {
        let d = fd_directional(|y| first_vertical(y).map(|v| v.to_vec()), &y0, &dir4(fp, a)?, h_outer)?;
        wab[a] = [d[0], d[1]];
    }
    let sym = 0.5 * (wab[0][1] + wab[1][0]);
    wab[0][1] = sym;
    wab[1][0] = sym;
    let mut tt = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    tt[i][j] += pinv[a][i] * pinv[b][j] * wab[a][b];
                }
            }
        }
    }
    // W_θi as a function on the chart
    let w_theta = |y: &[C]| -> Result<Vec<C>> {
        let v = first_vertical(y)?;
        let pi = period_matrix_inv(y)?;
        Ok((0..2).map(|i| pi[0][i] * v[0] + pi[1][i] * v[1]).collect())
    };
    let mut tz = [[zero; 2]; 2];
    for (j, d) in z_dirs.iter().enumerate() {
        let col = fd_directional(w_theta, &y0, d, h_outer)?;
        tz[0][j] = col[0];
        tz[1][j] = col[1];
    }
    Ok(CanonicalHessian { theta_theta: tt, theta_z: tz, kappa: fp.family().pairing_constant() })
}

/// Residual of the Plebański heavenly equation for the coordinate pair (0, 1).
pub fn heavenly_residual(fp: &FiberPoint) -> Result<C> {
    canonical_hessian(fp).map(|h| h.residual(0, 1))
}
