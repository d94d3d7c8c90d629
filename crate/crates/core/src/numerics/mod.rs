//! Complex numerical kernel: path quadrature, finite differences, ODE integration, polynomial roots.

mod fd;
mod ode;
mod quad;
mod roots;

pub use fd::{fd_derivative, fd_directional, fd_directional_levels, FdResult};
pub use ode::{ode_integrate, OdeOptions, OdeSample, OdeSolution};
pub use quad::quad_path;
pub use roots::{poly_eval, poly_roots};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C = Complex64;

pub const I: C = C::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}

/// Fixed 17-significant-digit rendering used by every text output.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityHint {
    None,
    InverseSqrtAtStart,
    InverseSqrtAtEnd,
}

/// One straight piece of an integration contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment {
    pub start: C,
    pub end: C,
    pub hint: SingularityHint,
}

impl PathSegment {
    pub fn new(start: C, end: C) -> Self {
        PathSegment { start, end, hint: SingularityHint::None }
    }

    pub fn with_hint(start: C, end: C, hint: SingularityHint) -> Self {
        PathSegment { start, end, hint }
    }

    pub fn reversed(&self) -> Self {
        let hint = match self.hint {
            SingularityHint::None => SingularityHint::None,
            SingularityHint::InverseSqrtAtStart => SingularityHint::InverseSqrtAtEnd,
            SingularityHint::InverseSqrtAtEnd => SingularityHint::InverseSqrtAtStart,
        };
        PathSegment { start: self.end, end: self.start, hint }
    }
}

/// Closed polygon through the given vertices.
pub fn polygon(vertices: &[C]) -> Vec<PathSegment> {
    let n = vertices.len();
    (0..n).map(|k| PathSegment::new(vertices[k], vertices[(k + 1) % n])).collect()
}

/// Open polyline through the given vertices.
pub fn polyline(vertices: &[C]) -> Vec<PathSegment> {
    vertices.windows(2).map(|w| PathSegment::new(w[0], w[1])).collect()
}

pub fn reverse_path(path: &[PathSegment]) -> Vec<PathSegment> {
    path.iter().rev().map(|s| s.reversed()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub quad_rel: f64,
    pub ode_rel: f64,
    pub fd_step: f64,
    pub identity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad_rel: 1e-10, ode_rel: 1e-10, fd_step: 1e-4, identity_tol: 1e-6 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.quad_rel > 0.0
            && self.ode_rel > 0.0
            && self.fd_step > 0.0
            && self.identity_tol > 0.0
            && self.fd_step * self.fd_step > f64::EPSILON;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid tolerances {self:?}")))
        }
    }

    pub fn with_quad(mut self, rel: f64) -> Self {
        self.quad_rel = rel;
        self
    }

    pub fn with_ode(mut self, rel: f64) -> Self {
        self.ode_rel = rel;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }
}

/// Solve a small dense complex linear system by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<C>>, mut b: Vec<C>) -> Option<Vec<C>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Real least squares via normal equations with column scaling.
pub fn least_squares(rows: &[Vec<C>], rhs: &[C]) -> Option<Vec<C>> {
    let m = rows.first()?.len();
    let scale: Vec<f64> = (0..m)
        .map(|j| rows.iter().map(|r| r[j].norm_sqr()).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let mut ata = vec![vec![C::new(0.0, 0.0); m]; m];
    let mut atb = vec![C::new(0.0, 0.0); m];
    for (r, &y) in rows.iter().zip(rhs) {
        for i in 0..m {
            let ri = r[i].conj() / scale[i];
            for j in 0..m {
                ata[i][j] += ri * r[j] / scale[j];
            }
            atb[i] += ri * y;
        }
    }
    let x = solve_linear(ata, atb)?;
    Some(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_solve_small() {
        let a = vec![vec![re(2.0), re(1.0)], vec![re(1.0), c(0.0, 3.0)]];
        let x = solve_linear(a, vec![re(3.0), c(1.0, 3.0)]).unwrap();
        assert!((x[0] - re(1.0)).norm() < 1e-14);
        assert!((x[1] - re(1.0)).norm() < 1e-14);
    }

    #[test]
    fn tolerances_reject_tiny_step() {
        assert!(Tolerances::default().validate().is_ok());
        assert!(Tolerances::default().with_fd_step(1e-9).validate().is_err());
    }
}
