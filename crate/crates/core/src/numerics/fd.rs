use super::{Tolerances, C};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdResult {
    pub value: C,
    pub error: f64,
}

fn central<F: Fn(&[C]) -> C>(f: &F, point: &[C], dirs: &[Vec<C>], h: f64) -> C {
    let n = dirs.len();
    let mut acc = C::new(0.0, 0.0);
    let mut x = vec![C::new(0.0, 0.0); point.len()];
    for mask in 0u32..(1 << n) {
        let mut sign = 1.0;
        x.copy_from_slice(point);
        for (k, d) in dirs.iter().enumerate() {
            let s = if mask & (1 << k) != 0 { -1.0 } else { 1.0 };
            sign *= s;
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += di * (s * h);
            }
        }
        acc += f(&x) * sign;
    }
    acc / (2.0 * h).powi(n as i32)
}

/// Mixed directional derivative of order `directions.len()` by central differences plus one
/// Richardson level. The base step `tol.fd_step` is widened with the order to balance roundoff.
pub fn fd_derivative<F: Fn(&[C]) -> C>(
    f: F,
    point: &[C],
    directions: &[Vec<C>],
    tol: &Tolerances,
) -> Result<FdResult> {
    let n = directions.len();
    if n == 0 || n > 4 {
        return Err(Error::DegenerateInput(format!("derivative order {n} not in 1..=4")));
    }
    if directions.iter().any(|d| d.len() != point.len()) {
        return Err(Error::DegenerateInput("direction length does not match point".into()));
    }
    // order n steps by fd_step^(1/n): roundoff over hⁿ stays near the first-order level
    let h = tol.fd_step.powf(1.0 / n as f64);
    if h < 1e-8 {
        return Err(Error::StepUnderflow(h));
    }
    let d1 = central(&f, point, directions, h);
    let d2 = central(&f, point, directions, 0.5 * h);
    Ok(FdResult { value: (4.0 * d2 - d1) / 3.0, error: (d2 - d1).norm() / 3.0 })
}

/// Derivative of a vector-valued map along `dir` by central differences with one Richardson level.
/// The step `h` is taken along the normalized direction; errors from `f` propagate.
pub fn fd_directional<F>(f: F, point: &[C], dir: &[C], h: f64) -> Result<Vec<C>>
where
    F: Fn(&[C]) -> Result<Vec<C>>,
{
    fd_directional_levels(f, point, dir, h, 1)
}

/// As [`fd_directional`] with `levels` Richardson extrapolations over the steps h, h/2, …;
/// the truncation error is O(h^(2 levels + 2)).
pub fn fd_directional_levels<F>(f: F, point: &[C], dir: &[C], h: f64, levels: usize) -> Result<Vec<C>>
where
    F: Fn(&[C]) -> Result<Vec<C>>,
{
    let len = dir.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
    if len == 0.0 {
        return Ok(vec![C::new(0.0, 0.0); f(point)?.len()]);
    }
    if h < 1e-8 {
        return Err(Error::StepUnderflow(h));
    }
    let shifted = |k: f64| -> Vec<C> { point.iter().zip(dir).map(|(x, d)| x + d * (k / len)).collect() };
    let diff = |k: f64| -> Result<Vec<C>> {
        let (a, b) = (f(&shifted(k))?, f(&shifted(-k))?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * k)).collect())
    };
    let mut table: Vec<Vec<C>> = (0..=levels).map(|m| diff(h / 2f64.powi(m as i32))).collect::<Result<_>>()?;
    for lvl in 1..=levels {
        let w = 4f64.powi(lvl as i32);
        for m in (lvl..=levels).rev() {
            let prev = table[m - 1].clone();
            for (a, b) in table[m].iter_mut().zip(prev) {
                *a = (w * *a - b) / (w - 1.0);
            }
        }
    }
    Ok(table[levels].iter().map(|d| d * len).collect())
}

#[cfg(test)]
mod tests {
    use super::super::re;
    use super::*;

    #[test]
    fn square_derivative() {
        let r = fd_derivative(|z: &[C]| z[0] * z[0], &[re(1.0)], &[vec![re(1.0)]], &Tolerances::default()).unwrap();
        assert!((r.value - re(2.0)).norm() < 1e-10);
    }

    #[test]
    fn mixed_partial() {
        let dirs = vec![vec![re(1.0), re(0.0)], vec![re(0.0), re(1.0)]];
        let r = fd_derivative(|z: &[C]| z[0] * z[1], &[re(2.0), re(3.0)], &dirs, &Tolerances::default()).unwrap();
        assert!((r.value - re(1.0)).norm() < 1e-9, "{r:?}");
    }

    #[test]
    fn directional_of_vector_map() {
        let f = |z: &[C]| Ok(vec![z[0] * z[1], z[0] * z[0] * z[0]]);
        let d = fd_directional(f, &[re(1.0), re(2.0)], &[re(0.0), re(3.0)], 1e-3).unwrap();
        assert!((d[0] - re(3.0)).norm() < 1e-10 && d[1].norm() < 1e-12);
    }

    #[test]
    fn underflow() {
        let t = Tolerances::default().with_fd_step(1e-9);
        let r = fd_derivative(|z: &[C]| z[0], &[re(0.0)], &[vec![re(1.0)]], &t);
        assert!(matches!(r, Err(Error::StepUnderflow(_))));
    }
}
