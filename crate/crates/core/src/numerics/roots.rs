use super::C;
use crate::{Error, Result};

/// Evaluate a polynomial given ascending-power coefficients.
pub fn poly_eval(coeffs: &[C], x: C) -> C {
    coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, &a| acc * x + a)
}

fn poly_eval_d(coeffs: &[C], x: C) -> (C, C) {
    let mut p = C::new(0.0, 0.0);
    let mut dp = C::new(0.0, 0.0);
    for &a in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

/// All roots of the polynomial with ascending-power coefficients (Aberth-Ehrlich plus Newton polish).
pub fn poly_roots(coeffs: &[C]) -> Result<Vec<C>> {
    let scale = coeffs.iter().fold(0.0f64, |m, a| m.max(a.norm()));
    if scale == 0.0 {
        return Err(Error::DegenerateInput("zero polynomial".into()));
    }
    let mut top = coeffs.len() - 1;
    while coeffs[top].norm() <= 1e-300 {
        top -= 1;
    }
    let c = &coeffs[..=top];
    let deg = top;
    if deg == 0 {
        return Ok(vec![]);
    }
    if deg > 6 {
        return Err(Error::DegenerateInput(format!("degree {deg} exceeds 6")));
    }
    let lead = c[deg];
    let monic: Vec<C> = c.iter().map(|a| a / lead).collect();
    // Cauchy-type radius for the initial circle
    let radius = monic[..deg].iter().fold(0.0f64, |m, a| m.max(a.norm())).powf(1.0 / deg as f64).max(1e-3) + 0.5;
    let mut z: Vec<C> = (0..deg)
        .map(|k| C::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = poly_eval_d(&monic, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut s = C::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1.0));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = poly_eval_d(&monic, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let cand = *zi - step;
            if poly_eval(&monic, cand).norm() < p.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::super::{re, I};
    use super::*;

    fn contains(rs: &[C], x: C) -> bool {
        rs.iter().any(|r| (r - x).norm() < 1e-10)
    }

    #[test]
    fn quadratic() {
        let r = poly_roots(&[re(1.0), re(0.0), re(1.0)]).unwrap();
        assert!(contains(&r, I) && contains(&r, -I));
    }

    #[test]
    fn cubic() {
        let r = poly_roots(&[re(0.0), re(-1.0), re(0.0), re(1.0)]).unwrap();
        assert!(contains(&r, re(0.0)) && contains(&r, re(1.0)) && contains(&r, re(-1.0)));
    }

    #[test]
    fn zero_poly() {
        assert!(poly_roots(&[re(0.0), re(0.0)]).is_err());
    }

    #[test]
    fn trailing_zero_coeffs_stripped() {
        let r = poly_roots(&[re(-2.0), re(1.0), re(0.0)]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - re(2.0)).norm() < 1e-14);
    }
}
