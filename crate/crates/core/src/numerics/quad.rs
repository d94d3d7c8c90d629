use super::{PathSegment, SingularityHint, Tolerances, C};
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

// maps u in [0,1] onto the segment, returning (z, dz/du)
fn chart(seg: &PathSegment, u: f64) -> (C, C) {
    let d = seg.end - seg.start;
    match seg.hint {
        SingularityHint::None => (seg.start + d * u, d),
        SingularityHint::InverseSqrtAtStart => (seg.start + d * (u * u), d * (2.0 * u)),
        SingularityHint::InverseSqrtAtEnd => {
            let v = 1.0 - u;
            (seg.end - d * (v * v), d * (2.0 * v))
        }
    }
}

struct Piece {
    seg: usize,
    a: f64,
    b: f64,
    value: C,
    err: f64,
    abs: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn kronrod<F: Fn(C) -> C>(f: &F, path: &[PathSegment], seg: usize, a: f64, b: f64) -> Result<Piece> {
    let s = &path[seg];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |u: f64| -> Result<C> {
        let (z, dz) = chart(s, u);
        let v = f(z) * dz;
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonConvergence(format!("non-finite integrand at z = {z}")))
        }
    };
    let fc = eval(mid)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = eval(mid - x)?;
        let f2 = eval(mid + x)?;
        k += (f1 + f2) * WGK[j];
        abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            g += (f1 + f2) * WG[j / 2];
        }
    }
    Ok(Piece { seg, a, b, value: k * half, err: ((k - g) * half).norm(), abs: abs * half })
}

/// Integrate `f` along a piecewise-linear path with globally adaptive Gauss-Kronrod (7/15).
pub fn quad_path<F: Fn(C) -> C>(f: F, path: &[PathSegment], tol: &Tolerances) -> Result<C> {
    if path.is_empty() {
        return Ok(C::new(0.0, 0.0));
    }
    for s in path {
        if s.start == s.end {
            return Err(Error::DegenerateInput("zero-length path segment".into()));
        }
    }
    let mut heap = BinaryHeap::new();
    for seg in 0..path.len() {
        heap.push(kronrod(&f, path, seg, 0.0, 1.0)?);
    }
    let mut count = heap.len();
    loop {
        let (mut total, mut err, mut abs) = (C::new(0.0, 0.0), 0.0, 0.0);
        for p in heap.iter() {
            total += p.value;
            err += p.err;
            abs += p.abs;
        }
        let target = (tol.quad_rel * total.norm()).max(1e-15 * abs);
        if err <= target {
            return Ok(total);
        }
        if count > MAX_INTERVALS {
            return Err(Error::NonConvergence(format!(
                "{count} subintervals, error estimate {err:e} vs target {target:e}"
            )));
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&f, path, worst.seg, worst.a, mid)?);
        heap.push(kronrod(&f, path, worst.seg, mid, worst.b)?);
        count += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{polygon, re, reverse_path, I};
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inverse_sqrt_start() {
        let path = [PathSegment::with_hint(re(0.0), re(1.0), SingularityHint::InverseSqrtAtStart)];
        let v = quad_path(|z: C| 1.0 / z.sqrt(), &path, &Tolerances::default()).unwrap();
        assert!((v - re(2.0)).norm() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_end() {
        let path = [PathSegment::with_hint(re(0.0), re(1.0), SingularityHint::InverseSqrtAtEnd)];
        let v = quad_path(|z: C| 1.0 / (1.0 - z).sqrt(), &path, &Tolerances::default()).unwrap();
        assert!((v - re(2.0)).norm() < 1e-12);
    }

    #[test]
    fn residue_on_square() {
        let sq = polygon(&[re(1.0) - I, re(1.0) + I, -re(1.0) + I, -re(1.0) - I]);
        let v = quad_path(|z: C| 1.0 / z, &sq, &Tolerances::default()).unwrap();
        assert!((v - 2.0 * PI * I).norm() < 1e-10);
    }

    #[test]
    fn reversal_negates() {
        let p = polygon(&[re(2.0), I * 2.0, re(-2.0)]);
        let f = |z: C| (z * z).exp() / (z - C::new(0.3, 0.5));
        let t = Tolerances::default().with_quad(1e-13);
        let a = quad_path(f, &p, &t).unwrap();
        let b = quad_path(f, &reverse_path(&p), &t).unwrap();
        assert!((a + b).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn pole_on_path_fails() {
        let path = [PathSegment::new(re(-1.0), re(1.0))];
        assert!(quad_path(|z: C| 1.0 / (z * z), &path, &Tolerances::default()).is_err());
    }
}
