use crate::isomonodromy::FiberPoint;
use crate::joyce::{canonical_hessian, canonical_jacobian};
use crate::numerics::{fd_directional, C};
use crate::spectral::Family;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Names of the family chart (first, H, q, r); first is s = log t for PIII₃ and t otherwise.
pub fn chart_names(family: Family) -> [&'static str; 4] {
    match family {
        Family::PIII3 => ["s", "H", "q", "r"],
        _ => ["t", "H", "q", "r"],
    }
}

/// A 2-form ½ Σ m_ij dx_i ∧ dx_j with m antisymmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoForm {
    pub chart: Vec<String>,
    pub coeffs: Vec<Vec<C>>,
}

impl TwoForm {
    pub fn zero(chart: &[&str]) -> Self {
        let n = chart.len();
        TwoForm { chart: chart.iter().map(|s| s.to_string()).collect(), coeffs: vec![vec![C::new(0.0, 0.0); n]; n] }
    }

    /// Add c dx_i ∧ dx_j.
    pub fn add(&mut self, i: usize, j: usize, c: C) {
        self.coeffs[i][j] += c;
        self.coeffs[j][i] -= c;
    }

    /// Coefficient of dx_i ∧ dx_j (i < j).
    pub fn get(&self, i: usize, j: usize) -> C {
        self.coeffs[i][j]
    }

    pub fn eval(&self, u: &[C], v: &[C]) -> C {
        let mut acc = C::new(0.0, 0.0);
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                acc += u[i] * m * v[j];
            }
        }
        acc
    }

    /// Interior product i_v.
    pub fn contract(&self, v: &[C]) -> OneForm {
        let n = self.chart.len();
        let coeffs = (0..n).map(|j| (0..n).map(|i| v[i] * self.coeffs[i][j]).sum()).collect();
        OneForm { chart: self.chart.clone(), coeffs }
    }

    /// Pullback along a map whose Jacobian has rows indexed by this form's coordinates.
    pub fn pullback(&self, jac: &[Vec<C>], chart: &[&str]) -> TwoForm {
        let n = chart.len();
        let mut out = TwoForm::zero(chart);
        for a in 0..n {
            for b in 0..n {
                let mut acc = C::new(0.0, 0.0);
                for (i, row) in self.coeffs.iter().enumerate() {
                    for (j, m) in row.iter().enumerate() {
                        acc += jac[i][a] * m * jac[j][b];
                    }
                }
                out.coeffs[a][b] = acc;
            }
        }
        out
    }

    pub fn max_diff(&self, other: &TwoForm) -> f64 {
        self.coeffs.iter().flatten().zip(other.coeffs.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0f64, |m, a| m.max(a.norm()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneForm {
    pub chart: Vec<String>,
    pub coeffs: Vec<C>,
}

impl OneForm {
    pub fn eval(&self, v: &[C]) -> C {
        self.coeffs.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        OneForm { chart: self.chart.clone(), coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn max_diff(&self, other: &OneForm) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    /// Ω₀.
    Zero,
    /// 2iΩ_I.
    I,
    /// Ω_∞.
    Infinity,
}

/// Inverse of the pairing matrix η = [[0, κ], [−κ, 0]].
fn omega_matrix(family: Family) -> [[C; 2]; 2] {
    let k = family.pairing_constant();
    let z = C::new(0.0, 0.0);
    [[z, -1.0 / k], [1.0 / k, z]]
}

/// dp in the chart, from 2p dp = dQ₀.
fn dp(fp: &FiberPoint) -> [C; 4] {
    let d = fp.base.q0_partials(fp.q);
    let two_p = 2.0 * fp.p;
    let dfirst = if fp.family() == Family::PIII3 { d[1] * fp.base.t } else { d[1] };
    [dfirst / two_p, d[2] / two_p, d[0] / two_p, C::new(0.0, 0.0)]
}

/// Closed-form 2-forms in the family chart. 2iΩ_I has explicit coefficients for PIII₃ and PII
/// (at s = 0); for PI it is assembled from the canonical coordinates.
pub fn omega_forms(fp: &FiberPoint, kind: FormKind) -> Result<TwoForm> {
    if fp.p.norm() < 1e-14 {
        return Err(Error::SheetSingular(format!("p = 0 at q = {}", fp.q)));
    }
    let names = chart_names(fp.family());
    let (t, q, p, r) = (fp.base.t, fp.q, fp.p, fp.r);
    let mut out = TwoForm::zero(&names);
    match (kind, fp.family()) {
        (FormKind::Zero, _) => out.add(0, 1, C::new(1.0, 0.0)),
        (FormKind::I, Family::PIII3) => {
            let q2 = q * q;
            // the dH∧ds term is −r/(qp); this is what makes the form closed
            out.add(1, 0, -r / (q * p));
            out.add(0, 3, 2.0 * q * p);
            out.add(1, 2, 1.0 / (2.0 * q2 * p));
            out.add(0, 2, (2.0 * r * (t * q2 - 1.0) + t * q2) / (2.0 * p * q2 * q));
        }
        (FormKind::I, Family::PII) => {
            if fp.s.norm() > 0.0 || fp.base.alpha.norm() > 0.0 {
                return Err(Error::Config("tau forms are implemented at alpha = s = 0".into()));
            }
            out.add(0, 1, r / p);
            out.add(0, 3, p);
            out.add(1, 2, 1.0 / p);
            out.add(0, 2, r * (2.0 * q * q * q + t * q) / p + q * q / (2.0 * p));
        }
        (FormKind::I, Family::PI) => return omega_forms_canonical(fp, FormKind::I),
        (FormKind::Infinity, _) => return omega_forms_canonical(fp, FormKind::Infinity),
    }
    Ok(out)
}

/// The 2-forms assembled in canonical coordinates (z, θ) and pulled back to the family chart.
pub fn omega_forms_canonical(fp: &FiberPoint, kind: FormKind) -> Result<TwoForm> {
    let om = omega_matrix(fp.family());
    let mut can = TwoForm::zero(&["z1", "z2", "theta1", "theta2"]);
    match kind {
        FormKind::Zero => {
            for a in 0..2 {
                for b in 0..2 {
                    can.add(a, b, 0.5 * om[a][b]);
                }
            }
        }
        FormKind::I => {
            for a in 0..2 {
                for b in 0..2 {
                    can.add(2 + a, b, -om[a][b]);
                }
            }
        }
        FormKind::Infinity => {
            let hess = canonical_hessian(fp)?;
            for a in 0..2 {
                for b in 0..2 {
                    can.add(2 + a, 2 + b, 0.5 * om[a][b]);
                    can.add(2 + a, b, hess.theta_theta[a][b]);
                    can.add(a, b, hess.theta_z[b][a]);
                }
            }
        }
    }
    let jac: Vec<Vec<C>> = canonical_jacobian(fp)?.iter().map(|r| r.to_vec()).collect();
    Ok(can.pullback(&jac, &chart_names(fp.family())))
}

/// Euler field in the family chart.
pub fn euler_field(fp: &FiberPoint) -> [C; 4] {
    let (h, q, r) = (fp.base.h, fp.q, fp.r);
    match fp.family() {
        Family::PIII3 => [C::new(4.0, 0.0), 2.0 * h, -2.0 * q, C::new(0.0, 0.0)],
        Family::PII => [2.0 * fp.base.t / 3.0, 4.0 * h / 3.0, q / 3.0, -r / 3.0],
        Family::PI => [4.0 * fp.base.t / 5.0, 6.0 * h / 5.0, 2.0 * q / 5.0, -2.0 * r / 5.0],
    }
}

fn require_lagrangian(fp: &FiberPoint) -> Result<()> {
    if fp.r.norm() > 1e-12 {
        Err(Error::OffLagrangian)
    } else {
        Ok(())
    }
}

/// Potentials (Θ₀, 2iΘ_I) on the r = 0 Lagrangian: Θ₀ = i_EΩ₀ + H d(first), 2iΘ_I = i_E(2iΩ_I),
/// both pulled back to r = 0 (the dr coefficient is dropped).
pub fn theta_potentials(fp: &FiberPoint) -> Result<(OneForm, OneForm)> {
    require_lagrangian(fp)?;
    let e = euler_field(fp);
    let mut t0 = omega_forms(fp, FormKind::Zero)?.contract(&e);
    t0.coeffs[0] += fp.base.h;
    let mut ti = omega_forms(fp, FormKind::I)?.contract(&e);
    t0.coeffs[3] = C::new(0.0, 0.0);
    ti.coeffs[3] = C::new(0.0, 0.0);
    Ok((t0, ti))
}

/// The part of d log τ involving Fock–Goncharov coordinates. It is not computed; it is constant
/// along the isomonodromic flows and contributes nothing there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FockGoncharovTerm {
    Unevaluated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DLogTau {
    /// Θ₀ + 2iΘ_I on r = 0.
    pub exact: OneForm,
    pub fock_goncharov: FockGoncharovTerm,
}

impl DLogTau {
    /// Value on a tangent vector to an isomonodromic flow, where the unevaluated term vanishes.
    pub fn along_flow(&self, tangent: &[C]) -> C {
        self.exact.eval(tangent)
    }
}

pub fn dlogtau(fp: &FiberPoint) -> Result<DLogTau> {
    let (t0, ti) = theta_potentials(fp)?;
    Ok(DLogTau { exact: t0.add(&ti), fock_goncharov: FockGoncharovTerm::Unevaluated })
}

/// The closed forms −H ds + p dq + d(4H + 2qp) (PIII₃) and −H dt + p dq + ⅓d(2tH − qp) (PII) in
/// the family chart on r = 0.
pub fn dlogtau_closed_form(fp: &FiberPoint) -> Result<OneForm> {
    require_lagrangian(fp)?;
    let (t, h, q, p) = (fp.base.t, fp.base.h, fp.q, fp.p);
    let dp = dp(fp);
    let z = C::new(0.0, 0.0);
    let coeffs = match fp.family() {
        Family::PIII3 => vec![-h + 2.0 * q * dp[0], 4.0 + 2.0 * q * dp[1], 3.0 * p + 2.0 * q * dp[2], z],
        Family::PII => vec![
            -h / 3.0 - q * dp[0] / 3.0,
            2.0 * t / 3.0 - q * dp[1] / 3.0,
            2.0 * p / 3.0 - q * dp[2] / 3.0,
            z,
        ],
        Family::PI => return Err(Error::FamilyMismatch("no closed tau form recorded for PI".into())),
    };
    Ok(OneForm { chart: chart_names(fp.family()).iter().map(|s| s.to_string()).collect(), coeffs })
}

/// Point of the chart (first, H, q, r) continued from an anchor: t = e^s for PIII₃, p on the
/// anchor's sheet.
pub fn chart_point(anchor: &FiberPoint, y: &[C]) -> FiberPoint {
    let mut fp = *anchor;
    fp.base.t = if anchor.family() == Family::PIII3 { y[0].exp() } else { y[0] };
    fp.base.h = y[1];
    fp.q = y[2];
    fp.r = y[3];
    let p = fp.base.q0(fp.q).sqrt();
    fp.p = if (p - anchor.p).norm() <= (p + anchor.p).norm() { p } else { -p };
    fp
}

pub fn chart_coords(fp: &FiberPoint) -> [C; 4] {
    let first = if fp.family() == Family::PIII3 { fp.base.t.ln() } else { fp.base.t };
    [first, fp.base.h, fp.q, fp.r]
}

/// Finite-difference exterior derivative of a 1-form field given on the chart.
pub fn exterior_derivative_fd<F>(field: F, fp: &FiberPoint, dims: usize, h: f64) -> Result<TwoForm>
where
    F: Fn(&FiberPoint) -> Result<OneForm>,
{
    let y0 = chart_coords(fp);
    let names = chart_names(fp.family());
    let f = |y: &[C]| {
        let mut full = y0;
        full[..dims].copy_from_slice(y);
        field(&chart_point(fp, &full)).map(|o| o.coeffs[..dims].to_vec())
    };
    let mut grads = Vec::with_capacity(dims);
    for i in 0..dims {
        let mut e = vec![C::new(0.0, 0.0); dims];
        e[i] = C::new(1.0, 0.0);
        grads.push(fd_directional(f, &y0[..dims], &e, h)?);
    }
    let mut out = TwoForm::zero(&names[..dims]);
    for i in 0..dims {
        for j in 0..dims {
            out.coeffs[i][j] = grads[i][j] - grads[j][i];
        }
    }
    Ok(out)
}

/// Largest coefficient of dΩ computed by finite differences of the coefficient functions.
pub fn closedness_defect<F>(form: F, fp: &FiberPoint, h: f64) -> Result<f64>
where
    F: Fn(&FiberPoint) -> Result<TwoForm>,
{
    let y0 = chart_coords(fp);
    let f = |y: &[C]| form(&chart_point(fp, y)).map(|w| w.coeffs.into_iter().flatten().collect::<Vec<_>>());
    let mut grads = Vec::with_capacity(4);
    for i in 0..4 {
        let mut e = vec![C::new(0.0, 0.0); 4];
        e[i] = C::new(1.0, 0.0);
        grads.push(fd_directional(f, &y0, &e, h)?);
    }
    let m = |k: usize, i: usize, j: usize| grads[k][4 * i + j];
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            for k in j + 1..4 {
                worst = worst.max((m(i, j, k) + m(j, k, i) + m(k, i, j)).norm());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c, re};
    use crate::spectral::BasePoint;

    fn points() -> Vec<FiberPoint> {
        vec![
            FiberPoint::on_sheet(BasePoint::new(Family::PIII3, c(1.0, 0.2), c(2.5, 0.1)), c(0.7, 0.3), 1.0, c(0.2, 0.1)),
            FiberPoint::on_sheet(BasePoint::new(Family::PII, c(0.8, 0.1), c(1.1, -0.2)), c(0.6, 0.4), -1.0, c(-0.1, 0.3)),
            FiberPoint::on_sheet(BasePoint::new(Family::PI, c(0.8, 0.1), c(1.1, -0.2)), c(0.6, 0.4), 1.0, c(0.2, 0.1)),
        ]
    }

    #[test]
    fn closed_forms_match_canonical_coordinates() {
        for fp in points() {
            for k in [FormKind::Zero, FormKind::I] {
                let a = omega_forms(&fp, k).unwrap();
                let b = omega_forms_canonical(&fp, k).unwrap();
                assert!(a.max_diff(&b) < 1e-7 * (1.0 + a.max_abs()), "{:?} {k:?}", fp.family());
            }
        }
    }

    #[test]
    fn forms_are_closed() {
        for fp in points() {
            let d = closedness_defect(|f| omega_forms(f, FormKind::I), &fp, 1e-3).unwrap();
            assert!(d < 1e-5, "{:?}: {d}", fp.family());
        }
    }

    #[test]
    fn euler_contractions() {
        for fp in points() {
            for (k, fac) in [(FormKind::Zero, 2.0), (FormKind::I, 1.0)] {
                let d = exterior_derivative_fd(|f| Ok(omega_forms(f, k)?.contract(&euler_field(f))), &fp, 4, 1e-3).unwrap();
                let mut w = omega_forms(&fp, k).unwrap();
                w.coeffs.iter_mut().flatten().for_each(|x| *x *= fac);
                assert!(d.max_diff(&w) < 1e-5, "{:?} {k:?}", fp.family());
            }
        }
    }

    #[test]
    fn potentials_and_tau_form() {
        for fp in points() {
            let fp0 = FiberPoint { r: re(0.0), ..fp };
            let (t0, _) = theta_potentials(&fp0).unwrap();
            if fp.family() == Family::PIII3 {
                assert!((t0.coeffs[0] + fp.base.h).norm() < 1e-14 && (t0.coeffs[1] - 4.0).norm() < 1e-14);
            }
            // dΘ restricted to r = 0 reproduces Ω there
            for k in [FormKind::Zero, FormKind::I] {
                let d = exterior_derivative_fd(
                    |f| {
                        let (a, b) = theta_potentials(f)?;
                        Ok(if k == FormKind::Zero { a } else { b })
                    },
                    &fp0,
                    3,
                    1e-3,
                )
                .unwrap();
                let w = omega_forms(&fp0, k).unwrap();
                let restricted = TwoForm { chart: d.chart.clone(), coeffs: w.coeffs[..3].iter().map(|r| r[..3].to_vec()).collect() };
                assert!(d.max_diff(&restricted) < 1e-5, "{:?} {k:?}", fp.family());
            }
            if let Ok(cf) = dlogtau_closed_form(&fp0) {
                assert!(dlogtau(&fp0).unwrap().exact.max_diff(&cf) < 1e-12);
            }
        }
    }

    #[test]
    fn pii_potential_matches_display() {
        let fp = FiberPoint::on_sheet(BasePoint::new(Family::PII, c(0.8, 0.1), c(1.1, -0.2)), c(0.6, 0.4), 1.0, re(0.0));
        let (_, ti) = theta_potentials(&fp).unwrap();
        // (1/3)(2p dq − q dp) with dp expanded on the chart
        let dp = dp(&fp);
        let (q, p) = (fp.q, fp.p);
        let want = [-q * dp[0] / 3.0, -q * dp[1] / 3.0, (2.0 * p - q * dp[2]) / 3.0];
        for k in 0..3 {
            assert!((ti.coeffs[k] - want[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn tau_form_along_flow_is_hamiltonian() {
        use crate::isomonodromy::{flow_vector, FlowId, Normalization, StateIdx};
        for fp in points() {
            let fp0 = FiberPoint { r: re(0.0), ..fp };
            let v = flow_vector(fp.family(), FlowId::W1, Normalization::Painleve, &fp0.to_state(), re(1.0)).unwrap();
            let first = if fp.family() == Family::PIII3 { v[StateIdx::T] / fp.base.t } else { v[StateIdx::T] };
            let tangent = [first, v[StateIdx::H], v[StateIdx::Q], v[StateIdx::R]];
            let val = dlogtau(&fp0).unwrap().along_flow(&tangent);
            assert!((val - fp.base.h * first).norm() < 1e-7, "{:?}", fp.family());
        }
    }

    #[test]
    fn off_lagrangian() {
        assert!(matches!(theta_potentials(&points()[0]), Err(Error::OffLagrangian)));
    }
}
