use painleve_joyce::isomonodromy::{flow_vector, integrate_flow, FiberPoint, FlowControls, FlowId, Normalization, StateIdx};
use painleve_joyce::joyce::{
    homogeneity_defect, involution_piii, k_third_derivatives, lattice_distance, plebanski_w, theta_inverse, theta_inverse_pair, theta_map,
    ThetaBackend,
};
use painleve_joyce::numerics::{c, fd_derivative, fd_directional, ode_integrate, polyline, quad_path, re, OdeOptions, Tolerances, C};
use painleve_joyce::spectral::{differential_eval, elliptic_periods, BasePoint, Context, CurvePoint, Family, Form};
use painleve_joyce::tau::{dlogtau, dlogtau_closed_form};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cplx(lo: f64, hi: f64) -> impl Strategy<Value = C> {
    (lo..hi, lo..hi).prop_map(|(a, b)| c(a, b))
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::PIII3), Just(Family::PII), Just(Family::PI)]
}

fn base(fam: Family) -> impl Strategy<Value = BasePoint> {
    let t = if fam == Family::PIII3 { (0.5..1.5f64, -0.5..0.5f64).prop_map(|(a, b)| c(a, b)).boxed() } else { cplx(-1.0, 1.0).boxed() };
    let shift = if fam == Family::PIII3 { 2.5 } else { 0.0 };
    (t, cplx(-2.0, 2.0))
        .prop_map(move |(t, h)| BasePoint::new(fam, t, h + shift))
        .prop_filter("regular base", |b| b.check_joyce_regular().is_ok() && b.discriminant().norm() > 1e-1)
}

fn fiber(fam: Family) -> impl Strategy<Value = FiberPoint> {
    (base(fam), 0.4..1.4f64, -PI..PI, any::<bool>(), cplx(-0.4, 0.4))
        .prop_map(|(b, m, a, up, r)| FiberPoint::on_sheet(b, C::from_polar(m, a), if up { 1.0 } else { -1.0 }, r))
        .prop_filter("away from ramification", |fp| fp.p.norm() > 0.2 && plebanski_w(fp).is_ok())
}

fn any_fiber() -> impl Strategy<Value = FiberPoint> {
    family().prop_flat_map(fiber)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_reverses_and_adds(a in cplx(-1.0, 1.0), b in cplx(-1.0, 1.0), m in cplx(-1.0, 1.0)) {
        let tol = Tolerances::default();
        let f = |z: C| (z * z).exp() / (z - c(3.0, 0.5));
        let fwd = quad_path(f, &polyline(&[a, b]), &tol).unwrap();
        let rev = quad_path(f, &polyline(&[b, a]), &tol).unwrap();
        prop_assert!((fwd + rev).norm() < 1e-12 * (1.0 + fwd.norm()));
        let split = quad_path(f, &polyline(&[a, m]), &tol).unwrap() + quad_path(f, &polyline(&[m, b]), &tol).unwrap();
        let joined = quad_path(f, &polyline(&[a, m, b]), &tol).unwrap();
        prop_assert!((split - fwd).norm() < 1e-12 * (1.0 + fwd.norm()));
        prop_assert!((joined - fwd).norm() < 1e-12 * (1.0 + fwd.norm()));
    }

    #[test]
    fn fd_exact_on_cubics(k in prop::array::uniform4(cplx(-2.0, 2.0)), x in cplx(-1.0, 1.0)) {
        let f = move |z: &[C]| k[0] + k[1] * z[0] + k[2] * z[0] * z[0] + k[3] * z[0] * z[0] * z[0];
        let tol = Tolerances::default();
        for (n, want) in [(1, k[1] + 2.0 * k[2] * x + 3.0 * k[3] * x * x), (2, 2.0 * k[2] + 6.0 * k[3] * x), (3, 6.0 * k[3])] {
            let d = fd_derivative(f, &[x], &vec![vec![re(1.0)]; n], &tol).unwrap();
            prop_assert!((d.value - want).norm() < 1e-9, "order {n}: {} vs {want}", d.value);
        }
    }

    #[test]
    fn ode_round_trip(y0 in cplx(-1.0, 1.0), end in cplx(-1.0, 1.0)) {
        let tol = Tolerances::default();
        let field = |t: C, y: &[C]| vec![y[0] * y[0] * 0.3 + t, -y[1] * t];
        let path = [re(0.0), end, re(0.0)];
        let sol = ode_integrate(field, &[y0, re(1.0)], &path, &tol, &OdeOptions::default()).unwrap();
        let last = &sol.last().state;
        prop_assert!((last[0] - y0).norm() + (last[1] - 1.0).norm() < 10.0 * tol.ode_rel * (1.0 + y0.norm()));
    }

    #[test]
    fn differentials_are_odd(fp in any_fiber(), x in cplx(-1.5, 1.5)) {
        let y = fp.base.q0(x).sqrt();
        prop_assume!(y.norm() > 1e-3 && x.norm() > 1e-3 && (x - fp.q).norm() > 1e-3);
        let forms: &[Form] = if fp.family() == Family::PII { &[Form::Lambda, Form::Omega, Form::BetaFirst, Form::BetaAlpha, Form::Theta] } else { &[Form::Lambda, Form::Omega, Form::BetaFirst, Form::Theta] };
        for &form in forms {
            let up = differential_eval(form, Context::Fiber(&fp), CurvePoint { x, y }).unwrap();
            let down = differential_eval(form, Context::Fiber(&fp), CurvePoint { x, y: -y }).unwrap();
            prop_assert!((up + down).norm() < 1e-12 * (1.0 + up.norm()), "{form:?}");
        }
    }

    #[test]
    fn piii3_omega_s_equals_beta_h(b in base(Family::PIII3)) {
        // s = log t, so ∂/∂s = t ∂/∂t
        let pd0 = elliptic_periods(&b).unwrap();
        let at = |y: &[C]| {
            let moved = BasePoint { t: y[0].exp(), h: y[1], ..b };
            let pd = painleve_joyce::spectral::elliptic_periods_near(&moved, &pd0).unwrap();
            Ok(vec![pd.omega[0], pd.omega[1], pd.beta[0], pd.beta[1]])
        };
        let y = [b.t.ln(), b.h];
        let ds = fd_directional(at, &y, &[re(1.0), re(0.0)], 1e-3).unwrap();
        let dh = fd_directional(at, &y, &[re(0.0), re(1.0)], 1e-3).unwrap();
        for i in 0..2 {
            prop_assert!((ds[i] - dh[2 + i]).norm() < 1e-6 * (1.0 + ds[i].norm()), "{} vs {}", ds[i], dh[2 + i]);
        }
    }

    #[test]
    fn pii_trivial_flows_fix_q(fp in fiber(Family::PII), s in cplx(-0.5, 0.5), a in cplx(-0.5, 0.5), eps in cplx(0.3, 1.2)) {
        let mut fp = fp.with_s(s);
        fp.base.alpha = a;
        for flow in [FlowId::W2, FlowId::W3] {
            for norm in [Normalization::Conserving, Normalization::Painleve] {
                let v = flow_vector(Family::PII, flow, norm, &fp.to_state(), 1.0 / eps).unwrap();
                prop_assert_eq!(v[StateIdx::Q], re(0.0));
            }
        }
    }

    #[test]
    fn pii_second_order_equation(fp in fiber(Family::PII), s in cplx(-0.5, 0.5), a in cplx(-0.5, 0.5), eps in cplx(0.5, 1.2)) {
        let mut fp = fp.with_s(s).with_epsilon(eps);
        fp.base.alpha = a;
        let ie = 1.0 / eps;
        let qdot = |y: &[C]| {
            let v = flow_vector(Family::PII, FlowId::W1, Normalization::Conserving, y, ie)?;
            Ok(vec![v[StateIdx::Q] / v[StateIdx::T]])
        };
        let y0 = fp.to_state();
        let v = flow_vector(Family::PII, FlowId::W1, Normalization::Conserving, &y0, ie).unwrap();
        let dir: Vec<C> = v.iter().map(|x| x / v[StateIdx::T]).collect();
        let qdd = fd_directional(qdot, &y0, &dir, 1e-3).unwrap()[0];
        let (q, t) = (fp.q, fp.base.t);
        let rhs = 2.0 * q * q * q + q * t - (a + eps * s);
        prop_assert!((eps * eps * qdd - rhs).norm() < 1e-6 * (1.0 + rhs.norm()), "{} vs {rhs}", eps * eps * qdd);
    }

    #[test]
    fn homogeneity_weight(fp in any_fiber(), arg in -PI..PI) {
        prop_assert!(homogeneity_defect(&fp, C::from_polar(1.0, arg)).unwrap() < 1e-10);
    }

    #[test]
    fn involution_is_a_lattice_shift(fp in fiber(Family::PIII3)) {
        let tol = Tolerances::default();
        let inv = involution_piii(&fp).unwrap();
        let a = theta_map(&fp, ThetaBackend::Uniformization, &tol).unwrap();
        let b = theta_map(&inv, ThetaBackend::Uniformization, &tol).unwrap();
        prop_assert!(a.distance_mod_lattice(&b) < 1e-10);
        prop_assert!((plebanski_w(&fp).unwrap() - plebanski_w(&inv).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn theta_round_trip(fp in any_fiber()) {
        let th = theta_map(&fp, ThetaBackend::Uniformization, &Tolerances::default()).unwrap();
        let back = theta_inverse(&fp.base, &th).unwrap();
        prop_assert!((back.q - fp.q).norm() + (back.p - fp.p).norm() + (back.r - fp.r).norm() < 1e-9);
    }

    #[test]
    fn lattice_distance_is_lattice_invariant(d in prop::array::uniform2(cplx(-1.0, 1.0)), m in -3i32..3, n in -3i32..3, b in base(Family::PII)) {
        let l = painleve_joyce::joyce::theta_lattice(&b).unwrap();
        let shifted = [d[0] + l[0][0] * m as f64 + l[1][0] * n as f64, d[1] + l[0][1] * m as f64 + l[1][1] * n as f64];
        prop_assert!((lattice_distance(shifted, &l) - lattice_distance(d, &l)).abs() < 1e-12);
    }

    #[test]
    fn fourth_theta_derivatives_of_w_and_k(fp in prop_oneof![fiber(Family::PIII3), fiber(Family::PII)]) {
        let tol = Tolerances::default();
        let th = theta_map(&fp, ThetaBackend::Uniformization, &tol).unwrap();
        let base = fp.base;
        let w = |x: &[C]| theta_inverse_pair(&base, x[0], x[1], fp.s).and_then(|f| plebanski_w(&f)).unwrap();
        let k3 = |x: &[C]| Ok(k_third_derivatives(&theta_inverse_pair(&base, x[0], x[1], fp.s)?)?.values.to_vec());
        let x0 = [th.first, th.h];
        let (ef, eh) = (vec![re(1.0), re(0.0)], vec![re(0.0), re(1.0)]);
        let dk_f = fd_directional(k3, &x0, &ef, 1e-3).unwrap();
        let dk_h = fd_directional(k3, &x0, &eh, 1e-3).unwrap();
        // K side: (ffff, fffH, ffHH, fHHH, HHHH)
        let k4 = [dk_f[0], dk_h[0], dk_h[1], dk_h[2], dk_h[3]];
        let scale = k4.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (j, want) in k4.iter().enumerate() {
            let dirs: Vec<Vec<C>> = (0..4).map(|i| if i < 4 - j { ef.clone() } else { eh.clone() }).collect();
            // W is only good to ~1e-13 through the θ inverse, so pick the step where successive
            // estimates along a ladder h = 2e-2 … 3.5e-3 agree best
            let ladder: Vec<C> = [2e-2, 1.4e-2, 1e-2, 7e-3, 5e-3, 3.5e-3]
                .iter()
                .map(|h: &f64| fd_derivative(w, &x0, &dirs, &tol.with_fd_step(h.powi(4))).unwrap().value)
                .collect();
            let best = (0..ladder.len() - 1).min_by(|&a, &b| (ladder[a] - ladder[a + 1]).norm().total_cmp(&(ladder[b] - ladder[b + 1]).norm())).unwrap();
            let got = 0.5 * (ladder[best] + ladder[best + 1]);
            prop_assert!((got - want).norm() < 1e-4 * scale, "component {j}: {got} vs {want}");
        }
    }

    #[test]
    fn tau_form_along_w2(fp in prop_oneof![fiber(Family::PIII3), fiber(Family::PII)]) {
        let fp = FiberPoint { r: re(0.0), ..fp };
        let v = flow_vector(fp.family(), FlowId::W2, Normalization::Conserving, &fp.to_state(), re(0.0)).unwrap();
        let first = if fp.family() == Family::PIII3 { v[StateIdx::T] / fp.base.t } else { v[StateIdx::T] };
        let projected = [first, v[StateIdx::H], re(0.0), re(0.0)];
        let got = dlogtau(&fp).unwrap().along_flow(&projected);
        let want = dlogtau_closed_form(&fp).unwrap().eval(&projected);
        prop_assert!((got - want).norm() < 1e-12 * (1.0 + want.norm()));
    }
}

#[test]
fn chart_switch_row_on_pii_pole() {
    let fp = FiberPoint::on_sheet(BasePoint::new(Family::PII, re(0.0), re(0.3)), re(0.4), 1.0, re(0.0));
    let tr = integrate_flow(&fp, FlowId::W1, Normalization::Conserving, &[re(0.0), re(5.0)], &FlowControls::default()).unwrap();
    assert!(tr.has_chart_switch());
}
