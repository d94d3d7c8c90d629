//! The invariant suite behind `pjoyce check`.

use super::config::JobConfig;
use super::sample::{complex_in, random_base, random_fiber};
use crate::elliptic::EllipticData;
use crate::isomonodromy::{
    apparent_singularity_residual, flow_commutator_defect, flow_vector, oper_closed_form_defect, zero_curvature_residual, FiberPoint, FlowId,
    Normalization, StateIdx,
};
use crate::joyce::{
    heavenly_residual, homogeneity_defect, involution_piii, joyce_connection, k_third_at_zero, k_third_derivatives, k_third_derivatives_fd_ladder,
    plebanski_w, prepotential_s, theta_map, zero_section_gradient, ThetaBackend,
};
use crate::numerics::{Tolerances, C};
use crate::spectral::{bilinear_pairing, Backend, Family};
use crate::tau::dlogtau;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// One verified identity: the largest residual over the sample set against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The identity being tested, in words.
    pub anchor: String,
    pub family: Family,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub error: Option<String>,
}

struct Check {
    name: &'static str,
    anchor: &'static str,
    tolerance: f64,
    families: &'static [Family],
    eval: fn(Family, &mut ChaCha8Rng, &Tolerances) -> Result<f64>,
}

const ALL: &[Family] = &[Family::PIII3, Family::PII, Family::PI];
const ELLIPTIC_K: &[Family] = &[Family::PIII3, Family::PII];

fn bilinear(fam: Family, r: &mut ChaCha8Rng, tol: &Tolerances) -> Result<f64> {
    let b = random_base(r, fam);
    let mut worst = 0.0f64;
    for backend in [Backend::Quadrature, Backend::Elliptic] {
        worst = worst.max((bilinear_pairing(&b, backend, tol)? - fam.pairing_constant()).norm());
    }
    Ok(worst)
}

fn weierstrass(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let (g2, g3) = random_base(r, fam).invariants();
    let ed = EllipticData::new(g2, g3)?;
    let u = ed.half_period_1 * r.gen_range(0.2..1.8) + ed.half_period_2 * r.gen_range(0.2..1.8);
    let (p, dp, _) = ed.eval(u)?;
    Ok((dp * dp - (4.0 * p * p * p - g2 * p - g3)).norm())
}

fn legendre(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let (g2, g3) = random_base(r, fam).invariants();
    let ed = EllipticData::new(g2, g3)?;
    Ok((ed.eta_1 * ed.half_period_2 - ed.eta_2 * ed.half_period_1 - C::new(0.0, PI / 2.0)).norm())
}

fn eps_fiber(fam: Family, r: &mut ChaCha8Rng) -> (FiberPoint, C) {
    let eps = C::from_polar(r.gen_range(0.3..1.5), r.gen_range(-PI..PI));
    let fp = random_fiber(r, fam, true).with_epsilon(eps);
    (fp, complex_in(r, -2.0, 2.0) + 0.1)
}

fn oper(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let (fp, x) = eps_fiber(fam, r);
    oper_closed_form_defect(&fp, x)
}

fn apparent(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let (fp, _) = eps_fiber(fam, r);
    let (a, b) = apparent_singularity_residual(&fp)?;
    Ok(a.norm().max(b.norm()) / (1.0 + fp.p.norm().powi(3) + fp.q.norm().powi(4)))
}

fn zero_curvature(fam: Family, r: &mut ChaCha8Rng, tol: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    zero_curvature_residual(&fp, complex_in(r, -1.5, 1.5) + 0.1, Normalization::Conserving, tol)
}

/// 2.7 minus the measured log-slope of the Heun square defect between h = 1e-2 and 1e-3.
fn commutativity(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    let d = |h| flow_commutator_defect(&fp, FlowId::W1, FlowId::W2, Normalization::Conserving, h);
    Ok(2.7 - (d(1e-2)? / d(1e-3)?).log10())
}

fn k_third(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    let exact = k_third_derivatives(&fp)?.values;
    let (fd, _) = k_third_derivatives_fd_ladder(&fp)?;
    let scale = exact.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(fd.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / scale)
}

fn heavenly(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    Ok(heavenly_residual(&random_fiber(r, fam, true))?.norm())
}

fn theta_backends(fam: Family, r: &mut ChaCha8Rng, tol: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    let a = theta_map(&fp, ThetaBackend::Periods, tol)?;
    let b = theta_map(&fp, ThetaBackend::Uniformization, tol)?;
    Ok(a.distance_mod_lattice(&b))
}

fn involution(fam: Family, r: &mut ChaCha8Rng, tol: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    let inv = involution_piii(&fp)?;
    let a = theta_map(&fp, ThetaBackend::Uniformization, tol)?;
    let b = theta_map(&inv, ThetaBackend::Uniformization, tol)?;
    Ok(a.distance_mod_lattice(&b).max((plebanski_w(&fp)? - plebanski_w(&inv)?).norm()))
}

fn zero_gradient(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let b = random_base(r, fam);
    let g = zero_section_gradient(&b)?;
    let s = prepotential_s(&b)?.gradient;
    Ok((g[0] - s[0]).norm().max((g[1] - s[1]).norm()))
}

fn connection(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    Ok(joyce_connection(&random_base(r, fam))?.flat_defect())
}

fn kttt_at_zero(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    Ok((k_third_at_zero(&random_base(r, fam), 0.1)?[0] + 0.25).norm())
}

fn homogeneity(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, true);
    homogeneity_defect(&fp, C::from_polar(1.0, r.gen_range(-PI..PI)))
}

fn tau_flow(fam: Family, r: &mut ChaCha8Rng, _: &Tolerances) -> Result<f64> {
    let fp = random_fiber(r, fam, false);
    let v = flow_vector(fam, FlowId::W1, Normalization::Painleve, &fp.to_state(), C::new(1.0, 0.0))?;
    let first = if fam == Family::PIII3 { v[StateIdx::T] / fp.base.t } else { v[StateIdx::T] };
    let tangent = [first, v[StateIdx::H], v[StateIdx::Q], v[StateIdx::R]];
    Ok((dlogtau(&fp)?.along_flow(&tangent) - fp.base.h * first).norm())
}

const CHECKS: &[Check] = &[
    Check { name: "riemann-bilinear", anchor: "Riemann bilinear relation: <omega, beta_first> equals the family pairing constant, quadrature and elliptic backends", tolerance: 1e-9, families: ALL, eval: bilinear },
    Check { name: "weierstrass-ode", anchor: "wp'^2 = 4 wp^3 - g2 wp - g3 on the curve invariants", tolerance: 1e-9, families: ALL, eval: weierstrass },
    Check { name: "legendre-relation", anchor: "Legendre relation eta1 omega2 - eta2 omega1 = pi i / 2", tolerance: 1e-10, families: ALL, eval: legendre },
    Check { name: "oper-potential", anchor: "gauge transform of the pencil equals eps^-2 Q0 + eps^-1 Q1 + Q2", tolerance: 1e-8, families: ALL, eval: oper },
    Check { name: "apparent-singularity", anchor: "apparent singularity at x = q has trivial local monodromy", tolerance: 1e-12, families: ALL, eval: apparent },
    Check { name: "zero-curvature", anchor: "isomonodromy zero-curvature equation along w1", tolerance: 1e-7, families: ALL, eval: zero_curvature },
    Check { name: "flow-commutativity", anchor: "w1 and w2 commute: Heun square defect is O(h^3) (value is 2.7 minus the log-slope)", tolerance: 0.0, families: ELLIPTIC_K, eval: commutativity },
    Check { name: "k-third-derivatives", anchor: "closed-form third theta-derivatives of K match finite differences of the theta-map (relative)", tolerance: 1e-6, families: ELLIPTIC_K, eval: k_third },
    Check { name: "heavenly-equation", anchor: "Plebanski heavenly equation in canonical (z, theta) coordinates", tolerance: 1e-5, families: ALL, eval: heavenly },
    Check { name: "theta-backends", anchor: "period-integral and uniformization theta agree modulo the lattice", tolerance: 1e-7, families: ALL, eval: theta_backends },
    Check { name: "involution", anchor: "PIII3 involution shifts theta by a lattice vector and preserves W", tolerance: 1e-10, families: &[Family::PIII3], eval: involution },
    Check { name: "zero-section-gradient", anchor: "theta-gradient of W on the zero section equals the gradient of the prepotential S", tolerance: 1e-5, families: ELLIPTIC_K, eval: zero_gradient },
    Check { name: "joyce-connection-flat", anchor: "linear Joyce connection vanishes in the flat base chart", tolerance: 1e-6, families: ELLIPTIC_K, eval: connection },
    Check { name: "k-ttt-at-zero", anchor: "PII third t-derivative of K on the zero section is -1/4", tolerance: 1e-6, families: &[Family::PII], eval: kttt_at_zero },
    Check { name: "homogeneity", anchor: "W has weight -1 under the Euler rescaling (lambda on the unit circle)", tolerance: 1e-10, families: ALL, eval: homogeneity },
    Check { name: "tau-form-along-flow", anchor: "d log tau along the Painleve flow equals H d(first coordinate) on r = 0", tolerance: 1e-6, families: ALL, eval: tau_flow },
];

/// Run every check that applies to `families` over `job.points` seeded samples each.
pub fn run_checks(job: &JobConfig, families: &[Family]) -> Vec<CheckRecord> {
    let mut jobs = Vec::new();
    for &fam in families {
        for (k, c) in CHECKS.iter().enumerate() {
            if c.families.contains(&fam) {
                jobs.push((fam, k, c));
            }
        }
    }
    jobs.par_iter()
        .map(|&(fam, k, c)| {
            let salt = (fam as usize) * 1_000_000 + k * 10_000;
            let vals: Vec<Result<f64>> = (0..job.points)
                .into_par_iter()
                .map(|i| {
                    let mut r = ChaCha8Rng::seed_from_u64(job.seed_for(salt + i));
                    (c.eval)(fam, &mut r, &job.tol)
                })
                .collect();
            let mut record = CheckRecord {
                name: c.name.into(),
                anchor: c.anchor.into(),
                family: fam,
                max_residual: f64::NEG_INFINITY,
                tolerance: c.tolerance,
                pass: true,
                error: None,
            };
            for v in vals {
                match v {
                    Ok(x) if x.is_finite() => record.max_residual = record.max_residual.max(x),
                    Ok(x) => {
                        record.max_residual = f64::INFINITY;
                        record.error = Some(format!("non-finite residual {x}"));
                    }
                    Err(e) => {
                        record.error.get_or_insert(e.to_string());
                    }
                }
            }
            if record.max_residual == f64::NEG_INFINITY {
                record.max_residual = f64::INFINITY;
            }
            record.pass = record.error.is_none() && record.max_residual < c.tolerance;
            record
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{resolve, ConfigFile, Overrides};

    #[test]
    fn suite_passes_on_two_points() {
        let o = Overrides { points: Some(2), seed: Some(11), ..Overrides::default() };
        let job = resolve(ConfigFile::default(), o, false).unwrap();
        for rec in run_checks(&job, &[Family::PII]) {
            assert!(rec.pass, "{rec:?}");
        }
    }
}
