use crate::isomonodromy::{FlowControls, FlowId, Normalization};
use crate::numerics::{Tolerances, C};
use crate::spectral::{Backend, BasePoint, Family};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::PathBuf;

/// Complex number in a config file: a plain number or a string such as "1-0.5i".
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ConfigComplex {
    Real(f64),
    Text(#[serde(deserialize_with = "de_complex")] C),
}

impl ConfigComplex {
    pub fn value(self) -> C {
        match self {
            ConfigComplex::Real(x) => C::new(x, 0.0),
            ConfigComplex::Text(z) => z,
        }
    }
}

fn de_complex<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<C, D::Error> {
    let s = String::deserialize(d)?;
    parse_complex(&s).map_err(serde::de::Error::custom)
}

pub fn parse_complex(s: &str) -> Result<C> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    t.parse::<C>().map_err(|_| Error::Config(format!("cannot read '{s}' as a complex number")))
}

/// Colon-separated vertices, e.g. "0:5" or "1:2+0.3i:4".
pub fn parse_span(s: &str) -> Result<Vec<C>> {
    let v = s.split(':').map(parse_complex).collect::<Result<Vec<C>>>()?;
    if v.len() < 2 {
        return Err(Error::Config(format!("span '{s}' needs at least two vertices")));
    }
    Ok(v)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub t: Vec<ConfigComplex>,
    pub h: Vec<ConfigComplex>,
    pub alpha: Vec<ConfigComplex>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub q: Vec<ConfigComplex>,
    pub sheet: Option<f64>,
    pub r: Option<ConfigComplex>,
    pub s: Option<ConfigComplex>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub name: Option<FlowId>,
    pub normalization: Option<Normalization>,
    pub span: Option<String>,
    pub switch_threshold: Option<f64>,
    pub detour_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub quad_rel: Option<f64>,
    pub ode_rel: Option<f64>,
    pub fd_step: Option<f64>,
    pub identity_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Contents of a job file. Every field is optional; command-line flags override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub family: Option<Family>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub points: Option<usize>,
    pub epsilon: Option<ConfigComplex>,
    pub backend: Option<Backend>,
    pub grid: GridSection,
    pub fiber: FiberSection,
    pub flow: FlowSection,
    pub tolerances: ToleranceSection,
    pub output: OutputSection,
}

impl ConfigFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// One base point of the grid together with the fiber seeds run on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub base: BasePoint,
    pub q: C,
}

/// Fully resolved job: config file merged with flags, defaults filled in, validated.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub family: Option<Family>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub points: usize,
    pub epsilon: C,
    pub backend: Backend,
    pub grid: Vec<GridPoint>,
    pub sheet: f64,
    pub r: C,
    pub s: C,
    pub flow: FlowId,
    pub normalization: Normalization,
    pub span: Option<Vec<C>>,
    pub tol: Tolerances,
    pub controls: FlowControls,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl JobConfig {
    pub fn family(&self) -> Result<Family> {
        self.family.ok_or_else(|| Error::Config("no family given (--family or `family =` in the config)".into()))
    }

    pub fn span(&self) -> Result<&[C]> {
        self.span.as_deref().ok_or_else(|| Error::Config("no flow span given (--span a:b)".into()))
    }

    /// Seed for the job-local generator of grid point `index`; independent of scheduling.
    pub fn seed_for(&self, index: usize) -> u64 {
        self.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

/// Values given on the command line; `None` leaves the config file (or default) in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub family: Option<Family>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub points: Option<usize>,
    pub epsilon: Option<C>,
    pub backend: Option<Backend>,
    pub t: Option<C>,
    pub h: Option<C>,
    pub alpha: Option<C>,
    pub q: Option<C>,
    pub sheet: Option<f64>,
    pub r: Option<C>,
    pub s: Option<C>,
    pub flow: Option<FlowId>,
    pub normalization: Option<Normalization>,
    pub span: Option<String>,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn values(list: &[ConfigComplex], flag: Option<C>, default: C) -> Vec<C> {
    match flag {
        Some(v) => vec![v],
        None if list.is_empty() => vec![default],
        None => list.iter().map(|z| z.value()).collect(),
    }
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

/// Merge config file and flags. `needs_grid` asks for the base-point grid to be built and
/// regularity-checked (every command except `check`).
pub fn resolve(file: ConfigFile, o: Overrides, needs_grid: bool) -> Result<JobConfig> {
    let family = o.family.or(file.family);
    let ts = &file.tolerances;
    let d = Tolerances::default();
    let tol = Tolerances {
        quad_rel: positive("quad_rel", ts.quad_rel.unwrap_or(d.quad_rel))?,
        ode_rel: positive("ode_rel", ts.ode_rel.unwrap_or(d.ode_rel))?,
        fd_step: positive("fd_step", ts.fd_step.unwrap_or(d.fd_step))?,
        identity_tol: positive("identity_tol", ts.identity_tol.unwrap_or(d.identity_tol))?,
    };
    tol.validate()?;
    let mut controls = FlowControls { tol, ..FlowControls::default() };
    if let Some(x) = file.flow.switch_threshold {
        controls.switch_threshold = positive("switch_threshold", x)?;
    }
    if let Some(x) = file.flow.detour_radius {
        controls.detour_radius = positive("detour_radius", x)?;
    }
    let sheet = o.sheet.or(file.fiber.sheet).unwrap_or(1.0);
    if sheet != 1.0 && sheet != -1.0 {
        return Err(Error::Config(format!("sheet must be +1 or -1, got {sheet}")));
    }
    let threads = o.threads.or(file.threads).or_else(|| std::env::var("PJOYCE_THREADS").ok().and_then(|v| v.parse().ok()));
    if threads == Some(0) {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let points = o.points.or(file.points).unwrap_or(5);
    if points == 0 {
        return Err(Error::Config("points must be at least 1".into()));
    }
    let span = o.span.as_deref().or(file.flow.span.as_deref()).map(parse_span).transpose()?;

    let mut grid = Vec::new();
    if needs_grid {
        let fam = family.ok_or_else(|| Error::Config("no family given (--family or `family =` in the config)".into()))?;
        let zero = C::new(0.0, 0.0);
        let tsv = values(&file.grid.t, o.t, C::new(1.0, 0.0));
        let hsv = values(&file.grid.h, o.h, C::new(1.0, 0.0));
        let asv = values(&file.grid.alpha, o.alpha, zero);
        let qsv = values(&file.fiber.q, o.q, C::new(0.5, 0.0));
        for &t in &tsv {
            for &h in &hsv {
                for &a in &asv {
                    let base = BasePoint::new(fam, t, h).with_alpha(a);
                    base.check_regular().map_err(|e| Error::Config(format!("grid point (t = {t}, H = {h}, alpha = {a}): {e}")))?;
                    for &q in &qsv {
                        grid.push(GridPoint { index: grid.len(), base, q });
                    }
                }
            }
        }
    }

    Ok(JobConfig {
        family,
        seed: o.seed.or(file.seed).unwrap_or(0),
        threads,
        points,
        epsilon: o.epsilon.or(file.epsilon.map(|e| e.value())).unwrap_or(C::new(1.0, 0.0)),
        backend: o.backend.or(file.backend).unwrap_or(Backend::Elliptic),
        grid,
        sheet,
        r: o.r.or(file.fiber.r.map(|z| z.value())).unwrap_or_default(),
        s: o.s.or(file.fiber.s.map(|z| z.value())).unwrap_or_default(),
        flow: o.flow.or(file.flow.name).unwrap_or(FlowId::W1),
        normalization: o.normalization.or(file.flow.normalization).unwrap_or_default(),
        span,
        tol,
        controls,
        report: o.report.or(file.output.report),
        csv: o.csv.or(file.output.csv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1-0.5i").unwrap(), C::new(1.0, -0.5));
        assert_eq!(parse_complex(" 2 ").unwrap(), C::new(2.0, 0.0));
        assert!(parse_complex("x").is_err());
        assert_eq!(parse_span("0:2+1i:5").unwrap().len(), 3);
        assert!(parse_span("3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: ConfigFile = toml::from_str(
            r#"
            family = "pii"
            seed = 3
            [grid]
            t = [0.0, "0.5+0.1i"]
            h = [1.0]
            [fiber]
            q = [0.4, 0.6]
            "#,
        )
        .unwrap();
        let job = resolve(file.clone(), Overrides::default(), true).unwrap();
        assert_eq!(job.grid.len(), 4);
        assert_eq!(job.seed, 3);
        let o = Overrides { t: Some(C::new(2.0, 0.0)), seed: Some(9), ..Overrides::default() };
        let job = resolve(file, o, true).unwrap();
        assert_eq!(job.grid.len(), 2);
        assert_eq!(job.seed, 9);
    }

    #[test]
    fn rejects_bad_input() {
        let bad: std::result::Result<ConfigFile, _> = toml::from_str("colour = 1");
        assert!(bad.is_err());
        let file: ConfigFile = toml::from_str("family = \"piii3\"\n[tolerances]\node_rel = -1.0").unwrap();
        assert!(resolve(file, Overrides::default(), true).is_err());
        // H² = 4t makes the PIII₃ curve singular
        let o = Overrides { family: Some(Family::PIII3), t: Some(C::new(1.0, 0.0)), h: Some(C::new(2.0, 0.0)), ..Overrides::default() };
        assert!(resolve(ConfigFile::default(), o, true).is_err());
    }
}
