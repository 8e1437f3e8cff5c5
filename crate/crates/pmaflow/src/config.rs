//! TOML run configuration: a named built-in domain, grid settings, and the
//! problem data either as a named preset or as named scalar fields.

use std::path::Path;

use anyhow::{bail, Context, Result};
use pmaflow_core::corpus::{self, sq};
use pmaflow_core::elliptic::{EllipticConfig, EllipticProblem};
use pmaflow_core::field::FnField;
use pmaflow_core::solver::TimeStep;
use pmaflow_core::{tol, Discretization, DomainSpec, FrameSet, Point, ProblemData, SolverConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub problem: ProblemConfig,
    pub solver: SolverSection,
    pub limit: Option<LimitConfig>,
    pub barriers: BarrierSection,
    pub regularize: RegularizeSection,
    pub admissible: AdmissibleSection,
    pub elliptic: EllipticSection,
    pub converge: ConvergeSection,
    pub analyze: AnalyzeSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball {
        #[serde(default = "one_dim")]
        n: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    /// `Σ w_k |z_k|² < 1`.
    Ellipsoid { weights: Vec<f64> },
    Polydisc {
        #[serde(default = "one_dim")]
        n: usize,
        exponent: f64,
        blend: f64,
    },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Ball { n: 1, radius: 1.0 }
    }
}

fn one_dim() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub frames: usize,
    pub penalty: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { h: 0.1, frames: tol::DEFAULT_FRAMES, penalty: tol::PENALTY }
    }
}

/// A scalar field `g(t, z)` from a small built-in library.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    /// `a|z|² + c + rate·t`.
    Quadratic {
        #[serde(default = "unit")]
        a: f64,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        rate: f64,
    },
    /// `scale·ρ(z)` for the configured domain.
    Defining {
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `log max{|z|², floor}`.
    LogCapped {
        floor: f64,
    },
    /// `a·exp(−|z|²)`.
    Gaussian {
        #[serde(default = "unit")]
        a: f64,
    },
    /// `max{|z|² − level, 0}`.
    ShiftedSquare {
        level: f64,
    },
    /// `a·t`.
    LinearInTime {
        #[serde(default = "unit")]
        a: f64,
    },
    /// `(|z|²)^power`.
    Power {
        power: f64,
    },
}

impl FieldSpec {
    pub fn build(&self, dom: &DomainSpec) -> Result<impl Fn(f64, &Point) -> f64 + Send + Sync + Clone + 'static> {
        let spec = self.clone();
        match spec {
            FieldSpec::LogCapped { floor } if !(floor > 0.0) => bail!("log_capped floor must be positive"),
            FieldSpec::Power { power } if !(power > 0.0) => bail!("power must be positive"),
            _ => {}
        }
        let dom = dom.clone();
        Ok(move |t: f64, x: &Point| match spec {
            FieldSpec::Constant { value } => value,
            FieldSpec::Quadratic { a, c, rate } => a * sq(x) + c + rate * t,
            FieldSpec::Defining { scale } => scale * dom.rho(x),
            FieldSpec::LogCapped { floor } => sq(x).max(floor).ln(),
            FieldSpec::Gaussian { a } => a * (-sq(x)).exp(),
            FieldSpec::ShiftedSquare { level } => (sq(x) - level).max(0.0),
            FieldSpec::LinearInTime { a } => a * t,
            FieldSpec::Power { power } => sq(x).powf(power),
        })
    }
}

/// `F(t, z, r)`.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `a·r`.
    Linear {
        a: f64,
    },
}

impl NonlinearitySpec {
    fn build(&self) -> impl Fn(f64, &Point, f64) -> f64 + Send + Sync + Clone + 'static {
        let s = self.clone();
        move |_, _, r| match s {
            NonlinearitySpec::Zero => 0.0,
            NonlinearitySpec::Constant { value } => value,
            NonlinearitySpec::Linear { a } => a * r,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Linear,
    Stationary,
    Decaying,
    Vanishing,
    Holder,
    Relaxation,
    Reaction,
    Ellipsoid,
    LogCapped,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub preset: Option<Preset>,
    pub horizon: Option<f64>,
    pub u0: Option<FieldSpec>,
    pub phi: Option<FieldSpec>,
    pub f: Option<FieldSpec>,
    pub nonlinearity: NonlinearitySpec,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    pub phi: Option<FieldSpec>,
    pub f: Option<FieldSpec>,
    pub nonlinearity: NonlinearitySpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub cfl: f64,
    pub dt: Option<f64>,
    pub ma_floor: f64,
    pub density_shift: f64,
    pub max_steps: usize,
    pub residual_target: f64,
    pub snapshot_every: f64,
    pub stop_at_steady: bool,
    pub check_bounds: bool,
    /// Write every `stride`-th snapshot.
    pub stride: usize,
    /// Exact solution to measure the error against.
    pub reference: Option<Preset>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            cfl: tol::CFL_FACTOR,
            dt: None,
            ma_floor: d.ma_floor,
            density_shift: d.density_shift,
            max_steps: d.max_steps,
            residual_target: d.residual_target,
            snapshot_every: d.snapshot_every,
            stop_at_steady: d.stop_at_steady,
            check_bounds: d.check_bounds,
            stride: 1,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSection {
    pub eps: f64,
    pub times: Vec<f64>,
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self { eps: 0.2, times: vec![0.0, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizeSection {
    pub k: f64,
    /// Lipschitz check tolerance in units of `h`.
    pub tol_h: f64,
}

impl Default for RegularizeSection {
    fn default() -> Self {
        Self { k: 4.0, tol_h: 10.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibleSection {
    pub eps: f64,
    pub threshold: Option<f64>,
}

impl Default for AdmissibleSection {
    fn default() -> Self {
        Self { eps: 0.1, threshold: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    pub burn_in: f64,
    /// Target for the final error; `e^{−T} + 10h` when unset.
    pub target: Option<f64>,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        Self { burn_in: 1.0, target: None }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticSection {
    pub method: EllipticMethod,
}

#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EllipticMethod {
    /// Damped iteration for positive densities, Perron otherwise.
    #[default]
    Auto,
    Damped,
    Perron,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub time_target: f64,
    pub space_target: f64,
    pub seam: Option<f64>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self { time_target: 0.5, space_target: 0.25, seam: None }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        Ok(match &self.domain {
            DomainConfig::Ball { n, radius } => DomainSpec::ball(*n, *radius)?,
            DomainConfig::Ellipsoid { weights } => DomainSpec::ellipsoid(weights)?,
            DomainConfig::Polydisc { n, exponent, blend } => DomainSpec::smoothed_polydisc(*n, *exponent, *blend)?,
        })
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let dom = self.domain()?;
        let frames = FrameSet::lattice(dom.dim(), self.grid.frames)?;
        Ok(Discretization::new(dom, self.grid.h, frames, self.grid.penalty)?)
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            h: self.grid.h,
            time_step: s.dt.map_or(TimeStep::Cfl(s.cfl), TimeStep::Fixed),
            horizon: self.problem.horizon,
            ma_floor: s.ma_floor,
            density_shift: s.density_shift,
            frames: self.grid.frames,
            penalty: self.grid.penalty,
            max_steps: s.max_steps,
            residual_target: s.residual_target,
            snapshot_every: s.snapshot_every,
            stop_at_steady: s.stop_at_steady,
            check_bounds: s.check_bounds,
        }
    }

    pub fn elliptic(&self) -> EllipticConfig {
        EllipticConfig {
            ma_floor: self.solver.ma_floor,
            density_shift: self.solver.density_shift,
            ..EllipticConfig::default()
        }
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    /// Builds the data; explicit fields override the preset's.
    pub fn problem(&self) -> Result<ProblemData> {
        let p = &self.problem;
        let dom = self.domain()?;
        let horizon = p.horizon.unwrap_or(1.0);
        let base = p.preset.map(|k| preset_data(k, &dom, horizon)).transpose()?;
        let custom =
            p.u0.is_some() || p.phi.is_some() || p.f.is_some() || !matches!(p.nonlinearity, NonlinearitySpec::Zero);
        match (base, custom) {
            (Some(b), false) => Ok(b.with_horizon(horizon)),
            (None, false) => bail!("problem needs a preset or the fields u0, phi and f"),
            (base, true) => {
                let get = |name: &str, spec: &Option<FieldSpec>| -> Result<Sampler> {
                    if let Some(s) = spec {
                        return Ok(Box::new(s.build(&dom)?));
                    }
                    match &base {
                        Some(b) => {
                            let b = b.clone();
                            Ok(match name {
                                "u0" => Box::new(move |_, x| b.u0(x)),
                                "phi" => Box::new(move |t, x| b.phi(t, x)),
                                _ => Box::new(move |t, x| b.f(t, x)),
                            })
                        }
                        None => bail!("problem field `{name}` is missing"),
                    }
                };
                let u0 = get("u0", &p.u0)?;
                let phi = get("phi", &p.phi)?;
                let f = get("f", &p.f)?;
                let big_f = p.nonlinearity.build();
                let label = p.preset.map_or("custom".to_string(), |k| format!("{k:?}").to_lowercase());
                Ok(ProblemData::new(&label, move |x| u0(0.0, x), phi, f, big_f, horizon))
            }
        }
    }

    /// Limit data for `elliptic` and `converge`: the `[limit]` section, or the
    /// problem data frozen at the horizon.
    pub fn limit(&self, data: &ProblemData) -> Result<EllipticProblem> {
        let Some(l) = &self.limit else {
            return Ok(EllipticProblem::frozen(data, data.horizon));
        };
        let dom = self.domain()?;
        let (Some(phi), Some(f)) = (&l.phi, &l.f) else {
            bail!("[limit] needs phi and f");
        };
        let (phi, f, big_f) = (phi.build(&dom)?, f.build(&dom)?, l.nonlinearity.build());
        Ok(EllipticProblem::new("limit", move |x| phi(0.0, x), move |x| f(0.0, x), move |x, r| big_f(0.0, x, r)))
    }

    pub fn reference(&self) -> Result<Option<FnField>> {
        Ok(match self.solver.reference {
            None => None,
            Some(Preset::Linear) => Some(corpus::linear_flow_exact()),
            Some(Preset::Decaying) => Some(corpus::decaying_exact()),
            Some(Preset::Stationary) => Some(FnField::new(|_, x| sq(x))),
            Some(other) => bail!("no exact solution is known for preset {other:?}"),
        })
    }
}

type Sampler = Box<dyn Fn(f64, &Point) -> f64 + Send + Sync>;

fn preset_data(kind: Preset, dom: &DomainSpec, horizon: f64) -> Result<ProblemData> {
    let named = |name: &str| -> Result<ProblemData> {
        corpus::time_independent(horizon)
            .into_iter()
            .find(|c| c.name == name)
            .map(|c| c.data)
            .with_context(|| format!("corpus case {name}"))
    };
    Ok(match kind {
        Preset::Linear => corpus::linear_flow(),
        Preset::Stationary => corpus::stationary(),
        Preset::Decaying => corpus::decaying(dom.dim(), horizon),
        Preset::Vanishing => corpus::vanishing_density(horizon),
        Preset::Holder => corpus::holder_ramp(),
        Preset::Relaxation => named("relaxation")?,
        Preset::Reaction => named("reaction")?,
        Preset::Ellipsoid => named("ellipsoid")?,
        Preset::LogCapped => corpus::log_capped().1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_with_defaults() {
        let c = Config::parse("[problem]\npreset = \"linear\"\n").unwrap();
        let d = c.problem().unwrap();
        let x = [0.5, 0.0, 0.0, 0.0];
        assert_eq!(d.u0(&x), 0.25);
        assert_eq!(d.phi(0.5, &x), 1.5);
        assert_eq!(c.discretization().unwrap().h(), 0.1);
        assert_eq!(c.solver().time_step, TimeStep::Cfl(tol::CFL_FACTOR));
    }

    #[test]
    fn named_fields() {
        let text = r#"
            [domain]
            kind = "ellipsoid"
            weights = [1.0, 2.0]
            [problem]
            horizon = 2.0
            u0 = { kind = "defining" }
            phi = { kind = "constant", value = 0.0 }
            f = { kind = "gaussian", a = 2.0 }
            nonlinearity = { kind = "linear", a = 0.5 }
        "#;
        let c = Config::parse(text).unwrap();
        let d = c.problem().unwrap();
        let x = [0.5, 0.0, 0.0, 0.5];
        assert!((d.u0(&x) - (0.25 + 0.5 - 1.0)).abs() < 1e-15);
        assert!((d.f(0.3, &x) - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(d.big_f(0.0, &x, 4.0), 2.0);
        assert_eq!(d.horizon, 2.0);
    }

    #[test]
    fn field_overrides_preset() {
        let c =
            Config::parse("[problem]\npreset = \"stationary\"\nf = { kind = \"constant\", value = 3.0 }\n").unwrap();
        let d = c.problem().unwrap();
        let x = [0.1, 0.2, 0.0, 0.0];
        assert_eq!(d.f(0.0, &x), 3.0);
        assert!((d.u0(&x) - sq(&x)).abs() < 1e-15);
    }

    #[test]
    fn rejects_incomplete_problems() {
        assert!(Config::parse("").unwrap().problem().is_err());
        assert!(Config::parse("[problem]\nu0 = { kind = \"quadratic\" }\n").unwrap().problem().is_err());
        assert!(Config::parse("[grid]\nspacing = 0.1\n").is_err());
    }

    #[test]
    fn frozen_limit_by_default() {
        let c = Config::parse("[problem]\npreset = \"decaying\"\nhorizon = 8.0\n").unwrap();
        let d = c.problem().unwrap();
        let lim = c.limit(&d).unwrap();
        let x = [0.2, 0.0, 0.0, 0.0];
        assert_eq!(lim.f(&x), d.f(8.0, &x));
    }
}
