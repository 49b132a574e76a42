//! Run configuration: a TOML file with `grid`, `law`, `integrator` and
//! `init.<field>` sections.
//!
//! ```toml
//! model = "euler"
//! steps = 500
//! stride = 10
//! t_end = 1.0
//!
//! [grid]
//! n_cells = 16
//! length = 1.0
//!
//! [law]
//! gamma = 1.4
//! scale = 6.0
//!
//! [integrator]
//! scheme = "rk4"
//! dt = 2e-3
//!
//! [init.rho]
//! preset = "sine"
//! amplitude = 0.4
//! offset = 1.0
//!
//! [init.v]
//! preset = "sine"
//! amplitude = 0.4
//! phase = 0.25
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use mimetic_core::integrators::IntegratorConfig as GenericIntegratorConfig;
use mimetic_core::{
    CellField, FaceField, IntegratorConfig, Model, ModelKind, ModelState, Physics, PowerLaw,
    Scheme, StaggeredGrid, StateLaw,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, dims: usize) -> Option<Vec<T>> {
        match self {
            Self::One(x) => Some(vec![x.clone(); dims]),
            Self::Many(v) if v.len() == dims => Some(v.clone()),
            Self::Many(_) => None,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Self::One(_) => None,
            Self::Many(v) => Some(v.len()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub steps: Option<usize>,
    #[serde(default = "one")]
    pub stride: usize,
    pub output: Option<PathBuf>,
    pub t_end: Option<f64>,
    pub grid: GridSection,
    #[serde(default)]
    pub law: LawSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub init: BTreeMap<String, Preset>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dims: Option<usize>,
    pub n_cells: OneOrMany<usize>,
    #[serde(default = "unit_length")]
    pub length: OneOrMany<f64>,
}

fn unit_length() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    /// `power` or `linear`; inferred from the model when absent.
    pub kind: Option<String>,
    pub gamma: Option<f64>,
    pub scale: Option<f64>,
    pub q_anchor: Option<f64>,
    pub s_anchor: Option<f64>,
    pub rho0: Option<f64>,
    pub c: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    pub dt: f64,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

fn default_scheme() -> String {
    "rk4".into()
}

/// Initial profile of one field.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum Preset {
    Uniform {
        #[serde(default)]
        value: f64,
    },
    /// `offset + amplitude·sin(2π(mode·x/L + phase))` along `axis`.
    Sine {
        #[serde(default = "one")]
        mode: usize,
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `offset + amplitude·exp(−|x − center|² / (2 width²))` with periodic distances.
    Gaussian {
        center: OneOrMany<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Preset {
    fn check(&self, field: &str, dims: usize) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(format!("init.{field}: {what}")));
        match self {
            Self::Sine { axis, .. } if *axis >= dims => bad("axis out of range"),
            Self::Gaussian { width, .. } if !(*width > 0.0) => bad("width must be positive"),
            Self::Gaussian { center, .. } if center.expand(dims).is_none() => {
                bad("center needs one coordinate per axis")
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, x: &[f64], lengths: &[f64]) -> f64 {
        match self {
            Self::Uniform { value } => *value,
            Self::Sine {
                mode,
                amplitude,
                offset,
                phase,
                axis,
            } => {
                let theta = 2.0 * PI * (*mode as f64 * x[*axis] / lengths[*axis] + phase);
                offset + amplitude * theta.sin()
            }
            Self::Gaussian {
                center,
                width,
                amplitude,
                offset,
            } => {
                let c = center.expand(x.len()).expect("checked");
                let r2: f64 = x
                    .iter()
                    .zip(&c)
                    .zip(lengths)
                    .map(|((x, c), l)| {
                        let d = (x - c).rem_euclid(*l);
                        d.min(l - d).powi(2)
                    })
                    .sum();
                offset + amplitude * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Everything a run needs, built from a validated [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Setup {
    pub model: Model,
    pub state: ModelState,
    pub integrator: IntegratorConfig,
    pub steps: Option<usize>,
    pub stride: usize,
    pub output: Option<PathBuf>,
    pub t_end: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<Setup, CliError> {
        let config = |e: mimetic_core::Error| CliError::Config(e.to_string());
        let kind: ModelKind = self.model.parse().map_err(CliError::Config)?;
        let grid = self.grid.build()?;
        let physics = self.law.physics(kind)?;
        let model = Model::new(grid, physics).map_err(config)?;
        let state = self.initial_state(&model)?;
        let integrator = self.integrator.build()?;
        if self.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("t_end must be positive, got {t}")));
            }
        }
        Ok(Setup {
            model,
            state,
            integrator,
            steps: self.steps,
            stride: self.stride,
            output: self.output.clone(),
            t_end: self.t_end,
        })
    }

    fn initial_state(&self, model: &Model) -> Result<ModelState, CliError> {
        let g = model.grid();
        let kind = model.kind();
        let names: &[&str] = match kind {
            ModelKind::ScalarWave => &["p", "w"],
            _ => &["rho", "v"],
        };
        if let Some(extra) = self.init.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(CliError::Config(format!(
                "init.{extra}: {kind} has fields {}",
                names.join(", ")
            )));
        }
        let preset = |name: &str| -> Result<Preset, CliError> {
            let p = match self.init.get(name) {
                Some(p) => p.clone(),
                // compressible models need a positive density
                None if name == "rho" && matches!(kind, ModelKind::CompressibleWave | ModelKind::Euler) => {
                    Preset::Uniform { value: 1.0 }
                }
                None => Preset::Uniform { value: 0.0 },
            };
            p.check(name, g.dims())?;
            Ok(p)
        };
        let lengths: Vec<f64> = (0..g.dims()).map(|a| g.length(a)).collect();
        let cells = |name: &str| -> Result<CellField, CliError> {
            let p = preset(name)?;
            CellField::from_fn(g, |x| p.eval(x, &lengths))
                .map_err(|e| CliError::Config(format!("init.{name}: {e}")))
        };
        let faces = |name: &str| -> Result<FaceField, CliError> {
            let p = preset(name)?;
            FaceField::from_fn(g, |_, x| p.eval(x, &lengths))
                .map_err(|e| CliError::Config(format!("init.{name}: {e}")))
        };
        match kind {
            ModelKind::ScalarWave => Ok(ModelState::Wave {
                p: cells("p")?,
                w: cells("w")?,
            }),
            _ => {
                let rho = cells("rho")?;
                if matches!(kind, ModelKind::CompressibleWave | ModelKind::Euler) {
                    if let Some((i, r)) = rho.values().iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
                        return Err(CliError::Config(format!(
                            "init.rho: density must be positive for {kind}, got {r} in cell {i}"
                        )));
                    }
                }
                model
                    .flow_state(rho, faces("v")?)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

impl GridSection {
    fn build(&self) -> Result<StaggeredGrid, CliError> {
        let dims = self
            .dims
            .or(self.n_cells.len())
            .or(self.length.len())
            .unwrap_or(1);
        let mismatch = |what: &str| CliError::Config(format!("grid.{what} does not match {dims} dimension(s)"));
        let n = self.n_cells.expand(dims).ok_or_else(|| mismatch("n_cells"))?;
        let l = self.length.expand(dims).ok_or_else(|| mismatch("length"))?;
        StaggeredGrid::new(&n, &l).map_err(|e| CliError::Config(format!("grid: {e}")))
    }
}

impl LawSection {
    fn physics(&self, kind: ModelKind) -> Result<Physics, CliError> {
        let config = |e: mimetic_core::Error| CliError::Config(format!("law: {e}"));
        let law_kind = self.kind.as_deref().unwrap_or(match kind {
            ModelKind::LinearWave => "linear",
            _ => "power",
        });
        let power = || -> Result<StateLaw, CliError> {
            if law_kind != "power" {
                return Err(CliError::Config(format!("law: {kind} needs a power law, got `{law_kind}`")));
            }
            let mut law = PowerLaw::new(self.gamma.unwrap_or(2.0), self.scale.unwrap_or(1.0)).map_err(config)?;
            if self.q_anchor.is_some() || self.s_anchor.is_some() {
                law = law
                    .with_anchors(
                        self.q_anchor.unwrap_or(law.q_anchor()),
                        self.s_anchor.unwrap_or(law.s_anchor()),
                    )
                    .map_err(config)?;
            }
            Ok(StateLaw::Power(law))
        };
        let rho0 = self.rho0.unwrap_or(1.0);
        Ok(match kind {
            ModelKind::ScalarWave => Physics::ScalarWave,
            ModelKind::LinearWave => {
                if law_kind != "linear" {
                    return Err(CliError::Config(format!("law: linear_wave needs a linear law, got `{law_kind}`")));
                }
                Physics::LinearWave {
                    rho0,
                    c: self.c.unwrap_or(1.0),
                }
            }
            ModelKind::CompressibleWave => Physics::CompressibleWave { rho0, law: power()? },
            ModelKind::Euler => Physics::Euler { law: power()? },
        })
    }
}

impl IntegratorSection {
    fn build(&self) -> Result<IntegratorConfig, CliError> {
        let scheme: Scheme = self.scheme.parse().map_err(CliError::Config)?;
        GenericIntegratorConfig {
            scheme,
            dt: self.dt,
            tolerance: self.tolerance.unwrap_or(IntegratorConfig::DEFAULT_TOLERANCE),
            max_iterations: self.max_iterations.unwrap_or(IntegratorConfig::DEFAULT_MAX_ITERATIONS),
        }
        .validated()
        .map_err(|e| CliError::Config(format!("integrator: {e}")))
    }
}
