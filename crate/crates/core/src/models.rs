//! The four semi-discrete models, their conserved functionals, and the
//! algebraic energy-rate audit.
//!
//! | kind              | prognostic    | energy                                        |
//! |-------------------|---------------|-----------------------------------------------|
//! | scalar wave       | `p`, `w = ṗ`  | `½⟨w,w⟩_c − ½⟨p, LAPL p⟩_c`                   |
//! | linear wave       | `rho`, `v`    | `ρ0/2 ⟨v,v⟩_v + c²/(2ρ0) ⟨rho,rho⟩_c`         |
//! | compressible wave | `rho`, `v`    | `ρ0/2 ⟨v,v⟩_v + ⟨1, ρ0(R S − Q)⟩_c`           |
//! | Euler             | `rho`, `rv`   | `½⟨v, rv⟩_v + ⟨1, R Q − p⟩_c`                 |
//!
//! Euler evolves density and momentum `rv = diag(v)·Interp(rho)`, so mass and
//! momentum are linear functionals of the state; the face velocity is
//! recovered as `rv / Interp(rho)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{CellField, FaceField, StaggeredGrid};
use crate::laws::{EnergyForm, StateLaw};
use crate::operators::{self, DensityKind};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    ScalarWave,
    LinearWave,
    CompressibleWave,
    Euler,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::ScalarWave,
        ModelKind::LinearWave,
        ModelKind::CompressibleWave,
        ModelKind::Euler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ScalarWave => "scalar_wave",
            Self::LinearWave => "linear_wave",
            Self::CompressibleWave => "compressible_wave",
            Self::Euler => "euler",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

/// Physical parameters of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Physics<T> {
    ScalarWave,
    /// `∂rho/∂t + ρ0 DIV v = 0`, `ρ0 ∂v/∂t + GRAD p = 0`, `p = c²·rho`.
    LinearWave { rho0: T, c: T },
    CompressibleWave { rho0: T, law: StateLaw<T> },
    Euler { law: StateLaw<T> },
}

impl<T> Physics<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::ScalarWave => ModelKind::ScalarWave,
            Self::LinearWave { .. } => ModelKind::LinearWave,
            Self::CompressibleWave { .. } => ModelKind::CompressibleWave,
            Self::Euler { .. } => ModelKind::Euler,
        }
    }
}

/// Prognostic fields. Also used for time derivatives of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelState<T> {
    /// Scalar wave: pressure and its time derivative.
    Wave { p: CellField<T>, w: CellField<T> },
    /// Linear and compressible wave: density and face velocity.
    Flow { rho: CellField<T>, v: FaceField<T> },
    /// Euler: density and face momentum.
    Euler { rho: CellField<T>, rv: FaceField<T> },
}

impl<T: Scalar> ModelState<T> {
    /// `self + a·x`.
    pub fn axpy(&self, a: T, x: &Self) -> Result<Self> {
        match (self, x) {
            (Self::Wave { p, w }, Self::Wave { p: dp, w: dw }) => Ok(Self::Wave {
                p: p.axpy(a, dp)?,
                w: w.axpy(a, dw)?,
            }),
            (Self::Flow { rho, v }, Self::Flow { rho: dr, v: dv }) => Ok(Self::Flow {
                rho: rho.axpy(a, dr)?,
                v: v.axpy(a, dv)?,
            }),
            (Self::Euler { rho, rv }, Self::Euler { rho: dr, rv: dm }) => Ok(Self::Euler {
                rho: rho.axpy(a, dr)?,
                rv: rv.axpy(a, dm)?,
            }),
            _ => Err(Error::StateMismatch("mixed state shapes")),
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        match self {
            Self::Wave { p, w } => Self::Wave {
                p: p.scaled(a),
                w: w.scaled(a),
            },
            Self::Flow { rho, v } => Self::Flow {
                rho: rho.scaled(a),
                v: v.scaled(a),
            },
            Self::Euler { rho, rv } => Self::Euler {
                rho: rho.scaled(a),
                rv: rv.scaled(a),
            },
        }
    }

    pub fn max_abs(&self) -> T {
        match self {
            Self::Wave { p, w } => p.max_abs().max(w.max_abs()),
            Self::Flow { rho, v } => rho.max_abs().max(v.max_abs()),
            Self::Euler { rho, rv } => rho.max_abs().max(rv.max_abs()),
        }
    }

    pub fn is_finite(&self) -> bool {
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        match self {
            Self::Wave { p, w } => finite(p.values()) && finite(w.values()),
            Self::Flow { rho, v } => finite(rho.values()) && finite(v.values()),
            Self::Euler { rho, rv } => finite(rho.values()) && finite(rv.values()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub kinetic: T,
    pub internal: T,
    pub total: T,
    pub mass: T,
    pub momentum: T,
}

/// A rate that should vanish, with the magnitude of the terms that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateAudit<T> {
    pub rate: T,
    pub scale: T,
}

impl<T: Scalar> RateAudit<T> {
    /// `|rate| / scale`, zero when both vanish.
    pub fn relative(&self) -> T {
        if self.rate == T::zero() {
            T::zero()
        } else {
            self.rate.abs() / self.scale
        }
    }
}

/// Intermediate quantities of the Euler right-hand side.
#[derive(Clone, Debug)]
pub struct EulerTendencies<T> {
    pub pressure: CellField<T>,
    /// Face velocity `rv / Interp(rho)`.
    pub velocity: FaceField<T>,
    /// Chain-rule face density `r = Δp / ΔQ`.
    pub face_density: FaceField<T>,
    /// Mass flux `m = diag(r)·v`.
    pub mass_flux: FaceField<T>,
    pub advection: FaceField<T>,
    pub pressure_gradient: FaceField<T>,
    pub interp_rho: FaceField<T>,
    pub drho: CellField<T>,
    pub drv: FaceField<T>,
    pub dv: FaceField<T>,
}

#[derive(Clone, Debug)]
pub struct Model<T> {
    grid: StaggeredGrid<T>,
    physics: Physics<T>,
}

fn positive_param<T: Scalar>(name: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: value.as_f64(),
        })
    }
}

fn abs_dot<T: Scalar>(w: &[T], a: &[T], b: &[T]) -> T {
    w.iter()
        .zip(a)
        .zip(b)
        .fold(T::zero(), |acc, ((&w, &a), &b)| acc + w * (a * b).abs())
}

fn abs_sum<T: Scalar>(w: &[T], a: &[T]) -> T {
    w.iter()
        .zip(a)
        .fold(T::zero(), |acc, (&w, &a)| acc + w * a.abs())
}

impl<T: Scalar> Model<T> {
    pub fn new(grid: StaggeredGrid<T>, physics: Physics<T>) -> Result<Self> {
        match &physics {
            Physics::ScalarWave => {}
            Physics::LinearWave { rho0, c } => {
                positive_param("rho0", *rho0)?;
                positive_param("c", *c)?;
            }
            Physics::CompressibleWave { rho0, law } => {
                positive_param("rho0", *rho0)?;
                if law.as_power().is_none() {
                    return Err(Error::Unsupported("compressible wave needs a power law"));
                }
            }
            Physics::Euler { law } => {
                if law.as_power().is_none() {
                    return Err(Error::Unsupported("Euler needs a power law"));
                }
            }
        }
        if matches!(
            physics,
            Physics::CompressibleWave { .. } | Physics::Euler { .. }
        ) && grid.dims() != 1
        {
            return Err(Error::Unsupported(
                "compressible-wave and Euler models are 1-D only",
            ));
        }
        Ok(Self { grid, physics })
    }

    pub fn grid(&self) -> &StaggeredGrid<T> {
        &self.grid
    }

    pub fn physics(&self) -> &Physics<T> {
        &self.physics
    }

    pub fn kind(&self) -> ModelKind {
        self.physics.kind()
    }

    fn min_spacing(&self) -> T {
        (0..self.grid.dims())
            .map(|a| self.grid.spacing(a))
            .fold(T::infinity(), T::min)
    }

    /// Rejects states of the wrong shape or from another grid.
    pub fn check_state(&self, state: &ModelState<T>) -> Result<()> {
        match (self.kind(), state) {
            (ModelKind::ScalarWave, ModelState::Wave { p, w }) => {
                self.grid.check_cells(p)?;
                self.grid.check_cells(w)
            }
            (ModelKind::ScalarWave, _) => Err(Error::StateMismatch("scalar_wave")),
            (ModelKind::Euler, ModelState::Euler { rho, rv }) => {
                self.grid.check_cells(rho)?;
                self.grid.check_faces(rv)
            }
            (ModelKind::Euler, _) => Err(Error::StateMismatch("euler")),
            (_, ModelState::Flow { rho, v }) => {
                self.grid.check_cells(rho)?;
                self.grid.check_faces(v)
            }
            (kind, _) => Err(Error::StateMismatch(kind.name())),
        }
    }

    fn flow<'s>(&self, state: &'s ModelState<T>) -> Result<(&'s CellField<T>, &'s FaceField<T>)> {
        self.check_state(state)?;
        match state {
            ModelState::Flow { rho, v } => Ok((rho, v)),
            _ => Err(Error::StateMismatch(self.kind().name())),
        }
    }

    fn conservative<'s>(&self, state: &'s ModelState<T>) -> Result<(&'s CellField<T>, &'s FaceField<T>)> {
        self.check_state(state)?;
        match state {
            ModelState::Euler { rho, rv } => Ok((rho, rv)),
            _ => Err(Error::StateMismatch("euler")),
        }
    }

    fn density<'s>(&self, state: &'s ModelState<T>) -> Result<&'s CellField<T>> {
        self.check_state(state)?;
        match state {
            ModelState::Flow { rho, .. } | ModelState::Euler { rho, .. } => Ok(rho),
            ModelState::Wave { .. } => Err(Error::StateMismatch("scalar_wave")),
        }
    }

    /// State from density and face velocity; Euler stores `diag(v)·Interp(rho)`.
    pub fn flow_state(&self, rho: CellField<T>, v: FaceField<T>) -> Result<ModelState<T>> {
        let state = match self.kind() {
            ModelKind::ScalarWave => return Err(Error::StateMismatch("scalar_wave")),
            ModelKind::Euler => {
                let interp = self.positive_interp(&rho)?;
                ModelState::Euler {
                    rv: v.hadamard(&interp)?,
                    rho,
                }
            }
            _ => ModelState::Flow { rho, v },
        };
        self.check_state(&state)?;
        Ok(state)
    }

    /// Density and face velocity of a flow state.
    pub fn primitive(&self, state: &ModelState<T>) -> Result<(CellField<T>, FaceField<T>)> {
        match self.kind() {
            ModelKind::Euler => {
                let (rho, rv) = self.conservative(state)?;
                let interp = self.positive_interp(rho)?;
                Ok((rho.clone(), rv.zip_with(&interp, |m, r| m / r)?))
            }
            _ => {
                let (rho, v) = self.flow(state)?;
                Ok((rho.clone(), v.clone()))
            }
        }
    }

    fn positive_interp(&self, rho: &CellField<T>) -> Result<FaceField<T>> {
        let interp = operators::interp_c2f(&self.grid, rho)?;
        if let Some(i) = interp.values().iter().position(|&x| !(x > T::zero())) {
            return Err(Error::NonPhysical(format!(
                "interpolated density {} at face {i}",
                interp.values()[i]
            )));
        }
        Ok(interp)
    }

    fn wave<'s>(&self, state: &'s ModelState<T>) -> Result<(&'s CellField<T>, &'s CellField<T>)> {
        self.check_state(state)?;
        match state {
            ModelState::Wave { p, w } => Ok((p, w)),
            _ => Err(Error::StateMismatch("scalar_wave")),
        }
    }

    /// Pressure diagnosed from the state (`p` itself for the scalar wave).
    pub fn pressure(&self, state: &ModelState<T>) -> Result<CellField<T>> {
        match &self.physics {
            Physics::ScalarWave => Ok(self.wave(state)?.0.clone()),
            Physics::LinearWave { c, .. } => Ok(self.flow(state)?.0.scaled(*c * *c)),
            Physics::CompressibleWave { law, .. } | Physics::Euler { law } => {
                self.density(state)?.try_map(|rho| law.pressure(rho))
            }
        }
    }

    /// Euler right-hand side with every intermediate exposed.
    pub fn euler_tendencies(&self, state: &ModelState<T>) -> Result<EulerTendencies<T>> {
        let Physics::Euler { law } = &self.physics else {
            return Err(Error::StateMismatch("euler"));
        };
        let g = &self.grid;
        let (rho, rv) = self.conservative(state)?;
        let pressure = rho.try_map(|x| law.pressure(x))?;
        let interp_rho = self.positive_interp(rho)?;
        let v = rv.zip_with(&interp_rho, |m, r| m / r)?;
        let face_density = operators::face_density(g, &pressure, law, DensityKind::Euler)?;
        let mass_flux = face_density.hadamard(&v)?;
        let drho = operators::div(g, &mass_flux)?.scaled(-T::one());
        let advection = operators::advec(g, &mass_flux, &v)?;
        let pressure_gradient = operators::grad(g, &pressure)?;
        let drv = advection
            .add(&pressure_gradient)?
            .scaled(-T::one());
        let interp_drho = operators::interp_c2f(g, &drho)?;
        // product rule: d(rv) = dv·Interp(rho) + v·Interp(drho)
        let dv = drv
            .sub(&v.hadamard(&interp_drho)?)?
            .zip_with(&interp_rho, |num, den| num / den)?;
        Ok(EulerTendencies {
            velocity: v,
            pressure,
            face_density,
            mass_flux,
            advection,
            pressure_gradient,
            interp_rho,
            drho,
            drv,
            dv,
        })
    }

    /// Time derivative of the prognostic fields.
    pub fn rhs(&self, state: &ModelState<T>) -> Result<ModelState<T>> {
        let g = &self.grid;
        match &self.physics {
            Physics::ScalarWave => {
                let (p, w) = self.wave(state)?;
                Ok(ModelState::Wave {
                    p: w.clone(),
                    w: operators::lapl(g, p)?,
                })
            }
            Physics::LinearWave { rho0, c } => {
                let (rho, v) = self.flow(state)?;
                let p = rho.scaled(*c * *c);
                Ok(ModelState::Flow {
                    rho: operators::div(g, v)?.scaled(-*rho0),
                    v: operators::grad(g, &p)?.scaled(-T::one() / *rho0),
                })
            }
            Physics::CompressibleWave { law, .. } => {
                let (rho, v) = self.flow(state)?;
                let p = rho.try_map(|x| law.pressure(x))?;
                let r = operators::face_density(g, &p, law, DensityKind::CompressibleWave)?;
                let q = p.try_map(|x| law.q(x))?;
                Ok(ModelState::Flow {
                    rho: operators::div_r(g, v, &r)?.scaled(-T::one()),
                    v: operators::grad(g, &q)?.scaled(-T::one()),
                })
            }
            Physics::Euler { .. } => {
                let t = self.euler_tendencies(state)?;
                Ok(ModelState::Euler {
                    rho: t.drho,
                    rv: t.drv,
                })
            }
        }
    }

    /// Euler momentum `rv = diag(v)·Interp(rho)`.
    pub fn momentum_density(&self, state: &ModelState<T>) -> Result<FaceField<T>> {
        Ok(self.conservative(state)?.1.clone())
    }

    pub fn energy(&self, state: &ModelState<T>) -> Result<EnergyBreakdown<T>> {
        let g = &self.grid;
        let half = T::half();
        let (kinetic, internal, mass, momentum) = match &self.physics {
            Physics::ScalarWave => {
                let (p, w) = self.wave(state)?;
                let lp = operators::lapl(g, p)?;
                (
                    half * g.inner_product_cells(w, w)?,
                    -half * g.inner_product_cells(p, &lp)?,
                    T::zero(),
                    T::zero(),
                )
            }
            Physics::LinearWave { rho0, c } => {
                let (rho, v) = self.flow(state)?;
                (
                    half * *rho0 * g.inner_product_faces(v, v)?,
                    *c * *c / (T::two() * *rho0) * g.inner_product_cells(rho, rho)?,
                    g.total_cells(rho)?,
                    *rho0 * g.total_faces(v)?,
                )
            }
            Physics::CompressibleWave { rho0, law } => {
                let (rho, v) = self.flow(state)?;
                let form = EnergyForm::CompressibleWave { rho0: *rho0 };
                let e = self
                    .pressure(state)?
                    .try_map(|p| law.internal_energy(form, p))?;
                (
                    half * *rho0 * g.inner_product_faces(v, v)?,
                    g.total_cells(&e)?,
                    g.total_cells(rho)?,
                    *rho0 * g.total_faces(v)?,
                )
            }
            Physics::Euler { law } => {
                let (rho, v) = self.primitive(state)?;
                let rv = self.momentum_density(state)?;
                let rho = &rho;
                let v = &v;
                let e = self
                    .pressure(state)?
                    .try_map(|p| law.internal_energy(EnergyForm::Euler, p))?;
                (
                    half * g.inner_product_faces(v, &rv)?,
                    g.total_cells(&e)?,
                    g.total_cells(rho)?,
                    g.total_faces(&rv)?,
                )
            }
        };
        Ok(EnergyBreakdown {
            kinetic,
            internal,
            total: kinetic + internal,
            mass,
            momentum,
        })
    }

    /// `dE/dt` obtained by substituting the right-hand side into the exact
    /// differential of the energy functional.
    pub fn energy_rate_audit(&self, state: &ModelState<T>) -> Result<RateAudit<T>> {
        let g = &self.grid;
        let (cw, fw) = (g.cell_weights(), g.face_weights());
        let half = T::half();
        match &self.physics {
            Physics::ScalarWave => {
                let (p, w) = self.wave(state)?;
                let ModelState::Wave { p: dp, w: dw } = self.rhs(state)? else {
                    unreachable!()
                };
                let lp = operators::lapl(g, p)?;
                let ldp = operators::lapl(g, &dp)?;
                let rate = g.inner_product_cells(w, &dw)? - half * g.inner_product_cells(&dp, &lp)?
                    - half * g.inner_product_cells(p, &ldp)?;
                let scale = abs_dot(cw, w.values(), dw.values())
                    + half * abs_dot(cw, dp.values(), lp.values())
                    + half * abs_dot(cw, p.values(), ldp.values());
                Ok(RateAudit { rate, scale })
            }
            Physics::LinearWave { rho0, c } => {
                let (rho, v) = self.flow(state)?;
                let ModelState::Flow { rho: drho, v: dv } = self.rhs(state)? else {
                    unreachable!()
                };
                let k = *c * *c / *rho0;
                let rate = *rho0 * g.inner_product_faces(v, &dv)?
                    + k * g.inner_product_cells(rho, &drho)?;
                let scale = *rho0 * abs_dot(fw, v.values(), dv.values())
                    + k * abs_dot(cw, rho.values(), drho.values());
                Ok(RateAudit { rate, scale })
            }
            Physics::CompressibleWave { rho0, law } => {
                let (_, v) = self.flow(state)?;
                let ModelState::Flow { rho: drho, v: dv } = self.rhs(state)? else {
                    unreachable!()
                };
                let s = self.pressure(state)?.try_map(|p| law.s(p))?;
                let rate = *rho0 * g.inner_product_faces(v, &dv)?
                    + *rho0 * g.total_cells(&s.hadamard(&drho)?)?;
                let scale = *rho0 * abs_dot(fw, v.values(), dv.values())
                    + *rho0 * abs_dot(cw, s.values(), drho.values());
                Ok(RateAudit { rate, scale })
            }
            Physics::Euler { law } => {
                let t = self.euler_tendencies(state)?;
                let v = &t.velocity;
                let q = t.pressure.try_map(|p| law.q(p))?;
                let interp_drho = operators::interp_c2f(g, &t.drho)?;
                let v2 = v.hadamard(v)?;
                let rate = g.inner_product_faces(v, &t.drv)?
                    - half * g.inner_product_faces(&v2, &interp_drho)?
                    + g.total_cells(&q.hadamard(&t.drho)?)?;
                let scale = abs_dot(fw, v.values(), t.advection.values())
                    + abs_dot(fw, v.values(), t.pressure_gradient.values())
                    + half * abs_dot(fw, v2.values(), interp_drho.values())
                    + abs_dot(cw, q.values(), t.drho.values());
                Ok(RateAudit { rate, scale })
            }
        }
    }

    /// `⟨1, ∂rho/∂t⟩_c`; zero by the left null space of `DIV`.
    pub fn mass_rate(&self, state: &ModelState<T>) -> Result<RateAudit<T>> {
        let g = &self.grid;
        let span = T::two() * T::of(g.dims() as f64) / self.min_spacing();
        let flux = match &self.physics {
            Physics::ScalarWave => {
                self.wave(state)?;
                return Ok(RateAudit {
                    rate: T::zero(),
                    scale: T::zero(),
                });
            }
            Physics::LinearWave { rho0, .. } => self.flow(state)?.1.scaled(*rho0),
            Physics::CompressibleWave { law, .. } => {
                let p = self.pressure(state)?;
                let r = operators::face_density(g, &p, law, DensityKind::CompressibleWave)?;
                r.hadamard(self.flow(state)?.1)?
            }
            Physics::Euler { .. } => self.euler_tendencies(state)?.mass_flux,
        };
        let rate = self.rhs(state)?;
        Ok(RateAudit {
            rate: g.total_cells(self.density(&rate)?)?,
            scale: span * abs_sum(g.face_weights(), flux.values()),
        })
    }

    /// Rate of the momentum functional: `⟨1, ρ0 ∂v/∂t⟩_v`, or `⟨1, ∂rv/∂t⟩_v` for Euler.
    pub fn momentum_rate(&self, state: &ModelState<T>) -> Result<RateAudit<T>> {
        let g = &self.grid;
        let (cw, fw) = (g.cell_weights(), g.face_weights());
        let span = T::two() * T::of(g.dims() as f64) / self.min_spacing();
        match &self.physics {
            Physics::ScalarWave => {
                self.wave(state)?;
                Ok(RateAudit {
                    rate: T::zero(),
                    scale: T::zero(),
                })
            }
            Physics::LinearWave { rho0, .. } => {
                let ModelState::Flow { v: dv, .. } = self.rhs(state)? else {
                    unreachable!()
                };
                let p = self.pressure(state)?;
                Ok(RateAudit {
                    rate: *rho0 * g.total_faces(&dv)?,
                    scale: span * abs_sum(cw, p.values()),
                })
            }
            Physics::CompressibleWave { rho0, law } => {
                let ModelState::Flow { v: dv, .. } = self.rhs(state)? else {
                    unreachable!()
                };
                let q = self.pressure(state)?.try_map(|p| law.q(p))?;
                Ok(RateAudit {
                    rate: *rho0 * g.total_faces(&dv)?,
                    scale: *rho0 * span * abs_sum(cw, q.values()),
                })
            }
            Physics::Euler { .. } => {
                let t = self.euler_tendencies(state)?;
                let advective = T::two() * span * t.velocity.max_abs() * abs_sum(fw, t.mass_flux.values());
                Ok(RateAudit {
                    rate: g.total_faces(&t.drv)?,
                    scale: span * abs_sum(cw, t.pressure.values()) + advective,
                })
            }
        }
    }

    /// Central difference of the total energy along the right-hand side:
    /// `(E(u + δt·f) − E(u − δt·f)) / (2δt)`.
    pub fn finite_difference_energy_check(&self, state: &ModelState<T>, dt: T) -> Result<T> {
        let f = self.rhs(state)?;
        let forward = self.energy(&state.axpy(dt, &f)?)?.total;
        let backward = self.energy(&state.axpy(-dt, &f)?)?.total;
        Ok((forward - backward) / (T::two() * dt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, l: f64) -> StaggeredGrid<f64> {
        StaggeredGrid::new_1d(n, l).unwrap()
    }

    fn flow(m: &Model<f64>, rho: &[f64], v: &[f64]) -> ModelState<f64> {
        let g = m.grid();
        m.flow_state(
            CellField::new(g, rho.to_vec()).unwrap(),
            FaceField::new(g, v.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn sqrt_law() -> StateLaw<f64> {
        StateLaw::power(2.0, 1.0).unwrap()
    }

    #[test]
    fn linear_wave_hand_example() {
        let g = grid(4, 4.0);
        let m = Model::new(g.clone(), Physics::LinearWave { rho0: 1.0, c: 1.0 }).unwrap();
        let s = flow(&m, &[1.0, 0.0, -1.0, 0.0], &[0.0; 4]);
        let ModelState::Flow { rho, v } = m.rhs(&s).unwrap() else {
            panic!()
        };
        assert_eq!(rho.values(), &[0.0; 4]);
        assert_eq!(v.values(), &[-1.0, 1.0, 1.0, -1.0]);
        let e = m.energy(&s).unwrap();
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.internal, 1.0);
        assert_eq!(e.total, 1.0);
    }

    #[test]
    fn euler_momentum_and_energy() {
        let g = grid(4, 4.0);
        let m = Model::new(g.clone(), Physics::Euler { law: sqrt_law() }).unwrap();
        let s = flow(&m, &[1.0, 3.0, 1.0, 3.0], &[2.0; 4]);
        assert_eq!(m.momentum_density(&s).unwrap().values(), &[4.0; 4]);

        let s = flow(&m, &[1.0; 4], &[1.0; 4]);
        let e = m.energy(&s).unwrap();
        assert_eq!(e.kinetic, 2.0);
        assert_eq!(e.internal, 4.0);
        assert_eq!(e.total, 6.0);
        assert_eq!(e.mass, 4.0);
        assert_eq!(e.momentum, 4.0);
    }

    #[test]
    fn scalar_wave_zero_energy() {
        let g = grid(5, 1.0);
        let m = Model::new(g.clone(), Physics::ScalarWave).unwrap();
        let s = ModelState::Wave {
            p: CellField::zeros(&g),
            w: CellField::zeros(&g),
        };
        assert_eq!(m.energy(&s).unwrap().total, 0.0);
        assert_eq!(m.energy_rate_audit(&s).unwrap().rate, 0.0);
    }

    #[test]
    fn equilibria_are_steady() {
        let g = grid(6, 1.5);
        let law = StateLaw::power(1.4, 1.0).unwrap();
        let models = [
            Physics::LinearWave { rho0: 1.3, c: 0.7 },
            Physics::CompressibleWave { rho0: 1.3, law },
            Physics::Euler { law },
        ];
        for physics in models {
            let m = Model::new(g.clone(), physics).unwrap();
            let s = flow(&m, &[1.7; 6], &[0.0; 6]);
            let d = m.rhs(&s).unwrap();
            assert_eq!(d.max_abs(), 0.0, "{}", m.kind());
            assert_eq!(m.energy_rate_audit(&s).unwrap().rate, 0.0);
            assert_eq!(m.finite_difference_energy_check(&s, 1e-5).unwrap(), 0.0);
        }
        let m = Model::new(g.clone(), Physics::ScalarWave).unwrap();
        let s = ModelState::Wave {
            p: CellField::constant(&g, 2.0),
            w: CellField::zeros(&g),
        };
        assert_eq!(m.rhs(&s).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn euler_uniform_flow_is_steady() {
        let g = grid(6, 1.0);
        let m = Model::new(g.clone(), Physics::Euler { law: sqrt_law() }).unwrap();
        let s = flow(&m, &[2.0; 6], &[0.5; 6]);
        assert!(m.rhs(&s).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn euler_product_rule_recovers_momentum_rate() {
        let g = grid(8, 1.0);
        let m = Model::new(g.clone(), Physics::Euler { law: sqrt_law() }).unwrap();
        let rho: Vec<f64> = (0..8).map(|i| 1.0 + 0.3 * (i as f64).sin()).collect();
        let v: Vec<f64> = (0..8).map(|i| 0.2 * (0.7 * i as f64).cos()).collect();
        let s = flow(&m, &rho, &v);
        let t = m.euler_tendencies(&s).unwrap();
        let ir = operators::interp_c2f(&g, &CellField::new(&g, rho).unwrap()).unwrap();
        assert!(t.velocity.values().iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-15));
        let idr = operators::interp_c2f(&g, &t.drho).unwrap();
        for (i, vi) in v.iter().enumerate() {
            let lhs = t.dv.values()[i] * ir.values()[i] + vi * idr.values()[i];
            assert!((lhs - t.drv.values()[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn euler_rejects_vacuum() {
        let g = grid(4, 1.0);
        let m = Model::new(g.clone(), Physics::Euler { law: sqrt_law() }).unwrap();
        let s = flow(&m, &[1.0, -0.5, 1.0, 1.0], &[0.0; 4]);
        assert!(matches!(m.rhs(&s), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn model_validation() {
        let g2 = StaggeredGrid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        assert!(Model::new(g2.clone(), Physics::Euler { law: sqrt_law() }).is_err());
        assert!(Model::new(g2.clone(), Physics::LinearWave { rho0: 1.0, c: 1.0 }).is_ok());
        let g = grid(4, 1.0);
        assert!(Model::new(g.clone(), Physics::LinearWave { rho0: 0.0, c: 1.0 }).is_err());
        let lin = StateLaw::linear(1.0).unwrap();
        assert!(Model::new(g.clone(), Physics::Euler { law: lin }).is_err());

        let m = Model::new(g.clone(), Physics::ScalarWave).unwrap();
        let s = ModelState::Flow {
            rho: CellField::constant(&g, 1.0),
            v: FaceField::zeros(&g),
        };
        assert!(matches!(m.rhs(&s), Err(Error::StateMismatch(_))));
        assert!(m.flow_state(CellField::constant(&g, 1.0), FaceField::zeros(&g)).is_err());
        let other = grid(4, 1.0);
        let s = ModelState::Wave {
            p: CellField::zeros(&other),
            w: CellField::zeros(&other),
        };
        assert!(matches!(m.rhs(&s), Err(Error::GridMismatch { .. })));
    }

    #[test]
    fn model_kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("navier_stokes".parse::<ModelKind>().is_err());
    }
}
