//! Time steppers over a generic right-hand side.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{Model, ModelState};
use crate::scalar::Scalar;

/// Vector-space operations a stepper needs from a state.
pub trait StateVector<T>: Clone + Sized {
    /// `self + a·x`.
    fn axpy(&self, a: T, x: &Self) -> Result<Self>;
    fn max_abs(&self) -> T;
}

/// A semi-discrete system `du/dt = f(u)`.
pub trait Dynamics<T> {
    type State: StateVector<T>;

    fn rhs(&self, state: &Self::State) -> Result<Self::State>;
}

impl<T: Scalar> StateVector<T> for ModelState<T> {
    fn axpy(&self, a: T, x: &Self) -> Result<Self> {
        ModelState::axpy(self, a, x)
    }

    fn max_abs(&self) -> T {
        ModelState::max_abs(self)
    }
}

impl<T: Scalar> Dynamics<T> for Model<T> {
    type State = ModelState<T>;

    fn rhs(&self, state: &ModelState<T>) -> Result<ModelState<T>> {
        Model::rhs(self, state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Rk4,
    ImplicitMidpoint,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rk4 => "rk4",
            Self::ImplicitMidpoint => "implicit_midpoint",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Self::Rk4),
            "implicit_midpoint" => Ok(Self::ImplicitMidpoint),
            _ => Err(format!("unknown integrator scheme `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig<T> {
    pub scheme: Scheme,
    pub dt: T,
    /// Fixed-point tolerance on the max-norm of the state update.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub const DEFAULT_TOLERANCE: f64 = 1e-13;
    pub const DEFAULT_MAX_ITERATIONS: usize = 100;

    pub fn new(scheme: Scheme, dt: T) -> Result<Self> {
        Self {
            scheme,
            dt,
            tolerance: T::of(Self::DEFAULT_TOLERANCE),
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        }
        .validated()
    }

    pub fn rk4(dt: T) -> Result<Self> {
        Self::new(Scheme::Rk4, dt)
    }

    pub fn implicit_midpoint(dt: T) -> Result<Self> {
        Self::new(Scheme::ImplicitMidpoint, dt)
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt.as_f64(),
            });
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: self.tolerance.as_f64(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                value: 0.0,
            });
        }
        Ok(self)
    }

    /// Same scheme and solver settings with a different step. Unvalidated, so a
    /// negative step can be used to run backwards.
    pub fn with_dt(self, dt: T) -> Self {
        Self { dt, ..self }
    }
}

/// Advances `state` by one step of `config.dt`.
pub fn step<T, D>(system: &D, state: &D::State, config: &IntegratorConfig<T>) -> Result<D::State>
where
    T: Scalar,
    D: Dynamics<T>,
{
    match config.scheme {
        Scheme::Rk4 => rk4_step(system, state, config.dt),
        Scheme::ImplicitMidpoint => midpoint_step(system, state, config),
    }
}

/// Takes `steps` steps.
pub fn integrate<T, D>(
    system: &D,
    state: &D::State,
    config: &IntegratorConfig<T>,
    steps: usize,
) -> Result<D::State>
where
    T: Scalar,
    D: Dynamics<T>,
{
    let mut u = state.clone();
    for _ in 0..steps {
        u = step(system, &u, config)?;
    }
    Ok(u)
}

fn rk4_step<T: Scalar, D: Dynamics<T>>(system: &D, u: &D::State, dt: T) -> Result<D::State> {
    let half = dt * T::half();
    let k1 = system.rhs(u)?;
    let k2 = system.rhs(&u.axpy(half, &k1)?)?;
    let k3 = system.rhs(&u.axpy(half, &k2)?)?;
    let k4 = system.rhs(&u.axpy(dt, &k3)?)?;
    let sixth = dt / T::of(6.0);
    let third = dt / T::of(3.0);
    u.axpy(sixth, &k1)?
        .axpy(third, &k2)?
        .axpy(third, &k3)?
        .axpy(sixth, &k4)
}

/// Solves `k = f(u + dt/2·k)` by fixed-point iteration from `k = f(u)`, then
/// returns `u + dt·k`.
fn midpoint_step<T: Scalar, D: Dynamics<T>>(
    system: &D,
    u: &D::State,
    config: &IntegratorConfig<T>,
) -> Result<D::State> {
    let dt = config.dt;
    let half = dt * T::half();
    let mut k = system.rhs(u)?;
    let mut residual = T::infinity();
    for _ in 0..config.max_iterations {
        let next = system.rhs(&u.axpy(half, &k)?)?;
        residual = next.axpy(-T::one(), &k)?.max_abs() * dt.abs();
        k = next;
        if residual <= config.tolerance {
            return u.axpy(dt, &k);
        }
    }
    Err(Error::NoConvergence {
        iterations: config.max_iterations,
        residual: residual.as_f64(),
    })
}
