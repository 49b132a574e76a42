//! Constitutive laws `rho = R(p)` with the closed-form antiderivatives
//! `Q(p) = ∫ dq / R(q)` and `S(p) = ∫ dq / R(q)²`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Isentropic power law `R(p) = C·p^(1/γ)` on `p > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLaw<T> {
    gamma: T,
    scale: T,
    q_anchor: T,
    s_anchor: T,
}

impl<T: Scalar> PowerLaw<T> {
    /// Anchors default to `p_Q = 0` when `1/R` is integrable at zero (else 1) and `p_S = 1`.
    pub fn new(gamma: T, scale: T) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma.as_f64(),
            });
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                value: scale.as_f64(),
            });
        }
        let q_anchor = if gamma > T::one() { T::zero() } else { T::one() };
        Ok(Self {
            gamma,
            scale,
            q_anchor,
            s_anchor: T::one(),
        })
    }

    pub fn with_anchors(self, q_anchor: T, s_anchor: T) -> Result<Self> {
        let check = |name, anchor: T, exponent: T| {
            let ok = anchor.is_finite()
                && (anchor > T::zero() || (anchor == T::zero() && exponent > T::zero()));
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: anchor.as_f64(),
                })
            }
        };
        check("q_anchor", q_anchor, self.q_exponent())?;
        check("s_anchor", s_anchor, self.s_exponent())?;
        Ok(Self {
            q_anchor,
            s_anchor,
            ..self
        })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn q_anchor(&self) -> T {
        self.q_anchor
    }

    pub fn s_anchor(&self) -> T {
        self.s_anchor
    }

    fn q_exponent(&self) -> T {
        (self.gamma - T::one()) / self.gamma
    }

    fn s_exponent(&self) -> T {
        (self.gamma - T::two()) / self.gamma
    }
}

/// Which internal-energy density to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyForm<T> {
    /// `ρ0·(R(p)·S(p) − Q(p))`.
    CompressibleWave { rho0: T },
    /// `R(p)·Q(p) − p`.
    Euler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateLaw<T> {
    Power(PowerLaw<T>),
    /// Acoustic law with `p = c²·rho`; only the linear-wave model uses it and
    /// it defines no `Q` or `S`.
    Linear { c: T },
}

fn positive<T: Scalar>(quantity: &'static str, p: T) -> Result<()> {
    if p > T::zero() && p.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            quantity,
            value: p.as_f64(),
        })
    }
}

impl<T: Scalar> StateLaw<T> {
    pub fn power(gamma: T, scale: T) -> Result<Self> {
        PowerLaw::new(gamma, scale).map(Self::Power)
    }

    pub fn linear(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidParameter {
                name: "c",
                value: c.as_f64(),
            });
        }
        Ok(Self::Linear { c })
    }

    pub fn as_power(&self) -> Option<&PowerLaw<T>> {
        match self {
            Self::Power(law) => Some(law),
            Self::Linear { .. } => None,
        }
    }

    fn power_only(&self, quantity: &'static str) -> Result<&PowerLaw<T>> {
        self.as_power().ok_or(Error::Unsupported(match quantity {
            "Q" => "the linear law defines no Q",
            "S" => "the linear law defines no S",
            _ => "the linear law defines no internal-energy density",
        }))
    }

    /// `R(p)`.
    pub fn density(&self, p: T) -> Result<T> {
        match self {
            Self::Power(law) => {
                positive("R(p)", p)?;
                Ok(law.scale * p.powf(T::one() / law.gamma))
            }
            Self::Linear { c } => Ok(p / (*c * *c)),
        }
    }

    /// `R'(p)`.
    pub fn density_derivative(&self, p: T) -> Result<T> {
        match self {
            Self::Power(law) => {
                positive("R'(p)", p)?;
                let inv = T::one() / law.gamma;
                Ok(law.scale * inv * p.powf(inv - T::one()))
            }
            Self::Linear { c } => Ok(T::one() / (*c * *c)),
        }
    }

    /// `R⁻¹(rho)`.
    pub fn pressure(&self, rho: T) -> Result<T> {
        match self {
            Self::Power(law) => {
                positive("R^-1(rho)", rho)?;
                Ok((rho / law.scale).powf(law.gamma))
            }
            Self::Linear { c } => Ok(*c * *c * rho),
        }
    }

    /// `Q(p) = ∫_{p_Q}^p dq / R(q)`.
    pub fn q(&self, p: T) -> Result<T> {
        let law = self.power_only("Q")?;
        positive("Q(p)", p)?;
        let (g, c) = (law.gamma, law.scale);
        if g == T::one() {
            return Ok((p / law.q_anchor).ln() / c);
        }
        let e = law.q_exponent();
        Ok(g / (c * (g - T::one())) * (p.powf(e) - law.q_anchor.powf(e)))
    }

    /// `Q'(p) = 1 / R(p)`.
    pub fn q_derivative(&self, p: T) -> Result<T> {
        self.power_only("Q")?;
        Ok(T::one() / self.density(p)?)
    }

    /// `S(p) = ∫_{p_S}^p dq / R(q)²`.
    pub fn s(&self, p: T) -> Result<T> {
        let law = self.power_only("S")?;
        positive("S(p)", p)?;
        let (g, c) = (law.gamma, law.scale);
        if g == T::two() {
            return Ok((p / law.s_anchor).ln() / (c * c));
        }
        let e = law.s_exponent();
        Ok(g / (c * c * (g - T::two())) * (p.powf(e) - law.s_anchor.powf(e)))
    }

    /// `S'(p) = 1 / R(p)²`.
    pub fn s_derivative(&self, p: T) -> Result<T> {
        self.power_only("S")?;
        let r = self.density(p)?;
        Ok(T::one() / (r * r))
    }

    pub fn internal_energy(&self, form: EnergyForm<T>, p: T) -> Result<T> {
        self.power_only("e_int")?;
        let r = self.density(p)?;
        match form {
            EnergyForm::CompressibleWave { rho0 } => Ok(rho0 * (r * self.s(p)? - self.q(p)?)),
            EnergyForm::Euler => Ok(r * self.q(p)? - p),
        }
    }

    /// `de_int/dp`: `ρ0·R'(p)·S(p)` or `R'(p)·Q(p)`.
    pub fn internal_energy_derivative(&self, form: EnergyForm<T>, p: T) -> Result<T> {
        self.power_only("e_int")?;
        let dr = self.density_derivative(p)?;
        match form {
            EnergyForm::CompressibleWave { rho0 } => Ok(rho0 * dr * self.s(p)?),
            EnergyForm::Euler => Ok(dr * self.q(p)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sqrt_law() -> StateLaw<f64> {
        StateLaw::power(2.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn gamma_two_closed_forms() {
        let law = sqrt_law();
        assert_eq!(law.density(4.0).unwrap(), 2.0);
        assert_eq!(law.q(4.0).unwrap(), 4.0);
        assert!(close(law.s(4.0).unwrap(), 4f64.ln(), 1e-15));
        assert!(close(law.s(4.0).unwrap(), 1.386294, 1e-6));
    }

    #[test]
    fn anchors_are_zeros() {
        for gamma in [0.7, 1.0, 1.4, 2.0, 3.0] {
            let law = PowerLaw::<f64>::new(gamma, 1.3)
                .unwrap()
                .with_anchors(if gamma > 1.0 { 0.5 } else { 2.0 }, 0.8)
                .unwrap();
            let sl = StateLaw::Power(law);
            assert!(sl.q(law.q_anchor()).unwrap().abs() < 1e-15, "gamma {gamma}");
            assert!(sl.s(law.s_anchor()).unwrap().abs() < 1e-15, "gamma {gamma}");
        }
        let defaults = PowerLaw::<f64>::new(1.4, 1.0).unwrap();
        assert_eq!(defaults.q_anchor(), 0.0);
        assert_eq!(defaults.s_anchor(), 1.0);
        assert_eq!(PowerLaw::<f64>::new(1.0, 1.0).unwrap().q_anchor(), 1.0);
    }

    #[test]
    fn rejects_bad_anchor() {
        let law = PowerLaw::<f64>::new(1.4, 1.0).unwrap();
        // S is not integrable at zero for gamma < 2
        assert!(law.with_anchors(0.0, 0.0).is_err());
        assert!(law.with_anchors(-1.0, 1.0).is_err());
        assert!(law.with_anchors(0.0, 2.0).is_ok());
    }

    #[test]
    fn euler_internal_energy_gamma_two() {
        let law = sqrt_law();
        assert_eq!(law.internal_energy(EnergyForm::Euler, 4.0).unwrap(), 4.0);
        for p in [0.3, 1.0, 4.0, 17.0] {
            let d = law
                .internal_energy_derivative(EnergyForm::Euler, p)
                .unwrap();
            assert!(close(d, 1.0, 1e-14));
        }
    }

    #[test]
    fn compressible_internal_energy_at_anchor() {
        let law = sqrt_law();
        let e = law
            .internal_energy(EnergyForm::CompressibleWave { rho0: 1.0 }, 1.0)
            .unwrap();
        assert_eq!(e, -2.0);
    }

    #[test]
    fn domain_errors() {
        let law = sqrt_law();
        assert!(matches!(law.density(0.0), Err(Error::OutOfDomain { .. })));
        assert!(law.q(-1.0).is_err());
        assert!(law.pressure(-0.1).is_err());
        assert!(StateLaw::<f64>::power(0.0, 1.0).is_err());
        assert!(StateLaw::<f64>::power(1.4, -1.0).is_err());
        let lin = StateLaw::linear(2.0).unwrap();
        assert!(matches!(lin.q(1.0), Err(Error::Unsupported(_))));
        assert_eq!(lin.pressure(0.5).unwrap(), 2.0);
        assert_eq!(lin.density(2.0).unwrap(), 0.5);
    }

    #[test]
    fn pressure_inverts_density() {
        for gamma in [1.4, 2.0, 3.0] {
            let law = StateLaw::power(gamma, 0.9).unwrap();
            for p in [0.2, 1.0, 3.5] {
                let back = law.pressure(law.density(p).unwrap()).unwrap();
                assert!(close(back, p, 1e-14));
            }
        }
    }

    fn central(f: impl Fn(f64) -> f64, p: f64) -> f64 {
        let d = 1e-5 * p;
        (f(p + d) - f(p - d)) / (2.0 * d)
    }

    proptest! {
        #[test]
        fn antiderivatives_match_finite_differences(
            gamma in prop::sample::select(vec![0.8, 1.0, 1.4, 2.0, 3.0, 5.0]),
            scale in 0.5f64..2.0,
            p in 0.1f64..10.0,
        ) {
            let law = StateLaw::power(gamma, scale).unwrap();
            let r = law.density(p).unwrap();
            let dq = central(|x| law.q(x).unwrap(), p);
            let ds = central(|x| law.s(x).unwrap(), p);
            prop_assert!(close(dq * r, 1.0, 1e-6));
            prop_assert!(close(ds * r * r, 1.0, 1e-6));
            let dr = central(|x| law.density(x).unwrap(), p);
            prop_assert!(close(dr, law.density_derivative(p).unwrap(), 1e-6));
        }

        #[test]
        fn internal_energy_slopes(
            gamma in prop::sample::select(vec![1.4, 2.0, 3.0]),
            p in 0.1f64..10.0,
            rho0 in 0.5f64..2.0,
        ) {
            let law = StateLaw::power(gamma, 1.0).unwrap();
            for form in [EnergyForm::Euler, EnergyForm::CompressibleWave { rho0 }] {
                let fd = central(|x| law.internal_energy(form, x).unwrap(), p);
                let exact = law.internal_energy_derivative(form, p).unwrap();
                prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
            }
        }

        #[test]
        fn laws_are_increasing(gamma in 0.5f64..4.0, p in 0.05f64..20.0) {
            let law = StateLaw::power(gamma, 1.0).unwrap();
            let q = p * 1.01;
            prop_assert!(law.density(q).unwrap() > law.density(p).unwrap());
            prop_assert!(law.q(q).unwrap() > law.q(p).unwrap());
            prop_assert!(law.s(q).unwrap() > law.s(p).unwrap());
        }
    }
}
