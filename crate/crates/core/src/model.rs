//! Model parameters, thermal grids and shared numeric policy.
//!
//! The model is a single boson `phi` of mass `m` coupled to a single
//! one-component fermion of bare mass `mu` through `lambda * phi * psibar psi`.
//! Everything here is plain data; the other modules consume it.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperature. Zero temperature is its own state, never a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn finite(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Beta::Finite(beta))
        } else {
            Err(Error::param(
                "beta",
                format!("must be positive and finite, got {beta}"),
            ))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// The finite value, or the zero-temperature error.
    pub fn value(&self) -> Result<f64> {
        match *self {
            Beta::Finite(b) => Ok(b),
            Beta::Infinite => Err(Error::ZeroTemperatureGrid),
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") {
            return Ok(Beta::Infinite);
        }
        let v: f64 = t.parse().map_err(|_| {
            Error::param(
                "beta",
                format!("expected a positive number or \"inf\", got {s:?}"),
            )
        })?;
        Beta::finite(v)
    }
}

/// Physical couplings `(m, mu, lambda)` and the inverse temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub mu: f64,
    pub lambda: f64,
    pub beta: Beta,
}

impl ModelParams {
    pub fn new(m: f64, mu: f64, lambda: f64, beta: Beta) -> Result<Self> {
        let p = ModelParams {
            m,
            mu,
            lambda,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::param(
                "m",
                format!("must be positive, got {}", self.m),
            ));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite"));
        }
        if let Beta::Finite(b) = self.beta {
            Beta::finite(b)?;
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ModelParams { lambda, ..self }
    }

    pub fn with_mu(self, mu: f64) -> Self {
        ModelParams { mu, ..self }
    }

    pub fn with_beta(self, beta: Beta) -> Self {
        ModelParams { beta, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

/// A point on the bosonic or fermionic thermal grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatsubaraFrequency {
    pub kind: Statistics,
    pub index: i64,
    pub beta: f64,
}

impl MatsubaraFrequency {
    pub fn new(kind: Statistics, index: i64, beta: Beta) -> Result<Self> {
        Ok(MatsubaraFrequency {
            kind,
            index,
            beta: beta.value()?,
        })
    }

    pub fn bosonic(index: i64, beta: f64) -> Self {
        MatsubaraFrequency {
            kind: Statistics::Bosonic,
            index,
            beta,
        }
    }

    pub fn value(&self) -> f64 {
        let n = self.index as f64;
        match self.kind {
            Statistics::Bosonic => 2.0 * PI / self.beta * n,
            Statistics::Fermionic => 2.0 * PI / self.beta * (n + 0.5),
        }
    }
}

pub fn matsubara_value(kind: Statistics, n: i64, beta: Beta) -> Result<f64> {
    Ok(MatsubaraFrequency::new(kind, n, beta)?.value())
}

/// Ordering prescription for the equal-time product `psibar psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum RegularizationScheme {
    /// `psibar(tau + eps) psi(tau)` with `eps -> 0+`, i.e. the ordering `c^dag c`.
    #[default]
    TimeSplitting,
    /// The commutator ordering `[c^dag, c] / 2`.
    Symmetric,
}

impl std::str::FromStr for RegularizationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "time-splitting" | "time_splitting" | "timesplitting" => Ok(Self::TimeSplitting),
            "symmetric" => Ok(Self::Symmetric),
            other => Err(Error::param(
                "scheme",
                format!("expected time-splitting or symmetric, got {other:?}"),
            )),
        }
    }
}

impl fmt::Display for RegularizationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TimeSplitting => "time-splitting",
            Self::Symmetric => "symmetric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    pub abs_tol: f64,
    /// Largest winding index kept in Dirac-comb sums.
    pub winding_cutoff: usize,
    /// Highest oscillator level retained by exact diagonalization.
    pub truncation_nmax: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            abs_tol: 1e-10,
            winding_cutoff: 100_000,
            truncation_nmax: 60,
        }
    }
}

impl NumericPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::param("abs_tol", "must be positive"));
        }
        if self.winding_cutoff < 1 {
            return Err(Error::param("winding_cutoff", "must be at least 1"));
        }
        if self.truncation_nmax < 1 {
            return Err(Error::param("nmax", "must be at least 1"));
        }
        Ok(())
    }
}

/// Thermal weight of the one-fermion sector, `e^{-mu beta} / (1 + e^{-mu beta})`.
///
/// Evaluated as `1 / (1 + e^{mu beta})`, which saturates cleanly at both ends.
pub fn fermi_occupation(mu: f64, beta: f64) -> f64 {
    1.0 / (1.0 + (mu * beta).exp())
}

/// Occupation of the fermion sector for either a finite or infinite `beta`.
///
/// At zero temperature this is the step function of the sector gap, with the
/// degenerate point `mu = 0` sitting at one half.
pub fn sector_occupation(mu: f64, beta: Beta) -> f64 {
    match beta {
        Beta::Finite(b) => fermi_occupation(mu, b),
        Beta::Infinite => {
            if mu > 0.0 {
                0.0
            } else if mu < 0.0 {
                1.0
            } else {
                0.5
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matsubara_examples() {
        let b = Beta::Finite(2.0);
        assert_eq!(matsubara_value(Statistics::Bosonic, 0, b).unwrap(), 0.0);
        assert!((matsubara_value(Statistics::Fermionic, 0, b).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((matsubara_value(Statistics::Fermionic, -1, b).unwrap() + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn matsubara_needs_finite_beta() {
        let err = matsubara_value(Statistics::Bosonic, 1, Beta::Infinite).unwrap_err();
        assert_eq!(
            err.to_string(),
            "thermal grid undefined at zero temperature"
        );
    }

    #[test]
    fn fermi_examples() {
        assert_eq!(fermi_occupation(0.0, 1.0), 0.5);
        assert!((fermi_occupation(3f64.ln(), 1.0) - 0.25).abs() < 1e-15);
        assert_eq!(fermi_occupation(1e4, 1.0), 0.0);
        assert_eq!(fermi_occupation(-1e4, 1.0), 1.0);
        assert!(fermi_occupation(800.0, 1.0).is_finite());
    }

    #[test]
    fn params_reject_bad_mass() {
        assert!(ModelParams::new(0.0, 1.0, 1.0, Beta::Infinite).is_err());
        assert!(ModelParams::new(1.0, 1.0, 1.0, Beta::Finite(-1.0)).is_err());
    }

    #[test]
    fn beta_parsing() {
        assert_eq!("inf".parse::<Beta>().unwrap(), Beta::Infinite);
        assert_eq!("4".parse::<Beta>().unwrap(), Beta::Finite(4.0));
        let err = "four".parse::<Beta>().unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
    }

    proptest! {
        #[test]
        fn fermi_particle_hole(mu in -50.0f64..50.0, beta in 0.01f64..20.0) {
            let s = fermi_occupation(mu, beta) + fermi_occupation(-mu, beta);
            prop_assert!((s - 1.0).abs() < 1e-10);
        }

        #[test]
        fn fermi_monotone(a in -30.0f64..30.0, d in 0.001f64..5.0) {
            prop_assert!(fermi_occupation(a + d, 1.0) <= fermi_occupation(a, 1.0));
        }

        #[test]
        fn grid_symmetry(n in -1000i64..1000, beta in 0.1f64..10.0) {
            let b = MatsubaraFrequency::bosonic(n, beta).value();
            let bm = MatsubaraFrequency::bosonic(-n, beta).value();
            prop_assert!((b + bm).abs() < 1e-9);
            let f = MatsubaraFrequency { kind: Statistics::Fermionic, index: n, beta }.value();
            let fm = MatsubaraFrequency { kind: Statistics::Fermionic, index: -n - 1, beta }.value();
            prop_assert!((f + fm).abs() < 1e-9);
        }
    }
}
