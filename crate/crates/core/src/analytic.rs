//! Closed-form quantum mechanics of the model.
//!
//! The Hamiltonian commutes with the fermion number, so the `N = 0` sector is
//! a plain oscillator and the `N = 1` sector is the same oscillator displaced
//! by `-lambda / m^2` and lifted by `mu_lambda = mu - lambda^2 / (2 m^2)`.
//! These formulas are the ground truth for every other route.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sector_occupation, Beta, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sector {
    /// `N = 0`
    Bosonic,
    /// `N = 1`
    Fermionic,
}

impl Sector {
    pub fn number(self) -> u8 {
        match self {
            Sector::Bosonic => 0,
            Sector::Fermionic => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLevel {
    pub sector: Sector,
    pub n: usize,
}

/// Mass correction and `|<1_F| c^dag |0_B>|^2` read off the fermion propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleDecomposition {
    pub delta_mu: f64,
    pub z1f: f64,
}

/// How a value was obtained, for the interacting cases that reuse a free formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    FreeClosedForm,
    /// Interacting, but the connected function is uncorrected in both sectors.
    InteractingEqualsFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedValue {
    pub value: f64,
    pub provenance: Provenance,
}

/// `mu_lambda = mu - lambda^2 / (2 m^2)`, the energy of the dressed fermion.
pub fn mass_shift(p: &ModelParams) -> f64 {
    p.mu - p.lambda * p.lambda / (2.0 * p.m * p.m)
}

/// `<q>` in the fermion sector.
pub fn phi_vev_fermion(p: &ModelParams) -> f64 {
    -p.lambda / (p.m * p.m)
}

pub fn energy(p: &ModelParams, level: SectorLevel) -> f64 {
    let osc = (level.n as f64 + 0.5) * p.m;
    match level.sector {
        Sector::Bosonic => osc,
        Sector::Fermionic => osc + mass_shift(p),
    }
}

pub fn free_boson_propagator(momentum: f64, m: f64) -> f64 {
    1.0 / (momentum * momentum + m * m)
}

pub fn free_fermion_propagator(momentum: f64, mu: f64) -> Result<Complex64> {
    let d = Complex64::new(mu, -momentum);
    if d == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole("fermion propagator at p = 0, mu = 0"));
    }
    Ok(d.inv())
}

/// Vacuum `<T q(tau) q(0)>` at zero temperature.
///
/// Exact for any `lambda`: in either vacuum the oscillator frequency is `m`,
/// so the connected part is the free one. The tag records which case ran.
pub fn zero_t_boson_two_point(p: &ModelParams, tau: f64) -> TaggedValue {
    TaggedValue {
        value: (-p.m * tau.abs()).exp() / (2.0 * p.m),
        provenance: if p.lambda == 0.0 {
            Provenance::FreeClosedForm
        } else {
            Provenance::InteractingEqualsFree
        },
    }
}

/// `<0_B| T c(tau) c^dag(0) |0_B>` for `lambda = 0`, with `theta(0) = 0`.
pub fn zero_t_fermion_two_point_free(p: &ModelParams, tau: f64) -> f64 {
    if tau > 0.0 {
        (-p.mu * tau).exp()
    } else {
        0.0
    }
}

/// Free oscillator correlator on the thermal circle, `0 <= tau <= beta`.
pub fn ho_thermal_correlator(m: f64, beta: Beta, tau: f64) -> Result<f64> {
    match beta {
        Beta::Infinite => Ok((-m * tau.abs()).exp() / (2.0 * m)),
        Beta::Finite(b) => {
            if !(0.0..=b).contains(&tau) {
                return Err(Error::TauOutOfRange { tau, beta: b });
            }
            let num = (-m * tau).exp() + (-m * (b - tau)).exp();
            Ok(num / (-(-m * b).exp_m1()) / (2.0 * m))
        }
    }
}

/// Exact thermal `<q(tau) q(0)>`: the free curve plus a constant from the
/// fermion sector, `(lambda/m^2)^2 * n_F(mu_lambda)`.
pub fn exact_thermal_two_point(p: &ModelParams, tau: f64) -> Result<f64> {
    let shift = phi_vev_fermion(p);
    Ok(ho_thermal_correlator(p.m, p.beta, tau)?
        + shift * shift * sector_occupation(mass_shift(p), p.beta))
}

/// Exact thermal `<q>`.
pub fn exact_phi_expectation(p: &ModelParams) -> f64 {
    phi_vev_fermion(p) * sector_occupation(mass_shift(p), p.beta)
}

/// `|<0_F| c^dag |0_B>| = exp(-lambda^2 / (4 m^3))`, the overlap of two unit
/// Gaussians displaced by `lambda / m^2`.
pub fn ground_state_overlap(p: &ModelParams) -> f64 {
    (-p.lambda * p.lambda / (4.0 * p.m.powi(3))).exp()
}

pub fn predicted_pole_decomposition(p: &ModelParams) -> PoleDecomposition {
    let l2 = p.lambda * p.lambda;
    PoleDecomposition {
        delta_mu: -l2 / (2.0 * p.m * p.m),
        z1f: l2 / (2.0 * p.m.powi(3)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(m: f64, mu: f64, lambda: f64) -> ModelParams {
        ModelParams::new(m, mu, lambda, Beta::Infinite).unwrap()
    }

    #[test]
    fn mass_shift_examples() {
        assert_eq!(mass_shift(&params(1.0, 1.0, 0.0)), 1.0);
        assert_eq!(mass_shift(&params(1.0, 1.0, 1.0)), 0.5);
        assert_eq!(mass_shift(&params(2.0, 0.0, 2.0)), -0.5);
    }

    #[test]
    fn vev_examples() {
        assert_eq!(phi_vev_fermion(&params(1.0, 1.0, 0.0)), 0.0);
        assert_eq!(phi_vev_fermion(&params(1.0, 1.0, 1.0)), -1.0);
        assert_eq!(phi_vev_fermion(&params(2.0, 1.0, 1.0)), -0.25);
    }

    #[test]
    fn energy_examples() {
        let p = params(1.0, 1.0, 1.0);
        let lv = |sector, n| SectorLevel { sector, n };
        assert_eq!(energy(&p, lv(Sector::Bosonic, 0)), 0.5);
        assert_eq!(energy(&p, lv(Sector::Fermionic, 0)), 1.0);
        assert_eq!(energy(&p, lv(Sector::Fermionic, 1)), 2.0);
    }

    #[test]
    fn propagators() {
        assert_eq!(free_boson_propagator(0.0, 1.0), 1.0);
        assert_eq!(
            free_fermion_propagator(0.0, 2.0).unwrap(),
            Complex64::new(0.5, 0.0)
        );
        let g = free_fermion_propagator(1.0, 1.0).unwrap();
        assert!((g - Complex64::new(0.5, 0.5)).norm() < 1e-15);
        assert!(matches!(
            free_fermion_propagator(0.0, 0.0),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn zero_t_two_points() {
        let p = params(1.0, 1.0, 0.0);
        assert_eq!(zero_t_boson_two_point(&p, 0.0).value, 0.5);
        assert!((zero_t_boson_two_point(&p, 1.0).value - (-1f64).exp() / 2.0).abs() < 1e-16);
        let p2 = params(2.0, 1.0, 0.0);
        assert!((zero_t_boson_two_point(&p2, -1.0).value - (-2f64).exp() / 4.0).abs() < 1e-16);
        let pi = params(1.0, 1.0, 0.3);
        assert_eq!(
            zero_t_boson_two_point(&pi, 0.4).provenance,
            Provenance::InteractingEqualsFree
        );

        assert!((zero_t_fermion_two_point_free(&p, 1.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(zero_t_fermion_two_point_free(&p, -1.0), 0.0);
        assert_eq!(zero_t_fermion_two_point_free(&p, 0.0), 0.0);
        let p3 = params(1.0, 3.0, 0.0);
        assert!((zero_t_fermion_two_point_free(&p3, 2.0) - (-6f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn ho_thermal_examples() {
        let e1 = (-1f64).exp();
        assert!(
            (ho_thermal_correlator(1.0, Beta::Infinite, 1.0).unwrap() - e1 / 2.0).abs() < 1e-16
        );
        let v = ho_thermal_correlator(1.0, Beta::Finite(2.0), 1.0).unwrap();
        let expected = 0.5 * 2.0 * e1 / (1.0 - (-2f64).exp());
        assert!((v - expected).abs() < 1e-15);
        assert!(matches!(
            ho_thermal_correlator(1.0, Beta::Finite(2.0), 2.5),
            Err(Error::TauOutOfRange { .. })
        ));
        assert!(ho_thermal_correlator(1.0, Beta::Finite(2.0), -0.1).is_err());
    }

    #[test]
    fn exact_thermal_disconnected_part() {
        // mu_lambda * beta = ln 3 with mu_lambda = 0.5.
        let beta = 2.0 * 3f64.ln();
        let p = ModelParams::new(1.0, 1.0, 1.0, Beta::Finite(beta)).unwrap();
        for &tau in &[0.0, 0.3, 1.1, beta] {
            let full = exact_thermal_two_point(&p, tau).unwrap();
            let free = ho_thermal_correlator(1.0, p.beta, tau).unwrap();
            assert!((full - free - 0.25).abs() < 1e-14);
        }
        let p0 = p.with_lambda(0.0);
        assert_eq!(
            exact_thermal_two_point(&p0, 0.7).unwrap(),
            ho_thermal_correlator(1.0, p.beta, 0.7).unwrap()
        );
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(ground_state_overlap(&params(1.0, 1.0, 0.0)), 1.0);
        assert!((ground_state_overlap(&params(1.0, 1.0, 1.0)) - (-0.25f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn overlap_matches_residue_to_leading_order() {
        // 1 - overlap^2 - Z_1F is O(lambda^4): halving lambda divides it by ~16.
        let resid = |l: f64| {
            let p = params(1.0, 1.0, l);
            1.0 - ground_state_overlap(&p).powi(2) - predicted_pole_decomposition(&p).z1f
        };
        let ratio = resid(0.5) / resid(0.25);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn predicted_poles() {
        let d = predicted_pole_decomposition(&params(1.0, 1.0, 0.0));
        assert_eq!((d.delta_mu, d.z1f), (-0.0, 0.0));
        let d = predicted_pole_decomposition(&params(1.0, 1.0, 1.0));
        assert_eq!((d.delta_mu, d.z1f), (-0.5, 0.5));
        let d = predicted_pole_decomposition(&params(2.0, 1.0, 1.0));
        assert_eq!((d.delta_mu, d.z1f), (-0.125, 0.0625));
    }

    proptest! {
        #[test]
        fn rigid_sector_shift(m in 0.2f64..3.0, mu in -2.0f64..2.0, l in -2.0f64..2.0, n in 0usize..50) {
            let p = params(m, mu, l);
            let e = |s, n| energy(&p, SectorLevel { sector: s, n });
            let df = e(Sector::Fermionic, n) - e(Sector::Fermionic, 0);
            let db = e(Sector::Bosonic, n) - e(Sector::Bosonic, 0);
            prop_assert!((df - db).abs() < 1e-10 * (1.0 + db.abs()));
        }

        #[test]
        fn boson_two_point_even(m in 0.2f64..3.0, tau in 0.0f64..5.0) {
            let p = params(m, 1.0, 0.0);
            prop_assert_eq!(zero_t_boson_two_point(&p, tau).value, zero_t_boson_two_point(&p, -tau).value);
        }

        #[test]
        fn thermal_reflection(m in 0.2f64..3.0, beta in 0.1f64..10.0, u in 0.0f64..1.0) {
            let tau = u * beta;
            let a = ho_thermal_correlator(m, Beta::Finite(beta), tau).unwrap();
            let b = ho_thermal_correlator(m, Beta::Finite(beta), beta - tau).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn disconnected_shift_is_tau_independent(
            mu in 0.1f64..2.0, l in -1.5f64..1.5, beta in 0.5f64..8.0, u in 0.0f64..1.0
        ) {
            let p = ModelParams::new(1.0, mu, l, Beta::Finite(beta)).unwrap();
            let d = |tau| exact_thermal_two_point(&p, tau).unwrap()
                - exact_thermal_two_point(&p.with_lambda(0.0), tau).unwrap();
            prop_assert!((d(u * beta) - d(0.0)).abs() < 1e-12);
        }

        #[test]
        fn low_temperature_limit(m in 0.5f64..2.0, tau in 0.1f64..2.0) {
            let v = ho_thermal_correlator(m, Beta::Finite(200.0), tau).unwrap();
            let z = (-m * tau).exp() / (2.0 * m);
            prop_assert!((v - z).abs() < 1e-12);
        }
    }
}
