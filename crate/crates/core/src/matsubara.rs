//! Order-`lambda` and order-`lambda^2` diagrams in the path-integral route.
//!
//! Zero-temperature loop integrals are done by residues, with a numerical
//! quadrature alongside as a check. Finite-temperature sums are rewritten as
//! winding sums with weights `(-e^{-mu beta})^n`, resummed geometrically and
//! also truncated with an explicit tail bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::PoleDecomposition;
use crate::error::{Error, Result};
use crate::loops::{self, LoopSpec};
use crate::model::{
    fermi_occupation, Beta, MatsubaraFrequency, ModelParams, NumericPolicy, RegularizationScheme,
    Statistics,
};
use crate::quad;
use crate::series::winding_sum;

const QUAD_SEGMENTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TadpoleBranch {
    /// Bosonic vacuum; the fermion pole sits in the lower half plane.
    MuPositive,
    /// Fermionic vacuum; the pole is enclosed, and at finite temperature the
    /// `n = 0` continuum term survives.
    MuNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tadpole {
    /// First-order `<phi>`.
    pub value: f64,
    /// `∫ dk/2π (-ik + mu)^{-1}` under the chosen prescription.
    pub loop_integral: f64,
    /// Independent quadrature of the symmetric integral, when that scheme ran.
    pub quadrature: Option<f64>,
    pub scheme: RegularizationScheme,
    pub branch: TadpoleBranch,
}

fn branch(mu: f64) -> Result<TadpoleBranch> {
    if mu > 0.0 {
        Ok(TadpoleBranch::MuPositive)
    } else if mu < 0.0 {
        Ok(TadpoleBranch::MuNegative)
    } else {
        Err(Error::DegenerateGroundState)
    }
}

/// Zero-temperature tadpole `<phi>^(1) = (lambda/m^2) ∫ dk/2π (-ik+mu)^{-1}`.
///
/// Time splitting attaches `e^{+ik eps}`, so the contour closes in the upper
/// half plane and picks up the pole at `k = -i mu` only when `mu < 0`, giving
/// `-1`. The symmetric prescription drops the odd part and leaves
/// `sgn(mu) / 2`.
pub fn tadpole_phi(p: &ModelParams, scheme: RegularizationScheme) -> Result<Tadpole> {
    p.validate()?;
    if !p.beta.is_infinite() {
        return Err(Error::param(
            "beta",
            "zero-temperature tadpole needs beta = inf",
        ));
    }
    let br = branch(p.mu)?;
    let (loop_integral, quadrature) = match scheme {
        RegularizationScheme::TimeSplitting => {
            let enclosed = br == TadpoleBranch::MuNegative;
            (if enclosed { -1.0 } else { 0.0 }, None)
        }
        RegularizationScheme::Symmetric => {
            let mu = p.mu;
            let q = quad::integrate_real_line(
                |k| Complex64::new(mu / (k * k + mu * mu) / (2.0 * PI), 0.0),
                0.0,
                mu.abs(),
                1e-14,
                QUAD_SEGMENTS,
            );
            (0.5 * mu.signum(), Some(q.value.re))
        }
    };
    Ok(Tadpole {
        value: p.lambda / (p.m * p.m) * loop_integral,
        loop_integral,
        quadrature,
        scheme,
        branch: br,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalTadpole {
    /// Geometric resummation, `-(lambda/m^2) n_F(mu, beta)`.
    pub value: f64,
    /// Truncated winding sum.
    pub winding_value: f64,
    pub windings: usize,
    pub tail_bound: f64,
    pub branch: TadpoleBranch,
}

/// Finite-temperature tadpole from the Dirac-comb winding expansion.
///
/// For `mu > 0` only windings `n > 0` contribute, each `(-e^{-mu beta})^n`.
/// For `mu < 0` the `n = 0` continuum term gives `-1` and windings `n < 0`
/// contribute `-(-e^{mu beta})^{|n|}`.
pub fn tadpole_phi_thermal(
    p: &ModelParams,
    policy: &NumericPolicy,
    max_winding: usize,
) -> Result<ThermalTadpole> {
    p.validate()?;
    let beta = p.beta.value()?;
    let br = branch(p.mu)?;
    let g = p.lambda / (p.m * p.m);
    let y = -(-p.mu.abs() * beta).exp();
    let windings = winding_sum(
        &[Complex64::new(1.0, 0.0)],
        y,
        policy.abs_tol,
        max_winding,
        false,
    )?;
    let winding_value = match br {
        TadpoleBranch::MuPositive => g * windings.value.re,
        TadpoleBranch::MuNegative => g * (-1.0 - windings.value.re),
    };
    let value = -g * fermi_occupation(p.mu, beta);
    let tail_bound = g.abs() * windings.tail_bound;
    if (value - winding_value).abs() > tail_bound + policy.abs_tol {
        return Err(Error::consistency(
            "thermal_tadpole",
            format!("closed form {value} vs winding sum {winding_value}"),
        ));
    }
    Ok(ThermalTadpole {
        value,
        winding_value,
        windings: windings.terms,
        tail_bound,
        branch: br,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Momentum {
    Continuous(f64),
    Matsubara(MatsubaraFrequency),
}

impl Momentum {
    pub fn value(&self) -> f64 {
        match self {
            Momentum::Continuous(p) => *p,
            Momentum::Matsubara(f) => f.value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelfEnergyRoute {
    /// Residue closed form, checked against quadrature of the loop integral.
    ClosedFormWithQuadrature,
    /// Both fermion poles in one half plane; quadrature as the check.
    ZeroTemperatureContour,
    /// Winding expansion on the bosonic grid.
    WindingResidues { fast_path: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfEnergyValue {
    pub momentum: Momentum,
    pub order: u32,
    pub value: Complex64,
    /// Numerically integrated value of the same diagram, where one exists.
    pub quadrature: Option<Complex64>,
    pub quadrature_error: Option<f64>,
    pub route: SelfEnergyRoute,
}

fn require_zero_t_positive_mu(p: &ModelParams) -> Result<()> {
    p.validate()?;
    if !p.beta.is_infinite() {
        return Err(Error::param(
            "beta",
            "zero-temperature diagram needs beta = inf",
        ));
    }
    if !(p.mu > 0.0) {
        return Err(Error::Unsupported(
            "mu <= 0 needs the tadpole insertion into the fermion line".into(),
        ));
    }
    Ok(())
}

/// `S^(2)(p) = lambda^2 / (-ip+mu)^2 * 1 / (2m (-ip+mu+m))` at zero temperature.
pub fn fermion_self_energy_2(
    p: &ModelParams,
    momentum: f64,
    policy: &NumericPolicy,
) -> Result<SelfEnergyValue> {
    require_zero_t_positive_mu(p)?;
    let (m, mu) = (p.m, p.mu);
    let ext = Complex64::new(mu, -momentum);
    let prefactor = p.lambda * p.lambda / (ext * ext);
    let closed = prefactor / (2.0 * m * (ext + m));

    let integral = quad::integrate_real_line(
        |k| {
            let g = Complex64::new(mu, -k).inv();
            let d = (momentum - k) * (momentum - k) + m * m;
            g / d / (2.0 * PI)
        },
        0.5 * momentum,
        m.max(mu).max(0.5 * momentum.abs()),
        1e-14,
        QUAD_SEGMENTS,
    );
    let numeric = prefactor * integral.value;
    let err = (numeric - closed).norm();
    if err > policy.abs_tol {
        return Err(Error::consistency(
            "fermion_self_energy",
            format!("closed form {closed} vs quadrature {numeric} at p = {momentum}"),
        ));
    }
    Ok(SelfEnergyValue {
        momentum: Momentum::Continuous(momentum),
        order: 2,
        value: closed,
        quadrature: Some(numeric),
        quadrature_error: Some(integral.error * prefactor.norm()),
        route: SelfEnergyRoute::ClosedFormWithQuadrature,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleExtraction {
    pub decomposition: PoleDecomposition,
    /// Fitted constant part of `S^(2)(p) (-ip+mu)^2 (-ip+mu+m)`.
    pub numerator: Complex64,
    /// Fitted coefficient of `-ip` in the same product; zero when flat.
    pub slope: Complex64,
    pub max_deviation: f64,
    pub grid: Vec<f64>,
}

/// 16 logarithmically spaced momenta in `[m/10, 10 m]`.
pub fn pole_fit_grid(m: f64) -> Vec<f64> {
    (0..16)
        .map(|k| m * 10f64.powf(-1.0 + 2.0 * k as f64 / 15.0))
        .collect()
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Matches `S^(2)` against the two-pole form
/// `(1-Z)/(-ip+mu+dmu) + Z/(-ip+mu+m)` expanded to order `lambda^2`.
///
/// The product `S^(2) (-ip+mu)^2 (-ip+mu+m)` must be `p`-independent; that
/// forces `Z = -dmu/m`, and its constant value is `-dmu m`.
pub fn extract_pole_decomposition(
    p: &ModelParams,
    policy: &NumericPolicy,
) -> Result<PoleExtraction> {
    require_zero_t_positive_mu(p)?;
    let (m, mu) = (p.m, p.mu);
    let grid = pole_fit_grid(m);
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for &k in &grid {
        let s = fermion_self_energy_2(p, k, policy)?.value;
        let u = Complex64::new(mu, -k);
        let num = s * u * u * (u + m);
        re.push(num.re);
        im.push(num.im);
    }
    // num = a + b (-ip):  Re = a_r + b_i p,  Im = a_i - b_r p
    let (a_r, b_i) = linear_fit(&grid, &re);
    let (a_i, neg_b_r) = linear_fit(&grid, &im);
    let numerator = Complex64::new(a_r, a_i);
    let slope = Complex64::new(-neg_b_r, b_i);
    let max_deviation = re
        .iter()
        .zip(&im)
        .map(|(r, i)| (Complex64::new(*r, *i) - numerator).norm())
        .fold(0.0, f64::max);

    let tol = policy.abs_tol * numerator.norm().max(1.0);
    let pmax = grid.last().copied().unwrap_or(1.0);
    if slope.norm() * pmax > tol || max_deviation > tol || numerator.im.abs() > tol {
        return Err(Error::consistency(
            "pole_numerator_flatness",
            format!("numerator {numerator}, slope {slope}, max deviation {max_deviation:e}"),
        ));
    }
    let delta_mu = -numerator.re / m;
    Ok(PoleExtraction {
        decomposition: PoleDecomposition {
            delta_mu,
            z1f: -delta_mu / m,
        },
        numerator,
        slope,
        max_deviation,
        grid,
    })
}

/// Connected order-`lambda^2` correction to the boson propagator.
///
/// At zero temperature both fermion poles sit below the real axis, so the
/// loop vanishes; the returned quadrature is the numerical check. At finite
/// temperature `momentum` must be a bosonic Matsubara frequency: nonzero
/// modes give 0, and for `p = 0` the value is the coefficient of
/// `beta * delta_{p,0}`, `lambda^2/m^4 * x/(1+x)^2` with `x = e^{-mu beta}`.
pub fn boson_self_energy_2(
    p: &ModelParams,
    momentum: Momentum,
    policy: &NumericPolicy,
) -> Result<SelfEnergyValue> {
    p.validate()?;
    if !(p.mu > 0.0) {
        return Err(Error::Unsupported(format!(
            "boson self-energy needs mu > 0, got {}",
            p.mu
        )));
    }
    let l2 = p.lambda * p.lambda;
    match p.beta {
        Beta::Infinite => {
            let Momentum::Continuous(q) = momentum else {
                return Err(Error::param(
                    "momentum",
                    "Matsubara momentum given at zero temperature",
                ));
            };
            let mu = p.mu;
            let integral = quad::integrate_real_line(
                |k| (Complex64::new(k, mu) * Complex64::new(k - q, mu)).inv() / (2.0 * PI),
                0.5 * q,
                mu.max(0.5 * q.abs()),
                1e-15,
                QUAD_SEGMENTS,
            );
            let prefactor = l2 / (q * q + p.m * p.m).powi(2);
            let check = integral.value * prefactor;
            if check.norm() > policy.abs_tol {
                return Err(Error::consistency(
                    "zero_t_fermion_loop",
                    format!("quadrature of the loop gives {check}, expected 0"),
                ));
            }
            Ok(SelfEnergyValue {
                momentum,
                order: 2,
                value: Complex64::new(0.0, 0.0),
                quadrature: Some(check),
                quadrature_error: Some(integral.error * prefactor),
                route: SelfEnergyRoute::ZeroTemperatureContour,
            })
        }
        Beta::Finite(beta) => {
            let freq = match momentum {
                Momentum::Matsubara(f)
                    if f.kind == Statistics::Bosonic && (f.beta - beta).abs() <= 1e-12 * beta =>
                {
                    f
                }
                Momentum::Matsubara(f) => {
                    return Err(Error::OffGridMomentum(format!(
                        "{:?} frequency on beta = {} given for beta = {beta}",
                        f.kind, f.beta
                    )))
                }
                Momentum::Continuous(q) => {
                    return Err(Error::OffGridMomentum(format!(
                        "continuous p = {q} at finite beta; use a bosonic Matsubara index"
                    )))
                }
            };
            let spec = LoopSpec::new(
                vec![freq.index, -freq.index],
                p.mu,
                beta,
                policy.winding_cutoff,
            )?;
            let lp = loops::connected_loop(&spec, policy)?;
            let value = if freq.index == 0 {
                lp.value * (l2 / p.m.powi(4) / (beta * beta))
            } else {
                Complex64::new(0.0, 0.0)
            };
            Ok(SelfEnergyValue {
                momentum,
                order: 2,
                value,
                quadrature: None,
                quadrature_error: None,
                route: SelfEnergyRoute::WindingResidues {
                    fast_path: lp.fast_path,
                },
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealSpaceCorrection {
    /// Connected `p = 0` coefficient.
    pub connected: f64,
    /// Square of the thermal tadpole.
    pub disconnected: f64,
    pub total: f64,
}

/// Order-`lambda^2` correction to `<phi(tau) phi(0)>`; constant in `tau`.
pub fn boson_correction_real_space(
    p: &ModelParams,
    policy: &NumericPolicy,
) -> Result<RealSpaceCorrection> {
    let beta = p.beta.value()?;
    let zero = Momentum::Matsubara(MatsubaraFrequency::bosonic(0, beta));
    let connected = boson_self_energy_2(p, zero, policy)?.value.re;
    let tadpole = tadpole_phi_thermal(p, policy, policy.winding_cutoff)?.value;
    let disconnected = tadpole * tadpole;
    Ok(RealSpaceCorrection {
        connected,
        disconnected,
        total: connected + disconnected,
    })
}

/// Free thermal correlator plus the order-`lambda^2` constant.
pub fn perturbative_thermal_two_point(
    p: &ModelParams,
    tau: f64,
    policy: &NumericPolicy,
) -> Result<f64> {
    let free = crate::analytic::ho_thermal_correlator(p.m, p.beta, tau)?;
    Ok(free + boson_correction_real_space(p, policy)?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_t(m: f64, mu: f64, lambda: f64) -> ModelParams {
        ModelParams::new(m, mu, lambda, Beta::Infinite).unwrap()
    }

    fn pol() -> NumericPolicy {
        NumericPolicy::default()
    }

    #[test]
    fn tadpole_time_splitting() {
        let t = tadpole_phi(&zero_t(1.0, 1.0, 1.0), RegularizationScheme::TimeSplitting).unwrap();
        assert_eq!(t.value, 0.0);
        let t = tadpole_phi(&zero_t(1.0, -1.0, 1.0), RegularizationScheme::TimeSplitting).unwrap();
        assert_eq!(t.value, -1.0);
        assert_eq!(t.branch, TadpoleBranch::MuNegative);
    }

    #[test]
    fn tadpole_symmetric() {
        let t = tadpole_phi(&zero_t(1.0, 1.0, 1.0), RegularizationScheme::Symmetric).unwrap();
        assert_eq!(t.loop_integral, 0.5);
        assert!((t.quadrature.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(t.value, 0.5);
        let t = tadpole_phi(&zero_t(2.0, -0.3, 1.0), RegularizationScheme::Symmetric).unwrap();
        // +lambda/(2m^2) minus the enclosed pole lambda/m^2
        assert!((t.value - (0.125 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn tadpole_degenerate_mu() {
        assert_eq!(
            tadpole_phi(&zero_t(1.0, 0.0, 1.0), RegularizationScheme::TimeSplitting).unwrap_err(),
            Error::DegenerateGroundState
        );
    }

    #[test]
    fn thermal_tadpole_examples() {
        let p = ModelParams::new(1.0, 3f64.ln(), 1.0, Beta::Finite(1.0)).unwrap();
        let t = tadpole_phi_thermal(&p, &pol(), 10_000).unwrap();
        assert!((t.value + 0.25).abs() < 1e-15);
        assert!((t.winding_value + 0.25).abs() < 1e-10);

        let cold = ModelParams::new(1.0, 1.0, 1.0, Beta::Finite(800.0)).unwrap();
        assert_eq!(tadpole_phi_thermal(&cold, &pol(), 10).unwrap().value, -0.0);

        let neg = ModelParams::new(1.0, -0.7, 0.4, Beta::Finite(2.0)).unwrap();
        let t = tadpole_phi_thermal(&neg, &pol(), 10_000).unwrap();
        assert_eq!(t.branch, TadpoleBranch::MuNegative);
        assert!((t.winding_value + 0.4 * fermi_occupation(-0.7, 2.0)).abs() < 1e-10);
    }

    #[test]
    fn thermal_tadpole_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mb: f64 = rng.random_range(0.1..10.0);
            let beta = 2.0;
            let p = ModelParams::new(1.3, mb / beta, 0.7, Beta::Finite(beta)).unwrap();
            let t = tadpole_phi_thermal(&p, &pol(), 100_000).unwrap();
            let oracle = -(0.7 / 1.69) * fermi_occupation(p.mu, beta);
            assert!((t.value - oracle).abs() < 1e-14);
            assert!((t.winding_value - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn thermal_tadpole_cutoff_error() {
        let p = ModelParams::new(1.0, 0.01, 1.0, Beta::Finite(1.0)).unwrap();
        assert!(matches!(
            tadpole_phi_thermal(&p, &pol(), 5),
            Err(Error::WindingCutoff { .. })
        ));
    }

    #[test]
    fn fermion_self_energy_examples() {
        let s = fermion_self_energy_2(&zero_t(1.0, 1.0, 1.0), 0.0, &pol()).unwrap();
        assert!((s.value - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        let s = fermion_self_energy_2(&zero_t(1.0, 1.0, 0.0), 0.7, &pol()).unwrap();
        assert_eq!(s.value.norm(), 0.0);
        let big = fermion_self_energy_2(&zero_t(1.0, 1.0, 1.0), 1e3, &pol()).unwrap();
        let scaled = big.value.norm() * 1e9;
        assert!((scaled - 0.5).abs() < 1e-2, "{scaled}");
    }

    #[test]
    fn fermion_self_energy_rejects_negative_mu() {
        assert!(matches!(
            fermion_self_energy_2(&zero_t(1.0, -1.0, 1.0), 0.0, &pol()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn pole_extraction_examples() {
        let e = extract_pole_decomposition(&zero_t(1.0, 1.0, 1.0), &pol()).unwrap();
        assert!((e.decomposition.delta_mu + 0.5).abs() < 1e-10);
        assert!((e.decomposition.z1f - 0.5).abs() < 1e-10);
        let e = extract_pole_decomposition(&zero_t(1.0, 1.0, 0.0), &pol()).unwrap();
        assert_eq!(e.decomposition.delta_mu.abs(), 0.0);
        let p = zero_t(2.0, 0.8, 1.0);
        let e = extract_pole_decomposition(&p, &pol()).unwrap();
        let oracle = analytic::predicted_pole_decomposition(&p);
        assert!((e.decomposition.delta_mu - oracle.delta_mu).abs() < 1e-10);
        assert!((e.decomposition.z1f - oracle.z1f).abs() < 1e-10);
        assert_eq!(e.grid.len(), 16);
    }

    #[test]
    fn boson_self_energy_zero_t() {
        let p = zero_t(1.0, 1.0, 1.0);
        for q in [0.0, 0.3, -2.0, 7.5] {
            let s = boson_self_energy_2(&p, Momentum::Continuous(q), &pol()).unwrap();
            assert_eq!(s.value.norm(), 0.0);
            assert!(s.quadrature.unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn boson_self_energy_thermal() {
        let beta = 3f64.ln();
        let p = ModelParams::new(1.0, 1.0, 1.0, Beta::Finite(beta)).unwrap();
        let zero = boson_self_energy_2(
            &p,
            Momentum::Matsubara(MatsubaraFrequency::bosonic(0, beta)),
            &pol(),
        )
        .unwrap();
        assert!((zero.value.re - 0.1875).abs() < 1e-12);
        let three = boson_self_energy_2(
            &p,
            Momentum::Matsubara(MatsubaraFrequency::bosonic(3, beta)),
            &pol(),
        )
        .unwrap();
        assert_eq!(three.value.norm(), 0.0);
        let err = boson_self_energy_2(&p, Momentum::Continuous(0.5), &pol()).unwrap_err();
        assert!(err.to_string().contains("discretized in a periodic way"));
    }

    #[test]
    fn real_space_correction() {
        let beta = 3f64.ln();
        let p = ModelParams::new(1.0, 1.0, 1.0, Beta::Finite(beta)).unwrap();
        let c = boson_correction_real_space(&p, &pol()).unwrap();
        assert!((c.connected - 0.1875).abs() < 1e-12);
        assert!((c.disconnected - 0.0625).abs() < 1e-12);
        assert!((c.total - 0.25).abs() < 1e-12);
        assert_eq!(
            boson_correction_real_space(&p.with_lambda(0.0), &pol())
                .unwrap()
                .total,
            0.0
        );
    }

    #[test]
    fn real_space_correction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = rng.random_range(0.5..2.0);
            let mu = rng.random_range(0.1..2.0);
            let l = rng.random_range(-1.5..1.5);
            let beta = rng.random_range(0.5..6.0);
            let p = ModelParams::new(m, mu, l, Beta::Finite(beta)).unwrap();
            let c = boson_correction_real_space(&p, &pol()).unwrap();
            let oracle = l * l / m.powi(4) * fermi_occupation(mu, beta);
            assert!((c.total - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbative_residual_is_fourth_order() {
        let beta = 4.0;
        let resid = |l: f64| {
            let p = ModelParams::new(1.0, 1.0, l, Beta::Finite(beta)).unwrap();
            analytic::exact_thermal_two_point(&p, 1.0).unwrap()
                - perturbative_thermal_two_point(&p, 1.0, &pol()).unwrap()
        };
        let ratio = resid(0.2) / resid(0.1);
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "{ratio}");
    }
}
