//! Exact diagonalization on a truncated oscillator ⊗ two-level basis.
//!
//! Basis ordering is `(N=0, n=0..=n_max)` followed by `(N=1, n=0..=n_max)`.
//! `H` is block diagonal in `N`, so each block is diagonalized on its own and
//! every eigenpair carries an exact sector label.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analytic::Sector;
use crate::error::{Error, Result};
use crate::model::{Beta, ModelParams, Statistics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedBasis {
    pub n_max: usize,
}

impl TruncatedBasis {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::param("nmax", "must be at least 1"));
        }
        Ok(TruncatedBasis { n_max })
    }

    /// Oscillator levels per sector.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.levels()
    }

    pub fn index(&self, sector: Sector, n: usize) -> usize {
        debug_assert!(n <= self.n_max);
        sector.number() as usize * self.levels() + n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorLabel {
    H,
    Q,
    /// `-i p`, which is real antisymmetric in the number basis.
    PGenerator,
    C,
    CDag,
    N,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub label: OperatorLabel,
    pub basis: TruncatedBasis,
    pub matrix: DMatrix<f64>,
}

fn annihilation(levels: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(levels, levels);
    for n in 1..levels {
        a[(n - 1, n)] = (n as f64).sqrt();
    }
    a
}

fn oscillator_q(levels: usize, m: f64) -> DMatrix<f64> {
    let a = annihilation(levels);
    (&a + a.transpose()) / (2.0 * m).sqrt()
}

/// `1_osc ⊗ s` for a 2x2 fermion matrix `s`, in this basis ordering.
fn fermion_embed(levels: usize, s: [[f64; 2]; 2]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * levels, 2 * levels);
    for (i, row) in s.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                for n in 0..levels {
                    out[(i * levels + n, j * levels + n)] = v;
                }
            }
        }
    }
    out
}

/// `o ⊗ 1_fermion`.
fn boson_embed(o: &DMatrix<f64>) -> DMatrix<f64> {
    let l = o.nrows();
    let mut out = DMatrix::zeros(2 * l, 2 * l);
    out.view_mut((0, 0), (l, l)).copy_from(o);
    out.view_mut((l, l), (l, l)).copy_from(o);
    out
}

/// Oscillator part `m (a^dag a + 1/2)`. Built from the number operator, which
/// the truncation leaves exact, rather than from `p^2 + m^2 q^2`.
/// `m (a^dag a + 1/2)` written as its exact diagonal.
fn oscillator_h(levels: usize, m: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(levels, |n, _| m * (n as f64 + 0.5)))
}

fn fermion_block(p: &ModelParams, levels: usize) -> DMatrix<f64> {
    let mut h = oscillator_h(levels, p.m) + oscillator_q(levels, p.m) * p.lambda;
    for n in 0..levels {
        h[(n, n)] += p.mu;
    }
    h
}

pub fn build_operator(
    label: OperatorLabel,
    p: &ModelParams,
    basis: TruncatedBasis,
) -> OperatorMatrix {
    let l = basis.levels();
    let matrix = match label {
        OperatorLabel::H => {
            let mut h = DMatrix::zeros(2 * l, 2 * l);
            h.view_mut((0, 0), (l, l)).copy_from(&oscillator_h(l, p.m));
            h.view_mut((l, l), (l, l)).copy_from(&fermion_block(p, l));
            h
        }
        OperatorLabel::Q => boson_embed(&oscillator_q(l, p.m)),
        OperatorLabel::PGenerator => {
            let a = annihilation(l);
            boson_embed(&((a.transpose() - &a) * (p.m / 2.0).sqrt()))
        }
        OperatorLabel::C => fermion_embed(l, [[0.0, 1.0], [0.0, 0.0]]),
        OperatorLabel::CDag => fermion_embed(l, [[0.0, 0.0], [1.0, 0.0]]),
        OperatorLabel::N => fermion_embed(l, [[0.0, 0.0], [0.0, 1.0]]),
    };
    OperatorMatrix {
        label,
        basis,
        matrix,
    }
}

/// `H = (p^2 + m^2 q^2)/2 + (mu + lambda q) N` on the truncated basis.
pub fn build_hamiltonian(p: &ModelParams, n_max: usize) -> Result<OperatorMatrix> {
    p.validate()?;
    Ok(build_operator(
        OperatorLabel::H,
        p,
        TruncatedBasis::new(n_max)?,
    ))
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub params: ModelParams,
    pub basis: TruncatedBasis,
    /// Ascending.
    pub energies: Vec<f64>,
    pub sectors: Vec<Sector>,
    /// Columns are the orthonormal eigenvectors, in the order of `energies`.
    pub vectors: DMatrix<f64>,
    /// `||H v - E v||` per pair.
    pub residuals: Vec<f64>,
    pub h_norm: f64,
}

/// Diagonal blocks are read off directly; the QR iteration would otherwise
/// perturb exact levels in the last bit.
fn block_eigen(block: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = block.nrows();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || block[(i, j)] == 0.0));
    if diagonal {
        (block.diagonal(), DMatrix::identity(n, n))
    } else {
        let eig = SymmetricEigen::new(block);
        (eig.eigenvalues, eig.eigenvectors)
    }
}

impl EigenSystem {
    pub fn diagonalize(p: &ModelParams, n_max: usize) -> Result<Self> {
        let h = build_hamiltonian(p, n_max)?;
        let basis = h.basis;
        let l = basis.levels();

        let mut pairs: Vec<(f64, Sector, DVector<f64>)> = Vec::with_capacity(basis.dim());
        let blocks = [
            (Sector::Bosonic, oscillator_h(l, p.m)),
            (Sector::Fermionic, fermion_block(p, l)),
        ];
        for (sector, block) in blocks {
            let (values, vecs) = block_eigen(block);
            let offset = basis.index(sector, 0);
            for k in 0..l {
                let mut v = DVector::zeros(basis.dim());
                v.rows_mut(offset, l).copy_from(&vecs.column(k));
                pairs.push((values[k], sector, v));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let h_norm = pairs.iter().map(|x| x.0.abs()).fold(0.0, f64::max);
        let mut vectors = DMatrix::zeros(basis.dim(), basis.dim());
        let mut energies = Vec::with_capacity(pairs.len());
        let mut sectors = Vec::with_capacity(pairs.len());
        let mut residuals = Vec::with_capacity(pairs.len());
        for (k, (e, s, v)) in pairs.into_iter().enumerate() {
            residuals.push((&h.matrix * &v - &v * e).norm());
            vectors.set_column(k, &v);
            energies.push(e);
            sectors.push(s);
        }
        Ok(EigenSystem {
            params: *p,
            basis,
            energies,
            sectors,
            vectors,
            residuals,
            h_norm,
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Energies of one sector, ascending.
    pub fn sector_energies(&self, sector: Sector) -> Vec<f64> {
        self.energies
            .iter()
            .zip(&self.sectors)
            .filter(|(_, s)| **s == sector)
            .map(|(e, _)| *e)
            .collect()
    }

    /// Matrix elements `<n| O |n'>` between eigenstates.
    pub fn in_eigenbasis(&self, op: &OperatorMatrix) -> DMatrix<f64> {
        self.vectors.transpose() * &op.matrix * &self.vectors
    }

    pub fn operator(&self, label: OperatorLabel) -> OperatorMatrix {
        build_operator(label, &self.params, self.basis)
    }

    fn ground_manifold(&self) -> Vec<usize> {
        let e0 = self.energies[0];
        let tol = 1e-9 * self.h_norm.max(1.0);
        (0..self.len())
            .filter(|&k| self.energies[k] - e0 <= tol)
            .collect()
    }

    /// Normalized Boltzmann weights. Energies are shifted by `E_0` before
    /// exponentiation; at zero temperature the ground manifold is averaged.
    pub fn boltzmann_weights(&self, beta: Beta) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyEigenSystem);
        }
        let mut w = vec![0.0; self.len()];
        match beta {
            Beta::Infinite => {
                let g = self.ground_manifold();
                let share = 1.0 / g.len() as f64;
                for k in g {
                    w[k] = share;
                }
            }
            Beta::Finite(b) => {
                let e0 = self.energies[0];
                for (wk, e) in w.iter_mut().zip(&self.energies) {
                    *wk = (-b * (e - e0)).exp();
                }
                let z: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= z);
            }
        }
        Ok(w)
    }

    /// `Z_F / Z_B` at finite `beta`.
    pub fn sector_partition_ratio(&self, beta: f64) -> f64 {
        let e0 = self.energies[0];
        let (mut zb, mut zf) = (0.0, 0.0);
        for (e, s) in self.energies.iter().zip(&self.sectors) {
            let w = (-beta * (e - e0)).exp();
            match s {
                Sector::Bosonic => zb += w,
                Sector::Fermionic => zf += w,
            }
        }
        zf / zb
    }

    /// `|<0_F| c^dag |0_B>|^2` from the lowest eigenvector of each sector.
    pub fn ground_overlap_squared(&self) -> f64 {
        let first = |s: Sector| {
            self.sectors
                .iter()
                .position(|x| *x == s)
                .expect("both sectors present")
        };
        let b = first(Sector::Bosonic);
        let f = first(Sector::Fermionic);
        let cdag = self.operator(OperatorLabel::CDag).matrix;
        let amp = self.vectors.column(f).dot(&(cdag * self.vectors.column(b)));
        amp * amp
    }
}

/// `Tr[e^{-beta H} O] / Z`, or the ground-state expectation for infinite `beta`.
pub fn thermal_expectation(op: &OperatorMatrix, eig: &EigenSystem, beta: Beta) -> Result<f64> {
    let w = eig.boltzmann_weights(beta)?;
    let diag = eig.in_eigenbasis(op);
    Ok(w.iter().enumerate().map(|(k, wk)| wk * diag[(k, k)]).sum())
}

/// Euclidean time-ordered `<T A(tau) B(0)>`.
///
/// For `tau > 0` this is `Tr[e^{-(beta-tau)H} A e^{-tau H} B] / Z`; for
/// `tau < 0` the operators swap and fermionic statistics contribute a sign.
/// At `tau = 0` bosonic ordering is symmetrized and fermionic ordering uses
/// `theta(0) = 0`, i.e. `-<B A>`.
pub fn time_ordered_two_point(
    op_a: &OperatorMatrix,
    op_b: &OperatorMatrix,
    tau: f64,
    eig: &EigenSystem,
    beta: Beta,
    statistics: Statistics,
) -> Result<f64> {
    if eig.is_empty() {
        return Err(Error::EmptyEigenSystem);
    }
    if let Beta::Finite(b) = beta {
        if !(tau.abs() <= b) {
            return Err(Error::TauOutOfRange { tau, beta: b });
        }
    } else if !tau.is_finite() {
        return Err(Error::param("tau", "must be finite"));
    }
    let a = eig.in_eigenbasis(op_a);
    let b = eig.in_eigenbasis(op_b);
    let sign = match statistics {
        Statistics::Bosonic => 1.0,
        Statistics::Fermionic => -1.0,
    };
    if tau > 0.0 {
        ordered_trace(&a, &b, tau, eig, beta)
    } else if tau < 0.0 {
        Ok(sign * ordered_trace(&b, &a, -tau, eig, beta)?)
    } else {
        match statistics {
            Statistics::Bosonic => Ok(0.5
                * (ordered_trace(&a, &b, 0.0, eig, beta)?
                    + ordered_trace(&b, &a, 0.0, eig, beta)?)),
            Statistics::Fermionic => Ok(-ordered_trace(&b, &a, 0.0, eig, beta)?),
        }
    }
}

/// `Tr[e^{-(beta-s)H} X e^{-sH} Y] / Z` in the eigenbasis, `s >= 0`.
fn ordered_trace(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    s: f64,
    eig: &EigenSystem,
    beta: Beta,
) -> Result<f64> {
    let e = &eig.energies;
    let e0 = e[0];
    let dim = eig.len();
    match beta {
        Beta::Infinite => {
            let g = eig.ground_manifold();
            let mut total = 0.0;
            for &n in &g {
                for k in 0..dim {
                    let xy = x[(n, k)] * y[(k, n)];
                    if xy != 0.0 {
                        total += xy * (-s * (e[k] - e[n])).exp();
                    }
                }
            }
            Ok(total / g.len() as f64)
        }
        Beta::Finite(b) => {
            let left: Vec<f64> = e.iter().map(|en| (-(b - s) * (en - e0)).exp()).collect();
            let right: Vec<f64> = e.iter().map(|en| (-s * (en - e0)).exp()).collect();
            let z: f64 = e.iter().map(|en| (-b * (en - e0)).exp()).sum();
            let mut total = 0.0;
            for n in 0..dim {
                if left[n] == 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for k in 0..dim {
                    row += x[(n, k)] * right[k] * y[(k, n)];
                }
                total += left[n] * row;
            }
            Ok(total / z)
        }
    }
}

/// Quantities tracked by [`truncation_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepObservable {
    /// Thermal `<q>`.
    PhiExpectation,
    /// Thermal `<N>`.
    NumberExpectation,
    /// Lowest fermion-sector energy minus lowest boson-sector energy.
    SectorGap,
    /// `|<0_F| c^dag |0_B>|^2`.
    GroundOverlapSquared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observable: SweepObservable,
    pub n_max: Vec<usize>,
    pub values: Vec<f64>,
    /// `values[k+1] - values[k]`.
    pub differences: Vec<f64>,
    /// Some successive difference grew in magnitude.
    pub non_monotone: bool,
    pub tolerance: f64,
    /// Last difference below tolerance and no growth in the differences.
    pub converged: bool,
}

pub fn evaluate_observable(
    eig: &EigenSystem,
    observable: SweepObservable,
    beta: Beta,
) -> Result<f64> {
    match observable {
        SweepObservable::PhiExpectation => {
            thermal_expectation(&eig.operator(OperatorLabel::Q), eig, beta)
        }
        SweepObservable::NumberExpectation => {
            thermal_expectation(&eig.operator(OperatorLabel::N), eig, beta)
        }
        SweepObservable::SectorGap => {
            Ok(eig.sector_energies(Sector::Fermionic)[0] - eig.sector_energies(Sector::Bosonic)[0])
        }
        SweepObservable::GroundOverlapSquared => Ok(eig.ground_overlap_squared()),
    }
}

/// Re-diagonalizes at each `n_max` and reports successive differences.
pub fn truncation_sweep(
    p: &ModelParams,
    beta: Beta,
    observable: SweepObservable,
    n_max_list: &[usize],
    tolerance: f64,
) -> Result<ConvergenceReport> {
    if n_max_list.len() < 2 {
        return Err(Error::param("n_max_list", "need at least two truncations"));
    }
    if n_max_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("n_max_list", "must be strictly ascending"));
    }
    let values = n_max_list
        .iter()
        .map(|&n| evaluate_observable(&EigenSystem::diagonalize(p, n)?, observable, beta))
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    // growth below the noise floor is not a convergence failure
    let floor = 1e-13 * values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let non_monotone = differences
        .windows(2)
        .any(|w| w[1].abs() > w[0].abs() && w[1].abs() > floor);
    let last = differences.last().copied().unwrap_or(f64::INFINITY).abs();
    Ok(ConvergenceReport {
        observable,
        n_max: n_max_list.to_vec(),
        values,
        differences,
        non_monotone,
        tolerance,
        converged: last <= tolerance && !non_monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{self, SectorLevel};
    use crate::model::fermi_occupation;

    fn params(m: f64, mu: f64, lambda: f64, beta: Beta) -> ModelParams {
        ModelParams::new(m, mu, lambda, beta).unwrap()
    }

    #[test]
    fn hamiltonian_is_symmetric_and_conserves_number() {
        let p = params(1.3, 0.7, 0.9, Beta::Infinite);
        let h = build_hamiltonian(&p, 20).unwrap();
        assert_eq!(h.matrix, h.matrix.transpose());
        let n = build_operator(OperatorLabel::N, &p, h.basis);
        let comm = &h.matrix * &n.matrix - &n.matrix * &h.matrix;
        assert_eq!(comm.amax(), 0.0);
        assert_eq!(&n.matrix * &n.matrix, n.matrix);
    }

    #[test]
    fn free_spectrum_is_exact_at_any_truncation() {
        for n_max in [1, 3, 17] {
            let p = params(1.5, 0.25, 0.0, Beta::Infinite);
            let eig = EigenSystem::diagonalize(&p, n_max).unwrap();
            for (k, e) in eig.sector_energies(Sector::Bosonic).iter().enumerate() {
                assert!((e - (k as f64 + 0.5) * 1.5).abs() < 1e-13);
            }
            for (k, e) in eig.sector_energies(Sector::Fermionic).iter().enumerate() {
                assert!((e - (k as f64 + 0.5) * 1.5 - 0.25).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn residuals_are_small() {
        let p = params(1.0, 1.0, 1.0, Beta::Infinite);
        let eig = EigenSystem::diagonalize(&p, 80).unwrap();
        assert!(eig.max_residual() <= 1e-10 * eig.h_norm);
        assert!(eig.energies.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn interacting_fermion_ground_energy() {
        let p = params(1.0, 1.0, 1.0, Beta::Infinite);
        let eig = EigenSystem::diagonalize(&p, 60).unwrap();
        let e0f = eig.sector_energies(Sector::Fermionic)[0];
        let oracle = analytic::energy(
            &p,
            SectorLevel {
                sector: Sector::Fermionic,
                n: 0,
            },
        );
        assert!((e0f - oracle).abs() < 1e-8);
    }

    #[test]
    fn number_expectation_free() {
        let p = params(1.0, 0.8, 0.0, Beta::Finite(3.0));
        let eig = EigenSystem::diagonalize(&p, 10).unwrap();
        let n = thermal_expectation(&eig.operator(OperatorLabel::N), &eig, p.beta).unwrap();
        assert!((n - fermi_occupation(0.8, 3.0)).abs() < 1e-12);
        let q = thermal_expectation(&eig.operator(OperatorLabel::Q), &eig, p.beta).unwrap();
        assert!(q.abs() < 1e-14);
    }

    #[test]
    fn phi_expectation_sector_argument() {
        let p = params(1.0, 1.0, 0.1, Beta::Finite(4.0));
        let eig = EigenSystem::diagonalize(&p, 60).unwrap();
        let q = thermal_expectation(&eig.operator(OperatorLabel::Q), &eig, p.beta).unwrap();
        let oracle = -0.1 * fermi_occupation(analytic::mass_shift(&p), 4.0);
        assert!((q - oracle).abs() < 1e-8, "{q} vs {oracle}");
    }

    #[test]
    fn qq_free_matches_closed_form() {
        let beta = 2.5;
        let p = params(1.2, 0.6, 0.0, Beta::Finite(beta));
        let eig = EigenSystem::diagonalize(&p, 40).unwrap();
        let q = eig.operator(OperatorLabel::Q);
        for k in 0..32 {
            let tau = beta * k as f64 / 31.0;
            let v = time_ordered_two_point(&q, &q, tau, &eig, p.beta, Statistics::Bosonic).unwrap();
            let oracle = analytic::ho_thermal_correlator(1.2, p.beta, tau).unwrap();
            assert!((v - oracle).abs() < 1e-10, "tau={tau}: {v} vs {oracle}");
        }
    }

    #[test]
    fn fermion_propagator_zero_temperature() {
        let p = params(1.0, 1.0, 0.0, Beta::Infinite);
        let eig = EigenSystem::diagonalize(&p, 5).unwrap();
        let c = eig.operator(OperatorLabel::C);
        let cd = eig.operator(OperatorLabel::CDag);
        let at = |tau| {
            time_ordered_two_point(&c, &cd, tau, &eig, Beta::Infinite, Statistics::Fermionic)
                .unwrap()
        };
        assert!((at(1.0) - (-1f64).exp()).abs() < 1e-14);
        assert_eq!(at(-1.0), 0.0);
        assert_eq!(at(0.0), 0.0);
    }

    #[test]
    fn tau_domain_is_checked() {
        let p = params(1.0, 1.0, 0.0, Beta::Finite(2.0));
        let eig = EigenSystem::diagonalize(&p, 4).unwrap();
        let q = eig.operator(OperatorLabel::Q);
        assert!(time_ordered_two_point(&q, &q, 2.5, &eig, p.beta, Statistics::Bosonic).is_err());
    }

    #[test]
    fn overlap_converges() {
        let p = params(1.0, 1.0, 1.0, Beta::Infinite);
        let eig = EigenSystem::diagonalize(&p, 80).unwrap();
        let oracle = analytic::ground_state_overlap(&p).powi(2);
        assert!((eig.ground_overlap_squared() - oracle).abs() < 1e-6);
    }

    #[test]
    fn sweep_free_has_zero_differences() {
        let p = params(1.0, 1.0, 0.0, Beta::Finite(4.0));
        let r = truncation_sweep(
            &p,
            p.beta,
            SweepObservable::PhiExpectation,
            &[5, 10, 20],
            1e-10,
        )
        .unwrap();
        assert!(r.differences.iter().all(|d| *d == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn sweep_flags_tiny_truncation() {
        let p = params(1.0, 1.0, 1.0, Beta::Finite(4.0));
        let r =
            truncation_sweep(&p, p.beta, SweepObservable::PhiExpectation, &[1, 2], 1e-8).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let p = params(1.0, 1.0, 1.0, Beta::Finite(4.0));
        assert!(truncation_sweep(&p, p.beta, SweepObservable::SectorGap, &[4], 1e-8).is_err());
        assert!(truncation_sweep(&p, p.beta, SweepObservable::SectorGap, &[4, 4], 1e-8).is_err());
    }

    #[test]
    fn partition_ratio_two_level() {
        let p = params(1.0, 0.7, 0.0, Beta::Finite(3.0));
        let eig = EigenSystem::diagonalize(&p, 8).unwrap();
        assert!((eig.sector_partition_ratio(3.0) - (-0.7f64 * 3.0).exp()).abs() < 1e-14);
    }
}
