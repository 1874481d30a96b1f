//! Connected fermion loops with bosonic insertions at finite temperature.
//!
//! A single cyclic ordering of `j` insertions with bosonic Matsubara momenta
//! `p_1..p_j` evaluates to
//!
//! ```text
//! L = -i^j beta sum_{n>0} (-x)^n  ∮ dk/2π  e^{-i(k+iμ)βn} / Π_r (k + q_r + iμ),   x = e^{-μβ}
//! ```
//!
//! with `q_r` the cumulative sums `0, p_1, p_1+p_2, ...`. Poles are grouped by
//! the integer grid index of `q_r`, so coincident partial sums become exact
//! higher-order poles. Every `e^{i q βn}` phase is exactly one on the grid, so
//! the winding integrand reduces to a polynomial in `n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fermi_occupation, NumericPolicy};
use crate::series::{self, winding_sum};

/// Largest `j` accepted anywhere in this module.
pub const MAX_INSERTIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    /// Bosonic Matsubara indices of the external momenta, in loop order.
    pub momenta: Vec<i64>,
    pub mu: f64,
    pub beta: f64,
    pub max_winding: usize,
}

impl LoopSpec {
    pub fn new(momenta: Vec<i64>, mu: f64, beta: f64, max_winding: usize) -> Result<Self> {
        let spec = LoopSpec {
            momenta,
            mu,
            beta,
            max_winding,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero_momenta(j: usize, mu: f64, beta: f64, max_winding: usize) -> Result<Self> {
        Self::new(vec![0; j], mu, beta, max_winding)
    }

    pub fn j(&self) -> usize {
        self.momenta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.momenta.is_empty() {
            return Err(Error::param("j", "need at least one insertion"));
        }
        if self.momenta.len() > MAX_INSERTIONS {
            return Err(Error::param(
                "j",
                format!("at most {MAX_INSERTIONS} insertions supported"),
            ));
        }
        let total: i64 = self.momenta.iter().sum();
        if total != 0 {
            return Err(Error::MomentumNotConserved(total));
        }
        check_thermal(self.mu, self.beta)?;
        if self.max_winding < 1 {
            return Err(Error::param("winding_cutoff", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_thermal(mu: f64, beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param(
            "beta",
            "fermion loops need a finite positive beta",
        ));
    }
    if !(mu > 0.0) {
        return Err(Error::Unsupported(format!(
            "fermion loops need mu > 0, got {mu}"
        )));
    }
    Ok(())
}

/// A set of coincident cumulative momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoleGroup {
    /// Grid index of the cumulative momentum.
    pub index: i64,
    /// Pole order.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopResult {
    pub momenta: Vec<i64>,
    /// Truncated winding sum; equals the sum of `winding_terms`.
    pub value: Complex64,
    /// Geometric resummation of the same polynomial-in-`n` integrand.
    pub resummed: Complex64,
    /// Term `n` of the winding sum at position `n - 1`.
    pub winding_terms: Vec<Complex64>,
    pub tail_bound: f64,
    pub pole_groups: Vec<PoleGroup>,
    /// Pole orders, sorted descending.
    pub degeneracy_profile: Vec<usize>,
    /// Coefficients of `n^a` in the per-winding term, prefactors included.
    pub polynomial: Vec<Complex64>,
    /// All partial sums distinct, so the loop vanishes without residue work.
    pub fast_path: bool,
}

fn pole_groups(momenta: &[i64]) -> Vec<PoleGroup> {
    let mut groups: Vec<PoleGroup> = Vec::new();
    let mut q = 0i64;
    for p in momenta {
        match groups.iter_mut().find(|g| g.index == q) {
            Some(g) => g.order += 1,
            None => groups.push(PoleGroup { index: q, order: 1 }),
        }
        q += p;
    }
    groups
}

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Taylor coefficients (orders `0..len`) of `prod_t (d_t + h)^{-m_t}`.
fn rational_series(factors: &[(f64, usize)], len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    acc[0] = 1.0;
    for &(d, m) in factors {
        // (d + h)^{-m} = d^{-m} sum_b C(m+b-1, b) (-h/d)^b
        let mut f = vec![0.0; len];
        let mut c = d.powi(-(m as i32));
        for (b, slot) in f.iter_mut().enumerate() {
            *slot = c;
            c *= -((m + b) as f64) / ((b + 1) as f64) / d;
        }
        let mut next = vec![0.0; len];
        for (a, &x) in acc.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in f.iter().enumerate().take(len - a) {
                next[a + b] += x * y;
            }
        }
        acc = next;
    }
    acc
}

/// Per-winding polynomial coefficients `K_a` such that term `n` of the
/// winding sum is `(-x)^n sum_a K_a n^a`.
fn winding_polynomial(groups: &[PoleGroup], j: usize, beta: f64) -> Vec<Complex64> {
    let omega = |idx: i64| 2.0 * std::f64::consts::PI * idx as f64 / beta;
    let max_order = groups.iter().map(|g| g.order).max().unwrap_or(1);
    // rho[a] = sum_g R_{g, order_g - 1 - a}
    let mut rho = vec![0.0; max_order];
    for g in groups {
        let factors: Vec<(f64, usize)> = groups
            .iter()
            .filter(|t| t.index != g.index)
            .map(|t| (omega(t.index) - omega(g.index), t.order))
            .collect();
        let r = rational_series(&factors, g.order);
        for (a, slot) in rho.iter_mut().enumerate().take(g.order) {
            *slot += r[g.order - 1 - a];
        }
    }
    // I_n residue part: -i sum_a (-i beta n)^a / a! * rho[a]
    // full prefactor: -i^j beta
    let mut fact = 1.0;
    let mut beta_pow = 1.0;
    (0..max_order)
        .map(|a| {
            if a > 0 {
                fact *= a as f64;
                beta_pow *= beta;
            }
            let phase = -i_pow(j + 3 * (a + 1));
            phase * (beta * beta_pow / fact * rho[a])
        })
        .collect()
}

/// One cyclic ordering of a connected loop.
pub fn connected_loop(spec: &LoopSpec, policy: &NumericPolicy) -> Result<LoopResult> {
    spec.validate()?;
    let j = spec.j();
    let groups = pole_groups(&spec.momenta);
    let mut profile: Vec<usize> = groups.iter().map(|g| g.order).collect();
    profile.sort_unstable_by(|a, b| b.cmp(a));
    let zero = Complex64::new(0.0, 0.0);

    if j >= 2 && groups.len() == j {
        return Ok(LoopResult {
            momenta: spec.momenta.clone(),
            value: zero,
            resummed: zero,
            winding_terms: Vec::new(),
            tail_bound: 0.0,
            pole_groups: groups,
            degeneracy_profile: profile,
            polynomial: Vec::new(),
            fast_path: true,
        });
    }

    let polynomial = winding_polynomial(&groups, j, spec.beta);
    evaluate_polynomial(spec, policy, groups, profile, polynomial)
}

/// Same as [`connected_loop`] but always takes the residue route.
pub fn connected_loop_general(spec: &LoopSpec, policy: &NumericPolicy) -> Result<LoopResult> {
    spec.validate()?;
    let groups = pole_groups(&spec.momenta);
    let mut profile: Vec<usize> = groups.iter().map(|g| g.order).collect();
    profile.sort_unstable_by(|a, b| b.cmp(a));
    let polynomial = winding_polynomial(&groups, spec.j(), spec.beta);
    evaluate_polynomial(spec, policy, groups, profile, polynomial)
}

fn evaluate_polynomial(
    spec: &LoopSpec,
    policy: &NumericPolicy,
    groups: Vec<PoleGroup>,
    profile: Vec<usize>,
    polynomial: Vec<Complex64>,
) -> Result<LoopResult> {
    let x = (-spec.mu * spec.beta).exp();
    let y = -x;
    let scale = spec.beta.powi(spec.j() as i32).max(1.0);
    let target = policy.abs_tol * 1e-4 * scale;
    let direct = winding_sum(&polynomial, y, target, spec.max_winding, true)?;
    let resummed: Complex64 = polynomial
        .iter()
        .enumerate()
        .map(|(a, c)| c * series::power_sum_closed(a, y))
        .sum();
    let gap = (direct.value - resummed).norm();
    if gap > direct.tail_bound + policy.abs_tol * scale {
        return Err(Error::consistency(
            "loop_resummation",
            format!(
                "winding sum {} vs resummed {} (tail bound {:e})",
                direct.value, resummed, direct.tail_bound
            ),
        ));
    }
    Ok(LoopResult {
        momenta: spec.momenta.clone(),
        value: direct.value,
        resummed,
        winding_terms: direct.breakdown,
        tail_bound: direct.tail_bound,
        pole_groups: groups,
        degeneracy_profile: profile,
        polynomial,
        fast_path: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroMomentumLoop {
    pub j: usize,
    /// Rational closed form.
    pub value: f64,
    /// Direct alternating-series summation.
    pub direct: f64,
    pub tail_bound: f64,
}

/// `-beta^j sum_{n>0} n^{j-1} (-x)^n`: the connected `j`-point function of the
/// number operator at zero external momenta, summed over its `(j-1)!`
/// orderings.
pub fn connected_loop_zero_momenta(
    j: usize,
    mu: f64,
    beta: f64,
    policy: &NumericPolicy,
) -> Result<ZeroMomentumLoop> {
    if j < 1 {
        return Err(Error::param("j", "need at least one insertion"));
    }
    check_thermal(mu, beta)?;
    let y = -(-mu * beta).exp();
    let bj = beta.powi(j as i32);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); j];
    coeffs[j - 1] = Complex64::new(1.0, 0.0);
    let direct = winding_sum(
        &coeffs,
        y,
        policy.abs_tol * 1e-2,
        policy.winding_cutoff,
        false,
    )?;
    let closed = series::power_sum_closed(j - 1, y);
    if (direct.value.re - closed).abs() > direct.tail_bound + policy.abs_tol {
        return Err(Error::consistency(
            "zero_momentum_loop",
            format!("direct {} vs closed {closed}", direct.value.re),
        ));
    }
    Ok(ZeroMomentumLoop {
        j,
        value: -bj * closed,
        direct: -bj * direct.value.re,
        tail_bound: bj * direct.tail_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedLoop {
    pub momenta: Vec<i64>,
    pub value: f64,
    /// Imaginary part left after summing orderings; zero up to rounding.
    pub imag_residual: f64,
    pub orderings: Vec<Vec<i64>>,
    pub ordering_values: Vec<Complex64>,
}

fn cyclic_orderings(momenta: &[i64]) -> Vec<Vec<i64>> {
    fn rec(prefix: &mut Vec<i64>, rest: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    let mut prefix = vec![momenta[0]];
    let mut rest = momenta[1..].to_vec();
    rec(&mut prefix, &mut rest, &mut out);
    out
}

/// Sum of [`connected_loop`] over the `(j-1)!` cyclic orderings of the
/// insertions (labelled, so equal momenta are still distinct legs).
pub fn permutation_symmetrized_loop(
    momenta: &[i64],
    mu: f64,
    beta: f64,
    policy: &NumericPolicy,
) -> Result<SymmetrizedLoop> {
    LoopSpec::new(momenta.to_vec(), mu, beta, policy.winding_cutoff)?;
    let orderings = cyclic_orderings(momenta);
    let ordering_values = orderings
        .iter()
        .map(|o| {
            let spec = LoopSpec::new(o.clone(), mu, beta, policy.winding_cutoff)?;
            Ok(connected_loop(&spec, policy)?.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: Complex64 = ordering_values.iter().sum();
    let scale = ordering_values.iter().map(|v| v.norm()).fold(1.0, f64::max);

    if momenta.iter().all(|&p| p == 0) {
        let zm = connected_loop_zero_momenta(momenta.len(), mu, beta, policy)?;
        if (total.re - zm.value).abs() > policy.abs_tol * zm.value.abs().max(1.0) {
            return Err(Error::consistency(
                "symmetrized_zero_momenta",
                format!(
                    "orderings sum to {} but closed form gives {}",
                    total.re, zm.value
                ),
            ));
        }
    } else if total.norm() > policy.abs_tol * scale {
        return Err(Error::consistency(
            "momentum_cancellation",
            format!("symmetrized loop {total} does not vanish"),
        ));
    }
    Ok(SymmetrizedLoop {
        momenta: momenta.to_vec(),
        value: total.re,
        imag_residual: total.im,
        orderings,
        ordering_values,
    })
}

/// Restricted-growth strings of length `j`, in lexicographic order.
pub fn set_partitions(j: usize) -> Vec<Vec<usize>> {
    fn rec(a: &mut Vec<usize>, max: usize, j: usize, out: &mut Vec<Vec<usize>>) {
        if a.len() == j {
            out.push(a.clone());
            return;
        }
        for b in 0..=max + 1 {
            a.push(b);
            rec(a, max.max(b), j, out);
            a.pop();
        }
    }
    if j == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut a = vec![0];
    rec(&mut a, 0, j, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberCorrelator {
    pub j: usize,
    pub value: f64,
    pub fermi_occupation: f64,
    pub abs_err: f64,
    /// Real-space connected piece (single block).
    pub connected: f64,
    pub partitions: usize,
}

/// `<N(tau_1) ... N(tau_j)>` assembled from connected loops over all set
/// partitions of the insertions. A block of size `s` contributes its `(s-1)!`
/// orderings times the single-ordering zero-momentum loop, divided by `beta^s`.
pub fn full_number_correlator(
    j: usize,
    mu: f64,
    beta: f64,
    policy: &NumericPolicy,
) -> Result<NumberCorrelator> {
    if j < 1 {
        return Err(Error::param("j", "need at least one insertion"));
    }
    if j > MAX_INSERTIONS {
        return Err(Error::param(
            "j",
            format!("partition enumeration capped at j = {MAX_INSERTIONS}"),
        ));
    }
    check_thermal(mu, beta)?;

    let mut block = vec![0.0; j + 1];
    let mut orderings = 1.0;
    for (s, slot) in block.iter_mut().enumerate().skip(1) {
        if s > 1 {
            orderings *= (s - 1) as f64;
        }
        let spec = LoopSpec::zero_momenta(s, mu, beta, policy.winding_cutoff)?;
        let single = connected_loop(&spec, policy)?;
        *slot = orderings * single.value.re / beta.powi(s as i32);
    }

    let partitions = set_partitions(j);
    let mut value = 0.0;
    let mut sizes = vec![0usize; j];
    for rgs in &partitions {
        sizes.iter_mut().for_each(|s| *s = 0);
        for &b in rgs {
            sizes[b] += 1;
        }
        value += sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| block[s])
            .product::<f64>();
    }

    let occ = fermi_occupation(mu, beta);
    let abs_err = (value - occ).abs();
    if abs_err > policy.abs_tol {
        return Err(Error::consistency(
            "number_correlator",
            format!("j = {j}: loops give {value}, occupation is {occ}"),
        ));
    }
    Ok(NumberCorrelator {
        j,
        value,
        fermi_occupation: occ,
        abs_err,
        connected: block[j],
        partitions: partitions.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub j: usize,
    pub x: f64,
    /// `-x / (1 + x)`, the value the series must reach.
    pub target: f64,
    /// Partial sums after each term.
    pub partial_sums: Vec<f64>,
    pub value: f64,
    pub tail_bound: f64,
    pub residual: f64,
    /// Largest mismatch between the binomial bracket and its telescoped form.
    pub binomial_gap: f64,
    pub passed: bool,
}

/// Sums `sum_{n>0} (-x)^n [n^{j-1} + f sum_{i=1}^{j-1} C(j-1, i-1) n^{i-1}]`
/// with `f = x/(1+x)` and compares it with `-f`.
pub fn telescoping_check(
    j: usize,
    mu: f64,
    beta: f64,
    tolerance: f64,
    max_terms: usize,
) -> Result<TelescopingReport> {
    if j < 2 {
        return Err(Error::param("j", "telescoping check needs j >= 2"));
    }
    check_thermal(mu, beta)?;
    let x = (-mu * beta).exp();
    let f = x / (1.0 + x);
    let d = (j - 1) as i32;

    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    let bracket = |n: f64| -> (f64, f64) {
        let sum: f64 = (1..j)
            .map(|i| binom(j - 1, i - 1) * n.powi(i as i32 - 1))
            .sum();
        let tele = (n + 1.0).powi(d) - n.powi(d);
        (
            n.powi(d) + f * sum,
            (sum - tele).abs() / tele.abs().max(1.0),
        )
    };

    let mut partial_sums = Vec::new();
    let mut value = 0.0;
    let mut pow = 1.0;
    let mut binomial_gap: f64 = 0.0;
    let mut tail = f64::INFINITY;
    for n in 1..=max_terms {
        pow *= -x;
        let (b, gap) = bracket(n as f64);
        binomial_gap = binomial_gap.max(gap);
        value += pow * b;
        partial_sums.push(value);
        // |bracket(n)| <= (1 + f) (n+1)^{j-1}
        let next = (1.0 + f) * ((n + 2) as f64).powi(d) * pow.abs() * x;
        tail = series::ratio_tail_bound(next, j - 1, n + 1, x);
        if tail <= tolerance * 1e-2 || pow == 0.0 {
            break;
        }
    }
    let residual = (value + f).abs();
    Ok(TelescopingReport {
        j,
        x,
        target: -f,
        partial_sums,
        value,
        tail_bound: tail,
        residual,
        binomial_gap,
        passed: residual <= tolerance && tail <= tolerance && binomial_gap < 1e-12,
    })
}
