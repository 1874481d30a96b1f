//! Lattice Monte Carlo with the fermion traced out exactly.
//!
//! Because `N` commutes with `H`, the fermionic trace of the time-ordered
//! exponential is `1 + exp(-a sum_i (mu + lambda phi_i))`, which is strictly
//! positive. The boson sees a forward-difference action on a periodic lattice
//! and is sampled by site-by-site Metropolis plus a global zero-mode shift.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fermi_occupation, ModelParams};

pub const RNG_NAME: &str = "ChaCha8";

/// Largest number of stored base blocks per observable.
const MAX_BASE_BLOCKS: usize = 1 << 14;
/// Fewest blocks a binning level may have and still be used.
const MIN_BLOCKS: usize = 32;
const TUNE_INTERVAL: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub n_tau: usize,
    pub beta: f64,
}

impl LatticeConfig {
    pub fn new(n_tau: usize, beta: f64) -> Result<Self> {
        let l = LatticeConfig { n_tau, beta };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tau < 8 || !self.n_tau.is_multiple_of(2) {
            return Err(Error::param(
                "n_tau",
                format!("must be even and at least 8, got {}", self.n_tau),
            ));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::param("beta", "lattice needs finite positive beta"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.beta / self.n_tau as f64
    }

    /// Separations `0..=n_tau/2` in Euclidean time.
    pub fn tau_grid(&self) -> Vec<f64> {
        let a = self.spacing();
        (0..=self.n_tau / 2).map(|d| d as f64 * a).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfiguration {
    pub phi: Vec<f64>,
}

impl FieldConfiguration {
    pub fn zeros(lattice: &LatticeConfig) -> Self {
        FieldConfiguration {
            phi: vec![0.0; lattice.n_tau],
        }
    }

    pub fn validate(&self, lattice: &LatticeConfig) -> Result<()> {
        if self.phi.len() != lattice.n_tau {
            return Err(Error::param(
                "phi",
                format!("length {} != n_tau {}", self.phi.len(), lattice.n_tau),
            ));
        }
        if self.phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("phi", "entries must be finite"));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// `sum_i a [ ((phi_{i+1} - phi_i)/a)^2 / 2 + m^2 phi_i^2 / 2 ]`, periodic.
pub fn boson_action(config: &FieldConfiguration, m: f64, lattice: &LatticeConfig) -> f64 {
    let a = lattice.spacing();
    let n = config.phi.len();
    (0..n)
        .map(|i| {
            let d = config.phi[(i + 1) % n] - config.phi[i];
            d * d / (2.0 * a) + 0.5 * a * m * m * config.phi[i] * config.phi[i]
        })
        .sum()
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `ln(1 + exp(-a (n mu + lambda s)))` with `s = sum_i phi_i`.
fn fermion_log_weight_from_sum(p: &ModelParams, a: f64, n: usize, s: f64) -> f64 {
    softplus(-a * (n as f64 * p.mu + p.lambda * s))
}

pub fn fermion_log_weight(
    config: &FieldConfiguration,
    p: &ModelParams,
    lattice: &LatticeConfig,
) -> f64 {
    fermion_log_weight_from_sum(p, lattice.spacing(), config.phi.len(), config.sum())
}

/// `w_F = 1 + exp(-a sum_i (mu + lambda phi_i))`.
pub fn fermion_weight(
    config: &FieldConfiguration,
    p: &ModelParams,
    lattice: &LatticeConfig,
) -> Result<f64> {
    let lw = fermion_log_weight(config, p, lattice);
    let w = lw.exp();
    if !w.is_finite() {
        return Err(Error::consistency(
            "fermion_weight",
            format!("exp({lw}) overflows"),
        ));
    }
    Ok(w)
}

/// Metropolis acceptance for `phi_i -> new_value`; `sum` is the current field sum.
pub fn site_acceptance(
    phi: &[f64],
    i: usize,
    new_value: f64,
    sum: f64,
    p: &ModelParams,
    a: f64,
) -> f64 {
    let n = phi.len();
    let (l, r) = (phi[(i + n - 1) % n], phi[(i + 1) % n]);
    let old = phi[i];
    let kin = |x: f64| ((r - x).powi(2) + (x - l).powi(2)) / (2.0 * a);
    let ds = kin(new_value) - kin(old) + 0.5 * a * p.m * p.m * (new_value * new_value - old * old);
    let dlw = fermion_log_weight_from_sum(p, a, n, sum - old + new_value)
        - fermion_log_weight_from_sum(p, a, n, sum);
    (dlw - ds).exp().min(1.0)
}

/// Metropolis acceptance for the global shift `phi_i -> phi_i + delta`.
pub fn shift_acceptance(n: usize, delta: f64, sum: f64, p: &ModelParams, a: f64) -> f64 {
    let ds = a * p.m * p.m * (delta * sum + 0.5 * n as f64 * delta * delta);
    let dlw = fermion_log_weight_from_sum(p, a, n, sum + n as f64 * delta)
        - fermion_log_weight_from_sum(p, a, n, sum);
    (dlw - ds).exp().min(1.0)
}

/// One site-by-site pass with uniform proposals in `[-step, step]`.
/// Returns the acceptance rate.
pub fn metropolis_sweep<R: Rng>(
    config: &mut FieldConfiguration,
    p: &ModelParams,
    lattice: &LatticeConfig,
    step: f64,
    rng: &mut R,
) -> f64 {
    let a = lattice.spacing();
    let n = config.phi.len();
    let (inv_2a, half_am2) = (0.5 / a, 0.5 * a * p.m * p.m);
    let mut sum = config.sum();
    let mut lw = fermion_log_weight_from_sum(p, a, n, sum);
    let mut accepted = 0usize;
    let phi = &mut config.phi;
    for i in 0..n {
        let l = phi[if i == 0 { n - 1 } else { i - 1 }];
        let r = phi[if i + 1 == n { 0 } else { i + 1 }];
        let old = phi[i];
        let new = old + step * (2.0 * rng.random::<f64>() - 1.0);
        // same difference as site_acceptance, with the current log weight cached
        let kin = |x: f64| ((r - x) * (r - x) + (x - l) * (x - l)) * inv_2a;
        let ds = kin(new) - kin(old) + half_am2 * (new * new - old * old);
        let new_sum = sum - old + new;
        let new_lw = fermion_log_weight_from_sum(p, a, n, new_sum);
        let acc = (new_lw - lw - ds).exp().min(1.0);
        if rng.random::<f64>() < acc {
            phi[i] = new;
            sum = new_sum;
            lw = new_lw;
            accepted += 1;
        }
    }
    accepted as f64 / n as f64
}

/// Global shift move; returns whether it was accepted.
pub fn shift_move<R: Rng>(
    config: &mut FieldConfiguration,
    p: &ModelParams,
    lattice: &LatticeConfig,
    step: f64,
    rng: &mut R,
) -> bool {
    let delta = step * (2.0 * rng.random::<f64>() - 1.0);
    let acc = shift_acceptance(config.phi.len(), delta, config.sum(), p, lattice.spacing());
    if rng.random::<f64>() < acc {
        config.phi.iter_mut().for_each(|x| *x += delta);
        true
    } else {
        false
    }
}

/// `<phi_i phi_{i+d}>` of the free lattice action.
pub fn free_lattice_propagator(m: f64, lattice: &LatticeConfig, d: usize) -> f64 {
    let n = lattice.n_tau;
    let a = lattice.spacing();
    (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            (theta * d as f64).cos() / (4.0 / a * (0.5 * theta).sin().powi(2) + a * m * m)
        })
        .sum::<f64>()
        / n as f64
}

/// Exact lattice `<phi>`: completing the square in the one-fermion sector
/// shifts `phi` by `-lambda/m^2` and `mu` to `mu_lambda` with no lattice error.
pub fn lattice_exact_phi(p: &ModelParams, lattice: &LatticeConfig) -> f64 {
    let mu_l = p.mu - p.lambda * p.lambda / (2.0 * p.m * p.m);
    -p.lambda / (p.m * p.m) * fermi_occupation(mu_l, lattice.beta)
}

/// Exact lattice `<phi_d phi_0>`.
pub fn lattice_exact_two_point(p: &ModelParams, lattice: &LatticeConfig, d: usize) -> f64 {
    let mu_l = p.mu - p.lambda * p.lambda / (2.0 * p.m * p.m);
    let c = p.lambda / (p.m * p.m);
    free_lattice_propagator(p.m, lattice, d) + c * c * fermi_occupation(mu_l, lattice.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub thermalization: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Independent ChaCha stream; distinct chains use distinct streams.
    pub stream: u64,
}

impl McParams {
    pub fn new(sweeps: usize, seed: u64) -> Self {
        McParams {
            thermalization: (sweeps / 10).max(1000),
            sweeps,
            seed,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thermalization == 0 {
            return Err(Error::param("thermalization", "must be positive"));
        }
        if self.sweeps < MIN_BLOCKS * 4 {
            return Err(Error::param(
                "sweeps",
                format!("need at least {}", MIN_BLOCKS * 4),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub tau_int: f64,
    pub samples: usize,
    pub seed: u64,
    /// Block length at which the binning error was read off.
    pub block_size: usize,
    pub plateau: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub phi: ChainEstimate,
    /// `<phi(tau) phi(0)>` for `tau` in [`LatticeConfig::tau_grid`].
    pub correlator: Vec<ChainEstimate>,
    pub tau: Vec<f64>,
    pub step: f64,
    pub shift_step: f64,
    pub acceptance: f64,
    pub shift_acceptance: f64,
    pub unthermalized: bool,
    pub rng: String,
    pub seed: u64,
    pub stream: u64,
}

struct Accumulator {
    block_size: usize,
    blocks: Vec<f64>,
    current: f64,
    filled: usize,
    sum: f64,
    sum_sq: f64,
    count: usize,
}

impl Accumulator {
    fn new(block_size: usize) -> Self {
        Accumulator {
            block_size,
            blocks: Vec::new(),
            current: 0.0,
            filled: 0,
            sum: 0.0,
            sum_sq: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.count += 1;
        self.current += x;
        self.filled += 1;
        if self.filled == self.block_size {
            self.blocks.push(self.current / self.block_size as f64);
            self.current = 0.0;
            self.filled = 0;
        }
    }

    fn estimate(&self, seed: u64) -> (ChainEstimate, bool) {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var_raw = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        let b = binning(&self.blocks);
        let stderr = b.stderr;
        let tau_int = if var_raw > 0.0 {
            0.5 * stderr * stderr * n / var_raw
        } else {
            0.5
        };
        // halves of the block series, compared against the binned error
        let half = self.blocks.len() / 2;
        let m1 = self.blocks[..half].iter().sum::<f64>() / half as f64;
        let m2 = self.blocks[half..2 * half].iter().sum::<f64>() / half as f64;
        let drift = (m1 - m2).abs() > 4.0 * 2.0 * stderr + f64::EPSILON * mean.abs();
        (
            ChainEstimate {
                mean,
                stderr,
                tau_int,
                samples: self.count,
                seed,
                block_size: b.level_block * self.block_size,
                plateau: b.plateau,
            },
            drift,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    /// Standard error at each doubling level.
    pub levels: Vec<f64>,
    pub stderr: f64,
    /// Number of base blocks merged at the chosen level.
    pub level_block: usize,
    pub plateau: bool,
}

fn naive_stderr(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Blocking analysis: block length doubles until the error estimate stops
/// growing beyond its own statistical uncertainty.
pub fn binning(series: &[f64]) -> Binning {
    let mut levels = Vec::new();
    let mut counts = Vec::new();
    let mut cur = series.to_vec();
    while cur.len() >= MIN_BLOCKS {
        levels.push(naive_stderr(&cur));
        counts.push(cur.len());
        cur = cur.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    if levels.is_empty() {
        let e = if series.len() > 1 {
            naive_stderr(series)
        } else {
            0.0
        };
        return Binning {
            levels: vec![e],
            stderr: e,
            level_block: 1,
            plateau: false,
        };
    }
    for l in 0..levels.len().saturating_sub(2) {
        // the next two levels must both sit within the noise of this one
        let delta = |k: usize| 2.0 / (2.0 * (counts[k] as f64 - 1.0)).sqrt();
        if levels[l + 1] <= levels[l] * (1.0 + delta(l + 1))
            && levels[l + 2] <= levels[l] * (1.0 + delta(l + 2))
        {
            let stderr = levels[l..=l + 2].iter().cloned().fold(0.0, f64::max);
            let pick = l + levels[l..=l + 2]
                .iter()
                .position(|&e| e == stderr)
                .unwrap_or(0);
            return Binning {
                stderr,
                level_block: 1 << pick,
                plateau: true,
                levels,
            };
        }
    }
    let last = levels.len() - 1;
    Binning {
        stderr: levels[last],
        level_block: 1 << last,
        plateau: false,
        levels,
    }
}

/// Runs one chain from a cold start.
pub fn run_chain(p: &ModelParams, lattice: &LatticeConfig, mc: &McParams) -> Result<ChainRun> {
    run_chain_inner(p, lattice, mc, None)
}

/// As [`run_chain`], writing one line per measurement to `sink`:
/// the lattice average of `phi`, then `phi(tau) phi(0)` on the tau grid.
pub fn run_chain_streaming(
    p: &ModelParams,
    lattice: &LatticeConfig,
    mc: &McParams,
    sink: &mut dyn Write,
) -> Result<ChainRun> {
    run_chain_inner(p, lattice, mc, Some(sink))
}

fn run_chain_inner(
    p: &ModelParams,
    lattice: &LatticeConfig,
    mc: &McParams,
    mut sink: Option<&mut dyn Write>,
) -> Result<ChainRun> {
    p.validate()?;
    lattice.validate()?;
    mc.validate()?;
    if p.beta.value()? != lattice.beta {
        return Err(Error::param("beta", "model and lattice disagree"));
    }
    let n = lattice.n_tau;
    let half = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(mc.stream);
    let mut cfg = FieldConfiguration::zeros(lattice);
    let mut step = lattice.spacing().sqrt();
    let mut shift_step = 1.0 / (p.m * lattice.beta.sqrt());

    let (mut acc_sum, mut shift_acc) = (0.0, 0usize);
    for t in 1..=mc.thermalization {
        acc_sum += metropolis_sweep(&mut cfg, p, lattice, step, &mut rng);
        shift_acc += shift_move(&mut cfg, p, lattice, shift_step, &mut rng) as usize;
        if t % TUNE_INTERVAL == 0 {
            let rate = acc_sum / TUNE_INTERVAL as f64;
            let srate = shift_acc as f64 / TUNE_INTERVAL as f64;
            step *= (rate / 0.5).clamp(0.5, 2.0);
            shift_step *= (srate.max(0.02) / 0.5).clamp(0.5, 2.0);
            acc_sum = 0.0;
            shift_acc = 0;
        }
    }

    let block_size = mc.sweeps.div_ceil(MAX_BASE_BLOCKS);
    let mut phi_acc = Accumulator::new(block_size);
    let mut corr_acc: Vec<Accumulator> = (0..=half).map(|_| Accumulator::new(block_size)).collect();
    let mut corr = vec![0.0; half + 1];
    let (mut acc_total, mut shift_total) = (0.0, 0usize);
    for _ in 0..mc.sweeps {
        acc_total += metropolis_sweep(&mut cfg, p, lattice, step, &mut rng);
        shift_total += shift_move(&mut cfg, p, lattice, shift_step, &mut rng) as usize;
        let phi = &cfg.phi;
        let mean = cfg.sum() / n as f64;
        for (d, c) in corr.iter_mut().enumerate() {
            let wrapped: f64 = phi[..n - d]
                .iter()
                .zip(&phi[d..])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                + phi[n - d..]
                    .iter()
                    .zip(&phi[..d])
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
            *c = wrapped / n as f64;
        }
        phi_acc.push(mean);
        for (a, c) in corr_acc.iter_mut().zip(&corr) {
            a.push(*c);
        }
        if let Some(w) = sink.as_mut() {
            let mut line = format!("{mean:.16e}");
            for c in &corr {
                line.push_str(&format!(" {c:.16e}"));
            }
            writeln!(w, "{line}").map_err(|e| Error::Unsupported(format!("sample stream: {e}")))?;
        }
    }

    let (phi, mut unthermalized) = phi_acc.estimate(mc.seed);
    let mut correlator = Vec::with_capacity(half + 1);
    for a in &corr_acc {
        let (e, drift) = a.estimate(mc.seed);
        unthermalized |= drift;
        correlator.push(e);
    }
    Ok(ChainRun {
        phi,
        correlator,
        tau: lattice.tau_grid(),
        step,
        shift_step,
        acceptance: acc_total / mc.sweeps as f64,
        shift_acceptance: shift_total as f64 / mc.sweeps as f64,
        unthermalized,
        rng: RNG_NAME.to_string(),
        seed: mc.seed,
        stream: mc.stream,
    })
}

/// Runs `chains` independent streams concurrently and merges them by inverse
/// variance in stream order.
pub fn run_chains(
    p: &ModelParams,
    lattice: &LatticeConfig,
    mc: &McParams,
    chains: usize,
) -> Result<Vec<ChainRun>> {
    let runs: Vec<Result<ChainRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..chains as u64)
            .map(|k| {
                let mc = McParams {
                    stream: mc.stream + k,
                    ..*mc
                };
                s.spawn(move || run_chain(p, lattice, &mc))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    runs.into_iter().collect()
}

pub fn merge_estimates(estimates: &[ChainEstimate]) -> Result<ChainEstimate> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::param("estimates", "empty"))?;
    if estimates.iter().any(|e| !(e.stderr > 0.0)) {
        return Err(Error::param(
            "estimates",
            "every chain needs a positive stderr",
        ));
    }
    let wsum: f64 = estimates.iter().map(|e| 1.0 / (e.stderr * e.stderr)).sum();
    let mean = estimates
        .iter()
        .map(|e| e.mean / (e.stderr * e.stderr))
        .sum::<f64>()
        / wsum;
    let samples = estimates.iter().map(|e| e.samples).sum();
    let tau_int = estimates
        .iter()
        .map(|e| e.tau_int * e.samples as f64)
        .sum::<f64>()
        / samples as f64;
    Ok(ChainEstimate {
        mean,
        stderr: wsum.sqrt().recip(),
        tau_int,
        samples,
        seed: first.seed,
        block_size: estimates.iter().map(|e| e.block_size).max().unwrap_or(1),
        plateau: estimates.iter().all(|e| e.plateau),
    })
}
