//! Command-line front end.
//!
//! Configuration comes from defaults, then an optional `key = value` file,
//! then command-line flags. Every subcommand renders a CSV table except
//! `loops` and `verify`, which emit JSON.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, Sector, SectorLevel};
use crate::exactdiag::{self, EigenSystem, OperatorLabel, SweepObservable};
use crate::lattice::{self, ChainEstimate, ChainRun, LatticeConfig, McParams};
use crate::loops;
use crate::matsubara::{self, Momentum};
use crate::model::{
    fermi_occupation, Beta, MatsubaraFrequency, ModelParams, NumericPolicy, RegularizationScheme,
    Statistics,
};

pub const CORRELATOR_HEADER: &str = "tau,analytic,exactdiag,perturbative,mc_mean,mc_stderr";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] crate::Error),
    #[error("io: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m: f64,
    pub mu: f64,
    pub lambda: f64,
    pub beta: Beta,
    pub scheme: RegularizationScheme,
    pub n_max: usize,
    pub n_tau: usize,
    pub sweeps: usize,
    /// Defaults to a tenth of `sweeps`, at least 1000.
    pub thermalization: Option<usize>,
    pub seed: u64,
    pub chains: usize,
    pub winding_cutoff: usize,
    pub abs_tol: f64,
    pub tau_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 1.0,
            mu: 1.0,
            lambda: 1.0,
            beta: Beta::Finite(4.0),
            scheme: RegularizationScheme::TimeSplitting,
            n_max: 80,
            n_tau: 64,
            sweeps: 1_000_000,
            thermalization: None,
            seed: 1,
            chains: 4,
            winding_cutoff: 100_000,
            abs_tol: 1e-10,
            tau_points: 33,
        }
    }
}

pub const CONFIG_KEYS: [&str; 14] = [
    "m",
    "mu",
    "lambda",
    "beta",
    "scheme",
    "n_max",
    "n_tau",
    "sweeps",
    "thermalization",
    "seed",
    "chains",
    "winding_cutoff",
    "abs_tol",
    "tau_points",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value {value:?} for {key}: {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "m" => self.m = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "scheme" => self.scheme = parse(key, value)?,
            "n_max" => self.n_max = parse(key, value)?,
            "n_tau" => self.n_tau = parse(key, value)?,
            "sweeps" => self.sweeps = parse(key, value)?,
            "thermalization" => self.thermalization = Some(parse(key, value)?),
            "seed" => self.seed = parse(key, value)?,
            "chains" => self.chains = parse(key, value)?,
            "winding_cutoff" => self.winding_cutoff = parse(key, value)?,
            "abs_tol" => self.abs_tol = parse(key, value)?,
            "tau_points" => self.tau_points = parse(key, value)?,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown config key {other:?}; expected one of {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn params(&self) -> CliResult<ModelParams> {
        Ok(ModelParams::new(self.m, self.mu, self.lambda, self.beta)?)
    }

    pub fn policy(&self) -> CliResult<NumericPolicy> {
        let p = NumericPolicy {
            abs_tol: self.abs_tol,
            winding_cutoff: self.winding_cutoff,
            truncation_nmax: self.n_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params()?;
        self.policy()?;
        if self.chains == 0 {
            return Err(CliError::Usage("chains must be at least 1".into()));
        }
        if self.tau_points < 2 {
            return Err(CliError::Usage("tau_points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn mc_params(&self) -> McParams {
        let mut mc = McParams::new(self.sweeps, self.seed);
        if let Some(t) = self.thermalization {
            mc.thermalization = t;
        }
        mc
    }

    pub fn finite_beta(&self) -> CliResult<f64> {
        self.beta
            .value()
            .map_err(|_| CliError::Usage("beta must be finite for this command".into()))
    }

    /// Canonical `key -> value` listing, used for report provenance.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            e.insert(k.to_string(), v);
        };
        put("m", self.m.to_string());
        put("mu", self.mu.to_string());
        put("lambda", self.lambda.to_string());
        put("beta", self.beta.to_string());
        put("scheme", self.scheme.to_string());
        put("n_max", self.n_max.to_string());
        put("n_tau", self.n_tau.to_string());
        put("sweeps", self.sweeps.to_string());
        put(
            "thermalization",
            self.mc_params().thermalization.to_string(),
        );
        put("seed", self.seed.to_string());
        put("chains", self.chains.to_string());
        put("winding_cutoff", self.winding_cutoff.to_string());
        put("abs_tol", self.abs_tol.to_string());
        put("tau_points", self.tau_points.to_string());
        e
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "yukawa",
    version,
    about = "Yukawa interaction in 0+1 dimensions"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Inverse temperature, or "inf".
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, global = true)]
    pub nmax: Option<String>,
    #[arg(long, global = true)]
    pub ntau: Option<String>,
    #[arg(long, global = true)]
    pub sweeps: Option<String>,
    /// time-splitting or symmetric.
    #[arg(long, global = true)]
    pub scheme: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic and diagonalized energies per sector.
    Spectrum {
        #[arg(long, default_value_t = 11)]
        levels: usize,
    },
    /// Thermal <phi(tau) phi(0)> from every route.
    Correlator {
        /// Include lattice Monte Carlo columns.
        #[arg(long)]
        mc: bool,
    },
    /// First-order <phi>.
    Tadpole,
    /// Order lambda^2 fermion and boson self-energies.
    Selfenergy,
    /// A single connected fermion loop.
    Loops {
        /// Bosonic Matsubara indices, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        momenta: Option<Vec<i64>>,
        /// Number of zero-momentum insertions when --momenta is absent.
        #[arg(long)]
        j: Option<usize>,
        /// Sum over cyclic orderings of the insertions.
        #[arg(long)]
        symmetrized: bool,
    },
    /// Lattice Monte Carlo estimates of <phi> and <phi(tau) phi(0)>.
    Mc {
        /// Plain-text sample stream, one measurement per line.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Cross-route verification suite.
    Verify,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        [
            ("seed", &self.seed),
            ("beta", &self.beta),
            ("m", &self.m),
            ("mu", &self.mu),
            ("lambda", &self.lambda),
            ("n_max", &self.nmax),
            ("n_tau", &self.ntau),
            ("sweeps", &self.sweeps),
            ("scheme", &self.scheme),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect()
    }

    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.overrides() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cmd_spectrum(cfg: &RunConfig, levels: usize) -> CliResult<String> {
    let p = cfg.params()?;
    let eig = EigenSystem::diagonalize(&p, cfg.n_max)?;
    if levels > cfg.n_max + 1 {
        return Err(CliError::Usage(format!(
            "levels = {levels} exceeds n_max + 1 = {}",
            cfg.n_max + 1
        )));
    }
    let mut out = String::from("sector,n,analytic,exactdiag,difference\n");
    for sector in [Sector::Bosonic, Sector::Fermionic] {
        let numeric = eig.sector_energies(sector);
        for (n, e) in numeric.iter().take(levels).enumerate() {
            let exact = analytic::energy(&p, SectorLevel { sector, n });
            writeln!(
                out,
                "{},{n},{},{},{}",
                sector.number(),
                num(exact),
                num(*e),
                num(e - exact)
            )
            .unwrap();
        }
    }
    Ok(out)
}

fn mc_runs(cfg: &RunConfig, p: &ModelParams) -> CliResult<(LatticeConfig, Vec<ChainRun>)> {
    let lat = LatticeConfig::new(cfg.n_tau, cfg.finite_beta()?)?;
    let runs = lattice::run_chains(p, &lat, &cfg.mc_params(), cfg.chains)?;
    Ok((lat, runs))
}

fn merged(
    runs: &[ChainRun],
    pick: impl Fn(&ChainRun) -> ChainEstimate,
) -> CliResult<ChainEstimate> {
    let est: Vec<ChainEstimate> = runs.iter().map(pick).collect();
    Ok(lattice::merge_estimates(&est)?)
}

pub fn cmd_correlator(cfg: &RunConfig, with_mc: bool) -> CliResult<String> {
    let p = cfg.params()?;
    let beta = cfg.finite_beta()?;
    let policy = cfg.policy()?;
    let eig = EigenSystem::diagonalize(&p, cfg.n_max)?;
    let q = eig.operator(OperatorLabel::Q);
    let mc = if with_mc {
        Some(mc_runs(cfg, &p)?)
    } else {
        None
    };

    let mut out = format!("{CORRELATOR_HEADER}\n");
    for k in 0..cfg.tau_points {
        let tau = beta * k as f64 / (cfg.tau_points - 1) as f64;
        let exact = analytic::exact_thermal_two_point(&p, tau)?;
        let ed =
            exactdiag::time_ordered_two_point(&q, &q, tau, &eig, cfg.beta, Statistics::Bosonic)?;
        let pert = matsubara::perturbative_thermal_two_point(&p, tau, &policy)?;
        let (mut mean, mut err) = (String::new(), String::new());
        if let Some((lat, runs)) = &mc {
            let a = lat.spacing();
            let d = (tau / a).round();
            if (tau - d * a).abs() <= 1e-9 * beta {
                let d = d as usize;
                let d = d.min(lat.n_tau - d);
                let e = merged(runs, |r| r.correlator[d])?;
                mean = num(e.mean);
                err = num(e.stderr);
            }
        }
        writeln!(
            out,
            "{},{},{},{},{mean},{err}",
            num(tau),
            num(exact),
            num(ed),
            num(pert)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn cmd_tadpole(cfg: &RunConfig) -> CliResult<String> {
    let p = cfg.params()?;
    match cfg.beta {
        Beta::Infinite => {
            let t = matsubara::tadpole_phi(&p, cfg.scheme)?;
            Ok(format!(
                "scheme,branch,loop_integral,value\n{},{:?},{},{}\n",
                t.scheme,
                t.branch,
                num(t.loop_integral),
                num(t.value)
            ))
        }
        Beta::Finite(_) => {
            let policy = cfg.policy()?;
            let t = matsubara::tadpole_phi_thermal(&p, &policy, cfg.winding_cutoff)?;
            let ed = EigenSystem::diagonalize(&p, cfg.n_max)?;
            let exact =
                exactdiag::thermal_expectation(&ed.operator(OperatorLabel::Q), &ed, cfg.beta)?;
            Ok(format!(
                "branch,first_order,winding_sum,windings,tail_bound,exactdiag\n{:?},{},{},{},{},{}\n",
                t.branch,
                num(t.value),
                num(t.winding_value),
                t.windings,
                num(t.tail_bound),
                num(exact)
            ))
        }
    }
}

fn complex_row(out: &mut String, kind: &str, p: &str, v: Complex64, check: Option<Complex64>) {
    let (cr, ci) = check.map(|c| (num(c.re), num(c.im))).unwrap_or_default();
    writeln!(out, "{kind},{p},{},{},{cr},{ci}", num(v.re), num(v.im)).unwrap();
}

pub fn cmd_selfenergy(cfg: &RunConfig) -> CliResult<String> {
    let p = cfg.params()?;
    let policy = cfg.policy()?;
    let mut out = String::from("kind,p,re,im,check_re,check_im\n");
    match cfg.beta {
        Beta::Infinite => {
            let pole = matsubara::extract_pole_decomposition(&p, &policy)?;
            for &k in &pole.grid {
                let s = matsubara::fermion_self_energy_2(&p, k, &policy)?;
                complex_row(&mut out, "fermion", &num(k), s.value, s.quadrature);
            }
            for &k in &pole.grid {
                let s = matsubara::boson_self_energy_2(&p, Momentum::Continuous(k), &policy)?;
                complex_row(&mut out, "boson", &num(k), s.value, s.quadrature);
            }
            let d = pole.decomposition;
            complex_row(
                &mut out,
                "pole_delta_mu",
                "",
                Complex64::new(d.delta_mu, 0.0),
                None,
            );
            complex_row(&mut out, "pole_z1f", "", Complex64::new(d.z1f, 0.0), None);
        }
        Beta::Finite(beta) => {
            for n in -4..=4 {
                let f = MatsubaraFrequency::bosonic(n, beta);
                let s = matsubara::boson_self_energy_2(&p, Momentum::Matsubara(f), &policy)?;
                complex_row(&mut out, "boson", &n.to_string(), s.value, None);
            }
            let c = matsubara::boson_correction_real_space(&p, &policy)?;
            complex_row(
                &mut out,
                "real_space_connected",
                "",
                Complex64::new(c.connected, 0.0),
                None,
            );
            complex_row(
                &mut out,
                "real_space_disconnected",
                "",
                Complex64::new(c.disconnected, 0.0),
                None,
            );
            complex_row(
                &mut out,
                "real_space_total",
                "",
                Complex64::new(c.total, 0.0),
                None,
            );
        }
    }
    Ok(out)
}

pub fn cmd_loops(
    cfg: &RunConfig,
    momenta: Option<Vec<i64>>,
    j: Option<usize>,
    symmetrized: bool,
) -> CliResult<String> {
    let beta = cfg.finite_beta()?;
    let policy = cfg.policy()?;
    let momenta = match (momenta, j) {
        (Some(m), _) => m,
        (None, Some(j)) => vec![0; j],
        (None, None) => return Err(CliError::Usage("loops needs --momenta or --j".into())),
    };
    let json = if symmetrized {
        let s = loops::permutation_symmetrized_loop(&momenta, cfg.mu, beta, &policy)?;
        serde_json::to_string_pretty(&s)
    } else {
        let spec = loops::LoopSpec::new(momenta, cfg.mu, beta, cfg.winding_cutoff)?;
        serde_json::to_string_pretty(&loops::connected_loop(&spec, &policy)?)
    };
    json.map(|s| s + "\n")
        .map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_mc(cfg: &RunConfig, samples: Option<&Path>) -> CliResult<String> {
    let p = cfg.params()?;
    let lat = LatticeConfig::new(cfg.n_tau, cfg.finite_beta()?)?;
    let runs = match samples {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = std::io::BufWriter::new(file);
            let mut runs = Vec::with_capacity(cfg.chains);
            for k in 0..cfg.chains as u64 {
                let mc = McParams {
                    stream: k,
                    ..cfg.mc_params()
                };
                runs.push(lattice::run_chain_streaming(&p, &lat, &mc, &mut w)?);
            }
            runs
        }
        None => mc_runs(cfg, &p)?.1,
    };
    let mut out =
        String::from("observable,tau,mean,stderr,tau_int,samples,lattice_exact,unthermalized\n");
    let unth = runs.iter().any(|r| r.unthermalized);
    let phi = merged(&runs, |r| r.phi)?;
    writeln!(
        out,
        "phi,,{},{},{},{},{},{unth}",
        num(phi.mean),
        num(phi.stderr),
        num(phi.tau_int),
        phi.samples,
        num(lattice::lattice_exact_phi(&p, &lat))
    )
    .unwrap();
    for (d, tau) in lat.tau_grid().iter().enumerate() {
        let e = merged(&runs, |r| r.correlator[d])?;
        writeln!(
            out,
            "two_point,{},{},{},{},{},{},{unth}",
            num(*tau),
            num(e.mean),
            num(e.stderr),
            num(e.tau_int),
            e.samples,
            num(lattice::lattice_exact_two_point(&p, &lat, d))
        )
        .unwrap();
    }
    Ok(out)
}

/// One comparison between two routes.
///
/// `within` checks pass when `abs_err <= tolerance`; `below` checks pass when
/// `actual < expected`, with `expected` holding the bound and `tolerance` 0;
/// `above` checks pass when `actual > expected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub route_a: String,
    pub route_b: String,
    pub expected: f64,
    pub actual: f64,
    pub abs_err: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn within(
        name: &str,
        route_a: &str,
        route_b: &str,
        expected: f64,
        actual: f64,
        tolerance: f64,
    ) -> Self {
        let abs_err = (actual - expected).abs();
        Check {
            name: name.into(),
            route_a: route_a.into(),
            route_b: route_b.into(),
            expected,
            actual,
            abs_err,
            tolerance,
            pass: abs_err <= tolerance,
            detail: None,
        }
    }

    pub fn below(name: &str, route_a: &str, route_b: &str, actual: f64, bound: f64) -> Self {
        Check {
            pass: actual < bound,
            tolerance: 0.0,
            ..Check::within(name, route_a, route_b, bound, actual, 0.0)
        }
    }

    pub fn above(name: &str, route_a: &str, route_b: &str, actual: f64, bound: f64) -> Self {
        Check {
            pass: actual > bound,
            ..Check::below(name, route_a, route_b, actual, bound)
        }
    }

    fn failed(name: &str, route_a: &str, route_b: &str, err: &CliError) -> Self {
        Check {
            pass: false,
            detail: Some(err.to_string()),
            ..Check::within(name, route_a, route_b, f64::NAN, f64::NAN, 0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub version: String,
    pub rng: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub pass: bool,
    pub provenance: ReportProvenance,
}

impl VerificationReport {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    /// Runs a group of checks; an error fails the whole group under `name`.
    fn group(&mut self, name: &str, a: &str, b: &str, f: impl FnOnce() -> CliResult<Vec<Check>>) {
        match f() {
            Ok(c) => self.checks.extend(c),
            Err(e) => self.checks.push(Check::failed(name, a, b, &e)),
        }
    }
}

/// Runs every cross-route check at the configured parameter point. Monte
/// Carlo checks are skipped when `sweeps = 0`.
pub fn cmd_verify(cfg: &RunConfig) -> CliResult<VerificationReport> {
    let p = cfg.params()?;
    let policy = cfg.policy()?;
    let (m, l) = (cfg.m, cfg.lambda);
    let mu = cfg.mu.abs();
    let beta = cfg.finite_beta()?;
    let mut s = Suite { checks: Vec::new() };

    s.group("truncation_convergence", "exactdiag", "exactdiag", || {
        let list = [(cfg.n_max / 2).max(1), cfg.n_max];
        let list = if list[0] == list[1] {
            vec![list[0], list[1] + 1]
        } else {
            list.to_vec()
        };
        let r = exactdiag::truncation_sweep(
            &p,
            cfg.beta,
            SweepObservable::PhiExpectation,
            &list,
            1e-8,
        )?;
        let last = r.differences.last().copied().unwrap_or(f64::NAN);
        let mut c = Check::within(
            "truncation_convergence",
            "exactdiag",
            "exactdiag",
            0.0,
            last,
            r.tolerance,
        );
        c.pass &= r.converged;
        c.detail = Some(format!("n_max sweep {:?}", r.n_max));
        Ok(vec![c])
    });

    s.group("spectrum", "analytic", "exactdiag", || {
        let eig = EigenSystem::diagonalize(&p, cfg.n_max)?;
        let mut diff: f64 = 0.0;
        for sector in [Sector::Bosonic, Sector::Fermionic] {
            for (n, e) in eig.sector_energies(sector).iter().take(11).enumerate() {
                diff = diff.max((e - analytic::energy(&p, SectorLevel { sector, n })).abs());
            }
        }
        Ok(vec![Check::within(
            "spectrum",
            "analytic",
            "exactdiag",
            0.0,
            diff,
            1e-8,
        )])
    });

    s.group("tadpole_zero_t", "matsubara", "identity", || {
        let zt = |mu: f64| ModelParams::new(m, mu, l, Beta::Infinite);
        let pos = matsubara::tadpole_phi(&zt(mu)?, RegularizationScheme::TimeSplitting)?;
        let neg = matsubara::tadpole_phi(&zt(-mu)?, RegularizationScheme::TimeSplitting)?;
        let sym = matsubara::tadpole_phi(&zt(mu)?, RegularizationScheme::Symmetric)?;
        Ok(vec![
            Check::within(
                "tadpole_time_splitting_mu_positive",
                "matsubara",
                "identity",
                0.0,
                pos.value,
                0.0,
            ),
            Check::within(
                "tadpole_time_splitting_mu_negative",
                "matsubara",
                "identity",
                -l / (m * m),
                neg.value,
                0.0,
            ),
            Check::within(
                "tadpole_symmetric_loop",
                "matsubara",
                "identity",
                0.5,
                sym.loop_integral,
                0.0,
            ),
        ])
    });

    s.group("pole_decomposition", "matsubara", "analytic", || {
        let zt = ModelParams::new(m, mu, l, Beta::Infinite)?;
        let e = matsubara::extract_pole_decomposition(&zt, &policy)?;
        let oracle = analytic::predicted_pole_decomposition(&zt);
        let resid = |lam: f64| -> CliResult<f64> {
            let q = zt.with_lambda(lam);
            let z = analytic::predicted_pole_decomposition(&q).z1f;
            Ok(1.0 - EigenSystem::diagonalize(&q, cfg.n_max)?.ground_overlap_squared() - z)
        };
        let ratio = resid(0.5)? / resid(0.25)?;
        Ok(vec![
            Check::within(
                "pole_delta_mu",
                "matsubara",
                "analytic",
                oracle.delta_mu,
                e.decomposition.delta_mu,
                1e-10,
            ),
            Check::within(
                "pole_z1f",
                "matsubara",
                "analytic",
                oracle.z1f,
                e.decomposition.z1f,
                1e-10,
            ),
            Check::within(
                "overlap_residual_ratio",
                "exactdiag",
                "matsubara",
                16.0,
                ratio,
                0.2 * 16.0,
            ),
        ])
    });

    s.group("zero_t_fermion_loop", "matsubara", "quadrature", || {
        let zt = ModelParams::new(m, mu, l, Beta::Infinite)?;
        let mut worst: f64 = 0.0;
        for k in 0..16 {
            let q = m * (-4.0 + 8.0 * k as f64 / 15.0);
            let v = matsubara::boson_self_energy_2(&zt, Momentum::Continuous(q), &policy)?;
            worst = worst
                .max(v.value.norm())
                .max(v.quadrature.map_or(f64::NAN, |c| c.norm()));
        }
        Ok(vec![Check::below(
            "zero_t_fermion_loop",
            "matsubara",
            "quadrature",
            worst,
            1e-12,
        )])
    });

    s.group("finite_t_boson_correction", "matsubara", "analytic", || {
        let b = 3f64.ln() / mu;
        let q = ModelParams::new(m, mu, l, Beta::Finite(b))?;
        let f = fermi_occupation(mu, b);
        let g = l / (m * m);
        let c = matsubara::boson_correction_real_space(&q, &policy)?;
        let mut nonzero: f64 = 0.0;
        for n in (-8..=8).filter(|n| *n != 0) {
            let freq = MatsubaraFrequency::bosonic(n, b);
            nonzero = nonzero.max(
                matsubara::boson_self_energy_2(&q, Momentum::Matsubara(freq), &policy)?
                    .value
                    .norm(),
            );
        }
        Ok(vec![
            Check::within(
                "boson_connected_p0",
                "matsubara",
                "analytic",
                g * g * f * (1.0 - f),
                c.connected,
                1e-12,
            ),
            Check::within(
                "boson_disconnected",
                "matsubara",
                "analytic",
                g * g * f * f,
                c.disconnected,
                1e-12,
            ),
            Check::within(
                "boson_real_space_total",
                "matsubara",
                "analytic",
                g * g * f,
                c.total,
                1e-12,
            ),
            Check::within(
                "boson_nonzero_modes",
                "matsubara",
                "identity",
                0.0,
                nonzero,
                1e-12,
            ),
        ])
    });

    s.group("number_correlator", "loops", "analytic", || {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let points: Vec<f64> = (0..10).map(|_| rng.random_range(0.5..3.0)).collect();
        let mut out = Vec::new();
        for j in 1..=6 {
            let mut worst: f64 = 0.0;
            for &mb in &points {
                let r = loops::full_number_correlator(j, mb / beta, beta, &policy)?;
                worst = worst.max(r.abs_err);
            }
            out.push(Check::within(
                &format!("number_correlator_j{j}"),
                "loops",
                "analytic",
                0.0,
                worst,
                1e-10,
            ));
        }
        for j in 2..=6 {
            let mut worst: f64 = 0.0;
            let mut passed = true;
            for &mb in &points {
                let r = loops::telescoping_check(j, mb / beta, beta, 1e-12, cfg.winding_cutoff)?;
                worst = worst.max(r.residual);
                passed &= r.passed;
            }
            let mut c = Check::within(
                &format!("telescoping_j{j}"),
                "loops",
                "analytic",
                0.0,
                worst,
                1e-12,
            );
            c.pass &= passed;
            out.push(c);
        }
        Ok(out)
    });

    s.group("permutation_cancellation", "loops", "identity", || {
        let mut out = Vec::new();
        for (name, momenta) in [("j3", vec![0, 3, -3]), ("j4", vec![2, -2, 5, -5])] {
            let r = loops::permutation_symmetrized_loop(&momenta, mu, beta, &policy)?;
            // orderings whose partial sums are all distinct carry only simple
            // poles and vanish on their own; the rest must be nonzero
            let (mut smallest, mut simple) = (f64::INFINITY, 0.0f64);
            for o in &r.orderings {
                let lp = loops::connected_loop(
                    &loops::LoopSpec::new(o.clone(), mu, beta, cfg.winding_cutoff)?,
                    &policy,
                )?;
                if lp.fast_path {
                    simple = simple.max(lp.value.norm());
                } else {
                    smallest = smallest.min(lp.value.norm());
                }
            }
            out.push(Check::above(
                &format!("permutation_{name}_orderings_nonzero"),
                "loops",
                "identity",
                smallest,
                1e-6,
            ));
            out.push(Check::within(
                &format!("permutation_{name}_simple_pole_orderings"),
                "loops",
                "identity",
                0.0,
                simple,
                0.0,
            ));
            out.push(Check::below(
                &format!("permutation_{name}_symmetrized"),
                "loops",
                "identity",
                r.value.abs(),
                1e-10,
            ));
        }
        Ok(out)
    });

    s.group("thermal_two_point", "exactdiag", "analytic", || {
        let eig = EigenSystem::diagonalize(&p, cfg.n_max)?;
        let q = eig.operator(OperatorLabel::Q);
        let free = p.with_lambda(0.0);
        let eig0 = EigenSystem::diagonalize(&free, cfg.n_max)?;
        let q0 = eig0.operator(OperatorLabel::Q);
        let (mut worst, mut worst0): (f64, f64) = (0.0, 0.0);
        for k in 0..32 {
            let tau = beta * k as f64 / 31.0;
            let ed = exactdiag::time_ordered_two_point(
                &q,
                &q,
                tau,
                &eig,
                cfg.beta,
                Statistics::Bosonic,
            )?;
            worst = worst.max((ed - analytic::exact_thermal_two_point(&p, tau)?).abs());
            let ed0 = exactdiag::time_ordered_two_point(
                &q0,
                &q0,
                tau,
                &eig0,
                cfg.beta,
                Statistics::Bosonic,
            )?;
            worst0 = worst0.max((ed0 - analytic::ho_thermal_correlator(m, cfg.beta, tau)?).abs());
        }
        Ok(vec![
            Check::within(
                "thermal_two_point",
                "exactdiag",
                "analytic",
                0.0,
                worst,
                1e-7,
            ),
            Check::within(
                "thermal_two_point_free",
                "exactdiag",
                "analytic",
                0.0,
                worst0,
                1e-10,
            ),
        ])
    });

    s.group("thermal_tadpole", "exactdiag", "matsubara", || {
        let at = |lam: f64| -> CliResult<(f64, f64)> {
            let q = p.with_lambda(lam);
            let eig = EigenSystem::diagonalize(&q, cfg.n_max)?;
            let ed =
                exactdiag::thermal_expectation(&eig.operator(OperatorLabel::Q), &eig, cfg.beta)?;
            let pert = matsubara::tadpole_phi_thermal(&q, &policy, cfg.winding_cutoff)?.value;
            Ok((ed, pert))
        };
        let (ed, _) = at(l)?;
        // the cubic scaling only shows once lambda^2 beta is small
        let (ed_s, pert_s) = at(0.1)?;
        let (ed_h, pert_h) = at(0.05)?;
        let ratio = (ed_s - pert_s) / (ed_h - pert_h);
        Ok(vec![
            Check::within(
                "thermal_tadpole",
                "exactdiag",
                "analytic",
                analytic::exact_phi_expectation(&p),
                ed,
                1e-8,
            ),
            Check::within(
                "thermal_tadpole_lambda_cubed",
                "exactdiag",
                "matsubara",
                8.0,
                ratio,
                0.25 * 8.0,
            ),
        ])
    });

    if cfg.sweeps > 0 {
        s.group("monte_carlo", "lattice", "exactdiag", || {
            let (_, runs) = mc_runs(cfg, &p)?;
            let phi = merged(&runs, |r| r.phi)?;
            let half = merged(&runs, |r| r.correlator[cfg.n_tau / 2])?;
            let eig = EigenSystem::diagonalize(&p, cfg.n_max)?;
            let q = eig.operator(OperatorLabel::Q);
            let ed_phi = exactdiag::thermal_expectation(&q, &eig, cfg.beta)?;
            let ed_half = exactdiag::time_ordered_two_point(
                &q,
                &q,
                0.5 * beta,
                &eig,
                cfg.beta,
                Statistics::Bosonic,
            )?;
            let mut out = vec![
                Check::within(
                    "mc_phi",
                    "lattice",
                    "exactdiag",
                    ed_phi,
                    phi.mean,
                    3.0 * phi.stderr,
                ),
                Check::within(
                    "mc_two_point_half_beta",
                    "lattice",
                    "exactdiag",
                    ed_half,
                    half.mean,
                    3.0 * half.stderr,
                ),
                Check::below(
                    "mc_phi_relative_stderr",
                    "lattice",
                    "bound",
                    phi.stderr / phi.mean.abs(),
                    0.01,
                ),
                Check::below(
                    "mc_two_point_relative_stderr",
                    "lattice",
                    "bound",
                    half.stderr / half.mean.abs(),
                    0.01,
                ),
            ];
            if runs.iter().any(|r| r.unthermalized) {
                for c in &mut out {
                    c.detail = Some("drift test flagged a chain as unthermalized".into());
                }
            }
            Ok(out)
        });
    }

    let pass = s.checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        checks: s.checks,
        pass,
        provenance: ReportProvenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rng: lattice::RNG_NAME.to_string(),
            seed: cfg.seed,
            parameters: cfg.entries(),
        },
    })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    let out = cli.common.out.as_deref();
    let text = match cli.command {
        Command::Spectrum { levels } => cmd_spectrum(&cfg, levels)?,
        Command::Correlator { mc } => cmd_correlator(&cfg, mc)?,
        Command::Tadpole => cmd_tadpole(&cfg)?,
        Command::Selfenergy => cmd_selfenergy(&cfg)?,
        Command::Loops {
            momenta,
            j,
            symmetrized,
        } => cmd_loops(&cfg, momenta, j, symmetrized)?,
        Command::Mc { samples } => cmd_mc(&cfg, samples.as_deref())?,
        Command::Verify => {
            let report = cmd_verify(&cfg)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Io(e.to_string()))?
                + "\n";
            emit(out, &json)?;
            if !report.pass {
                return Err(CliError::VerificationFailed(
                    report.failed_checks().join(", "),
                ));
            }
            return Ok(());
        }
    };
    emit(out, &text)
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_and_unknown_keys() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nm = 2\nbeta = inf  # zero T\n\nscheme=symmetric\n")
            .unwrap();
        assert_eq!(c.m, 2.0);
        assert_eq!(c.beta, Beta::Infinite);
        assert_eq!(c.scheme, RegularizationScheme::Symmetric);
        let err = c.apply_text("colour = red").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
        assert!(c.apply_text("just words").is_err());
    }

    #[test]
    fn malformed_beta_names_field() {
        let mut c = RunConfig::default();
        let err = c.set("beta", "warm").unwrap_err();
        assert!(err.to_string().contains("beta"));
        assert_eq!(err.exit_code(), 2);
        let mut c = RunConfig::default();
        let err = c
            .set("beta", "-1")
            .err()
            .or_else(|| c.validate().err())
            .unwrap();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn spectrum_free_differences_vanish() {
        let cfg = RunConfig {
            lambda: 0.0,
            n_max: 20,
            ..RunConfig::default()
        };
        let table = cmd_spectrum(&cfg, 11).unwrap();
        let mut rows = 0;
        for line in table.lines().skip(1) {
            let diff: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(diff, 0.0, "{line}");
            rows += 1;
        }
        assert_eq!(rows, 22);
    }

    #[test]
    fn spectrum_interacting() {
        let cfg = RunConfig {
            n_max: 60,
            ..RunConfig::default()
        };
        let table = cmd_spectrum(&cfg, 10).unwrap();
        for line in table.lines().skip(1) {
            let diff: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!(diff.abs() < 1e-8, "{line}");
        }
    }

    #[test]
    fn correlator_free_rows() {
        let cfg = RunConfig {
            lambda: 0.0,
            n_max: 40,
            tau_points: 9,
            ..RunConfig::default()
        };
        let table = cmd_correlator(&cfg, false).unwrap();
        let mut lines = table.lines();
        assert_eq!(lines.next().unwrap(), CORRELATOR_HEADER);
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 6);
            let a: f64 = cols[1].parse().unwrap();
            let e: f64 = cols[2].parse().unwrap();
            assert!((a - e).abs() < 1e-10);
            assert!(cols[4].is_empty() && cols[5].is_empty());
        }
    }

    #[test]
    fn correlator_interacting_perturbative_gap() {
        let cfg = RunConfig {
            mu: 3f64.ln(),
            beta: Beta::Finite(1.0),
            n_max: 60,
            tau_points: 5,
            ..RunConfig::default()
        };
        let table = cmd_correlator(&cfg, false).unwrap();
        for line in table.lines().skip(1) {
            let cols: Vec<f64> = line
                .split(',')
                .take(4)
                .map(|c| c.parse().unwrap())
                .collect();
            assert!((cols[1] - cols[2]).abs() < 1e-7);
            // exact minus order lambda^2 is the mu_lambda Boltzmann shift plus O(lambda^4)
            assert!((cols[1] - cols[3]).abs() < 0.2);
        }
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn loops_json() {
        let cfg = RunConfig {
            mu: 1.0,
            beta: Beta::Finite(3f64.ln()),
            ..RunConfig::default()
        };
        let v: serde_json::Value =
            serde_json::from_str(&cmd_loops(&cfg, Some(vec![3, -3]), None, false).unwrap())
                .unwrap();
        assert_eq!(v["value"][0].as_f64().unwrap(), 0.0);
        assert!(v["degeneracy_profile"].is_array());
        let v: serde_json::Value =
            serde_json::from_str(&cmd_loops(&cfg, None, Some(1), false).unwrap()).unwrap();
        let b = 3f64.ln();
        assert!((v["value"][0].as_f64().unwrap() - b * 0.25).abs() < 1e-12);
        let v: serde_json::Value =
            serde_json::from_str(&cmd_loops(&cfg, None, Some(3), true).unwrap()).unwrap();
        assert!((v["value"].as_f64().unwrap() - b.powi(3) * 3.0 / 32.0).abs() < 1e-12);
        let err = cmd_loops(&cfg, Some(vec![1, 2]), None, false).unwrap_err();
        assert!(err
            .to_string()
            .contains("overall momentum conservation delta function"));
    }

    #[test]
    fn tadpole_and_selfenergy_tables() {
        let zt = RunConfig {
            beta: Beta::Infinite,
            ..RunConfig::default()
        };
        let t = cmd_tadpole(&zt).unwrap();
        assert!(t.starts_with("scheme,branch,loop_integral,value\ntime-splitting,MuPositive,"));
        let s = cmd_selfenergy(&zt).unwrap();
        assert!(s.contains("pole_delta_mu,,-5.0000000000000000e-1,"), "{s}");
        let ft = RunConfig {
            beta: Beta::Finite(3f64.ln()),
            ..RunConfig::default()
        };
        let s = cmd_selfenergy(&ft).unwrap();
        let total: f64 = s
            .lines()
            .find(|l| l.starts_with("real_space_total"))
            .and_then(|l| l.split(',').nth(2))
            .unwrap()
            .parse()
            .unwrap();
        assert!((total - 0.25).abs() < 1e-12);
    }

    #[test]
    fn verify_tiny_truncation_names_check() {
        let cfg = RunConfig {
            n_max: 2,
            sweeps: 0,
            ..RunConfig::default()
        };
        let report = cmd_verify(&cfg).unwrap();
        assert!(!report.pass);
        assert!(report.failed_checks().contains(&"truncation_convergence"));
    }

    #[test]
    fn verify_without_mc_passes_at_defaults() {
        let cfg = RunConfig {
            sweeps: 0,
            ..RunConfig::default()
        };
        let report = cmd_verify(&cfg).unwrap();
        assert!(report.pass, "{:?}", report.failed_checks());
        assert!(report.checks.len() > 25);
    }
}
