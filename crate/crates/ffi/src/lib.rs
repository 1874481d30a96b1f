//! C ABI over `yukawa-core`.
//!
//! Models and eigensystems are opaque heap handles released with their
//! `_free` function. Every call returns a [`YkStatus`]; on failure the
//! message is kept per thread and read with [`yk_last_error_message`].
//! Pass `INFINITY` as `beta` for zero temperature.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use yukawa_core::analytic::{self, Sector, SectorLevel};
use yukawa_core::exactdiag::{self, EigenSystem, OperatorLabel};
use yukawa_core::lattice::{self, LatticeConfig, McParams};
use yukawa_core::loops::{self, LoopSpec};
use yukawa_core::matsubara;
use yukawa_core::model::Statistics;
use yukawa_core::{Beta, Error, ModelParams, NumericPolicy, RegularizationScheme};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Pole = 3,
    TauOutOfRange = 4,
    DegenerateGroundState = 5,
    OffGridMomentum = 6,
    MomentumNotConserved = 7,
    WindingCutoff = 8,
    Consistency = 9,
    Unsupported = 10,
    ZeroTemperature = 11,
    EmptyEigenSystem = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Ordering prescription for `yk_tadpole`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YkScheme {
    TimeSplitting = 0,
    Symmetric = 1,
}

/// Opaque model handle.
pub struct YkModel {
    params: ModelParams,
}

/// Opaque diagonalized Hamiltonian.
pub struct YkEigenSystem {
    eig: EigenSystem,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YkChainSummary {
    pub phi_mean: f64,
    pub phi_stderr: f64,
    pub phi_tau_int: f64,
    /// `<phi(beta/2) phi(0)>`.
    pub half_beta_mean: f64,
    pub half_beta_stderr: f64,
    pub acceptance: f64,
    pub samples: u64,
    /// Nonzero when the drift test flagged the chain.
    pub unthermalized: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(YkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ZeroTemperatureGrid => YkStatus::ZeroTemperature,
            Error::InvalidParameter { .. } => YkStatus::InvalidParameter,
            Error::Pole(_) => YkStatus::Pole,
            Error::TauOutOfRange { .. } => YkStatus::TauOutOfRange,
            Error::DegenerateGroundState => YkStatus::DegenerateGroundState,
            Error::OffGridMomentum(_) => YkStatus::OffGridMomentum,
            Error::MomentumNotConserved(_) => YkStatus::MomentumNotConserved,
            Error::WindingCutoff { .. } => YkStatus::WindingCutoff,
            Error::Consistency { .. } => YkStatus::Consistency,
            Error::Unsupported(_) => YkStatus::Unsupported,
            Error::EmptyEigenSystem => YkStatus::EmptyEigenSystem,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(YkStatus::NullPointer, format!("null pointer: {name}"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> YkStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure(YkStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            YkStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn model_ref<'a>(m: *const YkModel) -> Result<&'a ModelParams, Failure> {
    m.as_ref().map(|m| &m.params).ok_or_else(|| null("model"))
}

unsafe fn eig_ref<'a>(e: *const YkEigenSystem) -> Result<&'a EigenSystem, Failure> {
    e.as_ref()
        .map(|e| &e.eig)
        .ok_or_else(|| null("eigensystem"))
}

unsafe fn momenta<'a>(ptr: *const i64, len: usize) -> Result<&'a [i64], Failure> {
    if ptr.is_null() {
        return Err(null("momenta"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn beta_of(beta: f64) -> Result<Beta, Failure> {
    if beta == f64::INFINITY {
        Ok(Beta::Infinite)
    } else {
        Ok(Beta::finite(beta)?)
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full length plus one.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn yk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn yk_model_new(
    m: f64,
    mu: f64,
    lambda: f64,
    beta: f64,
    out: *mut *mut YkModel,
) -> YkStatus {
    guard(|| {
        let params = ModelParams::new(m, mu, lambda, beta_of(beta)?)?;
        put(out, Box::into_raw(Box::new(YkModel { params })), "out")
    })
}

/// # Safety
/// `model` must be null or come from `yk_model_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn yk_model_free(model: *mut YkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Energy of level `n` in sector `sector` (0 bosonic, 1 fermionic).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_model_energy(
    model: *const YkModel,
    sector: u8,
    n: usize,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        let sector = match sector {
            0 => Sector::Bosonic,
            1 => Sector::Fermionic,
            s => {
                return Err(Failure(
                    YkStatus::InvalidParameter,
                    format!("sector must be 0 or 1, got {s}"),
                ))
            }
        };
        put(out, analytic::energy(p, SectorLevel { sector, n }), "out")
    })
}

/// Exact thermal `<phi(tau) phi(0)>`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_exact_two_point(
    model: *const YkModel,
    tau: f64,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        put(out, analytic::exact_thermal_two_point(p, tau)?, "out")
    })
}

/// Exact thermal `<phi>`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_exact_phi(model: *const YkModel, out: *mut f64) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        put(out, analytic::exact_phi_expectation(p), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_eigensystem_new(
    model: *const YkModel,
    n_max: usize,
    out: *mut *mut YkEigenSystem,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        let eig = EigenSystem::diagonalize(p, n_max)?;
        put(out, Box::into_raw(Box::new(YkEigenSystem { eig })), "out")
    })
}

/// # Safety
/// `eig` must be null or come from `yk_eigensystem_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn yk_eigensystem_free(eig: *mut YkEigenSystem) {
    if !eig.is_null() {
        drop(Box::from_raw(eig));
    }
}

/// Writes all energies in ascending order. `written` receives the count,
/// or the required length when `len` is too small.
///
/// # Safety
/// `buf` must be valid for `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_eigensystem_energies(
    eig: *const YkEigenSystem,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> YkStatus {
    guard(|| {
        let e = eig_ref(eig)?;
        put(written, e.len(), "written")?;
        if len < e.len() {
            return Err(Failure(
                YkStatus::BufferTooSmall,
                format!("need {} entries, got {len}", e.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, e.len()).copy_from_slice(&e.energies);
        Ok(())
    })
}

/// Thermal `<phi>` in the truncated space, at the model's `beta`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_eigensystem_phi(eig: *const YkEigenSystem, out: *mut f64) -> YkStatus {
    guard(|| {
        let e = eig_ref(eig)?;
        let q = e.operator(OperatorLabel::Q);
        put(
            out,
            exactdiag::thermal_expectation(&q, e, e.params.beta)?,
            "out",
        )
    })
}

/// Time-ordered `<phi(tau) phi(0)>` in the truncated space.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_eigensystem_two_point(
    eig: *const YkEigenSystem,
    tau: f64,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        let e = eig_ref(eig)?;
        let q = e.operator(OperatorLabel::Q);
        let v =
            exactdiag::time_ordered_two_point(&q, &q, tau, e, e.params.beta, Statistics::Bosonic)?;
        put(out, v, "out")
    })
}

/// First-order `<phi>`: the zero-temperature loop under `scheme` when
/// `beta` is infinite, otherwise the thermal winding result.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_tadpole(
    model: *const YkModel,
    scheme: YkScheme,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        let v = match p.beta {
            Beta::Infinite => {
                let s = match scheme {
                    YkScheme::TimeSplitting => RegularizationScheme::TimeSplitting,
                    YkScheme::Symmetric => RegularizationScheme::Symmetric,
                };
                matsubara::tadpole_phi(p, s)?.value
            }
            Beta::Finite(_) => {
                let policy = NumericPolicy::default();
                matsubara::tadpole_phi_thermal(p, &policy, policy.winding_cutoff)?.value
            }
        };
        put(out, v, "out")
    })
}

/// Mass shift and residue extracted from the order-`lambda^2` fermion self-energy.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_pole_decomposition(
    model: *const YkModel,
    delta_mu: *mut f64,
    z1f: *mut f64,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        let d = matsubara::extract_pole_decomposition(p, &NumericPolicy::default())?.decomposition;
        put(delta_mu, d.delta_mu, "delta_mu")?;
        put(z1f, d.z1f, "z1f")
    })
}

/// One ordering of a connected loop with bosonic Matsubara indices `momenta`.
///
/// # Safety
/// `momenta` must be valid for `j` entries; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_connected_loop(
    momenta_ptr: *const i64,
    j: usize,
    mu: f64,
    beta: f64,
    re: *mut f64,
    im: *mut f64,
) -> YkStatus {
    guard(|| {
        let policy = NumericPolicy::default();
        let spec = LoopSpec::new(
            momenta(momenta_ptr, j)?.to_vec(),
            mu,
            beta,
            policy.winding_cutoff,
        )?;
        let v = loops::connected_loop(&spec, &policy)?.value;
        put(re, v.re, "re")?;
        put(im, v.im, "im")
    })
}

/// Sum over the `(j-1)!` cyclic orderings of the insertions.
///
/// # Safety
/// `momenta` must be valid for `j` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_symmetrized_loop(
    momenta_ptr: *const i64,
    j: usize,
    mu: f64,
    beta: f64,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        let m = momenta(momenta_ptr, j)?;
        put(
            out,
            loops::permutation_symmetrized_loop(m, mu, beta, &NumericPolicy::default())?.value,
            "out",
        )
    })
}

/// `<N(tau_1) ... N(tau_j)>` assembled from connected loops.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_full_number_correlator(
    j: usize,
    mu: f64,
    beta: f64,
    out: *mut f64,
) -> YkStatus {
    guard(|| {
        put(
            out,
            loops::full_number_correlator(j, mu, beta, &NumericPolicy::default())?.value,
            "out",
        )
    })
}

/// Runs one Monte Carlo chain at the model's finite `beta`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn yk_run_chain(
    model: *const YkModel,
    n_tau: usize,
    sweeps: usize,
    seed: u64,
    out: *mut YkChainSummary,
) -> YkStatus {
    guard(|| {
        let p = model_ref(model)?;
        let lat = LatticeConfig::new(n_tau, p.beta.value()?)?;
        let run = lattice::run_chain(p, &lat, &McParams::new(sweeps, seed))?;
        let half = run.correlator[n_tau / 2];
        let summary = YkChainSummary {
            phi_mean: run.phi.mean,
            phi_stderr: run.phi.stderr,
            phi_tau_int: run.phi.tau_int,
            half_beta_mean: half.mean,
            half_beta_stderr: half.stderr,
            acceptance: run.acceptance,
            samples: run.phi.samples as u64,
            unthermalized: run.unthermalized as u8,
        };
        put(out, summary, "out")
    })
}
