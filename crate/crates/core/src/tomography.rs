//! Full-state assembly and projection onto density matrices.

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Result, SqstError};
use crate::estimator::achievable_epsilon;
use crate::measurement::{MeasurementRecord, OutcomeDistribution, PovmMode};
use crate::mub::MubFamily;
use crate::qstate::{
    check_norm_chain, frobenius_norm, hermitian_eigen, max_norm, trace_norm, CMatrix,
    DensityMatrix, HermitianMatrix, NormChainReport,
};

/// Elementwise estimate `rho_L` of the whole density matrix.
#[derive(Debug, Clone)]
pub struct LinearEstimate {
    rho: HermitianMatrix,
    n_offdiag: u64,
    n_diag: u64,
    offdiag_fingerprint: u64,
    diag_fingerprint: u64,
}

impl LinearEstimate {
    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.rho.as_matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.rho
    }

    /// Copy counts of the off-diagonal and computational records (0 for exact folds).
    pub fn copies(&self) -> (u64, u64) {
        (self.n_offdiag, self.n_diag)
    }

    pub fn fingerprints(&self) -> (u64, u64) {
        (self.offdiag_fingerprint, self.diag_fingerprint)
    }

    /// Max-norm radius holding for all `d^2` elements simultaneously with
    /// probability at least `1 - delta`. `None` for exact folds.
    pub fn epsilon(&self, delta: f64) -> Result<Option<f64>> {
        let n = self.n_offdiag.min(self.n_diag);
        if n == 0 {
            return Ok(None);
        }
        let m = (self.dim() * self.dim()) as u64;
        achievable_epsilon(n, delta, m).map(Some)
    }

    pub fn is_density_matrix(&self) -> bool {
        DensityMatrix::new(self.rho.as_matrix().clone()).is_ok()
    }
}

/// `(d / N) sum_km count_km |k,m><k,m|` off the diagonal, relative
/// frequencies on it.
fn assemble(family: &MubFamily, offdiag_weights: &[f64], diag_weights: &[f64]) -> CMatrix {
    let d = family.dim();
    let mut out = CMatrix::zeros(d, d);
    for m in 2..=d + 1 {
        for k in 0..d {
            let w = offdiag_weights[(m - 2) * d + k];
            if w == 0.0 {
                continue;
            }
            let v = family.vector(m, k);
            for i in 0..d {
                let vi = v[i] * (w * d as f64);
                for j in i + 1..d {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
    }
    for i in 0..d {
        out[(i, i)] = Complex64::from(diag_weights[i]);
        for j in 0..i {
            out[(i, j)] = out[(j, i)].conj();
        }
    }
    out
}

fn check_pair_modes(off: PovmMode, diag: PovmMode) -> Result<()> {
    if off != PovmMode::Offdiag {
        return Err(SqstError::ModeMismatch {
            expected: "offdiag".into(),
            actual: off.to_string(),
        });
    }
    if diag != PovmMode::Computational {
        return Err(SqstError::ModeMismatch {
            expected: "computational".into(),
            actual: diag.to_string(),
        });
    }
    Ok(())
}

/// Builds `rho_L` from an off-diagonal record and a computational record.
pub fn assemble_linear_estimate(
    offdiag: &MeasurementRecord,
    diag: &MeasurementRecord,
    family: &MubFamily,
) -> Result<LinearEstimate> {
    check_pair_modes(offdiag.mode(), diag.mode())?;
    offdiag.check_family(family)?;
    diag.check_family(family)?;
    if offdiag.is_empty() || diag.is_empty() {
        return Err(SqstError::InvalidArgument("empty record".into()));
    }
    let n_off = offdiag.len() as f64;
    let n_diag = diag.len() as f64;
    let off_w: Vec<f64> = offdiag.counts().iter().map(|&c| c as f64 / n_off).collect();
    let diag_w: Vec<f64> = diag.counts().iter().map(|&c| c as f64 / n_diag).collect();
    Ok(LinearEstimate {
        rho: HermitianMatrix::symmetrized(assemble(family, &off_w, &diag_w)),
        n_offdiag: offdiag.len() as u64,
        n_diag: diag.len() as u64,
        offdiag_fingerprint: offdiag.header().mub,
        diag_fingerprint: diag.header().mub,
    })
}

/// [`assemble_linear_estimate`] with exact outcome probabilities in place of
/// sampled frequencies.
pub fn assemble_exact(
    offdiag: &OutcomeDistribution,
    diag: &OutcomeDistribution,
    family: &MubFamily,
) -> Result<LinearEstimate> {
    check_pair_modes(offdiag.mode(), diag.mode())?;
    for fp in [offdiag.fingerprint(), diag.fingerprint()] {
        if fp != family.fingerprint() {
            return Err(SqstError::FingerprintMismatch {
                record: fp,
                family: family.fingerprint(),
            });
        }
    }
    Ok(LinearEstimate {
        rho: HermitianMatrix::symmetrized(assemble(
            family,
            offdiag.probabilities(),
            diag.probabilities(),
        )),
        n_offdiag: 0,
        n_diag: 0,
        offdiag_fingerprint: offdiag.fingerprint(),
        diag_fingerprint: diag.fingerprint(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    MaxNormSdp,
    EigenClip,
}

impl ProjectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionMethod::MaxNormSdp => "maxnorm-sdp",
            ProjectionMethod::EigenClip => "eigen-clip",
        }
    }
}

impl Serialize for ProjectionMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    /// Constrain the output to unit trace. With `false` only positivity is imposed.
    pub unit_trace: bool,
    /// Bisection stops once the bracket on `t` is narrower than this.
    pub t_tolerance: f64,
    /// Max-norm gap between the two alternating iterates accepted as feasible.
    pub residual_tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            unit_trace: true,
            t_tolerance: 1e-6,
            residual_tolerance: 1e-9,
            max_sweeps: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Positive semidefinite, unit trace unless disabled in the options.
    pub rho: CMatrix,
    /// Max-norm distance between `rho` and the input.
    pub t_star: f64,
    /// Alternating-projection sweeps summed over all bisection steps.
    pub iterations: usize,
    pub converged: bool,
    pub method: ProjectionMethod,
}

impl ProjectionResult {
    pub fn density(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.rho.clone())
    }
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = 1}`.
fn simplex_threshold(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (idx, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - 1.0) / (idx + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        }
    }
    tau
}

/// Nearest (Frobenius) positive semidefinite matrix, unit trace if asked.
fn project_psd_set(y: &CMatrix, unit_trace: bool) -> CMatrix {
    let eig = hermitian_eigen(&HermitianMatrix::symmetrized(y.clone()));
    let shift = if unit_trace {
        simplex_threshold(&eig.values)
    } else {
        0.0
    };
    let out = eig.reassemble(|lam| (lam - shift).max(0.0));
    HermitianMatrix::symmetrized(out).into_matrix()
}

/// Moves every element of `y` to within modulus `t` of the matching element of `x`.
fn project_box(y: &CMatrix, x: &CMatrix, t: f64) -> CMatrix {
    CMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        let dev = y[(r, c)] - x[(r, c)];
        let mag = dev.norm();
        if mag > t {
            x[(r, c)] + dev * (t / mag)
        } else {
            y[(r, c)]
        }
    })
}

/// Alternates between the PSD set and the `t`-box around `x`, starting at
/// `start`. Every PSD iterate is a valid candidate; the closest one to `x`
/// is returned together with whether the two iterates met.
fn feasible_at(
    x: &CMatrix,
    t: f64,
    start: &CMatrix,
    opts: &ProjectionOptions,
) -> (bool, CMatrix, f64, usize) {
    let mut y = start.clone();
    let mut best = start.clone();
    let mut best_t = max_norm(&(x - start));
    for sweep in 1..=opts.max_sweeps {
        let z = project_box(&y, x, t);
        y = project_psd_set(&z, opts.unit_trace);
        let ty = max_norm(&(x - &y));
        if ty < best_t {
            best_t = ty;
            best = y.clone();
        }
        if max_norm(&(&y - &z)) <= opts.residual_tolerance {
            return (true, best, best_t, sweep);
        }
    }
    (false, best, best_t, opts.max_sweeps)
}

/// Max-norm projection of a Hermitian matrix onto the density matrices:
/// minimise `t` subject to `Y >= 0`, `tr Y = 1` and `|Y_ij - X_ij| <= t`.
///
/// Bisection on `t`; each trial `t` is tested by alternating projections,
/// warm-started from the best point found so far. The initial upper bound is
/// the better of eigenvalue clipping and the Frobenius projection, so the
/// result never loses to either.
pub fn project_psd_maxnorm(
    x: &HermitianMatrix,
    opts: &ProjectionOptions,
) -> Result<ProjectionResult> {
    let xm = x.as_matrix();
    let already_valid = if opts.unit_trace {
        DensityMatrix::new(xm.clone()).is_ok()
    } else {
        hermitian_eigen(x).values[0] >= 0.0
    };
    if already_valid {
        return Ok(ProjectionResult {
            rho: xm.clone(),
            t_star: 0.0,
            iterations: 0,
            converged: true,
            method: ProjectionMethod::MaxNormSdp,
        });
    }

    let mut best = project_psd_set(xm, opts.unit_trace);
    let mut hi = max_norm(&(xm - &best));
    if opts.unit_trace {
        if let Ok(clip) = project_psd_clip(x) {
            if clip.t_star < hi {
                hi = clip.t_star;
                best = clip.rho;
            }
        }
    }

    let mut lo = 0.0;
    let mut iterations = 0;
    while hi - lo > opts.t_tolerance {
        let t = 0.5 * (lo + hi);
        let (met, y, ty, sweeps) = feasible_at(xm, t, &best, opts);
        iterations += sweeps;
        if ty < hi {
            hi = ty;
            best = y;
        }
        if met {
            hi = hi.min(t);
        } else {
            lo = t;
        }
    }

    Ok(ProjectionResult {
        t_star: max_norm(&(xm - &best)),
        rho: best,
        iterations,
        converged: hi - lo <= opts.t_tolerance,
        method: ProjectionMethod::MaxNormSdp,
    })
}

/// Clips negative eigenvalues to zero and renormalises the trace.
pub fn project_psd_clip(x: &HermitianMatrix) -> Result<ProjectionResult> {
    let eig = hermitian_eigen(x);
    let mass: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let scale = eig
        .values
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    if mass <= 1e-14 * scale {
        return Err(SqstError::NoPositiveMass);
    }
    let rho = HermitianMatrix::symmetrized(eig.reassemble(|v| v.max(0.0) / mass)).into_matrix();
    Ok(ProjectionResult {
        t_star: max_norm(&(x.as_matrix() - &rho)),
        rho,
        iterations: 1,
        converged: true,
        method: ProjectionMethod::EigenClip,
    })
}

fn check_budget_inputs(value: f64, d: usize) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) || d == 0 {
        return Err(SqstError::InvalidArgument(format!(
            "need a positive target and d >= 1, got {value}, d={d}"
        )));
    }
    Ok(())
}

/// Trace-norm error `nu = d^{3/2} eps` implied by a max-norm error `eps`.
pub fn trace_norm_budget(epsilon: f64, d: usize) -> Result<f64> {
    check_budget_inputs(epsilon, d)?;
    Ok(epsilon * (d as f64).powf(1.5))
}

/// Max-norm error needed for trace-norm error `nu`.
pub fn max_error_for_trace_target(nu: f64, d: usize) -> Result<f64> {
    check_budget_inputs(nu, d)?;
    Ok(nu / (d as f64).powf(1.5))
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub max_norm: f64,
    pub frobenius: f64,
    pub trace_norm: f64,
    pub chain: NormChainReport,
}

/// Norms of `truth - estimate` with the norm-chain status.
pub fn error_report(truth: &DensityMatrix, estimate: &CMatrix) -> Result<ErrorReport> {
    if estimate.nrows() != truth.dim() || estimate.ncols() != truth.dim() {
        return Err(SqstError::DimensionMismatch {
            expected: truth.dim(),
            actual: estimate.nrows(),
        });
    }
    let e = HermitianMatrix::new(truth.as_matrix() - estimate)?;
    Ok(ErrorReport {
        max_norm: max_norm(e.as_matrix()),
        frobenius: frobenius_norm(e.as_matrix()),
        trace_norm: trace_norm(&e),
        chain: check_norm_chain(&e),
    })
}
