//! Density matrices, Hermitian eigendecomposition and matrix norms.
//!
//! Everything here works on dense `d x d` complex matrices (`d <= 64` in
//! practice). The eigensolver is a cyclic complex Jacobi method: each rotation
//! first removes the phase of the pivot element, then applies a real Jacobi
//! rotation, so the iterate stays exactly Hermitian.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqstError};

pub type CMatrix = DMatrix<Complex64>;

/// Elementwise Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-14;

/// A square complex matrix that is Hermitian to [`HERMITIAN_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(SqstError::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL * max_norm(&m).max(1.0) {
            return Err(SqstError::NotHermitian(dev));
        }
        Ok(HermitianMatrix(symmetrize(m)))
    }

    /// Wraps `m` after forcing exact Hermitian symmetry, without checking.
    pub fn symmetrized(m: CMatrix) -> Self {
        HermitianMatrix(symmetrize(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates all density-matrix invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m).map_err(|e| SqstError::NotDensityMatrix(e.to_string()))?;
        let tr = h.0.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(SqstError::NotDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min = hermitian_eigen(&h).values[0];
        if min < -PSD_TOL {
            return Err(SqstError::NotDensityMatrix(format!(
                "minimum eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix(h.0))
    }

    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        DensityMatrix(symmetrize(m))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(CMatrix::identity(d, d) / Complex64::from(d as f64))
    }

    pub fn basis_state(d: usize, i: usize) -> Result<Self> {
        check_index(i, d)?;
        let mut m = CMatrix::zeros(d, d);
        m[(i, i)] = Complex64::ONE;
        Ok(DensityMatrix(m))
    }

    /// Projector onto the normalized pure state `psi`.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(SqstError::InvalidArgument("zero state vector".into()));
        }
        let d = psi.len();
        let m = CMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj() / norm2);
        Ok(DensityMatrix::from_trusted(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }
}

fn check_index(i: usize, d: usize) -> Result<()> {
    if i >= d {
        return Err(SqstError::IndexOutOfRange(format!(
            "label {i} in dimension {d}"
        )));
    }
    Ok(())
}

/// Rank-1 state `(a|i> + b|j>)/norm`.
pub fn make_pure_superposition(
    i: usize,
    j: usize,
    a: Complex64,
    b: Complex64,
    d: usize,
) -> Result<DensityMatrix> {
    check_index(i, d)?;
    check_index(j, d)?;
    if i == j {
        return Err(SqstError::InvalidArgument(
            "superposition labels must differ".into(),
        ));
    }
    if a.norm_sqr() + b.norm_sqr() == 0.0 {
        return Err(SqstError::InvalidArgument(
            "both amplitudes are zero".into(),
        ));
    }
    let mut psi = vec![Complex64::ZERO; d];
    psi[i] = a;
    psi[j] = b;
    DensityMatrix::pure(&psi)
}

/// Rank-`rank` state `G G^dagger / tr`, `G` a `d x rank` matrix of standard
/// complex Gaussians drawn from ChaCha8 seeded with `seed`.
pub fn random_density(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if d == 0 || rank == 0 || rank > d {
        return Err(SqstError::InvalidArgument(format!(
            "rank {rank} out of range for dimension {d}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_density_with(d, rank, &mut rng))
}

pub fn random_density_with<R: rand::Rng + ?Sized>(
    d: usize,
    rank: usize,
    rng: &mut R,
) -> DensityMatrix {
    let g = CMatrix::from_fn(d, rank, |_, _| complex_gaussian(rng));
    let w = &g * g.adjoint();
    let tr = w.trace().re;
    DensityMatrix::from_trusted(w / Complex64::from(tr))
}

/// Hermitian matrix with independent standard complex Gaussian off-diagonals
/// and real Gaussian diagonal.
pub fn random_hermitian<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    HermitianMatrix::symmetrized((&g + g.adjoint()) * Complex64::from(0.5))
}

/// Standard complex Gaussian: independent N(0, 1/2) real and imaginary parts.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

fn symmetrize(mut m: CMatrix) -> CMatrix {
    let n = m.nrows();
    for r in 0..n {
        m[(r, r)].im = 0.0;
        for c in r + 1..n {
            let avg = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
            m[(r, c)] = avg;
            m[(c, r)] = avg.conj();
        }
    }
    m
}

/// Eigenvalues in ascending order with matching unit eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// `V diag(f(lambda)) V^dagger`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.vectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (c, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for r in 0..n {
                scaled[(r, c)] *= w;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn hermitian_eigen(h: &HermitianMatrix) -> Eigen {
    jacobi_eigen(&h.0)
}

/// Cyclic complex Jacobi. `a` is assumed Hermitian; only exact-Hermitian
/// updates are applied.
pub(crate) fn jacobi_eigen(input: &CMatrix) -> Eigen {
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = CMatrix::identity(n, n);
    let scale = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for r in 0..n {
                for c in 0..n {
                    if r != c {
                        off += a[(r, c)].norm_sqr();
                    }
                }
            }
            if off.sqrt() <= JACOBI_REL_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q, scale);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Eigen { values, vectors }
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize, scale: f64) {
    let n = a.nrows();
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag <= 1e-18 * scale {
        a[(p, q)] = Complex64::ZERO;
        a[(q, p)] = Complex64::ZERO;
        return;
    }
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J = diag(1, conj(phase)) * [[c, s], [-s, c]] restricted to rows/cols p, q
    let jpp = Complex64::from(c);
    let jpq = Complex64::from(s);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::ZERO;
    a[(q, p)] = Complex64::ZERO;
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Singular values of an arbitrary square matrix, ascending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if hermitian_deviation(m) == 0.0 {
        let mut s: Vec<f64> = jacobi_eigen(m).values.iter().map(|x| x.abs()).collect();
        s.sort_by(f64::total_cmp);
        return s;
    }
    let gram = symmetrize(m.adjoint() * m);
    jacobi_eigen(&gram)
        .values
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect()
}

fn schatten_from_singular(sv: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(SqstError::InvalidArgument(format!(
            "Schatten index {p} < 1"
        )));
    }
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    if p.is_infinite() {
        return Ok(top);
    }
    let sum: f64 = sv.iter().map(|s| (s / top).powf(p)).sum();
    Ok(top * sum.powf(1.0 / p))
}

/// Schatten `p`-norm; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(h: &HermitianMatrix, p: f64) -> Result<f64> {
    let sv: Vec<f64> = jacobi_eigen(&h.0).values.iter().map(|x| x.abs()).collect();
    schatten_from_singular(&sv, p)
}

/// Schatten norm of a general (possibly non-Hermitian) matrix.
pub fn schatten_norm_general(m: &CMatrix, p: f64) -> Result<f64> {
    schatten_from_singular(&singular_values(m), p)
}

pub fn trace_norm(h: &HermitianMatrix) -> f64 {
    jacobi_eigen(&h.0).values.iter().map(|x| x.abs()).sum()
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest elementwise modulus.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// One inequality `lhs <= rhs` evaluated with slack.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative values within the slack still pass.
    pub margin: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64, slack: f64) -> Self {
        InequalityCheck {
            name,
            lhs,
            rhs,
            margin: rhs - lhs,
            holds: lhs <= rhs + slack,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormChainReport {
    pub d: usize,
    pub max_norm: f64,
    pub frobenius: f64,
    pub trace_norm: f64,
    pub slack: f64,
    /// max <= frobenius
    pub max_le_frobenius: InequalityCheck,
    /// frobenius <= d * max
    pub frobenius_le_d_max: InequalityCheck,
    /// trace <= sqrt(d) * frobenius
    pub trace_le_sqrt_d_frobenius: InequalityCheck,
    /// frobenius <= trace
    pub frobenius_le_trace: InequalityCheck,
    /// trace / d^{3/2} <= max, and max <= trace
    pub trace_sandwich_lower: InequalityCheck,
    pub trace_sandwich_upper: InequalityCheck,
}

impl NormChainReport {
    pub fn all_hold(&self) -> bool {
        self.checks().iter().all(|c| c.holds)
    }

    pub fn checks(&self) -> [&InequalityCheck; 6] {
        [
            &self.max_le_frobenius,
            &self.frobenius_le_d_max,
            &self.trace_le_sqrt_d_frobenius,
            &self.frobenius_le_trace,
            &self.trace_sandwich_lower,
            &self.trace_sandwich_upper,
        ]
    }

    /// The two-sided trace/max sandwich counts as one inequality.
    pub fn sandwich_holds(&self) -> bool {
        self.trace_sandwich_lower.holds && self.trace_sandwich_upper.holds
    }
}

/// Evaluates the max / Frobenius / trace norm chain for `e`.
///
/// Slack is `1e-12 * d`, scaled by `max(1, max_norm(e))` so the check is
/// invariant under rescaling `e`.
pub fn check_norm_chain(e: &HermitianMatrix) -> NormChainReport {
    let d = e.dim();
    let df = d as f64;
    let mx = max_norm(&e.0);
    let fro = frobenius_norm(&e.0);
    let tr = trace_norm(e);
    let slack = 1e-12 * df * mx.max(1.0);
    NormChainReport {
        d,
        max_norm: mx,
        frobenius: fro,
        trace_norm: tr,
        slack,
        max_le_frobenius: InequalityCheck::new("max <= frobenius", mx, fro, slack),
        frobenius_le_d_max: InequalityCheck::new("frobenius <= d*max", fro, df * mx, slack),
        trace_le_sqrt_d_frobenius: InequalityCheck::new(
            "trace <= sqrt(d)*frobenius",
            tr,
            df.sqrt() * fro,
            slack,
        ),
        frobenius_le_trace: InequalityCheck::new("frobenius <= trace", fro, tr, slack),
        trace_sandwich_lower: InequalityCheck::new(
            "trace/d^1.5 <= max",
            tr / df.powf(1.5),
            mx,
            slack,
        ),
        trace_sandwich_upper: InequalityCheck::new("max <= trace", mx, tr, slack),
    }
}

/// On-disk matrix layout: `{"d": .., "rows": [[[re, im], ..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub d: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .map(|c| [m[(r, c)].re, m[(r, c)].im])
                    .collect()
            })
            .collect();
        MatrixFile { d: m.nrows(), rows }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.rows.len() != self.d || self.rows.iter().any(|r| r.len() != self.d) {
            return Err(SqstError::InvalidArgument(format!(
                "matrix rows do not form a {0}x{0} array",
                self.d
            )));
        }
        Ok(CMatrix::from_fn(self.d, self.d, |r, c| {
            Complex64::new(self.rows[r][c][0], self.rows[r][c][1])
        }))
    }
}

pub fn read_matrix_file(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| SqstError::io(path, e))?;
    let file: MatrixFile = serde_json::from_str(&text)?;
    file.to_matrix()
}

pub fn write_matrix_file(path: &Path, m: &CMatrix) -> Result<()> {
    let text = serde_json::to_string(&MatrixFile::from_matrix(m))?;
    std::fs::write(path, text).map_err(|e| SqstError::io(path, e))
}
