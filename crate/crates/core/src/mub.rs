//! Maximal sets of mutually unbiased bases in prime-power dimensions.
//!
//! Basis `m = 1` is always the computational basis. The remaining `d` bases
//! are built from finite-field characters:
//!
//! * odd `p`: vector `k` of basis `m` has amplitude
//!   `omega_p^{tr(r l^2 + k l)} / sqrt(d)` on label `l`, where `r = m - 2` and
//!   `r, k, l` are read as elements of GF(p^n);
//! * `p = 2`: amplitude `i^{tr((a + 2b) x)} / sqrt(d)` with `a, b, x` taken
//!   from the Teichmüller set of GR(4, n) (basis `a`, vector `b`, label `x`).
//!
//! For `d = 2` the second construction yields the X and Y eigenbases.
//!
//! Labels `k`, `l`, `i`, `j` are 0-based; basis labels `m` run over `1..=d+1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SqstError};
use crate::field::{prime_power, FiniteField, GaloisRing4, DEFAULT_MAX_ORDER};
use crate::qstate::CMatrix;

/// `d + 1` orthonormal bases of C^d, stored as unit vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    d: usize,
    /// `((m - 1) * d + k) * d + l` -> amplitude of label `l` in vector `k` of basis `m`.
    amplitudes: Vec<Complex64>,
    fingerprint: u64,
}

/// Builds the complete MUB family for `d = p^n <= 64`.
pub fn build_mub(d: usize) -> Result<MubFamily> {
    build_mub_with_max(d, DEFAULT_MAX_ORDER)
}

pub fn build_mub_with_max(d: usize, max_order: usize) -> Result<MubFamily> {
    let (p, n) = prime_power(d).ok_or(SqstError::UnsupportedDimension(d))?;
    let field = FiniteField::with_max_order(p, n, max_order)?;
    let norm = 1.0 / (d as f64).sqrt();
    let mut amplitudes = Vec::with_capacity((d + 1) * d * d);

    for k in 0..d {
        for l in 0..d {
            amplitudes.push(if k == l {
                Complex64::ONE
            } else {
                Complex64::ZERO
            });
        }
    }

    if p == 2 {
        let ring = GaloisRing4::lift(&field)?;
        let t = ring.teichmuller();
        let quarter = [Complex64::ONE, Complex64::I, -Complex64::ONE, -Complex64::I];
        for a in t {
            for b in t {
                let shift = ring.add(a, &ring.scale(2, b));
                for x in t {
                    let e = ring.trace(&ring.mul(&shift, x));
                    amplitudes.push(quarter[e as usize] * norm);
                }
            }
        }
    } else {
        let roots: Vec<Complex64> = (0..p)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * t as f64 / p as f64))
            .collect();
        let squares: Vec<usize> = (0..d).map(|l| field.mul(l, l)).collect();
        for r in 0..d {
            for k in 0..d {
                for (l, &sq) in squares.iter().enumerate() {
                    let arg = field.add(field.mul(r, sq), field.mul(k, l));
                    amplitudes.push(roots[field.trace(arg) as usize] * norm);
                }
            }
        }
    }

    Ok(MubFamily::from_amplitudes(d, amplitudes))
}

impl MubFamily {
    fn from_amplitudes(d: usize, amplitudes: Vec<Complex64>) -> Self {
        let fingerprint = fingerprint(d, &amplitudes);
        MubFamily {
            d,
            amplitudes,
            fingerprint,
        }
    }

    /// Wraps externally supplied bases, `bases[m - 1][k][l]`. Only the shape
    /// is checked; use [`verify_mub`] to check unbiasedness.
    pub fn from_bases(d: usize, bases: &[Vec<Vec<Complex64>>]) -> Result<Self> {
        if d == 0
            || bases.len() != d + 1
            || bases
                .iter()
                .any(|b| b.len() != d || b.iter().any(|v| v.len() != d))
        {
            return Err(SqstError::InvalidArgument(format!(
                "expected {} bases of {d} vectors of length {d}",
                d + 1
            )));
        }
        let amplitudes = bases.iter().flatten().flatten().copied().collect();
        Ok(Self::from_amplitudes(d, amplitudes))
    }

    /// Copy of the family with vector `(m, k)` replaced by `v`.
    pub fn with_vector(&self, m: usize, k: usize, v: &[Complex64]) -> Result<Self> {
        self.check_basis(m)?;
        self.check_label(k)?;
        if v.len() != self.d {
            return Err(SqstError::DimensionMismatch {
                expected: self.d,
                actual: v.len(),
            });
        }
        let mut amplitudes = self.amplitudes.clone();
        let start = self.offset(m, k);
        amplitudes[start..start + self.d].copy_from_slice(v);
        Ok(Self::from_amplitudes(self.d, amplitudes))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn basis_count(&self) -> usize {
        self.d + 1
    }

    /// 64-bit digest of the amplitudes rounded to 12 decimals.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// True when basis `m = 1` is exactly the standard basis.
    pub fn computational_first(&self) -> bool {
        (0..self.d).all(|k| {
            self.vector(1, k).iter().enumerate().all(|(l, &a)| {
                a == if k == l {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                }
            })
        })
    }

    fn offset(&self, m: usize, k: usize) -> usize {
        ((m - 1) * self.d + k) * self.d
    }

    fn check_basis(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.d + 1 {
            return Err(SqstError::IndexOutOfRange(format!(
                "basis {m} not in 1..={}",
                self.d + 1
            )));
        }
        Ok(())
    }

    fn check_label(&self, k: usize) -> Result<()> {
        if k >= self.d {
            return Err(SqstError::IndexOutOfRange(format!(
                "label {k} not in 0..{}",
                self.d
            )));
        }
        Ok(())
    }

    /// Unit vector `|k, m>`. Panics if `m` or `k` is out of range.
    pub fn vector(&self, m: usize, k: usize) -> &[Complex64] {
        assert!(
            (1..=self.d + 1).contains(&m) && k < self.d,
            "vector ({m}, {k}) out of range"
        );
        let start = self.offset(m, k);
        &self.amplitudes[start..start + self.d]
    }

    /// Basis `m` as a matrix whose columns are its vectors.
    pub fn basis_matrix(&self, m: usize) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |l, k| self.vector(m, k)[l])
    }

    /// `alpha_l^{km} = sqrt(d) <l|k,m>`.
    pub fn alpha(&self, l: usize, k: usize, m: usize) -> Result<Complex64> {
        self.check_basis(m)?;
        self.check_label(k)?;
        self.check_label(l)?;
        Ok(self.vector(m, k)[l] * (self.d as f64).sqrt())
    }

    /// `eta_ij^{km} = alpha_i^{km} conj(alpha_j^{km})`, defined for `m >= 2`.
    pub fn eta(&self, i: usize, j: usize, k: usize, m: usize) -> Result<Complex64> {
        if m == 1 {
            return Err(SqstError::InvalidArgument(
                "eta is undefined on the computational basis (m = 1)".into(),
            ));
        }
        self.check_basis(m)?;
        self.check_label(i)?;
        self.check_label(j)?;
        self.check_label(k)?;
        Ok(self.eta_unchecked(i, j, k, m))
    }

    #[inline]
    pub(crate) fn eta_unchecked(&self, i: usize, j: usize, k: usize, m: usize) -> Complex64 {
        let v = self.vector(m, k);
        v[i] * v[j].conj() * self.d as f64
    }

    /// `eta_ij^{km}` for every `m >= 2`, indexed `(m - 2) * d + k`.
    pub fn eta_table(&self, i: usize, j: usize) -> Result<Vec<Complex64>> {
        self.check_label(i)?;
        self.check_label(j)?;
        Ok((2..=self.d + 1)
            .flat_map(|m| (0..self.d).map(move |k| (m, k)))
            .map(|(m, k)| self.eta_unchecked(i, j, k, m))
            .collect())
    }

    /// `|k,m><k,m|`.
    pub fn projector(&self, m: usize, k: usize) -> CMatrix {
        let v = self.vector(m, k);
        CMatrix::from_fn(self.d, self.d, |r, c| v[r] * v[c].conj())
    }

    /// `<k,m| a |k,m>`.
    pub fn expectation(&self, a: &CMatrix, m: usize, k: usize) -> Complex64 {
        let v = self.vector(m, k);
        let mut acc = Complex64::ZERO;
        for r in 0..self.d {
            let mut row = Complex64::ZERO;
            for c in 0..self.d {
                row += a[(r, c)] * v[c];
            }
            acc += v[r].conj() * row;
        }
        acc
    }

    pub fn to_file(&self) -> MubFile {
        let bases = (1..=self.d + 1)
            .map(|m| {
                (0..self.d)
                    .map(|k| self.vector(m, k).iter().map(|a| [a.re, a.im]).collect())
                    .collect()
            })
            .collect();
        MubFile { d: self.d, bases }
    }

    pub fn from_file(file: &MubFile) -> Result<Self> {
        let bases: Vec<Vec<Vec<Complex64>>> = file
            .bases
            .iter()
            .map(|b| {
                b.iter()
                    .map(|v| v.iter().map(|a| Complex64::new(a[0], a[1])).collect())
                    .collect()
            })
            .collect();
        Self::from_bases(file.d, &bases)
    }
}

fn fingerprint(d: usize, amplitudes: &[Complex64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update((d as u64).to_le_bytes());
    for a in amplitudes {
        for x in [a.re, a.im] {
            hasher.update(((x * 1e12).round() as i64).to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// JSON export layout: `bases[m - 1][k][l] = [re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MubFile {
    pub d: usize,
    pub bases: Vec<Vec<Vec<[f64; 2]>>>,
}

/// `(m, k)` label of a basis vector.
pub type VectorLabel = (usize, usize);

#[derive(Debug, Clone, Serialize)]
pub struct MubReport {
    pub d: usize,
    pub max_orthonormality_deviation: f64,
    pub worst_orthonormality_pair: Option<(VectorLabel, VectorLabel)>,
    pub max_unbiasedness_deviation: f64,
    pub worst_unbiasedness_pair: Option<(VectorLabel, VectorLabel)>,
    pub computational_first: bool,
    pub pass: bool,
}

/// Checks orthonormality within each basis and `|<i,m|j,n>|^2 = 1/d` across bases.
pub fn verify_mub(family: &MubFamily, tol: f64) -> MubReport {
    let d = family.dim();
    let inv_d = 1.0 / d as f64;
    let mats: Vec<CMatrix> = (1..=d + 1).map(|m| family.basis_matrix(m)).collect();
    let (mut ortho, mut ortho_pair) = (0.0f64, None);
    let (mut unbiased, mut unbiased_pair) = (0.0f64, None);

    for m in 0..=d {
        for n in m..=d {
            let gram = mats[m].adjoint() * &mats[n];
            for a in 0..d {
                for b in 0..d {
                    let pair = ((m + 1, a), (n + 1, b));
                    if m == n {
                        let target = if a == b {
                            Complex64::ONE
                        } else {
                            Complex64::ZERO
                        };
                        let dev = (gram[(a, b)] - target).norm();
                        if dev > ortho || ortho_pair.is_none() {
                            ortho = ortho.max(dev);
                            ortho_pair = Some(pair);
                        }
                    } else {
                        let dev = (gram[(a, b)].norm_sqr() - inv_d).abs();
                        if dev > unbiased || unbiased_pair.is_none() {
                            unbiased = unbiased.max(dev);
                            unbiased_pair = Some(pair);
                        }
                    }
                }
            }
        }
    }

    MubReport {
        d,
        max_orthonormality_deviation: ortho,
        worst_orthonormality_pair: ortho_pair,
        max_unbiasedness_deviation: unbiased,
        worst_unbiasedness_pair: unbiased_pair,
        computational_first: family.computational_first(),
        pass: ortho <= tol && unbiased <= tol,
    }
}
