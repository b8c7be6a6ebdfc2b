//! Post-processing: element estimates, operator means and copy-count planning.
//!
//! Every estimator here is a pure fold over a [`MeasurementRecord`]. Sums run
//! over fixed blocks of [`FOLD_CHUNK`] outcomes (in parallel); block sums are
//! then added in record order, so results are bit-stable for a given record
//! regardless of thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SqstError};
use crate::measurement::{MeasurementRecord, OutcomeDistribution, PovmMode};
use crate::mub::MubFamily;
use crate::qstate::CMatrix;

pub const FOLD_CHUNK: usize = 1 << 16;

/// One estimated density-matrix element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectiveEstimate {
    pub i: usize,
    pub j: usize,
    pub value: Complex64,
    pub n: u64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub guarantee: String,
}

impl SelectiveEstimate {
    fn new(i: usize, j: usize, value: Complex64, n: u64) -> Self {
        SelectiveEstimate {
            i,
            j,
            value,
            n,
            epsilon: None,
            delta: None,
            guarantee: String::new(),
        }
    }

    /// Attaches the Hoeffding radius reached at this record size for failure
    /// probability `delta`, union-bounded over `m_elements` estimates.
    pub fn with_guarantee(mut self, delta: f64, m_elements: u64) -> Result<Self> {
        let eps = achievable_epsilon(self.n, delta, m_elements)?;
        self.epsilon = Some(eps);
        self.delta = Some(delta);
        self.guarantee = format!(
            "|estimate - rho[{},{}]| < {eps:.6} with probability >= {} (Hoeffding, union over {m_elements})",
            self.i,
            self.j,
            1.0 - delta
        );
        Ok(self)
    }
}

/// Mean of `table[index(m_s, k_s)]` over the record.
fn fold_mean(record: &MeasurementRecord, table: &[Complex64]) -> Complex64 {
    let d = record.dim();
    let mode = record.mode();
    let sum_block = |block: &[crate::measurement::Outcome]| -> Complex64 {
        block
            .iter()
            .map(|o| {
                table[mode
                    .index(d, o.m as usize, o.k as usize)
                    .expect("record outcomes are validated")]
            })
            .fold(Complex64::ZERO, |a, b| a + b)
    };
    let partials: Vec<Complex64> = record
        .outcomes()
        .par_chunks(FOLD_CHUNK)
        .map(sum_block)
        .collect();
    partials.into_iter().fold(Complex64::ZERO, |a, b| a + b) / record.len() as f64
}

fn check_offdiag_pair(family: &MubFamily, i: usize, j: usize) -> Result<()> {
    let d = family.dim();
    if i >= d || j >= d {
        return Err(SqstError::IndexOutOfRange(format!(
            "element ({i}, {j}) in dimension {d}"
        )));
    }
    if i == j {
        return Err(SqstError::InvalidArgument(format!(
            "diagonal element ({i}, {i}) needs the computational record"
        )));
    }
    Ok(())
}

/// `rho'_ij = N^-1 sum_s eta_ij^{(k_s, m_s)}` from an off-diagonal record.
pub fn estimate_element(
    record: &MeasurementRecord,
    family: &MubFamily,
    i: usize,
    j: usize,
) -> Result<SelectiveEstimate> {
    record.require_mode(PovmMode::Offdiag)?;
    record.check_family(family)?;
    check_offdiag_pair(family, i, j)?;
    if record.is_empty() {
        return Err(SqstError::InvalidArgument("empty record".into()));
    }
    let table = family.eta_table(i, j)?;
    Ok(SelectiveEstimate::new(
        i,
        j,
        fold_mean(record, &table),
        record.len() as u64,
    ))
}

/// `sum_km eta_ij^{km} p_km`: the estimator's expectation under the exact
/// outcome distribution.
pub fn exact_fold(
    dist: &OutcomeDistribution,
    family: &MubFamily,
    i: usize,
    j: usize,
) -> Result<Complex64> {
    if dist.mode() != PovmMode::Offdiag {
        return Err(SqstError::ModeMismatch {
            expected: "offdiag".into(),
            actual: dist.mode().to_string(),
        });
    }
    check_offdiag_pair(family, i, j)?;
    let table = family.eta_table(i, j)?;
    Ok(dist
        .probabilities()
        .iter()
        .zip(&table)
        .map(|(p, e)| e * p)
        .sum())
}

/// Relative frequency of outcome `i` in a computational-basis record.
pub fn estimate_diagonal(record: &MeasurementRecord, i: usize) -> Result<SelectiveEstimate> {
    record.require_mode(PovmMode::Computational)?;
    if i >= record.dim() {
        return Err(SqstError::IndexOutOfRange(format!(
            "label {i} in dimension {}",
            record.dim()
        )));
    }
    if record.is_empty() {
        return Err(SqstError::InvalidArgument("empty record".into()));
    }
    let hits = record
        .outcomes()
        .iter()
        .filter(|o| o.k as usize == i)
        .count();
    let n = record.len() as u64;
    Ok(SelectiveEstimate::new(
        i,
        i,
        Complex64::from(hits as f64 / n as f64),
        n,
    ))
}

pub fn exact_diagonal(dist: &OutcomeDistribution, i: usize) -> Result<f64> {
    if dist.mode() != PovmMode::Computational {
        return Err(SqstError::ModeMismatch {
            expected: "computational".into(),
            actual: dist.mode().to_string(),
        });
    }
    if i >= dist.dim() {
        return Err(SqstError::IndexOutOfRange(format!(
            "label {i} in dimension {}",
            dist.dim()
        )));
    }
    Ok(dist.probability(1, i))
}

fn check_plan_inputs(epsilon: f64, delta: f64, m: u64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(SqstError::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SqstError::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if m == 0 {
        return Err(SqstError::InvalidArgument(
            "number of estimated quantities must be at least 1".into(),
        ));
    }
    Ok(())
}

/// `4 M exp(-N eps^2 / (2 s))`: union-bounded failure probability for `M`
/// complex means of variables with modulus at most `sqrt(s)`.
pub fn hoeffding_failure(n: u64, epsilon: f64, m: u64, scale: f64) -> f64 {
    4.0 * m as f64 * (-(n as f64) * epsilon * epsilon / (2.0 * scale)).exp()
}

fn smallest_n(epsilon: f64, delta: f64, m: u64, scale: f64) -> u64 {
    let x = 2.0 * scale * (4.0 * m as f64 / delta).ln() / (epsilon * epsilon);
    let mut n = x.ceil().max(1.0) as u64;
    // guard the ceiling against rounding in ln / division
    while hoeffding_failure(n, epsilon, m, scale) > delta {
        n += 1;
    }
    while n > 1 && hoeffding_failure(n - 1, epsilon, m, scale) <= delta {
        n -= 1;
    }
    n
}

/// Smallest `N` with `4 M exp(-N eps^2 / 2) <= delta`.
pub fn plan_samples(epsilon: f64, delta: f64, m_elements: u64) -> Result<u64> {
    check_plan_inputs(epsilon, delta, m_elements)?;
    Ok(smallest_n(epsilon, delta, m_elements, 1.0))
}

/// Smallest `N` with `4 M exp(-N eps^2 / (2 K^2 (d+1)^2)) <= delta`.
pub fn plan_samples_general(
    epsilon: f64,
    delta: f64,
    k_bound: f64,
    d: usize,
    m_operators: u64,
) -> Result<u64> {
    check_plan_inputs(epsilon, delta, m_operators)?;
    if !(k_bound > 0.0 && k_bound.is_finite()) || d == 0 {
        return Err(SqstError::InvalidArgument(format!(
            "need K > 0 and d >= 1, got K={k_bound}, d={d}"
        )));
    }
    let scale = k_bound * k_bound * ((d + 1) as f64).powi(2);
    Ok(smallest_n(epsilon, delta, m_operators, scale))
}

/// Radius `eps = sqrt(2 ln(4 M / delta) / N)` guaranteed by an `N`-copy record.
pub fn achievable_epsilon(n: u64, delta: f64, m_elements: u64) -> Result<f64> {
    check_plan_inputs(1.0, delta, m_elements)?;
    if n == 0 {
        return Err(SqstError::InvalidArgument("empty record".into()));
    }
    Ok((2.0 * (4.0 * m_elements as f64 / delta).ln() / n as f64).sqrt())
}

/// Radius `eps = K (d + 1) sqrt(2 ln(4 M / delta) / N)` for operator means.
pub fn achievable_epsilon_general(
    n: u64,
    delta: f64,
    k_bound: f64,
    d: usize,
    m_operators: u64,
) -> Result<f64> {
    if !(k_bound > 0.0 && k_bound.is_finite()) || d == 0 {
        return Err(SqstError::InvalidArgument(format!(
            "need K > 0 and d >= 1, got K={k_bound}, d={d}"
        )));
    }
    Ok(k_bound * (d + 1) as f64 * achievable_epsilon(n, delta, m_operators)?)
}

/// An operator written as `A = -offset * I + sum_km c_km Pi_k^(m)` over all
/// `d + 1` bases, with `c` stored at `(m - 1) * d + k`.
///
/// For the canonical decomposition `c_km = tr[A Pi_k^(m)]` and `offset = tr A`.
/// Operators assembled directly from coefficients (the fixed-modulus family)
/// carry `offset = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoefficients {
    d: usize,
    trace: Complex64,
    offset: Complex64,
    coeffs: Vec<Complex64>,
    bound: f64,
    fingerprint: u64,
}

impl OperatorCoefficients {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn trace(&self) -> Complex64 {
        self.trace
    }

    pub fn offset(&self) -> Complex64 {
        self.offset
    }

    /// Coefficient modulus bound `K` entering the copy-count planner.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, m: usize, k: usize) -> Complex64 {
        self.coeffs[(m - 1) * self.d + k]
    }

    /// `-offset * I + sum c_km Pi_k^(m)`.
    pub fn reconstruct(&self, family: &MubFamily) -> Result<CMatrix> {
        check_family(family, self.d, self.fingerprint)?;
        let d = self.d;
        let mut out = CMatrix::identity(d, d) * (-self.offset);
        for m in 1..=d + 1 {
            for k in 0..d {
                out += family.projector(m, k) * self.coefficient(m, k);
            }
        }
        Ok(out)
    }
}

fn check_family(family: &MubFamily, d: usize, fingerprint: u64) -> Result<()> {
    if family.dim() != d {
        return Err(SqstError::DimensionMismatch {
            expected: d,
            actual: family.dim(),
        });
    }
    if family.fingerprint() != fingerprint {
        return Err(SqstError::FingerprintMismatch {
            record: fingerprint,
            family: family.fingerprint(),
        });
    }
    Ok(())
}

/// Coefficients `O_k^(m) = tr[A Pi_k^(m)]` for every basis, with
/// `A = -tr(A) I + sum O_k^(m) Pi_k^(m)`.
pub fn decompose_operator(a: &CMatrix, family: &MubFamily) -> Result<OperatorCoefficients> {
    let d = family.dim();
    if a.nrows() != d || a.ncols() != d {
        return Err(SqstError::DimensionMismatch {
            expected: d,
            actual: a.nrows().max(a.ncols()),
        });
    }
    let trace = a.trace();
    let coeffs: Vec<Complex64> = (1..=d + 1)
        .flat_map(|m| (0..d).map(move |k| (m, k)))
        .map(|(m, k)| family.expectation(a, m, k))
        .collect();
    let shift = trace / d as f64;
    let bound = coeffs
        .iter()
        .map(|c| (c - shift).norm())
        .fold(0.0, f64::max);
    Ok(OperatorCoefficients {
        d,
        trace,
        offset: trace,
        coeffs,
        bound,
        fingerprint: family.fingerprint(),
    })
}

/// `A_phi = sum_km K e^{i phi_km} Pi_k^(m)`; `phases[(m - 1) * d + k]`.
pub fn extreme_operator(
    phases: &[f64],
    k_bound: f64,
    family: &MubFamily,
) -> Result<OperatorCoefficients> {
    let d = family.dim();
    if phases.len() != d * (d + 1) {
        return Err(SqstError::DimensionMismatch {
            expected: d * (d + 1),
            actual: phases.len(),
        });
    }
    if !(k_bound > 0.0 && k_bound.is_finite()) {
        return Err(SqstError::InvalidArgument(format!(
            "K must be positive, got {k_bound}"
        )));
    }
    let coeffs: Vec<Complex64> = phases
        .iter()
        .map(|&phi| Complex64::from_polar(k_bound, phi))
        .collect();
    let trace = coeffs.iter().sum();
    Ok(OperatorCoefficients {
        d,
        trace,
        offset: Complex64::ZERO,
        coeffs,
        bound: k_bound,
        fingerprint: family.fingerprint(),
    })
}

/// `-offset + N^-1 sum_s (d + 1) c_{k_s m_s}` from a FULL-mode record;
/// unbiased for `tr(rho A)`.
pub fn estimate_mean(
    record: &MeasurementRecord,
    coeffs: &OperatorCoefficients,
) -> Result<Complex64> {
    record.require_mode(PovmMode::Full)?;
    if record.dim() != coeffs.d {
        return Err(SqstError::DimensionMismatch {
            expected: coeffs.d,
            actual: record.dim(),
        });
    }
    if record.header().mub != coeffs.fingerprint {
        return Err(SqstError::FingerprintMismatch {
            record: record.header().mub,
            family: coeffs.fingerprint,
        });
    }
    if record.is_empty() {
        return Err(SqstError::InvalidArgument("empty record".into()));
    }
    let scale = (coeffs.d + 1) as f64;
    let table: Vec<Complex64> = coeffs.coeffs.iter().map(|c| c * scale).collect();
    Ok(fold_mean(record, &table) - coeffs.offset)
}

/// [`estimate_mean`] evaluated against the exact FULL-mode distribution.
pub fn exact_mean(dist: &OutcomeDistribution, coeffs: &OperatorCoefficients) -> Result<Complex64> {
    if dist.mode() != PovmMode::Full {
        return Err(SqstError::ModeMismatch {
            expected: "full".into(),
            actual: dist.mode().to_string(),
        });
    }
    if dist.dim() != coeffs.d {
        return Err(SqstError::DimensionMismatch {
            expected: coeffs.d,
            actual: dist.dim(),
        });
    }
    let scale = (coeffs.d + 1) as f64;
    let sum: Complex64 = dist
        .probabilities()
        .iter()
        .zip(&coeffs.coeffs)
        .map(|(p, c)| c * (p * scale))
        .sum();
    Ok(sum - coeffs.offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{outcome_distribution, sample_record, Outcome, RecordHeader};
    use crate::mub::build_mub;
    use crate::qstate::{
        make_pure_superposition, max_norm, random_density, schatten_norm_general, DensityMatrix,
    };
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn constant_record(f: &MubFamily, mode: PovmMode, o: Outcome, n: u64) -> MeasurementRecord {
        let header = RecordHeader {
            d: f.dim(),
            mode,
            seed: 0,
            n,
            mub: f.fingerprint(),
        };
        MeasurementRecord::new(header, vec![o; n as usize]).unwrap()
    }

    #[test]
    fn constant_record_gives_unit_estimate() {
        let f = build_mub(2).unwrap();
        let rec = constant_record(&f, PovmMode::Offdiag, Outcome { m: 2, k: 0 }, 100);
        let est = estimate_element(&rec, &f, 0, 1).unwrap();
        assert!((est.value - Complex64::ONE).norm() < 1e-15);
        assert_eq!(est.n, 100);
    }

    #[test]
    fn exact_fold_plus_state() {
        let f = build_mub(2).unwrap();
        let plus = make_pure_superposition(0, 1, c(1., 0.), c(1., 0.), 2).unwrap();
        let dist = outcome_distribution(&plus, &f, PovmMode::Offdiag).unwrap();
        // eta = (1, -1, -i, +i) with weights (1/2, 0, 1/4, 1/4)
        assert!((dist.probability(2, 0) - 0.5).abs() < 1e-15);
        assert!(dist.probability(2, 1).abs() < 1e-15);
        assert!((exact_fold(&dist, &f, 0, 1).unwrap() - c(0.5, 0.)).norm() < 1e-14);
    }

    #[test]
    fn exact_fold_ground_state_cancels() {
        let f = build_mub(2).unwrap();
        let dist = outcome_distribution(
            &DensityMatrix::basis_state(2, 0).unwrap(),
            &f,
            PovmMode::Offdiag,
        )
        .unwrap();
        assert!(exact_fold(&dist, &f, 0, 1).unwrap().norm() < 1e-15);
    }

    #[test]
    fn exact_fold_matches_state_elements() {
        for d in [3, 4, 5, 8] {
            let f = build_mub(d).unwrap();
            for seed in 0..5 {
                let rho = random_density(d, 1 + seed as usize % d, seed).unwrap();
                let dist = outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap();
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            let got = exact_fold(&dist, &f, i, j).unwrap();
                            assert!((got - rho.element(i, j)).norm() < 1e-10, "d={d} ({i},{j})");
                        }
                    }
                }
            }
            let mixed =
                outcome_distribution(&DensityMatrix::maximally_mixed(d), &f, PovmMode::Offdiag)
                    .unwrap();
            assert!(exact_fold(&mixed, &f, 0, d - 1).unwrap().norm() < 1e-12);
        }
        let f = build_mub(8).unwrap();
        let rho = make_pure_superposition(2, 5, c(1., 0.), c(0., 1.), 8).unwrap();
        let dist = outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap();
        assert!((exact_fold(&dist, &f, 2, 5).unwrap() - c(0., -0.5)).norm() < 1e-12);
    }

    #[test]
    fn element_estimate_errors() {
        let f = build_mub(3).unwrap();
        let rho = random_density(3, 3, 1).unwrap();
        let comp = sample_record(
            &outcome_distribution(&rho, &f, PovmMode::Computational).unwrap(),
            10,
            1,
        )
        .unwrap();
        assert!(matches!(
            estimate_element(&comp, &f, 0, 1),
            Err(SqstError::ModeMismatch { .. })
        ));
        let off = sample_record(
            &outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap(),
            10,
            1,
        )
        .unwrap();
        assert!(estimate_element(&off, &f, 1, 1).is_err());
        assert!(estimate_element(&off, &f, 0, 3).is_err());
        assert!(matches!(
            estimate_element(&off, &build_mub(5).unwrap(), 0, 1),
            Err(SqstError::FingerprintMismatch { .. })
        ));
        assert!(matches!(
            estimate_diagonal(&off, 0),
            Err(SqstError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_estimates() {
        let f = build_mub(4).unwrap();
        let rec = constant_record(&f, PovmMode::Computational, Outcome { m: 1, k: 3 }, 40);
        assert_eq!(estimate_diagonal(&rec, 3).unwrap().value, Complex64::ONE);
        for i in 0..3 {
            assert_eq!(estimate_diagonal(&rec, i).unwrap().value, Complex64::ZERO);
        }
        let mixed = outcome_distribution(
            &DensityMatrix::maximally_mixed(4),
            &f,
            PovmMode::Computational,
        )
        .unwrap();
        for i in 0..4 {
            assert!((exact_diagonal(&mixed, i).unwrap() - 0.25).abs() < 1e-15);
        }
        let f2 = build_mub(2).unwrap();
        let plus = make_pure_superposition(0, 1, c(1., 0.), c(1., 0.), 2).unwrap();
        let dist = outcome_distribution(&plus, &f2, PovmMode::Computational).unwrap();
        assert!((exact_diagonal(&dist, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((exact_diagonal(&dist, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn planner_values() {
        assert_eq!(plan_samples(0.01, 0.01, 1).unwrap(), 119_830);
        assert_eq!(plan_samples(0.1, 0.01, 1).unwrap(), 1_199);
        // ceil(2e4 ln 6400)
        assert_eq!(plan_samples(0.01, 0.01, 16).unwrap(), 175_282);
        let n = plan_samples(0.01, 0.01, 1).unwrap();
        assert!(hoeffding_failure(n, 0.01, 1, 1.0) <= 0.01);
        assert!(hoeffding_failure(n - 1, 0.01, 1, 1.0) > 0.01);
        assert!(plan_samples(0.0, 0.01, 1).is_err());
        assert!(plan_samples(-1.0, 0.01, 1).is_err());
        assert!(plan_samples(0.1, 0.0, 1).is_err());
        assert!(plan_samples(0.1, 1.0, 1).is_err());
        assert!(plan_samples(0.1, 0.5, 0).is_err());
    }

    #[test]
    fn general_planner_values() {
        // ceil(800 ln 400) = ceil(4793.17)
        let base = plan_samples_general(0.05, 0.01, 0.2, 4, 1).unwrap();
        assert_eq!(base, 4_794);
        assert!(hoeffding_failure(4_793, 0.05, 1, 1.0) > 0.01);
        for d in [2usize, 8, 32] {
            assert_eq!(
                plan_samples_general(0.05, 0.01, 1.0 / (d + 1) as f64, d, 1).unwrap(),
                base
            );
        }
        // K^2 (d+1)^2 = 25 scales the unrounded count by 25
        assert_eq!(
            plan_samples_general(0.05, 0.01, 1.0, 4, 1).unwrap(),
            119_830
        );
        assert!(plan_samples_general(0.05, 0.01, 0.0, 4, 1).is_err());
    }

    #[test]
    fn achievable_epsilon_inverts_planner() {
        let n = plan_samples(0.02, 0.05, 16).unwrap();
        let eps = achievable_epsilon(n, 0.05, 16).unwrap();
        assert!(eps <= 0.02 && eps > 0.0199);
        let n = plan_samples_general(0.05, 0.01, 0.2, 4, 1).unwrap();
        let eps = achievable_epsilon_general(n, 0.01, 0.2, 4, 1).unwrap();
        assert!(eps <= 0.05 && eps > 0.0499);
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    #[test]
    fn decompose_pauli_z() {
        let f = build_mub(2).unwrap();
        let co = decompose_operator(&pauli_z(), &f).unwrap();
        assert!((co.coefficient(1, 0) - c(1., 0.)).norm() < 1e-15);
        assert!((co.coefficient(1, 1) - c(-1., 0.)).norm() < 1e-15);
        for m in 2..=3 {
            for k in 0..2 {
                assert!(co.coefficient(m, k).norm() < 1e-15);
            }
        }
        assert!(max_norm(&(co.reconstruct(&f).unwrap() - pauli_z())) < 1e-14);
    }

    #[test]
    fn decompose_identity() {
        let f = build_mub(2).unwrap();
        let id = CMatrix::identity(2, 2);
        let co = decompose_operator(&id, &f).unwrap();
        assert!(co
            .coefficients()
            .iter()
            .all(|x| (x - Complex64::ONE).norm() < 1e-14));
        assert_eq!(co.trace(), c(2., 0.));
        assert!(max_norm(&(co.reconstruct(&f).unwrap() - id)) < 1e-14);
    }

    #[test]
    fn decompose_matrix_unit_gives_eta_over_d() {
        for d in [3, 4, 5] {
            let f = build_mub(d).unwrap();
            let (i, j) = (0, d - 1);
            let mut a = CMatrix::zeros(d, d);
            a[(j, i)] = Complex64::ONE; // |j><i|
            let co = decompose_operator(&a, &f).unwrap();
            for k in 0..d {
                assert!(co.coefficient(1, k).norm() < 1e-14);
                for m in 2..=d + 1 {
                    let want = f.eta(i, j, k, m).unwrap() / d as f64;
                    assert!((co.coefficient(m, k) - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn mean_of_z_and_identity() {
        let f = build_mub(2).unwrap();
        let zero = DensityMatrix::basis_state(2, 0).unwrap();
        let dist = outcome_distribution(&zero, &f, PovmMode::Full).unwrap();
        let z = decompose_operator(&pauli_z(), &f).unwrap();
        assert!((exact_mean(&dist, &z).unwrap() - Complex64::ONE).norm() < 1e-14);
        let id = decompose_operator(&CMatrix::identity(2, 2), &f).unwrap();
        for seed in 0..5 {
            let rho = random_density(2, 2, seed).unwrap();
            let dist = outcome_distribution(&rho, &f, PovmMode::Full).unwrap();
            assert!((exact_mean(&dist, &id).unwrap() - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_mean_matches_trace_for_random_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for d in [2, 3, 4, 5] {
            let f = build_mub(d).unwrap();
            for _ in 0..50 {
                let a = CMatrix::from_fn(d, d, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let rho = random_density(d, d, rng.random()).unwrap();
                let co = decompose_operator(&a, &f).unwrap();
                let dist = outcome_distribution(&rho, &f, PovmMode::Full).unwrap();
                let want = (rho.as_matrix() * &a).trace();
                assert!((exact_mean(&dist, &co).unwrap() - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn extreme_operator_cases() {
        let d = 3;
        let f = build_mub(d).unwrap();
        let zeros = vec![0.0; d * (d + 1)];
        let a = extreme_operator(&zeros, 1.0, &f).unwrap();
        let id = CMatrix::identity(d, d);
        assert!(max_norm(&(a.reconstruct(&f).unwrap() - &id * c((d + 1) as f64, 0.))) < 1e-12);
        assert!(a
            .coefficients()
            .iter()
            .all(|x| (x.norm() - 1.0).abs() < 1e-15));

        // a single nonzero phase block is a weighted projector
        let mut phases = vec![0.0; d * (d + 1)];
        phases[(3 - 1) * d + 2] = std::f64::consts::FRAC_PI_2;
        let b = extreme_operator(&phases, 0.5, &f).unwrap();
        let diff = b.reconstruct(&f).unwrap() - a.reconstruct(&f).unwrap() * c(0.5, 0.);
        let want = f.projector(3, 2) * (c(0., 0.5) - c(0.5, 0.));
        assert!(max_norm(&(diff - want)) < 1e-12);

        assert!(extreme_operator(&phases[1..], 0.5, &f).is_err());
    }

    #[test]
    fn extreme_operator_norm_is_order_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3, 4, 5, 7, 8, 16, 32] {
            let f = build_mub(d).unwrap();
            let trials = if d >= 16 { 10 } else { 100 };
            for _ in 0..trials {
                let phases: Vec<f64> = (0..d * (d + 1))
                    .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                    .collect();
                let a = extreme_operator(&phases, 1.0 / (d + 1) as f64, &f).unwrap();
                let op = schatten_norm_general(&a.reconstruct(&f).unwrap(), f64::INFINITY).unwrap();
                assert!(op <= 2.0, "d={d} norm {op}");
            }
        }
    }

    #[test]
    fn mean_estimate_from_record_is_close() {
        let d = 4;
        let f = build_mub(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phases: Vec<f64> = (0..d * (d + 1))
            .map(|_| rng.random::<f64>() * 6.3)
            .collect();
        let a = extreme_operator(&phases, 1.0 / (d + 1) as f64, &f).unwrap();
        let rho = random_density(d, 2, 8).unwrap();
        let dist = outcome_distribution(&rho, &f, PovmMode::Full).unwrap();
        let rec = sample_record(&dist, 200_000, 1).unwrap();
        let truth = (rho.as_matrix() * a.reconstruct(&f).unwrap()).trace();
        assert!((exact_mean(&dist, &a).unwrap() - truth).norm() < 1e-12);
        assert!((estimate_mean(&rec, &a).unwrap() - truth).norm() < 0.02);
        let off = sample_record(
            &outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap(),
            10,
            1,
        )
        .unwrap();
        assert!(matches!(
            estimate_mean(&off, &a),
            Err(SqstError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn estimator_is_unbiased_across_records() {
        let d = 3;
        let f = build_mub(d).unwrap();
        let rho = random_density(d, 1, 21).unwrap();
        let dist = outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap();
        let estimates: Vec<Complex64> = (0..200)
            .map(|s| {
                estimate_element(&sample_record(&dist, 10_000, s).unwrap(), &f, 0, 2)
                    .unwrap()
                    .value
            })
            .collect();
        let t = estimates.len() as f64;
        let mean: Complex64 = estimates.iter().sum::<Complex64>() / t;
        // jackknife standard error of the mean
        let loo: Vec<Complex64> = estimates
            .iter()
            .map(|e| (mean * t - e) / (t - 1.0))
            .collect();
        let var: f64 = loo.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() * (t - 1.0) / t;
        let se = var.sqrt();
        assert!(
            (mean - rho.element(0, 2)).norm() <= 5.0 * se,
            "mean {mean} truth {} se {se}",
            rho.element(0, 2)
        );
    }

    #[test]
    fn guarantee_attached() {
        let f = build_mub(2).unwrap();
        let rec = constant_record(&f, PovmMode::Offdiag, Outcome { m: 3, k: 1 }, 119_830);
        let est = estimate_element(&rec, &f, 0, 1)
            .unwrap()
            .with_guarantee(0.01, 1)
            .unwrap();
        assert!(est.epsilon.unwrap() <= 0.01);
        assert!(est.guarantee.contains("rho[0,1]"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reordering_record_changes_estimate_negligibly(seed in any::<u64>(), n in 1000u64..200_000) {
            let f = build_mub(4).unwrap();
            let rho = random_density(4, 2, seed).unwrap();
            let rec = sample_record(&outcome_distribution(&rho, &f, PovmMode::Offdiag).unwrap(), n, seed).unwrap();
            let mut shuffled = rec.outcomes().to_vec();
            shuffled.reverse();
            shuffled.rotate_left((seed % n) as usize);
            let rec2 = MeasurementRecord::new(*rec.header(), shuffled).unwrap();
            let a = estimate_element(&rec, &f, 1, 3).unwrap().value;
            let b = estimate_element(&rec2, &f, 1, 3).unwrap().value;
            prop_assert!((a - b).norm() <= 1e-9);
            prop_assert!(a.norm() <= 1.0 + 1e-12);
        }

        #[test]
        fn decomposition_round_trip(d in prop::sample::select(vec![2usize, 3, 4, 5, 7, 8, 9]), seed in any::<u64>()) {
            let f = build_mub(d).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0));
            let co = decompose_operator(&a, &f).unwrap();
            prop_assert!(max_norm(&(co.reconstruct(&f).unwrap() - &a)) <= 1e-10);
            let again = decompose_operator(&co.reconstruct(&f).unwrap(), &f).unwrap();
            for (x, y) in again.coefficients().iter().zip(co.coefficients()) {
                prop_assert!((x - y).norm() <= 1e-10);
            }
        }
    }
}
