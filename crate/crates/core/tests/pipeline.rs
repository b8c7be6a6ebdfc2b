use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqst_core::estimator::{estimate_diagonal, estimate_element, plan_samples};
use sqst_core::measurement::{
    outcome_distribution, read_record, sample_record, write_record, PovmMode, RecordFormat,
};
use sqst_core::mub::build_mub;
use sqst_core::qstate::{make_pure_superposition, random_density};
use sqst_core::tomography::assemble_linear_estimate;
use sqst_core::SqstError;

#[test]
fn file_round_trip_preserves_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let d = 5;
    let family = build_mub(d).unwrap();
    let rho = random_density(d, 3, 17).unwrap();
    let off = sample_record(
        &outcome_distribution(&rho, &family, PovmMode::Offdiag).unwrap(),
        80_000,
        1,
    )
    .unwrap();
    let comp = sample_record(
        &outcome_distribution(&rho, &family, PovmMode::Computational).unwrap(),
        80_000,
        2,
    )
    .unwrap();

    for (format, ext) in [(RecordFormat::Text, "txt"), (RecordFormat::Binary, "bin")] {
        let off_path = dir.path().join(format!("off.{ext}"));
        let comp_path = dir.path().join(format!("comp.{ext}"));
        write_record(&off, &off_path, format).unwrap();
        write_record(&comp, &comp_path, format).unwrap();
        let off2 = read_record(&off_path, Some(&family)).unwrap();
        let comp2 = read_record(&comp_path, Some(&family)).unwrap();
        assert_eq!(off2, off);
        let a = assemble_linear_estimate(&off, &comp, &family).unwrap();
        let b = assemble_linear_estimate(&off2, &comp2, &family).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert_eq!(
            estimate_element(&off2, &family, 1, 4).unwrap().value,
            estimate_element(&off, &family, 1, 4).unwrap().value
        );
        assert_eq!(
            estimate_diagonal(&comp2, 3).unwrap().value,
            estimate_diagonal(&comp, 3).unwrap().value
        );
        let other = build_mub(7).unwrap();
        assert!(matches!(
            read_record(&off_path, Some(&other)),
            Err(SqstError::FingerprintMismatch { .. })
        ));
    }
}

#[test]
fn every_element_from_one_record() {
    let d = 4;
    let family = build_mub(d).unwrap();
    let rho = random_density(d, 2, 3).unwrap();
    let n = plan_samples(0.02, 0.01, (d * (d - 1)) as u64).unwrap();
    let off = sample_record(
        &outcome_distribution(&rho, &family, PovmMode::Offdiag).unwrap(),
        n,
        5,
    )
    .unwrap();
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let est = estimate_element(&off, &family, i, j).unwrap();
                assert!((est.value - rho.element(i, j)).norm() < 0.02, "({i},{j})");
            }
        }
    }
}

#[test]
fn hoeffding_failure_rate_is_below_delta() {
    let (eps, delta) = (0.05, 0.05);
    let n = plan_samples(eps, delta, 1).unwrap();
    let d = 3;
    let family = build_mub(d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let trials = 400;
    let mut exceed = 0;
    for _ in 0..trials {
        let a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let b = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let rho = make_pure_superposition(0, 2, a, b, d).unwrap();
        let rec = sample_record(
            &outcome_distribution(&rho, &family, PovmMode::Offdiag).unwrap(),
            n,
            rng.random(),
        )
        .unwrap();
        let est = estimate_element(&rec, &family, 0, 2).unwrap();
        exceed += usize::from((est.value - rho.element(0, 2)).norm() > eps);
    }
    assert!(exceed as f64 / trials as f64 <= delta, "{exceed}/{trials}");
}
