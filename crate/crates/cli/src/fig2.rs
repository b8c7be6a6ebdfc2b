//! Monte Carlo reproduction of the single-element error histogram.
//!
//! Each trial draws a random superposition `a|i> + b|j>` with `(a, b)` Haar
//! on the unit sphere of C^2 and `i != j` uniform, samples an off-diagonal
//! record of `N` copies and records `|rho'_ij - rho_ij|`.

use std::fmt::Write as _;

use anyhow::{ensure, Result};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sqst_core::estimator::{estimate_element, plan_samples};
use sqst_core::measurement::{outcome_distribution, sample_record, PovmMode};
use sqst_core::mub::build_mub;
use sqst_core::qstate::{complex_gaussian, make_pure_superposition};

pub const DEFAULT_DIMS: [usize; 4] = [2, 4, 8, 16];

#[derive(Debug, Clone)]
pub struct Fig2Config {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the planner's copy count.
    pub copies: Option<u64>,
    pub seed: u64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            dims: DEFAULT_DIMS.to_vec(),
            trials: 1000,
            epsilon: 0.01,
            delta: 0.01,
            copies: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    pub d: usize,
    pub trial: usize,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Summary {
    pub d: usize,
    pub trials: usize,
    pub copies: u64,
    pub epsilon: f64,
    /// Fraction of trials with `|error| > epsilon`.
    pub exceed_fraction: f64,
    pub mean: f64,
    /// Population standard deviation of the absolute errors.
    pub std: f64,
    pub three_sigma: f64,
    pub mean_plus_three_sigma: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig2Result {
    pub summary: Vec<Fig2Summary>,
    pub rows: Vec<Fig2Row>,
}

/// Generator for trial `trial` of dimension `d`: the master seed on stream `(d << 32) | trial`.
fn trial_rng(seed: u64, d: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((d as u64) << 32) | trial as u64);
    rng
}

pub fn run_fig2(cfg: &Fig2Config) -> Result<Fig2Result> {
    ensure!(cfg.trials > 0, "need at least one trial");
    ensure!(
        cfg.dims.iter().all(|&d| d >= 2),
        "dimensions must be at least 2"
    );
    ensure!(cfg.trials < (1 << 32), "too many trials");
    let copies = match cfg.copies {
        Some(n) => n,
        None => plan_samples(cfg.epsilon, cfg.delta, 1)?,
    };

    let mut rows = Vec::with_capacity(cfg.dims.len() * cfg.trials);
    let mut summary = Vec::new();
    for &d in &cfg.dims {
        let family = build_mub(d)?;
        let errors: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                let mut rng = trial_rng(cfg.seed, d, trial);
                let i = rng.random_range(0..d);
                let mut j = rng.random_range(0..d - 1);
                if j >= i {
                    j += 1;
                }
                let rho = make_pure_superposition(
                    i,
                    j,
                    complex_gaussian(&mut rng),
                    complex_gaussian(&mut rng),
                    d,
                )?;
                let dist = outcome_distribution(&rho, &family, PovmMode::Offdiag)?;
                let record = sample_record(&dist, copies, rng.next_u64())?;
                let est = estimate_element(&record, &family, i, j)?;
                Ok((est.value - rho.element(i, j)).norm())
            })
            .collect::<Result<_>>()?;
        summary.push(summarize(d, copies, cfg.epsilon, &errors));
        rows.extend(
            errors
                .into_iter()
                .enumerate()
                .map(|(trial, abs_error)| Fig2Row {
                    d,
                    trial,
                    abs_error,
                }),
        );
    }
    Ok(Fig2Result { summary, rows })
}

fn summarize(d: usize, copies: u64, epsilon: f64, errors: &[f64]) -> Fig2Summary {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    Fig2Summary {
        d,
        trials: errors.len(),
        copies,
        epsilon,
        exceed_fraction: errors.iter().filter(|&&e| e > epsilon).count() as f64 / n,
        mean,
        std,
        three_sigma: 3.0 * std,
        mean_plus_three_sigma: mean + 3.0 * std,
        max: errors.iter().copied().fold(0.0, f64::max),
    }
}

/// `d,trial,abs_error` rows in (d, trial) order.
pub fn rows_csv(rows: &[Fig2Row]) -> String {
    let mut out = String::from("d,trial,abs_error\n");
    for r in rows {
        writeln!(out, "{},{},{:.17e}", r.d, r.trial, r.abs_error).unwrap();
    }
    out
}

pub fn summary_line(s: &Fig2Summary) -> String {
    format!(
        "d={} trials={} N={} exceed(>{})={:.4} mean={:.3e} 3sigma={:.3e} mean+3sigma={:.3e} max={:.3e}",
        s.d, s.trials, s.copies, s.epsilon, s.exceed_fraction, s.mean, s.three_sigma, s.mean_plus_three_sigma, s.max
    )
}
