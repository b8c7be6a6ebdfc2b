//! Reference solutions for the max-norm projection, independent of the
//! library's solver and eigensolver.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

fn eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    let e = h.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Optimal `t` for a 2x2 Hermitian input: scan the population `a` of `|1>`
/// over `[0, 1]` in `steps` steps; the off-diagonal is then placed optimally
/// inside its disk of radius `sqrt(a(1-a))`.
pub fn qubit_oracle(x: &CMatrix, steps: usize) -> f64 {
    (0..=steps)
        .map(|s| {
            let a = s as f64 / steps as f64;
            let r = (a * (1.0 - a)).sqrt();
            (x[(0, 0)].re - (1.0 - a))
                .abs()
                .max((x[(1, 1)].re - a).abs())
                .max((x[(0, 1)].norm() - r).max(0.0))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Optimal `t` for a diagonal input by scanning the probability simplex at the
/// given resolution. Diagonal inputs have a diagonal optimum.
pub fn diagonal_simplex_oracle(x: &[f64], resolution: f64) -> f64 {
    let steps = (1.0 / resolution).round() as usize;
    fn walk(x: &[f64], steps: usize, left: usize, prefix: &mut Vec<f64>, best: &mut f64) {
        let idx = prefix.len();
        if idx + 1 == x.len() {
            let last = left as f64 / steps as f64;
            let t = prefix
                .iter()
                .zip(x)
                .map(|(p, v)| (p - v).abs())
                .fold((last - x[idx]).abs(), f64::max);
            *best = best.min(t);
            return;
        }
        for take in 0..=left {
            prefix.push(take as f64 / steps as f64);
            walk(x, steps, left - take, prefix, best);
            prefix.pop();
        }
    }
    let mut best = f64::INFINITY;
    walk(x, steps, steps, &mut Vec::new(), &mut best);
    best
}

fn project_l1_ball(w: &CMatrix) -> CMatrix {
    let total: f64 = w.iter().map(|c| c.norm()).sum();
    if total <= 1.0 {
        return w.clone();
    }
    let mut mags: Vec<f64> = w.iter().map(|c| c.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let cand = (cum - 1.0) / (i + 1) as f64;
        if m > cand {
            theta = cand;
        }
    }
    w.map(|c| {
        let m = c.norm();
        if m > theta {
            c * ((m - theta) / m)
        } else {
            Complex64::ZERO
        }
    })
}

fn dual_value(w: &CMatrix, x: &CMatrix) -> f64 {
    let lin: f64 = w.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    let lmax = eigen(w).0.into_iter().fold(f64::NEG_INFINITY, f64::max);
    lin - lmax
}

/// Certified lower bound on the optimal `t` from weak duality:
/// `t* >= Re tr(W X) - lambda_max(W)` for every Hermitian `W` with
/// `sum |W_ij| <= 1`. `W` is improved by accelerated projected gradient on
/// the `mu`-smoothed dual.
pub fn dual_lower_bound(x: &CMatrix, mu: f64, iterations: usize) -> f64 {
    let d = x.nrows();
    let mut w = CMatrix::zeros(d, d);
    let mut v = w.clone();
    let mut tk = 1.0_f64;
    let mut best = dual_value(&w, x);
    for _ in 0..iterations {
        let (vals, vecs) = eigen(&v);
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = vals.iter().map(|l| ((l - top) / mu).exp()).collect();
        let norm: f64 = weights.iter().sum();
        let mut scaled = vecs.clone();
        for (c, wgt) in weights.iter().enumerate() {
            scaled.column_mut(c).scale_mut(wgt / norm);
        }
        let softmax = scaled * vecs.adjoint();
        let step = &v + (x - softmax) * Complex64::from(mu);
        let w_next = project_l1_ball(&((&step + step.adjoint()) * Complex64::from(0.5)));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        v = &w_next + (&w_next - &w) * Complex64::from((tk - 1.0) / t_next);
        w = w_next;
        tk = t_next;
        best = best.max(dual_value(&w, x));
    }
    best
}
