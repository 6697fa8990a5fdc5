#![allow(dead_code)]

use mframe::linalg::{hermitian_compose, CVec, HermitianCov, HermitianFactor};
use mframe::mfmodel::IfcVector;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn cnormal(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vec(rng: &mut StdRng, n: usize) -> CVec {
    let v: Vec<Complex64> = (0..n).map(|_| cnormal(rng)).collect();
    CVec::from_slice(&v).unwrap()
}

pub fn random_factor(rng: &mut StdRng, n: usize) -> HermitianFactor {
    HermitianFactor::from_fn(n, |_, _| cnormal(rng)).unwrap()
}

/// `H Hᴴ + shift · I` with Gaussian `H`.
pub fn random_hpd(rng: &mut StdRng, n: usize, shift: f64) -> HermitianCov {
    let phi = hermitian_compose(&random_factor(rng, n));
    HermitianCov::from_lower_fn(n, |i, j| {
        if i == j {
            phi.get(i, j) + shift
        } else {
            phi.get(i, j)
        }
    })
    .unwrap()
}

pub fn random_gamma(rng: &mut StdRng, n: usize, selection: usize) -> IfcVector {
    let mut raw = random_vec(rng, n);
    raw[selection] = Complex64::new(rng.random_range(0.5..2.0), 0.0);
    IfcVector::normalized(&raw, selection).unwrap()
}

/// Dense row-major copy.
pub fn dense(m: &HermitianCov) -> Vec<Vec<Complex64>> {
    m.to_rows()
}

/// Determinant by Laplace expansion. Only meant for N <= 4.
pub fn det(m: &[Vec<Complex64>]) -> Complex64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for c in 0..n {
        let minor: Vec<Vec<Complex64>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
            .collect();
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        acc += m[0][c] * det(&minor) * sign;
    }
    acc
}

/// Solves `m x = b` by Cramer's rule.
pub fn cramer_solve(m: &[Vec<Complex64>], b: &[Complex64]) -> Vec<Complex64> {
    let d = det(m);
    (0..m.len())
        .map(|c| {
            let replaced: Vec<Vec<Complex64>> = m
                .iter()
                .zip(b)
                .map(|(row, &bi)| {
                    let mut r = row.clone();
                    r[c] = bi;
                    r
                })
                .collect();
            det(&replaced) / d
        })
        .collect()
}

/// `aᴴ b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn mat_vec(m: &[Vec<Complex64>], x: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn report(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
