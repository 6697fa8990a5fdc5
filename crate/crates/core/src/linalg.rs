//! Small dense complex Hermitian linear algebra.
//!
//! Everything here works on matrices of order `N <= MAX_ORDER` stored inline,
//! so per-frame filter synthesis never touches the heap. [`HermitianCov`]
//! keeps only its lower triangle; the upper triangle is always read back as
//! the conjugate mirror, which makes the Hermitian property hold bit-exactly.

use std::fmt;
use std::ops::{Deref, DerefMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported filter order.
pub const MAX_ORDER: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative pivot floor of the Hermitian factorization, scaled by `trace / N`.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidOrder(order));
    }
    Ok(())
}

/// Fixed-capacity complex vector of length `1..=MAX_ORDER`.
#[derive(Clone, Copy, PartialEq)]
pub struct CVec {
    len: usize,
    data: [Complex64; MAX_ORDER],
}

impl CVec {
    pub fn zeros(len: usize) -> Result<Self> {
        check_order(len)?;
        Ok(Self {
            len,
            data: [ZERO; MAX_ORDER],
        })
    }

    /// Selection vector `e` with a one at `index`.
    pub fn unit(len: usize, index: usize) -> Result<Self> {
        let mut v = Self::zeros(len)?;
        if index >= len {
            return Err(Error::ConfigInvalid(format!(
                "selection index {index} outside order {len}"
            )));
        }
        v.data[index] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_slice(values: &[Complex64]) -> Result<Self> {
        let mut v = Self::zeros(values.len())?;
        v.data[..values.len()].copy_from_slice(values);
        Ok(v)
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        let mut v = Self::zeros(values.len())?;
        for (d, &x) in v.data.iter_mut().zip(values) {
            *d = Complex64::new(x, 0.0);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Hermitian inner product `selfᴴ · other`.
    pub fn dot_h(&self, other: &CVec) -> Complex64 {
        self.iter()
            .zip(other.iter())
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&self, factor: Complex64) -> CVec {
        let mut out = *self;
        out.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|c| c.is_finite())
    }
}

impl Deref for CVec {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.data[..self.len]
    }
}

impl DerefMut for CVec {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.data[..self.len]
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// N×N Hermitian covariance matrix. Only the lower triangle (`i >= j`) is
/// stored; diagonal entries are kept real.
#[derive(Clone, PartialEq)]
pub struct HermitianCov {
    order: usize,
    lower: [Complex64; MAX_ORDER * MAX_ORDER],
}

impl HermitianCov {
    pub fn zeros(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            order,
            lower: [ZERO; MAX_ORDER * MAX_ORDER],
        })
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::from_diag(&vec![1.0; order])
    }

    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        Ok(m)
    }

    /// Builds a matrix from `entry(i, j)` evaluated on the lower triangle only.
    /// The imaginary part of the diagonal is discarded.
    pub fn from_lower_fn(order: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(order)?;
        for i in 0..order {
            for j in 0..=i {
                m.set(i, j, entry(i, j));
            }
        }
        Ok(m)
    }

    /// Takes the lower triangle of a dense row-major matrix. Upper entries are
    /// ignored, so a non-Hermitian estimate is projected onto its lower half.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let order = rows.len();
        for row in rows {
            if row.len() != order {
                return Err(Error::OrderMismatch {
                    expected: order,
                    got: row.len(),
                });
            }
        }
        Self::from_lower_fn(order, |i, j| rows[i][j])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * MAX_ORDER + j
    }

    /// Entry `(i, j)`; for `i < j` the conjugate of the stored `(j, i)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i >= j {
            self.lower[self.idx(i, j)]
        } else {
            self.lower[self.idx(j, i)].conj()
        }
    }

    /// Writes entry `(i, j)` (and implicitly its mirror).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        if i == j {
            let k = self.idx(i, i);
            self.lower[k] = Complex64::new(value.re, 0.0);
        } else if i > j {
            let k = self.idx(i, j);
            self.lower[k] = value;
        } else {
            let k = self.idx(j, i);
            self.lower[k] = value.conj();
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.lower[self.idx(i, i)].re
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.diag(i)).sum()
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> CVec {
        let mut v = CVec::zeros(self.order).expect("order already validated");
        for (i, c) in v.iter_mut().enumerate() {
            *c = self.get(i, j);
        }
        v
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.order)
            .map(|i| (0..self.order).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, x: &CVec) -> Result<CVec> {
        self.check_len(x.len())?;
        let mut y = CVec::zeros(self.order)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.order).fold(ZERO, |acc, j| acc + self.get(i, j) * x[j]);
        }
        Ok(y)
    }

    /// Real part of `xᴴ Φ x`.
    pub fn quad_form(&self, x: &CVec) -> Result<f64> {
        let y = self.mul_vec(x)?;
        Ok(x.dot_h(&y).re)
    }

    pub fn add(&self, other: &HermitianCov) -> Result<HermitianCov> {
        self.check_len(other.order)?;
        let mut out = self.clone();
        for i in 0..self.order {
            for j in 0..=i {
                let k = self.idx(i, j);
                out.lower[k] += other.lower[k];
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> HermitianCov {
        let mut out = self.clone();
        for i in 0..self.order {
            for j in 0..=i {
                let k = self.idx(i, j);
                out.lower[k] *= factor;
            }
        }
        out
    }

    /// `self + weight · v vᴴ`.
    pub fn add_rank1(&self, weight: f64, v: &CVec) -> Result<HermitianCov> {
        self.check_len(v.len())?;
        let mut out = self.clone();
        for i in 0..self.order {
            for j in 0..=i {
                let k = self.idx(i, j);
                out.lower[k] += v[i] * v[j].conj() * weight;
            }
            let k = self.idx(i, i);
            out.lower[k].im = 0.0;
        }
        Ok(out)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &HermitianCov) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.order.min(other.order) {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.order {
            for j in 0..self.order {
                acc += self.get(i, j).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.order).all(|i| (0..=i).all(|j| self.get(i, j).is_finite()))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.order {
            return Err(Error::OrderMismatch {
                expected: self.order,
                got: len,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for HermitianCov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianCov")
            .field("order", &self.order)
            .field("rows", &self.to_rows())
            .finish()
    }
}

/// General square complex matrix `H`, interpreted as a factor of `H Hᴴ`.
#[derive(Clone, PartialEq)]
pub struct HermitianFactor {
    order: usize,
    data: [Complex64; MAX_ORDER * MAX_ORDER],
}

impl HermitianFactor {
    pub fn zeros(order: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            order,
            data: [ZERO; MAX_ORDER * MAX_ORDER],
        })
    }

    pub fn identity(order: usize) -> Result<Self> {
        Self::from_fn(order, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn from_fn(order: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut m = Self::zeros(order)?;
        for i in 0..order {
            for j in 0..order {
                m.data[i * MAX_ORDER + j] = entry(i, j);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let order = rows.len();
        for row in rows {
            if row.len() != order {
                return Err(Error::OrderMismatch {
                    expected: order,
                    got: row.len(),
                });
            }
        }
        Self::from_fn(order, |i, j| rows[i][j])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * MAX_ORDER + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.order)
            .map(|i| (0..self.order).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

impl fmt::Debug for HermitianFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianFactor")
            .field("order", &self.order)
            .field("rows", &self.to_rows())
            .finish()
    }
}

/// `H Hᴴ`, Hermitian positive semidefinite by construction.
pub fn hermitian_compose(factor: &HermitianFactor) -> HermitianCov {
    let n = factor.order;
    let mut out = HermitianCov::zeros(n).expect("factor order already validated");
    for i in 0..n {
        for j in 0..=i {
            let v = (0..n).fold(ZERO, |acc, k| acc + factor.get(i, k) * factor.get(j, k).conj());
            out.set(i, j, v);
        }
    }
    out
}

/// `cov + epsilon · I`.
pub fn diag_load(cov: &HermitianCov, epsilon: f64) -> HermitianCov {
    let mut out = cov.clone();
    for i in 0..cov.order {
        let k = out.idx(i, i);
        out.lower[k].re += epsilon;
    }
    out
}

/// `old_weight · cov + new_weight · x xᴴ`.
pub fn accumulate_outer(
    cov: &HermitianCov,
    x: &CVec,
    old_weight: f64,
    new_weight: f64,
) -> Result<HermitianCov> {
    let mut out = cov.clone();
    accumulate_outer_in_place(&mut out, x, old_weight, new_weight)?;
    Ok(out)
}

/// In-place form of [`accumulate_outer`].
pub fn accumulate_outer_in_place(cov: &mut HermitianCov, x: &CVec, old_weight: f64, new_weight: f64) -> Result<()> {
    cov.check_len(x.len())?;
    for i in 0..cov.order {
        for j in 0..i {
            let k = cov.idx(i, j);
            cov.lower[k] = cov.lower[k] * old_weight + x[i] * x[j].conj() * new_weight;
        }
        let k = cov.idx(i, i);
        cov.lower[k] = Complex64::new(cov.lower[k].re * old_weight + x[i].norm_sqr() * new_weight, 0.0);
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `Φ = L Lᴴ`.
#[derive(Clone)]
pub struct Cholesky {
    order: usize,
    l: [Complex64; MAX_ORDER * MAX_ORDER],
}

impl Cholesky {
    /// Factorizes `cov`. Fails with [`Error::NotPositiveDefinite`] as soon as a
    /// pivot drops to `PIVOT_TOLERANCE · trace / N` or below.
    pub fn factorize(cov: &HermitianCov) -> Result<Self> {
        let n = cov.order;
        let trace = cov.trace();
        let floor = if trace.is_finite() && trace > 0.0 {
            PIVOT_TOLERANCE * trace / n as f64
        } else {
            0.0
        };
        let mut l = [ZERO; MAX_ORDER * MAX_ORDER];
        for j in 0..n {
            let mut d = cov.diag(j);
            for k in 0..j {
                d -= l[j * MAX_ORDER + k].norm_sqr();
            }
            if !(d > floor) {
                return Err(Error::NotPositiveDefinite { row: j, pivot: d, floor });
            }
            let ljj = d.sqrt();
            l[j * MAX_ORDER + j] = Complex64::new(ljj, 0.0);
            for i in j + 1..n {
                let mut v = cov.get(i, j);
                for k in 0..j {
                    v -= l[i * MAX_ORDER + k] * l[j * MAX_ORDER + k].conj();
                }
                l[i * MAX_ORDER + j] = v / ljj;
            }
        }
        Ok(Self { order: n, l })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.l[i * MAX_ORDER + j]
    }

    /// Solves `Φ v = rhs` by forward then backward substitution.
    pub fn solve(&self, rhs: &CVec) -> Result<CVec> {
        let n = self.order;
        if rhs.len() != n {
            return Err(Error::OrderMismatch { expected: n, got: rhs.len() });
        }
        let mut y = *rhs;
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.at(i, k) * y[k];
            }
            y[i] = v / self.at(i, i).re;
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= self.at(k, i).conj() * y[k];
            }
            y[i] = v / self.at(i, i).re;
        }
        Ok(y)
    }

    /// The factor `L` itself.
    pub fn factor(&self) -> HermitianFactor {
        HermitianFactor::from_fn(self.order, |i, j| self.at(i, j)).expect("order validated")
    }

    /// `L⁻ᴴ`, i.e. a factor `H` with `H Hᴴ = Φ⁻¹`.
    pub fn inverse_factor(&self) -> HermitianFactor {
        let n = self.order;
        // Columns of L⁻¹ via forward substitution against unit vectors.
        let mut inv = [ZERO; MAX_ORDER * MAX_ORDER];
        for c in 0..n {
            for i in c..n {
                let mut v = if i == c { Complex64::new(1.0, 0.0) } else { ZERO };
                for k in c..i {
                    v -= self.at(i, k) * inv[k * MAX_ORDER + c];
                }
                inv[i * MAX_ORDER + c] = v / self.at(i, i).re;
            }
        }
        HermitianFactor::from_fn(n, |i, j| inv[j * MAX_ORDER + i].conj()).expect("order validated")
    }

    /// Explicit `Φ⁻¹`, for callers that need the inverse as data.
    pub fn inverse(&self) -> HermitianCov {
        hermitian_compose(&self.inverse_factor())
    }
}

/// Solves `cov · v = rhs` for Hermitian positive-definite `cov` without
/// forming the inverse.
pub fn solve_hpd(cov: &HermitianCov, rhs: &CVec) -> Result<CVec> {
    if rhs.len() != cov.order {
        return Err(Error::OrderMismatch {
            expected: cov.order,
            got: rhs.len(),
        });
    }
    Cholesky::factorize(cov)?.solve(rhs)
}
