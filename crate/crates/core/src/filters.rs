//! Multi-frame filter synthesis and application.
//!
//! Filters are applied as `Y = wᴴ x̄`. Covariances reach the filters through
//! one of four parameterizations: the matrix itself, its inverse, or a
//! factor `H` of either with `Φ = H Hᴴ` (resp. `Φ⁻¹ = H Hᴴ`). Only the kinds
//! that need a solve get diagonal loading.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{diag_load, hermitian_compose, CVec, Cholesky, HermitianCov, HermitianFactor};
use crate::mfmodel::{IfcVector, MultiFrameVector};

/// Loading added before every factorization.
pub const DIAGONAL_LOADING: f64 = 1e-7;

/// Floor on `|γᴴ Φ⁻¹ γ|`.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterWeights(pub CVec);

impl Deref for FilterWeights {
    type Target = CVec;

    fn deref(&self) -> &CVec {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// Weights supplied directly (deep filtering).
    #[serde(alias = "df")]
    DeepFilter,
    /// MF Wiener filter on `Φ_xx`.
    #[serde(alias = "wf")]
    Wiener,
    /// MVDR on the noisy covariance `Φ_xx`.
    MvdrNoisy,
    /// MVDR on the undesired-signal covariance `Φ_uu`.
    #[serde(alias = "mvdr")]
    MvdrNoise,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [
        FilterKind::DeepFilter,
        FilterKind::Wiener,
        FilterKind::MvdrNoisy,
        FilterKind::MvdrNoise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::DeepFilter => "df",
            FilterKind::Wiener => "wf",
            FilterKind::MvdrNoisy => "mvdr-noisy",
            FilterKind::MvdrNoise => "mvdr",
        }
    }

    /// Whether the filter is built from `Φ_uu` rather than `Φ_xx`.
    pub fn uses_noise_cov(&self) -> bool {
        matches!(self, FilterKind::MvdrNoise)
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "df" | "deep-filter" => Ok(FilterKind::DeepFilter),
            "wf" | "wiener" => Ok(FilterKind::Wiener),
            "mvdr-noisy" => Ok(FilterKind::MvdrNoisy),
            "mvdr" | "mvdr-noise" => Ok(FilterKind::MvdrNoise),
            other => Err(Error::ConfigInvalid(format!("unknown filter kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovKind {
    Direct,
    Inverse,
    Hermitian,
    HermitianInverse,
}

impl CovKind {
    pub const ALL: [CovKind; 4] = [
        CovKind::Direct,
        CovKind::Hermitian,
        CovKind::Inverse,
        CovKind::HermitianInverse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CovKind::Direct => "direct",
            CovKind::Inverse => "inverse",
            CovKind::Hermitian => "hermitian",
            CovKind::HermitianInverse => "hermitian-inverse",
        }
    }
}

impl fmt::Display for CovKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(CovKind::Direct),
            "inverse" => Ok(CovKind::Inverse),
            "hermitian" => Ok(CovKind::Hermitian),
            "hermitian-inverse" | "hermitian-of-inverse" => Ok(CovKind::HermitianInverse),
            other => Err(Error::ConfigInvalid(format!("unknown covariance parameterization '{other}'"))),
        }
    }
}

/// A covariance as delivered by an estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum CovParameterization {
    /// `Φ` itself.
    Direct(HermitianCov),
    /// `Φ⁻¹` itself.
    Inverse(HermitianCov),
    /// `H` with `Φ = H Hᴴ`.
    Hermitian(HermitianFactor),
    /// `H` with `Φ⁻¹ = H Hᴴ`.
    HermitianInverse(HermitianFactor),
}

impl CovParameterization {
    pub fn kind(&self) -> CovKind {
        match self {
            CovParameterization::Direct(_) => CovKind::Direct,
            CovParameterization::Inverse(_) => CovKind::Inverse,
            CovParameterization::Hermitian(_) => CovKind::Hermitian,
            CovParameterization::HermitianInverse(_) => CovKind::HermitianInverse,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            CovParameterization::Direct(m) | CovParameterization::Inverse(m) => m.order(),
            CovParameterization::Hermitian(h) | CovParameterization::HermitianInverse(h) => h.order(),
        }
    }
}

/// A covariance ready to have its inverse applied to vectors.
#[derive(Clone)]
pub enum ResolvedCov {
    /// Factorized `Φ`; applying the inverse is a triangular solve.
    Factored(Cholesky),
    /// Explicit `Φ⁻¹`; applying it is a multiplication.
    Inverse(HermitianCov),
}

impl ResolvedCov {
    pub fn order(&self) -> usize {
        match self {
            ResolvedCov::Factored(c) => c.order(),
            ResolvedCov::Inverse(m) => m.order(),
        }
    }

    /// `Φ⁻¹ v`.
    pub fn apply_inverse(&self, v: &CVec) -> Result<CVec> {
        match self {
            ResolvedCov::Factored(c) => c.solve(v),
            ResolvedCov::Inverse(m) => m.mul_vec(v),
        }
    }
}

/// Turns a parameterized covariance into something whose inverse can be
/// applied. `Direct` and `Hermitian` are loaded with `loading` and then
/// factorized; the inverse kinds are used as given.
pub fn resolve_cov(p: &CovParameterization, loading: f64) -> Result<ResolvedCov> {
    match p {
        CovParameterization::Direct(phi) => Ok(ResolvedCov::Factored(Cholesky::factorize(&diag_load(phi, loading))?)),
        CovParameterization::Hermitian(h) => {
            let phi = diag_load(&hermitian_compose(h), loading);
            Ok(ResolvedCov::Factored(Cholesky::factorize(&phi)?))
        }
        CovParameterization::Inverse(inv) => Ok(ResolvedCov::Inverse(inv.clone())),
        CovParameterization::HermitianInverse(h) => Ok(ResolvedCov::Inverse(hermitian_compose(h))),
    }
}

/// Scaling applied to the Wiener solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WienerScaling {
    /// `φ_s Φ_xx⁻¹ γ`, the MMSE solution since `E[x̄ S*] = φ_s γ`.
    #[default]
    Scaled,
    /// `Φ_xx⁻¹ γ` without the speech PSD factor.
    Unscaled,
}

impl FromStr for WienerScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(WienerScaling::Scaled),
            "unscaled" => Ok(WienerScaling::Unscaled),
            other => Err(Error::ConfigInvalid(format!("unknown Wiener scaling '{other}'"))),
        }
    }
}

fn check_order(phi: &ResolvedCov, gamma: &IfcVector) -> Result<()> {
    if phi.order() != gamma.len() {
        return Err(Error::OrderMismatch {
            expected: phi.order(),
            got: gamma.len(),
        });
    }
    Ok(())
}

/// Multi-frame Wiener filter.
pub fn wf_weights(
    phi_xx: &ResolvedCov,
    gamma: &IfcVector,
    phi_s: f64,
    scaling: WienerScaling,
) -> Result<FilterWeights> {
    check_order(phi_xx, gamma)?;
    let v = phi_xx.apply_inverse(gamma)?;
    let w = match scaling {
        WienerScaling::Scaled => v.scale(Complex64::new(phi_s, 0.0)),
        WienerScaling::Unscaled => v,
    };
    Ok(FilterWeights(w))
}

/// Multi-frame MVDR filter `Φ⁻¹γ / (γᴴ Φ⁻¹ γ)`. Pass `Φ_xx` or `Φ_uu`; both
/// give the same filter when `Φ_xx = φ_s γγᴴ + Φ_uu`.
pub fn mvdr_weights(phi: &ResolvedCov, gamma: &IfcVector) -> Result<FilterWeights> {
    check_order(phi, gamma)?;
    let v = phi.apply_inverse(gamma)?;
    let denom = gamma.dot_h(&v);
    if !(denom.norm() > DENOMINATOR_FLOOR) || !denom.is_finite() {
        return Err(Error::DegenerateDenominator(denom.norm()));
    }
    // γᴴ Φ⁻¹ γ is real for Hermitian Φ⁻¹.
    let mut w = v;
    w.iter_mut().for_each(|x| *x /= denom.re);
    Ok(FilterWeights(w))
}

/// Directly supplied filter coefficients.
pub fn df_weights(raw: &CVec) -> FilterWeights {
    FilterWeights(*raw)
}

/// `Y = wᴴ x̄ = Σ conj(w_i) x_i`.
pub fn apply_weights(w: &FilterWeights, x: &MultiFrameVector) -> Result<Complex64> {
    if w.len() != x.len() {
        return Err(Error::OrderMismatch {
            expected: w.len(),
            got: x.len(),
        });
    }
    Ok(w.dot_h(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ifc(values: &[f64]) -> IfcVector {
        IfcVector::normalized(&CVec::from_real(values).unwrap(), 0).unwrap()
    }

    fn mf(values: &[Complex64]) -> MultiFrameVector {
        MultiFrameVector(CVec::from_slice(values).unwrap())
    }

    #[test]
    fn resolve_direct_is_loaded() {
        let r = resolve_cov(&CovParameterization::Direct(HermitianCov::identity(2).unwrap()), DIAGONAL_LOADING).unwrap();
        let v = r.apply_inverse(&CVec::from_real(&[1.0, 2.0]).unwrap()).unwrap();
        let k = 1.0 / (1.0 + 1e-7);
        assert!((v[0] - c(k, 0.)).norm() < 1e-15);
        assert!((v[1] - c(2.0 * k, 0.)).norm() < 1e-15);
    }

    #[test]
    fn resolve_inverse_kinds_multiply() {
        let r = resolve_cov(
            &CovParameterization::HermitianInverse(HermitianFactor::identity(3).unwrap()),
            DIAGONAL_LOADING,
        )
        .unwrap();
        match &r {
            ResolvedCov::Inverse(m) => assert_eq!(*m, HermitianCov::identity(3).unwrap()),
            _ => panic!("expected explicit inverse"),
        }
        let r = resolve_cov(
            &CovParameterization::Inverse(HermitianCov::from_diag(&[2., 4.]).unwrap()),
            DIAGONAL_LOADING,
        )
        .unwrap();
        let v = r.apply_inverse(&CVec::from_real(&[2., 4.]).unwrap()).unwrap();
        assert_eq!(&*v, &[c(4., 0.), c(16., 0.)]);
    }

    #[test]
    fn resolve_propagates_singularity() {
        let singular = HermitianCov::from_lower_fn(2, |_, _| c(1., 0.)).unwrap();
        assert!(matches!(
            resolve_cov(&CovParameterization::Direct(singular.clone()), 0.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(resolve_cov(&CovParameterization::Direct(singular.clone()), DIAGONAL_LOADING).is_ok());
        // Nothing is inverted for the inverse kinds.
        assert!(resolve_cov(&CovParameterization::Inverse(singular), 0.0).is_ok());
    }

    #[test]
    fn wiener_examples() {
        // Single tap, φ_s = 3, φ_z = 1: gain 3 / 4.
        let phi = resolve_cov(&CovParameterization::Direct(HermitianCov::from_diag(&[4.0]).unwrap()), 0.0).unwrap();
        let w = wf_weights(&phi, &ifc(&[1.0]), 3.0, WienerScaling::Scaled).unwrap();
        assert_eq!(w[0], c(0.75, 0.0));

        let w = wf_weights(&phi, &ifc(&[1.0]), 0.0, WienerScaling::Scaled).unwrap();
        assert_eq!(w[0], c(0.0, 0.0));

        let id = resolve_cov(&CovParameterization::Inverse(HermitianCov::identity(2).unwrap()), 0.0).unwrap();
        let w = wf_weights(&id, &ifc(&[1.0, 0.0]), 1.0, WienerScaling::Scaled).unwrap();
        assert_eq!(&**w, &[c(1., 0.), c(0., 0.)]);

        let w = wf_weights(&phi, &ifc(&[1.0]), 3.0, WienerScaling::Unscaled).unwrap();
        assert_eq!(w[0], c(0.25, 0.0));
    }

    #[test]
    fn mvdr_examples() {
        let d = resolve_cov(&CovParameterization::Direct(HermitianCov::from_diag(&[1., 2.]).unwrap()), 0.0).unwrap();
        let w = mvdr_weights(&d, &ifc(&[1.0, 0.0])).unwrap();
        assert_eq!(&**w, &[c(1., 0.), c(0., 0.)]);

        let id = resolve_cov(&CovParameterization::Inverse(HermitianCov::identity(2).unwrap()), 0.0).unwrap();
        let g = ifc(&[1.0, 0.5]);
        let w = mvdr_weights(&id, &g).unwrap();
        assert!((w[0] - c(0.8, 0.)).norm() < 1e-15);
        assert!((w[1] - c(0.4, 0.)).norm() < 1e-15);
        assert!((w.dot_h(&g) - c(1., 0.)).norm() < 1e-15);

        for phi in [0.3, 1.0, 17.0, 1e-6] {
            let r = resolve_cov(&CovParameterization::Direct(HermitianCov::from_diag(&[phi]).unwrap()), DIAGONAL_LOADING).unwrap();
            assert_eq!(mvdr_weights(&r, &ifc(&[1.0])).unwrap()[0], c(1.0, 0.0));
        }
    }

    #[test]
    fn mvdr_degenerate_denominator() {
        let zero_inv = resolve_cov(&CovParameterization::Inverse(HermitianCov::zeros(2).unwrap()), 0.0).unwrap();
        assert!(matches!(
            mvdr_weights(&zero_inv, &ifc(&[1.0, 0.3])),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn order_mismatch_is_reported() {
        let id = resolve_cov(&CovParameterization::Inverse(HermitianCov::identity(3).unwrap()), 0.0).unwrap();
        assert!(matches!(mvdr_weights(&id, &ifc(&[1.0, 0.2])), Err(Error::OrderMismatch { .. })));
        let w = df_weights(&CVec::from_real(&[1.0, 0.0]).unwrap());
        assert!(matches!(
            apply_weights(&w, &mf(&[c(1., 0.)])),
            Err(Error::OrderMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn apply_examples() {
        let x = mf(&[c(3., 1.), c(2., 0.), c(1., -1.)]);
        let e = df_weights(&CVec::unit(3, 0).unwrap());
        assert_eq!(apply_weights(&e, &x).unwrap(), c(3., 1.));

        let w = df_weights(&CVec::from_slice(&[c(0., 1.), c(0., 0.)]).unwrap());
        assert_eq!(apply_weights(&w, &mf(&[c(1., 0.), c(5., 0.)])).unwrap(), c(0., -1.));

        let zero = df_weights(&CVec::zeros(3).unwrap());
        assert_eq!(apply_weights(&zero, &x).unwrap(), c(0., 0.));

        let half = df_weights(&CVec::from_real(&[0.5, 0.5]).unwrap());
        let (a, b) = (c(2., -4.), c(1., 3.));
        assert_eq!(apply_weights(&half, &mf(&[a, b])).unwrap(), a * 0.5 + b * 0.5);
    }

    #[test]
    fn names_round_trip() {
        for k in FilterKind::ALL {
            assert_eq!(k.name().parse::<FilterKind>().unwrap(), k);
        }
        for k in CovKind::ALL {
            assert_eq!(k.name().parse::<CovKind>().unwrap(), k);
        }
    }
}
