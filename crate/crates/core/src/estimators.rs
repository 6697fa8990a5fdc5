//! Per-bin statistics providers.
//!
//! [`OracleEstimator`] tracks speech and noise covariances from the clean and
//! noise references by recursive averaging and derives everything the filters
//! need from them. It fills the slot a trained network would occupy, so its
//! output is exactly what such a model would have to deliver per bin and
//! frame: an [`EstimatorOutput`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{CovKind, CovParameterization, FilterKind};
use crate::linalg::{accumulate_outer_in_place, diag_load, CVec, Cholesky, HermitianCov};
use crate::mfmodel::{ifc_from_cov, speech_psd, IfcVector, MultiFrameVector};
use crate::weights::WeightSequence;

pub const DEFAULT_SMOOTHING: f64 = 0.96;

/// Relative regularization (times `trace / N`) the oracle applies before
/// factoring a covariance for the factor and inverse parameterizations.
pub const ORACLE_REGULARIZATION: f64 = 1e-9;

/// Absolute regularization floor for all-zero covariances.
pub const ORACLE_REGULARIZATION_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub gamma: IfcVector,
    /// Speech PSD at the selected tap.
    pub phi_s: f64,
    /// Noise PSD at the selected tap.
    pub phi_z: f64,
    /// `Φ_xx` or `Φ_uu`, depending on the configured filter.
    pub cov: Option<CovParameterization>,
    pub df_raw: Option<CVec>,
}

impl EstimatorOutput {
    /// Single-tap Wiener gain `φ_s / (φ_s + φ_z)`, zero when both vanish.
    pub fn single_tap_gain(&self) -> f64 {
        let total = self.phi_s + self.phi_z;
        if total > 0.0 {
            self.phi_s / total
        } else {
            0.0
        }
    }
}

/// Stacked inputs of one bin at one output time.
#[derive(Debug, Clone, Copy)]
pub struct BinInput<'a> {
    pub noisy: &'a MultiFrameVector,
    pub clean: Option<&'a MultiFrameVector>,
    pub noise: Option<&'a MultiFrameVector>,
}

pub trait Estimator {
    fn estimate(&mut self, time: usize, bin: usize, input: &BinInput<'_>) -> Result<EstimatorOutput>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub order: usize,
    pub selection_index: usize,
    /// Recursive averaging factor `λ` in `[0, 1)`.
    pub smoothing: f64,
    pub filter: FilterKind,
    pub cov_kind: CovKind,
}

impl OracleConfig {
    pub fn new(order: usize, filter: FilterKind, cov_kind: CovKind) -> Self {
        Self {
            order,
            selection_index: 0,
            smoothing: DEFAULT_SMOOTHING,
            filter,
            cov_kind,
        }
    }
}

#[derive(Clone)]
struct BinState {
    phi_ss: HermitianCov,
    phi_zz: HermitianCov,
}

/// Reference-driven estimator of `Φ_ss`, `Φ_zz` and everything derived from
/// them.
pub struct OracleEstimator {
    config: OracleConfig,
    bins: Vec<BinState>,
}

impl OracleEstimator {
    pub fn new(config: OracleConfig, num_bins: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&config.smoothing) {
            return Err(Error::ConfigInvalid(format!(
                "smoothing {} outside [0, 1)",
                config.smoothing
            )));
        }
        if config.selection_index >= config.order {
            return Err(Error::ConfigInvalid(format!(
                "selection index {} must be below order {}",
                config.selection_index, config.order
            )));
        }
        let zero = HermitianCov::zeros(config.order)?;
        let state = BinState {
            phi_ss: zero.clone(),
            phi_zz: zero,
        };
        Ok(Self {
            config,
            bins: vec![state; num_bins],
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn phi_ss(&self, bin: usize) -> &HermitianCov {
        &self.bins[bin].phi_ss
    }

    pub fn phi_zz(&self, bin: usize) -> &HermitianCov {
        &self.bins[bin].phi_zz
    }

    /// `Φ_xx = Φ_ss + Φ_zz` (speech and noise uncorrelated).
    pub fn phi_xx(&self, bin: usize) -> HermitianCov {
        let s = &self.bins[bin];
        s.phi_ss.add(&s.phi_zz).expect("orders match")
    }

    /// `Φ_uu = Φ_xx − φ_s γ γᴴ`, with `Φ_uu = Φ_xx` when speech is absent.
    pub fn phi_uu(&self, bin: usize) -> HermitianCov {
        let (gamma, phi_s) = self.speech_terms(bin);
        self.phi_xx(bin).add_rank1(-phi_s, &gamma).expect("orders match")
    }

    fn speech_terms(&self, bin: usize) -> (IfcVector, f64) {
        let sel = self.config.selection_index;
        let phi_ss = &self.bins[bin].phi_ss;
        match ifc_from_cov(phi_ss, sel) {
            Ok(gamma) => (gamma, speech_psd(phi_ss, sel)),
            Err(_) => (
                IfcVector::selection(self.config.order, sel).expect("validated in new"),
                0.0,
            ),
        }
    }

    /// Folds one pair of stacked clean/noise vectors into the bin's
    /// statistics and returns the derived filter inputs.
    pub fn oracle_update(
        &mut self,
        bin: usize,
        clean_mf: &MultiFrameVector,
        noise_mf: &MultiFrameVector,
    ) -> Result<EstimatorOutput> {
        let order = self.config.order;
        for v in [clean_mf, noise_mf] {
            if v.len() != order {
                return Err(Error::OrderMismatch {
                    expected: order,
                    got: v.len(),
                });
            }
        }
        let num_bins = self.bins.len();
        let state = self.bins.get_mut(bin).ok_or(Error::BinCountMismatch {
            expected: num_bins,
            got: bin + 1,
        })?;
        let lambda = self.config.smoothing;
        accumulate_outer_in_place(&mut state.phi_ss, clean_mf, lambda, 1.0 - lambda)?;
        accumulate_outer_in_place(&mut state.phi_zz, noise_mf, lambda, 1.0 - lambda)?;

        let (gamma, phi_s) = self.speech_terms(bin);
        let phi_z = self.bins[bin].phi_zz.diag(self.config.selection_index).max(0.0);
        let cov = match self.config.filter {
            FilterKind::DeepFilter => None,
            FilterKind::Wiener | FilterKind::MvdrNoisy => Some(parameterize(&self.phi_xx(bin), self.config.cov_kind)?),
            FilterKind::MvdrNoise => {
                let mut phi_uu = self.phi_xx(bin);
                accumulate_outer_in_place(&mut phi_uu, &gamma, 1.0, -phi_s)?;
                Some(parameterize(&phi_uu, self.config.cov_kind)?)
            }
        };
        Ok(EstimatorOutput {
            gamma,
            phi_s,
            phi_z,
            cov,
            df_raw: None,
        })
    }
}

impl Estimator for OracleEstimator {
    fn estimate(&mut self, _time: usize, bin: usize, input: &BinInput<'_>) -> Result<EstimatorOutput> {
        let clean = input.clean.ok_or(Error::MissingReference("clean"))?;
        let noise = input.noise.ok_or(Error::MissingReference("noise"))?;
        self.oracle_update(bin, clean, noise)
    }
}

/// Cholesky factor of `Φ + ρI` with a small relative `ρ`, enlarged until the
/// factorization succeeds. Emulates an estimator whose output is invertible
/// by construction.
fn regularized_cholesky(phi: &HermitianCov) -> Result<Cholesky> {
    let n = phi.order() as f64;
    let mut rho = ORACLE_REGULARIZATION * (phi.trace() / n).max(0.0) + ORACLE_REGULARIZATION_FLOOR;
    let mut last_err = None;
    for _ in 0..6 {
        match Cholesky::factorize(&diag_load(phi, rho)) {
            Ok(c) => return Ok(c),
            Err(e) => last_err = Some(e),
        }
        rho *= 1e3;
    }
    Err(last_err.expect("at least one attempt"))
}

/// Expresses `phi` in the requested parameterization. `Direct` passes the
/// raw estimate through untouched.
pub fn parameterize(phi: &HermitianCov, kind: CovKind) -> Result<CovParameterization> {
    Ok(match kind {
        CovKind::Direct => CovParameterization::Direct(phi.clone()),
        CovKind::Hermitian => CovParameterization::Hermitian(regularized_cholesky(phi)?.factor()),
        CovKind::Inverse => CovParameterization::Inverse(regularized_cholesky(phi)?.inverse()),
        CovKind::HermitianInverse => {
            CovParameterization::HermitianInverse(regularized_cholesky(phi)?.inverse_factor())
        }
    })
}

/// Scalar speech and noise PSD tracker for single-tap gains.
#[derive(Debug, Clone)]
pub struct GainOracle {
    smoothing: f64,
    psd: Vec<(f64, f64)>,
}

impl GainOracle {
    pub fn new(smoothing: f64, num_bins: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&smoothing) {
            return Err(Error::ConfigInvalid(format!("smoothing {smoothing} outside [0, 1)")));
        }
        Ok(Self {
            smoothing,
            psd: vec![(0.0, 0.0); num_bins],
        })
    }

    /// Updates `(φ_s, φ_z)` of `bin` and returns `φ_s / (φ_s + φ_z)`.
    pub fn update(&mut self, bin: usize, clean: num_complex::Complex64, noise: num_complex::Complex64) -> f64 {
        let l = self.smoothing;
        let (s, z) = &mut self.psd[bin];
        *s = l * *s + (1.0 - l) * clean.norm_sqr();
        *z = l * *z + (1.0 - l) * noise.norm_sqr();
        let total = *s + *z;
        if total > 0.0 {
            *s / total
        } else {
            0.0
        }
    }
}

/// Wraps directly supplied filter coefficients.
pub fn passthrough_df(weights: &CVec, order: usize, selection_index: usize) -> Result<EstimatorOutput> {
    if weights.len() != order {
        return Err(Error::OrderMismatch {
            expected: order,
            got: weights.len(),
        });
    }
    Ok(EstimatorOutput {
        gamma: IfcVector::selection(order, selection_index)?,
        phi_s: 0.0,
        phi_z: 0.0,
        cov: None,
        df_raw: Some(*weights),
    })
}

/// Replays a [`WeightSequence`] frame-synchronously.
pub struct PassthroughEstimator {
    weights: WeightSequence,
    selection_index: usize,
}

impl PassthroughEstimator {
    pub fn new(weights: WeightSequence, selection_index: usize) -> Self {
        Self {
            weights,
            selection_index,
        }
    }
}

impl Estimator for PassthroughEstimator {
    fn estimate(&mut self, time: usize, bin: usize, _input: &BinInput<'_>) -> Result<EstimatorOutput> {
        let w = self.weights.get(time, bin)?;
        passthrough_df(&w, self.weights.order(), self.selection_index)
    }
}
