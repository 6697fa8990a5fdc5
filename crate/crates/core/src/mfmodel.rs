//! Multi-frame signal model: per-bin stacking of consecutive spectra,
//! inter-frame correlation (IFC) vectors and the rank-one speech
//! decomposition of the noisy covariance.
//!
//! Covariance entries follow `Φ[i][j] = E[x̄_i x̄_j*]`, so column `j` of `Φ_ss`
//! is `E[s̄ S_j*]` and normalizing it by its diagonal entry yields the IFC
//! vector for selection index `j`.

use std::collections::VecDeque;
use std::ops::Deref;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CVec, HermitianCov, MAX_ORDER};

/// Speech PSD below which a bin is treated as speech-absent.
pub const SPEECH_PSD_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MfBufferConfig {
    pub order: usize,
    pub lookahead: usize,
    /// Tap holding the reference frame; 0 is the newest entry `X(t + l)`.
    pub selection_index: usize,
}

impl MfBufferConfig {
    pub fn new(order: usize, lookahead: usize) -> Result<Self> {
        Self::with_selection(order, lookahead, 0)
    }

    pub fn with_selection(order: usize, lookahead: usize, selection_index: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidOrder(order));
        }
        if selection_index >= order {
            return Err(Error::ConfigInvalid(format!(
                "selection index {selection_index} must be below order {order}"
            )));
        }
        Ok(Self {
            order,
            lookahead,
            selection_index,
        })
    }
}

/// Stacked frames of one bin, newest first:
/// `[X(t+l), X(t+l-1), …, X(t+l-N+1)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiFrameVector(pub CVec);

impl Deref for MultiFrameVector {
    type Target = CVec;

    fn deref(&self) -> &CVec {
        &self.0
    }
}

/// Sliding per-bin history of the last `order` spectra. Missing history is
/// zero, so output starts as soon as the look-ahead is satisfied.
pub struct MultiFrameBuffer {
    config: MfBufferConfig,
    num_bins: usize,
    history: VecDeque<Vec<Complex64>>,
    pushed: usize,
}

impl MultiFrameBuffer {
    pub fn new(config: MfBufferConfig, num_bins: usize) -> Self {
        let history = (0..config.order)
            .map(|_| vec![Complex64::new(0.0, 0.0); num_bins])
            .collect();
        Self {
            config,
            num_bins,
            history,
            pushed: 0,
        }
    }

    pub fn config(&self) -> &MfBufferConfig {
        &self.config
    }

    /// Frames pushed so far.
    pub fn pushed(&self) -> usize {
        self.pushed
    }

    /// Output time index of the most recent stack, once available.
    pub fn current_time(&self) -> Option<usize> {
        (self.pushed > self.config.lookahead).then(|| self.pushed - 1 - self.config.lookahead)
    }

    /// Pushes the next spectrum. Returns the stacked vector of every bin for
    /// output time `t` once frame `t + l` has arrived, `None` before that.
    pub fn push_frame(&mut self, frame: &[Complex64]) -> Result<Option<Vec<MultiFrameVector>>> {
        self.push(frame)?;
        if self.current_time().is_none() {
            return Ok(None);
        }
        (0..self.num_bins).map(|b| self.vector(b)).collect::<Result<_>>().map(Some)
    }

    /// Like [`push_frame`](Self::push_frame) without materializing the
    /// stacks; read them with [`vector`](Self::vector).
    pub fn push(&mut self, frame: &[Complex64]) -> Result<Option<usize>> {
        if frame.len() != self.num_bins {
            return Err(Error::BinCountMismatch {
                expected: self.num_bins,
                got: frame.len(),
            });
        }
        let mut oldest = self.history.pop_back().expect("history holds `order` frames");
        oldest.copy_from_slice(frame);
        self.history.push_front(oldest);
        self.pushed += 1;
        Ok(self.current_time())
    }

    /// Current stack for `bin`, newest frame first.
    pub fn vector(&self, bin: usize) -> Result<MultiFrameVector> {
        if bin >= self.num_bins {
            return Err(Error::BinCountMismatch {
                expected: self.num_bins,
                got: bin + 1,
            });
        }
        let mut v = CVec::zeros(self.config.order)?;
        for (tap, frame) in v.iter_mut().zip(&self.history) {
            *tap = frame[bin];
        }
        Ok(MultiFrameVector(v))
    }
}

/// Speech IFC vector, normalized so the entry at `selection_index` is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfcVector {
    gamma: CVec,
    selection_index: usize,
}

impl IfcVector {
    /// Normalizes `raw` by its entry at `selection_index`.
    pub fn normalized(raw: &CVec, selection_index: usize) -> Result<Self> {
        if selection_index >= raw.len() {
            return Err(Error::ConfigInvalid(format!(
                "selection index {selection_index} outside order {}",
                raw.len()
            )));
        }
        let pivot = raw[selection_index];
        if pivot.norm() <= SPEECH_PSD_FLOOR {
            return Err(Error::ZeroSpeechPsd(pivot.norm()));
        }
        let mut gamma = raw.scale(pivot.inv());
        gamma[selection_index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            gamma,
            selection_index,
        })
    }

    /// The selection vector `e`: uncorrelated frames.
    pub fn selection(order: usize, selection_index: usize) -> Result<Self> {
        Ok(Self {
            gamma: CVec::unit(order, selection_index)?,
            selection_index,
        })
    }

    pub fn selection_index(&self) -> usize {
        self.selection_index
    }

    pub fn as_vec(&self) -> &CVec {
        &self.gamma
    }
}

impl Deref for IfcVector {
    type Target = CVec;

    fn deref(&self) -> &CVec {
        &self.gamma
    }
}

/// `Φ_ss e / (eᵀ Φ_ss e)`.
pub fn ifc_from_cov(phi_ss: &HermitianCov, selection_index: usize) -> Result<IfcVector> {
    if selection_index >= phi_ss.order() {
        return Err(Error::ConfigInvalid(format!(
            "selection index {selection_index} outside order {}",
            phi_ss.order()
        )));
    }
    let psd = phi_ss.diag(selection_index);
    if !(psd > SPEECH_PSD_FLOOR) {
        return Err(Error::ZeroSpeechPsd(psd));
    }
    let mut gamma = phi_ss.column(selection_index);
    gamma.iter_mut().for_each(|g| *g /= psd);
    gamma[selection_index] = Complex64::new(1.0, 0.0);
    Ok(IfcVector {
        gamma,
        selection_index,
    })
}

/// `eᵀ Φ_ss e`, clamped at zero.
pub fn speech_psd(phi_ss: &HermitianCov, selection_index: usize) -> f64 {
    phi_ss.diag(selection_index).max(0.0)
}

/// `φ_s γ γᴴ + Φ_uu`.
pub fn compose_phixx(phi_s: f64, gamma: &IfcVector, phi_uu: &HermitianCov) -> Result<HermitianCov> {
    phi_uu.add_rank1(phi_s, gamma)
}
