//! Streaming enhancement chain: analysis bank → multi-frame stacks →
//! estimator → filter synthesis → synthesis bank.
//!
//! Bins whose center frequency lies below `f_mf` are multi-frame filtered.
//! Higher bins either pass through or get an oracle single-tap Wiener gain.
//! Filtering always reads the noisy spectrum.
//!
//! The output is delayed by the streaming filter-bank delay plus one hop per
//! frame between the newest stacked frame and the reference tap. With the
//! default reference tap (`selection_index = lookahead`) that is the filter
//! bank delay plus the look-ahead.

use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{BinInput, Estimator, EstimatorOutput, GainOracle, OracleConfig, OracleEstimator, PassthroughEstimator};
use crate::filterbank::{latency_report, Analyzer, FilterbankConfig, LatencyReport, Synthesizer};
use crate::filters::{
    apply_weights, df_weights, mvdr_weights, resolve_cov, wf_weights, CovKind, FilterKind, FilterWeights,
    WienerScaling, DIAGONAL_LOADING,
};
use crate::linalg::MAX_ORDER;
use crate::metrics::{measure_rtf, seg_snr, si_sdr, MetricReport};
use crate::mfmodel::{MfBufferConfig, MultiFrameBuffer};
use crate::weights::WeightSequence;

/// Largest allowed `|noisy − (clean + noise)|` per sample.
pub const REFERENCE_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_SEG_SNR_FRAME_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HighBandPolicy {
    /// Bins at or above `f_mf` are copied from the noisy input.
    #[default]
    Passthrough,
    /// Bins at or above `f_mf` get the oracle gain `φ_s / (φ_s + φ_z)`.
    OracleGain,
}

impl std::str::FromStr for HighBandPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "passthrough" => Ok(HighBandPolicy::Passthrough),
            "oracle-gain" => Ok(HighBandPolicy::OracleGain),
            other => Err(Error::ConfigInvalid(format!("unknown high-band policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailurePolicy {
    /// A bin whose covariance cannot be inverted passes the reference tap.
    #[default]
    Passthrough,
    /// The first inversion failure aborts processing.
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterbankSettings {
    pub sample_rate: u32,
    pub window_len: usize,
    pub hop: usize,
}

impl Default for FilterbankSettings {
    fn default() -> Self {
        Self {
            sample_rate: crate::filterbank::DEFAULT_SAMPLE_RATE,
            window_len: crate::filterbank::DEFAULT_WINDOW_LEN,
            hop: crate::filterbank::DEFAULT_HOP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filter: FilterKind,
    pub order: usize,
    pub lookahead: usize,
    /// Reference tap; defaults to `lookahead`, the tap holding `X(t)`.
    pub selection_index: Option<usize>,
    /// Upper edge of the multi-frame region in Hz.
    pub f_mf: f64,
    pub cov_kind: CovKind,
    pub wf_scaling: WienerScaling,
    pub smoothing: f64,
    pub diag_loading: f64,
    pub high_band: HighBandPolicy,
    pub on_solve_failure: FailurePolicy,
    /// Timed repetitions for the reported RTF; 0 times the single run.
    pub rtf_runs: usize,
    pub filterbank: FilterbankSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter: FilterKind::MvdrNoise,
            order: 5,
            lookahead: 2,
            selection_index: None,
            f_mf: 4000.0,
            cov_kind: CovKind::HermitianInverse,
            wf_scaling: WienerScaling::Scaled,
            smoothing: crate::estimators::DEFAULT_SMOOTHING,
            diag_loading: DIAGONAL_LOADING,
            high_band: HighBandPolicy::Passthrough,
            on_solve_failure: FailurePolicy::Passthrough,
            rtf_runs: 0,
            filterbank: FilterbankSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn filterbank_config(&self) -> Result<FilterbankConfig> {
        let fb = &self.filterbank;
        FilterbankConfig::new(fb.sample_rate, fb.window_len, fb.hop)
    }

    pub fn resolved_selection(&self) -> usize {
        self.selection_index.unwrap_or(self.lookahead)
    }

    /// Whether clean and noise references must be supplied.
    pub fn needs_references(&self) -> bool {
        self.filter != FilterKind::DeepFilter || self.high_band == HighBandPolicy::OracleGain
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::InvalidOrder(self.order));
        }
        let sel = self.resolved_selection();
        if sel >= self.order {
            return Err(Error::ConfigInvalid(format!(
                "reference tap {sel} must be below order {} (lookahead {}; set selection_index to override)",
                self.order, self.lookahead
            )));
        }
        let fb = self.filterbank_config()?;
        let nyquist = fb.sample_rate as f64 / 2.0;
        if !(0.0..=nyquist).contains(&self.f_mf) {
            return Err(Error::ConfigInvalid(format!(
                "f_mf {} Hz outside [0, {nyquist}]",
                self.f_mf
            )));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::ConfigInvalid(format!("smoothing {} outside [0, 1)", self.smoothing)));
        }
        if !(self.diag_loading >= 0.0 && self.diag_loading.is_finite()) {
            return Err(Error::ConfigInvalid(format!("diagonal loading {} invalid", self.diag_loading)));
        }
        Ok(())
    }

    /// Number of low bins that are multi-frame filtered.
    pub fn mf_bins(&self, fb: &FilterbankConfig) -> usize {
        (0..fb.num_bins())
            .take_while(|&b| (b as f64) * fb.bin_width() < self.f_mf)
            .count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhanceStats {
    pub frames: usize,
    /// Bin-frames that went through multi-frame filtering.
    pub filtered_bins: usize,
    /// Bin-frames where the covariance could not be inverted.
    pub solve_failures: usize,
}

struct RefChain {
    analyzer: Analyzer,
    buffer: MultiFrameBuffer,
}

/// Hop-by-hop enhancer.
pub struct Enhancer {
    cfg: PipelineConfig,
    fb: FilterbankConfig,
    selection: usize,
    mf_bins: usize,
    noisy_analyzer: Analyzer,
    noisy_buffer: MultiFrameBuffer,
    refs: Option<(RefChain, RefChain)>,
    estimator: Box<dyn Estimator>,
    gain_oracle: Option<GainOracle>,
    synthesizer: Synthesizer,
    out_frame: Vec<Complex64>,
    latency: LatencyReport,
    stats: EnhanceStats,
}

impl Enhancer {
    pub fn new(cfg: &PipelineConfig, weights: Option<WeightSequence>) -> Result<Self> {
        cfg.validate()?;
        let fb = cfg.filterbank_config()?;
        let selection = cfg.resolved_selection();
        let mf_cfg = MfBufferConfig::with_selection(cfg.order, cfg.lookahead, selection)?;
        let num_bins = fb.num_bins();
        let mf_bins = cfg.mf_bins(&fb);

        let estimator: Box<dyn Estimator> = match cfg.filter {
            FilterKind::DeepFilter => {
                let weights = weights.ok_or(Error::MissingReference("weight file"))?;
                if weights.order() != cfg.order {
                    return Err(Error::OrderMismatch {
                        expected: cfg.order,
                        got: weights.order(),
                    });
                }
                if weights.bins() < mf_bins {
                    return Err(Error::BinCountMismatch {
                        expected: mf_bins,
                        got: weights.bins(),
                    });
                }
                Box::new(PassthroughEstimator::new(weights, selection))
            }
            kind => {
                let oracle = OracleConfig {
                    order: cfg.order,
                    selection_index: selection,
                    smoothing: cfg.smoothing,
                    filter: kind,
                    cov_kind: cfg.cov_kind,
                };
                Box::new(OracleEstimator::new(oracle, mf_bins)?)
            }
        };
        let gain_oracle = match cfg.high_band {
            HighBandPolicy::Passthrough => None,
            HighBandPolicy::OracleGain => Some(GainOracle::new(cfg.smoothing, num_bins)?),
        };
        let refs = cfg.needs_references().then(|| {
            let chain = || RefChain {
                analyzer: Analyzer::new(&fb),
                buffer: MultiFrameBuffer::new(mf_cfg, num_bins),
            };
            (chain(), chain())
        });
        let latency = latency_report(&fb, selection)?;
        Ok(Self {
            cfg: cfg.clone(),
            selection,
            mf_bins,
            noisy_analyzer: Analyzer::new(&fb),
            noisy_buffer: MultiFrameBuffer::new(mf_cfg, num_bins),
            refs,
            estimator,
            gain_oracle,
            synthesizer: Synthesizer::new(&fb),
            out_frame: vec![Complex64::new(0.0, 0.0); num_bins],
            latency,
            stats: EnhanceStats::default(),
            fb,
        })
    }

    pub fn hop(&self) -> usize {
        self.fb.hop
    }

    pub fn latency(&self) -> LatencyReport {
        self.latency
    }

    pub fn stats(&self) -> EnhanceStats {
        self.stats
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Spectrum handed to the synthesis bank by the last `process_hop`.
    pub fn output_frame(&self) -> &[Complex64] {
        &self.out_frame
    }

    /// Number of low bins that are multi-frame filtered.
    pub fn mf_bins(&self) -> usize {
        self.mf_bins
    }

    /// Consumes one hop of input and returns one hop of output.
    pub fn process_hop(&mut self, noisy: &[f64], clean: Option<&[f64]>, noise: Option<&[f64]>) -> Result<&[f64]> {
        let frame = self.noisy_analyzer.push_hop(noisy)?;
        let time = self.noisy_buffer.push(frame)?;
        if let Some((clean_chain, noise_chain)) = self.refs.as_mut() {
            let clean = clean.ok_or(Error::MissingReference("clean"))?;
            let noise = noise.ok_or(Error::MissingReference("noise"))?;
            let f = clean_chain.analyzer.push_hop(clean)?;
            clean_chain.buffer.push(f)?;
            let f = noise_chain.analyzer.push_hop(noise)?;
            noise_chain.buffer.push(f)?;
        }
        self.stats.frames += 1;
        match time {
            None => self.out_frame.fill(Complex64::new(0.0, 0.0)),
            Some(t) => self.filter_frame(t)?,
        }
        self.synthesizer.push_frame(&self.out_frame)
    }

    fn filter_frame(&mut self, time: usize) -> Result<()> {
        let sel = self.selection;
        for bin in 0..self.out_frame.len() {
            let noisy = self.noisy_buffer.vector(bin)?;
            let refs = match &self.refs {
                Some((c, n)) => Some((c.buffer.vector(bin)?, n.buffer.vector(bin)?)),
                None => None,
            };
            let y = if bin < self.mf_bins {
                let input = BinInput {
                    noisy: &noisy,
                    clean: refs.as_ref().map(|r| &r.0),
                    noise: refs.as_ref().map(|r| &r.1),
                };
                let est = self.estimator.estimate(time, bin, &input)?;
                self.stats.filtered_bins += 1;
                match self.weights_for(&est) {
                    Ok(w) => apply_weights(&w, &noisy)?,
                    Err(e @ (Error::NotPositiveDefinite { .. } | Error::DegenerateDenominator(_))) => {
                        self.stats.solve_failures += 1;
                        if self.cfg.on_solve_failure == FailurePolicy::Abort {
                            return Err(e);
                        }
                        noisy[sel]
                    }
                    Err(e) => return Err(e),
                }
            } else if let (Some(oracle), Some((clean, noise))) = (self.gain_oracle.as_mut(), refs.as_ref()) {
                noisy[sel] * oracle.update(bin, clean[sel], noise[sel])
            } else {
                noisy[sel]
            };
            self.out_frame[bin] = y;
        }
        Ok(())
    }

    fn weights_for(&self, est: &EstimatorOutput) -> Result<FilterWeights> {
        let missing_cov = || Error::ConfigInvalid("estimator produced no covariance".into());
        match self.cfg.filter {
            FilterKind::DeepFilter => {
                let raw = est
                    .df_raw
                    .as_ref()
                    .ok_or_else(|| Error::ConfigInvalid("estimator produced no filter weights".into()))?;
                Ok(df_weights(raw))
            }
            FilterKind::Wiener => {
                let cov = resolve_cov(est.cov.as_ref().ok_or_else(missing_cov)?, self.cfg.diag_loading)?;
                wf_weights(&cov, &est.gamma, est.phi_s, self.cfg.wf_scaling)
            }
            FilterKind::MvdrNoisy | FilterKind::MvdrNoise => {
                let cov = resolve_cov(est.cov.as_ref().ok_or_else(missing_cov)?, self.cfg.diag_loading)?;
                mvdr_weights(&cov, &est.gamma)
            }
        }
    }
}

/// Result of a full-signal run.
#[derive(Debug, Clone)]
pub struct Enhanced {
    /// Same length as the input, delayed by `latency.total_samples()`.
    pub samples: Vec<f64>,
    pub latency: LatencyReport,
    pub stats: EnhanceStats,
    pub report: MetricReport,
}

fn validate_references(noisy: &[f64], clean: Option<&[f64]>, noise: Option<&[f64]>, required: bool) -> Result<()> {
    match (clean, noise) {
        (Some(c), Some(n)) => {
            for len in [c.len(), n.len()] {
                if len != noisy.len() {
                    return Err(Error::LengthMismatch {
                        left: noisy.len(),
                        right: len,
                    });
                }
            }
            for (index, ((x, s), z)) in noisy.iter().zip(c).zip(n).enumerate() {
                let diff = (x - (s + z)).abs();
                if !(diff <= REFERENCE_TOLERANCE) {
                    return Err(Error::RefMismatch { index, diff });
                }
            }
            Ok(())
        }
        (None, _) if required => Err(Error::MissingReference("clean")),
        (_, None) if required => Err(Error::MissingReference("noise")),
        (Some(c), None) if c.len() != noisy.len() => Err(Error::LengthMismatch {
            left: noisy.len(),
            right: c.len(),
        }),
        _ => Ok(()),
    }
}

fn run_once(
    noisy: &[f64],
    clean: Option<&[f64]>,
    noise: Option<&[f64]>,
    cfg: &PipelineConfig,
    weights: Option<&WeightSequence>,
) -> Result<(Vec<f64>, LatencyReport, EnhanceStats)> {
    let mut enhancer = Enhancer::new(cfg, weights.cloned())?;
    let refs_used = cfg.needs_references();
    let h = enhancer.hop();
    let padded = noisy.len().div_ceil(h) * h;
    let mut out = Vec::with_capacity(padded);
    let mut bufs = [vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    for start in (0..padded).step_by(h) {
        let end = (start + h).min(noisy.len());
        for (buf, src) in bufs.iter_mut().zip([Some(noisy), clean, noise]) {
            buf.fill(0.0);
            if let Some(src) = src {
                buf[..end - start].copy_from_slice(&src[start..end]);
            }
        }
        let [n, c, z] = &bufs;
        let hop = if refs_used {
            enhancer.process_hop(n, Some(c), Some(z))?
        } else {
            enhancer.process_hop(n, None, None)?
        };
        out.extend_from_slice(hop);
    }
    out.truncate(noisy.len());
    Ok((out, enhancer.latency(), enhancer.stats()))
}

/// Enhances a whole signal. With a clean reference, SI-SDR and segmental SNR
/// are computed after removing the output delay.
pub fn enhance_stream(
    noisy: &[f64],
    clean: Option<&[f64]>,
    noise: Option<&[f64]>,
    cfg: &PipelineConfig,
    weights: Option<&WeightSequence>,
) -> Result<Enhanced> {
    cfg.validate()?;
    validate_references(noisy, clean, noise, cfg.needs_references())?;
    if noisy.is_empty() {
        return Err(Error::SignalTooShort { len: 0, needed: 1 });
    }
    let start = Instant::now();
    let (samples, latency, stats) = run_once(noisy, clean, noise, cfg, weights)?;
    let seconds = noisy.len() as f64 / cfg.filterbank.sample_rate as f64;
    let single_rtf = start.elapsed().as_secs_f64() / seconds;
    let rtf = if cfg.rtf_runs > 0 {
        measure_rtf(seconds, cfg.rtf_runs, || run_once(noisy, clean, noise, cfg, weights))?
    } else {
        crate::metrics::RtfStats {
            median: single_rtf,
            min: single_rtf,
            max: single_rtf,
            runs: 1,
        }
    };

    let (si, seg) = match clean {
        Some(clean) => {
            let (reference, estimate) = aligned(clean, &samples, latency.total_samples());
            if reference.iter().any(|&x| x != 0.0) {
                (
                    Some(si_sdr(reference, estimate)?),
                    Some(seg_snr(reference, estimate, cfg.filterbank.sample_rate, DEFAULT_SEG_SNR_FRAME_MS)?),
                )
            } else {
                (None, None)
            }
        }
        None => (None, None),
    };
    let report = MetricReport {
        file: String::new(),
        filter: cfg.filter.name().to_string(),
        order: cfg.order,
        lookahead: cfg.lookahead,
        si_sdr_db: si,
        seg_snr_db: seg,
        rtf: rtf.median,
        latency_ms: latency.total_ms(),
        rtf_runs: rtf.runs,
        rtf_min: rtf.min,
        rtf_max: rtf.max,
    };
    Ok(Enhanced {
        samples,
        latency,
        stats,
        report,
    })
}

/// Pairs `reference[n]` with `delayed[n + delay]`.
pub fn aligned<'a>(reference: &'a [f64], delayed: &'a [f64], delay: usize) -> (&'a [f64], &'a [f64]) {
    let n = reference.len().min(delayed.len()).saturating_sub(delay);
    (&reference[..n], &delayed[delay..delay + n])
}
