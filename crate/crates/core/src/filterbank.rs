//! Uniform windowed-DFT analysis/synthesis filter bank.
//!
//! The default configuration mirrors a hearing-aid filter bank: 24 kHz,
//! 96-sample (4 ms) window, 24-sample (1 ms) hop, 48 bands of 250 Hz plus the
//! DC bin. Analysis and synthesis windows are square-root periodic Hann, whose
//! product satisfies the constant-overlap-add condition at 75 % overlap.
//!
//! Two flavours are provided. [`analyze`]/[`synthesize`] are offline and
//! zero-delay on the interior of the signal. [`Analyzer`]/[`Synthesizer`]
//! process one hop at a time and introduce `window_len - hop` samples of
//! delay, which is what [`latency_report`] measures.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;
pub const DEFAULT_WINDOW_LEN: usize = 96;
pub const DEFAULT_HOP: usize = 24;

const COLA_TOLERANCE: f64 = 1e-10;

/// Periodic square-root Hann window.
pub fn sqrt_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos())).sqrt())
        .collect()
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankConfig {
    pub sample_rate: u32,
    pub window_len: usize,
    pub hop: usize,
    pub analysis_window: Vec<f64>,
    pub synthesis_window: Vec<f64>,
    /// Overlap-add sum of `analysis · synthesis`, normalized out on synthesis.
    ola_gain: f64,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_LEN, DEFAULT_HOP)
            .expect("default filter bank is valid")
    }
}

impl FilterbankConfig {
    /// Square-root Hann bank with the given geometry.
    pub fn new(sample_rate: u32, window_len: usize, hop: usize) -> Result<Self> {
        let w = sqrt_hann(window_len);
        Self::with_windows(sample_rate, hop, w.clone(), w)
    }

    /// Rectangular analysis, Hann synthesis. Constant input then lands in the
    /// DC bin only, at the cost of poorer band separation.
    pub fn rectangular_analysis(sample_rate: u32, window_len: usize, hop: usize) -> Result<Self> {
        Self::with_windows(sample_rate, hop, vec![1.0; window_len], hann(window_len))
    }

    pub fn with_windows(
        sample_rate: u32,
        hop: usize,
        analysis_window: Vec<f64>,
        synthesis_window: Vec<f64>,
    ) -> Result<Self> {
        let window_len = analysis_window.len();
        if sample_rate == 0 {
            return Err(Error::ConfigInvalid("sample rate must be positive".into()));
        }
        if window_len < 2 || !window_len.is_multiple_of(2) {
            return Err(Error::ConfigInvalid(format!(
                "window length {window_len} must be even and >= 2"
            )));
        }
        if synthesis_window.len() != window_len {
            return Err(Error::ConfigInvalid("analysis and synthesis windows differ in length".into()));
        }
        if hop == 0 || !window_len.is_multiple_of(hop) {
            return Err(Error::ConfigInvalid(format!(
                "hop {hop} must divide window length {window_len}"
            )));
        }
        let sums: Vec<f64> = (0..hop)
            .map(|n| {
                (n..window_len)
                    .step_by(hop)
                    .map(|k| analysis_window[k] * synthesis_window[k])
                    .sum()
            })
            .collect();
        let ola_gain = sums[0];
        if !(ola_gain > 0.0) || sums.iter().any(|s| (s - ola_gain).abs() > COLA_TOLERANCE) {
            return Err(Error::ConfigInvalid(
                "windows violate the constant-overlap-add condition".into(),
            ));
        }
        Ok(Self {
            sample_rate,
            window_len,
            hop,
            analysis_window,
            synthesis_window,
            ola_gain,
        })
    }

    /// Positive-frequency bands; the spectrum carries one more bin for DC.
    pub fn num_bands(&self) -> usize {
        self.window_len / 2
    }

    pub fn num_bins(&self) -> usize {
        self.num_bands() + 1
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate as f64 / self.window_len as f64
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    pub fn ola_gain(&self) -> f64 {
        self.ola_gain
    }

    /// Delay of the streaming analysis/synthesis pair in samples.
    pub fn streaming_delay(&self) -> usize {
        self.window_len - self.hop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    /// One-sided spectra, bins `0..=num_bands`.
    pub frames: Vec<Vec<Complex64>>,
    pub num_bins: usize,
    pub frame_rate: f64,
    pub bin_width: f64,
}

impl ComplexSpectrogram {
    pub fn zeros(num_frames: usize, config: &FilterbankConfig) -> Self {
        Self {
            frames: vec![vec![Complex64::new(0.0, 0.0); config.num_bins()]; num_frames],
            num_bins: config.num_bins(),
            frame_rate: config.frame_rate(),
            bin_width: config.bin_width(),
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Per-frame forward transform shared by the offline and streaming paths.
struct FrameTransform {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FrameTransform {
    fn new(window_len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(window_len);
        let ifft = planner.plan_fft_inverse(window_len);
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Self {
            fft,
            ifft,
            buf: vec![Complex64::new(0.0, 0.0); window_len],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    fn forward(&mut self, window: &[f64], samples: impl Iterator<Item = f64>, out: &mut [Complex64]) {
        for ((b, &w), x) in self.buf.iter_mut().zip(window).zip(samples) {
            *b = Complex64::new(w * x, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        out.copy_from_slice(&self.buf[..out.len()]);
    }

    /// Inverse of a one-sided spectrum, windowed and normalized; result is
    /// left in `self.buf[..].re`.
    fn inverse(&mut self, spectrum: &[Complex64], window: &[f64], gain: f64) {
        let len = self.buf.len();
        let half = len / 2;
        self.buf[0] = Complex64::new(spectrum[0].re, 0.0);
        self.buf[half] = Complex64::new(spectrum[half].re, 0.0);
        for k in 1..half {
            self.buf[k] = spectrum[k];
            self.buf[len - k] = spectrum[k].conj();
        }
        self.ifft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (len as f64 * gain);
        for (b, &w) in self.buf.iter_mut().zip(window) {
            b.re *= w * scale;
        }
    }
}

/// Offline analysis: frame `t` covers samples `[t·hop, t·hop + window_len)`.
pub fn analyze(signal: &[f64], config: &FilterbankConfig) -> Result<ComplexSpectrogram> {
    let len = config.window_len;
    if signal.len() < len {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            needed: len,
        });
    }
    let num_frames = 1 + (signal.len() - len) / config.hop;
    let mut spec = ComplexSpectrogram::zeros(num_frames, config);
    let mut transform = FrameTransform::new(len);
    for (t, frame) in spec.frames.iter_mut().enumerate() {
        let start = t * config.hop;
        transform.forward(
            &config.analysis_window,
            signal[start..start + len].iter().copied(),
            frame,
        );
    }
    Ok(spec)
}

fn check_compatible(spec: &ComplexSpectrogram, config: &FilterbankConfig) -> Result<()> {
    if spec.num_bins != config.num_bins() {
        return Err(Error::ConfigMismatch(format!(
            "spectrogram has {} bins, config expects {}",
            spec.num_bins,
            config.num_bins()
        )));
    }
    if (spec.bin_width - config.bin_width()).abs() > 1e-9
        || (spec.frame_rate - config.frame_rate()).abs() > 1e-9
    {
        return Err(Error::ConfigMismatch(format!(
            "spectrogram grid {} Hz x {} fps does not match config {} Hz x {} fps",
            spec.bin_width,
            spec.frame_rate,
            config.bin_width(),
            config.frame_rate()
        )));
    }
    if let Some((t, f)) = spec
        .frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.len() != config.num_bins())
    {
        return Err(Error::ConfigMismatch(format!(
            "frame {t} has {} bins, expected {}",
            f.len(),
            config.num_bins()
        )));
    }
    Ok(())
}

/// Offline overlap-add synthesis. Output length is
/// `(frames - 1)·hop + window_len`, aligned sample-for-sample with the
/// signal that produced the spectrogram.
pub fn synthesize(spec: &ComplexSpectrogram, config: &FilterbankConfig) -> Result<Vec<f64>> {
    check_compatible(spec, config)?;
    if spec.frames.is_empty() {
        return Ok(Vec::new());
    }
    let len = config.window_len;
    let mut out = vec![0.0; (spec.frames.len() - 1) * config.hop + len];
    let mut transform = FrameTransform::new(len);
    for (t, frame) in spec.frames.iter().enumerate() {
        transform.inverse(frame, &config.synthesis_window, config.ola_gain);
        let start = t * config.hop;
        for (o, b) in out[start..start + len].iter_mut().zip(&transform.buf) {
            *o += b.re;
        }
    }
    Ok(out)
}

/// Streaming analysis: push one hop of samples, get one spectrum frame.
/// History starts as silence.
pub struct Analyzer {
    config: FilterbankConfig,
    history: Vec<f64>,
    transform: FrameTransform,
    frame: Vec<Complex64>,
}

impl Analyzer {
    pub fn new(config: &FilterbankConfig) -> Self {
        Self {
            config: config.clone(),
            history: vec![0.0; config.window_len],
            transform: FrameTransform::new(config.window_len),
            frame: vec![Complex64::new(0.0, 0.0); config.num_bins()],
        }
    }

    pub fn push_hop(&mut self, hop: &[f64]) -> Result<&[Complex64]> {
        let h = self.config.hop;
        if hop.len() != h {
            return Err(Error::LengthMismatch {
                left: hop.len(),
                right: h,
            });
        }
        self.history.copy_within(h.., 0);
        let n = self.history.len();
        self.history[n - h..].copy_from_slice(hop);
        self.transform.forward(
            &self.config.analysis_window,
            self.history.iter().copied(),
            &mut self.frame,
        );
        Ok(&self.frame)
    }
}

/// Streaming synthesis: push one spectrum frame, get one hop of samples.
pub struct Synthesizer {
    config: FilterbankConfig,
    accum: Vec<f64>,
    transform: FrameTransform,
    out: Vec<f64>,
}

impl Synthesizer {
    pub fn new(config: &FilterbankConfig) -> Self {
        Self {
            config: config.clone(),
            accum: vec![0.0; config.window_len],
            transform: FrameTransform::new(config.window_len),
            out: vec![0.0; config.hop],
        }
    }

    pub fn push_frame(&mut self, frame: &[Complex64]) -> Result<&[f64]> {
        if frame.len() != self.config.num_bins() {
            return Err(Error::BinCountMismatch {
                expected: self.config.num_bins(),
                got: frame.len(),
            });
        }
        let h = self.config.hop;
        self.transform
            .inverse(frame, &self.config.synthesis_window, self.config.ola_gain);
        for (a, b) in self.accum.iter_mut().zip(&self.transform.buf) {
            *a += b.re;
        }
        self.out.copy_from_slice(&self.accum[..h]);
        self.accum.copy_within(h.., 0);
        let n = self.accum.len();
        self.accum[n - h..].fill(0.0);
        Ok(&self.out)
    }
}

/// Lag (in samples, `0..=max_lag`) maximizing the cross-correlation
/// `Σ input[n] · output[n + lag]`.
pub fn xcorr_peak_lag(input: &[f64], output: &[f64], max_lag: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for lag in 0..=max_lag.min(output.len().saturating_sub(1)) {
        let r: f64 = input
            .iter()
            .zip(&output[lag..])
            .map(|(a, b)| a * b)
            .sum();
        if r > best.1 {
            best = (lag, r);
        }
    }
    best.0
}

/// Runs `signal` through a streaming analyzer/synthesizer pair with an
/// identity in between. The signal is zero-padded to a whole number of hops.
pub fn streaming_round_trip(signal: &[f64], config: &FilterbankConfig) -> Result<Vec<f64>> {
    let h = config.hop;
    let mut analyzer = Analyzer::new(config);
    let mut synthesizer = Synthesizer::new(config);
    let padded_len = signal.len().div_ceil(h) * h;
    let mut out = Vec::with_capacity(padded_len);
    let mut hop = vec![0.0; h];
    for start in (0..padded_len).step_by(h) {
        hop.fill(0.0);
        let end = (start + h).min(signal.len());
        hop[..end - start].copy_from_slice(&signal[start..end]);
        let frame = analyzer.push_hop(&hop)?;
        out.extend_from_slice(synthesizer.push_frame(frame)?);
    }
    out.truncate(signal.len());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Measured analysis/synthesis delay.
    pub filterbank_delay_samples: usize,
    pub lookahead_frames: usize,
    pub sample_rate: u32,
    pub hop: usize,
}

impl LatencyReport {
    pub fn lookahead_samples(&self) -> usize {
        self.lookahead_frames * self.hop
    }

    pub fn total_samples(&self) -> usize {
        self.filterbank_delay_samples + self.lookahead_samples()
    }

    pub fn filterbank_ms(&self) -> f64 {
        1000.0 * self.filterbank_delay_samples as f64 / self.sample_rate as f64
    }

    pub fn lookahead_ms(&self) -> f64 {
        1000.0 * self.lookahead_samples() as f64 / self.sample_rate as f64
    }

    pub fn total_ms(&self) -> f64 {
        1000.0 * self.total_samples() as f64 / self.sample_rate as f64
    }
}

/// Measures the streaming round-trip delay with an impulse probe and adds
/// `lookahead_frames` hops.
pub fn latency_report(config: &FilterbankConfig, lookahead_frames: usize) -> Result<LatencyReport> {
    let probe_at = 2 * config.window_len + 7;
    let mut probe = vec![0.0; probe_at + 4 * config.window_len];
    probe[probe_at] = 1.0;
    let out = streaming_round_trip(&probe, config)?;
    let lag = xcorr_peak_lag(&probe, &out, 2 * config.window_len);
    Ok(LatencyReport {
        filterbank_delay_samples: lag,
        lookahead_frames,
        sample_rate: config.sample_rate,
        hop: config.hop,
    })
}
