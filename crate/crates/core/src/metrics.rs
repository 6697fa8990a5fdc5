//! Objective quality and speed measures.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bound on reported SI-SDR magnitudes (zero residual or zero target).
pub const SI_SDR_CAP_DB: f64 = 100.0;

pub const SEG_SNR_MIN_DB: f64 = -10.0;
pub const SEG_SNR_MAX_DB: f64 = 35.0;

fn check_pair(reference: &[f64], estimate: &[f64]) -> Result<()> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: estimate.len(),
        });
    }
    if reference.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroReference);
    }
    Ok(())
}

/// Scale-invariant signal-to-distortion ratio in dB, bounded to ±100 dB.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_pair(reference, estimate)?;
    let ref_energy: f64 = reference.iter().map(|x| x * x).sum();
    let alpha = reference.iter().zip(estimate).map(|(s, e)| s * e).sum::<f64>() / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let residual: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(s, e)| {
            let r = alpha * s - e;
            r * r
        })
        .sum();
    if target_energy == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target_energy / residual).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// Mean per-frame SNR of `estimate` against `reference`, each frame clamped
/// to [-10, 35] dB. A trailing partial frame is included.
pub fn seg_snr(reference: &[f64], estimate: &[f64], sample_rate: u32, frame_ms: f64) -> Result<f64> {
    check_pair(reference, estimate)?;
    let frame_len = ((sample_rate as f64 * frame_ms / 1000.0).round() as usize).max(1);
    let mut total = 0.0;
    let mut frames = 0usize;
    for (s, e) in reference.chunks(frame_len).zip(estimate.chunks(frame_len)) {
        let signal: f64 = s.iter().map(|x| x * x).sum();
        let noise: f64 = s.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum();
        let snr = if noise == 0.0 {
            if signal == 0.0 {
                0.0
            } else {
                SEG_SNR_MAX_DB
            }
        } else if signal == 0.0 {
            SEG_SNR_MIN_DB
        } else {
            10.0 * (signal / noise).log10()
        };
        total += snr.clamp(SEG_SNR_MIN_DB, SEG_SNR_MAX_DB);
        frames += 1;
    }
    Ok(total / frames as f64)
}

/// Real-time factor statistics over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtfStats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Times `run` (one warm-up, then `runs` timed calls) and reports processing
/// time over `audio_seconds`.
pub fn measure_rtf<T>(audio_seconds: f64, runs: usize, mut run: impl FnMut() -> Result<T>) -> Result<RtfStats> {
    if !(audio_seconds > 0.0) {
        return Err(Error::ConfigInvalid("audio duration must be positive".into()));
    }
    let runs = runs.max(1);
    std::hint::black_box(run()?);
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        std::hint::black_box(run()?);
        samples.push(start.elapsed().as_secs_f64() / audio_seconds);
    }
    samples.sort_by(f64::total_cmp);
    let median = if runs % 2 == 1 {
        samples[runs / 2]
    } else {
        0.5 * (samples[runs / 2 - 1] + samples[runs / 2])
    };
    Ok(RtfStats {
        median,
        min: samples[0],
        max: samples[runs - 1],
        runs,
    })
}

/// One line of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub file: String,
    pub filter: String,
    #[serde(rename = "N")]
    pub order: usize,
    pub lookahead: usize,
    pub si_sdr_db: Option<f64>,
    pub seg_snr_db: Option<f64>,
    pub rtf: f64,
    pub latency_ms: f64,
    pub rtf_runs: usize,
    pub rtf_min: f64,
    pub rtf_max: f64,
}

impl MetricReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
