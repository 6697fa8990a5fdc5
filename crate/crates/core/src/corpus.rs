//! Deterministic synthetic test corpus: voiced harmonic "speech" mixed with
//! white or babble-like noise at fixed SNRs.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    White,
    Babble,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Babble => "babble",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub clips: usize,
    pub seconds: f64,
    pub snrs_db: Vec<f64>,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            clips: 10,
            seconds: 5.0,
            snrs_db: vec![-5.0, 0.0, 5.0],
            sample_rate: crate::filterbank::DEFAULT_SAMPLE_RATE,
            seed: 20_230_604,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clip {
    pub name: String,
    pub noise_kind: NoiseKind,
    pub snr_db: f64,
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    pub noisy: Vec<f64>,
}

/// Voiced source with a gliding f0, 1/k harmonic tilt and a syllabic
/// envelope with pauses. Harmonics stop at 7 kHz.
pub fn harmonic_source(len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let fs = sample_rate as f64;
    let f0_base = rng.random_range(95.0..230.0);
    let glide_rate = rng.random_range(0.3..1.2);
    let glide_phase = rng.random_range(0.0..2.0 * PI);
    let syllable_rate = rng.random_range(2.5..5.0);
    let syllable_phase = rng.random_range(0.0..2.0 * PI);
    let harmonic_phases: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        let t = n as f64 / fs;
        let f0 = f0_base * (1.0 + 0.15 * (2.0 * PI * glide_rate * t + glide_phase).sin());
        phase += 2.0 * PI * f0 / fs;
        let env = (2.0 * PI * syllable_rate * t + syllable_phase).sin().max(0.0).sqrt();
        let mut x = 0.0;
        for (k, ph) in harmonic_phases.iter().enumerate() {
            let k = (k + 1) as f64;
            if k * f0 >= 7000.0 {
                break;
            }
            x += (k * phase + ph).sin() / k;
        }
        out.push(env * x);
    }
    out
}

pub fn white_noise(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Sum of six independent harmonic talkers.
pub fn babble_noise(len: usize, sample_rate: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for _ in 0..6 {
        for (o, x) in out.iter_mut().zip(harmonic_source(len, sample_rate, rng)) {
            *o += x;
        }
    }
    out
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Scales `noise` in place so that `clean` over `noise` has the given SNR.
pub fn scale_to_snr(clean: &[f64], noise: &mut [f64], snr_db: f64) -> Result<()> {
    let (es, en) = (energy(clean), energy(noise));
    if es == 0.0 || en == 0.0 {
        return Err(Error::ConfigInvalid("cannot set SNR of a silent signal".into()));
    }
    let gain = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    noise.iter_mut().for_each(|v| *v *= gain);
    Ok(())
}

/// Generates `clips × snrs` mixtures. Even clips get white noise, odd clips
/// babble. The clean signal peaks at 0.5.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<Clip>> {
    let len = (spec.seconds * spec.sample_rate as f64).round() as usize;
    if len == 0 {
        return Err(Error::ConfigInvalid("corpus clips must be non-empty".into()));
    }
    let mut out = Vec::with_capacity(spec.clips * spec.snrs_db.len());
    for c in 0..spec.clips {
        let mut rng = StdRng::seed_from_u64(spec.seed.wrapping_add(c as u64));
        let mut clean = harmonic_source(len, spec.sample_rate, &mut rng);
        let peak = clean.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        clean.iter_mut().for_each(|x| *x *= 0.5 / peak);
        let kind = if c % 2 == 0 { NoiseKind::White } else { NoiseKind::Babble };
        let base_noise = match kind {
            NoiseKind::White => white_noise(len, &mut rng),
            NoiseKind::Babble => babble_noise(len, spec.sample_rate, &mut rng),
        };
        for &snr in &spec.snrs_db {
            let mut noise = base_noise.clone();
            scale_to_snr(&clean, &mut noise, snr)?;
            let noisy = clean.iter().zip(&noise).map(|(s, z)| s + z).collect();
            out.push(Clip {
                name: format!("clip{c:02}_{}_{snr:+}dB", kind.name()),
                noise_kind: kind,
                snr_db: snr,
                clean: clean.clone(),
                noise,
                noisy,
            });
        }
    }
    Ok(out)
}
