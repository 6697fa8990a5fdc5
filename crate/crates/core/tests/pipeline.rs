mod common;

use mframe::corpus::{generate, harmonic_source, white_noise, CorpusSpec};
use mframe::estimators::{OracleConfig, OracleEstimator};
use mframe::filterbank::{streaming_round_trip, xcorr_peak_lag, Analyzer, FilterbankConfig};
use mframe::filters::{CovKind, FilterKind};
use mframe::linalg::{accumulate_outer, HermitianCov};
use mframe::metrics::si_sdr;
use mframe::mfmodel::{MfBufferConfig, MultiFrameBuffer};
use mframe::pipeline::{aligned, enhance_stream, Enhancer, HighBandPolicy, PipelineConfig};
use mframe::weights::WeightSequence;
use mframe::Error;

const FS: u32 = 24_000;

/// Sum of a few steady harmonics, the "tone complex" test speech.
fn tone_complex(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let t = n as f64 / FS as f64;
            [(180.0, 0.3), (360.0, 0.2), (540.0, 0.1), (900.0, 0.05), (1530.0, 0.03)]
                .iter()
                .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum()
        })
        .collect()
}

fn mixture(seconds: f64, noise_gain: f64, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let len = (seconds * FS as f64) as usize;
    let mut rng = common::rng(seed);
    let clean: Vec<f64> = harmonic_source(len, FS, &mut rng).iter().map(|x| 0.1 * x).collect();
    let noise: Vec<f64> = white_noise(len, &mut rng).iter().map(|x| noise_gain * x).collect();
    let noisy = clean.iter().zip(&noise).map(|(s, z)| s + z).collect();
    (noisy, clean, noise)
}

#[test]
fn identity_weights_reproduce_delayed_input() {
    let (noisy, _, _) = mixture(1.0, 0.05, 1);
    let cfg = PipelineConfig {
        filter: FilterKind::DeepFilter,
        f_mf: 12_000.0,
        ..Default::default()
    };
    let frames = noisy.len() / cfg.filterbank.hop;
    let weights = WeightSequence::identity(5, 49, frames, 2).unwrap();
    let out = enhance_stream(&noisy, None, None, &cfg, Some(&weights)).unwrap();
    assert_eq!(out.samples.len(), noisy.len());
    let delay = out.latency.total_samples();
    assert_eq!(delay, 72 + 48);
    assert_eq!(out.latency.total_ms(), 5.0);
    assert_eq!(xcorr_peak_lag(&noisy, &out.samples, 400), delay);
    let (reference, estimate) = aligned(&noisy, &out.samples, delay);
    let worst = reference[96..].iter().zip(&estimate[96..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
    assert!(out.report.si_sdr_db.is_none());
}

#[test]
fn identity_chain_latency_tracks_lookahead() {
    let (noisy, _, _) = mixture(0.5, 0.05, 2);
    for (order, lookahead) in [(1, 0), (3, 1), (5, 2), (8, 5)] {
        let cfg = PipelineConfig {
            filter: FilterKind::DeepFilter,
            order,
            lookahead,
            f_mf: 12_000.0,
            ..Default::default()
        };
        let weights = WeightSequence::identity(order, 49, noisy.len() / 24, lookahead).unwrap();
        let out = enhance_stream(&noisy, None, None, &cfg, Some(&weights)).unwrap();
        assert_eq!(xcorr_peak_lag(&noisy, &out.samples, 400), out.latency.total_samples());
        assert_eq!(out.latency.total_samples(), 72 + 24 * lookahead);
    }
}

#[test]
fn mvdr_on_clean_input_is_distortionless() {
    let clean = tone_complex(2 * FS as usize);
    let noise = vec![0.0; clean.len()];
    let cfg = PipelineConfig::default();
    let out = enhance_stream(&clean, Some(&clean), Some(&noise), &cfg, None).unwrap();
    let si = out.report.si_sdr_db.unwrap();
    assert!(si >= 40.0, "{si}");
}

#[test]
fn white_noise_at_zero_db_improves_by_five_db() {
    let spec = CorpusSpec {
        clips: 1,
        snrs_db: vec![0.0],
        ..Default::default()
    };
    let clip = &generate(&spec).unwrap()[0];
    assert_eq!(clip.noise_kind, mframe::corpus::NoiseKind::White);
    let cfg = PipelineConfig {
        high_band: HighBandPolicy::OracleGain,
        ..Default::default()
    };
    let out = enhance_stream(&clip.noisy, Some(&clip.clean), Some(&clip.noise), &cfg, None).unwrap();
    let gain = out.report.si_sdr_db.unwrap() - si_sdr(&clip.clean, &clip.noisy).unwrap();
    assert!(gain > 5.0, "{gain}");
}

#[test]
fn high_bins_pass_through_untouched() {
    let (noisy, clean, noise) = mixture(0.3, 0.05, 3);
    let cfg = PipelineConfig::default();
    let fb = cfg.filterbank_config().unwrap();
    let mut enhancer = Enhancer::new(&cfg, None).unwrap();
    let mut analyzer = Analyzer::new(&fb);
    let mut history: Vec<Vec<num_complex::Complex64>> = Vec::new();
    let sel = cfg.resolved_selection();
    for ((x, s), z) in noisy.chunks(24).zip(clean.chunks(24)).zip(noise.chunks(24)) {
        history.push(analyzer.push_hop(x).unwrap().to_vec());
        enhancer.process_hop(x, Some(s), Some(z)).unwrap();
        let p = history.len() - 1;
        if p < cfg.lookahead {
            continue;
        }
        let frame = enhancer.output_frame();
        let reference = &history[p - sel];
        for bin in enhancer.mf_bins()..fb.num_bins() {
            assert_eq!(frame[bin], reference[bin]);
        }
    }
    assert_eq!(enhancer.mf_bins(), 16);
}

#[test]
fn high_band_energy_matches_passthrough_prediction() {
    // Same chain with and without MF filtering; the difference must live below f_mf.
    let (noisy, clean, noise) = mixture(1.0, 0.05, 4);
    let cfg = PipelineConfig::default();
    let mvdr = enhance_stream(&noisy, Some(&clean), Some(&noise), &cfg, None).unwrap();
    let delay = mvdr.latency.total_samples();
    let fb = FilterbankConfig::default();
    let diff: Vec<f64> = mvdr
        .samples
        .iter()
        .enumerate()
        .map(|(n, y)| y - if n >= delay { noisy[n - delay] } else { 0.0 })
        .collect();
    let spec = mframe::filterbank::analyze(&diff, &fb).unwrap();
    let input = mframe::filterbank::analyze(&noisy, &fb).unwrap();
    let band = |s: &mframe::ComplexSpectrogram, lo: usize| -> f64 {
        s.frames.iter().map(|f| f[lo..].iter().map(|c| c.norm_sqr()).sum::<f64>()).sum()
    };
    // Hann leakage reaches two bins past the edge.
    let ratio = band(&spec, 18) / band(&input, 18);
    assert!(ratio < 1e-4, "{ratio}");
    assert!(band(&spec, 0) > 1e-3 * band(&input, 0));
}

#[test]
fn enhancement_is_deterministic() {
    let (noisy, clean, noise) = mixture(0.5, 0.05, 5);
    let cfg = PipelineConfig {
        filter: FilterKind::Wiener,
        high_band: HighBandPolicy::OracleGain,
        ..Default::default()
    };
    let a = enhance_stream(&noisy, Some(&clean), Some(&noise), &cfg, None).unwrap();
    let b = enhance_stream(&noisy, Some(&clean), Some(&noise), &cfg, None).unwrap();
    assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn rtf_scales_linearly() {
    let cfg = PipelineConfig {
        rtf_runs: 5,
        ..Default::default()
    };
    let (n5, c5, z5) = mixture(5.0, 0.05, 6);
    let (n10, c10, z10) = mixture(10.0, 0.05, 6);
    let short = enhance_stream(&n5, Some(&c5), Some(&z5), &cfg, None).unwrap().report;
    let long = enhance_stream(&n10, Some(&c10), Some(&z10), &cfg, None).unwrap().report;
    let ratio = long.rtf / short.rtf;
    assert!((0.8..=1.2).contains(&ratio), "{} vs {}", short.rtf, long.rtf);
}

#[test]
fn reference_errors() {
    let (noisy, clean, noise) = mixture(0.1, 0.05, 7);
    let cfg = PipelineConfig::default();
    assert!(matches!(
        enhance_stream(&noisy, None, Some(&noise), &cfg, None),
        Err(Error::MissingReference("clean"))
    ));
    let mut off = noise.clone();
    off[100] += 1e-3;
    assert!(matches!(
        enhance_stream(&noisy, Some(&clean), Some(&off), &cfg, None),
        Err(Error::RefMismatch { index: 100, .. })
    ));
    let short = &clean[..clean.len() - 1];
    assert!(matches!(
        enhance_stream(&noisy, Some(short), Some(&noise), &cfg, None),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn singular_direct_covariance_falls_back_or_aborts() {
    let (noisy, clean, noise) = mixture(0.2, 0.05, 8);
    let cfg = PipelineConfig {
        cov_kind: CovKind::Direct,
        diag_loading: 0.0,
        ..Default::default()
    };
    let out = enhance_stream(&noisy, Some(&clean), Some(&noise), &cfg, None).unwrap();
    assert!(out.stats.solve_failures > 0);
    let strict = PipelineConfig {
        on_solve_failure: mframe::pipeline::FailurePolicy::Abort,
        ..cfg
    };
    assert!(matches!(
        enhance_stream(&noisy, Some(&clean), Some(&noise), &strict, None),
        Err(Error::NotPositiveDefinite { .. })
    ));
}

#[test]
fn mixture_covariance_converges_to_sum() {
    // Independent stationary streams: recursive Φ_xx of the mixture ≈ Φ_ss + Φ_zz.
    let fb = FilterbankConfig::default();
    let len = 3 * FS as usize;
    let mut rng = common::rng(9);
    let clean: Vec<f64> = tone_complex(len).iter().zip(white_noise(len, &mut rng)).map(|(s, n)| s + 0.02 * n).collect();
    let noise: Vec<f64> = white_noise(len, &mut rng).iter().map(|x| 0.05 * x).collect();
    let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(s, z)| s + z).collect();

    let order = 3;
    let mf = MfBufferConfig::new(order, 0).unwrap();
    let bins = fb.num_bins();
    let mut cfg = OracleConfig::new(order, FilterKind::Wiener, CovKind::Direct);
    // Long memory so the estimates settle.
    cfg.smoothing = 0.999;
    let mut oracle = OracleEstimator::new(cfg, bins).unwrap();
    let mut mixture_cov = vec![HermitianCov::zeros(order).unwrap(); bins];
    let mut chains: Vec<(Analyzer, MultiFrameBuffer)> =
        (0..3).map(|_| (Analyzer::new(&fb), MultiFrameBuffer::new(mf, bins))).collect();
    for ((x, s), z) in noisy.chunks(24).zip(clean.chunks(24)).zip(noise.chunks(24)) {
        for ((a, b), sig) in chains.iter_mut().zip([x, s, z]) {
            let f = a.push_hop(sig).unwrap().to_vec();
            b.push(&f).unwrap();
        }
        for bin in 0..bins {
            let xv = chains[0].1.vector(bin).unwrap();
            mixture_cov[bin] = accumulate_outer(&mixture_cov[bin], &xv, 0.999, 0.001).unwrap();
            oracle
                .oracle_update(bin, &chains[1].1.vector(bin).unwrap(), &chains[2].1.vector(bin).unwrap())
                .unwrap();
        }
    }
    for bin in [1, 4, 10, 30] {
        let sum = oracle.phi_xx(bin);
        let rel = sum.add(&mixture_cov[bin].scale(-1.0)).unwrap().frobenius_norm() / sum.frobenius_norm();
        assert!(rel < 0.1, "bin {bin}: {rel}");
    }
}

#[test]
fn streaming_round_trip_is_exact_after_delay() {
    let mut rng = common::rng(10);
    let x = white_noise(4800, &mut rng);
    let y = streaming_round_trip(&x, &FilterbankConfig::default()).unwrap();
    let (a, b) = aligned(&x, &y, 72);
    assert!(a[96..].iter().zip(&b[96..]).all(|(p, q)| (p - q).abs() < 1e-12));
}
