use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mframe::corpus::{generate, CorpusSpec};
use mframe::wav::{read_wav, write_wav, WavEncoding};
use mframe::WeightSequence;

fn mframe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mframe")).args(args).output().expect("binary runs")
}

/// Writes noisy/clean/noise WAVs for one short synthetic clip into `dir`.
fn write_clip(dir: &Path, prefix: &str, seed: u64) -> [String; 3] {
    let spec = CorpusSpec {
        clips: 1,
        seconds: 0.5,
        snrs_db: vec![0.0],
        seed,
        ..Default::default()
    };
    let clip = &generate(&spec).unwrap()[0];
    let mut paths = Vec::new();
    for (name, data) in [("noisy", &clip.noisy), ("clean", &clip.clean), ("noise", &clip.noise)] {
        let p = dir.join(format!("{prefix}_{name}.wav"));
        // Float32 keeps noisy = clean + noise within the 1e-6 reference tolerance.
        write_wav(&p, data, 24_000, WavEncoding::Float32).unwrap();
        paths.push(p.display().to_string());
    }
    paths.try_into().unwrap()
}

#[test]
fn enhance_writes_wav_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let [noisy, clean, noise] = write_clip(dir.path(), "a", 1);
    let out = dir.path().join("y.wav");
    let res = mframe(&[
        "enhance", "--in", &noisy, "--clean", &clean, "--noise", &noise, "--filter", "mvdr", "--order", "5",
        "--lookahead", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let line = String::from_utf8(res.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(report["filter"], "mvdr");
    assert_eq!(report["N"], 5);
    assert_eq!(report["lookahead"], 2);
    assert_eq!(report["latency_ms"], 5.0);
    assert!(report["si_sdr_db"].is_f64());
    assert!(report["seg_snr_db"].is_f64());
    assert!(report["rtf"].as_f64().unwrap() > 0.0);
    assert_eq!(read_wav(&out, 24_000).unwrap().len(), read_wav(&noisy, 24_000).unwrap().len());
}

#[test]
fn enhance_output_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let [noisy, clean, noise] = write_clip(dir.path(), "a", 2);
    let mut outputs = Vec::new();
    for name in ["y1.wav", "y2.wav"] {
        let out = dir.path().join(name);
        let res = mframe(&[
            "enhance", "--in", &noisy, "--clean", &clean, "--noise", &noise, "--filter", "wf", "--high-band",
            "oracle-gain", "--out", out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn enhance_with_config_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let [noisy, _, _] = write_clip(dir.path(), "a", 3);
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "filter = \"df\"\norder = 3\nlookahead = 1\nf_mf = 12000.0\n").unwrap();
    let weights = dir.path().join("w.mfw");
    WeightSequence::identity(3, 49, 500, 1).unwrap().save(&weights).unwrap();
    let out = dir.path().join("y.wav");
    let res = mframe(&[
        "enhance", "--in", &noisy, "--config", cfg.to_str().unwrap(), "--weights", weights.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["filter"], "df");
    assert_eq!(report["N"], 3);
    assert!(report["si_sdr_db"].is_null());
    let x = read_wav(&noisy, 24_000).unwrap();
    let y = read_wav(&out, 24_000).unwrap();
    let delay = 72 + 24;
    // Float32 storage bounds the error.
    assert!(x[96..x.len() - delay].iter().zip(&y[96 + delay..]).all(|(a, b)| (a - b).abs() < 1e-6));
}

#[test]
fn enhance_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let [noisy, clean, _] = write_clip(dir.path(), "a", 4);
    let out = dir.path().join("y.wav");
    let res = mframe(&["enhance", "--in", &noisy, "--clean", &clean, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("noise"));

    let other_rate = dir.path().join("sr.wav");
    write_wav(&other_rate, &[0.0; 100], 16_000, WavEncoding::Float32).unwrap();
    let res = mframe(&["enhance", "--in", other_rate.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("16000 Hz"));

    let res = mframe(&["enhance", "--in", &noisy, "--filter", "bogus", "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
}

#[test]
fn evaluate_emits_one_line_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_clip(dir.path(), "a", 5);
    let b = write_clip(dir.path(), "b", 6);
    let rel = |p: &str| Path::new(p).file_name().unwrap().to_string_lossy().into_owned();
    let manifest = dir.path().join("m.tsv");
    let body = format!(
        "noisy\tclean\tnoise\n{}\t{}\t{}\n# comment\n{}\t{}\t{}\n",
        rel(&a[0]), rel(&a[1]), rel(&a[2]), b[0], b[1], b[2]
    );
    fs::write(&manifest, body).unwrap();
    let out = dir.path().join("r.jsonl");
    let enhanced = dir.path().join("enh");
    let res = mframe(&[
        "evaluate", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap(), "--out-dir",
        enhanced.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0]["file"].as_str().unwrap().ends_with("a_noisy.wav"));
    assert!(enhanced.join("b_noisy_enhanced.wav").exists());
}

#[test]
fn evaluate_flushes_partial_results_on_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_clip(dir.path(), "a", 7);
    let manifest = dir.path().join("m.tsv");
    fs::write(&manifest, format!("{}\t{}\t{}\nmissing.wav\t{}\t{}\n", a[0], a[1], a[2], a[1], a[2])).unwrap();
    let out = dir.path().join("r.jsonl");
    let res = mframe(&["evaluate", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.wav"));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);
}

#[test]
fn bench_writes_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let res = mframe(&[
        "bench", "--suite", "synthetic", "--grid", "default", "--clips", "1", "--seconds", "0.5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "filter,param,order,lookahead,si_sdr_db,seg_snr_db,rtf");
    assert_eq!(lines.len(), 9);
    assert!(lines.contains(&"mvdr,direct,5,2,not_invertible,not_invertible,not_invertible"));
    for kind in ["hermitian", "hermitian-inverse"] {
        for filter in ["wf", "mvdr"] {
            let row = lines.iter().find(|l| l.starts_with(&format!("{filter},{kind},"))).unwrap();
            assert!(!row.contains("not_invertible"), "{row}");
        }
    }
    assert!(String::from_utf8_lossy(&res.stderr).contains("not positive definite"));

    let res = mframe(&["bench", "--suite", "vctk"]);
    assert!(!res.status.success());
}
