//! Python bindings: `import pymframe`.

use mframe::corpus::{self, CorpusSpec};
use mframe::filterbank::{self, ComplexSpectrogram, FilterbankConfig};
use mframe::filters::{self, CovKind, CovParameterization, FilterKind, WienerScaling};
use mframe::linalg::{self, CVec, HermitianCov, HermitianFactor};
use mframe::metrics;
use mframe::mfmodel::IfcVector;
use mframe::pipeline::{self, HighBandPolicy};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: mframe::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = mframe::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn cov(rows: Vec<Vec<Complex64>>) -> PyResult<HermitianCov> {
    HermitianCov::from_rows(&rows).map_err(py_err)
}

fn gamma(values: Vec<Complex64>, selection_index: usize) -> PyResult<IfcVector> {
    IfcVector::normalized(&CVec::from_slice(&values).map_err(py_err)?, selection_index).map_err(py_err)
}

/// Enhancement settings. Keyword arguments mirror the TOML config fields.
#[pyclass(name = "PipelineConfig", from_py_object)]
#[derive(Clone)]
struct PyPipelineConfig {
    inner: pipeline::PipelineConfig,
}

#[pymethods]
impl PyPipelineConfig {
    #[new]
    #[pyo3(signature = (filter="mvdr", order=5, lookahead=2, param="hermitian-inverse", f_mf=4000.0, high_band="passthrough", smoothing=0.96, diag_loading=1e-7, selection_index=None, strict=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        filter: &str,
        order: usize,
        lookahead: usize,
        param: &str,
        f_mf: f64,
        high_band: &str,
        smoothing: f64,
        diag_loading: f64,
        selection_index: Option<usize>,
        strict: bool,
    ) -> PyResult<Self> {
        let inner = pipeline::PipelineConfig {
            filter: parse(filter)?,
            order,
            lookahead,
            selection_index,
            f_mf,
            cov_kind: parse(param)?,
            high_band: parse::<HighBandPolicy>(high_band)?,
            smoothing,
            diag_loading,
            on_solve_failure: if strict {
                pipeline::FailurePolicy::Abort
            } else {
                pipeline::FailurePolicy::Passthrough
            },
            ..Default::default()
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: pipeline::PipelineConfig::from_toml_str(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn filter(&self) -> &'static str {
        self.inner.filter.name()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order
    }

    #[getter]
    fn lookahead(&self) -> usize {
        self.inner.lookahead
    }

    fn __repr__(&self) -> String {
        format!(
            "PipelineConfig(filter={:?}, order={}, lookahead={}, param={:?})",
            self.inner.filter.name(),
            self.inner.order,
            self.inner.lookahead,
            self.inner.cov_kind.name()
        )
    }
}

/// STFT frames of `signal` with the default 24 kHz filter bank, one list of 49 bins per frame.
#[pyfunction]
fn analyze(signal: Vec<f64>) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(filterbank::analyze(&signal, &FilterbankConfig::default()).map_err(py_err)?.frames)
}

#[pyfunction]
fn synthesize(frames: Vec<Vec<Complex64>>) -> PyResult<Vec<f64>> {
    let cfg = FilterbankConfig::default();
    let mut spec = ComplexSpectrogram::zeros(frames.len(), &cfg);
    spec.frames = frames;
    filterbank::synthesize(&spec, &cfg).map_err(py_err)
}

/// Latency breakdown in milliseconds for the default filter bank.
#[pyfunction]
#[pyo3(signature = (lookahead=2))]
fn latency(py: Python<'_>, lookahead: usize) -> PyResult<Bound<'_, PyDict>> {
    let r = filterbank::latency_report(&FilterbankConfig::default(), lookahead).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("filterbank_ms", r.filterbank_ms())?;
    d.set_item("lookahead_ms", r.lookahead_ms())?;
    d.set_item("total_ms", r.total_ms())?;
    d.set_item("filterbank_samples", r.filterbank_delay_samples)?;
    d.set_item("total_samples", r.total_samples())?;
    Ok(d)
}

#[pyfunction]
fn si_sdr(reference: Vec<f64>, estimate: Vec<f64>) -> PyResult<f64> {
    metrics::si_sdr(&reference, &estimate).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (reference, estimate, sample_rate=24000, frame_ms=10.0))]
fn seg_snr(reference: Vec<f64>, estimate: Vec<f64>, sample_rate: u32, frame_ms: f64) -> PyResult<f64> {
    metrics::seg_snr(&reference, &estimate, sample_rate, frame_ms).map_err(py_err)
}

/// `H Hᴴ` as a list of rows.
#[pyfunction]
fn hermitian_compose(factor: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let h = HermitianFactor::from_rows(&factor).map_err(py_err)?;
    Ok(linalg::hermitian_compose(&h).to_rows())
}

#[pyfunction]
fn solve_hpd(phi: Vec<Vec<Complex64>>, rhs: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let rhs = CVec::from_slice(&rhs).map_err(py_err)?;
    Ok(linalg::solve_hpd(&cov(phi)?, &rhs).map_err(py_err)?.to_vec())
}

/// MVDR weights for covariance `phi` (noisy or noise) and IFC vector `ifc`.
#[pyfunction]
#[pyo3(signature = (phi, ifc, selection_index=0, diag_loading=0.0))]
fn mvdr_weights(
    phi: Vec<Vec<Complex64>>,
    ifc: Vec<Complex64>,
    selection_index: usize,
    diag_loading: f64,
) -> PyResult<Vec<Complex64>> {
    let resolved = filters::resolve_cov(&CovParameterization::Direct(cov(phi)?), diag_loading).map_err(py_err)?;
    let w = filters::mvdr_weights(&resolved, &gamma(ifc, selection_index)?).map_err(py_err)?;
    Ok(w.to_vec())
}

#[pyfunction]
#[pyo3(signature = (phi_xx, ifc, phi_s, selection_index=0, diag_loading=0.0, scaled=true))]
fn wf_weights(
    phi_xx: Vec<Vec<Complex64>>,
    ifc: Vec<Complex64>,
    phi_s: f64,
    selection_index: usize,
    diag_loading: f64,
    scaled: bool,
) -> PyResult<Vec<Complex64>> {
    let resolved = filters::resolve_cov(&CovParameterization::Direct(cov(phi_xx)?), diag_loading).map_err(py_err)?;
    let scaling = if scaled { WienerScaling::Scaled } else { WienerScaling::Unscaled };
    let w = filters::wf_weights(&resolved, &gamma(ifc, selection_index)?, phi_s, scaling).map_err(py_err)?;
    Ok(w.to_vec())
}

/// Runs the enhancer. Returns `(samples, report)`; the report is a dict.
#[pyfunction]
#[pyo3(signature = (noisy, clean=None, noise=None, config=None))]
fn enhance<'py>(
    py: Python<'py>,
    noisy: Vec<f64>,
    clean: Option<Vec<f64>>,
    noise: Option<Vec<f64>>,
    config: Option<PyPipelineConfig>,
) -> PyResult<(Vec<f64>, Bound<'py, PyAny>)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let out = py
        .detach(|| pipeline::enhance_stream(&noisy, clean.as_deref(), noise.as_deref(), &cfg, None))
        .map_err(py_err)?;
    let json = py.import("json")?;
    let report = json.call_method1("loads", (out.report.to_json_line(),))?;
    Ok((out.samples, report))
}

/// Synthetic mixtures as a list of dicts with `name`, `snr_db`, `clean`, `noise`, `noisy`.
#[pyfunction]
#[pyo3(signature = (clips=10, seconds=5.0, snrs_db=vec![-5.0, 0.0, 5.0]))]
fn synthetic_corpus(py: Python<'_>, clips: usize, seconds: f64, snrs_db: Vec<f64>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let spec = CorpusSpec {
        clips,
        seconds,
        snrs_db,
        ..Default::default()
    };
    corpus::generate(&spec)
        .map_err(py_err)?
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("name", c.name)?;
            d.set_item("noise_kind", c.noise_kind.name())?;
            d.set_item("snr_db", c.snr_db)?;
            d.set_item("clean", c.clean)?;
            d.set_item("noise", c.noise)?;
            d.set_item("noisy", c.noisy)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pymframe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPipelineConfig>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(latency, m)?)?;
    m.add_function(wrap_pyfunction!(si_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(seg_snr, m)?)?;
    m.add_function(wrap_pyfunction!(hermitian_compose, m)?)?;
    m.add_function(wrap_pyfunction!(solve_hpd, m)?)?;
    m.add_function(wrap_pyfunction!(mvdr_weights, m)?)?;
    m.add_function(wrap_pyfunction!(wf_weights, m)?)?;
    m.add_function(wrap_pyfunction!(enhance, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add("FILTERS", FilterKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    m.add("PARAMETERIZATIONS", CovKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    Ok(())
}
