//! Low-latency multi-frame speech enhancement.
//!
//! A short-window filter bank feeds per-bin stacks of the current and past
//! STFT frames. Each stack is filtered by a deep filter, a multi-frame Wiener
//! filter or a multi-frame MVDR filter built from oracle or externally
//! supplied statistics.

// `!(x > floor)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod filterbank;
pub mod filters;
pub mod linalg;
pub mod metrics;
pub mod mfmodel;
pub mod pipeline;
pub mod wav;
pub mod weights;

pub use error::{Error, Result};
pub use estimators::{BinInput, Estimator, EstimatorOutput, OracleConfig, OracleEstimator, PassthroughEstimator};
pub use filterbank::{analyze, latency_report, synthesize, ComplexSpectrogram, FilterbankConfig, LatencyReport};
pub use filters::{CovKind, CovParameterization, FilterKind, FilterWeights, WienerScaling};
pub use linalg::{CVec, Cholesky, HermitianCov, HermitianFactor};
pub use metrics::{seg_snr, si_sdr, MetricReport};
pub use mfmodel::{IfcVector, MfBufferConfig, MultiFrameBuffer, MultiFrameVector};
pub use pipeline::{enhance_stream, Enhanced, Enhancer, PipelineConfig};
pub use weights::WeightSequence;
