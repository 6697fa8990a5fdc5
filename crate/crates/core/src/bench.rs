//! Covariance-option grid over the synthetic corpus.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{generate, Clip, CorpusSpec};
use crate::error::{Error, Result};
use crate::filters::{CovKind, FilterKind};
use crate::pipeline::{enhance_stream, FailurePolicy, HighBandPolicy, PipelineConfig};

pub const CSV_HEADER: &str = "filter,param,order,lookahead,si_sdr_db,seg_snr_db,rtf";

/// Placed in the metric columns of configurations that hit a singular matrix.
pub const NOT_INVERTIBLE: &str = "not_invertible";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    /// {wf, mvdr} × four covariance kinds at N = 5, l = 2.
    #[default]
    Default,
    /// Adds mvdr-noisy and N ∈ {3, 5, 8}.
    Full,
}

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Grid::Default),
            "full" => Ok(Grid::Full),
            other => Err(Error::ConfigInvalid(format!("unknown grid '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub grid: Grid,
    pub corpus: CorpusSpec,
    /// Template for every configuration; filter, cov_kind and order are overridden.
    pub base: PipelineConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            grid: Grid::Default,
            corpus: CorpusSpec::default(),
            base: PipelineConfig {
                diag_loading: 0.0,
                high_band: HighBandPolicy::OracleGain,
                on_solve_failure: FailurePolicy::Abort,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Completed { si_sdr_db: f64, seg_snr_db: f64, rtf: f64 },
    NotInvertible { clip: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub filter: FilterKind,
    pub param: CovKind,
    pub order: usize,
    pub lookahead: usize,
    pub outcome: RowOutcome,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let mut line = format!(
            "{},{},{},{},",
            self.filter.name(),
            self.param.name(),
            self.order,
            self.lookahead
        );
        match &self.outcome {
            RowOutcome::Completed { si_sdr_db, seg_snr_db, rtf } => {
                write!(line, "{si_sdr_db:.3},{seg_snr_db:.3},{rtf:.5}").unwrap();
            }
            RowOutcome::NotInvertible { .. } => {
                write!(line, "{NOT_INVERTIBLE},{NOT_INVERTIBLE},{NOT_INVERTIBLE}").unwrap();
            }
        }
        line
    }

    pub fn completed(&self) -> bool {
        matches!(self.outcome, RowOutcome::Completed { .. })
    }
}

pub fn grid_configs(options: &BenchOptions) -> Vec<PipelineConfig> {
    let (filters, orders): (&[FilterKind], &[usize]) = match options.grid {
        Grid::Default => (&[FilterKind::Wiener, FilterKind::MvdrNoise], &[5]),
        Grid::Full => (
            &[FilterKind::Wiener, FilterKind::MvdrNoisy, FilterKind::MvdrNoise],
            &[3, 5, 8],
        ),
    };
    let mut out = Vec::new();
    for &order in orders {
        for &filter in filters {
            for kind in CovKind::ALL {
                out.push(PipelineConfig {
                    filter,
                    cov_kind: kind,
                    order,
                    ..options.base.clone()
                });
            }
        }
    }
    out
}

/// Runs one configuration over every clip. Singular covariances become a
/// `NotInvertible` row; other errors abort.
pub fn run_config(cfg: &PipelineConfig, clips: &[Clip]) -> Result<BenchRow> {
    let mut si = 0.0;
    let mut seg = 0.0;
    let mut processing = 0.0;
    let mut audio = 0.0;
    let mut outcome = None;
    for clip in clips {
        let start = Instant::now();
        match enhance_stream(&clip.noisy, Some(&clip.clean), Some(&clip.noise), cfg, None) {
            Ok(out) => {
                processing += start.elapsed().as_secs_f64();
                audio += clip.noisy.len() as f64 / cfg.filterbank.sample_rate as f64;
                si += out.report.si_sdr_db.unwrap_or(f64::NAN);
                seg += out.report.seg_snr_db.unwrap_or(f64::NAN);
            }
            Err(e @ (Error::NotPositiveDefinite { .. } | Error::DegenerateDenominator(_))) => {
                outcome = Some(RowOutcome::NotInvertible {
                    clip: clip.name.clone(),
                    message: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let n = clips.len().max(1) as f64;
    Ok(BenchRow {
        filter: cfg.filter,
        param: cfg.cov_kind,
        order: cfg.order,
        lookahead: cfg.lookahead,
        outcome: outcome.unwrap_or(RowOutcome::Completed {
            si_sdr_db: si / n,
            seg_snr_db: seg / n,
            rtf: if audio > 0.0 { processing / audio } else { 0.0 },
        }),
    })
}

pub fn run_bench(options: &BenchOptions) -> Result<Vec<BenchRow>> {
    let clips = generate(&options.corpus)?;
    grid_configs(options).iter().map(|cfg| run_config(cfg, &clips)).collect()
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}
