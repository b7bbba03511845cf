//! Gain sweeps, error statistics, and result persistence.
//!
//! A sweep runs `grid x trials` independent training runs with per-trial
//! seeds derived from one master seed, so the record set is a pure function
//! of the configuration regardless of execution order. Records serialize to
//! JSON Lines; aggregates are a pure fold over records and can always be
//! recomputed from the persisted file.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::io::{BufRead, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dynamics::{Rank1Network, RankNNetwork};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::spectral_init::AblationKind;
use crate::targets::{self, TargetSeries};
use crate::training::{train_rank1, train_rank_n, ErrorTrace, TrainingSchedule};

/// Test error above this marks a run as an outlier in aggregates.
pub const OUTLIER_MAE: f64 = 0.4;

/// Error assigned to diverged runs so averages stay finite (targets are
/// normalized to [-1, 1]).
pub const DIVERGED_SENTINEL_MAE: f64 = 1.0;

/// Mean absolute deviation between two equally-shaped series, averaged over
/// channels and steps.
pub fn mae(f: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<f64> {
    if f.shape() != z.shape() {
        return Err(Error::argument(format!(
            "series shapes differ: {:?} vs {:?}",
            f.shape(),
            z.shape()
        )));
    }
    if f.is_empty() {
        return Err(Error::argument("series are empty"));
    }
    let sum: f64 = f.iter().zip(z.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / f.len() as f64)
}

/// Student-t interval on the mean: `(mean, t * sigma / sqrt(n))` with the
/// population standard deviation and `n - 1` degrees of freedom.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::argument("confidence interval needs >= 2 values"));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::argument("confidence level must lie in (0, 1)"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Ok((mean, 0.0));
    }
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.5 + level / 2.0);
    Ok((mean, t * sigma / n.sqrt()))
}

/// Which weights are trainable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Rank1,
    #[serde(rename = "rankn")]
    RankN,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Rank1 => write!(f, "rank1"),
            Architecture::RankN => write!(f, "rankn"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank1" => Ok(Architecture::Rank1),
            "rankn" | "rankN" => Ok(Architecture::RankN),
            other => Err(Error::argument(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Reservoir initialization selector for sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitSpec {
    Normal { sparsity: f64 },
    Rforce,
    Ablation { variant: AblationKind, m: usize },
}

impl InitSpec {
    pub fn from_name(name: &str, sparsity: f64) -> Result<Self> {
        Ok(match name {
            "normal" => InitSpec::Normal { sparsity },
            "rforce" => InitSpec::Rforce,
            other => InitSpec::Ablation {
                variant: other.parse()?,
                m: 4,
            },
        })
    }

    pub fn name(&self) -> String {
        match self {
            InitSpec::Normal { .. } => "normal".into(),
            InitSpec::Rforce => "rforce".into(),
            InitSpec::Ablation { variant, .. } => variant.to_string(),
        }
    }
}

/// Either trainable network, for uniform plumbing.
#[derive(Clone, Debug)]
pub enum Network {
    Rank1(Rank1Network),
    RankN(RankNNetwork),
}

impl Network {
    pub fn build(
        arch: Architecture,
        init: &InitSpec,
        n: usize,
        k: usize,
        g: f64,
        seed: u64,
    ) -> Result<Self> {
        Ok(match (arch, init) {
            (Architecture::Rank1, InitSpec::Normal { sparsity }) => {
                Network::Rank1(Rank1Network::normal_init(n, k, g, *sparsity, seed)?)
            }
            (Architecture::Rank1, InitSpec::Rforce) => {
                Network::Rank1(Rank1Network::rforce_init(n, k, g, seed)?)
            }
            (Architecture::Rank1, InitSpec::Ablation { variant, m }) => {
                Network::Rank1(Rank1Network::ablation_init(*variant, n, k, g, *m, seed)?)
            }
            (Architecture::RankN, InitSpec::Normal { sparsity }) => {
                Network::RankN(RankNNetwork::normal_init(n, k, g, *sparsity, seed)?)
            }
            (Architecture::RankN, InitSpec::Rforce) => {
                Network::RankN(RankNNetwork::rforce_init(n, k, g, seed)?)
            }
            (Architecture::RankN, InitSpec::Ablation { .. }) => {
                return Err(Error::argument(
                    "ablation layouts are only wired up for the rank-1 architecture",
                ))
            }
        })
    }

    pub fn train(
        &mut self,
        target: &TargetSeries,
        schedule: &TrainingSchedule,
        alpha: f64,
        seed: u64,
    ) -> Result<ErrorTrace> {
        match self {
            Network::Rank1(net) => train_rank1(net, target, schedule, alpha, seed),
            Network::RankN(net) => train_rank_n(net, target, schedule, alpha, seed),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Network::Rank1(net) => net.n(),
            Network::RankN(net) => net.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Network::Rank1(net) => net.k(),
            Network::RankN(net) => net.k(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Rank1(_) => Architecture::Rank1,
            Network::RankN(_) => Architecture::RankN,
        }
    }
}

/// Target selector for sweeps; built per trial so noise realizations follow
/// the trial seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSpec {
    MultiPeriodic {
        n_sines: usize,
        base_period: f64,
    },
    Discontinuous {
        base_period: f64,
    },
    Noisy {
        n_sines: usize,
        base_period: f64,
        sigma: f64,
    },
    SyntheticMotion {
        channels: usize,
        base_period: f64,
        episodes: usize,
    },
    MotionCsv {
        path: String,
        episodes: usize,
    },
}

impl TargetSpec {
    pub fn default_multi_periodic() -> Self {
        TargetSpec::MultiPeriodic {
            n_sines: targets::DEFAULT_SINES,
            base_period: targets::DEFAULT_BASE_PERIOD,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            TargetSpec::SyntheticMotion { channels, .. } => *channels,
            TargetSpec::MotionCsv { .. } => 66,
            _ => 1,
        }
    }

    pub fn build(&self, schedule: &TrainingSchedule, seed: u64) -> Result<TargetSeries> {
        let duration = schedule.train + schedule.test + schedule.dt;
        match self {
            TargetSpec::MultiPeriodic { n_sines, base_period } => {
                targets::multi_periodic(*n_sines, *base_period, None, duration, schedule.dt)
            }
            TargetSpec::Discontinuous { base_period } => {
                targets::discontinuous(*base_period, None, duration, schedule.dt)
            }
            TargetSpec::Noisy { n_sines, base_period, sigma } => {
                let base =
                    targets::multi_periodic(*n_sines, *base_period, None, duration, schedule.dt)?;
                targets::noisy(&base, *sigma, seed)
            }
            TargetSpec::SyntheticMotion { channels, base_period, episodes } => {
                targets::phase_shifted_bank(*channels, *base_period, *episodes, schedule.dt)
            }
            TargetSpec::MotionCsv { path, episodes } => {
                targets::load_motion_csv(path, *episodes)
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TargetSpec::MultiPeriodic { n_sines, .. } => format!("multiperiodic-{n_sines}"),
            TargetSpec::Discontinuous { .. } => "discontinuous".into(),
            TargetSpec::Noisy { sigma, .. } => format!("noisy-{sigma}"),
            TargetSpec::SyntheticMotion { channels, .. } => {
                format!("synthetic-motion-{channels}")
            }
            TargetSpec::MotionCsv { path, .. } => {
                Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "motion".into())
            }
        }
    }
}

/// Full sweep configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub g_min: f64,
    pub g_max: f64,
    pub g_step: f64,
    pub trials: usize,
    pub init: InitSpec,
    pub arch: Architecture,
    pub n: usize,
    pub k: usize,
    pub target: TargetSpec,
    pub schedule: TrainingSchedule,
    pub alpha: f64,
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn gain_grid(&self) -> Result<Vec<f64>> {
        if !(self.g_step > 0.0) || self.g_max < self.g_min {
            return Err(Error::argument("invalid gain grid"));
        }
        let mut grid = Vec::new();
        let mut i = 0usize;
        loop {
            let g = self.g_min + self.g_step * i as f64;
            if g > self.g_max + self.g_step * 0.5 {
                break;
            }
            grid.push(g);
            i += 1;
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        self.gain_grid()?;
        self.schedule.validate()?;
        if self.trials == 0 {
            return Err(Error::argument("trials must be >= 1"));
        }
        if self.k != self.target.channels() {
            return Err(Error::argument(format!(
                "k = {} does not match target channels {}",
                self.k,
                self.target.channels()
            )));
        }
        Ok(())
    }
}

/// One training run's persisted outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub g: f64,
    pub trial: usize,
    pub seed: u64,
    pub init_kind: String,
    pub architecture: Architecture,
    pub n: usize,
    pub k: usize,
    pub target_name: String,
    pub train_mae: f64,
    pub test_mae: f64,
    pub diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_in: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_channel_test_mae: Option<Vec<f64>>,
    pub schedule: TrainingSchedule,
    pub alpha: f64,
    pub master_seed: u64,
    /// Unix seconds at run start.
    pub started_at: u64,
    pub duration_ms: u64,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run one (g, trial) cell of a sweep.
pub fn run_single(config: &SweepConfig, g: f64, g_index: usize, trial: usize) -> Result<ExperimentRecord> {
    let seed = derive_seed(config.master_seed, g_index as u64, trial as u64);
    let started_at = unix_now();
    let clock = std::time::Instant::now();
    let target = config.target.build(&config.schedule, seed)?;
    let mut net = Network::build(config.arch, &config.init, config.n, config.k, g, seed)?;
    let init_kind = config.init.name();
    let outcome = net.train(&target, &config.schedule, config.alpha, seed);
    let (train_mae, test_mae, diverged, diverged_in, per_channel) = match outcome {
        Ok(trace) => (
            trace.train_mae,
            trace.test_mae,
            false,
            None,
            Some(trace.per_channel_test_mae),
        ),
        Err(Error::Divergence { phase, .. }) => (
            DIVERGED_SENTINEL_MAE,
            DIVERGED_SENTINEL_MAE,
            true,
            Some(phase.to_string()),
            None,
        ),
        Err(e) => return Err(e),
    };
    Ok(ExperimentRecord {
        g,
        trial,
        seed,
        init_kind,
        architecture: config.arch,
        n: config.n,
        k: config.k,
        target_name: config.target.name(),
        train_mae,
        test_mae,
        diverged,
        diverged_in,
        per_channel_test_mae: per_channel,
        schedule: config.schedule,
        alpha: config.alpha,
        master_seed: config.master_seed,
        started_at,
        duration_ms: clock.elapsed().as_millis() as u64,
    })
}

/// Execute the whole grid. Individual divergences become sentinel records;
/// only configuration errors abort the sweep. Records come back sorted by
/// `(g, trial)` regardless of execution order.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let grid = config.gain_grid()?;
    let cells: Vec<(usize, f64, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &g)| (0..config.trials).map(move |t| (gi, g, t)))
        .collect();

    #[cfg(feature = "parallel")]
    let results: Result<Vec<ExperimentRecord>> = cells
        .par_iter()
        .map(|&(gi, g, t)| run_single(config, g, gi, t))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<ExperimentRecord>> = cells
        .iter()
        .map(|&(gi, g, t)| run_single(config, g, gi, t))
        .collect();

    let mut records = results?;
    records.sort_by(|a, b| {
        a.g.partial_cmp(&b.g)
            .unwrap()
            .then(a.trial.cmp(&b.trial))
    });
    Ok(records)
}

/// Per-gain aggregate statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainAggregate {
    pub g: f64,
    pub n_trials: usize,
    pub mean_test_mae: f64,
    pub ci_test_half: f64,
    pub mean_train_mae: f64,
    pub ci_train_half: f64,
    /// Fraction of trials with test error above the outlier threshold.
    pub outlier_frac: f64,
    pub diverged_frac: f64,
}

/// Whole-sweep aggregate, recomputable from persisted records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub per_g: Vec<GainAggregate>,
    /// All trials pooled across the grid.
    pub pooled_test_mean: f64,
    pub pooled_test_ci_half: f64,
    /// Average of per-gain means, reported alongside the pooled figure.
    pub mean_of_per_g_means: f64,
    pub ci_level: f64,
    pub ci_method: String,
    pub outlier_threshold: f64,
}

pub fn aggregate_records(records: &[ExperimentRecord], ci_level: f64) -> Result<SweepAggregate> {
    if records.is_empty() {
        return Err(Error::argument("no records to aggregate"));
    }
    let mut by_g: Vec<(f64, Vec<&ExperimentRecord>)> = Vec::new();
    for r in records {
        match by_g.iter_mut().find(|(g, _)| (*g - r.g).abs() < 1e-12) {
            Some((_, v)) => v.push(r),
            None => by_g.push((r.g, vec![r])),
        }
    }
    by_g.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let ci = |vals: &[f64]| -> Result<(f64, f64)> {
        if vals.len() < 2 {
            Ok((vals.first().copied().unwrap_or(0.0), 0.0))
        } else {
            confidence_interval(vals, ci_level)
        }
    };

    let mut per_g = Vec::with_capacity(by_g.len());
    for (g, rs) in &by_g {
        let test: Vec<f64> = rs.iter().map(|r| r.test_mae).collect();
        let train: Vec<f64> = rs.iter().map(|r| r.train_mae).collect();
        let (mean_test, ci_test) = ci(&test)?;
        let (mean_train, ci_train) = ci(&train)?;
        let outliers = rs.iter().filter(|r| r.test_mae > OUTLIER_MAE).count();
        let diverged = rs.iter().filter(|r| r.diverged).count();
        per_g.push(GainAggregate {
            g: *g,
            n_trials: rs.len(),
            mean_test_mae: mean_test,
            ci_test_half: ci_test,
            mean_train_mae: mean_train,
            ci_train_half: ci_train,
            outlier_frac: outliers as f64 / rs.len() as f64,
            diverged_frac: diverged as f64 / rs.len() as f64,
        });
    }
    let pooled: Vec<f64> = records.iter().map(|r| r.test_mae).collect();
    let (pooled_mean, pooled_ci) = ci(&pooled)?;
    let mean_of_means =
        per_g.iter().map(|a| a.mean_test_mae).sum::<f64>() / per_g.len() as f64;
    Ok(SweepAggregate {
        per_g,
        pooled_test_mean: pooled_mean,
        pooled_test_ci_half: pooled_ci,
        mean_of_per_g_means: mean_of_means,
        ci_level,
        ci_method: "student-t".into(),
        outlier_threshold: OUTLIER_MAE,
    })
}

/// Append-free JSONL writer: one record per line, in order.
pub fn write_records_jsonl(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::format(e.to_string()))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ExperimentRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("record {i}: {e}")))?;
        out.push(r);
    }
    Ok(out)
}

/// Error-vs-gain curve as CSV: `g,mean_mae,ci_half,outlier_frac,phase`.
pub fn write_error_curve_csv(agg: &SweepAggregate, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "g,mean_mae,ci_half,outlier_frac,phase")?;
    for a in &agg.per_g {
        writeln!(
            file,
            "{},{},{},{},train",
            a.g, a.mean_train_mae, a.ci_train_half, a.outlier_frac
        )?;
        writeln!(
            file,
            "{},{},{},{},test",
            a.g, a.mean_test_mae, a.ci_test_half, a.outlier_frac
        )?;
    }
    file.flush()?;
    Ok(())
}
