//! State-Jacobian spectra and forward-Euler stability accounting.
//!
//! The Jacobian of the evolution map at state `x` is
//! `J = -I + (g M + w_f w') diag(1 - tanh(x)^2)`, with the feedback term
//! present only in the rank-1 architecture. An eigenvalue is inside the
//! forward-Euler stability disk iff `|1 + dt L| < 1`; counts against the
//! unit circle are reported as well since spectra are usually plotted
//! against it.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{NetworkState, Rank1Network, RankNNetwork};
use crate::error::{Error, Result};
use crate::targets::TargetSeries;
use crate::training::{tanh_into, RlsTrainer, TrainingSchedule};

/// Jacobian from raw parts. `feedback` supplies `(w_feedback, w_readout)`
/// when the architecture has an output loop.
pub fn jacobian(
    gain: f64,
    reservoir: &DMatrix<f64>,
    feedback: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
    x: &DVector<f64>,
) -> DMatrix<f64> {
    let n = reservoir.nrows();
    let mut j = reservoir * gain;
    if let Some((w_f, w)) = feedback {
        j.gemm(1.0, w_f, &w.transpose(), 1.0);
    }
    for (col, xi) in x.iter().enumerate() {
        let d = 1.0 - xi.tanh().powi(2);
        j.column_mut(col).scale_mut(d);
    }
    for i in 0..n {
        j[(i, i)] -= 1.0;
    }
    j
}

pub fn jacobian_rank1(net: &Rank1Network, state: &NetworkState) -> DMatrix<f64> {
    jacobian(
        net.gain,
        &net.reservoir,
        Some((&net.w_feedback, &net.w_readout)),
        &state.x,
    )
}

pub fn jacobian_rank_n(net: &RankNNetwork, state: &NetworkState) -> DMatrix<f64> {
    jacobian(net.gain, &net.reservoir, None, &state.x)
}

/// The reservoir bordered by the readout loop: `M` in the leading block,
/// feedback weights as trailing columns, readout weights transposed as
/// trailing rows, zero corner block.
pub fn combined_matrix(net: &Rank1Network) -> DMatrix<f64> {
    let (n, k) = (net.n(), net.k());
    let mut m = DMatrix::zeros(n + k, n + k);
    m.view_mut((0, 0), (n, n)).copy_from(&net.reservoir);
    m.view_mut((0, n), (n, k)).copy_from(&net.w_feedback);
    m.view_mut((n, 0), (k, n))
        .copy_from(&net.w_readout.transpose());
    m
}

/// Eigenvalues of a real square matrix.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().cloned().collect()
}

/// Stability counts of an eigenvalue cloud at step size `dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    /// Count of eigenvalues with `|1 + dt L| > 1`.
    pub n_outside_fe: usize,
    /// Largest value of `|1 + dt L| - 1` over the cloud.
    pub max_fe_excess: f64,
    /// Count of eigenvalues with `|L| > 1`.
    pub n_outside_unit: usize,
}

pub fn stability_metrics(eigenvalues: &[Complex<f64>], dt: f64) -> Result<StabilityMetrics> {
    if !(dt > 0.0) {
        return Err(Error::argument("dt must be positive"));
    }
    let mut n_outside_fe = 0;
    let mut n_outside_unit = 0;
    let mut max_fe_excess = f64::NEG_INFINITY;
    for l in eigenvalues {
        let amp = (Complex::new(1.0, 0.0) + l * dt).norm();
        let excess = amp - 1.0;
        max_fe_excess = max_fe_excess.max(excess);
        if excess > 0.0 {
            n_outside_fe += 1;
        }
        if l.norm() > 1.0 {
            n_outside_unit += 1;
        }
    }
    if eigenvalues.is_empty() {
        max_fe_excess = 0.0;
    }
    Ok(StabilityMetrics {
        n_outside_fe,
        max_fe_excess,
        n_outside_unit,
    })
}

/// Which part of a run a snapshot was taken in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnapshotPhase {
    #[serde(rename = "none")]
    NoTraining,
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "test")]
    Test,
}

impl SnapshotPhase {
    pub fn name(self) -> &'static str {
        match self {
            SnapshotPhase::NoTraining => "none",
            SnapshotPhase::Train => "train",
            SnapshotPhase::Test => "test",
        }
    }
}

/// Jacobian spectrum observed at one instant of a run.
#[derive(Clone, Debug)]
pub struct JacobianSnapshot {
    pub eigenvalues: Vec<Complex<f64>>,
    pub t: f64,
    pub phase: SnapshotPhase,
    pub n_outside_fe: usize,
    pub max_fe_excess: f64,
    /// Set on the terminal snapshot when the run blew up.
    pub diverged: bool,
}

/// Evolve (and train) a copy of the network, recording a Jacobian snapshot
/// at the start of every phase and every `cadence` steps within it. The
/// warmup window doubles as the before-training observation phase. A
/// divergence ends the run with a flagged terminal snapshot instead of an
/// error.
pub fn snapshot_run(
    net: &Rank1Network,
    target: &TargetSeries,
    schedule: &TrainingSchedule,
    cadence: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<JacobianSnapshot>> {
    if cadence == 0 {
        return Err(Error::argument("cadence must be >= 1"));
    }
    schedule.validate()?;
    if target.channels() != net.k() {
        return Err(Error::argument("target channel count must match network"));
    }

    let mut net = net.clone();
    let (n, k) = (net.n(), net.k());
    let dt = schedule.dt;
    let mut trainer = RlsTrainer::new(n, alpha, schedule.update_interval)?;
    let mut x = NetworkState::from_seed(n, crate::dynamics::INITIAL_STATE_STD, seed).x;
    let mut r = DVector::zeros(n);
    let mut z = DVector::zeros(k);
    let mut errors = DVector::zeros(k);
    let mut drive = DVector::zeros(n);
    let mut snaps = Vec::new();

    let phases = [
        (SnapshotPhase::NoTraining, schedule.warmup_steps()),
        (SnapshotPhase::Train, schedule.train_steps()),
        (SnapshotPhase::Test, schedule.test_steps()),
    ];
    let mut t = 0.0;
    for (phase, steps) in phases {
        for s in 0..steps {
            if s % cadence == 0 {
                snaps.push(take_snapshot(&net, &x, t, phase, dt)?);
            }
            tanh_into(&x, &mut r);
            z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
            if phase == SnapshotPhase::Train {
                for j in 0..k {
                    errors[j] = z[j] - target.training_value(s, j);
                }
                if s % schedule.update_interval == 0 {
                    trainer.rls_update(&r, &errors, &mut net.w_readout)?;
                    z.gemv_tr(1.0, &net.w_readout, &r, 0.0);
                }
            }
            drive.gemv(net.gain, &net.reservoir, &r, 0.0);
            drive.gemv(1.0, &net.w_feedback, &z, 1.0);
            x.axpy(dt, &drive, 1.0 - dt);
            t += dt;
            if crate::dynamics::check_finite(&x, phase.name(), s as u64 + 1).is_err() {
                snaps.push(JacobianSnapshot {
                    eigenvalues: Vec::new(),
                    t,
                    phase,
                    n_outside_fe: 0,
                    max_fe_excess: 0.0,
                    diverged: true,
                });
                return Ok(snaps);
            }
        }
    }
    Ok(snaps)
}

fn take_snapshot(
    net: &Rank1Network,
    x: &DVector<f64>,
    t: f64,
    phase: SnapshotPhase,
    dt: f64,
) -> Result<JacobianSnapshot> {
    let j = jacobian(
        net.gain,
        &net.reservoir,
        Some((&net.w_feedback, &net.w_readout)),
        x,
    );
    let eigenvalues = spectrum(&j);
    let metrics = stability_metrics(&eigenvalues, dt)?;
    Ok(JacobianSnapshot {
        eigenvalues,
        t,
        phase,
        n_outside_fe: metrics.n_outside_fe,
        max_fe_excess: metrics.max_fe_excess,
        diverged: false,
    })
}
